"""Shared HTTP-client plumbing for the three service protocols."""

from __future__ import annotations

import os

import requests


def service_session() -> requests.Session:
    """Session for service clients; bearer token from the environment only."""
    session = requests.Session()
    token = os.environ.get("RANKFORGE_API_TOKEN")
    if token:
        session.headers["Authorization"] = f"Bearer {token}"
    return session
