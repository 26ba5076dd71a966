"""Deterministic seed derivation.

All randomness in the pipeline flows from per-unit seeds derived by hashing a
root seed with stable string parts (query id, doc id, purpose tags), so
results do not depend on worker scheduling or Python's salted ``hash``.
"""

from __future__ import annotations

import hashlib
import random


def derive_seed(root: int | str, *parts: object) -> int:
    material = "/".join([str(root)] + [str(p) for p in parts])
    digest = hashlib.sha256(material.encode("utf-8")).hexdigest()
    return int(digest[:16], 16)


def rng_for(root: int | str, *parts: object) -> random.Random:
    return random.Random(derive_seed(root, *parts))
