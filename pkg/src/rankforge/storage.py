"""JSONL and atomic-file helpers.

Every pipeline artifact is JSONL (one object per line) except run files and
final CSV tables. All writes go through write-then-rename so interrupted jobs
never leave torn files behind.
"""

from __future__ import annotations

import json
import os
import tempfile
from typing import Iterable, Iterator

from .errors import DataError
from .models import Document, Query


def atomic_write_text(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.unlink(tmp_path)
        raise


def dump_json_line(row: dict) -> str:
    return json.dumps(row, ensure_ascii=False, separators=(", ", ": "))


def write_jsonl(path: str, rows: Iterable[dict]) -> int:
    lines = [dump_json_line(row) for row in rows]
    atomic_write_text(path, "\n".join(lines) + ("\n" if lines else ""))
    return len(lines)


def read_jsonl(path: str) -> Iterator[dict]:
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, raw in enumerate(handle, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{line_no}: invalid JSON: {exc}") from exc


def write_json(path: str, payload: object) -> None:
    atomic_write_text(path, json.dumps(payload, ensure_ascii=False, indent=2) + "\n")


def load_documents(path: str) -> list[Document]:
    docs = []
    seen: set[str] = set()
    for row in read_jsonl(path):
        if "id" not in row or "text" not in row:
            raise DataError(f"{path}: corpus rows need 'id' and 'text'")
        if row["id"] in seen:
            raise DataError(f"{path}: duplicate document id {row['id']!r}")
        seen.add(row["id"])
        docs.append(Document(id=str(row["id"]), text=str(row["text"])))
    return docs


def load_queries(path: str) -> list[Query]:
    queries = []
    seen: set[str] = set()
    for row in read_jsonl(path):
        if "id" not in row or "text" not in row:
            raise DataError(f"{path}: query rows need 'id' and 'text'")
        if row["id"] in seen:
            raise DataError(f"{path}: duplicate query id {row['id']!r}")
        seen.add(row["id"])
        queries.append(Query(id=str(row["id"]), text=str(row["text"])))
    return queries
