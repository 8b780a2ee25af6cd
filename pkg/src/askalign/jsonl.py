"""Line-delimited JSON files: the persistence format for every record stream."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Iterable, Iterator


def write_jsonl(path: str | Path, records: Iterable[dict]) -> int:
    """Write records one per line; returns the count written."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = 0
    with path.open("w", encoding="utf-8") as f:
        for record in records:
            f.write(json.dumps(record, ensure_ascii=False, sort_keys=True))
            f.write("\n")
            n += 1
    return n


def read_jsonl(path: str | Path) -> Iterator[tuple[int, dict]]:
    """Yield (line_number, record) pairs, skipping blank lines.

    Line numbers are 1-based so they can go straight into error messages.
    """
    with Path(path).open("r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            yield lineno, json.loads(stripped)


def iter_lines(source: str | Path | Iterable[str]) -> Iterator[tuple[int, str]]:
    """Numbered lines from a path or any iterable of strings."""
    if isinstance(source, (str, Path)) :
        with Path(source).open("r", encoding="utf-8") as f:
            for lineno, line in enumerate(f, start=1):
                yield lineno, line
    else:
        for lineno, line in enumerate(source, start=1):
            yield lineno, line


def dump_json(path: str | Path, obj: Any) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
                    encoding="utf-8")


def load_json(path: str | Path) -> Any:
    return json.loads(Path(path).read_text(encoding="utf-8"))
