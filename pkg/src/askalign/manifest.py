"""Run manifests: provenance records tying stage inputs to outputs."""

from __future__ import annotations

import hashlib
import os
import time
import uuid
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

from .jsonl import dump_json, load_json


class ManifestError(Exception):
    pass


class RunLockedError(ManifestError):
    pass


def file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    run_id: str
    stage: str
    inputs: list[dict] = field(default_factory=list)      # {path, digest}
    outputs: list[dict] = field(default_factory=list)
    endpoints: list[str] = field(default_factory=list)
    started: float = field(default_factory=time.time)
    finished: float | None = None
    status: str = "running"
    info: dict = field(default_factory=dict)

    @staticmethod
    def start(stage: str, input_paths: list[str | Path],
              endpoints: list[str]) -> "RunManifest":
        manifest = RunManifest(run_id=uuid.uuid4().hex[:12], stage=stage,
                               endpoints=list(endpoints))
        for path in input_paths:
            manifest.inputs.append({"path": str(path),
                                    "digest": file_digest(path)})
        return manifest

    def finish(self, output_paths: list[str | Path],
               info: dict | None = None) -> None:
        # Outputs are recorded only on success.
        self.outputs = [{"path": str(p), "digest": file_digest(p)}
                        for p in output_paths]
        self.status = "succeeded"
        self.finished = time.time()
        if info:
            self.info.update(info)

    def fail(self, error: str) -> None:
        self.status = "failed"
        self.finished = time.time()
        self.info["error"] = error

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id, "stage": self.stage,
            "inputs": self.inputs, "outputs": self.outputs,
            "endpoints": self.endpoints, "started": self.started,
            "finished": self.finished, "status": self.status,
            "info": self.info,
        }

    @staticmethod
    def from_dict(d: dict) -> "RunManifest":
        manifest = RunManifest(run_id=d["run_id"], stage=d["stage"])
        manifest.inputs = list(d.get("inputs", []))
        manifest.outputs = list(d.get("outputs", []))
        manifest.endpoints = list(d.get("endpoints", []))
        manifest.started = d.get("started", 0.0)
        manifest.finished = d.get("finished")
        manifest.status = d.get("status", "unknown")
        manifest.info = dict(d.get("info", {}))
        return manifest

    def save(self, run_dir: str | Path) -> Path:
        path = Path(run_dir) / "manifests" / f"{self.stage}.json"
        dump_json(path, self.to_dict())
        return path

    @staticmethod
    def load(run_dir: str | Path, stage: str) -> "RunManifest | None":
        path = Path(run_dir) / "manifests" / f"{stage}.json"
        if not path.exists():
            return None
        return RunManifest.from_dict(load_json(path))


def digests_match(entries: list[dict]) -> bool:
    """True when every recorded path still exists with the same content."""
    for entry in entries:
        path = Path(entry["path"])
        if not path.exists() or file_digest(path) != entry["digest"]:
            return False
    return True


@contextmanager
def run_lock(run_dir: str | Path, force: bool = False):
    """One stage process at a time per run directory."""
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    lock_path = run_dir / ".lock"
    if force and lock_path.exists():
        lock_path.unlink()
    try:
        fd = os.open(lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise RunLockedError(
            f"run directory {run_dir} is locked by another stage process "
            "(use --force to override a stale lock)") from None
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        if lock_path.exists():
            lock_path.unlink()
