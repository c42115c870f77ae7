"""Deterministic CSV and run-metadata writers."""
from __future__ import annotations

import json
import time
from pathlib import Path

__all__ = ["fmt", "write_csv", "RunMeta"]


def fmt(v) -> str:
    if isinstance(v, bool):
        return str(v)
    if isinstance(v, float):
        return f"{v:.12g}"
    return str(v)


def write_csv(path, header, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


class RunMeta:
    """Collects resolved config, timings and warnings for one command run."""

    def __init__(self, command: str, config_text: str, version: str):
        self.payload = {
            "command": command,
            "version": version,
            "config": config_text,
            "timings_s": {},
            "warnings": [],
            "results": {},
        }
        self._marks: dict[str, float] = {}

    def start(self, name: str) -> None:
        self._marks[name] = time.perf_counter()

    def stop(self, name: str) -> float:
        dt = time.perf_counter() - self._marks.pop(name)
        self.payload["timings_s"][name] = round(dt, 3)
        return dt

    def warn(self, message: str) -> None:
        self.payload["warnings"].append(message)

    def record(self, key: str, value) -> None:
        self.payload["results"][key] = value

    def save(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as fh:
            json.dump(self.payload, fh, indent=2, default=str)
            fh.write("\n")
