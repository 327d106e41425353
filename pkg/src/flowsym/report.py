"""Run reports and artifact writers (all writes are atomic: temp file + rename)."""

from __future__ import annotations

import json
import os
import tempfile
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np


def atomic_write(path, data: bytes | str) -> Path:
    """Write ``data`` to ``path`` via a temporary file in the same directory."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": "\n"})) as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, Path):
        return str(x)
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


@dataclass
class RunReport:
    """Reproducibility record of one run."""

    kind: str
    config: dict[str, Any] = field(default_factory=dict)
    seed: int = 0
    trace: list[float] = field(default_factory=list)
    metrics: dict[str, Any] = field(default_factory=dict)
    wall_time: float = 0.0
    tiling_valid: bool | None = None
    outputs: dict[str, str] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(_jsonable(asdict(self)), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        d = json.loads(text)
        return cls(**d)

    def save(self, path) -> Path:
        return atomic_write(path, self.to_json() + "\n")

    @classmethod
    def load(cls, path) -> "RunReport":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


class Stopwatch:
    def __init__(self):
        self.t0 = time.perf_counter()

    def elapsed(self) -> float:
        return time.perf_counter() - self.t0


def pgm_bytes(img: np.ndarray, maxval: int = 255) -> bytes:
    """Binary PGM (P5) of a 2-D array with values in [0, 1]."""
    a = np.clip(np.asarray(img, float), 0.0, 1.0)
    h, w = a.shape
    data = np.round(a * maxval).astype(np.uint8 if maxval < 256 else ">u2")
    return f"P5\n{w} {h}\n{maxval}\n".encode("ascii") + data.tobytes()


def write_pgm(path, img: np.ndarray) -> Path:
    return atomic_write(path, pgm_bytes(img))


def write_csv(path, header: list[str], rows) -> Path:
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join(repr(float(v)) if isinstance(v, (float, np.floating)) else str(v) for v in r))
    return atomic_write(path, "\n".join(lines) + "\n")


def write_grid_csv(path, grid: np.ndarray) -> Path:
    """Grid values with ``row,col,value`` header (row 0 at the top)."""
    g = np.asarray(grid, float)
    rows = ((i, j, g[i, j]) for i in range(g.shape[0]) for j in range(g.shape[1]))
    return write_csv(path, ["row", "col", "value"], rows)
