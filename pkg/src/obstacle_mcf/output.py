"""Artifact writing: a tracked output directory, CSV tables and grayscale previews."""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .grid import ScalarField

FAILED = "FAILED"
MANIFEST = "manifest.txt"


class OutputDir:
    """Remembers every file written through it so the manifest is exact."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        for stale in (FAILED, MANIFEST):
            (self.root / stale).unlink(missing_ok=True)
        self.files: list[Path] = []

    def path(self, rel: str) -> Path:
        p = self.root / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def add(self, paths: Iterable[Path] | Path) -> None:
        if isinstance(paths, Path):
            paths = [paths]
        for p in paths:
            p = Path(p)
            if p not in self.files:
                self.files.append(p)

    def write_text(self, rel: str, text: str) -> Path:
        p = self.path(rel)
        p.write_text(text)
        self.add(p)
        return p

    def write_csv(self, rel: str, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
        lines = [",".join(header)]
        for row in rows:
            lines.append(",".join(_cell(v) for v in row))
        return self.write_text(rel, "\n".join(lines) + "\n")

    def write_report(self, rel: str, items: Iterable[tuple[str, object]]) -> Path:
        return self.write_text(rel, "".join(f"{k} = {_cell(v)}\n" for k, v in items))

    def fail(self, message: str) -> Path:
        return self.write_text(FAILED, message.rstrip() + "\n")

    def finish(self) -> Path:
        """Write ``manifest.txt``: one ``relative/path size`` line per emitted file."""
        lines = []
        for p in sorted(self.files, key=lambda q: q.relative_to(self.root).as_posix()):
            lines.append(f"{p.relative_to(self.root).as_posix()} {p.stat().st_size}")
        m = self.root / MANIFEST
        m.write_text("\n".join(lines) + ("\n" if lines else ""))
        return m


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.9g}"
    return str(v)


def write_pgm(path, f: ScalarField, scale: float) -> Path:
    """8-bit binary PGM, gray = 127.5 * (1 + u / scale) clipped; the zero level is mid-gray.

    Row 0 of the image is the top of the domain (largest y).
    """
    if not scale > 0:
        scale = 1.0
    g = np.clip(np.rint(127.5 * (1.0 + f.values / scale)), 0, 255).astype(np.uint8)[::-1]
    ny, nx = g.shape
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{nx} {ny}\n255\n".encode("ascii"))
        fh.write(g.tobytes())
    return path
