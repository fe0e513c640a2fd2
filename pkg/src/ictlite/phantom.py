"""Analytic phantoms: additive geometric primitives plus a text file format.

File grammar (one primitive per line, '#' starts a comment):

    sphere   cx cy cz  radius            density
    box      cx cy cz  sx sy sz          density
    cylinder cx cy cz  radius height     density

All lengths in mm; the cylinder axis is parallel to z; box sides are
axis-aligned full extents. Densities are dimensionless and add where
primitives overlap.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class Primitive:
    shape: str  # "sphere" | "box" | "cylinder"
    center: tuple[float, float, float]  # mm
    params: tuple[float, ...]  # sphere: (r,); box: (sx, sy, sz); cylinder: (r, h)
    density: float

    _NPARAMS = {"sphere": 1, "box": 3, "cylinder": 2}

    def __post_init__(self):
        if self.shape not in self._NPARAMS:
            raise ValueError(f"unknown primitive shape {self.shape!r}")
        if len(self.params) != self._NPARAMS[self.shape]:
            raise ValueError(f"{self.shape} takes {self._NPARAMS[self.shape]} size parameters")
        if any(p <= 0 for p in self.params):
            raise ValueError("size parameters must be > 0")


@dataclass(frozen=True)
class Phantom:
    primitives: tuple[Primitive, ...]

    def scaled(self, c: float) -> "Phantom":
        """Same shapes with every density multiplied by c."""
        return Phantom(
            tuple(
                Primitive(p.shape, p.center, p.params, p.density * c) for p in self.primitives
            )
        )


def sphere(center, radius, density=1.0) -> Primitive:
    return Primitive("sphere", tuple(float(c) for c in center), (float(radius),), float(density))


def box(center, sides, density=1.0) -> Primitive:
    return Primitive("box", tuple(float(c) for c in center), tuple(float(s) for s in sides), float(density))


def cylinder(center, radius, height, density=1.0) -> Primitive:
    return Primitive(
        "cylinder", tuple(float(c) for c in center), (float(radius), float(height)), float(density)
    )


def parse_phantom(text: str) -> Phantom:
    prims = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        shape = tokens[0].lower()
        try:
            values = [float(t) for t in tokens[1:]]
        except ValueError as exc:
            raise ValueError(f"phantom line {lineno}: non-numeric field ({exc})") from None
        n_need = {"sphere": 5, "box": 7, "cylinder": 6}.get(shape)
        if n_need is None:
            raise ValueError(f"phantom line {lineno}: unknown shape {shape!r}")
        if len(values) != n_need:
            raise ValueError(
                f"phantom line {lineno}: {shape} needs {n_need} numbers, got {len(values)}"
            )
        center = tuple(values[0:3])
        params = tuple(values[3:-1])
        prims.append(Primitive(shape, center, params, values[-1]))
    return Phantom(tuple(prims))


def load_phantom(path) -> Phantom:
    return parse_phantom(Path(path).read_text())


def format_phantom(phantom: Phantom) -> str:
    lines = []
    for p in phantom.primitives:
        fields = [p.shape, *(repr(v) for v in (*p.center, *p.params, p.density))]
        lines.append(" ".join(fields))
    return "\n".join(lines) + "\n"


def save_phantom(phantom: Phantom, path) -> None:
    Path(path).write_text(format_phantom(phantom))


def contains(prim: Primitive, x: np.ndarray, y: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Boolean mask: which points (broadcastable arrays, mm) lie inside."""
    cx, cy, cz = prim.center
    if prim.shape == "sphere":
        (r,) = prim.params
        return (x - cx) ** 2 + (y - cy) ** 2 + (z - cz) ** 2 <= r * r
    if prim.shape == "box":
        sx, sy, sz = prim.params
        return (
            (np.abs(x - cx) <= sx / 2.0)
            & (np.abs(y - cy) <= sy / 2.0)
            & (np.abs(z - cz) <= sz / 2.0)
        )
    # cylinder
    r, h = prim.params
    return ((x - cx) ** 2 + (y - cy) ** 2 <= r * r) & (np.abs(z - cz) <= h / 2.0)
