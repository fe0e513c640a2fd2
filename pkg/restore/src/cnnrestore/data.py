"""Training pairs, normalization, augmentation, and raw slice I/O.

Slices travel in the same raw format the CT pipeline uses for volumes
(headerless little-endian float32 plus a ``key = value`` sidecar), so the
pipeline's metrics tooling can score restored output directly.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from ictlite.geometry import Volume
from ictlite.rawio import load_volume, save_volume


@dataclass(frozen=True)
class TrainingPair:
    """Corrupted slice and its ground truth, both normalized to [0, 1].

    lo/hi record the affine normalization (taken from the ground truth)
    so restored output can be mapped back to physical units.
    """

    corrupted: np.ndarray
    truth: np.ndarray
    lo: float
    hi: float

    def __post_init__(self):
        if self.corrupted.shape != self.truth.shape:
            raise ValueError("corrupted/truth shape mismatch")
        if not self.hi > self.lo:
            raise ValueError("degenerate normalization range")


def normalize_pair(corrupted: np.ndarray, truth: np.ndarray) -> TrainingPair:
    lo, hi = float(truth.min()), float(truth.max())
    if not hi > lo:
        raise ValueError("ground-truth slice is constant; cannot normalize")
    scale = hi - lo
    return TrainingPair(
        corrupted=np.clip((corrupted - lo) / scale, -1.0, 2.0).astype(np.float32),
        truth=((truth - lo) / scale).astype(np.float32),
        lo=lo,
        hi=hi,
    )


def pairs_from_volumes(corrupted: Volume, truth: Volume) -> list[TrainingPair]:
    """One pair per z-slice; constant truth slices are skipped."""
    if corrupted.data.shape != truth.data.shape:
        raise ValueError("volume shape mismatch")
    out = []
    for c_slice, t_slice in zip(corrupted.data, truth.data):
        if t_slice.max() > t_slice.min():
            out.append(normalize_pair(np.asarray(c_slice), np.asarray(t_slice)))
    return out


def augment(pairs: list[TrainingPair], seed: int = 0, variants: int = 10) -> list[TrainingPair]:
    """Expand each pair into 1 + `variants` pairs (original + seeded
    rotations/translations applied identically to both slices)."""
    if not pairs:
        raise ValueError("no pairs to augment")
    rng = np.random.default_rng(seed)
    out = []
    for pair in pairs:
        out.append(pair)
        for _ in range(variants):
            angle = float(rng.uniform(-15.0, 15.0))
            shift = rng.uniform(-4.0, 4.0, size=2)

            def xform(img):
                moved = ndimage.rotate(img, angle, reshape=False, order=1, mode="nearest")
                return ndimage.shift(moved, shift, order=1, mode="nearest").astype(np.float32)

            out.append(
                TrainingPair(xform(pair.corrupted), xform(pair.truth), pair.lo, pair.hi)
            )
    return out


def load_slice(path) -> Volume:
    vol = load_volume(path)
    if vol.data.shape[0] != 1:
        raise ValueError(f"{path}: expected a single-slice volume, got nz={vol.data.shape[0]}")
    return vol


def save_slice(data: np.ndarray, voxel_pitch: float, path) -> None:
    save_volume(Volume(voxel_pitch=voxel_pitch, data=data[None].astype(np.float32)), path)


def list_slices(directory) -> list[Path]:
    paths = sorted(p for p in Path(directory).iterdir() if p.suffix == ".vol")
    if not paths:
        raise ValueError(f"no .vol slices in {directory}")
    return paths
