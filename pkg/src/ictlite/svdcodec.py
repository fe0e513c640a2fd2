"""Truncated-SVD compression of projection stacks and the SVZ container.

Each view is compressed independently: G ~= sum_{i<=k} sigma_i u_i v_i^T,
the best rank-k Frobenius approximation. Left/right factors are stored at
4-byte precision (column-major in the container), singular values at
8-byte.

SVZ container layout (all integers little-endian):

    magic "SVZ1" | u16 version=1 | u32 n_views | u32 m | u32 n | u32 k |
    u32 geometry-text length | geometry text (sidecar grammar, inline
    angles) | per view: m*k f32 U (column-major), k f64 sigma,
    n*k f32 V (column-major)
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import ProjectionStack, ScanGeometry
from .rawio import geometry_from_text, geometry_to_text

MAGIC = b"SVZ1"
VERSION = 1


@dataclass(frozen=True)
class SvdView:
    """Rank-k factors of one projection: u (m,k) f32, s (k,) f64, v (n,k) f32."""

    u: np.ndarray
    s: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        u = np.ascontiguousarray(self.u, dtype=np.float32)
        s = np.ascontiguousarray(self.s, dtype=np.float64)
        v = np.ascontiguousarray(self.v, dtype=np.float32)
        if u.ndim != 2 or v.ndim != 2 or s.ndim != 1:
            raise ValueError("u, v must be 2D and s 1D")
        k = s.size
        if u.shape[1] != k or v.shape[1] != k:
            raise ValueError("u, s, v must share the same column count k")
        if k > min(u.shape[0], v.shape[0]):
            raise ValueError("k exceeds min(m, n)")
        if np.any(s < 0) or np.any(np.diff(s) > 0):
            raise ValueError("singular values must be non-negative and non-increasing")
        for arr in (u, s, v):
            arr.setflags(write=False)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "v", v)

    @property
    def shape(self) -> tuple[int, int, int]:
        """(m, n, k)."""
        return self.u.shape[0], self.v.shape[0], self.s.size


@dataclass(frozen=True)
class SvdScan:
    geometry: ScanGeometry
    rank: int
    views: tuple[SvdView, ...]

    def __post_init__(self):
        if len(self.views) != self.geometry.n_views:
            raise ValueError("view count does not match geometry angle count")
        expected = (self.geometry.detector_rows, self.geometry.detector_cols, self.rank)
        for i, view in enumerate(self.views):
            if view.shape != expected:
                raise ValueError(f"view {i} has shape {view.shape}, expected {expected}")


def _fix_signs(u: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Make the first nonzero component of each left vector non-negative."""
    u = u.copy()
    v = v.copy()
    for j in range(u.shape[1]):
        col = u[:, j]
        nz = np.nonzero(col)[0]
        if nz.size and col[nz[0]] < 0:
            u[:, j] = -col
            v[:, j] = -v[:, j]
    return u, v


def svd_encode(stack: ProjectionStack, k: int) -> SvdScan:
    """Compress each view to its best rank-k approximation."""
    k = int(k)
    m = stack.geometry.detector_rows
    n = stack.geometry.detector_cols
    if not 1 <= k <= min(m, n):
        raise ValueError(f"rank {k} out of range [1, {min(m, n)}]")
    views = []
    for g in stack.data:
        u, s, vt = np.linalg.svd(g.astype(np.float64), full_matrices=False)
        u, v = _fix_signs(u[:, :k], vt[:k].T)
        views.append(SvdView(u=u, s=s[:k], v=v))
    return SvdScan(geometry=stack.geometry, rank=k, views=tuple(views))


def decode_view(view: SvdView) -> np.ndarray:
    """Rank-k reconstruction sum_i sigma_i u_i v_i^T, in float64."""
    return (view.u.astype(np.float64) * view.s) @ view.v.astype(np.float64).T


def svd_decode(scan: SvdScan) -> ProjectionStack:
    data = np.stack([decode_view(v) for v in scan.views])
    return ProjectionStack(geometry=scan.geometry, data=data.astype(np.float32))


def singular_values(stack: ProjectionStack) -> np.ndarray:
    """Full singular spectra of all views, shape (views, min(m, n))."""
    return np.stack(
        [np.linalg.svd(g.astype(np.float64), compute_uv=False) for g in stack.data]
    )


def choose_rank(stack: ProjectionStack, mse_budget: float) -> int:
    """Smallest k whose worst per-view truncation MSE fits the budget.

    Uses the identity MSE(k) = sum_{i>k} sigma_i^2 / (m*n); no decode needed.
    """
    if mse_budget <= 0:
        raise ValueError("mse_budget must be > 0")
    m = stack.geometry.detector_rows
    n = stack.geometry.detector_cols
    spectra = singular_values(stack)
    # tail[:, k] = sum_{i>k} sigma_i^2 for k = 0..min(m,n)
    energy = spectra**2
    tail = np.concatenate(
        [np.cumsum(energy[:, ::-1], axis=1)[:, ::-1], np.zeros((spectra.shape[0], 1))], axis=1
    )
    worst_mse = tail.max(axis=0) / (m * n)
    feasible = np.nonzero(worst_mse <= mse_budget)[0]
    if feasible.size == 0:
        raise ValueError("mse budget unachievable even at full rank")
    return max(int(feasible[0]), 1)


def mse_from_spectrum(spectrum: np.ndarray, k: int, m: int, n: int) -> float:
    """Truncation MSE of one view from its singular values."""
    return float(np.sum(spectrum[k:] ** 2) / (m * n))


# --- SVZ container -----------------------------------------------------------

_HEADER = struct.Struct("<4sHIIII")


def scan_header_bytes(geometry: ScanGeometry, rank: int) -> bytes:
    geo_text = geometry_to_text(geometry, angles_inline=True).encode("utf-8")
    head = _HEADER.pack(
        MAGIC,
        VERSION,
        geometry.n_views,
        geometry.detector_rows,
        geometry.detector_cols,
        rank,
    )
    return head + struct.pack("<I", len(geo_text)) + geo_text


def view_bytes(view: SvdView) -> bytes:
    return (
        view.u.astype("<f4").tobytes(order="F")
        + view.s.astype("<f8").tobytes()
        + view.v.astype("<f4").tobytes(order="F")
    )


def view_nbytes(m: int, n: int, k: int) -> int:
    return 4 * m * k + 8 * k + 4 * n * k


def view_from_bytes(buf: bytes, m: int, n: int, k: int) -> SvdView:
    if len(buf) != view_nbytes(m, n, k):
        raise ValueError(f"view payload is {len(buf)} bytes, expected {view_nbytes(m, n, k)}")
    off = 0
    u = np.frombuffer(buf, dtype="<f4", count=m * k, offset=off).reshape((m, k), order="F")
    off += 4 * m * k
    s = np.frombuffer(buf, dtype="<f8", count=k, offset=off)
    off += 8 * k
    v = np.frombuffer(buf, dtype="<f4", count=n * k, offset=off).reshape((n, k), order="F")
    return SvdView(u=u, s=s, v=v)


def parse_header(buf: bytes) -> tuple[ScanGeometry, int, int]:
    """Parse the container header; returns (geometry, rank, header length)."""
    magic, version, n_views, m, n, k = _HEADER.unpack_from(buf, 0)
    if magic != MAGIC:
        raise ValueError("not an SVZ container (bad magic)")
    if version != VERSION:
        raise ValueError(f"unsupported SVZ version {version}")
    (geo_len,) = struct.unpack_from("<I", buf, _HEADER.size)
    geo_start = _HEADER.size + 4
    geometry = geometry_from_text(buf[geo_start : geo_start + geo_len].decode("utf-8"))
    if geometry.n_views != n_views:
        raise ValueError("header view count disagrees with geometry angles")
    if (geometry.detector_rows, geometry.detector_cols) != (m, n):
        raise ValueError("header detector dims disagree with geometry")
    return geometry, int(k), geo_start + geo_len


def scan_to_bytes(scan: SvdScan) -> bytes:
    parts = [scan_header_bytes(scan.geometry, scan.rank)]
    parts.extend(view_bytes(v) for v in scan.views)
    return b"".join(parts)


def scan_from_bytes(buf: bytes) -> SvdScan:
    geometry, k, off = parse_header(buf)
    m, n = geometry.detector_rows, geometry.detector_cols
    step = view_nbytes(m, n, k)
    expected = off + geometry.n_views * step
    if len(buf) != expected:
        raise ValueError(f"container is {len(buf)} bytes, expected {expected}")
    views = []
    for _ in range(geometry.n_views):
        views.append(view_from_bytes(buf[off : off + step], m, n, k))
        off += step
    return SvdScan(geometry=geometry, rank=k, views=tuple(views))


def save_svz(scan: SvdScan, path) -> None:
    Path(path).write_bytes(scan_to_bytes(scan))


def load_svz(path) -> SvdScan:
    return scan_from_bytes(Path(path).read_bytes())
