"""Quality and compression accounting.

Covers pixelwise MSE/PSNR, single-scale SSIM, the SVD compression ratio
m*n / (k*(m+n+1)), the total ratio including sparse sampling, and the raw
storage arithmetic. "GB" here means binary GB (2^30 bytes) with 4-byte
pixels; that is the only convention reproducing the reference byte counts
9.4263 / 0.7855 / 0.0252 GB simultaneously.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.ndimage import gaussian_filter

from .geometry import ProjectionStack
from .svdcodec import singular_values

GIB = 2**30


def mse(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))


def psnr(a: np.ndarray, b: np.ndarray, data_range: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB; inf for identical inputs."""
    err = mse(a, b)
    if err == 0:
        return float("inf")
    return float(10.0 * np.log10(data_range**2 / err))


def ssim(a: np.ndarray, b: np.ndarray, data_range: float = 1.0) -> float:
    """Single-scale SSIM with an 11-tap Gaussian window (sigma = 1.5).

    Inputs are expected normalized to [0, 1] (data_range = 1). Constants
    C1 = (0.01 L)^2, C2 = (0.03 L)^2 follow the original definition. 3D
    inputs are scored as the mean over z-slices.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.ndim == 3:
        return float(np.mean([ssim(sa, sb, data_range) for sa, sb in zip(a, b)]))
    if a.ndim != 2:
        raise ValueError("ssim expects 2D images or 3D volumes")

    sigma, truncate = 1.5, 3.5
    c1 = (0.01 * data_range) ** 2
    c2 = (0.03 * data_range) ** 2
    filt = lambda x: gaussian_filter(x, sigma, truncate=truncate)
    mu_a = filt(a)
    mu_b = filt(b)
    var_a = filt(a * a) - mu_a * mu_a
    var_b = filt(b * b) - mu_b * mu_b
    cov = filt(a * b) - mu_a * mu_b
    smap = ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / (
        (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    )
    pad = int(truncate * sigma + 0.5)  # ignore filter edge effects
    if min(smap.shape) > 2 * pad:
        smap = smap[pad:-pad, pad:-pad]
    return float(np.mean(smap))


@dataclass(frozen=True)
class QualityReport:
    mse: float
    psnr: float
    ssim: float
    per_slice: tuple[tuple[float, float, float], ...] = field(default_factory=tuple)

    def as_keyvalues(self) -> dict[str, str]:
        out = {"mse": repr(self.mse), "psnr": repr(self.psnr), "ssim": repr(self.ssim)}
        for i, (m, p, s) in enumerate(self.per_slice):
            out[f"slice{i:04d}"] = f"{m!r},{p!r},{s!r}"
        return out


def quality_report(test: np.ndarray, reference: np.ndarray) -> QualityReport:
    """Score a test volume/image against a reference.

    Both arrays are normalized to [0, 1] by the reference's value range so
    PSNR/SSIM use data_range 1; identical inputs score mse 0 / ssim 1.
    """
    test = np.asarray(test, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    if test.shape != reference.shape:
        raise ValueError(f"shape mismatch: {test.shape} vs {reference.shape}")
    lo, hi = float(reference.min()), float(reference.max())
    span = hi - lo if hi > lo else 1.0
    t = (test - lo) / span
    r = (reference - lo) / span
    per_slice = ()
    if t.ndim == 3:
        per_slice = tuple((mse(ts, rs), psnr(ts, rs), ssim(ts, rs)) for ts, rs in zip(t, r))
    return QualityReport(mse=mse(t, r), psnr=psnr(t, r), ssim=ssim(t, r), per_slice=per_slice)


# --- compression accounting --------------------------------------------------


def cr_svd(m: int, n: int, k: int) -> Fraction:
    """SVD compression ratio m*n / (k*(m+n+1)), exact."""
    if m < 1 or n < 1:
        raise ValueError("matrix dims must be >= 1")
    if not 1 <= k <= min(m, n):
        raise ValueError(f"rank {k} out of range [1, {min(m, n)}]")
    return Fraction(m * n, k * (m + n + 1))


def cr_total(m: int, n: int, k: int, views: int, full_views: int = 720) -> Fraction:
    """Total compression ratio: cr_svd * full_views / views, exact."""
    if views < 1 or full_views % views != 0:
        raise ValueError(f"views {views} must divide full view count {full_views}")
    return cr_svd(m, n, k) * Fraction(full_views, views)


def storage_bytes(views: int, m: int, n: int, bytes_per_px: int = 4) -> int:
    """Raw projection stack size in bytes."""
    if min(views, m, n, bytes_per_px) < 1:
        raise ValueError("counts must be positive")
    return views * m * n * bytes_per_px


def svz_bytes(views: int, m: int, n: int, k: int) -> int:
    """Compressed factor size in bytes under the k*(m+n+1) value accounting.

    Counts 4 bytes per stored value; the container's wider 8-byte singular
    values add only k*4 extra bytes per view and are ignored here.
    """
    if min(views, m, n, k) < 1:
        raise ValueError("counts must be positive")
    return views * k * (m + n + 1) * 4


def to_gib(nbytes: int) -> float:
    return nbytes / GIB


@dataclass(frozen=True)
class CompressionReport:
    cr_svd: Fraction
    cr_sparse: Fraction
    cr_total: Fraction
    bytes_raw: int
    bytes_sparse: int
    bytes_compressed: int

    def as_keyvalues(self) -> dict[str, str]:
        return {
            "cr_svd": repr(float(self.cr_svd)),
            "cr_sparse": repr(float(self.cr_sparse)),
            "cr_total": repr(float(self.cr_total)),
            "bytes_raw": str(self.bytes_raw),
            "bytes_sparse": str(self.bytes_sparse),
            "bytes_compressed": str(self.bytes_compressed),
            "gib_raw": f"{to_gib(self.bytes_raw):.6f}",
            "gib_sparse": f"{to_gib(self.bytes_sparse):.6f}",
            "gib_compressed": f"{to_gib(self.bytes_compressed):.6f}",
        }


def compression_report(m: int, n: int, k: int, views: int, full_views: int) -> CompressionReport:
    sparse_ratio = Fraction(full_views, views)
    return CompressionReport(
        cr_svd=cr_svd(m, n, k),
        cr_sparse=sparse_ratio,
        cr_total=cr_svd(m, n, k) * sparse_ratio,
        bytes_raw=storage_bytes(full_views, m, n),
        bytes_sparse=storage_bytes(views, m, n),
        bytes_compressed=svz_bytes(views, m, n, k),
    )


def mse_curve(stack: ProjectionStack, ks: list[int]) -> list[tuple[int, float]]:
    """Mean truncation MSE over views for each rank, from singular values."""
    m = stack.geometry.detector_rows
    n = stack.geometry.detector_cols
    ks = [int(k) for k in ks]
    if ks != sorted(ks):
        raise ValueError("ks must be sorted ascending")
    if not ks or ks[0] < 1 or ks[-1] > min(m, n):
        raise ValueError(f"ks must lie within [1, {min(m, n)}]")
    spectra = singular_values(stack)
    energy = spectra**2
    tails = np.cumsum(energy[:, ::-1], axis=1)[:, ::-1]  # tails[:, i] = sum_{j>=i} s_j^2
    out = []
    for k in ks:
        tail = tails[:, k] if k < tails.shape[1] else np.zeros(tails.shape[0])
        out.append((k, float(np.mean(tail) / (m * n))))
    return out
