"""Shared cone-beam scan geometry and array container types.

Coordinate conventions used throughout the package:

* The rotation axis is z. The X-ray source orbits counterclockwise on a
  circle of radius ``source_to_axis_distance`` in the z=0 plane; at view
  angle ``beta`` the source sits at ``(-R cos(beta), -R sin(beta), 0)``.
* Detector coordinates ``(a, b)`` live on the *virtual* detector plane
  through the rotation axis (physical detector values rescaled by the
  magnification). ``a`` runs along the detector columns (in the rotation
  plane), ``b`` along the rows (parallel to z). Both are in mm with the
  origin at the detector center; ``pixel_pitch`` is the pitch on this
  virtual plane.
* Projection arrays are indexed ``(view, row, col)``; volumes ``(z, y, x)``.
  Pixel/voxel data is stored as 4-byte IEEE-754 little-endian.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class ScanGeometry:
    """Circular cone-beam acquisition description (virtual-detector units)."""

    source_to_axis_distance: float  # mm
    detector_rows: int
    detector_cols: int
    pixel_pitch: float  # mm, isotropic, on the virtual detector
    angles: np.ndarray  # radians, strictly increasing, in [0, 2*pi)
    detector_offset_row: float = 0.0  # mm
    detector_offset_col: float = 0.0  # mm

    def __post_init__(self):
        if self.source_to_axis_distance <= 0:
            raise ValueError("source_to_axis_distance must be > 0")
        if self.pixel_pitch <= 0:
            raise ValueError("pixel_pitch must be > 0")
        if self.detector_rows < 2 or self.detector_cols < 2:
            raise ValueError("detector must be at least 2x2")
        angles = np.asarray(self.angles, dtype=np.float64)
        if angles.ndim != 1 or angles.size < 1:
            raise ValueError("angles must be a non-empty 1D sequence")
        if np.any(angles < 0.0) or np.any(angles >= TWO_PI):
            raise ValueError("angles must lie in [0, 2*pi)")
        if angles.size > 1 and np.any(np.diff(angles) <= 0):
            raise ValueError("angles must be strictly increasing")
        angles.setflags(write=False)
        object.__setattr__(self, "angles", angles)

    @property
    def n_views(self) -> int:
        return int(self.angles.size)

    def col_coords(self) -> np.ndarray:
        """Detector column centers a_j in mm on the virtual detector."""
        j = np.arange(self.detector_cols, dtype=np.float64)
        return (j - (self.detector_cols - 1) / 2.0) * self.pixel_pitch + self.detector_offset_col

    def row_coords(self) -> np.ndarray:
        """Detector row centers b_i in mm on the virtual detector."""
        i = np.arange(self.detector_rows, dtype=np.float64)
        return (i - (self.detector_rows - 1) / 2.0) * self.pixel_pitch + self.detector_offset_row

    def with_angles(self, angles: np.ndarray) -> "ScanGeometry":
        return ScanGeometry(
            source_to_axis_distance=self.source_to_axis_distance,
            detector_rows=self.detector_rows,
            detector_cols=self.detector_cols,
            pixel_pitch=self.pixel_pitch,
            angles=angles,
            detector_offset_row=self.detector_offset_row,
            detector_offset_col=self.detector_offset_col,
        )


def make_circular_geometry(
    n_views: int,
    rows: int,
    cols: int,
    pitch: float,
    r_axis: float,
    offset_row: float = 0.0,
    offset_col: float = 0.0,
) -> ScanGeometry:
    """Equally spaced full-circle geometry: beta_i = 2*pi*i / n_views."""
    if n_views < 1:
        raise ValueError("n_views must be >= 1")
    angles = TWO_PI * np.arange(n_views, dtype=np.float64) / n_views
    return ScanGeometry(
        source_to_axis_distance=float(r_axis),
        detector_rows=int(rows),
        detector_cols=int(cols),
        pixel_pitch=float(pitch),
        angles=angles,
        detector_offset_row=float(offset_row),
        detector_offset_col=float(offset_col),
    )


@dataclass(frozen=True)
class ProjectionStack:
    """Ordered set of 2D projections, data indexed (view, row, col), float32."""

    geometry: ScanGeometry
    data: np.ndarray

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.float32)
        expected = (self.geometry.n_views, self.geometry.detector_rows, self.geometry.detector_cols)
        if data.shape != expected:
            raise ValueError(f"projection data shape {data.shape} != geometry shape {expected}")
        if not np.all(np.isfinite(data)):
            raise ValueError("projection data contains non-finite values")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def n_views(self) -> int:
        return self.data.shape[0]


@dataclass(frozen=True)
class Volume:
    """Reconstructed attenuation volume on a voxel grid centered on the axis.

    data indexed (z, y, x); voxel centers at (i - (n-1)/2) * voxel_pitch
    along each axis.
    """

    voxel_pitch: float  # mm
    data: np.ndarray

    def __post_init__(self):
        if self.voxel_pitch <= 0:
            raise ValueError("voxel_pitch must be > 0")
        data = np.ascontiguousarray(self.data, dtype=np.float32)
        if data.ndim != 3 or min(data.shape) < 1:
            raise ValueError("volume data must be 3D with all dims >= 1")
        if not np.all(np.isfinite(data)):
            raise ValueError("volume data contains non-finite values")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def dims(self) -> tuple[int, int, int]:
        """(nx, ny, nz)."""
        nz, ny, nx = self.data.shape
        return nx, ny, nz

    def axis_coords(self, n: int) -> np.ndarray:
        """Grid coordinates (mm) for an axis with n voxels."""
        return (np.arange(n, dtype=np.float64) - (n - 1) / 2.0) * self.voxel_pitch


def grid_coords(n: int, pitch: float) -> np.ndarray:
    """Centered grid coordinates (mm) for an axis with n samples."""
    return (np.arange(n, dtype=np.float64) - (n - 1) / 2.0) * pitch
