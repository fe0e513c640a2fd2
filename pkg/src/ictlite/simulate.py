"""Phantom voxelization and analytic cone-beam forward projection.

The projector intersects each detector ray with every primitive in closed
form (no voxel grid involved), so reconstruction accuracy tests against it
are not circular. Rays are sampled at pixel centers only.
"""

from __future__ import annotations

import numpy as np

from .geometry import ProjectionStack, ScanGeometry, Volume, grid_coords
from .phantom import Phantom, Primitive, contains

_BIG = 1e30


def voxelize(phantom: Phantom, dims: tuple[int, int, int], pitch: float) -> Volume:
    """Sample the phantom on a centered voxel grid.

    dims is (nx, ny, nz); a voxel's value is the sum of densities of the
    primitives containing its center.
    """
    nx, ny, nz = (int(d) for d in dims)
    if min(nx, ny, nz) < 1:
        raise ValueError("volume dims must be >= 1")
    if pitch <= 0:
        raise ValueError("voxel pitch must be > 0")
    x = grid_coords(nx, pitch)[None, None, :]
    y = grid_coords(ny, pitch)[None, :, None]
    z = grid_coords(nz, pitch)[:, None, None]
    data = np.zeros((nz, ny, nx), dtype=np.float64)
    for prim in phantom.primitives:
        data += prim.density * contains(prim, x, y, z)
    return Volume(voxel_pitch=float(pitch), data=data.astype(np.float32))


def _interval_sphere(prim, ox, oy, oz, ux, uy, uz):
    cx, cy, cz = prim.center
    (r,) = prim.params
    px, py, pz = ox - cx, oy - cy, oz - cz
    b = px * ux + py * uy + pz * uz
    c = px * px + py * py + pz * pz - r * r
    disc = b * b - c
    hit = disc > 0.0
    root = np.sqrt(np.where(hit, disc, 0.0))
    return np.where(hit, -b - root, _BIG), np.where(hit, -b + root, -_BIG)


def _slab(o, u, lo, hi):
    """Parameter interval where o + t*u lies within [lo, hi]."""
    with np.errstate(divide="ignore", invalid="ignore"):
        t0 = (lo - o) / u
        t1 = (hi - o) / u
    near = np.minimum(t0, t1)
    far = np.maximum(t0, t1)
    # For u == 0 the ray is parallel to the slab: inside forever or never.
    parallel = u == 0.0
    inside = (o >= lo) & (o <= hi)
    near = np.where(parallel, np.where(inside, -_BIG, _BIG), near)
    far = np.where(parallel, np.where(inside, _BIG, -_BIG), far)
    return near, far


def _interval_box(prim, ox, oy, oz, ux, uy, uz):
    cx, cy, cz = prim.center
    sx, sy, sz = prim.params
    n0, f0 = _slab(ox, ux, cx - sx / 2.0, cx + sx / 2.0)
    n1, f1 = _slab(oy, uy, cy - sy / 2.0, cy + sy / 2.0)
    n2, f2 = _slab(oz, uz, cz - sz / 2.0, cz + sz / 2.0)
    return np.maximum(np.maximum(n0, n1), n2), np.minimum(np.minimum(f0, f1), f2)


def _interval_cylinder(prim, ox, oy, oz, ux, uy, uz):
    cx, cy, cz = prim.center
    r, h = prim.params
    px, py = ox - cx, oy - cy
    a = ux * ux + uy * uy
    b = px * ux + py * uy
    c = px * px + py * py - r * r
    with np.errstate(divide="ignore", invalid="ignore"):
        disc = b * b - a * c
        hit = (disc > 0.0) & (a > 0.0)
        root = np.sqrt(np.where(hit, disc, 0.0))
        near = np.where(hit, (-b - root) / a, _BIG)
        far = np.where(hit, (-b + root) / a, -_BIG)
    # Rays parallel to the axis: inside or outside the disk for all t.
    vertical = a == 0.0
    inside = c <= 0.0
    near = np.where(vertical, np.where(inside, -_BIG, _BIG), near)
    far = np.where(vertical, np.where(inside, _BIG, -_BIG), far)
    nz_, fz_ = _slab(oz, uz, cz - h / 2.0, cz + h / 2.0)
    return np.maximum(near, nz_), np.minimum(far, fz_)


_INTERVALS = {
    "sphere": _interval_sphere,
    "box": _interval_box,
    "cylinder": _interval_cylinder,
}


def _chords(prim: Primitive, origin, ux, uy, uz) -> np.ndarray:
    ox, oy, oz = origin
    near, far = _INTERVALS[prim.shape](prim, ox, oy, oz, ux, uy, uz)
    return np.maximum(far - near, 0.0)


def forward_project(phantom: Phantom, geometry: ScanGeometry) -> ProjectionStack:
    """Analytic line integrals of the phantom on the given geometry.

    Each pixel holds the exact ray/primitive intersection length times
    density, summed over primitives, for the ray from the source point
    through the virtual-detector pixel center.
    """
    R = geometry.source_to_axis_distance
    a = geometry.col_coords()[None, :]  # (1, cols)
    b = geometry.row_coords()[:, None]  # (rows, 1)
    data = np.zeros(
        (geometry.n_views, geometry.detector_rows, geometry.detector_cols), dtype=np.float64
    )
    for vi, beta in enumerate(geometry.angles):
        cb, sb = np.cos(beta), np.sin(beta)
        src = (-R * cb, -R * sb, 0.0)
        # Virtual-detector pixel center: a along (-sin, cos, 0), b along z.
        dx = a * (-sb) - src[0]
        dy = a * cb - src[1]
        dz = b - src[2] + np.zeros_like(a)
        norm = np.sqrt(dx * dx + dy * dy + dz * dz)
        ux, uy, uz = dx / norm, dy / norm, dz / norm
        view = np.zeros((geometry.detector_rows, geometry.detector_cols), dtype=np.float64)
        for prim in phantom.primitives:
            view += prim.density * _chords(prim, src, ux, uy, uz)
        data[vi] = view
    return ProjectionStack(geometry=geometry, data=data.astype(np.float32))


def add_noise(stack: ProjectionStack, sigma: float, rng_seed: int) -> ProjectionStack:
    """Additive i.i.d. Gaussian noise, deterministic for a given seed."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0:
        return stack
    rng = np.random.default_rng(rng_seed)
    noisy = stack.data + rng.normal(0.0, sigma, size=stack.data.shape)
    return ProjectionStack(geometry=stack.geometry, data=noisy.astype(np.float32))
