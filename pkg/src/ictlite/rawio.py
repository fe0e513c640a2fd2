"""Raw binary array I/O with plain-text sidecars.

Pixel data files are header-less: 4-byte IEEE-754 little-endian floats, in
C order, (view, row, col) for projections and (z, y, x) for volumes. Each
data file ``X`` has a sidecar ``X.meta`` of ``key = value`` lines; the
projection sidecar references an angles file (one angle in radians per
line). Floats are written with ``repr`` so text round-trips are bit-exact.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .geometry import ProjectionStack, ScanGeometry, Volume


def parse_keyvalues(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def format_keyvalues(items: dict[str, str]) -> str:
    return "".join(f"{k} = {v}\n" for k, v in items.items())


def geometry_to_text(geom: ScanGeometry, angles_inline: bool = True, angles_file: str | None = None) -> str:
    """Geometry block in the sidecar grammar.

    Angles are either inline (comma-separated) or referenced by file name.
    """
    items = {
        "rows": str(geom.detector_rows),
        "cols": str(geom.detector_cols),
        "pixel_pitch": repr(geom.pixel_pitch),
        "source_to_axis_distance": repr(geom.source_to_axis_distance),
        "offset_row": repr(geom.detector_offset_row),
        "offset_col": repr(geom.detector_offset_col),
    }
    if angles_inline:
        items["angles"] = ",".join(repr(float(a)) for a in geom.angles)
    else:
        if angles_file is None:
            raise ValueError("angles_file required when angles are not inline")
        items["angles_file"] = angles_file
    return format_keyvalues(items)


def geometry_from_text(text: str, base_dir: Path | None = None) -> ScanGeometry:
    kv = parse_keyvalues(text)
    for key in ("rows", "cols", "pixel_pitch", "source_to_axis_distance"):
        if key not in kv:
            raise ValueError(f"geometry block missing key {key!r}")
    if "angles" in kv:
        angles = np.array([float(t) for t in kv["angles"].split(",")], dtype=np.float64)
    elif "angles_file" in kv:
        if base_dir is None:
            raise ValueError("angles_file reference requires a base directory")
        path = base_dir / kv["angles_file"]
        angles = np.array([float(line) for line in path.read_text().split()], dtype=np.float64)
    else:
        raise ValueError("geometry block missing 'angles' or 'angles_file'")
    return ScanGeometry(
        source_to_axis_distance=float(kv["source_to_axis_distance"]),
        detector_rows=int(kv["rows"]),
        detector_cols=int(kv["cols"]),
        pixel_pitch=float(kv["pixel_pitch"]),
        angles=angles,
        detector_offset_row=float(kv.get("offset_row", "0.0")),
        detector_offset_col=float(kv.get("offset_col", "0.0")),
    )


def save_projections(stack: ProjectionStack, path) -> None:
    path = Path(path)
    geom = stack.geometry
    angles_name = path.name + ".angles"
    path.write_bytes(stack.data.astype("<f4").tobytes(order="C"))
    (path.parent / angles_name).write_text(
        "".join(repr(float(a)) + "\n" for a in geom.angles)
    )
    meta = {"kind": "projections", "views": str(geom.n_views)}
    meta_text = format_keyvalues(meta) + geometry_to_text(
        geom, angles_inline=False, angles_file=angles_name
    )
    (path.parent / (path.name + ".meta")).write_text(meta_text)


def load_projections(path) -> ProjectionStack:
    path = Path(path)
    meta_text = (path.parent / (path.name + ".meta")).read_text()
    kv = parse_keyvalues(meta_text)
    if kv.get("kind") != "projections":
        raise ValueError(f"{path}: sidecar kind is not 'projections'")
    geom = geometry_from_text(meta_text, base_dir=path.parent)
    n_views = int(kv["views"])
    if n_views != geom.n_views:
        raise ValueError(f"{path}: views key disagrees with angle count")
    shape = (n_views, geom.detector_rows, geom.detector_cols)
    data = np.frombuffer(path.read_bytes(), dtype="<f4")
    if data.size != int(np.prod(shape)):
        raise ValueError(f"{path}: raw size {data.size} != expected {np.prod(shape)}")
    return ProjectionStack(geometry=geom, data=data.reshape(shape))


def save_volume(vol: Volume, path) -> None:
    path = Path(path)
    nx, ny, nz = vol.dims
    path.write_bytes(vol.data.astype("<f4").tobytes(order="C"))
    meta = {
        "kind": "volume",
        "nx": str(nx),
        "ny": str(ny),
        "nz": str(nz),
        "voxel_pitch": repr(vol.voxel_pitch),
    }
    (path.parent / (path.name + ".meta")).write_text(format_keyvalues(meta))


def load_volume(path) -> Volume:
    path = Path(path)
    kv = parse_keyvalues((path.parent / (path.name + ".meta")).read_text())
    if kv.get("kind") != "volume":
        raise ValueError(f"{path}: sidecar kind is not 'volume'")
    nx, ny, nz = int(kv["nx"]), int(kv["ny"]), int(kv["nz"])
    data = np.frombuffer(path.read_bytes(), dtype="<f4")
    if data.size != nx * ny * nz:
        raise ValueError(f"{path}: raw size {data.size} != {nx * ny * nz}")
    return Volume(voxel_pitch=float(kv["voxel_pitch"]), data=data.reshape((nz, ny, nx)))
