"""Config-driven end-to-end run: simulate, sparse-sample, compress,
optionally round-trip through the transport, decode, reconstruct, score.

Config files are plain text ``key = value`` lines. Required keys:

    phantom                 path to a phantom description file
    views                   full-scan view count
    rows, cols              detector size (pixels)
    pixel_pitch             virtual-detector pitch (mm)
    source_to_axis_distance mm
    sparse_factor           keep every N-th view
    rank                    retained singular values per view
    recon_dims              nx,ny,nz
    voxel_pitch             mm
    seed                    RNG seed (noise)
    out_dir                 artifact directory

Optional: noise_sigma (default 0), filter_window (none|hann), fdk_weight
(standard|paper), transport (none|loopback). Relative paths resolve
against the config file's directory.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import fdk, metrics, rawio, simulate, svdcodec, transport
from .geometry import make_circular_geometry
from .metrics import CompressionReport, QualityReport
from .phantom import load_phantom
from .sparse import sparse_sample


class PipelineError(Exception):
    """A pipeline stage failed; the message carries the stage tag."""


REQUIRED_KEYS = (
    "phantom",
    "views",
    "rows",
    "cols",
    "pixel_pitch",
    "source_to_axis_distance",
    "sparse_factor",
    "rank",
    "recon_dims",
    "voxel_pitch",
    "seed",
    "out_dir",
)


@dataclass(frozen=True)
class PipelineConfig:
    phantom: Path
    views: int
    rows: int
    cols: int
    pixel_pitch: float
    source_to_axis_distance: float
    sparse_factor: int
    rank: int
    recon_dims: tuple[int, int, int]
    voxel_pitch: float
    seed: int
    out_dir: Path
    noise_sigma: float = 0.0
    filter_window: str = "none"
    fdk_weight: str = "standard"
    transport: str = "none"


def load_config(path) -> PipelineConfig:
    path = Path(path)
    kv = rawio.parse_keyvalues(path.read_text())
    for key in REQUIRED_KEYS:
        if key not in kv:
            raise PipelineError(f"[config] missing config key {key!r}")
    base = path.parent
    dims = tuple(int(t) for t in kv["recon_dims"].split(","))
    if len(dims) != 3:
        raise PipelineError("[config] recon_dims must be nx,ny,nz")
    cfg = PipelineConfig(
        phantom=base / kv["phantom"],
        views=int(kv["views"]),
        rows=int(kv["rows"]),
        cols=int(kv["cols"]),
        pixel_pitch=float(kv["pixel_pitch"]),
        source_to_axis_distance=float(kv["source_to_axis_distance"]),
        sparse_factor=int(kv["sparse_factor"]),
        rank=int(kv["rank"]),
        recon_dims=dims,
        voxel_pitch=float(kv["voxel_pitch"]),
        seed=int(kv["seed"]),
        out_dir=base / kv["out_dir"],
        noise_sigma=float(kv.get("noise_sigma", "0.0")),
        filter_window=kv.get("filter_window", "none"),
        fdk_weight=kv.get("fdk_weight", "standard"),
        transport=kv.get("transport", "none"),
    )
    if cfg.transport not in ("none", "loopback"):
        raise PipelineError(f"[config] unknown transport mode {cfg.transport!r}")
    return cfg


@dataclass(frozen=True)
class PipelineResult:
    quality: QualityReport
    compression: CompressionReport
    out_dir: Path


def _stage(tag: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except PipelineError:
        raise
    except Exception as exc:
        raise PipelineError(f"[{tag}] {exc}") from exc


def run_pipeline(cfg: PipelineConfig) -> PipelineResult:
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)

    phantom = _stage("phantom", load_phantom, cfg.phantom)
    geometry = _stage(
        "geometry",
        make_circular_geometry,
        cfg.views,
        cfg.rows,
        cfg.cols,
        cfg.pixel_pitch,
        cfg.source_to_axis_distance,
    )
    full = _stage("project", simulate.forward_project, phantom, geometry)
    if cfg.noise_sigma > 0:
        full = _stage("noise", simulate.add_noise, full, cfg.noise_sigma, cfg.seed)
    _stage("io", rawio.save_projections, full, out / "full.proj")

    sparse = _stage("sparse", sparse_sample, full, cfg.sparse_factor)
    _stage("io", rawio.save_projections, sparse, out / "sparse.proj")

    scan = _stage("compress", svdcodec.svd_encode, sparse, cfg.rank)
    svz_bytes = svdcodec.scan_to_bytes(scan)
    _stage("io", (out / "scan.svz").write_bytes, svz_bytes)

    if cfg.transport == "loopback":
        svz_bytes = _stage("transport", _loopback, svz_bytes, out)
        scan = svdcodec.scan_from_bytes(svz_bytes)

    decoded = _stage("decompress", svdcodec.svd_decode, scan)
    _stage("io", rawio.save_projections, decoded, out / "decoded.proj")

    recon = _stage(
        "reconstruct",
        fdk.reconstruct,
        decoded,
        cfg.recon_dims,
        cfg.voxel_pitch,
        filter_window=cfg.filter_window,
        weight_mode=cfg.fdk_weight,
    )
    _stage("io", rawio.save_volume, recon, out / "recon.vol")

    reference = _stage(
        "reconstruct",
        fdk.reconstruct,
        full,
        cfg.recon_dims,
        cfg.voxel_pitch,
        filter_window=cfg.filter_window,
        weight_mode=cfg.fdk_weight,
    )
    _stage("io", rawio.save_volume, reference, out / "reference.vol")

    quality = _stage("metrics", metrics.quality_report, recon.data, reference.data)
    compression = _stage(
        "metrics",
        metrics.compression_report,
        cfg.rows,
        cfg.cols,
        cfg.rank,
        cfg.views // cfg.sparse_factor,
        cfg.views,
    )
    report = dict(quality.as_keyvalues())
    report.update(compression.as_keyvalues())
    _stage("io", (out / "report.txt").write_text, rawio.format_keyvalues(report))
    return PipelineResult(quality=quality, compression=compression, out_dir=out)


def _loopback(svz_bytes: bytes, out: Path) -> bytes:
    """Upload to an in-process server and fetch the stored bytes back."""
    server = transport.ScanServer(("127.0.0.1", 0), out / "store")
    server.start()
    try:
        scan_id = transport.upload(server.address, svz_bytes)
        with transport.Client(server.address) as client:
            fetched = client.fetch_svz(scan_id)
    finally:
        server.stop()
    if fetched != svz_bytes:
        raise PipelineError("[transport] fetched SVZ differs from uploaded bytes")
    return fetched
