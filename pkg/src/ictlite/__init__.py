"""Lightweight industrial cone-beam CT pipeline: simulation, sparse-view
sampling, truncated-SVD compression, FDK reconstruction, quality metrics,
and a client/server transport for compressed scans."""

from .geometry import ProjectionStack, ScanGeometry, Volume, make_circular_geometry
from .phantom import Phantom, Primitive, box, cylinder, load_phantom, parse_phantom, save_phantom, sphere
from .simulate import add_noise, forward_project, voxelize
from .sparse import sparse_sample
from .svdcodec import SvdScan, SvdView, choose_rank, load_svz, save_svz, svd_decode, svd_encode
from .fdk import backproject, ramp_filter, reconstruct, weight

__all__ = [
    "ProjectionStack",
    "ScanGeometry",
    "Volume",
    "make_circular_geometry",
    "Phantom",
    "Primitive",
    "sphere",
    "box",
    "cylinder",
    "parse_phantom",
    "load_phantom",
    "save_phantom",
    "voxelize",
    "forward_project",
    "add_noise",
    "sparse_sample",
    "SvdScan",
    "SvdView",
    "svd_encode",
    "svd_decode",
    "choose_rank",
    "save_svz",
    "load_svz",
    "weight",
    "ramp_filter",
    "backproject",
    "reconstruct",
]

__version__ = "0.1.0"
