"""Command-line entry point wiring the pipeline stages together.

Exit codes: 0 success, 1 usage error, 2 data error, 3 transport error.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from . import fdk, metrics, pipeline, rawio, simulate, svdcodec, transport
from .geometry import make_circular_geometry
from .phantom import load_phantom
from .sparse import sparse_sample

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_TRANSPORT = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _dims(text: str) -> tuple[int, int, int]:
    parts = tuple(int(t) for t in text.split(","))
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected nx,ny,nz")
    return parts


def _endpoint(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    if not host:
        raise argparse.ArgumentTypeError("expected HOST:PORT")
    return host, int(port)


def _ks(text: str) -> list[int]:
    if ":" in text:
        lo, hi = text.split(":", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(t) for t in text.split(",")]


def build_parser() -> _Parser:
    top = _Parser(prog="ictlite", description=__doc__)
    sub = top.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phantom", help="voxelize a phantom description file")
    p.add_argument("phantom_file")
    p.add_argument("out_vol")
    p.add_argument("--dims", type=_dims, required=True)
    p.add_argument("--pitch", type=float, required=True)

    p = sub.add_parser("project", help="analytic cone-beam forward projection")
    p.add_argument("phantom_file")
    p.add_argument("out_proj")
    p.add_argument("--views", type=int, required=True)
    p.add_argument("--rows", type=int, required=True)
    p.add_argument("--cols", type=int, required=True)
    p.add_argument("--pitch", type=float, required=True)
    p.add_argument("--r-axis", type=float, required=True)
    p.add_argument("--noise-sigma", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("sparse", help="keep every N-th view")
    p.add_argument("in_proj")
    p.add_argument("out_proj")
    p.add_argument("--sparse-factor", type=int, required=True)

    p = sub.add_parser("compress", help="truncated-SVD compression to an SVZ container")
    p.add_argument("in_proj")
    p.add_argument("out_svz")
    p.add_argument("--rank", type=int, required=True)

    p = sub.add_parser("decompress", help="decode an SVZ container to projections")
    p.add_argument("in_svz")
    p.add_argument("out_proj")

    p = sub.add_parser("reconstruct", help="FDK reconstruction")
    p.add_argument("in_proj")
    p.add_argument("out_vol")
    p.add_argument("--dims", type=_dims, required=True)
    p.add_argument("--pitch", type=float, required=True)
    p.add_argument("--filter-window", choices=fdk.FILTER_WINDOWS, default="none")
    p.add_argument("--fdk-weight", choices=fdk.WEIGHT_MODES, default="standard")

    p = sub.add_parser("metrics", help="quality reports and compression curves")
    msub = p.add_subparsers(dest="metrics_command", required=True)
    pc = msub.add_parser("compare", help="score volume a against reference b")
    pc.add_argument("a_vol")
    pc.add_argument("b_vol")
    pc.add_argument("--report", default=None)
    pk = msub.add_parser("curve", help="truncation MSE vs rank")
    pk.add_argument("in_proj")
    pk.add_argument("--ks", type=_ks, required=True)
    pk.add_argument("--out", required=True)

    p = sub.add_parser("curve", help="shorthand for 'metrics curve'")
    p.add_argument("in_proj")
    p.add_argument("--ks", type=_ks, required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("serve", help="run the compressed-scan store/compute server")
    p.add_argument("--listen", type=_endpoint, required=True)
    p.add_argument("--store", required=True)

    p = sub.add_parser("upload", help="upload an SVZ scan to a server")
    p.add_argument("svz")
    p.add_argument("--server", type=_endpoint, required=True)
    p.add_argument("--scan-id", default="", help="resume a partial upload")

    p = sub.add_parser("fetch", help="fetch a reconstruction (or the raw SVZ)")
    p.add_argument("out_path")
    p.add_argument("--server", type=_endpoint, required=True)
    p.add_argument("--scan", required=True)
    p.add_argument("--svz", action="store_true", help="download the stored SVZ instead")
    p.add_argument("--dims", type=_dims)
    p.add_argument("--pitch", type=float)
    p.add_argument("--filter-window", choices=fdk.FILTER_WINDOWS, default="none")
    p.add_argument("--fdk-weight", choices=fdk.WEIGHT_MODES, default="standard")

    p = sub.add_parser("pipeline", help="run the full pipeline from a config file")
    p.add_argument("config")

    return top


def _cmd_phantom(args) -> int:
    vol = simulate.voxelize(load_phantom(args.phantom_file), args.dims, args.pitch)
    rawio.save_volume(vol, args.out_vol)
    return EXIT_OK


def _cmd_project(args) -> int:
    geom = make_circular_geometry(args.views, args.rows, args.cols, args.pitch, args.r_axis)
    stack = simulate.forward_project(load_phantom(args.phantom_file), geom)
    if args.noise_sigma > 0:
        stack = simulate.add_noise(stack, args.noise_sigma, args.seed)
    rawio.save_projections(stack, args.out_proj)
    return EXIT_OK


def _cmd_sparse(args) -> int:
    stack = sparse_sample(rawio.load_projections(args.in_proj), args.sparse_factor)
    rawio.save_projections(stack, args.out_proj)
    return EXIT_OK


def _cmd_compress(args) -> int:
    scan = svdcodec.svd_encode(rawio.load_projections(args.in_proj), args.rank)
    svdcodec.save_svz(scan, args.out_svz)
    return EXIT_OK


def _cmd_decompress(args) -> int:
    stack = svdcodec.svd_decode(svdcodec.load_svz(args.in_svz))
    rawio.save_projections(stack, args.out_proj)
    return EXIT_OK


def _cmd_reconstruct(args) -> int:
    vol = fdk.reconstruct(
        rawio.load_projections(args.in_proj),
        args.dims,
        args.pitch,
        filter_window=args.filter_window,
        weight_mode=args.fdk_weight,
    )
    rawio.save_volume(vol, args.out_vol)
    return EXIT_OK


def _cmd_compare(args) -> int:
    a = rawio.load_volume(args.a_vol)
    b = rawio.load_volume(args.b_vol)
    report = metrics.quality_report(a.data, b.data)
    text = rawio.format_keyvalues(report.as_keyvalues())
    if args.report:
        Path(args.report).write_text(text)
    print(text, end="")
    return EXIT_OK


def _cmd_curve(args) -> int:
    stack = rawio.load_projections(args.in_proj)
    curve = metrics.mse_curve(stack, args.ks)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "mse"])
        writer.writerows(curve)
    return EXIT_OK


def _cmd_serve(args) -> int:
    server = transport.ScanServer(args.listen, args.store)
    host, port = server.address
    print(f"serving on {host}:{port}, store={args.store}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return EXIT_OK


def _cmd_upload(args) -> int:
    svz_bytes = Path(args.svz).read_bytes()
    scan_id = transport.upload(args.server, svz_bytes, scan_id=args.scan_id)
    print(scan_id)
    return EXIT_OK


def _cmd_fetch(args) -> int:
    with transport.Client(args.server) as client:
        if args.svz:
            Path(args.out_path).write_bytes(client.fetch_svz(args.scan))
            return EXIT_OK
        if args.dims is None or args.pitch is None:
            print("fetch: --dims and --pitch are required for volume fetch", file=sys.stderr)
            return EXIT_USAGE
        vol = client.fetch_volume(
            args.scan,
            args.dims,
            args.pitch,
            filter_window=args.filter_window,
            fdk_weight=args.fdk_weight,
        )
    rawio.save_volume(vol, args.out_path)
    return EXIT_OK


def _cmd_pipeline(args) -> int:
    result = pipeline.run_pipeline(pipeline.load_config(args.config))
    kv = dict(result.quality.as_keyvalues())
    kv.update(result.compression.as_keyvalues())
    for key in ("mse", "psnr", "ssim", "cr_svd", "cr_sparse", "cr_total"):
        print(f"{key} = {kv[key]}")
    print(f"artifacts in {result.out_dir}")
    return EXIT_OK


_COMMANDS = {
    "phantom": _cmd_phantom,
    "project": _cmd_project,
    "sparse": _cmd_sparse,
    "compress": _cmd_compress,
    "decompress": _cmd_decompress,
    "reconstruct": _cmd_reconstruct,
    "curve": _cmd_curve,
    "serve": _cmd_serve,
    "upload": _cmd_upload,
    "fetch": _cmd_fetch,
    "pipeline": _cmd_pipeline,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "metrics":
        handler = _cmd_compare if args.metrics_command == "compare" else _cmd_curve
    else:
        handler = _COMMANDS[args.command]
    try:
        return handler(args)
    except transport.TransportError as exc:
        print(f"ictlite: transport error: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    except (ValueError, OSError, KeyError, pipeline.PipelineError) as exc:
        print(f"ictlite: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
