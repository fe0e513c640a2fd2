"""CLI: `cnnrestore train --config FILE` and `cnnrestore restore --model ...`.

Training config is ``key = value`` text:

    corrupted_dir   directory of corrupted .vol slices
    truth_dir       directory of matching ground-truth .vol slices
    model_out       checkpoint path
    height, width   slice size
    base_channels, growth_rate, dense_layers, blocks   (optional)
    lr_initial, lr_final, epochs, batch_size, seed     (optional)
    augment         none | NN variants per slice (optional, default none)
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from ictlite.rawio import load_volume, parse_keyvalues

from . import data
from .checkpoint import load_checkpoint, save_checkpoint
from .model import NetworkConfig, build_network
from .train import TrainingConfig, restore, train


def _load_pairs(corrupted_dir, truth_dir):
    corrupted = data.list_slices(corrupted_dir)
    truth = data.list_slices(truth_dir)
    if [p.name for p in corrupted] != [p.name for p in truth]:
        raise ValueError("corrupted/truth slice file names do not match")
    pairs = []
    for c_path, t_path in zip(corrupted, truth):
        pairs.append(
            data.normalize_pair(
                load_volume(c_path).data[0], load_volume(t_path).data[0]
            )
        )
    return pairs


def _cmd_train(args) -> int:
    cfg_path = Path(args.config)
    kv = parse_keyvalues(cfg_path.read_text())
    base = cfg_path.parent
    pairs = _load_pairs(base / kv["corrupted_dir"], base / kv["truth_dir"])

    net_cfg = NetworkConfig(
        input_size=(int(kv["height"]), int(kv["width"])),
        base_channels=int(kv.get("base_channels", "32")),
        growth_rate=int(kv.get("growth_rate", "32")),
        dense_layers_per_block=int(kv.get("dense_layers", "4")),
        blocks=int(kv.get("blocks", "2")),
    )
    tcfg = TrainingConfig(
        lr_initial=float(kv.get("lr_initial", "1e-4")),
        lr_final=float(kv.get("lr_final", "1e-6")),
        epochs=int(kv.get("epochs", "100")),
        batch_size=int(kv.get("batch_size", "4")),
        seed=int(kv.get("seed", "0")),
    )
    aug = kv.get("augment", "none")
    if aug != "none":
        pairs = data.augment(pairs, seed=tcfg.seed, variants=int(aug))

    model = build_network(net_cfg)
    model, history = train(model, pairs, tcfg)
    save_checkpoint(model, base / kv["model_out"])
    print(f"trained {len(pairs)} pairs, {tcfg.epochs} epochs")
    print(f"loss: first={history[0]:.6e} last={history[-1]:.6e}")
    return 0


def _cmd_restore(args) -> int:
    model = load_checkpoint(args.model)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for path in data.list_slices(args.in_dir):
        vol = data.load_slice(path)
        (restored,) = restore(model, [vol.data[0]])
        data.save_slice(restored, vol.voxel_pitch, out_dir / path.name)
    print(f"restored slices written to {out_dir}")
    return 0


def main(argv=None) -> int:
    top = argparse.ArgumentParser(prog="cnnrestore", description=__doc__)
    sub = top.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train from a config file")
    p.add_argument("--config", required=True)

    p = sub.add_parser("restore", help="restore a directory of slices")
    p.add_argument("--model", required=True)
    p.add_argument("in_dir")
    p.add_argument("out_dir")

    args = top.parse_args(argv)
    handler = _cmd_train if args.command == "train" else _cmd_restore
    try:
        return handler(args)
    except (ValueError, OSError, KeyError, RuntimeError) as exc:
        print(f"cnnrestore: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
