"""Self-describing, versioned model checkpoints."""

from __future__ import annotations

from dataclasses import asdict

import torch

from .model import NetworkConfig, RestorationNet, build_network

FORMAT_VERSION = 1


def save_checkpoint(model: RestorationNet, path) -> None:
    torch.save(
        {
            "format_version": FORMAT_VERSION,
            "network_config": asdict(model.cfg),
            "state_dict": model.state_dict(),
        },
        path,
    )


def load_checkpoint(path) -> RestorationNet:
    blob = torch.load(path, map_location="cpu", weights_only=True)
    version = blob.get("format_version")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version!r}")
    cfg_dict = dict(blob["network_config"])
    cfg_dict["input_size"] = tuple(cfg_dict["input_size"])
    model = build_network(NetworkConfig(**cfg_dict))
    model.load_state_dict(blob["state_dict"])
    model.eval()
    return model
