"""Densely connected residual U-Net for CT slice restoration.

The network predicts a correction that is added to its input, so it learns
the artifact pattern rather than the whole image:

    y_hat = H(x) + x

Topology: two stem convolutions extract primary features; each encoder
stage is a stride-2 convolution followed by a dense block; each decoder
stage is a transposed convolution, a concatenation with the matching
encoder-scale features, and a channel-reduction convolution; a final 1x1
convolution collapses the features to a single channel before the residual
addition.

Two layer orderings coexist deliberately: convolutions outside dense
blocks are Conv-ReLU-BN, while dense-block layers are BN-ReLU-Conv(5x5).

With base_channels=32, growth_rate=32 and 4 dense layers per block, a
700x700 input traces 700x700x32 stems, 350x350x160 and 175x175x160 dense
block outputs, 320->160 and 192->96 reduction convolutions, and a
700x700x1 output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
from torch import nn


@dataclass(frozen=True)
class NetworkConfig:
    input_size: tuple[int, int]
    base_channels: int = 32
    growth_rate: int = 32
    dense_layers_per_block: int = 4
    blocks: int = 2

    def __post_init__(self):
        h, w = self.input_size
        scale = 2**self.blocks
        if h % scale or w % scale:
            raise ValueError(
                f"input size {h}x{w} must be divisible by {scale} "
                f"({self.blocks} stride-2 stages)"
            )
        if self.growth_rate < 1:
            raise ValueError("growth_rate must be >= 1")
        if min(self.base_channels, self.dense_layers_per_block, self.blocks) < 1:
            raise ValueError("channel/layer/block counts must be >= 1")

    @property
    def dense_out_channels(self) -> int:
        """Channels leaving a dense block: V + L*k with V = base_channels."""
        return self.base_channels + self.dense_layers_per_block * self.growth_rate


def _conv_relu_bn(c_in: int, c_out: int, stride: int = 1) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(c_in, c_out, 3, stride=stride, padding=1),
        nn.ReLU(inplace=True),
        nn.BatchNorm2d(c_out),
    )


class DenseLayer(nn.Module):
    """BN-ReLU-Conv(5x5) emitting growth_rate new feature channels."""

    def __init__(self, c_in: int, growth: int):
        super().__init__()
        self.bn = nn.BatchNorm2d(c_in)
        self.relu = nn.ReLU(inplace=True)
        self.conv = nn.Conv2d(c_in, growth, 5, stride=1, padding=2)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.conv(self.relu(self.bn(x)))


class DenseBlock(nn.Module):
    """Stack of dense layers; layer j sees all previous features.

    Input V channels, output V + L*k channels (each layer contributes k
    and is concatenated onto the running feature stack).
    """

    def __init__(self, c_in: int, growth: int, n_layers: int):
        super().__init__()
        self.layers = nn.ModuleList(
            DenseLayer(c_in + j * growth, growth) for j in range(n_layers)
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        for layer in self.layers:
            x = torch.cat([x, layer(x)], dim=1)
        return x


class RestorationNet(nn.Module):
    def __init__(self, cfg: NetworkConfig):
        super().__init__()
        self.cfg = cfg
        base, dense_out = cfg.base_channels, cfg.dense_out_channels

        self.stem = nn.Sequential(_conv_relu_bn(1, base), _conv_relu_bn(base, base))

        downs, dense_blocks = [], []
        c = base
        for _ in range(cfg.blocks):
            downs.append(nn.Conv2d(c, base, 3, stride=2, padding=1))
            dense_blocks.append(DenseBlock(base, cfg.growth_rate, cfg.dense_layers_per_block))
            c = dense_out
        self.downs = nn.ModuleList(downs)
        self.dense_blocks = nn.ModuleList(dense_blocks)

        ups, fuses = [], []
        c = dense_out
        for i in reversed(range(cfg.blocks)):
            ups.append(
                nn.Sequential(
                    nn.ConvTranspose2d(c, c, 3, stride=2, padding=1, output_padding=1),
                    nn.ReLU(inplace=True),
                    nn.BatchNorm2d(c),
                )
            )
            skip = dense_out if i > 0 else base
            fused = (c + skip) // 2
            fuses.append(_conv_relu_bn(c + skip, fused))
            c = fused
        self.ups = nn.ModuleList(ups)
        self.fuses = nn.ModuleList(fuses)

        self.head = nn.Conv2d(c, 1, 1)
        self.reset_parameters()

    def reset_parameters(self) -> None:
        """Zero-mean Gaussian with std sqrt(2 / n_in) per convolution."""
        for mod in self.modules():
            if isinstance(mod, (nn.Conv2d, nn.ConvTranspose2d)):
                n_in = mod.in_channels * mod.kernel_size[0] * mod.kernel_size[1]
                nn.init.normal_(mod.weight, mean=0.0, std=math.sqrt(2.0 / n_in))
                if mod.bias is not None:
                    nn.init.zeros_(mod.bias)
            elif isinstance(mod, nn.BatchNorm2d):
                nn.init.ones_(mod.weight)
                nn.init.zeros_(mod.bias)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[-2:] != torch.Size(self.cfg.input_size):
            raise ValueError(f"input {tuple(x.shape[-2:])} != configured {self.cfg.input_size}")
        h = self.stem(x)
        skips = [h]
        for down, block in zip(self.downs, self.dense_blocks):
            h = block(down(h))
            skips.append(h)
        skips.pop()  # the deepest features are the decoder input, not a skip
        for up, fuse in zip(self.ups, self.fuses):
            h = up(h)
            h = fuse(torch.cat([h, skips.pop()], dim=1))
        return self.head(h) + x


def build_network(cfg: NetworkConfig) -> RestorationNet:
    return RestorationNet(cfg)


def shape_ledger(cfg: NetworkConfig) -> list[tuple[str, tuple[int, int, int]]]:
    """Per-layer output shapes (H, W, C), computed from the topology.

    Mirrors the forward pass without allocating feature maps, so it is
    usable at full 700x700 scale for architecture audits.
    """
    h, w = cfg.input_size
    base, dense_out = cfg.base_channels, cfg.dense_out_channels
    rows: list[tuple[str, tuple[int, int, int]]] = [
        ("stem conv 3x3/1 -relu-bn", (h, w, base)),
        ("stem conv 3x3/1 -relu-bn", (h, w, base)),
    ]
    for i in range(cfg.blocks):
        h, w = h // 2, w // 2
        rows.append((f"down conv 3x3/2 [{i + 1}]", (h, w, base)))
        c = base
        for j in range(cfg.dense_layers_per_block):
            c += cfg.growth_rate
            rows.append((f"dense block {i + 1} layer {j + 1} (concat)", (h, w, c)))
        rows.append((f"dense block {i + 1} output", (h, w, dense_out)))
    c = dense_out
    for i in reversed(range(cfg.blocks)):
        h, w = h * 2, w * 2
        rows.append((f"up convtrans 3x3/2 -relu-bn [{cfg.blocks - i}]", (h, w, c)))
        skip = dense_out if i > 0 else base
        rows.append(("concatenation", (h, w, c + skip)))
        c = (c + skip) // 2
        rows.append(("fuse conv 3x3/1 -relu-bn", (h, w, c)))
    rows.append(("head conv 1x1/1", (h, w, 1)))
    rows.append(("residual add", (h, w, 1)))
    return rows
