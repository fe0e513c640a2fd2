"""Training loop: MSE objective, Adam, exponentially decayed learning rate."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .data import TrainingPair
from .model import RestorationNet


@dataclass(frozen=True)
class TrainingConfig:
    lr_initial: float = 1e-4
    lr_final: float = 1e-6
    epochs: int = 100
    batch_size: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.lr_final > self.lr_initial:
            raise ValueError("lr_final must be <= lr_initial")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")

    def lr_at(self, epoch: int) -> float:
        """Geometric decay from lr_initial (epoch 0) to lr_final (last epoch)."""
        if self.epochs == 1 or self.lr_initial == self.lr_final:
            return self.lr_initial
        frac = epoch / (self.epochs - 1)
        return float(self.lr_initial * (self.lr_final / self.lr_initial) ** frac)


def _to_batches(pairs: list[TrainingPair], batch_size: int, order: np.ndarray):
    xs = np.stack([pairs[i].corrupted for i in order])[:, None]
    ys = np.stack([pairs[i].truth for i in order])[:, None]
    for start in range(0, len(order), batch_size):
        stop = start + batch_size
        yield (
            torch.from_numpy(xs[start:stop]),
            torch.from_numpy(ys[start:stop]),
        )


def train(
    model: RestorationNet, pairs: list[TrainingPair], tcfg: TrainingConfig
) -> tuple[RestorationNet, list[float]]:
    """Returns the trained model and the per-epoch mean loss history."""
    if not pairs:
        raise ValueError("empty training set")
    torch.manual_seed(tcfg.seed)
    rng = np.random.default_rng(tcfg.seed)
    optimizer = torch.optim.Adam(model.parameters(), lr=tcfg.lr_initial)
    loss_fn = nn.MSELoss()

    history: list[float] = []
    model.train()
    for epoch in range(tcfg.epochs):
        lr = tcfg.lr_at(epoch)
        for group in optimizer.param_groups:
            group["lr"] = lr
        order = rng.permutation(len(pairs))
        total, count = 0.0, 0
        for x, y in _to_batches(pairs, tcfg.batch_size, order):
            optimizer.zero_grad()
            loss = loss_fn(model(x), y)
            if not torch.isfinite(loss):
                raise RuntimeError(
                    f"non-finite loss at epoch {epoch} (lr={lr:.2e}); aborting"
                )
            loss.backward()
            optimizer.step()
            total += float(loss.detach()) * x.shape[0]
            count += x.shape[0]
        history.append(total / count)
    model.eval()
    return model, history


def restore(model: RestorationNet, slices: list[np.ndarray]) -> list[np.ndarray]:
    """Forward each slice through the model; order is preserved."""
    model.eval()
    out = []
    with torch.no_grad():
        for s in slices:
            x = torch.from_numpy(np.array(s, dtype=np.float32))[None, None]
            out.append(model(x)[0, 0].numpy())
    return out
