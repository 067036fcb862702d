"""Seeded Adam training loop on normalized tile pairs.

Pixels are scaled to [0, 1] before entering the network and the loss is mean
squared error in that range.  Shuffling, initialisation, and batching all
derive from explicit seeds, so a (seed, data, config) triple reproduces the
same parameter trajectory bit for bit on a given platform.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..raster import SAMPLE_MAX, upsample_bicubic
from .network import Network, NonFiniteActivation


class TrainingDiverged(RuntimeError):
    """Raised when the loss goes non-finite; carries the rescue checkpoint path."""

    def __init__(self, step: int, checkpoint: str | None) -> None:
        msg = f"non-finite training loss at step {step}"
        if checkpoint:
            msg += f"; last parameters saved to {checkpoint}"
        super().__init__(msg)
        self.step = step
        self.checkpoint = checkpoint


@dataclass
class TrainConfig:
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 32
    max_steps: int = 2000
    seed: int = 0
    checkpoint_interval: int = 100  # also the train/val logging cadence
    dtype: str = "float32"

    def __post_init__(self) -> None:
        if self.batch_size < 1 or self.max_steps < 1 or self.checkpoint_interval < 1:
            raise ValueError("batch_size, max_steps and checkpoint_interval must be positive")
        # lr of exactly 0 is allowed: it freezes the parameters, which is
        # occasionally useful as a control run.
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("Adam betas must lie in [0, 1)")


class Adam(object):
    """Adam with bias correction; state keyed by (layer index, tensor name)."""

    def __init__(self, net: Network, cfg: TrainConfig) -> None:
        self.cfg = cfg
        self.t = 0
        self.m = {}
        self.v = {}
        for idx, name, p, _ in net.param_tensors():
            self.m[(idx, name)] = np.zeros_like(p)
            self.v[(idx, name)] = np.zeros_like(p)

    def step(self, net: Network) -> None:
        c = self.cfg
        self.t += 1
        bc1 = 1.0 - c.beta1**self.t
        bc2 = 1.0 - c.beta2**self.t
        for idx, name, p, g in net.param_tensors():
            m = self.m[(idx, name)]
            v = self.v[(idx, name)]
            m *= c.beta1
            m += (1.0 - c.beta1) * g
            v *= c.beta2
            v += (1.0 - c.beta2) * g * g
            p -= c.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + c.adam_eps)


def prepare_inputs(lr_tiles: np.ndarray, convention: str, scale: int, dtype) -> np.ndarray:
    """Normalize LR tiles and, for pre-upsampling networks, enlarge bicubically."""
    x = lr_tiles.astype(np.float64) / SAMPLE_MAX
    if convention == "pre_upsampled":
        x = np.stack([upsample_bicubic(t, scale) for t in x])
    return np.ascontiguousarray(x, dtype=dtype)


def prepare_targets(hr_tiles: np.ndarray, dtype) -> np.ndarray:
    return np.ascontiguousarray(hr_tiles.astype(np.float64) / SAMPLE_MAX, dtype=dtype)


def _mse_batches(net: Network, x: np.ndarray, y: np.ndarray, batch: int) -> float:
    """Mean squared error over a dataset, evaluated in batches."""
    total = 0.0
    for lo in range(0, x.shape[0], batch):
        out = net.forward(x[lo : lo + batch])
        d = out.astype(np.float64) - y[lo : lo + batch].astype(np.float64)
        total += float(np.sum(d * d))
    return total / y.size


def train(
    net: Network,
    train_x: np.ndarray,
    train_y: np.ndarray,
    cfg: TrainConfig,
    val_x: np.ndarray | None = None,
    val_y: np.ndarray | None = None,
    checkpoint_path: str | Path | None = None,
    log=None,
) -> list[dict]:
    """Run the loop; returns history records and leaves `net` at the final step.

    `train_x`/`train_y` are already normalized network inputs and targets (see
    `prepare_inputs`/`prepare_targets`).  Batches are drawn from a fresh seeded
    permutation per epoch.  A non-finite loss saves a rescue checkpoint (when a
    path is given) and raises TrainingDiverged.
    """
    from .checkpoint import save_checkpoint  # local import to avoid a cycle

    if train_x.shape[0] != train_y.shape[0] or train_x.shape[0] == 0:
        raise ValueError("training inputs and targets must pair up and be non-empty")
    n = train_x.shape[0]
    rng = np.random.default_rng(cfg.seed)
    opt = Adam(net, cfg)
    history: list[dict] = []
    order = rng.permutation(n)
    cursor = 0
    t0 = time.perf_counter()

    if val_x is not None and val_x.shape[0] > 0:
        # Pre-training validation loss anchors the learning-progress reports.
        first = {"step": 0, "val_mse": _mse_batches(net, val_x, val_y, cfg.batch_size)}
        if log is not None:
            log(first)
        history.append(first)

    def _rescue() -> str | None:
        if checkpoint_path is None:
            return None
        path = str(checkpoint_path) + ".diverged"
        save_checkpoint(net, path, history=history)
        return path

    for step in range(1, cfg.max_steps + 1):
        if cursor + cfg.batch_size > n:
            order = rng.permutation(n)
            cursor = 0
        idx = order[cursor : cursor + min(cfg.batch_size, n)]
        cursor += cfg.batch_size

        try:
            out = net.forward(train_x[idx])
        except NonFiniteActivation:
            raise TrainingDiverged(step, _rescue()) from None
        diff = out - train_y[idx]
        loss = float(np.mean(diff.astype(np.float64) ** 2))
        if not np.isfinite(loss):
            raise TrainingDiverged(step, _rescue())

        net.zero_grads()
        net.backward(diff * (2.0 / diff.size))
        opt.step(net)

        record = {"step": step, "train_mse": loss}
        if step % cfg.checkpoint_interval == 0 or step == cfg.max_steps:
            if val_x is not None and val_x.shape[0] > 0:
                try:
                    val = _mse_batches(net, val_x, val_y, cfg.batch_size)
                except NonFiniteActivation:
                    raise TrainingDiverged(step, _rescue()) from None
                if not np.isfinite(val):
                    raise TrainingDiverged(step, _rescue())
                record["val_mse"] = val
            record["elapsed_s"] = round(time.perf_counter() - t0, 3)
            if log is not None:
                log(record)
            if checkpoint_path is not None:
                save_checkpoint(net, checkpoint_path, history=history + [record])
        history.append(record)

    return history
