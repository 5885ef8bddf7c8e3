"""Training loop with plateau-driven learning-rate decay.

The learning rate is multiplied by a fixed factor whenever the epoch loss
has not improved for a set number of epochs; training stops once the rate
falls below its floor or the loss stalls for the longer stop patience.
Sequences are optimized independently (no recurrent state is carried across
windows of the same utterance).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch

from fcrn.data import SequenceDataset
from fcrn.loss import bounded_mask_apply, spectral_mse
from fcrn.model import Fcrn, FcrnConfig, build_model


@dataclass(frozen=True)
class TrainSpec:
    batch_size: int = 16
    sequence_length: int = 50
    lr_init: float = 5e-5
    lr_decay: float = 0.6
    decay_patience: int = 3
    stop_lr: float = 5e-7
    stop_patience: int = 10
    seed: int = 0
    max_epochs: int | None = None

    def __post_init__(self):
        if min(self.batch_size, self.sequence_length, self.decay_patience, self.stop_patience) <= 0:
            raise ValueError("batch/sequence/patience values must be positive")
        if not 0.0 < self.lr_decay < 1.0:
            raise ValueError("lr_decay must be in (0, 1)")
        if self.lr_init <= 0 or self.stop_lr <= 0:
            raise ValueError("learning rates must be positive")


def _batch_loss(model: Fcrn, feats, e_ri, target_ri):
    out, _ = model(feats)
    # (B, T, 2, M, 1) -> (B, T, bins, 2) on the populated rows
    bins = e_ri.shape[2]
    pred_ri = out[:, :, :, :bins, 0].permute(0, 1, 3, 2)
    if model.config.mode == "OutM":
        s_hat = bounded_mask_apply(pred_ri, e_ri)
    else:
        s_hat = pred_ri
    return spectral_mse(s_hat, target_ri)


def train(
    model: Fcrn,
    dataset: SequenceDataset,
    spec: TrainSpec = TrainSpec(),
    checkpoint_path=None,
):
    """Run the schedule to completion; returns the per-epoch history."""
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    torch.manual_seed(spec.seed)
    optimizer = torch.optim.Adam(model.parameters(), lr=spec.lr_init)
    rng = np.random.default_rng(spec.seed)

    history = []
    best = float("inf")
    since_best = 0
    lr = spec.lr_init
    epoch = 0
    while True:
        epoch += 1
        model.train()
        total, frames = 0.0, 0
        for feats, e_ri, target_ri in dataset.batches(spec.batch_size, rng):
            optimizer.zero_grad()
            loss = _batch_loss(model, feats, e_ri, target_ri)
            loss.backward()
            optimizer.step()
            n = feats.shape[0] * feats.shape[1]
            total += float(loss.detach()) * n
            frames += n
        epoch_loss = total / frames
        events = []

        if epoch_loss < best:
            best = epoch_loss
            since_best = 0
        else:
            since_best += 1
            if since_best % spec.decay_patience == 0:
                lr *= spec.lr_decay
                for group in optimizer.param_groups:
                    group["lr"] = lr
                events.append("lr_decay")

        stop = False
        if lr < spec.stop_lr:
            events.append("stop_lr")
            stop = True
        if since_best >= spec.stop_patience:
            events.append("stop_plateau")
            stop = True
        if spec.max_epochs is not None and epoch >= spec.max_epochs:
            events.append("stop_max_epochs")
            stop = True

        history.append({"epoch": epoch, "loss": epoch_loss, "lr": lr, "events": events})
        if stop:
            break

    if checkpoint_path is not None:
        save_checkpoint(checkpoint_path, model, history)
    return history


def save_checkpoint(path, model: Fcrn, history) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(
        {"state_dict": model.state_dict(), "config": asdict(model.config), "history": history},
        path,
    )
    path.with_suffix(".history.json").write_text(json.dumps(history, indent=1) + "\n")


def load_checkpoint(path) -> tuple[Fcrn, list]:
    payload = torch.load(path, map_location="cpu", weights_only=False)
    config = FcrnConfig(**payload["config"])
    model = build_model(config)
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model, payload.get("history", [])
