"""Frame-sequential inference over spectral-exchange files.

Recurrent state persists across all frames of one utterance and is created
fresh for each file, so utterances never leak context into each other.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch

from fcrn.data import complex_to_channels
from fcrn.exchange import ExchangeError, read_exchange, write_exchange
from fcrn.model import Fcrn


def output_stream_label(mode: str) -> str:
    return "M" if mode == "OutM" else "Shat"


@torch.no_grad()
def infer_frames(model: Fcrn, features: torch.Tensor) -> np.ndarray:
    """(T, channels_in, height, 1) features -> (T, height) complex64 output."""
    model.eval()
    out, _ = model(features[None])
    re = out[0, :, 0, :, 0].numpy()
    im = out[0, :, 1, :, 0].numpy()
    return (re + 1j * im).astype(np.complex64)


def infer_file(model: Fcrn, features_path, out_path) -> str:
    """Run one utterance and write the estimate stream; returns the label."""
    cfg = model.config
    fh = read_exchange(features_path)
    missing = [s for s in cfg.input_streams if s not in fh.labels]
    if missing:
        raise ExchangeError(
            f"{features_path}: expected input streams {list(cfg.input_streams)}, "
            f"found {list(fh.labels)}"
        )
    maps = [complex_to_channels(fh.stream(s), cfg.feature_height) for s in cfg.input_streams]
    features = torch.from_numpy(np.concatenate(maps, axis=1))
    spec = infer_frames(model, features)[:, : fh.n_bins]
    label = output_stream_label(cfg.mode)
    write_exchange(out_path, {label: spec}, one_sided=fh.one_sided)
    return label


def infer_directory(model: Fcrn, features_dir, out_dir) -> list[str]:
    """Process every *.features.spxc file; outputs are named <id>.net.spxc."""
    features_dir, out_dir = Path(features_dir), Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = sorted(features_dir.glob("*.features.spxc"))
    if not files:
        raise ExchangeError(f"{features_dir}: no feature files found")
    written = []
    for path in files:
        utt_id = path.name[: -len(".features.spxc")]
        infer_file(model, path, out_dir / f"{utt_id}.net.spxc")
        written.append(utt_id)
    return written
