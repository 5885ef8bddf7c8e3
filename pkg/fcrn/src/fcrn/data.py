"""Dataset over spectral-exchange feature/target file pairs.

Each utterance contributes fixed-length frame windows; complex streams are
zero-padded along the feature axis and split into real/imaginary channels.
The echo-reduced spectrum is kept alongside the features so mask-mode
training can reconstruct the masked output.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from fcrn.exchange import ExchangeError, read_exchange

TARGET_STREAM = "Shat"


def complex_to_channels(spec: np.ndarray, height: int) -> np.ndarray:
    """(T, bins) complex -> (T, 2, height, 1) float32 with zero-padded rows."""
    t, bins = spec.shape
    if bins > height:
        raise ExchangeError(f"{bins} bins do not fit in feature height {height}")
    out = np.zeros((t, 2, height, 1), dtype=np.float32)
    out[:, 0, :bins, 0] = spec.real
    out[:, 1, :bins, 0] = spec.imag
    return out


def complex_to_ri(spec: np.ndarray) -> np.ndarray:
    """(T, bins) complex -> (T, bins, 2) float32."""
    return np.stack([spec.real, spec.imag], axis=-1).astype(np.float32)


@dataclass
class Utterance:
    name: str
    features: torch.Tensor  # (T, channels_in, height, 1)
    e_ri: torch.Tensor  # (T, bins, 2) echo-reduced spectrum
    target_ri: torch.Tensor  # (T, bins, 2) clean spectrum

    @property
    def n_frames(self) -> int:
        return self.features.shape[0]


def load_utterance(features_path, target_path, input_streams, height: int) -> Utterance:
    feats = read_exchange(features_path)
    target = read_exchange(target_path)
    missing = [s for s in input_streams if s not in feats.labels]
    if missing:
        raise ExchangeError(
            f"{features_path}: missing input streams {missing}, file has {list(feats.labels)}"
        )
    if TARGET_STREAM not in target.labels:
        raise ExchangeError(f"{target_path}: no {TARGET_STREAM!r} target stream")
    if target.n_frames != feats.n_frames:
        raise ExchangeError(
            f"{target_path}: {target.n_frames} target frames vs {feats.n_frames} feature frames"
        )
    channel_maps = [complex_to_channels(feats.stream(s), height) for s in input_streams]
    features = np.concatenate(channel_maps, axis=1)
    return Utterance(
        name=Path(features_path).name,
        features=torch.from_numpy(features),
        e_ri=torch.from_numpy(complex_to_ri(feats.stream("E"))),
        target_ri=torch.from_numpy(complex_to_ri(target.stream(TARGET_STREAM))),
    )


def discover_pairs(data_dir) -> list[tuple[Path, Path]]:
    """Match <id>.features.spxc with <id>.target.spxc in one directory."""
    data_dir = Path(data_dir)
    pairs = []
    for features in sorted(data_dir.glob("*.features.spxc")):
        target = features.with_name(features.name.replace(".features.", ".target."))
        if not target.exists():
            raise ExchangeError(f"no target file for {features.name}")
        pairs.append((features, target))
    if not pairs:
        raise ExchangeError(f"{data_dir}: no feature/target pairs found")
    return pairs


class SequenceDataset:
    """Fixed-length windows over a set of utterances.

    Utterances shorter than the sequence length contribute one whole-utterance
    window; otherwise the tail shorter than a full window is dropped.
    """

    def __init__(self, utterances: list[Utterance], sequence_length: int):
        if not utterances:
            raise ExchangeError("empty dataset")
        self.utterances = utterances
        self.sequence_length = sequence_length
        self.windows: list[tuple[int, int, int]] = []
        for idx, utt in enumerate(utterances):
            if utt.n_frames <= sequence_length:
                self.windows.append((idx, 0, utt.n_frames))
            else:
                for start in range(0, utt.n_frames - sequence_length + 1, sequence_length):
                    self.windows.append((idx, start, sequence_length))

    def __len__(self) -> int:
        return len(self.windows)

    def batches(self, batch_size: int, rng: np.random.Generator | None = None):
        """Yield (features, e_ri, target_ri) batches of equal-length windows."""
        order = np.arange(len(self.windows))
        if rng is not None:
            rng.shuffle(order)
        by_length: dict[int, list[int]] = {}
        for i in order:
            by_length.setdefault(self.windows[i][2], []).append(i)
        for length, indices in sorted(by_length.items()):
            for pos in range(0, len(indices), batch_size):
                chunk = indices[pos : pos + batch_size]
                feats, e_ri, target = [], [], []
                for i in chunk:
                    idx, start, n = self.windows[i]
                    utt = self.utterances[idx]
                    feats.append(utt.features[start : start + n])
                    e_ri.append(utt.e_ri[start : start + n])
                    target.append(utt.target_ri[start : start + n])
                yield torch.stack(feats), torch.stack(e_ri), torch.stack(target)


def load_dataset(data_dir, input_streams, height: int, sequence_length: int) -> SequenceDataset:
    pairs = discover_pairs(data_dir)
    utterances = [load_utterance(f, t, input_streams, height) for f, t in pairs]
    return SequenceDataset(utterances, sequence_length)
