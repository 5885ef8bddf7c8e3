"""Reader/writer for the binary spectral-exchange format (SPXC).

Independent implementation of the wire format shared with the signal
pipeline: little-endian header (magic, version, layout, bins, frames,
streams), length-prefixed ASCII stream labels, then frame-major,
stream-major float32 (re, im) pairs.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"SPXC"
VERSION = 1
STREAM_LABELS = ("Y", "X", "Dhat", "E", "M", "Shat", "W")
_HEADER = struct.Struct("<4sHBIIH")


class ExchangeError(ValueError):
    pass


@dataclass(frozen=True)
class ExchangeFile:
    one_sided: bool
    labels: tuple[str, ...]
    data: np.ndarray  # (n_frames, n_streams, n_bins) complex64

    @property
    def n_frames(self) -> int:
        return self.data.shape[0]

    @property
    def n_bins(self) -> int:
        return self.data.shape[2]

    def stream(self, label: str) -> np.ndarray:
        if label not in self.labels:
            raise ExchangeError(f"stream {label!r} not present; file has {list(self.labels)}")
        return self.data[:, self.labels.index(label), :]


def write_exchange(path, streams: dict, one_sided: bool = True) -> None:
    labels = tuple(streams.keys())
    if not labels:
        raise ExchangeError("at least one stream is required")
    for label in labels:
        if label not in STREAM_LABELS:
            raise ExchangeError(f"unknown stream label {label!r}")
    arrays = [np.asarray(streams[label]).astype("<c8", copy=False) for label in labels]
    shape = arrays[0].shape
    if len(shape) != 2 or any(a.shape != shape for a in arrays):
        raise ExchangeError(f"streams must share one (n_frames, n_bins) shape, got {[a.shape for a in arrays]}")
    n_frames, n_bins = shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, 0 if one_sided else 1, n_bins, n_frames, len(labels)))
        for label in labels:
            raw = label.encode("ascii")
            fh.write(struct.pack("<B", len(raw)) + raw)
        fh.write(np.stack(arrays, axis=1).tobytes())


def read_exchange(path) -> ExchangeFile:
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < _HEADER.size:
        raise ExchangeError(f"{path}: too short for a header")
    magic, version, layout, n_bins, n_frames, n_streams = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise ExchangeError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise ExchangeError(f"{path}: unsupported version {version}")
    offset = _HEADER.size
    labels = []
    for _ in range(n_streams):
        (length,) = struct.unpack_from("<B", blob, offset)
        offset += 1
        labels.append(blob[offset : offset + length].decode("ascii"))
        offset += length
    expected = n_frames * n_streams * n_bins * 8
    if len(blob) - offset != expected:
        raise ExchangeError(
            f"{path}: payload must be exactly {expected} bytes at offset {offset}, "
            f"found {len(blob) - offset}"
        )
    data = np.frombuffer(blob, dtype="<c8", count=n_frames * n_streams * n_bins, offset=offset)
    return ExchangeFile(
        one_sided=(layout == 0),
        labels=tuple(labels),
        data=data.reshape(n_frames, n_streams, n_bins).copy(),
    )
