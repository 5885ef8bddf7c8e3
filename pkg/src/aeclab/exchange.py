"""Binary spectral-exchange format (SPXC).

Decouples the DSP pipeline from any downstream estimator: complex spectra
travel as flat little-endian float32 files with labeled streams. Layout:

    magic   4 bytes  b"SPXC"
    version u16      currently 1
    layout  u8       0 = one-sided, 1 = two-sided
    n_bins  u32
    n_frames u32
    n_streams u16
    labels  n_streams x (u8 length + ASCII)
    payload n_frames * n_streams * n_bins * 2 float32 (re, im interleaved),
            frame-major then stream-major

All integers little-endian. Total payload length must be exactly
n_frames * n_streams * n_bins * 8 bytes.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from aeclab.errors import DataError

MAGIC = b"SPXC"
VERSION = 1
STREAM_LABELS = ("Y", "X", "Dhat", "E", "M", "Shat", "W")
_HEADER = struct.Struct("<4sHBIIH")


@dataclass(frozen=True)
class SpectralExchangeFile:
    """In-memory view of one exchange file."""

    one_sided: bool
    labels: tuple[str, ...]
    data: np.ndarray  # (n_frames, n_streams, n_bins) complex64
    version: int = VERSION

    @property
    def n_frames(self) -> int:
        return self.data.shape[0]

    @property
    def n_bins(self) -> int:
        return self.data.shape[2]

    def stream(self, label: str) -> np.ndarray:
        """One labeled stream as (n_frames, n_bins) complex64."""
        if label not in self.labels:
            raise DataError(f"stream {label!r} not present; file has {list(self.labels)}")
        return self.data[:, self.labels.index(label), :]


def _check_labels(labels) -> tuple[str, ...]:
    labels = tuple(labels)
    if not labels:
        raise DataError("at least one stream is required")
    for label in labels:
        if label not in STREAM_LABELS:
            raise DataError(f"unknown stream label {label!r}; allowed: {STREAM_LABELS}")
    if len(set(labels)) != len(labels):
        raise DataError(f"duplicate stream labels: {labels}")
    return labels


def write_exchange(path, streams: dict, one_sided: bool = True) -> None:
    """Write labeled complex spectra, one (n_frames, n_bins) array per label.

    Stream order follows the dict order. Data is stored as float32 pairs.
    """
    labels = _check_labels(streams.keys())
    arrays = []
    shape = None
    for label in labels:
        arr = np.asarray(streams[label])
        if arr.ndim != 2:
            raise DataError(f"stream {label!r} must be 2-D (n_frames, n_bins), got {arr.shape}")
        if shape is None:
            shape = arr.shape
        elif arr.shape != shape:
            raise DataError(
                f"stream {label!r} shape {arr.shape} differs from {shape}"
            )
        arrays.append(arr.astype("<c8", copy=False))
    n_frames, n_bins = shape
    # (n_frames, n_streams, n_bins): frame-major, stream-major.
    data = np.stack(arrays, axis=1)

    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, 0 if one_sided else 1, n_bins, n_frames, len(labels)))
        for label in labels:
            raw = label.encode("ascii")
            fh.write(struct.pack("<B", len(raw)))
            fh.write(raw)
        fh.write(data.tobytes())


def read_exchange(path, expected_streams=None) -> SpectralExchangeFile:
    """Read an exchange file, optionally enforcing an exact stream label set."""
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < _HEADER.size:
        raise DataError(f"{path}: too short for a header ({len(blob)} bytes)")
    magic, version, layout, n_bins, n_frames, n_streams = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise DataError(f"{path}: bad magic {magic!r}, not a spectral exchange file")
    if version != VERSION:
        raise DataError(f"{path}: unsupported version {version} (supported: {VERSION})")
    if layout not in (0, 1):
        raise DataError(f"{path}: bad layout flag {layout}")

    offset = _HEADER.size
    labels = []
    for _ in range(n_streams):
        if offset + 1 > len(blob):
            raise DataError(f"{path}: truncated stream label table at offset {offset}")
        (length,) = struct.unpack_from("<B", blob, offset)
        offset += 1
        raw = blob[offset : offset + length]
        if len(raw) != length:
            raise DataError(f"{path}: truncated stream label at offset {offset}")
        offset += length
        labels.append(raw.decode("ascii"))
    labels = _check_labels(labels)

    if expected_streams is not None:
        expected = tuple(expected_streams)
        if tuple(labels) != expected:
            raise DataError(
                f"{path}: stream labels {list(labels)} do not match expected {list(expected)}"
            )

    payload_len = n_frames * n_streams * n_bins * 8
    available = len(blob) - offset
    if available != payload_len:
        raise DataError(
            f"{path}: payload must be exactly {payload_len} bytes at offset {offset}, "
            f"found {available}"
        )
    data = np.frombuffer(blob, dtype="<c8", count=n_frames * n_streams * n_bins, offset=offset)
    data = data.reshape(n_frames, n_streams, n_bins).copy()
    return SpectralExchangeFile(one_sided=(layout == 0), labels=labels, data=data, version=version)
