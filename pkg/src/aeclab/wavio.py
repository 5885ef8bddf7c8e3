"""WAV file I/O for pipeline signals: 16 kHz mono, float32 on disk."""

from __future__ import annotations

import numpy as np
from scipy.io import wavfile

from aeclab.dsp import SAMPLE_RATE, AudioSignal, as_samples
from aeclab.errors import DataError


def read_wav(path) -> AudioSignal:
    """Read a 16 kHz mono WAV; 16-bit PCM and 32-bit float are accepted.

    Samples are returned as float64 normalized to [-1, 1].
    """
    try:
        rate, data = wavfile.read(path)
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise DataError(f"{path}: not a readable WAV file ({exc})") from exc
    if rate != SAMPLE_RATE:
        raise DataError(f"{path}: sample rate {rate}, pipeline requires {SAMPLE_RATE}")
    if data.ndim != 1:
        raise DataError(f"{path}: expected mono, got {data.shape[1]} channels")
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise DataError(f"{path}: unsupported sample format {data.dtype}")
    return AudioSignal(samples)


def write_wav(path, signal) -> None:
    """Write 32-bit float mono WAV at 16 kHz."""
    samples = as_samples(signal)
    wavfile.write(path, SAMPLE_RATE, samples.astype(np.float32))
