"""STFT analysis/synthesis and framing primitives shared by every pipeline stage.

All signals are mono at 16 kHz. Spectra use an unnormalized forward DFT and
a 1/N inverse; real signals are stored one-sided (conjugate symmetry is
implicit) and expanded to two-sided on demand.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from aeclab.errors import ConfigError, DataError

SAMPLE_RATE = 16000


def sqrt_hann(length: int) -> np.ndarray:
    """Square-root of the periodic Hann window.

    With 50% overlap the squared window satisfies w^2(i) + w^2(i + length/2) = 1,
    so using it for both analysis and synthesis gives perfect reconstruction.
    """
    if length < 2 or length % 2 != 0:
        raise ConfigError(f"window length must be even and >= 2, got {length}")
    i = np.arange(length)
    return np.sqrt(0.5 - 0.5 * np.cos(2.0 * np.pi * i / length))


@dataclass(frozen=True)
class AudioSignal:
    """Mono audio, dimensionless amplitude nominally in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise DataError(f"audio must be 1-D, got shape {samples.shape}")
        if self.sample_rate != SAMPLE_RATE:
            raise DataError(f"pipeline signals are {SAMPLE_RATE} Hz, got {self.sample_rate}")
        if not np.all(np.isfinite(samples)):
            raise DataError("audio contains NaN or Inf")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


def as_samples(x) -> np.ndarray:
    """Accept an AudioSignal or a bare array, return float64 samples."""
    if isinstance(x, AudioSignal):
        return x.samples
    samples = np.asarray(x, dtype=np.float64)
    if samples.ndim != 1:
        raise DataError(f"audio must be 1-D, got shape {samples.shape}")
    return samples


@dataclass(frozen=True)
class FrameConfig:
    """Analysis framing: frame length, shift, DFT size, and window."""

    frame_len: int = 512
    shift: int = 256
    dft_size: int = 512
    window: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.frame_len <= 0 or self.shift <= 0:
            raise ConfigError("frame_len and shift must be positive")
        if self.frame_len % self.shift != 0:
            raise ConfigError(
                f"shift {self.shift} must divide frame_len {self.frame_len}"
            )
        if self.dft_size < self.frame_len:
            raise ConfigError("dft_size must be >= frame_len")
        window = self.window
        if window is None:
            window = sqrt_hann(self.frame_len)
        window = np.asarray(window, dtype=np.float64)
        if window.shape != (self.frame_len,):
            raise ConfigError(
                f"window length {window.shape} does not match frame_len {self.frame_len}"
            )
        object.__setattr__(self, "window", window)

    @property
    def n_bins_onesided(self) -> int:
        return self.dft_size // 2 + 1


@dataclass(frozen=True)
class Spectrogram:
    """Sequence of complex DFT frames, (n_frames, n_bins)."""

    frames: np.ndarray
    config: FrameConfig
    one_sided: bool = True

    def __post_init__(self):
        frames = np.asarray(self.frames)
        if frames.ndim != 2:
            raise DataError(f"frames must be 2-D (n_frames, n_bins), got {frames.shape}")
        frames = frames.astype(np.complex128, copy=False)
        expected = self.config.n_bins_onesided if self.one_sided else self.config.dft_size
        if frames.shape[0] > 0 and frames.shape[1] != expected:
            raise DataError(
                f"expected {expected} bins for this layout, got {frames.shape[1]}"
            )
        object.__setattr__(self, "frames", frames)

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def n_bins(self) -> int:
        return self.frames.shape[1]

    def to_two_sided(self) -> np.ndarray:
        """Full-size spectra, reconstructing the conjugate-symmetric half if needed."""
        if not self.one_sided:
            return self.frames.copy()
        n = self.config.dft_size
        full = np.empty((self.n_frames, n), dtype=np.complex128)
        full[:, : self.n_bins] = self.frames
        full[:, self.n_bins:] = np.conj(self.frames[:, 1 : n - self.n_bins + 1][:, ::-1])
        return full


def frame_count(n_samples: int, config: FrameConfig) -> int:
    """Number of analysis frames stft() produces for a signal of n_samples."""
    if n_samples < config.frame_len:
        raise DataError(
            f"signal of {n_samples} samples is shorter than one frame ({config.frame_len})"
        )
    n_full = (n_samples - config.frame_len) // config.shift + 1
    covered = (n_full - 1) * config.shift + config.frame_len
    return n_full if covered == n_samples else n_full + 1


def stft(signal, config: FrameConfig | None = None) -> Spectrogram:
    """Windowed one-sided STFT.

    Frame l covers samples [l*shift, l*shift + frame_len). A trailing partial
    frame, if any, is zero-padded in time before windowing so no tail audio is
    discarded.
    """
    if config is None:
        config = FrameConfig()
    x = as_samples(signal)
    n = frame_count(len(x), config)
    k, r = config.frame_len, config.shift
    padded_len = (n - 1) * r + k
    if padded_len != len(x):
        x = np.concatenate([x, np.zeros(padded_len - len(x))])
    idx = np.arange(k)[None, :] + r * np.arange(n)[:, None]
    frames = x[idx] * config.window[None, :]
    spec = np.fft.rfft(frames, n=config.dft_size, axis=1)
    return Spectrogram(spec, config, one_sided=True)


def istft(spec: Spectrogram, length: int | None = None) -> np.ndarray:
    """Inverse STFT by windowed overlap-add.

    Requires 50% overlap and a square-root Hann analysis window; the same
    window is applied at synthesis, which makes istft(stft(x)) exact on the
    fully overlapped interior.
    """
    config = spec.config
    if spec.n_frames == 0:
        raise DataError("empty spectrogram")
    if config.shift * 2 != config.frame_len:
        raise ConfigError("overlap-add synthesis requires shift == frame_len / 2")
    if not np.allclose(config.window, sqrt_hann(config.frame_len), atol=1e-12):
        raise ConfigError("overlap-add synthesis requires a square-root Hann window")
    k, r = config.frame_len, config.shift
    if spec.one_sided:
        frames = np.fft.irfft(spec.frames, n=config.dft_size, axis=1)
    else:
        frames = np.fft.ifft(spec.frames, axis=1).real
    frames = frames[:, :k] * config.window[None, :]
    out = np.zeros((spec.n_frames - 1) * r + k)
    for l in range(spec.n_frames):
        out[l * r : l * r + k] += frames[l]
    if length is not None:
        out = out[:length]
    return out


def zero_pad_features(frame: np.ndarray, target_height: int = 260) -> np.ndarray:
    """Split a complex frame into real/imaginary channels padded to a fixed height.

    Returns shape (target_height, 2); rows beyond the bin count are zero.
    """
    frame = np.asarray(frame)
    if frame.ndim != 1:
        raise DataError(f"expected a single frame, got shape {frame.shape}")
    n_bins = frame.shape[0]
    if n_bins > target_height:
        raise ConfigError(f"{n_bins} bins do not fit in feature height {target_height}")
    out = np.zeros((target_height, 2))
    out[:n_bins, 0] = frame.real
    out[:n_bins, 1] = frame.imag
    return out
