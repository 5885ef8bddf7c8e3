"""Frequency-domain adaptive Kalman filter echo canceller (overlap-save).

The echo path is tracked per DFT bin as a first-order Markov state with a
diagonal error-covariance approximation. Each step filters one block of
``shift`` samples through a ``dft_size``-point overlap-save convolution,
then updates the path estimate from the error spectrum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from aeclab.dsp import AudioSignal, as_samples
from aeclab.errors import ConfigError, DataError


@dataclass(frozen=True)
class KalmanConfig:
    dft_size: int = 1024
    shift: int = 256
    forgetting_factor: float = 0.998
    overestimation: float = 1.5
    psd_smoothing: float = 0.5
    init_cov: float = 1.0
    psd_floor: float = 1e-8
    filter_support: int | None = None
    # Compensates the power deficit of the zero-padded error frame in the
    # gain denominator (factor dft_size/shift); standard for overlap-save.
    block_compensation: bool = True

    def __post_init__(self):
        if self.dft_size < 2 or self.shift < 1 or self.shift >= self.dft_size:
            raise ConfigError("need dft_size >= 2 and 0 < shift < dft_size")
        if not 0.0 < self.forgetting_factor < 1.0:
            raise ConfigError("forgetting_factor must be in (0, 1)")
        if not 0.0 <= self.psd_smoothing < 1.0:
            raise ConfigError("psd_smoothing must be in [0, 1)")
        if self.overestimation < 1.0:
            raise ConfigError("overestimation must be >= 1")
        if self.init_cov <= 0.0:
            raise ConfigError("init_cov must be > 0 (a zero prior freezes adaptation)")
        if self.psd_floor <= 0.0:
            raise ConfigError("psd_floor must be > 0")
        support = self.filter_support
        if support is None:
            support = self.dft_size - self.shift
            object.__setattr__(self, "filter_support", support)
        if not 0 < support <= self.dft_size - self.shift:
            raise ConfigError(
                f"filter_support must be in (0, {self.dft_size - self.shift}] "
                f"for exact overlap-save output, got {support}"
            )

    @property
    def n_bins(self) -> int:
        return self.dft_size // 2 + 1


@dataclass
class KalmanState:
    """Per-bin path estimate, error covariance, and noise-PSD memory."""

    config: KalmanConfig
    w_hat: np.ndarray
    cov: np.ndarray
    noise_psd: np.ndarray
    x_buffer: np.ndarray


@dataclass(frozen=True)
class AecFrameOutput:
    e_block: np.ndarray
    d_hat_block: np.ndarray
    e_frame: np.ndarray
    d_hat_frame: np.ndarray
    w_snapshot: np.ndarray


def kalman_init(config: KalmanConfig) -> KalmanState:
    n = config.n_bins
    return KalmanState(
        config=config,
        w_hat=np.zeros(n, dtype=np.complex128),
        cov=np.full(n, config.init_cov),
        noise_psd=np.full(n, config.psd_floor),
        x_buffer=np.zeros(config.dft_size),
    )


def _check_block(name: str, block: np.ndarray, shift: int) -> np.ndarray:
    block = np.asarray(block, dtype=np.float64)
    if block.shape != (shift,):
        raise DataError(f"{name} block must have exactly {shift} samples, got {block.shape}")
    if not np.all(np.isfinite(block)):
        raise DataError(f"{name} block contains NaN or Inf")
    return block


def kalman_step(state: KalmanState, x_block, y_block) -> tuple[AecFrameOutput, KalmanState]:
    """Process one block of reference/microphone samples, updating the state in place.

    Returns the frame output (error and echo-estimate blocks plus their
    spectra and a snapshot of the filter used for this frame) and the state.
    """
    cfg = state.config
    k, r = cfg.dft_size, cfg.shift
    x_block = _check_block("reference", x_block, r)
    y_block = _check_block("microphone", y_block, r)

    state.x_buffer = np.concatenate([state.x_buffer[r:], x_block])
    x_spec = np.fft.rfft(state.x_buffer)
    w_snapshot = state.w_hat.copy()

    d_hat_frame = state.w_hat * x_spec
    d_hat_block = np.fft.irfft(d_hat_frame, n=k)[-r:]
    e_block = y_block - d_hat_block
    e_frame = np.fft.rfft(np.concatenate([np.zeros(k - r), e_block]))

    beta = cfg.psd_smoothing
    state.noise_psd = np.maximum(
        beta * state.noise_psd + (1.0 - beta) * np.abs(e_frame) ** 2, cfg.psd_floor
    )

    comp = k / r if cfg.block_compensation else 1.0
    x_power = np.abs(x_spec) ** 2
    denom = state.cov * x_power + cfg.overestimation * comp * state.noise_psd
    gain = state.cov * np.conj(x_spec) / denom
    gain_x = state.cov * x_power / denom  # real-valued form of gain * x_spec

    a = cfg.forgetting_factor
    w_new = a * (state.w_hat + gain * e_frame)
    taps = np.fft.irfft(w_new, n=k)
    taps[cfg.filter_support:] = 0.0
    w_new = np.fft.rfft(taps)

    state.w_hat = w_new
    state.cov = np.maximum(
        a * a * (1.0 - gain_x) * state.cov + (1.0 - a * a) * np.abs(w_new) ** 2, 0.0
    )

    out = AecFrameOutput(
        e_block=e_block,
        d_hat_block=d_hat_block,
        e_frame=e_frame,
        d_hat_frame=d_hat_frame,
        w_snapshot=w_snapshot,
    )
    return out, state


def process_aec(x, y, config: KalmanConfig | None = None):
    """Stream the Kalman canceller over a whole utterance.

    Returns (enhanced signal e, echo estimate d_hat, trace) where the trace
    holds one filter snapshot per processed block, as used at filtering time.
    Only whole blocks are processed; the tail shorter than one block is dropped.
    """
    if config is None:
        config = KalmanConfig()
    x = as_samples(x)
    y = as_samples(y)
    if len(x) != len(y):
        raise DataError(f"reference and microphone lengths differ: {len(x)} vs {len(y)}")
    r = config.shift
    n_blocks = len(x) // r
    if n_blocks == 0:
        raise DataError(f"need at least {r} samples, got {len(x)}")

    state = kalman_init(config)
    e = np.empty(n_blocks * r)
    d_hat = np.empty(n_blocks * r)
    trace = np.empty((n_blocks, config.n_bins), dtype=np.complex128)
    for i in range(n_blocks):
        sl = slice(i * r, (i + 1) * r)
        out, state = kalman_step(state, x[sl], y[sl])
        e[sl] = out.e_block
        d_hat[sl] = out.d_hat_block
        trace[i] = out.w_snapshot
    return AudioSignal(e), AudioSignal(d_hat), trace


def replay_echo_estimate(x, w_frames: np.ndarray, config: KalmanConfig | None = None) -> np.ndarray:
    """Re-run the overlap-save filtering path with frozen per-block filters.

    Given the reference signal and the filter snapshots recorded by
    process_aec, reproduces the echo estimate of that run exactly (no
    adaptation happens here). Used for black-box component separation.
    """
    if config is None:
        config = KalmanConfig()
    x = as_samples(x)
    w_frames = np.asarray(w_frames)
    k, r = config.dft_size, config.shift
    if w_frames.ndim != 2 or w_frames.shape[1] != config.n_bins:
        raise DataError(f"filter trace must be (n_blocks, {config.n_bins}), got {w_frames.shape}")
    n_blocks = w_frames.shape[0]
    if len(x) // r < n_blocks:
        raise DataError(
            f"reference has {len(x) // r} whole blocks, trace has {n_blocks}"
        )
    buf = np.zeros(k)
    d_hat = np.empty(n_blocks * r)
    for i in range(n_blocks):
        buf = np.concatenate([buf[r:], x[i * r : (i + 1) * r]])
        x_spec = np.fft.rfft(buf)
        d_hat[i * r : (i + 1) * r] = np.fft.irfft(w_frames[i] * x_spec, n=k)[-r:]
    return d_hat
