"""Metrics and black-box component separation.

Echo suppression is rated by ERLE, noise reduction by the SNR improvement
between input and output components, and speech quality optionally by an
external wideband PESQ tool. For full mixtures, per-frame operators (the
echo-path filter snapshots of the canceller and the postfilter gains) are
replayed on each isolated microphone component; because both stages are
linear once their parameters are frozen, the separated components sum
exactly to the system output.
"""

from __future__ import annotations

import math
import os
import re
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy.io import wavfile

from aeclab.dsp import SAMPLE_RATE, AudioSignal, FrameConfig, Spectrogram, as_samples, frame_count, istft, stft
from aeclab.enhance import OutputMode, mask_gain
from aeclab.errors import DataError
from aeclab.kalman import KalmanConfig, replay_echo_estimate
from aeclab.sim import MixtureBundle

METRIC_CAP_DB = 80.0
GAIN_CAP = 4.0
SPECTRUM_FLOOR = 1e-9


class MetricValue(NamedTuple):
    """A dB metric; `capped` marks an infinite ratio clamped to +/-80 dB."""

    db: float
    capped: bool = False


def _frame_energy_mask(x: np.ndarray, frame: int = 256, range_db: float = 40.0) -> np.ndarray:
    n_frames = len(x) // frame
    if n_frames == 0:
        return np.ones(len(x), dtype=bool)
    energies = np.sum(x[: n_frames * frame].reshape(n_frames, frame) ** 2, axis=1)
    peak = np.max(energies)
    if peak == 0.0:
        return np.zeros(len(x), dtype=bool)
    active = energies > peak * 10.0 ** (-range_db / 10.0)
    mask = np.repeat(active, frame)
    tail = len(x) - n_frames * frame
    if tail:
        mask = np.concatenate([mask, np.full(tail, active[-1])])
    return mask


def erle(d, d_tilde, activity_range_db: float = 40.0) -> MetricValue:
    """Echo return loss enhancement over the echo-active region, in dB."""
    d = as_samples(d)
    dt = as_samples(d_tilde)
    if len(d) != len(dt):
        raise DataError(f"length mismatch: {len(d)} vs {len(dt)}")
    mask = _frame_energy_mask(d, range_db=activity_range_db)
    e_in = float(np.sum(d[mask] ** 2))
    if e_in == 0.0:
        raise DataError("echo component is silent; ERLE is undefined")
    e_out = float(np.sum(dt[mask] ** 2))
    if e_out == 0.0:
        return MetricValue(METRIC_CAP_DB, capped=True)
    return MetricValue(10.0 * math.log10(e_in / e_out))


def delta_snr(s, n, s_tilde, n_tilde) -> MetricValue:
    """Output SNR minus input SNR from separated components, in dB."""
    s, n = as_samples(s), as_samples(n)
    st, nt = as_samples(s_tilde), as_samples(n_tilde)
    e_s, e_n = float(np.sum(s**2)), float(np.sum(n**2))
    if e_s == 0.0 or e_n == 0.0:
        raise DataError("input speech/noise component is silent; SNR is undefined")
    e_st, e_nt = float(np.sum(st**2)), float(np.sum(nt**2))
    in_snr = 10.0 * math.log10(e_s / e_n)
    if e_nt == 0.0:
        return MetricValue(METRIC_CAP_DB, capped=True)
    if e_st == 0.0:
        return MetricValue(-METRIC_CAP_DB, capped=True)
    return MetricValue(10.0 * math.log10(e_st / e_nt) - in_snr)


@dataclass(frozen=True)
class OperatorTrace:
    """Per-frame linear operators recorded during a full-mixture run."""

    w_frames: np.ndarray  # (n_blocks, n_bins_aec) complex
    gains: np.ndarray  # (n_frames, n_bins) complex postfilter gain
    mode: OutputMode

    def processed_length(self, shift: int) -> int:
        return self.w_frames.shape[0] * shift


@dataclass(frozen=True)
class ComponentSet:
    """Processed echo, noise, and speech components of the system output."""

    d_tilde: AudioSignal
    n_tilde: AudioSignal
    s_tilde: AudioSignal

    def total(self) -> np.ndarray:
        return self.d_tilde.samples + self.n_tilde.samples + self.s_tilde.samples


def postfilter_gain_from_run(
    e_spec: Spectrogram,
    net_out: np.ndarray,
    mode: OutputMode,
    gain_cap: float = GAIN_CAP,
    floor: float = SPECTRUM_FLOOR,
) -> np.ndarray:
    """Per-frame complex postfilter gains implied by a second-stage run.

    Mask mode records the bounded mask gain directly; direct mode derives
    the quotient against the echo-reduced spectrum, zeroed below the floor
    and magnitude-capped (an estimator may emit energy in bins where the
    input is numerically empty, which no multiplicative gain can express).
    """
    mode = OutputMode.parse(mode)
    net_out = np.asarray(net_out, dtype=np.complex128)
    if net_out.shape != e_spec.frames.shape:
        raise DataError(
            f"net output shape {net_out.shape} does not match spectrum {e_spec.frames.shape}"
        )
    if mode is OutputMode.MASK:
        return mask_gain(net_out)
    e = e_spec.frames
    mag = np.abs(e)
    small = mag < floor
    gains = np.where(small, 0.0, net_out / np.where(small, 1.0, e))
    gmag = np.abs(gains)
    over = gmag > gain_cap
    if np.any(over):
        gains = np.where(over, gains * (gain_cap / np.where(over, gmag, 1.0)), gains)
    return gains


def identity_gains(n_samples: int, frame_config: FrameConfig) -> np.ndarray:
    """All-pass postfilter gains for a signal of n_samples."""
    n = frame_count(n_samples, frame_config)
    return np.ones((n, frame_config.n_bins_onesided), dtype=np.complex128)


def _apply_gains(x: np.ndarray, gains: np.ndarray, frame_config: FrameConfig) -> np.ndarray:
    spec = stft(x, frame_config)
    if gains.shape != spec.frames.shape:
        raise DataError(
            f"gain frames {gains.shape} do not match spectrum {spec.frames.shape}"
        )
    filtered = Spectrogram(spec.frames * gains, frame_config, spec.one_sided)
    return istft(filtered, length=len(x))


def blackbox_separate(
    trace: OperatorTrace,
    components: MixtureBundle,
    x,
    kalman_config: KalmanConfig | None = None,
    frame_config: FrameConfig | None = None,
) -> ComponentSet:
    """Replay the frozen per-frame operators on each isolated mic component.

    The echo estimate is driven by the reference alone, so it is attributed
    entirely to the echo component: the processed echo is the postfiltered
    residual (echo minus replayed estimate), while speech and noise pass
    through the postfilter unchanged by the canceller.
    """
    if kalman_config is None:
        kalman_config = KalmanConfig()
    if frame_config is None:
        frame_config = FrameConfig()
    x = as_samples(x)
    length = trace.processed_length(kalman_config.shift)
    y = components.y.samples
    if len(y) // kalman_config.shift != trace.w_frames.shape[0]:
        raise DataError(
            f"trace has {trace.w_frames.shape[0]} blocks but mixture has "
            f"{len(y) // kalman_config.shift} whole blocks"
        )
    if len(x) < length:
        raise DataError("reference shorter than the processed region")

    d_hat = replay_echo_estimate(x[:length], trace.w_frames, kalman_config)
    residual = components.d.samples[:length] - d_hat
    d_tilde = _apply_gains(residual, trace.gains, frame_config)
    s_tilde = _apply_gains(components.s_mic.samples[:length], trace.gains, frame_config)
    n_tilde = _apply_gains(components.n_mic.samples[:length], trace.gains, frame_config)
    return ComponentSet(
        d_tilde=AudioSignal(d_tilde),
        n_tilde=AudioSignal(n_tilde),
        s_tilde=AudioSignal(s_tilde),
    )


def replay_output(
    trace: OperatorTrace,
    x,
    y,
    kalman_config: KalmanConfig | None = None,
    frame_config: FrameConfig | None = None,
) -> np.ndarray:
    """System output reproduced from the frozen operators on the full mixture."""
    if kalman_config is None:
        kalman_config = KalmanConfig()
    if frame_config is None:
        frame_config = FrameConfig()
    x = as_samples(x)
    y = as_samples(y)
    length = trace.processed_length(kalman_config.shift)
    d_hat = replay_echo_estimate(x[:length], trace.w_frames, kalman_config)
    return _apply_gains(y[:length] - d_hat, trace.gains, frame_config)


class PesqResult(NamedTuple):
    mos: float | None
    status: str  # "ok", "unavailable", or "failed"


PESQ_TOOL_ENV = "AECLAB_PESQ_TOOL"
_MOS_PATTERN = re.compile(r"MOS[-_ ]?LQO\)?[\s:=]+([0-9]+(?:\.[0-9]+)?)")


def pesq_adapter(reference, degraded, tool_path: str | None = None) -> PesqResult:
    """Wideband PESQ via an external executable; degrades gracefully if absent.

    The tool is resolved from the argument or the AECLAB_PESQ_TOOL
    environment variable and invoked as `tool +16000 +wb ref.wav deg.wav`
    on 16-bit PCM copies of the signals.
    """
    tool = tool_path or os.environ.get(PESQ_TOOL_ENV)
    if not tool:
        return PesqResult(None, "unavailable")
    ref = as_samples(reference)
    deg = as_samples(degraded)

    def to_pcm16(x):
        return (np.clip(x, -1.0, 1.0) * 32767.0).astype(np.int16)

    try:
        with tempfile.TemporaryDirectory() as tmp:
            ref_path = Path(tmp) / "ref.wav"
            deg_path = Path(tmp) / "deg.wav"
            wavfile.write(ref_path, SAMPLE_RATE, to_pcm16(ref))
            wavfile.write(deg_path, SAMPLE_RATE, to_pcm16(deg))
            proc = subprocess.run(
                [tool, "+16000", "+wb", str(ref_path), str(deg_path)],
                capture_output=True,
                text=True,
                timeout=120,
            )
        match = _MOS_PATTERN.search(proc.stdout + proc.stderr)
        if proc.returncode != 0 or not match:
            return PesqResult(None, "failed")
        return PesqResult(float(match.group(1)), "ok")
    except (OSError, subprocess.SubprocessError):
        return PesqResult(None, "failed")
