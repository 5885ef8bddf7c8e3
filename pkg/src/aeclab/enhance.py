"""Second-stage spectral output application.

Two output modes: a direct complex spectrum estimate passed through verbatim
(OutE), or a magnitude-bounded complex mask multiplied onto the echo-reduced
spectrum (OutM). The mask's magnitude is compressed through tanh, so the
masked output can never exceed the input magnitude in any bin.
"""

from __future__ import annotations

import enum

import numpy as np

from aeclab.dsp import Spectrogram
from aeclab.errors import ConfigError, DataError

MASK_EPSILON = 1e-12
# Relative guard when clamping magnitudes: large enough to absorb the
# rounding of the clamp multiplication itself, far below any signal scale.
_CLAMP_GUARD = 1.0 - 1e-14


class OutputMode(enum.Enum):
    """How the second stage produces its output spectrum."""

    DIRECT = "OutE"
    MASK = "OutM"

    @classmethod
    def parse(cls, value) -> "OutputMode":
        if isinstance(value, cls):
            return value
        for mode in cls:
            if value in (mode.value, mode.name):
                return mode
        raise ConfigError(f"unknown output mode {value!r}; use OutE or OutM")


def mask_gain(mask: np.ndarray, epsilon: float = MASK_EPSILON) -> np.ndarray:
    """Complex gain of a bounded mask: tanh-compressed magnitude, original phase.

    Bins with |mask| < epsilon get gain 0 (the 0/0 phase is undefined there,
    and a vanishing mask magnitude means full suppression anyway). The gain
    magnitude is clamped to 1 so the bound survives floating-point rounding.
    """
    if epsilon <= 0:
        raise ConfigError("epsilon must be > 0")
    mask = np.asarray(mask, dtype=np.complex128)
    mag = np.abs(mask)
    safe = np.where(mag < epsilon, 1.0, mag)
    gain = np.where(mag < epsilon, 0.0, np.tanh(mag) / safe) * mask
    gmag = np.abs(gain)
    over = gmag > 1.0
    if np.any(over):
        gain = np.where(over, gain * (_CLAMP_GUARD / np.where(over, gmag, 1.0)), gain)
    return gain


def apply_complex_mask(e_frame: np.ndarray, mask: np.ndarray, epsilon: float = MASK_EPSILON) -> np.ndarray:
    """Multiply one spectrum frame with the bounded complex mask gain.

    Guarantees |output| <= |input| bin-wise.
    """
    e_frame = np.asarray(e_frame, dtype=np.complex128)
    mask = np.asarray(mask, dtype=np.complex128)
    if e_frame.shape != mask.shape:
        raise DataError(f"bin count mismatch: {e_frame.shape} vs {mask.shape}")
    out = e_frame * mask_gain(mask, epsilon)
    # Final clamp: rounding in the complex multiply may overshoot by an ulp.
    out_mag = np.abs(out)
    in_mag = np.abs(e_frame)
    over = out_mag > in_mag
    if np.any(over):
        out = np.where(over, out * (_CLAMP_GUARD * in_mag / np.where(over, out_mag, 1.0)), out)
    return out


def assemble_output(mode: OutputMode, e_spec: Spectrogram, net_out: Spectrogram) -> Spectrogram:
    """Combine the echo-reduced spectrum with the second-stage output."""
    mode = OutputMode.parse(mode)
    if net_out.frames.shape != e_spec.frames.shape:
        raise DataError(
            f"spectrum shape mismatch: {net_out.frames.shape} vs {e_spec.frames.shape}"
        )
    if mode is OutputMode.DIRECT:
        return Spectrogram(net_out.frames.copy(), e_spec.config, e_spec.one_sided)
    frames = apply_complex_mask(e_spec.frames, net_out.frames)
    return Spectrogram(frames, e_spec.config, e_spec.one_sided)
