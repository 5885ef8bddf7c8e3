"""Image-method room impulse response synthesis at 16 kHz.

Shoebox rooms with uniform wall absorption derived from the target
reverberation time via Sabine's formula. Fractional arrival delays use a
Hann-windowed sinc kernel of +/-8 taps; the output is truncated to the
requested length and peak-normalized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from aeclab.dsp import SAMPLE_RATE
from aeclab.errors import ConfigError, DataError

SPEED_OF_SOUND = 343.0
KERNEL_HALF_WIDTH = 8  # taps on each side of the fractional delay
_CHUNK = 65536  # images per scatter batch, bounds memory


@dataclass(frozen=True)
class RoomSpec:
    """Shoebox room geometry and reverberation target."""

    dimensions: tuple[float, float, float]
    source_pos: tuple[float, float, float]
    mic_pos: tuple[float, float, float]
    t60: float
    rir_len: int = 512

    def __post_init__(self):
        dims = np.asarray(self.dimensions, dtype=np.float64)
        src = np.asarray(self.source_pos, dtype=np.float64)
        mic = np.asarray(self.mic_pos, dtype=np.float64)
        if dims.shape != (3,) or src.shape != (3,) or mic.shape != (3,):
            raise ConfigError("dimensions, source_pos and mic_pos must be 3-vectors")
        if np.any(dims <= 0):
            raise ConfigError(f"room dimensions must be positive, got {tuple(dims)}")
        for name, pos in (("source", src), ("mic", mic)):
            if np.any(pos <= 0) or np.any(pos >= dims):
                raise ConfigError(f"{name} position {tuple(pos)} not strictly inside room {tuple(dims)}")
        if np.array_equal(src, mic):
            raise ConfigError("source and mic positions coincide")
        if self.t60 <= 0:
            raise ConfigError("t60 must be > 0")
        if self.rir_len < 1:
            raise ConfigError("rir_len must be >= 1")

    @property
    def volume(self) -> float:
        lx, ly, lz = self.dimensions
        return lx * ly * lz

    @property
    def surface(self) -> float:
        lx, ly, lz = self.dimensions
        return 2.0 * (lx * ly + lx * lz + ly * lz)


def sabine_absorption(room: RoomSpec) -> float:
    """Uniform wall absorption coefficient reproducing the room's t60.

    Raises when the requested t60 is shorter than the room supports even
    with fully absorbing walls.
    """
    alpha = 0.1611 * room.volume / (room.t60 * room.surface)
    if alpha > 1.0 + 1e-12:
        raise ConfigError(
            f"t60={room.t60} s infeasible for room {tuple(room.dimensions)} m: "
            f"Sabine absorption {alpha:.3f} exceeds 1"
        )
    return min(alpha, 1.0)


def _frac_delay_kernel(offsets: np.ndarray) -> np.ndarray:
    # Hann-windowed sinc, support strictly (-8, 8) samples, cutoff at Nyquist.
    w = 0.5 * (1.0 + np.cos(np.pi * offsets / KERNEL_HALF_WIDTH))
    return np.where(np.abs(offsets) < KERNEL_HALF_WIDTH, w * np.sinc(offsets), 0.0)


def image_method_rir(room: RoomSpec, seed: int = 0, jitter_m: float = 0.0) -> np.ndarray:
    """Render the room impulse response between source and mic.

    Deterministic for fixed inputs; the seed only matters when jitter_m > 0,
    which displaces image sources randomly to break up sweeping-echo
    artifacts of the perfectly regular image lattice.
    """
    fs = SAMPLE_RATE
    alpha = sabine_absorption(room)
    beta = np.sqrt(1.0 - alpha)
    dims = np.asarray(room.dimensions)
    src = np.asarray(room.source_pos)
    mic = np.asarray(room.mic_pos)
    rng = np.random.default_rng(seed)

    max_dist = SPEED_OF_SOUND * (room.rir_len + KERNEL_HALF_WIDTH) / fs
    orders = np.ceil(max_dist / (2.0 * dims)).astype(int)
    grids = [np.arange(-n, n + 1) for n in orders]
    rx, ry, rz = np.meshgrid(*grids, indexing="ij")
    r_all = np.stack([rx.ravel(), ry.ravel(), rz.ravel()], axis=1)
    parities = np.array([[px, py, pz] for px in (0, 1) for py in (0, 1) for pz in (0, 1)])

    h = np.zeros(room.rir_len + 2 * KERNEL_HALF_WIDTH)
    tap_offsets = np.arange(-KERNEL_HALF_WIDTH, KERNEL_HALF_WIDTH + 1)
    for start in range(0, r_all.shape[0], _CHUNK):
        r = r_all[start : start + _CHUNK]
        for p in parities:
            pos = (1 - 2 * p)[None, :] * src[None, :] + 2.0 * r * dims[None, :]
            if jitter_m > 0.0:
                pos = pos + rng.uniform(-jitter_m, jitter_m, size=pos.shape)
            n_reflections = np.abs(r + p[None, :]).sum(axis=1) + np.abs(r).sum(axis=1)
            dist = np.linalg.norm(pos - mic[None, :], axis=1)
            delay = dist * fs / SPEED_OF_SOUND
            keep = delay < room.rir_len + KERNEL_HALF_WIDTH
            if not np.any(keep):
                continue
            delay = delay[keep]
            amp = beta ** n_reflections[keep] / (4.0 * np.pi * dist[keep])
            # Scatter each arrival as a windowed sinc around its fractional delay.
            centers = np.floor(delay).astype(int)
            idx = centers[:, None] + tap_offsets[None, :] + KERNEL_HALF_WIDTH
            taps = amp[:, None] * _frac_delay_kernel(
                centers[:, None] + tap_offsets[None, :] - delay[:, None]
            )
            valid = (idx >= 0) & (idx < h.shape[0])
            h += np.bincount(idx[valid], weights=taps[valid], minlength=h.shape[0])

    h = h[KERNEL_HALF_WIDTH : KERNEL_HALF_WIDTH + room.rir_len]
    peak = np.max(np.abs(h))
    if peak == 0.0:
        raise DataError(
            f"no arrival lands within rir_len={room.rir_len}; direct path is too far"
        )
    return h / peak
