"""Shared test helpers: synthetic source material and dataset scaffolding."""

import json
from pathlib import Path

import numpy as np
import pytest
from scipy.signal import lfilter

from aeclab.wavio import write_wav

FS = 16000


def speech_like(duration_s: float, seed: int, pause_level: float = 0.1) -> np.ndarray:
    """Speech-shaped test signal: lowpassed noise with syllabic modulation and pauses.

    Pause positions are seed-dependent, so two signals overlap in both
    single- and double-talk patterns.
    """
    rng = np.random.default_rng(seed)
    n = int(duration_s * FS)
    x = rng.standard_normal(n)
    x = lfilter([1.0], [1.0, -0.92], x)  # tilt energy toward low frequencies
    # syllabic envelope around 3 Hz
    env_pts = rng.uniform(0.3, 1.0, max(2, int(duration_s * 3) + 2))
    env = np.interp(np.arange(n), np.linspace(0, n, len(env_pts)), env_pts)
    x *= env
    # pauses of 0.2-0.5 s at random positions, attenuated rather than silent
    pos = 0
    while pos < n:
        talk = int(rng.uniform(0.5, 1.5) * FS)
        gap = int(rng.uniform(0.2, 0.5) * FS)
        x[pos + talk : pos + talk + gap] *= pause_level
        pos += talk + gap
    return 0.3 * x / np.max(np.abs(x))


def noise_like(duration_s: float, seed: int) -> np.ndarray:
    """Stationary colored noise."""
    rng = np.random.default_rng(seed)
    n = int(duration_s * FS)
    x = lfilter([1.0], [1.0, -0.7], rng.standard_normal(n))
    return 0.2 * x / np.max(np.abs(x))


def write_sources(directory: Path, count: int, duration_s: float = 2.0, seed0: int = 100):
    """Write count (far, near, noise) WAV triples; returns per-entry path dicts."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for i in range(count):
        far = directory / f"far{i}.wav"
        near = directory / f"near{i}.wav"
        noise = directory / f"noise{i}.wav"
        write_wav(far, speech_like(duration_s, seed0 + 3 * i))
        write_wav(near, speech_like(duration_s, seed0 + 3 * i + 1))
        write_wav(noise, noise_like(duration_s, seed0 + 3 * i + 2))
        entries.append({"far_end": far.name, "near_end": near.name, "noise": noise.name})
    return entries


def write_manifest(path: Path, entries: list) -> Path:
    path = Path(path)
    with open(path, "w") as fh:
        for entry in entries:
            fh.write(json.dumps(entry) + "\n")
    return path


@pytest.fixture(scope="session")
def source_dir(tmp_path_factory):
    """Session-scoped directory of reusable synthetic source WAVs."""
    directory = tmp_path_factory.mktemp("sources")
    write_sources(directory, count=3, duration_s=2.0)
    return directory
