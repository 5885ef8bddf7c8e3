"""Synthetic spectral-exchange data for network tests."""

from pathlib import Path

import numpy as np
import pytest

from fcrn.exchange import write_exchange

BINS = 257


def random_spectra(rng, n_frames, bins=BINS, lowpass=32.0):
    """Complex spectra with energy tilted toward low bins."""
    scale = 1.0 / (1.0 + np.arange(bins) / lowpass)
    return (rng.standard_normal((n_frames, bins)) + 1j * rng.standard_normal((n_frames, bins))) * scale


def write_pair(directory, name, n_frames=120, seed=0, noise=0.5, maskable=False):
    """Write one <name>.features.spxc / <name>.target.spxc pair.

    maskable=True builds the target as a bounded complex mask applied to the
    input, so mask-mode training can reach it exactly.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    if maskable:
        # frame-constant bounded per-bin gain: a static spectral shape the
        # network can actually learn from the input alone
        e = random_spectra(rng, n_frames)
        k = np.arange(e.shape[1])
        gain = (0.1 + 0.8 * np.abs(np.sin(k / 17.0))) * np.exp(0.4j * np.cos(k / 11.0))
        s = e * gain[None, :]
    else:
        s = random_spectra(rng, n_frames)
        e = s + noise * random_spectra(rng, n_frames)
    write_exchange(directory / f"{name}.features.spxc", {"E": e.astype(np.complex64)})
    write_exchange(directory / f"{name}.target.spxc", {"Shat": s.astype(np.complex64)})
    return directory / f"{name}.features.spxc", directory / f"{name}.target.spxc"


@pytest.fixture()
def pair_dir(tmp_path):
    write_pair(tmp_path, "utt000", n_frames=120, seed=0)
    return tmp_path
