"""Spectral training objective.

The loss is the mean over frequency bins of the squared complex deviation
between estimate and target, averaged over frames. In mask mode the network
output is first compressed to a bounded complex gain and multiplied with the
echo-reduced input spectrum, so the objective always compares clean-speech
spectra.
"""

from __future__ import annotations

import torch

MASK_EPSILON = 1e-12


def spectral_mse(s_hat: torch.Tensor, s: torch.Tensor) -> torch.Tensor:
    """Mean over bins of |s_hat - s|^2, averaged over all leading dimensions.

    Inputs are real tensors with a trailing (re, im) axis: (..., bins, 2).
    """
    if s_hat.shape != s.shape:
        raise ValueError(f"shape mismatch: {tuple(s_hat.shape)} vs {tuple(s.shape)}")
    if s_hat.shape[-1] != 2:
        raise ValueError("expected a trailing (re, im) axis of size 2")
    diff = s_hat - s
    per_bin = diff[..., 0] ** 2 + diff[..., 1] ** 2
    return per_bin.mean()


def bounded_mask_apply(mask_ri: torch.Tensor, e_ri: torch.Tensor) -> torch.Tensor:
    """Apply the magnitude-bounded complex mask: tanh-compressed magnitude,
    mask phase, multiplied onto the input spectrum.

    Both tensors are (..., bins, 2) real; returns the same shape.
    """
    if mask_ri.shape != e_ri.shape:
        raise ValueError(f"shape mismatch: {tuple(mask_ri.shape)} vs {tuple(e_ri.shape)}")
    mr, mi = mask_ri[..., 0], mask_ri[..., 1]
    er, ei = e_ri[..., 0], e_ri[..., 1]
    mag = torch.sqrt(mr * mr + mi * mi + MASK_EPSILON * MASK_EPSILON)
    scale = torch.tanh(mag) / mag  # bounded gain magnitude over mask magnitude
    gr, gi = scale * mr, scale * mi
    out_r = er * gr - ei * gi
    out_i = er * gi + ei * gr
    return torch.stack([out_r, out_i], dim=-1)
