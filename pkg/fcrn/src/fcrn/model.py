"""Convolutional encoder-decoder with a convolutional LSTM bottleneck.

Feature maps are (channels, height, 1) per frame: the height axis carries
frequency bins (zero-padded to a pooling-friendly size), the singleton width
is the single-frame time axis. All convolutions run along the feature axis
with a tall kernel, pooling and upsampling act on the feature axis only, and
two additive skip connections bridge encoder and decoder at full and half
resolution.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

MODES = ("OutM", "OutE")


@dataclass(frozen=True)
class FcrnConfig:
    feature_height: int = 260
    input_streams: tuple[str, ...] = ("E",)
    channels_out: int = 2
    conv_kernel_height: int = 24
    lstm_filters: int = 88
    encoder_filters: tuple[int, int] = (88, 176)
    mode: str = "OutM"
    leak: float = 0.2

    def __post_init__(self):
        object.__setattr__(self, "input_streams", tuple(self.input_streams))
        object.__setattr__(self, "encoder_filters", tuple(self.encoder_filters))
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not self.input_streams:
            raise ValueError("at least one input stream is required")
        if len(self.encoder_filters) != 2:
            raise ValueError("encoder_filters lists the two encoder stage widths")
        if self.feature_height % 4 != 0:
            raise ValueError(
                f"feature height {self.feature_height} must be divisible by the "
                f"two 2x pooling stages"
            )

    @property
    def channels_in(self) -> int:
        return 2 * len(self.input_streams)


class _SameConv(nn.Module):
    """Conv over the feature axis with 'same' output height (even kernels pad
    asymmetrically)."""

    def __init__(self, c_in: int, c_out: int, kernel_height: int):
        super().__init__()
        self.pad_lo = (kernel_height - 1) // 2
        self.pad_hi = kernel_height - 1 - self.pad_lo
        self.conv = nn.Conv2d(c_in, c_out, (kernel_height, 1))

    def forward(self, x):
        return self.conv(nn.functional.pad(x, (0, 0, self.pad_lo, self.pad_hi)))


class ConvLSTMCell(nn.Module):
    """Single convolutional LSTM step over (channels, height, 1) maps."""

    def __init__(self, c_in: int, filters: int, kernel_height: int):
        super().__init__()
        self.filters = filters
        self.gates = _SameConv(c_in + filters, 4 * filters, kernel_height)
        # positive forget-gate bias stabilizes early training
        with torch.no_grad():
            self.gates.conv.bias[filters : 2 * filters].fill_(1.0)

    def initial_state(self, batch: int, height: int, device, dtype):
        shape = (batch, self.filters, height, 1)
        return (
            torch.zeros(shape, device=device, dtype=dtype),
            torch.zeros(shape, device=device, dtype=dtype),
        )

    def forward(self, x, state):
        h, c = state
        z = self.gates(torch.cat([x, h], dim=1))
        i, f, g, o = torch.chunk(z, 4, dim=1)
        c = torch.sigmoid(f) * c + torch.sigmoid(i) * torch.tanh(g)
        h = torch.sigmoid(o) * torch.tanh(c)
        return h, (h, c)


class Fcrn(nn.Module):
    """Maps (batch, time, channels_in, height, 1) to (batch, time, channels_out, height, 1)."""

    def __init__(self, config: FcrnConfig):
        super().__init__()
        self.config = config
        f1, f2 = config.encoder_filters
        n = config.conv_kernel_height
        self.act = nn.LeakyReLU(config.leak)
        self.enc1a = _SameConv(config.channels_in, f1, n)
        self.enc1b = _SameConv(f1, f1, n)
        self.enc2a = _SameConv(f1, f2, n)
        self.enc2b = _SameConv(f2, f2, n)
        self.pool = nn.MaxPool2d((2, 1))
        self.lstm = ConvLSTMCell(f2, config.lstm_filters, n)
        self.dec2a = _SameConv(config.lstm_filters, f2, n)
        self.dec2b = _SameConv(f2, f2, n)
        self.dec1a = _SameConv(f2, f1, n)
        self.dec1b = _SameConv(f1, f1, n)
        self.up = nn.Upsample(scale_factor=(2, 1), mode="nearest")
        self.out = _SameConv(f1, config.channels_out, n)

    def initial_state(self, batch: int, device=None, dtype=torch.float32):
        height = self.config.feature_height // 4
        device = device or next(self.parameters()).device
        return self.lstm.initial_state(batch, height, device, dtype)

    def forward(self, x, state=None):
        if x.ndim != 5:
            raise ValueError(f"expected (batch, time, channels, height, 1), got {tuple(x.shape)}")
        b, t, c_in, height, _ = x.shape
        if c_in != self.config.channels_in or height != self.config.feature_height:
            raise ValueError(
                f"expected {self.config.channels_in} channels x {self.config.feature_height} bins, "
                f"got {c_in} x {height}"
            )
        flat = x.reshape(b * t, c_in, height, 1)
        e1 = self.act(self.enc1b(self.act(self.enc1a(flat))))
        e2 = self.act(self.enc2b(self.act(self.enc2a(self.pool(e1)))))
        bottleneck = self.pool(e2)
        seq = bottleneck.reshape(b, t, *bottleneck.shape[1:])

        if state is None:
            state = self.initial_state(b, x.device, x.dtype)
        hs = []
        for i in range(t):
            h, state = self.lstm(seq[:, i], state)
            hs.append(h)
        z = torch.stack(hs, dim=1).reshape(b * t, self.config.lstm_filters, height // 4, 1)

        d = self.up(self.act(self.dec2a(z)))
        d = self.act(self.dec2b(d)) + e2
        d = self.up(self.act(self.dec1a(d)))
        d = self.act(self.dec1b(d)) + e1
        y = self.out(d)
        return y.reshape(b, t, self.config.channels_out, height, 1), state


def build_model(config: FcrnConfig) -> Fcrn:
    """Construct the network; raises on geometry the pooling cannot handle."""
    return Fcrn(config)


def parameter_count(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())
