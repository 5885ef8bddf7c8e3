"""Second-stage spectral enhancement network.

A convolutional encoder-decoder with a convolutional LSTM bottleneck maps
complex spectral frames (split into real/imaginary channels) to either a
bounded complex mask or a direct spectrum estimate. Data travels in the
binary spectral-exchange format, so the network is fully decoupled from the
signal pipeline that produces its inputs and consumes its outputs.
"""

from fcrn.model import FcrnConfig, build_model
from fcrn.loss import spectral_mse
from fcrn.train import TrainSpec, train

__version__ = "0.1.0"
