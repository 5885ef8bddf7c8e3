"""Hybrid echo cancellation and speech enhancement toolkit.

Pipeline stages: scenario simulation (room impulse responses, loudspeaker
nonlinearity, level-controlled mixing), a frequency-domain adaptive Kalman
filter echo canceller, spectral postfiltering via bounded complex masks or
direct spectrum estimates, and a black-box component-separation evaluation
harness (ERLE, delta-SNR, optional PESQ).
"""

from aeclab.dsp import AudioSignal, FrameConfig, Spectrogram, sqrt_hann, stft, istft
from aeclab.kalman import KalmanConfig, KalmanState, kalman_init, kalman_step, process_aec

__version__ = "0.1.0"
