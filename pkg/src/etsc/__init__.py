"""Exact conversion of causal Toeplitz kernels into diagonal state-space models."""
from .conversion import (
    GradientConfig,
    SsmModes,
    augment,
    convert_with_decay,
    etsc_convert,
    gradient_convert,
    reconstruct,
    truncate,
)
from .inference import StackedMixer, open_session, parity_report
from .ssm import ChannelBank, init_state, scan, step
from .toeplitz import ToeplitzKernel, apply_fft, apply_naive, relative_error

__version__ = "0.1.0"

__all__ = [
    "ChannelBank", "GradientConfig", "SsmModes", "StackedMixer", "ToeplitzKernel", "apply_fft", "apply_naive",
    "augment", "convert_with_decay", "etsc_convert", "gradient_convert", "init_state", "open_session",
    "parity_report", "reconstruct", "relative_error", "scan", "step", "truncate",
]
