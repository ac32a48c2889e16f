"""Energy-optimal computation offloading over block-fading channels."""

from ._kernels import BACKEND as KERNEL_BACKEND
from .channel import Channel, GainDistribution, QuadratureRule, make_channel
from .errors import ConfigError, InfeasibleError
from .model import EdgeProfile, RadioProfile, TaskProfile

__version__ = "0.1.0"

__all__ = [
    "Channel",
    "ConfigError",
    "EdgeProfile",
    "GainDistribution",
    "InfeasibleError",
    "KERNEL_BACKEND",
    "QuadratureRule",
    "RadioProfile",
    "TaskProfile",
    "__version__",
    "make_channel",
]
