"""Real-time phase estimation for multidimensional pseudo-periodic signals."""

__version__ = "0.1.0"

from .estimator import EstimatorConfig, FrameOfReference, RopeEstimator, Tether, estimate_phase  # noqa: E402
from .signal import Delimiters, Kinematics, TimeSeries  # noqa: E402

__all__ = [
    "Delimiters",
    "EstimatorConfig",
    "FrameOfReference",
    "Kinematics",
    "RopeEstimator",
    "Tether",
    "TimeSeries",
    "estimate_phase",
]
