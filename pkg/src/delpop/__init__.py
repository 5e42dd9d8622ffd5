"""Learn sparse mixtures of bit strings from deletion-channel traces.

The pipeline: unbiased moment estimators evaluated on a complex grid,
a conditioned Hankel (Prony) solve for elementary symmetric polynomial
values, LP-based recovery of their integer coefficients, and exact
integer factoring to read the support strings back out.
"""

from .core import (
    ProblemParams,
    BitString,
    SparseDistribution,
    ParameterError,
    eval_poly,
    tv_distance,
    power_sum,
)
from .channel import Trace, ChannelConfig, SubsampleConfig
from .recovery import RecoveryConfig, RecoveryResult, recover

__all__ = [
    "ProblemParams",
    "BitString",
    "SparseDistribution",
    "ParameterError",
    "eval_poly",
    "tv_distance",
    "power_sum",
    "Trace",
    "ChannelConfig",
    "SubsampleConfig",
    "RecoveryConfig",
    "RecoveryResult",
    "recover",
]
