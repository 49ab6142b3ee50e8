"""Merging p-values: arbitrary dependence, exchangeable and randomized rules."""
from .batch import (bonferroni, fisher, generalized_hommel, generalized_mean, geometric,
                    harmonic, hommel, median, ruger, simes, twice_average)
from .calibrators import CalibratorSpec, Family, ValidationReport, integral, quadrature, validate
from .core import MergedP, NumericalError, ParameterError, RuleSpec
from .exchangeable import (ExchangeableStream, ex_average, ex_generalized_mean, ex_geometric,
                           ex_harmonic, ex_hommel, ex_median, ex_ruger, shuffle_then_merge,
                           stream_current, stream_new, stream_push)
from .kernels import BACKEND
from .randomized import (RandSource, randomized_ex, u_generalized_mean, u_hommel, u_median,
                         ua, ug, uh, ur_ruger)
from .rules import dual_condition, merge, merge_rows
from .solver import DualCondition, bisect, breakpoint_exact

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "CalibratorSpec", "DualCondition", "ExchangeableStream", "Family", "MergedP",
    "NumericalError", "ParameterError", "RandSource", "RuleSpec", "ValidationReport",
    "bisect", "bonferroni", "breakpoint_exact", "dual_condition", "ex_average",
    "ex_generalized_mean", "ex_geometric", "ex_harmonic", "ex_hommel", "ex_median",
    "ex_ruger", "fisher", "generalized_hommel", "generalized_mean", "geometric", "harmonic",
    "hommel", "integral", "median", "merge", "merge_rows", "quadrature", "randomized_ex",
    "ruger", "shuffle_then_merge", "simes", "stream_current", "stream_new", "stream_push",
    "twice_average", "u_generalized_mean", "u_hommel", "u_median", "ua", "ug", "uh",
    "ur_ruger", "validate",
]
