"""Shared types: errors, p-value vectors, rule descriptors and merge results."""
from __future__ import annotations

import re
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np


class ParameterError(ValueError):
    """Invalid rule, calibrator or input parameters."""


class NumericalError(ArithmeticError):
    """A numerical routine failed to reach its tolerance."""


# --------------------------------------------------------------------------
# p-value vectors


def as_pvec(values, clamp: bool = True) -> np.ndarray:
    """Validate a p-value vector and return it as a float64 array.

    Order is preserved. Entries above 1 are clamped (with a warning) and
    negative or NaN entries are rejected.
    """
    p = np.array(values, dtype=float, copy=True).reshape(-1)
    if p.size == 0:
        raise ParameterError("empty p-value vector")
    if np.isnan(p).any():
        raise ParameterError("p-values must not be NaN")
    if (p < 0).any():
        raise ParameterError(f"negative p-value: {p[p < 0][0]!r}")
    if (p > 1).any():
        if not clamp:
            raise ParameterError(f"p-value above 1: {p[p > 1][0]!r}")
        warnings.warn("p-values above 1 clamped to 1", stacklevel=2)
        np.minimum(p, 1.0, out=p)
    return p


def as_pmatrix(values) -> np.ndarray:
    """Row-major (n, K) float64 matrix of p-value vectors, one per row."""
    P = np.ascontiguousarray(values, dtype=float)
    if P.ndim == 1:
        P = P[None, :]
    if P.ndim != 2 or P.shape[1] == 0:
        raise ParameterError("expected a nonempty (n, K) matrix of p-values")
    return P


# --------------------------------------------------------------------------
# rule descriptors

FAMILIES = (
    "bonferroni",
    "ruger",
    "median",
    "hommel",
    "generalized_hommel",
    "average",
    "harmonic",
    "geometric",
    "generalized_mean",
    "fisher",
    "simes",
)

# allowed variants per (family, kind); first entry is the default
_BATCH_VARIANTS = {
    "hommel": ("classical", "exact"),
    "generalized_hommel": ("closed", "exact"),
    "harmonic": ("plain", "improved"),
    "geometric": ("plain", "improved"),
}
_EX_VARIANTS = {
    "average": ("tight", "simple"),
    "harmonic": ("tight", "simple"),
    "geometric": ("tight", "simple"),
    "generalized_mean": ("tight", "simple"),
}
_U_VARIANTS = {
    "average": ("tight", "simple", "wang"),
    "harmonic": ("tight", "simple"),
    "geometric": ("tight", "simple"),
    "generalized_mean": ("tight", "simple"),
}
_EX_FAMILIES = {"bonferroni", "ruger", "median", "hommel", "average", "harmonic",
                "geometric", "generalized_mean"}
_U_FAMILIES = _EX_FAMILIES - {"bonferroni"}
_EXU_FAMILIES = {"ruger", "median", "hommel", "generalized_hommel", "average",
                 "harmonic", "geometric", "generalized_mean"}
METHODS = ("closed", "bisect", "exact")
_PREFIX = {(False, False): "", (True, False): "ex_", (False, True): "u_", (True, True): "exu_"}


@dataclass(frozen=True)
class RuleSpec:
    """A merging rule: family, variant, kind (batch / ex / randomized) and parameters.

    ``k`` is the order-statistic index for Ruger rules (``median`` picks
    ceil(K/2) at evaluation time), ``r`` the generalized-mean exponent and
    ``lambdas`` the quantile grid of the generalized Hommel rule.
    """

    family: str
    variant: Optional[str] = None
    exchangeable: bool = False
    randomized: bool = False
    k: Optional[int] = None
    r: Optional[float] = None
    lambdas: Optional[tuple] = None
    method: str = "closed"
    iters: int = 50

    def __post_init__(self):
        fam = self.family
        if fam not in FAMILIES:
            raise ParameterError(f"unknown rule family {fam!r}")
        if fam in ("fisher", "simes") and (self.exchangeable or self.randomized):
            raise ParameterError(f"{fam} is a batch baseline only")
        kind = (self.exchangeable, self.randomized)
        if kind == (True, False) and fam not in _EX_FAMILIES:
            raise ParameterError(f"no exchangeable form of {fam}")
        if kind == (False, True) and fam not in _U_FAMILIES:
            raise ParameterError(f"no randomized form of {fam}")
        if kind == (True, True) and fam not in _EXU_FAMILIES:
            raise ParameterError(f"no exchangeable randomized form of {fam}")
        table = {(False, False): _BATCH_VARIANTS, (True, False): _EX_VARIANTS,
                 (False, True): _U_VARIANTS, (True, True): {}}[kind]
        allowed = table.get(fam, ())
        if self.variant is None:
            if allowed:
                object.__setattr__(self, "variant", allowed[0])
        elif self.variant not in allowed:
            raise ParameterError(
                f"variant {self.variant!r} not available for {self.label_prefix}{fam}"
                + (f" (choose from {', '.join(allowed)})" if allowed else ""))
        if fam == "ruger":
            if self.k is None:
                raise ParameterError("ruger needs k")
            if int(self.k) != self.k or self.k < 1:
                raise ParameterError(f"k must be a positive integer, got {self.k!r}")
        elif self.k is not None:
            raise ParameterError(f"k is not a parameter of {fam}")
        if fam == "generalized_mean":
            if self.r is None or self.r == 0 or not np.isfinite(self.r):
                raise ParameterError("generalized_mean needs a finite r != 0")
        elif self.r is not None:
            raise ParameterError(f"r is not a parameter of {fam}")
        if fam == "generalized_hommel":
            if self.lambdas is None:
                raise ParameterError("generalized_hommel needs a lambda grid")
            object.__setattr__(self, "lambdas", tuple(float(x) for x in self.lambdas))
        elif self.lambdas is not None:
            raise ParameterError(f"lambda grid is not a parameter of {fam}")
        if self.method not in METHODS:
            raise ParameterError(f"method must be one of {METHODS}")
        if int(self.iters) != self.iters or self.iters < 1:
            raise ParameterError("iters must be a positive integer")

    @property
    def label_prefix(self) -> str:
        return _PREFIX[(self.exchangeable, self.randomized)]

    @property
    def name(self) -> str:
        """Family with its kind prefix, e.g. ``ex_average``."""
        return self.label_prefix + self.family

    @property
    def label(self) -> str:
        """Round-trippable text form, e.g. ``ex_generalized_mean[simple,r=2]``."""
        opts = []
        if self.variant is not None:
            opts.append(self.variant)
        if self.k is not None:
            opts.append(f"k={self.k}")
        if self.r is not None:
            opts.append(f"r={self.r:.17g}")
        if self.lambdas is not None:
            opts.append("lambda=" + "/".join(f"{x:.17g}" for x in self.lambdas))
        if self.method != "closed":
            opts.append(f"method={self.method}")
        if self.iters != 50:
            opts.append(f"iters={self.iters}")
        return self.name + (f"[{','.join(opts)}]" if opts else "")

    def __str__(self):
        return self.label

    @classmethod
    def parse(cls, text: str) -> "RuleSpec":
        """Inverse of :attr:`label`. ``lambda`` entries are separated by ``/``."""
        m = re.fullmatch(r"\s*(exu_|ex_|u_)?([a-z_]+)\s*(?:\[(.*)\])?\s*", text)
        if not m:
            raise ParameterError(f"cannot parse rule {text!r}")
        prefix, fam, opts = m.group(1) or "", m.group(2), m.group(3)
        kw = dict(family=fam, exchangeable=prefix in ("ex_", "exu_"),
                  randomized=prefix in ("u_", "exu_"))
        for tok in (opts.split(",") if opts else []):
            tok = tok.strip()
            if not tok:
                continue
            if "=" not in tok:
                kw["variant"] = tok
                continue
            key, val = (s.strip() for s in tok.split("=", 1))
            try:
                if key == "k":
                    kw["k"] = int(val)
                elif key == "r":
                    kw["r"] = float(val)
                elif key in ("lambda", "lambdas"):
                    kw["lambdas"] = tuple(float(x) for x in val.split("/"))
                elif key == "method":
                    kw["method"] = val
                elif key == "iters":
                    kw["iters"] = int(val)
                else:
                    raise ParameterError(f"unknown rule option {key!r}")
            except ValueError as exc:
                if isinstance(exc, ParameterError):
                    raise
                raise ParameterError(f"bad value for {key}: {val!r}") from None
        return cls(**kw)


def split_rules(text: str) -> list:
    """Split a comma/semicolon separated list of rule labels, respecting brackets."""
    out, depth, cur = [], 0, []
    for ch in text:
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
        if ch in ",;" and depth == 0:
            out.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    out.append("".join(cur))
    return [s.strip() for s in out if s.strip()]


# --------------------------------------------------------------------------
# results


@dataclass(frozen=True)
class MergedP:
    """Result of one merge.

    ``method`` is ``closed_form``, ``bisection`` or ``breakpoint``;
    ``error_bound`` is 0 for closed forms and exact evaluation and 2**-B
    for bisection.
    """

    value: float
    rule: Optional[RuleSpec]
    method: str = "closed_form"
    error_bound: float = 0.0
    realized_u: Optional[float] = None
    K: Optional[int] = None
    k_max: Optional[int] = None
    extras: dict = field(default_factory=dict, compare=False)

    def __float__(self):
        return float(self.value)

    def to_dict(self) -> dict:
        d = {"rule": self.rule.label if self.rule is not None else None,
             "K": self.K, "value": self.value, "method": self.method,
             "error_bound": self.error_bound}
        if self.realized_u is not None:
            d["realized_u"] = self.realized_u
        if self.k_max is not None:
            d["k_max"] = self.k_max
        return d


def cap(x):
    """Clip merged values to [0, 1]."""
    return np.minimum(x, 1.0)


def order_stats(P: np.ndarray) -> np.ndarray:
    """Row-wise ascending sort."""
    return np.sort(P, axis=1, kind="stable")


def ceil_index(lam: float, K: int) -> int:
    """ceil(lam*K) robust to the rounding of lam = j/K style grids."""
    return int(np.ceil(lam * K - 1e-12 * K))


def check_k(k, K: int) -> int:
    if k is None or int(k) != k or not 1 <= k <= K:
        raise ParameterError(f"k must be an integer in 1..{K}, got {k!r}")
    return int(k)
