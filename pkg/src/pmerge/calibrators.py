"""Calibrator families: decreasing maps from p-values to e-values.

Each merging rule in this package is the dual form of one of these
calibrators, i.e. inf{alpha : averaged f(p_i / alpha) crosses a threshold}.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Optional

import numpy as np

from . import _pykernels as _pk
from .core import NumericalError, ParameterError


class Family(str, Enum):
    RUGER = "ruger"
    GRID_HARMONIC = "grid_harmonic"
    GENERALIZED_GRID = "generalized_grid"
    ARITHMETIC = "arithmetic"
    HARMONIC = "harmonic"
    GEOMETRIC = "geometric"
    GENERALIZED_MEAN = "generalized_mean"


_CODES = {
    Family.RUGER: _pk.RUGER,
    Family.GRID_HARMONIC: _pk.GRID_HARMONIC,
    Family.GENERALIZED_GRID: _pk.GENERALIZED_GRID,
    Family.ARITHMETIC: _pk.ARITHMETIC,
    Family.HARMONIC: _pk.HARMONIC,
    Family.GEOMETRIC: _pk.GEOMETRIC,
    Family.GENERALIZED_MEAN: _pk.GENERALIZED_MEAN,
}

# families whose constants need ln ln K
_NEEDS_K2 = (Family.HARMONIC,)


def harmonic_number(K: int) -> float:
    return math.fsum(1.0 / j for j in range(1, K + 1))


def harmonic_threshold(K: int) -> float:
    """T_K = ln K + ln ln K + 1, checked against K*T + 1 <= e^T."""
    if int(K) != K or K < 2:
        raise ParameterError(f"harmonic threshold needs an integer K >= 2, got {K!r}")
    T = math.log(K) + math.log(math.log(K)) + 1.0
    if K * T + 1.0 - math.exp(T) > 0:
        raise NumericalError(f"K*T_K + 1 > exp(T_K) at K={K}")
    return T


def _gm_integral(r: float, K: float, T: float) -> float:
    """Closed-form integral over [0, 1] of min{r(1 - p^r)/T, K}."""
    if r > 0:
        if r / T <= K:
            return r * r / (T * (r + 1.0))
        c = (1.0 - K * T / r) ** (1.0 / r)
        return K * c + (r / T) * ((1.0 - c) - (1.0 - c ** (r + 1.0)) / (r + 1.0))
    s = -r
    logc = -math.log1p(K * T / s) / s
    c = math.exp(logc)
    # integral of p^-s over [c, 1]
    tail = -logc if s == 1 else -math.expm1((1.0 - s) * logc) / (1.0 - s)
    return K * c + (s / T) * (tail - (1.0 - c))


def generalized_mean_threshold(r: float, K: int) -> float:
    """T_{r,K} making the generalized-mean calibrator integrate to 1."""
    if r == 0 or not math.isfinite(r):
        raise ParameterError("r must be finite and nonzero")
    if int(K) != K or K < 1:
        raise ParameterError(f"K must be a positive integer, got {K!r}")
    if r > 0:
        return r * r / (r + 1.0)
    if r == -1:
        return harmonic_threshold(K)
    if K < 2:
        raise ParameterError("negative r needs K >= 2")
    lo, hi = 1e-6, 10.0 * (math.log(K) + 2.0)
    # for r < -1 the root grows like K, so widen the bracket until it straddles
    for _ in range(64):
        if _gm_integral(r, K, hi) < 1.0:
            break
        lo, hi = hi, 2.0 * hi
    glo, ghi = _gm_integral(r, K, lo) - 1.0, _gm_integral(r, K, hi) - 1.0
    if not (glo > 0 > ghi):
        raise NumericalError(
            f"T bracket [{lo}, {hi}] does not straddle the root for r={r}, K={K}: "
            f"integral-1 = ({glo:.3g}, {ghi:.3g})")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _gm_integral(r, K, mid) > 1.0:
            lo = mid
        else:
            hi = mid
    err = _gm_integral(r, K, hi) - 1.0
    if abs(err) > 1e-9:
        raise NumericalError(f"T root-finder stalled at T={hi!r} for r={r}, K={K}: integral-1={err:.3g}")
    return hi  # integral <= 1 on this side


@dataclass(frozen=True)
class CalibratorSpec:
    """A calibrator family with its parameters.

    ``threshold`` overrides T_K (Harmonic) or T_{r,K} (GeneralizedMean); it is
    meant for experiments and validation of deliberately broken calibrators.
    """

    family: Family
    K: int
    k: Optional[int] = None
    r: Optional[float] = None
    lambdas: Optional[tuple] = None
    threshold: Optional[float] = None

    def __post_init__(self):
        try:
            fam = Family(self.family)
        except ValueError:
            raise ParameterError(f"unknown calibrator family {self.family!r}") from None
        object.__setattr__(self, "family", fam)
        K = self.K
        if int(K) != K or K < 1:
            raise ParameterError(f"K must be a positive integer, got {K!r}")
        object.__setattr__(self, "K", int(K))
        if (fam in _NEEDS_K2 or (fam is Family.GENERALIZED_MEAN and (self.r or 0) < 0)) and K < 2:
            raise ParameterError(f"{fam.value} calibrator needs K >= 2")
        if fam is Family.RUGER:
            if self.k is None or int(self.k) != self.k or not 1 <= self.k <= K:
                raise ParameterError(f"k must be an integer in 1..{K}, got {self.k!r}")
        elif self.k is not None:
            raise ParameterError("k only applies to the Ruger calibrator")
        if fam is Family.GENERALIZED_MEAN:
            if self.r is None or self.r == 0 or not math.isfinite(self.r):
                raise ParameterError("generalized mean calibrator needs finite r != 0")
        elif self.r is not None:
            raise ParameterError("r only applies to the generalized mean calibrator")
        if fam is Family.GENERALIZED_GRID:
            object.__setattr__(self, "lambdas", check_grid(self.lambdas))
        elif self.lambdas is not None:
            raise ParameterError("a lambda grid only applies to the generalized grid calibrator")
        if self.threshold is not None:
            if fam not in (Family.HARMONIC, Family.GENERALIZED_MEAN):
                raise ParameterError("threshold override only applies to harmonic and generalized mean")
            if not self.threshold > 0:
                raise ParameterError("threshold must be positive")

    # -- constructors
    @classmethod
    def ruger(cls, K, k):
        return cls(Family.RUGER, K, k=k)

    @classmethod
    def grid_harmonic(cls, K):
        return cls(Family.GRID_HARMONIC, K)

    @classmethod
    def generalized_grid(cls, lambdas, K=2):
        return cls(Family.GENERALIZED_GRID, K, lambdas=lambdas)

    @classmethod
    def arithmetic(cls, K=2):
        return cls(Family.ARITHMETIC, K)

    @classmethod
    def harmonic(cls, K, threshold=None):
        return cls(Family.HARMONIC, K, threshold=threshold)

    @classmethod
    def geometric(cls, K=2):
        return cls(Family.GEOMETRIC, K)

    @classmethod
    def generalized_mean(cls, r, K, threshold=None):
        return cls(Family.GENERALIZED_MEAN, K, r=float(r), threshold=threshold)

    # -- constants
    @cached_property
    def h(self) -> float:
        """h_K for GridHarmonic, h_M for GeneralizedGrid, 1 otherwise."""
        if self.family is Family.GRID_HARMONIC:
            return harmonic_number(self.K)
        if self.family is Family.GENERALIZED_GRID:
            lam = self.lambdas
            return math.fsum((lam[j] - lam[j - 1]) / lam[j] for j in range(1, len(lam)))
        return 1.0

    @cached_property
    def T(self) -> float:
        """T_K (Harmonic) or T_{r,K} (GeneralizedMean); nan for the other families."""
        if self.threshold is not None:
            return float(self.threshold)
        if self.family is Family.HARMONIC:
            return harmonic_threshold(self.K)
        if self.family is Family.GENERALIZED_MEAN:
            return generalized_mean_threshold(self.r, self.K)
        return math.nan

    @cached_property
    def a(self) -> float:
        """a_{r,K} = (1 - T/r)^(-1/r) for GeneralizedMean; nan otherwise."""
        if self.family is not Family.GENERALIZED_MEAN:
            return math.nan
        return (1.0 - self.T / self.r) ** (-1.0 / self.r)

    @property
    def code(self) -> int:
        return _CODES[self.family]

    def kernel_args(self):
        """(code, K, k, h, T, r, lam) as consumed by the kernels."""
        lam = np.asarray(self.lambdas if self.lambdas is not None else (0.0,), dtype=float)
        T = self.T if self.family in (Family.HARMONIC, Family.GENERALIZED_MEAN) else 1.0
        return (self.code, float(self.K), float(self.k or 1), self.h, T,
                float(self.r or 1.0), lam)

    def __call__(self, p, raw=False):
        return evaluate(self, p, raw=raw)

    def breakpoints(self) -> list:
        """Points in (0, 1) where f jumps or its cap starts to bind."""
        fam, K = self.family, self.K
        if fam is Family.RUGER:
            pts = [self.k / K]
        elif fam is Family.GRID_HARMONIC:
            pts = [j / (K * self.h) for j in range(1, K + 1)]
        elif fam is Family.GENERALIZED_GRID:
            pts = [lam / self.h for lam in self.lambdas[1:]]
        elif fam is Family.HARMONIC:
            pts = [1.0 / (K * self.T + 1.0)]
        elif fam is Family.GENERALIZED_MEAN:
            r, T = self.r, self.T
            if r < 0:
                pts = [(1.0 + K * T / -r) ** (1.0 / r)]
            elif r / T > K:
                pts = [(1.0 - K * T / r) ** (1.0 / r)]
            else:
                pts = []
        else:
            pts = []
        return sorted({x for x in pts if 0.0 < x < 1.0})


def check_grid(lambdas) -> tuple:
    """Validate a quantile grid 0 = l_0 < l_1 < ... < l_M <= 1."""
    if lambdas is None:
        raise ParameterError("generalized grid needs a lambda grid")
    try:
        lam = tuple(float(x) for x in lambdas)
    except (TypeError, ValueError):
        raise ParameterError(f"malformed lambda grid {lambdas!r}") from None
    if len(lam) < 2 or lam[0] != 0.0:
        raise ParameterError("lambda grid must start at 0 and have at least two entries")
    if any(b <= a for a, b in zip(lam, lam[1:])) or lam[-1] > 1.0:
        raise ParameterError("lambda grid must be strictly increasing and end at most at 1")
    return lam


def evaluate(spec: CalibratorSpec, p, raw: bool = False):
    """f(p) for scalar or array ``p`` (nonnegative). ``raw`` drops the positive part and cap."""
    x = np.asarray(p, dtype=float)
    if (x < 0).any():
        raise ParameterError("calibrator argument must be nonnegative")
    code, K, k, h, T, r, lam = spec.kernel_args()
    out = _pk.calibrate(code, raw, np.atleast_1d(x), K, k, h, T, r, lam)
    return float(out[0]) if x.ndim == 0 else out.reshape(x.shape)


def integral(spec: CalibratorSpec) -> float:
    """Integral of f over [0, 1] from the per-family closed form."""
    fam = spec.family
    if fam in (Family.RUGER, Family.GRID_HARMONIC, Family.GENERALIZED_GRID,
               Family.ARITHMETIC, Family.GEOMETRIC):
        return 1.0
    if fam is Family.HARMONIC:
        return math.log1p(spec.K * spec.T) / spec.T
    return _gm_integral(spec.r, spec.K, spec.T)


# --------------------------------------------------------------------------
# quadrature


def _simpson(g, a, b, tol, max_depth=60):
    """Adaptive Simpson with Richardson correction, iterative."""
    fa, fm, fb = g(a), g(0.5 * (a + b)), g(b)
    parts = []
    stack = [(a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 0)]
    while stack:
        a, b, fa, fm, fb, whole, tol, depth = stack.pop()
        m = 0.5 * (a + b)
        flm, frm = g(0.5 * (a + m)), g(0.5 * (m + b))
        left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
        right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
        delta = left + right - whole
        if abs(delta) <= 15.0 * tol and depth >= 3:
            parts.append(left + right + delta / 15.0)
        elif depth >= max_depth:
            raise NumericalError(f"adaptive Simpson did not converge near [{a}, {b}]")
        else:
            stack.append((a, m, fa, flm, fm, left, 0.5 * tol, depth + 1))
            stack.append((m, b, fm, frm, fb, right, 0.5 * tol, depth + 1))
    return math.fsum(parts)


def quadrature(spec: CalibratorSpec, tol: float = 1e-10) -> float:
    """Integral of f over [0, 1] by adaptive Simpson, split at the breakpoints.

    The first piece uses p = b w^2 so that singularities at 0 (Geometric)
    become integrable and bounded. Arguments are kept a relative 1e-9 inside
    each piece, so a jump at either end never leaks into its neighbour.
    """
    f = lambda x: evaluate(spec, x)
    edges = [0.0] + spec.breakpoints() + [1.0]
    n = len(edges) - 1
    total = []
    for a, b in zip(edges, edges[1:]):
        d = 1e-9 * (b - a)
        if a == 0.0:
            def g(w, b=b, d=d):
                if w == 0.0:
                    return 0.0
                return 2.0 * b * w * f(min(b * w * w, b - d))
            total.append(_simpson(g, 0.0, 1.0, tol / n))
        else:
            def g(x, lo=a + d, hi=b - d):
                return f(min(max(x, lo), hi))
            total.append(_simpson(g, a, b, tol / n))
    return math.fsum(total)


@dataclass(frozen=True)
class ValidationReport:
    passed: bool
    integral: float
    failures: tuple = ()
    first_violation: Optional[float] = None

    def __str__(self):
        head = "PASS" if self.passed else "FAIL"
        msg = f"{head} integral={self.integral:.12g}"
        if self.failures:
            msg += " (" + "; ".join(self.failures) + ")"
        return msg


def validate(spec: CalibratorSpec, grid_size: int = 1000) -> ValidationReport:
    """Grid checks: nonincreasing on [0, 1], zero above 1, integral <= 1 + 1e-9."""
    if int(grid_size) != grid_size or grid_size < 2:
        raise ParameterError("grid_size must be an integer >= 2")
    failures, first = [], None
    xs = np.linspace(0.0, 1.0, int(grid_size))
    vals = evaluate(spec, xs)
    bad = np.nonzero(vals[1:] > vals[:-1])[0]
    if bad.size:
        first = float(xs[bad[0] + 1])
        failures.append(f"increases at p={first:.6g}")
    above = 1.0 + np.linspace(1.0 / grid_size, 1.0, int(grid_size))
    va = evaluate(spec, above)
    nz = np.nonzero(va != 0)[0]
    if nz.size:
        x = float(above[nz[0]])
        first = x if first is None else first
        failures.append(f"nonzero above 1 at p={x:.6g}")
    I = integral(spec)
    if not I <= 1.0 + 1e-9:
        failures.append(f"integral {I:.6g} exceeds 1")
    return ValidationReport(not failures, I, tuple(failures), first)
