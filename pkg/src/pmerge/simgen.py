"""Data-generating processes and a reproducible Monte Carlo engine.

Replication ``i`` of a run with seed ``s`` draws its raw normals and uniforms
from a Philox stream keyed by ``(s, role)`` with counter ``i``, so any chunk
of replications can be generated independently and results do not depend on
how the work is split. Generators turn those raw draws into p-value rows in
a vectorized step.
"""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Optional, Sequence

import numpy as np

from .core import ParameterError, RuleSpec
from .distributions import norm_cdf, two_sided_norm_p, two_sided_t_p

ROLE_P, ROLE_U = 0, 1
CHUNK = 2500


def _check(cond, msg):
    if not cond:
        raise ParameterError(msg)


def _beta_a1(V, a):
    """Beta(a, 1) by inversion: V ** (1/a)."""
    return V ** (1.0 / a)


# -- generators


@dataclass(frozen=True)
class GaussEquicorr:
    """X_k = rho Z + sqrt(1 - rho^2) Z_k - mu, P_k = Phi(X_k)."""

    K: int = 100
    rho: float = 0.0
    mu: float = 0.0
    kind = "gauss"

    def __post_init__(self):
        _check(int(self.K) == self.K and self.K >= 2, "K must be an integer >= 2")
        _check(0.0 <= self.rho <= 1.0, "rho must lie in [0, 1]")
        _check(self.mu >= 0, "mu must be nonnegative")

    @property
    def raw_shape(self):
        return self.K + 1, 0

    def from_raw(self, Z, V):
        X = self.rho * Z[:, :1] + math.sqrt(1.0 - self.rho ** 2) * Z[:, 1:] - self.mu
        return norm_cdf(X)


@dataclass(frozen=True)
class MixtureToy:
    """Three p-values: independent with probability 0.9, else one value repeated.

    Marginals are uniform under the null and Beta(beta_a, 1) under the alternative.
    """

    under_alternative: bool = False
    beta_a: float = 0.2
    K: int = 3
    independent_prob: float = 0.9
    kind = "mixture"

    def __post_init__(self):
        _check(self.beta_a > 0, "beta_a must be positive")
        _check(int(self.K) == self.K and self.K >= 2, "K must be an integer >= 2")

    @property
    def raw_shape(self):
        return 0, self.K + 2

    def from_raw(self, Z, V):
        coin, ind, shared = V[:, 0], V[:, 1:self.K + 1], V[:, self.K + 1:]
        P = np.where((coin < self.independent_prob)[:, None], ind, shared)
        return _beta_a1(P, self.beta_a) if self.under_alternative else P


@dataclass(frozen=True)
class AntitheticPair:
    """(P_1, 1 - P_1) with P_1 uniform (null) or Beta(beta_a, 1) (alternative)."""

    under_alternative: bool = False
    beta_a: float = 0.2
    kind = "antithetic"
    K = 2

    def __post_init__(self):
        _check(self.beta_a > 0, "beta_a must be positive")

    @property
    def raw_shape(self):
        return 0, 1

    def from_raw(self, Z, V):
        p1 = _beta_a1(V[:, 0], self.beta_a) if self.under_alternative else V[:, 0]
        return np.stack([p1, 1.0 - p1], axis=1)


_CC_ORDERS = ("as_given", "by_n_asc", "by_n_desc", "random")
_TT_ORDERS = ("as_given", "by_S2_asc", "by_S2_desc", "random")


def _random_order(V):
    return np.argsort(V, axis=1, kind="stable")


@dataclass(frozen=True)
class CommonControl:
    """Two-sided z-tests sharing one control sample.

    Study means are drawn through their sufficient statistics
    Xbar_i = (1/sqrt(n_i)) sum_j X_ij ~ N(sqrt(n_i) mu, 1), i = 0..K;
    T_k = (Xbar_k + Xbar_0)/sqrt(2) and P_k = 2 Phi(-|T_k|).
    """

    n: tuple = tuple(range(10, 101, 10))
    n0: int = 25
    mu: float = 0.0
    ordering: str = "as_given"
    kind = "common_control"

    def __post_init__(self):
        object.__setattr__(self, "n", tuple(int(x) for x in self.n))
        _check(len(self.n) >= 2, "need at least two studies")
        _check(min(self.n) >= 2 and self.n0 >= 2, "sample sizes must be >= 2")
        _check(self.ordering in _CC_ORDERS, f"ordering must be one of {_CC_ORDERS}")

    @property
    def K(self):
        return len(self.n)

    @property
    def raw_shape(self):
        return self.K + 1, self.K

    def from_raw(self, Z, V):
        n = np.asarray(self.n, dtype=float)
        xbar = np.sqrt(n) * self.mu + Z[:, 1:]
        x0 = math.sqrt(self.n0) * self.mu + Z[:, :1]
        P = two_sided_norm_p((xbar + x0) / math.sqrt(2.0))
        if self.ordering == "as_given":
            return P
        if self.ordering == "random":
            return np.take_along_axis(P, _random_order(V), axis=1)
        key = n if self.ordering == "by_n_asc" else -n
        return P[:, np.argsort(key, kind="stable")]


@dataclass(frozen=True)
class TTestGlobal:
    """K one-sample t-tests, mu_k = k mu, sigma = 1; ordered by S_k^2 = sum_i X_ki^2.

    T_k = sqrt(n) Xbar_k / sigma_hat_k and P_k = 2 G_{n-1}(-|T_k|).
    """

    K: int = 20
    n: int = 10
    mu: float = 0.0
    ordering: str = "as_given"
    kind = "ttest"

    def __post_init__(self):
        _check(int(self.K) == self.K and self.K >= 2, "K must be an integer >= 2")
        _check(int(self.n) == self.n and self.n >= 2, "n must be an integer >= 2")
        _check(self.ordering in _TT_ORDERS, f"ordering must be one of {_TT_ORDERS}")

    @property
    def raw_shape(self):
        return self.K * self.n, self.K

    def statistics(self, Z):
        """(T, S2), each (reps, K)."""
        X = Z.reshape(-1, self.K, self.n) + (self.mu * np.arange(1, self.K + 1))[None, :, None]
        T = math.sqrt(self.n) * X.mean(axis=2) / X.std(axis=2, ddof=1)
        return T, (X ** 2).sum(axis=2)

    def from_raw(self, Z, V):
        T, S2 = self.statistics(Z)
        P = two_sided_t_p(T, self.n - 1)
        if self.ordering == "as_given":
            return P
        if self.ordering == "random":
            order = _random_order(V)
        else:
            order = np.argsort(S2 if self.ordering == "by_S2_asc" else -S2, axis=1, kind="stable")
        return np.take_along_axis(P, order, axis=1)


GENERATORS = {g.kind: g for g in (GaussEquicorr, MixtureToy, AntitheticPair, CommonControl,
                                   TTestGlobal)}


def make_generator(kind: str, **params):
    """Build a generator from text parameters (as read from a config file)."""
    if kind not in GENERATORS:
        raise ParameterError(f"unknown generator {kind!r}; choose from {sorted(GENERATORS)}")
    cls = GENERATORS[kind]
    types = {f.name: f.type for f in fields(cls)}
    kw = {}
    for key, val in params.items():
        if key not in types:
            raise ParameterError(f"{kind} has no parameter {key!r}")
        t = str(types[key])
        try:
            if not isinstance(val, str):
                kw[key] = val
            elif t == "bool":
                kw[key] = val.strip().lower() in ("1", "true", "yes", "alt", "alternative")
            elif t == "int":
                kw[key] = int(val)
            elif t == "float":
                kw[key] = float(val)
            elif t == "tuple":
                kw[key] = tuple(int(x) for x in val.replace("/", " ").split())
            else:
                kw[key] = val
        except ValueError:
            raise ParameterError(f"bad value for {key}: {val!r}") from None
    return cls(**kw)


def describe(gen) -> dict:
    d = {"kind": gen.kind, **asdict(gen)}
    if "n" in d and isinstance(d["n"], tuple):
        d["n"] = list(d["n"])
    return d


# -- random streams


def _check_seed(seed):
    if int(seed) != seed or not 0 <= seed < 2 ** 64:
        raise ParameterError(f"seed must be an integer in [0, 2^64), got {seed!r}")
    return int(seed)


def replication_rng(seed: int, rep: int, role: int = ROLE_P) -> np.random.Generator:
    """The generator owning replication ``rep`` of stream ``role``."""
    return np.random.Generator(np.random.Philox(counter=[0, 0, 0, int(rep)],
                                                key=[_check_seed(seed), role]))


def _raw_block(seed, role, start, stop, n_normal, n_uniform):
    bg = np.random.Philox(key=[_check_seed(seed), role])
    g = np.random.Generator(bg)
    state = bg.state
    Z = np.empty((stop - start, n_normal))
    V = np.empty((stop - start, n_uniform))
    for i, rep in enumerate(range(start, stop)):
        state["state"]["counter"] = np.array([0, 0, 0, rep], dtype=np.uint64)
        state["buffer_pos"] = 4
        state["has_uint32"] = 0
        bg.state = state
        if n_normal:
            g.standard_normal(out=Z[i])
        if n_uniform:
            g.random(out=V[i])
    return Z, V


def generate(gen, rng: np.random.Generator) -> np.ndarray:
    """One replication's p-value vector from ``rng``."""
    nn, nu = gen.raw_shape
    Z = rng.standard_normal(nn)
    V = rng.random(nu)
    return gen.from_raw(Z[None, :], V[None, :])[0]


def simulate_pvalues(gen, reps: int, seed: int, start: int = 0) -> np.ndarray:
    """Replications ``start .. start+reps-1`` as a (reps, K) matrix."""
    Z, V = _raw_block(seed, ROLE_P, start, start + reps, *gen.raw_shape)
    return gen.from_raw(Z, V)


def simulate_u(reps: int, seed: int, start: int = 0) -> np.ndarray:
    """Per-replication randomization u in (0, 1], from its own stream role."""
    _, V = _raw_block(seed, ROLE_U, start, start + reps, 0, 1)
    return 1.0 - V[:, 0]


# -- Monte Carlo


@dataclass(frozen=True)
class MCReport:
    rule: RuleSpec
    generator: object
    alpha: float
    reps: int
    rejections: int
    seed: int
    extras: dict = field(default_factory=dict, compare=False)

    @property
    def rate(self) -> float:
        return self.rejections / self.reps

    @property
    def se(self) -> float:
        r = self.rate
        return math.sqrt(r * (1.0 - r) / self.reps)

    def row(self) -> dict:
        g = self.generator
        return {"mu": getattr(g, "mu", ""), "rho": getattr(g, "rho", ""),
                "rule": self.rule.label, "variant": self.rule.variant or "",
                "alpha": self.alpha, "reps": self.reps, "rate": self.rate,
                "se": self.se, "seed": self.seed}


CSV_FIELDS = ("mu", "rho", "rule", "variant", "alpha", "reps", "rate", "se", "seed")


def _counts(rules, gen, alphas, seed, start, stop):
    from .rules import merge_rows

    P = simulate_pvalues(gen, stop - start, seed, start)
    U = simulate_u(stop - start, seed, start) if any(r.randomized for r in rules) else None
    a = np.asarray(alphas, dtype=float)
    out = np.zeros((len(rules), a.size), dtype=np.int64)
    for i, rule in enumerate(rules):
        v = merge_rows(rule, P, U if rule.randomized else None)
        out[i] = (v[:, None] <= a[None, :]).sum(axis=0)
    return out


def _counts_star(args):
    return _counts(*args)


def mc_table(rules: Sequence, gen, alphas: Sequence[float], reps: int, seed: int,
             workers: int = 1) -> list:
    """Rejection counts for every (rule, alpha) on one shared set of replications."""
    rules = [RuleSpec.parse(r) if isinstance(r, str) else r for r in rules]
    alphas = [float(a) for a in alphas]
    _check(all(0.0 < a < 1.0 for a in alphas), "alpha must lie in (0, 1)")
    _check(int(reps) == reps and reps >= 1, "reps must be a positive integer")
    seed = _check_seed(seed)
    jobs = [(rules, gen, alphas, seed, s, min(s + CHUNK, reps)) for s in range(0, reps, CHUNK)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_counts_star, jobs))
    else:
        parts = [_counts_star(j) for j in jobs]
    total = np.sum(parts, axis=0)
    return [MCReport(rule, gen, a, int(reps), int(total[i, j]), seed)
            for i, rule in enumerate(rules) for j, a in enumerate(alphas)]


def mc_rejection(rule, gen, alpha: float, reps: int, seed: int, workers: int = 1) -> MCReport:
    """Fraction of replications whose merged p-value is <= alpha."""
    return mc_table([rule], gen, [alpha], reps, seed, workers)[0]


def power_curve(rules: Sequence, template, mu_grid: Sequence[float], alpha: float, reps: int,
                seed: int, workers: int = 1) -> list:
    """One report per (mu, rule). Every grid point reuses the same seed."""
    _check(len(mu_grid) > 0, "mu grid is empty")
    out = []
    for mu in mu_grid:
        out.extend(mc_table(rules, replace(template, mu=float(mu)), [alpha], reps, seed, workers))
    return out


def write_csv(reports, fh):
    w = csv.DictWriter(fh, fieldnames=CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in reports:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.row().items()})


def write_json(reports, fh):
    json.dump([r.row() for r in reports], fh, indent=1)
    fh.write("\n")


__all__ = ["GaussEquicorr", "MixtureToy", "AntitheticPair", "CommonControl", "TTestGlobal",
           "MCReport", "make_generator", "generate", "replication_rng", "simulate_pvalues",
           "simulate_u", "mc_rejection", "mc_table", "power_curve", "write_csv", "write_json"]
