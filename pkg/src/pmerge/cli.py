"""Command-line interface: ``pmerge combine | simulate | validate``.

Exit status: 0 success, 1 validation failure, 2 usage or parameter error.
"""
from __future__ import annotations

import argparse
import math
import os
import re
import sys
import warnings
from contextlib import nullcontext

import numpy as np

from .core import MergedP, NumericalError, ParameterError, RuleSpec, split_rules

SEED_ENV = "PMERGE_SEED"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # one-line diagnostic, exit 2
        raise UsageError(message)


# -- formatting


def fmt_number(v) -> str:
    if isinstance(v, bool) or v is None:
        return {True: "true", False: "false", None: "null"}[v]
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v) or math.isinf(v):
        raise ValueError(f"non-finite number {v!r} in output")
    return format(v, ".17g")


def to_json(d: dict) -> str:
    """Flat JSON object with floats written to 17 significant digits."""
    import json

    parts = []
    for k, v in d.items():
        val = json.dumps(v) if isinstance(v, str) else fmt_number(v)
        parts.append(f"{json.dumps(k)}: {val}")
    return "{" + ", ".join(parts) + "}"


# -- input


_SPLIT = re.compile(r"[\s,;]+")


def parse_pvalues(text: str) -> list:
    """Whitespace/newline/comma separated numbers, order preserved; blanks ignored."""
    out = []
    for tok in _SPLIT.split(text):
        if not tok:
            continue
        try:
            x = float(tok)
        except ValueError:
            raise ParameterError(f"not a number: {tok!r}") from None
        if math.isnan(x):
            raise ParameterError("p-values must not be NaN")
        out.append(x)
    if not out:
        raise ParameterError("no p-values in input")
    return out


def _open_in(path):
    return nullcontext(sys.stdin) if path in (None, "-") else open(path)


def _open_out(path):
    return nullcontext(sys.stdout) if path in (None, "-") else open(path, "w")


# -- combine


def build_rule(args) -> RuleSpec:
    text = args.rule
    m = re.fullmatch(r"(exu_|ex_|u_)?(.*)", text)
    prefix, rest = m.group(1) or "", m.group(2)
    base = RuleSpec.parse(prefix + rest) if "[" in rest else None
    kw = dict(family=base.family if base else rest,
              exchangeable=args.exchangeable or prefix in ("ex_", "exu_"),
              randomized=args.randomized or prefix in ("u_", "exu_"))
    if base is not None:
        for key in ("variant", "k", "r", "lambdas", "method", "iters"):
            kw[key] = getattr(base, key)
        if (kw["exchangeable"], kw["randomized"]) != (base.exchangeable, base.randomized):
            kw["variant"] = None  # re-default for the requested kind
    if args.variant is not None:
        kw["variant"] = args.variant
    if args.k is not None:
        kw["k"] = args.k
    if args.r is not None:
        kw["r"] = args.r
    if args.lam is not None:
        kw["lambdas"] = tuple(parse_pvalues(args.lam.replace("/", " ")))
    if args.method is not None:
        kw["method"] = args.method
    if args.iters is not None:
        kw["iters"] = args.iters
    return RuleSpec(**kw)


def _u_source(args):
    from .randomized import RandSource

    if args.u is not None:
        return RandSource.explicit(args.u)
    if args.u_source is not None:
        return RandSource.first_pvalue(acknowledge_independence=args.assume_independent)
    seed = args.seed if args.seed is not None else os.environ.get(SEED_ENV)
    if seed is None:
        raise ParameterError(f"randomized rules need --u, --seed, --u-source or ${SEED_ENV}")
    return RandSource.seeded(seed=int(seed))


def _result_dict(res: MergedP) -> dict:
    d = res.to_dict()
    if "permutation" in res.extras:
        d["shuffle_seed"] = res.extras["shuffle_seed"]
    return d


def _emit(d: dict, fmt: str, out, header=True):
    if fmt == "json":
        out.write(to_json(d) + "\n")
    else:
        if header:
            out.write(",".join(d) + "\n")
        out.write(",".join(v if isinstance(v, str) else fmt_number(v) for v in d.values()) + "\n")


def cmd_combine(args) -> int:
    from .exchangeable import ExchangeableStream, shuffle_then_merge
    from .rules import merge

    rule = build_rule(args)
    u = _u_source(args) if rule.randomized else None
    if not rule.randomized and (args.u is not None or args.u_source is not None):
        raise ParameterError("--u/--u-source apply to randomized rules only")
    with _open_in(args.input) as fh, _open_out(args.output) as out:
        if args.stream:
            if args.shuffle is not None:
                raise ParameterError("--stream and --shuffle cannot be combined")
            stream = ExchangeableStream(rule, args.k_max)
            first = True
            for line in fh:
                for x in parse_pvalues(line) if line.strip() else []:
                    if x < 0 or x > 1:
                        raise ParameterError(f"stream p-values must lie in [0, 1], got {x!r}")
                    stream.push(x)
                    _emit(_result_dict(stream.current), args.format, out, header=first)
                    first = False
                    out.flush()
            return 0
        p = parse_pvalues(fh.read())
        if args.shuffle is not None:
            if rule.randomized:
                raise ParameterError("--shuffle applies to deterministic exchangeable rules")
            res = shuffle_then_merge(p, rule, args.shuffle)
        else:
            res = merge(rule, p, u=u, K=args.k_max)
        _emit(_result_dict(res), args.format, out)
    return 0


# -- simulate


def read_manifest(path) -> dict:
    """key=value lines; '#' starts a comment."""
    out = {}
    with open(path) as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParameterError(f"{path}:{n}: expected key=value")
            k, v = (s.strip() for s in line.split("=", 1))
            out[k] = v
    return out


def parse_grid(text: str) -> list:
    """``a:b:n`` (n evenly spaced points) or a list of numbers."""
    if ":" in text:
        a, b, n = text.split(":")
        return [float(x) for x in np.linspace(float(a), float(b), int(n))]
    return [float(t) for t in _SPLIT.split(text) if t]


_SIM_KEYS = {"generator", "rules", "alpha", "reps", "seed", "workers", "mu_grid", "format",
             "output"}


def cmd_simulate(args) -> int:
    from . import simgen

    cfg = read_manifest(args.config) if args.config else {}
    for item in args.set or []:
        if "=" not in item:
            raise ParameterError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        cfg[k.strip()] = v.strip()
    for key in ("generator", "rules", "alpha", "reps", "seed", "workers", "mu_grid", "format",
                "output"):
        v = getattr(args, key)
        if v is not None:
            cfg[key] = str(v)
    seed = cfg.get("seed", os.environ.get(SEED_ENV, "0"))
    gen_params = {k: v for k, v in cfg.items() if k not in _SIM_KEYS}
    gen = simgen.make_generator(cfg.get("generator", "gauss"), **gen_params)
    rules = split_rules(cfg.get("rules", "bonferroni;ex_hommel;ex_median;ex_harmonic"))
    try:
        alpha, reps, seed = float(cfg.get("alpha", 0.05)), int(cfg.get("reps", 2000)), int(seed)
        workers = int(cfg.get("workers", 1))
    except ValueError as exc:
        raise ParameterError(str(exc)) from None
    if "mu_grid" in cfg:
        reports = simgen.power_curve(rules, gen, parse_grid(cfg["mu_grid"]), alpha, reps, seed,
                                     workers)
    else:
        reports = simgen.mc_table(rules, gen, [alpha], reps, seed, workers)
    fmt = cfg.get("format", "csv")
    if fmt not in ("csv", "json"):
        raise ParameterError("format must be csv or json")
    with _open_out(cfg.get("output")) as out:
        (simgen.write_csv if fmt == "csv" else simgen.write_json)(reports, out)
    return 0


# -- validate


def cmd_validate(args) -> int:
    from .validation import run_suite

    ok = True
    with _open_out(args.output) as out:
        for name, passed, detail in run_suite(k_max=args.k_max, samples=args.samples,
                                              seed=args.seed):
            ok &= passed
            out.write(f"{'PASS' if passed else 'FAIL'} {name}" + (f": {detail}" if detail else "")
                      + "\n")
        out.write(("all checks passed" if ok else "some checks FAILED") + "\n")
    return 0 if ok else 1


# -- entry point


def make_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pmerge", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("combine", help="merge p-values read from a file or stdin")
    c.add_argument("--rule", default="bonferroni",
                   help="family or full label, e.g. average, ex_average[simple], u_hommel")
    c.add_argument("--variant")
    c.add_argument("--k", type=int)
    c.add_argument("--r", type=float)
    c.add_argument("--lambda", dest="lam", help="quantile grid, e.g. 0,0.25,0.5,1")
    c.add_argument("--exchangeable", action="store_true")
    c.add_argument("--randomized", action="store_true")
    g = c.add_mutually_exclusive_group()
    g.add_argument("--u", type=float)
    g.add_argument("--seed", type=int)
    g.add_argument("--u-source", choices=["first-pvalue"])
    c.add_argument("--assume-independent", action="store_true",
                   help="acknowledge p_1 is independent of the rest (first-pvalue source)")
    c.add_argument("--method", choices=["closed", "bisect", "exact"])
    c.add_argument("--iters", type=int)
    c.add_argument("--k-max", type=int, help="constants for this many values (exchangeable)")
    c.add_argument("--stream", action="store_true", help="print the running value per input line")
    c.add_argument("--shuffle", type=int, metavar="SEED", help="random permutation first")
    c.add_argument("--input", "-i")
    c.add_argument("--output", "-o")
    c.add_argument("--format", choices=["json", "csv"], default="json")
    c.set_defaults(func=cmd_combine)

    s = sub.add_parser("simulate", help="Monte Carlo rejection rates as CSV/JSON")
    s.add_argument("--config", help="key=value manifest")
    s.add_argument("--set", action="append", metavar="KEY=VALUE")
    s.add_argument("--generator", choices=["gauss", "mixture", "antithetic", "common_control",
                                           "ttest"])
    s.add_argument("--rules")
    s.add_argument("--mu-grid", dest="mu_grid", help="a:b:n or a list")
    s.add_argument("--alpha", type=float)
    s.add_argument("--reps", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--workers", type=int)
    s.add_argument("--format", choices=["csv", "json"])
    s.add_argument("--output", "-o")
    s.set_defaults(func=cmd_simulate)

    v = sub.add_parser("validate", help="calibrator checks and an invariant spot-suite")
    v.add_argument("--k-max", type=int, default=20)
    v.add_argument("--samples", type=int, default=200)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--output", "-o")
    v.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "iters", None) is not None and args.iters < 1:
            raise ParameterError("--iters must be >= 1")
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            status = args.func(args)
        for w in caught:
            print(f"pmerge: warning: {w.message}", file=sys.stderr)
        return status
    except UsageError as exc:
        print(f"pmerge: error: {exc}", file=sys.stderr)
        return 2
    except (ParameterError, NumericalError, OSError) as exc:
        print(f"pmerge: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
