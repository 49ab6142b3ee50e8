import io
import json
import subprocess
import sys

import pytest

from pmerge import RuleSpec, merge
from pmerge.cli import fmt_number, main, parse_pvalues
from pmerge.rules import catalog


def run(argv, stdin="", monkeypatch=None, capsys=None):
    monkeypatch.setattr(sys, "stdin", io.StringIO(stdin))
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def cli(monkeypatch, capsys):
    return lambda argv, stdin="": run(argv, stdin, monkeypatch, capsys)


def test_examples(cli):
    code, out, _ = cli(["combine", "--rule=average"], "0.1 0.2 0.3")
    assert code == 0 and json.loads(out)["value"] == pytest.approx(0.4)
    _, out, _ = cli(["combine", "--rule=ruger", "--k=2", "--exchangeable"], "0.5 0.1 0.4 0.2")
    assert json.loads(out)["value"] == pytest.approx(0.2)
    _, out, _ = cli(["combine", "--rule=average", "--randomized", "--u=1.0",
                     "--variant=simple"], "0.1 0.2 0.3")
    d = json.loads(out)
    assert d["value"] == pytest.approx(0.4) and d["realized_u"] == 1.0


P_TEXT = "0.031\n0.2, 0.45;0.07 1e-3\n\n0.8"
P = [0.031, 0.2, 0.45, 0.07, 1e-3, 0.8]


@pytest.mark.parametrize("rule", catalog(), ids=lambda r: r.label)
def test_golden_round_trip(cli, rule):
    argv = ["combine", "--rule", rule.label]
    u = None
    if rule.randomized:
        argv += ["--u", "0.6"]
        u = 0.6
    code, out, _ = cli(argv, P_TEXT)
    assert code == 0
    want = merge(rule, P, u=u).to_dict()
    got = json.loads(out)
    assert got == want
    # 17 significant digits replay bit for bit
    assert float(out.split('"value": ')[1].split(",")[0]) == want["value"]


def test_csv_format(cli):
    code, out, _ = cli(["combine", "--rule", "hommel", "--variant", "exact", "--format", "csv"],
                       "0.1 0.5")
    header, row = out.strip().splitlines()
    assert header == "rule,K,value,method,error_bound"
    assert row.startswith("hommel[exact],2,0.3")


@pytest.mark.parametrize("rule", ["ex_average[simple]", "ex_average[tight]", "ex_harmonic",
                                  "ex_geometric[tight]", "ex_hommel", "ex_median"])
def test_stream_equals_batch(cli, rule):
    code, out, _ = cli(["combine", "--rule", rule, "--stream", "--k-max", "6"],
                       "\n".join(map(str, P)))
    assert code == 0
    lines = [json.loads(x) for x in out.splitlines()]
    assert len(lines) == len(P)
    R = RuleSpec.parse(rule)
    K = 6 if R.family not in ("average", "geometric") else None
    want = merge(R, P, K=K).value
    assert lines[-1]["value"] == pytest.approx(want, rel=1e-15)
    vals = [d["value"] for d in lines]
    assert vals == sorted(vals, reverse=True)


def test_seed_and_env(cli, monkeypatch):
    _, a, _ = cli(["combine", "--rule", "u_average", "--seed", "4"], "0.1 0.2 0.3")
    monkeypatch.setenv("PMERGE_SEED", "4")
    _, b, _ = cli(["combine", "--rule", "u_average"], "0.1 0.2 0.3")
    assert a == b
    monkeypatch.delenv("PMERGE_SEED")
    code, _, err = cli(["combine", "--rule", "u_average"], "0.1 0.2 0.3")
    assert code == 2 and err.startswith("pmerge: error:")


def test_first_pvalue_source(cli):
    code, out, _ = cli(["combine", "--rule", "u_average", "--u-source", "first-pvalue",
                        "--assume-independent"], "0.3 0.1 0.2 0.4")
    d = json.loads(out)
    assert code == 0 and d["realized_u"] == 0.3 and d["K"] == 3
    code, _, _ = cli(["combine", "--rule", "u_average", "--u-source", "first-pvalue"],
                     "0.3 0.1 0.2 0.4")
    assert code == 2


def test_shuffle(cli):
    code, out, _ = cli(["combine", "--rule", "ex_ruger[k=2]", "--shuffle", "3"],
                       "0.5 0.1 0.4 0.2")
    d = json.loads(out)
    assert code == 0 and d["shuffle_seed"] == 3 and d["value"] in (0.2, 0.4)


@pytest.mark.parametrize("argv,stdin", [
    (["combine"], "0.1 -0.2"),
    (["combine"], "0.1 abc"),
    (["combine"], ""),
    (["combine", "--bogus"], "0.1"),
    (["combine", "--rule", "nope"], "0.1"),
    (["combine", "--rule", "u_average", "--u", "0.3", "--seed", "2"], "0.1 0.2"),
    (["combine", "--rule", "average", "--u", "0.3"], "0.1 0.2"),
    (["combine", "--iters", "0", "--method", "bisect", "--rule", "ex_average"], "0.1 0.2"),
    (["combine", "--rule", "ex_hommel", "--stream"], "0.1"),
    ([], ""),
    (["simulate", "--generator", "gauss", "--set", "K=1"], ""),
    (["simulate", "--set", "zeta"], ""),
])
def test_usage_errors_exit_2(cli, argv, stdin):
    code, out, err = cli(argv, stdin)
    assert code == 2
    assert len(err.strip().splitlines()) == 1 and err.startswith("pmerge: error:")


def test_clamp_warning(cli):
    code, out, err = cli(["combine"], "0.1 1.2")
    assert code == 0 and "clamped" in err and json.loads(out)["value"] == pytest.approx(0.2)


def test_simulate_csv_and_manifest(cli, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# desk run\ngenerator = gauss\nK = 8\nrho = 0.5\n"
                   "rules = bonferroni;ex_median\nreps = 500\nseed = 3\nmu_grid = 0:1:3\n")
    code, out, _ = cli(["simulate", "--config", str(cfg)])
    lines = out.strip().splitlines()
    assert code == 0 and lines[0] == "mu,rho,rule,variant,alpha,reps,rate,se,seed"
    assert len(lines) == 1 + 3 * 2
    code, out2, _ = cli(["simulate", "--config", str(cfg), "--workers", "2"])
    assert out2 == out
    code, js, _ = cli(["simulate", "--config", str(cfg), "--format", "json", "--reps", "100"])
    assert json.loads(js)[0]["reps"] == 100


def test_validate_exit_codes(cli, monkeypatch):
    code, out, _ = cli(["validate", "--k-max", "5", "--samples", "20"])
    assert code == 0 and out.strip().endswith("all checks passed")
    from pmerge import validation

    monkeypatch.setattr(validation, "run_suite", lambda **kw: iter([("broken", False, "x")]))
    code, out, _ = cli(["validate"])
    assert code == 1 and "FAIL broken" in out


def test_files(cli, tmp_path):
    inp, outp = tmp_path / "p.txt", tmp_path / "o.json"
    inp.write_text("0.1\n0.2\n0.3\n")
    code, out, _ = cli(["combine", "--rule", "average", "-i", str(inp), "-o", str(outp)])
    assert code == 0 and out == ""
    assert json.loads(outp.read_text())["value"] == pytest.approx(0.4)
    code, _, err = cli(["combine", "-i", str(tmp_path / "missing.txt")])
    assert code == 2


def test_helpers():
    assert parse_pvalues("0 1 1e-3,\n0.5") == [0.0, 1.0, 1e-3, 0.5]
    assert fmt_number(0.1) == "0.10000000000000001"
    assert fmt_number(3) == "3" and fmt_number(None) == "null"


def test_console_script():
    out = subprocess.run([sys.executable, "-m", "pmerge.cli", "combine", "--rule=average"],
                         input="0.1 0.2 0.3", capture_output=True, text=True)
    assert out.returncode == 0 and json.loads(out.stdout)["value"] == pytest.approx(0.4)
