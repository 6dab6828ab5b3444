import json
import os

import numpy as np
import pytest

from multisens.bounds import CouplingBoundReport
from multisens.cli import main
from multisens.config import parse_config, plan_fragment
from multisens.errors import ConfigurationError
from multisens.reduction import ReductionPlan
from multisens.report import PDF_CDF_HEADER, SERIES_HEADER, SI_HEADER, dumps, read_csv, read_json
from multisens.sobol import SensitivityResult

AFFINE = """
[run]
n = 2048
seed = 3
threshold = 0.05

[model]
name = composed
form = affine
f = x1 + 0.1*x2
h1 = xi1
h2 = {h2}
screened = x1

[inputs]
x1 = uniform, 0, 1, macro
x2 = uniform, 0, 1, macro
xi1 = uniform, 0, 1, micro
eta1 = uniform, 0, 1, micro
"""


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def affine_cfg(tmp_path):
    def make(h2="x2*eta1"):
        path = tmp_path / "affine.ini"
        path.write_text(AFFINE.format(h2=h2))
        return path
    return make


class TestAnalyze:
    def test_reaction_f(self, tmp_path):
        assert run("analyze", "--model", "reaction-f", "--n", 4096, "--seed", 1, "--output-dir", tmp_path) == 0
        si = read_json(tmp_path / "si.json")
        assert [r["name"] for r in si["inputs"]] == ["x1", "x2", "x3"]
        result = SensitivityResult.from_dict(si)
        rows = read_csv(tmp_path / "si.csv", SI_HEADER)
        assert [r["s_total"] for r in rows] == list(result.s_total)

    def test_missing_seed(self, tmp_path, capsys):
        assert run("analyze", "--model", "reaction-f", "--n", 4096, "--output-dir", tmp_path) == 2
        err = capsys.readouterr().err.strip()
        assert "seed" in err and len(err.splitlines()) == 1

    def test_counterexample_f(self, tmp_path):
        run("analyze", "--model", "counterexample-f", "--beta", 0.05, "--n", 2 ** 14, "--seed", 2,
            "--output-dir", tmp_path)
        si = SensitivityResult.from_dict(read_json(tmp_path / "si.json"))
        assert si["x2"].s_total == pytest.approx(2.494e-3, abs=2e-4)

    def test_unknown_model(self, tmp_path):
        assert run("analyze", "--model", "heart", "--n", 64, "--seed", 1, "--output-dir", tmp_path) == 2

    def test_constant_model_is_degenerate(self, tmp_path):
        cfg = tmp_path / "c.ini"
        cfg.write_text("[run]\nn = 64\nseed = 1\n[model]\nname = composed-f\nform = additive\n"
                       "f = 0*x1 + 1\nh = xi1\n[inputs]\nx1 = uniform, 0, 1\nxi1 = uniform, 0, 1, micro\n")
        assert run("analyze", "--config", cfg, "--output-dir", tmp_path) == 3

    def test_env_output_dir(self, tmp_path, monkeypatch):
        monkeypatch.setenv("MULTISENS_OUTPUT_DIR", str(tmp_path / "env"))
        assert run("analyze", "--model", "reaction-f", "--n", 256, "--seed", 1, "--n-boot", 10) == 0
        assert (tmp_path / "env" / "si.json").exists()


class TestBound:
    def test_multiplicative_reaction(self, tmp_path):
        assert run("bound", "--model", "reaction", "--n", 4096, "--seed", 1, "--output-dir", tmp_path) == 0
        report = CouplingBoundReport.from_dict(read_json(tmp_path / "bounds.json"))
        assert report.exact and report.form.name == "multiplicative"
        assert 0 < report.factor <= 1

    def test_reuses_si(self, tmp_path):
        run("analyze", "--model", "reaction-f", "--n", 1024, "--seed", 1, "--output-dir", tmp_path)
        run("bound", "--model", "reaction", "--n", 1024, "--seed", 1, "--si", tmp_path / "si.json",
            "--output-dir", tmp_path)
        sf = SensitivityResult.from_dict(read_json(tmp_path / "si.json"))
        report = CouplingBoundReport.from_dict(read_json(tmp_path / "bounds.json"))
        assert report["x2"].sf == sf["x2"].s_total

    def test_lipschitz_l_below_c(self, tmp_path, affine_cfg):
        assert run("bound", "--config", affine_cfg(), "--form", "lipschitz", "--L", 1, "--c", 2,
                   "--output-dir", tmp_path) == 2

    def test_unknown_form(self, tmp_path, affine_cfg):
        assert run("bound", "--config", affine_cfg(), "--form", "quadratic", "--output-dir", tmp_path) == 2

    def test_failing_gate_still_writes(self, tmp_path, affine_cfg, caplog):
        assert run("bound", "--config", affine_cfg("-x2*eta1"), "--output-dir", tmp_path) == 0
        report = CouplingBoundReport.from_dict(read_json(tmp_path / "bounds.json"))
        assert not report.certified
        assert "no certified upper bound" in caplog.text

    def test_no_theorem(self, tmp_path):
        assert run("bound", "--model", "counterexample", "--n", 256, "--seed", 1, "--output-dir", tmp_path) == 2


class TestReduceValidate:
    def test_round_trip(self, tmp_path):
        args = ("--model", "reaction", "--n", 4096, "--seed", 1, "--output-dir", tmp_path)
        assert run("reduce", *args, "--threshold", 0.1) == 0
        plan = ReductionPlan.from_dict(read_json(tmp_path / "plan.json"))
        assert plan.fixed_names == ("x2",)
        assert parse_config((tmp_path / "plan.ini").read_text()).plan.fixed == plan.fixed
        assert run("validate", *args, "--plan", tmp_path / "plan.ini", "--n-validate", 2000) == 0
        series = read_csv(tmp_path / "series.csv", SERIES_HEADER)
        report = read_json(tmp_path / "report.json")
        assert len(series) == len(report["comparison"]) == 21
        assert [r["rel_err_std"] for r in series] == [r["rel_err_std"] for r in report["comparison"]]
        pdf = read_csv(tmp_path / "pdf_cdf.csv", PDF_CDF_HEADER)
        assert len(pdf) == 50
        assert json.loads((tmp_path / "tests.json").read_text())["ks"]["n1"] == 2000

    def test_reduce_needs_threshold(self, tmp_path):
        assert run("reduce", "--model", "reaction", "--n", 256, "--seed", 1, "--output-dir", tmp_path) == 2

    def test_validate_needs_plan(self, tmp_path):
        assert run("validate", "--model", "reaction", "--n", 256, "--seed", 1, "--output-dir", tmp_path) == 2

    def test_gate_failure_exit(self, tmp_path):
        plan = ReductionPlan(0.5, (), ())
        (tmp_path / "p.ini").write_text(plan_fragment(plan).replace("certified = true",
                                                                    "certified = true\nx1 = 1.0, 0.0"))
        code = run("validate", "--model", "reaction", "--n", 2000, "--seed", 1, "--plan", tmp_path / "p.ini",
                   "--output-dir", tmp_path)
        assert code == 4
        assert (tmp_path / "report.json").exists()

    def test_plan_for_other_space(self, tmp_path):
        (tmp_path / "p.ini").write_text("[plan]\nthreshold = 0.1\nzz = 1.0, 0.0\n")
        assert run("validate", "--model", "reaction", "--n", 100, "--seed", 1, "--plan", tmp_path / "p.ini",
                   "--output-dir", tmp_path) == 2


class TestDemo:
    def test_reaction_byte_identical(self, tmp_path):
        assert run("demo", "reaction", "--output-dir", tmp_path / "a") == 0
        assert run("demo", "reaction", "--output-dir", tmp_path / "b") == 0
        for name in ("report.json", "series.csv", "pdf_cdf.csv", "tests.json", "si.json", "bounds.json"):
            assert (tmp_path / "a" / "reaction" / name).read_bytes() == (tmp_path / "b" / "reaction" / name).read_bytes()

    def test_counterexample_fails_gate(self, tmp_path, capsys):
        assert run("demo", "counterexample", "--output-dir", tmp_path) == 4
        err = capsys.readouterr().err
        assert "certificate" in err
        assert not read_json(tmp_path / "counterexample" / "report.json")["passed"]


class TestConfig:
    def test_unknown_section(self):
        with pytest.raises(ConfigurationError):
            parse_config("[extras]\na = 1\n")

    def test_bad_number(self):
        with pytest.raises(ConfigurationError):
            parse_config("[run]\nn = lots\n")

    def test_hash_stable(self):
        text = "[run]\nn = 10\nseed = 2\n[model]\nname = reaction\n"
        assert parse_config(text).hash() == parse_config(text).hash()
        assert parse_config(text).hash() != parse_config(text.replace("seed = 2", "seed = 3")).hash()

    def test_flags_win(self):
        cfg = parse_config("[run]\nn = 10\nseed = 2\n").with_overrides(n=20)
        assert (cfg.n, cfg.seed) == (20, 2)


def test_dumps_rejects_non_finite():
    with pytest.raises(ValueError):
        dumps({"a": float("nan")})


def test_dumps_shortest_round_trip():
    assert dumps({"b": 0.1, "a": np.float64(1 / 3)}) == '{\n  "a": 0.3333333333333333,\n  "b": 0.1\n}\n'
