"""Canonical JSON/CSV emission and the full-versus-reduced validation run."""
from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigurationError, DegenerateModelError
from .inputs import InputSpace, sample
from .reduction import BoundCheck, FixedInputModel, ReductionPlan, check_probabilistic_bound
from .sobol import SensitivityResult
from .stats import SampleSeries, SeriesComparison, TestResult, compare_series, ecdf_and_pdf, ks_two_sample, levene

SERIES_HEADER = ("time", "mean_full", "std_full", "mean_reduced", "std_reduced", "rel_err_mean", "rel_err_std")
PDF_CDF_HEADER = ("value", "ecdf_full", "ecdf_reduced", "pdf_full", "pdf_reduced")
SI_HEADER = ("name", "s_total", "ci_lo", "ci_hi", "flagged")


# ---------------------------------------------------------------- json

def to_plain(obj):
    """Recursively convert to JSON types, rejecting non-finite numbers."""
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_plain(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not math.isfinite(v):
            raise ValueError(f"non-finite value {v!r} in report")
        return v
    if obj is None or isinstance(obj, str):
        return obj
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj) -> str:
    """Sorted keys, shortest round-trip floats, trailing newline."""
    return json.dumps(to_plain(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path: str, obj) -> str:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(obj))
    return path


def read_json(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path} is not valid JSON: {exc}") from None


# ---------------------------------------------------------------- csv

def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path: str, header, rows) -> str:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])
    return path


def read_csv(path: str, header) -> list:
    """Rows as dicts of floats (``None`` for empty cells); checks the header."""
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigurationError(f"cannot read {path}: {exc.strerror}") from None
    reader = csv.reader(io.StringIO(text))
    got = tuple(next(reader, ()))
    if got != tuple(header):
        raise ConfigurationError(f"{path}: expected header {','.join(header)}")
    rows = []
    for line in reader:
        row = {}
        for k, v in zip(header, line):
            if v == "":
                row[k] = None
            elif v in ("true", "false"):
                row[k] = v == "true"
            else:
                try:
                    row[k] = float(v)
                except ValueError:
                    row[k] = v
        rows.append(row)
    return rows


def write_si_csv(path: str, result: SensitivityResult) -> str:
    return write_csv(path, SI_HEADER, [(r.name, r.s_total, r.ci_lo, r.ci_hi, r.flagged) for r in result.inputs])


def write_series_csv(path: str, comparison: SeriesComparison) -> str:
    rows = [tuple(row[k] for k in SERIES_HEADER) for row in comparison.rows()]
    return write_csv(path, SERIES_HEADER, rows)


def pdf_cdf_rows(full, reduced, bins: int):
    """ECDF and histogram density of both samples on a shared grid of bin centres."""
    full = np.asarray(full, dtype=float)
    reduced = np.asarray(reduced, dtype=float)
    lo = float(min(full.min(), reduced.min()))
    hi = float(max(full.max(), reduced.max()))
    ef = ecdf_and_pdf(full, bins, (lo, hi))
    er = ecdf_and_pdf(reduced, bins, (lo, hi))
    if ef.degenerate:
        centres = np.array([lo])
    else:
        centres = 0.5 * (ef.edges[1:] + ef.edges[:-1])
    cols = (centres, ef.ecdf_at(centres), er.ecdf_at(centres), ef.pdf_at(centres), er.pdf_at(centres))
    return [tuple(float(c[i]) for c in cols) for i in range(centres.size)]


# ---------------------------------------------------------------- validation

DEFAULT_GATES = {"max_rel_err_std": 0.05, "min_ks_p": 0.05, "min_levene_p": 0.05}


@dataclass(frozen=True)
class Gate:
    name: str
    value: Optional[float]
    limit: float
    passed: bool

    def to_dict(self):
        return {"name": self.name, "value": self.value, "limit": self.limit, "passed": self.passed}


@dataclass
class ValidationReport:
    meta: dict
    comparison: SeriesComparison
    ks: TestResult
    levene: TestResult
    plan: ReductionPlan
    gates: tuple
    bound_checks: dict = field(default_factory=dict)
    sensitivity: Optional[dict] = None
    bounds: Optional[dict] = None
    pdf_cdf: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(g.passed for g in self.gates)

    @property
    def failed_gates(self):
        return tuple(g for g in self.gates if not g.passed)

    def tests_dict(self) -> dict:
        return {"time": self.meta["final_time"], "ks": self.ks.to_dict(), "levene": self.levene.to_dict()}

    def to_dict(self) -> dict:
        return {
            "meta": self.meta,
            "sensitivity": self.sensitivity,
            "bounds": self.bounds,
            "plan": self.plan.to_dict(),
            "comparison": self.comparison.rows(),
            "tests": self.tests_dict(),
            "bound_checks": {k: v.to_dict() for k, v in self.bound_checks.items()},
            "gates": [g.to_dict() for g in self.gates],
            "passed": self.passed,
        }


def _gates(limits: dict, comparison: SeriesComparison, ks: TestResult, lev: TestResult, checks: dict) -> tuple:
    out = []
    if "max_rel_err_std" in limits:
        v = comparison.max_rel_err_std
        out.append(Gate("max_rel_err_std", v, limits["max_rel_err_std"], bool(v <= limits["max_rel_err_std"])))
    if "max_rel_err_mean" in limits:
        v = comparison.max_rel_err_mean
        out.append(Gate("max_rel_err_mean", v, limits["max_rel_err_mean"], bool(v <= limits["max_rel_err_mean"])))
    if "min_ks_p" in limits:
        out.append(Gate("min_ks_p", ks.p_value, limits["min_ks_p"], bool(ks.p_value > limits["min_ks_p"])))
    if "min_levene_p" in limits:
        out.append(Gate("min_levene_p", lev.p_value, limits["min_levene_p"],
                        bool(lev.p_value > limits["min_levene_p"])))
    if limits.get("require_bound_check", True):
        for name, c in checks.items():
            out.append(Gate(f"bound_check_{name}", c.fraction_within, c.required, c.passed))
    return tuple(out)


def run_validation(problem, plan: ReductionPlan, n: int, seed: int, *, bins: int = 50,
                   gates: Optional[dict] = None, eps: float = 0.1, trials: int = 0, delta_n: int = 4096,
                   meta: Optional[dict] = None) -> ValidationReport:
    """Propagate the full and the reduced input sample and compare the outputs.

    The two samples come from disjoint seed streams.  When ``trials`` is
    positive, each fixed input also gets an empirical check of the
    probabilistic fixing-error guarantee at level ``eps``.
    """
    space: InputSpace = problem.space
    reduced_model = FixedInputModel(problem.series, space, plan)
    x_full = sample(space, n, seed, "validate", "full")
    x_red = sample(reduced_model.reduced, n, seed, "validate", "reduced")
    y_full = np.asarray(problem.series(x_full), dtype=float)
    y_red = np.asarray(reduced_model(x_red), dtype=float)
    for y, what in ((y_full, "full"), (y_red, "reduced")):
        if not np.all(np.isfinite(y)):
            raise DegenerateModelError(f"non-finite {what} model output")
    times = np.asarray(problem.times, dtype=float)
    comparison = compare_series(SampleSeries(times, y_full), SampleSeries(times, y_red))
    ks = ks_two_sample(y_full[:, -1], y_red[:, -1])
    lev = levene(y_full[:, -1], y_red[:, -1])

    checks = {}
    if trials:
        for f in plan.fixed:
            i = space.index(f.name)
            checks[f.name] = check_probabilistic_bound(problem.model, space, i, f.s_bound, eps, trials,
                                                       delta_n, seed)
    limits = dict(DEFAULT_GATES if gates is None else gates)
    gate_results = _gates(limits, comparison, ks, lev, checks)
    info = {"n": int(n), "seed": int(seed), "model": problem.name, "final_time": float(times[-1]),
            "bins": int(bins), "eps": float(eps), "trials": int(trials), "delta_n": int(delta_n)}
    info.update(meta or {})
    return ValidationReport(info, comparison, ks, lev, plan, gate_results, checks,
                            pdf_cdf=pdf_cdf_rows(y_full[:, -1], y_red[:, -1], bins))


def write_validation(out_dir: str, report: ValidationReport) -> dict:
    paths = {
        "report": write_json(os.path.join(out_dir, "report.json"), report.to_dict()),
        "series": write_series_csv(os.path.join(out_dir, "series.csv"), report.comparison),
        "pdf_cdf": write_csv(os.path.join(out_dir, "pdf_cdf.csv"), PDF_CDF_HEADER, report.pdf_cdf),
        "tests": write_json(os.path.join(out_dir, "tests.json"), report.tests_dict()),
    }
    return paths
