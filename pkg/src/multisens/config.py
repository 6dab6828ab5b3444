"""Run configuration: an INI file with typed sections, overridable by flags.

Layout::

    [run]       n, n_validate, seed, threshold, eps, bins, trials, delta_n, n_boot, output_dir
    [model]     name, beta, form and, for composed models, component
                expressions f, h, h1, h2 (or h.1, h.2, ... for shared sums),
                g (in u, v) with L, c, g0 for Lipschitz couplings, screened inputs
    [inputs]    name = kind, p1, p2[, scale]
    [gates]     max_rel_err_std, max_rel_err_mean, min_ks_p, min_levene_p,
                require_bound_check
    [plan]      threshold, certified, and one ``name = value, s_bound``
                line per fixed input

``n`` and ``seed`` have no defaults.
"""
from __future__ import annotations

import configparser
import hashlib
import json
import math
import os
from dataclasses import dataclass, field, replace
from typing import Optional

from .errors import ConfigurationError
from .inputs import InputSpace
from .reduction import DEFAULT_THRESHOLD, FixedInput, ReductionPlan

OUTPUT_ENV = "MULTISENS_OUTPUT_DIR"
DEFAULT_OUTPUT = "out"

_RUN_INT = ("n", "n_validate", "seed", "bins", "trials", "delta_n", "n_boot", "workers")
_RUN_FLOAT = ("threshold", "eps")
_GATE_FLOAT = ("max_rel_err_std", "max_rel_err_mean", "min_ks_p", "min_levene_p")


@dataclass(frozen=True)
class RunConfig:
    n: Optional[int] = None
    seed: Optional[int] = None
    n_validate: Optional[int] = None
    threshold: Optional[float] = None
    eps: float = 0.1
    bins: int = 50
    trials: int = 0
    delta_n: int = 4096
    n_boot: int = 500
    workers: Optional[int] = None
    output_dir: Optional[str] = None
    model: dict = field(default_factory=dict)
    inputs: tuple = ()
    gates: dict = field(default_factory=dict)
    plan: Optional[ReductionPlan] = None

    def require(self, *names):
        missing = [k for k in names if getattr(self, k) is None]
        if missing:
            raise ConfigurationError(f"missing required setting(s): {', '.join(missing)}")
        return self

    @property
    def model_name(self) -> str:
        name = self.model.get("name")
        if not name:
            raise ConfigurationError("no model selected")
        return name

    def resolved_output_dir(self) -> str:
        """Flag or config value first, then the environment, then ``out``."""
        return self.output_dir or os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT

    def space(self) -> Optional[InputSpace]:
        return InputSpace.from_records(self.inputs) if self.inputs else None

    def with_overrides(self, **kw) -> "RunConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        model = dict(self.model)
        for key in ("name", "beta", "form", "L", "c", "g0"):
            if key in kw:
                model[key] = kw.pop(key)
        gates = dict(self.gates)
        gates.update(kw.pop("gates", {}))
        return replace(self, model=model, gates=gates, **kw)

    def canonical(self) -> dict:
        """Plain-data view used for hashing and for embedding in reports."""
        return {
            "n": self.n, "n_validate": self.n_validate, "seed": self.seed, "threshold": self.threshold,
            "eps": self.eps, "bins": self.bins, "trials": self.trials, "delta_n": self.delta_n, "n_boot": self.n_boot,
            "model": {k: self.model[k] for k in sorted(self.model)},
            "inputs": [list(r) for r in self.inputs],
            "gates": {k: self.gates[k] for k in sorted(self.gates)},
            "plan": self.plan.to_dict() if self.plan is not None else None,
        }

    def hash(self) -> str:
        text = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"), allow_nan=False)
        return hashlib.sha256(text.encode()).hexdigest()


def _number(section: str, key: str, text: str, kind):
    try:
        v = kind(text)
    except ValueError:
        raise ConfigurationError(f"[{section}] {key}: cannot read {text!r} as {kind.__name__}") from None
    if kind is float and not math.isfinite(v):
        raise ConfigurationError(f"[{section}] {key} must be finite")
    return v


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigurationError(f"cannot read {text!r} as a boolean")


def parse_plan_section(items: dict) -> ReductionPlan:
    items = dict(items)
    threshold = float(items.pop("threshold", DEFAULT_THRESHOLD))
    certified = _bool(items.pop("certified", "true"))
    fixed = []
    for name, text in items.items():
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 2:
            raise ConfigurationError(f"[plan] {name}: expected 'value, s_bound'")
        fixed.append(FixedInput(name, _number("plan", name, parts[0], float), _number("plan", name, parts[1], float)))
    # kept inputs are filled in against the model space when the plan is used
    return ReductionPlan(threshold, tuple(fixed), (), (), certified)


def plan_fragment(plan: ReductionPlan) -> str:
    """The plan as a ``[plan]`` section that a config file can include."""
    lines = ["[plan]", f"threshold = {plan.threshold!r}", f"certified = {str(plan.certified).lower()}"]
    lines += [f"{f.name} = {f.value!r}, {f.s_bound!r}" for f in plan.fixed]
    return "\n".join(lines) + "\n"


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str  # input names are case sensitive
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigurationError(f"{source}: {exc}".replace("\n", " ")) from None
    known = {"run", "model", "inputs", "gates", "plan"}
    unknown = set(cp.sections()) - known
    if unknown:
        raise ConfigurationError(f"{source}: unknown section(s) {sorted(unknown)}")

    kw = {}
    if cp.has_section("run"):
        for key, value in cp.items("run"):
            if key in _RUN_INT:
                kw[key] = _number("run", key, value, int)
            elif key in _RUN_FLOAT:
                kw[key] = _number("run", key, value, float)
            elif key == "output_dir":
                kw[key] = value
            else:
                raise ConfigurationError(f"[run] unknown key {key!r}")
    model = {}
    if cp.has_section("model"):
        for key, value in cp.items("model"):
            model[key] = _number("model", key, value, float) if key in ("beta", "L", "c", "g0") else value
    inputs = []
    if cp.has_section("inputs"):
        for name, value in cp.items("inputs"):
            parts = [p.strip() for p in value.split(",")]
            if len(parts) not in (3, 4):
                raise ConfigurationError(f"[inputs] {name}: expected 'kind, p1, p2[, scale]'")
            kind, p1, p2 = parts[0], _number("inputs", name, parts[1], float), _number("inputs", name, parts[2], float)
            inputs.append((name, kind, p1, p2) + ((parts[3],) if len(parts) == 4 else ()))
        InputSpace.from_records(inputs)  # validate early
    gates = {}
    if cp.has_section("gates"):
        for key, value in cp.items("gates"):
            if key in _GATE_FLOAT:
                gates[key] = _number("gates", key, value, float)
            elif key == "require_bound_check":
                gates[key] = _bool(value)
            else:
                raise ConfigurationError(f"[gates] unknown key {key!r}")
    plan = parse_plan_section(dict(cp.items("plan"))) if cp.has_section("plan") else None
    return RunConfig(model=model, inputs=tuple(inputs), gates=gates, plan=plan, **kw)


def load_config(path: Optional[str]) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, source=path)
