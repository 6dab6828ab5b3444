"""Factor fixing: turning bounds into a reduction plan and measuring the fixing error."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .bounds import CouplingBoundReport
from .errors import ConfigurationError, DegenerateModelError
from .inputs import InputSpace, Scale, mean_of, sample
from .sobol import SensitivityResult, evaluate

log = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.05
MIN_TRIALS = 50


@dataclass(frozen=True)
class FixedInput:
    name: str
    value: float
    s_bound: float


@dataclass(frozen=True)
class ReductionPlan:
    threshold: float
    fixed: tuple
    kept: tuple
    warnings: tuple = ()
    certified: bool = True

    @property
    def fixed_names(self):
        return tuple(f.name for f in self.fixed)

    @property
    def values(self) -> dict:
        return {f.name: f.value for f in self.fixed}

    def to_dict(self):
        return {
            "threshold": self.threshold,
            "certified": self.certified,
            "fixed": [{"name": f.name, "value": f.value, "s_bound": f.s_bound} for f in self.fixed],
            "kept": list(self.kept),
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(float(d["threshold"]),
                       tuple(FixedInput(f["name"], float(f["value"]), float(f["s_bound"])) for f in d["fixed"]),
                       tuple(d["kept"]), tuple(d.get("warnings", ())), bool(d.get("certified", True)))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigurationError(f"malformed reduction plan: {exc}") from None


def _check_threshold(threshold):
    if not 0.0 <= threshold < 1.0:
        raise ConfigurationError(f"threshold must lie in [0, 1), got {threshold}")


def make_plan(bounds: CouplingBoundReport, space: InputSpace, threshold: float) -> ReductionPlan:
    """Fix every input whose certified upper bound is below ``threshold``.

    Inputs without a certificate are always kept.  Fixed values are the
    distribution means.
    """
    threshold = float(threshold)
    _check_threshold(threshold)
    covered = set(bounds.names)
    for name in covered:
        space.index(name)
    missing = [n for n in space.names_with_scale(Scale.MACRO) if n not in covered]
    if missing:
        raise ConfigurationError(f"bound report does not cover macro inputs {missing}")
    warnings = []
    if not bounds.certified:
        warnings.append("no certified bounds: nothing can be fixed")
        log.warning(warnings[-1])
    fixed = []
    for name in space.names:
        b = bounds[name] if name in covered else None
        if b is not None and b.sg_upper is not None and b.sg_upper < threshold:
            fixed.append(FixedInput(name, mean_of(space[name].dist), float(b.sg_upper)))
    kept = tuple(n for n in space.names if n not in {f.name for f in fixed})
    return ReductionPlan(threshold, tuple(fixed), kept, tuple(warnings), True)


def plan_from_single_scale(sf: SensitivityResult, space: InputSpace, threshold: float) -> ReductionPlan:
    """Fix inputs by their single-scale index alone, without any coupling certificate.

    This shortcut is unsound in general; it exists to demonstrate failure
    cases and is flagged ``certified=False``.
    """
    threshold = float(threshold)
    _check_threshold(threshold)
    fixed = tuple(FixedInput(r.name, mean_of(space[r.name].dist), r.s_total)
                  for r in sf.inputs if r.s_total < threshold)
    names = {f.name for f in fixed}
    kept = tuple(n for n in space.names if n not in names)
    msg = "plan uses single-scale indices without a coupling certificate"
    log.warning(msg)
    return ReductionPlan(threshold, fixed, kept, (msg,), False)


def reduce_space(space: InputSpace, plan: ReductionPlan) -> InputSpace:
    """Input space of the inputs that remain uncertain under ``plan``."""
    for name in plan.fixed_names:
        space.index(name)
    kept = [p for p in space.params if p.name not in plan.fixed_names]
    if not kept:
        raise ConfigurationError("the plan fixes every input; nothing is left to propagate")
    return InputSpace(tuple(kept))


class FixedInputModel:
    """Evaluate a full-space model on reduced-space rows with fixed inputs injected."""

    def __init__(self, model, space: InputSpace, plan: ReductionPlan):
        self.model = model
        self.space = space
        self.reduced = reduce_space(space, plan)
        self._kept = [space.index(n) for n in self.reduced.names]
        self._fixed = {space.index(f.name): f.value for f in plan.fixed}
        self.dim = self.reduced.dim

    def inject(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        full = np.empty((x.shape[0], self.space.dim))
        full[:, self._kept] = x
        for j, v in self._fixed.items():
            full[:, j] = v
        return full

    def __call__(self, x):
        return self.model(self.inject(x))


@dataclass(frozen=True)
class DeltaEstimate:
    input_name: str
    x0: float
    delta: float
    n: int


def estimate_delta(model, space: InputSpace, input_index: int, x0: float, n: int, seed: int,
                   *tags) -> DeltaEstimate:
    """Normalised mean-square change of the output when input ``input_index`` is fixed at ``x0``."""
    param = space[input_index]
    if not bool(param.dist.contains(x0)):
        raise ConfigurationError(f"x0={x0} is outside the support of {param.name}")
    x = sample(space, n, seed, "delta", input_index, *tags)
    y = evaluate(model, x)
    x_fixed = np.array(x)
    x_fixed[:, input_index] = x0
    y_fixed = evaluate(model, x_fixed)
    var = float(np.var(y, ddof=1))
    if not var > 0.0:
        raise DegenerateModelError("model output has zero variance")
    diff = y - y_fixed
    return DeltaEstimate(param.name, float(x0), float(np.mean(diff * diff) / var), int(n))


@dataclass(frozen=True)
class BoundCheck:
    eps: float
    trials: int
    fraction_within: float
    bound_value: float
    required: float
    passed: bool
    deltas: tuple = field(default=(), repr=False)

    def to_dict(self):
        return {"eps": self.eps, "trials": self.trials, "fraction_within": self.fraction_within,
                "bound_value": self.bound_value, "required": self.required, "passed": self.passed}

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["eps"]), int(d["trials"]), float(d["fraction_within"]), float(d["bound_value"]),
                   float(d["required"]), bool(d["passed"]))


def check_probabilistic_bound(model, space: InputSpace, input_index: int, s_total: float, eps: float,
                              trials: int, n: int, seed: int) -> BoundCheck:
    """Empirical check of ``P(delta(x0) < (1 + 1/eps) S_T) > 1 - eps`` over random ``x0``.

    Passes when the observed fraction exceeds ``1 - eps`` minus two
    binomial standard errors.
    """
    if not 0.0 < eps < 1.0:
        raise ConfigurationError(f"eps must lie in (0, 1), got {eps}")
    if int(trials) < MIN_TRIALS:
        raise ConfigurationError(f"need at least {MIN_TRIALS} trials, got {trials}")
    trials = int(trials)
    param = space[input_index]
    x0s = sample(InputSpace((param,)), trials, seed, "x0", input_index)[:, 0]
    bound_value = (1.0 + 1.0 / eps) * float(s_total)
    deltas = tuple(estimate_delta(model, space, input_index, float(x0), n, seed, "trial", t).delta
                   for t, x0 in enumerate(x0s))
    fraction = float(np.mean(np.asarray(deltas) < bound_value))
    required = 1.0 - eps - 2.0 * math.sqrt(eps * (1.0 - eps) / trials)
    return BoundCheck(float(eps), trials, fraction, bound_value, required, fraction > required, deltas)
