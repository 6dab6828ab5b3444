"""Transfer of single-scale total indices to bounds on the coupled model.

Each ``bound_*`` function corresponds to one structural form of the
coupling ``g = G(f, h)``.  Factors are computed from Monte Carlo moment
estimates, and every report records the moments it used together with the
outcome of each applicability condition.  When a condition fails the
affected bounds are left as ``None``.

Sign conditions on covariances are declared satisfied only when the
estimate clears zero by two standard errors.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .errors import ConfigurationError, DegenerateModelError, InconsistentMomentsError
from .sobol import Moments, SensitivityResult

GATE_SIGMAS = 2.0
_CS_RTOL = 1e-9
_FACTOR_RTOL = 1e-12


@dataclass(frozen=True)
class ComponentMoments:
    """Mean, second moment and variance of one component model."""

    mean: float
    second_moment: float
    variance: Optional[float] = None
    n: int = 0

    def __post_init__(self):
        mean, second = float(self.mean), float(self.second_moment)
        tol = _CS_RTOL * max(1.0, abs(second), mean * mean)
        if second < mean * mean - tol:
            raise InconsistentMomentsError(
                f"second moment {second!r} < squared mean {mean * mean!r} (Cauchy-Schwarz)")
        var = max(second - mean * mean, 0.0) if self.variance is None else float(self.variance)
        if var < 0:
            raise InconsistentMomentsError(f"negative variance {var!r}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "second_moment", second)
        object.__setattr__(self, "variance", var)

    @classmethod
    def of(cls, m: Moments) -> "ComponentMoments":
        return cls(m.mean, m.second_moment, m.variance, m.n)

    @classmethod
    def from_values(cls, y) -> "ComponentMoments":
        from .sobol import moments_from_values
        return cls.of(moments_from_values(y))

    @classmethod
    def constant(cls, c: float) -> "ComponentMoments":
        return cls(float(c), float(c) ** 2, 0.0)

    def to_dict(self):
        return {"mean": self.mean, "second_moment": self.second_moment, "variance": self.variance, "n": self.n}


@dataclass(frozen=True)
class CrossMoment:
    """``E[a b]`` and ``Cov(a, b)`` with the standard error of the covariance."""

    mean_product: float
    cov: float
    se: float = 0.0

    @classmethod
    def from_values(cls, a, b) -> "CrossMoment":
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        prod = (a - a.mean()) * (b - b.mean())
        se = float(np.std(prod, ddof=1) / math.sqrt(a.size)) if a.size > 1 else 0.0
        return cls(float(np.mean(a * b)), float(np.mean(prod)), se)

    @classmethod
    def independent(cls, f: ComponentMoments, h: ComponentMoments) -> "CrossMoment":
        return cls(f.mean * h.mean, 0.0, 0.0)

    def to_dict(self):
        return {"mean_product": self.mean_product, "cov": self.cov, "se": self.se}


# ---------------------------------------------------------------- forms

@dataclass(frozen=True)
class Multiplicative:
    name = "multiplicative"


@dataclass(frozen=True)
class Additive:
    name = "additive"


@dataclass(frozen=True)
class AffineLinear:
    name = "affine"


@dataclass(frozen=True)
class SharedSum:
    k: int = 1
    name = "shared-sum"

    def __post_init__(self):
        if int(self.k) < 1:
            raise ConfigurationError(f"shared sum needs k >= 1 summands, got {self.k}")


@dataclass(frozen=True)
class MixedAffine:
    name = "mixed-affine"


@dataclass(frozen=True)
class LipschitzCoercive:
    """``G`` Lipschitz in ``u`` with constant ``L`` and coercive with constant ``c``."""

    L: float
    c: float
    g0: float = 0.0
    h_is_vector: bool = False
    name = "lipschitz"

    def __post_init__(self):
        if not (math.isfinite(self.L) and math.isfinite(self.c)) or not (self.L >= self.c > 0):
            raise ConfigurationError(f"Lipschitz-coercive form needs L >= c > 0, got L={self.L}, c={self.c}")


CouplingForm = Union[Multiplicative, Additive, AffineLinear, SharedSum, MixedAffine, LipschitzCoercive]

FORM_NAMES = ("multiplicative", "additive", "affine", "shared-sum", "mixed-affine", "lipschitz")


def form_from_name(name: str, **params) -> CouplingForm:
    key = name.strip().lower().replace("_", "-")
    if key == "multiplicative":
        return Multiplicative()
    if key == "additive":
        return Additive()
    if key in ("affine", "affine-linear"):
        return AffineLinear()
    if key == "shared-sum":
        return SharedSum(int(params.get("k", 1)))
    if key == "mixed-affine":
        return MixedAffine()
    if key == "lipschitz":
        try:
            return LipschitzCoercive(float(params["L"]), float(params["c"]), float(params.get("g0", 0.0)),
                                     bool(params.get("h_is_vector", False)))
        except KeyError as exc:
            raise ConfigurationError(f"lipschitz form needs parameter {exc}") from None
    raise ConfigurationError(f"unknown coupling form {name!r}; expected one of {FORM_NAMES}")


def form_to_dict(form: CouplingForm) -> dict:
    d = {"name": form.name}
    if isinstance(form, SharedSum):
        d["k"] = form.k
    elif isinstance(form, LipschitzCoercive):
        d.update(L=form.L, c=form.c, g0=form.g0, h_is_vector=form.h_is_vector)
    return d


def form_from_dict(d) -> CouplingForm:
    if isinstance(d, str):
        return form_from_name(d)
    d = dict(d)
    return form_from_name(d.pop("name"), **d)


# ---------------------------------------------------------------- reports

@dataclass(frozen=True)
class Condition:
    name: str
    satisfied: bool
    margin: float


@dataclass(frozen=True)
class PerInputBound:
    """Bounds on the coupled-model index of one input.

    ``sg`` is the transferred value when the theorem gives an equality;
    ``sg_upper``/``sg_lower`` are the certified bounds (``None`` = no certificate).
    """

    name: str
    sf: float
    sg_upper: Optional[float]
    sg_lower: Optional[float] = None
    sg: Optional[float] = None
    exact: bool = False
    extra: dict = field(default_factory=dict)


@dataclass(frozen=True)
class CouplingBoundReport:
    form: CouplingForm
    factor: Union[float, tuple, None]
    conditions: tuple
    per_input: tuple
    exact: bool
    moments: dict = field(default_factory=dict)

    def __getitem__(self, name) -> PerInputBound:
        for b in self.per_input:
            if b.name == name:
                return b
        raise KeyError(name)

    @property
    def names(self):
        return tuple(b.name for b in self.per_input)

    @property
    def certified(self) -> bool:
        return any(b.sg_upper is not None for b in self.per_input)

    @property
    def all_conditions_met(self) -> bool:
        return all(c.satisfied for c in self.conditions)

    def upper_bounds(self) -> dict:
        return {b.name: b.sg_upper for b in self.per_input}

    def to_dict(self) -> dict:
        per = []
        for b in self.per_input:
            item = {"name": b.name, "sf": b.sf, "sg_upper": b.sg_upper, "exact": b.exact}
            if b.sg_lower is not None:
                item["sg_lower"] = b.sg_lower
            if b.sg is not None:
                item["sg"] = b.sg
            if b.extra:
                item["extra"] = dict(b.extra)
            per.append(item)
        factor = list(self.factor) if isinstance(self.factor, tuple) else self.factor
        return {
            "form": form_to_dict(self.form),
            "factor": factor,
            "exact": self.exact,
            "conditions": [{"name": c.name, "ok": c.satisfied, "margin": c.margin} for c in self.conditions],
            "per_input": per,
            "moments": self.moments,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CouplingBoundReport":
        try:
            factor = d.get("factor")
            if isinstance(factor, list):
                factor = tuple(factor)
            return cls(
                form_from_dict(d["form"]),
                factor,
                tuple(Condition(c["name"], bool(c["ok"]), float(c["margin"])) for c in d["conditions"]),
                tuple(PerInputBound(p["name"], float(p["sf"]), p.get("sg_upper"), p.get("sg_lower"),
                                    p.get("sg"), bool(p.get("exact", False)), dict(p.get("extra", {})))
                      for p in d["per_input"]),
                bool(d.get("exact", False)),
                dict(d.get("moments", {})),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigurationError(f"malformed bound report: {exc}") from None


def _gate(name: str, value: float, se: float = 0.0) -> Condition:
    margin = float(value) - GATE_SIGMAS * abs(float(se))
    return Condition(name, bool(margin >= 0.0), margin)


def _check_factor(name: str, value: float) -> float:
    """Guard a factor that must lie in (0, 1]; tolerate rounding just above 1."""
    if not value > 0.0:
        raise InconsistentMomentsError(f"{name} = {value!r} is not positive")
    if value > 1.0:
        if value - 1.0 > _FACTOR_RTOL:
            raise InconsistentMomentsError(f"{name} = {value!r} exceeds 1 (inconsistent moment estimates)")
        value = 1.0
    return value


def _require_variance(m: ComponentMoments, what: str):
    if not m.variance > 0.0:
        raise DegenerateModelError(f"{what} has zero variance (the macro component must not be constant)")


# ---------------------------------------------------------------- theorems

def bound_multiplicative(f: ComponentMoments, h: ComponentMoments, sf: SensitivityResult) -> CouplingBoundReport:
    """``g = f(x) h(xi)``: the index of every ``x_i`` scales by one factor lambda <= 1."""
    _require_variance(f, "f")
    if not h.second_moment > 0.0:
        raise DegenerateModelError("h is identically zero; the coupled output is constant")
    denom = f.second_moment - f.mean ** 2 * h.mean ** 2 / h.second_moment
    if not denom > 0.0:
        raise InconsistentMomentsError(f"lambda denominator {denom!r} <= 0")
    lam = _check_factor("lambda", f.variance / denom)
    lam_lower = 1.0 - f.mean ** 2 / f.second_moment
    per = tuple(
        PerInputBound(r.name, r.s_total, sg_upper=r.s_total, sg_lower=lam_lower * r.s_total,
                      sg=lam * r.s_total, exact=True)
        for r in sf.inputs)
    conditions = (Condition("h_mean_sq_le_h_second_moment", True, h.second_moment - h.mean ** 2),)
    return CouplingBoundReport(Multiplicative(), lam, conditions, per, True,
                               {"f": f.to_dict(), "h": h.to_dict(), "lambda_lower": lam_lower})


def bound_additive(f: ComponentMoments, h: ComponentMoments, sf: SensitivityResult) -> CouplingBoundReport:
    """``g = f(x) + h(xi)``: every index scales by mu = Var f / (Var f + Var h)."""
    _require_variance(f, "f")
    mu = _check_factor("mu", 1.0 / (1.0 + h.variance / f.variance))
    per = tuple(PerInputBound(r.name, r.s_total, sg_upper=r.s_total, sg=mu * r.s_total, exact=True)
                for r in sf.inputs)
    conditions = (Condition("h_variance_nonnegative", True, h.variance),)
    return CouplingBoundReport(Additive(), mu, conditions, per, True, {"f": f.to_dict(), "h": h.to_dict()})


def bound_affine(f: ComponentMoments, h1: ComponentMoments, h2: ComponentMoments, cross: CrossMoment,
                 sf: SensitivityResult, *, h2_inputs: Sequence[str] = ()) -> CouplingBoundReport:
    """``g = f(x) h1(xi) + h2(x_~i, eta)``.

    ``cross`` carries ``E[f h2]`` and ``Cov(f, h2)``.  Inputs listed in
    ``h2_inputs`` (those ``h2`` depends on) receive no bounds, since the
    identity requires ``h2`` to be independent of the screened input.
    """
    if not h1.second_moment > 0.0:
        raise DegenerateModelError("h1 is identically zero")
    _require_variance(f, "f")
    s1 = h1.second_moment
    cov = float(cross.cov)
    denom = (f.second_moment - f.mean ** 2 * h1.mean ** 2 / s1 + h2.variance / s1
             + 2.0 * h1.mean * cov / s1)
    if not denom > 0.0:
        raise InconsistentMomentsError(f"gamma denominator {denom!r} <= 0")
    gamma = f.variance / denom

    se = abs(h1.mean) * abs(float(cross.se))
    pos = _gate("mean_h1_times_cov_f_h2_nonnegative", h1.mean * cov, se)
    neg = _gate("mean_h1_times_cov_f_h2_nonpositive", -h1.mean * cov, se)

    gamma_lower = None
    if pos.satisfied:
        gamma_lower = f.variance / (f.second_moment + h2.variance / s1 + 2.0 * h1.mean * cov / s1)
    elif neg.satisfied:
        gamma_lower = f.variance / (f.second_moment + h2.variance / s1)

    # upper bound on gamma for the opposite covariance sign
    gamma_upper_alt = None
    alt_den = f.variance * s1 + h2.variance + 2.0 * h1.mean * cov
    alt_cond = f.variance + h2.variance / s1 + cov
    if neg.satisfied and alt_cond >= 0.0 and alt_den > 0.0:
        gamma_upper_alt = f.variance * s1 / alt_den

    h2_inputs = set(h2_inputs)
    per = []
    conditions = [pos, neg]
    for r in sf.inputs:
        if r.name in h2_inputs:
            conditions.append(Condition(f"h2_independent_of_{r.name}", False, 0.0))
            per.append(PerInputBound(r.name, r.s_total, None))
            continue
        per.append(PerInputBound(
            r.name, r.s_total,
            sg_upper=r.s_total if pos.satisfied else None,
            sg_lower=gamma_lower * r.s_total if gamma_lower is not None else None,
            sg=gamma * r.s_total, exact=True,
            extra={"sg_upper_alt": gamma_upper_alt * r.s_total} if gamma_upper_alt is not None else {}))
    moments = {"f": f.to_dict(), "h1": h1.to_dict(), "h2": h2.to_dict(), "cross_f_h2": cross.to_dict(),
               "gamma_lower": gamma_lower, "gamma_upper_alt": gamma_upper_alt}
    return CouplingBoundReport(AffineLinear(), gamma, tuple(conditions), tuple(per), True, moments)


def _index(res: Optional[SensitivityResult], name: str) -> float:
    if res is None:
        return 0.0
    r = res.get(name)
    return max(r.s_total, 0.0) if r is not None else 0.0


def shared_sum_value(sf: float, sh: float, var_f: float, var_h: float) -> float:
    """``(sqrt(sf Var f) + sqrt(sh Var h))^2 / (Var f + Var h)``."""
    sf, sh = max(sf, 0.0), max(sh, 0.0)
    return (math.sqrt(sf * var_f) + math.sqrt(sh * var_h)) ** 2 / (var_f + var_h)


def bound_shared_sum(sf: SensitivityResult, sh: SensitivityResult, var_f: float, var_h: float,
                     cov_fh: float, k: int = 1, *, cov_se: float = 0.0,
                     sh_parts: Optional[Sequence[SensitivityResult]] = None) -> CouplingBoundReport:
    """``g = f(x) + h(x)`` with ``h = h_1 + ... + h_k`` on the same inputs.

    ``sh`` is the index set of the aggregate ``h``; ``sh_parts`` (optional)
    those of the individual summands, used for the ``2^k`` bound.
    """
    if not (var_f > 0.0 and var_h > 0.0):
        raise ConfigurationError(f"shared-sum bound needs Var f, Var h > 0, got {var_f}, {var_h}")
    k = int(k)
    if k < 1:
        raise ConfigurationError(f"k must be >= 1, got {k}")
    if sh_parts is not None and len(sh_parts) != k:
        raise ConfigurationError(f"expected {k} summand results, got {len(sh_parts)}")
    gate = _gate("cov_f_h_nonnegative", cov_fh, cov_se)
    names = list(sf.names) + [n for n in sh.names if n not in sf.names]
    per = []
    for name in names:
        a, b = _index(sf, name), _index(sh, name)
        if not gate.satisfied:
            per.append(PerInputBound(name, a, None))
            continue
        extra = {"sh": b, "loose": 2.0 * max(a, b)}
        if sh_parts is not None:
            extra["iterated"] = 2.0 ** k * max([a] + [_index(p, name) for p in sh_parts])
        per.append(PerInputBound(name, a, sg_upper=shared_sum_value(a, b, var_f, var_h), extra=extra))
    moments = {"var_f": var_f, "var_h": var_h, "cov_fh": cov_fh, "cov_se": cov_se}
    return CouplingBoundReport(SharedSum(k), 2.0 ** k, (gate,), tuple(per), False, moments)


def mixed_affine_value(sf: float, sh2: float, f: ComponentMoments, h1: ComponentMoments,
                       h2: ComponentMoments) -> float:
    sf, sh2 = max(sf, 0.0), max(sh2, 0.0)
    num = (sf * h1.second_moment * f.variance + sh2 * h2.variance
           + 2.0 * abs(h1.mean) * math.sqrt(sf * f.variance * sh2 * h2.variance))
    den = h1.second_moment * f.variance + f.mean ** 2 * h1.variance + h2.variance
    if not den > 0.0:
        raise DegenerateModelError("coupled output has zero variance")
    return num / den


def bound_mixed_affine(sf: SensitivityResult, sh2: SensitivityResult, f: ComponentMoments,
                       h1: ComponentMoments, h2: ComponentMoments, cov_f_h2: float, *,
                       cov_se: float = 0.0) -> CouplingBoundReport:
    """``g = f(x) h1(xi) + h2(x, eta)`` where ``h2`` may share every macro input."""
    gate = _gate("mean_h1_times_cov_f_h2_nonnegative", h1.mean * cov_f_h2, abs(h1.mean) * abs(cov_se))
    names = list(sf.names) + [n for n in sh2.names if n not in sf.names]
    per = []
    for name in names:
        a, b = _index(sf, name), _index(sh2, name)
        upper = mixed_affine_value(a, b, f, h1, h2) if gate.satisfied else None
        per.append(PerInputBound(name, a, sg_upper=upper, extra={"sh2": b}))
    moments = {"f": f.to_dict(), "h1": h1.to_dict(), "h2": h2.to_dict(), "cov_f_h2": cov_f_h2, "cov_se": cov_se}
    return CouplingBoundReport(MixedAffine(), None, (gate,), tuple(per), False, moments)


def bound_lipschitz(form: LipschitzCoercive, var_f: float, var_h, sf: SensitivityResult, *,
                    h_inputs: Sequence[str] = ()) -> CouplingBoundReport:
    """``g = G(f(x), h(x_~i, xi))`` with ``G`` Lipschitz in ``u`` and coercive.

    ``var_h`` may be a sequence of component variances when ``h`` is
    vector valued; they are summed.  Inputs listed in ``h_inputs`` are
    read by ``h`` and receive no bound.
    """
    if not isinstance(form, LipschitzCoercive):
        raise ConfigurationError("bound_lipschitz needs a LipschitzCoercive form")
    if np.ndim(var_h):
        if not form.h_is_vector:
            raise ConfigurationError("several h variances given but the form is not marked vector valued")
        var_h = float(np.sum(var_h))
    var_f, var_h = float(var_f), float(var_h)
    if not var_f > 0.0:
        raise DegenerateModelError("f has zero variance")
    ratio = form.L ** 2 / form.c ** 2
    if form.g0 == 0.0:
        gate = Condition("g0_is_zero", True, 0.0)
        mult = 2.0 * ratio * var_f / (var_f + var_h)
    else:
        margin = form.c ** 2 * (var_f + var_h) - form.g0 ** 2
        gate = Condition("c2_total_variance_exceeds_g0_sq", bool(margin > 0.0), margin)
        mult = 2.0 * form.L ** 2 * var_f / margin if gate.satisfied else None
    h_inputs = set(h_inputs)
    conditions = [gate]
    per = []
    for r in sf.inputs:
        if r.name in h_inputs:
            conditions.append(Condition(f"h_independent_of_{r.name}", False, 0.0))
            per.append(PerInputBound(r.name, r.s_total, None))
        else:
            per.append(PerInputBound(r.name, r.s_total, sg_upper=mult * r.s_total if mult is not None else None))
    return CouplingBoundReport(form, mult, tuple(conditions), tuple(per), False,
                               {"var_f": var_f, "var_h": var_h, "g0": form.g0})
