"""Resolve a run configuration to a problem and run the analysis steps.

Model names select a problem and, through a suffix, the model that
``analyze`` studies: ``reaction`` is the coupled output, ``reaction-f``
the macro component and ``reaction-h`` the micro component.  The same
holds for ``ou``, ``counterexample`` and ``composed`` (``-h`` only where
the micro component has its own input space).
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .bounds import (AffineLinear, Additive, ComponentMoments, CouplingBoundReport, CrossMoment,
                     LipschitzCoercive, MixedAffine, Multiplicative, SharedSum, bound_additive, bound_affine,
                     bound_lipschitz, bound_mixed_affine, bound_multiplicative, bound_shared_sum, form_from_name)
from .config import RunConfig
from .errors import ConfigurationError
from .expr import Expression
from .inputs import InputSpace, derive_seed, sample
from .reduction import ReductionPlan, make_plan, plan_from_single_scale
from .sobol import SensitivityResult, Vectorized, total_si
from .zoo import (MultiscaleProblem, ReactionDecay, Wiring, compose, counterexample_problem, ou_problem,
                  problem_from_composed, reaction_micro_space, reaction_problem)

BASE_MODELS = ("reaction", "ou", "counterexample", "composed")
_OU_KEYS = {"eps": float, "t_end": float, "dt_micro": float, "dt_macro": float, "z0": float, "v0": float}


@dataclass(frozen=True)
class Target:
    problem: MultiscaleProblem
    part: str               # "g", "f" or "h"
    model: object
    space: InputSpace


def split_name(name: str):
    for base in BASE_MODELS:
        for suffix, part in (("", "g"), ("-f", "f"), ("-h", "h")):
            if name == base + suffix:
                return base, part
    raise ConfigurationError(
        f"unknown model {name!r}; choose one of {', '.join(BASE_MODELS)} with optional -f or -h suffix")


def _flag(text) -> bool:
    return str(text).strip().lower() in ("1", "true", "yes", "on")


def _columns(expr: Expression, space: InputSpace):
    for v in expr.used:
        space.index(v)
    return tuple(space.index(v) for v in expr.variables)


def _expr(text: str, space: InputSpace) -> Expression:
    e = Expression(text, [n for n in space.names if n in Expression(text).used])
    if not e.used:
        raise ConfigurationError(f"expression {text!r} does not depend on any input")
    return e


def _h_texts(model: dict):
    if "h" in model:
        return [model["h"]]
    if "h1" in model:
        return [model["h1"]] + ([model["h2"]] if "h2" in model else [])
    parts = sorted((k for k in model if k.startswith("h.")), key=lambda k: int(k[2:]))
    if not parts:
        raise ConfigurationError("composed model needs h (or h1, h2, or h.1 ... h.k)")
    return [model[k] for k in parts]


def form_for(model: dict, n_h: int):
    name = model.get("form")
    if name is None:
        raise ConfigurationError("no coupling form declared ([model] form)")
    if name == "shared-sum":
        return form_from_name(name, k=n_h)
    if name == "lipschitz":
        for key in ("L", "c"):
            if key not in model:
                raise ConfigurationError(f"lipschitz form needs {key}")
        return form_from_name(name, L=model["L"], c=model["c"], g0=model.get("g0", 0.0),
                              h_is_vector=n_h > 1)
    return form_from_name(name)


def composed_problem(cfg: RunConfig) -> MultiscaleProblem:
    space = cfg.space()
    if space is None:
        raise ConfigurationError("composed model needs an [inputs] section")
    model = cfg.model
    if "f" not in model:
        raise ConfigurationError("composed model needs f")
    f = _expr(model["f"], space)
    hs = [_expr(t, space) for t in _h_texts(model)]
    form = form_for(model, len(hs))
    G = None
    if isinstance(form, LipschitzCoercive):
        if "g" not in model:
            raise ConfigurationError("lipschitz form needs the coupling g(u, v)")
        g_expr = Expression(model["g"], ["u", "v"])

        def G(u, v):
            return g_expr(np.column_stack([u, v]))
    screened = None
    if "screened" in model:
        screened = [space.index(s.strip()) for s in model["screened"].split(",") if s.strip()]
    composed = compose(f, hs, form, Wiring(_columns(f, space), tuple(_columns(h, space) for h in hs)),
                       space.dim, G=G, screened=screened)
    return problem_from_composed("composed", space, composed)


def resolve(cfg: RunConfig) -> Target:
    base, part = split_name(cfg.model_name)
    model = cfg.model
    if base == "reaction":
        problem = reaction_problem()
    elif base == "ou":
        params = {k: conv(model[k]) for k, conv in _OU_KEYS.items() if k in model}
        if "window_average" in model:
            params["window_average"] = _flag(model["window_average"])
        problem = ou_problem(0 if cfg.seed is None else cfg.seed, **params)
    elif base == "counterexample":
        problem = counterexample_problem(float(model.get("beta", 0.05)))
    else:
        problem = composed_problem(cfg)

    if part == "g":
        return Target(problem, part, problem.model, problem.space)
    if part == "f":
        return macro_target(Target(problem, part, problem.model, problem.space))
    if base == "reaction":
        return Target(problem, part, ReactionDecay(problem.extra["t"]), reaction_micro_space())
    if base == "composed" and len(problem.model.h_list) == 1:
        h = problem.model.h_list[0]
        names = [problem.space.names[i] for i in problem.model.wiring.h[0]]
        return Target(problem, part, h, problem.space.subset(names))
    raise ConfigurationError(f"model {cfg.model_name!r} has no stand-alone micro component")


def macro_target(target: Target) -> Target:
    p = target.problem
    return Target(p, "f", p.f_model, p.f_space)


# ---------------------------------------------------------------- steps

def analyze(target: Target, n: int, seed: int, *, n_boot: int = 500, workers=None) -> SensitivityResult:
    return total_si(Vectorized(target.model, target.space.dim), target.space, n, seed, n_boot=n_boot,
                    workers=workers)


def _sub_index(problem: MultiscaleProblem, h, cols, n, seed, tag, n_boot, workers) -> SensitivityResult:
    names = [problem.space.names[i] for i in cols]
    return total_si(Vectorized(h, len(names)), problem.space.subset(names), n, derive_seed(seed, tag),
                    n_boot=n_boot, workers=workers)


def _with_g0(form: LipschitzCoercive, g) -> LipschitzCoercive:
    """Use a declared non-zero ``g0``; otherwise replace it by ``|mean g| + 2 SE``
    unless the sample mean is indistinguishable from zero."""
    if form.g0 != 0.0:
        return form
    mean = float(np.mean(g))
    se = float(np.std(g, ddof=1) / np.sqrt(g.size))
    if abs(mean) <= 2.0 * se:
        return form
    return replace(form, g0=abs(mean) + 2.0 * se)


def compute_bounds(problem: MultiscaleProblem, sf: SensitivityResult, n: int, seed: int, *,
                   n_boot: int = 500, workers=None) -> CouplingBoundReport:
    """Estimate the component moments on a joint sample and apply the form's theorem."""
    form = problem.form
    if form is None:
        raise ConfigurationError(f"{problem.name} has no coupling form with a transfer theorem")
    missing = [name for name in problem.f_inputs if sf.get(name) is None]
    if missing:
        raise ConfigurationError(f"sensitivity result lacks macro inputs {missing}")
    x = sample(problem.space, n, seed, "moments")
    c = problem.components(x)
    fv = c["f"]
    f = ComponentMoments.from_values(fv)
    if isinstance(form, (Multiplicative, Additive)):
        h = ComponentMoments.from_values(c["h"])
        return (bound_multiplicative if isinstance(form, Multiplicative) else bound_additive)(f, h, sf)

    composed = problem.model
    wiring = composed.wiring
    names = problem.space.names
    if isinstance(form, AffineLinear):
        h1, h2 = (ComponentMoments.from_values(c[k]) for k in ("h1", "h2"))
        h2_inputs = [names[i] for i in wiring.h[1] if names[i] in problem.f_inputs]
        return bound_affine(f, h1, h2, CrossMoment.from_values(fv, c["h2"]), sf, h2_inputs=h2_inputs)
    if isinstance(form, MixedAffine):
        h1, h2 = (ComponentMoments.from_values(c[k]) for k in ("h1", "h2"))
        cross = CrossMoment.from_values(fv, c["h2"])
        sh2 = _sub_index(problem, composed.h_list[1], wiring.h[1], n, seed, "sh2", n_boot, workers)
        return bound_mixed_affine(sf, sh2, f, h1, h2, cross.cov, cov_se=cross.se)
    if isinstance(form, SharedSum):
        parts = [c[f"h{j}"] for j in range(1, form.k + 1)]
        hv = np.sum(parts, axis=0)
        cross = CrossMoment.from_values(fv, hv)
        cols = tuple(dict.fromkeys(i for cs in wiring.h for i in cs))

        def h_sum(xs):
            full = np.zeros((xs.shape[0], problem.space.dim))
            full[:, list(cols)] = xs
            return np.sum([h(full[:, list(cs)]) for h, cs in zip(composed.h_list, wiring.h)], axis=0)

        sh = _sub_index(problem, h_sum, cols, n, seed, "sh", n_boot, workers)
        sh_parts = None
        if form.k > 1:
            sh_parts = [_sub_index(problem, h, cs, n, seed, f"sh.{j}", n_boot, workers)
                        for j, (h, cs) in enumerate(zip(composed.h_list, wiring.h), start=1)]
        return bound_shared_sum(sf, sh, f.variance, float(np.var(hv)), cross.cov, form.k,
                                cov_se=cross.se, sh_parts=sh_parts)
    if isinstance(form, LipschitzCoercive):
        hs = [c[k] for k in sorted(k for k in c if k.startswith("h"))]
        var_h = [float(np.var(h)) for h in hs] if form.h_is_vector else float(np.var(hs[0]))
        form = _with_g0(form, np.asarray(composed(x), dtype=float))
        h_inputs = [names[i] for cols in wiring.h for i in cols if names[i] in problem.f_inputs]
        return bound_lipschitz(form, f.variance, var_h, sf, h_inputs=h_inputs)
    raise ConfigurationError(f"unsupported form {form!r}")


def plan(problem: MultiscaleProblem, threshold: float, *, bounds: Optional[CouplingBoundReport] = None,
         sf: Optional[SensitivityResult] = None) -> ReductionPlan:
    """Certified plan from ``bounds``, or the uncertified single-scale shortcut from ``sf``."""
    if bounds is not None:
        return make_plan(bounds, problem.space, threshold)
    if sf is None:
        raise ConfigurationError("need bounds or single-scale indices to build a plan")
    return plan_from_single_scale(sf, problem.space, threshold)


def complete_plan(p: ReductionPlan, space: InputSpace) -> ReductionPlan:
    """Fill in the kept names of a plan read from a config fragment."""
    for name in p.fixed_names:
        space.index(name)
    kept = tuple(n for n in space.names if n not in p.fixed_names)
    if p.kept and tuple(p.kept) != kept:
        raise ConfigurationError("plan does not match the model's input space")
    return ReductionPlan(p.threshold, p.fixed, kept, p.warnings, p.certified)
