"""Test-bed models: reaction decay, micro-macro Ornstein-Uhlenbeck, the
non-transferable counterexample, and a builder for composed couplings.

Each experiment is also packaged as a :class:`MultiscaleProblem` bundling
its input space, the scalar quantity of interest, the time series used
for validation and the coupling decomposition used for bounds.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import kernels
from .bounds import (AffineLinear, Additive, CouplingForm, LipschitzCoercive, MixedAffine,
                     Multiplicative, SharedSum)
from .errors import ConfigurationError, IntegrationError
from .inputs import InputSpace, Normal, Param, Scale, Uniform, derive_seed

# ---------------------------------------------------------------- reaction


def reaction_f(x) -> np.ndarray:
    """Initial condition ``x1^2 + x1 x2 x3 + x3^3 - x1 x3``."""
    x = np.atleast_2d(x)
    x1, x2, x3 = x[:, 0], x[:, 1], x[:, 2]
    return x1 ** 2 + x1 * x2 * x3 + x3 ** 3 - x1 * x3


def reaction_psi(xi) -> np.ndarray:
    xi = np.atleast_2d(xi)
    return xi[:, 0] ** 2 - xi[:, 1]


def reaction_macro_space() -> InputSpace:
    return InputSpace(tuple(Param(f"x{i}", Uniform(0.9, 1.1), Scale.MACRO) for i in (1, 2, 3)))


def reaction_micro_space() -> InputSpace:
    return InputSpace((Param("xi1", Uniform(0.07, 0.09), Scale.MICRO),
                       Param("xi2", Uniform(0.05, 0.09), Scale.MICRO)))


def reaction_space() -> InputSpace:
    return InputSpace(reaction_macro_space().params + reaction_micro_space().params)


class ReactionDecay:
    """``h_t(xi) = exp(-t psi(xi))`` on the micro inputs."""

    dim = 2

    def __init__(self, t: float):
        self.t = float(t)

    def __call__(self, xi):
        return np.exp(-self.t * reaction_psi(xi))


@dataclass(frozen=True)
class ReactionModel:
    """Analytic solution ``z(t) = f(x) exp(-t psi(xi))`` on inputs (x1, x2, x3, xi1, xi2)."""

    t_end: float = 100.0
    output_times: tuple = tuple(float(t) for t in range(0, 101, 5))
    dim = 5

    def __post_init__(self):
        times = tuple(float(t) for t in self.output_times)
        if not times or any(t < 0 or t > self.t_end for t in times):
            raise ConfigurationError("reaction output times must lie in [0, t_end]")
        object.__setattr__(self, "output_times", times)

    @property
    def times(self) -> np.ndarray:
        return np.asarray(self.output_times)

    def evaluate(self, point, t: float) -> float:
        """Single-point evaluation at time ``t``."""
        if not 0.0 <= t <= self.t_end:
            raise ConfigurationError(f"t={t} outside [0, {self.t_end}]")
        return float(self.at(t)(np.atleast_2d(point))[0])

    def at(self, t: float):
        t = float(t)

        class _AtTime:
            dim = 5

            def __call__(_, x):
                x = np.atleast_2d(x)
                return reaction_f(x[:, :3]) * np.exp(-t * reaction_psi(x[:, 3:5]))

        return _AtTime()

    def series(self, x) -> np.ndarray:
        x = np.atleast_2d(x)
        f = reaction_f(x[:, :3])
        psi = reaction_psi(x[:, 3:5])
        return f[:, None] * np.exp(-np.outer(psi, self.times))

    def __call__(self, x):
        return self.at(self.t_end)(x)


reaction_evaluate = ReactionModel().evaluate

# ---------------------------------------------------------------- Ornstein-Uhlenbeck

OU_VARIANCES = (1e-4, 2.5e-4, 2.5e-6, 2.5e-6)


def ou_f(x) -> np.ndarray:
    """Macro drift ``-x1 + (x2^2 x3 + x4)``."""
    x = np.atleast_2d(x)
    return -x[:, 0] + (x[:, 1] ** 2 * x[:, 2] + x[:, 3])


def ou_macro_space() -> InputSpace:
    return InputSpace(tuple(Param(f"x{i + 1}", Normal(0.0, v), Scale.MACRO) for i, v in enumerate(OU_VARIANCES)))


def ou_space() -> InputSpace:
    """Macro inputs plus a ``noise`` column whose value selects the white-noise stream."""
    return InputSpace(ou_macro_space().params + (Param("noise", Uniform(0.0, 1.0), Scale.MICRO),))


def noise_key(value: float) -> int:
    """Integer stream label carried by a noise column value in [0, 1]."""
    return int(float(value) * 2.0 ** 53)


@dataclass(frozen=True)
class OUModel:
    """Slow ``dz/dt = v + f(x)`` driven by a fast OU process ``v``.

    Micro steps use Euler-Maruyama with step ``dt_micro``; after each
    window of ``dt_macro / dt_micro`` micro steps ``z`` takes one forward
    Euler step using the last micro value of ``v`` (or the window average
    when ``window_average`` is set).  The noise of each row is drawn from
    a stream keyed on ``(seed, noise column)``, so evaluation is pure.
    """

    eps: float = 1e-2
    dt_macro: float = 1.0
    dt_micro: float = 1e-2
    t_end: float = 20.0
    z0: float = 1.0
    v0: float = 1.0
    seed: int = 0
    window_average: bool = False
    noise: bool = True
    drift: Optional[Callable] = field(default=None, compare=False)
    dim = 5

    def __post_init__(self):
        if not self.eps > 0:
            raise ConfigurationError("eps must be positive")
        if not 0 < self.dt_micro < self.dt_macro:
            raise ConfigurationError("need 0 < dt_micro < dt_macro")
        if abs(self.n_micro * self.dt_micro - self.dt_macro) > 1e-9 * self.dt_macro:
            raise ConfigurationError("dt_macro must be a multiple of dt_micro")
        if self.n_macro < 1 or abs(self.n_macro * self.dt_macro - self.t_end) > 1e-9 * self.t_end:
            raise ConfigurationError("t_end must be a positive multiple of dt_macro")

    @property
    def n_micro(self) -> int:
        return int(round(self.dt_macro / self.dt_micro))

    @property
    def n_macro(self) -> int:
        return int(round(self.t_end / self.dt_macro))

    @property
    def times(self) -> np.ndarray:
        return self.dt_macro * np.arange(1, self.n_macro + 1)

    def _drift(self, x):
        return (self.drift or ou_f)(x[:, :4])

    def noise_for(self, noise_column) -> np.ndarray:
        steps = self.n_macro * self.n_micro
        out = np.empty((len(noise_column), steps))
        if not self.noise:
            out[:] = 0.0
            return out
        for r, u in enumerate(noise_column):
            gen = np.random.Generator(np.random.Philox(key=derive_seed(self.seed, "ou-noise", noise_key(u))))
            out[r] = gen.standard_normal(steps)
        return out

    def series_with_drift(self, f_values, noise_column, block: int = 512) -> np.ndarray:
        f_values = np.asarray(f_values, dtype=float)
        out = np.empty((f_values.size, self.n_macro))
        for s in range(0, f_values.size, block):
            w = self.noise_for(noise_column[s:s + block])
            out[s:s + block] = kernels.ou_integrate(f_values[s:s + block], w, self.z0, self.v0, self.eps,
                                                    self.dt_macro, self.dt_micro, self.n_micro,
                                                    self.window_average)
        bad = np.flatnonzero(~np.all(np.isfinite(out), axis=1))
        if bad.size:
            raise IntegrationError(f"OU integration diverged at row {bad[0]}", row=int(bad[0]))
        return out

    def series(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return self.series_with_drift(self._drift(x), x[:, 4])

    def __call__(self, x):
        return self.series(x)[:, -1]

    def micro_part(self, x) -> np.ndarray:
        """Final-time contribution of the fast process alone, ``sum_k dt_macro * v_k``."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return self.series_with_drift(np.zeros(x.shape[0]), x[:, 4])[:, -1] - self.z0


def ou_simulate(point, seed: int, **params) -> np.ndarray:
    """Macro-step time series of ``z`` for one input point."""
    return OUModel(seed=seed, **params).series(np.atleast_2d(point))[0]


# ---------------------------------------------------------------- counterexample

COUNTEREXAMPLE_EPS0 = 1e-9


def counterexample_macro_space() -> InputSpace:
    return InputSpace(tuple(Param(f"x{i}", Uniform(COUNTEREXAMPLE_EPS0, 1.0), Scale.MACRO) for i in (1, 2)))


def counterexample_space() -> InputSpace:
    return InputSpace(counterexample_macro_space().params
                      + (Param("xi", Uniform(COUNTEREXAMPLE_EPS0, 1.0), Scale.MICRO),))


@dataclass(frozen=True)
class CounterexampleModel:
    """``g = beta^(-1/4) (x1 + x2 + xi)^(-1/4)`` on inputs (x1, x2, xi)."""

    beta: float = 0.05
    dim = 3

    def __post_init__(self):
        if not self.beta > 0:
            raise ConfigurationError("beta must be positive")

    def f(self, x):
        x = np.atleast_2d(x)
        return x[:, 0] + self.beta * x[:, 1]

    def h(self, x1_xi):
        x1_xi = np.atleast_2d(x1_xi)
        return (1.0 - self.beta) * x1_xi[:, 0] - self.beta * x1_xi[:, 1]

    @staticmethod
    def G(u, v):
        return np.abs(u - v) ** -0.25

    def __call__(self, x):
        x = np.atleast_2d(x)
        return self.G(self.f(x[:, :2]), self.h(x[:, [0, 2]]))

    def direct(self, x):
        # summing the sorted row keeps g exactly symmetric in floating point
        s = np.sort(np.atleast_2d(x)[:, :3], axis=1)
        return self.beta ** -0.25 * ((s[:, 0] + s[:, 1]) + s[:, 2]) ** -0.25


def counterexample_indices(beta: float) -> dict:
    """Closed-form total index of ``x2`` for ``f = x1 + beta x2`` on the unit square."""
    if not beta > 0:
        raise ConfigurationError("beta must be positive")
    return {"sf_x2_analytic": beta ** 2 / (1.0 + beta ** 2)}


# ---------------------------------------------------------------- composition

def arctan_coupling(a: float = 1.0, b: float = 1.0):
    """``G(u, v) = a|u| + b|v| + arctan((|u| + |v|) / (1 + v^2))`` with its constants.

    Returns ``(G, L, c)`` where ``L = a + 1`` bounds ``|dG/du|`` (attained
    at the origin) and ``c = min(a, b)`` is the coercivity constant.
    """
    if not (a > 0 and b > 0):
        raise ConfigurationError("a and b must be positive")

    def G(u, v):
        au, av = np.abs(u), np.abs(v)
        return a * au + b * av + np.arctan((au + av) / (1.0 + v * v))

    return G, a + 1.0, min(a, b)


_H_ARITY = {Multiplicative: 1, Additive: 1, AffineLinear: 2, MixedAffine: 2}


@dataclass(frozen=True)
class Wiring:
    """Column indices of the joint input space read by each component."""

    f: tuple
    h: tuple

    def __post_init__(self):
        object.__setattr__(self, "f", tuple(int(i) for i in self.f))
        object.__setattr__(self, "h", tuple(tuple(int(i) for i in cols) for cols in self.h))


class ComposedModel:
    """Joint-space model ``g = G(f(x), h_1(.), ..., h_k(.))`` for a coupling form."""

    def __init__(self, f, h_list, form: CouplingForm, wiring: Wiring, dim: int, G=None):
        self.f = f
        self.h_list = tuple(h_list)
        self.form = form
        self.wiring = wiring
        self.dim = int(dim)
        self.G = G

    def components(self, x) -> dict:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = {"f": np.asarray(self.f(x[:, list(self.wiring.f)]), dtype=float)}
        for j, (h, cols) in enumerate(zip(self.h_list, self.wiring.h), start=1):
            out[f"h{j}"] = np.asarray(h(x[:, list(cols)]), dtype=float)
        return out

    def __call__(self, x):
        c = self.components(x)
        f = c["f"]
        hs = [c[f"h{j}"] for j in range(1, len(self.h_list) + 1)]
        form = self.form
        if isinstance(form, Multiplicative):
            return f * hs[0]
        if isinstance(form, Additive):
            return f + hs[0]
        if isinstance(form, (AffineLinear, MixedAffine)):
            return f * hs[0] + hs[1]
        if isinstance(form, SharedSum):
            return f + np.sum(hs, axis=0)
        if isinstance(form, LipschitzCoercive):
            v = hs[0] if len(hs) == 1 else np.stack(hs, axis=1)
            return np.asarray(self.G(f, v), dtype=float)
        raise ConfigurationError(f"unsupported form {form!r}")


def compose(f, h_list: Sequence, form: CouplingForm, wiring: Wiring, dim: Optional[int] = None, *,
            G=None, screened: Optional[Sequence[int]] = None) -> ComposedModel:
    """Build a joint-space model and check the input-separation assumptions of ``form``.

    ``screened`` are the joint indices of the macro inputs whose importance
    is to be assessed (default: all inputs of ``f``).  Couplings whose
    transfer results need a component to be independent of those inputs
    reject wirings that violate this.
    """
    if not isinstance(wiring, Wiring):
        wiring = Wiring(**wiring)
    h_list = tuple(h_list)
    if len(h_list) != len(wiring.h):
        raise ConfigurationError("wiring must list one column set per h component")
    need = _H_ARITY.get(type(form))
    if need is not None and len(h_list) != need:
        raise ConfigurationError(f"{form.name} coupling needs exactly {need} h component(s), got {len(h_list)}")
    if isinstance(form, SharedSum) and len(h_list) != form.k:
        raise ConfigurationError(f"shared-sum with k={form.k} needs {form.k} h components")
    if isinstance(form, LipschitzCoercive):
        if G is None:
            raise ConfigurationError("Lipschitz-coercive coupling needs the function G")
        if len(h_list) > 1 and not form.h_is_vector:
            raise ConfigurationError("several h components need a vector-valued Lipschitz form")
    if dim is None:
        dim = 1 + max(max(wiring.f, default=-1), max((max(c, default=-1) for c in wiring.h), default=-1))
    for cols in (wiring.f,) + wiring.h:
        if len(set(cols)) != len(cols) or any(not 0 <= i < dim for i in cols):
            raise ConfigurationError(f"invalid column set {cols} for a {dim}-input joint space")

    fset = set(wiring.f)
    screened = set(wiring.f if screened is None else screened)

    def disjoint(cols, what, why):
        shared = fset & set(cols)
        if shared:
            raise ConfigurationError(f"{what} shares inputs {sorted(shared)} with f: {why}")

    if isinstance(form, (Multiplicative, Additive)):
        disjoint(wiring.h[0], "h", f"{form.name} transfer assumes f and h act on disjoint inputs")
    elif isinstance(form, AffineLinear):
        disjoint(wiring.h[0], "h1", "affine transfer assumes h1 acts on micro inputs only")
        touched = screened & set(wiring.h[1])
        if touched:
            raise ConfigurationError(
                f"h2 depends on screened inputs {sorted(touched)}: affine transfer requires h2 "
                "to be independent of the inputs being screened")
    elif isinstance(form, MixedAffine):
        disjoint(wiring.h[0], "h1", "mixed-affine transfer assumes h1 acts on micro inputs only")
    elif isinstance(form, LipschitzCoercive):
        for cols in wiring.h:
            touched = screened & set(cols)
            if touched:
                raise ConfigurationError(
                    f"h depends on screened inputs {sorted(touched)}: the Lipschitz bound requires "
                    "h to be independent of the inputs being screened")
    return ComposedModel(f, h_list, form, wiring, dim, G)


# ---------------------------------------------------------------- problems

@dataclass
class MultiscaleProblem:
    """One experiment: joint space, QoI, validation series and coupling decomposition.

    ``components(x_joint)`` returns the coupled pieces evaluated on joint
    samples, keyed ``f``, ``h`` (or ``h1``, ``h2``).  ``f_inputs`` name the
    joint inputs of the single-scale model ``f_model``.
    """

    name: str
    space: InputSpace
    model: Callable
    series: Callable
    times: np.ndarray
    f_model: Callable
    f_inputs: tuple
    form: Optional[CouplingForm]
    components: Optional[Callable] = None
    h_inputs: tuple = ()
    extra: dict = field(default_factory=dict)

    @property
    def f_space(self) -> InputSpace:
        return self.space.subset(self.f_inputs)


def reaction_problem(output_times=None) -> MultiscaleProblem:
    model = ReactionModel() if output_times is None else ReactionModel(output_times=tuple(output_times))
    t = model.t_end
    decay = ReactionDecay(t)

    def components(x):
        x = np.atleast_2d(x)
        return {"f": reaction_f(x[:, :3]), "h": decay(x[:, 3:5])}

    return MultiscaleProblem("reaction", reaction_space(), model, model.series, model.times,
                             reaction_f, ("x1", "x2", "x3"), Multiplicative(), components,
                             h_inputs=("xi1", "xi2"), extra={"t": t})


def ou_problem(seed: int = 0, **params) -> MultiscaleProblem:
    model = OUModel(seed=seed, **params)

    def components(x):
        x = np.atleast_2d(x)
        return {"f": model.z0 + model.t_end * ou_f(x[:, :4]), "h": model.micro_part(x)}

    return MultiscaleProblem("ou", ou_space(), model, model.series, model.times, ou_f,
                             ("x1", "x2", "x3", "x4"), Additive(), components, h_inputs=("noise",),
                             extra={"t": model.t_end})


def counterexample_problem(beta: float = 0.05) -> MultiscaleProblem:
    model = CounterexampleModel(beta)

    def series(x):
        return model(x)[:, None]

    return MultiscaleProblem("counterexample", counterexample_space(), model, series, np.array([1.0]),
                             model.f, ("x1", "x2"), None, None, h_inputs=("xi",), extra={"beta": beta})


def problem_from_composed(name: str, space: InputSpace, composed: ComposedModel) -> MultiscaleProblem:
    names = space.names
    f_inputs = tuple(names[i] for i in composed.wiring.f)
    h_inputs = tuple(dict.fromkeys(names[i] for cols in composed.wiring.h for i in cols))

    def series(x):
        return composed(x)[:, None]

    def components(x):
        c = composed.components(x)
        if len(composed.h_list) == 1 and not isinstance(composed.form, SharedSum):
            c["h"] = c.pop("h1")
        return c

    extra = {"h_columns": [[names[i] for i in cols] for cols in composed.wiring.h]}
    return MultiscaleProblem(name, space, composed, series, np.array([1.0]), composed.f, f_inputs,
                             composed.form, components, h_inputs, extra)
