"""Total Sobol indices by the Saltelli design and the Jansen estimator.

A *model* here is any callable mapping an ``(n, d)`` array of input rows
to an ``(n,)`` array of outputs.  Objects may advertise their arity with a
``dim`` attribute, which is then checked against the design.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConfigurationError, DegenerateModelError, EvaluationError
from .inputs import InputSpace, derive_seed, rng_for, unit_draws

MIN_DESIGN_ROWS = 16
DEFAULT_BOOTSTRAP = 500
DEFAULT_LEVEL = 0.95
_BOOT_CHUNK = 25


class Pointwise:
    """Adapt a scalar function ``fn(point) -> float`` to the row-batch contract."""

    def __init__(self, fn, dim):
        self.fn = fn
        self.dim = int(dim)

    def __call__(self, x):
        return np.array([float(self.fn(row)) for row in np.atleast_2d(x)])


class Vectorized:
    """Attach an arity to a vectorised function ``fn(X) -> y``."""

    def __init__(self, fn, dim):
        self.fn = fn
        self.dim = int(dim)

    def __call__(self, x):
        return self.fn(x)


def evaluate(model, x, workers=None, chunk=4096) -> np.ndarray:
    """Evaluate ``model`` on the rows of ``x``.

    With ``workers > 1`` row blocks are evaluated on a thread pool; blocks
    are concatenated in row order so the result does not depend on the
    number of workers.
    """
    x = np.asarray(x, dtype=float)
    dim = getattr(model, "dim", None)
    if dim is not None and x.shape[1] != dim:
        raise ConfigurationError(f"model expects {dim} inputs, design has {x.shape[1]}")
    if workers and workers > 1 and x.shape[0] > chunk:
        blocks = [x[i:i + chunk] for i in range(0, x.shape[0], chunk)]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            y = np.concatenate([np.asarray(b, dtype=float).reshape(-1) for b in pool.map(model, blocks)])
    else:
        y = np.asarray(model(x), dtype=float).reshape(-1)
    if y.shape[0] != x.shape[0]:
        raise EvaluationError(f"model returned {y.shape[0]} values for {x.shape[0]} rows")
    bad = np.flatnonzero(~np.isfinite(y))
    if bad.size:
        raise EvaluationError(f"non-finite model output at row {bad[0]}", row=int(bad[0]))
    return y


@dataclass(frozen=True)
class SaltelliDesign:
    """Paired matrices ``A``, ``B`` and ``AB[i]`` (``A`` with column ``i`` from ``B``)."""

    space: InputSpace
    A: np.ndarray
    B: np.ndarray
    AB: np.ndarray
    seed: int
    seed_a: int
    seed_b: int

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    @property
    def n_evaluations(self) -> int:
        return self.n * (self.dim + 2)


def design_from_seeds(space: InputSpace, n: int, seed_a: int, seed_b: int, seed=None) -> SaltelliDesign:
    if n < MIN_DESIGN_ROWS:
        raise ConfigurationError(f"Saltelli design needs n >= {MIN_DESIGN_ROWS}, got {n}")
    if seed_a == seed_b:
        raise ConfigurationError("A and B must come from disjoint seed streams")
    d = space.dim
    gen_a = np.random.Generator(np.random.Philox(key=seed_a))
    gen_b = np.random.Generator(np.random.Philox(key=seed_b))
    A = space.from_unit(unit_draws(gen_a, (n, d)))
    B = space.from_unit(unit_draws(gen_b, (n, d)))
    AB = np.repeat(A[None, :, :], d, axis=0)
    for i in range(d):
        AB[i, :, i] = B[:, i]
    for arr in (A, B, AB):
        arr.setflags(write=False)
    return SaltelliDesign(space, A, B, AB, seed if seed is not None else seed_a, seed_a, seed_b)


def build_design(space: InputSpace, n: int, seed: int) -> SaltelliDesign:
    """Saltelli design with ``n`` base rows; implies ``n * (d + 2)`` model runs."""
    return design_from_seeds(space, int(n), derive_seed(seed, "saltelli", "A"),
                             derive_seed(seed, "saltelli", "B"), seed=seed)


@dataclass(frozen=True)
class InputIndex:
    name: str
    s_total: float
    ci_lo: float
    ci_hi: float

    @property
    def ci_width(self) -> float:
        return self.ci_hi - self.ci_lo

    @property
    def flagged(self) -> bool:
        """Estimate outside [0, 1], i.e. visibly affected by Monte Carlo error."""
        return self.s_total < 0.0 or self.s_total > 1.0


@dataclass(frozen=True)
class SensitivityResult:
    inputs: tuple
    variance: float
    mean: float
    n: int
    seed: int
    level: float = DEFAULT_LEVEL
    n_boot: int = DEFAULT_BOOTSTRAP

    @property
    def names(self):
        return tuple(r.name for r in self.inputs)

    def __getitem__(self, name) -> InputIndex:
        for r in self.inputs:
            if r.name == name:
                return r
        raise KeyError(name)

    def get(self, name, default=None):
        try:
            return self[name]
        except KeyError:
            return default

    @property
    def s_total(self) -> np.ndarray:
        return np.array([r.s_total for r in self.inputs])

    @property
    def ci_widths(self) -> np.ndarray:
        return np.array([r.ci_width for r in self.inputs])

    def to_dict(self) -> dict:
        return {
            "inputs": [{"name": r.name, "s_total": r.s_total, "ci": [r.ci_lo, r.ci_hi],
                        "flagged": r.flagged} for r in self.inputs],
            "variance": self.variance,
            "mean": self.mean,
            "n": self.n,
            "seed": self.seed,
            "level": self.level,
            "n_boot": self.n_boot,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SensitivityResult":
        try:
            inputs = tuple(InputIndex(r["name"], float(r["s_total"]), float(r["ci"][0]), float(r["ci"][1]))
                           for r in d["inputs"])
            return cls(inputs, float(d["variance"]), float(d["mean"]), int(d["n"]), int(d["seed"]),
                       float(d.get("level", DEFAULT_LEVEL)), int(d.get("n_boot", DEFAULT_BOOTSTRAP)))
        except (KeyError, TypeError, IndexError, ValueError) as exc:
            raise ConfigurationError(f"malformed sensitivity result: {exc}") from None


def pooled_variance(fA: np.ndarray, fB: np.ndarray) -> float:
    return float(np.var(np.concatenate([fA, fB]), ddof=1))


def jansen_total(fA: np.ndarray, fAB: np.ndarray, variance: float) -> np.ndarray:
    """Jansen numerator ``mean((f(A) - f(AB_i))^2) / 2`` divided by the variance."""
    diff = fA[None, :] - fAB
    return 0.5 * np.mean(diff * diff, axis=1) / variance


def estimate_total_si(model, design: SaltelliDesign, *, n_boot: int = DEFAULT_BOOTSTRAP,
                      level: float = DEFAULT_LEVEL, workers=None) -> SensitivityResult:
    """Total indices of ``model`` with percentile-bootstrap confidence intervals.

    Bootstrap resamples draw row indices with replacement and are keyed on
    the design seed, so the whole result is reproducible.
    """
    n, d = design.n, design.dim
    fA = evaluate(model, design.A, workers)
    fB = evaluate(model, design.B, workers)
    fAB = np.stack([evaluate(model, design.AB[i], workers) for i in range(d)])

    variance = pooled_variance(fA, fB)
    if not variance > 0.0:
        raise DegenerateModelError("model output has zero variance on the design (f is constant)")
    mean = float(np.mean(np.concatenate([fA, fB])))
    s = jansen_total(fA, fAB, variance)

    lo, hi = s.copy(), s.copy()
    if n_boot:
        gen = rng_for(design.seed, "bootstrap", design.seed_a)
        boots = []
        for start in range(0, n_boot, _BOOT_CHUNK):
            r = min(_BOOT_CHUNK, n_boot - start)
            idx = gen.integers(0, n, size=(r, n))
            with np.errstate(divide="ignore", invalid="ignore"):
                boots.append(kernels.jansen_bootstrap(fA, fB, fAB, idx))
        boots = np.concatenate(boots)
        alpha = 0.5 * (1.0 - level)
        q_lo, q_hi = np.nanquantile(boots, [alpha, 1.0 - alpha], axis=0)
        # the percentile interval is not guaranteed to cover the point estimate
        lo = np.minimum(q_lo, s)
        hi = np.maximum(q_hi, s)

    names = design.space.names
    inputs = tuple(InputIndex(names[i], float(s[i]), float(lo[i]), float(hi[i])) for i in range(d))
    return SensitivityResult(inputs, variance, mean, n, int(design.seed), level, int(n_boot))


def total_si(model, space: InputSpace, n: int, seed: int, **kwargs) -> SensitivityResult:
    """Shorthand for ``estimate_total_si(model, build_design(space, n, seed))``."""
    return estimate_total_si(model, build_design(space, n, seed), **kwargs)


@dataclass(frozen=True)
class Moments:
    mean: float
    second_moment: float
    variance: float
    n: int = 0
    values: np.ndarray = field(default=None, repr=False, compare=False)


def moments_from_values(y: np.ndarray) -> Moments:
    y = np.asarray(y, dtype=float)
    if y.size == 0:
        raise ConfigurationError("cannot estimate moments of an empty sample")
    if np.all(y == y[0]):
        c = float(y[0])
        return Moments(c, c * c, 0.0, int(y.size), y)
    mean = float(np.mean(y))
    second = float(np.mean(y * y))
    return Moments(mean, second, max(second - mean * mean, 0.0), int(y.size), y)


def estimate_moments(model, sample: np.ndarray, workers=None) -> Moments:
    """Plain Monte Carlo mean, second moment and variance of ``model`` on ``sample``."""
    sample = np.atleast_2d(np.asarray(sample, dtype=float))
    if sample.shape[0] == 0:
        raise ConfigurationError("cannot estimate moments of an empty sample")
    return moments_from_values(evaluate(model, sample, workers))


def standard_error_of_mean(y) -> float:
    y = np.asarray(y, dtype=float)
    return float(np.std(y, ddof=1) / math.sqrt(y.size)) if y.size > 1 else 0.0
