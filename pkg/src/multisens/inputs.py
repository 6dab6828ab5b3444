"""Uncertain inputs, their distributions and reproducible sampling.

All randomness in the package is drawn from counter-based Philox streams
whose keys are derived from a user seed plus purpose tags (see
:func:`derive_seed`).  Normal variates are produced by pushing the uniform
stream through :func:`probit`, so every sampled column is a deterministic
transform of one uniform stream.
"""
from __future__ import annotations

import enum
import hashlib
import math
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import ConfigurationError

# Half of the grid spacing of Generator.random(); keeps unit draws inside (0, 1).
_UNIT_OFFSET = 2.0 ** -54


def derive_seed(seed: int, *tags) -> int:
    """Derive a 128-bit sub-seed from ``seed`` and purpose ``tags``.

    The derivation is a BLAKE2b hash of the canonical text form of the
    arguments, so it is stable across platforms and Python versions.
    """
    h = hashlib.blake2b(digest_size=16)
    h.update(repr(int(seed)).encode())
    for tag in tags:
        h.update(b"\x1f")
        h.update(str(tag).encode())
    return int.from_bytes(h.digest(), "little")


def rng_for(seed: int, *tags) -> np.random.Generator:
    """Return a Philox generator keyed on ``derive_seed(seed, *tags)``."""
    return np.random.Generator(np.random.Philox(key=derive_seed(seed, *tags)))


def unit_draws(gen: np.random.Generator, shape) -> np.ndarray:
    """Uniform draws strictly inside (0, 1)."""
    return gen.random(shape) + _UNIT_OFFSET


# Acklam's rational approximation of the standard normal quantile
# (relative error below 1.15e-9 on the open unit interval).
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def _tail(q):
    c, d = _C, _D
    num = ((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]
    den = (((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0
    return num / den


def probit(u) -> np.ndarray:
    """Standard normal quantile function for ``u`` in (0, 1)."""
    u = np.asarray(u, dtype=float)
    if np.any((u <= 0.0) | (u >= 1.0)):
        raise ConfigurationError("probit requires arguments strictly inside (0, 1)")
    out = np.empty_like(u)
    lo = u < _P_LOW
    hi = u > 1.0 - _P_LOW
    mid = ~(lo | hi)

    q = u[mid] - 0.5
    r = q * q
    a, b = _A, _B
    num = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q
    den = ((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0
    out[mid] = num / den
    out[lo] = _tail(np.sqrt(-2.0 * np.log(u[lo])))
    out[hi] = -_tail(np.sqrt(-2.0 * np.log1p(-u[hi])))
    return out


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)) or not self.lo < self.hi:
            raise ConfigurationError(f"Uniform requires finite lo < hi, got ({self.lo}, {self.hi})")

    kind = "uniform"

    @property
    def mean(self) -> float:
        return 0.5 * (self.lo + self.hi)

    @property
    def variance(self) -> float:
        return (self.hi - self.lo) ** 2 / 12.0

    @property
    def params(self):
        return (self.lo, self.hi)

    def from_unit(self, u: np.ndarray) -> np.ndarray:
        return self.lo + (self.hi - self.lo) * u

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x)
        return (x >= self.lo) & (x <= self.hi)


@dataclass(frozen=True)
class Normal:
    """Normal distribution parameterised by mean and *variance*."""

    mean: float
    variance: float

    def __post_init__(self):
        if not (math.isfinite(self.mean) and math.isfinite(self.variance)) or self.variance <= 0:
            raise ConfigurationError(f"Normal requires finite mean and variance > 0, got {self.variance}")

    kind = "normal"

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)

    @property
    def params(self):
        return (self.mean, self.variance)

    def from_unit(self, u: np.ndarray) -> np.ndarray:
        return self.mean + self.std * probit(u)

    def contains(self, x) -> np.ndarray:
        return np.isfinite(np.asarray(x, dtype=float))


Distribution = Union[Uniform, Normal]

_DIST_KINDS = {"uniform": Uniform, "normal": Normal}


def make_distribution(kind: str, p1: float, p2: float) -> Distribution:
    try:
        cls = _DIST_KINDS[kind.strip().lower()]
    except KeyError:
        raise ConfigurationError(f"unknown distribution kind {kind!r}") from None
    return cls(float(p1), float(p2))


def mean_of(dist: Distribution) -> float:
    """Mean of ``dist``; the value an input is fixed at when it is screened out."""
    return dist.mean


class Scale(str, enum.Enum):
    MACRO = "macro"
    MICRO = "micro"


@dataclass(frozen=True)
class Param:
    name: str
    dist: Distribution
    scale: Scale = Scale.MACRO

    def __post_init__(self):
        if not self.name or not isinstance(self.name, str):
            raise ConfigurationError("parameter name must be a non-empty string")
        object.__setattr__(self, "scale", Scale(self.scale))


@dataclass(frozen=True)
class InputSpace:
    """Ordered collection of independent uncertain inputs.

    The order of ``params`` is the column order of every sample matrix.
    """

    params: tuple

    def __post_init__(self):
        params = tuple(self.params)
        if not params:
            raise ConfigurationError("an input space needs at least one parameter")
        names = [p.name for p in params]
        if len(set(names)) != len(names):
            raise ConfigurationError(f"duplicate parameter names in {names}")
        object.__setattr__(self, "params", params)

    @classmethod
    def from_records(cls, records: Iterable[Sequence]) -> "InputSpace":
        """Build from ``(name, dist_kind, p1, p2[, scale])`` records."""
        params = []
        for rec in records:
            rec = list(rec)
            if len(rec) not in (4, 5):
                raise ConfigurationError(f"input record {rec!r} must have 4 or 5 fields")
            scale = rec[4] if len(rec) == 5 else Scale.MACRO
            try:
                scale = Scale(str(getattr(scale, "value", scale)).strip().lower())
            except ValueError:
                raise ConfigurationError(f"unknown scale {rec[4]!r}") from None
            params.append(Param(str(rec[0]).strip(), make_distribution(rec[1], rec[2], rec[3]), scale))
        return cls(tuple(params))

    def to_records(self):
        return [[p.name, p.dist.kind, *p.dist.params, p.scale.value] for p in self.params]

    @property
    def names(self) -> tuple:
        return tuple(p.name for p in self.params)

    @property
    def dim(self) -> int:
        return len(self.params)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise ConfigurationError(f"unknown input {name!r}; known: {list(self.names)}") from None

    def __getitem__(self, key) -> Param:
        if isinstance(key, str):
            key = self.index(key)
        return self.params[key]

    def __len__(self):
        return len(self.params)

    def names_with_scale(self, scale: Scale) -> tuple:
        return tuple(p.name for p in self.params if p.scale == Scale(scale))

    def subset(self, names: Iterable[str]) -> "InputSpace":
        wanted = list(names)
        for name in wanted:
            self.index(name)
        return InputSpace(tuple(p for p in self.params if p.name in wanted))

    def means(self) -> np.ndarray:
        return np.array([mean_of(p.dist) for p in self.params])

    def from_unit(self, u: np.ndarray) -> np.ndarray:
        """Map a matrix of unit draws column-wise onto the distributions."""
        out = np.empty_like(u, dtype=float)
        for j, p in enumerate(self.params):
            out[:, j] = p.dist.from_unit(u[:, j])
        return out

    def contains(self, x: np.ndarray) -> bool:
        x = np.atleast_2d(x)
        return all(bool(np.all(p.dist.contains(x[:, j]))) for j, p in enumerate(self.params))


def sample(space: InputSpace, n: int, seed: int, *tags) -> np.ndarray:
    """Draw an ``(n, space.dim)`` matrix of i.i.d. rows.

    The result is a pure function of ``(space, n, seed, tags)`` and is
    returned read-only.
    """
    if int(n) < 2:
        raise ConfigurationError(f"sample size must be at least 2, got {n}")
    gen = rng_for(seed, "sample", *tags)
    x = space.from_unit(unit_draws(gen, (int(n), space.dim)))
    x.setflags(write=False)
    return x
