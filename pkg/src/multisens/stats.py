"""Distribution comparison for full versus reduced uncertainty propagation."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ConfigurationError, DegenerateModelError

MIN_TEST_SIZE = 10
MIN_SERIES_COUNT = 30
_SERIES_TOL = 1e-12
_REL_GUARD = 1e-12


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    n1: int
    n2: int

    __test__ = False  # not a pytest class

    def to_dict(self):
        return {"statistic": self.statistic, "p_value": self.p_value, "n1": self.n1, "n2": self.n2}

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["statistic"]), float(d["p_value"]), int(d["n1"]), int(d["n2"]))


# ---------------------------------------------------------------- special functions

def _betacf(a: float, b: float, x: float, tol: float = 1e-15, max_iter: int = 100_000) -> float:
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        dl = d * c
        h *= dl
        if abs(dl - 1.0) < tol:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function ``I_x(a, b)``."""
    if not (a > 0 and b > 0):
        raise ConfigurationError("betainc needs a, b > 0")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(log_front) * _betacf(a, b, x) / a
    return 1.0 - math.exp(log_front) * _betacf(b, a, 1.0 - x) / b


def f_cdf(x: float, d1: float, d2: float) -> float:
    if x <= 0:
        return 0.0
    return betainc(d1 / 2.0, d2 / 2.0, d1 * x / (d1 * x + d2))


def f_sf(x: float, d1: float, d2: float) -> float:
    """Upper tail of the F distribution, evaluated without cancellation."""
    if x <= 0:
        return 1.0
    return betainc(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * x))


def kolmogorov_sf(lam: float, tol: float = 1e-12) -> float:
    """``P(K > lam)`` for the limiting Kolmogorov distribution."""
    if lam <= 0.0:
        return 1.0
    if lam < 1.18:
        # theta-function form converges fast for small arguments
        s, k = 0.0, 1
        c = math.pi ** 2 / (8.0 * lam * lam)
        while True:
            term = math.exp(-(2 * k - 1) ** 2 * c)
            s += term
            if term < tol:
                break
            k += 1
        q = 1.0 - math.sqrt(2.0 * math.pi) / lam * s
    else:
        s, k = 0.0, 1
        while True:
            term = math.exp(-2.0 * k * k * lam * lam)
            s += term if k % 2 else -term
            if term < tol:
                break
            k += 1
        q = 2.0 * s
    return min(max(q, 0.0), 1.0)


# ---------------------------------------------------------------- tests

def _clean(a, what):
    a = np.asarray(a, dtype=float).ravel()
    if a.size == 0:
        raise ConfigurationError(f"{what} is empty")
    if a.size < MIN_TEST_SIZE:
        raise ConfigurationError(f"{what} has {a.size} values; at least {MIN_TEST_SIZE} are required")
    if not np.all(np.isfinite(a)):
        raise ConfigurationError(f"{what} contains non-finite values")
    return a


def ks_two_sample(a, b) -> TestResult:
    """Two-sample Kolmogorov-Smirnov test with the asymptotic p-value."""
    a = np.sort(_clean(a, "first sample"))
    b = np.sort(_clean(b, "second sample"))
    d = kernels.ks_statistic(a, b)
    en = a.size * b.size / (a.size + b.size)
    return TestResult(d, kolmogorov_sf(math.sqrt(en) * d), int(a.size), int(b.size))


def levene(a, b, center: str = "mean") -> TestResult:
    """Levene's test for equal variances of two groups (F(1, n1 + n2 - 2) reference)."""
    a = _clean(a, "first sample")
    b = _clean(b, "second sample")
    if center == "mean":
        za, zb = np.abs(a - a.mean()), np.abs(b - b.mean())
    elif center == "median":
        za, zb = np.abs(a - np.median(a)), np.abs(b - np.median(b))
    else:
        raise ConfigurationError(f"center must be 'mean' or 'median', got {center!r}")
    n1, n2 = a.size, b.size
    n = n1 + n2
    zbar = (za.sum() + zb.sum()) / n
    between = n1 * (za.mean() - zbar) ** 2 + n2 * (zb.mean() - zbar) ** 2
    within = ((za - za.mean()) ** 2).sum() + ((zb - zb.mean()) ** 2).sum()
    if within <= 0.0:
        if between <= 0.0:
            raise DegenerateModelError("both groups have zero spread about their centres")
        return TestResult(math.inf, 0.0, int(n1), int(n2))
    w = float((n - 2) * between / within)
    return TestResult(w, f_sf(w, 1.0, n - 2.0), int(n1), int(n2))


# ---------------------------------------------------------------- series summaries

@dataclass(frozen=True)
class SampleSeries:
    """Output samples at each time: ``samples[:, k]`` belongs to ``times[k]``."""

    times: np.ndarray
    samples: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float).ravel()
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim == 1:
            samples = samples[:, None]
        if samples.shape[1] != times.size:
            raise ConfigurationError("samples must have one column per time")
        if times.size > 1 and np.any(np.diff(times) <= 0):
            raise ConfigurationError("times must be strictly increasing")
        if samples.shape[0] < MIN_SERIES_COUNT:
            raise ConfigurationError(f"need at least {MIN_SERIES_COUNT} samples per time")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "samples", samples)


@dataclass(frozen=True)
class SeriesComparison:
    times: np.ndarray
    mean_full: np.ndarray
    std_full: np.ndarray
    mean_reduced: np.ndarray
    std_reduced: np.ndarray
    rel_err_mean: np.ndarray
    rel_err_std: np.ndarray

    @property
    def max_rel_err_std(self) -> float:
        v = self.rel_err_std[np.isfinite(self.rel_err_std)]
        return float(v.max()) if v.size else 0.0

    @property
    def max_rel_err_mean(self) -> float:
        v = self.rel_err_mean[np.isfinite(self.rel_err_mean)]
        return float(v.max()) if v.size else 0.0

    def rows(self):
        """Per-time records; guarded relative errors are ``None``."""
        out = []
        for k in range(self.times.size):
            out.append({
                "time": float(self.times[k]),
                "mean_full": float(self.mean_full[k]), "std_full": float(self.std_full[k]),
                "mean_reduced": float(self.mean_reduced[k]), "std_reduced": float(self.std_reduced[k]),
                "rel_err_mean": _opt(self.rel_err_mean[k]), "rel_err_std": _opt(self.rel_err_std[k]),
            })
        return out


def _opt(v):
    return float(v) if np.isfinite(v) else None


def _rel(full, red):
    full = np.asarray(full)
    out = np.full(full.shape, np.nan)
    ok = np.abs(full) >= _REL_GUARD
    out[ok] = np.abs(full[ok] - red[ok]) / np.abs(full[ok])
    return out


def compare_series(full: SampleSeries, reduced: SampleSeries) -> SeriesComparison:
    if full.times.shape != reduced.times.shape or not np.allclose(full.times, reduced.times, rtol=0,
                                                                    atol=_SERIES_TOL):
        raise ConfigurationError("full and reduced series are on different time grids")
    mf, mr = full.samples.mean(axis=0), reduced.samples.mean(axis=0)
    sf, sr = full.samples.std(axis=0, ddof=1), reduced.samples.std(axis=0, ddof=1)
    return SeriesComparison(full.times, mf, sf, mr, sr, _rel(mf, mr), _rel(sf, sr))


@dataclass(frozen=True)
class EcdfPdf:
    values: np.ndarray      # sorted distinct sample values
    cum: np.ndarray         # ECDF at each value
    edges: np.ndarray       # histogram bin edges
    density: np.ndarray
    degenerate: bool = False

    def ecdf_at(self, x) -> np.ndarray:
        i = np.searchsorted(self.values, np.asarray(x, dtype=float), side="right")
        return np.where(i > 0, self.cum[np.maximum(i - 1, 0)], 0.0)

    def pdf_at(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        k = np.searchsorted(self.edges, x, side="right") - 1
        k = np.where(x == self.edges[-1], self.density.size - 1, k)
        inside = (k >= 0) & (k < self.density.size)
        return np.where(inside, self.density[np.clip(k, 0, self.density.size - 1)], 0.0)


def ecdf_and_pdf(a, bins: int, value_range=None) -> EcdfPdf:
    """Exact ECDF plus a density-normalised equal-width histogram."""
    if int(bins) < 2:
        raise ConfigurationError("need at least 2 histogram bins")
    a = np.asarray(a, dtype=float).ravel()
    if a.size == 0:
        raise ConfigurationError("empty sample")
    values, counts = np.unique(a, return_counts=True)
    cum = np.cumsum(counts) / a.size
    lo, hi = (values[0], values[-1]) if value_range is None else value_range
    if hi <= lo:
        edges = np.array([lo - 0.5, lo + 0.5])
        return EcdfPdf(values, cum, edges, np.array([1.0]), degenerate=True)
    density, edges = np.histogram(a, bins=int(bins), range=(lo, hi), density=True)
    return EcdfPdf(values, cum, edges, density)
