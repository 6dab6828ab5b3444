"""Small builders shared by the test modules."""
import numpy as np

from multisens.sobol import InputIndex, SensitivityResult


def sf_of(**indices) -> SensitivityResult:
    """A result with point estimates only (zero-width intervals)."""
    inputs = tuple(InputIndex(k, float(v), float(v), float(v)) for k, v in indices.items())
    return SensitivityResult(inputs, variance=1.0, mean=0.0, n=0, seed=0)


class Polynomial:
    """Random polynomial of degree <= 3 in ``k`` inputs; every input has a linear term."""

    def __init__(self, rng, k: int, n_terms: int = 3, max_degree: int = 3, positive: bool = False):
        lo = 0.2 if positive else -1.0
        self.k = k
        self.terms = [(float(rng.uniform(lo, 1.0)), tuple(int(j == i) for j in range(k))) for i in range(k)]
        for _ in range(n_terms):
            exps = [0] * k
            for _ in range(int(rng.integers(2, max_degree + 1))):
                exps[int(rng.integers(k))] += 1
            self.terms.append((float(rng.uniform(lo, 1.0)), tuple(exps)))

    def __call__(self, x):
        x = x.reshape(x.shape[0], -1)
        out = np.zeros(x.shape[0])
        for coef, exps in self.terms:
            term = np.full(x.shape[0], coef)
            for j, e in enumerate(exps):
                if e:
                    term = term * x[:, j] ** e
            out = out + term
        return out
