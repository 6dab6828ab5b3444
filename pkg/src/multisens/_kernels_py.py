"""Pure numpy implementations of the hot kernels.

These define the reference semantics; ``_kernels.pyx`` must agree with
them (bitwise for ``ou_integrate`` and ``ks_statistic``, to rounding for
``jansen_bootstrap``).
"""
import numpy as np


def ou_integrate(f, noise, z0, v0, eps, dt_macro, dt_micro, n_micro, window_average):
    f = np.asarray(f, dtype=float)
    noise = np.asarray(noise, dtype=float)
    n = f.shape[0]
    n_macro = noise.shape[1] // n_micro
    scale = np.sqrt(dt_micro) / np.sqrt(eps)
    z = np.full(n, float(z0))
    v = np.full(n, float(v0))
    out = np.empty((n, n_macro))
    for k in range(n_macro):
        acc = np.zeros(n)
        for j in range(n_micro):
            v = v - (v / eps) * dt_micro + scale * noise[:, k * n_micro + j]
            acc = acc + v
        vbar = acc / n_micro if window_average else v
        z = z + dt_macro * (vbar + f)
        out[:, k] = z
    return out


def ks_statistic(a_sorted, b_sorted):
    a = np.asarray(a_sorted, dtype=float)
    b = np.asarray(b_sorted, dtype=float)
    grid = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, grid, side="right") / a.size
    cdf_b = np.searchsorted(b, grid, side="right") / b.size
    return float(np.max(np.abs(cdf_a - cdf_b)))


def jansen_bootstrap(fA, fB, fAB, idx):
    fA = np.asarray(fA, dtype=float)
    fB = np.asarray(fB, dtype=float)
    fAB = np.asarray(fAB, dtype=float)
    idx = np.asarray(idx)
    n = idx.shape[1]
    ya = fA[idx]
    yb = fB[idx]
    pooled = np.concatenate([ya, yb], axis=1)
    mean = pooled.mean(axis=1, keepdims=True)
    var = ((pooled - mean) ** 2).sum(axis=1) / (2 * n - 1)
    out = np.empty((idx.shape[0], fAB.shape[0]))
    for i in range(fAB.shape[0]):
        diff = ya - fAB[i][idx]
        out[:, i] = (diff * diff).sum(axis=1) / (2.0 * n) / var
    return out
