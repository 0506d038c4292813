"""Independent reference implementations used only by the tests."""
import itertools

import numpy as np


def simplex_sort_oracle(z, s):
    """Sort-and-threshold projection onto {x >= 0, sum x = s}."""
    z = np.asarray(z, dtype=float)
    u = np.sort(z)[::-1]
    css = np.cumsum(u)
    k = np.arange(1, z.size + 1)
    cond = u - (css - s) / k > 0
    r = k[cond][-1]
    theta = (css[r - 1] - s) / r
    return np.maximum(z - theta, 0.0)


def hinge_ball_qp_oracle(z, r):
    """Nearest point of {x : sum max(0, x) <= r} by enumerating KKT
    active sets: each coordinate is free-negative, pinned at zero, or
    shifted by the common multiplier."""
    z = np.asarray(z, dtype=float)
    best, best_d = None, np.inf
    if np.sum(np.maximum(z, 0)) <= r:
        return z.copy()
    for labels in itertools.product((0, 1, 2), repeat=z.size):
        labels = np.array(labels)
        S = labels == 2
        x = np.where(labels == 0, z, 0.0)
        if np.any(S):
            mu = (np.sum(z[S]) - r) / np.count_nonzero(S)
            x[S] = z[S] - mu
        if np.sum(np.maximum(x, 0)) > r + 1e-12:
            continue
        d = np.linalg.norm(x - z)
        if d < best_d:
            best, best_d = x, d
    return best


def power_norm(apply, adjoint, n, iters=500, seed=0):
    """Largest eigenvalue of adjoint(apply(.)) by power iteration."""
    x = np.random.default_rng(seed).standard_normal(n)
    lam = 0.0
    for _ in range(iters):
        y = adjoint(apply(x))
        lam = np.linalg.norm(y)
        x = y / lam
    return lam


def box_closed_form(g, heff, m_n, lower, upper):
    """Minimizer of g.dm + dm.Heff.dm / 2 over the box, cellwise."""
    return np.clip(m_n - g / heff, lower, upper) - m_n
