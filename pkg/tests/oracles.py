"""Independent reference implementations used to freeze expected values.

Everything here is deliberately brute force and shares no code with the
library paths it checks.
"""

from __future__ import annotations

import math
from itertools import combinations

import numpy as np
from scipy.integrate import quad
from scipy.special import ndtr


def _bound_patterns(size: int) -> np.ndarray:
    codes = np.arange(1 << size, dtype=np.int64)
    return ((codes[:, None] >> np.arange(size)) & 1).astype(float)


def lp_vertex_oracle(a, b, c, tol: float = 1e-9):
    """LP over A x <= b, x in [0,1]^n by enumerating every vertex.

    A vertex makes n constraints tight: k rows of A (k <= min(m, n)) plus
    n - k variable bounds.  Candidates for each (rows, free) choice are
    evaluated in one batch.  Returns ("optimal", value, x) or
    ("infeasible", None, None).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    m, n = a.shape
    best_val = None
    best_x = None

    def consider_batch(xs):
        nonlocal best_val, best_x
        ok = (
            np.all(xs >= -tol, axis=1)
            & np.all(xs <= 1.0 + tol, axis=1)
            & np.all(xs @ a.T <= b + tol, axis=1)
        )
        if not np.any(ok):
            return
        vals = xs[ok] @ c
        i = int(np.argmax(vals))
        if best_val is None or vals[i] > best_val:
            best_val = float(vals[i])
            best_x = np.clip(xs[ok][i], 0.0, 1.0)

    patterns_cache = {size: _bound_patterns(size) for size in range(n + 1)}
    for k in range(0, min(m, n) + 1):
        patterns = patterns_cache[n - k]
        for rows in combinations(range(m), k):
            for free in combinations(range(n), k):
                fixed = [j for j in range(n) if j not in free]
                if k == 0:
                    consider_batch(patterns.copy())
                    continue
                sub = a[np.ix_(rows, free)]
                if abs(np.linalg.det(sub)) < 1e-12:
                    continue
                rhs = b[list(rows)][:, None] - a[np.ix_(rows, fixed)] @ patterns.T
                sols = np.linalg.solve(sub, rhs)  # (k, 2^(n-k))
                xs = np.empty((patterns.shape[0], n))
                xs[:, fixed] = patterns
                xs[:, list(free)] = sols.T
                consider_batch(xs)
    if best_val is None:
        return "infeasible", None, None
    return "optimal", best_val, best_x


def count_subsets_exhaustive(weights, capacity) -> int:
    """2^n scan; n <= 20 or so."""
    w = np.asarray(weights, dtype=float)
    n = w.size
    count = 0
    for code in range(1 << n):
        total = 0.0
        for i in range(n):
            if (code >> i) & 1:
                total += w[i]
        if total <= capacity + 1e-12 * n:
            count += 1
    return count


def count_disc_successes(columns, target, theta, k) -> int:
    """Number of k-subsets of the columns within theta of the target."""
    cols = np.asarray(columns, dtype=float)
    target = np.asarray(target, dtype=float)
    hits = 0
    for subset in combinations(range(cols.shape[1]), k):
        dev = np.abs(cols[:, subset].sum(axis=1) - target).max()
        if dev <= theta:
            hits += 1
    return hits


def band_y_cdf(omega: float, nu: float):
    """CDF of N(0, 1/(1+omega^2)) + uniform(0, nu*omega/(1+omega^2)).

    Closed form via the antiderivative of the normal CDF; degenerates to the
    pure normal when omega = 0.
    """
    s2 = 1.0 + omega * omega
    sigma = math.sqrt(1.0 / s2)
    width = nu * omega / s2

    def g(z):
        return z * ndtr(z) + np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)

    def cdf(y):
        y = np.asarray(y, dtype=float)
        if width < 1e-14:
            return ndtr(y / sigma)
        return (g(y / sigma) - g((y - width) / sigma)) * sigma / width

    return cdf


def band_y_cdf_quadrature(omega: float, nu: float):
    """Same CDF by direct numerical integration, for cross-checking."""
    s2 = 1.0 + omega * omega
    sigma = math.sqrt(1.0 / s2)
    width = nu * omega / s2

    def cdf(y):
        if width < 1e-14:
            return float(ndtr(y / sigma))
        val, _ = quad(lambda t: ndtr((y - t) / sigma) / width, 0.0, width)
        return val

    return cdf


# high-precision frozen values (50-digit decimal evaluation)
ENTROPY_0_998 = 0.014427214862176115
ALPHA_EPS_19_DELTA = 0.2820011622124830   # eps = 1/9, delta = sqrt(2*pi)/10
BETA_FOR_ALPHA_EPS_19 = 0.9970930563138169
