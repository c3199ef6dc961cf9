"""Deterministic scalar and small-matrix utilities.

Closed-form quantities used throughout the library: the binary entropy
function and its inverse on [1/2, 1], the subset-size/tolerance calibration
for the discrepancy solver, Householder rotations onto a coordinate axis,
and the density of the scaled uniform+Gaussian mixture.

All functions are pure and safe to call concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, ndtr

LN2 = math.log(2.0)
SQRT3 = math.sqrt(3.0)

__all__ = [
    "DiscParams",
    "TheoryParams",
    "entropy",
    "solve_beta",
    "theory_params",
    "log_binomial",
    "calibrate_theta",
    "householder_to_axis",
    "mixture_density",
]


@dataclass(frozen=True)
class DiscParams:
    """Calibrated parameters of the k-subset selection problem.

    `a` is the universe multiplier ceil(2*sqrt(m)); `theta` solves
    (2*theta / sqrt(2*pi*k))**m * C(a*k, k) = 1, i.e. it makes the expected
    number of k-subsets of a*k standard-normal-sum columns landing within
    theta of a fixed target approximately one.
    """

    m: int
    k: int
    a: int
    theta: float

    @property
    def universe(self) -> int:
        return self.a * self.k

    def calibration_residual(self) -> float:
        """log of (2*theta/sqrt(2*pi*k))**m * C(a*k, k); zero when calibrated."""
        return self.m * (
            math.log(2.0 * self.theta) - 0.5 * math.log(2.0 * math.pi * self.k)
        ) + log_binomial(self.universe, self.k)


@dataclass(frozen=True)
class TheoryParams:
    """Derived constants for the dual-norm / zero-count statistics.

    delta is the scaled negative-part norm of the right-hand side,
    alpha the objective-rate lower bound, and beta in [1/2, 1] solves
    H(beta) = alpha**2 / 4.
    """

    epsilon: float
    delta: float
    alpha: float
    beta: float

    @property
    def dual_norm_bound(self) -> float:
        e, d = self.epsilon, self.delta
        return (1.0 + e) / (1.0 - 3.0 * e - (1.0 - e) * d)


def entropy(x):
    """Binary entropy -x*ln(x) - (1-x)*ln(1-x) with the 0*ln(0) := 0 convention.

    Accepts a scalar or an array; raises ValueError outside [0, 1].
    """
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError("entropy argument must lie in [0, 1]")
    out = np.zeros_like(arr)
    interior = (arr > 0.0) & (arr < 1.0)
    xi = arr[interior]
    out[interior] = -xi * np.log(xi) - (1.0 - xi) * np.log1p(-xi)
    if np.isscalar(x) or arr.ndim == 0:
        return float(out)
    return out


def solve_beta(alpha: float) -> float:
    """The unique beta in [1/2, 1] with entropy(beta) = alpha**2 / 4.

    Bisection to an interval width of 1e-12; entropy is strictly decreasing
    on [1/2, 1] so the root is unique.  Raises ValueError when alpha**2 / 4
    exceeds ln(2) (no solution) or alpha < 0.
    """
    if alpha < 0.0:
        raise ValueError("alpha must be nonnegative")
    target = alpha * alpha / 4.0
    if target > LN2 * (1.0 + 1e-12):
        raise ValueError("alpha**2/4 exceeds ln(2); no beta in [1/2, 1] exists")
    target = min(target, LN2)
    lo, hi = 0.5, 1.0
    # entropy(lo) = ln 2 >= target >= 0 = entropy(hi)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if entropy(mid) > target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12:
            break
    return 0.5 * (lo + hi)


def theory_params(epsilon: float, delta: float) -> TheoryParams:
    """Build TheoryParams from the slack parameter epsilon and delta.

    Requires epsilon in (0, 1/5) and 0 <= delta < (1-3*epsilon)/(1-epsilon)
    so that alpha is real and the dual-norm bound positive.
    """
    if not 0.0 < epsilon < 0.2:
        raise ValueError("epsilon must lie in (0, 1/5)")
    ratio = (1.0 - 3.0 * epsilon) / (1.0 - epsilon)
    if not 0.0 <= delta < ratio:
        raise ValueError("delta must lie in [0, (1-3*eps)/(1-eps))")
    alpha = math.sqrt(ratio * ratio - delta * delta) / math.sqrt(2.0 * math.pi)
    beta = solve_beta(alpha)
    return TheoryParams(epsilon=epsilon, delta=delta, alpha=alpha, beta=beta)


def log_binomial(n: int, k: int) -> float:
    """ln C(n, k) via log-gamma; avoids overflow for large n."""
    if k < 0 or k > n:
        raise ValueError("binomial coefficient requires 0 <= k <= n")
    return float(gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1))


def calibrate_theta(m: int, k: int) -> DiscParams:
    """Solve the subset-count calibration identity for theta.

    a = ceil(2*sqrt(m)) and theta = (sqrt(2*pi*k)/2) * C(a*k, k)**(-1/m),
    computed in log space.
    """
    if m < 1 or k < 1:
        raise ValueError("m and k must be >= 1")
    a = math.ceil(2.0 * math.sqrt(m))
    log_c = log_binomial(a * k, k)
    theta = math.exp(0.5 * math.log(2.0 * math.pi * k) - LN2 - log_c / m)
    return DiscParams(m=m, k=k, a=a, theta=theta)


def householder_to_axis(u, axis: int = -1) -> np.ndarray:
    """Orthogonal matrix R with R @ u = ||u||_2 * e_axis.

    A single Householder reflection composed with a sign flip of the target
    row, so R is orthogonal but det(R) may be -1.  The construction never
    subtracts nearly-equal vectors, so it is stable for any nonzero u.
    """
    u = np.asarray(u, dtype=float)
    if u.ndim != 1:
        raise ValueError("u must be a vector")
    m = u.shape[0]
    axis = int(axis)
    if axis < 0:
        axis += m
    if not 0 <= axis < m:
        raise ValueError("axis out of range")
    nrm = float(np.linalg.norm(u))
    if nrm == 0.0:
        raise ValueError("cannot rotate the zero vector onto an axis")
    sign = 1.0 if u[axis] >= 0.0 else -1.0
    w = u.copy()
    w[axis] += sign * nrm
    r = np.eye(m) - (2.0 / float(w @ w)) * np.outer(w, w)
    # the reflection sends u to -sign*nrm*e_axis; flip that row to land on +nrm
    r[axis, :] *= -sign
    return r


def mixture_density(eps: float, x):
    """Density at x of sqrt(eps)*U + sqrt(1-eps)*Z.

    U is uniform on [-sqrt(3), sqrt(3)] and Z standard normal, so the mixture
    has mean 0 and variance 1 for every eps in [0, 1].  The endpoints use the
    pure-Gaussian and pure-uniform limits.
    """
    if not 0.0 <= eps <= 1.0:
        raise ValueError("eps must lie in [0, 1]")
    arr = np.asarray(x, dtype=float)
    if eps <= 1e-14:
        out = np.exp(-0.5 * arr * arr) / math.sqrt(2.0 * math.pi)
    elif eps >= 1.0:
        out = np.where(np.abs(arr) <= SQRT3, 1.0 / (2.0 * SQRT3), 0.0)
    else:
        half_width = math.sqrt(3.0 * eps)
        scale = math.sqrt(1.0 - eps)
        out = (
            ndtr((arr + half_width) / scale) - ndtr((arr - half_width) / scale)
        ) / (2.0 * half_width)
    if np.isscalar(x) or arr.ndim == 0:
        return float(out)
    return out
