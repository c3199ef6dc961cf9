"""Bounded-variable primal simplex for max c @ x, A @ x <= b, x in [0,1]^n.

The solver works on the equality system A x + s = b with structural
variables boxed in [lb, ub] (default [0, 1]) and slacks in [0, inf).  The
basis is an m x m submatrix, refactorized every pivot; with m <= ~10 and n
up to a few thousand this is cheap and numerically clean.  Pricing uses the
largest-reduced-cost rule and falls back to Bland's rule permanently after a
run of degenerate pivots, which guarantees termination.

Returned solutions carry the optimal basic primal point, the dual vector,
reduced costs, and the support partition (variables at 0, at 1, fractional).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .instance import Instance
from .rng import RngHandle, conditioned_column

__all__ = [
    "LpSolution",
    "GapBreakdown",
    "InfeasibleError",
    "IterationLimitError",
    "solve_lp",
    "solve_box_lp",
    "dual_value",
    "gap_formula",
    "resample_zero_column",
]

RC_TOL = 1e-9          # reduced-cost optimality tolerance
FEAS_TOL = 1e-9        # bound violation tolerance for basic values
PIV_TOL = 1e-11        # entries below this never pivot
CLASSIFY_TOL = 1e-9    # distance to {0,1} for the support partition
STALL_LIMIT = 100      # degenerate pivots before switching to Bland's rule

_AT_LOWER, _AT_UPPER, _BASIC = 0, 1, 2


class InfeasibleError(Exception):
    """The LP has no feasible point.

    Carries a Farkas certificate: u >= 0 whose aggregated row u @ A cannot
    stay below u @ b anywhere in the box.
    """

    def __init__(self, message: str, farkas_u: np.ndarray | None = None):
        super().__init__(message)
        self.farkas_u = farkas_u


class IterationLimitError(Exception):
    """Pivot budget exhausted before reaching optimality."""


@dataclass(frozen=True)
class GapBreakdown:
    """Primal-dual gap split into slack and cost contributions.

    total is slack_term + cost_term exactly as computed and agrees with
    dual_value(u) - c @ x up to roundoff.
    """

    slack_term: float
    cost_term: float
    total: float


@dataclass(frozen=True, eq=False)
class LpSolution:
    """Optimal basic solution with duals and support partition.

    `basis` lists basic column indices in the combined numbering
    (structural 0..n-1, slacks n..n+m-1); `at_upper` lists nonbasic columns
    sitting at their upper bound.  Both together allow warm starts.
    The partition n0/n1/s is recomputed from x_star with tolerance 1e-9.
    """

    x_star: np.ndarray
    value: float
    u_star: np.ndarray
    reduced_costs: np.ndarray
    basis: tuple[int, ...]
    at_upper: frozenset[int]
    n0: np.ndarray
    n1: np.ndarray
    s: np.ndarray
    pivots: int


class _Simplex:
    """One bounded-variable run on max gamma @ x, mat x = rhs, low <= x <= upp."""

    def __init__(self, mat, rhs, gamma, lower, upper, basis, status, max_pivots):
        self.mat = mat
        self.rhs = rhs
        self.gamma = gamma
        self.lower = lower
        self.upper = upper
        self.basis = list(basis)
        self.status = status
        self.max_pivots = max(int(max_pivots), 1)
        self.free = (upper - lower) > PIV_TOL
        self.pivots = 0
        self.bland = False
        self.stall = 0

    def _nonbasic_point(self):
        x_n = np.where(self.status == _AT_UPPER, self.upper, self.lower)
        x_n[self.basis] = 0.0
        return x_n

    def run(self):
        while True:
            bmat = self.mat[:, self.basis]
            x_n = self._nonbasic_point()
            try:
                xb = np.linalg.solve(bmat, self.rhs - self.mat @ x_n)
                y = np.linalg.solve(bmat.T, self.gamma[self.basis])
            except np.linalg.LinAlgError:
                raise ArithmeticError("simplex basis became singular") from None
            d = self.gamma - self.mat.T @ y
            up = (self.status == _AT_LOWER) & self.free & (d > RC_TOL)
            dn = (self.status == _AT_UPPER) & self.free & (d < -RC_TOL)
            eligible = np.flatnonzero(up | dn)
            if eligible.size == 0:
                x_full = x_n
                x_full[self.basis] = xb
                return x_full, y
            if self.bland:
                e = int(eligible[0])
            else:
                e = int(eligible[np.argmax(np.abs(d[eligible]))])
            self._pivot(bmat, xb, e, 1.0 if up[e] else -1.0)
            self.pivots += 1
            if self.pivots >= self.max_pivots:
                raise IterationLimitError(
                    f"pivot budget of {self.max_pivots} exhausted"
                )

    def _pivot(self, bmat, xb, e, direction):
        w = np.linalg.solve(bmat, self.mat[:, e])
        delta = direction * w  # basic values move by -t * delta for step t
        lo_b = self.lower[self.basis]
        up_b = self.upper[self.basis]
        t_cand = np.full(delta.shape, np.inf)
        shrink = delta > PIV_TOL
        grow = delta < -PIV_TOL
        t_cand[shrink] = (xb[shrink] - lo_b[shrink]) / delta[shrink]
        t_cand[grow] = (up_b[grow] - xb[grow]) / (-delta[grow])
        t_cand = np.maximum(t_cand, 0.0)
        t_min = float(t_cand.min())
        t_bound = self.upper[e] - self.lower[e]
        if not np.isfinite(min(t_bound, t_min)):
            raise ArithmeticError("unbounded improving direction in a box LP")
        if t_bound <= t_min:
            # bound flip: the entering variable crosses its box, basis unchanged
            self.status[e] = _AT_UPPER if direction > 0 else _AT_LOWER
            step = t_bound
        else:
            ties = np.flatnonzero(t_cand <= t_min + FEAS_TOL)
            if self.bland:
                pos = int(ties[np.argmin(np.asarray(self.basis)[ties])])
            else:
                pos = int(ties[np.argmax(np.abs(delta[ties]))])
            leave = self.basis[pos]
            self.status[leave] = _AT_LOWER if delta[pos] > 0 else _AT_UPPER
            self.basis[pos] = e
            self.status[e] = _BASIC
            step = t_min
        if step <= 1e-12:
            self.stall += 1
            if self.stall >= STALL_LIMIT:
                self.bland = True
        else:
            self.stall = 0


@dataclass(frozen=True, eq=False)
class _BoxResult:
    x: np.ndarray
    value: float
    y: np.ndarray
    basis: tuple[int, ...]
    at_upper: frozenset[int]
    pivots: int


def _box_min(weights: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> float:
    return float(np.sum(np.minimum(weights * lower, weights * upper)))


def _warm_state(mat, rhs, low, upp, warm):
    """Status/basis arrays from a previous solve, or None if unusable."""
    warm_basis, warm_upper = warm
    total = mat.shape[1]
    m = mat.shape[0]
    if len(warm_basis) != m or len(set(warm_basis)) != m:
        return None
    if not all(0 <= j < total for j in warm_basis):
        return None
    status = np.full(total, _AT_LOWER, dtype=np.int8)
    for j in warm_upper:
        if 0 <= j < total and np.isfinite(upp[j]):
            status[j] = _AT_UPPER
    for j in warm_basis:
        status[j] = _BASIC
    x_n = np.where(status == _AT_UPPER, upp, low)
    x_n[list(warm_basis)] = 0.0
    try:
        xb = np.linalg.solve(mat[:, list(warm_basis)], rhs - mat @ x_n)
    except np.linalg.LinAlgError:
        return None
    idx = list(warm_basis)
    if np.any(xb < low[idx] - FEAS_TOL) or np.any(xb > upp[idx] + FEAS_TOL):
        return None
    return list(warm_basis), status


def solve_box_lp(
    a: np.ndarray,
    b: np.ndarray,
    c: np.ndarray,
    lower: np.ndarray | None = None,
    upper: np.ndarray | None = None,
    *,
    warm: tuple[tuple[int, ...], frozenset[int]] | None = None,
    max_pivots: int | None = None,
) -> _BoxResult:
    """Maximize c @ x over A x <= b, lower <= x <= upper (defaults [0,1]^n).

    `warm` is a (basis, at_upper) pair from a previous solve of the same
    matrix under different bounds; an unusable warm basis silently falls back
    to a cold start, so correctness never depends on it.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    m, n = a.shape
    lower = np.zeros(n) if lower is None else np.asarray(lower, dtype=float)
    upper = np.ones(n) if upper is None else np.asarray(upper, dtype=float)
    if np.any(lower > upper + 1e-15):
        raise ValueError("lower bound exceeds upper bound")
    if max_pivots is None:
        max_pivots = 50 * (n + m)

    total = n + m
    mat = np.hstack([a, np.eye(m)])
    low = np.concatenate([lower, np.zeros(m)])
    upp = np.concatenate([upper, np.full(m, np.inf)])
    gamma = np.concatenate([c, np.zeros(m)])

    state = _warm_state(mat, b, low, upp, warm) if warm is not None else None
    pivots_used = 0

    if state is None:
        status = np.full(total, _AT_LOWER, dtype=np.int8)
        basis = list(range(n, total))
        for j in basis:
            status[j] = _BASIC
        bad = np.flatnonzero(b - a @ lower < -FEAS_TOL)
        if bad.size:
            mat, low, upp, gamma, basis, status, pivots_used = _phase_one(
                mat, b, low, upp, gamma, basis, status, bad, max_pivots, lower, upper
            )
    else:
        basis, status = state

    core = _Simplex(mat, b, gamma, low, upp, basis, status,
                    max_pivots - pivots_used)
    x_full, y = core.run()
    pivots_used += core.pivots

    x = np.clip(x_full[:n], lower, upper)
    at_upper = frozenset(int(j) for j in np.flatnonzero(core.status == _AT_UPPER))
    return _BoxResult(
        x=x,
        value=float(c @ x),
        y=y,
        basis=tuple(int(j) for j in core.basis),
        at_upper=at_upper,
        pivots=pivots_used,
    )


def _phase_one(mat, rhs, low, upp, gamma, basis, status, bad_rows, max_pivots,
               lower, upper):
    """Drive artificials for the infeasible rows to zero or certify
    infeasibility; returns the extended system ready for phase 2."""
    m, total = mat.shape
    n_art = bad_rows.size
    art_cols = np.zeros((m, n_art))
    for idx, j in enumerate(bad_rows):
        art_cols[j, idx] = -1.0
    mat1 = np.hstack([mat, art_cols])
    low1 = np.concatenate([low, np.zeros(n_art)])
    upp1 = np.concatenate([upp, np.full(n_art, np.inf)])
    gamma1 = np.concatenate([np.zeros(total), -np.ones(n_art)])
    status1 = np.concatenate([status, np.full(n_art, _AT_LOWER, dtype=np.int8)])
    basis1 = list(basis)
    for idx, j in enumerate(bad_rows):
        pos = basis1.index(total - m + j)  # slack of row j starts basic
        basis1[pos] = total + idx
        status1[total - m + j] = _AT_LOWER
        status1[total + idx] = _BASIC

    core = _Simplex(mat1, rhs, gamma1, low1, upp1, basis1, status1, max_pivots)
    x_full, y = core.run()
    residual = float(np.sum(x_full[total:]))
    if residual > 1e-7:
        u = np.maximum(y, 0.0)
        margin = _box_min(mat[:, : total - m].T @ u, lower, upper) - float(rhs @ u)
        raise InfeasibleError(
            f"LP infeasible: aggregated row violates the box by {margin:.3e}",
            farkas_u=u,
        )

    # pin the artificials at zero; a degenerate basic artificial stays
    # harmlessly fixed and never re-enters
    upp1[total:] = 0.0
    gamma2 = np.concatenate([gamma, np.zeros(n_art)])
    return mat1, low1, upp1, gamma2, list(core.basis), core.status, core.pivots


def _check_optimum(instance, x, u, value):
    a, b, c = instance.A, instance.b, instance.c
    if np.any(a @ x > b + 1e-7):
        raise ArithmeticError("optimal point violates A x <= b beyond tolerance")
    dv = dual_value(u, instance)
    if abs(value - dv) > 1e-7 * (1.0 + abs(value)):
        raise ArithmeticError(
            f"strong duality violated: primal {value!r} vs dual {dv!r}"
        )
    r = c - a.T @ u
    if np.any(x * np.maximum(-r, 0.0) > 1e-7) or np.any(
        (1.0 - x) * np.maximum(r, 0.0) > 1e-7
    ):
        raise ArithmeticError("complementary slackness violated on variables")
    if np.any(u * (b - a @ x) > 1e-7):
        raise ArithmeticError("complementary slackness violated on rows")


def solve_lp(
    instance: Instance,
    *,
    warm: tuple[tuple[int, ...], frozenset[int]] | None = None,
    max_pivots: int | None = None,
) -> LpSolution:
    """Optimal basic solution of the box relaxation of `instance`.

    Raises InfeasibleError (with a Farkas certificate) when no x in [0,1]^n
    satisfies A x <= b, and IterationLimitError past the pivot budget.
    """
    res = solve_box_lp(
        instance.A, instance.b, instance.c, warm=warm, max_pivots=max_pivots
    )
    y = res.y
    if np.any(y < -1e-7):
        raise ArithmeticError("negative dual beyond roundoff tolerance")
    u = np.where(y > 0.0, y, 0.0)
    x = res.x
    value = float(instance.c @ x)
    _check_optimum(instance, x, u, value)
    n0 = np.flatnonzero(x <= CLASSIFY_TOL)
    n1 = np.flatnonzero(x >= 1.0 - CLASSIFY_TOL)
    frac = np.flatnonzero((x > CLASSIFY_TOL) & (x < 1.0 - CLASSIFY_TOL))
    if frac.size > instance.m:
        raise ArithmeticError("more fractional coordinates than constraints")
    return LpSolution(
        x_star=x,
        value=value,
        u_star=u,
        reduced_costs=instance.c - instance.A.T @ u,
        basis=res.basis,
        at_upper=res.at_upper,
        n0=n0,
        n1=n1,
        s=frac,
        pivots=res.pivots,
    )


def dual_value(u, instance: Instance) -> float:
    """b @ u plus the summed positive part of c - A' u, the dual objective."""
    u = np.asarray(u, dtype=float)
    if np.any(u < 0.0):
        raise ValueError("dual vector must be nonnegative")
    r = instance.c - instance.A.T @ u
    return float(instance.b @ u + np.sum(np.maximum(r, 0.0)))


def gap_formula(x, u, instance: Instance) -> GapBreakdown:
    """Primal-dual gap of (x, u), split into slack and cost terms.

    Evaluates both the defining expression dual_value(u) - c @ x and its
    expansion (b - A x) @ u + sum_i [x_i (A'u - c)_i^+ + (1 - x_i)(c - A'u)_i^+]
    and cross-checks that they agree to 1e-9 * (1 + |total|).
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if np.any(x < -1e-12) or np.any(x > 1.0 + 1e-12):
        raise ValueError("x must lie in [0, 1]^n")
    if np.any(u < 0.0):
        raise ValueError("u must be nonnegative")
    a, b, c = instance.A, instance.b, instance.c
    r = c - a.T @ u
    slack_term = float((b - a @ x) @ u)
    cost_term = float(
        np.sum(x * np.maximum(-r, 0.0) + (1.0 - x) * np.maximum(r, 0.0))
    )
    total = slack_term + cost_term
    definition = dual_value(u, instance) - float(c @ x)
    if abs(definition - total) > 1e-9 * (1.0 + abs(total)):
        raise ArithmeticError(f"gap formula mismatch: {definition!r} vs {total!r}")
    return GapBreakdown(slack_term=slack_term, cost_term=cost_term, total=total)


def resample_zero_column(
    instance: Instance, lp_solution: LpSolution, i: int, rng: RngHandle
) -> Instance:
    """Copy of the instance with column i redrawn from the conditional law.

    i must be at zero in the given solution; the fresh (c_i, A[:, i]) is a
    standard normal vector conditioned on a nonpositive reduced cost under
    the solution's dual vector.
    """
    if int(i) not in set(int(j) for j in lp_solution.n0):
        raise ValueError(f"column {i} is not at zero in the given solution")
    c_i, a_col = conditioned_column(lp_solution.u_star, rng)
    return instance.with_column(int(i), c_i, a_col)
