"""Subset selection against an infinity-norm target.

Given ak columns in R^m, a target D, and a tolerance theta, find a k-subset
K with || sum_{j in K} Y_j - D ||_inf <= theta.  Small universes are solved
exactly by enumeration; larger ones by a randomized swap local search whose
quality is bounded by the exact oracle on small instances.  A Monte Carlo
driver estimates the success probability of the whole selection problem
under Gaussian or uniform+Gaussian-mixture column laws.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations, islice

import numpy as np

from .numerics import calibrate_theta
from .rng import RngHandle, mixture_sample

__all__ = [
    "DiscInstance",
    "DiscOutcome",
    "ExactBudgetError",
    "EXACT_ENUM_BUDGET",
    "exact_enum_size",
    "disc_exact",
    "disc_search",
    "disc_success_mc",
    "draw_columns",
]

EXACT_ENUM_BUDGET = 2_000_000
SIDEWAYS_PROB = 0.1   # chance of taking the best swap when it does not improve
_ENUM_CHUNK = 32768


class ExactBudgetError(ValueError):
    """Exact enumeration refused: too many k-subsets."""


@dataclass(frozen=True, eq=False)
class DiscInstance:
    """Columns (one per matrix column), target vector, tolerance, subset size."""

    columns: np.ndarray  # shape (m, count)
    target: np.ndarray   # shape (m,)
    theta: float
    k: int

    def __post_init__(self):
        if self.columns.ndim != 2:
            raise ValueError("columns must be an (m, count) matrix")
        if self.target.shape != (self.columns.shape[0],):
            raise ValueError("target dimension does not match the columns")
        if self.theta <= 0.0:
            raise ValueError("theta must be positive")
        if not 1 <= self.k <= self.columns.shape[1]:
            raise ValueError("k must lie in [1, number of columns]")

    @property
    def count(self) -> int:
        return self.columns.shape[1]


@dataclass(frozen=True)
class DiscOutcome:
    """Best subset examined; `found` means its deviation is within theta."""

    found: bool
    subset: tuple[int, ...]
    deviation: float
    evaluations: int


def exact_enum_size(count: int, k: int) -> int:
    return math.comb(count, k)


def disc_exact(instance: DiscInstance) -> DiscOutcome:
    """Enumerate every k-subset and return the minimum-deviation one.

    Refuses instances with more than EXACT_ENUM_BUDGET subsets.
    """
    total = exact_enum_size(instance.count, instance.k)
    if total > EXACT_ENUM_BUDGET:
        raise ExactBudgetError(
            f"{total} subsets exceed the exact budget of {EXACT_ENUM_BUDGET}"
        )
    cols = instance.columns
    target = instance.target
    best_dev = np.inf
    best_subset: tuple[int, ...] = ()
    evaluations = 0
    gen = combinations(range(instance.count), instance.k)
    while True:
        chunk = list(islice(gen, _ENUM_CHUNK))
        if not chunk:
            break
        idx = np.array(chunk)
        sums = cols[:, idx].sum(axis=2)  # (m, chunk)
        dev = np.abs(sums - target[:, None]).max(axis=0)
        evaluations += len(chunk)
        j = int(np.argmin(dev))
        if dev[j] < best_dev:
            best_dev = float(dev[j])
            best_subset = tuple(chunk[j])
    return DiscOutcome(
        found=best_dev <= instance.theta,
        subset=best_subset,
        deviation=best_dev,
        evaluations=evaluations,
    )


def _deviation(cols, subset_sum, target):
    return float(np.abs(subset_sum - target).max())


def disc_search(
    instance: DiscInstance,
    rng: RngHandle,
    restarts: int = 50,
    moves_per_restart: int | None = None,
) -> DiscOutcome:
    """Randomized swap local search on the infinity-norm objective.

    Each restart starts from a uniform random k-subset and repeatedly applies
    the best (in, out) swap; a non-improving best swap is still taken with
    probability SIDEWAYS_PROB to escape plateaus.  A restart stops after 3k
    moves without improvement.  found=False is a legal outcome and does not
    prove nonexistence.
    """
    cols = instance.columns
    target = instance.target
    m, count = cols.shape
    k = instance.k
    if moves_per_restart is None:
        moves_per_restart = 30 * k
    gen = rng.gen

    best_dev = np.inf
    best_subset: tuple[int, ...] = ()
    evaluations = 0

    for _ in range(max(restarts, 1)):
        members = np.zeros(count, dtype=bool)
        members[gen.choice(count, size=k, replace=False)] = True
        current = cols[:, members].sum(axis=1)
        cur_dev = _deviation(cols, current, target)
        evaluations += 1
        if cur_dev < best_dev:
            best_dev = cur_dev
            best_subset = tuple(int(i) for i in np.flatnonzero(members))
        if best_dev <= instance.theta:
            break
        restart_best = cur_dev
        stagnation = 0
        for _ in range(moves_per_restart):
            ins = np.flatnonzero(members)
            outs = np.flatnonzero(~members)
            if outs.size == 0:
                break
            # candidate sums for every swap: current - col_out + col_in
            cand = (
                current[:, None, None]
                - cols[:, ins, None]
                + cols[:, None, outs]
            )
            dev = np.abs(cand - target[:, None, None]).max(axis=0)
            evaluations += dev.size
            flat = int(np.argmin(dev))
            i_pos, j_pos = np.unravel_index(flat, dev.shape)
            new_dev = float(dev[i_pos, j_pos])
            take = new_dev < cur_dev - 1e-15
            if not take and gen.random() < SIDEWAYS_PROB:
                take = True
            if take:
                i_out = int(ins[i_pos])
                j_in = int(outs[j_pos])
                members[i_out] = False
                members[j_in] = True
                current = current - cols[:, i_out] + cols[:, j_in]
                cur_dev = new_dev
            if cur_dev < best_dev:
                best_dev = cur_dev
                best_subset = tuple(int(i) for i in np.flatnonzero(members))
            if best_dev <= instance.theta:
                break
            if cur_dev < restart_best - 1e-15:
                restart_best = cur_dev
                stagnation = 0
            else:
                stagnation += 1
                if stagnation >= 3 * k:
                    break
        if best_dev <= instance.theta:
            break
    return DiscOutcome(
        found=best_dev <= instance.theta,
        subset=best_subset,
        deviation=best_dev,
        evaluations=evaluations,
    )


def draw_columns(m: int, count: int, column_law: str, rng: RngHandle) -> np.ndarray:
    """(m, count) matrix with i.i.d. entries from `column_law`.

    Laws: ``gaussian`` or ``mixture:<eps>`` (the scaled uniform+normal mix).
    """
    if column_law == "gaussian":
        return rng.gen.standard_normal((m, count))
    if column_law.startswith("mixture:"):
        eps = float(column_law.split(":", 1)[1])
        return mixture_sample(eps, rng, size=(m, count))
    raise ValueError(f"unknown column law: {column_law!r}")


def disc_success_mc(
    m: int,
    k: int,
    column_law: str,
    target,
    trials: int,
    rng: RngHandle,
    *,
    search_restarts: int = 100,
) -> tuple[float, float]:
    """Monte Carlo estimate of the k-subset success probability.

    theta and the universe size come from calibrate_theta(m, k).  Each trial
    draws a*k fresh columns and asks whether some k-subset lands within theta
    of the target; the exact oracle decides when the enumeration budget
    permits, otherwise the local search provides a lower bound on the rate.
    Returns (rate, binomial standard error).
    """
    if trials < 100:
        raise ValueError("trials must be >= 100")
    params = calibrate_theta(m, k)
    target = np.asarray(target, dtype=float)
    successes = 0
    use_exact = exact_enum_size(params.universe, k) <= EXACT_ENUM_BUDGET
    for trial in range(trials):
        handle = rng.derive(trial)
        cols = draw_columns(m, params.universe, column_law, handle)
        inst = DiscInstance(columns=cols, target=target, theta=params.theta, k=k)
        if use_exact:
            out = disc_exact(inst)
        else:
            out = disc_search(inst, handle.derive(1), restarts=search_restarts)
        successes += bool(out.found)
    rate = successes / trials
    stderr = math.sqrt(max(rate * (1.0 - rate), 1e-12) / trials)
    return rate, stderr
