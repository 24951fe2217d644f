"""Seed generation and local descent to the main-objective solution set.

Plain gradient descent with Armijo backtracking is enough at desk scale:
the landscapes are benign and the exact gradient is cheap, so a first-order
routine with deterministic line search keeps the solution populations
reproducible bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .control import ControlField
from .models import gradient_of, hessian_of

__all__ = ["SeedSpec", "OptimizationReport", "sample_seeds", "minimize", "polish"]

_ARMIJO_SLOPE = 1e-4
_CONTRACTION = 0.5
_GRAD_FLOOR = 1e-10


@dataclass(frozen=True)
class SeedSpec:
    """How many random starting fields to draw, from which amplitude range."""

    count: int
    bounds: tuple
    rng_seed: int

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("count must be >= 1")
        lo, hi = self.bounds
        # lo == hi is tolerated: it degenerates to a constant field
        if lo > hi:
            raise ValueError("bounds must satisfy low <= high")


@dataclass(frozen=True, eq=False)
class OptimizationReport:
    field: ControlField
    final_infidelity: float
    iterations: int
    converged: bool

    def __post_init__(self):
        if self.converged and not np.isfinite(self.final_infidelity):
            raise ValueError("a converged report needs a finite infidelity")


def sample_seeds(spec: SeedSpec, problem) -> list:
    """I.i.d. uniform amplitude vectors; fully determined by spec.rng_seed."""
    rng = np.random.default_rng(spec.rng_seed)
    lo, hi = spec.bounds
    draws = rng.uniform(lo, hi, size=(spec.count, problem.n_pulses))
    return [ControlField(values=row, total_time=problem.duration) for row in draws]


def minimize(problem, seed: ControlField, tol: float = 1e-6,
             max_iter: int = 5000) -> OptimizationReport:
    """Gradient descent with backtracking line search on the main objective.

    Stops when the infidelity drops below `tol`, the gradient norm falls
    under 1e-10, or `max_iter` is reached.  A non-finite cost inside the
    line search ends this report as unconverged instead of raising, so a
    batch of seeds survives individual failures.
    """
    values = seed.values.copy()
    cost = problem.infidelity_of(values)
    if not np.isfinite(cost):
        return OptimizationReport(field=seed, final_infidelity=float(cost),
                                  iterations=0, converged=False)
    step = 1.0
    iterations = 0
    for iterations in range(1, max_iter + 1):
        if cost < tol:
            iterations -= 1
            break
        grad = gradient_of(problem, values)
        slope = float(grad @ grad)
        if np.sqrt(slope) < _GRAD_FLOOR:
            iterations -= 1
            break
        # warm-started backtracking: try twice the last accepted step first
        t = min(step * 2.0, 1e6)
        accepted = False
        while t > 1e-18:
            trial = values - t * grad
            trial_cost = problem.infidelity_of(trial)
            if not np.isfinite(trial_cost):
                return OptimizationReport(
                    field=ControlField(values, seed.total_time),
                    final_infidelity=float(cost), iterations=iterations,
                    converged=False)
            if trial_cost <= cost - _ARMIJO_SLOPE * t * slope:
                values, cost, step = trial, trial_cost, t
                accepted = True
                break
            t *= _CONTRACTION
        if not accepted:
            break
    final = ControlField(values, seed.total_time)
    return OptimizationReport(field=final, final_infidelity=float(cost),
                              iterations=iterations, converged=bool(cost < tol))


def polish(problem, field: ControlField, target: float = 1e-16,
           max_iter: int = 60, rank: int = 2) -> OptimizationReport:
    """Newton refinement of a near-solution, restricted to the non-null subspace.

    Gradient descent alone crawls once the infidelity is tiny (the valley is
    ill conditioned), while the Hessian-rank structure of deep solutions is
    only visible below ~1e-16.  Starting from a `minimize` result, a Newton
    step along the `rank` non-null eigendirections converges quadratically.
    """
    from .landscape import classify_null, eig_sym

    values = field.values.copy()
    cost = problem.infidelity_of(values)
    iterations = 0
    for iterations in range(1, max_iter + 1):
        if cost < target:
            iterations -= 1
            break
        grad = gradient_of(problem, values)
        spec = classify_null(eig_sym(hessian_of(problem, values)), rank=rank)
        nonnull = spec.nonnull_indices()
        basis = spec.vectors[nonnull]
        lam = spec.eigenvalues[nonnull]
        if np.any(lam == 0.0):
            break
        delta = -basis.T @ ((basis @ grad) / lam)
        t = 1.0
        accepted = False
        while t > 1e-8:
            trial = values + t * delta
            trial_cost = problem.infidelity_of(trial)
            if np.isfinite(trial_cost) and trial_cost < cost:
                values, cost = trial, trial_cost
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
    return OptimizationReport(field=ControlField(values, field.total_time),
                              final_infidelity=float(cost), iterations=iterations,
                              converged=bool(cost < target))
