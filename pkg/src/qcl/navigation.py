"""Fidelity-preserving flows on the solution set.

The instantaneous Hessian of the main objective is eigendecomposed at every
RK4 stage point, the chosen direction is projected onto the span of the null
eigenvectors, and the resulting field dw/dzeta = P(w) a(w) is integrated with
classical fourth-order Runge-Kutta.  Because the projector removes every
fidelity-decreasing component, the trajectory stays on the level set up to
integration error.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .control import ControlField
from .landscape import FdConfig, HessianSpectrum, classify_null, eig_sym, fd_hessian
from .models import chain_stencil_cost, hessian_of

__all__ = [
    "FixedVector",
    "NullFollow",
    "SecondaryGradient",
    "Trajectory",
    "TrajectorySample",
    "project",
    "null_direction",
    "navigate",
    "rk4_integrate",
    "write_jsonl",
]


def project(a, spectrum: HessianSpectrum) -> np.ndarray:
    """Remove the components of `a` along the non-null eigenvectors.

    P a = a - sum_{i nonnull} v_i (a . v_i): the orthogonal projection onto
    the span of the null-masked eigenvectors.
    """
    if not spectrum.classified:
        raise ValueError("spectrum has not been classified; call classify_null first")
    a = np.asarray(a, dtype=float)
    if a.shape != (spectrum.size,):
        raise ValueError(f"direction has shape {a.shape}, expected ({spectrum.size},)")
    v_nonnull = spectrum.vectors[~spectrum.null_mask]
    if v_nonnull.size == 0:
        return a.copy()
    return a - v_nonnull.T @ (v_nonnull @ a)


def null_direction(spectrum: HessianSpectrum, previous=None) -> np.ndarray:
    """Unit null eigenvector, sign-aligned with the previous direction.

    Requires a one-dimensional null space (a solution curve); the eigensolver
    emits arbitrary signs, so continuity is restored by flipping whenever the
    dot product with `previous` is negative.
    """
    idx = spectrum.null_indices()
    if idx.size != 1:
        raise ValueError(
            f"null space has dimension {idx.size}; following a single null "
            "eigenvector is only defined on a one-dimensional solution curve"
        )
    v = spectrum.vectors[idx[0]].copy()
    if previous is not None and float(np.dot(v, previous)) < 0.0:
        v = -v
    return v


class FixedVector:
    """Always steer along the same constant vector (before projection)."""

    def __init__(self, a):
        a = np.asarray(a, dtype=float)
        if not np.any(a != 0.0):
            raise ValueError("fixed direction must be non-zero")
        self.a = a

    def direction(self, values, spectrum):
        return self.a

    def secondary_cost(self, values):
        return None


class NullFollow:
    """Follow the instantaneous null eigenvector with sign continuity."""

    def __init__(self, previous=None):
        self.previous = None if previous is None else np.asarray(previous, dtype=float)

    def direction(self, values, spectrum):
        v = null_direction(spectrum, self.previous)
        self.previous = v
        return v

    def secondary_cost(self, values):
        return None


class SecondaryGradient:
    """Descend an auxiliary cost: the steering vector is -grad C."""

    def __init__(self, objective):
        self.objective = objective

    def direction(self, values, spectrum):
        return -self.objective.gradient_of(values)

    def secondary_cost(self, values):
        return float(self.objective.cost_of(values))


@dataclass(frozen=True)
class TrajectorySample:
    zeta: float
    field: ControlField
    infidelity: float
    secondary: float | None


@dataclass(frozen=True, eq=False)
class Trajectory:
    samples: tuple
    hessian_mode: str
    fd_epsilon: float | None
    failed: bool = False
    failure_reason: str | None = None

    def values_matrix(self) -> np.ndarray:
        return np.stack([s.field.values for s in self.samples])

    def infidelities(self) -> np.ndarray:
        return np.array([s.infidelity for s in self.samples])

    def secondary_costs(self) -> np.ndarray:
        return np.array(
            [np.nan if s.secondary is None else s.secondary for s in self.samples]
        )


def rk4_integrate(f, x0, h: float, steps: int, callback=None):
    """Classical RK4 for dx/dz = f(x); returns the list of states x_0..x_N.

    `callback(k, x)` runs after each accepted step and may raise to stop.
    """
    x = np.asarray(x0, dtype=float).copy()
    states = [x.copy()]
    for k in range(steps):
        k1 = f(x)
        k2 = f(x + 0.5 * h * k1)
        k3 = f(x + 0.5 * h * k2)
        k4 = f(x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        states.append(x.copy())
        if callback is not None:
            callback(k, x)
    return states


class _NavigationAbort(Exception):
    pass


def navigate(problem, start: ControlField, provider, h: float, steps: int,
             hessian_mode="exact", *, null_rank: int | None = 2,
             null_tau: float | None = None, abort_ceiling: float = 1e-3,
             entry_threshold: float = 1e-6) -> Trajectory:
    """Integrate the projected flow from a solution of the main objective.

    Parameters
    ----------
    hessian_mode : "exact" for analytic Hessians, or an FdConfig whose epsilon
        sets the finite-difference step; the spectrum is recomputed at every
        RK4 stage point either way.
    null_rank / null_tau : classification rule for the null subspace.  The
        default keeps the two largest-magnitude eigenvalues as non-null, the
        known structure at solutions of both models; a threshold rule on an
        FD Hessian would mistake its O(eps^2) noise floor for structure.
    abort_ceiling : if the main infidelity exceeds this the run stops and the
        trajectory is returned with `failed` set (never silently truncated).
    """
    if h <= 0:
        raise ValueError("step h must be positive")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if isinstance(hessian_mode, FdConfig):
        mode, fd_eps = "fd", hessian_mode.epsilon
    elif hessian_mode == "exact":
        mode, fd_eps = "exact", None
    else:
        raise ValueError(f"unknown hessian_mode {hessian_mode!r}")

    start_inf = problem.infidelity_of(start.values)
    if not start_inf < entry_threshold:
        raise ValueError(
            f"starting infidelity {start_inf:.3e} is not below the entry "
            f"threshold {entry_threshold:.1e}"
        )

    if null_tau is not None:

        def _classify(spec):
            return classify_null(spec, tau_rel=null_tau)
    else:
        rank = 2 if null_rank is None else null_rank

        def _classify(spec):
            return classify_null(spec, rank=rank)

    if mode == "fd":
        config = FdConfig(fd_eps)
        stencil = chain_stencil_cost(problem)

        def spectrum_at(values):
            hess = fd_hessian(problem.infidelity_of, values, config,
                              stencil_cost=stencil)
            return _classify(eig_sym(hess))
    else:

        def spectrum_at(values):
            return _classify(eig_sym(hessian_of(problem, values)))

    def flow(values):
        if not np.all(np.isfinite(values)):
            raise _NavigationAbort("non-finite state")
        spec = spectrum_at(values)
        return project(provider.direction(values, spec), spec)

    samples = [TrajectorySample(
        zeta=0.0,
        field=start,
        infidelity=start_inf,
        secondary=provider.secondary_cost(start.values),
    )]
    values = start.values.copy()
    failed = False
    reason = None
    for k in range(steps):
        try:
            k1 = flow(values)
            k2 = flow(values + 0.5 * h * k1)
            k3 = flow(values + 0.5 * h * k2)
            k4 = flow(values + h * k3)
        except (_NavigationAbort, ValueError) as exc:
            failed, reason = True, str(exc)
            break
        values = values + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(values)):
            failed, reason = True, "non-finite state"
            break
        inf = problem.infidelity_of(values)
        samples.append(TrajectorySample(
            zeta=(k + 1) * h,
            field=ControlField(values, start.total_time),
            infidelity=inf,
            secondary=provider.secondary_cost(values),
        ))
        if not np.isfinite(inf):
            failed, reason = True, "non-finite infidelity"
            break
        if inf > abort_ceiling:
            failed, reason = True, f"infidelity {inf:.3e} exceeded ceiling {abort_ceiling:.1e}"
            break
    return Trajectory(samples=tuple(samples), hessian_mode=mode, fd_epsilon=fd_eps,
                      failed=failed, failure_reason=reason)


def write_jsonl(trajectory: Trajectory, stream, header: dict | None = None):
    """One JSON record per sample: {"zeta", "values", "infidelity", "secondary"}."""
    if header is not None:
        stream.write(json.dumps({"header": header}, sort_keys=True) + "\n")
    for s in trajectory.samples:
        stream.write(json.dumps({
            "zeta": s.zeta,
            "values": s.field.values.tolist(),
            "infidelity": s.infidelity,
            "secondary": s.secondary,
        }) + "\n")
