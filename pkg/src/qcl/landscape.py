"""Finite-difference Hessians, their spectra, and the step-size calibration.

The four-point central stencil

    H_ij ~ [I(w + e(ei+ej)) - I(w + e(ei-ej)) - I(w - e(ei-ej)) + I(w - e(ei+ej))] / (4 e^2)

needs only cost evaluations, so navigation can run on problems whose exact
second derivatives are out of reach.  Symmetry halves the work; the diagonal
reduces to the three distinct points w, w +- 2e ei.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "FdConfig",
    "HessianSpectrum",
    "fd_hessian",
    "eig_sym",
    "classify_null",
    "eigvec_error",
    "calibrate_epsilon",
]


@dataclass(frozen=True)
class FdConfig:
    """Step size for the finite-difference stencil, in control-amplitude units."""

    epsilon: float

    def __post_init__(self):
        if not (self.epsilon > 0 and np.isfinite(self.epsilon)):
            raise ValueError("epsilon must be positive and finite")


@dataclass(frozen=True, eq=False)
class HessianSpectrum:
    """Eigenvalues sorted by descending magnitude, eigenvectors as rows.

    `null_mask` is None until `classify_null` fills it; True marks indices
    whose eigenvalue counts as zero.
    """

    eigenvalues: np.ndarray
    vectors: np.ndarray
    null_mask: np.ndarray | None = None

    @property
    def size(self) -> int:
        return self.eigenvalues.size

    @property
    def classified(self) -> bool:
        return self.null_mask is not None

    def null_indices(self) -> np.ndarray:
        if self.null_mask is None:
            raise ValueError("spectrum has not been classified")
        return np.flatnonzero(self.null_mask)

    def nonnull_indices(self) -> np.ndarray:
        if self.null_mask is None:
            raise ValueError("spectrum has not been classified")
        return np.flatnonzero(~self.null_mask)


def _stencil_points(point, eps):
    """All distinct stencil points for the upper triangle, plus index maps."""
    m = point.size
    pts = [point]
    diag_plus = np.empty(m, dtype=int)
    diag_minus = np.empty(m, dtype=int)
    for i in range(m):
        e = np.zeros(m)
        e[i] = 2.0 * eps
        diag_plus[i] = len(pts)
        pts.append(point + e)
        diag_minus[i] = len(pts)
        pts.append(point - e)
    off = {}
    for i in range(m):
        for j in range(i + 1, m):
            ei = np.zeros(m)
            ej = np.zeros(m)
            ei[i] = eps
            ej[j] = eps
            base = len(pts)
            pts.extend([point + ei + ej, point + ei - ej, point - ei + ej, point - ei - ej])
            off[(i, j)] = base
    return np.asarray(pts), diag_plus, diag_minus, off


def fd_hessian(cost, point, config: FdConfig, batch_cost=None, stencil_cost=None) -> np.ndarray:
    """Symmetric finite-difference Hessian of a scalar cost at `point`.

    Parameters
    ----------
    cost : callable mapping a 1-D amplitude vector to a float.
    point : 1-D array, expansion point.
    config : FdConfig with the step epsilon.
    batch_cost : optional callable mapping an (n, M) array of points to (n,)
        costs; used instead of `cost` to evaluate the whole stencil at once.
    stencil_cost : optional structured evaluator (see
        `models.chain_stencil_cost`) for costs at one- and two-coordinate
        perturbations; fastest, same stencil values.
    """
    point = np.asarray(point, dtype=float)
    eps = config.epsilon
    m = point.size
    inv = 1.0 / (4.0 * eps * eps)
    h = np.empty((m, m))

    if stencil_cost is not None:
        s_idx = np.repeat(np.arange(m), 2)
        s_val = np.empty(2 * m)
        s_val[0::2] = point + 2.0 * eps
        s_val[1::2] = point - 2.0 * eps
        iu, ju = np.triu_indices(m, k=1)
        p_i = np.repeat(iu, 4)
        p_j = np.repeat(ju, 4)
        signs = np.tile(np.array([[1, 1], [1, -1], [-1, 1], [-1, -1]], dtype=float),
                        (iu.size, 1))
        p_vi = point[p_i] + eps * signs[:, 0]
        p_vj = point[p_j] + eps * signs[:, 1]
        center, singles, pairs = stencil_cost(point, s_idx, s_val, p_i, p_vi, p_j, p_vj)
        if not (np.isfinite(center) and np.all(np.isfinite(singles))
                and np.all(np.isfinite(pairs))):
            raise ValueError("non-finite cost at a stencil point")
        diag = (singles[0::2] - 2.0 * center + singles[1::2]) * inv
        h[np.diag_indices(m)] = diag
        quads = pairs.reshape(-1, 4)
        hoff = (quads[:, 0] - quads[:, 1] - quads[:, 2] + quads[:, 3]) * inv
        h[iu, ju] = hoff
        h[ju, iu] = hoff
        return 0.5 * (h + h.T)

    pts, diag_plus, diag_minus, off = _stencil_points(point, eps)
    if batch_cost is not None:
        vals = np.asarray(batch_cost(pts), dtype=float)
    else:
        vals = np.array([cost(p) for p in pts], dtype=float)
    if not np.all(np.isfinite(vals)):
        raise ValueError("non-finite cost at a stencil point")
    center = vals[0]
    for i in range(m):
        h[i, i] = (vals[diag_plus[i]] - 2.0 * center + vals[diag_minus[i]]) * inv
    for (i, j), base in off.items():
        hij = (vals[base] - vals[base + 1] - vals[base + 2] + vals[base + 3]) * inv
        h[i, j] = hij
        h[j, i] = hij
    return 0.5 * (h + h.T)


def eig_sym(matrix) -> HessianSpectrum:
    """Eigendecomposition of a symmetric matrix, sorted by descending |eigenvalue|.

    Backed by LAPACK through numpy; the returned basis is orthonormal to
    machine precision and the reconstruction residual is far below the
    1e-12 * ||A|| off-diagonal target of an explicit Jacobi sweep.
    """
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("expected a square matrix")
    defect = np.abs(a - a.T).max() if a.size else 0.0
    if defect > 1e-8 * max(1.0, np.abs(a).max()):
        raise ValueError(f"matrix is not symmetric (defect {defect:.2e})")
    sym = 0.5 * (a + a.T)
    try:
        vals, vecs = np.linalg.eigh(sym)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError("eigendecomposition did not converge") from exc
    order = np.argsort(-np.abs(vals), kind="stable")
    return HessianSpectrum(eigenvalues=vals[order], vectors=vecs.T[order])


def classify_null(spectrum: HessianSpectrum, *, tau_rel: float | None = None,
                  rank: int | None = None) -> HessianSpectrum:
    """Split the spectrum into null and non-null indices.

    Threshold mode (default, tau_rel = 1e-6): index i is non-null iff
    |lambda_i| > tau_rel * |lambda_max|.  Rank mode: exactly the `rank`
    largest-magnitude indices are non-null, which encodes the known
    two-directions-of-decreasing-fidelity structure of both models.
    """
    if tau_rel is not None and rank is not None:
        raise ValueError("give either tau_rel or rank, not both")
    m = spectrum.size
    if rank is not None:
        if rank > m:
            raise ValueError(f"rank {rank} exceeds dimension {m}")
        mask = np.ones(m, dtype=bool)
        mask[:rank] = False  # eigenvalues are sorted by descending magnitude
    else:
        tau = 1e-6 if tau_rel is None else float(tau_rel)
        lam_max = np.abs(spectrum.eigenvalues).max() if m else 0.0
        mask = ~(np.abs(spectrum.eigenvalues) > tau * lam_max)
    return replace(spectrum, null_mask=mask)


def eigvec_error(exact: HessianSpectrum, approx: HessianSpectrum, i: int) -> float:
    """E_i = 1 - |v_i . v~_i| with vectors paired by descending-|lambda| order.

    Only meaningful for non-null, non-degenerate indices of the exact
    spectrum; the degenerate null subspace has no preferred basis.
    """
    if not exact.classified:
        raise ValueError("exact spectrum has not been classified")
    if exact.null_mask[i]:
        raise ValueError(f"index {i} is classified null; its eigenvector is not unique")
    lam = exact.eigenvalues
    tol = 1e-9 * max(np.abs(lam).max(), 1e-300)
    others = np.delete(np.arange(exact.size), i)
    gap = min(
        np.abs(lam[others] - lam[i]).min(),
        np.abs(np.abs(lam[others]) - np.abs(lam[i])).min(),
    )
    if gap <= tol:
        raise ValueError(f"eigenvalue {i} is degenerate to 1e-9 relative; pairing undefined")
    overlap = abs(float(np.dot(exact.vectors[i], approx.vectors[i])))
    return 1.0 - overlap


def calibrate_epsilon(problem, solution, direction, eps_grid, steps: int = 1000,
                      h: float = 0.1, entry_threshold: float = 1e-6,
                      null_rank: int = 2, abort_ceiling: float = np.inf):
    """Final infidelity of an FD-driven navigation run, per stencil step.

    Restarts the same solution for every epsilon on the grid, follows the
    projection of one fixed direction for `steps` RK4 iterations of step `h`,
    and records the final main-objective infidelity.  A run that leaves the
    finite range is recorded as infinite infidelity rather than aborting the
    sweep.  Returns a list of (epsilon, final_infidelity) pairs.
    """
    from . import navigation

    direction = np.asarray(direction, dtype=float)
    if not np.any(direction != 0.0):
        raise ValueError("direction must be non-zero")
    start_inf = problem.infidelity_of(solution.values)
    if not start_inf < entry_threshold:
        raise ValueError(
            f"starting infidelity {start_inf:.3e} is not below {entry_threshold:.1e}"
        )
    rows = []
    for eps in eps_grid:
        provider = navigation.FixedVector(direction)
        try:
            traj = navigation.navigate(
                problem,
                solution,
                provider,
                h=h,
                steps=steps,
                hessian_mode=FdConfig(float(eps)),
                null_rank=null_rank,
                abort_ceiling=abort_ceiling,
                entry_threshold=entry_threshold,
            )
            if traj.failed and "non-finite" in (traj.failure_reason or ""):
                final = np.inf
            else:
                final = traj.samples[-1].infidelity
                if not np.isfinite(final):
                    final = np.inf
        except FloatingPointError:
            final = np.inf
        rows.append((float(eps), float(final)))
    return rows
