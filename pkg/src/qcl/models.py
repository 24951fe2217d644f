"""The two control problems: costs, exact gradients, exact Hessians.

Both problems propagate a 2-component state through a product of per-interval
matrices that are closed-form in the pulse amplitude, so no ODE solver is
involved anywhere:

* two-level crossing: U_j = cos(r dt) I - i sin(r dt) H(w_j)/r with
  r = sqrt(gap^2/4 + w_j^2), acting on the state in the computational basis;
  the cost is 1 - |<1|U_T|0>|^2.
* driven harmonic trap: the classical mode function f obeys f'' + w(t)^2 f = 0
  and each interval applies [[cos(w dt), sin(w dt)/w], [-w sin(w dt), cos(w dt)]]
  to (f, f'); the cost is the excitation weight |beta|^2 of the final mode.

Every interval matrix is an analytic function of w^2 through
C(x) = cos(sqrt(x) dt) and S(x) = sin(sqrt(x) dt)/sqrt(x), so first and second
amplitude derivatives come from differentiating C and S, which keeps the
w -> 0 limit exact (series branch below).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .control import ControlField

__all__ = [
    "LzProblem",
    "QhoProblem",
    "LzPropagation",
    "BogoliubovPair",
    "lz_propagate",
    "lz_infidelity",
    "qho_propagate",
    "qho_infidelity",
    "particle_number",
    "exact_gradient",
    "exact_hessian",
    "chain_stencil_cost",
    "problem_from_dict",
    "problem_to_dict",
]

# Below x = w * dt^2 ~ (w_j dt)^2 of this size, sin(sqrt(x) dt)/sqrt(x) and its
# w-derivatives are evaluated by series: the closed forms divide differences of
# nearly equal terms by x and lose ~eps/x relative accuracy to cancellation.
_SERIES_X = 1e-6


def _cs_tables(w, dt):
    """C, S, dS/dw, d2S/dw2 for C = cos(sqrt(w) dt), S = sin(sqrt(w) dt)/sqrt(w).

    w >= 0 always (it is either w_j^2 or gap^2/4 + w_j^2).  Returns arrays
    broadcast to the shape of w.
    """
    w = np.asarray(w, dtype=float)
    x = w * dt * dt
    series = x < _SERIES_X
    safe_w = np.where(series, 1.0, w)
    theta = np.sqrt(np.where(series, 1.0, x))
    c_t = np.cos(theta)
    s_t = dt * np.sin(theta) / theta
    s1_t = (c_t * dt - s_t) / (2.0 * safe_w)
    s2_t = (-(dt * dt / 2.0) * s_t - 3.0 * s1_t) / (2.0 * safe_w)
    c_s = 1.0 - x / 2.0 + x * x / 24.0 - x**3 / 720.0
    s_s = dt * (1.0 - x / 6.0 + x * x / 120.0 - x**3 / 5040.0)
    s1_s = dt**3 * (-1.0 / 6.0 + x / 60.0 - x * x / 1680.0 + x**3 / 90720.0)
    s2_s = dt**5 * (1.0 / 60.0 - x / 840.0 + x * x / 30240.0 - x**3 / 1995840.0)
    return (
        np.where(series, c_s, c_t),
        np.where(series, s_s, s_t),
        np.where(series, s1_s, s1_t),
        np.where(series, s2_s, s2_t),
    )


@dataclass(frozen=True)
class LzProblem:
    """Two-level avoided crossing with minimal gap `gap`, target flip |0> -> |1>."""

    gap: float
    duration: float
    n_pulses: int

    def __post_init__(self):
        if not (self.gap > 0 and np.isfinite(self.gap)):
            raise ValueError("gap must be positive")
        if not (self.duration > 0 and np.isfinite(self.duration)):
            raise ValueError("duration must be positive")
        if self.n_pulses < 1:
            raise ValueError("n_pulses must be >= 1")

    @property
    def dt(self) -> float:
        return self.duration / self.n_pulses

    def _cost_boundary(self):
        # 1 - |<1|U|0>|^2 equals |<0|U|0>|^2 exactly for unitary U; the latter
        # form survives near-perfect fidelity without cancellation.
        ket0 = np.array([1.0, 0.0], dtype=complex)
        bra0 = np.array([1.0, 0.0], dtype=complex)
        return ket0, bra0

    def _interval_matrices(self, values):
        """Per-interval propagators for amplitudes of any array shape."""
        v = np.asarray(values, dtype=float)
        dt = self.dt
        rho = 0.25 * self.gap * self.gap + v * v
        C, S, _, _ = _cs_tables(rho, dt)
        A = np.empty(v.shape + (2, 2), dtype=complex)
        A[..., 0, 0] = C - 1j * S * v
        A[..., 0, 1] = -0.5j * self.gap * S
        A[..., 1, 0] = -0.5j * self.gap * S
        A[..., 1, 1] = C + 1j * S * v
        return A

    def _interval_stacks(self, values):
        """Propagators plus first and second amplitude derivatives, stacked (M,2,2)."""
        v = np.asarray(values, dtype=float)
        dt = self.dt
        half_gap = 0.5 * self.gap
        rho = half_gap * half_gap + v * v
        C, S, S1, S2 = _cs_tables(rho, dt)
        C1 = -0.5 * dt * S
        C2 = -0.5 * dt * S1

        A = np.empty(v.shape + (2, 2), dtype=complex)
        A[..., 0, 0] = C - 1j * S * v
        A[..., 0, 1] = -1j * half_gap * S
        A[..., 1, 0] = A[..., 0, 1]
        A[..., 1, 1] = C + 1j * S * v

        # dU/dw = 2w (C' I - i S' H) - i S sigma_z
        A1 = np.empty_like(A)
        A1[..., 0, 0] = 2.0 * v * (C1 - 1j * S1 * v) - 1j * S
        A1[..., 0, 1] = -2j * half_gap * v * S1
        A1[..., 1, 0] = A1[..., 0, 1]
        A1[..., 1, 1] = 2.0 * v * (C1 + 1j * S1 * v) + 1j * S

        # d2U/dw2 = 2 (C' I - i S' H) + 4w^2 (C'' I - i S'' H) - 4 i w S' sigma_z
        A2 = np.empty_like(A)
        v2 = v * v
        A2[..., 0, 0] = 2.0 * (C1 - 1j * S1 * v) + 4.0 * v2 * (C2 - 1j * S2 * v) - 4j * v * S1
        A2[..., 0, 1] = -1j * half_gap * (2.0 * S1 + 4.0 * v2 * S2)
        A2[..., 1, 0] = A2[..., 0, 1]
        A2[..., 1, 1] = 2.0 * (C1 + 1j * S1 * v) + 4.0 * v2 * (C2 + 1j * S2 * v) + 4j * v * S1
        return A, A1, A2

    def infidelity_of(self, values) -> float:
        ket, bra = self._cost_boundary()
        z = _chain_value(self._interval_matrices(values), ket, bra)
        return float(abs(z) ** 2)

    def infidelity_batch(self, value_rows) -> np.ndarray:
        ket, bra = self._cost_boundary()
        z = _chain_value_batch(self, value_rows, ket, bra)
        return np.abs(z) ** 2


@dataclass(frozen=True)
class QhoProblem:
    """Harmonic trap driven from omega_start to omega_target; cost is |beta|^2."""

    omega_start: float
    omega_target: float
    duration: float
    n_pulses: int
    n_initial: float = 0.0

    def __post_init__(self):
        if not (self.omega_start > 0 and self.omega_target > 0):
            raise ValueError("trap frequencies must be positive")
        if not (self.duration > 0 and np.isfinite(self.duration)):
            raise ValueError("duration must be positive")
        if self.n_pulses < 1:
            raise ValueError("n_pulses must be >= 1")
        if self.n_initial < 0:
            raise ValueError("n_initial must be nonnegative")

    @property
    def dt(self) -> float:
        return self.duration / self.n_pulses

    def _cost_boundary(self):
        w0, wt = self.omega_start, self.omega_target
        # initial positive-frequency mode of the starting trap
        ket0 = np.array([1.0 / np.sqrt(2.0 * w0), -1j * np.sqrt(w0 / 2.0)], dtype=complex)
        # negative-frequency projection at T: beta = (wT f - i f') / sqrt(2 wT)
        bra_beta = np.array([wt, -1j], dtype=complex) / np.sqrt(2.0 * wt)
        return ket0, bra_beta

    def _alpha_functional(self):
        wt = self.omega_target
        return np.array([wt, 1j], dtype=complex) / np.sqrt(2.0 * wt)

    def _interval_matrices(self, values):
        v = np.asarray(values, dtype=float)
        dt = self.dt
        w = v * v
        C, S, _, _ = _cs_tables(w, dt)
        A = np.empty(v.shape + (2, 2), dtype=complex)
        A[..., 0, 0] = C
        A[..., 0, 1] = S
        A[..., 1, 0] = -w * S
        A[..., 1, 1] = C
        return A

    def _interval_stacks(self, values):
        v = np.asarray(values, dtype=float)
        dt = self.dt
        w = v * v
        C, S, S1, S2 = _cs_tables(w, dt)
        C1 = -0.5 * dt * S
        C2 = -0.5 * dt * S1

        A = np.empty(v.shape + (2, 2), dtype=complex)
        A[..., 0, 0] = C
        A[..., 0, 1] = S
        A[..., 1, 0] = -w * S
        A[..., 1, 1] = C

        # dA/dw_j = 2 w_j dA/dw; the w-derivative is entrywise below
        Aw = np.empty_like(A)
        Aw[..., 0, 0] = C1
        Aw[..., 0, 1] = S1
        Aw[..., 1, 0] = -S - w * S1
        Aw[..., 1, 1] = C1
        A1 = 2.0 * v[..., None, None] * Aw

        Aww = np.empty_like(A)
        Aww[..., 0, 0] = C2
        Aww[..., 0, 1] = S2
        Aww[..., 1, 0] = -2.0 * S1 - w * S2
        Aww[..., 1, 1] = C2
        A2 = 2.0 * Aw + 4.0 * w[..., None, None] * Aww
        return A, A1, A2

    def infidelity_of(self, values) -> float:
        ket, bra = self._cost_boundary()
        z = _chain_value(self._interval_matrices(values), ket, bra)
        return float(abs(z) ** 2)

    def infidelity_batch(self, value_rows) -> np.ndarray:
        ket, bra = self._cost_boundary()
        z = _chain_value_batch(self, value_rows, ket, bra)
        return np.abs(z) ** 2


@dataclass(frozen=True)
class LzPropagation:
    """Final unitary and transfer amplitude z = <1|U_T|0>."""

    unitary: np.ndarray
    overlap: complex

    def __post_init__(self):
        u = np.asarray(self.unitary, dtype=complex)
        defect = np.abs(u.conj().T @ u - np.eye(2)).max()
        if defect > 1e-10:
            raise ValueError(f"propagator is not unitary (defect {defect:.2e})")
        if abs(self.overlap) > 1.0 + 1e-10:
            raise ValueError("transfer amplitude exceeds 1")
        object.__setattr__(self, "unitary", u)


@dataclass(frozen=True)
class BogoliubovPair:
    """Mode-mixing coefficients; |alpha|^2 - |beta|^2 = 1 up to rounding."""

    alpha: complex
    beta: complex

    def __post_init__(self):
        a2, b2 = abs(self.alpha) ** 2, abs(self.beta) ** 2
        if not np.isfinite(a2) or not np.isfinite(b2):
            raise ValueError("non-finite Bogoliubov coefficients")
        if abs(a2 - b2 - 1.0) > 1e-8 * max(1.0, a2):
            raise ValueError(f"normalization broken: |alpha|^2-|beta|^2 = {a2 - b2}")

    @property
    def excitation(self) -> float:
        return float(abs(self.beta) ** 2)


def _check_field(problem, field: ControlField):
    if field.n_pulses != problem.n_pulses:
        raise ValueError(
            f"field has {field.n_pulses} pulses, problem expects {problem.n_pulses}"
        )
    if not np.isclose(field.total_time, problem.duration, rtol=1e-12, atol=0.0):
        raise ValueError(
            f"field duration {field.total_time} != problem duration {problem.duration}"
        )


def _chain_value(A, ket, bra):
    v = ket
    for m in range(A.shape[0]):
        v = A[m] @ v
    return bra @ v


def _chain_value_batch(problem, value_rows, ket, bra):
    # One sequential pass over intervals, vectorized over rows.  The interval
    # matrices are built column by column so the batch never materializes a
    # (B, M, 2, 2) stack (B can be ~2 M^2 for a finite-difference stencil).
    rows = np.asarray(value_rows, dtype=float)
    v = np.broadcast_to(ket, rows.shape[:1] + (2,)).copy()
    for m in range(rows.shape[1]):
        a = problem._interval_matrices(rows[:, m])
        w = np.empty_like(v)
        w[:, 0] = a[:, 0, 0] * v[:, 0] + a[:, 0, 1] * v[:, 1]
        w[:, 1] = a[:, 1, 0] * v[:, 0] + a[:, 1, 1] * v[:, 1]
        v = w
    return v @ bra


def _chain_derivatives(A, A1, A2, ket, bra):
    """Value, gradient and Hessian of z = bra . (A_{M-1} ... A_0) . ket.

    Each amplitude enters exactly one factor, so mixed second derivatives are
    products of two first-derivative insertions; diagonal terms use the
    closed-form second derivative of a single interval.
    """
    m = A.shape[0]
    kets = np.empty((m + 1, 2), dtype=complex)
    kets[0] = ket
    for t in range(m):
        kets[t + 1] = A[t] @ kets[t]
    bras = np.empty((m + 1, 2), dtype=complex)
    bras[m] = bra
    for t in range(m - 1, -1, -1):
        bras[t] = bras[t + 1] @ A[t]

    z = bras[m] @ kets[m]
    zg = np.einsum("ja,jab,jb->j", bras[1:], A1, kets[:m])

    zh = np.zeros((m, m), dtype=complex)
    zh[np.diag_indices(m)] = np.einsum("ja,jab,jb->j", bras[1:], A2, kets[:m])
    # W[i] carries A_{j-1} ... A_{i+1} A1_i kets[i], advanced one interval per j
    W = np.zeros((m, 2), dtype=complex)
    for j in range(m):
        if j > 0:
            u = bras[j + 1] @ A1[j]
            zh[:j, j] = W[:j] @ u
            W[:j] = W[:j] @ A[j].T
        W[j] = A1[j] @ kets[j]
    zh = zh + np.triu(zh, 1).T
    return z, zg, zh


def chain_stencil_cost(problem):
    """Fast cost evaluation at points perturbing at most two coordinates.

    A finite-difference stencil re-evaluates the chain with one or two
    interval matrices replaced.  Reusing the center's prefix and suffix
    products, plus all in-between partial products, turns each stencil point
    into a handful of 2x2 operations instead of a full M-interval pass; the
    values are the same cost evaluations up to association order.

    Returns a callable
        evaluate(point, singles_idx, singles_val, pairs_i, pairs_vi, pairs_j, pairs_vj)
    giving (center_cost, single_costs, pair_costs); pair indices must satisfy
    i < j elementwise.
    """

    def evaluate(point, singles_idx, singles_val, pairs_i, pairs_vi, pairs_j, pairs_vj):
        point = np.asarray(point, dtype=float)
        m = point.size
        ket, bra = problem._cost_boundary()
        A = problem._interval_matrices(point)
        kets = np.empty((m + 1, 2), dtype=complex)
        kets[0] = ket
        for t in range(m):
            kets[t + 1] = A[t] @ kets[t]
        bras = np.empty((m + 1, 2), dtype=complex)
        bras[m] = bra
        for t in range(m - 1, -1, -1):
            bras[t] = bras[t + 1] @ A[t]
        center = abs(bras[m] @ kets[m]) ** 2

        singles_idx = np.asarray(singles_idx, dtype=int)
        if singles_idx.size:
            B = problem._interval_matrices(np.asarray(singles_val, dtype=float))
            w = np.einsum("qab,qb->qa", B, kets[singles_idx])
            zs = np.einsum("qa,qa->q", bras[singles_idx + 1], w)
            singles = np.abs(zs) ** 2
        else:
            singles = np.empty(0)

        pairs_i = np.asarray(pairs_i, dtype=int)
        if pairs_i.size:
            pairs_j = np.asarray(pairs_j, dtype=int)
            if np.any(pairs_i >= pairs_j):
                raise ValueError("pair indices must satisfy i < j")
            # mid[i, j] = A_{j-1} ... A_{i+1} (identity when j == i + 1)
            mid = np.zeros((m, m, 2, 2), dtype=complex)
            idx = np.arange(m - 1)
            mid[idx, idx + 1] = np.eye(2)
            for j in range(2, m):
                mid[: j - 1, j] = np.matmul(A[j - 1], mid[: j - 1, j - 1])
            Bi = problem._interval_matrices(np.asarray(pairs_vi, dtype=float))
            Bj = problem._interval_matrices(np.asarray(pairs_vj, dtype=float))
            u = np.einsum("qab,qb->qa", Bi, kets[pairs_i])
            v = np.einsum("qab,qb->qa", mid[pairs_i, pairs_j], u)
            w = np.einsum("qab,qb->qa", Bj, v)
            zp = np.einsum("qa,qa->q", bras[pairs_j + 1], w)
            pairs = np.abs(zp) ** 2
        else:
            pairs = np.empty(0)
        return float(center), singles, pairs

    return evaluate


def lz_propagate(problem: LzProblem, field: ControlField) -> LzPropagation:
    """Total propagator U_T = U_M ... U_1 from closed-form interval factors."""
    _check_field(problem, field)
    A = problem._interval_matrices(field.values)
    u = np.eye(2, dtype=complex)
    for t in range(A.shape[0]):
        u = A[t] @ u
    return LzPropagation(unitary=u, overlap=complex(u[1, 0]))


def lz_infidelity(problem: LzProblem, field: ControlField) -> float:
    """1 - |<1|U_T|0>|^2."""
    _check_field(problem, field)
    return problem.infidelity_of(field.values)


def qho_propagate(problem: QhoProblem, field: ControlField) -> BogoliubovPair:
    """Evolve the mode function and project onto the final-trap mode pair."""
    _check_field(problem, field)
    A = problem._interval_matrices(field.values)
    ket, bra_beta = problem._cost_boundary()
    v = ket
    for t in range(A.shape[0]):
        v = A[t] @ v
    if not np.all(np.isfinite(v.view(float))):
        raise ValueError("non-finite mode function during propagation")
    return BogoliubovPair(alpha=complex(problem._alpha_functional() @ v), beta=complex(bra_beta @ v))


def qho_infidelity(problem: QhoProblem, field: ControlField) -> float:
    """Excitation weight |beta|^2 of the evolved mode."""
    return qho_propagate(problem, field).excitation


def particle_number(problem: QhoProblem, field: ControlField) -> float:
    """N(T) = N0 (1 + 2|beta|^2) + |beta|^2."""
    b2 = qho_infidelity(problem, field)
    return float(problem.n_initial * (1.0 + 2.0 * b2) + b2)


def exact_gradient(problem, field: ControlField) -> np.ndarray:
    """Analytic dI/dw_j via the per-interval derivative insertions."""
    _check_field(problem, field)
    return gradient_of(problem, field.values)


def exact_hessian(problem, field: ControlField) -> np.ndarray:
    """Analytic d2I/dw_i dw_j, symmetrized."""
    _check_field(problem, field)
    return hessian_of(problem, field.values)


def gradient_of(problem, values) -> np.ndarray:
    """exact_gradient on a raw amplitude vector (no ControlField wrapper).

    Both costs are |z|^2 of a linear chain functional, so the chain rule is
    dI/dw_j = 2 Re(conj(z) dz/dw_j).
    """
    ket, bra = problem._cost_boundary()
    z, zg, _ = _chain_derivatives(*problem._interval_stacks(values), ket, bra)
    return 2.0 * np.real(np.conj(z) * zg)


def hessian_of(problem, values) -> np.ndarray:
    """exact_hessian on a raw amplitude vector."""
    ket, bra = problem._cost_boundary()
    z, zg, zh = _chain_derivatives(*problem._interval_stacks(values), ket, bra)
    h = 2.0 * (np.real(np.conj(z) * zh) + np.real(np.outer(np.conj(zg), zg)))
    return 0.5 * (h + h.T)


def problem_to_dict(problem) -> dict:
    if isinstance(problem, LzProblem):
        return {
            "model": "lz",
            "delta": problem.gap,
            "T": problem.duration,
            "M": problem.n_pulses,
        }
    if isinstance(problem, QhoProblem):
        return {
            "model": "qho",
            "omega0": problem.omega_start,
            "omegaT": problem.omega_target,
            "N0": problem.n_initial,
            "T": problem.duration,
            "M": problem.n_pulses,
        }
    raise TypeError(f"unknown problem type {type(problem)!r}")


def problem_from_dict(doc: dict):
    model = doc["model"]
    if model == "lz":
        return LzProblem(gap=float(doc["delta"]), duration=float(doc["T"]), n_pulses=int(doc["M"]))
    if model == "qho":
        return QhoProblem(
            omega_start=float(doc.get("omega0", 1.0)),
            omega_target=float(doc.get("omegaT", 1.0)),
            duration=float(doc["T"]),
            n_pulses=int(doc["M"]),
            n_initial=float(doc.get("N0", 0.0)),
        )
    raise ValueError(f"unknown model {model!r}")
