import io
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qcl.control import ControlField
from qcl.landscape import FdConfig, HessianSpectrum, classify_null, eig_sym
from qcl.models import QhoProblem
from qcl.navigation import (FixedVector, NullFollow, navigate, null_direction,
                            project, rk4_integrate, write_jsonl)
from qcl.optimizer import SeedSpec, minimize, polish, sample_seeds


def random_classified_spectrum(rng, m=5, nonnull=2):
    a = rng.normal(size=(m, m))
    a = a + a.T
    return classify_null(eig_sym(a), rank=nonnull)


class TestProject:
    def test_null_eigenvector_passes_through(self):
        rng = np.random.default_rng(61)
        spec = random_classified_spectrum(rng)
        v_null = spec.vectors[spec.null_indices()[0]]
        assert np.abs(project(v_null, spec) - v_null).max() < 1e-12

    def test_nonnull_eigenvector_is_removed(self):
        rng = np.random.default_rng(62)
        spec = random_classified_spectrum(rng)
        v = spec.vectors[spec.nonnull_indices()[0]]
        assert np.abs(project(v, spec)).max() < 1e-12

    @settings(max_examples=30, deadline=None)
    @given(st.integers())
    def test_idempotent_and_orthogonal(self, seed):
        rng = np.random.default_rng(abs(seed) % 2**32)
        spec = random_classified_spectrum(rng)
        a = rng.normal(size=5)
        pa = project(a, spec)
        assert np.abs(project(pa, spec) - pa).max() <= 1e-12 * max(1, np.abs(a).max())
        for i in spec.nonnull_indices():
            assert abs(pa @ spec.vectors[i]) <= 1e-12 * max(1, np.linalg.norm(a))

    def test_operator_symmetry(self):
        rng = np.random.default_rng(63)
        spec = random_classified_spectrum(rng)
        a, b = rng.normal(size=5), rng.normal(size=5)
        assert a @ project(b, spec) == pytest.approx(project(a, spec) @ b, abs=1e-12)

    def test_basis_independence(self):
        # flipping signs and reordering eigenvectors must not change P
        rng = np.random.default_rng(64)
        spec = random_classified_spectrum(rng)
        a = rng.normal(size=5)
        flipped = HessianSpectrum(
            eigenvalues=spec.eigenvalues.copy(),
            vectors=np.array([-1, 1, -1, 1, -1])[:, None] * spec.vectors,
            null_mask=spec.null_mask.copy(),
        )
        order = [1, 0, 2, 3, 4]  # swap the two non-null rows
        swapped = HessianSpectrum(
            eigenvalues=spec.eigenvalues[order],
            vectors=spec.vectors[order],
            null_mask=spec.null_mask[order],
        )
        pa = project(a, spec)
        assert np.abs(project(a, flipped) - pa).max() < 1e-10
        assert np.abs(project(a, swapped) - pa).max() < 1e-10

    def test_unclassified_rejected(self):
        spec = eig_sym(np.eye(3))
        with pytest.raises(ValueError, match="classified"):
            project(np.ones(3), spec)

    def test_dimension_check(self):
        rng = np.random.default_rng(65)
        spec = random_classified_spectrum(rng)
        with pytest.raises(ValueError):
            project(np.ones(4), spec)


class TestNullDirection:
    def _one_null_spectrum(self, rng):
        return random_classified_spectrum(rng, m=3, nonnull=2)

    def test_sign_continuity(self):
        rng = np.random.default_rng(66)
        spec = self._one_null_spectrum(rng)
        v = null_direction(spec, previous=None)
        again = null_direction(spec, previous=-v)
        assert np.abs(again + v).max() < 1e-14  # flipped to match previous

    def test_first_step_returns_solver_vector(self):
        rng = np.random.default_rng(67)
        spec = self._one_null_spectrum(rng)
        v = null_direction(spec, previous=None)
        assert np.abs(v - spec.vectors[spec.null_indices()[0]]).max() < 1e-15

    def test_requires_one_dimensional_null_space(self):
        rng = np.random.default_rng(68)
        spec = random_classified_spectrum(rng, m=5, nonnull=2)  # null dim 3
        with pytest.raises(ValueError, match="dimension"):
            null_direction(spec)


class TestRk4:
    def test_fourth_order_on_linear_flow(self):
        rng = np.random.default_rng(69)
        a = rng.normal(size=(4, 4))
        a = 0.4 * (a + a.T)
        x0 = rng.normal(size=4)
        lam, vec = np.linalg.eigh(a)
        total = 1.0

        def exact_at(t):
            return vec @ (np.exp(lam * t) * (vec.T @ x0))

        errors = []
        for h in (0.1, 0.05, 0.025):
            steps = int(round(total / h))
            states = rk4_integrate(lambda x: a @ x, x0, h, steps)
            errors.append(np.linalg.norm(states[-1] - exact_at(total)))
        r1 = errors[0] / errors[1]
        r2 = errors[1] / errors[2]
        # fourth order: each halving divides the error by ~16, within factor 2
        assert 8.0 <= r1 <= 32.0
        assert 8.0 <= r2 <= 32.0

    def test_records_all_states(self):
        states = rk4_integrate(lambda x: -x, np.array([1.0]), 0.1, 7)
        assert len(states) == 8


@pytest.fixture(scope="module")
def qho_solution():
    problem = QhoProblem(omega_start=1.0, omega_target=1.0, duration=1.8, n_pulses=6)
    seeds = sample_seeds(SeedSpec(count=10, bounds=(0.1, 3.0), rng_seed=71), problem)
    for s in seeds:
        rep = minimize(problem, s, tol=1e-6, max_iter=2000)
        if rep.converged:
            return problem, polish(problem, rep.field).field
    raise RuntimeError("no solution found")


class TestNavigate:
    def test_rejects_non_solution_start(self, qho_solution):
        problem, _ = qho_solution
        bad = ControlField(values=np.full(6, 2.0), total_time=1.8)
        with pytest.raises(ValueError, match="entry"):
            navigate(problem, bad, FixedVector(np.ones(6)), h=0.1, steps=1)

    def test_validates_h_and_steps(self, qho_solution):
        problem, field = qho_solution
        with pytest.raises(ValueError):
            navigate(problem, field, FixedVector(np.ones(6)), h=0.0, steps=1)
        with pytest.raises(ValueError):
            navigate(problem, field, FixedVector(np.ones(6)), h=0.1, steps=0)

    def test_direction_orthogonal_to_null_space_freezes(self, qho_solution):
        problem, field = qho_solution
        spec = classify_null(eig_sym(
            __import__("qcl.models", fromlist=["hessian_of"]).hessian_of(problem, field.values)),
            rank=2)
        a = spec.vectors[spec.nonnull_indices()[0]]
        traj = navigate(problem, field, FixedVector(a), h=0.1, steps=5, hessian_mode="exact")
        drift = np.abs(traj.values_matrix() - field.values).max()
        assert drift < 1e-10

    def test_fixed_vector_run_preserves_fidelity(self, qho_solution):
        problem, field = qho_solution
        rng = np.random.default_rng(72)
        a = rng.normal(size=6)
        a /= np.linalg.norm(a)
        traj = navigate(problem, field, FixedVector(a), h=0.1, steps=100,
                        hessian_mode=FdConfig(1e-2))
        assert not traj.failed
        assert traj.infidelities().max() < 1e-6
        assert np.diff(traj.infidelities()).max() <= 1e-8  # soft per-step monitor
        zetas = [s.zeta for s in traj.samples]
        assert np.all(np.diff(zetas) > 0)
        # the walk actually moved
        assert np.linalg.norm(traj.values_matrix()[-1] - field.values) > 1e-3

    def test_exact_and_fd_modes_agree(self, qho_solution):
        problem, field = qho_solution
        rng = np.random.default_rng(73)
        a = rng.normal(size=6)
        t_exact = navigate(problem, field, FixedVector(a), h=0.1, steps=30,
                           hessian_mode="exact")
        t_fd = navigate(problem, field, FixedVector(a), h=0.1, steps=30,
                        hessian_mode=FdConfig(1e-3))
        diff = np.abs(t_exact.values_matrix() - t_fd.values_matrix()).max()
        assert diff < 1e-5

    def test_abort_ceiling_flags_failure(self, qho_solution):
        problem, field = qho_solution
        rng = np.random.default_rng(74)
        a = rng.normal(size=6)
        # a nonsense finite-difference step makes the projector noise, so the
        # run wanders off the level set and must be flagged, not truncated
        traj = navigate(problem, field, FixedVector(a), h=0.5, steps=400,
                        hessian_mode=FdConfig(1e-12), abort_ceiling=1e-3)
        assert traj.failed
        assert "ceiling" in traj.failure_reason or "finite" in traj.failure_reason
        assert len(traj.samples) >= 1

    def test_consecutive_null_directions_stay_aligned(self):
        from qcl.models import LzProblem

        problem = LzProblem(gap=2.0, duration=1.4 * np.pi / 2, n_pulses=3)
        seeds = sample_seeds(SeedSpec(count=40, bounds=(-5.0, 5.0), rng_seed=75), problem)
        field = None
        for s in seeds:
            rep = minimize(problem, s, tol=1e-6, max_iter=2000)
            if rep.converged:
                field = polish(problem, rep.field).field
                break
        provider = NullFollow()
        directions = []

        class Recorder:
            def direction(self, values, spectrum):
                d = provider.direction(values, spectrum)
                directions.append(d.copy())
                return d

            def secondary_cost(self, values):
                return None

        traj = navigate(problem, field, Recorder(), h=0.01, steps=200,
                        hessian_mode=FdConfig(1e-2))
        assert not traj.failed
        dots = [float(directions[i] @ directions[i + 1]) for i in range(len(directions) - 1)]
        assert min(dots) > 0.0

    def test_unknown_hessian_mode(self, qho_solution):
        problem, field = qho_solution
        with pytest.raises(ValueError, match="hessian_mode"):
            navigate(problem, field, FixedVector(np.ones(6)), h=0.1, steps=1,
                     hessian_mode="magic")


class TestTrajectoryIo:
    def test_jsonl_round_trip(self, qho_solution):
        problem, field = qho_solution
        traj = navigate(problem, field, FixedVector(np.ones(6)), h=0.1, steps=3,
                        hessian_mode="exact")
        buf = io.StringIO()
        write_jsonl(traj, buf, header={"seed": 1})
        lines = buf.getvalue().strip().split("\n")
        assert json.loads(lines[0]) == {"header": {"seed": 1}}
        records = [json.loads(line) for line in lines[1:]]
        assert len(records) == len(traj.samples)
        for rec, sample in zip(records, traj.samples):
            assert rec["zeta"] == sample.zeta
            assert rec["infidelity"] == sample.infidelity
            assert np.allclose(rec["values"], sample.field.values)

    def test_samples_share_duration(self, qho_solution):
        problem, field = qho_solution
        traj = navigate(problem, field, FixedVector(np.ones(6)), h=0.1, steps=3,
                        hessian_mode="exact")
        for s in traj.samples:
            assert s.field.total_time == field.total_time
            assert s.field.n_pulses == field.n_pulses
