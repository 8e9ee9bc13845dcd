"""Tests for the density-matrix core: constructors, validation, metrics."""

import numpy as np
import pytest

from polpath import qstate


class TestPureState:
    def test_basis_state(self):
        rho = qstate.pure_state([1, 0, 0, 0])
        expected = np.zeros((4, 4))
        expected[0, 0] = 1.0
        assert np.allclose(rho.matrix, expected, atol=1e-15)

    def test_bell_amplitudes(self):
        amps = np.array([1.0, 0.0, 0.0, 1.0]) / np.sqrt(2.0)
        rho = qstate.pure_state(amps)
        expected = np.zeros((4, 4))
        for j in (0, 3):
            for k in (0, 3):
                expected[j, k] = 0.5
        assert np.allclose(rho.matrix, expected, atol=1e-15)

    def test_uniform_amplitudes(self):
        rho = qstate.pure_state([1, 1, 1, 1])
        assert np.allclose(rho.matrix, np.full((4, 4), 0.25), atol=1e-15)

    def test_normalizes_input(self):
        rho = qstate.pure_state([2, 0, 0, 0])
        assert np.isclose(np.trace(rho.matrix).real, 1.0, atol=1e-15)

    def test_zero_vector_rejected(self):
        with pytest.raises(ValueError, match="degenerate state vector"):
            qstate.pure_state([0, 0, 0, 0])

    @pytest.mark.parametrize("seed", range(20))
    def test_purity_one_for_any_nonzero_vector(self, seed):
        rng = np.random.default_rng(seed)
        v = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        assert qstate.purity(qstate.pure_state(v)) == pytest.approx(1.0, abs=1e-12)


class TestNamedStates:
    def test_bell_matches_pure_state(self):
        amps = np.array([1.0, 0.0, 0.0, 1.0]) / np.sqrt(2.0)
        assert np.allclose(
            qstate.bell_pbs_state().matrix, qstate.pure_state(amps).matrix, atol=1e-15
        )

    def test_bell_self_fidelity_and_purity(self):
        bell = qstate.bell_pbs_state()
        assert qstate.fidelity(bell, bell) == pytest.approx(1.0, abs=1e-12)
        assert qstate.purity(bell) == pytest.approx(1.0, abs=1e-12)

    def test_maximally_mixed(self):
        mixed = qstate.maximally_mixed()
        assert np.allclose(mixed.matrix, np.eye(4) / 4.0, atol=1e-15)
        assert qstate.purity(mixed) == pytest.approx(0.25, abs=1e-12)


class TestRandomDensity:
    def test_deterministic_for_fixed_seed(self):
        a = qstate.random_density(42, 4)
        b = qstate.random_density(42, 4)
        assert np.array_equal(a.matrix, b.matrix)

    def test_rank_one_is_pure(self):
        for seed in range(10):
            rho = qstate.random_density(seed, 1)
            assert qstate.purity(rho) == pytest.approx(1.0, abs=1e-12)

    def test_full_rank_positive_semidefinite(self):
        # oracle: numpy's Hermitian eigensolver
        for seed in range(200):
            rho = qstate.random_density(seed, 4)
            assert np.linalg.eigvalsh(rho.matrix).min() >= -1e-12

    def test_always_physical(self):
        for seed in range(100):
            assert qstate.validate_density(qstate.random_density(seed, 4)).is_physical

    def test_rank_out_of_range(self):
        with pytest.raises(ValueError, match="rank"):
            qstate.random_density(0, 5)
        with pytest.raises(ValueError, match="rank"):
            qstate.random_density(0, 0)


class TestValidateDensity:
    def test_maximally_mixed(self):
        report = qstate.validate_density(qstate.maximally_mixed())
        assert report.is_physical
        assert report.min_eigenvalue == pytest.approx(0.25, abs=1e-12)

    def test_negative_eigenvalue_detected(self):
        raw = qstate.DensityMatrix(np.diag([1.5, -0.5, 0.0, 0.0]))
        report = qstate.validate_density(raw)
        assert not report.is_physical
        assert report.min_eigenvalue == pytest.approx(-0.5, abs=1e-12)

    def test_bell_defects_zero(self):
        report = qstate.validate_density(qstate.bell_pbs_state())
        assert report.hermiticity_defect == pytest.approx(0.0, abs=1e-15)
        assert report.trace_defect == pytest.approx(0.0, abs=1e-15)

    def test_eigenvalues_sum_to_trace(self):
        for seed in range(100):
            rho = qstate.random_density(seed, 4)
            evals, _ = qstate.eigh4(rho.matrix)
            assert np.sum(evals) == pytest.approx(1.0, abs=1e-10)


class TestEigh4:
    def test_against_numpy_oracle(self):
        worst_val = 0.0
        worst_rec = 0.0
        for seed in range(200):
            rng = np.random.default_rng(seed)
            g = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
            h = 0.5 * (g + g.conj().T)
            evals, vecs = qstate.eigh4(h)
            worst_val = max(worst_val, np.max(np.abs(evals - np.linalg.eigvalsh(h))))
            worst_rec = max(
                worst_rec, np.max(np.abs((vecs * evals) @ vecs.conj().T - h))
            )
            assert np.max(np.abs(vecs.conj().T @ vecs - np.eye(4))) < 1e-12
        assert worst_val < 1e-12
        assert worst_rec < 1e-12

    def test_eigenvalues_ascending(self):
        evals, _ = qstate.eigh4(np.diag([0.4, 0.1, 0.3, 0.2]))
        assert np.allclose(evals, [0.1, 0.2, 0.3, 0.4], atol=1e-14)


class TestMetrics:
    def test_fidelity_self(self):
        for seed in range(10):
            rho = qstate.random_density(seed, 3)
            assert qstate.fidelity(rho, rho) == pytest.approx(1.0, abs=1e-9)

    def test_fidelity_orthogonal_pure(self):
        h0 = qstate.pure_state([1, 0, 0, 0])
        h1 = qstate.pure_state([0, 1, 0, 0])
        assert qstate.fidelity(h0, h1) == pytest.approx(0.0, abs=1e-12)

    def test_fidelity_bell_vs_mixed(self):
        # oracle: <psi| I/4 |psi> = 1/4 for any unit vector
        value = qstate.fidelity(qstate.bell_pbs_state(), qstate.maximally_mixed())
        assert value == pytest.approx(0.25, abs=1e-12)

    def test_fidelity_symmetric(self):
        for seed in range(25):
            a = qstate.random_density(seed, 4)
            b = qstate.random_density(seed + 1000, 2)
            assert qstate.fidelity(a, b) == pytest.approx(qstate.fidelity(b, a), abs=1e-9)

    def test_fidelity_mixed_pair_against_numpy_oracle(self):
        # oracle: Uhlmann fidelity via sqrtm built on numpy eigh; full-rank
        # pairs so the naive oracle has no null-space noise of its own
        def sqrtm(m):
            evals, vecs = np.linalg.eigh(m)
            return (vecs * np.sqrt(np.clip(evals, 0, None))) @ vecs.conj().T

        for seed in range(20):
            a = qstate.random_density(seed, 4)
            b = qstate.random_density(seed + 500, 4)
            s = sqrtm(a.matrix)
            expected = np.real(np.trace(sqrtm(s @ b.matrix @ s))) ** 2
            assert qstate.fidelity(a, b) == pytest.approx(expected, abs=1e-9)

    def test_fidelity_pure_vs_mixed_against_overlap_oracle(self):
        # oracle: for pure rho the fidelity is exactly <psi|sigma|psi>
        for seed in range(20):
            a = qstate.random_density(seed, 1)
            b = qstate.random_density(seed + 500, 3)
            evals, vecs = np.linalg.eigh(a.matrix)
            psi = vecs[:, -1]
            expected = float(np.real(psi.conj() @ b.matrix @ psi))
            assert qstate.fidelity(a, b) == pytest.approx(expected, abs=1e-9)
            assert qstate.fidelity(b, a) == pytest.approx(expected, abs=1e-9)

    def test_fidelity_rejects_unphysical(self):
        bad = qstate.DensityMatrix(np.diag([1.5, -0.5, 0.0, 0.0]))
        with pytest.raises(ValueError, match="physical"):
            qstate.fidelity(bad, qstate.maximally_mixed())

    def test_trace_distance_cases(self):
        rho = qstate.random_density(5, 4)
        assert qstate.trace_distance(rho, rho) == pytest.approx(0.0, abs=1e-12)
        h0 = qstate.pure_state([1, 0, 0, 0])
        v0 = qstate.pure_state([0, 0, 1, 0])
        assert qstate.trace_distance(h0, v0) == pytest.approx(1.0, abs=1e-12)

    def test_purity_bounds(self):
        for seed in range(50):
            value = qstate.purity(qstate.random_density(seed, 4))
            assert 0.25 - 1e-12 <= value <= 1.0 + 1e-12


class TestPolarizationStates:
    def test_named_constructors_unit_norm(self):
        for state in (
            qstate.PolarizationState.horizontal(),
            qstate.PolarizationState.vertical(),
            qstate.PolarizationState.diagonal(),
            qstate.PolarizationState.antidiagonal(),
            qstate.PolarizationState.right_circular(),
            qstate.PolarizationState.left_circular(),
        ):
            assert np.linalg.norm(state.amplitudes) == pytest.approx(1.0, abs=1e-12)

    def test_non_unit_rejected(self):
        with pytest.raises(ValueError, match="unit norm"):
            qstate.PolarizationState(np.array([1.0, 1.0]))


class TestSerialization:
    def test_json_round_trip(self):
        rho = qstate.random_density(9, 4)
        again = qstate.DensityMatrix.from_dict(rho.to_dict())
        assert np.allclose(again.matrix, rho.matrix, atol=1e-15)

    def test_bad_basis_rejected(self):
        payload = qstate.maximally_mixed().to_dict()
        payload["basis"] = ["H0", "V0", "H1", "V1"]
        with pytest.raises(ValueError, match="basis"):
            qstate.DensityMatrix.from_dict(payload)
