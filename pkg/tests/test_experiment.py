"""Tests for the bench simulation: probabilities, sampling, reproducibility."""

import math

import numpy as np
import pytest

from polpath import experiment, qstate

NONE = experiment.PlateSetting("none")
HWP = experiment.PlateSetting("hwp")
QWP = experiment.PlateSetting("qwp")


class TestPlateSetting:
    def test_nominal_angles(self):
        assert NONE.nominal_angle == 0.0
        assert HWP.nominal_angle == pytest.approx(math.pi / 8)
        assert QWP.nominal_angle == pytest.approx(math.pi / 4)

    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="plate kind"):
            experiment.PlateSetting("polarizer")


class TestDetectorProbabilities:
    def test_maximally_mixed_uniform(self):
        for setting in (NONE, HWP, QWP):
            for phi in (0.0, 0.7, math.pi / 2):
                probs = experiment.detector_probabilities(qstate.maximally_mixed(), setting, phi)
                assert np.allclose(probs, np.full(8, 0.125), atol=1e-12)

    def test_bell_frozen_values(self):
        probs = experiment.detector_probabilities(qstate.bell_pbs_state(), NONE, 0.0)
        expected = [0.25, 0.0, 0.0, 0.25, 0.125, 0.125, 0.125, 0.125]
        assert np.allclose(probs, expected, atol=1e-12)

    def test_h0_frozen_values(self):
        probs = experiment.detector_probabilities(qstate.pure_state([1, 0, 0, 0]), NONE, 0.0)
        expected = [0.5, 0.0, 0.0, 0.0, 0.25, 0.0, 0.25, 0.0]
        assert np.allclose(probs, expected, atol=1e-12)

    def test_sum_to_one(self):
        worst = 0.0
        for seed in range(1000):
            rho = qstate.random_density(seed, 4)
            setting = (NONE, HWP, QWP)[seed % 3]
            phi = (0.0, math.pi / 2)[seed % 2]
            total = experiment.detector_probabilities(rho, setting, phi).sum()
            worst = max(worst, abs(total - 1.0))
        assert worst <= 1e-12

    def test_monitor_arms_phase_independent(self):
        for seed in range(25):
            rho = qstate.random_density(seed, 4)
            reference = experiment.detector_probabilities(rho, HWP, 0.0)[:4]
            for phi in (0.3, math.pi / 2, 4.0):
                probs = experiment.detector_probabilities(rho, HWP, phi)[:4]
                assert np.allclose(probs, reference, atol=1e-12)

    def test_rejects_unphysical_state(self):
        bad = qstate.DensityMatrix(np.diag([1.5, -0.5, 0.0, 0.0]))
        with pytest.raises(ValueError, match="physical"):
            experiment.detector_probabilities(bad, NONE, 0.0)


class TestMeasurementOperators:
    def test_completeness(self):
        for setting in (NONE, HWP, QWP):
            for phi in (0.0, 1.1, math.pi / 2):
                ops = experiment.measurement_operators(setting, phi)
                assert np.max(np.abs(ops.sum(axis=0) - np.eye(4))) <= 1e-12

    def test_matches_detector_probabilities(self):
        # the POVM route must agree with the explicit-evolution route
        for seed in range(50):
            rho = qstate.random_density(seed, 4)
            setting = (NONE, HWP, QWP)[seed % 3]
            phi = 0.2 + 0.1 * seed
            ops = experiment.measurement_operators(setting, phi)
            via_ops = np.array([np.trace(op @ rho.matrix).real for op in ops])
            direct = experiment.detector_probabilities(rho, setting, phi)
            assert np.allclose(via_ops, direct, atol=1e-13)

    def test_respects_angle_overrides(self):
        angles = {f"SPM{i}": HWP.nominal_angle + 0.05 * i for i in range(4)}
        rho = qstate.random_density(3, 4)
        ops = experiment.measurement_operators(HWP, 0.4, spm_angles=angles)
        via_ops = np.array([np.trace(op @ rho.matrix).real for op in ops])
        direct = experiment.detector_probabilities(rho, HWP, 0.4, spm_angles=angles)
        assert np.allclose(via_ops, direct, atol=1e-13)
        nominal = experiment.detector_probabilities(rho, HWP, 0.4)
        assert not np.allclose(direct, nominal, atol=1e-6)


class TestConfigAndLayout:
    def test_defaults(self):
        cfg = experiment.ExperimentConfig(n_photons_total=600, seed=1)
        layout = experiment.run_layout(cfg)
        assert len(layout) == 6
        assert all(n == 100 for _, _, n in layout)

    def test_remainder_to_first_runs(self):
        cfg = experiment.ExperimentConfig(n_photons_total=605, seed=1)
        budgets = [n for _, _, n in experiment.run_layout(cfg)]
        assert budgets == [101, 101, 101, 101, 101, 100]
        assert sum(budgets) == 605

    def test_validation(self):
        with pytest.raises(ValueError, match="phase"):
            experiment.ExperimentConfig(n_photons_total=100, seed=0, phases=())
        with pytest.raises(ValueError, match="setting"):
            experiment.ExperimentConfig(n_photons_total=100, seed=0, settings=())
        with pytest.raises(ValueError, match="budget"):
            experiment.ExperimentConfig(n_photons_total=5, seed=0)
        with pytest.raises(ValueError, match="jitter"):
            experiment.ExperimentConfig(n_photons_total=100, seed=0, angle_jitter_sigma=-0.1)


class TestSimulate:
    def test_deterministic_for_fixed_seed(self):
        rho = qstate.random_density(4, 4)
        cfg = experiment.ExperimentConfig(n_photons_total=6000, seed=33, angle_jitter_sigma=0.01)
        assert experiment.simulate(rho, cfg).to_dict() == experiment.simulate(rho, cfg).to_dict()

    def test_different_seeds_differ(self):
        rho = qstate.random_density(4, 4)
        a = experiment.simulate(rho, experiment.ExperimentConfig(n_photons_total=6000, seed=1))
        b = experiment.simulate(rho, experiment.ExperimentConfig(n_photons_total=6000, seed=2))
        assert a.to_dict() != b.to_dict()

    def test_counts_sum_to_budget(self):
        rho = qstate.random_density(8, 4)
        cfg = experiment.ExperimentConfig(n_photons_total=6007, seed=5)
        data = experiment.simulate(rho, cfg)
        for run in data.runs:
            assert sum(run.counts.values()) == run.n_in

    def test_mixed_state_counts_within_binomial_bounds(self):
        cfg = experiment.ExperimentConfig(
            n_photons_total=8 * 10**6, seed=17, phases=(0.0,), settings=(NONE,)
        )
        data = experiment.simulate(qstate.maximally_mixed(), cfg)
        (run,) = data.runs
        # oracle: binomial statistics, p = 1/8 per detector
        sigma = math.sqrt(run.n_in * 0.125 * 0.875)
        for name in experiment.DETECTORS:
            assert abs(run.counts[name] - 10**6) <= 5.0 * sigma

    def test_counts_converge_to_probabilities(self):
        rho = qstate.random_density(19, 4)
        cfg = experiment.ExperimentConfig(n_photons_total=6 * 10**6, seed=3)
        data = experiment.simulate(rho, cfg)
        for run in data.runs:
            probs = experiment.detector_probabilities(rho, run.setting, run.phase)
            for name, p in zip(experiment.DETECTORS, probs):
                # oracle: binomial 5-sigma bound per detector
                sigma = math.sqrt(max(run.n_in * p * (1.0 - p), 1.0))
                assert abs(run.counts[name] - run.n_in * p) <= 5.0 * sigma

    def test_jitter_recorded_per_spm(self):
        rho = qstate.random_density(2, 4)
        cfg = experiment.ExperimentConfig(n_photons_total=600, seed=9, angle_jitter_sigma=0.05)
        data = experiment.simulate(rho, cfg)
        for run in data.runs:
            if run.setting.kind == "none":
                assert run.angles == {}
            else:
                assert set(run.angles) == {"SPM0", "SPM1", "SPM2", "SPM3"}
                spread = [abs(a - run.setting.nominal_angle) for a in run.angles.values()]
                assert max(spread) > 0.0

    def test_zero_jitter_keeps_nominal_angles(self):
        rho = qstate.random_density(2, 4)
        cfg = experiment.ExperimentConfig(n_photons_total=600, seed=9)
        for run in experiment.simulate(rho, cfg).runs:
            for angle in run.angles.values():
                assert angle == run.setting.nominal_angle


class TestRealizedAngle:
    def test_sigma_zero_is_exact(self):
        rng = np.random.default_rng(0)
        assert experiment.realized_angle(math.pi / 8, 0.0, rng) == math.pi / 8

    def test_sample_mean_and_std(self):
        rng = np.random.default_rng(123)
        draws = np.array(
            [experiment.realized_angle(math.pi / 8, 0.01, rng) for _ in range(100_000)]
        )
        # oracle: central limit bounds for mean and standard deviation
        assert abs(draws.mean() - math.pi / 8) <= 3.0 * 0.01 / math.sqrt(100_000)
        assert abs(draws.std() - 0.01) <= 0.05 * 0.01

    def test_negative_sigma_rejected(self):
        with pytest.raises(ValueError, match="nonnegative"):
            experiment.realized_angle(0.0, -1.0, np.random.default_rng(0))


class TestExactCounts:
    def test_bell_48_photons(self):
        data = experiment.exact_counts(
            qstate.bell_pbs_state(), experiment.ExperimentConfig(n_photons_total=48, seed=0)
        )
        assert len(data.runs) == 6
        for run in data.runs:
            assert run.n_in == 8
            assert sum(run.counts.values()) == 8
        first = data.runs[0]
        assert first.setting.kind == "none" and first.phase == 0.0
        assert [first.counts[d] for d in experiment.DETECTORS] == [2, 0, 0, 2, 1, 1, 1, 1]

    def test_counts_track_probabilities(self):
        rho = qstate.random_density(6, 4)
        cfg = experiment.ExperimentConfig(n_photons_total=6 * 10**6, seed=0)
        data = experiment.exact_counts(rho, cfg)
        for run in data.runs:
            probs = experiment.detector_probabilities(rho, run.setting, run.phase)
            for name, p in zip(experiment.DETECTORS, probs):
                assert abs(run.counts[name] - run.n_in * p) <= 0.5


class TestSerialization:
    def test_json_round_trip(self):
        rho = qstate.random_density(12, 4)
        cfg = experiment.ExperimentConfig(n_photons_total=6000, seed=2, angle_jitter_sigma=0.02)
        data = experiment.simulate(rho, cfg)
        again = experiment.CountData.from_dict(data.to_dict())
        assert again.to_dict() == data.to_dict()

    def test_missing_detector_rejected(self):
        rho = qstate.random_density(12, 4)
        payload = experiment.exact_counts(
            rho, experiment.ExperimentConfig(n_photons_total=600, seed=0)
        ).to_dict()
        del payload["runs"][0]["counts"]["SPM3.D1"]
        with pytest.raises(ValueError, match="SPM3.D1"):
            experiment.CountData.from_dict(payload)
