"""Treatment-effect pipeline: level binning, PAVA against an exhaustive grid
oracle, propensity-network behavior, and estimator invariants."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sepsiswatch.treatment import (
    DegenerateDataError,
    EffectEstimate,
    GpsNetwork,
    PolicySample,
    TreatmentError,
    TreatmentPolicy,
    assign_level,
    estimate_effect,
    fit_adrf,
    fit_gps,
    pava,
    policy_delta,
)

from oracles import oracle_pava_grid


def _samples(rng, n, levels=(1, 2, 3, 4), dim=3, outcome_fn=None):
    out = []
    for i in range(n):
        lvl = int(rng.choice(levels))
        cov = rng.normal(size=dim)
        if outcome_fn is None:
            y = float(rng.random() < 0.7)
        else:
            y = float(rng.random() < outcome_fn(lvl, cov))
        out.append(PolicySample(f"t{i}", cov, lvl, y))
    return out


class TestAssignLevel:
    def test_interval_boundaries(self):
        onset = 100.0
        # delta = t_abx - onset
        cases = [(-24.0, 1), (-6.01, 1), (-6.0, 2), (-0.01, 2), (0.0, 3),
                 (2.99, 3), (3.0, 4), (24.0, 4)]
        for delta, want in cases:
            assert assign_level(onset, onset + delta) == want, delta
        assert assign_level(onset, onset - 24.01) is None
        assert assign_level(onset, onset + 24.01) is None

    def test_only_last_interval_right_closed(self):
        assert assign_level(0.0, 24.0) == 4
        assert assign_level(0.0, -24.0) == 1


class TestPava:
    def test_exhaustive_grid_oracle(self):
        """Matches brute-force search over a value grid for n <= 6."""
        rng = np.random.default_rng(30)
        for _ in range(40):
            n = int(rng.integers(1, 7))
            values = rng.integers(0, 5, size=n).astype(float) / 4.0
            weights = rng.integers(1, 4, size=n).astype(float)
            got = pava(values, weights)
            grid = np.linspace(0.0, 1.0, 9)
            want, want_cost = oracle_pava_grid(values, weights, grid)
            got_cost = float((weights * (got - values) ** 2).sum())
            assert got_cost <= want_cost + 1e-9
            assert np.all(np.diff(got) >= -1e-12)

    def test_already_monotone_unchanged(self):
        v = np.array([0.1, 0.2, 0.5, 0.9])
        assert np.allclose(pava(v, np.ones(4)), v)

    def test_decreasing_input_pools_to_weighted_mean(self):
        v = np.array([1.0, 0.0])
        w = np.array([3.0, 1.0])
        assert np.allclose(pava(v, w), [0.75, 0.75])

    def test_empty(self):
        assert pava([], []).size == 0

    def test_mismatched_rejected(self):
        with pytest.raises(TreatmentError):
            pava([1.0, 2.0], [1.0])

    @given(st.lists(st.floats(0, 1), min_size=1, max_size=12),
           st.integers(0, 2**31 - 1))
    @settings(max_examples=60, deadline=None)
    def test_output_monotone_and_mean_preserving(self, values, seed):
        rng = np.random.default_rng(seed)
        w = rng.uniform(0.5, 2.0, size=len(values))
        out = pava(values, w)
        assert np.all(np.diff(out) >= -1e-12)
        # weighted mean is preserved by the pooling operation
        assert float((w * out).sum()) == pytest.approx(
            float((w * np.asarray(values)).sum()), rel=1e-9, abs=1e-9)


class TestGps:
    def test_probabilities_are_a_distribution(self):
        rng = np.random.default_rng(31)
        samples = _samples(rng, 120)
        gps = fit_gps(samples, seed=0)
        p = gps.probabilities(np.stack([s.covariates for s in samples]))
        assert p.shape == (120, 4)
        assert np.allclose(p.sum(axis=1), 1.0, atol=1e-9)
        assert np.all(p > 0)

    def test_learns_a_predictive_covariate(self):
        rng = np.random.default_rng(32)
        samples = []
        for i in range(200):
            lvl = int(rng.integers(1, 5))
            cov = np.array([float(lvl), rng.normal(), rng.normal()])
            samples.append(PolicySample(f"g{i}", cov, lvl, 1.0))
        gps = fit_gps(samples, seed=0)
        p = gps.probabilities(np.stack([s.covariates for s in samples]))
        acc = (p.argmax(axis=1) + 1 == np.array([s.actual_level for s in samples])).mean()
        assert acc > 0.95

    def test_single_level_rejected(self):
        rng = np.random.default_rng(33)
        with pytest.raises(DegenerateDataError):
            fit_gps(_samples(rng, 30, levels=(2,)), seed=0)

    def test_empty_rejected(self):
        with pytest.raises(DegenerateDataError):
            fit_gps([], seed=0)


class TestAdrf:
    def test_level_effect_recovered(self):
        """Outcome depends only on the level; the fitted surface tracks it."""
        rng = np.random.default_rng(34)
        truth = {1: 0.3, 2: 0.85, 3: 0.6, 4: 0.45}
        samples = _samples(rng, 4000, outcome_fn=lambda lvl, c: truth[lvl])
        gps = fit_gps(samples, seed=0)
        adrf = fit_adrf(samples, gps, seed=1)
        x = np.stack([s.covariates for s in samples])
        probs = gps.probabilities(x)
        for lvl, want in truth.items():
            pred = adrf.predict(np.full(len(x), lvl), probs[:, lvl - 1]).mean()
            assert pred == pytest.approx(want, abs=0.05)

    def test_calibration_is_monotone_in_raw_score(self):
        rng = np.random.default_rng(35)
        samples = _samples(rng, 300, outcome_fn=lambda lvl, c: 0.2 * lvl)
        gps = fit_gps(samples, seed=0)
        adrf = fit_adrf(samples, gps, seed=0)
        assert np.all(np.diff(adrf.calib_fit) >= -1e-12)


class TestEstimateEffect:
    def test_zero_when_policy_matches_actual(self):
        rng = np.random.default_rng(36)
        samples = _samples(rng, 80, levels=(2,))
        fit = _samples(rng, 200)
        policy = TreatmentPolicy("sepsis-3", 2)
        est = estimate_effect(policy, samples, restarts=5, seed=0, fit_samples=fit)
        assert np.all(np.asarray(est.deltas) == 0.0)
        assert est.delta_median == 0.0

    def test_antisymmetry_on_single_level_cohorts(self):
        rng = np.random.default_rng(37)
        fit = _samples(rng, 300)
        at2 = _samples(rng, 60, levels=(2,))
        # every sample at level 2: moving 2 -> 4 is the negation of 4 -> 2
        # evaluated on a matching level-4 cohort with identical covariates
        at4 = [PolicySample(s.patient_id, s.covariates, 4, s.outcome) for s in at2]
        fwd = estimate_effect(TreatmentPolicy("sepsis-3", 4), at2,
                              restarts=6, seed=5, fit_samples=fit)
        back = estimate_effect(TreatmentPolicy("sepsis-3", 2), at4,
                               restarts=6, seed=5, fit_samples=fit)
        assert np.allclose(np.array(fwd.deltas), -np.array(back.deltas), atol=1e-12)

    def test_estimate_validates_restart_count(self):
        with pytest.raises(TreatmentError):
            EffectEstimate(0.0, (0.0, 0.0), [0.0, 0.0], restarts=5)

    def test_known_effect_recovered(self):
        """Level shifts outcome probability by +0.1 per level; moving a
        level-1 cohort to level 3 should read ~+0.2."""
        rng = np.random.default_rng(38)
        truth = lambda lvl, c: 0.3 + 0.1 * lvl
        fit = _samples(rng, 3000, outcome_fn=truth)
        at1 = _samples(rng, 600, levels=(1,), outcome_fn=truth)
        est = estimate_effect(TreatmentPolicy("sepsis-3", 3), at1,
                              restarts=10, seed=0, fit_samples=fit)
        assert est.delta_median == pytest.approx(0.2, abs=0.05)
        lo, hi = est.delta_iqr
        assert lo <= est.delta_median <= hi

    def test_single_fit_delta_matches_components(self):
        rng = np.random.default_rng(39)
        samples = _samples(rng, 150)
        gps = fit_gps(samples, seed=3)
        adrf = fit_adrf(samples, gps, seed=4)
        policy = TreatmentPolicy("sepsis-cdc", 1)
        d = policy_delta(policy, samples, gps, adrf)
        assert isinstance(d, float) and -1.0 <= d <= 1.0
