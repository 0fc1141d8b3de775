import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from adascale_lab import (
    CapabilityError,
    ConfigError,
    GainSample,
    GainState,
    GeneratedClassifier,
    NoisyQuadratic,
    analytic_gain,
    gain_sample,
    oracle_gain,
)
from adascale_lab.gain import default_theta, update_recommended, update_separated


class TestGainSample:
    def test_hand_computed(self):
        grads = np.array([[1.0, 0.0], [0.0, 1.0]])
        agg = grads.mean(axis=0)
        s = gain_sample(grads, agg)
        assert s.agg_sq_norm == pytest.approx(0.5)
        assert s.mean_sq_norm == pytest.approx(1.0)
        assert s.scale == 2

    def test_identical_gradients_give_equal_norms_bitwise(self):
        row = np.array([0.1, -0.7, 0.3])
        grads = np.tile(row, (64, 1))
        agg = row + (grads - row).mean(axis=0)
        s = gain_sample(grads, agg)
        assert s.mean_sq_norm == s.agg_sq_norm

    def test_rejects_empty(self):
        with pytest.raises(ConfigError):
            gain_sample(np.empty((0, 3)), np.zeros(3))


class TestDefaults:
    def test_default_theta(self):
        assert default_theta(1) == 0.999
        assert default_theta(100) == 0.9
        assert default_theta(1000) == 0.0
        assert default_theta(2000) == 0.0


class TestRecommendedVariant:
    def test_single_update_hand_computed(self):
        state = GainState(scale=2, theta=0.0)
        r = state.update(GainSample(1.0, 0.5, 2))
        assert r == pytest.approx((1.0 + 1e-6) / (0.5 + 1e-6))

    def test_clamped_to_scale(self):
        state = GainState(scale=4, theta=0.0)
        assert state.update(GainSample(100.0, 1.0, 4)) == 4.0

    def test_clamped_below_by_one(self):
        state = GainState(scale=4, theta=0.0)
        assert state.update(GainSample(0.5, 1.0, 4)) == 1.0

    def test_burn_in_uses_running_mean(self):
        # theta = 0.5 -> burn-in of 2 samples with equal weights.
        state = GainState(scale=8, theta=0.5)
        state.update(GainSample(4.0, 2.0, 8))
        state.update(GainSample(2.0, 2.0, 8))
        assert state._avg[0] == pytest.approx(3.0)
        # Third update switches to the exponential average.
        state.update(GainSample(5.0, 2.0, 8))
        assert state._avg[0] == pytest.approx(0.5 * 3.0 + 0.5 * 5.0)

    def test_exclude_current_returns_prior_estimate(self):
        state = GainState(scale=4, theta=0.0, exclude_current=True)
        first = state.update(GainSample(8.0, 1.0, 4))
        assert first == 1.0  # nothing absorbed yet: epsilon / epsilon
        second = state.update(GainSample(1.0, 1.0, 4))
        assert second == 4.0  # reflects only the first sample


class TestSeparatedVariant:
    def test_first_update_returns_one(self):
        state = GainState(scale=4, variant="separated", theta=0.0)
        assert state.update(GainSample(8.0, 1.0, 4)) == 1.0

    def test_second_update_hand_computed(self):
        state = GainState(scale=2, variant="separated", theta=0.0)
        state.update(GainSample(1.0, 0.5, 2))
        r = state.update(GainSample(1.0, 0.5, 2))
        # sigma^2 = 2/(2-1) * (1 - 0.5) = 1, mu^2 = 0.5 - 0.5 = 0
        # r = (1 + 0) / (1/2 + 0) = 2
        assert r == pytest.approx(2.0)

    def test_negative_mu_clamped(self):
        state = GainState(scale=2, variant="separated", theta=0.0)
        state.update(GainSample(1.0, 0.1, 2))
        # sigma^2 = 2 * 0.9 = 1.8, mu^2 = 0.1 - 0.9 = -0.8 -> 0
        assert state._avg[0] == pytest.approx(1.8)
        assert state._avg[1] == 0.0

    def test_variance_floor(self):
        state = GainState(scale=2, variant="separated", theta=0.0, epsilon=1e-6)
        state.update(GainSample(1.0, 2.0, 2))  # raw sigma^2 negative
        assert state._avg[0] == 1e-6

    def test_needs_two_workers(self):
        with pytest.raises(CapabilityError):
            GainState(scale=1, variant="separated")

    @given(
        st.lists(
            st.tuples(
                st.floats(1e-3, 1e3),  # scatter (mean_sq - agg_sq)
                st.floats(1e-3, 1e3),  # agg_sq
            ),
            min_size=2,
            max_size=20,
        ),
        st.integers(2, 64),
    )
    @settings(max_examples=100, deadline=None)
    def test_matches_recommended_when_no_clamp_binds(self, pairs, scale):
        # With theta = 0 and mu-hat >= 0, the two variants evaluate the
        # same ratio (up to the epsilon stabilizer).
        rec = GainState(scale=scale, theta=0.0, epsilon=1e-12)
        sep = GainState(scale=scale, variant="separated", theta=0.0, epsilon=1e-12)
        for scatter, agg_sq in pairs:
            # Keep mu-hat = agg_sq - scatter / (scale - 1) nonnegative.
            scatter = min(scatter, agg_sq * (scale - 1) * 0.99)
            sample = GainSample(agg_sq + scatter, agg_sq, scale)
            r1 = rec.update(sample)
            r2 = sep.update(sample)
        assert r1 == pytest.approx(r2, rel=1e-6)


class TestClampProperty:
    @given(
        st.integers(1, 64),
        st.sampled_from(["recommended", "separated"]),
        st.lists(
            st.tuples(st.floats(0.0, 1e12), st.floats(0.0, 1e12)),
            min_size=1,
            max_size=30,
        ),
    )
    @settings(max_examples=200, deadline=None)
    def test_estimates_stay_in_range(self, scale, variant, samples):
        if variant == "separated" and scale < 2:
            scale = 2
        state = GainState(scale=scale, variant=variant)
        for mean_sq, agg_sq in samples:
            r = state.update(GainSample(mean_sq, agg_sq, scale))
            assert 1.0 <= r <= scale


class TestWrappers:
    def test_variant_checked(self):
        rec = GainState(scale=2)
        sep = GainState(scale=2, variant="separated")
        sample = GainSample(1.0, 0.5, 2)
        update_recommended(rec, sample)
        update_separated(sep, sample)
        with pytest.raises(ConfigError):
            update_recommended(sep, sample)
        with pytest.raises(ConfigError):
            update_separated(rec, sample)


class TestScaleSwitch:
    def test_auto_theta_follows_scale(self):
        state = GainState(scale=10)
        assert state.theta == pytest.approx(0.99)
        state.set_scale(500)
        assert state.theta == pytest.approx(0.5)

    def test_explicit_theta_is_kept(self):
        state = GainState(scale=10, theta=0.7)
        state.set_scale(500)
        assert state.theta == 0.7

    def test_averages_carry_over(self):
        state = GainState(scale=4, theta=0.0)
        state.update(GainSample(4.0, 1.0, 4))
        state.set_scale(8)
        assert state.estimate() == pytest.approx(4.0, rel=1e-5)


class TestAgainstAnalytic:
    def test_frozen_point_convergence(self):
        # At a fixed parameter vector the online estimate approaches the
        # closed-form gain ratio.
        dim, scale = 16, 8
        obj = NoisyQuadratic.diagonal(np.ones(dim), np.ones(dim))
        w = np.full(dim, 0.5)
        exact = analytic_gain(obj, w, scale)
        state = GainState(scale=scale, theta=0.99)
        rng = np.random.default_rng(0)
        for _ in range(2000):
            grads = np.stack(
                [
                    obj.stochastic_gradient(w, obj.sample_batch(rng))
                    for _ in range(scale)
                ]
            )
            r = state.update(gain_sample(grads, grads.mean(axis=0)))
        assert r == pytest.approx(exact, rel=0.03)

    def test_analytic_gain_values(self):
        obj = NoisyQuadratic.diagonal(np.ones(2), np.ones(2))  # sigma^2 = 2
        w = np.array([1.0, 1.0])  # mu^2 = 2
        # r = (2 + 2) / (2/4 + 2) = 1.6
        assert analytic_gain(obj, w, 4) == pytest.approx(1.6)
        # Deterministic objective: r = 1 at any scale.
        det = NoisyQuadratic.diagonal(np.ones(2), 0.0)
        assert analytic_gain(det, w, 64) == 1.0
        assert analytic_gain(det, np.zeros(2), 64) == 1.0  # 0/0 convention

    def test_analytic_gain_needs_moments(self):
        with pytest.raises(CapabilityError):
            analytic_gain(GeneratedClassifier(), np.zeros(6), 4)

    def test_oracle_gain_close_to_analytic(self):
        obj = NoisyQuadratic.diagonal(np.ones(8), np.ones(8))
        w = np.full(8, 0.5)
        exact = analytic_gain(obj, w, 16)
        mc = oracle_gain(obj, w, 16, n_batches=1000, rng=np.random.default_rng(1))
        assert mc == pytest.approx(exact, rel=0.05)

    def test_oracle_gain_needs_batches(self):
        obj = NoisyQuadratic.diagonal(np.ones(2), np.ones(2))
        with pytest.raises(ConfigError):
            oracle_gain(obj, np.zeros(2), 4, n_batches=1)


class TestValidation:
    def test_bad_variant(self):
        with pytest.raises(ConfigError):
            GainState(scale=2, variant="other")

    def test_bad_theta(self):
        with pytest.raises(ConfigError):
            GainState(scale=2, theta=1.0)

    def test_bad_epsilon(self):
        with pytest.raises(ConfigError):
            GainState(scale=2, epsilon=0.0)
