import numpy as np
import pytest

from specshape.errors import (
    NonPositiveInputError,
    SeedRequiredError,
    TooFewModesError,
    ValidationError,
)
from specshape.modemodel import (
    CLOSED_FORM,
    MONTE_CARLO,
    ModeModelConfig,
    lower_median,
    mode_step,
    optimal_exponent_sweep,
    second_moment_step,
    signal_metrics,
    simulate_trajectory,
    stable_multiplier,
)


def make_config(**kw):
    defaults = dict(
        curvatures=(1.0, 0.01),
        kappa=1.0,
        eta=0.1,
        exponent=0.0,
        noise_levels=(0.0, 0.0),
        initial_residuals=(1.0, 1.0),
        steps=50,
    )
    defaults.update(kw)
    return ModeModelConfig(**defaults)


class TestModeStep:
    def test_exponent_cancellation_at_minus_one(self):
        # p = -1 makes the multiplier independent of curvature
        for h in (1.0, 0.01):
            out = mode_step(1.0, h, kappa=1.0, eta=0.1, p=-1.0, xi=0.0)
            assert out == pytest.approx(0.9, abs=1e-15)

    def test_raw_exponent(self):
        assert mode_step(2.0, 1.0, kappa=1.0, eta=0.1, p=1.0, xi=0.0) == pytest.approx(
            1.8, abs=1e-15
        )

    def test_noise_term(self):
        # h=0.25, p=0: multiplier 0.95, noise scale 0.1 * 0.25**-0.5 = 0.2
        out = mode_step(1.0, 0.25, kappa=1.0, eta=0.1, p=0.0, xi=1.0)
        assert out == pytest.approx(0.75, abs=1e-15)

    def test_curvature_domain(self):
        with pytest.raises(ValidationError):
            mode_step(1.0, 0.0, 1.0, 0.1, 0.0, 0.0)
        with pytest.raises(ValidationError):
            mode_step(1.0, 1.5, 1.0, 0.1, 0.0, 0.0)


class TestSecondMomentStep:
    def test_pure_contraction_without_noise(self):
        out = second_moment_step(4.0, 0.5, kappa=1.0, eta=0.1, p=1.0, c=0.0)
        assert out == pytest.approx((1 - 0.05) ** 2 * 4.0, abs=1e-15)

    def test_frozen_example(self):
        out = second_moment_step(1.0, 0.25, kappa=1.0, eta=0.1, p=0.0, c=0.04)
        assert out == pytest.approx(0.9041, abs=1e-15)

    def test_monte_carlo_oracle_single_point(self):
        # averaging squared mode steps over i.i.d. Gaussian noise draws must
        # land within 1% of the conditional expectation
        rng = np.random.default_rng(123)
        h, kappa, eta, p, c, delta = 0.25, 1.0, 0.1, 0.0, 0.04, 1.0
        xi = rng.normal(0.0, np.sqrt(c), size=100_000)
        mult = 1 - eta * kappa * h ** ((p + 1) / 2)
        draws = mult * delta - eta * h ** ((p - 1) / 2) * xi
        mc = float(np.mean(draws**2))
        expected = second_moment_step(delta**2, h, kappa, eta, p, c)
        assert abs(mc - expected) / expected < 0.01

    def test_rejects_negative_inputs(self):
        with pytest.raises(ValidationError):
            second_moment_step(-1.0, 0.5, 1.0, 0.1, 0.0, 0.0)
        with pytest.raises(ValidationError):
            second_moment_step(1.0, 0.5, 1.0, 0.1, 0.0, -0.1)


class TestSimulateTrajectory:
    def test_single_mode_geometric_decay(self):
        cfg = make_config(curvatures=(1.0,), noise_levels=(0.0,),
                          initial_residuals=(2.0,), exponent=1.0, steps=20)
        traj = simulate_trajectory(cfg, CLOSED_FORM)
        mult = 1 - 0.1
        for t in range(21):
            assert traj.values[t, 0] == pytest.approx(4.0 * mult ** (2 * t), rel=1e-12)

    def test_p_minus_one_modes_identical(self):
        cfg = make_config(exponent=-1.0, steps=200)
        traj = simulate_trajectory(cfg, CLOSED_FORM)
        diff = np.abs(traj.values[:, 0] - traj.values[:, 1])
        assert float(diff.max()) < 1e-12

    def test_monte_carlo_requires_seed(self):
        with pytest.raises(SeedRequiredError):
            simulate_trajectory(make_config(), MONTE_CARLO)

    def test_monte_carlo_matches_closed_form_within_three_se(self):
        cfg = make_config(
            curvatures=(1.0, 0.1),
            noise_levels=(0.02, 0.02),
            initial_residuals=(1.0, 1.0),
            exponent=-0.25,
            steps=30,
        )
        closed = simulate_trajectory(cfg, CLOSED_FORM)
        n_rep = 10_000
        acc = np.zeros((31, 2))
        acc2 = np.zeros((31, 2))
        for r in range(n_rep):
            traj = simulate_trajectory(cfg, MONTE_CARLO, seed=99, replica=r)
            sq = traj.values**2
            acc += sq
            acc2 += sq**2
        mean = acc / n_rep
        var = acc2 / n_rep - mean**2
        se = np.sqrt(np.maximum(var, 0.0) / n_rep)
        gap = np.abs(mean - closed.values)
        assert np.all(gap[1:] <= 3 * se[1:] + 1e-12)

    def test_replicas_are_independent_substreams(self):
        cfg = make_config(noise_levels=(0.01, 0.01), steps=5)
        a = simulate_trajectory(cfg, MONTE_CARLO, seed=7, replica=0)
        b = simulate_trajectory(cfg, MONTE_CARLO, seed=7, replica=1)
        c = simulate_trajectory(cfg, MONTE_CARLO, seed=7, replica=0)
        assert not np.array_equal(a.values, b.values)
        np.testing.assert_array_equal(a.values, c.values)

    def test_divergence_flagged(self):
        # eta*kappa far above the stability boundary
        cfg = make_config(eta=25.0, exponent=1.0, steps=400,
                          noise_levels=(0.0, 0.0))
        assert not stable_multiplier(1.0, 1.0, 25.0, 1.0)
        traj = simulate_trajectory(cfg, CLOSED_FORM)
        assert traj.diverged
        assert traj.diverged_step is not None
        assert traj.values.shape[0] == traj.diverged_step + 1
        assert np.isfinite(traj.values).all()

    def test_stability_boundary_predicate(self):
        assert stable_multiplier(0.5, 1.0, 0.1, 0.0)
        assert not stable_multiplier(1.0, 1.0, 2.0, 1.0)


class TestOptimalExponentSweep:
    grid = (-1.0, -0.5, -0.25, 0.0, 0.5, 1.0)

    def brute_force_totals(self, cfg, grid, horizon):
        totals = []
        for p in grid:
            state = np.asarray(cfg.initial_residuals, dtype=float) ** 2
            h = np.asarray(cfg.curvatures)
            c = np.asarray(cfg.noise_levels)
            for _ in range(horizon):
                mult = 1 - cfg.eta * cfg.kappa * h ** ((p + 1) / 2)
                state = mult**2 * state + cfg.eta**2 * h ** (p - 1.0) * c
            totals.append(float(state.sum()))
        return np.asarray(totals)

    def test_strong_only_signal_prefers_largest_exponent(self):
        cfg = make_config(
            curvatures=(1.0, 0.01),
            noise_levels=(0.0, 0.0),
            initial_residuals=(1.0, 0.0),
            steps=100,
        )
        res = optimal_exponent_sweep(cfg, self.grid)
        brute = self.brute_force_totals(cfg, self.grid, 100)
        np.testing.assert_allclose(res.totals, brute, rtol=1e-12)
        # unit curvature makes every exponent contract identically; the tie
        # breaks toward the largest exponent (least noise amplification)
        assert res.best_exponent == 1.0

    def test_flat_signal_low_noise_prefers_negative(self):
        cfg = make_config(
            curvatures=(1.0, 0.02),
            noise_levels=(1e-8, 1e-8),
            initial_residuals=(0.0, 1.0),
            steps=100,
        )
        res = optimal_exponent_sweep(cfg, self.grid)
        brute = self.brute_force_totals(cfg, self.grid, 100)
        np.testing.assert_allclose(res.totals, brute, rtol=1e-12)
        assert res.best_exponent < 0.0

    def test_noise_pushes_argmin_toward_zero(self):
        base = dict(
            curvatures=(1.0, 0.02),
            initial_residuals=(0.0, 1.0),
            steps=100,
        )
        lo = optimal_exponent_sweep(make_config(noise_levels=(1e-6, 1e-6), **base), self.grid)
        hi = optimal_exponent_sweep(make_config(noise_levels=(1e-4, 1e-4), **base), self.grid)
        assert hi.best_exponent >= lo.best_exponent

    def test_empty_grid_rejected(self):
        with pytest.raises(ValidationError):
            optimal_exponent_sweep(make_config(), ())


class TestSignalMetrics:
    def test_equal_energies_zero_shift(self):
        n = 16
        m = signal_metrics(np.ones(n), np.full(n, 0.5), np.linspace(0.01, 1.0, n))
        assert m.residual_shift == 0.0

    def test_energy_equal_noise_zero_everything(self):
        n = 20
        vals = np.linspace(0.2, 2.0, n)
        m = signal_metrics(vals, vals, np.linspace(0.01, 1.0, n))
        np.testing.assert_allclose(m.noise_adjusted, 0.0, atol=1e-15)
        assert m.flat_advantage == 0.0

    def test_hand_constructed_bucket_oracle(self):
        rng = np.random.default_rng(5)
        n = 16
        h = rng.uniform(0.01, 1.0, n)
        d2 = rng.uniform(0.1, 10.0, n)
        c = rng.uniform(0.001, 0.1, n)
        m = signal_metrics(d2, c, h, bucket_size=8)

        # brute force: explicit sort, explicit lower medians
        order = sorted(range(n), key=lambda i: -h[i])
        strong, flat = order[:8], order[-8:]

        def med(xs):
            s = sorted(xs)
            return s[(len(s) - 1) // 2]

        pi = med([np.log(d2[i]) for i in strong]) - med([np.log(d2[i]) for i in flat])
        u = [np.log(d2[i]) - np.log(c[i]) for i in range(n)]
        omega = med([u[i] for i in flat]) - med([u[i] for i in strong])
        assert m.residual_shift == pytest.approx(pi, abs=1e-12)
        assert m.flat_advantage == pytest.approx(omega, abs=1e-12)
        assert set(m.strong_bucket) == set(strong)
        assert set(m.flat_bucket) == set(flat)
        assert not (set(m.strong_bucket) & set(m.flat_bucket))

    def test_lower_median_even_count(self):
        assert lower_median(np.array([4.0, 1.0, 3.0, 2.0])) == 2.0

    def test_too_few_modes(self):
        with pytest.raises(TooFewModesError):
            signal_metrics(np.ones(15), np.ones(15), np.linspace(0.1, 1, 15))

    def test_nonpositive_rejected(self):
        with pytest.raises(NonPositiveInputError):
            signal_metrics(np.zeros(16), np.ones(16), np.linspace(0.1, 1, 16))


class TestConfigValidation:
    def test_unnormalized_spectrum_rejected(self):
        with pytest.raises(ValidationError):
            make_config(curvatures=(0.5, 0.01))

    def test_tiny_overshoot_clamped(self):
        cfg = make_config(curvatures=(1.0 + 1e-12, 0.01))
        assert max(cfg.curvatures) == 1.0

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValidationError):
            make_config(curvatures=(1.0, 0.5, 0.1))
