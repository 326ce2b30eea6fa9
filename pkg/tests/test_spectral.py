import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from specshape.errors import (
    RankDeficientError,
    ValidationError,
    ZeroMatrixError,
)
from specshape.linalg import svd
from specshape.models import random_orthogonal
from specshape.spectral import (
    DEFAULT_NS,
    NewtonSchulzConfig,
    exact_spectral_shape,
    fast_spectral,
    newton_schulz,
    shaping_error,
)


def scalar_quintic_orbit(x0, cfg=DEFAULT_NS):
    """Independent oracle: the Newton-Schulz action on one singular value."""
    a, b, c = cfg.coefficients
    x = x0
    for _ in range(cfg.steps):
        x = a * x + b * x**3 + c * x**5
    return x


def taylor_half_power(lam, p):
    """Independent oracle: quadratic Taylor value of lam**(p/2) about lam=1."""
    d = p / 2.0
    e = lam - 1.0
    return 1.0 + d * e + 0.5 * d * (d - 1.0) * e * e


class TestExactSpectralShape:
    def test_polar_of_diagonal(self):
        out = exact_spectral_shape(np.diag([4.0, 3.0]), 0.0)
        np.testing.assert_allclose(out, np.eye(2), atol=1e-12)

    def test_reciprocal_spectrum(self):
        out = exact_spectral_shape(np.diag([4.0, 3.0]), -1.0)
        np.testing.assert_allclose(out, np.diag([0.25, 1.0 / 3.0]), atol=1e-12)

    def test_square_root_spectrum(self):
        out = exact_spectral_shape(np.diag([4.0, 3.0]), 0.5)
        np.testing.assert_allclose(out, np.diag([2.0, np.sqrt(3.0)]), atol=1e-12)

    def test_identity_exponent_returns_input(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((5, 3))
        np.testing.assert_allclose(exact_spectral_shape(x, 1.0), x, atol=1e-8)

    def test_fractional_negative_via_svd_oracle(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal((4, 3))
        out = exact_spectral_shape(x, -0.25)
        sv_in = svd(x).singular_values
        sv_out = svd(out).singular_values
        np.testing.assert_allclose(np.sort(sv_out), np.sort(sv_in**-0.25), atol=1e-8)
        # singular direction preservation: the polar factors must agree
        np.testing.assert_allclose(
            exact_spectral_shape(out, 0.0), exact_spectral_shape(x, 0.0), atol=1e-8
        )

    def test_unit_spectrum_at_zero(self):
        rng = np.random.default_rng(2)
        sv = svd(exact_spectral_shape(rng.standard_normal((6, 4)), 0.0)).singular_values
        np.testing.assert_allclose(sv, np.ones(4), atol=1e-8)

    def test_rank_deficient_negative_power_raises(self):
        x = np.diag([1.0, 0.0])
        with pytest.raises(RankDeficientError):
            exact_spectral_shape(x, -0.5)

    def test_zero_exponent_accepts_rank_deficiency(self):
        out = exact_spectral_shape(np.diag([1.0, 0.0]), 0.0)
        np.testing.assert_allclose(svd(out).singular_values, [1.0, 1.0], atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from([-0.5, -0.25, 0.0, 0.5, 1.0]),
       st.floats(0.1, 10.0))
def test_scale_covariance_property(seed, p, c):
    x = np.random.default_rng(seed).standard_normal((4, 5))
    lhs = exact_spectral_shape(c * x, p)
    rhs = (c**p) * exact_spectral_shape(x, p)
    assert np.linalg.norm(lhs - rhs) <= 1e-8 * max(1.0, np.linalg.norm(rhs))


class TestNewtonSchulzConfig:
    def test_default_is_valid(self):
        cfg = NewtonSchulzConfig()
        assert cfg.steps == 5
        assert cfg.coefficients == (3.4445, -4.7750, 2.0315)

    def test_steps_must_be_positive(self):
        with pytest.raises(ValidationError):
            NewtonSchulzConfig(steps=0)

    def test_unbounded_scalar_map_rejected(self):
        with pytest.raises(ValidationError):
            NewtonSchulzConfig(coefficients=(20.0, 0.0, 0.0), steps=3)


class TestNewtonSchulz:
    def test_zero_matrix_rejected(self):
        with pytest.raises(ZeroMatrixError):
            newton_schulz(np.zeros((2, 2)))

    def test_scalar_case_matches_quintic_orbit(self):
        # 1x1 input [2]: normalization puts the single value at 1.0, the
        # output is exactly the scalar orbit from 1.0
        out = newton_schulz(np.array([[2.0]]))
        assert out[0, 0] == pytest.approx(scalar_quintic_orbit(1.0), abs=1e-15)

    def test_diagonal_values_match_per_sigma_orbit(self):
        x = np.diag([1.0, 0.1])
        fn = np.linalg.norm(x)
        out = newton_schulz(x)
        expected = np.diag([scalar_quintic_orbit(1.0 / fn), scalar_quintic_orbit(0.1 / fn)])
        np.testing.assert_allclose(out, expected, atol=1e-12)
        sv = svd(out).singular_values
        assert np.all(sv >= 0.7) and np.all(sv <= 1.3)

    def test_orthogonal_direction_preserved(self):
        # the iteration only rescales the (equal) spectrum of an orthogonal
        # input; with the default coefficients the final scalar sits in the
        # measured oscillation band [0.68, 1.14]
        for m, seed in [(2, 3), (3, 4), (5, 5)]:
            q = random_orthogonal(m, np.random.default_rng(seed))
            out = newton_schulz(q)
            factor = scalar_quintic_orbit(1.0 / np.sqrt(m))
            np.testing.assert_allclose(out, factor * q, atol=1e-10)
            assert 0.68 <= abs(factor) <= 1.14

    def test_band_for_spread_spectrum(self):
        # every normalized singular value above 0.05 lands in the measured
        # band of the default quintic orbit
        rng = np.random.default_rng(6)
        x = rng.standard_normal((8, 12))
        out = newton_schulz(x)
        xn_sv = svd(x / np.linalg.norm(x)).singular_values
        out_sv = svd(out).singular_values
        for s_in, s_out in zip(np.sort(xn_sv), np.sort(out_sv)):
            if s_in > 0.05:
                assert 0.68 <= s_out <= 1.14

    def test_tall_input_transposed_internally(self):
        rng = np.random.default_rng(7)
        x = rng.standard_normal((9, 3))
        out = newton_schulz(x)
        assert out.shape == (9, 3)
        np.testing.assert_allclose(newton_schulz(x.T), out.T, atol=1e-12)


class TestFastSpectral:
    def test_scalar_taylor_example(self):
        # s*I_2 input: the Gram spectrum collapses to 1/2, so the correction
        # is the scalar Taylor value of (1/2)**(p/2); frozen oracle values
        # for p = -0.25: Taylor 1.080078125 vs exact 2**0.125 = 1.0905077...
        assert taylor_half_power(0.5, -0.25) == pytest.approx(1.080078125, abs=1e-12)
        assert 2.0**0.125 == pytest.approx(1.0905077326652577, abs=1e-12)
        x = 3.0 * np.eye(2)
        out = fast_spectral(x, -0.25)
        fn = np.linalg.norm(x)
        expected = (
            fn**-0.25
            * taylor_half_power(0.5, -0.25)
            * scalar_quintic_orbit(1.0 / np.sqrt(2.0))
            * np.eye(2)
        )
        np.testing.assert_allclose(out, expected, atol=1e-12)

    def test_zero_exponent_collapses_to_newton_schulz(self):
        rng = np.random.default_rng(8)
        x = rng.standard_normal((4, 6))
        np.testing.assert_allclose(fast_spectral(x, 0.0), newton_schulz(x), atol=1e-14)

    def test_eigen_space_scalar_oracle(self):
        # diagonalizing the normalized Gram matrix, the output must equal
        # ||x||**p * Q taylor(lam) Q^T applied to the orthogonalized matrix
        rng = np.random.default_rng(9)
        x = rng.standard_normal((8, 16))
        p = -0.25
        out = fast_spectral(x, p)
        fn = np.linalg.norm(x)
        xn = x / fn
        lam, q = np.linalg.eigh(xn @ xn.T)
        y = newton_schulz(xn)
        corr = (q * taylor_half_power(lam, p)) @ q.T
        expected = (fn**p) * corr @ y
        assert np.linalg.norm(out - expected) <= 1e-10

    def test_correction_error_is_scalar_taylor_remainder(self):
        # per-eigenvalue gap between the correction and the true half power
        # equals the scalar second-order Taylor remainder
        rng = np.random.default_rng(10)
        x = rng.standard_normal((8, 16))
        p = -0.25
        xn = x / np.linalg.norm(x)
        gram = xn @ xn.T
        lam, q = np.linalg.eigh(gram)
        eye = np.eye(8)
        e = gram - eye
        corr = eye + (p / 2) * e + 0.5 * (p / 2) * (p / 2 - 1.0) * (e @ e)
        corr_evals = np.diag(q.T @ corr @ q)
        for lam_i, c_i in zip(lam, corr_evals):
            remainder = taylor_half_power(lam_i, p) - lam_i ** (p / 2)
            assert c_i - lam_i ** (p / 2) == pytest.approx(remainder, abs=1e-10)

    def test_tall_input_handled_by_transposition(self):
        rng = np.random.default_rng(11)
        x = rng.standard_normal((16, 8))
        out = fast_spectral(x, -0.1)
        np.testing.assert_allclose(out, fast_spectral(x.T, -0.1).T, atol=1e-12)
        assert out.shape == (16, 8)

    def test_rank_deficient_input_accepted(self):
        # unlike the exact path, the Taylor polynomial is finite at 0
        x = np.diag([1.0, 0.0]) @ np.ones((2, 3))
        out = fast_spectral(x, -0.25)
        assert np.isfinite(out).all()

    def test_zero_matrix_rejected(self):
        with pytest.raises(ZeroMatrixError):
            fast_spectral(np.zeros((3, 3)), -0.25)


class TestShapingError:
    def test_orthogonal_input_zero_error(self):
        # all normalized singular values equal: both paths emit multiples of
        # the same orthogonal matrix, so the scale-matched error vanishes
        q = random_orthogonal(4, np.random.default_rng(12))
        for p in (-0.25, -0.1, 0.0, 0.5):
            report = shaping_error(q, p)
            assert report.frobenius_error_vs_exact <= 1e-8
            assert report.max_singular_value_error <= 1e-8

    def test_zero_exponent_reduces_to_ns_error(self):
        rng = np.random.default_rng(13)
        x = rng.standard_normal((5, 7))
        report = shaping_error(x, 0.0)
        y = newton_schulz(x)
        target = exact_spectral_shape(x / np.linalg.norm(x), 0.0)
        s = np.linalg.norm(y) / np.linalg.norm(target)
        expected = np.linalg.norm(y - s * target) / np.linalg.norm(target)
        assert report.frobenius_error_vs_exact == pytest.approx(expected, abs=1e-12)

    def test_diagonal_case_against_scalar_oracle(self):
        # diag(4,3), p=-0.1: every factor of both paths has a closed scalar
        # form, so the report can be predicted exactly
        x = np.diag([4.0, 3.0])
        p = -0.1
        report = shaping_error(x, p)
        fn = np.linalg.norm(x)
        sig_n = np.array([4.0, 3.0]) / fn
        lam = sig_n**2
        fast_sigma = (fn**p) * taylor_half_power(lam, p) * np.array(
            [scalar_quintic_orbit(s) for s in sig_n]
        )
        exact_sigma = (fn**p) * sig_n**p
        s = np.linalg.norm(fast_sigma) / np.linalg.norm(exact_sigma)
        frob = np.linalg.norm(fast_sigma - s * exact_sigma) / np.linalg.norm(exact_sigma)
        assert report.frobenius_error_vs_exact == pytest.approx(frob, abs=1e-10)
        expected_gap = np.max(np.abs(np.sort(fast_sigma) - np.sort(s * exact_sigma)))
        assert report.max_singular_value_error == pytest.approx(expected_gap, abs=1e-10)

    def test_negative_p_requires_full_rank(self):
        x = np.diag([1.0, 0.0])
        with pytest.raises(RankDeficientError):
            shaping_error(x, -0.25)
