"""Tests for the periodic potential and its moments."""

import math

import numpy as np
import pytest
from pydantic import ValidationError

from ratchet_transport.errors import InvalidInputError
from ratchet_transport.potential import (
    PeriodicPotential,
    is_antisymmetric,
    make_trig_potential,
    moment,
)


class TestConstruction:
    """Building potentials from coefficient lists."""

    def test_empty_lists_give_zero_potential(self):
        """Test that ([], []) is the zero potential."""
        p = make_trig_potential([], [])
        assert p.bandwidth == 0
        assert p.eval(0.37) == 0.0
        assert np.all(p.eval(np.linspace(-2, 2, 17)) == 0.0)

    def test_coefficients_are_kept(self):
        """Test that the coefficients come back unchanged."""
        p = make_trig_potential([0.1, -0.2], [0.3, 0.4])
        assert p.cos_coeffs == (0.1, -0.2)
        assert p.sin_coeffs == (0.3, 0.4)

    def test_length_mismatch_rejected(self):
        """Test that unequal coefficient lists are invalid input."""
        with pytest.raises(InvalidInputError):
            make_trig_potential([1.0], [])

    @pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
    def test_non_finite_rejected(self, bad):
        """Test that non-finite coefficients are invalid input."""
        with pytest.raises(InvalidInputError):
            make_trig_potential([bad], [0.0])

    def test_model_validation_rejects_non_finite(self):
        """Test that the pydantic model itself refuses NaN."""
        with pytest.raises(ValidationError):
            PeriodicPotential(cos_coeffs=[math.nan], sin_coeffs=[0.0])

    def test_json_round_trip(self):
        """Test that to_json and from_json agree."""
        p = make_trig_potential([0.25, 0.0], [0.5, -0.125])
        assert PeriodicPotential.from_json(p.to_json()) == p

    def test_unknown_keys_rejected(self):
        """Test that from_dict rejects keys other than cos and sin."""
        with pytest.raises(InvalidInputError):
            PeriodicPotential.from_dict({"cos": [1.0], "sin": [0.0], "tan": [1.0]})


class TestEvaluation:
    """eval and eval_derivative."""

    def test_sine_quarter_period(self, standard_potential):
        """Test 0.5 sin(2 pi x) at x = 0.25."""
        assert standard_potential.eval(0.25) == pytest.approx(0.5, abs=1e-15)

    def test_periodicity(self, standard_potential):
        """Test eval(1.25) = eval(0.25)."""
        assert standard_potential.eval(1.25) == pytest.approx(0.5, abs=1e-14)
        x = np.linspace(-3, 3, 41)
        np.testing.assert_allclose(standard_potential.eval(x + 1), standard_potential.eval(x), atol=1e-13)

    def test_cosine_extremes(self, cosine_potential):
        """Test cos(2 pi x) at 0 and 0.5."""
        assert cosine_potential.eval(0.0) == pytest.approx(1.0)
        assert cosine_potential.eval(0.5) == pytest.approx(-1.0)

    def test_term_by_term(self):
        """Test a two-mode potential against its terms evaluated separately."""
        p = make_trig_potential([1.0, 0.0], [0.0, 0.3])
        x = 0.1
        expected = math.cos(2 * math.pi * x) + 0.3 * math.sin(4 * math.pi * x)
        assert p.eval(x) == pytest.approx(expected, abs=1e-15)

    def test_derivative_of_sine_at_zero(self, standard_potential):
        """Test psi'(0) = pi for 0.5 sin(2 pi x)."""
        assert standard_potential.eval_derivative(0.0) == pytest.approx(math.pi)

    def test_derivative_of_zero(self, zero_potential):
        """Test the zero potential has zero slope."""
        assert zero_potential.eval_derivative(0.3) == 0.0

    def test_derivative_matches_central_differences(self, random_potential):
        """Test eval_derivative against central differences with step 1e-5."""
        p = random_potential(K=4, amplitude=0.5)
        x = np.arange(64) / 64
        h = 1e-5
        numeric = (p.eval(x + h) - p.eval(x - h)) / (2 * h)
        np.testing.assert_allclose(p.eval_derivative(x), numeric, atol=1e-6)

    def test_mean_is_zero(self, random_potential):
        """Test that there is no constant term."""
        p = random_potential(K=5)
        assert abs(np.mean(p.sample(np.arange(256) / 256))) < 1e-15

    def test_reflection(self, random_potential):
        """Test reflected() evaluates psi(-x)."""
        p = random_potential()
        x = np.linspace(0, 1, 11)
        np.testing.assert_allclose(p.reflected().eval(x), p.eval(-x), atol=1e-14)

    def test_oscillation(self, standard_potential):
        """Test max - min of 0.5 sin(2 pi x)."""
        assert standard_potential.oscillation() == pytest.approx(1.0, abs=1e-12)


class TestMoments:
    """Moments by the periodic trapezoid rule."""

    def test_zeroth_moment(self, random_potential):
        """Test M_0 = 1."""
        assert moment(random_potential(), 0, 64) == 1.0

    def test_first_moment_vanishes(self, random_potential):
        """Test M_1 = 0 for any potential."""
        assert abs(moment(random_potential(K=3), 1, 64)) < 1e-15

    def test_sine_moments(self, standard_potential):
        """Test M_2 = 0.125 and M_4 = 3 * 0.5^4 / 8 for 0.5 sin(2 pi x)."""
        assert moment(standard_potential, 2, 64) == pytest.approx(0.125, rel=1e-14)
        assert moment(standard_potential, 4, 64) == pytest.approx(3 * 0.5**4 / 8, rel=1e-14)

    def test_odd_moment_of_antisymmetric(self, standard_potential):
        """Test odd moments vanish for an antisymmetric potential."""
        assert abs(moment(standard_potential, 3, 64)) < 1e-15

    def test_too_few_points(self):
        """Test that n_points < 4 K j is invalid input."""
        p = make_trig_potential([0.1, 0.1], [0.0, 0.0])
        with pytest.raises(InvalidInputError):
            moment(p, 4, 16)

    def test_negative_order(self, standard_potential):
        """Test that j < 0 is invalid input."""
        with pytest.raises(InvalidInputError):
            moment(standard_potential, -1, 64)


class TestAntisymmetry:
    """is_antisymmetric."""

    def test_sine_is_antisymmetric(self, standard_potential):
        """Test that a pure sine series passes."""
        assert is_antisymmetric(standard_potential, 1e-12)

    def test_cosine_is_not(self, cosine_potential):
        """Test that cos(2 pi x) fails."""
        assert not is_antisymmetric(cosine_potential, 1e-6)

    def test_zero_potential_passes(self, zero_potential):
        """Test that psi = 0 is antisymmetric."""
        assert is_antisymmetric(zero_potential, 1e-12)

    def test_tolerance_must_be_positive(self, standard_potential):
        """Test that tol <= 0 is invalid input."""
        with pytest.raises(InvalidInputError):
            is_antisymmetric(standard_potential, 0.0)
