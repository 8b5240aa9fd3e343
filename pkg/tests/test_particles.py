"""Tests for the velocity field, orbits and mean-velocity estimates."""

import numpy as np
import pytest

from ratchet_transport.errors import DegenerateDensityError, InvalidInputError, StepRejectedError
from ratchet_transport.evolve import DensityField, uniform_field
from ratchet_transport.particles import (
    OrbitPath,
    empirical_mean_velocity,
    integrate_orbit,
    integrate_orbits,
    moving_frame_orbit,
    period_average_velocity,
    velocity_field,
)
from ratchet_transport.steady import ChannelParams, QuadratureSpec, mean_velocity, steady_density


@pytest.fixture
def standard_state(standard_potential, unit_channel, quadrature):
    """Steady state of 0.5 sin(2 pi x) at sigma = 1, V = 1."""
    return steady_density(standard_potential, unit_channel, quadrature)


class TestVelocityField:
    """velocity_field."""

    def test_no_potential_no_gradient(self, zero_potential):
        """Test v = 0 for psi = 0 and rho = 1."""
        x = np.linspace(0, 1, 33)
        v = velocity_field(uniform_field(64), zero_potential, ChannelParams(sigma=1.0, v=0.0), x)
        np.testing.assert_allclose(v, 0.0, atol=1e-12)

    def test_detailed_balance(self, standard_potential):
        """Test drift and osmotic terms cancel for the Boltzmann density."""
        c = ChannelParams(sigma=1.0, v=0.0)
        ss = steady_density(standard_potential, c, QuadratureSpec(n_points=4096))
        x = np.linspace(0, 1, 101)
        np.testing.assert_allclose(velocity_field(ss, standard_potential, c, x), 0.0, atol=1e-8)

    def test_constant_flux(self, standard_state, standard_potential, unit_channel):
        """Test rho-bar (v - V) = -I along the moving frame."""
        z = standard_state.grid
        v = velocity_field(standard_state, standard_potential, unit_channel, z)
        np.testing.assert_allclose(standard_state.rho * (v - unit_channel.v), -standard_state.current, atol=1e-6)

    def test_travelling_frame_shift(self, standard_state, standard_potential, unit_channel):
        """Test v(x, t) = v(x - V t, 0) for a steady-state source."""
        x = np.array([0.1, 0.45, 0.8])
        later = velocity_field(standard_state, standard_potential, unit_channel, x + 0.3, t=0.3)
        now = velocity_field(standard_state, standard_potential, unit_channel, x)
        np.testing.assert_allclose(later, now, atol=1e-12)

    def test_scalar_in_scalar_out(self, standard_state, standard_potential, unit_channel):
        """Test a float position gives a float velocity."""
        assert isinstance(velocity_field(standard_state, standard_potential, unit_channel, 0.25), float)

    def test_vanishing_density(self, zero_potential):
        """Test an empty cell is a degenerate density."""
        field = DensityField.from_values([0.0] + [1.0] * 15)
        with pytest.raises(DegenerateDensityError):
            velocity_field(field, zero_potential, ChannelParams(sigma=1.0, v=0.0), 0.0)


class TestOrbits:
    """integrate_orbit and moving_frame_orbit."""

    def test_rest(self, zero_potential):
        """Test x(t) = x0 for psi = 0, V = 0."""
        path = integrate_orbit(uniform_field(32), zero_potential, ChannelParams(sigma=1.0, v=0.0), 0.3, 5.0, 0.1)
        np.testing.assert_allclose(path.positions, 0.3, atol=1e-14)
        assert len(path) == 51

    def test_moving_frame_rest_at_zero_voltage(self, standard_potential, quadrature):
        """Test z(t) = z0 when I = 0."""
        ss = steady_density(standard_potential, ChannelParams(sigma=1.0, v=0.0), quadrature)
        path = moving_frame_orbit(ss, 0.4, 2.0, 0.1)
        assert np.all(path.positions == 0.4)

    def test_moving_frame_uniform_drift(self, zero_potential, unit_channel, quadrature):
        """Test z(t) = z0 - t for psi = 0, V = 1, sigma = 1."""
        ss = steady_density(zero_potential, unit_channel, quadrature)
        path = moving_frame_orbit(ss, 0.2, 5.0, 0.05)
        np.testing.assert_allclose(path.positions, 0.2 - path.times, atol=1e-10)

    def test_moving_frame_slope_independent_of_start(self, random_potential, quadrature):
        """Test two starting points give the same slope, equal to -I."""
        c = ChannelParams(sigma=1.0, v=2.0)
        ss = steady_density(random_potential(amplitude=0.2), c, quadrature)
        slopes = [empirical_mean_velocity(moving_frame_orbit(ss, z0, 500.0, 0.02)) for z0 in (0.1, 0.7)]
        assert slopes[0] == pytest.approx(slopes[1], abs=1e-3)
        assert slopes[0] == pytest.approx(-ss.current, abs=1e-3)

    def test_lab_orbit_endpoint_ratio(self, standard_state, standard_potential, unit_channel):
        """Test x(200)/200 is within 1e-3 of kappa."""
        path = integrate_orbit(standard_state, standard_potential, unit_channel, 0.0, 200.0, 0.05)
        assert path.positions[-1] / path.times[-1] == pytest.approx(standard_state.kappa, abs=1e-3)

    def test_orbits_unwrap(self, standard_state, standard_potential, unit_channel):
        """Test positions leave [0, 1) instead of wrapping."""
        path = integrate_orbit(standard_state, standard_potential, unit_channel, 0.5, 50.0, 0.05)
        assert path.positions[-1] > 1.0

    def test_initial_condition_independence(self, rng, standard_state, standard_potential, unit_channel):
        """Test eight random starts give mean velocities within 1e-3 of each other."""
        paths = integrate_orbits(standard_state, standard_potential, unit_channel, rng.uniform(0, 1, 8), 500.0, 0.05)
        estimates = [empirical_mean_velocity(path) for path in paths]
        assert max(estimates) - min(estimates) <= 1e-3

    def test_step_rejection(self, zero_potential, unit_channel, quadrature):
        """Test |v| dt > 0.25 is rejected with the step index."""
        ss = steady_density(zero_potential, unit_channel, quadrature)
        with pytest.raises(StepRejectedError) as excinfo:
            moving_frame_orbit(ss, 0.0, 5.0, 0.5)
        assert excinfo.value.step_index == 0

    @pytest.mark.parametrize("t_end,dt", [(1.0, 0.0), (0.01, 0.1)])
    def test_bad_time_arguments(self, zero_potential, t_end, dt):
        """Test dt <= 0 and t_end < dt are invalid input."""
        with pytest.raises(InvalidInputError):
            integrate_orbit(uniform_field(16), zero_potential, ChannelParams(sigma=1.0, v=0.0), 0.0, t_end, dt)

    def test_csv_export(self, tmp_path):
        """Test the t,x columns."""
        path = OrbitPath(times=np.array([0.0, 0.5]), positions=np.array([0.1, 1.2]))
        target = tmp_path / "orbit.csv"
        path.write_csv(target)
        assert target.read_text().splitlines() == ["t,x", "0,0.1", "0.5,1.2"]

    def test_times_must_increase(self):
        """Test non-increasing times are invalid input."""
        with pytest.raises(InvalidInputError):
            OrbitPath(times=np.array([0.0, 0.0]), positions=np.array([0.0, 1.0]))


class TestMeanVelocity:
    """empirical_mean_velocity and period averages."""

    def test_constant_path(self):
        """Test a constant path has zero slope."""
        times = np.linspace(0, 10, 32)
        assert abs(empirical_mean_velocity(OrbitPath(times=times, positions=np.full(32, 3.0)))) < 1e-12

    def test_linear_path(self):
        """Test an exactly linear path returns its slope."""
        times = np.linspace(0, 10, 64)
        path = OrbitPath(times=times, positions=0.37 * times - 2.0)
        assert empirical_mean_velocity(path, 0.25) == pytest.approx(0.37, abs=1e-12)

    def test_too_few_points(self):
        """Test fewer than 16 points are invalid input."""
        times = np.arange(10.0)
        with pytest.raises(InvalidInputError):
            empirical_mean_velocity(OrbitPath(times=times, positions=times))

    @pytest.mark.parametrize("fraction", [-0.1, 1.0])
    def test_burn_in_range(self, fraction):
        """Test burn_in_fraction outside [0, 1) is invalid input."""
        times = np.arange(32.0)
        with pytest.raises(InvalidInputError):
            empirical_mean_velocity(OrbitPath(times=times, positions=times), fraction)

    def test_consistency_chain(self, standard_state, standard_potential, unit_channel):
        """Test the orbit slope, V - I and the harmonic form agree within 2e-3."""
        path = integrate_orbit(standard_state, standard_potential, unit_channel, 0.0, 500.0, 0.05)
        kappa_hat = empirical_mean_velocity(path)
        kappa, kappa_harmonic = mean_velocity(standard_state)
        assert kappa_hat == pytest.approx(kappa, abs=1e-3)
        assert kappa_hat == pytest.approx(kappa_harmonic, abs=2e-3)
        assert kappa == pytest.approx(kappa_harmonic, abs=2e-3)

    def test_period_average(self, standard_state, standard_potential):
        """Test the time average of v over a steady period equals kappa."""
        assert period_average_velocity(standard_state, standard_potential) == pytest.approx(
            standard_state.kappa, abs=1e-3
        )

    def test_period_average_at_rest(self, standard_potential, quadrature):
        """Test no current means no average motion."""
        ss = steady_density(standard_potential, ChannelParams(sigma=1.0, v=0.0), quadrature)
        assert period_average_velocity(ss, standard_potential) == 0.0
