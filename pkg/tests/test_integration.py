"""End-to-end checks that chain several modules together."""

import json

import numpy as np
import pytest

from ratchet_transport.cli import main
from ratchet_transport.evolve import EvolveConfig, bump_field, relax_to_steady
from ratchet_transport.particles import empirical_mean_velocity, integrate_orbit, velocity_field
from ratchet_transport.potential import make_trig_potential
from ratchet_transport.response import geometric_sigmas, recover_moments
from ratchet_transport.steady import ChannelParams, QuadratureSpec, mean_velocity, steady_density


class TestTransportChain:
    """Relaxation, steady state and orbits tell the same story."""

    def test_relaxed_field_carries_the_steady_flux(self, standard_potential, unit_channel):
        """Test rho (v - V) = -I on the relaxed field, read as a snapshot at t = 0."""
        report = relax_to_steady(
            bump_field(256), standard_potential, unit_channel, EvolveConfig(dt=1e-3), 1e-10, 20_000
        )
        assert report.converged
        ss = steady_density(standard_potential, unit_channel, QuadratureSpec(n_points=256))
        x = report.field.grid
        v = velocity_field(report.field, standard_potential, unit_channel, x, 0.0)
        flux = report.field.values * (v - unit_channel.v)
        np.testing.assert_allclose(flux, -ss.current, atol=2e-3)

    def test_three_estimates_of_kappa(self, standard_potential, unit_channel, quadrature):
        """Test orbit slope, V - I and the harmonic form agree within 2e-3."""
        ss = steady_density(standard_potential, unit_channel, quadrature)
        kappa, kappa_harmonic = mean_velocity(ss)
        kappa_hat = empirical_mean_velocity(
            integrate_orbit(ss, standard_potential, unit_channel, 0.3, 500.0, 0.05)
        )
        assert abs(kappa_hat - kappa) <= 2e-3
        assert abs(kappa_hat - kappa_harmonic) <= 2e-3
        assert abs(kappa - kappa_harmonic) <= 2e-3


class TestMeanVelocityLaws:
    """Sign, bound and vanishing laws for kappa on a parameter grid."""

    def test_grid(self):
        """Test kappa over 10 voltages, 10 temperatures and 5 amplitudes."""
        q = QuadratureSpec(n_points=256)
        voltages = [-3.0, -2.0, -1.0, -0.5, -0.1, 0.0, 0.1, 0.5, 1.0, 2.0]
        for a in (0.0, 0.1, 0.25, 0.5, 1.0):
            p = make_trig_potential([0.0, 0.5 * a], [a, 0.0])
            for sigma in np.geomspace(0.3, 3.0, 10):
                for v in voltages:
                    ss = steady_density(p, ChannelParams(sigma=sigma, v=v), q)
                    kappa, kappa_harmonic = mean_velocity(ss)
                    if a == 0.0 or v == 0.0:
                        assert kappa == 0.0
                        continue
                    assert np.sign(kappa) == np.sign(v)
                    assert abs(kappa) <= abs(v)
                    assert abs(kappa - kappa_harmonic) <= 1e-7 * max(1.0, abs(v))


class TestMomentPipeline:
    """Resistance curve to even moments for sine potentials."""

    @pytest.mark.parametrize("a", [0.2, 0.5])
    def test_sine_moments(self, a):
        """Test M_2 = a^2/2 within 1e-3 and M_4 = 3a^4/8 within 5e-3."""
        recovery, _ = recover_moments(make_trig_potential([0.0], [a]), geometric_sigmas(8, 512, 12), 4)
        assert recovery.even_moments[0] == pytest.approx(a**2 / 2, rel=1e-3)
        assert recovery.even_moments[1] == pytest.approx(3 * a**4 / 8, rel=5e-3)
        assert abs(recovery.coeffs[0]) <= 1e-5
        assert abs(recovery.coeffs[2]) <= 1e-5

    def test_cli_matches_library(self, config_file, tmp_path):
        """Test recovery.json equals the library pipeline on the default grid."""
        config = config_file(potential={"cos": [0.0], "sin": [0.5]})
        assert main(["recover", "--config", str(config), "--out", str(tmp_path)]) == 0
        data = json.loads((tmp_path / "recovery.json").read_text())
        recovery, _ = recover_moments(make_trig_potential([0.0], [0.5]), geometric_sigmas(8, 512, 12), 4, QuadratureSpec())
        assert data["M_even"] == recovery.even_moments.tolist()
        assert data["c"] == recovery.coeffs.tolist()
