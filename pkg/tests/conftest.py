"""Pytest configuration and shared fixtures for Ratchet Transport tests."""

import json
import logging
import os
from unittest.mock import patch

import numpy as np
import pytest

from ratchet_transport.potential import make_trig_potential, random_trig_potential
from ratchet_transport.steady import ChannelParams, QuadratureSpec


@pytest.fixture
def standard_potential():
    """psi(x) = 0.5 sin(2 pi x), the standard test potential."""
    return make_trig_potential([0.0], [0.5])


@pytest.fixture
def zero_potential():
    return make_trig_potential([], [])


@pytest.fixture
def cosine_potential():
    """psi(x) = cos(2 pi x), symmetric rather than antisymmetric."""
    return make_trig_potential([1.0], [0.0])


@pytest.fixture
def unit_channel():
    """sigma = 1, V = 1."""
    return ChannelParams(sigma=1.0, v=1.0)


@pytest.fixture
def quadrature():
    return QuadratureSpec(n_points=1024)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def random_potential(rng):
    """Factory for seeded random potentials with coefficients in [-amplitude, amplitude]."""

    def make(K=3, amplitude=0.4):
        return random_trig_potential(K, amplitude, rng)

    return make


@pytest.fixture
def clean_env():
    """Environment without RT_* overrides."""
    env = {k: v for k, v in os.environ.items() if not k.startswith("RT_")}
    with patch.dict(os.environ, env, clear=True):
        yield env


@pytest.fixture
def config_file(tmp_path):
    """Factory writing a JSON run configuration into tmp_path."""

    def make(name="run.json", **fields):
        path = tmp_path / name
        path.write_text(json.dumps(fields))
        return path

    return make


@pytest.fixture(autouse=True)
def restore_root_logging():
    """Undo the basicConfig(force=True) a CLI run applies to the root logger."""
    root = logging.getLogger()
    handlers, level = root.handlers[:], root.level
    yield
    root.handlers[:] = handlers
    root.setLevel(level)
