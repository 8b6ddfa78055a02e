"""Shared fixtures: the benchmark model and one reusable certificate."""

import pytest

from phpetc import certify_polytopic, make_pendulum_model, pendulum_hessian_bounds


@pytest.fixture(scope="session")
def pendulum():
    return make_pendulum_model()


@pytest.fixture(scope="session")
def pendulum_cert(pendulum):
    """A certificate at delta_M = 0.3 valid over the whole Hessian polytope,
    so the decrease bound holds along any trajectory."""
    cert = certify_polytopic(pendulum, delta_M=0.3, sigma=0.19,
                             vertex_bounds=pendulum_hessian_bounds())
    assert cert.feasible
    return cert
