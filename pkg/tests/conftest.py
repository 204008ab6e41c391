import pytest
from hypothesis import HealthCheck, settings

from herglotz.model import ContactLagrangian

settings.register_profile(
    "suite",
    max_examples=60,
    derandomize=True,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.filter_too_much],
)
settings.load_profile("suite")


@pytest.fixture(scope="session")
def pu_model():
    """Fourth-order oscillator with linear dissipation (regular, k=2)."""
    return ContactLagrangian(
        1,
        2,
        "1/2*q0_1^2 - omega^2/2*q0_0^2 - lam/2*q0_2^2 - gamma*z",
        params={"omega": 1.0, "lam": 0.5, "gamma": 0.1},
        name="pais_uhlenbeck",
    )


@pytest.fixture(scope="session")
def osc_model():
    """Damped harmonic oscillator (regular, k=1)."""
    return ContactLagrangian(
        1,
        1,
        "1/2*q0_1^2 - 1/2*q0_0^2 - gamma*z",
        params={"gamma": 0.1},
        name="damped_oscillator",
    )


@pytest.fixture(scope="session")
def electron_model():
    """Three-dof fourth-order model with anti-damping (regular, k=2,
    n=3); its dynamics follows the classical radiation-reaction
    equation after an exponential reparametrization."""
    return ContactLagrangian(
        3,
        2,
        "m*tau^2/32*(q0_2^2 + q1_2^2 + q2_2^2)"
        " + 1/2*(q0_0^2 + q1_0^2 + q2_0^2) + 4/tau*z",
        params={"m": 1.0, "tau": 2.0},
        name="electron",
    )


@pytest.fixture(scope="session")
def singular_model():
    """Acceleration-coupled dissipation term; the Hessian in the top
    jets vanishes identically (singular, k=2)."""
    return ContactLagrangian(
        1,
        2,
        "1/2*m*q0_1^2 - 1/2*q0_0^2 - gamma*q0_2*z",
        params={"m": 1.0, "gamma": 0.3},
        name="singular_az",
    )
