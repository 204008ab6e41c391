"""End-to-end verification suites: contact-structure identities,
dissipation along trajectories, and Lagrangian/Hamiltonian equivalence."""

import numpy as np
import pytest

import herglotz.expr as ex
from herglotz.dynamics import RK4, integrate
from herglotz.errors import SingularLagrangian
from herglotz.expr import Coordinate
from herglotz.lagrangian import lagrangian_vector_field
from herglotz.model import ContactLagrangian
from herglotz.verify import (
    check_contact,
    check_dissipation,
    check_equivalence,
    exponential_bridge_residuals,
    run_all,
)

q = Coordinate.jet

PU_X0 = {q(0, 0): 1.0, q(0, 1): 0.2, q(0, 2): -0.3, q(0, 3): 0.1, ex.Z: 0.0}


def _assert_all_pass(reports):
    failing = [str(r) for r in reports if not r.passed]
    assert not failing, "\n".join(failing)


@pytest.fixture(scope="module")
def pu():
    # moderately damped, stable parameter choice for long trajectories
    return ContactLagrangian(
        1,
        2,
        "1/2*q0_1^2 - omega^2/2*q0_0^2 - lam/2*q0_2^2 - gamma*z",
        params={"omega": 1.3, "lam": 0.4, "gamma": 0.15},
        name="pu-verify",
    )


# ---------------------------------------------------------------------------
# contact-structure checks
# ---------------------------------------------------------------------------


def test_contact_checks_pass(pu, osc_model):
    for m in (pu, osc_model):
        reports = check_contact(m)
        names = {r.name for r in reports}
        assert "reeb-pairing i(R)eta = 1" in names
        assert "reeb-closure i(R)d(eta) = 0" in names
        assert any(n.startswith("nondegeneracy") for n in names)
        _assert_all_pass(reports)


def test_contact_checks_reject_singular(singular_model):
    with pytest.raises(SingularLagrangian):
        check_contact(singular_model)


# ---------------------------------------------------------------------------
# dissipation along trajectories
# ---------------------------------------------------------------------------


def test_dissipation_checks_pass(pu):
    X = lagrangian_vector_field(pu).bind_params(pu.param_bindings)
    traj = integrate(X, PU_X0, 0.0, 10.0, RK4(1e-3))
    reports = check_dissipation(pu, traj)
    names = {r.name for r in reports}
    assert "dissipation dE/dt = -R(E) E" in names
    assert "contact pairing i(X)eta = -E" in names
    assert "action equation dz/dt = L" in names
    _assert_all_pass(reports)


def test_conservative_limit_reports_conservation():
    cons = ContactLagrangian(
        1,
        2,
        "1/2*q0_1^2 - omega^2/2*q0_0^2 - lam/2*q0_2^2",
        params={"omega": 1.3, "lam": 0.4},
        name="pu-conservative",
    )
    X = lagrangian_vector_field(cons).bind_params(cons.param_bindings)
    traj = integrate(X, PU_X0, 0.0, 10.0, RK4(1e-3))
    reports = check_dissipation(cons, traj)
    drift = [r for r in reports if r.name.startswith("energy conservation")]
    assert drift and drift[0].max_residual <= 1e-8
    _assert_all_pass(reports)


def test_dissipation_scales_with_conditioning(electron_model):
    # anti-damped model: the state grows by ~18 orders of magnitude, so
    # raw residuals of dE/dt + R(E) E are meaningless; the check must
    # normalize by the magnitude of E's summands and still pass
    m = electron_model
    X = lagrangian_vector_field(m).bind_params(m.param_bindings)
    x0 = {c: 0.1 * (1 + j % 3) for j, c in enumerate(X.coords)}
    traj = integrate(X, x0, 0.0, 10.0, RK4(1e-3))
    reports = check_dissipation(m, traj)
    _assert_all_pass(reports)


# ---------------------------------------------------------------------------
# equivalence of the two formalisms
# ---------------------------------------------------------------------------


def test_equivalence_checks_pass(pu, osc_model):
    for m in (pu, osc_model):
        reports = check_equivalence(m)
        names = {r.name for r in reports}
        assert "energy pullback H o Leg = E_L (symbolic)" in names
        assert "pushforward Leg_* X_L = X_H" in names
        assert "trajectory match Leg o flow_L = flow_H" in names
        _assert_all_pass(reports)


def test_bridge_identity_electron(electron_model):
    res = exponential_bridge_residuals(electron_model, functions=10)
    assert len(res) == 10
    assert all(res)


def test_bridge_identity_requires_z_linear_rate(pu):
    # any model with constant dL/dz admits the exponential bridge
    res = exponential_bridge_residuals(pu, functions=6)
    assert all(res)


# ---------------------------------------------------------------------------
# the full battery
# ---------------------------------------------------------------------------


def test_run_all_oscillator(osc_model):
    reports = run_all(osc_model)
    assert len(reports) >= 8
    _assert_all_pass(reports)
    # report formatting carries the residual and tolerance
    text = str(reports[0])
    assert "pass" in text
    d = reports[0].as_dict()
    assert {"name", "context", "max_residual", "tolerance", "passed"} <= set(d)


def test_run_all_accepts_supplied_trajectory(pu):
    X = lagrangian_vector_field(pu).bind_params(pu.param_bindings)
    traj = integrate(X, PU_X0, 0.0, 5.0, RK4(1e-3))
    reports = run_all(pu, traj=traj)
    _assert_all_pass(reports)
