"""Report payload assembly, text rendering, and serialization."""

import io
import json

import numpy as np

import herglotz.expr as ex
from herglotz.dynamics import (
    RK4,
    CurveSpec,
    integrate,
    variational_check,
)
from herglotz.expr import Coordinate
from herglotz.lagrangian import lagrangian_vector_field
from herglotz.report import (
    chain_report,
    check_report,
    derivation_report,
    render_chain,
    render_checks,
    render_derivation,
    render_variational,
    sigma_csv,
    to_json,
    variational_report,
    write_trajectory_csv,
)
from herglotz.unified import Mode, constraint_algorithm
from herglotz.verify import run_all

q = Coordinate.jet


def test_derivation_report_regular(pu_model):
    payload = derivation_report(pu_model)
    assert payload["model"]["name"] == "pais_uhlenbeck"
    assert payload["regularity"]["verdict"] == "Regular"
    assert set(payload["momenta"]) == {"p0_0", "p1_0"}
    assert payload["hamiltonian"] is not None
    assert len(payload["equations_of_motion"]) == 1
    # rendered expressions re-parse to something equivalent
    ctx = ex.ParseContext(
        1, 2, max_order=4, params={"omega", "lam", "gamma"}
    )
    reparsed = ex.parse(payload["momenta"]["p1_0"], ctx)
    assert ex.equivalent(reparsed, ex.parse("-lam*q0_2", ctx))
    text = render_derivation(payload)
    assert "momenta" in text and "energy" in text
    assert "p1_0" in text


def test_derivation_report_singular(singular_model):
    payload = derivation_report(singular_model)
    assert payload["regularity"]["verdict"] == "Singular"
    assert payload["hamiltonian"] is None
    assert "hamiltonian_note" in payload
    text = render_derivation(payload)
    assert "Singular" in text


def test_chain_report(pu_model):
    ch = constraint_algorithm(pu_model, Mode.HOLONOMY_FIRST)
    payload = chain_report(ch)
    assert payload["mode"] == "HolonomyFirst"
    assert payload["status"] == "Determined"
    assert payload["tangency_residual"] <= 1e-8
    text = render_chain(payload)
    assert "Determined" in text
    assert "level" in text.lower()


def test_check_report_and_rendering(osc_model):
    reports = run_all(osc_model)
    payload = check_report(reports)
    assert payload["all_passed"]
    assert [c["name"] for c in payload["checks"]] == [r.name for r in reports]
    text = render_checks(payload)
    assert "all checks passed" in text
    blob = to_json(payload)
    assert json.loads(blob)["all_passed"]


def test_to_json_handles_numpy_scalars():
    blob = to_json({"a": np.float64(0.5), "b": np.int64(3)})
    assert json.loads(blob) == {"a": 0.5, "b": 3}
    try:
        to_json({"bad": object()})
    except TypeError as e:
        assert "not JSON serializable" in str(e)
    else:
        raise AssertionError("expected TypeError")


def test_trajectory_csv(osc_model):
    X = lagrangian_vector_field(osc_model).bind_params(
        osc_model.param_bindings
    )
    traj = integrate(
        X, {q(0, 0): 1.0, q(0, 1): 0.0, ex.Z: 0.0}, 0.0, 0.1, RK4(1e-2)
    )
    buf = io.StringIO()
    write_trajectory_csv(traj, buf)
    lines = buf.getvalue().strip().splitlines()
    assert lines[0] == "t,q0_0,q0_1,z"
    assert len(lines) == len(traj.times) + 1
    first = lines[1].split(",")
    assert float(first[0]) == 0.0
    assert float(first[1]) == 1.0


def test_sigma_csv():
    buf = io.StringIO()
    sigma_csv([0.0, 0.5], [1.0, 1.3], buf)
    lines = buf.getvalue().strip().splitlines()
    assert lines[0] == "t,sigma"
    assert lines[1] == "0,1"


def test_variational_report(pu_model):
    m = pu_model
    X = lagrangian_vector_field(m).bind_params(m.param_bindings)
    x0 = {q(0, 0): 1.0, q(0, 1): 0.2, q(0, 2): -0.3, q(0, 3): 0.1, ex.Z: 0.0}
    traj = integrate(X, x0, 0.0, 1.0, RK4(1e-3))
    base = CurveSpec.fit_trajectory(traj, [q(0, 0)], degree=24)
    rows = variational_check(m, base, z0=0.0, variations=4, eps=1e-4)
    payload = variational_report(rows)
    assert payload["critical"]
    assert payload["max_ratio"] <= 1e-3
    assert len(payload["variations"]) == 4
    text = render_variational(payload)
    assert "critical" in text
    json.loads(to_json(payload))
