"""Model construction, TOML loading, and regularity classification."""

import pytest

from herglotz import expr as ex
from herglotz.errors import ModelError, OrderOutOfRange
from herglotz.expr import Coordinate
from herglotz.model import (
    ContactLagrangian,
    Regularity,
    bundled_model_names,
    classify,
    hamiltonian_coords,
    hessian,
    lagrangian_coords,
    load_model,
    symbolic_det,
    unified_coords,
)

jet = Coordinate.jet


# ---------------------------------------------------------------------------
# coordinate layouts
# ---------------------------------------------------------------------------


def test_lagrangian_coords_layout():
    coords = lagrangian_coords(2, 2)
    names = [c.name for c in coords]
    assert names == [
        "q0_0", "q1_0", "q0_1", "q1_1", "q0_2", "q1_2", "q0_3", "q1_3", "z",
    ]


def test_hamiltonian_coords_layout():
    names = [c.name for c in hamiltonian_coords(1, 2)]
    assert names == ["q0_0", "q0_1", "p0_0", "p1_0", "z"]


def test_unified_coords_layout():
    names = [c.name for c in unified_coords(1, 2)]
    assert names == ["q0_0", "q0_1", "q0_2", "q0_3", "p0_0", "p1_0", "z"]
    assert len(unified_coords(3, 2)) == 3 * (4 + 2) + 1


# ---------------------------------------------------------------------------
# ContactLagrangian validation
# ---------------------------------------------------------------------------


def test_model_basic_properties(pu_model):
    assert pu_model.n == 1 and pu_model.k == 2
    assert pu_model.params == {"omega": 1.0, "lam": 0.5, "gamma": 0.1}
    bound = pu_model.L_bound
    assert ex.free_params(bound) == set()
    assert pu_model == ContactLagrangian(
        1, 2, ex.render(pu_model.L), params=pu_model.params,
        name=pu_model.name,
    )


def test_model_is_immutable(pu_model):
    with pytest.raises(AttributeError):
        pu_model.n = 3


def test_model_rejects_bad_shape():
    with pytest.raises(ModelError):
        ContactLagrangian(0, 1, "z")
    with pytest.raises(ModelError):
        ContactLagrangian(1, 0, "z")
    with pytest.raises(ModelError):
        ContactLagrangian(1, "1", "z")


def test_model_rejects_overflowing_order():
    with pytest.raises(OrderOutOfRange):
        ContactLagrangian(1, 1, "q0_2^2")


def test_model_rejects_unknown_dof_and_momenta():
    with pytest.raises(Exception):
        ContactLagrangian(1, 1, "q1_0^2")
    with pytest.raises(Exception):
        ContactLagrangian(1, 1, "p0_0*q0_1")


def test_model_rejects_unbound_and_bad_params():
    with pytest.raises(ModelError, match="unbound parameters"):
        ContactLagrangian(1, 1, "mass*q0_1^2")
    with pytest.raises(ModelError, match="must be a number"):
        ContactLagrangian(1, 1, "mass*q0_1^2", params={"mass": "heavy"})
    with pytest.raises(ModelError, match="must be a number"):
        ContactLagrangian(1, 1, "mass*q0_1^2", params={"mass": True})


def test_param_bindings_and_bind(pu_model):
    e = ex.parse("lam*q0_2", ex.ParseContext(1, 2, params={"lam"}))
    bound = pu_model.bind(e)
    assert ex.equivalent(
        bound, ex.mul(ex.const(0.5), ex.var(jet(0, 2))), tol=1e-12
    )


# ---------------------------------------------------------------------------
# Hessian and regularity
# ---------------------------------------------------------------------------


def test_hessian_values(pu_model, electron_model):
    (w,) = hessian(pu_model)
    assert ex.render(pu_model.bind(w[0])) == "-0.5"
    W = hessian(electron_model)
    ctx = ex.ParseContext(3, 2, params={"m", "tau"})
    for i in range(3):
        for j in range(3):
            if i == j:
                assert ex.equivalent(W[i][j], ex.parse("m*tau^2/16", ctx))
            else:
                assert W[i][j] == ex.ZERO


def test_symbolic_det_small_matrices():
    a, b = ex.var(jet(0, 0)), ex.var(jet(0, 1))
    m2 = ((a, b), (b, a))
    assert ex.equivalent(
        symbolic_det(m2), ex.sub(ex.pw(a, 2), ex.pw(b, 2))
    )
    assert symbolic_det(((ex.ZERO, ex.ZERO), (ex.ZERO, a))) == ex.ZERO


def test_classify_regular(pu_model, electron_model):
    for m in (pu_model, electron_model):
        rep = classify(m)
        assert rep.verdict is Regularity.REGULAR
        assert rep.symbolic_zero is False
        assert rep.min_abs_det is not None and rep.min_abs_det > 1e-9


def test_classify_singular_symbolic(singular_model):
    rep = classify(singular_model)
    assert rep.verdict is Regularity.SINGULAR
    assert rep.symbolic_zero is True
    assert any("identically zero" in note for note in rep.notes)


def test_classify_near_degenerate_numeric():
    # Hessian [[1, 1], [1, 1 + 1e-12*q0_0]]: the determinant does not
    # cancel symbolically, but the normalized determinant stays below
    # the tolerance at every sampled point -> Singular via the numeric
    # branch.
    m = ContactLagrangian(
        2, 1,
        "1/2*(q0_1 + q1_1)^2 + 1/2000000000000*q0_0*q1_1^2",
        name="nearly-degenerate",
    )
    rep = classify(m)
    assert rep.verdict is Regularity.SINGULAR
    assert rep.symbolic_zero is False
    assert rep.min_abs_det is not None and rep.min_abs_det <= 1e-9


def test_classify_report_dict(pu_model):
    d = classify(pu_model).as_dict()
    assert d["verdict"] == "Regular"
    assert set(d) == {
        "verdict", "symbolic_zero", "min_abs_det", "samples", "det_tol",
        "notes",
    }


# ---------------------------------------------------------------------------
# model files
# ---------------------------------------------------------------------------


def test_bundled_models_load():
    names = bundled_model_names()
    assert names == ["electron", "pais_uhlenbeck", "singular_az"]
    for name in names:
        mf = load_model(name)
        assert mf.source == f"bundled:{name}"
        assert mf.model.name
        assert mf.simulate and "x0" in mf.simulate


def test_load_model_from_path(tmp_path):
    p = tmp_path / "osc.toml"
    p.write_text(
        """
[model]
n = 1
k = 1
name = "osc"
lagrangian = "1/2*q0_1^2 - 1/2*q0_0^2 - gamma*z"

[params]
gamma = 0.2

[simulate]
x0 = [1.0, 0.0, 0.0]
t0 = 0.0
t1 = 2.0
"""
    )
    mf = load_model(p)
    assert mf.model.k == 1 and mf.model.params == {"gamma": 0.2}
    assert mf.simulate["t1"] == 2.0
    assert mf.curve is None


def test_load_model_errors(tmp_path):
    with pytest.raises(ModelError, match="neither a file nor a bundled"):
        load_model("no_such_model")

    bad_toml = tmp_path / "bad.toml"
    bad_toml.write_text("[model\nn = 1")
    with pytest.raises(ModelError, match="invalid TOML"):
        load_model(bad_toml)

    missing = tmp_path / "missing.toml"
    missing.write_text("[simulate]\nx0 = [1.0]\n")
    with pytest.raises(ModelError, match="missing \\[model\\]"):
        load_model(missing)

    incomplete = tmp_path / "incomplete.toml"
    incomplete.write_text("[model]\nn = 1\nk = 1\n")
    with pytest.raises(ModelError, match="lacks required key"):
        load_model(incomplete)

    unparsable = tmp_path / "unparsable.toml"
    unparsable.write_text(
        '[model]\nn = 1\nk = 1\nlagrangian = "q0_0 +"\n'
    )
    with pytest.raises(ModelError):
        load_model(unparsable)
