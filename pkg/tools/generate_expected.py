"""Regenerate the stored expected reports for the bundled models.

Run from the repository root:

    python tools/generate_expected.py

Before writing anything the script asserts the independently derived
golden facts for each bundled model (momenta, equations of motion,
energy, constraint-chain shape).  Only when every assertion holds are
the reports serialized into ``src/herglotz/data/expected/``.  This
keeps ``herglotz reproduce`` honest: the stored files certify the
derivations, they are not merely a snapshot of whatever the code said.
"""

from __future__ import annotations

import pathlib
import sys

SRC = pathlib.Path(__file__).resolve().parents[1] / "src"
sys.path.insert(0, str(SRC))

from herglotz import expr as ex
from herglotz import report as rep
from herglotz.cli import _expr_ctx
from herglotz.errors import NotInvertible, SingularLagrangian
from herglotz.model import bundled_model_names, load_model
from herglotz.unified import ChainStatus, Mode, constraint_algorithm
from herglotz.verify import run_all

OUT_DIR = SRC / "herglotz" / "data" / "expected"


def _want(ctx, text):
    return ex.parse(text, ctx)


def _assert_equiv(ctx, got_text, want_text, label, allow_sign=True):
    got = ex.parse(got_text, ctx)
    want = _want(ctx, want_text)
    if ex.equivalent(got, want):
        return
    if allow_sign and ex.equivalent(got, ex.neg(want)):
        return
    raise AssertionError(f"{label}: {got_text!r} != expected {want_text!r}")


def check_pais_uhlenbeck(payload, ctx):
    d = payload["derivation"]
    assert d["regularity"]["verdict"] == "Regular", d["regularity"]
    # Jacobi-Ostrogradskii momenta for L = q1^2/2 - w^2 q0^2/2 - l q2^2/2 - g z
    _assert_equiv(ctx, d["momenta"]["p1_0"], "-lam*q0_2",
                  "pais_uhlenbeck p^1", allow_sign=False)
    _assert_equiv(
        ctx, d["momenta"]["p0_0"],
        "q0_1 + gamma*lam*q0_2 + lam*q0_3",
        "pais_uhlenbeck p^0", allow_sign=False,
    )
    _assert_equiv(
        ctx, d["energy"],
        "1/2*q0_1^2 + gamma*lam*q0_1*q0_2 + lam*q0_1*q0_3"
        " - lam/2*q0_2^2 + omega^2/2*q0_0^2 + gamma*z",
        "pais_uhlenbeck energy", allow_sign=False,
    )
    [eq] = d["equations_of_motion"]
    _assert_equiv(
        ctx, eq,
        "lam*q0_4 + 2*gamma*lam*q0_3 + (1 + gamma^2*lam)*q0_2"
        " + gamma*q0_1 + omega^2*q0_0",
        "pais_uhlenbeck equation of motion",
    )
    for mode_name, chain in payload["chains"].items():
        assert chain["status"] == "Determined", (mode_name, chain["status"])
        assert len(chain["constraints"]) == 2, (mode_name, chain["constraints"])
        _assert_equiv(ctx, chain["constraints"][0]["expr"],
                      "p1_0 + lam*q0_2", f"pais_uhlenbeck[{mode_name}] xi0")
        _assert_equiv(
            ctx, chain["constraints"][1]["expr"],
            "p0_0 - q0_1 - gamma*lam*q0_2 - lam*q0_3",
            f"pais_uhlenbeck[{mode_name}] xi1",
        )
    flags = payload["verify"]["passed"]
    assert flags and all(flags.values()), flags


def check_electron(payload, ctx):
    d = payload["derivation"]
    assert d["regularity"]["verdict"] == "Regular", d["regularity"]
    eqs = d["equations_of_motion"]
    assert len(eqs) == 3, eqs
    for i, eq in enumerate(eqs):
        _assert_equiv(
            ctx, eq,
            f"m*tau^2/16*q{i}_4 - m*tau/2*q{i}_3 + m*q{i}_2 + q{i}_0",
            f"electron equation of motion [{i}]",
        )
        _assert_equiv(
            ctx, d["momenta"][f"p1_{i}"], f"m*tau^2/16*q{i}_2",
            f"electron p^1[{i}]", allow_sign=False,
        )
        _assert_equiv(
            ctx, d["momenta"][f"p0_{i}"],
            f"-m*tau^2/16*q{i}_3 + m*tau/4*q{i}_2",
            f"electron p^0[{i}]", allow_sign=False,
        )
    for mode_name, chain in payload["chains"].items():
        assert chain["status"] == "Determined", (mode_name, chain["status"])
        assert len(chain["constraints"]) == 6, (mode_name, chain["constraints"])
    flags = payload["verify"]["passed"]
    assert flags and all(flags.values()), flags


def check_singular_az(payload, ctx):
    d = payload["derivation"]
    assert d["regularity"]["verdict"] == "Singular", d["regularity"]
    assert d["hamiltonian"] is None, d.get("hamiltonian")
    _assert_equiv(ctx, d["momenta"]["p1_0"], "-gamma*z",
                  "singular_az p^1", allow_sign=False)
    hol = payload["chains"]["HolonomyFirst"]
    assert hol["status"] == "Determined", hol["status"]
    assert len(hol["constraints"]) == 4, hol["constraints"]
    _assert_equiv(ctx, hol["constraints"][0]["expr"], "p1_0 + gamma*z",
                  "singular_az[HolonomyFirst] xi0")
    app = payload["chains"]["AppendixA"]
    assert app["status"] == "UnderDetermined", app["status"]
    assert app["free"] == ["q0_3"], app["free"]
    assert len(app["constraints"]) == 3, app["constraints"]
    assert payload["verify"] == {"skipped": "singular"}


GOLDEN_CHECKS = {
    "pais_uhlenbeck": check_pais_uhlenbeck,
    "electron": check_electron,
    "singular_az": check_singular_az,
}


def build_payload(name):
    model = load_model(name).model
    payload = {"derivation": rep.derivation_report(model), "chains": {}}
    for mode in (Mode.HOLONOMY_FIRST, Mode.APPENDIX_A):
        chain = constraint_algorithm(model, mode)
        payload["chains"][mode.value] = rep.chain_report(chain)
        if chain.status is ChainStatus.DETERMINED:
            resid = payload["chains"][mode.value].get("tangency_residual")
            assert resid is not None and resid < 1e-6, (name, mode, resid)
    try:
        reports = run_all(model)
    except (SingularLagrangian, NotInvertible):
        payload["verify"] = {"skipped": "singular"}
    else:
        for r in reports:
            print(f"  {r}")
        payload["verify"] = {"passed": {r.name: bool(r.passed) for r in reports}}
    return payload


def main():
    OUT_DIR.mkdir(parents=True, exist_ok=True)
    names = bundled_model_names()
    assert sorted(GOLDEN_CHECKS) == sorted(names), (names, sorted(GOLDEN_CHECKS))
    for name in names:
        print(f"== {name}")
        payload = build_payload(name)
        ctx = _expr_ctx(load_model(name).model)
        GOLDEN_CHECKS[name](payload, ctx)
        out = OUT_DIR / f"{name}.json"
        out.write_text(rep.to_json(payload))
        print(f"  wrote {out.relative_to(SRC.parent)}")
    print("all golden assertions passed")


if __name__ == "__main__":
    main()
