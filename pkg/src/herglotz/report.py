"""Report assembly: JSON-ready dicts and plain-text rendering.

Three report kinds:

* derivation report — momenta, energy, contact form, the dynamical
  equations, and (when the Legendre map inverts) the Hamiltonian;
* chain report — the constraint chain of the unified formalism;
* check report — the verification suite results.

All dict payloads contain only strings/numbers/lists/dicts so they
serialize directly to JSON.  Expressions are rendered with the package
grammar and re-parse to equivalent expressions.
"""

from __future__ import annotations

import io
import json

from . import expr as ex
from .errors import HerglotzError, NotInvertible, SingularLagrangian
from .hamiltonian import hamiltonian_system
from .lagrangian import (
    energy,
    forms,
    herglotz_equations,
    momenta,
    reeb_energy_rate,
)
from .model import classify

_SIGMA_NOTE = (
    "sigma(0) = 1: the dissipation factor is normalized as an "
    "integrating factor and does not depend on the initial action "
    "value z0."
)


def _json_default(obj):
    if hasattr(obj, "item"):  # numpy scalars
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def to_json(payload):
    return json.dumps(payload, indent=2, default=_json_default) + "\n"


# ---------------------------------------------------------------------------
# Derivation report
# ---------------------------------------------------------------------------


def derivation_report(model):
    """Everything the symbol engine derives from one Lagrangian."""
    reg = classify(model)
    phat = momenta(model)
    eta = forms(model).eta
    eqs = herglotz_equations(model)

    payload = {
        "model": {
            "name": model.name,
            "n": model.n,
            "k": model.k,
            "lagrangian": ex.render(model.L),
            "params": dict(model.params),
        },
        "regularity": reg.as_dict(),
        "momenta": {
            f"p{r}_{i}": ex.render(phat[r][i])
            for r in range(model.k)
            for i in range(model.n)
        },
        "energy": ex.render(energy(model)),
        "eta": {
            c.name: ex.render(w)
            for c, w in sorted(eta.coeffs.items(), key=lambda cw: cw[0].sort_key())
        },
        "reeb_energy_rate": ex.render(reeb_energy_rate(model)),
        "equations_of_motion": [ex.render(e) for e in eqs],
        "conventions": {"sigma": _SIGMA_NOTE},
    }

    try:
        ham = hamiltonian_system(model)
        payload["hamiltonian"] = ex.render(ham.H)
        payload["hamilton_equations"] = {
            c.name: ex.render(comp)
            for c, comp in sorted(
                ham.X_H.components.items(), key=lambda cw: cw[0].sort_key()
            )
        }
    except (SingularLagrangian, NotInvertible) as e:
        payload["hamiltonian"] = None
        payload["hamiltonian_note"] = str(e)
    return payload


def render_derivation(payload):
    out = io.StringIO()
    m = payload["model"]
    print(f"model {m['name']!r}: n = {m['n']}, k = {m['k']}", file=out)
    print(f"  L = {m['lagrangian']}", file=out)
    if m["params"]:
        pairs = ", ".join(f"{k} = {v:g}" for k, v in m["params"].items())
        print(f"  params: {pairs}", file=out)
    reg = payload["regularity"]
    print(f"regularity: {reg['verdict']}", file=out)
    for note in reg.get("notes", []):
        print(f"  - {note}", file=out)
    print("momenta:", file=out)
    for name, e in payload["momenta"].items():
        print(f"  {name} = {e}", file=out)
    print(f"energy:\n  E = {payload['energy']}", file=out)
    print("contact form (coefficients of eta):", file=out)
    for name, e in payload["eta"].items():
        print(f"  d{name}: {e}", file=out)
    print(f"reeb energy rate:\n  R(E) = {payload['reeb_energy_rate']}", file=out)
    print("equations of motion (one per degree of freedom, = 0):", file=out)
    for e in payload["equations_of_motion"]:
        print(f"  {e}", file=out)
    if payload.get("hamiltonian"):
        print(f"hamiltonian:\n  H = {payload['hamiltonian']}", file=out)
        print("hamilton equations:", file=out)
        for name, e in payload["hamilton_equations"].items():
            print(f"  d({name})/dt = {e}", file=out)
    else:
        note = payload.get("hamiltonian_note", "not available")
        print(f"hamiltonian: none ({note})", file=out)
    print(f"conventions:\n  {payload['conventions']['sigma']}", file=out)
    return out.getvalue()


# ---------------------------------------------------------------------------
# Chain report
# ---------------------------------------------------------------------------


def chain_report(chain, tangency_samples=20):
    payload = {
        "model": {
            "name": chain.model.name,
            "n": chain.model.n,
            "k": chain.model.k,
            "lagrangian": ex.render(chain.model.L),
        },
        **chain.as_dict(),
    }
    if chain.status.value == "Determined":
        try:
            payload["tangency_residual"] = chain.tangency_residuals(
                count=tangency_samples
            )
        except HerglotzError as e:
            payload["tangency_residual"] = None
            payload["tangency_note"] = str(e)
    return payload


def render_chain(payload):
    out = io.StringIO()
    m = payload["model"]
    print(
        f"constraint chain for {m['name']!r} (mode {payload['mode']}): "
        f"status {payload['status']}",
        file=out,
    )
    for lv in payload["levels"]:
        print(f"level {lv['level']} [{lv['origin']}]:", file=out)
        for c in lv["constraints"]:
            line = f"  constraint: {c['expr']} = 0"
            if c.get("solved_for"):
                line += f"   (solved: {c['solved_for']} = {c['view']})"
            print(line, file=out)
        for name, e in lv.get("resolved", {}).items():
            print(f"  resolved component: {name}' = {e}", file=out)
        if not lv["constraints"] and not lv.get("resolved"):
            print("  (nothing new)", file=out)
    if payload.get("free"):
        print("undetermined components: " + ", ".join(payload["free"]), file=out)
    if payload.get("residuals"):
        for r in payload["residuals"]:
            print(f"inconsistent residual: {r} = 0 is impossible", file=out)
    if payload.get("tangency_residual") is not None:
        print(
            f"tangency residual at sample points: "
            f"{payload['tangency_residual']:.3e}",
            file=out,
        )
    for w in payload.get("warnings", []):
        print(f"warning: {w}", file=out)
    return out.getvalue()


# ---------------------------------------------------------------------------
# Check report
# ---------------------------------------------------------------------------


def check_report(reports):
    return {
        "checks": [r.as_dict() for r in reports],
        "all_passed": all(r.passed for r in reports),
    }


def render_checks(payload):
    out = io.StringIO()
    for c in payload["checks"]:
        flag = "pass" if c["passed"] else "FAIL"
        print(
            f"[{flag}] {c['name']}: max residual {c['max_residual']:.3e} "
            f"(tol {c['tolerance']:.1e}; {c['context']})",
            file=out,
        )
    print(
        "all checks passed" if payload["all_passed"] else "SOME CHECKS FAILED",
        file=out,
    )
    return out.getvalue()


# ---------------------------------------------------------------------------
# Trajectory CSV and variational table
# ---------------------------------------------------------------------------


def write_trajectory_csv(traj, fp):
    """CSV with a time column then one column per coordinate."""
    import csv

    names = [c.name for c in traj.coords] or [
        f"x{j}" for j in range(traj.states.shape[1])
    ]
    w = csv.writer(fp)
    w.writerow(["t"] + names)
    for t, row in zip(traj.times, traj.states):
        w.writerow([f"{t:.12g}"] + [f"{v:.17g}" for v in row])


def sigma_csv(grid, sigma, fp):
    import csv

    w = csv.writer(fp)
    w.writerow(["t", "sigma"])
    for t, s in zip(grid, sigma):
        w.writerow([f"{t:.12g}", f"{s:.17g}"])


def variational_report(rows, tolerance=1e-3):
    worst = max((r.ratio for r in rows), default=0.0)
    return {
        "variations": [
            {
                "derivative": r.derivative,
                "derivative_half_step": r.derivative_half,
                "richardson": r.richardson,
                "variation_sup_norm": r.norm_inf,
                "ratio": r.ratio,
            }
            for r in rows
        ],
        "max_ratio": worst,
        "tolerance": tolerance,
        "critical": worst <= tolerance,
    }


def render_variational(payload):
    out = io.StringIO()
    print(
        "variational check: |dA/deps| per admissible variation "
        "(Richardson-extrapolated central differences)",
        file=out,
    )
    print(
        f"{'derivative':>14} {'half-step':>14} {'richardson':>14} "
        f"{'sup-norm':>10} {'ratio':>10}",
        file=out,
    )
    for v in payload["variations"]:
        print(
            f"{v['derivative']:14.4e} {v['derivative_half_step']:14.4e} "
            f"{v['richardson']:14.4e} {v['variation_sup_norm']:10.3e} "
            f"{v['ratio']:10.3e}",
            file=out,
        )
    verdict = "critical" if payload["critical"] else "NOT critical"
    print(
        f"max ratio {payload['max_ratio']:.3e} vs tolerance "
        f"{payload['tolerance']:.1e}: curve is {verdict}",
        file=out,
    )
    return out.getvalue()
