"""Command-line interface.

Subcommands: ``derive``, ``simulate``, ``unified``, ``verify``,
``action``, ``reproduce``.  Model files are TOML (see docs/formats.md);
reports are printed as text and written as JSON with ``--out``;
trajectories and dissipation factors are CSV.

Exit codes: 0 success, 1 usage error, 2 model error, 3 verification
failure, 4 a regular-side operation was requested on a singular model.
"""

from __future__ import annotations

import io
import json
import sys
from pathlib import Path

import click

from . import expr as ex
from . import report as rep
from .dynamics import (
    RK4,
    RK45,
    CurveSpec,
    action as action_value,
    integrate,
    sigma_factor,
    variational_check,
)
from .errors import HerglotzError, ModelError, NotInvertible, SingularLagrangian
from .hamiltonian import hamiltonian_system, legendre
from .lagrangian import lagrangian_vector_field
from .model import (
    bundled_model_names,
    lagrangian_coords,
    load_model,
)
from .unified import Mode, constraint_algorithm
from .verify import run_all

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_MODEL = 2
EXIT_VERIFY = 3
EXIT_SINGULAR = 4

_MODES = {
    "holonomy": Mode.HOLONOMY_FIRST,
    "appendix-a": Mode.APPENDIX_A,
}


class VerificationFailure(click.ClickException):
    exit_code = EXIT_VERIFY

    def show(self, file=None):
        click.echo(f"error: {self.message}", err=True)


def _write_out(out, text):
    if out:
        Path(out).write_text(text)
        click.echo(f"wrote {out}")


def _model_arg(fn):
    return click.argument("model_file", metavar="MODEL")(fn)


@click.group(help=__doc__)
def cli():
    pass


# ---------------------------------------------------------------------------
# derive
# ---------------------------------------------------------------------------


@cli.command(help="Derive momenta, energy, contact form, equations of "
                  "motion, and the Hamiltonian when available.")
@_model_arg
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Write the JSON report here.")
def derive(model_file, out):
    model = load_model(model_file).model
    payload = rep.derivation_report(model)
    click.echo(rep.render_derivation(payload), nl=False)
    _write_out(out, rep.to_json(payload))


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def _method_from(section, method, step, tol):
    name = method or section.get("method", "rk4")
    if name == "rk4":
        return RK4(step if step is not None else float(section.get("h", 1e-3)))
    if name == "rk45":
        rtol = tol if tol is not None else float(section.get("rtol", 1e-8))
        return RK45(rtol=rtol, atol=rtol * 1e-2)
    raise ModelError(f"unknown integration method {name!r}")


def _initial_state(mf):
    sim = mf.simulate or {}
    model = mf.model
    coords = lagrangian_coords(model.n, model.k)
    x0 = sim.get("x0")
    if x0 is None:
        raise ModelError(
            f"{mf.source}: [simulate] section with an x0 list of length "
            f"{len(coords)} is required"
        )
    if len(x0) != len(coords):
        raise ModelError(
            f"{mf.source}: x0 has {len(x0)} entries, need {len(coords)} "
            "(jets of order 0..2k-1 grouped by order, then z)"
        )
    return dict(zip(coords, map(float, x0))), sim


@cli.command(help="Integrate the dynamics and emit a trajectory CSV.")
@_model_arg
@click.option("--side", type=click.Choice(["lagrangian", "hamiltonian"]),
              default="lagrangian", show_default=True)
@click.option("--method", type=click.Choice(["rk4", "rk45"]), default=None,
              help="Override the integrator from the model file.")
@click.option("--step", type=float, default=None, help="RK4 step size.")
@click.option("--tol", type=float, default=None, help="RK45 relative tolerance.")
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="CSV path (default: stdout).")
def simulate(model_file, side, method, step, tol, out):
    mf = load_model(model_file)
    model = mf.model
    x0, sim = _initial_state(mf)
    t0, t1 = float(sim.get("t0", 0.0)), float(sim.get("t1", 10.0))
    meth = _method_from(sim, method, step, tol)

    if side == "lagrangian":
        field = lagrangian_vector_field(model)
        start = x0
    else:
        field = hamiltonian_system(model).X_H
        start = legendre(model).push_point(
            {**x0, **{c: v.value for c, v in model.param_bindings.items()}}
        )
    traj = integrate(field, start, t0, t1, meth, params=model.param_bindings)

    buf = io.StringIO()
    rep.write_trajectory_csv(traj, buf)
    if out:
        Path(out).write_text(buf.getvalue())
        click.echo(f"wrote {out} ({len(traj)} rows)")
    else:
        click.echo(buf.getvalue(), nl=False)


# ---------------------------------------------------------------------------
# unified
# ---------------------------------------------------------------------------


@cli.command(help="Run the unified-space constraint algorithm and report "
                  "the constraint chain.")
@_model_arg
@click.option("--mode", type=click.Choice(sorted(_MODES)), default="holonomy",
              show_default=True)
@click.option("--samples", type=int, default=20, show_default=True,
              help="Sample points for independence tests.")
@click.option("--seed", type=int, default=0xC0FFEE)
@click.option("--tol", type=float, default=1e-9, show_default=True,
              help="Numeric threshold for vanishing constraints.")
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Write the JSON chain report here.")
def unified(model_file, mode, samples, seed, tol, out):
    model = load_model(model_file).model
    chain = constraint_algorithm(
        model, _MODES[mode], samples=samples, seed=seed, tol=tol
    )
    payload = rep.chain_report(chain)
    click.echo(rep.render_chain(payload), nl=False)
    _write_out(out, rep.to_json(payload))


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


@cli.command(help="Run the verification suite (contact conditions, "
                  "dissipation law, Legendre equivalence).")
@_model_arg
@click.option("--samples", type=int, default=20, show_default=True)
@click.option("--seed", type=int, default=0xC0FFEE)
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Write the JSON check report here.")
def verify(model_file, samples, seed, out):
    model = load_model(model_file).model
    reports = run_all(model, samples=samples, seed=seed)
    payload = rep.check_report(reports)
    click.echo(rep.render_checks(payload), nl=False)
    _write_out(out, rep.to_json(payload))
    if not payload["all_passed"]:
        raise VerificationFailure("one or more checks failed")


# ---------------------------------------------------------------------------
# action
# ---------------------------------------------------------------------------


def _curve_for(mf):
    """The curve to evaluate the action on: the [curve] section when
    present, otherwise a Chebyshev fit of the integrated solution."""
    model = mf.model
    if mf.curve:
        exprs = mf.curve.get("channels")
        if not exprs or len(exprs) != model.n:
            raise ModelError(
                f"{mf.source}: [curve] needs 'channels', one expression "
                f"in t per degree of freedom ({model.n})"
            )
        z0 = float(mf.curve.get("z0", 0.0))
        return CurveSpec.from_exprs(exprs), z0, "closed-form curve"
    x0, _sim = _initial_state(mf)
    X = lagrangian_vector_field(model)
    traj = integrate(X, x0, 0.0, 1.0, RK4(1e-3), params=model.param_bindings)
    base = [ex.Coordinate.jet(i, 0) for i in range(model.n)]
    curve = CurveSpec.fit_trajectory(traj, base, degree=24)
    return curve, float(x0[ex.Z]), "integrated solution (Chebyshev fit)"


@cli.command(help="Evaluate the action along a curve, write the "
                  "dissipation factor CSV, and run the variational check.")
@_model_arg
@click.option("--seed", type=int, default=0xC0FFEE)
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="CSV path for the dissipation factor sigma(t).")
def action(model_file, seed, out):
    mf = load_model(model_file)
    model = mf.model
    curve, z0, origin = _curve_for(mf)
    val = action_value(model, curve, z0)
    click.echo(f"action along {origin}: A = {val:.12g} (z0 = {z0:g})")
    grid, sigma = sigma_factor(model, curve, z0)
    if out:
        buf = io.StringIO()
        rep.sigma_csv(grid, sigma, buf)
        Path(out).write_text(buf.getvalue())
        click.echo(f"wrote {out} ({len(grid)} rows)")
    rows = variational_check(model, curve, z0, seed=seed)
    click.echo(rep.render_variational(rep.variational_report(rows)), nl=False)


# ---------------------------------------------------------------------------
# reproduce
# ---------------------------------------------------------------------------


def _expected_payload(name):
    from importlib import resources

    path = resources.files("herglotz") / "data" / "expected" / f"{name}.json"
    if not path.is_file():
        raise ModelError(f"no stored expected report for {name!r}")
    return json.loads(path.read_text())


def _expr_ctx(model):
    from .expr import ParseContext

    return ParseContext(
        n=model.n,
        k=model.k,
        max_order=2 * model.k,
        allow_momenta=True,
        momentum_levels=model.k,
        params=None,
        allow_z=True,
    )


def _diff_exprs(label, got, want, ctx, problems):
    try:
        a = ex.parse(got, ctx)
        b = ex.parse(want, ctx)
    except HerglotzError as e:
        problems.append(f"{label}: cannot parse ({e})")
        return
    if not ex.equivalent(a, b):
        problems.append(f"{label}: {got!r} is not equivalent to {want!r}")


def _diff_model(name, expected, problems):
    model = load_model(name).model
    ctx = _expr_ctx(model)

    got = rep.derivation_report(model)
    want = expected["derivation"]
    if got["regularity"]["verdict"] != want["regularity"]["verdict"]:
        problems.append(
            f"{name}: regularity {got['regularity']['verdict']} != "
            f"{want['regularity']['verdict']}"
        )
    for key in ("momenta", "eta"):
        if sorted(got[key]) != sorted(want[key]):
            problems.append(f"{name}: {key} keys differ")
            continue
        for kk in got[key]:
            _diff_exprs(f"{name}.{key}.{kk}", got[key][kk], want[key][kk],
                        ctx, problems)
    _diff_exprs(f"{name}.energy", got["energy"], want["energy"], ctx, problems)
    for j, (g, w) in enumerate(
        zip(got["equations_of_motion"], want["equations_of_motion"])
    ):
        _diff_exprs(f"{name}.equation[{j}]", g, w, ctx, problems)
    if (got.get("hamiltonian") is None) != (want.get("hamiltonian") is None):
        problems.append(f"{name}: hamiltonian availability differs")
    elif got.get("hamiltonian"):
        _diff_exprs(f"{name}.hamiltonian", got["hamiltonian"],
                    want["hamiltonian"], ctx, problems)

    for mode_name, want_chain in expected["chains"].items():
        mode = Mode(mode_name)
        chain = constraint_algorithm(model, mode)
        got_chain = rep.chain_report(chain)
        if got_chain["status"] != want_chain["status"]:
            problems.append(
                f"{name}[{mode_name}]: status {got_chain['status']} != "
                f"{want_chain['status']}"
            )
        gc, wc = got_chain["constraints"], want_chain["constraints"]
        if len(gc) != len(wc):
            problems.append(
                f"{name}[{mode_name}]: {len(gc)} constraints, "
                f"expected {len(wc)}"
            )
        else:
            for j, (g, w) in enumerate(zip(gc, wc)):
                _diff_exprs(f"{name}[{mode_name}].constraint[{j}]",
                            g["expr"], w["expr"], ctx, problems)

    want_verify = expected["verify"]
    if want_verify.get("skipped"):
        try:
            run_all(model, samples=5)
            problems.append(f"{name}: verification unexpectedly possible")
        except (SingularLagrangian, NotInvertible):
            pass
    else:
        reports = run_all(model)
        got_flags = {r.name: r.passed for r in reports}
        for check_name, flag in want_verify["passed"].items():
            if got_flags.get(check_name) != flag:
                problems.append(
                    f"{name}: check {check_name!r} -> "
                    f"{got_flags.get(check_name)}, expected {flag}"
                )


@cli.command(help="Re-derive the bundled models and diff against the "
                  "stored expected reports.")
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Write the JSON diff summary here.")
def reproduce(out):
    problems = []
    names = bundled_model_names()
    for name in names:
        expected = _expected_payload(name)
        before = len(problems)
        _diff_model(name, expected, problems)
        status = "ok" if len(problems) == before else "MISMATCH"
        click.echo(f"{name}: {status}")
    payload = {"models": names, "problems": problems, "ok": not problems}
    _write_out(out, rep.to_json(payload))
    if problems:
        for p in problems:
            click.echo(f"mismatch: {p}", err=True)
        raise VerificationFailure(
            f"{len(problems)} mismatch(es) against stored reports"
        )
    click.echo(f"all {len(names)} bundled models reproduce the stored reports")


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def main(argv=None):
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as e:
        return int(e.exit_code)
    except click.UsageError as e:
        e.show()
        return EXIT_USAGE
    except VerificationFailure as e:
        e.show()
        return EXIT_VERIFY
    except (SingularLagrangian, NotInvertible) as e:
        click.echo(f"error: {e}", err=True)
        return EXIT_SINGULAR
    except ModelError as e:
        click.echo(f"error: {e}", err=True)
        return EXIT_MODEL
    except HerglotzError as e:
        click.echo(f"error: {e}", err=True)
        return EXIT_MODEL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
