"""Numeric verification of the structural identities.

Three check families, each returning a list of :class:`CheckReport`:

* :func:`check_contact` — the contact conditions of the Lagrangian
  structure at random sample points: Reeb contractions and the
  volume-form (nondegeneracy) test.
* :func:`check_dissipation` — the energy-dissipation law along a
  trajectory of the Lagrangian field, the contact Hamiltonian
  identity ``i(X)eta = -E``, the action equation ``dz/dt = L``, and
  the two-route consistency of the Reeb energy rate.
* :func:`check_equivalence` — the Legendre pushforward identity
  ``Leg_* X_L = X_H`` (pointwise and along trajectories), the energy
  pullback ``H o Leg = E_L``, and the exponential-weight bridge
  between the dissipative total derivative and the classical one.

Every report carries an explicit tolerance; ``passed`` is exactly
``max_residual <= tolerance``.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from . import expr as ex
from .expr import Coordinate, Z
from .dynamics import RK4, Trajectory, integrate
from .hamiltonian import hamiltonian_system, legendre
from .lagrangian import (
    energy,
    forms,
    lagrangian_vector_field,
    reeb_energy_rate,
    reeb_field,
    require_regular,
    time_total_derivative,
    total_derivative,
)
from .model import lagrangian_coords

_SEED = 0xC0FFEE


@dataclasses.dataclass(frozen=True)
class CheckReport:
    """One verified identity: residual against an explicit tolerance."""

    name: str
    context: str  # sampling or trajectory description
    max_residual: float
    tolerance: float
    detail: dict = dataclasses.field(default_factory=dict)

    @property
    def passed(self):
        return self.max_residual <= self.tolerance

    def as_dict(self):
        return {
            "name": self.name,
            "context": self.context,
            "max_residual": self.max_residual,
            "tolerance": self.tolerance,
            "passed": self.passed,
            **({"detail": self.detail} if self.detail else {}),
        }

    def __str__(self):
        flag = "pass" if self.passed else "FAIL"
        return (
            f"[{flag}] {self.name}: max residual {self.max_residual:.3e} "
            f"(tol {self.tolerance:.1e}; {self.context})"
        )


def _param_values(model):
    return {c: v.value for c, v in model.param_bindings.items()}


def _sample_points(model, count, seed, span=1.0):
    rng = np.random.default_rng(seed)
    coords = list(lagrangian_coords(model.n, model.k))
    binds = _param_values(model)
    pts = []
    for _ in range(count):
        p = {c: float(v) for c, v in zip(coords, rng.uniform(-span, span, len(coords)))}
        p.update(binds)
        pts.append(p)
    return coords, pts


# ---------------------------------------------------------------------------
# Contact structure
# ---------------------------------------------------------------------------


def check_contact(model, samples=20, seed=_SEED, tol=1e-9, det_floor=1e-9):
    """Contact conditions at random points: ``i(R)eta = 1``,
    ``i(R)d(eta) = 0``, and nondegeneracy of the structure matrix
    ``d(eta) + eta (x) eta`` (whose determinant vanishes exactly where
    the volume-form condition fails)."""
    require_regular(model, "contact-structure verification")
    fms = forms(model)
    eta = fms.eta.map(model.bind)
    omega = fms.omega.map(model.bind)  # d(eta) = omega here
    # The Reeb components may sit behind implicit blocks (n > 1), so
    # the contractions are evaluated numerically point by point.
    R = reeb_field(model).bind_params(model.param_bindings)
    coords, pts = _sample_points(model, samples, seed)

    r_pair = 0.0
    r_closed = 0.0
    worst_inv = 0.0
    min_det = float("inf")
    for p in pts:
        comp_values = R.evaluate(p)
        r_pair = max(r_pair, abs(eta.contract_numeric(comp_values, p) - 1.0))
        closed = omega.contract({c: ex.const(v) for c, v in comp_values.items()})
        for w in closed.coeffs.values():
            r_closed = max(r_closed, abs(ex.evaluate(w, p)))
        mat = omega.matrix(coords, p)
        eta_vec = eta.vector(coords, p)
        det = abs(float(np.linalg.det(mat + np.outer(eta_vec, eta_vec))))
        min_det = min(min_det, det)
        worst_inv = max(worst_inv, det_floor / det if det > 0 else float("inf"))

    ctx = f"{samples} random points, seed {seed:#x}"
    return [
        CheckReport("reeb-pairing i(R)eta = 1", ctx, r_pair, tol),
        CheckReport("reeb-closure i(R)d(eta) = 0", ctx, r_closed, tol),
        CheckReport(
            "nondegeneracy det(d(eta) + eta(x)eta) bounded away from 0",
            ctx,
            worst_inv,
            1.0,
            detail={"min_abs_det": min_det, "det_floor": det_floor},
        ),
    ]


# ---------------------------------------------------------------------------
# Dissipation along a trajectory
# ---------------------------------------------------------------------------


def _fd_derivative(values, times):
    """Fourth-order finite-difference time derivative on a uniform grid
    (falls back to np.gradient on non-uniform grids)."""
    h = np.diff(times)
    if len(values) < 7 or not np.allclose(h, h[0], rtol=1e-8, atol=0.0):
        return np.gradient(values, times)
    h = h[0]
    d = np.empty_like(values)
    v = values
    d[2:-2] = (v[:-4] - 8 * v[1:-3] + 8 * v[3:-1] - v[4:]) / (12 * h)
    # one-sided 4th-order stencils at the edges
    fwd = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / (12 * h)
    for j in (0, 1):
        d[j] = np.dot(fwd, v[j : j + 5])
        d[-1 - j] = -np.dot(fwd, v[len(v) - 5 - j : len(v) - j][::-1])
    return d


def check_dissipation(model, traj: Trajectory, tol_rate=1e-5, tol_eta=1e-8,
                      tol_action=1e-5, tol_reeb=1e-9, samples=20, seed=_SEED):
    """Dissipation identities along a trajectory of the Lagrangian
    field, plus the sample-point consistency of the Reeb energy rate."""
    coords = list(traj.coords)
    E = model.bind(energy(model))
    rate = model.bind(reeb_energy_rate(model))
    L = model.L_bound

    X = lagrangian_vector_field(model)
    eta = forms(model).eta
    # i(X)eta + E: the top-order components never enter (eta only pairs
    # with jets below order k), so the contraction is fully explicit.
    eta_x = ex.simplify(ex.add(eta.contract(X.components), energy(model)))
    eta_x = model.bind(eta_x)

    # Residuals are measured relative to the evaluation's own condition:
    # the energy of a growing system is a small difference of huge
    # terms, so the attainable accuracy of E (and of its finite
    # difference) is set by the sum of the term magnitudes, not by |E|.
    e_terms = list(E.args) if isinstance(E, ex.Add) else [E]
    l_terms = list(L.args) if isinstance(L, ex.Add) else [L]
    fn = ex.compile_exprs(
        [E, rate, L, eta_x] + e_terms + l_terms, coords, "dissipation_row"
    )
    rows = np.array([fn(s) for s in traj.states])
    evals, rvals, lvals, etavals = rows[:, 0], rows[:, 1], rows[:, 2], rows[:, 3]
    ne = len(e_terms)
    e_scale = np.maximum(1.0, np.sum(np.abs(rows[:, 4 : 4 + ne]), axis=1))
    l_scale = np.maximum(
        1.0,
        np.maximum(
            np.sum(np.abs(rows[:, 4 + ne :]), axis=1),
            np.abs(traj.column(Z)),
        ),
    )

    dE = _fd_derivative(evals, traj.times)
    r_rate = float(np.max(np.abs(dE + rvals * evals) / e_scale))
    r_eta = float(np.max(np.abs(etavals) / e_scale))
    dz = _fd_derivative(traj.column(Z), traj.times)
    r_action = float(np.max(np.abs(dz - lvals) / l_scale))

    # Reeb rate, two routes: contraction of R with dE versus -dL/dz.
    # The Reeb components may be implicit, so route A is numeric.
    R = reeb_field(model).bind_params(model.param_bindings)
    grad_E = {c: ex.differentiate(E, c) for c in lagrangian_coords(model.n, model.k)}
    _, pts = _sample_points(model, samples, seed)
    r_reeb = 0.0
    for p in pts:
        comp_values = R.evaluate(p)
        routeA = sum(
            v * ex.evaluate(grad_E[c], p) for c, v in comp_values.items()
        )
        r_reeb = max(r_reeb, abs(routeA - ex.evaluate(rate, p)))

    ctx = (
        f"trajectory of {len(traj)} points on "
        f"[{traj.times[0]:g}, {traj.times[-1]:g}]"
    )
    out = [
        CheckReport("dissipation dE/dt = -R(E) E", ctx, r_rate, tol_rate,
                    detail={"energy_scale": float(np.max(e_scale))}),
        CheckReport("contact pairing i(X)eta = -E", ctx, r_eta, tol_eta,
                    detail={"energy_scale": float(np.max(e_scale))}),
        CheckReport("action equation dz/dt = L", ctx, r_action, tol_action,
                    detail={"lagrangian_scale": float(np.max(l_scale))}),
        CheckReport(
            "reeb rate: R-contraction of dE equals -dL/dz",
            f"{samples} random points, seed {seed:#x}",
            r_reeb,
            tol_reeb,
        ),
    ]
    if rate == ex.ZERO:
        drift = float(np.max(np.abs(evals - evals[0])))
        out.append(
            CheckReport("energy conservation (zero rate)", ctx, drift, 1e-8)
        )
    return out


# ---------------------------------------------------------------------------
# Lagrangian/Hamiltonian equivalence
# ---------------------------------------------------------------------------


def _z_free_test_functions(model, count, seed):
    """Random polynomial test functions in the jets of order < k."""
    rng = np.random.default_rng(seed)
    basis = [
        Coordinate.jet(i, a) for a in range(model.k) for i in range(model.n)
    ]
    out = []
    for _ in range(count):
        terms = [ex.const(round(float(rng.uniform(-2, 2)), 3))]
        for c in basis:
            terms.append(ex.mul(ex.const(round(float(rng.uniform(-2, 2)), 3)),
                                ex.var(c)))
            other = basis[int(rng.integers(len(basis)))]
            terms.append(
                ex.mul(ex.const(round(float(rng.uniform(-1, 1)), 3)),
                       ex.var(c), ex.var(other))
            )
        out.append(ex.add(*terms))
    return out


def exponential_bridge_residuals(model, functions=10, seed=_SEED):
    """Symbolic residuals of the integrating-factor bridge.

    For ``L = l + c z`` with z-free ``l`` and constant ``c`` the
    dissipative total derivative obeys, for any z-free ``f``,

        exp(c t) * d/dt^alpha ( exp(-c t) f )  =  D_L^alpha f ,

    where the left side is the classical total derivative with the time
    parameter explicit.  Returns a list of booleans (one per random test
    function, checked for every alpha up to k) via equivalence testing.
    """
    c = ex.simplify(ex.differentiate(model.L, Z))
    if any(not b.is_param for b in c.free_coords()):
        raise ValueError("bridge identity needs L affine in z")
    t = Coordinate.param("t")
    weight_minus = ex.exp(ex.neg(ex.mul(c, ex.var(t))))
    weight_plus = ex.exp(ex.mul(c, ex.var(t)))
    cap = 2 * model.k
    results = []
    for f in _z_free_test_functions(model, functions, seed):
        lhs = ex.mul(weight_minus, f)
        rhs = f
        ok = True
        for _alpha in range(1, model.k + 1):
            lhs = time_total_derivative(lhs, "t", cap)
            rhs = total_derivative(model, rhs)
            if not ex.equivalent(ex.mul(weight_plus, lhs), rhs):
                ok = False
                break
        results.append(ok)
    return results


def check_equivalence(model, samples=20, seed=_SEED, tol_push=1e-8,
                      tol_traj=1e-6, t1=5.0, h=1e-3, bridge_functions=10):
    """Legendre-map equivalence of the two formalisms."""
    require_regular(model, "the equivalence checks")
    leg = legendre(model)
    ham = hamiltonian_system(model)
    Xl = lagrangian_vector_field(model)
    lag_coords = list(Xl.coords)
    ham_coords = list(ham.X_H.coords)
    binds = model.param_bindings

    fwd = [model.bind(leg.forward[c]) for c in ham_coords]
    jac = [
        [ex.differentiate(e, b) for b in lag_coords] for e in fwd
    ]
    jac_fn = ex.compile_exprs([w for row in jac for w in row], lag_coords, "leg_jac")
    fwd_fn = ex.compile_exprs(fwd, lag_coords, "leg_fwd")

    Xl_num = Xl.bind_params(binds).compiled()
    Xh_num = ham.X_H.bind_params(binds).compiled()

    # HoLeg = E_L symbolically
    HoLeg = leg.push_expr(ham.H)
    r_energy = 0.0 if ex.equivalent(HoLeg, energy(model)) else float("inf")

    # pointwise pushforward
    _, pts = _sample_points(model, samples, seed)
    r_push = 0.0
    for p in pts:
        x = [p[c] for c in lag_coords]
        v = Xl_num(x)
        J = np.array(jac_fn(x), dtype=float).reshape(len(ham_coords), len(lag_coords))
        pushed = J @ v
        vh = Xh_num(fwd_fn(x))
        r_push = max(r_push, float(np.max(np.abs(pushed - vh))))

    # trajectory equivalence
    rng = np.random.default_rng(seed)
    x0 = {c: float(v) for c, v in zip(lag_coords, rng.uniform(-0.5, 0.5, len(lag_coords)))}
    tl = integrate(Xl, x0, 0.0, t1, RK4(h), params=binds)
    y0 = dict(zip(ham_coords, fwd_fn([x0[c] for c in lag_coords])))
    th = integrate(ham.X_H, y0, 0.0, t1, RK4(h), params=binds)
    mapped = np.array([fwd_fn(s) for s in tl.states])
    r_traj = float(
        np.max(np.abs(mapped - th.states) / np.maximum(1.0, np.abs(th.states)))
    )

    ctx_pts = f"{samples} random points, seed {seed:#x}"
    ctx_traj = f"RK4 h={h:g} on [0, {t1:g}]"
    out = [
        CheckReport("energy pullback H o Leg = E_L (symbolic)",
                    "equivalence sampling", r_energy, 0.0),
        CheckReport("pushforward Leg_* X_L = X_H", ctx_pts, r_push, tol_push),
        CheckReport("trajectory match Leg o flow_L = flow_H", ctx_traj,
                    r_traj, tol_traj),
    ]

    # exponential-weight bridge (only for L affine in z)
    c = ex.simplify(ex.differentiate(model.L, Z))
    if all(b.is_param for b in c.free_coords()):
        results = exponential_bridge_residuals(model, bridge_functions, seed)
        r_bridge = 0.0 if all(results) else float("inf")
        out.append(
            CheckReport(
                "integrating-factor bridge d/dt-with-weight vs D_L",
                f"{bridge_functions} random z-free functions, seed {seed:#x}",
                r_bridge,
                0.0,
                detail={"functions_checked": len(results)},
            )
        )
    return out


def run_all(model, traj=None, samples=20, seed=_SEED):
    """Contact + equivalence checks, plus dissipation when a trajectory
    is supplied (or can be generated from a default initial state)."""
    reports = []
    reports += check_contact(model, samples, seed)
    if traj is None:
        X = lagrangian_vector_field(model)
        rng = np.random.default_rng(seed)
        x0 = {
            c: float(v)
            for c, v in zip(X.coords, rng.uniform(-0.5, 0.5, len(X.coords)))
        }
        traj = integrate(X, x0, 0.0, 10.0, RK4(1e-3),
                         params=model.param_bindings)
    reports += check_dissipation(model, traj, samples=samples, seed=seed)
    reports += check_equivalence(model, samples, seed)
    return reports
