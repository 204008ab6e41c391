"""Lagrangian-side derivations for higher-order contact systems.

Central operator: the Lagrangian total derivative

    D_L F = sum_{i, alpha} q<i>_<alpha+1> dF/dq<i>_<alpha>
          + L dF/dz - (dL/dz) F ,

a derivation-with-defect (``D_L(fg) = D_L(f) g + f D_L(g) + (dL/dz) f g``)
that reduces to the classical total time derivative ``d_T`` twisted by
the integrating factor of ``dL/dz`` on z-independent arguments.

From it: the generalized momenta (Jacobi-Ostrogradskii) table, the
energy, the contact one- and two-forms, the 2k-th order dissipative
Euler-Lagrange (Herglotz) equations, the Lagrangian dynamical vector
field, and the Reeb field of the contact structure.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from random import Random

from . import expr as ex
from .errors import (
    DomainError,
    InternalInconsistency,
    OrderOverflow,
    ReebContractionError,
    SingularLagrangian,
    ZDependence,
)
from .expr import Coordinate, Expr, Var, Z
from .forms import ImplicitBlock, OneForm, TwoForm, VectorField, placeholder
from .model import Regularity, classify, hessian, lagrangian_coords

__all__ = [
    "total_derivative",
    "tulczyjew_dT",
    "time_total_derivative",
    "lagrange_differential",
    "momenta",
    "momenta_direct",
    "energy",
    "energy_direct",
    "herglotz_equations",
    "ContactForms",
    "forms",
    "omega_iterated",
    "lagrangian_vector_field",
    "reeb_field",
    "reeb_energy_rate",
    "require_regular",
]


def total_derivative(model, F):
    """Apply ``D_L`` once.  Raises :class:`OrderOverflow` when the result
    would need jet coordinates beyond order ``2k``."""
    F = ex.simplify(F)
    k2 = 2 * model.k
    jets = sorted(c for c in F.free_coords() if c.is_jet)
    if jets and jets[-1].r >= k2:
        raise OrderOverflow(
            f"total derivative of an order-{jets[-1].r} expression would "
            f"exceed the phase-space order {k2}"
        )
    terms = []
    for c in jets:
        dF = ex.differentiate(F, c)
        if dF != ex.ZERO:
            terms.append(ex.mul(Var(Coordinate.jet(c.i, c.r + 1)), dF))
    dz = ex.differentiate(F, Z)
    if dz != ex.ZERO:
        terms.append(ex.mul(model.L, dz))
    Lz = ex.differentiate(model.L, Z)
    if Lz != ex.ZERO:
        terms.append(ex.neg(ex.mul(Lz, F)))
    return ex.add(*terms)


def _dl_power(model, F, power):
    for _ in range(power):
        F = total_derivative(model, F)
    return F


def tulczyjew_dT(F, order_cap):
    """Classical total time derivative on jets (no z, no dissipation
    weight).  Raises :class:`ZDependence` for z-dependent input and
    :class:`OrderOverflow` beyond ``order_cap``."""
    F = ex.simplify(F)
    if Z in F.free_coords():
        raise ZDependence(
            "the classical total derivative is defined for z-independent "
            "expressions only"
        )
    jets = sorted(c for c in F.free_coords() if c.is_jet)
    if jets and jets[-1].r >= order_cap:
        raise OrderOverflow(
            f"total time derivative of an order-{jets[-1].r} expression "
            f"would exceed order {order_cap}"
        )
    terms = []
    for c in jets:
        dF = ex.differentiate(F, c)
        if dF != ex.ZERO:
            terms.append(ex.mul(Var(Coordinate.jet(c.i, c.r + 1)), dF))
    return ex.add(*terms)


def time_total_derivative(F, tname, order_cap):
    """Total derivative along curves for expressions that may depend
    explicitly on a time parameter: ``d/dt = d_T + d/dt_explicit``."""
    F = ex.simplify(F)
    if Z in F.free_coords():
        raise ZDependence("explicit-time total derivative expects no z")
    t = Coordinate.param(tname)
    jets = sorted(c for c in F.free_coords() if c.is_jet)
    if jets and jets[-1].r >= order_cap:
        raise OrderOverflow(
            f"total time derivative of an order-{jets[-1].r} expression "
            f"would exceed order {order_cap}"
        )
    terms = [ex.differentiate(F, t)]
    for c in jets:
        dF = ex.differentiate(F, c)
        if dF != ex.ZERO:
            terms.append(ex.mul(Var(Coordinate.jet(c.i, c.r + 1)), dF))
    return ex.add(*terms)


def lagrange_differential(L0, n, k, order_cap=None):
    """Classical higher-order Euler-Lagrange expressions
    ``sum_alpha (-1)^alpha d_T^alpha (dL0/dq_alpha)`` for a
    z-independent Lagrangian ``L0``."""
    L0 = ex.simplify(L0)
    if Z in L0.free_coords():
        raise ZDependence("the Lagrange differential expects a z-independent L")
    cap = 2 * k if order_cap is None else order_cap
    out = []
    for i in range(n):
        comps = []
        for alpha in range(k + 1):
            g = ex.differentiate(L0, Coordinate.jet(i, alpha))
            for _ in range(alpha):
                g = tulczyjew_dT(g, cap)
            comps.append(g if alpha % 2 == 0 else ex.neg(g))
        out.append(ex.add(*comps))
    return tuple(out)


# ---------------------------------------------------------------------------
# Momenta, energy, equations of motion
# ---------------------------------------------------------------------------


@functools.lru_cache(maxsize=256)
def momenta(model):
    """Generalized momenta ``phat[r][i]`` for levels ``r = 0..k-1``,
    built by the downward recursion
    ``phat^{k-1}_i = dL/dq_i^(k)``,
    ``phat^{r-1}_i = dL/dq_i^(r) - D_L(phat^r_i)``."""
    n, k = model.n, model.k
    table = [None] * k
    table[k - 1] = tuple(
        ex.differentiate(model.L, Coordinate.jet(i, k)) for i in range(n)
    )
    for r in range(k - 1, 0, -1):
        table[r - 1] = tuple(
            ex.sub(
                ex.differentiate(model.L, Coordinate.jet(i, r)),
                total_derivative(model, table[r][i]),
            )
            for i in range(n)
        )
    return tuple(table)


@functools.lru_cache(maxsize=256)
def momenta_direct(model):
    """Same momenta by the closed alternating sum
    ``phat^r_i = sum_{alpha=0}^{k-1-r} (-1)^alpha D_L^alpha
    (dL/dq_i^(r+1+alpha))`` (independent route, used for
    cross-checks)."""
    n, k = model.n, model.k
    table = []
    for r in range(k):
        row = []
        for i in range(n):
            terms = []
            for alpha in range(k - r):
                g = _dl_power(
                    model,
                    ex.differentiate(model.L, Coordinate.jet(i, r + 1 + alpha)),
                    alpha,
                )
                terms.append(g if alpha % 2 == 0 else ex.neg(g))
            row.append(ex.add(*terms))
        table.append(tuple(row))
    return tuple(table)


@functools.lru_cache(maxsize=256)
def energy(model):
    """Contact energy ``E_L = sum_{r,i} phat^r_i q_i^(r+1) - L``.

    Internally asserted against the independent double-sum route
    (:func:`energy_direct`)."""
    e = _energy_from_momenta(model)
    ex.assert_equivalent(e, energy_direct(model), "energy dual-route check")
    return e


def _energy_from_momenta(model):
    n, k = model.n, model.k
    phat = momenta(model)
    terms = [
        ex.mul(phat[r][i], Var(Coordinate.jet(i, r + 1)))
        for r in range(k)
        for i in range(n)
    ]
    terms.append(ex.neg(model.L))
    return ex.add(*terms)


@functools.lru_cache(maxsize=256)
def energy_direct(model):
    """Energy by the direct double sum
    ``sum_{beta=1}^{k} sum_{alpha=0}^{k-beta} q_i^(beta) (-1)^alpha
    D_L^alpha(dL/dq_i^(beta+alpha)) - L``."""
    n, k = model.n, model.k
    terms = []
    for beta in range(1, k + 1):
        for alpha in range(k - beta + 1):
            for i in range(n):
                g = _dl_power(
                    model,
                    ex.differentiate(model.L, Coordinate.jet(i, beta + alpha)),
                    alpha,
                )
                term = ex.mul(Var(Coordinate.jet(i, beta)), g)
                terms.append(term if alpha % 2 == 0 else ex.neg(term))
    terms.append(ex.neg(model.L))
    return ex.add(*terms)


@functools.lru_cache(maxsize=256)
def herglotz_equations(model):
    """Dissipative Euler-Lagrange expressions
    ``sum_{alpha=0}^{k} (-1)^alpha D_L^alpha(dL/dq_i^(alpha))``:
    their zero set (in jets up to order 2k) is the equation of motion."""
    n, k = model.n, model.k
    out = []
    for i in range(n):
        comps = []
        for alpha in range(k + 1):
            g = _dl_power(
                model, ex.differentiate(model.L, Coordinate.jet(i, alpha)), alpha
            )
            comps.append(g if alpha % 2 == 0 else ex.neg(g))
        out.append(ex.add(*comps))
    return tuple(out)


# ---------------------------------------------------------------------------
# Contact forms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ContactForms:
    """The Lagrangian contact structure: ``theta`` (Cartan-like
    one-form), ``eta = dz - theta`` (contact form), and
    ``omega = -d(theta)`` so that ``d(eta) = omega``."""

    theta: OneForm
    eta: OneForm
    omega: TwoForm


@functools.lru_cache(maxsize=256)
def forms(model):
    n, k = model.n, model.k
    phat = momenta(model)
    theta = OneForm(
        {
            Coordinate.jet(i, r): phat[r][i]
            for r in range(k)
            for i in range(n)
        }
    )
    eta_coeffs = {Z: ex.ONE}
    for c, w in theta.coeffs.items():
        eta_coeffs[c] = ex.neg(w)
    eta = OneForm(eta_coeffs)
    omega = theta.d().map(ex.neg)
    return ContactForms(theta=theta, eta=eta, omega=omega)


def omega_iterated(model):
    """The contact two-form assembled term by term from the direct
    (alternating ``D_L`` power) momenta:
    ``sum_{beta,alpha,i} (-1)^{alpha+1} d(D_L^alpha dL/dq^i_{beta+alpha})
    ^ dq^i_{beta-1}``.  Equal to ``forms(model).omega``; kept as an
    independent assembly for spot checks."""
    n, k = model.n, model.k
    pairs = []
    for beta in range(1, k + 1):
        for alpha in range(k - beta + 1):
            for i in range(n):
                g = _dl_power(
                    model,
                    ex.differentiate(model.L, Coordinate.jet(i, beta + alpha)),
                    alpha,
                )
                target = Coordinate.jet(i, beta - 1)
                sign = -1 if alpha % 2 == 0 else 1  # (-1)^(alpha+1)
                for b in sorted(g.free_coords()):
                    if b.is_param:
                        continue
                    dg = ex.differentiate(g, b)
                    if dg == ex.ZERO:
                        continue
                    coeff = dg if sign > 0 else ex.neg(dg)
                    pairs.append(((b, target), coeff))
    return TwoForm(pairs)


# ---------------------------------------------------------------------------
# Dynamical vector field
# ---------------------------------------------------------------------------


def require_regular(model, what):
    rep = classify(model)
    if rep.verdict is not Regularity.REGULAR:
        raise SingularLagrangian(
            f"{what} requires a regular Lagrangian; classification is "
            f"{rep.verdict.value} ({'; '.join(rep.notes)})"
        )
    return rep


@functools.lru_cache(maxsize=256)
def lagrangian_vector_field(model):
    """The dynamical vector field on the Lagrangian phase space.

    Components: holonomy ``q<i>_<alpha> -> q<i>_<alpha+1>`` for
    ``alpha < 2k-1``, ``z -> L``, and the top components solved from the
    Herglotz equations (which are affine in the order-2k jets, with
    coefficient matrix ``(-1)^k W``).  For one degree of freedom the top
    component is solved symbolically; for several, an implicit
    ``(matrix, rhs)`` block is attached for numeric solution.
    """
    require_regular(model, "the Lagrangian vector field")
    n, k = model.n, model.k
    eqs = herglotz_equations(model)
    top = [Coordinate.jet(j, 2 * k) for j in range(n)]

    A = [[ex.differentiate(eqs[i], top[j]) for j in range(n)] for i in range(n)]
    for i in range(n):
        for j in range(n):
            for l in range(n):
                if ex.differentiate(A[i][j], top[l]) != ex.ZERO:
                    raise InternalInconsistency(
                        "equations of motion are not affine in the "
                        "top-order jets"
                    )
    # rhs_i = -(eq_i at q_2k = 0); then  A f = rhs  determines the flow's
    # order-2k jet values f.
    zero_top = {c: ex.ZERO for c in top}
    rhs = [ex.neg(ex.substitute(eqs[i], zero_top)) for i in range(n)]

    comps = {}
    for i in range(n):
        for alpha in range(2 * k - 1):
            comps[Coordinate.jet(i, alpha)] = Var(Coordinate.jet(i, alpha + 1))
    comps[Z] = model.L

    blocks = []
    if n == 1:
        comps[Coordinate.jet(0, 2 * k - 1)] = ex.div(rhs[0], A[0][0])
    else:
        slot = tuple(Coordinate.jet(i, 2 * k - 1) for i in range(n))
        for c in slot:
            comps[c] = Var(placeholder(c))
        blocks.append(
            ImplicitBlock(
                coords=slot,
                matrix=tuple(tuple(row) for row in A),
                rhs=tuple(rhs),
            )
        )
    return VectorField(
        lagrangian_coords(n, k), comps, blocks, name="X_L"
    )


# ---------------------------------------------------------------------------
# Reeb field
# ---------------------------------------------------------------------------


@functools.lru_cache(maxsize=256)
def reeb_field(model, check_samples=10, check_tol=1e-9, seed=0xC0FFEE):
    """The Reeb field of the contact structure ``eta_L``.

    Triangular solve forced by ``i(R) eta = 1`` and ``i(R) d eta = 0``:
    ``R = d/dz + sum_{alpha=k}^{2k-1} f^i_alpha d/dq<i>_<alpha>`` with

        f^i_alpha = (-1)^(alpha-k+1) W^{ij} [ d phat^{2k-1-alpha}_j / dz
            + sum_{gamma=k}^{alpha-1} f^l_gamma
              d phat^{2k-1-alpha}_j / dq<l>_<gamma> ] .

    The defining contractions are asserted numerically at
    ``check_samples`` points; any mismatch raises
    :class:`ReebContractionError`.
    """
    require_regular(model, "the Reeb field")
    n, k = model.n, model.k
    phat = momenta(model)
    W = hessian(model)

    comps = {Z: ex.ONE}
    for i in range(n):
        for alpha in range(k):
            comps[Coordinate.jet(i, alpha)] = ex.ZERO

    blocks = []
    solved = {}  # level alpha -> tuple of f-expressions (n == 1 route)
    for alpha in range(k, 2 * k):
        level = 2 * k - 1 - alpha  # momentum level whose R-invariance we use
        sign = -1 if (alpha - k) % 2 == 0 else 1  # (-1)^(alpha-k+1)
        b = []
        for j in range(n):
            parts = [ex.differentiate(phat[level][j], Z)]
            for gamma in range(k, alpha):
                for l in range(n):
                    dp = ex.differentiate(
                        phat[level][j], Coordinate.jet(l, gamma)
                    )
                    if dp == ex.ZERO:
                        continue
                    if n == 1:
                        parts.append(ex.mul(solved[gamma][l], dp))
                    else:
                        parts.append(
                            ex.mul(Var(placeholder(Coordinate.jet(l, gamma))), dp)
                        )
            bj = ex.add(*parts)
            b.append(bj if sign > 0 else ex.neg(bj))

        coords_alpha = tuple(Coordinate.jet(i, alpha) for i in range(n))
        if n == 1:
            f = ex.div(b[0], W[0][0])
            solved[alpha] = (f,)
            comps[coords_alpha[0]] = f
        else:
            for c in coords_alpha:
                comps[c] = Var(placeholder(c))
            blocks.append(
                ImplicitBlock(
                    coords=coords_alpha,
                    matrix=tuple(tuple(row) for row in W),
                    rhs=tuple(b),
                )
            )

    field = VectorField(lagrangian_coords(n, k), comps, blocks, name="R_L")
    _check_reeb_contractions(model, field, check_samples, check_tol, seed)
    return field


def _check_reeb_contractions(model, field, samples, tol, seed):
    fl = forms(model)
    eta = fl.eta.map(model.bind)
    deta = fl.theta.d().map(lambda w: ex.neg(model.bind(w)))
    bound = field.bind_params(model.param_bindings)
    coords = lagrangian_coords(model.n, model.k)
    rng = Random(seed)
    checked = 0
    attempts = 0
    while checked < samples and attempts < 10 * samples:
        attempts += 1
        point = {c: rng.uniform(-1.0, 1.0) for c in coords}
        try:
            comp_values = bound.evaluate(point)
            pairing = eta.contract_numeric(comp_values, point)
            res_eta = abs(pairing - 1.0)
            one = deta.contract(
                {c: ex.const(v) for c, v in comp_values.items()}
            )
            res_deta = max(
                (abs(ex.evaluate(w, point)) for w in one.coeffs.values()),
                default=0.0,
            )
        except DomainError:
            continue
        if res_eta > tol or res_deta > tol:
            raise ReebContractionError(
                f"Reeb field fails its defining contractions at {point}: "
                f"|i(R)eta - 1| = {res_eta:.3e}, "
                f"sup |i(R)deta| = {res_deta:.3e} (tol {tol:g})"
            )
        checked += 1
    if checked == 0:
        raise ReebContractionError(
            "could not find an admissible sample point to verify the "
            "Reeb contractions"
        )


def reeb_energy_rate(model):
    """Closed form of ``R_L(E_L)``.

    Applying R to the energy, the ``f_k`` / ``phat^{k-1}`` terms cancel
    (``phat^{k-1}_i = dL/dq<i>_k``), leaving exactly ``-dL/dz``.  The
    dissipation checks re-derive the same quantity by contracting the
    Reeb field with ``dE_L`` numerically and compare.
    """
    return ex.neg(ex.differentiate(model.L, Z))
