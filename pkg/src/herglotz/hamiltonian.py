"""Hamiltonian side: Legendre map, contact Hamiltonian, Hamilton equations.

The generalized Legendre map sends the Lagrangian phase space
(jets of order ``0..2k-1``, z) to the Hamiltonian one
(jets of order ``0..k-1``, momenta levels ``0..k-1``, z) by
``p<r>_<i> = phat^r_i``.  For regular Lagrangians it is a (local)
diffeomorphism; the inverse is constructed level by level, each level
being affine in the jets it introduces whenever the corresponding
second derivatives vanish (checked structurally), with a damped Newton
fallback for point mapping otherwise.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from . import expr as ex
from .errors import InternalInconsistency, NotInvertible, StepFailure
from .expr import Coordinate, Expr, Var, Z
from .forms import OneForm, VectorField
from .model import (
    Regularity,
    classify,
    hamiltonian_coords,
    lagrangian_coords,
    symbolic_det,
)
from .lagrangian import energy, momenta

__all__ = [
    "LegendreMap",
    "legendre",
    "hamiltonian",
    "hamiltonian_vector_field",
    "HamiltonianSystem",
    "hamiltonian_system",
    "symbolic_linsolve",
]


def symbolic_linsolve(A, rhs):
    """Solve ``A x = rhs`` symbolically by Cramer's rule (small systems)."""
    m = len(rhs)
    det = ex.simplify(symbolic_det(A))
    if det == ex.ZERO:
        raise NotInvertible("coefficient matrix is symbolically singular")
    out = []
    for j in range(m):
        col = [
            [A[r][c] if c != j else rhs[r] for c in range(m)] for r in range(m)
        ]
        out.append(ex.div(symbolic_det(col), det))
    return out


@dataclass(frozen=True)
class LegendreMap:
    """The Legendre map and (when available) its symbolic inverse.

    ``forward`` maps every Hamiltonian coordinate to its expression in
    Lagrangian coordinates.  ``inverse`` maps the jets of order
    ``k..2k-1`` to expressions in Hamiltonian coordinates (``None`` when
    the level-wise affinity check failed and only the Newton fallback is
    available)."""

    model: object
    forward: dict
    inverse: dict | None

    @property
    def symbolic(self):
        return self.inverse is not None

    # -- point mapping --------------------------------------------------
    def push_point(self, point):
        """Map a numeric Lagrangian point to a Hamiltonian point."""
        work = dict(point)
        return {
            c: ex.evaluate(self.model.bind(e), work)
            for c, e in self.forward.items()
        }

    def pull_point(self, point, newton_tol=1e-12, newton_maxit=50):
        """Map a numeric Hamiltonian point to the Lagrangian point."""
        n, k = self.model.n, self.model.k
        work = dict(point)
        if self.symbolic:
            out = {}
            for c in lagrangian_coords(n, k):
                if c in self.inverse:
                    out[c] = ex.evaluate(self.model.bind(self.inverse[c]), work)
                else:
                    out[c] = float(work[c])
            return out
        return self._newton_pull(point, newton_tol, newton_maxit)

    def _newton_pull(self, point, tol, maxit):
        n, k = self.model.n, self.model.k
        model = self.model
        unknowns = [
            Coordinate.jet(i, a) for a in range(k, 2 * k) for i in range(n)
        ]
        phat = momenta(model)
        target = np.array(
            [point[Coordinate.momentum(r, i)] for r in range(k) for i in range(n)]
        )
        exprs = [model.bind(phat[r][i]) for r in range(k) for i in range(n)]
        jac = [
            [ex.differentiate(e, u) for u in unknowns] for e in exprs
        ]
        base = {
            c: float(point[c])
            for c in hamiltonian_coords(n, k)
            if c.is_jet or c.is_z
        }
        x = np.zeros(len(unknowns))
        for _ in range(maxit):
            work = dict(base)
            work.update({u: float(v) for u, v in zip(unknowns, x)})
            F = np.array([ex.evaluate(e, work) for e in exprs]) - target
            if np.max(np.abs(F)) <= tol:
                out = dict(base)
                out.update({u: float(v) for u, v in zip(unknowns, x)})
                return out
            J = np.array(
                [[ex.evaluate(w, work) for w in row] for row in jac]
            )
            try:
                step = np.linalg.solve(J, F)
            except np.linalg.LinAlgError as e:
                raise NotInvertible(
                    f"Newton inversion hit a singular Jacobian: {e}"
                ) from None
            lam = 1.0
            norm0 = np.max(np.abs(F))
            while lam > 1e-8:
                cand = x - lam * step
                work = dict(base)
                work.update({u: float(v) for u, v in zip(unknowns, cand)})
                Fc = np.array([ex.evaluate(e, work) for e in exprs]) - target
                if np.max(np.abs(Fc)) < norm0:
                    x = cand
                    break
                lam *= 0.5
            else:
                raise NotInvertible(
                    "damped Newton inversion stalled (no descent step)"
                )
        raise NotInvertible(
            f"Newton inversion did not reach tolerance {tol:g} in "
            f"{maxit} iterations"
        )

    # -- expression mapping ---------------------------------------------
    def pull_expr(self, e):
        """Rewrite a Lagrangian-coordinate expression over Hamiltonian
        coordinates using the symbolic inverse."""
        if not self.symbolic:
            raise NotInvertible(
                "no symbolic inverse available (non-affine Legendre levels)"
            )
        return ex.substitute(e, self.inverse)

    def push_expr(self, e):
        """Rewrite a Hamiltonian-coordinate expression over Lagrangian
        coordinates (compose with the forward map)."""
        return ex.substitute(e, self.forward)


@functools.lru_cache(maxsize=256)
def legendre(model):
    """Construct the Legendre map; raises :class:`NotInvertible` for
    singular Lagrangians."""
    rep = classify(model)
    if rep.verdict is not Regularity.REGULAR:
        raise NotInvertible(
            "the Legendre map of a non-regular Lagrangian is not "
            f"invertible (classification: {rep.verdict.value})"
        )
    n, k = model.n, model.k
    phat = momenta(model)

    forward = {}
    for i in range(n):
        for a in range(k):
            c = Coordinate.jet(i, a)
            forward[c] = Var(c)
    for r in range(k):
        for i in range(n):
            forward[Coordinate.momentum(r, i)] = phat[r][i]
    forward[Z] = Var(Z)

    # level-by-level inverse: momenta level r determines jets of order
    # 2k-1-r, affinely whenever the second derivatives in those jets
    # vanish structurally.
    inverse = {}
    affine = True
    for r in range(k - 1, -1, -1):
        order = 2 * k - 1 - r
        unknowns = [Coordinate.jet(j, order) for j in range(n)]
        exprs = [ex.substitute(phat[r][i], inverse) for i in range(n)]
        for e in exprs:
            for u in unknowns:
                du = ex.differentiate(e, u)
                for u2 in unknowns:
                    if ex.differentiate(du, u2) != ex.ZERO:
                        affine = False
        if not affine:
            break
        A = [
            [ex.differentiate(exprs[i], unknowns[j]) for j in range(n)]
            for i in range(n)
        ]
        zero_u = {u: ex.ZERO for u in unknowns}
        rhs = [
            ex.sub(
                Var(Coordinate.momentum(r, i)),
                ex.substitute(exprs[i], zero_u),
            )
            for i in range(n)
        ]
        if n == 1:
            sol = [ex.div(rhs[0], A[0][0])]
        else:
            sol = symbolic_linsolve(A, rhs)
        for u, s in zip(unknowns, sol):
            inverse[u] = ex.simplify(s)

    return LegendreMap(
        model=model, forward=forward, inverse=inverse if affine else None
    )


@functools.lru_cache(maxsize=256)
def hamiltonian(model):
    """The contact Hamiltonian ``H = sum p<r>_<i> (q<i>_<r+1> o Leg^-1)
    - L o Leg^-1`` on the Hamiltonian phase space.

    Internally asserted to pull back to the energy:
    ``H o Leg = E_L``."""
    leg = legendre(model)
    if not leg.symbolic:
        raise NotInvertible(
            "closed-form Hamiltonian requires a symbolic Legendre inverse"
        )
    n, k = model.n, model.k
    terms = []
    for r in range(k):
        for i in range(n):
            qnext = Var(Coordinate.jet(i, r + 1))
            pulled = leg.pull_expr(qnext)
            terms.append(ex.mul(Var(Coordinate.momentum(r, i)), pulled))
    terms.append(ex.neg(leg.pull_expr(model.L)))
    H = ex.add(*terms)

    ex.assert_equivalent(
        leg.push_expr(H), energy(model), "Hamiltonian pullback H o Leg = E_L"
    )
    return H


def _eta_hamiltonian(n, k):
    coeffs = {Z: ex.ONE}
    for r in range(k):
        for i in range(n):
            coeffs[Coordinate.jet(i, r)] = ex.neg(
                Var(Coordinate.momentum(r, i))
            )
    return OneForm(coeffs)


def hamiltonian_vector_field(H, n, k):
    """Contact Hamilton equations as a vector field on the Hamiltonian
    phase space:

        q<i>_<r>'  =  dH/dp<r>_<i>
        p<r>_<i>'  = -(dH/dq<i>_<r> + p<r>_<i> dH/dz)
        z'         =  sum p<r>_<i> dH/dp<r>_<i> - H

    The defining contact conditions ``i(X_H) eta = -H`` and
    ``i(X_H) d eta = dH - (dH/dz) eta`` are asserted symbolically.
    """
    H = ex.simplify(H)
    comps = {}
    zterms = []
    for r in range(k):
        for i in range(n):
            q = Coordinate.jet(i, r)
            p = Coordinate.momentum(r, i)
            dp = ex.differentiate(H, p)
            comps[q] = dp
            comps[p] = ex.neg(
                ex.add(
                    ex.differentiate(H, q),
                    ex.mul(Var(p), ex.differentiate(H, Z)),
                )
            )
            zterms.append(ex.mul(Var(p), dp))
    zterms.append(ex.neg(H))
    comps[Z] = ex.add(*zterms)

    field = VectorField(hamiltonian_coords(n, k), comps, name="X_H")
    _assert_contact_conditions(field, H, n, k)
    return field


def _assert_contact_conditions(field, H, n, k):
    eta = _eta_hamiltonian(n, k)
    pairing = eta.contract(field.components)
    ex.assert_equivalent(pairing, ex.neg(H), "i(X_H) eta = -H")

    deta = eta.d()
    lhs = deta.contract(field.components)
    Hz = ex.differentiate(H, Z)
    rhs_coeffs = {}
    for c in hamiltonian_coords(n, k):
        r = ex.sub(ex.differentiate(H, c), ex.mul(Hz, eta.coeff(c)))
        if r != ex.ZERO:
            rhs_coeffs[c] = r
    for c in set(lhs.coeffs) | set(rhs_coeffs):
        ex.assert_equivalent(
            lhs.coeff(c),
            rhs_coeffs.get(c, ex.ZERO),
            f"i(X_H) deta = dH - (dH/dz) eta, coefficient of d{c.name}",
        )


@dataclass(frozen=True)
class HamiltonianSystem:
    model: object
    legendre: LegendreMap
    H: Expr
    X_H: VectorField


@functools.lru_cache(maxsize=256)
def hamiltonian_system(model):
    """Bundle the Legendre map, Hamiltonian, and Hamilton equations."""
    leg = legendre(model)
    H = hamiltonian(model)
    X_H = hamiltonian_vector_field(H, model.n, model.k)
    return HamiltonianSystem(model=model, legendre=leg, H=H, X_H=X_H)
