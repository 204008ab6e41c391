"""Unified (Skinner-Rusk style) formalism and its constraint algorithm.

The unified phase space carries the jets of order ``0..2k-1``, the
momenta of levels ``0..k-1``, and ``z``.  On it live the coupling
function ``C = sum p(r,i) q(i,r+1)``, the Hamiltonian ``H = C - L``,
the precontact form ``eta = dz - sum p(r,i) dq(i,r)`` and the Reeb
field ``d/dz``.  The contact equations

    i(X) d(eta) = dH - (R(H)) eta ,    i(X) eta = -H

are compatible only on a submanifold; :func:`constraint_algorithm`
iterates the tangency condition and returns the resulting constraint
chain together with the resolved vector-field coefficients.

Two modes are supported.  ``HOLONOMY_FIRST`` pins the undetermined jet
components to the holonomic choice ``f_alpha = q_{alpha+1}`` for
``alpha <= 2k-2`` before running the tangency iteration, leaving only
the top components free.  ``APPENDIX_A`` instead seeds the chain with
the full set of momentum relations ``p(r,i) = phat[r][i]`` (the graph
of the Legendre map) and leaves every component ``f_alpha`` with
``alpha >= k`` free, to be fixed by the tangency equations.  For
regular Lagrangians both modes close on the same final submanifold.
"""

from __future__ import annotations

import dataclasses
import enum
import math
import random
from fractions import Fraction

from . import expr as ex
from .errors import (
    DomainError,
    InternalInconsistency,
    NonTermination,
    NotInvertible,
    UnderdeterminedChain,
)
from .expr import Coordinate
from .forms import OneForm, VectorField, placeholder
from .lagrangian import momenta
from .model import ContactLagrangian, unified_coords

_SAMPLE_SEED = 0xC0FFEE


# ---------------------------------------------------------------------------
# The unified system
# ---------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class UnifiedSystem:
    """Canonical structures on the unified phase space."""

    model: ContactLagrangian
    coupling: ex.Expr
    hamiltonian: ex.Expr
    eta: OneForm
    reeb: VectorField
    coords: tuple

    @property
    def n(self):
        return self.model.n

    @property
    def k(self):
        return self.model.k


def build_unified(model):
    """Assemble the coupling function, Hamiltonian, precontact form and
    Reeb field on the unified space of ``model``."""
    n, k = model.n, model.k
    coords = unified_coords(n, k)

    coupling = ex.add(
        *(
            ex.mul(ex.var(Coordinate.momentum(r, i)), ex.var(Coordinate.jet(i, r + 1)))
            for r in range(k)
            for i in range(n)
        )
    )
    ham = ex.sub(coupling, model.L)

    eta_coeffs = {ex.Z: ex.ONE}
    for r in range(k):
        for i in range(n):
            eta_coeffs[Coordinate.jet(i, r)] = ex.neg(
                ex.var(Coordinate.momentum(r, i))
            )
    eta = OneForm(eta_coeffs)

    reeb = VectorField(coords, {ex.Z: ex.ONE}, name="R_W")

    # H is affine in the momenta, with d H / d p(r,i) = q(i,r+1): the
    # coupling is the only source of momentum dependence.
    for r in range(k):
        for i in range(n):
            p = Coordinate.momentum(r, i)
            slope = ex.differentiate(ham, p)
            if slope != ex.var(Coordinate.jet(i, r + 1)):
                raise InternalInconsistency(
                    f"unified Hamiltonian is not affine in {p.name} with the "
                    f"coupling slope: got {ex.render(slope)}"
                )

    return UnifiedSystem(model, coupling, ham, eta, reeb, coords)


# ---------------------------------------------------------------------------
# Chain data types
# ---------------------------------------------------------------------------


class Mode(enum.Enum):
    """Strategy for the undetermined jet components of the ansatz."""

    HOLONOMY_FIRST = "HolonomyFirst"
    APPENDIX_A = "AppendixA"


class ChainStatus(enum.Enum):
    DETERMINED = "Determined"
    UNDERDETERMINED = "UnderDetermined"
    INCONSISTENT = "Inconsistent"


@dataclasses.dataclass(frozen=True)
class Constraint:
    """One constraint of the chain.

    ``expr`` is the stored representative (reduced modulo the momentum
    relations found so far; normalized to ``p - expr`` when the
    constraint is solvable for a momentum).  ``solved_for``/``view``
    give the explicit graph form used for reduction and sampling.
    """

    expr: ex.Expr
    level: int
    solved_for: Coordinate | None = None
    view: ex.Expr | None = None

    def as_dict(self):
        d = {"expr": ex.render(self.expr), "level": self.level}
        if self.solved_for is not None:
            d["solved_for"] = self.solved_for.name
            d["view"] = ex.render(self.view)
        return d


@dataclasses.dataclass(frozen=True)
class LevelRecord:
    """What one pass of the algorithm produced."""

    index: int
    origin: str  # "compatibility" or "tangency(<level>)"
    constraints: tuple
    resolved: dict  # jet Coordinate -> Expr, components fixed at this level

    def as_dict(self):
        return {
            "level": self.index,
            "origin": self.origin,
            "constraints": [c.as_dict() for c in self.constraints],
            "resolved": {c.name: ex.render(e) for c, e in self.resolved.items()},
        }


@dataclasses.dataclass
class ConstraintChain:
    """Result of the constraint algorithm."""

    system: UnifiedSystem
    mode: Mode
    levels: list
    constraints: list
    components: dict  # Coordinate -> Expr, final ansatz components
    resolved: dict  # jet Coordinate -> Expr, tangency-resolved components
    free: list  # jet Coordinates whose components stay undetermined
    status: ChainStatus
    residuals: list  # offending residual Exprs when Inconsistent
    warnings: list

    @property
    def model(self):
        return self.system.model

    def momentum_views(self):
        """Solved momentum relations ``p(r,i) -> Expr`` in chain order."""
        return {
            c.solved_for: c.view
            for c in self.constraints
            if c.solved_for is not None and c.solved_for.kind == "momentum"
        }

    def all_views(self):
        """All solved relations (momenta and jets) in chain order."""
        return {
            c.solved_for: c.view
            for c in self.constraints
            if c.solved_for is not None
        }

    def field(self, free_values=None):
        """The final evolution field as a :class:`VectorField`.

        Unresolved components (an ``UnderDetermined`` chain) are filled
        from ``free_values`` (jet Coordinate -> Expr); they default to
        zero, which picks one representative of the solution family.
        """
        comps = dict(self.components)
        fills = dict(free_values or {})
        for c in self.free:
            comps[c] = ex.simplify(ex._coerce(fills.get(c, ex.ZERO)))
        return VectorField(self.system.coords, comps, name="X_W")

    def sample_points(self, count=20, seed=_SAMPLE_SEED, span=1.0):
        """Numeric points on the final constraint submanifold.

        Coordinates without a solved view are drawn uniformly from
        ``[-span, span]``; the dependent ones follow from their views
        (evaluated in dependency order).  Parameters take the model's
        bound values.
        """
        return _sample_on_views(
            self.system, self.all_views(), count=count, seed=seed, span=span
        )

    def tangency_residuals(self, count=20, seed=_SAMPLE_SEED):
        """Max |X(xi)| over the constraints at on-chain sample points,
        with free components set to zero."""
        field_comps = self.field().components
        bindings = self.model.param_bindings
        points = self.sample_points(count=count, seed=seed)
        worst = 0.0
        for c in self.constraints:
            lie = _bind(_directional(field_comps, c.expr), bindings)
            for pt in points:
                try:
                    worst = max(worst, abs(ex.evaluate(lie, pt)))
                except DomainError:
                    continue
        return worst

    def as_dict(self):
        d = {
            "mode": self.mode.value,
            "status": self.status.value,
            "levels": [lv.as_dict() for lv in self.levels],
            "constraints": [c.as_dict() for c in self.constraints],
            "resolved": {c.name: ex.render(e) for c, e in self.resolved.items()},
            "free": [c.name for c in self.free],
            "warnings": list(self.warnings),
        }
        if self.residuals:
            d["residuals"] = [ex.render(r) for r in self.residuals]
        return d


# ---------------------------------------------------------------------------
# Helpers: reduction, solving, sampling
# ---------------------------------------------------------------------------


def _bind(e, bindings):
    """Substitute a parameter-coordinate -> constant map."""
    if not bindings:
        return e
    return ex.substitute(e, bindings)


def _reduce(e, views):
    """Substitute solved views to a fixed point (graphs may chain)."""
    if not views:
        return ex.simplify(e)
    current = ex.simplify(e)
    for _ in range(len(views) + 1):
        nxt = ex.simplify(ex.substitute(current, views))
        if nxt == current:
            return current
        current = nxt
    return current


def _directional(components, f):
    """X(f) for an explicit component map ``Coordinate -> Expr``."""
    terms = []
    for c in f.free_coords():
        if c.kind == "param":
            continue
        comp = components.get(c)
        if comp is None or comp is ex.ZERO:
            continue
        terms.append(ex.mul(comp, ex.differentiate(f, c)))
    return ex.add(*terms)


def _is_placeholder(c):
    return c.kind == "param" and c.pname.startswith("_f_")


def _placeholders_in(e):
    return [c for c in e.free_coords() if _is_placeholder(c)]


def _momentum_solve_target(e):
    """A momentum appearing linearly in ``e`` with a coefficient free of
    all momenta, lowest level first.  Returns (coord, coeff) or None."""
    moms = sorted(
        (c for c in e.free_coords() if c.kind == "momentum"),
        key=lambda c: (c.level, c.i),
    )
    best_symbolic = None
    for p in moms:
        coeff = ex.simplify(ex.differentiate(e, p))
        if coeff == ex.ZERO:
            continue
        if any(c.kind == "momentum" for c in coeff.free_coords()):
            continue  # not linear-in-p with momentum-free coefficient
        if isinstance(coeff, ex.Const):
            return p, coeff
        if best_symbolic is None:
            best_symbolic = (p, coeff)
    return best_symbolic


def _jet_solve_target(e):
    """A jet appearing affinely in ``e`` with a symbolically nonzero,
    self-free coefficient, highest order first."""
    jets = sorted(
        (c for c in e.free_coords() if c.kind == "jet"),
        key=lambda c: (-c.order, c.i),
    )
    for q in jets:
        coeff = ex.simplify(ex.differentiate(e, q))
        if coeff == ex.ZERO:
            continue
        if q in coeff.free_coords():
            continue  # not affine in q
        return q, coeff
    return None


def _solve_linear(e, coord, coeff):
    """Solve affine ``e == 0`` for ``coord``: returns ``-(e|_{coord=0})/coeff``."""
    rest = ex.simplify(ex.substitute(e, {coord: ex.ZERO}))
    if isinstance(coeff, ex.Const):
        return ex.simplify(ex.mul(ex.const(Fraction(-1)), ex.div(rest, coeff)))
    return ex.simplify(ex.div(ex.neg(rest), coeff))


def _make_constraint(raw, level, momentum_views):
    """Build the stored representative and solved view for a candidate."""
    rep = _reduce(raw, momentum_views)
    target = _momentum_solve_target(rep)
    if target is not None:
        p, coeff = target
        view = _solve_linear(rep, p, coeff)
        rep = ex.simplify(ex.sub(ex.var(p), view))
        return Constraint(rep, level, p, view)
    target = _jet_solve_target(rep)
    if target is not None:
        q, coeff = target
        view = _solve_linear(rep, q, coeff)
        return Constraint(rep, level, q, view)
    return Constraint(rep, level)


def _view_order(views):
    """Views sorted so that each is evaluated after its dependencies."""
    solved = set(views)
    order = []
    placed = set()
    pending = dict(views)
    while pending:
        progressed = False
        for c in list(pending):
            deps = {
                d
                for d in pending[c].free_coords()
                if d in solved and d != c and d not in placed
            }
            if not deps:
                order.append(c)
                placed.add(c)
                del pending[c]
                progressed = True
        if not progressed:
            raise InternalInconsistency(
                "cyclic dependency among solved constraint views: "
                + ", ".join(c.name for c in pending)
            )
    return order


def _sample_on_views(system, views, count, seed, span=1.0):
    """Numeric points satisfying every solved view, parameters bound."""
    bindings = system.model.param_bindings
    bound_views = {c: _bind(e, bindings) for c, e in views.items()}
    order = _view_order(bound_views)
    free = [c for c in system.coords if c not in bound_views]
    rng = random.Random(seed)
    points = []
    attempts = 0
    while len(points) < count and attempts < 10 * count + 10:
        attempts += 1
        pt = {c: rng.uniform(-span, span) for c in free}
        ok = True
        for c in order:
            try:
                v = ex.evaluate(bound_views[c], pt)
            except DomainError:
                ok = False
                break
            if not math.isfinite(v) or abs(v) > 1e8:
                ok = False
                break
            pt[c] = v
        if ok:
            points.append(pt)
    if len(points) < count:
        raise DomainError(
            "could not sample enough points on the constraint submanifold "
            f"(got {len(points)} of {count})"
        )
    return points


# ---------------------------------------------------------------------------
# The constraint algorithm
# ---------------------------------------------------------------------------


def _initial_components(system, mode):
    """Ansatz components forced by the fundamental equation, plus the
    mode's choice for the undetermined jet slots.

    The contact equations on the unified space force, by coefficient
    matching in ``i(X) d(eta) = dH - (R(H)) eta`` and
    ``i(X) eta = -H``:

    * ``comp[q(i,alpha)] = dH/dp(alpha,i) = q(i,alpha+1)`` for
      ``alpha <= k-1`` (semispray of type k),
    * ``comp[p(r,i)] = -(dH/dq(i,r) + (dH/dz) p(r,i))``,
    * ``comp[z] = L``,

    and leave ``comp[q(i,alpha)]`` free for ``alpha >= k``.
    """
    model = system.model
    n, k = model.n, model.k
    ham = system.hamiltonian
    ham_z = ex.differentiate(ham, ex.Z)

    comps = {}
    for r in range(k):
        for i in range(n):
            q = Coordinate.jet(i, r)
            comps[q] = ex.simplify(
                ex.differentiate(ham, Coordinate.momentum(r, i))
            )
            p = Coordinate.momentum(r, i)
            comps[p] = ex.simplify(
                ex.neg(ex.add(ex.differentiate(ham, q), ex.mul(ham_z, ex.var(p))))
            )
    # i(X) eta = -H with the forced jet components gives comp[z] = L.
    comps[ex.Z] = model.L

    free = []
    for alpha in range(k, 2 * k):
        for i in range(n):
            q = Coordinate.jet(i, alpha)
            if mode is Mode.HOLONOMY_FIRST and alpha <= 2 * k - 2:
                comps[q] = ex.var(Coordinate.jet(i, alpha + 1))
            else:
                comps[q] = ex.var(placeholder(q))
                free.append(q)
    return comps, free


def _primary_constraints(system):
    """Compatibility constraints: the dq(i,alpha) coefficients of
    ``dH - (R(H)) eta`` for ``alpha >= k``, which no component of the
    ansatz can absorb.  Only ``alpha = k`` survives: ``p(k-1,i) -
    dL/dq(i,k)``."""
    model = system.model
    n, k = model.n, model.k
    out = []
    for alpha in range(k, 2 * k):
        for i in range(n):
            c = ex.simplify(ex.differentiate(system.hamiltonian, Coordinate.jet(i, alpha)))
            if c != ex.ZERO:
                out.append(c)
    return out


def constraint_algorithm(
    system,
    mode=Mode.HOLONOMY_FIRST,
    *,
    max_levels=None,
    samples=20,
    seed=_SAMPLE_SEED,
    tol=1e-9,
):
    """Run the tangency iteration on the unified space.

    ``system`` may be a :class:`UnifiedSystem` or a
    :class:`ContactLagrangian`.  The iteration stops when a full pass
    adds no new independent constraint and resolves no new component;
    it raises :class:`NonTermination` beyond ``max_levels`` (default
    ``4k + 4``) and returns status ``INCONSISTENT`` as soon as a
    tangency residual reduces to a nonzero constant.
    """
    if isinstance(system, ContactLagrangian):
        system = build_unified(system)
    if isinstance(mode, str):
        mode = Mode(mode)
    model = system.model
    n, k = model.n, model.k
    cap = (4 * k + 4) if max_levels is None else max_levels

    comps, free = _initial_components(system, mode)
    resolved = {}
    warnings = []
    constraints = []
    levels = []

    def momentum_views():
        return {
            c.solved_for: c.view
            for c in constraints
            if c.solved_for is not None and c.solved_for.kind == "momentum"
        }

    def all_views():
        return {c.solved_for: c.view for c in constraints if c.solved_for is not None}

    def is_new(candidate):
        """Independence: symbolically nonzero modulo every solved view,
        and (when sampling is possible) nonvanishing at >= 1 of
        ``samples`` on-chain points."""
        full = _reduce(candidate, all_views())
        if full == ex.ZERO:
            return False
        for c in constraints:
            if ex.equivalent(candidate, c.expr) or ex.equivalent(
                candidate, ex.neg(c.expr)
            ):
                return False
        status = ex.equivalence_status(full, ex.ZERO)
        if status.status is ex.Equivalence.EQUIVALENT:
            return False
        try:
            points = _sample_on_views(system, all_views(), samples, seed)
        except (DomainError, InternalInconsistency) as err:
            warnings.append(
                f"could not sample the constraint submanifold ({err}); "
                "keeping candidate on symbolic evidence alone"
            )
            return True
        bound = _bind(full, model.param_bindings)
        seen_nonzero = False
        for pt in points:
            try:
                v = ex.evaluate(bound, pt)
            except DomainError:
                continue
            if math.isfinite(v) and abs(v) > tol:
                seen_nonzero = True
                break
        if not seen_nonzero:
            warnings.append(
                "candidate constraint "
                f"{ex.render(full)} is symbolically nonzero but vanished at "
                f"all {samples} sampled points; treated as dependent"
            )
            return False
        return True

    # ----- level 0: compatibility -------------------------------------
    level0 = []
    for raw in _primary_constraints(system):
        c = _make_constraint(raw, 0, momentum_views())
        constraints.append(c)
        level0.append(c)
    if mode is Mode.APPENDIX_A:
        phat = momenta(model)
        for r in range(k - 2, -1, -1):  # k-1 already among the primaries
            for i in range(n):
                raw = ex.sub(ex.var(Coordinate.momentum(r, i)), phat[r][i])
                c = _make_constraint(raw, 0, momentum_views())
                if c.expr != ex.ZERO:
                    constraints.append(c)
                    level0.append(c)
    levels.append(LevelRecord(0, "compatibility", tuple(level0), {}))

    # ----- tangency iteration ------------------------------------------
    level = 0
    inconsistent = []
    while True:
        level += 1
        if level > cap:
            raise NonTermination(
                f"constraint algorithm exceeded {cap} levels "
                f"({len(constraints)} constraints so far)"
            )

        mom_views = momentum_views()
        new_constraints = []
        equations = []
        for c in list(constraints):
            lie = _reduce(_directional(comps, c.expr), mom_views)
            if lie == ex.ZERO:
                continue
            if _placeholders_in(lie):
                equations.append(lie)
            elif isinstance(lie, ex.Const):
                inconsistent.append(lie)
            elif is_new(lie):
                nc = _make_constraint(lie, level, mom_views)
                constraints.append(nc)
                new_constraints.append(nc)

        new_resolved = {}
        if equations and not inconsistent:
            solved, residuals = _solve_placeholder_system(equations, warnings)
            for ph, val in solved.items():
                slot = _placeholder_slot(ph)
                new_resolved[slot] = val
            for res in residuals:
                if isinstance(res, ex.Const):
                    inconsistent.append(res)
                elif is_new(res):
                    nc = _make_constraint(res, level, mom_views)
                    constraints.append(nc)
                    new_constraints.append(nc)

        if new_resolved:
            sub_map = {
                placeholder(slot): val for slot, val in new_resolved.items()
            }
            for c in list(comps):
                comps[c] = ex.simplify(ex.substitute(comps[c], sub_map))
            for slot in list(resolved):
                resolved[slot] = ex.simplify(
                    ex.substitute(resolved[slot], sub_map)
                )
            resolved.update(new_resolved)

        if inconsistent:
            levels.append(
                LevelRecord(
                    level,
                    f"tangency({level - 1})",
                    tuple(new_constraints),
                    new_resolved,
                )
            )
            break
        if not new_constraints and not new_resolved:
            break
        levels.append(
            LevelRecord(
                level, f"tangency({level - 1})", tuple(new_constraints), new_resolved
            )
        )

    still_free = [q for q in free if q not in resolved]
    if inconsistent:
        status = ChainStatus.INCONSISTENT
    elif still_free:
        status = ChainStatus.UNDERDETERMINED
    else:
        status = ChainStatus.DETERMINED

    final_comps = dict(comps)
    for slot, val in resolved.items():
        final_comps[slot] = val

    return ConstraintChain(
        system=system,
        mode=mode,
        levels=levels,
        constraints=constraints,
        components=final_comps,
        resolved=resolved,
        free=still_free,
        status=status,
        residuals=inconsistent,
        warnings=warnings,
    )


def _placeholder_slot(ph):
    """Recover the jet coordinate a placeholder stands for."""
    name = ph.pname[len("_f_") :]
    dof, order = name.split("_")
    return Coordinate.jet(int(dof[1:]), int(order))


def _solve_placeholder_system(equations, warnings):
    """Gaussian elimination of the (always linear) tangency equations
    over the free placeholders.

    Returns ``(solved, residuals)``: placeholder -> Expr for every
    pivot column, and the placeholder-free residual expressions of rows
    that eliminated to no unknowns.  Solutions may reference unsolved
    placeholders when the system is underdetermined.
    """
    unknowns = sorted(
        {ph for e in equations for ph in _placeholders_in(e)},
        key=lambda c: _placeholder_slot(c).sort_key(),
    )
    rows = []
    for e in equations:
        coeffs = []
        for u in unknowns:
            cu = ex.simplify(ex.differentiate(e, u))
            if _placeholders_in(cu):
                raise InternalInconsistency(
                    "tangency equation is not linear in the free components: "
                    + ex.render(e)
                )
            coeffs.append(cu)
        rhs = ex.simplify(
            ex.neg(ex.substitute(e, {u: ex.ZERO for u in unknowns}))
        )
        rows.append((coeffs, rhs))

    m = len(unknowns)
    pivot_of_col = {}
    used_rows = set()
    for col in range(m):
        pick = None
        for ri, (coeffs, _) in enumerate(rows):
            if ri in used_rows or coeffs[col] == ex.ZERO:
                continue
            if isinstance(coeffs[col], ex.Const):
                pick = ri
                break
            if pick is None:
                status = ex.equivalence_status(coeffs[col], ex.ZERO)
                if status.status is ex.Equivalence.DIFFERENT:
                    pick = ri
                elif status.status is ex.Equivalence.INCONCLUSIVE:
                    warnings.append(
                        "pivot candidate "
                        f"{ex.render(coeffs[col])} is numerically "
                        "indistinguishable from zero; skipped"
                    )
        if pick is None:
            continue
        used_rows.add(pick)
        pivot_of_col[col] = pick
        pc, prhs = rows[pick]
        for ri, (coeffs, rhs) in enumerate(rows):
            if ri == pick or coeffs[col] == ex.ZERO:
                continue
            factor = ex.div(coeffs[col], pc[col])
            newc = [
                ex.simplify(ex.sub(coeffs[j], ex.mul(factor, pc[j])))
                for j in range(m)
            ]
            newr = ex.simplify(ex.sub(rhs, ex.mul(factor, prhs)))
            rows[ri] = (newc, newr)

    solved = {}
    # Back-substitute in reverse column order so later pivots (higher
    # jet slots) are expressed before appearing in earlier solutions.
    for col in sorted(pivot_of_col, reverse=True):
        ri = pivot_of_col[col]
        coeffs, rhs = rows[ri]
        num = rhs
        for j in range(m):
            if j == col or coeffs[j] == ex.ZERO:
                continue
            other = solved.get(unknowns[j], ex.var(unknowns[j]))
            num = ex.sub(num, ex.mul(coeffs[j], other))
        solved[unknowns[col]] = ex.simplify(ex.div(num, coeffs[col]))

    # Solutions must not reference *solved* placeholders.
    changed = True
    rounds = 0
    while changed and rounds <= m + 1:
        changed = False
        rounds += 1
        for u in solved:
            nxt = ex.simplify(ex.substitute(solved[u], solved))
            if nxt != solved[u]:
                solved[u] = nxt
                changed = True

    residuals = []
    for ri, (coeffs, rhs) in enumerate(rows):
        if ri in used_rows:
            continue
        if all(c == ex.ZERO for c in coeffs):
            res = ex.simplify(rhs)
            if res != ex.ZERO:
                residuals.append(ex.neg(res))
        else:
            # unpivotable symbolic coefficients: surface the unsolved
            # relation among the unknowns as a warning
            relation = ex.simplify(
                ex.sub(
                    ex.add(
                        *(
                            ex.mul(coeffs[j], ex.var(unknowns[j]))
                            for j in range(m)
                            if coeffs[j] != ex.ZERO
                        )
                    ),
                    rhs,
                )
            )
            warnings.append(
                "tangency equation left unsolved (no usable pivot): "
                + ex.render(relation)
            )
    return solved, residuals


# ---------------------------------------------------------------------------
# Projections
# ---------------------------------------------------------------------------


def _require_determined(chain, what):
    if chain.status is not ChainStatus.DETERMINED:
        detail = (
            "free components: " + ", ".join(c.name for c in chain.free)
            if chain.free
            else "status " + chain.status.value
        )
        raise UnderdeterminedChain(f"{what} needs a determined chain; {detail}")


def project_to_lagrangian(chain):
    """The induced field on jets-and-z: momenta eliminated through the
    chain's momentum relations."""
    _require_determined(chain, "the Lagrangian projection")
    model = chain.model
    n, k = model.n, model.k
    mom_views = chain.momentum_views()
    coords = [Coordinate.jet(i, a) for a in range(2 * k) for i in range(n)]
    coords.append(ex.Z)
    comps = {}
    for c in coords:
        comps[c] = _reduce(chain.components[c], mom_views)
        leftover = [d for d in comps[c].free_coords() if d.kind == "momentum"]
        if leftover:
            raise InternalInconsistency(
                f"momenta {[d.name for d in leftover]} survive in the "
                f"Lagrangian projection of comp[{c.name}]"
            )
    return VectorField(tuple(coords), comps, name="X_L")


def project_to_hamiltonian(chain):
    """The induced field on the momentum side: jets of order >= k
    eliminated through the Legendre inverse (regular models)."""
    from .hamiltonian import legendre

    _require_determined(chain, "the Hamiltonian projection")
    model = chain.model
    n, k = model.n, model.k
    leg = legendre(model)
    if not leg.symbolic:
        raise NotInvertible(
            "the Hamiltonian projection needs a closed-form Legendre inverse"
        )
    inv_views = dict(leg.inverse)

    def eliminate(e):
        out = _reduce(e, inv_views)
        high = [
            d for d in out.free_coords() if d.kind == "jet" and d.order >= k
        ]
        if high:
            raise InternalInconsistency(
                f"jets {[d.name for d in high]} survive in the Hamiltonian "
                "projection"
            )
        return out

    coords = [Coordinate.jet(i, a) for a in range(k) for i in range(n)]
    coords += [Coordinate.momentum(r, i) for r in range(k) for i in range(n)]
    coords.append(ex.Z)
    comps = {c: eliminate(chain.components[c]) for c in coords}
    return VectorField(tuple(coords), comps, name="X_H")
