"""Sparse differential forms and vector fields on coordinate patches.

A :class:`OneForm` stores ``sum_c w_c dc`` as a coordinate-keyed mapping
of coefficient expressions; a :class:`TwoForm` stores
``sum_{a<b} W_ab da ^ db`` keyed by ordered coordinate pairs.  A
:class:`VectorField` stores explicit symbolic components plus optional
*implicit blocks*: square linear systems ``A f = rhs`` whose solutions
supply the remaining components numerically (used when ``n > 1`` makes a
symbolic matrix inverse unprofitable).  Blocks are solved in order and
their outputs are bound to placeholder parameters, so later blocks and
explicit components may reference earlier solutions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import expr as ex
from .errors import DomainError, UnboundCoordinate
from .expr import Coordinate, Expr

__all__ = ["OneForm", "TwoForm", "VectorField", "ImplicitBlock", "placeholder"]


def placeholder(coord):
    """Placeholder parameter naming the yet-unsolved component along a
    coordinate (used to express one implicit block's dependence on a
    previously solved one)."""
    return Coordinate.param(f"_f_{coord.name}")


class OneForm:
    """``sum_c w_c dc`` with canonical coefficient expressions."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        clean = {}
        for c, w in coeffs.items():
            w = ex.simplify(w)
            if w != ex.ZERO:
                clean[c] = w
        self.coeffs = clean

    def coeff(self, c):
        return self.coeffs.get(c, ex.ZERO)

    def contract(self, vf_components):
        """Pair with a vector field given as ``Coordinate -> Expr``."""
        return ex.add(
            *(ex.mul(w, vf_components.get(c, ex.ZERO)) for c, w in self.coeffs.items())
        )

    def contract_numeric(self, comp_values, point):
        """Pair with numeric components at a numeric point."""
        return sum(
            ex.evaluate(w, point) * comp_values.get(c, 0.0)
            for c, w in self.coeffs.items()
        )

    def d(self):
        """Exterior derivative as a :class:`TwoForm`; parameters are
        constants, not directions."""
        out = {}
        for c, w in self.coeffs.items():
            for b in sorted(w.free_coords()):
                if b.is_param:
                    continue
                dw = ex.differentiate(w, b)
                if dw == ex.ZERO or b == c:
                    continue
                # contribution  dw/db  db ^ dc
                if b.sort_key() < c.sort_key():
                    key, sign = (b, c), 1
                else:
                    key, sign = (c, b), -1
                term = dw if sign > 0 else ex.neg(dw)
                out[key] = ex.add(out[key], term) if key in out else term
        return TwoForm(out)

    def vector(self, coords, point):
        """Numeric coefficient vector in the given coordinate order."""
        return np.array(
            [ex.evaluate(self.coeff(c), point) for c in coords], dtype=float
        )

    def map(self, fn):
        return OneForm({c: fn(w) for c, w in self.coeffs.items()})

    def __repr__(self):
        inner = " + ".join(
            f"({ex.render(w)}) d{c.name}" for c, w in sorted(
                self.coeffs.items(), key=lambda cw: cw[0].sort_key()
            )
        )
        return f"<OneForm {inner or '0'}>"


class TwoForm:
    """``sum_{a<b} W_ab da ^ db`` keyed by ordered pairs ``(a, b)``.

    Accepts a mapping or an iterable of ``((a, b), coeff)`` pairs; keys
    are normalized to coordinate order (flipping the sign) and repeated
    pairs accumulate.
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        items = coeffs.items() if hasattr(coeffs, "items") else coeffs
        clean = {}
        for (a, b), w in items:
            if a == b:
                continue
            if a.sort_key() > b.sort_key():
                a, b, w = b, a, ex.neg(w)
            key = (a, b)
            clean[key] = ex.add(clean[key], w) if key in clean else ex.simplify(w)
        self.coeffs = {k: w for k, w in clean.items() if w != ex.ZERO}

    def coeff(self, a, b):
        """Antisymmetric coefficient ``W_ab`` for arbitrary order."""
        if a.sort_key() <= b.sort_key():
            return self.coeffs.get((a, b), ex.ZERO)
        return ex.neg(self.coeffs.get((b, a), ex.ZERO))

    def contract(self, vf_components):
        """``i(X)W`` as a :class:`OneForm` for symbolic components."""
        out = {}

        def accumulate(c, term):
            out[c] = ex.add(out[c], term) if c in out else term

        for (a, b), w in self.coeffs.items():
            xa = vf_components.get(a, ex.ZERO)
            xb = vf_components.get(b, ex.ZERO)
            if xa != ex.ZERO:
                accumulate(b, ex.mul(xa, w))
            if xb != ex.ZERO:
                accumulate(a, ex.neg(ex.mul(xb, w)))
        return OneForm(out)

    def matrix(self, coords, point):
        """Full antisymmetric numeric matrix in the given order."""
        m = len(coords)
        index = {c: j for j, c in enumerate(coords)}
        mat = np.zeros((m, m), dtype=float)
        for (a, b), w in self.coeffs.items():
            v = ex.evaluate(w, point)
            ia, ib = index[a], index[b]
            mat[ia, ib] += v
            mat[ib, ia] -= v
        return mat

    def map(self, fn):
        return TwoForm({k: fn(w) for k, w in self.coeffs.items()})

    def __repr__(self):
        inner = " + ".join(
            f"({ex.render(w)}) d{a.name}^d{b.name}"
            for (a, b), w in sorted(
                self.coeffs.items(),
                key=lambda kw: (kw[0][0].sort_key(), kw[0][1].sort_key()),
            )
        )
        return f"<TwoForm {inner or '0'}>"


@dataclass(frozen=True)
class ImplicitBlock:
    """A linear system ``A f = rhs`` determining the components along
    ``coords``.  Matrix and rhs entries may reference placeholders of
    previously solved blocks."""

    coords: tuple  # coordinates whose components this block determines
    matrix: tuple  # tuple of tuples of Expr
    rhs: tuple  # tuple of Expr

    @property
    def outputs(self):
        return tuple(placeholder(c) for c in self.coords)


class VectorField:
    """A vector field with symbolic components and optional implicit
    blocks, on an ordered coordinate patch."""

    def __init__(self, coords, components, blocks=(), name=""):
        self.coords = tuple(coords)
        self.components = {c: ex.simplify(e) for c, e in components.items()}
        self.blocks = tuple(blocks)
        self.name = name

    @property
    def is_explicit(self):
        return not self.blocks

    def component(self, c):
        return self.components.get(c, ex.ZERO)

    def evaluate(self, point):
        """Numeric components at a point, solving implicit blocks in
        order.  Returns ``Coordinate -> float``."""
        work = dict(point)
        for blk in self.blocks:
            m = len(blk.coords)
            A = np.empty((m, m), dtype=float)
            b = np.empty(m, dtype=float)
            for r in range(m):
                b[r] = ex.evaluate(blk.rhs[r], work)
                for c in range(m):
                    A[r, c] = ex.evaluate(blk.matrix[r][c], work)
            try:
                sol = np.linalg.solve(A, b)
            except np.linalg.LinAlgError as e:
                raise DomainError(
                    f"implicit block for {[c.name for c in blk.coords]} "
                    f"is singular at the evaluation point: {e}"
                ) from None
            for c, out, v in zip(blk.coords, blk.outputs, sol):
                work[out] = float(v)

        values = {}
        for c in self.coords:
            comp = self.components.get(c)
            values[c] = 0.0 if comp is None else ex.evaluate(comp, work)
        return values

    def evaluate_vector(self, x):
        """Numeric component vector for a state vector in patch order."""
        point = dict(zip(self.coords, x))
        values = self.evaluate(point)
        return np.array([values[c] for c in self.coords], dtype=float)

    def compiled(self):
        """Compile to ``f(x: sequence) -> np.ndarray`` (patch order).

        All expressions must be closed over the patch coordinates and
        block placeholders (parameters must be bound beforehand).
        """
        layout = list(self.coords)
        compiled_blocks = []
        for blk in self.blocks:
            mat_fn = ex.compile_exprs(
                [w for row in blk.matrix for w in row], layout, "block_matrix"
            )
            rhs_fn = ex.compile_exprs(list(blk.rhs), layout, "block_rhs")
            compiled_blocks.append((len(blk.coords), mat_fn, rhs_fn))
            layout = layout + list(blk.outputs)

        comp_fn = ex.compile_exprs(
            [self.components.get(c, ex.ZERO) for c in self.coords],
            layout,
            "field_components",
        )
        n_state = len(self.coords)

        def rhs(x):
            work = list(x[:n_state])
            for m, mat_fn, rhs_fn in compiled_blocks:
                A = np.array(mat_fn(work), dtype=float).reshape(m, m)
                b = np.array(rhs_fn(work), dtype=float)
                sol = np.linalg.solve(A, b)
                work.extend(float(v) for v in sol)
            return np.array(comp_fn(work), dtype=float)

        return rhs

    def free_coordinates(self):
        frees = set()
        for e in self.components.values():
            frees |= e.free_coords()
        for blk in self.blocks:
            for row in blk.matrix:
                for w in row:
                    frees |= w.free_coords()
            for w in blk.rhs:
                frees |= w.free_coords()
        return frees

    def bind_params(self, bindings):
        """Substitute parameter values; returns a new field."""
        sub = lambda e: ex.substitute(e, bindings)
        return VectorField(
            self.coords,
            {c: sub(e) for c, e in self.components.items()},
            [
                ImplicitBlock(
                    blk.coords,
                    tuple(tuple(sub(w) for w in row) for row in blk.matrix),
                    tuple(sub(w) for w in blk.rhs),
                )
                for blk in self.blocks
            ],
            self.name,
        )

    def __repr__(self):
        return (
            f"<VectorField {self.name or 'X'} on {len(self.coords)} coords, "
            f"{len(self.blocks)} implicit block(s)>"
        )
