"""Independent expected-value computations used by the test suite.

Everything here is deliberately written as a *separate route* from the
library code it checks: the fully expanded second-order equation below
is a term-by-term transcription (no shared recursion with
``herglotz.lagrangian``), and the finite-difference helpers use plain
numpy stencils.
"""

from __future__ import annotations

import numpy as np

from herglotz import expr as ex
from herglotz.expr import Coordinate

jet = Coordinate.jet
Z = ex.Z


def _d(e, *coords):
    """Iterated partial derivative."""
    for c in coords:
        e = ex.differentiate(e, c)
    return e


def expanded_k2_equation(L, n, i):
    """Fully expanded second-order (k=2) contact Euler-Lagrange
    expression for degree of freedom ``i``:
    ``dL/dq_0 - D_L(dL/dq_1) + D_L(D_L(dL/dq_2))`` written out in
    partial derivatives of ``L`` alone, with every occurrence of
    ``D_L`` eliminated.  Independent of the recursion in
    ``herglotz.lagrangian``.
    """
    L = ex.simplify(L)
    q = jet
    Lz = _d(L, Z)
    terms = []

    # fourth-order block: q4^j * d2L/dq2^j dq2^i
    for j in range(n):
        terms.append(ex.mul(ex.var(q(j, 4)), _d(L, q(j, 2), q(i, 2))))

    # bilinear third-order block: q3^j q3^k * d3L/dq2^k dq2^j dq2^i
    for j in range(n):
        for kk in range(n):
            terms.append(
                ex.mul(
                    ex.var(q(j, 3)),
                    ex.var(q(kk, 3)),
                    _d(L, q(kk, 2), q(j, 2), q(i, 2)),
                )
            )

    # q3^k block
    for kk in range(n):
        block = [
            ex.neg(_d(L, q(kk, 2), q(i, 1))),
            _d(L, q(kk, 1), q(i, 2)),
            ex.mul(_d(L, q(kk, 2)), _d(L, Z, q(i, 2))),
            ex.mul(ex.const(2), L, _d(L, q(kk, 2), Z, q(i, 2))),
            ex.neg(ex.mul(_d(L, q(kk, 2), Z), _d(L, q(i, 2)))),
            ex.neg(ex.mul(ex.const(2), Lz, _d(L, q(kk, 2), q(i, 2)))),
        ]
        for j in range(n):
            block.append(
                ex.mul(ex.const(2), ex.var(q(j, 2)),
                       _d(L, q(kk, 2), q(j, 1), q(i, 2)))
            )
            block.append(
                ex.mul(ex.const(2), ex.var(q(j, 1)),
                       _d(L, q(kk, 2), q(j, 0), q(i, 2)))
            )
        terms.append(ex.mul(ex.var(q(kk, 3)), ex.add(*block)))

    # q2^k block
    for kk in range(n):
        block = [
            ex.neg(_d(L, q(kk, 1), q(i, 1))),
            _d(L, q(kk, 0), q(i, 2)),
            ex.mul(_d(L, q(kk, 1)), _d(L, Z, q(i, 2))),
            ex.mul(ex.const(2), L, _d(L, q(kk, 1), Z, q(i, 2))),
            ex.neg(ex.mul(_d(L, q(kk, 1), Z), _d(L, q(i, 2)))),
            ex.neg(ex.mul(ex.const(2), Lz, _d(L, q(kk, 1), q(i, 2)))),
        ]
        for j in range(n):
            block.append(
                ex.mul(ex.var(q(j, 2)), _d(L, q(kk, 1), q(j, 1), q(i, 2)))
            )
            block.append(
                ex.mul(ex.const(2), ex.var(q(j, 1)),
                       _d(L, q(kk, 1), q(j, 0), q(i, 2)))
            )
        terms.append(ex.mul(ex.var(q(kk, 2)), ex.add(*block)))

    # q1^k block
    for kk in range(n):
        block = [
            ex.neg(_d(L, q(kk, 0), q(i, 1))),
            ex.mul(_d(L, q(kk, 0)), _d(L, Z, q(i, 2))),
            ex.mul(ex.const(2), L, _d(L, q(kk, 0), Z, q(i, 2))),
            ex.neg(ex.mul(_d(L, q(kk, 0), Z), _d(L, q(i, 2)))),
            ex.neg(ex.mul(ex.const(2), Lz, _d(L, q(kk, 0), q(i, 2)))),
        ]
        for j in range(n):
            block.append(
                ex.mul(ex.var(q(j, 1)), _d(L, q(kk, 0), q(j, 0), q(i, 2)))
            )
        terms.append(ex.mul(ex.var(q(kk, 1)), ex.add(*block)))

    # order-zero block; the (dL/dz)^2 dL/dq2 term carries a plus sign
    # (it arises from -Lz * (-Lz * dL/dq2) in the double total
    # derivative).
    terms.extend(
        [
            ex.mul(L, L, _d(L, Z, Z, q(i, 2))),
            ex.neg(ex.mul(L, _d(L, Z, Z), _d(L, q(i, 2)))),
            ex.neg(ex.mul(L, Lz, _d(L, Z, q(i, 2)))),
            ex.mul(Lz, Lz, _d(L, q(i, 2))),
            ex.neg(ex.mul(L, _d(L, Z, q(i, 1)))),
            ex.mul(Lz, _d(L, q(i, 1))),
            _d(L, q(i, 0)),
        ]
    )
    return ex.simplify(ex.add(*terms))


def central_derivative(f, x, h=1e-3):
    """Richardson-extrapolated central difference of a scalar callable."""
    d1 = (f(x + h) - f(x - h)) / (2 * h)
    d2 = (f(x + h / 2) - f(x - h / 2)) / h
    return (4 * d2 - d1) / 3


def sample_points(coords, count, seed, span=1.0):
    """Deterministic uniform sample points for a coordinate list."""
    rng = np.random.default_rng(seed)
    return [
        {c: float(v) for c, v in zip(coords, rng.uniform(-span, span, len(coords)))}
        for _ in range(count)
    ]


def relative_gap(a, b, floor=1.0):
    """|a - b| / max(floor, |a|, |b|)."""
    return abs(a - b) / max(floor, abs(a), abs(b))
