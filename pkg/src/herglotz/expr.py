"""Immutable symbolic expression kernel.

Expressions are built from coordinates (jet variables q<i>_<alpha>, the
action variable z, momenta p<r>_<i>, and named parameters) with rational
and floating constants, +, -, *, /, integer/rational powers, and the
transcendental functions sin, cos, exp, log.

Canonical form
--------------
All engine-produced expressions are *canonical*: expanded sums of
monomials over atomic factors, produced bottom-up by the smart
constructors :func:`add`, :func:`mul`, :func:`pw`, etc.  Canonicalization
flattens and sorts, merges like terms and like factors, folds constants
exactly (rational arithmetic), normalizes ``Neg``/``Div`` into
multiplication by ``-1`` and negative powers, expands products over sums
and small integer powers of sums, merges products of exponentials, and
applies a handful of exact special-case function folds (sin 0, cos 0,
exp 0, log 1, log(exp x), exp(log x), parity of sin/cos).  No trig
identities, factorization, or term collection beyond like monomials is
attempted.  :func:`simplify` is idempotent and value-preserving.

Semantic equality of non-identical forms is decided by
:func:`equivalence_status`, which combines a symbolic zero test of the
difference with deterministic randomized sampling.
"""

from __future__ import annotations

import functools
import math
import re
from enum import Enum
from fractions import Fraction
from random import Random
from typing import Iterable, Mapping, Sequence

from .errors import (
    DomainError,
    ExprSyntaxError,
    OrderOutOfRange,
    UnboundCoordinate,
    UnknownVariable,
)

__all__ = [
    "Coordinate",
    "Z",
    "Expr",
    "Const",
    "Var",
    "Add",
    "Mul",
    "Pow",
    "Neg",
    "Div",
    "Sin",
    "Cos",
    "Exp",
    "Log",
    "const",
    "var",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "pw",
    "sin",
    "cos",
    "exp",
    "log",
    "ZERO",
    "ONE",
    "simplify",
    "differentiate",
    "evaluate",
    "substitute",
    "free_coordinates",
    "free_params",
    "max_jet_order",
    "Equivalence",
    "EquivalenceResult",
    "equivalence_status",
    "equivalent",
    "assert_equivalent",
    "ParseContext",
    "parse",
    "render",
    "compile_exprs",
]


# ---------------------------------------------------------------------------
# Coordinates
# ---------------------------------------------------------------------------

_KIND_JET = "jet"
_KIND_Z = "z"
_KIND_MOMENTUM = "momentum"
_KIND_PARAM = "param"

_KIND_RANK = {_KIND_JET: 0, _KIND_MOMENTUM: 1, _KIND_PARAM: 2, _KIND_Z: 3}


class Coordinate:
    """A phase-space coordinate label.

    Four kinds exist:

    * jet coordinates ``q<i>_<alpha>`` (degree of freedom ``i``,
      derivative order ``alpha``),
    * the action variable ``z``,
    * momenta ``p<r>_<i>`` (level ``r``, degree of freedom ``i``),
    * named parameters (``omega``, ``m``, ``t``, ...).

    Instances are immutable, hashable, and totally ordered by
    ``sort_key()`` (jets by (order, dof), then momenta by (level, dof),
    then parameters by name, then z).
    """

    __slots__ = ("kind", "i", "r", "pname", "_hash")

    def __init__(self, kind, i=0, r=0, pname=""):
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "i", i)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "pname", pname)
        object.__setattr__(self, "_hash", hash((kind, i, r, pname)))

    def __setattr__(self, name, value):
        raise AttributeError("Coordinate is immutable")

    # -- factories ----------------------------------------------------
    @staticmethod
    def jet(i, alpha):
        if i < 0 or alpha < 0:
            raise ValueError("jet indices must be non-negative")
        return Coordinate(_KIND_JET, i=i, r=alpha)

    @staticmethod
    def momentum(level, i):
        if i < 0 or level < 0:
            raise ValueError("momentum indices must be non-negative")
        return Coordinate(_KIND_MOMENTUM, i=i, r=level)

    @staticmethod
    def param(name):
        if not name or not re.fullmatch(r"[A-Za-z_][A-Za-z_0-9]*", name):
            raise ValueError(f"invalid parameter name {name!r}")
        return Coordinate(_KIND_PARAM, pname=name)

    # -- predicates ---------------------------------------------------
    @property
    def is_jet(self):
        return self.kind == _KIND_JET

    @property
    def is_z(self):
        return self.kind == _KIND_Z

    @property
    def is_momentum(self):
        return self.kind == _KIND_MOMENTUM

    @property
    def is_param(self):
        return self.kind == _KIND_PARAM

    @property
    def order(self):
        """Derivative order of a jet coordinate (alias of ``r``)."""
        if not self.is_jet:
            raise ValueError(f"{self} is not a jet coordinate")
        return self.r

    @property
    def level(self):
        """Momentum level (alias of ``r``)."""
        if not self.is_momentum:
            raise ValueError(f"{self} is not a momentum coordinate")
        return self.r

    # -- naming and order ---------------------------------------------
    @property
    def name(self):
        if self.kind == _KIND_JET:
            return f"q{self.i}_{self.r}"
        if self.kind == _KIND_Z:
            return "z"
        if self.kind == _KIND_MOMENTUM:
            return f"p{self.r}_{self.i}"
        return self.pname

    def sort_key(self):
        return (_KIND_RANK[self.kind], self.r, self.i, self.pname)

    def __lt__(self, other):
        return self.sort_key() < other.sort_key()

    def __eq__(self, other):
        return (
            isinstance(other, Coordinate)
            and self.kind == other.kind
            and self.i == other.i
            and self.r == other.r
            and self.pname == other.pname
        )

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return self.name


Z = Coordinate(_KIND_Z)


# ---------------------------------------------------------------------------
# Expression nodes
# ---------------------------------------------------------------------------

_EXPAND_POW_CAP = 8  # integer powers of sums up to this exponent are expanded


def _check_number(v):
    if isinstance(v, bool):
        raise TypeError("boolean is not a valid constant")
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, Fraction):
        return v
    if isinstance(v, float):
        if math.isnan(v) or math.isinf(v):
            raise DomainError(f"non-finite constant {v!r}")
        return v
    raise TypeError(f"not a number: {v!r}")


class Expr:
    """Base class of all expression nodes.  Immutable."""

    __slots__ = ("_hash", "_canon", "_frees", "_key")

    # -- operator sugar (always canonicalizing) ------------------------
    def __add__(self, other):
        return add(self, _coerce(other))

    def __radd__(self, other):
        return add(_coerce(other), self)

    def __sub__(self, other):
        return sub(self, _coerce(other))

    def __rsub__(self, other):
        return sub(_coerce(other), self)

    def __mul__(self, other):
        return mul(self, _coerce(other))

    def __rmul__(self, other):
        return mul(_coerce(other), self)

    def __truediv__(self, other):
        return div(self, _coerce(other))

    def __rtruediv__(self, other):
        return div(_coerce(other), self)

    def __pow__(self, other):
        return pw(self, other)

    def __neg__(self):
        return neg(self)

    def __repr__(self):
        return render(self)

    # -- cached structural key for deterministic ordering --------------
    def sort_key(self):
        k = self._key
        if k is None:
            k = self._compute_key()
            object.__setattr__(self, "_key", k)
        return k

    def free_coords(self):
        f = self._frees
        if f is None:
            f = self._compute_frees()
            object.__setattr__(self, "_frees", f)
        return f

    def _init_base(self, h, canon):
        object.__setattr__(self, "_hash", h)
        object.__setattr__(self, "_canon", canon)
        object.__setattr__(self, "_frees", None)
        object.__setattr__(self, "_key", None)

    def __setattr__(self, name, value):
        raise AttributeError("Expr is immutable")

    def __hash__(self):
        return self._hash


def _coerce(v):
    if isinstance(v, Expr):
        return v
    return const(v)


class Const(Expr):
    __slots__ = ("value",)

    def __init__(self, value):
        value = _check_number(value)
        object.__setattr__(self, "value", value)
        self._init_base(hash(("C", value)), True)

    def _compute_key(self):
        return (0, float(self.value), 0 if isinstance(self.value, Fraction) else 1)

    def _compute_frees(self):
        return frozenset()

    def __eq__(self, other):
        return isinstance(other, Const) and self.value == other.value

    __hash__ = Expr.__hash__


class Var(Expr):
    __slots__ = ("coord",)

    def __init__(self, coord):
        if not isinstance(coord, Coordinate):
            raise TypeError("Var requires a Coordinate")
        object.__setattr__(self, "coord", coord)
        self._init_base(hash(("V", coord)), True)

    def _compute_key(self):
        return (1, self.coord.sort_key())

    def _compute_frees(self):
        return frozenset((self.coord,))

    def __eq__(self, other):
        return isinstance(other, Var) and self.coord == other.coord

    __hash__ = Expr.__hash__


class Add(Expr):
    __slots__ = ("args",)

    def __init__(self, args, _canon=False):
        args = tuple(args)
        object.__setattr__(self, "args", args)
        self._init_base(hash(("A", args)), _canon)

    def _compute_key(self):
        return (5, tuple(a.sort_key() for a in self.args))

    def _compute_frees(self):
        return frozenset().union(*(a.free_coords() for a in self.args))

    def __eq__(self, other):
        return (
            isinstance(other, Add)
            and self._hash == other._hash
            and self.args == other.args
        )

    __hash__ = Expr.__hash__


class Mul(Expr):
    __slots__ = ("args",)

    def __init__(self, args, _canon=False):
        args = tuple(args)
        object.__setattr__(self, "args", args)
        self._init_base(hash(("M", args)), _canon)

    def _compute_key(self):
        return (4, tuple(a.sort_key() for a in self.args))

    def _compute_frees(self):
        return frozenset().union(*(a.free_coords() for a in self.args))

    def __eq__(self, other):
        return (
            isinstance(other, Mul)
            and self._hash == other._hash
            and self.args == other.args
        )

    __hash__ = Expr.__hash__


class Pow(Expr):
    __slots__ = ("base", "exponent")

    def __init__(self, base, exponent, _canon=False):
        if not isinstance(exponent, Fraction):
            exponent = _as_fraction_exponent(exponent)
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "exponent", exponent)
        self._init_base(hash(("P", base, exponent)), _canon)

    def _compute_key(self):
        return (2, self.base.sort_key(), float(self.exponent))

    def _compute_frees(self):
        return self.base.free_coords()

    def __eq__(self, other):
        return (
            isinstance(other, Pow)
            and self._hash == other._hash
            and self.exponent == other.exponent
            and self.base == other.base
        )

    __hash__ = Expr.__hash__


class _Unary(Expr):
    __slots__ = ("arg",)
    fname = "?"

    def __init__(self, arg, _canon=False):
        object.__setattr__(self, "arg", arg)
        self._init_base(hash((self.fname, arg)), _canon)

    def _compute_key(self):
        return (3, self.fname, self.arg.sort_key())

    def _compute_frees(self):
        return self.arg.free_coords()

    def __eq__(self, other):
        return (
            type(other) is type(self)
            and self._hash == other._hash
            and self.arg == other.arg
        )

    __hash__ = Expr.__hash__


class Sin(_Unary):
    __slots__ = ()
    fname = "sin"


class Cos(_Unary):
    __slots__ = ()
    fname = "cos"


class Exp(_Unary):
    __slots__ = ()
    fname = "exp"


class Log(_Unary):
    __slots__ = ()
    fname = "log"


class Neg(_Unary):
    """Unary minus as produced by the parser; normalized away by simplify."""

    __slots__ = ()
    fname = "neg"


class Div(Expr):
    """Quotient as produced by the parser; normalized away by simplify."""

    __slots__ = ("num", "den")

    def __init__(self, num, den):
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)
        self._init_base(hash(("D", num, den)), False)

    def _compute_key(self):
        return (6, self.num.sort_key(), self.den.sort_key())

    def _compute_frees(self):
        return self.num.free_coords() | self.den.free_coords()

    def __eq__(self, other):
        return (
            isinstance(other, Div)
            and self._hash == other._hash
            and self.num == other.num
            and self.den == other.den
        )

    __hash__ = Expr.__hash__


def _as_fraction_exponent(e):
    if isinstance(e, bool):
        raise TypeError("boolean exponent")
    if isinstance(e, int):
        return Fraction(e)
    if isinstance(e, Fraction):
        return e
    if isinstance(e, float):
        if math.isnan(e) or math.isinf(e):
            raise DomainError(f"non-finite exponent {e!r}")
        return Fraction(e)
    if isinstance(e, Const):
        if isinstance(e.value, Fraction):
            return e.value
        return Fraction(e.value)
    raise TypeError(f"exponent must be an integer or rational constant, got {e!r}")


# ---------------------------------------------------------------------------
# Smart constructors (canonicalizing)
# ---------------------------------------------------------------------------


def const(v):
    return Const(v)


ZERO = Const(0)
ONE = Const(1)
MINUS_ONE = Const(-1)


def var(c):
    return Var(c)


def _canonical(e):
    if not isinstance(e, Expr):
        e = _coerce(e)
    if not e._canon:
        e = simplify(e)
    return e


def _is_zero(e):
    return isinstance(e, Const) and e.value == 0


def _is_one(e):
    return isinstance(e, Const) and e.value == 1


def _term_parts(t):
    """Split a canonical non-Add term into (coefficient, monomial-or-None)."""
    if isinstance(t, Const):
        return t.value, None
    if isinstance(t, Mul) and isinstance(t.args[0], Const):
        rest = t.args[1:]
        body = rest[0] if len(rest) == 1 else Mul(rest, _canon=True)
        return t.args[0].value, body
    return Fraction(1), t


def add(*args):
    terms = {}  # monomial (or None for the constant term) -> coefficient

    def absorb(e):
        if isinstance(e, Add):
            for a in e.args:
                absorb(a)
            return
        coeff, body = _term_parts(e)
        if body in terms:
            terms[body] = terms[body] + coeff
        else:
            terms[body] = coeff

    for a in args:
        absorb(_canonical(a))

    out = []
    for body, coeff in terms.items():
        if coeff == 0:
            continue
        if body is None:
            out.append(Const(coeff))
        elif coeff == 1:
            out.append(body)
        else:
            if isinstance(body, Mul):
                out.append(Mul((Const(coeff),) + body.args, _canon=True))
            else:
                out.append(Mul((Const(coeff), body), _canon=True))
    if not out:
        return ZERO
    if len(out) == 1:
        return out[0]
    out.sort(key=Expr.sort_key)
    return Add(tuple(out), _canon=True)


def sub(a, b):
    return add(a, neg(b))


def mul(*args):
    flat = []

    def absorb(e):
        if isinstance(e, Mul):
            flat.extend(e.args)
        else:
            flat.append(e)

    for a in args:
        absorb(_canonical(a))

    for f in flat:
        if _is_zero(f):
            return ZERO

    # Distribute over sums: expand one Add factor at a time.
    for idx, f in enumerate(flat):
        if isinstance(f, Add):
            others = flat[:idx] + flat[idx + 1 :]
            return add(*(mul(t, *others) for t in f.args))

    coeff = Fraction(1)
    powers = {}  # base -> accumulated Fraction exponent
    seen = []  # insertion order of bases
    exp_args = []  # arguments of exp factors, to be merged

    for f in flat:
        if isinstance(f, Const):
            coeff = coeff * f.value
            continue
        if isinstance(f, Exp):
            exp_args.append(f.arg)
            continue
        if isinstance(f, Pow):
            base, e = f.base, f.exponent
        else:
            base, e = f, Fraction(1)
        if base in powers:
            powers[base] = powers[base] + e
        else:
            powers[base] = e
            seen.append(base)

    if coeff == 0:
        return ZERO

    factors = []
    for base in seen:
        e = powers[base]
        if e == 0:
            continue
        built = pw(base, e)
        if isinstance(built, Const):
            coeff = coeff * built.value
        elif isinstance(built, Mul):
            # pw may distribute an integer power over a product base
            for g in built.args:
                if isinstance(g, Const):
                    coeff = coeff * g.value
                else:
                    factors.append(g)
        elif isinstance(built, Exp):
            exp_args.append(built.arg)
        else:
            factors.append(built)

    if exp_args:
        merged = exp(add(*exp_args)) if len(exp_args) > 1 else exp(exp_args[0])
        if isinstance(merged, Const):
            coeff = coeff * merged.value
        else:
            factors.append(merged)

    if coeff == 0:
        return ZERO
    if not factors:
        return Const(coeff)
    factors.sort(key=Expr.sort_key)
    if coeff == 1:
        if len(factors) == 1:
            return factors[0]
        return Mul(tuple(factors), _canon=True)
    return Mul((Const(coeff),) + tuple(factors), _canon=True)


def neg(a):
    return mul(MINUS_ONE, a)


def div(a, b):
    return mul(a, pw(b, Fraction(-1)))


def pw(base, exponent):
    e = _as_fraction_exponent(exponent)
    base = _canonical(base)

    if e == 0:
        return ONE
    if e == 1:
        return base

    if isinstance(base, Const):
        v = base.value
        if v == 0:
            if e < 0:
                raise DomainError("zero raised to a negative power")
            if e.denominator == 1 or isinstance(v, Fraction):
                return ZERO
        if isinstance(v, Fraction):
            if e.denominator == 1:
                return Const(v ** int(e))
            if v < 0:
                raise DomainError(f"fractional power of negative constant {v}")
            # non-perfect rational roots stay symbolic (exactness)
            num_root = _perfect_root(v.numerator, e.denominator)
            den_root = _perfect_root(v.denominator, e.denominator)
            if num_root is not None and den_root is not None:
                return pw(Const(Fraction(num_root, den_root)), Fraction(e.numerator))
            return Pow(base, e, _canon=True)
        # float base: fold
        if v < 0 and e.denominator != 1:
            raise DomainError(f"fractional power of negative constant {v}")
        try:
            return Const(float(v) ** float(e))
        except (ValueError, ZeroDivisionError):
            raise DomainError(f"cannot raise {v} to power {e}") from None
        except OverflowError:
            raise DomainError(f"overflow raising {v} to power {e}") from None

    if isinstance(base, Pow):
        if e.denominator == 1:
            return pw(base.base, base.exponent * e)
        return Pow(base, e, _canon=True)

    if isinstance(base, Mul) and e.denominator == 1:
        return mul(*(pw(f, e) for f in base.args))

    if isinstance(base, Exp):
        return exp(mul(Const(e), base.arg))

    if (
        isinstance(base, Add)
        and e.denominator == 1
        and 2 <= e <= _EXPAND_POW_CAP
    ):
        out = base
        for _ in range(int(e) - 1):
            out = mul(out, base)
        return out

    return Pow(base, e, _canon=True)


def _perfect_root(n, r):
    """Integer r-th root of non-negative integer n, or None."""
    if n < 0:
        return None
    root = round(n ** (1.0 / r))
    for cand in (root - 1, root, root + 1):
        if cand >= 0 and cand**r == n:
            return cand
    return None


def _negated_arg(a):
    """If a canonical expression is a product with negative leading
    constant, return its negation; else None.  Used for sin/cos parity."""
    if isinstance(a, Const) and a.value < 0:
        return Const(-a.value)
    if isinstance(a, Mul) and isinstance(a.args[0], Const) and a.args[0].value < 0:
        return neg(a)
    if isinstance(a, Add):
        parts = [_term_parts(t)[0] for t in a.args]
        if all(c < 0 for c in parts):
            return neg(a)
    return None


def sin(a):
    a = _canonical(a)
    if _is_zero(a):
        return ZERO
    flipped = _negated_arg(a)
    if flipped is not None:
        return neg(Sin(flipped, _canon=True))
    return Sin(a, _canon=True)


def cos(a):
    a = _canonical(a)
    if _is_zero(a):
        return ONE
    flipped = _negated_arg(a)
    if flipped is not None:
        return Cos(flipped, _canon=True)
    return Cos(a, _canon=True)


def exp(a):
    a = _canonical(a)
    if _is_zero(a):
        return ONE
    if isinstance(a, Log):
        return a.arg
    return Exp(a, _canon=True)


def log(a):
    a = _canonical(a)
    if _is_one(a):
        return ZERO
    if isinstance(a, Exp):
        return a.arg
    if isinstance(a, Const):
        v = a.value
        if v <= 0:
            raise DomainError(f"log of non-positive constant {v}")
    return Log(a, _canon=True)


def simplify(e):
    """Rewrite ``e`` into canonical form.  Idempotent, value-preserving."""
    e = _coerce(e)
    if e._canon:
        return e
    if isinstance(e, Const):
        return Const(e.value)
    if isinstance(e, Var):
        return Var(e.coord)
    if isinstance(e, Add):
        return add(*(simplify(a) for a in e.args))
    if isinstance(e, Mul):
        return mul(*(simplify(a) for a in e.args))
    if isinstance(e, Pow):
        return pw(simplify(e.base), e.exponent)
    if isinstance(e, Neg):
        return neg(simplify(e.arg))
    if isinstance(e, Div):
        return div(simplify(e.num), simplify(e.den))
    if isinstance(e, Sin):
        return sin(simplify(e.arg))
    if isinstance(e, Cos):
        return cos(simplify(e.arg))
    if isinstance(e, Exp):
        return exp(simplify(e.arg))
    if isinstance(e, Log):
        return log(simplify(e.arg))
    raise TypeError(f"unknown node {type(e).__name__}")


# ---------------------------------------------------------------------------
# Calculus and evaluation
# ---------------------------------------------------------------------------


@functools.lru_cache(maxsize=1 << 18)
def _diff(e, c):
    if isinstance(e, Const):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.coord == c else ZERO
    if isinstance(e, Add):
        return add(*(_diff(a, c) for a in e.args))
    if isinstance(e, Mul):
        terms = []
        for i, a in enumerate(e.args):
            da = _diff(a, c)
            if _is_zero(da):
                continue
            terms.append(mul(*e.args[:i], da, *e.args[i + 1 :]))
        return add(*terms) if terms else ZERO
    if isinstance(e, Pow):
        db = _diff(e.base, c)
        if _is_zero(db):
            return ZERO
        return mul(Const(e.exponent), pw(e.base, e.exponent - 1), db)
    if isinstance(e, Sin):
        return mul(cos(e.arg), _diff(e.arg, c))
    if isinstance(e, Cos):
        return neg(mul(sin(e.arg), _diff(e.arg, c)))
    if isinstance(e, Exp):
        da = _diff(e.arg, c)
        if _is_zero(da):
            return ZERO
        return mul(e, da)
    if isinstance(e, Log):
        return div(_diff(e.arg, c), e.arg)
    raise TypeError(f"cannot differentiate {type(e).__name__}")


def differentiate(e, c):
    """Partial derivative of ``e`` with respect to coordinate ``c``."""
    e = _canonical(e)
    if c not in e.free_coords():
        return ZERO
    return _diff(e, c)


def evaluate(e, point):
    """Evaluate ``e`` at a ``Coordinate -> float`` mapping.

    Raises :class:`UnboundCoordinate` for missing coordinates and
    :class:`DomainError` when the value leaves the real domain.
    """
    if isinstance(e, Const):
        return float(e.value)
    if isinstance(e, Var):
        try:
            return float(point[e.coord])
        except KeyError:
            raise UnboundCoordinate(e.coord) from None
    if isinstance(e, Add):
        return math.fsum(evaluate(a, point) for a in e.args)
    if isinstance(e, Mul):
        out = 1.0
        for a in e.args:
            out *= evaluate(a, point)
        if math.isinf(out) or math.isnan(out):
            raise DomainError("overflow in product evaluation")
        return out
    if isinstance(e, Pow):
        b = evaluate(e.base, point)
        ex = e.exponent
        try:
            if ex.denominator == 1:
                r = b ** int(ex)
            else:
                if b < 0:
                    raise DomainError(
                        f"fractional power of negative value {b!r}"
                    )
                r = b ** float(ex)
        except ZeroDivisionError:
            raise DomainError("division by zero") from None
        except OverflowError:
            raise DomainError("overflow in power evaluation") from None
        if isinstance(r, complex) or math.isinf(r) or math.isnan(r):
            raise DomainError("power evaluation left the real domain")
        return r
    if isinstance(e, Sin):
        return math.sin(evaluate(e.arg, point))
    if isinstance(e, Cos):
        return math.cos(evaluate(e.arg, point))
    if isinstance(e, Exp):
        v = evaluate(e.arg, point)
        try:
            return math.exp(v)
        except OverflowError:
            raise DomainError(f"overflow in exp({v!r})") from None
    if isinstance(e, Log):
        v = evaluate(e.arg, point)
        if v <= 0.0:
            raise DomainError(f"log of non-positive value {v!r}")
        return math.log(v)
    if isinstance(e, Neg):
        return -evaluate(e.arg, point)
    if isinstance(e, Div):
        num = evaluate(e.num, point)
        den = evaluate(e.den, point)
        if den == 0.0:
            raise DomainError("division by zero")
        return num / den
    raise TypeError(f"cannot evaluate {type(e).__name__}")


def substitute(e, mapping):
    """Replace coordinates by expressions.  ``mapping`` is
    ``Coordinate -> Expr | number``.  The result is canonical."""
    table = {c: _canonical(v) for c, v in mapping.items()}
    memo = {}

    def go(x):
        r = memo.get(id(x))
        if r is not None:
            return r
        if isinstance(x, Const):
            r = x
        elif isinstance(x, Var):
            r = table.get(x.coord, x)
        elif isinstance(x, Add):
            r = add(*(go(a) for a in x.args))
        elif isinstance(x, Mul):
            r = mul(*(go(a) for a in x.args))
        elif isinstance(x, Pow):
            r = pw(go(x.base), x.exponent)
        elif isinstance(x, Neg):
            r = neg(go(x.arg))
        elif isinstance(x, Div):
            r = div(go(x.num), go(x.den))
        elif isinstance(x, Sin):
            r = sin(go(x.arg))
        elif isinstance(x, Cos):
            r = cos(go(x.arg))
        elif isinstance(x, Exp):
            r = exp(go(x.arg))
        elif isinstance(x, Log):
            r = log(go(x.arg))
        else:
            raise TypeError(f"cannot substitute into {type(x).__name__}")
        memo[id(x)] = r
        return r

    return go(_coerce(e))


def free_coordinates(e):
    """Set of coordinates occurring in ``e``."""
    return _coerce(e).free_coords()


def free_params(e):
    """Names of parameter coordinates occurring in ``e``."""
    return {c.pname for c in free_coordinates(e) if c.is_param}


def max_jet_order(e, default=-1):
    """Largest jet order occurring in ``e`` (``default`` if jet-free)."""
    orders = [c.r for c in free_coordinates(e) if c.is_jet]
    return max(orders) if orders else default


# ---------------------------------------------------------------------------
# Randomized semantic equivalence
# ---------------------------------------------------------------------------


class Equivalence(Enum):
    EQUIVALENT = "equivalent"
    DIFFERENT = "different"
    INCONCLUSIVE = "inconclusive"


class EquivalenceResult:
    """Outcome of an equivalence test: status, worst relative error seen,
    and (for DIFFERENT) a witness point."""

    __slots__ = ("status", "max_error", "witness")

    def __init__(self, status, max_error=0.0, witness=None):
        self.status = status
        self.max_error = max_error
        self.witness = witness

    def __bool__(self):
        return self.status is Equivalence.EQUIVALENT

    def __repr__(self):
        return (
            f"EquivalenceResult({self.status.value}, max_error={self.max_error:g})"
        )


_EQ_SEED = 0xC0FFEE


def equivalence_status(a, b, trials=40, tol=1e-9, seed=_EQ_SEED, span=2.0):
    """Decide whether two expressions agree as functions.

    A symbolic zero of the canonicalized difference short-circuits to
    EQUIVALENT.  Otherwise both sides are sampled at ``trials`` points
    drawn uniformly from ``[-span, span]`` per coordinate with a fixed
    seed; any relative disagreement above ``tol`` yields DIFFERENT with a
    witness point.  Points where either side leaves its real domain are
    redrawn, at most ``10 * trials`` times, after which the test is
    INCONCLUSIVE.
    """
    a = _canonical(_coerce(a))
    b = _canonical(_coerce(b))
    if a == b:
        return EquivalenceResult(Equivalence.EQUIVALENT)
    d = sub(a, b)
    if _is_zero(d):
        return EquivalenceResult(Equivalence.EQUIVALENT)

    coords = sorted(a.free_coords() | b.free_coords())
    rng = Random(seed)
    successes = 0
    redraws = 0
    worst = 0.0
    while successes < trials:
        point = {c: rng.uniform(-span, span) for c in coords}
        try:
            va = evaluate(a, point)
            vb = evaluate(b, point)
        except DomainError:
            redraws += 1
            if redraws > 10 * trials:
                return EquivalenceResult(Equivalence.INCONCLUSIVE, worst)
            continue
        err = abs(va - vb) / (1.0 + abs(va))
        worst = max(worst, err)
        if err > tol:
            return EquivalenceResult(Equivalence.DIFFERENT, worst, point)
        successes += 1
    return EquivalenceResult(Equivalence.EQUIVALENT, worst)


def equivalent(a, b, trials=40, tol=1e-9, seed=_EQ_SEED):
    """Boolean form of :func:`equivalence_status` (INCONCLUSIVE -> False)."""
    return bool(equivalence_status(a, b, trials=trials, tol=tol, seed=seed))


def assert_equivalent(a, b, what, trials=40, tol=1e-9):
    """Raise InternalInconsistency when two derivation routes disagree."""
    from .errors import InternalInconsistency

    res = equivalence_status(a, b, trials=trials, tol=tol)
    if res.status is Equivalence.DIFFERENT:
        raise InternalInconsistency(
            f"{what}: routes disagree (max relative error {res.max_error:.3e} "
            f"at {res.witness})"
        )
    if res.status is Equivalence.INCONCLUSIVE:
        raise InternalInconsistency(f"{what}: equivalence test inconclusive")


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


class ParseContext:
    """Bounds and vocabulary for parsing expression text.

    Parameters
    ----------
    n, k : int
        Number of degrees of freedom and the Lagrangian order.  Jet
        coordinates ``q<i>_<alpha>`` require ``i < n`` and
        ``alpha <= max_order``.
    max_order : int, optional
        Largest admissible jet order (defaults to ``k``).
    allow_momenta : bool
        Whether momenta ``p<r>_<i>`` are admissible (``r < momentum_levels``,
        ``i < n``).
    momentum_levels : int, optional
        Number of momentum levels (defaults to ``k``).
    params : iterable of str, optional
        Admissible parameter names.  ``None`` admits any identifier.
    allow_z : bool
        Whether the action variable ``z`` is admissible.
    """

    __slots__ = (
        "n",
        "k",
        "max_order",
        "allow_momenta",
        "momentum_levels",
        "params",
        "allow_z",
    )

    def __init__(
        self,
        n,
        k,
        max_order=None,
        allow_momenta=False,
        momentum_levels=None,
        params=None,
        allow_z=True,
    ):
        self.n = n
        self.k = k
        self.max_order = k if max_order is None else max_order
        self.allow_momenta = allow_momenta
        self.momentum_levels = k if momentum_levels is None else momentum_levels
        self.params = None if params is None else frozenset(params)
        self.allow_z = allow_z


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>(\d+\.\d*|\.\d+|\d+)([eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)

_FUNCTIONS = {"sin": sin, "cos": cos, "exp": exp, "log": log}
_JET_RE = re.compile(r"q(\d+)_(\d+)")
_MOM_RE = re.compile(r"p(\d+)_(\d+)")
_BARE_RE = re.compile(r"[qp]\d+")


class _Token:
    __slots__ = ("kind", "text", "pos")

    def __init__(self, kind, text, pos):
        self.kind = kind
        self.text = text
        self.pos = pos


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", pos)
        if m.lastgroup != "ws":
            tokens.append(_Token(m.lastgroup, m.group(), pos))
        pos = m.end()
    tokens.append(_Token("eof", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, tokens, ctx):
        self.tokens = tokens
        self.ctx = ctx
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        t = self.tokens[self.pos]
        self.pos += 1
        return t

    def expect(self, text):
        t = self.peek()
        if t.kind != "op" or t.text != text:
            found = repr(t.text) if t.text else "end of input"
            raise ExprSyntaxError(f"expected {text!r}, found {found}", t.pos)
        return self.advance()

    # expr := term (('+'|'-') term)*
    def parse_expr(self):
        node = self.parse_term()
        while True:
            t = self.peek()
            if t.kind == "op" and t.text in "+-":
                self.advance()
                rhs = self.parse_term()
                node = Add((node, Neg(rhs) if t.text == "-" else rhs))
            else:
                return node

    # term := factor (('*'|'/') factor)*
    def parse_term(self):
        node = self.parse_unary()
        while True:
            t = self.peek()
            if t.kind == "op" and t.text in "*/":
                self.advance()
                rhs = self.parse_unary()
                node = Mul((node, rhs)) if t.text == "*" else Div(node, rhs)
            else:
                return node

    # unary := '-' unary | power
    def parse_unary(self):
        t = self.peek()
        if t.kind == "op" and t.text == "-":
            self.advance()
            return Neg(self.parse_unary())
        return self.parse_power()

    # power := atom ('^' unary)?   (exponent must be a rational constant)
    def parse_power(self):
        base = self.parse_atom()
        t = self.peek()
        if t.kind == "op" and t.text == "^":
            self.advance()
            epos = self.peek().pos
            enode = self.parse_unary()
            rational = _extract_rational(enode)
            if rational is None:
                raise ExprSyntaxError(
                    "exponent must be an integer or rational constant "
                    "(like 3, -2, or 1/2)",
                    epos,
                )
            return Pow(base, rational)
        return base

    def parse_atom(self):
        t = self.advance()
        if t.kind == "number":
            if re.fullmatch(r"\d+", t.text):
                return Const(Fraction(int(t.text)))
            return Const(float(t.text))
        if t.kind == "op" and t.text == "(":
            node = self.parse_expr()
            self.expect(")")
            return node
        if t.kind == "ident":
            nxt = self.peek()
            if nxt.kind == "op" and nxt.text == "(":
                fn = _FUNCTIONS.get(t.text)
                if fn is None:
                    raise UnknownVariable(
                        f"unknown function {t.text!r} "
                        "(available: sin, cos, exp, log)",
                        t.pos,
                    )
                self.advance()
                arg = self.parse_expr()
                self.expect(")")
                cls = {"sin": Sin, "cos": Cos, "exp": Exp, "log": Log}[t.text]
                return cls(arg)
            return Var(self._resolve(t))
        found = repr(t.text) if t.text else "end of input"
        raise ExprSyntaxError(
            f"expected a number, coordinate, or '(', found {found}", t.pos
        )

    def _resolve(self, tok):
        name, pos, ctx = tok.text, tok.pos, self.ctx
        if name in _FUNCTIONS:
            raise ExprSyntaxError(
                f"function {name!r} must be followed by '('", pos
            )
        if name == "z":
            if not ctx.allow_z:
                raise UnknownVariable("'z' is not admissible here", pos)
            return Z
        m = _JET_RE.fullmatch(name)
        if m:
            i, alpha = int(m.group(1)), int(m.group(2))
            if i >= ctx.n:
                raise UnknownVariable(
                    f"jet coordinate {name!r}: dof {i} out of range "
                    f"(n = {ctx.n})",
                    pos,
                )
            if alpha > ctx.max_order:
                raise OrderOutOfRange(
                    f"jet coordinate {name!r}: order {alpha} exceeds "
                    f"the bound {ctx.max_order} (at offset {pos})"
                )
            return Coordinate.jet(i, alpha)
        m = _MOM_RE.fullmatch(name)
        if m:
            r, i = int(m.group(1)), int(m.group(2))
            if not ctx.allow_momenta:
                raise UnknownVariable(
                    f"momentum {name!r} is not admissible in this context", pos
                )
            if i >= ctx.n:
                raise UnknownVariable(
                    f"momentum {name!r}: dof {i} out of range (n = {ctx.n})",
                    pos,
                )
            if r >= ctx.momentum_levels:
                raise OrderOutOfRange(
                    f"momentum {name!r}: level {r} exceeds the bound "
                    f"{ctx.momentum_levels - 1} (at offset {pos})"
                )
            return Coordinate.momentum(r, i)
        if _BARE_RE.fullmatch(name):
            raise UnknownVariable(
                f"ambiguous identifier {name!r}: coordinates are written "
                "with an explicit order/level, like q0_1 (dof 0, order 1) "
                "or p0_1 (level 0, dof 1)",
                pos,
            )
        if ctx.params is not None and name not in ctx.params:
            raise UnknownVariable(
                f"unknown parameter {name!r} (declared: "
                f"{', '.join(sorted(ctx.params)) or 'none'})",
                pos,
            )
        return Coordinate.param(name)


def parse(text, ctx):
    """Parse expression text under a :class:`ParseContext`.

    Returns the raw AST (which may contain ``Neg``/``Div`` nodes); pass
    through :func:`simplify` for the canonical form.
    """
    if not isinstance(text, str):
        raise ExprSyntaxError(f"expected a string, got {type(text).__name__}")
    parser = _Parser(_tokenize(text), ctx)
    node = parser.parse_expr()
    tail = parser.peek()
    if tail.kind != "eof":
        raise ExprSyntaxError(f"unexpected trailing input {tail.text!r}", tail.pos)
    return node


def _extract_rational(node):
    """Extract an exact rational from a parsed exponent AST, or None."""
    if isinstance(node, Const):
        if isinstance(node.value, Fraction):
            return node.value
        return None  # float literals are not accepted as exponents
    if isinstance(node, Neg):
        inner = _extract_rational(node.arg)
        return None if inner is None else -inner
    if isinstance(node, Div):
        num = _extract_rational(node.num)
        den = _extract_rational(node.den)
        if num is None or den is None or den == 0:
            return None
        return num / den
    return None


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------

_PREC_ADD = 1
_PREC_MUL = 2
_PREC_UNARY = 3
_PREC_POW = 4
_PREC_ATOM = 5


def render(e):
    """Render an expression in the package's surface syntax.

    For canonical expressions, ``simplify(parse(render(e))) == e``.
    """
    return _render(_coerce(e), _PREC_ADD)


def _paren(s):
    return f"({s})"


def _render_const(v):
    if isinstance(v, Fraction):
        if v.denominator == 1:
            s = str(v.numerator)
            prec = _PREC_ATOM if v >= 0 else _PREC_UNARY
        else:
            s = f"{v.numerator}/{v.denominator}"
            prec = _PREC_MUL if v >= 0 else _PREC_UNARY
    else:
        s = repr(v)
        prec = _PREC_ATOM if v >= 0 else _PREC_UNARY
    return s, prec


def _render(e, need):
    s, prec = _render_prec(e)
    if prec < need:
        return _paren(s)
    return s


def _render_prec(e):
    if isinstance(e, Const):
        return _render_const(e.value)
    if isinstance(e, Var):
        return e.coord.name, _PREC_ATOM
    if isinstance(e, Add):
        parts = [_render(e.args[0], _PREC_ADD)]
        for t in e.args[1:]:
            coeff, body = _term_parts(t)
            if coeff < 0:
                parts.append(" - ")
                flipped = neg(t)
                parts.append(_render(flipped, _PREC_MUL))
            else:
                parts.append(" + ")
                parts.append(_render(t, _PREC_MUL))
        return "".join(parts), _PREC_ADD
    if isinstance(e, Mul):
        return _render_mul(e)
    if isinstance(e, Pow):
        return _render_pow(e.base, e.exponent)
    if isinstance(e, (Sin, Cos, Exp, Log)):
        return f"{e.fname}({render(e.arg)})", _PREC_ATOM
    if isinstance(e, Neg):
        return f"-{_render(e.arg, _PREC_UNARY + 1)}", _PREC_UNARY
    if isinstance(e, Div):
        num = _render(e.num, _PREC_MUL)
        den = _render(e.den, _PREC_MUL + 1)
        return f"{num}/{den}", _PREC_MUL
    raise TypeError(f"cannot render {type(e).__name__}")


def _render_mul(e):
    num_parts = []
    den_parts = []  # (base, positive exponent)
    coeff = None
    for f in e.args:
        if isinstance(f, Const):
            coeff = f.value
            continue
        if isinstance(f, Pow) and f.exponent < 0:
            den_parts.append((f.base, -f.exponent))
        else:
            num_parts.append(f)

    neg_sign = False
    if coeff is not None:
        if coeff < 0:
            neg_sign = True
            coeff = -coeff
        if isinstance(coeff, Fraction):
            if coeff.denominator != 1:
                den_parts.insert(0, (Const(coeff.denominator), Fraction(1)))
            if coeff.numerator != 1 or not num_parts:
                num_parts.insert(0, Const(Fraction(coeff.numerator)))
        else:  # float coefficient
            if coeff != 1.0 or not num_parts:
                num_parts.insert(0, Const(coeff))

    if not num_parts:
        num = "1"
    else:
        num = "*".join(
            _render(f, _PREC_MUL if i == 0 else _PREC_MUL + 1)
            for i, f in enumerate(num_parts)
        )

    s = num
    if den_parts:
        if len(den_parts) == 1:
            base, expo = den_parts[0]
            if expo == 1:
                dstr, dprec = _render_prec(base)
            else:
                dstr, dprec = _render_pow(base, expo)
            # a denominator must bind at least as tightly as '^'
            if dprec < _PREC_POW:
                dstr = _paren(dstr)
            s = f"{num}/{dstr}"
        else:
            inner = "*".join(
                (_render_pow(b, x)[0] if x != 1 else _render(b, _PREC_MUL + 1))
                for b, x in den_parts
            )
            s = f"{num}/({inner})"
    if neg_sign:
        return f"-{s}", _PREC_UNARY
    return s, _PREC_MUL


def _render_pow(base, expo):
    bstr = _render(base, _PREC_ATOM)
    if expo.denominator == 1 and expo >= 0:
        estr = str(expo.numerator)
    elif expo.denominator == 1:
        estr = _paren(str(expo.numerator))
    else:
        sign = "-" if expo < 0 else ""
        estr = _paren(f"{sign}{abs(expo.numerator)}/{expo.denominator}")
    return f"{bstr}^{estr}", _PREC_POW


# ---------------------------------------------------------------------------
# Compilation to python callables
# ---------------------------------------------------------------------------


def _py_src(e, index):
    """Render an expression as a python source fragment over ``x[i]``."""
    if isinstance(e, Const):
        if isinstance(e.value, Fraction):
            if e.value.denominator == 1:
                return f"({e.value.numerator})"
            return f"({e.value.numerator}/{e.value.denominator})"
        return f"({e.value!r})"
    if isinstance(e, Var):
        try:
            return f"x[{index[e.coord]}]"
        except KeyError:
            raise UnboundCoordinate(e.coord) from None
    if isinstance(e, Add):
        return "(" + "+".join(_py_src(a, index) for a in e.args) + ")"
    if isinstance(e, Mul):
        return "(" + "*".join(_py_src(a, index) for a in e.args) + ")"
    if isinstance(e, Pow):
        ex = e.exponent
        if ex.denominator == 1:
            return f"({_py_src(e.base, index)}**({int(ex)}))"
        return f"({_py_src(e.base, index)}**({ex.numerator}/{ex.denominator}))"
    if isinstance(e, Sin):
        return f"_sin({_py_src(e.arg, index)})"
    if isinstance(e, Cos):
        return f"_cos({_py_src(e.arg, index)})"
    if isinstance(e, Exp):
        return f"_exp({_py_src(e.arg, index)})"
    if isinstance(e, Log):
        return f"_log({_py_src(e.arg, index)})"
    raise TypeError(f"cannot compile {type(e).__name__}")


def compile_exprs(exprs, coords, name="compiled_rhs"):
    """Compile a sequence of canonical expressions into one callable
    ``f(x) -> list[float]`` where ``x`` is indexable by position
    following ``coords``.  All free coordinates must appear in ``coords``.
    """
    index = {c: j for j, c in enumerate(coords)}
    exprs = [_canonical(x) for x in exprs]
    body = ",\n        ".join(_py_src(x, index) for x in exprs) or ""
    src = (
        f"def {name}(x):\n"
        f"    return [\n        {body}\n    ]\n"
    )
    ns = {
        "_sin": math.sin,
        "_cos": math.cos,
        "_exp": math.exp,
        "_log": math.log,
    }
    code = compile(src, f"<{name}>", "exec")
    exec(code, ns)
    fn = ns[name]
    fn.__source__ = src
    return fn
