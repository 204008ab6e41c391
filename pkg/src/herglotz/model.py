"""Contact Lagrangian models and regularity classification.

A model is a contact Lagrangian ``L(q, q', ..., q^(k), z)`` on the
``2k``-th order phase space with coordinates ``q<i>_<alpha>``
(``0 <= alpha <= 2k - 1``) and the action variable ``z``, together with
numeric bindings for its parameters.  Regularity is decided by the
generalized Hessian ``W_ij = d^2 L / (dq<i>_k dq<j>_k)``: the theory
requires ``det W != 0`` everywhere for the Lagrangian side and the
Legendre inversion to exist.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from pathlib import Path
from random import Random

try:
    import tomllib as _toml
except ModuleNotFoundError:  # python < 3.11
    import tomli as _toml

from . import expr as ex
from .errors import DomainError, ModelError, OrderOutOfRange
from .expr import Coordinate, Expr, Var, Z

__all__ = [
    "ContactLagrangian",
    "lagrangian_coords",
    "hamiltonian_coords",
    "unified_coords",
    "hessian",
    "Regularity",
    "RegularityReport",
    "classify",
    "symbolic_det",
    "ModelFile",
    "load_model",
    "bundled_model_names",
]

_SAMPLE_SEED = 0xC0FFEE


def lagrangian_coords(n, k):
    """State layout of the Lagrangian phase space: jets of order
    ``0..2k-1`` (order-major, dof-minor), then z."""
    coords = [Coordinate.jet(i, a) for a in range(2 * k) for i in range(n)]
    coords.append(Z)
    return tuple(coords)


def hamiltonian_coords(n, k):
    """State layout of the Hamiltonian phase space: jets of order
    ``0..k-1``, momenta levels ``0..k-1`` (level-major), then z."""
    coords = [Coordinate.jet(i, a) for a in range(k) for i in range(n)]
    coords += [Coordinate.momentum(r, i) for r in range(k) for i in range(n)]
    coords.append(Z)
    return tuple(coords)


def unified_coords(n, k):
    """State layout of the unified space: jets of order ``0..2k-1``,
    momenta levels ``0..k-1``, then z."""
    coords = [Coordinate.jet(i, a) for a in range(2 * k) for i in range(n)]
    coords += [Coordinate.momentum(r, i) for r in range(k) for i in range(n)]
    coords.append(Z)
    return tuple(coords)


class ContactLagrangian:
    """A contact Lagrangian of order ``k`` with ``n`` degrees of freedom.

    Parameters
    ----------
    n, k : int
        Degrees of freedom and highest derivative order in ``L``.
    L : Expr or str
        The Lagrangian; a string is parsed with jets up to order ``k``,
        z admissible, momenta not admissible.
    params : mapping str -> float
        Numeric values for every parameter appearing in ``L``.
    name : str, optional
        Display name used in reports.
    """

    __slots__ = ("n", "k", "L", "_params", "name", "_hash")

    def __init__(self, n, k, L, params=None, name=""):
        if not (isinstance(n, int) and n >= 1):
            raise ModelError(f"n must be a positive integer, got {n!r}")
        if not (isinstance(k, int) and k >= 1):
            raise ModelError(f"k must be a positive integer, got {k!r}")
        params = dict(params or {})
        if isinstance(L, str):
            ctx = ex.ParseContext(n=n, k=k, params=set(params) or None)
            L = ex.parse(L, ctx)
        L = ex.simplify(L)

        for c in L.free_coords():
            if c.is_momentum:
                raise ModelError(
                    f"Lagrangian must not contain momenta (found {c})"
                )
            if c.is_jet:
                if c.i >= n:
                    raise ModelError(
                        f"Lagrangian uses dof {c.i}, but n = {n}"
                    )
                if c.r > k:
                    raise OrderOutOfRange(
                        f"Lagrangian contains {c} of order {c.r} > k = {k}"
                    )
        missing = ex.free_params(L) - set(params)
        if missing:
            raise ModelError(
                "unbound parameters in Lagrangian: " + ", ".join(sorted(missing))
            )
        for key, v in params.items():
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ModelError(f"parameter {key!r} must be a number, got {v!r}")

        object.__setattr__(self, "n", n)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "_params", tuple(sorted(params.items())))
        object.__setattr__(self, "name", name)
        object.__setattr__(
            self, "_hash", hash((n, k, L, self._params, name))
        )

    def __setattr__(self, *a):
        raise AttributeError("ContactLagrangian is immutable")

    @property
    def params(self):
        return dict(self._params)

    def __eq__(self, other):
        return (
            isinstance(other, ContactLagrangian)
            and self.n == other.n
            and self.k == other.k
            and self.L == other.L
            and self._params == other._params
        )

    def __hash__(self):
        return self._hash

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"<ContactLagrangian{label} n={self.n} k={self.k}>"

    # -- conveniences ---------------------------------------------------
    def jet(self, i, alpha):
        return Coordinate.jet(i, alpha)

    @property
    def param_bindings(self):
        """Parameter coordinates -> numeric constants."""
        return {Coordinate.param(nm): ex.const(v) for nm, v in self._params}

    def bind(self, e):
        """Substitute this model's parameter values into an expression."""
        return ex.substitute(e, self.param_bindings)

    @property
    def L_bound(self):
        """The Lagrangian with numeric parameter values substituted."""
        return _bound_L(self)

    @property
    def coords(self):
        return lagrangian_coords(self.n, self.k)


@functools.lru_cache(maxsize=256)
def _bound_L(model):
    return model.bind(model.L)


@functools.lru_cache(maxsize=256)
def hessian(model):
    """Generalized Hessian ``W_ij = d^2 L / (dq<i>_k dq<j>_k)`` as a
    tuple of tuples of expressions (symmetric by construction: the
    ``i <= j`` entries are computed and mirrored)."""
    n, k = model.n, model.k
    rows = [[None] * n for _ in range(n)]
    for i in range(n):
        di = ex.differentiate(model.L, Coordinate.jet(i, k))
        for j in range(i, n):
            w = ex.differentiate(di, Coordinate.jet(j, k))
            rows[i][j] = w
            rows[j][i] = w
    return tuple(tuple(r) for r in rows)


def symbolic_det(matrix):
    """Determinant of a square matrix of expressions by cofactor
    expansion.  Exponential in size; intended for n <= 6."""
    m = len(matrix)
    if m == 0:
        return ex.ONE
    if m == 1:
        return matrix[0][0]
    first = matrix[0]
    total = []
    for j in range(m):
        if ex.simplify(first[j]) == ex.ZERO:
            continue
        minor = [
            [row[c] for c in range(m) if c != j] for row in matrix[1:]
        ]
        term = ex.mul(first[j], symbolic_det(minor))
        total.append(term if j % 2 == 0 else ex.neg(term))
    return ex.add(*total) if total else ex.ZERO


class Regularity(Enum):
    REGULAR = "Regular"
    SINGULAR = "Singular"
    INCONCLUSIVE = "Inconclusive"


@dataclass
class RegularityReport:
    verdict: Regularity
    symbolic_zero: bool | None  # None when the symbolic test was skipped
    min_abs_det: float | None  # normalized; None if no sample succeeded
    samples: int
    det_tol: float
    notes: list = field(default_factory=list)

    def as_dict(self):
        return {
            "verdict": self.verdict.value,
            "symbolic_zero": self.symbolic_zero,
            "min_abs_det": self.min_abs_det,
            "samples": self.samples,
            "det_tol": self.det_tol,
            "notes": list(self.notes),
        }


_SYMBOLIC_DET_MAX_N = 6


@functools.lru_cache(maxsize=256)
def _classify_cached(model, samples, det_tol, seed):
    import numpy as np

    n = model.n
    W = hessian(model)
    Wb = tuple(tuple(model.bind(w) for w in row) for row in W)
    notes = []

    symbolic_zero = None
    if n <= _SYMBOLIC_DET_MAX_N:
        # structural test: does det W canonicalize to the zero expression
        symbolic_zero = symbolic_det(Wb) == ex.ZERO
    else:
        notes.append(
            f"symbolic determinant skipped for n = {n} > {_SYMBOLIC_DET_MAX_N}"
        )

    coords = sorted(
        frozenset().union(*(w.free_coords() for row in Wb for w in row))
        or frozenset()
    )
    rng = Random(seed)
    min_scaled = None
    got = 0
    attempts = 0
    while got < samples and attempts < 10 * samples:
        attempts += 1
        point = {c: rng.uniform(-1.0, 1.0) for c in coords}
        try:
            mat = np.array(
                [[ex.evaluate(w, point) for w in row] for row in Wb],
                dtype=float,
            )
        except DomainError:
            continue
        scale = np.max(np.abs(mat))
        if scale == 0.0:
            d = 0.0
        else:
            d = abs(np.linalg.det(mat / scale))
        min_scaled = d if min_scaled is None else min(min_scaled, d)
        got += 1

    if symbolic_zero is True:
        verdict = Regularity.SINGULAR
        notes.append("Hessian determinant is identically zero")
    elif min_scaled is None:
        verdict = Regularity.INCONCLUSIVE
        notes.append("no admissible sample point found")
    elif min_scaled <= det_tol:
        verdict = Regularity.SINGULAR
        notes.append(
            f"normalized |det W| fell to {min_scaled:.3e} <= {det_tol:g} "
            "at a sampled point"
        )
    elif symbolic_zero is None:
        verdict = Regularity.INCONCLUSIVE
        notes.append("numeric evidence only; symbolic test unavailable")
    else:
        verdict = Regularity.REGULAR

    return RegularityReport(
        verdict=verdict,
        symbolic_zero=symbolic_zero,
        min_abs_det=min_scaled,
        samples=got,
        det_tol=det_tol,
        notes=notes,
    )


def classify(model, samples=25, det_tol=1e-9, seed=_SAMPLE_SEED):
    """Regularity classification of the generalized Hessian.

    Combines a symbolic zero test of ``det W`` (cofactor expansion, for
    ``n <= 6``) with sampling: at each of ``samples`` points drawn from
    ``[-1, 1]`` per coordinate the Hessian is evaluated, normalized by
    its largest absolute entry, and its determinant compared against
    ``det_tol``.  Pointwise degeneracy anywhere yields ``Singular``
    (regularity must hold everywhere); a missing symbolic test yields at
    best ``Inconclusive``.
    """
    return _classify_cached(model, samples, det_tol, seed)


# ---------------------------------------------------------------------------
# Model files
# ---------------------------------------------------------------------------


@dataclass
class ModelFile:
    """A parsed model file: the Lagrangian plus optional numeric
    sections used by the CLI (``[simulate]``, ``[curve]``)."""

    model: ContactLagrangian
    simulate: dict | None
    curve: dict | None
    source: str
    raw: dict


def bundled_model_names():
    from importlib import resources

    base = resources.files("herglotz") / "data" / "models"
    return sorted(p.name[: -len(".toml")] for p in base.iterdir()
                  if p.name.endswith(".toml"))


def _bundled_path(name):
    from importlib import resources

    cand = resources.files("herglotz") / "data" / "models" / f"{name}.toml"
    return cand if cand.is_file() else None


def load_model(spec):
    """Load a model from a TOML file path or a bundled model name."""
    path = Path(spec)
    if path.is_file():
        text = path.read_text()
        source = str(path)
    else:
        bundled = _bundled_path(str(spec))
        if bundled is None:
            names = ", ".join(bundled_model_names())
            raise ModelError(
                f"model {spec!r} is neither a file nor a bundled model "
                f"(bundled: {names})"
            )
        text = bundled.read_text()
        source = f"bundled:{spec}"

    try:
        raw = _toml.loads(text)
    except _toml.TOMLDecodeError as e:
        raise ModelError(f"invalid TOML in {source}: {e}") from None

    sect = raw.get("model")
    if not isinstance(sect, dict):
        raise ModelError(f"{source}: missing [model] section")
    for key in ("n", "k", "lagrangian"):
        if key not in sect:
            raise ModelError(f"{source}: [model] lacks required key {key!r}")
    params = raw.get("params", {})
    if not isinstance(params, dict):
        raise ModelError(f"{source}: [params] must be a table")

    try:
        model = ContactLagrangian(
            n=sect["n"],
            k=sect["k"],
            L=sect["lagrangian"],
            params=params,
            name=sect.get("name", Path(source).stem),
        )
    except (ModelError, OrderOutOfRange):
        raise
    except Exception as e:  # parse errors carry positions; keep message
        raise ModelError(f"{source}: {e}") from None

    return ModelFile(
        model=model,
        simulate=raw.get("simulate"),
        curve=raw.get("curve"),
        source=source,
        raw=raw,
    )
