"""Numeric integration, analytic test curves, and the Herglotz action.

The integrators work on any explicit vector field (or plain callable
right-hand side).  ``CurveSpec`` holds an analytic curve per degree of
freedom — either a closed-form expression in a time parameter or a
Chebyshev series fitted to a trajectory — and provides the jet lift
needed to evaluate a Lagrangian along the curve.  On top of those,
:func:`herglotz_Z` solves the action ODE ``dZ/dt = L(jet(t), Z)``,
:func:`action` evaluates the Herglotz action ``Z(1)``,
:func:`sigma_factor` integrates the dissipation factor
``sigma(t) = exp(-int dL/dz)`` with ``sigma(0) = 1``, and
:func:`variational_check` estimates Gateaux derivatives of the action
over admissible variations by central differences.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np
from numpy.polynomial import chebyshev as _cheb

from . import expr as ex
from .errors import DomainError, StepFailure
from .expr import Coordinate
from .forms import VectorField

_SEED = 0xC0FFEE


# ---------------------------------------------------------------------------
# Trajectories
# ---------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class Trajectory:
    """Numeric solution samples on an increasing time grid."""

    times: np.ndarray
    states: np.ndarray  # shape (len(times), len(coords))
    coords: tuple
    meta: dict

    def __post_init__(self):
        t, s = self.times, self.states
        if len(t) != len(s):
            raise ValueError("times and states disagree in length")
        if len(t) >= 2 and not np.all(np.diff(t) > 0):
            raise ValueError("time grid must be strictly increasing")

    def column(self, coord):
        """Samples of one coordinate along the trajectory."""
        return self.states[:, self.coords.index(coord)]

    def state(self, idx):
        """State at grid index ``idx`` as ``Coordinate -> float``."""
        return dict(zip(self.coords, self.states[idx]))

    @property
    def final(self):
        return self.state(-1)

    def __len__(self):
        return len(self.times)


# ---------------------------------------------------------------------------
# Integration methods
# ---------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class RK4:
    """Classic fixed-step fourth-order Runge-Kutta."""

    h: float = 1e-3


@dataclasses.dataclass(frozen=True)
class RK45:
    """Dormand-Prince 5(4) with PI step-size control."""

    rtol: float = 1e-8
    atol: float = 1e-10
    h0: float = 1e-3
    max_steps: int = 1_000_000


# Dormand-Prince coefficients (FSAL pair of orders 5 and 4).
_DP_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_DP_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_DP_B5 = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
_DP_B4 = (
    5179 / 57600,
    0.0,
    7571 / 16695,
    393 / 640,
    -92097 / 339200,
    187 / 2100,
    1 / 40,
)


def _rk4_step(f, t, y, h):
    k1 = f(t, y)
    k2 = f(t + h / 2, y + (h / 2) * k1)
    k3 = f(t + h / 2, y + (h / 2) * k2)
    k4 = f(t + h, y + h * k3)
    return y + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)


def _as_rhs(field, bindings=None):
    """Wrap a VectorField (or callable) as ``f(t, y) -> ndarray``."""
    if isinstance(field, VectorField):
        if bindings:
            field = field.bind_params(bindings)
        leftover = {
            c.pname
            for c in field.free_coordinates()
            if c.is_param and not c.pname.startswith("_f_")
        }
        if leftover:
            raise DomainError(
                "field has unbound parameters: " + ", ".join(sorted(leftover))
            )
        compiled = field.compiled()
        return (lambda t, y: compiled(y)), tuple(field.coords)
    if callable(field):
        return field, None
    raise TypeError(f"cannot integrate {type(field).__name__}")


def _check_state(y, t):
    if not np.all(np.isfinite(y)):
        raise StepFailure(f"state became non-finite at t = {t:.6g}")


def integrate(field, x0, t0, t1, method=None, *, params=None, meta=None):
    """Integrate ``field`` from ``x0`` over ``[t0, t1]``.

    ``field`` is an explicit :class:`VectorField` (parameters bound
    here via ``params`` if given) or a callable ``f(t, y)``.  ``x0``
    is a state mapping or a vector in patch order.  ``method`` is
    :class:`RK4` or :class:`RK45` (default ``RK4()``).
    """
    if t1 <= t0:
        raise ValueError(f"need t1 > t0, got [{t0}, {t1}]")
    method = method or RK4()
    f, coords = _as_rhs(field, params)
    if coords is not None and isinstance(x0, dict):
        y0 = np.array([float(x0[c]) for c in coords], dtype=float)
    else:
        y0 = np.asarray(x0, dtype=float)

    base_meta = dict(meta or {})
    if isinstance(method, RK4):
        times, states = _run_rk4(f, y0, t0, t1, method.h)
        base_meta.update(integrator="rk4", step=method.h)
    elif isinstance(method, RK45):
        times, states = _run_rk45(f, y0, t0, t1, method)
        base_meta.update(integrator="rk45", rtol=method.rtol, atol=method.atol)
    else:
        raise TypeError(f"unknown method {method!r}")
    return Trajectory(times, states, coords or (), base_meta)


def _run_rk4(f, y0, t0, t1, h):
    if h <= 0:
        raise ValueError("step must be positive")
    n_steps = max(1, math.ceil((t1 - t0) / h - 1e-12))
    times = np.empty(n_steps + 1)
    states = np.empty((n_steps + 1, len(y0)))
    times[0], states[0] = t0, y0
    y = y0
    for i in range(n_steps):
        t = t0 + i * h
        step = min(h, t1 - t)
        y = _rk4_step(f, t, y, step)
        _check_state(y, t + step)
        times[i + 1] = min(t + step, t1)
        states[i + 1] = y
    times[-1] = t1
    return times, states


def _run_rk45(f, y0, t0, t1, method):
    rtol, atol = method.rtol, method.atol
    t, y = t0, y0.copy()
    h = min(method.h0, t1 - t0)
    times = [t0]
    states = [y0.copy()]
    k1 = f(t, y)
    err_prev = 1.0
    hmin = 1e-14 * max(1.0, abs(t1 - t0))
    for _ in range(method.max_steps):
        if t >= t1 - 1e-14 * max(1.0, abs(t1)):
            return np.array(times), np.array(states)
        h = min(h, t1 - t)
        if h < hmin:
            raise StepFailure(f"step size underflow at t = {t:.6g} (h = {h:.3g})")
        ks = [k1]
        for s in range(1, 7):
            ts = t + _DP_C[s] * h
            ys = y + h * sum(a * k for a, k in zip(_DP_A[s], ks))
            ks.append(f(ts, ys))
        y5 = y + h * sum(b * k for b, k in zip(_DP_B5, ks))
        y4 = y + h * sum(b * k for b, k in zip(_DP_B4, ks))
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y5))
        err = float(np.sqrt(np.mean(((y5 - y4) / scale) ** 2)))
        if not math.isfinite(err):
            h *= 0.25
            continue
        if err <= 1.0:
            t = t + h
            y = y5
            _check_state(y, t)
            times.append(t)
            states.append(y.copy())
            k1 = ks[6]  # FSAL
            factor = 0.9 * (err + 1e-16) ** -0.14 * err_prev**0.08
            err_prev = err + 1e-16
            h *= min(5.0, max(0.2, factor))
        else:
            h *= min(1.0, max(0.2, 0.9 * err**-0.2))
    raise StepFailure(f"exceeded {method.max_steps} steps at t = {t:.6g}")


# ---------------------------------------------------------------------------
# Analytic curves and their jet lifts
# ---------------------------------------------------------------------------


class _ExprChannel:
    """One degree of freedom given in closed form in a time parameter."""

    def __init__(self, e, tparam):
        self.tparam = tparam
        self.exprs = [ex.simplify(e)]

    def _extend(self, order):
        while len(self.exprs) <= order:
            self.exprs.append(
                ex.simplify(ex.differentiate(self.exprs[-1], self.tparam))
            )

    def derivs(self, t, order):
        self._extend(order)
        pt = {self.tparam: float(t)}
        return [ex.evaluate(e, pt) for e in self.exprs[: order + 1]]

    def add_poly(self, power_coeffs, scale):
        poly = ex.add(
            *(
                ex.mul(ex.const(float(c) * scale), ex.pw(ex.var(self.tparam), j))
                for j, c in enumerate(power_coeffs)
                if c != 0.0
            )
        )
        return _ExprChannel(ex.add(self.exprs[0], poly), self.tparam)


class _ChebChannel:
    """One degree of freedom as a Chebyshev series on a fixed window."""

    def __init__(self, series):
        self.series = series
        self._derivs = [series]

    def _extend(self, order):
        while len(self._derivs) <= order:
            self._derivs.append(self._derivs[-1].deriv(1))
        return self._derivs

    def derivs(self, t, order):
        self._extend(order)
        return [float(d(t)) for d in self._derivs[: order + 1]]

    def add_poly(self, power_coeffs, scale):
        domain = self.series.domain
        poly = np.polynomial.Polynomial(
            np.asarray(power_coeffs, dtype=float) * scale
        )
        converted = poly.convert(domain=domain, kind=np.polynomial.Chebyshev)
        return _ChebChannel(self.series + converted)


class CurveSpec:
    """An analytic curve ``t -> (c_0(t), ..., c_{n-1}(t))`` with exact
    derivatives, used to evaluate Lagrangians along their jet lift."""

    def __init__(self, channels, tname="t"):
        self.channels = list(channels)
        self.tname = tname

    @property
    def n(self):
        return len(self.channels)

    @classmethod
    def from_exprs(cls, exprs, tname="t"):
        """Closed-form channels; each expression may use only the time
        parameter ``tname`` (and model parameters are not allowed —
        bind them beforehand)."""
        tparam = Coordinate.param(tname)
        channels = []
        for e in exprs:
            if isinstance(e, str):
                e = ex.parse(e, ex.ParseContext(n=0, k=0, params={tname}))
            bad = [c for c in e.free_coords() if c != tparam]
            if bad:
                raise DomainError(
                    "curve expressions may depend only on the time "
                    f"parameter {tname!r}; found {[c.name for c in bad]}"
                )
            channels.append(_ExprChannel(e, tparam))
        return cls(channels, tname)

    @classmethod
    def fit(cls, times, values, degree=24, domain=(0.0, 1.0)):
        """Chebyshev least-squares fit of sampled channels.

        ``values`` has one row per time sample and one column per
        degree of freedom.
        """
        times = np.asarray(times, dtype=float)
        values = np.atleast_2d(np.asarray(values, dtype=float))
        if values.shape[0] != len(times):
            values = values.T
        channels = []
        for j in range(values.shape[1]):
            series = np.polynomial.Chebyshev.fit(
                times, values[:, j], deg=degree, domain=list(domain)
            )
            channels.append(_ChebChannel(series))
        return cls(channels)

    @classmethod
    def fit_trajectory(cls, traj, coords, degree=24):
        """Fit the listed trajectory columns (typically the base jets
        ``q(i,0)``) on the trajectory's own time window."""
        cols = np.column_stack([traj.column(c) for c in coords])
        return cls.fit(traj.times, cols, degree=degree,
                       domain=(traj.times[0], traj.times[-1]))

    def jet(self, t, order):
        """Jet-lift values at ``t``: ``Coordinate.jet(i, a) -> d^a c_i/dt^a``
        for ``a <= order``."""
        out = {}
        for i, ch in enumerate(self.channels):
            for a, v in enumerate(ch.derivs(t, order)):
                out[Coordinate.jet(i, a)] = v
        return out

    def values(self, times, order=0):
        """Array of shape (len(times), n*(order+1)) of jet values."""
        times = np.asarray(times, dtype=float)
        rows = np.empty((len(times), self.n * (order + 1)))
        for r, t in enumerate(times):
            for i, ch in enumerate(self.channels):
                ds = ch.derivs(t, order)
                for a in range(order + 1):
                    rows[r, a * self.n + i] = ds[a]
        return rows

    def perturbed(self, power_coeff_rows, scale):
        """A new curve ``c_i + scale * poly_i`` for per-dof power-basis
        coefficient rows."""
        if len(power_coeff_rows) != self.n:
            raise ValueError("one coefficient row per degree of freedom")
        return CurveSpec(
            [
                ch.add_poly(row, scale)
                for ch, row in zip(self.channels, power_coeff_rows)
            ],
            self.tname,
        )


# ---------------------------------------------------------------------------
# Herglotz action and dissipation factor
# ---------------------------------------------------------------------------


def _lagrangian_on_curve(model, curve):
    """Callable ``(t, z) -> (L, dL/dz)`` along the curve's jet lift."""
    if curve.n != model.n:
        raise DomainError(
            f"curve has {curve.n} channels but the model needs {model.n}"
        )
    k = model.k
    L = model.L_bound
    Lz = ex.simplify(ex.differentiate(L, ex.Z))
    order = [Coordinate.jet(i, a) for a in range(k + 1) for i in range(model.n)]
    order.append(ex.Z)
    fn = ex.compile_exprs([L, Lz], order, "curve_lagrangian")

    def at(t, z):
        jets = curve.jet(t, k)
        vec = [jets[c] for c in order[:-1]] + [z]
        return fn(vec)

    return at


def herglotz_Z(model, curve, z0=0.0, grid=None):
    """Solve ``dZ/dt = L(jet(t), Z)``, ``Z(t_start) = z0`` by RK4 on the
    grid (default: 1001 uniform points on [0, 1]).  Returns
    ``(grid, Z samples)``."""
    grid = np.linspace(0.0, 1.0, 1001) if grid is None else np.asarray(grid, float)
    at = _lagrangian_on_curve(model, curve)

    def f(t, y):
        val, _ = at(t, y[0])
        return np.array([val])

    z = np.empty(len(grid))
    z[0] = z0
    y = np.array([float(z0)])
    for i in range(len(grid) - 1):
        y = _rk4_step(f, grid[i], y, grid[i + 1] - grid[i])
        _check_state(y, grid[i + 1])
        z[i + 1] = y[0]
    return grid, z


def action(model, curve, z0=0.0, grid=None):
    """The Herglotz action: the end value ``Z(1)`` of the action ODE."""
    _, z = herglotz_Z(model, curve, z0, grid)
    return float(z[-1])


def sigma_factor(model, curve, z0=0.0, grid=None):
    """The dissipation factor ``sigma(t) = exp(-int_0^t dL/dz)`` along
    the curve, with ``sigma(0) = 1``.  Returns ``(grid, sigma)``."""
    grid = np.linspace(0.0, 1.0, 1001) if grid is None else np.asarray(grid, float)
    at = _lagrangian_on_curve(model, curve)

    def f(t, y):
        val, dz = at(t, y[0])
        return np.array([val, -dz])

    sig = np.empty(len(grid))
    sig[0] = 1.0
    y = np.array([float(z0), 0.0])
    for i in range(len(grid) - 1):
        y = _rk4_step(f, grid[i], y, grid[i + 1] - grid[i])
        _check_state(y, grid[i + 1])
        sig[i + 1] = math.exp(y[1])
    if not np.all(sig > 0):
        raise DomainError("dissipation factor lost positivity")
    return grid, sig


# ---------------------------------------------------------------------------
# Variational criticality check
# ---------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class VariationRow:
    """Gateaux derivative of the action along one admissible variation."""

    derivative: float  # central difference at eps
    derivative_half: float  # central difference at eps/2
    richardson: float  # extrapolated value
    norm_inf: float  # sup norm of the variation on the window

    @property
    def ratio(self):
        return abs(self.richardson) / self.norm_inf


def admissible_variations(n, k, count=10, seed=_SEED):
    """Power-basis coefficient rows for ``t^k (1-t)^k (a0 + a1 t + a2 t^2
    + a3 t^3)`` per dof: variations vanishing with their first ``k-1``
    derivatives at both endpoints."""
    rng = np.random.default_rng(seed)
    # (t - t^2)^k expanded in the power basis
    base = np.zeros(2 * k + 1)
    for j in range(k + 1):
        base[k + j] = math.comb(k, j) * (-1.0) ** j
    out = []
    for _ in range(count):
        rows = []
        for _i in range(n):
            cubic = rng.uniform(-1.0, 1.0, size=4)
            rows.append(np.convolve(base, cubic))
        out.append(rows)
    return out


def variational_check(model, base_curve, z0=0.0, variations=10, eps=1e-4,
                      seed=_SEED, grid=None):
    """Central-difference Gateaux derivatives of the Herglotz action at
    ``base_curve`` along admissible variations, with a Richardson check
    at half step."""
    rows = []
    tgrid = np.linspace(0.0, 1.0, 257)
    for coeff_rows in admissible_variations(model.n, model.k, variations, seed):
        norm = max(
            float(np.max(np.abs(np.polynomial.polynomial.polyval(tgrid, row))))
            for row in coeff_rows
        )
        ds = []
        for e in (eps, eps / 2):
            plus = action(model, base_curve.perturbed(coeff_rows, e), z0, grid)
            minus = action(model, base_curve.perturbed(coeff_rows, -e), z0, grid)
            ds.append((plus - minus) / (2 * e))
        rich = (4 * ds[1] - ds[0]) / 3
        rows.append(VariationRow(ds[0], ds[1], rich, norm))
    return rows
