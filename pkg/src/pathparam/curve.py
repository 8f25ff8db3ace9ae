"""Parametric reference curves.

A curve maps a path parameter ``theta`` on ``[theta0, thetaf]`` to a point in
the plane or in space.  Two concrete kinds exist:

* :class:`PiecewisePolynomialCurve` -- power-basis polynomial segments with a
  declared (and certified) continuity class.  Produced by :func:`interpolate`
  and serialisable to JSON.
* :class:`ExpressionCurve` -- a closed-form curve given as symbolic component
  expressions; derivatives are exact.  Used for the built-in test curves.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import sympy as sp
from scipy.interpolate import make_interp_spline

from .errors import (
    CurveConstructionError,
    DegenerateParameterizationError,
    DomainError,
)

MAX_ORDER = 4
SMOOTH = math.inf
SPEED_FLOOR = 1e-12
KNOT_TOL = 1e-9

_GL_X, _GL_W = np.polynomial.legendre.leggauss(15)


class ParametricCurve:
    """Common interface of all reference curves.

    Subclasses implement :meth:`_derivs`.  ``continuity`` is an integer class
    ``n`` (the curve is C^n) or ``math.inf`` for analytic curves.
    """

    dimension: int
    domain: tuple
    continuity: float

    def _derivs(self, theta: np.ndarray, order: int, side: str) -> np.ndarray:
        raise NotImplementedError

    @property
    def knots(self) -> np.ndarray:
        """Breakpoints including both domain ends."""
        return np.array(self.domain, dtype=float)

    @property
    def is_planar(self) -> bool:
        return self.dimension == 2

    def _check_domain(self, theta):
        t0, tf = self.domain
        slack = 1e-12 * max(1.0, abs(t0), abs(tf))
        arr = np.asarray(theta, dtype=float)
        if np.any(~np.isfinite(arr)) or np.any(arr < t0 - slack) or np.any(arr > tf + slack):
            raise DomainError(f"theta outside curve domain [{t0}, {tf}]")
        return np.clip(arr, t0, tf)

    def eval(self, theta, order: int = 0, side: str = "right") -> np.ndarray:
        """Position (order 0) or exact derivative of order 1..4.

        At interior knots the right-hand segment is used unless
        ``side="left"``.  A scalar ``theta`` returns shape ``(dim,)``; an
        array returns ``(n, dim)``.
        """
        if not 0 <= order <= MAX_ORDER:
            raise ValueError(f"derivative order must be in 0..{MAX_ORDER}")
        arr = self._check_domain(theta)
        out = self._derivs(np.atleast_1d(arr), order, side)
        return out[0] if arr.ndim == 0 else out

    def derivatives(self, theta, max_order: int = MAX_ORDER, side: str = "right") -> np.ndarray:
        """Stack of derivatives ``0..max_order``, shape ``(n, max_order + 1, dim)``."""
        arr = np.atleast_1d(self._check_domain(theta))
        return np.stack([self._derivs(arr, k, side) for k in range(max_order + 1)], axis=1)

    def speed(self, theta) -> float | np.ndarray:
        """Parametric speed ``||gamma'(theta)||``."""
        d1 = self.eval(theta, 1)
        sigma = np.linalg.norm(d1, axis=-1)
        if np.any(sigma < SPEED_FLOOR):
            raise DegenerateParameterizationError(
                f"parametric speed below {SPEED_FLOOR:g}; curve is not regular there"
            )
        return float(sigma) if np.ndim(sigma) == 0 else sigma

    def arc_length(self, theta: float, tol: float = 1e-10) -> float:
        """Arc length from ``theta0`` to ``theta`` by adaptive Gauss-Legendre."""
        theta = float(self._check_domain(theta))
        t0 = self.domain[0]
        if theta == t0:
            return 0.0
        breaks = [k for k in self.knots if t0 < k < theta]
        edges = [t0, *breaks, theta]
        share = tol / (len(edges) - 1)
        total = 0.0
        for a, b in zip(edges[:-1], edges[1:]):
            total += _adaptive_gauss(self._speed_raw, a, b, share)
        return total

    def _speed_raw(self, theta: np.ndarray) -> np.ndarray:
        return np.linalg.norm(self._derivs(theta, 1, "right"), axis=1)

    def length(self) -> float:
        return self.arc_length(self.domain[1])


def _gauss_segment(f, a, b):
    half = 0.5 * (b - a)
    return half * float(np.dot(_GL_W, f(0.5 * (a + b) + half * _GL_X)))


def _adaptive_gauss(f, a, b, tol, whole=None, depth=0):
    if whole is None:
        whole = _gauss_segment(f, a, b)
    mid = 0.5 * (a + b)
    left = _gauss_segment(f, a, mid)
    right = _gauss_segment(f, mid, b)
    if abs(left + right - whole) <= tol or depth >= 40:
        return left + right
    return _adaptive_gauss(f, a, mid, 0.5 * tol, left, depth + 1) + _adaptive_gauss(
        f, mid, b, 0.5 * tol, right, depth + 1
    )


def _falling(j: int, k: int) -> float:
    return float(math.perm(j, k))


class PiecewisePolynomialCurve(ParametricCurve):
    """Piecewise polynomial curve in the local power basis.

    Segment ``i`` is ``sum_j coeffs[i, j] * (theta - knots[i]) ** j`` on
    ``[knots[i], knots[i + 1]]``.

    Parameters
    ----------
    knots : (m + 1,) strictly increasing breakpoints.
    coeffs : (m, degree + 1, dim) ascending power coefficients.
    continuity : declared class; certified against the knot jumps.
    """

    basis = "power"

    def __init__(self, knots, coeffs, continuity: int = 0, check: bool = True):
        knots = np.asarray(knots, dtype=float)
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.ndim != 3:
            raise CurveConstructionError("coeffs must have shape (segments, degree+1, dim)")
        if knots.ndim != 1 or len(knots) != coeffs.shape[0] + 1:
            raise CurveConstructionError("need exactly one more knot than segments")
        if np.any(np.diff(knots) <= 0):
            raise CurveConstructionError("knots must be strictly increasing")
        if coeffs.shape[2] not in (2, 3):
            raise CurveConstructionError("curves must be planar or spatial")
        if not np.all(np.isfinite(coeffs)):
            raise CurveConstructionError("non-finite coefficients")
        self._knots = knots
        self.coeffs = coeffs
        self.dimension = coeffs.shape[2]
        self.domain = (float(knots[0]), float(knots[-1]))
        self.continuity = continuity
        deg = coeffs.shape[1] - 1
        self._dcoef = []
        for k in range(MAX_ORDER + 1):
            if k > deg:
                self._dcoef.append(np.zeros((coeffs.shape[0], 1, self.dimension)))
                continue
            scale = np.array([_falling(j, k) for j in range(k, deg + 1)])
            self._dcoef.append(coeffs[:, k:, :] * scale[None, :, None])
        if check:
            certified = certified_continuity(self)
            if certified < continuity:
                raise CurveConstructionError(
                    f"declared C^{continuity} but knot matching only certifies C^{certified}"
                )
            grid = _check_grid(knots)
            if np.any(self._speed_raw(grid) < SPEED_FLOOR):
                raise DegenerateParameterizationError("curve is not regular")

    @property
    def knots(self) -> np.ndarray:
        return self._knots

    @property
    def degree(self) -> int:
        return self.coeffs.shape[1] - 1

    def _segment_index(self, theta, side):
        m = self.coeffs.shape[0]
        idx = np.searchsorted(self._knots, theta, side="right" if side == "right" else "left") - 1
        return np.clip(idx, 0, m - 1)

    def _derivs(self, theta, order, side):
        idx = self._segment_index(theta, side)
        t = theta - self._knots[idx]
        c = self._dcoef[order][idx]
        out = c[:, -1, :].copy()
        for j in range(c.shape[1] - 2, -1, -1):
            out = out * t[:, None] + c[:, j, :]
        return out

    def to_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "knots": self._knots.tolist(),
            "segments": self.coeffs.tolist(),
            "basis": self.basis,
            "continuity": self.continuity,
        }


def _check_grid(knots):
    pts = [knots]
    for frac in (0.25, 0.5, 0.75):
        pts.append(knots[:-1] + frac * np.diff(knots))
    return np.sort(np.concatenate(pts))


def continuity_defects(curve: PiecewisePolynomialCurve) -> np.ndarray:
    """Relative derivative jumps at interior knots, shape ``(knots - 2, 5)``."""
    inner = curve.knots[1:-1]
    if len(inner) == 0:
        return np.zeros((0, MAX_ORDER + 1))
    out = np.empty((len(inner), MAX_ORDER + 1))
    for k in range(MAX_ORDER + 1):
        left = curve._derivs(inner, k, "left")
        right = curve._derivs(inner, k, "right")
        scale = np.maximum(1.0, np.maximum(np.linalg.norm(left, axis=1), np.linalg.norm(right, axis=1)))
        out[:, k] = np.linalg.norm(left - right, axis=1) / scale
    return out


def certified_continuity(curve: ParametricCurve, tol: float = KNOT_TOL) -> float:
    """Largest ``n`` such that derivatives ``0..n`` match at every interior knot."""
    if not isinstance(curve, PiecewisePolynomialCurve):
        return curve.continuity
    jumps = continuity_defects(curve)
    if len(jumps) == 0:
        return SMOOTH
    worst = jumps.max(axis=0)
    n = -1
    for k in range(MAX_ORDER + 1):
        if worst[k] > tol:
            break
        n = k
    return n


class ExpressionCurve(ParametricCurve):
    """Closed-form curve with exact symbolic derivatives.

    >>> helix = ExpressionCurve(["cos(t)", "sin(t)", "t"], (0.0, 2 * math.pi))
    """

    def __init__(self, components: Sequence, domain, symbol: str = "t", name: Optional[str] = None):
        if len(components) not in (2, 3):
            raise CurveConstructionError("curves must be planar or spatial")
        t0, tf = float(domain[0]), float(domain[1])
        if not t0 < tf:
            raise CurveConstructionError("domain must satisfy theta0 < thetaf")
        var = sp.Symbol(symbol, real=True)
        try:
            exprs = [sp.sympify(c, locals={symbol: var}) for c in components]
        except (sp.SympifyError, TypeError) as exc:
            raise CurveConstructionError(f"cannot parse curve expression: {exc}") from exc
        extra = set().union(*(e.free_symbols for e in exprs)) - {var}
        if extra:
            raise CurveConstructionError(f"unknown symbols in curve expression: {sorted(map(str, extra))}")
        self.components = [str(e) for e in exprs]
        self.symbol = symbol
        self.name = name
        self.dimension = len(exprs)
        self.domain = (t0, tf)
        self.continuity = SMOOTH
        self._funcs: list[list[Callable]] = []
        current = exprs
        for _ in range(MAX_ORDER + 1):
            self._funcs.append([sp.lambdify(var, e, "numpy") for e in current])
            current = [sp.diff(e, var) for e in current]

    def _derivs(self, theta, order, side):
        cols = [np.broadcast_to(np.asarray(f(theta), dtype=float), theta.shape) for f in self._funcs[order]]
        return np.stack(cols, axis=1)

    def to_dict(self) -> dict:
        return {
            "kind": "expression",
            "dimension": self.dimension,
            "components": self.components,
            "symbol": self.symbol,
            "domain": list(self.domain),
            "name": self.name,
        }


@dataclass
class WaypointSet:
    """Ordered waypoints, optionally with explicit parameter values."""

    points: np.ndarray
    params: Optional[np.ndarray] = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] not in (2, 3):
            raise CurveConstructionError("waypoints must be an (n, 2) or (n, 3) array")
        if len(pts) < 2:
            raise CurveConstructionError("at least two waypoints are required")
        if not np.all(np.isfinite(pts)):
            raise CurveConstructionError("waypoints must be finite")
        if np.any(np.linalg.norm(np.diff(pts, axis=0), axis=1) == 0.0):
            raise CurveConstructionError("consecutive waypoints must differ")
        self.points = pts
        if self.params is not None:
            par = np.asarray(self.params, dtype=float)
            if par.shape != (len(pts),) or np.any(np.diff(par) <= 0):
                raise CurveConstructionError("parameter values must be strictly increasing, one per point")
            self.params = par

    def chord_params(self) -> np.ndarray:
        """Cumulative chord length normalised to ``[0, 1]``."""
        steps = np.linalg.norm(np.diff(self.points, axis=0), axis=1)
        s = np.concatenate([[0.0], np.cumsum(steps)])
        return s / s[-1]


def _estimate_end_derivatives(t, pts, count, at_start):
    """Derivatives 1..count at one end from a local polynomial fit."""
    q = min(len(t), count + 2)
    sl = slice(0, q) if at_start else slice(len(t) - q, len(t))
    tt, pp = t[sl], pts[sl]
    t_end = t[0] if at_start else t[-1]
    coefs = np.polynomial.polynomial.polyfit(tt - t_end, pp, q - 1)
    out = []
    for k in range(1, count + 1):
        out.append(coefs[k] * math.factorial(k) if k < len(coefs) else np.zeros(pts.shape[1]))
    return out


def interpolate(
    wps: WaypointSet,
    continuity: int,
    end_derivatives: Optional[tuple] = None,
) -> PiecewisePolynomialCurve:
    """Interpolating spline through the waypoints.

    For ``continuity = c >= 1`` the spline has odd degree ``2c + 1`` and is
    clamped: derivatives ``1..c`` are imposed at both ends, taken from
    ``end_derivatives = (start_list, end_list)`` when given and otherwise
    estimated from a local polynomial through the end waypoints.  ``c = 0``
    uses a not-a-knot cubic (no end data).  The parameter is the chord
    length normalised to ``[0, 1]`` unless the waypoints carry parameters.
    """
    if continuity not in (0, 1, 2, 3, 4):
        raise CurveConstructionError("continuity must be one of 0..4")
    t = wps.params if wps.params is not None else wps.chord_params()
    pts = wps.points
    n = len(pts)
    c = continuity
    if c == 0 and n >= 4:
        spline = make_interp_spline(t, pts, k=3)
    else:
        k = 2 * max(c, 1) + 1
        nder = (k - 1) // 2
        if end_derivatives is None:
            start = _estimate_end_derivatives(t, pts, nder, True)
            end = _estimate_end_derivatives(t, pts, nder, False)
        else:
            start, end = end_derivatives
            if len(start) < nder or len(end) < nder:
                raise CurveConstructionError(f"need {nder} end derivatives at each end")
        bc = (
            [(j + 1, np.asarray(start[j], dtype=float)) for j in range(nder)],
            [(j + 1, np.asarray(end[j], dtype=float)) for j in range(nder)],
        )
        try:
            spline = make_interp_spline(t, pts, k=k, bc_type=bc)
        except (ValueError, np.linalg.LinAlgError) as exc:
            raise CurveConstructionError(f"spline construction failed: {exc}") from exc
    return _spline_to_curve(spline, t, continuity)


def _spline_to_curve(spline, breaks, continuity) -> PiecewisePolynomialCurve:
    deg = spline.k
    left = breaks[:-1]
    coeffs = np.empty((len(left), deg + 1, spline.c.shape[1]))
    for j in range(deg + 1):
        dj = spline.derivative(j) if j else spline
        # the segment is exactly degree ``deg``: Taylor data at its left end
        # evaluated just inside the segment is exact up to rounding
        coeffs[:, j, :] = dj(left) / math.factorial(j)
    return PiecewisePolynomialCurve(breaks, coeffs, continuity)


def join(first: PiecewisePolynomialCurve, second: PiecewisePolynomialCurve, continuity: int):
    """Concatenate two piecewise curves sharing an end/start parameter."""
    if first.domain[1] != second.domain[0]:
        raise CurveConstructionError("curves do not share a joint parameter")
    deg = max(first.degree, second.degree)

    def pad(cf):
        out = np.zeros((cf.shape[0], deg + 1, cf.shape[2]))
        out[:, : cf.shape[1], :] = cf
        return out

    knots = np.concatenate([first.knots, second.knots[1:]])
    coeffs = np.concatenate([pad(first.coeffs), pad(second.coeffs)])
    return PiecewisePolynomialCurve(knots, coeffs, continuity)


def rejoin_at(curve: ParametricCurve, split: float, continuity: int, per_section: int = 6):
    """Split ``curve`` at ``split`` and rebuild it from two interpolated sections.

    Each section is interpolated independently from ``per_section`` samples
    with :func:`interpolate`; the sections share the exact curve value and
    derivatives up to ``continuity`` at the joint, so the result is exactly
    ``C^continuity`` there (higher derivatives generically jump).
    """
    t0, tf = curve.domain
    if not t0 < split < tf:
        raise CurveConstructionError("split must lie strictly inside the domain")
    sections = []
    for a, b in ((t0, split), (split, tf)):
        par = np.linspace(a, b, per_section)
        wps = WaypointSet(curve.eval(par), par)
        ends = None
        if continuity >= 1:
            ends = tuple(
                [curve.eval(x, k) for k in range(1, continuity + 1)] for x in (a, b)
            )
        sections.append(interpolate(wps, continuity, ends))
    return join(sections[0], sections[1], continuity)


def curve_to_json(curve: ParametricCurve) -> str:
    return json.dumps(curve.to_dict(), indent=2)


def curve_from_dict(doc: dict) -> ParametricCurve:
    try:
        if doc.get("kind") == "expression":
            return ExpressionCurve(doc["components"], doc["domain"], doc.get("symbol", "t"), doc.get("name"))
        if doc.get("basis", "power") != "power":
            raise CurveConstructionError(f"unsupported basis {doc['basis']!r}")
        curve = PiecewisePolynomialCurve(doc["knots"], doc["segments"], int(doc.get("continuity", 0)))
    except KeyError as exc:
        raise CurveConstructionError(f"curve document missing field {exc}") from exc
    if "dimension" in doc and doc["dimension"] != curve.dimension:
        raise CurveConstructionError("dimension field disagrees with coefficients")
    return curve


def load_curve(path) -> ParametricCurve:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CurveConstructionError(f"{path}: invalid JSON ({exc})") from exc
    return curve_from_dict(doc)


def read_points_csv(path) -> np.ndarray:
    """Rows of 2 or 3 numbers; a non-numeric first row is treated as a header."""
    rows = []
    with open(path, newline="") as fh:
        for i, row in enumerate(csv.reader(fh)):
            cells = [c.strip() for c in row if c.strip()]
            if not cells:
                continue
            try:
                rows.append([float(c) for c in cells])
            except ValueError:
                if i == 0:
                    continue
                raise CurveConstructionError(f"{path}: non-numeric row {i + 1}")
    if not rows or len({len(r) for r in rows}) != 1 or len(rows[0]) not in (2, 3):
        raise CurveConstructionError(f"{path}: expected rows of 2 or 3 coordinates")
    return np.array(rows)


def load_waypoints(path) -> WaypointSet:
    return WaypointSet(read_points_csv(path))


# The built-in curves reproduce the test functions used in the experiments.
_NAMED = {
    "line": (["t", "0", "0"], (0.0, 1.0)),
    "circle": (["cos(t)", "sin(t)"], (0.0, 2 * math.pi)),
    "helix": (["cos(t)", "sin(t)", "t"], (0.0, 2 * math.pi)),
    "sin2d": (["t", "sin(2*pi*t)"], (0.0, 1.0)),
    "coil3d": (
        ["(0.6 + 0.3*cos(t))*cos(2*t)", "(0.6 + 0.3*cos(t))*sin(2*t)", "0.3*sin(7*t)"],
        (0.0, 2 * math.pi),
    ),
    "sin": (["t", "1 + 0.5*sin(2*pi*t)"], (0.0, 1.0)),
    "continuity": (["0.5*cos(9*t)", "exp(cos(1.8*t))"], (0.05, 0.95)),
}

NAMED_CURVES = tuple(_NAMED)


def named_curve(name: str) -> ExpressionCurve:
    """One of the built-in curves: ``line``, ``circle``, ``helix``, ``sin2d``,
    ``coil3d``, ``sin`` (the manipulator reference) and ``continuity``."""
    if name not in _NAMED:
        raise CurveConstructionError(f"unknown curve {name!r}; choose from {', '.join(_NAMED)}")
    comps, dom = _NAMED[name]
    return ExpressionCurve(comps, dom, name=name)


def helix(a: float = 1.0, b: float = 1.0, domain=(0.0, 2 * math.pi)) -> ExpressionCurve:
    return ExpressionCurve([f"{a}*cos(t)", f"{a}*sin(t)", f"{b}*t"], domain, name="helix")


def circle(radius: float = 1.0, domain=(0.0, 2 * math.pi)) -> ExpressionCurve:
    return ExpressionCurve([f"{radius}*cos(t)", f"{radius}*sin(t)"], domain, name="circle")
