"""Differentiable collision-free corridors around a framed path.

The corridor cross-section at progress ``xi`` is the off-centred ellipse::

    x^T E(xi) x - d(xi)^T x <= 1,      x = (eta1, eta2)

whose coefficients ``E11, E12, E22, d1, d2`` are Chebyshev series in the
normalised progress.  Generation is a single linear program: the area is
enlarged by minimising the summed trace of ``E`` over sample points,
positive definiteness is replaced by diagonal dominance, every obstacle
must lie outside its cross-section, and a ring of synthetic points
(the *wrapper*) keeps the program bounded.

For planar paths a simpler pair of polynomial bounds
``lower(xi) <= eta <= upper(xi)`` is generated by :func:`generate_planar`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import trapezoid

from . import chebyshev as cheb
from .curve import ParametricCurve
from .errors import CorridorError, LpSolverError
from .frames import FrameField, curve_derivatives, frame_batch, lift, tangent_derivatives
from .lp import INFEASIBLE, OPTIMAL, UNBOUNDED, LpProblem, solve_lp
from .spatial import closest_point_batch

DOMINANCE_MARGIN = 1e-9
OBSTACLE_TOL = 1e-8
OBSTACLE_MARGIN = 1e-9  # obstacles stay strictly outside, so containment tests reject them
WRAPPER_POINTS = 16
PLANAR_MARGIN = 1e-6


@dataclass(frozen=True)
class ProjectedObstacle:
    """Obstacle point in path coordinates: progress and normal-plane offset."""

    xi: float
    x_perp: np.ndarray


@dataclass
class CloudProjection:
    obstacles: list
    dropped_ends: int = 0
    dropped_far: int = 0


def project_cloud(curve: ParametricCurve, frames: FrameField, points, max_radius: float = math.inf) -> CloudProjection:
    """Project a point cloud into path coordinates.

    Points whose closest parameter is clamped to a domain end, or whose
    transverse distance exceeds ``max_radius``, are dropped and counted.
    """
    P = lift(np.atleast_2d(np.asarray(points, dtype=float)))
    if P.size == 0:
        return CloudProjection([])
    if not np.all(np.isfinite(P)):
        raise CorridorError("point cloud contains non-finite coordinates")
    xi, clamped = closest_point_batch(curve, P)
    lo, hi = frames.grid[0], frames.grid[-1]
    ends = clamped | (xi <= lo) | (xi >= hi)
    keep = ~ends
    R = frame_batch(frames, np.clip(xi, lo, hi))
    d = P - lift(curve.eval(xi))
    x_perp = np.column_stack([np.einsum("ij,ij->i", d, R[:, :, 1]), np.einsum("ij,ij->i", d, R[:, :, 2])])
    far = keep & (np.linalg.norm(x_perp, axis=1) > max_radius)
    keep &= ~far
    obs = [ProjectedObstacle(float(xi[k]), x_perp[k].copy()) for k in np.nonzero(keep)[0]]
    return CloudProjection(obs, int(ends.sum()), int(far.sum()))


@dataclass(frozen=True)
class EllipseSection:
    E: np.ndarray
    d: np.ndarray
    center: np.ndarray
    axes: np.ndarray
    directions: np.ndarray
    level: float


@dataclass
class EllipseCorridor:
    """Chebyshev coefficients of ``(E11, E12, E22)`` and ``(d1, d2)``.

    ``cE`` has shape ``(3, degree + 1)`` and ``dE`` shape ``(2, degree + 1)``.
    """

    degree: int
    cE: np.ndarray
    dE: np.ndarray
    domain: tuple
    wrapper_radius: float
    samples: Optional[np.ndarray] = None
    lp_objective: float = math.nan
    lp_iterations: int = 0

    def coefficients(self, xi):
        """``(E11, E12, E22, d1, d2)`` at ``xi``, shape ``(n, 5)``."""
        t = cheb.to_unit(np.atleast_1d(xi), self.domain)
        return cheb.clenshaw(np.vstack([self.cE, self.dE]).T, t)

    def coefficient_derivatives(self, xi):
        coefs = np.vstack([self.cE, self.dE]).T
        der = cheb.derivative(coefs, self.domain)
        t = cheb.to_unit(np.atleast_1d(xi), self.domain)
        return cheb.clenshaw(der, t)

    def to_dict(self) -> dict:
        return {
            "degree": self.degree,
            "domain": list(self.domain),
            "cE": self.cE.tolist(),
            "dE": self.dE.tolist(),
            "wrapper_radius": self.wrapper_radius,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "EllipseCorridor":
        try:
            cE = np.asarray(doc["cE"], dtype=float)
            dE = np.asarray(doc["dE"], dtype=float)
            n = int(doc["degree"])
            out = cls(n, cE, dE, tuple(doc["domain"]), float(doc["wrapper_radius"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise CorridorError(f"invalid corridor document: {exc}") from exc
        if cE.shape != (3, n + 1) or dE.shape != (2, n + 1):
            raise CorridorError("corridor coefficient shapes disagree with degree")
        return out


def _unpack(row):
    e11, e12, e22, d1, d2 = row
    return np.array([[e11, e12], [e12, e22]]), np.array([d1, d2])


def section_from(E, d) -> EllipseSection:
    """Centre, level value and semi-axes of ``x^T E x - d^T x <= 1``."""
    lam, vec = np.linalg.eigh(E)
    if lam[0] <= 0:
        raise CorridorError("corridor matrix is not positive definite")
    center = 0.5 * np.linalg.solve(E, d)
    level = 1.0 + 0.25 * float(d @ np.linalg.solve(E, d))
    axes = np.sqrt(level / lam)
    order = np.argsort(axes)
    return EllipseSection(E, d, center, axes[order], vec[:, order], level)


def ellipse_at(c: EllipseCorridor, xi: float) -> EllipseSection:
    """Cross-section ellipse at ``xi``."""
    a, b = c.domain
    if not a - 1e-12 <= xi <= b + 1e-12:
        raise CorridorError(f"xi={xi} outside corridor domain [{a}, {b}]")
    E, d = _unpack(c.coefficients(xi)[0])
    return section_from(E, d)


def _quad_row(x, Bk):
    """LP row of ``x^T E x - d^T x`` in the coefficient vector."""
    x1, x2 = x
    return np.concatenate([x1 * x1 * Bk, 2.0 * x1 * x2 * Bk, x2 * x2 * Bk, -x1 * Bk, -x2 * Bk])


def default_samples(degree: int) -> int:
    return 4 * (degree + 1)


def generate(
    curve: ParametricCurve,
    frames: Optional[FrameField],
    obstacles: Sequence[ProjectedObstacle],
    degree: int,
    n_samples: Optional[int] = None,
    wrapper_radius: float = 1.0,
    domain: Optional[tuple] = None,
) -> EllipseCorridor:
    """Largest-trace ellipse corridor avoiding ``obstacles`` (one LP solve).

    Each obstacle constrains the cross-section at its own progress value;
    diagonal dominance and the wrapper ring are imposed at ``n_samples``
    uniformly spaced progress values.
    """
    if degree < 0:
        raise CorridorError("degree must be non-negative")
    if n_samples is None:
        n_samples = default_samples(degree)
    if n_samples < 2 * (degree + 1):
        raise CorridorError("need at least 2 (degree + 1) samples")
    if not wrapper_radius > 0:
        raise CorridorError("wrapper radius must be positive")
    dom = tuple(curve.domain if domain is None else domain)
    k = degree + 1
    xs = np.linspace(dom[0], dom[1], n_samples)
    Bs = cheb.basis(cheb.to_unit(xs, dom), degree)
    zero = np.zeros(k)
    rows, rhs = [], []
    for Bk in Bs:
        for s in (1.0, -1.0):
            rows.append(-np.concatenate([Bk, -s * Bk, zero, zero, zero]))
            rhs.append(-DOMINANCE_MARGIN)
            rows.append(-np.concatenate([zero, -s * Bk, Bk, zero, zero]))
            rhs.append(-DOMINANCE_MARGIN)
        for phi in 2.0 * math.pi * np.arange(WRAPPER_POINTS) / WRAPPER_POINTS:
            rows.append(-_quad_row(wrapper_radius * np.array([math.cos(phi), math.sin(phi)]), Bk))
            rhs.append(-1.0)
    obs_xi = np.array([o.xi for o in obstacles], dtype=float)
    if len(obs_xi):
        if np.any(obs_xi < dom[0]) or np.any(obs_xi > dom[1]):
            raise CorridorError("obstacle progress outside corridor domain")
        Bo = cheb.basis(cheb.to_unit(obs_xi, dom), degree)
        for o, Bk in zip(obstacles, Bo):
            rows.append(-_quad_row(np.asarray(o.x_perp, dtype=float), Bk))
            rhs.append(-(1.0 + OBSTACLE_MARGIN))
    cost = np.concatenate([Bs.sum(axis=0), zero, Bs.sum(axis=0), zero, zero])
    problem = LpProblem(cost, np.array(rows), np.array(rhs), bounds=(None, None))
    sol = solve_lp(problem)
    if sol.status == INFEASIBLE:
        near = min((float(np.linalg.norm(o.x_perp)) for o in obstacles), default=math.nan)
        raise CorridorError(
            f"corridor program infeasible (closest obstacle at transverse distance {near:.3g}; "
            "an obstacle on the path cannot be excluded)"
        )
    if sol.status == UNBOUNDED:
        raise CorridorError("corridor program unbounded")
    z = sol.x
    corridor = EllipseCorridor(
        degree,
        np.vstack([z[0:k], z[k : 2 * k], z[2 * k : 3 * k]]),
        np.vstack([z[3 * k : 4 * k], z[4 * k : 5 * k]]),
        dom,
        float(wrapper_radius),
        samples=xs,
        lp_objective=sol.objective,
        lp_iterations=sol.iterations,
    )
    certify(corridor, obstacles, xs)
    return corridor


def obstacle_residuals(c: EllipseCorridor, obstacles: Sequence[ProjectedObstacle]) -> np.ndarray:
    """``x^T E x - d^T x - 1`` for each obstacle (non-negative means outside)."""
    if not obstacles:
        return np.zeros(0)
    co = c.coefficients([o.xi for o in obstacles])
    x = np.array([o.x_perp for o in obstacles], dtype=float)
    val = co[:, 0] * x[:, 0] ** 2 + 2 * co[:, 1] * x[:, 0] * x[:, 1] + co[:, 2] * x[:, 1] ** 2
    return val - co[:, 3] * x[:, 0] - co[:, 4] * x[:, 1] - 1.0


def certify(c: EllipseCorridor, obstacles, samples) -> None:
    """Independent post-solve check of dominance, definiteness and clearance."""
    co = c.coefficients(samples)
    tol = 1e-12 * (1.0 + np.abs(co).max())
    if np.any(co[:, 0] - np.abs(co[:, 1]) < DOMINANCE_MARGIN - tol) or np.any(
        co[:, 2] - np.abs(co[:, 1]) < DOMINANCE_MARGIN - tol
    ):
        raise CorridorError("diagonal dominance violated at a generation sample")
    for row in co:
        if np.linalg.eigvalsh(_unpack(row)[0])[0] <= 0:
            raise CorridorError("corridor matrix not positive definite at a generation sample")
    res = obstacle_residuals(c, obstacles)
    if len(res) and res.min() < -OBSTACLE_TOL:
        raise CorridorError(f"obstacle inside corridor (residual {res.min():.3g})")


def contains_local(c: EllipseCorridor, xi: float, x_perp) -> bool:
    E, d = _unpack(c.coefficients(xi)[0])
    x = np.asarray(x_perp, dtype=float)
    return bool(x @ E @ x - d @ x <= 1.0)


def contains(c: EllipseCorridor, curve: ParametricCurve, frames: FrameField, p) -> bool:
    """Whether the Cartesian point ``p`` lies inside the corridor."""
    return bool(contains_batch(c, curve, frames, np.atleast_2d(p))[0])


def contains_batch(c: EllipseCorridor, curve: ParametricCurve, frames: FrameField, points) -> np.ndarray:
    """Vectorised :func:`contains`; points projecting to a path end are outside."""
    P = lift(np.atleast_2d(np.asarray(points, dtype=float)))
    xi, clamped = closest_point_batch(curve, P)
    lo, hi = frames.grid[0], frames.grid[-1]
    xi_c = np.clip(xi, lo, hi)
    R = frame_batch(frames, xi_c)
    d = P - lift(curve.eval(xi_c))
    x1 = np.einsum("ij,ij->i", d, R[:, :, 1])
    x2 = np.einsum("ij,ij->i", d, R[:, :, 2])
    resid = np.abs(np.einsum("ij,ij->i", d, R[:, :, 0]))
    co = c.coefficients(xi_c)
    val = co[:, 0] * x1**2 + 2 * co[:, 1] * x1 * x2 + co[:, 2] * x2**2 - co[:, 3] * x1 - co[:, 4] * x2
    inside = val <= 1.0
    inside &= ~(clamped & (resid > 1e-9))
    return inside


def section_areas(c: EllipseCorridor, xi) -> np.ndarray:
    """Cross-section areas ``pi * level / sqrt(det E)``."""
    out = []
    for row in c.coefficients(xi):
        E, d = _unpack(row)
        det = float(np.linalg.det(E))
        if det <= 0 or E[0, 0] <= 0:
            raise CorridorError("corridor matrix not positive definite at a quadrature node")
        level = 1.0 + 0.25 * float(d @ np.linalg.solve(E, d))
        out.append(math.pi * level / math.sqrt(det))
    return np.array(out)


def volume(c: EllipseCorridor, curve: ParametricCurve, quadrature: Optional[int] = None,
           frames: Optional[FrameField] = None) -> float:
    """Swept volume ``sum_i area_i sigma_i dxi`` by the trapezoid rule.

    ``quadrature`` is the number of equally spaced nodes (default 1001).
    The area-times-speed integrand ignores how the path bends under
    off-centre sections.  With ``frames`` (a parallel transport field) the
    exact volume element ``sigma - omega3 eta1 + omega2 eta2`` is integrated
    instead; because it is linear in ``eta`` this only needs each section's
    area and centre.
    """
    xs = np.linspace(c.domain[0], c.domain[1], 1001 if quadrature is None else quadrature)
    metric = np.asarray(curve.speed(xs), dtype=float)
    if frames is not None:
        R = frame_batch(frames, xs)
        D = curve_derivatives(curve, xs, 2)
        e1p = tangent_derivatives(D)[:, 1]
        w2 = -np.einsum("ij,ij->i", e1p, R[:, :, 2])
        w3 = np.einsum("ij,ij->i", e1p, R[:, :, 1])
        centers = np.array([section_from(*_unpack(row)).center for row in c.coefficients(xs)])
        metric = metric - w3 * centers[:, 0] + w2 * centers[:, 1]
    vals = section_areas(c, xs) * metric
    return float(trapezoid(vals, xs))


# ------------------------------------------------------------------- planar


@dataclass
class PlanarCorridor:
    """Polynomial lateral bounds ``lower(xi) <= eta <= upper(xi)``."""

    degree: int
    lower: np.ndarray
    upper: np.ndarray
    domain: tuple
    wrapper_halfwidth: float

    def bounds(self, xi):
        t = cheb.to_unit(np.atleast_1d(xi), self.domain)
        return cheb.clenshaw(self.lower, t), cheb.clenshaw(self.upper, t)

    def to_dict(self) -> dict:
        return {
            "kind": "planar",
            "degree": self.degree,
            "domain": list(self.domain),
            "lower": self.lower.tolist(),
            "upper": self.upper.tolist(),
            "wrapper_halfwidth": self.wrapper_halfwidth,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "PlanarCorridor":
        try:
            return cls(
                int(doc["degree"]),
                np.asarray(doc["lower"], dtype=float),
                np.asarray(doc["upper"], dtype=float),
                tuple(doc["domain"]),
                float(doc["wrapper_halfwidth"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise CorridorError(f"invalid planar corridor document: {exc}") from exc

    @classmethod
    def constant(cls, lower: float, upper: float, domain, halfwidth: Optional[float] = None):
        hw = max(abs(lower), abs(upper)) if halfwidth is None else halfwidth
        return cls(0, np.array([float(lower)]), np.array([float(upper)]), tuple(domain), float(hw))


def generate_planar(
    curve: ParametricCurve,
    frames: Optional[FrameField],
    obstacles: Sequence[tuple],
    degree: int,
    n_samples: Optional[int] = None,
    wrapper_halfwidth: float = 1.0,
    domain: Optional[tuple] = None,
) -> PlanarCorridor:
    """Widest polynomial lateral bounds for a planar path.

    ``obstacles`` are ``(xi, eta)`` pairs.  Points with ``eta > 0`` cap the
    upper bound at their progress, points with ``eta < 0`` the lower bound;
    the bounds stay within the wrapper and strictly contain the path.
    """
    if n_samples is None:
        n_samples = default_samples(degree)
    if n_samples < degree + 1:
        raise CorridorError("need at least degree + 1 samples")
    dom = tuple(curve.domain if domain is None else domain)
    k = degree + 1
    xs = np.linspace(dom[0], dom[1], n_samples)
    Bs = cheb.basis(cheb.to_unit(xs, dom), degree)
    zero = np.zeros(k)
    rows, rhs = [], []
    for Bk in Bs:
        rows += [np.concatenate([Bk, zero]), np.concatenate([zero, -Bk])]
        rhs += [wrapper_halfwidth, wrapper_halfwidth]
        rows += [np.concatenate([-Bk, zero]), np.concatenate([zero, Bk])]
        rhs += [-PLANAR_MARGIN, -PLANAR_MARGIN]
    for xi, eta in obstacles:
        if abs(eta) <= PLANAR_MARGIN:
            raise CorridorError(f"obstacle on the path at xi={xi:.6g}")
        if not dom[0] <= xi <= dom[1]:
            continue
        Bk = cheb.basis(cheb.to_unit([xi], dom), degree)[0]
        if eta > 0:
            rows.append(np.concatenate([Bk, zero]))
            rhs.append(eta)
        else:
            rows.append(np.concatenate([zero, -Bk]))
            rhs.append(-eta)
    cost = np.concatenate([-Bs.sum(axis=0), Bs.sum(axis=0)])
    sol = solve_lp(LpProblem(cost, np.array(rows), np.array(rhs), bounds=(None, None)))
    if sol.status != OPTIMAL:
        raise CorridorError(f"planar corridor program {sol.status.lower()}")
    return PlanarCorridor(degree, sol.x[k:], sol.x[:k], dom, float(wrapper_halfwidth))


def load_corridor(path):
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CorridorError(f"{path}: invalid JSON ({exc})") from exc
    if doc.get("kind") == "planar":
        return PlanarCorridor.from_dict(doc)
    return EllipseCorridor.from_dict(doc)
