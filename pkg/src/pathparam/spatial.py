"""Spatial coordinates of points relative to a framed path.

A Cartesian point ``p`` is represented by its progress ``xi`` (the
parameter of the closest curve point) and transverse offsets
``eta = (eta1, eta2)`` along the frame axes ``e2, e3``.  This module
projects and reconstructs points and maps Cartesian velocities to the rates
``(xi_dot, eta1_dot, eta2_dot)``, in the general moving-frame form, the
Frenet-Serret form and the planar form, plus a frame-free rate formula
obtained from the first-order optimality condition of the projection.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .curve import ParametricCurve
from .errors import ProjectionError, SaddlePointError, TubeOfValidityError
from .frames import FrameField, FrameSample, frame_at, lift

TUBE_TOL = 1e-9
PROJECTION_TOL = 1e-10
RESIDUAL_TOL = 1e-8
GLOBAL_SAMPLES = 256


def _vec3(v) -> np.ndarray:
    return lift(np.asarray(v, dtype=float))


@dataclass(frozen=True)
class SpatialState:
    """Progress ``xi`` and transverse offsets ``eta`` (along ``e2``, ``e3``)."""

    xi: float
    eta: np.ndarray
    tangential_residual: float = 0.0
    clamped: bool = False


@dataclass(frozen=True)
class SpatialRates:
    xi_dot: float
    eta1_dot: float
    eta2_dot: float = 0.0


@dataclass(frozen=True)
class ProjectionInfo:
    xi: float
    clamped: bool
    iterations: int
    g: float
    g_prime: float


def _g_terms(curve, p, theta):
    D = lift(curve.derivatives(np.array([theta]), 2))[0]
    d = p - D[0]
    g = -float(d @ D[1])
    gp = float(D[1] @ D[1] - d @ D[2])
    sigma = float(np.linalg.norm(D[1]))
    return g, gp, sigma, float(np.linalg.norm(d))


def closest_point(curve: ParametricCurve, p, xi_guess: float, tol: float = PROJECTION_TOL,
                  max_iter: int = 200, return_info: bool = False):
    """Locally closest curve parameter to ``p`` starting from ``xi_guess``.

    Solves ``g(theta) = (gamma - p) . gamma' = 0`` (the derivative of half
    the squared distance) by Newton's method, safeguarded by bisection once
    a sign change is bracketed and by step expansion otherwise.  Minima at
    the domain ends are returned with ``clamped=True`` (``return_info``).

    Raises
    ------
    SaddlePointError
        The stationary point found is not a minimum (``g' <= 0``).
    ProjectionError
        No convergence within ``max_iter`` iterations.
    """
    p = _vec3(p)
    t0, tf = curve.domain
    theta = float(curve._check_domain(xi_guess))
    span = tf - t0
    lo, hi = None, None
    expand = 0.01 * span
    for it in range(1, max_iter + 1):
        g, gp, sigma, dist = _g_terms(curve, p, theta)
        if abs(g) <= tol * sigma * max(1.0, dist):
            if gp <= 0:
                raise SaddlePointError(
                    f"stationary point at xi={theta:.12g} is not a distance minimum; re-seed the projection"
                )
            info = ProjectionInfo(theta, False, it, g, gp)
            return info if return_info else theta
        if (theta == t0 and g > 0) or (theta == tf and g < 0):
            info = ProjectionInfo(theta, True, it, g, gp)
            return info if return_info else theta
        if g < 0:
            lo = theta
        else:
            hi = theta
        cand = theta - g / gp if gp > 0 else None
        if lo is not None and hi is not None:
            if cand is None or not (min(lo, hi) < cand < max(lo, hi)):
                cand = 0.5 * (lo + hi)
        else:
            direction = 1.0 if g < 0 else -1.0
            if cand is None or abs(cand - theta) > expand:
                cand = theta + direction * expand
                expand *= 2.0
        cand = min(max(cand, t0), tf)
        if cand == theta:
            break
        theta = cand
    raise ProjectionError(f"closest-point search did not converge from xi_guess={xi_guess}")


def global_project(curve: ParametricCurve, p, samples: int = GLOBAL_SAMPLES, return_info: bool = False):
    """Closest parameter seeded from a coarse uniform-grid argmin."""
    p = _vec3(p)
    grid = np.linspace(*curve.domain, samples)
    pts = lift(curve.eval(grid))
    seed = grid[int(np.argmin(np.linalg.norm(pts - p, axis=1)))]
    return closest_point(curve, p, seed, return_info=return_info)


def _frame(frames, xi) -> FrameSample:
    return frame_at(frames, xi)


def project(curve: ParametricCurve, frames: FrameField, p, xi_guess: Optional[float] = None) -> SpatialState:
    """Spatial coordinates of ``p``; ``xi_guess=None`` seeds globally."""
    p = _vec3(p)
    if xi_guess is None:
        info = global_project(curve, p, return_info=True)
    else:
        info = closest_point(curve, p, xi_guess, return_info=True)
    sample = _frame(frames, info.xi)
    d = p - lift(curve.eval(info.xi))
    resid = float(sample.e1 @ d)
    if not info.clamped and abs(resid) > RESIDUAL_TOL * max(1.0, float(np.linalg.norm(d))):
        raise ProjectionError(f"projection leaves tangential residual {resid:.3g}")
    eta = np.array([sample.e2 @ d, sample.e3 @ d])
    return SpatialState(info.xi, eta, resid, info.clamped)


def reconstruct(curve: ParametricCurve, frames: FrameField, s: SpatialState) -> np.ndarray:
    """Cartesian point ``gamma(xi) + R(xi) [0, eta1, eta2]``."""
    sample = _frame(frames, s.xi)
    eta = np.asarray(s.eta, dtype=float)
    return lift(curve.eval(s.xi)) + sample.R @ np.array([0.0, eta[0], eta[1]])


def _check_tube(den, scale):
    if abs(den) <= TUBE_TOL * scale:
        raise TubeOfValidityError("point at the local centre of curvature; projection rate undefined")


def spatial_rates(sample: FrameSample, sigma: float, s: SpatialState, v_world) -> SpatialRates:
    """Rates of spatial coordinates for a point moving with velocity ``v_world``.

    ``sample`` provides the frame ``R = [e1 e2 e3]`` and the path-frame
    angular velocity ``omega_path`` (per unit parameter) at ``s.xi``.
    """
    v = _vec3(v_world)
    R = sample.R
    w1, w2, w3 = sample.omega_path
    eta1, eta2 = s.eta
    den = sigma - w3 * eta1 + w2 * eta2
    _check_tube(den, sigma)
    xi_dot = float(R[:, 0] @ v) / den
    return SpatialRates(
        xi_dot,
        float(R[:, 1] @ v) + xi_dot * w1 * eta2,
        float(R[:, 2] @ v) - xi_dot * w1 * eta1,
    )


def spatial_rates_fsf(kappa: float, tau: float, R, s: SpatialState, v_world) -> SpatialRates:
    """Rates in a Frenet-Serret frame for an arc-length parameterised path."""
    v = _vec3(v_world)
    R = np.asarray(R, dtype=float)
    eta1, eta2 = s.eta
    den = 1.0 - kappa * eta1
    _check_tube(den, 1.0)
    xi_dot = float(R[:, 0] @ v) / den
    return SpatialRates(
        xi_dot,
        float(R[:, 1] @ v) + xi_dot * tau * eta2,
        float(R[:, 2] @ v) - xi_dot * tau * eta1,
    )


def spatial_rates_planar(sigma: float, omega3: float, e1, e2, eta1: float, v_world):
    """Planar rates ``(xi_dot, eta1_dot)``; ``omega3`` is the in-plane turn rate."""
    v = np.asarray(v_world, dtype=float)
    e1 = np.asarray(e1, dtype=float)[: len(v)]
    e2 = np.asarray(e2, dtype=float)[: len(v)]
    den = sigma - omega3 * eta1
    _check_tube(den, sigma)
    return float(e1 @ v) / den, float(e2 @ v)


def xidot_optimality(curve: ParametricCurve, p, v_world, xi: float) -> float:
    """Progress rate ``v . gamma' / (sigma^2 - d . gamma'')`` without frames."""
    p = _vec3(p)
    v = _vec3(v_world)
    D = lift(curve.derivatives(np.array([xi]), 2))[0]
    d = p - D[0]
    sigma2 = float(D[1] @ D[1])
    den = sigma2 - float(d @ D[2])
    _check_tube(den, sigma2)
    return float(v @ D[1]) / den


def closest_point_batch(curve: ParametricCurve, points, seeds=None, samples: int = GLOBAL_SAMPLES,
                        iterations: int = 30):
    """Vectorised closest-point search for many points.

    Seeds default to the coarse-grid argmin.  Damped Newton iterations run
    on all points at once; points that do not meet the convergence test are
    finished with :func:`closest_point`.  Returns ``(xi, clamped)``.
    """
    P = lift(np.atleast_2d(np.asarray(points, dtype=float)))
    t0, tf = curve.domain
    if seeds is None:
        grid = np.linspace(t0, tf, samples)
        G = lift(curve.eval(grid))
        # squared distances via |p|^2 - 2 p.g + |g|^2 (the |p|^2 term is constant per row),
        # in chunks to bound the size of the distance matrix
        g2 = (G * G).sum(axis=1)[None, :]
        chunk = 1 << 14
        seeds = np.concatenate(
            [grid[np.argmin(g2 - 2.0 * P[k:k + chunk] @ G.T, axis=1)] for k in range(0, len(P), chunk)]
        ) if len(P) else np.zeros(0)
    theta = np.asarray(seeds, dtype=float).copy()
    max_step = 2.0 * (tf - t0) / samples
    active = np.arange(len(P))
    for _ in range(iterations):
        th = theta[active]
        D = lift(curve.derivatives(th, 2))
        d = P[active] - D[:, 0]
        g = -_rowdot(d, D[:, 1])
        gp = _rowdot(D[:, 1], D[:, 1]) - _rowdot(d, D[:, 2])
        step = np.where(gp > 0, -g / np.where(gp > 0, gp, 1.0), -np.sign(g) * max_step)
        step = np.clip(step, -max_step, max_step)
        new = np.clip(th + step, t0, tf)
        theta[active] = new
        moving = np.abs(new - th) > 1e-14 * (1.0 + np.abs(th))
        active = active[moving]
        if len(active) == 0:
            break
    D = lift(curve.derivatives(theta, 2))
    d = P - D[:, 0]
    g = -_rowdot(d, D[:, 1])
    gp = _rowdot(D[:, 1], D[:, 1]) - _rowdot(d, D[:, 2])
    sigma = np.linalg.norm(D[:, 1], axis=1)
    at_end = ((theta == t0) & (g > 0)) | ((theta == tf) & (g < 0))
    ok = (np.abs(g) <= PROJECTION_TOL * sigma * np.maximum(1.0, np.linalg.norm(d, axis=1))) & (gp > 0)
    clamped = at_end.copy()
    for k in np.nonzero(~ok & ~at_end)[0]:
        info = closest_point(curve, P[k], theta[k], return_info=True)
        theta[k] = info.xi
        clamped[k] = info.clamped
    return theta, clamped


def _rowdot(a, b):
    return np.einsum("ij,ij->i", a, b)
