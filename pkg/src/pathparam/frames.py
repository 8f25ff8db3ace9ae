"""Adapted moving frames along a curve.

Two frame kinds are provided:

* Frenet-Serret frames (FSF), defined pointwise from curve derivatives but
  singular wherever the curvature vanishes.
* Parallel transport frames (PTF), obtained by integrating the twist-free
  angular velocity ``omega = e1 x e1'`` on SO(3) with exponential steps
  (:func:`ptfi`) and enriched with frame derivatives, angular acceleration
  and angular jerk (:func:`ptfd`).

Planar curves are lifted to 3D with ``z = 0``.  All angular rates are per
unit path parameter, not per unit time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .curve import ParametricCurve, rejoin_at
from .errors import (
    ContinuityError,
    DomainError,
    FrenetSingularityError,
    PreconditionError,
    StepSizeError,
)

FSF_SINGULAR_TOL = 1e-9
SMALL_ANGLE = 1e-8
ADAPT_TOL = 1e-9


def skew(w) -> np.ndarray:
    """Cross-product matrix: ``skew(w) @ v == np.cross(w, v)``.

    Works on a single vector or a stack of shape ``(n, 3)``.
    """
    w = np.asarray(w, dtype=float)
    out = np.zeros(w.shape[:-1] + (3, 3))
    out[..., 0, 1] = -w[..., 2]
    out[..., 0, 2] = w[..., 1]
    out[..., 1, 0] = w[..., 2]
    out[..., 1, 2] = -w[..., 0]
    out[..., 2, 0] = -w[..., 1]
    out[..., 2, 1] = w[..., 0]
    return out


def exp_so3(w, dtheta) -> np.ndarray:
    """``exp(skew(w) * dtheta)`` by Rodrigues' formula (vectorised over rows).

    Raises
    ------
    StepSizeError
        If any step rotates by ``pi`` or more.
    """
    w = np.asarray(w, dtype=float)
    dtheta = np.asarray(dtheta, dtype=float)
    phi_vec = w * dtheta[..., None] if dtheta.ndim else w * dtheta
    phi = np.linalg.norm(phi_vec, axis=-1)
    if np.any(phi >= math.pi):
        raise StepSizeError("exponential step rotates by half a turn or more; refine the grid")
    K = skew(phi_vec)
    K2 = K @ K
    small = phi < SMALL_ANGLE
    safe = np.where(small, 1.0, phi)
    a = np.where(small, 1.0, np.sin(safe) / safe)
    b = np.where(small, 0.5, (1.0 - np.cos(safe)) / safe**2)
    return np.eye(3) + a[..., None, None] * K + b[..., None, None] * K2


def so3_exp_step(R, omega_world, dtheta: float) -> np.ndarray:
    """Advance a rotation by one exponential step ``exp(Omega dtheta) R``."""
    return exp_so3(omega_world, dtheta) @ np.asarray(R, dtype=float)


def lift(values: np.ndarray) -> np.ndarray:
    """Pad planar vectors (last axis of length 2) with a zero ``z``."""
    if values.shape[-1] == 3:
        return values
    pad = [(0, 0)] * (values.ndim - 1) + [(0, 1)]
    return np.pad(values, pad)


def curve_derivatives(curve: ParametricCurve, theta, max_order: int = 4, side: str = "right"):
    """Lifted derivatives of the curve, shape ``(n, max_order + 1, 3)``."""
    return lift(curve.derivatives(theta, max_order, side))


def _dot(a, b):
    return np.einsum("...i,...i->...", a, b)


def tangent_derivatives(D: np.ndarray) -> np.ndarray:
    """Unit tangent ``e1`` and its derivatives from curve derivatives.

    Parameters
    ----------
    D : (n, k + 2, 3)
        Curve derivatives ``gamma, gamma', ..., gamma^(k+1)`` with ``k <= 3``.

    Returns
    -------
    (n, k + 1, 3) array ``e1, e1', ..., e1^(k)``.
    """
    k = D.shape[1] - 2
    u = [D[:, j + 1] for j in range(k + 1)]
    sig = np.linalg.norm(u[0], axis=1)
    s = [sig]
    if k >= 1:
        s.append(_dot(u[0], u[1]) / sig)
    if k >= 2:
        s.append((_dot(u[1], u[1]) + _dot(u[0], u[2]) - s[1] ** 2) / sig)
    if k >= 3:
        s.append((3 * _dot(u[1], u[2]) + _dot(u[0], u[3]) - 3 * s[1] * s[2]) / sig)
    w = [1.0 / sig]
    if k >= 1:
        w.append(-s[1] / sig**2)
    if k >= 2:
        w.append((2 * s[1] ** 2 - sig * s[2]) / sig**3)
    if k >= 3:
        w.append((-6 * s[1] ** 3 + 6 * sig * s[1] * s[2] - sig**2 * s[3]) / sig**4)
    out = np.empty((D.shape[0], k + 1, 3))
    for m in range(k + 1):
        acc = np.zeros((D.shape[0], 3))
        for j in range(m + 1):
            acc += math.comb(m, j) * u[j] * w[m - j][:, None]
        out[:, m] = acc
    return out


def ptf_world_rates(curve: ParametricCurve, theta, side: str = "right"):
    """Frame-independent PTF rates ``(omega, alpha, jerk)`` in world axes.

    For a parallel transport frame ``omega = e1 x e1'``, hence
    ``alpha = e1 x e1''`` and ``jerk = e1 x e1''' + e1' x e1''``.  Derivatives
    are one-sided (``side``) so jumps at knots can be measured.
    """
    T = tangent_derivatives(curve_derivatives(curve, theta, 4, side))
    e1, d1, d2, d3 = T[:, 0], T[:, 1], T[:, 2], T[:, 3]
    return np.cross(e1, d1), np.cross(e1, d2), np.cross(e1, d3) + np.cross(d1, d2)


@dataclass(frozen=True)
class FrameSample:
    """One adapted frame with its rates (per unit path parameter)."""

    theta: float
    R: np.ndarray
    omega_path: np.ndarray
    omega_world: np.ndarray
    alpha_world: Optional[np.ndarray] = None
    jerk_world: Optional[np.ndarray] = None
    R_prime: Optional[np.ndarray] = None
    R_dprime: Optional[np.ndarray] = None

    @property
    def e1(self):
        return self.R[:, 0]

    @property
    def e2(self):
        return self.R[:, 1]

    @property
    def e3(self):
        return self.R[:, 2]


@dataclass(frozen=True)
class FrameField:
    """Frames on a grid; arrays are stacked along the first axis.

    ``drift`` holds, per node, the angle between the integrated tangent and
    the exact tangent before re-adaptation (zero for FSF).  ``singular``
    flags FSF nodes where the frame is undefined (their arrays are NaN).
    """

    kind: str
    grid: np.ndarray
    R: np.ndarray
    omega_path: np.ndarray
    omega_world: np.ndarray
    curve: ParametricCurve
    drift: Optional[np.ndarray] = None
    singular: Optional[np.ndarray] = None
    alpha_path: Optional[np.ndarray] = None
    alpha_world: Optional[np.ndarray] = None
    jerk_path: Optional[np.ndarray] = None
    jerk_world: Optional[np.ndarray] = None
    R_prime: Optional[np.ndarray] = None
    R_dprime: Optional[np.ndarray] = None
    readapt: bool = True

    def __len__(self):
        return len(self.grid)

    def sample(self, i: int) -> FrameSample:
        def pick(arr):
            return None if arr is None else arr[i].copy()

        return FrameSample(
            float(self.grid[i]),
            self.R[i].copy(),
            self.omega_path[i].copy(),
            self.omega_world[i].copy(),
            pick(self.alpha_world),
            pick(self.jerk_world),
            pick(self.R_prime),
            pick(self.R_dprime),
        )

    def to_rows(self) -> np.ndarray:
        """Table ``theta, R (row-major 9), omega_path (3), omega/alpha/jerk world (9)``."""
        n = len(self.grid)
        nan3 = np.full((n, 3), np.nan)
        alpha = self.alpha_world if self.alpha_world is not None else nan3
        jerk = self.jerk_world if self.jerk_world is not None else nan3
        return np.column_stack(
            [self.grid, self.R.reshape(n, 9), self.omega_path, self.omega_world, alpha, jerk]
        )

    CSV_HEADER = (
        ["theta"]
        + [f"R{r}{c}" for r in range(1, 4) for c in range(1, 4)]
        + ["wG1", "wG2", "wG3", "w1", "w2", "w3", "a1", "a2", "a3", "j1", "j2", "j3"]
    )


def default_grid(curve: ParametricCurve, spacing: float = 1e-3) -> np.ndarray:
    """Uniform grid with spacing ``spacing`` times the domain length."""
    t0, tf = curve.domain
    n = int(round(1.0 / spacing))
    return np.linspace(t0, tf, n + 1)


def _check_grid(curve, grid):
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or len(grid) < 2 or np.any(np.diff(grid) <= 0):
        raise PreconditionError("frame grid must be strictly increasing with at least two nodes")
    t0, tf = curve.domain
    if grid[0] < t0 or grid[-1] > tf:
        raise DomainError("frame grid leaves the curve domain")
    return grid


# ---------------------------------------------------------------- Frenet-Serret


def fsf_frame(curve: ParametricCurve, theta: float) -> FrameSample:
    """Frenet-Serret frame with ``omega_path = sigma * [tau, 0, kappa]``."""
    field = fsf_field(curve, np.array([float(theta)]), strict=True)
    return field.sample(0)


def curvature_torsion(curve: ParametricCurve, theta):
    """Curvature and signed torsion (lifted planar curves have zero torsion)."""
    D = curve_derivatives(curve, np.atleast_1d(theta), 3)
    d1, d2, d3 = D[:, 1], D[:, 2], D[:, 3]
    b = np.cross(d1, d2)
    nb = np.linalg.norm(b, axis=1)
    sig = np.linalg.norm(d1, axis=1)
    if np.any(nb < FSF_SINGULAR_TOL * sig**3):
        raise FrenetSingularityError("curvature vanishes; Frenet-Serret frame undefined")
    return nb / sig**3, _dot(b, d3) / nb**2


def fsf_field(curve: ParametricCurve, grid, strict: bool = True) -> FrameField:
    """Frenet-Serret frames on a grid.

    With ``strict=False`` singular nodes are flagged in ``singular`` and
    filled with NaN instead of raising :class:`FrenetSingularityError`.
    """
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    grid = _check_grid(curve, grid) if len(grid) > 1 else np.atleast_1d(curve._check_domain(grid))
    D = curve_derivatives(curve, grid, 3)
    d1, d2, d3 = D[:, 1], D[:, 2], D[:, 3]
    sig = np.linalg.norm(d1, axis=1)
    b = np.cross(d1, d2)
    nb = np.linalg.norm(b, axis=1)
    singular = nb < FSF_SINGULAR_TOL * sig**3
    if strict and np.any(singular):
        at = grid[np.argmax(singular)]
        raise FrenetSingularityError(f"curvature vanishes at theta={at:.6g}; Frenet-Serret frame undefined")
    nb_safe = np.where(singular, 1.0, nb)
    e1 = d1 / sig[:, None]
    e3 = b / nb_safe[:, None]
    e2 = np.cross(e3, e1)
    R = np.stack([e1, e2, e3], axis=2)
    kappa = nb / sig**3
    tau = _dot(b, d3) / nb_safe**2
    omega_path = sig[:, None] * np.column_stack([tau, np.zeros_like(tau), kappa])
    omega_world = np.einsum("nij,nj->ni", R, omega_path)
    R[singular] = np.nan
    omega_path[singular] = np.nan
    omega_world[singular] = np.nan
    return FrameField("FSF", grid, R, omega_path, omega_world, curve, drift=np.zeros(len(grid)), singular=singular)


def count_flips(field: FrameField) -> int:
    """Number of consecutive nodes where the normal axis ``e2`` reverses."""
    e2 = field.R[:, :, 1]
    dots = _dot(e2[:-1], e2[1:])
    return int(np.sum(~(dots > 0)))


# ---------------------------------------------------------- parallel transport


def ptf_angular_velocity(e1_prime, R) -> np.ndarray:
    """Path-frame angular velocity ``[0, -e1'.e3, e1'.e2]`` of a PTF."""
    e1_prime = np.asarray(e1_prime, dtype=float)
    R = np.asarray(R, dtype=float)
    return np.array([0.0, -float(e1_prime @ R[:, 2]), float(e1_prime @ R[:, 1])])


def initial_frame_from_tangent(e1, planar: bool = False) -> np.ndarray:
    """Deterministic adapted frame for a given unit tangent.

    ``e2`` is the normalised projection of the world axis least aligned with
    ``e1`` (lowest index on ties) onto the normal plane.  For planar curves
    ``e3 = z`` and ``e2 = z x e1`` so the first transverse axis stays in the
    plane.
    """
    e1 = np.asarray(e1, dtype=float)
    e1 = e1 / np.linalg.norm(e1)
    if planar:
        e3 = np.array([0.0, 0.0, 1.0])
        e2 = np.cross(e3, e1)
        e2 /= np.linalg.norm(e2)
        return np.column_stack([e1, e2, e3])
    a = np.zeros(3)
    a[int(np.argmin(np.abs(e1)))] = 1.0
    e2 = a - (a @ e1) * e1
    e2 /= np.linalg.norm(e2)
    return np.column_stack([e1, e2, np.cross(e1, e2)])


def initial_frame(curve: ParametricCurve) -> np.ndarray:
    """Adapted starting rotation at ``theta0`` (see :func:`initial_frame_from_tangent`)."""
    d1 = lift(curve.eval(curve.domain[0], 1))
    return initial_frame_from_tangent(d1, planar=curve.dimension == 2)


def ptfi(
    curve: ParametricCurve,
    grid=None,
    R0: Optional[np.ndarray] = None,
    readapt: bool = True,
) -> FrameField:
    """Parallel transport frames by exponential integration on SO(3).

    The world angular velocity ``e1 x e1'`` is held constant on each grid
    interval and the frame is advanced with one exact exponential step; the
    result is stored at the next node.  With ``readapt=True`` (default) the
    integrated tangent is replaced by the exact tangent after each step and
    ``e2`` is re-orthogonalised; the pre-correction tangent error is
    recorded in ``drift``.  ``readapt=False`` integrates open loop.
    """
    grid = _check_grid(curve, default_grid(curve) if grid is None else grid)
    D = curve_derivatives(curve, grid, 2)
    T = tangent_derivatives(D)
    e1, e1p = T[:, 0], T[:, 1]
    if R0 is None:
        R0 = initial_frame(curve)
    R0 = np.asarray(R0, dtype=float)
    if R0.shape != (3, 3) or np.linalg.norm(R0.T @ R0 - np.eye(3)) > ADAPT_TOL or np.linalg.det(R0) < 0:
        raise PreconditionError("R0 must be a proper rotation")
    if np.linalg.norm(R0[:, 0] - e1[0]) > ADAPT_TOL:
        raise PreconditionError("R0 is not adapted: its first column differs from the unit tangent")
    dtheta = np.diff(grid)
    n = len(grid)
    if readapt:
        wworld = np.cross(e1, e1p)
        steps = exp_so3(wworld[:-1], dtheta)
        pred = np.einsum("nij,nj->ni", steps, e1[:-1])
        drift = np.zeros(n)
        drift[1:] = np.arccos(np.clip(_dot(pred, e1[1:]), -1.0, 1.0))
        e2 = np.empty((n, 3))
        e2[0] = R0[:, 1]
        M = steps.tolist()
        tl = e1.tolist()
        x, y, z = R0[:, 1].tolist()
        for i in range(n - 1):
            (a, b, c), (d, e, f), (g, h, k) = M[i]
            x, y, z = a * x + b * y + c * z, d * x + e * y + f * z, g * x + h * y + k * z
            tx, ty, tz = tl[i + 1]
            p = x * tx + y * ty + z * tz
            x, y, z = x - p * tx, y - p * ty, z - p * tz
            nrm = math.sqrt(x * x + y * y + z * z)
            x, y, z = x / nrm, y / nrm, z / nrm
            e2[i + 1] = (x, y, z)
        e3 = np.cross(e1, e2)
        R = np.stack([e1, e2, e3], axis=2)
    else:
        # scalar Rodrigues steps (same update as exp_so3, without per-step array overhead)
        cols = R0.T.tolist()
        dp = e1p.tolist()
        dt = dtheta.tolist()
        history = []
        for i in range(n):
            history.append(cols)
            if i + 1 == n:
                break
            (x1, y1, z1), (x2, y2, z2), (x3, y3, z3) = cols
            px, py, pz = dp[i]
            a = -(px * x3 + py * y3 + pz * z3)
            b = px * x2 + py * y2 + pz * z2
            kx, ky, kz = (a * x2 + b * x3) * dt[i], (a * y2 + b * y3) * dt[i], (a * z2 + b * z3) * dt[i]
            phi = math.sqrt(kx * kx + ky * ky + kz * kz)
            if phi >= math.pi:
                raise StepSizeError("exponential step rotates by half a turn or more; refine the grid")
            if phi < SMALL_ANGLE:
                ca, cb = 1.0, 0.5
            else:
                ca, cb = math.sin(phi) / phi, (1.0 - math.cos(phi)) / (phi * phi)
            new = []
            for vx, vy, vz in cols:
                cx, cy, cz = ky * vz - kz * vy, kz * vx - kx * vz, kx * vy - ky * vx
                ccx, ccy, ccz = ky * cz - kz * cy, kz * cx - kx * cz, kx * cy - ky * cx
                new.append((vx + ca * cx + cb * ccx, vy + ca * cy + cb * ccy, vz + ca * cz + cb * ccz))
            cols = new
        R = np.transpose(np.array(history), (0, 2, 1))
        wg = np.zeros((n, 3))
        wg[:, 1] = -_dot(e1p, R[:, :, 2])
        wg[:, 2] = _dot(e1p, R[:, :, 1])
        wworld = np.einsum("nij,nj->ni", R, wg)
        drift = np.arccos(np.clip(_dot(R[:, :, 0], e1), -1.0, 1.0))
        drift[0] = 0.0
    omega_path = np.zeros((n, 3))
    omega_path[:, 1] = -_dot(e1p, R[:, :, 2])
    omega_path[:, 2] = _dot(e1p, R[:, :, 1])
    omega_world = np.einsum("nij,nj->ni", R, omega_path)
    return FrameField("PTF", grid, R, omega_path, omega_world, curve, drift=drift, readapt=readapt)


def ptfd(field: FrameField, curve: Optional[ParametricCurve] = None, strict: bool = True) -> FrameField:
    """Enrich a PTF field with ``R'``, ``alpha``, ``R''`` and jerk.

    ``alpha`` needs a C^3 curve and jerk a C^4 curve; with ``strict=True`` a
    lower declared class raises :class:`ContinuityError`.  With
    ``strict=False`` one-sided (right) derivatives are used at knots.
    """
    curve = field.curve if curve is None else curve
    if strict and curve.continuity < 4:
        needed = 3 if curve.continuity < 3 else 4
        raise ContinuityError(needed, curve.continuity, "angular acceleration" if needed == 3 else "angular jerk")
    T = tangent_derivatives(curve_derivatives(curve, field.grid, 4))
    _, d1, d2, d3 = T[:, 0], T[:, 1], T[:, 2], T[:, 3]
    R = field.R
    e2, e3 = R[:, :, 1], R[:, :, 2]
    wg = np.zeros_like(d1)
    wg[:, 1] = -_dot(d1, e3)
    wg[:, 2] = _dot(d1, e2)
    Om = skew(np.einsum("nij,nj->ni", R, wg))
    Rp = Om @ R
    e2p, e3p = Rp[:, :, 1], Rp[:, :, 2]
    ag = np.zeros_like(d1)
    ag[:, 1] = -(_dot(d2, e3) + _dot(d1, e3p))
    ag[:, 2] = _dot(d2, e2) + _dot(d1, e2p)
    aw = np.einsum("nij,nj->ni", R, ag) + np.einsum("nij,nj->ni", Rp, wg)
    Rpp = skew(aw) @ R + Om @ Rp
    e2pp, e3pp = Rpp[:, :, 1], Rpp[:, :, 2]
    jg = np.zeros_like(d1)
    jg[:, 1] = -(_dot(d3, e3) + 2 * _dot(d2, e3p) + _dot(d1, e3pp))
    jg[:, 2] = _dot(d3, e2) + 2 * _dot(d2, e2p) + _dot(d1, e2pp)
    jw = (
        np.einsum("nij,nj->ni", R, jg)
        + 2 * np.einsum("nij,nj->ni", Rp, ag)
        + np.einsum("nij,nj->ni", Rpp, wg)
    )
    return replace(
        field,
        alpha_path=ag,
        alpha_world=aw,
        jerk_path=jg,
        jerk_world=jw,
        R_prime=Rp,
        R_dprime=Rpp,
    )


def frame_at(field: FrameField, theta: float) -> FrameSample:
    """Frame at an arbitrary parameter inside the grid span.

    Grid nodes return the stored sample.  Otherwise one exponential step
    with the lower node's angular velocity is taken (then re-adapted to the
    exact tangent when the field was re-adapted) and the rates are
    evaluated at ``theta``.
    """
    grid = field.grid
    theta = float(theta)
    if not grid[0] <= theta <= grid[-1]:
        raise DomainError(f"theta={theta} outside frame grid [{grid[0]}, {grid[-1]}]")
    i = int(np.searchsorted(grid, theta, side="right")) - 1
    if grid[min(i, len(grid) - 1)] == theta:
        return field.sample(min(i, len(grid) - 1))
    if field.kind == "FSF":
        return fsf_frame(field.curve, theta)
    R = exp_so3(field.omega_world[i], theta - grid[i]) @ field.R[i]
    T = tangent_derivatives(curve_derivatives(field.curve, np.array([theta]), 2))
    e1, e1p = T[0, 0], T[0, 1]
    if field.readapt:
        e2 = R[:, 1] - (R[:, 1] @ e1) * e1
        e2 /= np.linalg.norm(e2)
        R = np.column_stack([e1, e2, np.cross(e1, e2)])
    wg = ptf_angular_velocity(e1p, R)
    return FrameSample(theta, R, wg, R @ wg)


def frames_at(field: FrameField, thetas) -> np.ndarray:
    """Rotations at several parameters, shape ``(n, 3, 3)``."""
    return np.stack([frame_at(field, t).R for t in np.atleast_1d(thetas)])


def frame_batch(field: FrameField, thetas) -> np.ndarray:
    """Vectorised :func:`frame_at` returning only the rotations, ``(n, 3, 3)``."""
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    grid = field.grid
    if np.any(thetas < grid[0]) or np.any(thetas > grid[-1]):
        raise DomainError("theta outside frame grid")
    if field.kind == "FSF":
        return fsf_field(field.curve, thetas, strict=True).R if len(thetas) > 1 else frames_at(field, thetas)
    i = np.clip(np.searchsorted(grid, thetas, side="right") - 1, 0, len(grid) - 1)
    R = exp_so3(field.omega_world[i], thetas - grid[i]) @ field.R[i]
    if not field.readapt:
        return R
    e1 = tangent_derivatives(curve_derivatives(field.curve, thetas, 1))[:, 0]
    e2 = R[:, :, 1] - _dot(R[:, :, 1], e1)[:, None] * e1
    e2 /= np.linalg.norm(e2, axis=1)[:, None]
    return np.stack([e1, e2, np.cross(e1, e2)], axis=2)


RATE_NAMES = ("omega", "alpha", "jerk")


@dataclass
class ContinuityStudy:
    """PTF rate jumps across the joint of a re-interpolated curve.

    ``jumps[k]`` is the norm of the difference between the left and right
    limits of rate ``RATE_NAMES[k]`` at ``split``; ``scales[k]`` the larger of
    the two one-sided norms.  A rate counts as continuous when its jump is
    below ``tol * max(1, scale)``.
    """

    continuity: int
    split: float
    jumps: np.ndarray
    scales: np.ndarray
    tol: float
    curve: ParametricCurve

    @property
    def continuous(self) -> dict:
        return {n: bool(j <= self.tol * max(1.0, s)) for n, j, s in zip(RATE_NAMES, self.jumps, self.scales)}

    def traces(self, grid) -> np.ndarray:
        """Rows ``theta, omega (3), alpha (3), jerk (3)`` along ``grid`` (right limits)."""
        grid = np.asarray(grid, dtype=float)
        w, a, j = ptf_world_rates(self.curve, grid)
        return np.column_stack([grid, w, a, j])


def continuity_study(curve: ParametricCurve, continuity: int, split: float = 0.5, tol: float = 1e-6,
                     per_section: int = 6) -> ContinuityStudy:
    """Split ``curve``, rebuild it at class ``continuity`` and measure the PTF rate jumps."""
    if continuity not in range(0, 5):
        raise PreconditionError("continuity class must be one of 0..4")
    rebuilt = rejoin_at(curve, split, continuity, per_section)
    left = ptf_world_rates(rebuilt, np.array([split]), side="left")
    right = ptf_world_rates(rebuilt, np.array([split]), side="right")
    jumps = np.array([np.linalg.norm(lv - rv) for lv, rv in zip(left, right)])
    scales = np.array([max(np.linalg.norm(lv), np.linalg.norm(rv)) for lv, rv in zip(left, right)])
    return ContinuityStudy(continuity, float(split), jumps, scales, float(tol), rebuilt)
