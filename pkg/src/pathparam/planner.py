"""Spatial-domain time-optimal planning inside a planar corridor.

The state is ``x = [xi, eta, xi_dot, eta_dot, q1, q2, q1_dot, q2_dot]`` and
the input ``u = [q1_ddot, q2_ddot]``.  The path parameter is the
independent variable: node ``i`` sits at the fixed progress
``xi_i = xi0 + i * dxi`` and the time ``h_i`` the end-effector takes to go
from ``xi_i`` to ``xi_{i+1}`` is a decision variable, so the minimum-time
cost is ``T = sum_i h_i``.  Between nodes the joints follow
the exact double-integrator motion over ``h_i``; at each node the joint
state must reproduce the spatial state (position and velocity consistency
through the forward kinematics and the planar spatial rates).  Corridor
bounds, joint rate/acceleration bounds and boundary conditions are simple
bounds; the Cartesian velocity bound is a nonlinear inequality.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sps

from .curve import ParametricCurve
from .errors import StallError, TranscriptionError
from .nlp import AlOptions, NlpProblem, SolverReport, solve_augmented_lagrangian
from .spatial import spatial_rates_planar

EPS_XI_DOT = 1e-4
DEFAULT_RHO0 = 1e3
NX, NU = 8, 2
XI, ETA, XID, ETAD, Q1, Q2, QD1, QD2 = range(8)


# ------------------------------------------------------------------ models


@dataclass(frozen=True)
class ManipulatorModel:
    """Planar two-link arm with absolute joint angles.

    End-effector position ``[L1 cos q1 + L2 cos q2, L1 sin q1 + L2 sin q2]``.
    """

    L1: float = 1.0
    L2: float = 1.0
    qd_max: float = 1.0
    u_max: float = 5.0
    v_max: float = 1.0

    def __post_init__(self):
        if not (self.L1 > 0 and self.L2 > 0):
            raise TranscriptionError("link lengths must be positive")

    def fk(self, q):
        q = np.atleast_2d(q)
        return np.column_stack(
            [self.L1 * np.cos(q[:, 0]) + self.L2 * np.cos(q[:, 1]),
             self.L1 * np.sin(q[:, 0]) + self.L2 * np.sin(q[:, 1])]
        )

    def jac(self, q):
        q = np.atleast_2d(q)
        J = np.empty((len(q), 2, 2))
        J[:, 0, 0] = -self.L1 * np.sin(q[:, 0])
        J[:, 0, 1] = -self.L2 * np.sin(q[:, 1])
        J[:, 1, 0] = self.L1 * np.cos(q[:, 0])
        J[:, 1, 1] = self.L2 * np.cos(q[:, 1])
        return J

    def velocity_dq(self, q, qd):
        """``d(J(q) qd)/dq``, shape ``(n, 2, 2)``."""
        q, qd = np.atleast_2d(q), np.atleast_2d(qd)
        out = np.empty((len(q), 2, 2))
        out[:, 0, 0] = -self.L1 * np.cos(q[:, 0]) * qd[:, 0]
        out[:, 0, 1] = -self.L2 * np.cos(q[:, 1]) * qd[:, 1]
        out[:, 1, 0] = -self.L1 * np.sin(q[:, 0]) * qd[:, 0]
        out[:, 1, 1] = -self.L2 * np.sin(q[:, 1]) * qd[:, 1]
        return out

    def jdot_qd(self, q, qd):
        """``dJ/dt qd`` (velocity-product acceleration term)."""
        q, qd = np.atleast_2d(q), np.atleast_2d(qd)
        return np.column_stack(
            [-self.L1 * np.cos(q[:, 0]) * qd[:, 0] ** 2 - self.L2 * np.cos(q[:, 1]) * qd[:, 1] ** 2,
             -self.L1 * np.sin(q[:, 0]) * qd[:, 0] ** 2 - self.L2 * np.sin(q[:, 1]) * qd[:, 1] ** 2]
        )

    def ik(self, p):
        """Elbow-up inverse kinematics (absolute angles), continuous along a path."""
        p = np.atleast_2d(np.asarray(p, dtype=float))
        r = np.linalg.norm(p, axis=1)
        L1, L2 = self.L1, self.L2
        if np.any(r > L1 + L2 - 1e-9) or np.any(r < abs(L1 - L2) + 1e-9):
            raise TranscriptionError("path leaves the reachable workspace of the manipulator")
        phi = np.arctan2(p[:, 1], p[:, 0])
        b1 = np.arccos(np.clip((L1**2 + r**2 - L2**2) / (2 * L1 * r), -1, 1))
        b2 = np.arccos(np.clip((L2**2 + r**2 - L1**2) / (2 * L2 * r), -1, 1))
        return np.column_stack([np.unwrap(phi + b1), np.unwrap(phi - b2)])


def manipulator_velocity(model: ManipulatorModel, state) -> np.ndarray:
    """End-effector velocity from joint angles and rates of a full state."""
    s = np.asarray(state, dtype=float)
    return (model.jac(s[[Q1, Q2]])[0] @ s[[QD1, QD2]])


@dataclass(frozen=True)
class PointMassModel:
    """Planar double integrator: the 'joints' are the Cartesian coordinates."""

    qd_max: float = 10.0
    u_max: float = 5.0
    v_max: float = 10.0

    def fk(self, q):
        return np.atleast_2d(np.asarray(q, dtype=float)).copy()

    def jac(self, q):
        return np.broadcast_to(np.eye(2), (len(np.atleast_2d(q)), 2, 2)).copy()

    def velocity_dq(self, q, qd):
        return np.zeros((len(np.atleast_2d(q)), 2, 2))

    def jdot_qd(self, q, qd):
        return np.zeros((len(np.atleast_2d(q)), 2))

    def ik(self, p):
        return np.atleast_2d(np.asarray(p, dtype=float)).copy()


# --------------------------------------------------------- path geometry


@dataclass(frozen=True)
class PlanarGeometry:
    """Planar path quantities at a set of parameters (vectorised)."""

    gamma: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    sigma: np.ndarray
    sigma_prime: np.ndarray
    omega3: np.ndarray
    omega3_prime: np.ndarray


def planar_geometry(curve: ParametricCurve, xi) -> PlanarGeometry:
    """Tangent/normal axes, speed and signed turn rate (per unit parameter).

    ``e2`` is the left normal ``z x e1``, matching the planar frame
    convention, so ``omega3 = (x' y'' - y' x'') / sigma^2``.
    """
    if curve.dimension != 2:
        raise TranscriptionError("the planner requires a planar reference path")
    D = curve.derivatives(np.atleast_1d(xi), 3)
    d1, d2, d3 = D[:, 1], D[:, 2], D[:, 3]
    sig = np.linalg.norm(d1, axis=1)
    e1 = d1 / sig[:, None]
    e2 = np.column_stack([-e1[:, 1], e1[:, 0]])
    sp = np.einsum("ij,ij->i", d1, d2) / sig
    c = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    cp = d1[:, 0] * d3[:, 1] - d1[:, 1] * d3[:, 0]
    w3 = c / sig**2
    w3p = cp / sig**2 - 2 * c * sp / sig**3
    return PlanarGeometry(D[:, 0], e1, e2, sig, sp, w3, w3p)


def spatialize(model, curve: ParametricCurve, state, u, eps: float = EPS_XI_DOT) -> np.ndarray:
    """State derivative with respect to progress, ``f(x, u) / xi_dot``.

    Raises
    ------
    StallError
        If ``xi_dot <= eps`` (the time-to-space map is singular at rest).
    """
    x = np.asarray(state, dtype=float)
    u = np.asarray(u, dtype=float)
    xi, eta, xid, etad = x[XI], x[ETA], x[XID], x[ETAD]
    if xid <= eps:
        raise StallError(f"progress rate {xid:.3g} below floor {eps:g}")
    geo = planar_geometry(curve, [xi])
    e1, e2 = geo.e1[0], geo.e2[0]
    sig, sp, w3, w3p = geo.sigma[0], geo.sigma_prime[0], geo.omega3[0], geo.omega3_prime[0]
    q, qd = x[[Q1, Q2]], x[[QD1, QD2]]
    v = model.jac(q)[0] @ qd
    a = model.jac(q)[0] @ u + model.jdot_qd(q, qd)[0]
    den = sig - w3 * eta
    xid_v, etad_v = spatial_rates_planar(sig, w3, e1, e2, eta, v)
    ev = e1 @ v
    xidd = (xid * w3 * (e2 @ v) + e1 @ a) / den - ev * (sp * xid - w3p * xid * eta - w3 * etad) / den**2
    etadd = -xid * w3 * ev + e2 @ a
    f = np.array([xid_v, etad_v, xidd, etadd, qd[0], qd[1], u[0], u[1]])
    return f / xid


# ------------------------------------------------------------ transcription


@dataclass
class CorridorBounds:
    """Lateral bounds as callables of progress (vectorised)."""

    lower: callable
    upper: callable

    @classmethod
    def from_corridor(cls, corridor):
        return cls(lambda xi: corridor.bounds(xi)[0], lambda xi: corridor.bounds(xi)[1])

    @classmethod
    def constant(cls, lo: float, hi: float):
        return cls(lambda xi: np.full(np.shape(np.atleast_1d(xi)), float(lo)),
                   lambda xi: np.full(np.shape(np.atleast_1d(xi)), float(hi)))


@dataclass
class Transcription:
    """Decision-vector bookkeeping for ``N`` intervals.

    ``z = [x_0 .. x_N, u_0 .. u_{N-1}, h_0 .. h_{N-1}]`` with ``h_i`` the
    duration of interval ``i``.
    """

    N: int
    xi: np.ndarray
    dxi: float
    geometry: PlanarGeometry
    model: object
    curve: ParametricCurve

    @property
    def n(self) -> int:
        return NX * (self.N + 1) + (NU + 1) * self.N

    def split(self, z):
        nx, nu = NX * (self.N + 1), NU * self.N
        X = z[:nx].reshape(self.N + 1, NX)
        U = z[nx:nx + nu].reshape(self.N, NU)
        H = z[nx + nu:]
        return X, U, H

    def join(self, X, U, H):
        return np.concatenate([np.asarray(a, dtype=float).ravel() for a in (X, U, H)])

    def xidx(self, i, k):
        return NX * i + k

    def uidx(self, i, k):
        return NX * (self.N + 1) + NU * i + k

    def hidx(self, i):
        return NX * (self.N + 1) + NU * self.N + i


def transcribe(model, curve: ParametricCurve, bounds: Optional[CorridorBounds] = None, N: int = 50,
               eps: float = EPS_XI_DOT, h_min: float = 1e-6) -> NlpProblem:
    """Transcribe the minimum-time problem on a fixed progress grid.

    Start and end are at rest on the path (``eta = eta_dot = 0``, zero joint
    and progress rates).  Raises :class:`TranscriptionError` if ``N < 10``,
    the corridor does not contain the path, or the boundary points are not
    reachable.
    """
    if N < 10:
        raise TranscriptionError("need at least 10 intervals")
    if bounds is None:
        bounds = CorridorBounds.constant(0.0, 0.0)
    t0, tf = curve.domain
    xi = np.linspace(t0, tf, N + 1)
    geo = planar_geometry(curve, xi)
    tr = Transcription(N, xi, (tf - t0) / N, geo, model, curve)
    model.ik(geo.gamma[[0, -1]])  # reachability of the boundary states
    lo_eta = np.asarray(bounds.lower(xi), dtype=float)
    hi_eta = np.asarray(bounds.upper(xi), dtype=float)
    if np.any(lo_eta > 1e-12) or np.any(hi_eta < -1e-12):
        raise TranscriptionError("corridor bounds must satisfy lower <= 0 <= upper")
    if np.any(np.maximum(geo.omega3 * lo_eta, geo.omega3 * hi_eta) >= geo.sigma):
        raise TranscriptionError("corridor reaches past the local centre of curvature")
    lb = np.full(tr.n, -np.inf)
    ub = np.full(tr.n, np.inf)
    Xl, Ul, Hl = tr.split(lb)
    Xu, Uu, _ = tr.split(ub)
    Xl[:, XI] = Xu[:, XI] = xi
    Xl[:, ETA], Xu[:, ETA] = lo_eta, hi_eta
    Xl[:, XID] = eps
    Xl[:, [QD1, QD2]] = -model.qd_max
    Xu[:, [QD1, QD2]] = model.qd_max
    Ul[:] = -model.u_max
    Uu[:] = model.u_max
    Hl[:] = h_min
    for end in (0, N):
        Xl[end, [ETA, XID, ETAD, QD1, QD2]] = 0.0
        Xu[end, [ETA, XID, ETAD, QD1, QD2]] = 0.0
    eq_pattern, ineq_pattern = (_Pattern(*_sparsity(tr)[k]) for k in ("eq", "ineq"))
    hcols = tr.hidx(np.arange(N))

    def cost(z):
        grad = np.zeros(tr.n)
        grad[hcols] = 1.0
        return float(z[hcols].sum()), grad

    def eq(z):
        vals, data = _equalities(tr, z)
        return vals, eq_pattern.matrix(data, tr.n)

    def ineq(z):
        vals, data = _inequalities(tr, z)
        return vals, ineq_pattern.matrix(data, tr.n)

    return NlpProblem(tr.n, lb, ub, cost, eq, ineq, layout={"transcription": tr, "bounds": bounds},
                      cost_pattern=np.zeros((0, 2), dtype=int))


class _Pattern:
    """Fixed CSR structure; new values are scattered into it without re-validation."""

    def __init__(self, rows, cols):
        self.rows, self.cols = rows, cols
        self.shape = None
        self._template = None

    def matrix(self, data, n):
        if self._template is None:
            m = int(self.rows.max()) + 1 if len(self.rows) else 0
            self.shape = (m, n)
            order = np.arange(1, len(data) + 1, dtype=float)
            self._template = sps.csr_matrix((order, (self.rows, self.cols)), shape=self.shape)
            self._perm = self._template.data.astype(np.int64) - 1
        return sps.csr_matrix((data[self._perm], self._template.indices, self._template.indptr),
                              shape=self.shape)


def _sparsity(tr: Transcription):
    """Row/column index arrays of the fixed Jacobian patterns."""
    N = tr.N
    rows, cols = [], []
    r = 0
    # defects: for each interval, q_j (2) then qd_j (2)
    for i in range(N):
        for j in range(2):
            rows += [r] * 5
            cols += [tr.xidx(i + 1, Q1 + j), tr.xidx(i, Q1 + j), tr.xidx(i, QD1 + j), tr.uidx(i, j), tr.hidx(i)]
            r += 1
        for j in range(2):
            rows += [r] * 4
            cols += [tr.xidx(i + 1, QD1 + j), tr.xidx(i, QD1 + j), tr.uidx(i, j), tr.hidx(i)]
            r += 1
    # node consistency: position (2) then velocity (2)
    for i in range(N + 1):
        for k in range(2):
            rows += [r] * 3
            cols += [tr.xidx(i, Q1), tr.xidx(i, Q2), tr.xidx(i, ETA)]
            r += 1
        for k in range(2):
            rows += [r] * 7
            cols += [tr.xidx(i, Q1), tr.xidx(i, Q2), tr.xidx(i, QD1), tr.xidx(i, QD2),
                     tr.xidx(i, XID), tr.xidx(i, ETA), tr.xidx(i, ETAD)]
            r += 1
    eq = (np.array(rows), np.array(cols))
    rows, cols = [], []
    r = 0
    for i in range(N + 1):
        for sign in (1.0, -1.0):
            for k in range(2):
                rows += [r] * 4
                cols += [tr.xidx(i, Q1), tr.xidx(i, Q2), tr.xidx(i, QD1), tr.xidx(i, QD2)]
                r += 1
    return {"eq": eq, "ineq": (np.array(rows), np.array(cols))}


def _equalities(tr: Transcription, z):
    N, geo, model = tr.N, tr.geometry, tr.model
    X, U, h = tr.split(z)
    s = X[:, XID]
    q, qd = X[:, [Q1, Q2]], X[:, [QD1, QD2]]
    vals_def = np.empty((N, 4))
    one, mone = np.ones(N), -np.ones(N)
    pos_blocks, vel_blocks = [], []
    for j in range(2):
        qi, qn, qdi, qdn, uj = q[:-1, j], q[1:, j], qd[:-1, j], qd[1:, j], U[:, j]
        vals_def[:, j] = qn - qi - h * qdi - 0.5 * h**2 * uj
        pos_blocks.append(np.column_stack([one, mone, -h, -0.5 * h**2, -qdi - h * uj]))
        vals_def[:, 2 + j] = qdn - qdi - h * uj
        vel_blocks.append(np.column_stack([one, mone, -h, -uj]))
    def_data = np.concatenate(pos_blocks + vel_blocks, axis=1)

    eta, etad = X[:, ETA], X[:, ETAD]
    P = model.fk(q)
    J = model.jac(q)
    V = np.einsum("nij,nj->ni", J, qd)
    dVdq = model.velocity_dq(q, qd)
    pos = P - geo.gamma - eta[:, None] * geo.e2
    scale = geo.sigma - geo.omega3 * eta
    vel = V - (s * scale)[:, None] * geo.e1 - etad[:, None] * geo.e2
    node_vals = np.column_stack([pos, vel])
    pos_data = np.stack([J[:, :, 0], J[:, :, 1], -geo.e2], axis=2)  # (n, 2, 3)
    vel_data = np.stack(
        [dVdq[:, :, 0], dVdq[:, :, 1], J[:, :, 0], J[:, :, 1],
         -scale[:, None] * geo.e1, (s * geo.omega3)[:, None] * geo.e1, -geo.e2],
        axis=2,
    )  # (n, 2, 7)
    node_data = np.concatenate([pos_data.reshape(N + 1, 6), vel_data.reshape(N + 1, 14)], axis=1)
    vals = np.concatenate([vals_def.ravel(), node_vals.ravel()])
    data = np.concatenate([def_data.ravel(), node_data.ravel()])
    return vals, data


def _inequalities(tr: Transcription, z):
    model = tr.model
    X, _, _ = tr.split(z)
    q, qd = X[:, [Q1, Q2]], X[:, [QD1, QD2]]
    J = model.jac(q)
    V = np.einsum("nij,nj->ni", J, qd)
    dVdq = model.velocity_dq(q, qd)
    blocks_v, blocks_d = [], []
    for sign in (1.0, -1.0):
        blocks_v.append(sign * V - model.v_max)
        blocks_d.append(sign * np.concatenate([dVdq, J], axis=2))  # (n, 2, 4)
    vals = np.stack(blocks_v, axis=1).ravel()
    data = np.stack(blocks_d, axis=1).ravel()
    return vals, data


# ----------------------------------------------------------------- solving


@dataclass
class Trajectory:
    xi: np.ndarray
    states: np.ndarray
    inputs: np.ndarray
    durations: np.ndarray
    times: np.ndarray
    total_time: float
    report: Optional[SolverReport]

    CSV_HEADER = ["xi", "t", "eta", "xi_dot", "q1", "q2", "q1_dot", "q2_dot",
                  "q1_ddot", "q2_ddot", "p_x", "p_y", "v_norm"]

    def to_rows(self, model) -> np.ndarray:
        X, U = self.states, self.inputs
        P = model.fk(X[:, [Q1, Q2]])
        V = np.einsum("nij,nj->ni", model.jac(X[:, [Q1, Q2]]), X[:, [QD1, QD2]])
        Ufull = np.vstack([U, U[-1:]])  # inputs are piecewise constant; repeat the last one at the end node
        return np.column_stack(
            [self.xi, self.times, X[:, ETA], X[:, XID], X[:, Q1], X[:, Q2], X[:, QD1], X[:, QD2],
             Ufull[:, 0], Ufull[:, 1], P[:, 0], P[:, 1], np.linalg.norm(V, axis=1)]
        )


def initial_guess(problem: NlpProblem, ramp_fraction: float = 0.15) -> np.ndarray:
    """Path tracking at the largest constant progress rate allowed by the
    joint-rate and Cartesian-velocity bounds, ramped up from and down to
    rest over ``ramp_fraction`` of the path (inverse kinematics, elbow-up)."""
    tr: Transcription = problem.layout["transcription"]
    model, geo, N = tr.model, tr.geometry, tr.N
    q = model.ik(geo.gamma)
    J = model.jac(q)
    tangent = geo.sigma[:, None] * geo.e1
    qd_unit = np.linalg.solve(J, tangent[:, :, None])[:, :, 0]
    rate = min(model.v_max / np.abs(tangent).max(), model.qd_max / np.abs(qd_unit).max())
    span = tr.xi[-1] - tr.xi[0]
    d = np.minimum(tr.xi - tr.xi[0], tr.xi[-1] - tr.xi) / (ramp_fraction * span)
    s = rate * np.clip(d, 0.0, 1.0) ** 0.5
    s[1:-1] = np.maximum(s[1:-1], 10 * EPS_XI_DOT)
    X = np.zeros((N + 1, NX))
    X[:, XI] = tr.xi
    X[:, XID] = s
    X[:, [Q1, Q2]] = q
    X[:, [QD1, QD2]] = s[:, None] * qd_unit
    H = 2.0 * np.diff(tr.xi) / (s[:-1] + s[1:])
    U = np.clip((X[1:, [QD1, QD2]] - X[:-1, [QD1, QD2]]) / H[:, None], -model.u_max, model.u_max)
    return np.clip(tr.join(X, U, H), problem.lb, problem.ub)


def solve(problem: NlpProblem, z0: Optional[np.ndarray] = None, options: Optional[AlOptions] = None) -> Trajectory:
    """Solve a transcribed problem; non-convergence is reported, not raised.

    The default options start the penalty at ``DEFAULT_RHO0``: a small initial
    penalty lets the first subproblem shrink every interval duration to its
    lower bound, far from any feasible motion.
    """
    if z0 is None:
        z0 = initial_guess(problem)
    if options is None:
        options = AlOptions(rho0=DEFAULT_RHO0)
    z, report = solve_augmented_lagrangian(problem, z0, options)
    return trajectory_from(problem, z, report)


def trajectory_from(problem: NlpProblem, z, report: Optional[SolverReport] = None) -> Trajectory:
    tr: Transcription = problem.layout["transcription"]
    X, U, H = tr.split(np.asarray(z, dtype=float))
    times = np.concatenate([[0.0], np.cumsum(H)])
    return Trajectory(tr.xi.copy(), X.copy(), U.copy(), H.copy(), times, float(H.sum()), report)


def revalidate(problem: NlpProblem, traj: Trajectory) -> float:
    """Maximum violation of every transcription constraint, recomputed from the trajectory."""
    tr: Transcription = problem.layout["transcription"]
    return problem.violation(tr.join(traj.states, traj.inputs, traj.durations))


def total_time(traj: Trajectory) -> float:
    """Traversal time recomputed from the interval durations."""
    return float(np.sum(traj.durations))


def quadrature_time(traj: Trajectory) -> float:
    """Trapezoidal estimate of the traversal time from the progress rates, ``int dxi / xi_dot``."""
    s = traj.states[:, XID]
    return float(np.sum(2.0 * np.diff(traj.xi) / (s[:-1] + s[1:])))


def saturation_fraction(traj: Trajectory, model, level: float = 4.9) -> float:
    """Fraction of intervals where at least one joint acceleration is at ``level`` or beyond."""
    return float(np.mean(np.abs(traj.inputs).max(axis=1) >= level))


def bang_bang_time(length: float, accel: float) -> float:
    """Rest-to-rest minimum time of a double integrator over ``length``."""
    return 2.0 * math.sqrt(length / accel)
