"""Acceptance suite: one test per criterion, each recorded for the terminal summary."""

import json
import math
import time

import numpy as np
import pytest

import oracles
from pathparam import planner as P
from pathparam import scenes
from pathparam.cli import main
from pathparam.corridor import generate, obstacle_residuals, project_cloud, volume
from pathparam.curve import ExpressionCurve, helix, named_curve
from pathparam.frames import FrameSample, curvature_torsion, fsf_field, ptf_world_rates, ptfd, ptfi
from pathparam.lp import OPTIMAL, LpProblem, solve_lp
from pathparam.spatial import (
    SpatialState,
    project,
    reconstruct,
    spatial_rates,
    spatial_rates_fsf,
    spatial_rates_planar,
    xidot_optimality,
)


def tube_radius(curve, n=4001):
    """Half the smallest radius of curvature (curvature-free curves: 1)."""
    D = np.atleast_2d(curve.derivatives(np.linspace(*curve.domain, n), 2))
    d1, d2 = D[:, 1], D[:, 2]
    if d1.shape[1] == 2:
        cross = np.abs(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    else:
        cross = np.linalg.norm(np.cross(d1, d2), axis=1)
    kappa = (cross / np.linalg.norm(d1, axis=1) ** 3).max()
    return 0.5 / kappa if kappa > 0 else 1.0


@pytest.mark.criterion(1)
def test_twist_freeness(record):
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(20):
        curve = oracles.random_c4_curve(rng)
        field = ptfi(curve)
        # tangential component of the world angular velocity in the stored frame
        w_world, _, _ = ptf_world_rates(curve, field.grid)
        twist = np.abs(np.einsum("ni,ni->n", field.R[:, :, 0], w_world))
        worst = max(worst, float(twist.max()), float(np.abs(field.omega_path[:, 0]).max()))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-10 and elapsed < 5.0
    record(ok, f"max |omega_1| = {worst:.2e} on 20 random C4 curves, {elapsed:.2f} s")
    assert ok


@pytest.mark.criterion(2)
def test_orthonormality_after_many_steps(record):
    coil = named_curve("coil3d")
    grid = np.linspace(*coil.domain, 100_001)
    details, ok = [], True
    for readapt in (False, True):
        t0 = time.perf_counter()
        field = ptfi(coil, grid, readapt=readapt)
        elapsed = time.perf_counter() - t0
        err = np.linalg.norm(np.einsum("nki,nkj->nij", field.R, field.R) - np.eye(3), axis=(1, 2)).max()
        ok &= err < 1e-7 and elapsed < 2.0
        details.append(f"{'re-adapted' if readapt else 'open loop'}: {err:.1e} in {elapsed:.2f} s")
    record(ok, "max ||R^T R - I||_F after 1e5 steps; " + ", ".join(details))
    assert ok


@pytest.mark.criterion(3)
def test_frenet_serret_helix(record):
    cur = helix(1.0, 1.0)
    theta = np.linspace(*cur.domain, 100)
    kappa, tau = curvature_torsion(cur, theta)
    k_ref, t_ref = oracles.helix_curvature_torsion(1.0, 1.0)
    # the same values read off the frame's angular velocity sigma [tau, 0, kappa]
    field = fsf_field(cur, theta)
    sigma = cur.speed(theta)
    w = field.omega_path / sigma[:, None]
    err = max(np.abs(kappa - k_ref).max(), np.abs(tau - t_ref).max(),
              np.abs(w[:, 2] - k_ref).max(), np.abs(w[:, 0] - t_ref).max(), np.abs(w[:, 1]).max())
    ok = err < 1e-9
    record(ok, f"max |kappa - 0.5|, |tau - 0.5| = {err:.1e} at 100 samples")
    assert ok


@pytest.mark.criterion(4)
def test_derivation_equivalence(record):
    rng = np.random.default_rng(4)
    worst = 0.0
    for name in ("helix", "coil3d", "sin2d"):
        cur = named_curve(name)
        field = ptfi(cur, np.linspace(*cur.domain, 4001))
        r = tube_radius(cur)
        planar = cur.dimension == 2
        for i in rng.integers(0, len(field.grid), 334 if name != "sin2d" else 332):
            s = field.sample(int(i))
            eta = rng.uniform(-r, r, 2) / math.sqrt(2)
            if planar:
                eta[1] = 0.0
            p = cur.eval(s.theta)
            p3 = np.append(p, 0.0) if planar else p
            p3 = p3 + eta[0] * s.e2 + eta[1] * s.e3
            v = rng.normal(size=3)
            if planar:
                v[2] = 0.0
            a = spatial_rates(s, float(cur.speed(s.theta)), SpatialState(s.theta, eta), v).xi_dot
            b = xidot_optimality(cur, p3, v, s.theta)
            worst = max(worst, abs(a - b) / max(abs(b), 1e-300))
    ok = worst < 1e-9
    record(ok, f"max relative |xi_dot difference| = {worst:.1e} on 1000 states")
    assert ok


@pytest.mark.criterion(5)
def test_round_trip_projection(record):
    rng = np.random.default_rng(5)
    worst = 0.0
    for name, count in (("helix", 334), ("coil3d", 333), ("sin2d", 333)):
        cur = named_curve(name)
        field = ptfi(cur, np.linspace(*cur.domain, 4001))
        r = tube_radius(cur)
        for _ in range(count):
            eta = rng.uniform(-r, r, 2) / math.sqrt(2)
            if cur.dimension == 2:
                eta[1] = 0.0
            p = reconstruct(cur, field, SpatialState(float(rng.uniform(*cur.domain)), eta))
            q = reconstruct(cur, field, project(cur, field, p))
            worst = max(worst, float(np.linalg.norm(q - p)))
    ok = worst < 1e-8
    record(ok, f"max |reconstruct(project(p)) - p| = {worst:.1e} on 1000 points (helix, coil3d, sin2d)")
    assert ok


@pytest.mark.criterion(6)
def test_continuity_ladder(record, tmp_path, capsys):
    matrix, continuous_max, jump_min, ok = [], 0.0, math.inf, True
    for c in range(5):
        code = main(["continuity", "-c", str(c), "--out-dir", str(tmp_path)])
        doc = json.loads((tmp_path / f"continuity_c{c}.json").read_text())
        expected = {"omega": c >= 2, "alpha": c >= 3, "jerk": c >= 4}
        got = {k: v == "continuous" for k, v in doc["verdict"].items()}
        ok &= code == 0 and got == expected and doc["tol"] == 1e-6
        for name, cont in expected.items():
            if cont:
                continuous_max = max(continuous_max, doc["jumps"][name])
            else:
                jump_min = min(jump_min, doc["jumps"][name])
        matrix.append("".join("+" if got[k] else "x" for k in ("omega", "alpha", "jerk")))
    capsys.readouterr()
    ok &= continuous_max < 1e-6 and jump_min >= 1e-2
    record(ok, f"omega/alpha/jerk per class c=0..4: {' '.join(matrix)}; "
               f"continuous jumps <= {continuous_max:.1e}, discontinuous >= {jump_min:.2e}")
    assert ok


@pytest.mark.criterion(7)
def test_frenet_serret_specialisation(record):
    rng = np.random.default_rng(7)
    worst3 = 0.0
    for _ in range(500):
        R = np.linalg.qr(rng.normal(size=(3, 3)))[0]
        R *= np.sign(np.linalg.det(R))
        kappa, tau, sigma = rng.uniform(0.1, 2.0), rng.normal(), rng.uniform(0.5, 2.0)
        eta = rng.uniform(-0.4, 0.4, 2) / kappa
        v = rng.normal(size=3)
        sample = FrameSample(0.0, R, sigma * np.array([tau, 0.0, kappa]), R @ (sigma * np.array([tau, 0.0, kappa])))
        g = spatial_rates(sample, sigma, SpatialState(0.0, eta), v)
        f = spatial_rates_fsf(kappa, tau, R, SpatialState(0.0, eta), v)
        # the generic rates are per unit parameter; Frenet-Serret rates per unit arc length
        diff = [sigma * g.xi_dot - f.xi_dot, g.eta1_dot - f.eta1_dot, g.eta2_dot - f.eta2_dot]
        worst3 = max(worst3, float(np.abs(diff).max()))
    worst2 = 0.0
    for _ in range(500):
        phi = rng.uniform(0, 2 * math.pi)
        e1, e2 = np.array([math.cos(phi), math.sin(phi), 0.0]), np.array([-math.sin(phi), math.cos(phi), 0.0])
        R = np.column_stack([e1, e2, [0.0, 0.0, 1.0]])
        sigma, w3 = rng.uniform(0.5, 2.0), rng.normal()
        eta1 = rng.uniform(-0.4, 0.4) * sigma / max(abs(w3), 1e-3)
        v = np.append(rng.normal(size=2), 0.0)
        w = np.array([0.0, 0.0, w3])
        g = spatial_rates(FrameSample(0.0, R, w, w), sigma, SpatialState(0.0, np.array([eta1, 0.0])), v)
        xd, ed = spatial_rates_planar(sigma, w3, e1[:2], e2[:2], eta1, v[:2])
        worst2 = max(worst2, abs(g.xi_dot - xd), abs(g.eta1_dot - ed), abs(g.eta2_dot))
    ok = worst3 < 1e-12 and worst2 < 1e-14
    record(ok, f"3D Frenet-Serret case {worst3:.1e}, planar case {worst2:.1e} (500 states each)")
    assert ok


@pytest.mark.criterion(8)
def test_corridor_soundness(record):
    t0 = time.perf_counter()
    lines, ok = [], True
    for name in scenes.SCENES:
        cur, pts, r = scenes.build(name)
        field = ptfi(cur, np.linspace(*cur.domain, 2001))
        obs = project_cloud(cur, field, pts).obstacles
        corridors = {n: generate(cur, field, obs, n, n_samples=40, wrapper_radius=r) for n in (3, 5, 7, 9)}
        vols = [volume(c, cur) for c in corridors.values()]
        monotone = all(b >= a - 1e-6 for a, b in zip(vols, vols[1:]))
        residual = min(obstacle_residuals(c, obs).min() for c in corridors.values())
        c9 = corridors[9]
        mc, se = oracles.monte_carlo_volume(c9, cur, field, 500_000, seed=8)
        exact = volume(c9, cur, frames=field)
        err_exact, err_speed = abs(mc - exact) / mc, abs(mc - vols[-1]) / mc
        ok &= monotone and residual >= -1e-8 and err_exact <= 0.01 and err_speed <= 0.01
        lines.append(f"{name}: res {residual:.1e}, MC err {100 * err_exact:.2f}%/{100 * err_speed:.2f}%, "
                     f"{'monotone' if monotone else 'NOT monotone'}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 30.0
    record(ok, "; ".join(lines) + f"; {elapsed:.1f} s")
    assert ok


@pytest.mark.criterion(9)
def test_derivative_checks(record):
    hs = 0.05 * 0.5 ** np.arange(4)
    orders = {}

    # frame derivative against the closed-form parallel transport frame of the helix
    cur = helix()
    field = ptfd(ptfi(cur, np.linspace(*cur.domain, 6001)))
    idx = np.arange(600, 5400, 600)
    errs = []
    for h in hs:
        e = 0.0
        for i in idx:
            t = field.grid[i]
            fd = (oracles.helix_ptf(t + h) - oracles.helix_ptf(t - h)) / (2 * h)
            e = max(e, np.abs(fd - field.R_prime[i]).max())
        errs.append(e)
    orders["R'"] = oracles.observed_order(hs, errs)

    # angular acceleration and jerk against differences of the lower rate
    coil = named_curve("coil3d")
    field = ptfd(ptfi(coil, np.linspace(*coil.domain, 6001)))
    idx = np.arange(300, 6000, 700)
    t = field.grid[idx]
    for name, lower, upper in (("alpha", 0, field.alpha_world), ("jerk", 1, field.jerk_world)):
        errs = []
        for h in 0.2 * hs:
            fd = (ptf_world_rates(coil, t + h)[lower] - ptf_world_rates(coil, t - h)[lower]) / (2 * h)
            errs.append(np.abs(fd - upper[idx]).max())
        orders[name] = oracles.observed_order(0.2 * hs, errs)

    # transcription constraint Jacobians along random directions
    arm = P.ManipulatorModel()
    sin, cor = scenes.manipulator_corridor()
    prob = P.transcribe(arm, sin, P.CorridorBounds.from_corridor(cor), N=12)
    rng = np.random.default_rng(9)
    z = P.initial_guess(prob)
    tr = prob.layout["transcription"]
    z[tr.hidx(np.arange(12))] += 0.05
    d = rng.normal(size=prob.n)
    for name, fun in (("equalities", prob.eq), ("inequalities", prob.ineq)):
        _, J = fun(z)
        Jd = J @ d
        errs = [np.abs((fun(z + h * d)[0] - fun(z - h * d)[0]) / (2 * h) - Jd).max() for h in 0.2 * hs]
        orders[name] = oracles.observed_order(0.2 * hs, errs)

    ok = all(o >= 1.9 for o in orders.values())
    record(ok, "observed orders " + ", ".join(f"{k} {v:.2f}" for k, v in orders.items()))
    assert ok


@pytest.mark.criterion(10)
def test_planner(record):
    pm = P.PointMassModel()
    line = ExpressionCurve(["t", "0"], (0.0, 1.0))
    dbl = P.solve(P.transcribe(pm, line, P.CorridorBounds.constant(-0.1, 0.1), N=30))
    ref = oracles.double_integrator_time(1.0, pm.u_max, pm.v_max)
    rel = abs(dbl.total_time - ref) / ref

    arm = P.ManipulatorModel()
    sin, cor = scenes.manipulator_corridor()
    t0 = time.perf_counter()
    prob = P.transcribe(arm, sin, P.CorridorBounds.from_corridor(cor), N=50)
    traj = P.solve(prob)
    elapsed = time.perf_counter() - t0
    tol = 1e-5
    X, U = traj.states, traj.inputs
    V = np.einsum("nij,nj->ni", arm.jac(X[:, [P.Q1, P.Q2]]), X[:, [P.QD1, P.QD2]])
    lo, hi = cor.bounds(traj.xi)
    excess = max(
        np.abs(X[:, [P.QD1, P.QD2]]).max() - arm.qd_max,
        np.abs(U).max() - arm.u_max,
        np.abs(V).max() - arm.v_max,
        (lo - X[:, P.ETA]).max(),
        (X[:, P.ETA] - hi).max(),
    )
    violation = P.revalidate(prob, traj)
    sat = P.saturation_fraction(traj, arm)
    ok = (rel <= 0.01 and dbl.report.converged and traj.report.converged and violation <= tol
          and excess <= tol and sat >= 0.5 and elapsed < 120.0)
    record(ok, f"double integrator {dbl.total_time:.5f} s vs {ref:.5f} s ({100 * rel:.2f}%); "
               f"corridor scenario T = {traj.total_time:.5f} s, converged = {traj.report.converged}, "
               f"violation {violation:.1e}, bound excess {excess:.1e}, saturation {100 * sat:.0f}%, "
               f"{elapsed:.1f} s")
    assert ok


@pytest.mark.criterion(11)
def test_lp_against_vertex_enumeration(record):
    rng = np.random.default_rng(11)
    worst, statuses = 0.0, set()
    for _ in range(200):
        c, A, b = oracles.random_bounded_lp(rng, n_max=10, m_max=5)
        ref, _ = oracles.lp_vertex_enumeration(c, A, b)
        sol = solve_lp(LpProblem(c, A, b))
        statuses.add(sol.status)
        worst = max(worst, abs(sol.objective - ref) / max(1.0, abs(ref)))
    ok = statuses == {OPTIMAL} and worst <= 1e-7
    record(ok, f"200 LPs, max objective difference {worst:.1e}")
    assert ok
