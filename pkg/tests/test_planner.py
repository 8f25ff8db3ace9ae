import math

import numpy as np
import pytest

import oracles
from pathparam import planner as P
from pathparam.curve import ExpressionCurve, named_curve
from pathparam.errors import StallError, TranscriptionError
from pathparam.scenes import manipulator_corridor
from pathparam.spatial import closest_point


@pytest.fixture(scope="module")
def arm():
    return P.ManipulatorModel()


def test_manipulator_velocity_examples(arm):
    assert np.allclose(arm.jac([0.3, 1.0])[0] @ [0.0, 0.0], 0.0)
    assert np.allclose(arm.jac([0.0, math.pi / 2])[0] @ [1.0, 0.0], [0.0, 1.0])


def test_inverse_kinematics_round_trip(arm):
    pts = named_curve("sin").eval(np.linspace(0, 1, 21))
    q = arm.ik(pts)
    assert np.allclose(arm.fk(q), pts, atol=1e-12)
    with pytest.raises(TranscriptionError):
        arm.ik([[3.0, 0.0]])


def test_jacobian_helpers_against_finite_differences(arm):
    rng = np.random.default_rng(0)
    q, qd = rng.normal(size=2), rng.normal(size=2)
    h = 1e-6
    J = np.column_stack([(arm.fk(q + h * e) - arm.fk(q - h * e))[0] / (2 * h) for e in np.eye(2)])
    assert np.allclose(arm.jac(q)[0], J, atol=1e-8)
    V = lambda qq: arm.jac(qq)[0] @ qd  # noqa: E731
    dV = np.column_stack([(V(q + h * e) - V(q - h * e)) / (2 * h) for e in np.eye(2)])
    assert np.allclose(arm.velocity_dq(q, qd)[0], dV, atol=1e-8)
    assert np.allclose(arm.jdot_qd(q, qd)[0], dV @ qd, atol=1e-8)


def test_spatialize_on_unit_speed_path():
    line = ExpressionCurve(["t", "0"], (0.0, 1.0))
    pm = P.PointMassModel()
    c = 0.8
    x = np.array([0.3, 0.0, c, 0.0, 0.3, 0.0, c, 0.0])
    f = P.spatialize(pm, line, x, [0.0, 0.0])
    # dxi/dxi = 1, time per unit progress 1/xi_dot = 1/c, no lateral motion
    assert f[P.XI] == pytest.approx(1.0) and f[P.ETA] == 0.0
    assert f[P.Q1] == pytest.approx(1.0) and 1.0 / x[P.XID] == pytest.approx(1 / c)
    with pytest.raises(StallError):
        P.spatialize(pm, line, np.zeros(8), [0.0, 0.0])


def test_spatialize_matches_simulated_motion(arm):
    # joint motion with constant acceleration, projected onto the reference
    sin = named_curve("sin")
    q0 = arm.ik(sin.eval(0.4) + 0.01 * np.array([-0.3, 1.0]))[0]
    qd0, u = np.array([0.4, -0.3]), np.array([1.0, -2.0])

    def spatial_state(t):
        q = q0 + qd0 * t + 0.5 * u * t * t
        qd = qd0 + u * t
        p = arm.fk(q)[0]
        v = arm.jac(q)[0] @ qd
        xi = closest_point(sin, p, 0.4, tol=1e-14)
        geo = P.planar_geometry(sin, [xi])
        eta = float(geo.e2[0] @ (p - geo.gamma[0]))
        xid, etad = P.spatial_rates_planar(geo.sigma[0], geo.omega3[0], geo.e1[0], geo.e2[0], eta, v)
        return np.array([xi, eta, xid, etad, *q, *qd])

    h = 1e-5
    x = spatial_state(0.0)
    dx_dt = (spatial_state(h) - spatial_state(-h)) / (2 * h)
    f = P.spatialize(arm, sin, x, u)
    assert np.allclose(f * x[P.XID], dx_dt, rtol=1e-6, atol=1e-7)


def test_transcription_bookkeeping(arm):
    cur, cor = manipulator_corridor()
    prob = P.transcribe(arm, cur, P.CorridorBounds.from_corridor(cor), N=50)
    assert prob.n == 8 * 51 + 3 * 50
    tr = prob.layout["transcription"]
    z = P.initial_guess(prob)
    X, U, H = tr.split(z)
    assert X.shape == (51, 8) and U.shape == (50, 2) and H.shape == (50,)
    assert np.array_equal(tr.join(X, U, H), z)
    c, Jc = prob.eq(z)
    g, Jg = prob.ineq(z)
    assert np.all(np.isfinite(c)) and np.all(np.isfinite(g))
    assert Jc.shape == (len(c), prob.n) and Jg.shape == (len(g), prob.n)


def test_zero_width_corridor_pins_eta(arm):
    prob = P.transcribe(arm, named_curve("sin"), None, N=12)
    tr = prob.layout["transcription"]
    Xl, _, _ = tr.split(prob.lb)
    Xu, _, _ = tr.split(prob.ub)
    assert np.all(Xl[:, P.ETA] == 0.0) and np.all(Xu[:, P.ETA] == 0.0)


def test_transcription_errors(arm):
    sin = named_curve("sin")
    with pytest.raises(TranscriptionError):
        P.transcribe(arm, sin, None, N=5)
    with pytest.raises(TranscriptionError):
        P.transcribe(arm, sin, P.CorridorBounds.constant(0.01, 0.02), N=12)
    with pytest.raises(TranscriptionError):
        # beyond the smallest radius of curvature of the sinusoid (about 0.0507)
        P.transcribe(arm, sin, P.CorridorBounds.constant(-0.2, 0.2), N=12)
    with pytest.raises(TranscriptionError):
        P.transcribe(arm, ExpressionCurve(["3 + t", "0"], (0, 1)), None, N=12)
    with pytest.raises(TranscriptionError):
        P.transcribe(arm, named_curve("helix"), None, N=12)


def test_constraint_jacobians_against_finite_differences(arm):
    cur, cor = manipulator_corridor()
    prob = P.transcribe(arm, cur, P.CorridorBounds.from_corridor(cor), N=12)
    rng = np.random.default_rng(3)
    z0 = P.initial_guess(prob)
    for _ in range(5):
        z = z0 + 0.05 * rng.normal(size=prob.n)
        z[prob.layout["transcription"].hidx(np.arange(12))] = np.abs(z0[-12:]) + 0.01
        d = rng.normal(size=prob.n)
        h = 1e-6
        for fun in (prob.eq, prob.ineq):
            _, J = fun(z)
            fd = (fun(z + h * d)[0] - fun(z - h * d)[0]) / (2 * h)
            assert np.allclose(J @ d, fd, rtol=1e-6, atol=1e-6)


def test_point_mass_matches_bang_bang():
    pm = P.PointMassModel()
    line = ExpressionCurve(["t", "0"], (0.0, 1.0))
    prob = P.transcribe(pm, line, P.CorridorBounds.constant(-0.1, 0.1), N=30)
    traj = P.solve(prob)
    ref = oracles.double_integrator_time(1.0, pm.u_max, pm.v_max)
    assert traj.report.converged
    assert traj.total_time == pytest.approx(ref, rel=0.01)
    assert P.revalidate(prob, traj) <= 1e-5
    assert P.total_time(traj) == pytest.approx(traj.durations.sum())
    assert P.bang_bang_time(1.0, pm.u_max) == pytest.approx(ref)


def test_wider_corridor_is_not_slower(arm):
    cur, cor = manipulator_corridor()
    path = P.solve(P.transcribe(arm, cur, None, N=16))
    wide = P.solve(P.transcribe(arm, cur, P.CorridorBounds.from_corridor(cor), N=16))
    assert path.report.converged and wide.report.converged
    assert wide.total_time <= path.total_time


def test_trajectory_rows(arm):
    pm = P.PointMassModel()
    line = ExpressionCurve(["t", "0"], (0.0, 1.0))
    prob = P.transcribe(pm, line, None, N=10)
    traj = P.trajectory_from(prob, P.initial_guess(prob))
    rows = traj.to_rows(pm)
    assert rows.shape == (11, len(P.Trajectory.CSV_HEADER))
    assert np.allclose(rows[:, 1], traj.times)
    assert P.quadrature_time(traj) > 0
