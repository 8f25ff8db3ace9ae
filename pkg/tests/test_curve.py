import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from scipy.integrate import trapezoid
from hypothesis import strategies as st

from pathparam.curve import (
    ExpressionCurve,
    PiecewisePolynomialCurve,
    WaypointSet,
    certified_continuity,
    circle,
    curve_from_dict,
    curve_to_json,
    helix,
    interpolate,
    join,
    load_curve,
    named_curve,
    read_points_csv,
    rejoin_at,
)
from pathparam.errors import (
    ContinuityError,
    CurveConstructionError,
    DataError,
    DegenerateParameterizationError,
    DomainError,
)
from pathparam.frames import curvature_torsion


def test_line_derivative():
    line = named_curve("line")
    assert np.allclose(line.eval(0.3, 1), [1, 0, 0])


def test_circle_second_derivative():
    assert np.allclose(circle().eval(0.0, 2), [-1, 0], atol=1e-15)


def test_hermite_cubic_midpoint():
    # x = t, y = 3 t^2 - 2 t^3 (cubic with zero end slopes in y): y(0.5) = 0.5
    wps = WaypointSet(np.array([[0.0, 0.0], [1.0, 1.0]]), np.array([0.0, 1.0]))
    cur = interpolate(wps, 1, ([np.array([1.0, 0.0])], [np.array([1.0, 0.0])]))
    assert cur.eval(0.5)[1] == pytest.approx(0.5, abs=1e-14)
    assert cur.eval(0.25)[1] == pytest.approx(3 * 0.25**2 - 2 * 0.25**3, abs=1e-14)


def test_speed_examples():
    assert helix().speed(1.234) == pytest.approx(math.sqrt(2), abs=1e-14)
    assert named_curve("line").speed(0.7) == pytest.approx(1.0)
    assert ExpressionCurve(["2*t", "0"], (0, 1)).speed(0.2) == pytest.approx(2.0)


def test_arc_length_examples():
    assert named_curve("line").arc_length(1.0) == pytest.approx(1.0, abs=1e-12)
    assert circle(2.0).arc_length(2 * math.pi) == pytest.approx(4 * math.pi, abs=1e-10)
    assert helix().length() == pytest.approx(2 * math.pi * math.sqrt(2), abs=1e-10)


def test_arc_length_spline_matches_dense_quadrature():
    rng = np.random.default_rng(3)
    pts = np.cumsum(rng.normal(size=(6, 3)), axis=0)
    cur = interpolate(WaypointSet(pts), 3)
    t = np.linspace(*cur.domain, 200001)
    dense = trapezoid(cur.speed(t), t)
    assert cur.length() == pytest.approx(dense, rel=1e-8)


def test_two_points_give_straight_segment():
    cur = interpolate(WaypointSet(np.array([[0.0, 0.0], [1.0, 0.0]])), 1)
    sig = cur.speed(np.linspace(0, 1, 11))
    assert np.allclose(sig, sig[0])


def test_collinear_points_have_zero_curvature():
    pts = np.column_stack([np.linspace(0, 4, 5), 2 * np.linspace(0, 4, 5), np.zeros(5)])
    cur = interpolate(WaypointSet(pts), 2)
    theta = np.linspace(*cur.domain, 101)
    d1, d2 = cur.eval(theta, 1), cur.eval(theta, 2)
    kappa = np.linalg.norm(np.cross(d1, d2), axis=1) / np.linalg.norm(d1, axis=1) ** 3
    assert kappa.max() < 1e-8


@pytest.mark.parametrize("c", [0, 1, 2, 3, 4])
def test_interpolation_class_is_certified(c):
    rng = np.random.default_rng(c)
    pts = np.cumsum(rng.normal(size=(7, 3)), axis=0)
    cur = interpolate(WaypointSet(pts), c)
    assert certified_continuity(cur) >= c
    assert np.allclose(cur.eval(cur.knots), pts, atol=1e-10)


@pytest.mark.parametrize("c", [1, 2, 3, 4])
def test_rejoin_is_exactly_class_c(c):
    cur = named_curve("continuity")
    rebuilt = rejoin_at(cur, 0.5, c)
    assert certified_continuity(rebuilt) == c


def test_expression_derivatives_against_finite_differences():
    cur = named_curve("coil3d")
    t, h = 1.1, 1e-5
    for k in range(1, 5):
        fd = (cur.eval(t + h, k - 1) - cur.eval(t - h, k - 1)) / (2 * h)
        assert np.allclose(cur.eval(t, k), fd, rtol=1e-6, atol=1e-6)


@given(st.floats(0.0, 1.0))
@settings(max_examples=50, deadline=None)
def test_piecewise_evaluation_matches_horner(theta):
    coeffs = np.array([[[0.0, 1.0], [1.0, 0.5], [0.0, -2.0], [0.3, 0.0]]])
    cur = PiecewisePolynomialCurve([0.0, 1.0], coeffs)
    expected = sum(coeffs[0, j] * theta**j for j in range(4))
    assert np.allclose(cur.eval(theta), expected, atol=1e-14)


def test_join_and_declared_class():
    a = PiecewisePolynomialCurve([0.0, 1.0], [[[0, 0], [1, 0]]])
    b = PiecewisePolynomialCurve([1.0, 2.0], [[[1, 0], [1, 1]]])
    joined = join(a, b, 0)
    assert certified_continuity(joined) == 0
    with pytest.raises(CurveConstructionError):
        join(a, b, 1)


def test_json_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    cur = interpolate(WaypointSet(np.cumsum(rng.normal(size=(5, 2)), axis=0)), 2)
    path = tmp_path / "c.json"
    path.write_text(curve_to_json(cur))
    back = load_curve(path)
    t = np.linspace(*cur.domain, 17)
    assert np.array_equal(back.eval(t), cur.eval(t))
    expr = curve_from_dict(json.loads(curve_to_json(named_curve("sin"))))
    assert np.allclose(expr.eval(t), named_curve("sin").eval(t))


def test_invalid_inputs():
    with pytest.raises(CurveConstructionError):
        WaypointSet(np.array([[0.0, 0.0], [0.0, 0.0]]))
    with pytest.raises(CurveConstructionError):
        WaypointSet(np.array([[0.0, 0.0]]))
    with pytest.raises(CurveConstructionError):
        ExpressionCurve(["t", "a*t"], (0, 1))
    with pytest.raises(CurveConstructionError):
        named_curve("spiral")
    with pytest.raises(DomainError):
        named_curve("line").eval(1.5)
    with pytest.raises(DegenerateParameterizationError):
        ExpressionCurve(["t**2", "0"], (0, 1)).speed(0.0)
    with pytest.raises(CurveConstructionError):
        interpolate(WaypointSet(np.eye(2)), 5)
    assert issubclass(ContinuityError, DataError)


def test_read_points_csv(tmp_path):
    p = tmp_path / "pts.csv"
    p.write_text("x,y\n0,1\n2,3\n")
    assert np.array_equal(read_points_csv(p), [[0, 1], [2, 3]])
    p.write_text("x,y\n0,1\n2\n")
    with pytest.raises(CurveConstructionError):
        read_points_csv(p)


def test_helix_curvature_via_curve_derivatives():
    k, t = curvature_torsion(helix(2.0, 1.0), np.array([0.3]))
    assert k[0] == pytest.approx(2 / 5) and t[0] == pytest.approx(1 / 5)
