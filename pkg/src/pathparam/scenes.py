"""Synthetic obstacle scenes for corridor experiments.

Each scene returns ``(curve, cloud, wrapper_radius)`` with a deterministic
point cloud (``seed`` only affects the random scatter scene).
"""

from __future__ import annotations

import numpy as np

from .curve import ExpressionCurve

SCENES = ("walls", "single", "cylinder", "narrowing", "scatter")


def _line():
    return ExpressionCurve(["t", "0", "0"], (0.0, 1.0), name="line")


def walls(halfwidth: float = 0.4, spacing: float = 0.05):
    """Planes ``y = +-halfwidth`` sampled along a straight path."""
    x = np.arange(0.0, 1.0 + 1e-9, spacing)
    z = np.arange(-1.0, 1.0 + 1e-9, 2 * spacing)
    X, Z = np.meshgrid(x, z, indexing="ij")
    pts = [np.column_stack([X.ravel(), s * halfwidth * np.ones(X.size), Z.ravel()]) for s in (1.0, -1.0)]
    return _line(), np.vstack(pts), 1.0


def single(point=(0.5, 0.3, 0.1)):
    """One obstacle point beside a straight path."""
    return _line(), np.array([point], dtype=float), 1.0


def cylinder(radius: float = 0.5, n_xi: int = 40, n_phi: int = 24):
    """Points on a tube of given radius around a helix arc."""
    curve = ExpressionCurve(["cos(t)", "sin(t)", "0.5*t"], (0.0, 2.0), name="helix-arc")
    from .frames import ptfi  # local import keeps scene construction cheap

    field = ptfi(curve, np.linspace(0.0, 2.0, 2001))
    xi = np.linspace(0.0, 2.0, n_xi + 2)[1:-1]
    idx = np.searchsorted(field.grid, xi)
    xi = field.grid[idx]
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    pts = []
    for i, x in zip(idx, xi):
        base = curve.eval(x)
        R = field.R[i]
        for f in phi:
            pts.append(base + radius * (np.cos(f) * R[:, 1] + np.sin(f) * R[:, 2]))
    return curve, np.array(pts), 1.0


def narrowing(start: float = 0.6, end: float = 0.25, spacing: float = 0.05):
    """Walls converging linearly along a straight path."""
    x = np.arange(0.0, 1.0 + 1e-9, spacing)
    z = np.arange(-1.0, 1.0 + 1e-9, 2 * spacing)
    X, Z = np.meshgrid(x, z, indexing="ij")
    w = start + (end - start) * X.ravel()
    pts = [np.column_stack([X.ravel(), s * w, Z.ravel()]) for s in (1.0, -1.0)]
    return _line(), np.vstack(pts), 1.0


def scatter(n: int = 150, seed: int = 7):
    """Random points around a gently curved spatial path, none on the path."""
    curve = ExpressionCurve(["t", "0.2*sin(t)", "0.1*t**2"], (0.0, 2.0), name="arc")
    rng = np.random.default_rng(seed)
    xi = rng.uniform(0.05, 1.95, n)
    r = rng.uniform(0.25, 1.2, n)
    phi = rng.uniform(0, 2 * np.pi, n)
    base = curve.eval(xi)
    d1 = curve.eval(xi, 1)
    e1 = d1 / np.linalg.norm(d1, axis=1)[:, None]
    a = np.array([0.0, 0.0, 1.0])
    e2 = a - (e1 @ a)[:, None] * e1
    e2 /= np.linalg.norm(e2, axis=1)[:, None]
    e3 = np.cross(e1, e2)
    pts = base + r[:, None] * (np.cos(phi)[:, None] * e2 + np.sin(phi)[:, None] * e3)
    return curve, pts, 1.0


def build(name: str, **kw):
    return {"walls": walls, "single": single, "cylinder": cylinder, "narrowing": narrowing, "scatter": scatter}[name](**kw)


def manipulator_corridor(degree: int = 8, wide: float = 0.04, narrow: float = 0.015, n_obstacles: int = 41):
    """Sinusoidal reference of the two-link arm inside a corridor that narrows mid-path.

    Obstacle points sit at the lateral offsets ``+-w(xi)`` with
    ``w = wide - (wide - narrow) exp(-((xi - 0.5) / 0.1)^2)``; ``wide`` stays
    below the smallest radius of curvature of the sinusoid (about 0.0507).
    Returns ``(curve, corridor)``.
    """
    from .corridor import generate_planar
    from .curve import named_curve

    curve = named_curve("sin")
    xs = np.linspace(0.0, 1.0, n_obstacles)
    w = wide - (wide - narrow) * np.exp(-(((xs - 0.5) / 0.1) ** 2))
    obstacles = [(x, y) for x, y in zip(xs, w)] + [(x, -y) for x, y in zip(xs, w)]
    return curve, generate_planar(curve, None, obstacles, degree=degree)
