"""Dense linear programming by the two-phase simplex method.

Problems are stated as::

    minimise  c @ x   subject to  A_ub @ x <= b_ub,  lo <= x <= hi

Finite bounds are folded into the inequality system ``G x <= h``.  The
solver works on the dual standard form ``min h @ y  s.t.  G.T @ y = -c,
y >= 0``, which has one row per primal variable and one column per primal
constraint -- a short, wide tableau that suits corridor programs with few
coefficients and many obstacle rows.  The primal solution is read off the
simplex multipliers of the optimal dual basis and certified independently
(primal feasibility, dual feasibility and zero duality gap).

Pricing uses the most negative reduced cost and switches to Bland's rule
after a run of degenerate pivots, so the method cannot cycle and is fully
deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import LpSolverError

OPTIMAL = "Optimal"
INFEASIBLE = "Infeasible"
UNBOUNDED = "Unbounded"

PIVOT_TOL = 1e-11
COST_TOL = 1e-10
CERT_TOL = 1e-8
DEGENERATE_RUN = 50
MAX_ITER = 100_000


@dataclass
class LpProblem:
    """``min c x`` s.t. ``A_ub x <= b_ub`` and ``bounds`` (default ``x >= 0``)."""

    c: np.ndarray
    A_ub: Optional[np.ndarray] = None
    b_ub: Optional[np.ndarray] = None
    bounds: Optional[Sequence] = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        n = len(self.c)
        if self.A_ub is None:
            self.A_ub = np.zeros((0, n))
            self.b_ub = np.zeros(0)
        self.A_ub = np.atleast_2d(np.asarray(self.A_ub, dtype=float))
        if self.A_ub.size == 0:
            self.A_ub = self.A_ub.reshape(0, n)
        self.b_ub = np.asarray(self.b_ub, dtype=float).ravel()
        if self.A_ub.shape != (len(self.b_ub), n):
            raise ValueError("A_ub must have shape (len(b_ub), len(c))")
        if self.bounds is None:
            self.bounds = [(0.0, np.inf)] * n
        elif len(self.bounds) == 2 and all(b is None or np.isscalar(b) for b in self.bounds):
            self.bounds = [tuple(self.bounds)] * n
        bnds = []
        for lo, hi in self.bounds:
            lo = -np.inf if lo is None else float(lo)
            hi = np.inf if hi is None else float(hi)
            if lo > hi:
                raise ValueError("bound lower > upper")
            bnds.append((lo, hi))
        if len(bnds) != n:
            raise ValueError("need one bound pair per variable")
        self.bounds = bnds
        for arr in (self.c, self.A_ub, self.b_ub):
            if np.any(np.isnan(arr)):
                raise ValueError("LP data contains NaN")

    @property
    def n(self) -> int:
        return len(self.c)

    def inequality_form(self):
        """All constraints as ``G x <= h`` (bounds appended as rows)."""
        rows = [self.A_ub]
        rhs = [self.b_ub]
        eye = np.eye(self.n)
        for j, (lo, hi) in enumerate(self.bounds):
            if np.isfinite(hi):
                rows.append(eye[j : j + 1])
                rhs.append([hi])
            if np.isfinite(lo):
                rows.append(-eye[j : j + 1])
                rhs.append([-lo])
        return np.vstack(rows), np.concatenate([np.asarray(r, dtype=float) for r in rhs])

    def to_text(self) -> str:
        """Free MPS-like dump: NAME/ROWS/COLUMNS/RHS/BOUNDS/ENDATA sections."""
        lines = ["NAME          LP", "ROWS", " N  obj"]
        lines += [f" L  r{i}" for i in range(len(self.b_ub))]
        lines.append("COLUMNS")
        for j in range(self.n):
            if self.c[j] != 0:
                lines.append(f"    x{j}  obj  {self.c[j]!r}")
            for i in np.nonzero(self.A_ub[:, j])[0]:
                lines.append(f"    x{j}  r{i}  {self.A_ub[i, j]!r}")
        lines.append("RHS")
        lines += [f"    rhs  r{i}  {b!r}" for i, b in enumerate(self.b_ub)]
        lines.append("BOUNDS")
        for j, (lo, hi) in enumerate(self.bounds):
            if lo == -np.inf and hi == np.inf:
                lines.append(f" FR bnd  x{j}")
                continue
            if lo != 0.0:
                lines.append(f" {'LO' if np.isfinite(lo) else 'MI'} bnd  x{j}" + (f"  {lo!r}" if np.isfinite(lo) else ""))
            if np.isfinite(hi):
                lines.append(f" UP bnd  x{j}  {hi!r}")
        lines.append("ENDATA")
        return "\n".join(lines) + "\n"


@dataclass
class LpSolution:
    x: Optional[np.ndarray]
    objective: float
    status: str
    iterations: int
    dual: Optional[np.ndarray] = None
    trace: list = field(default_factory=list)


class _Tableau:
    """Simplex tableau for ``min cost @ y  s.t.  A y = b, y >= 0`` with ``b >= 0``."""

    def __init__(self, A, b, basis):
        m, n = A.shape
        self.T = np.zeros((m + 1, n + 1))
        self.T[:m, :n] = A
        self.T[:m, n] = b
        self.basis = list(basis)
        self.iterations = 0
        self.trace = []

    def set_cost(self, cost):
        m = len(self.basis)
        self.T[m, :-1] = cost
        self.T[m, -1] = 0.0
        for r, j in enumerate(self.basis):
            if self.T[m, j] != 0.0:
                self.T[m] -= self.T[m, j] * self.T[r]

    def pivot(self, r, j):
        T = self.T
        T[r] /= T[r, j]
        col = T[:, j].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r])
        T[:, j] = 0.0
        T[r, j] = 1.0
        self.basis[r] = j
        self.iterations += 1

    def run(self, allowed: np.ndarray):
        """Iterate to optimality; returns ``"optimal"`` or ``"unbounded"``."""
        T = self.T
        m = len(self.basis)
        degenerate = 0
        while True:
            if self.iterations > MAX_ITER:
                raise LpSolverError("simplex iteration limit reached", self.trace)
            red = T[m, :-1]
            scale = 1.0 + np.abs(T[m, -1])
            cand = np.nonzero((red < -COST_TOL * scale) & allowed)[0]
            if len(cand) == 0:
                return "optimal"
            if degenerate >= DEGENERATE_RUN:
                j = int(cand[0])
            else:
                j = int(cand[np.argmin(red[cand])])
            col = T[:m, j]
            pos = np.nonzero(col > PIVOT_TOL)[0]
            if len(pos) == 0:
                return "unbounded"
            ratios = T[pos, -1] / col[pos]
            best = ratios.min()
            ties = pos[ratios <= best + 1e-12 * (1.0 + abs(best))]
            if degenerate >= DEGENERATE_RUN:
                r = int(min(ties, key=lambda i: self.basis[i]))
            else:
                r = int(ties[np.argmax(col[ties])])
            degenerate = degenerate + 1 if best <= 1e-14 else 0
            self.trace.append((self.iterations, j, r, float(T[m, -1])))
            self.pivot(r, j)


def _solve_standard(A, b, cost):
    """Two-phase simplex on ``min cost y, A y = b, y >= 0``.

    Returns ``(status, tableau, rows_kept)`` where status is ``optimal``,
    ``infeasible`` or ``unbounded``.
    """
    m, n = A.shape
    A = A.copy()
    b = b.copy()
    neg = b < 0
    A[neg] *= -1.0
    b[neg] *= -1.0
    tab = _Tableau(np.hstack([A, np.eye(m)]), b, range(n, n + m))
    phase1 = np.concatenate([np.zeros(n), np.ones(m)])
    tab.set_cost(phase1)
    tab.run(np.ones(n + m, dtype=bool))
    infeas = -tab.T[m, -1]
    if infeas > CERT_TOL * (1.0 + np.abs(b).max(initial=0.0)):
        return "infeasible", tab, None
    # drive remaining artificial variables out of the basis
    keep = list(range(m))
    for r in range(m):
        j = tab.basis[r]
        if j < n:
            continue
        row = tab.T[r, :n]
        nz = np.nonzero(np.abs(row) > 1e-9)[0]
        if len(nz):
            tab.pivot(r, int(nz[np.argmax(np.abs(row[nz]))]))
        else:
            keep.remove(r)
    if len(keep) < m:
        rows = keep + [m]
        tab.T = tab.T[rows]
        tab.basis = [tab.basis[r] for r in keep]
    tab.T = np.delete(tab.T, np.s_[n : n + m], axis=1)
    tab.set_cost(cost)
    status = tab.run(np.ones(n, dtype=bool))
    return status, tab, keep


def solve_lp(problem: LpProblem) -> LpSolution:
    """Solve an :class:`LpProblem`; infeasible/unbounded are statuses, not errors.

    Raises
    ------
    LpSolverError
        If the optimality certificate fails (numerical breakdown).
    """
    G, h = problem.inequality_form()
    n = problem.n
    rownorm = np.abs(G).max(axis=1) if len(G) else np.zeros(0)
    active = rownorm > 0
    if np.any(h[~active] < -CERT_TOL):
        return LpSolution(None, np.nan, INFEASIBLE, 0)
    Gs = G[active] / rownorm[active, None]
    hs = h[active] / rownorm[active]
    status, tab, keep = _solve_standard(Gs.T, -problem.c, hs)
    if status == "infeasible":
        # dual infeasible: primal is unbounded if it is feasible, else infeasible
        mcon = len(hs)
        A_aux = np.vstack([np.hstack([Gs.T, np.zeros((n, 1))]), np.ones((1, mcon + 1))])
        b_aux = np.concatenate([np.zeros(n), [1.0]])
        st, aux, _ = _solve_standard(A_aux, b_aux, np.concatenate([hs, [0.0]]))
        value = -aux.T[-1, -1]
        verdict = INFEASIBLE if st == "optimal" and value < -CERT_TOL else UNBOUNDED
        return LpSolution(None, -np.inf if verdict == UNBOUNDED else np.nan, verdict,
                          tab.iterations + aux.iterations, trace=tab.trace)
    if status == "unbounded":
        return LpSolution(None, np.nan, INFEASIBLE, tab.iterations, trace=tab.trace)
    basis = tab.basis
    A = Gs.T
    B = A[np.ix_(keep, basis)]
    try:
        x_keep = np.linalg.solve(B.T, hs[basis])
        y_b = np.linalg.solve(B, -problem.c[keep])
    except np.linalg.LinAlgError as exc:
        raise LpSolverError(f"singular final basis: {exc}", tab.trace) from exc
    x = np.zeros(n)
    x[keep] = x_keep
    y = np.zeros(len(hs))
    y[basis] = y_b
    # certificate
    scale_b = 1.0 + np.abs(h).max(initial=0.0)
    viol = float(np.max(G @ x - h, initial=0.0))
    if viol > CERT_TOL * scale_b:
        raise LpSolverError(f"certificate failed: primal violation {viol:.3g}", tab.trace)
    if np.min(y_b, initial=0.0) < -CERT_TOL * (1.0 + np.abs(y_b).max(initial=0.0)):
        raise LpSolverError("certificate failed: negative dual multiplier", tab.trace)
    stat = Gs.T @ y + problem.c
    if np.abs(stat).max(initial=0.0) > CERT_TOL * (1.0 + np.abs(problem.c).max(initial=0.0)):
        raise LpSolverError("certificate failed: stationarity residual", tab.trace)
    obj = float(problem.c @ x)
    gap = obj + float(hs @ y)
    if abs(gap) > CERT_TOL * (1.0 + abs(obj)):
        raise LpSolverError(f"certificate failed: duality gap {gap:.3g}", tab.trace)
    dual = np.zeros(len(h))
    dual[np.nonzero(active)[0]] = y / rownorm[active]
    return LpSolution(x, obj, OPTIMAL, tab.iterations, dual=dual[: len(problem.b_ub)], trace=tab.trace)
