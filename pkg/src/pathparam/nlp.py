"""Augmented-Lagrangian solver for bound-constrained nonlinear programs.

Problems have the form::

    minimise f(z)  s.t.  c(z) = 0,  g(z) <= 0,  lb <= z <= ub

The outer loop is the Powell-Hestenes-Rockafellar method of multipliers.
Each subproblem minimises the augmented Lagrangian over the bounds, either
with a projected Newton method whose Hessian approximation combines the
exact Gauss-Newton term ``rho J^T J`` with finite differences of the
Lagrangian gradient (columns grouped by a greedy colouring of the sparsity
pattern), or with L-BFGS-B.  All callables return values together with
(sparse) Jacobians.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sps
from scipy.optimize import minimize

log = logging.getLogger(__name__)


@dataclass
class NlpProblem:
    """Callables: ``cost(z) -> (f, grad)``, ``eq(z) -> (c, Jc)``, ``ineq(z) -> (g, Jg)``.

    ``cost_pattern`` optionally lists the index pairs ``(i, j)`` where the
    cost Hessian may be nonzero; by default every pair of variables with a
    nonzero cost gradient is assumed coupled.
    """

    n: int
    lb: np.ndarray
    ub: np.ndarray
    cost: Callable
    eq: Callable
    ineq: Callable
    layout: dict = field(default_factory=dict)
    cost_pattern: Optional[np.ndarray] = None

    def violation(self, z) -> float:
        """Largest equality, inequality or bound violation at ``z``."""
        c, _ = self.eq(z)
        g, _ = self.ineq(z)
        parts = [
            np.abs(c).max(initial=0.0),
            np.maximum(g, 0.0).max(initial=0.0),
            np.maximum(self.lb - z, 0.0).max(initial=0.0),
            np.maximum(z - self.ub, 0.0).max(initial=0.0),
        ]
        return float(max(parts))


@dataclass
class SolverReport:
    converged: bool
    outer_iterations: int
    inner_iterations: int
    max_violation: float
    projected_gradient: float
    cost_history: list
    merit_history: list
    message: str = ""


@dataclass
class AlOptions:
    tol_violation: float = 1e-5
    tol_gradient: float = 1e-4
    max_outer: int = 200
    rho0: float = 10.0
    rho_max: float = 1e8
    rho_growth: float = 10.0
    inner: str = "newton"
    inner_maxiter: int = 200
    inner_tol: float = 1e-5
    slacks: bool = True


# ------------------------------------------------------------- helpers


def _colour_groups(pattern: sps.spmatrix, free: np.ndarray) -> list:
    """Greedy colouring of Hessian columns for finite differencing.

    ``pattern`` holds one row per coupling (constraint or cost term); the
    Hessian pattern is ``pattern^T pattern`` and columns in one group must
    have disjoint Hessian supports.
    """
    P = sps.csc_matrix(pattern, dtype=bool)
    HP = sps.csr_matrix((P.T @ P).astype(bool))
    conflict = sps.csr_matrix((HP.T @ HP).astype(bool))
    colour = np.full(HP.shape[1], -1)
    groups: list = []
    for j in np.nonzero(free)[0]:
        taken = {colour[k] for k in conflict.indices[conflict.indptr[j]:conflict.indptr[j + 1]] if colour[k] >= 0}
        c = next(i for i in range(len(groups) + 1) if i not in taken)
        if c == len(groups):
            groups.append([])
        groups[c].append(j)
        colour[j] = c
    return [np.array(g) for g in groups]


def _hessian_pattern(problem: NlpProblem, z) -> sps.csr_matrix:
    n = problem.n
    _, Jc = problem.eq(z)
    _, Jg = problem.ineq(z)
    if problem.cost_pattern is not None:
        pairs = np.asarray(problem.cost_pattern, dtype=int).reshape(-1, 2)
        C = sps.coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    else:
        _, df = problem.cost(z)
        nz = np.nonzero(df)[0]
        C = sps.coo_matrix((np.ones(len(nz) ** 2), (np.repeat(nz, len(nz)), np.tile(nz, len(nz)))), shape=(n, n))
    # pattern rows: constraint rows plus the cost couplings (each as its own row)
    rows = sps.vstack([sps.csr_matrix(Jc != 0), sps.csr_matrix(Jg != 0), _pair_rows(C, n)])
    return sps.csr_matrix(rows, dtype=bool)


def _pair_rows(C, n):
    C = sps.coo_matrix(C)
    k = len(C.row)
    r = np.concatenate([np.arange(k), np.arange(k)])
    c = np.concatenate([C.row, C.col])
    return sps.csr_matrix((np.ones(2 * k), (r, c)), shape=(k, n))


def _projected_gradient(z, grad, lb, ub) -> float:
    return float(np.abs(z - np.clip(z - grad, lb, ub)).max(initial=0.0))


class _Subproblem:
    """Augmented Lagrangian with fixed multipliers and penalty."""

    def __init__(self, problem: NlpProblem, lam, mu, rho):
        self.p, self.lam, self.mu, self.rho = problem, lam, mu, rho

    def value_grad(self, z):
        p, lam, mu, rho = self.p, self.lam, self.mu, self.rho
        f, df = p.cost(z)
        c, Jc = p.eq(z)
        g, Jg = p.ineq(z)
        shifted = np.maximum(0.0, mu + rho * g)
        val = f + lam @ c + 0.5 * rho * c @ c + (shifted @ shifted - mu @ mu) / (2.0 * rho)
        grad = df + Jc.T @ (lam + rho * c) + Jg.T @ shifted
        return float(val), grad

    def lagrangian_grad(self, z, yc, yg):
        _, df = self.p.cost(z)
        _, Jc = self.p.eq(z)
        _, Jg = self.p.ineq(z)
        return df + Jc.T @ yc + Jg.T @ yg

    def hessian(self, z, free, groups):
        """Dense Hessian approximation on the free variables."""
        p, rho = self.p, self.rho
        c, Jc = p.eq(z)
        g, Jg = p.ineq(z)
        yc = self.lam + rho * c
        yg = np.maximum(0.0, self.mu + rho * g)
        active = yg > 0
        base = self.lagrangian_grad(z, yc, yg)
        H = np.zeros((p.n, p.n))
        for grp in groups:
            h = 1e-7 * (1.0 + np.abs(z[grp]))
            zp = z.copy()
            zp[grp] += h
            diff = self.lagrangian_grad(zp, yc, yg) - base
            for j, hj in zip(grp, h):
                rows = self.pattern_cols[j]
                H[rows, j] = diff[rows] / hj
        H = 0.5 * (H + H.T)
        JcF = Jc[:, free].toarray() if sps.issparse(Jc) else Jc[:, free]
        JgF = Jg[active][:, free].toarray() if sps.issparse(Jg) else Jg[active][:, free]
        return H[np.ix_(free, free)] + rho * (JcF.T @ JcF + JgF.T @ JgF)


def _box_qp(A, g, lo, hi, maxiter: int = 50):
    """Minimise ``g.s + s.A.s/2`` subject to ``lo <= s <= hi`` for positive definite ``A``.

    Primal-dual active-set iteration; ``lo <= 0 <= hi`` is assumed so that
    ``s = 0`` is feasible.  Returns the last primal iterate, clipped to the box.
    """
    n = len(g)
    d = np.maximum(np.diag(A), 1e-300)
    s = np.zeros(n)
    lam = -g.copy()
    prev = None
    for _ in range(maxiter):
        t = s + lam / d
        on_lo, on_hi = t < lo, t > hi
        key = (on_lo.tobytes(), on_hi.tobytes())
        if key == prev:
            break
        prev = key
        inact = ~(on_lo | on_hi)
        s = np.where(on_lo, lo, np.where(on_hi, hi, 0.0))
        if inact.any():
            rhs = -(g[inact] + A[np.ix_(inact, ~inact)] @ s[~inact])
            s[inact] = sla.cho_solve(sla.cho_factor(A[np.ix_(inact, inact)], lower=True, check_finite=False),
                                     rhs, check_finite=False)
        lam = -(A @ s + g)
        lam[inact] = 0.0
    return np.clip(s, lo, hi)


def _newton_inner(sub: _Subproblem, z, lb, ub, groups, tol, maxiter, stop=None):
    """Damped Newton iterations on the box.

    Each step minimises the local quadratic model of the merit, with a
    Levenberg-Marquardt term ``damp * I``, over the box; the resulting step
    is accepted only if it decreases the merit.  The damping shrinks after
    steps that agree well with the model and grows after poor or rejected
    ones.  ``stop(z, pg)`` may end the iteration early.
    """
    idx = np.nonzero(lb < ub)[0]
    val, grad = sub.value_grad(z)
    damp = 0.0
    it = 0
    for it in range(1, maxiter + 1):
        pg = _projected_gradient(z, grad, lb, ub)
        if pg <= tol or (stop is not None and stop(z, pg)):
            break
        H = sub.hessian(z, idx, groups)
        scale = max(np.abs(np.diag(H)).max(initial=0.0), 1.0)
        gF, lo, hi = grad[idx], lb[idx] - z[idx], ub[idx] - z[idx]
        accepted = False
        for _ in range(60):
            try:
                sF = _box_qp(H + damp * np.eye(len(idx)), gF, lo, hi)
            except sla.LinAlgError:
                damp = max(4.0 * damp, 1e-8 * scale)
                continue
            trial = z.copy()
            trial[idx] = np.clip(z[idx] + sF, lb[idx], ub[idx])
            pred = -(gF @ sF + 0.5 * sF @ H @ sF)
            tval, tgrad = sub.value_grad(trial)
            actual = val - tval
            if actual > 0.0 and pred > 0.0 and actual >= 1e-4 * pred:
                ratio = actual / pred
                if ratio > 0.75:
                    damp = 0.0 if damp < 1e-8 * scale else damp / 4.0
                    # long shallow valleys: keep stretching the step while it pays
                    for _ in range(20):
                        far = z.copy()
                        far[idx] = np.clip(z[idx] + 2.0 * (trial[idx] - z[idx]), lb[idx], ub[idx])
                        fval, fgrad = sub.value_grad(far)
                        if not fval < tval:
                            break
                        trial, tval, tgrad = far, fval, fgrad
                elif ratio < 0.25:
                    damp = max(2.0 * damp, 1e-8 * scale)
                accepted = True
                break
            damp = max(4.0 * damp, 1e-8 * scale)
            if damp > 1e12 * scale:
                break
        log.debug("  newton %d: merit=%.12g pg=%.3g damp=%.3g", it, val, pg, damp)
        if not accepted:
            break
        z, val, grad = trial, tval, tgrad
    return z, val, it


def _append_identity(Jc, Jg, n):
    """CSR matrix ``[[Jc, 0], [Jg, I]]`` assembled directly from the CSR arrays."""
    Jc, Jg = sps.csr_matrix(Jc), sps.csr_matrix(Jg)
    m = Jg.shape[0]
    counts = np.diff(Jg.indptr)
    row_of = np.repeat(np.arange(m), counts)
    pos_g = np.arange(Jg.nnz) + row_of
    pos_i = Jg.indptr[1:] + np.arange(m)
    data = np.empty(Jg.nnz + m)
    cols = np.empty(Jg.nnz + m, dtype=Jg.indices.dtype)
    data[pos_g], cols[pos_g] = Jg.data, Jg.indices
    data[pos_i], cols[pos_i] = 1.0, n + np.arange(m)
    indptr = np.concatenate([Jc.indptr, Jc.nnz + Jg.indptr[1:] + np.arange(1, m + 1)])
    return sps.csr_matrix((np.concatenate([Jc.data, data]), np.concatenate([Jc.indices, cols]), indptr),
                          shape=(Jc.shape[0] + m, n + m))


def _with_slacks(problem: NlpProblem, z):
    """Equivalent problem with ``g(z) + s = 0, s >= 0`` in place of ``g(z) <= 0``.

    Keeps the augmented Lagrangian twice differentiable, so the Newton inner
    solver sees a smooth merit and the box handles the sign of the slacks.
    """
    n = problem.n
    g, _ = problem.ineq(z)
    m = len(g)

    def cost(w):
        f, df = problem.cost(w[:n])
        return f, np.concatenate([df, np.zeros(m)])

    def eq(w):
        c, Jc = problem.eq(w[:n])
        gv, Jg = problem.ineq(w[:n])
        return np.concatenate([c, gv + w[n:]]), _append_identity(Jc, Jg, n)

    def ineq(w):
        return np.zeros(0), sps.csr_matrix((0, n + m))

    cost_pattern = problem.cost_pattern
    if cost_pattern is None:
        _, df = problem.cost(z)
        nz = np.nonzero(df)[0]
        cost_pattern = np.column_stack([np.repeat(nz, len(nz)), np.tile(nz, len(nz))])
    aug = NlpProblem(n + m, np.concatenate([problem.lb, np.zeros(m)]),
                     np.concatenate([problem.ub, np.full(m, np.inf)]), cost, eq, ineq,
                     layout=problem.layout, cost_pattern=cost_pattern)
    return aug, np.concatenate([z, np.maximum(0.0, -g)])


def solve_augmented_lagrangian(problem: NlpProblem, z0, options: AlOptions | None = None):
    """Method of multipliers with bound-constrained subproblems.

    Returns ``(z, report)``.  Terminates when the maximum violation and the
    projected gradient of the Lagrangian meet their tolerances, or after
    ``max_outer`` outer iterations (reported as not converged).  Each
    subproblem starts from the previous iterate and only accepts descent
    steps, so the augmented Lagrangian never increases within an outer
    iteration (``merit_history`` records the value before and after each
    subproblem).
    """
    opt = options or AlOptions()
    if opt.inner not in ("newton", "lbfgsb"):
        raise ValueError(f"unknown inner solver {opt.inner!r}")
    original = problem
    z = np.clip(np.asarray(z0, dtype=float), problem.lb, problem.ub)
    if opt.slacks and len(problem.ineq(z)[0]):
        problem, z = _with_slacks(problem, z)
    lb, ub = problem.lb, problem.ub
    c, _ = problem.eq(z)
    g, _ = problem.ineq(z)
    lam = np.zeros(len(c))
    mu = np.zeros(len(g))
    rho = opt.rho0
    prev_viol = np.inf
    inner_total = 0
    costs, merits = [], []
    groups = pattern_cols = None
    if opt.inner == "newton":
        pattern = _hessian_pattern(problem, z)
        groups = _colour_groups(pattern, lb < ub)
        hp = sps.csc_matrix((pattern.T @ pattern).astype(bool))
        pattern_cols = [hp.indices[hp.indptr[j]:hp.indptr[j + 1]] for j in range(problem.n)]

    report = None
    viol = pg = np.inf
    for k in range(1, opt.max_outer + 1):
        sub = _Subproblem(problem, lam, mu, rho)
        sub.pattern_cols = pattern_cols
        before, _ = sub.value_grad(z)
        if opt.inner == "newton":
            # the merit gradient equals the Lagrangian gradient after the multiplier
            # update, so a point that already meets the outer tolerances is final
            def kkt(w, pg):
                return pg <= opt.tol_gradient and problem.violation(w) <= opt.tol_violation

            z, after, nit = _newton_inner(sub, z, lb, ub, groups, opt.inner_tol, opt.inner_maxiter, kkt)
        else:
            res = minimize(sub.value_grad, z, jac=True, method="L-BFGS-B", bounds=list(zip(lb, ub)),
                           options={"maxiter": opt.inner_maxiter, "gtol": opt.inner_tol, "ftol": 1e-16,
                                    "maxcor": 30})
            z, after, nit = np.clip(res.x, lb, ub), float(res.fun), int(res.nit)
        merits.append((float(before), float(after)))
        inner_total += nit
        c, Jc = problem.eq(z)
        g, Jg = problem.ineq(z)
        lam = lam + rho * c
        mu = np.maximum(0.0, mu + rho * g)
        f, df = problem.cost(z)
        costs.append(float(f))
        pg = _projected_gradient(z, df + Jc.T @ lam + Jg.T @ mu, lb, ub)
        viol = original.violation(z[:original.n])
        log.debug("outer %d: cost=%.9g viol=%.3g pg=%.3g rho=%.3g inner=%d", k, f, viol, pg, rho, nit)
        if viol <= opt.tol_violation and pg <= opt.tol_gradient:
            report = SolverReport(True, k, inner_total, viol, pg, costs, merits, "converged")
            break
        if viol > opt.tol_violation and viol > 0.25 * prev_viol:
            rho = min(rho * opt.rho_growth, opt.rho_max)
        prev_viol = viol
    if report is None:
        report = SolverReport(False, opt.max_outer, inner_total, viol, pg, costs, merits,
                              "outer iteration limit reached")
    return z[:original.n], report
