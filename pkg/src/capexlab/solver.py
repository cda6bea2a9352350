"""Bounded-variable primal simplex.

Two-phase revised simplex on ``A x + s = b`` with every column (structural,
row slack, artificial) carrying its own bounds. The basis is held as a sparse
LU factorization plus a product-form eta file, refactorized periodically.
Pricing is Dantzig's rule; after a streak of degenerate pivots the method
switches to Bland's smallest-index rule until progress resumes. Data is
equilibrated with power-of-two row/column scaling, so scaling itself adds no
rounding error.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .lp import GE, LE, LPInstance, LPSolution, Status

REFACTOR_EVERY = 64
DEGENERATE_STREAK = 40
PIVOT_TOL = 1e-9


def _pow2(v: np.ndarray) -> np.ndarray:
    return np.exp2(np.round(np.log2(v)))


def scale_factors(A: sp.csr_matrix, passes: int = 6) -> tuple[np.ndarray, np.ndarray]:
    """Geometric-mean row/column scaling followed by column equilibration.

    Returns power-of-two factors ``r`` (rows) and ``s`` (cols) such that
    ``diag(r) A diag(s)`` has entries of magnitude near one.
    """
    m, n = A.shape
    r = np.ones(m)
    s = np.ones(n)
    if A.nnz == 0:
        return r, s
    coo = A.tocoo()
    i, j, a = coo.row, coo.col, np.abs(coo.data)
    keep = a > 0
    i, j, a = i[keep], j[keep], a[keep]
    if len(a) == 0:
        return r, s
    la = np.log2(a)
    lr = np.zeros(m)
    ls = np.zeros(n)
    for _ in range(passes):
        v = la + lr[i] + ls[j]
        rmax = np.full(m, -np.inf)
        rmin = np.full(m, np.inf)
        np.maximum.at(rmax, i, v)
        np.minimum.at(rmin, i, v)
        ok = np.isfinite(rmax)
        lr[ok] -= 0.5 * (rmax[ok] + rmin[ok])
        v = la + lr[i] + ls[j]
        cmax = np.full(n, -np.inf)
        cmin = np.full(n, np.inf)
        np.maximum.at(cmax, j, v)
        np.minimum.at(cmin, j, v)
        ok = np.isfinite(cmax)
        ls[ok] -= 0.5 * (cmax[ok] + cmin[ok])
    v = la + lr[i] + ls[j]
    cmax = np.full(n, -np.inf)
    np.maximum.at(cmax, j, v)
    ok = np.isfinite(cmax)
    ls[ok] -= cmax[ok]
    return _pow2(np.exp2(lr)), _pow2(np.exp2(ls))


class _Basis:
    """LU of the basis matrix with a product-form eta file on top."""

    def __init__(self, A: sp.csc_matrix, basis: np.ndarray):
        self.A = A
        self.m = A.shape[0]
        self.refactor(basis)

    def refactor(self, basis: np.ndarray) -> None:
        self.etas: list[tuple[int, np.ndarray]] = []
        if self.m == 0:
            self.lu = None
            return
        B = self.A[:, basis].tocsc()
        self.lu = spla.splu(B, permc_spec="COLAMD", options={"SymmetricMode": False})

    def ftran(self, v: np.ndarray) -> np.ndarray:
        if self.m == 0:
            return v.copy()
        v = self.lu.solve(v)
        for p, alpha in self.etas:
            vp = v[p] / alpha[p]
            if vp != 0.0:
                v -= vp * alpha
            v[p] = vp
        return v

    def btran(self, w: np.ndarray) -> np.ndarray:
        if self.m == 0:
            return w.copy()
        w = w.copy()
        for p, alpha in reversed(self.etas):
            ap = alpha[p]
            w[p] = (w[p] - (w @ alpha - w[p] * ap)) / ap
        return self.lu.solve(w, trans="T")

    def update(self, p: int, alpha: np.ndarray) -> None:
        self.etas.append((p, alpha))


class _Simplex:
    def __init__(self, A, b, lb, ub, feas_tol, opt_tol, max_iter):
        self.A = A.tocsc()
        self.AT = self.A.T.tocsr()
        self.m, self.N = self.A.shape
        self.b = b
        self.lb = lb
        self.ub = ub
        self.feas_tol = feas_tol
        self.opt_tol = opt_tol
        self.max_iter = max_iter
        self.iterations = 0
        self.pivots: list[tuple[int, int]] = []

    def column(self, j: int) -> np.ndarray:
        col = np.zeros(self.m)
        lo, hi = self.A.indptr[j], self.A.indptr[j + 1]
        col[self.A.indices[lo:hi]] = self.A.data[lo:hi]
        return col

    def start(self, basis: np.ndarray, x: np.ndarray) -> None:
        self.basis = basis.copy()
        self.x = x.copy()
        self.in_basis = np.zeros(self.N, dtype=bool)
        self.in_basis[self.basis] = True
        self.factor = _Basis(self.A, self.basis)
        self.recompute_basic()

    def recompute_basic(self) -> None:
        if self.m == 0:
            return
        xn = self.x.copy()
        xn[self.basis] = 0.0
        rhs = self.b - self.A @ xn
        self.x[self.basis] = self.factor.ftran(rhs)

    def run(self, c: np.ndarray) -> Status:
        """Iterate to optimality for cost ``c`` from the current basis."""
        streak = 0
        bland = False
        tol = self.feas_tol
        while True:
            if self.iterations >= self.max_iter:
                return Status.ITERATION_LIMIT
            if len(self.factor.etas) >= REFACTOR_EVERY:
                self.factor.refactor(self.basis)
                self.recompute_basic()

            y = self.factor.btran(c[self.basis])
            d = c - self.AT @ y if self.m else c.copy()
            nb = ~self.in_basis
            can_inc = nb & (self.x < self.ub)
            can_dec = nb & (self.x > self.lb)
            inc = can_inc & (d < -self.opt_tol)
            dec = can_dec & (d > self.opt_tol)
            elig = inc | dec
            if not elig.any():
                return Status.OPTIMAL
            if bland:
                q = int(np.flatnonzero(elig)[0])
            else:
                score = np.where(elig, np.abs(d), -1.0)
                q = int(np.argmax(score))
            direction = 1.0 if inc[q] else -1.0

            alpha = self.factor.ftran(self.column(q))
            delta = -direction * alpha
            xb = self.x[self.basis]
            lbb = self.lb[self.basis]
            ubb = self.ub[self.basis]
            down = delta < -PIVOT_TOL
            up = delta > PIVOT_TOL
            exact = np.full(self.m, np.inf)
            with np.errstate(invalid="ignore", divide="ignore"):
                exact[down] = (xb[down] - lbb[down]) / -delta[down]
                exact[up] = (ubb[up] - xb[up]) / delta[up]
            exact = np.where(np.isnan(exact), np.inf, exact)
            flip = self.ub[q] - self.lb[q]

            if bland:
                theta_b = exact.min() if self.m else np.inf
                p = -1
                if np.isfinite(theta_b):
                    ties = np.flatnonzero(exact <= theta_b + 1e-12 * (1.0 + abs(theta_b)))
                    p = int(ties[np.argmin(self.basis[ties])])
                if flip <= theta_b:
                    p = -1
                    theta = flip
                else:
                    theta = max(theta_b, 0.0)
            else:
                relaxed = np.full(self.m, np.inf)
                with np.errstate(invalid="ignore", divide="ignore"):
                    relaxed[down] = (xb[down] - lbb[down] + tol) / -delta[down]
                    relaxed[up] = (ubb[up] - xb[up] + tol) / delta[up]
                relaxed = np.where(np.isnan(relaxed), np.inf, relaxed)
                theta_max = relaxed.min() if self.m else np.inf
                if flip <= theta_max:
                    p = -1
                    theta = flip
                elif not np.isfinite(theta_max):
                    p = -1
                    theta = np.inf
                else:
                    cand = exact <= theta_max
                    mag = np.where(cand, np.abs(delta), -1.0)
                    p = int(np.argmax(mag))
                    theta = max(exact[p], 0.0)

            if not np.isfinite(theta):
                return Status.UNBOUNDED

            self.iterations += 1
            if theta > 0.0:
                self.x[self.basis] += theta * delta
            if p < 0:
                self.x[q] = self.ub[q] if direction > 0 else self.lb[q]
                self.pivots.append((q, -1))
            else:
                leave = int(self.basis[p])
                self.x[q] += direction * theta
                self.x[leave] = self.lb[leave] if delta[p] < 0 else self.ub[leave]
                self.basis[p] = q
                self.in_basis[leave] = False
                self.in_basis[q] = True
                self.factor.update(p, alpha)
                self.pivots.append((q, leave))

            if theta <= 1e-12:
                streak += 1
                if streak >= DEGENERATE_STREAK:
                    bland = True
            else:
                streak = 0
                bland = False


def solve(
    lp: LPInstance,
    feas_tol: float = 1e-7,
    opt_tol: float = 1e-8,
    max_iter: int | None = None,
) -> LPSolution:
    """Solve ``lp`` with the bounded-variable primal simplex.

    Infeasibility is declared when the phase-one optimum leaves a total
    artificial residual above ``feas_tol`` (unscaled row units).
    """
    lp.check()
    m, n = lp.n_rows, lp.n_cols
    if max_iter is None:
        max_iter = 50_000 + 50 * (m + n)
    A0 = lp.matrix()
    r, s = scale_factors(A0)
    As = sp.diags(r) @ A0 @ sp.diags(s)
    cmax = np.max(np.abs(lp.c * s), initial=0.0)
    cscale = float(_pow2(np.array([1.0 / cmax]))[0]) if cmax > 0 else 1.0
    cs = lp.c * s * cscale
    bs = lp.b * r
    lbs = lp.lb / s
    ubs = lp.ub / s

    slack_lb = np.empty(m)
    slack_ub = np.empty(m)
    for i, sense in enumerate(lp.senses):
        if sense == LE:
            slack_lb[i], slack_ub[i] = 0.0, np.inf
        elif sense == GE:
            slack_lb[i], slack_ub[i] = -np.inf, 0.0
        else:
            slack_lb[i], slack_ub[i] = 0.0, 0.0

    x_struct = np.where(np.isfinite(lbs), lbs, np.where(np.isfinite(ubs), ubs, 0.0))
    resid = bs - As @ x_struct
    slack_val = np.zeros(m)
    basis = np.arange(n, n + m)
    art_rows: list[int] = []
    art_sign: list[float] = []
    for i in range(m):
        if slack_lb[i] - feas_tol <= resid[i] <= slack_ub[i] + feas_tol:
            slack_val[i] = resid[i]
        else:
            # slack parks at its bound nearest the residual; an artificial
            # absorbs the rest
            slack_val[i] = min(max(resid[i], slack_lb[i]), slack_ub[i])
            art_rows.append(i)
            art_sign.append(1.0 if resid[i] - slack_val[i] > 0 else -1.0)
    k = len(art_rows)
    blocks = [As, sp.identity(m, format="csr")]
    if k:
        blocks.append(
            sp.csr_matrix((art_sign, (art_rows, np.arange(k))), shape=(m, k))
        )
    Afull = sp.hstack(blocks, format="csc")
    lb = np.concatenate([lbs, slack_lb, np.zeros(k)])
    ub = np.concatenate([ubs, slack_ub, np.full(k, np.inf)])
    x = np.concatenate([x_struct, slack_val, np.zeros(k)])
    for a, i in enumerate(art_rows):
        basis[i] = n + m + a
        x[n + m + a] = abs(resid[i] - slack_val[i])

    spx = _Simplex(Afull, bs, lb, ub, feas_tol, opt_tol, max_iter)
    spx.start(basis, x)

    def finish(status: Status, cost: np.ndarray) -> LPSolution:
        xs = spx.x[:n] * s
        if spx.m:
            y = spx.factor.btran(cost[spx.basis]) * r / cscale
        else:
            y = np.zeros(0)
        return LPSolution(
            status=status,
            x=xs,
            objective=float(lp.c @ xs),
            duals=y,
            iterations=spx.iterations,
            pivots=spx.pivots,
        )

    c_full = np.concatenate([cs, np.zeros(m + k)])
    if k:
        c1 = np.concatenate([np.zeros(n + m), np.ones(k)])
        status = spx.run(c1)
        if status is Status.ITERATION_LIMIT:
            return finish(status, c1)
        spx.factor.refactor(spx.basis)
        spx.recompute_basic()
        art = np.maximum(spx.x[n + m :], 0.0)
        residual = float(np.sum(art / r[np.array(art_rows)]))
        if residual > feas_tol:
            return finish(Status.INFEASIBLE, c1)
        spx.lb[n + m :] = 0.0
        spx.ub[n + m :] = 0.0
        nonbasic_art = ~spx.in_basis[n + m :]
        spx.x[n + m :][nonbasic_art] = 0.0

    status = spx.run(c_full)
    spx.factor.refactor(spx.basis)
    spx.recompute_basic()
    return finish(status, c_full)
