"""Brute-force LP oracle for small instances.

The instance is rewritten over nonnegative variables (shifting finite lower
bounds, mirroring upper-only bounds, splitting free columns), which makes the
feasible polyhedron pointed. Its vertices are enumerated by solving every
square system of active constraints; unboundedness is decided by enumerating
the vertices of the normalized recession cone ``{d >= 0, A d ~ 0, sum d = 1}``.
"""

from __future__ import annotations

import itertools

import numpy as np

from .lp import EQ, LE, LPInstance, LPSolution, Status, primal_residual

MAX_SIZE = 12
_CHUNK = 20000


class OracleSizeError(ValueError):
    pass


def _standardize(lp: LPInstance):
    """Map ``lp`` onto ``u >= 0``: returns (T, t0, c_u, E, e, G, h).

    ``x = T u + t0``; equalities ``E u = e``; inequalities ``G u <= h``
    (nonnegativity excluded).
    """
    A = lp.dense()
    n = lp.n_cols
    T_cols = []
    t0 = np.zeros(n)
    ub_rows = []
    for j in range(n):
        lo, hi = lp.lb[j], lp.ub[j]
        e = np.zeros(n)
        e[j] = 1.0
        if np.isfinite(lo):
            t0[j] = lo
            T_cols.append(e)
            if np.isfinite(hi):
                ub_rows.append((len(T_cols) - 1, hi - lo))
        elif np.isfinite(hi):
            t0[j] = hi
            T_cols.append(-e)
        else:
            T_cols.append(e)
            T_cols.append(-e)
    T = np.array(T_cols).T if T_cols else np.zeros((n, 0))
    nu = T.shape[1]
    Au = A @ T
    bu = lp.b - A @ t0
    E, e, G, h = [], [], [], []
    for i, sense in enumerate(lp.senses):
        if sense == EQ:
            E.append(Au[i])
            e.append(bu[i])
        elif sense == LE:
            G.append(Au[i])
            h.append(bu[i])
        else:
            G.append(-Au[i])
            h.append(-bu[i])
    for k, width in ub_rows:
        row = np.zeros(nu)
        row[k] = 1.0
        G.append(row)
        h.append(width)
    E = np.array(E).reshape(-1, nu)
    G = np.array(G).reshape(-1, nu)
    return T, t0, lp.c @ T, float(lp.c @ t0), E, np.array(e), G, np.array(h)


def _null_space(E: np.ndarray, tol: float = 1e-10):
    if E.shape[0] == 0:
        return np.eye(E.shape[1]), E.shape[1]
    _, sv, vt = np.linalg.svd(E)
    rank = int(np.sum(sv > tol * max(1.0, sv[0])))
    return vt[rank:].T, rank


def enumerate_vertices(E, e, G, h, tol: float = 1e-9) -> np.ndarray:
    """All vertices of ``{u >= 0, E u = e, G u <= h}`` as rows of an array."""
    nu = E.shape[1]
    if E.shape[0]:
        u0, *_ = np.linalg.lstsq(E, e, rcond=None)
        if np.max(np.abs(E @ u0 - e)) > tol * (1.0 + np.max(np.abs(e))):
            return np.zeros((0, nu))
    else:
        u0 = np.zeros(nu)
    Z, _ = _null_space(E)
    dim = Z.shape[1]
    # all inequalities in w-space: rows P w <= q, u = u0 + Z w
    P = np.vstack([G @ Z, -Z]) if G.shape[0] else -Z
    q = np.concatenate([h - G @ u0, u0]) if G.shape[0] else u0.copy()
    if dim == 0:
        ok = np.all(q >= -tol * (1.0 + np.abs(q)))
        return u0[None, :] if ok else np.zeros((0, nu))
    found = []
    combos = itertools.combinations(range(P.shape[0]), dim)
    while True:
        chunk = list(itertools.islice(combos, _CHUNK))
        if not chunk:
            break
        idx = np.array(chunk)
        M = P[idx]
        rhs = q[idx]
        sign, logdet = np.linalg.slogdet(M)
        ok = (sign != 0) & (logdet > -30.0)
        if not ok.any():
            continue
        w = np.linalg.solve(M[ok], rhs[ok][..., None])[..., 0]
        viol = w @ P.T - q
        feas = np.all(viol <= tol * (1.0 + np.abs(q)), axis=1)
        if feas.any():
            found.append(u0 + w[feas] @ Z.T)
    if not found:
        return np.zeros((0, nu))
    return np.vstack(found)


def oracle_solve(lp: LPInstance, tol: float = 1e-9) -> LPSolution:
    """Exact optimum of a small LP by exhaustive basic-solution enumeration."""
    lp.check()
    if lp.n_cols > MAX_SIZE or lp.n_rows > MAX_SIZE:
        raise OracleSizeError(
            f"oracle handles at most {MAX_SIZE} variables and rows, "
            f"got {lp.n_cols} x {lp.n_rows}"
        )
    T, t0, cu, c0, E, e, G, h = _standardize(lp)
    nu = T.shape[1]
    empty = LPSolution(Status.INFEASIBLE, np.full(lp.n_cols, np.nan), np.nan, np.zeros(lp.n_rows))
    if nu == 0:
        x = t0
        if primal_residual(lp, x) > tol:
            return empty
        return LPSolution(Status.OPTIMAL, x, float(lp.c @ x), np.zeros(lp.n_rows))
    V = enumerate_vertices(E, e, G, h, tol)
    if len(V) == 0:
        return empty
    # recession directions: E d = 0, G d <= 0, d >= 0, sum d = 1
    Er = np.vstack([E, np.ones((1, nu))])
    er = np.concatenate([np.zeros(E.shape[0]), [1.0]])
    R = enumerate_vertices(Er, er, G, np.zeros(G.shape[0]), tol)
    if len(R) and np.min(R @ cu) < -tol:
        return LPSolution(Status.UNBOUNDED, np.full(lp.n_cols, np.nan), -np.inf, np.zeros(lp.n_rows))
    vals = V @ cu
    best = int(np.argmin(vals))
    x = T @ V[best] + t0
    return LPSolution(Status.OPTIMAL, x, float(vals[best] + c0), np.zeros(lp.n_rows))

