"""Sparse linear program container shared by the formulation and the solvers."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

LE, EQ, GE = "<=", "==", ">="
SENSES = (LE, EQ, GE)


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    ITERATION_LIMIT = "IterationLimit"


@dataclass
class LPInstance:
    """min c'x  s.t.  A x (sense) b,  lb <= x <= ub.

    ``A`` is held as row-major triplets (``rows``, ``cols``, ``vals``).
    Duplicate triplets are summed.
    """

    c: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    senses: list[str]
    b: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    col_names: list[str] | None = None
    row_names: list[str] | None = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        self.rows = np.asarray(self.rows, dtype=np.int64)
        self.cols = np.asarray(self.cols, dtype=np.int64)
        self.vals = np.asarray(self.vals, dtype=float)
        self.lb = np.asarray(self.lb, dtype=float)
        self.ub = np.asarray(self.ub, dtype=float)
        self.senses = list(self.senses)

    @property
    def n_cols(self) -> int:
        return len(self.c)

    @property
    def n_rows(self) -> int:
        return len(self.b)

    def matrix(self) -> sp.csr_matrix:
        return sp.csr_matrix(
            (self.vals, (self.rows, self.cols)), shape=(self.n_rows, self.n_cols)
        )

    def dense(self) -> np.ndarray:
        return self.matrix().toarray()

    def check(self) -> None:
        """Raise ValueError if the instance breaks its structural invariants."""
        n, m = self.n_cols, self.n_rows
        if not (len(self.lb) == len(self.ub) == n):
            raise ValueError("bounds length does not match number of columns")
        if len(self.senses) != m:
            raise ValueError("senses length does not match number of rows")
        if not (len(self.rows) == len(self.cols) == len(self.vals)):
            raise ValueError("triplet arrays differ in length")
        if len(self.rows) and (self.rows.min() < 0 or self.rows.max() >= m):
            raise ValueError("triplet row index out of range")
        if len(self.cols) and (self.cols.min() < 0 or self.cols.max() >= n):
            raise ValueError("triplet column index out of range")
        if not np.all(np.isfinite(self.b)):
            raise ValueError("right-hand side must be finite")
        if not np.all(np.isfinite(self.c)):
            raise ValueError("objective must be finite")
        if np.any(self.lb > self.ub):
            raise ValueError("lb > ub for some column")
        bad = set(self.senses) - set(SENSES)
        if bad:
            raise ValueError(f"unknown row senses {sorted(bad)}")

    @classmethod
    def from_dense(cls, c, A, senses, b, lb=None, ub=None) -> "LPInstance":
        A = np.atleast_2d(np.asarray(A, dtype=float))
        r, k = np.nonzero(A)
        n = A.shape[1]
        return cls(
            c=c,
            rows=r,
            cols=k,
            vals=A[r, k],
            senses=senses,
            b=b,
            lb=np.zeros(n) if lb is None else lb,
            ub=np.full(n, np.inf) if ub is None else ub,
        )


@dataclass
class LPSolution:
    status: Status
    x: np.ndarray
    objective: float
    duals: np.ndarray
    iterations: int = 0
    pivots: list[tuple[int, int]] = field(default_factory=list, repr=False)

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


def primal_residual(lp: LPInstance, x: np.ndarray) -> float:
    """Largest violation of rows and bounds at ``x`` (absolute units)."""
    ax = lp.matrix() @ x
    worst = 0.0
    for i, s in enumerate(lp.senses):
        if s == LE:
            v = ax[i] - lp.b[i]
        elif s == GE:
            v = lp.b[i] - ax[i]
        else:
            v = abs(ax[i] - lp.b[i])
        worst = max(worst, v)
    if len(x):
        worst = max(worst, float(np.max(lp.lb - x, initial=0.0)))
        worst = max(worst, float(np.max(x - lp.ub, initial=0.0)))
    return worst


def dual_objective(lp: LPInstance, y: np.ndarray, tol: float = 1e-9) -> float:
    """Lagrangian dual value for row multipliers ``y`` (min-form convention).

    Reduced costs are pushed onto whichever finite bound makes the bound term
    a valid lower bound. A reduced cost beyond ``tol`` against an infinite
    bound yields ``-inf``; smaller ones are round-off and contribute nothing.
    """
    d = lp.c - lp.matrix().T @ y
    total = float(lp.b @ y)
    for j, dj in enumerate(d):
        if dj > 0:
            if np.isfinite(lp.lb[j]):
                total += dj * lp.lb[j]
            elif dj > tol:
                return -np.inf
        elif dj < 0:
            if np.isfinite(lp.ub[j]):
                total += dj * lp.ub[j]
            elif dj < -tol:
                return -np.inf
    return total


class LPBuilder:
    """Incremental construction of an :class:`LPInstance` with named columns."""

    def __init__(self):
        self._c: list[float] = []
        self._lb: list[float] = []
        self._ub: list[float] = []
        self._names: list[str] = []
        self._rows: list[int] = []
        self._cols: list[int] = []
        self._vals: list[float] = []
        self._senses: list[str] = []
        self._b: list[float] = []
        self._row_names: list[str] = []

    @property
    def n_cols(self) -> int:
        return len(self._c)

    @property
    def n_rows(self) -> int:
        return len(self._b)

    def add_var(self, name: str, lb=0.0, ub=np.inf, cost=0.0) -> int:
        self._names.append(name)
        self._lb.append(lb)
        self._ub.append(ub)
        self._c.append(cost)
        return len(self._c) - 1

    def add_cost(self, j: int, cost: float) -> None:
        self._c[j] += cost

    def set_bounds(self, j: int, lb: float, ub: float) -> None:
        self._lb[j] = lb
        self._ub[j] = ub

    def add_row(self, terms, sense: str, rhs: float, name: str = "") -> int:
        i = len(self._b)
        for j, v in terms:
            if v != 0.0:
                self._rows.append(i)
                self._cols.append(j)
                self._vals.append(v)
        self._senses.append(sense)
        self._b.append(rhs)
        self._row_names.append(name or f"r{i}")
        return i

    def build(self) -> LPInstance:
        return LPInstance(
            c=np.array(self._c),
            rows=np.array(self._rows, dtype=np.int64),
            cols=np.array(self._cols, dtype=np.int64),
            vals=np.array(self._vals),
            senses=self._senses,
            b=np.array(self._b),
            lb=np.array(self._lb),
            ub=np.array(self._ub),
            col_names=list(self._names),
            row_names=list(self._row_names),
        )
