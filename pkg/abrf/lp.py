"""
Dense two-phase simplex method.

Solves
    minimize    c^T x
    subject to  A_ub x <= b_ub,  A_eq x = b_eq,  x >= 0

on a full tableau with Bland's rule (lowest-index entering column with a
negative reduced cost; minimum-ratio leaving row, ties to the lowest basic
variable index), so it cannot cycle. Phase 1 only adds artificial
variables to rows whose slack cannot start in the basis.
"""

import numpy as np

from abrf.errors import InfeasibleError, SolverError, UnboundedError

PIVOT_TOL = 1e-10
FEASIBILITY_TOL = 1e-8


class LpResult:
    def __init__(self, x, objective, pivots):
        self.x = x
        self.objective = objective
        self.pivots = pivots

    def __repr__(self):
        return f"<LpResult objective={self.objective:.6g} pivots={self.pivots}>"


class _Tableau:
    """Constraint rows followed by one objective row; last column is the rhs."""

    def __init__(self, table, basis, max_pivots):
        self.table = table
        self.basis = basis
        self.max_pivots = max_pivots
        self.pivots = 0

    def pivot(self, row, col):
        T = self.table
        T[row] /= T[row, col]
        factors = T[:, col].copy()
        factors[row] = 0.0
        T -= np.outer(factors, T[row])
        self.basis[row] = col
        self.pivots += 1

    def entering(self):
        reduced = self.table[-1, :-1]
        candidates = np.flatnonzero(reduced < -PIVOT_TOL)
        return int(candidates[0]) if candidates.size else -1

    def leaving(self, col):
        column = self.table[:-1, col]
        rhs = self.table[:-1, -1]
        rows = np.flatnonzero(column > PIVOT_TOL)
        if rows.size == 0:
            return -1
        ratios = rhs[rows] / column[rows]
        best = ratios.min()
        ties = rows[ratios <= best + PIVOT_TOL * max(1.0, abs(best))]
        return int(min(ties, key=lambda r: self.basis[r]))

    def run(self):
        while True:
            col = self.entering()
            if col < 0:
                return
            row = self.leaving(col)
            if row < 0:
                raise UnboundedError("linear program is unbounded")
            if self.pivots >= self.max_pivots:
                raise SolverError(f"simplex pivot limit of {self.max_pivots} reached")
            self.pivot(row, col)


def linprog_simplex(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, max_pivots=20000) -> LpResult:
    c = np.asarray(c, dtype=float)
    n_vars = c.shape[0]
    A_ub = np.zeros((0, n_vars)) if A_ub is None else np.asarray(A_ub, dtype=float)
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float)
    A_eq = np.zeros((0, n_vars)) if A_eq is None else np.asarray(A_eq, dtype=float)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float)
    if not all(np.all(np.isfinite(a)) for a in (c, A_ub, b_ub, A_eq, b_eq)):
        raise SolverError("linear program has non-finite coefficients")

    n_ub, n_eq = A_ub.shape[0], A_eq.shape[0]
    n_rows = n_ub + n_eq

    # rows with a negative rhs are negated so that every rhs is >= 0
    A = np.vstack([A_ub, A_eq])
    b = np.concatenate([b_ub, b_eq])
    slack = np.zeros((n_rows, n_ub))
    slack[np.arange(n_ub), np.arange(n_ub)] = 1.0
    flip = b < 0
    A[flip] *= -1
    b[flip] *= -1
    slack[flip] *= -1

    # a slack with coefficient +1 can start in the basis; other rows need an artificial
    needs_artificial = np.ones(n_rows, dtype=bool)
    needs_artificial[:n_ub] = flip[:n_ub]
    artificial_rows = np.flatnonzero(needs_artificial)
    n_art = artificial_rows.size
    art = np.zeros((n_rows, n_art))
    art[artificial_rows, np.arange(n_art)] = 1.0

    n_cols = n_vars + n_ub + n_art
    table = np.zeros((n_rows + 1, n_cols + 1))
    table[:n_rows, :n_vars] = A
    table[:n_rows, n_vars:n_vars + n_ub] = slack
    table[:n_rows, n_vars + n_ub:n_cols] = art
    table[:n_rows, -1] = b

    basis = np.empty(n_rows, dtype=np.int64)
    basis[:n_ub] = n_vars + np.arange(n_ub)
    basis[artificial_rows] = n_vars + n_ub + np.arange(n_art)

    tableau = _Tableau(table, basis, max_pivots)
    first_artificial = n_vars + n_ub

    # Phase 1: minimise the sum of artificials
    if n_art:
        table[-1, first_artificial:n_cols] = 1.0
        table[-1] -= table[artificial_rows].sum(axis=0)
        tableau.run()
        if -table[-1, -1] > FEASIBILITY_TOL * max(1.0, np.abs(b).max(initial=0.0)):
            raise InfeasibleError("linear program has no feasible point")

        # drive artificials out of the basis, dropping redundant rows
        keep = np.ones(n_rows + 1, dtype=bool)
        for row in range(n_rows):
            if tableau.basis[row] < first_artificial:
                continue
            entries = np.abs(table[row, :first_artificial])
            cols = np.flatnonzero(entries > PIVOT_TOL)
            if cols.size:
                tableau.pivot(row, int(cols[0]))
            else:
                keep[row] = False
        tableau.table = np.delete(table, np.arange(first_artificial, n_cols), axis=1)[keep]
        tableau.basis = tableau.basis[keep[:-1]]
    else:
        tableau.table = np.delete(table, np.arange(first_artificial, n_cols), axis=1)

    # Phase 2: original costs expressed in the current basis
    table = tableau.table
    n_cols = table.shape[1] - 1
    cost = np.zeros(n_cols)
    cost[:n_vars] = c
    table[-1, :-1] = cost
    table[-1, -1] = 0.0
    for row, col in enumerate(tableau.basis):
        if cost[col] != 0.0:
            table[-1] -= cost[col] * table[row]
    tableau.run()

    x = np.zeros(n_cols)
    x[tableau.basis] = table[:-1, -1]
    x = np.maximum(x[:n_vars], 0.0)
    return LpResult(x, float(c @ x), tableau.pivots)
