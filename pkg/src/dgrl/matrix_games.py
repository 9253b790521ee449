"""Finite zero-sum matrix games.

Convention: the row player MINIMIZES, the column player MAXIMIZES.  Pure
selectors break ties by lowest index so training stays deterministic under a
fixed seed.  The mixed solver runs a self-contained simplex on the classical
LP reformulation after shifting entries positive.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

Array = np.ndarray


class MatrixGameError(Exception):
    """Raised for malformed matrices or a non-converged mixed solve."""


def _validate(matrix) -> Array:
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise MatrixGameError("payoff matrix must be 2-D and non-empty")
    if not np.all(np.isfinite(m)):
        raise MatrixGameError("payoff matrix has non-finite entries")
    return m


def pure_minimax(matrix) -> tuple[float, int]:
    """min over rows of max over columns; returns (value, row index)."""
    m = _validate(matrix)
    row_worst = m.max(axis=1)
    row = int(np.argmin(row_worst))
    return float(row_worst[row]), row


def pure_maximin(matrix) -> tuple[float, int]:
    """max over columns of min over rows; returns (value, column index)."""
    m = _validate(matrix)
    col_worst = m.min(axis=0)
    col = int(np.argmax(col_worst))
    return float(col_worst[col]), col


@dataclass(frozen=True)
class NashSolution:
    value: float
    row_dist: Array
    col_dist: Array
    epsilon: float


def nash_mixed(matrix, tol: float = 1e-6) -> NashSolution:
    """Value and optimal mixed strategies of the zero-sum game.

    Solves max 1'y s.t. A'y <= 1, y >= 0 (A = matrix shifted positive) by
    primal simplex with Bland's rule; the row strategy comes from the primal
    solution, the column strategy from the slack reduced costs (the dual).
    The returned pair is checked to be an epsilon-equilibrium with
    epsilon <= tol, otherwise the achieved epsilon is reported in the error.
    """
    m = _validate(matrix)
    shift = float(m.min()) - 1.0
    a = m - shift  # all entries >= 1
    nu, nv = a.shape

    y, duals = _simplex_max(a.T)
    total = float(y.sum())
    if total <= 0:
        raise MatrixGameError("simplex produced a degenerate solution")
    value_shifted = 1.0 / total
    row_dist = y / total
    dual_total = float(duals.sum())
    if dual_total <= 0:
        raise MatrixGameError("simplex produced degenerate duals")
    col_dist = duals / dual_total

    value = value_shifted + shift
    against_cols = row_dist @ m            # row player's exposure per column
    against_rows = m @ col_dist            # column player's exposure per row
    eps = max(float(against_cols.max() - value), float(value - against_rows.min()))
    if eps > tol:
        raise MatrixGameError(f"mixed solve did not converge: epsilon={eps:.3e}")
    return NashSolution(value, row_dist, col_dist, eps)


def _simplex_max(b_mat: Array, max_iter: int = 100000) -> tuple[Array, Array]:
    """Maximize 1'y subject to B y <= 1, y >= 0 with all entries of B > 0.

    Returns (y, duals) where duals are the optimal dual multipliers of the
    row constraints.  Bland's rule (lowest index) gives determinism and
    anti-cycling.
    """
    n_rows, n_vars = b_mat.shape
    # Tableau columns: structural vars, slacks, rhs.
    tab = np.zeros((n_rows + 1, n_vars + n_rows + 1))
    tab[:-1, :n_vars] = b_mat
    tab[:-1, n_vars:n_vars + n_rows] = np.eye(n_rows)
    tab[:-1, -1] = 1.0
    tab[-1, :n_vars] = -1.0  # objective row of max 1'y in minimization form
    basis = list(range(n_vars, n_vars + n_rows))

    for _ in range(max_iter):
        costs = tab[-1, :-1]
        entering = -1
        for j in range(n_vars + n_rows):
            if costs[j] < -1e-12:
                entering = j
                break
        if entering < 0:
            break
        col = tab[:-1, entering]
        rhs = tab[:-1, -1]
        best_ratio = np.inf
        leaving = -1
        for r in range(n_rows):
            if col[r] > 1e-12:
                ratio = rhs[r] / col[r]
                if ratio < best_ratio - 1e-15 or (
                        abs(ratio - best_ratio) <= 1e-15
                        and (leaving < 0 or basis[r] < basis[leaving])):
                    best_ratio = ratio
                    leaving = r
        if leaving < 0:
            raise MatrixGameError("simplex detected an unbounded LP")
        pivot = tab[leaving, entering]
        tab[leaving] /= pivot
        for r in range(n_rows + 1):
            if r != leaving and tab[r, entering] != 0.0:
                tab[r] -= tab[r, entering] * tab[leaving]
        basis[leaving] = entering
    else:
        raise MatrixGameError("simplex iteration limit reached")

    y = np.zeros(n_vars)
    for r, var in enumerate(basis):
        if var < n_vars:
            y[var] = tab[r, -1]
    duals = tab[-1, n_vars:n_vars + n_rows].copy()
    return y, duals
