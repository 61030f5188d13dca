"""Phase-1 simplex for linear feasibility problems ``A x = b, x >= 0``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput, NumericallyAmbiguous

PIVOT_TOL = 1e-10
FEASIBLE_TOL = 1e-9
INFEASIBLE_TOL = 1e-7


@dataclass(frozen=True)
class FeasibilityProblem:
    a_eq: np.ndarray
    b_eq: np.ndarray

    def __post_init__(self):
        a = np.array(self.a_eq, dtype=float)
        b = np.array(self.b_eq, dtype=float).reshape(-1)
        if a.ndim != 2:
            raise InvalidInput("constraint matrix must be two-dimensional")
        if a.shape[0] != b.shape[0]:
            raise InvalidInput(f"{a.shape[0]} constraint rows but {b.shape[0]} right-hand sides")
        if a.shape[1] == 0:
            raise InvalidInput("problem has no variables")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise InvalidInput("constraint data must be finite")
        object.__setattr__(self, "a_eq", a)
        object.__setattr__(self, "b_eq", b)

    @property
    def n_variables(self) -> int:
        return self.a_eq.shape[1]


@dataclass(frozen=True)
class FeasibilityResult:
    feasible: bool
    x: np.ndarray | None
    phase1_objective: float
    residual: float
    iterations: int


def _pivot(tableau: np.ndarray, row: int, col: int) -> None:
    tableau[row] /= tableau[row, col]
    factors = tableau[:, col].copy()
    factors[row] = 0.0
    tableau -= np.outer(factors, tableau[row])


def lp_feasibility(
    problem: FeasibilityProblem,
    pivot_tol: float = PIVOT_TOL,
    feasible_tol: float = FEASIBLE_TOL,
    infeasible_tol: float = INFEASIBLE_TOL,
    max_iter: int = 100_000,
) -> FeasibilityResult:
    """Find some ``x >= 0`` with ``A x = b`` by minimizing the sum of artificials.

    Bland's rule picks entering and leaving variables, so the method cannot
    cycle. A phase-1 optimum above ``infeasible_tol`` certifies infeasibility;
    one between the two tolerances raises :class:`NumericallyAmbiguous`.
    """
    a, b = problem.a_eq, problem.b_eq
    m, n = a.shape
    sign = np.where(b < 0, -1.0, 1.0)
    a_pos = a * sign[:, None]
    b_pos = b * sign

    # rows 0..m-1 constraints, row m reduced costs of the phase-1 objective
    tableau = np.zeros((m + 1, n + m + 1))
    tableau[:m, :n] = a_pos
    tableau[:m, n:n + m] = np.eye(m)
    tableau[:m, -1] = b_pos
    tableau[m, :n] = -a_pos.sum(axis=0)
    tableau[m, -1] = -b_pos.sum()
    basis = list(range(n, n + m))

    iterations = 0
    while True:
        reduced = tableau[m, :n]
        candidates = np.flatnonzero(reduced < -pivot_tol)
        if candidates.size == 0:
            break
        col = int(candidates[0])
        column = tableau[:m, col]
        rows = np.flatnonzero(column > pivot_tol)
        if rows.size == 0:
            # cannot happen: phase-1 objective is bounded below by zero
            raise NumericallyAmbiguous("phase-1 objective reported unbounded")
        ratios = tableau[rows, -1] / column[rows]
        best = ratios.min()
        tied = rows[ratios <= best + 1e-12 * max(1.0, abs(best))]
        row = int(min(tied, key=lambda r: basis[r]))
        _pivot(tableau, row, col)
        basis[row] = col
        iterations += 1
        if iterations >= max_iter:
            raise NumericallyAmbiguous(f"no phase-1 optimum after {max_iter} pivots")

    objective = max(-tableau[m, -1], 0.0)
    if objective > infeasible_tol:
        return FeasibilityResult(False, None, objective, np.inf, iterations)

    # recompute basic values from the original data to shed pivoting error
    full = np.hstack([a_pos, np.eye(m)])
    z = np.zeros(n + m)
    z[basis] = np.linalg.lstsq(full[:, basis], b_pos, rcond=None)[0]
    x = z[:n]
    x[x < 0] = 0.0
    residual = float(np.max(np.abs(a @ x - b))) if m else 0.0
    if objective <= feasible_tol and residual <= feasible_tol:
        return FeasibilityResult(True, x, objective, residual, iterations)
    raise NumericallyAmbiguous(
        f"phase-1 objective {objective:.3e} with residual {residual:.3e} is neither clearly feasible nor infeasible"
    )
