"""Minimum-cost bipartite assignment with infeasible cells"""

import numpy as np
from scipy.optimize import linear_sum_assignment

INFEASIBLE = np.inf


class AssignmentService:
    """Hungarian assignment shared by online association and global link"""

    @staticmethod
    def solve_assignment(
        cost: np.ndarray, infeasible_mark: float = INFEASIBLE
    ) -> list[tuple[int, int]]:
        """
        Match rows to columns over feasible cells

        Among matchings that use the largest possible number of feasible
        cells, the one with minimum total cost is returned. Cells that are
        non-finite or >= infeasible_mark are never matched.

        Args:
            cost: (M, N) cost matrix
            infeasible_mark: Cost at or above which a cell is infeasible

        Returns:
            (row, col) pairs sorted by row
        """
        cost = np.asarray(cost, dtype=float)
        if cost.size == 0:
            return []
        feasible = np.isfinite(cost) & (cost < infeasible_mark)
        if not feasible.any():
            return []
        # big-M: feasible totals differ by less than M
        big_m = 2.0 * float(np.abs(cost[feasible]).sum()) + 1.0
        padded = np.where(feasible, cost, big_m)
        rows, cols = linear_sum_assignment(padded)
        return [
            (int(r), int(c)) for r, c in zip(rows, cols) if feasible[r, c]
        ]

    @staticmethod
    def unmatched(
        matches: list[tuple[int, int]], num_rows: int, num_cols: int
    ) -> tuple[list[int], list[int]]:
        """Rows and columns left out of a matching, in index order"""
        matched_rows = {r for r, _ in matches}
        matched_cols = {c for _, c in matches}
        return (
            [r for r in range(num_rows) if r not in matched_rows],
            [c for c in range(num_cols) if c not in matched_cols],
        )
