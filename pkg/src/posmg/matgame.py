"""Two-person zero-sum matrix games.

The row player minimizes and the column player maximizes ``phi^T M psi``.
Games are solved by the classic LP reduction: shift ``M`` to be strictly
positive, then run a dense tableau simplex with Bland's rule on

    max sum(u)  s.t.  M'^T u <= 1, u >= 0

so that ``phi = u / sum(u)`` caps every column payoff at ``1 / sum(u)``.  The
dual (read off the slack reduced costs) gives the column strategy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PIVOT_EPS = 1e-12


@dataclass(frozen=True)
class SaddleSolution:
    value: float
    row_mix: np.ndarray
    col_mix: np.ndarray
    gap: float


def best_response_value(M, mix, side: str) -> float:
    """Opponent's best-response payoff against ``mix``.

    ``side="row"``: ``mix`` is a row strategy; returns ``max_j (mix^T M)_j``.
    ``side="col"``: ``mix`` is a column strategy; returns ``min_i (M mix)_i``.
    """
    M = np.asarray(M, dtype=float)
    mix = np.asarray(mix, dtype=float)
    if side == "row":
        if mix.shape != (M.shape[0],):
            raise ValueError(f"row mix has shape {mix.shape}, matrix has {M.shape[0]} rows")
        return float((mix @ M).max())
    if side == "col":
        if mix.shape != (M.shape[1],):
            raise ValueError(f"col mix has shape {mix.shape}, matrix has {M.shape[1]} columns")
        return float((M @ mix).min())
    raise ValueError(f"side must be 'row' or 'col', not {side!r}")


def _pure_saddle(M: np.ndarray):
    # first (row, col) in lexicographic order where the entry is both its
    # row's max and its column's min
    row_max = M.max(axis=1)
    col_min = M.min(axis=0)
    upper = row_max.min()
    lower = col_min.max()
    if upper != lower:
        return None
    for i in range(M.shape[0]):
        if row_max[i] != upper:
            continue
        for j in range(M.shape[1]):
            if col_min[j] == lower and M[i, j] == upper:
                return i, j
    return None


def _simplex(A: np.ndarray):
    """Bland's-rule simplex for ``max 1^T y, A y <= 1, y >= 0`` with ``A > 0``.

    Returns the primal ``y`` and the dual ``x`` (``A^T x >= 1``).
    """
    m, n = A.shape
    tab = np.zeros((m + 1, n + m + 1))
    tab[:m, :n] = A
    tab[:m, n:n + m] = np.eye(m)
    tab[:m, -1] = 1.0
    tab[m, :n] = -1.0
    basis = list(range(n, n + m))
    for _ in range(10_000):
        entering = next((j for j in range(n + m) if tab[m, j] < -PIVOT_EPS), None)
        if entering is None:
            break
        col = tab[:m, entering]
        best = None
        for i in range(m):
            if col[i] > PIVOT_EPS:
                ratio = tab[i, -1] / col[i]
                if best is None or ratio < best[0] - PIVOT_EPS or (
                    abs(ratio - best[0]) <= PIVOT_EPS and basis[i] < basis[best[1]]
                ):
                    best = (ratio, i)
        # A > 0 keeps the LP bounded, so a leaving row always exists
        r = best[1]
        tab[r] /= tab[r, entering]
        for i in range(m + 1):
            if i != r and tab[i, entering] != 0.0:
                tab[i] -= tab[i, entering] * tab[r]
        basis[r] = entering
    else:  # pragma: no cover
        raise RuntimeError("simplex did not terminate")
    y = np.zeros(n + m)
    for i, j in enumerate(basis):
        y[j] = tab[i, -1]
    dual = tab[m, n:n + m].copy()
    return np.clip(y[:n], 0.0, None), np.clip(dual, 0.0, None)


def solve_zero_sum(M) -> SaddleSolution:
    """Value and optimal mixed strategies of a finite zero-sum game.

    Pure saddle points are returned exactly (first one in row-major order);
    otherwise the LP is solved and the duality gap is certified by
    :func:`best_response_value`.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] < 1 or M.shape[1] < 1:
        raise ValueError(f"stage matrix must be 2-D and nonempty, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("stage matrix has non-finite entries")
    m, n = M.shape
    saddle = _pure_saddle(M)
    if saddle is not None:
        i, j = saddle
        row = np.zeros(m)
        row[i] = 1.0
        col = np.zeros(n)
        col[j] = 1.0
        return SaddleSolution(float(M[i, j]), row, col, 0.0)

    shift = 1.0 - M.min()
    u, z = _simplex((M + shift).T)
    total = u.sum()
    row = u / total
    col = z / z.sum()
    upper = best_response_value(M, row, "row")
    lower = best_response_value(M, col, "col")
    value = float(min(max(1.0 / total - shift, lower), upper))
    return SaddleSolution(value, row, col, float(max(upper - lower, 0.0)))
