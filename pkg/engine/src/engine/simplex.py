# /engine/src/engine/simplex.py

"""
精确有理数单纯形(表格法, Bland规则防止循环)。

只求解  max c·x  s.t.  A x ≤ b, x ≥ 0, 且 b ≥ 0 的问题: 原点可行, 不需要第一阶段。
最优表中松弛列的检验数就是对偶变量 y ≥ 0, 满足 yA ≥ c 且 y·b = c·x。
"""

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from common.logging import get_logger

from .errors import LinearProgramError

log = get_logger(__name__)


@dataclass(frozen=True)
class LPSolution:
    value: Fraction
    primal: tuple[Fraction, ...]
    dual: tuple[Fraction, ...]
    pivots: int


def maximize(
    c: Sequence[Fraction],
    A: Sequence[Sequence[Fraction]],
    b: Sequence[Fraction],
    max_pivots: int = 100_000,
) -> LPSolution:
    n = len(c)
    m = len(A)
    if any(len(row) != n for row in A) or len(b) != m:
        raise LinearProgramError("constraint matrix does not match the objective and bounds")
    if any(Fraction(v) < 0 for v in b):
        raise LinearProgramError("right-hand side must be nonnegative")

    width = n + m
    # 每行: [系数(n), 松弛(m), 右端]
    rows = [
        [Fraction(v) for v in A[i]] + [Fraction(int(i == j)) for j in range(m)] + [Fraction(b[i])]
        for i in range(m)
    ]
    objective = [-Fraction(v) for v in c] + [Fraction(0)] * m + [Fraction(0)]
    basis = [n + i for i in range(m)]

    pivots = 0
    while True:
        entering = next((j for j in range(width) if objective[j] < 0), None)
        if entering is None:
            break
        leaving = None
        best_ratio = None
        for i in range(m):
            coef = rows[i][entering]
            if coef <= 0:
                continue
            ratio = rows[i][-1] / coef
            if (
                best_ratio is None
                or ratio < best_ratio
                or (ratio == best_ratio and basis[i] < basis[leaving])  # type: ignore[index]
            ):
                best_ratio, leaving = ratio, i
        if leaving is None:
            raise LinearProgramError(f"objective is unbounded along column {entering}")

        pivot_row = rows[leaving]
        pivot = pivot_row[entering]
        rows[leaving] = pivot_row = [v / pivot for v in pivot_row]
        for i in range(m):
            if i != leaving and rows[i][entering] != 0:
                factor = rows[i][entering]
                rows[i] = [v - factor * p for v, p in zip(rows[i], pivot_row)]
        factor = objective[entering]
        objective = [v - factor * p for v, p in zip(objective, pivot_row)]
        basis[leaving] = entering

        pivots += 1
        if pivots > max_pivots:
            raise LinearProgramError(f"simplex did not finish within {max_pivots} pivots")

    primal = [Fraction(0)] * n
    for i, var in enumerate(basis):
        if var < n:
            primal[var] = rows[i][-1]
    dual = tuple(objective[n + i] for i in range(m))
    log.debug("Simplex finished.", pivots=pivots, value=str(objective[-1]))
    return LPSolution(value=objective[-1], primal=tuple(primal), dual=dual, pivots=pivots)
