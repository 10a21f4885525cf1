# /engine/src/engine/fragmentation.py

"""
碎片化: 上闭族的递增链 C_1 ⊆ C_2 ⊆ … , 其并为 B+。

有限后端按层存储极小生成元, 稳定层L是第一个包含全部原子的层;
U_n = B − C_n, 并约定 U_0 = B, 且 n ≥ L 时 U_n = {0}。
Cantor后端没有有限的L, 用每个元素的"层函数"(最小的n使 a ∈ C_n)给出闭式规则。
"""

import random
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Callable, Dict, Iterator, Optional, Sequence

from common.logging import get_logger
from common.models import Element, FragmentationReport, GradedCheck, GradingIndices, PackingResult

from .algebra import (
    BooleanAlgebra,
    CantorAlgebra,
    FiniteAlgebra,
    UpwardClosedFamily,
    max_disjoint_packing,
    upward_closure,
)
from .config import get_settings
from .errors import AlgebraInputError, BudgetExhaustedError, GradingError
from .parallel import run_partitioned
from .submeasure import Submeasure

log = get_logger(__name__)

# 不属于任何层的元素(只有0)的层号
NEVER = 1 << 30

LevelFunction = Callable[[Element], int]


@dataclass(frozen=True)
class Fragmentation:
    algebra: BooleanAlgebra
    levels: tuple[UpwardClosedFamily, ...] = ()
    level_fn: Optional[LevelFunction] = field(default=None, compare=False)
    source: str = ""
    # σ-bounded cc 的每层界 K_n(可选)
    bounds: Dict[int, int] = field(default_factory=dict, compare=False, hash=False)
    # 由graded_subfragmentation选出的原始下标
    selection: tuple[int, ...] = ()

    @property
    def finite(self) -> bool:
        return isinstance(self.algebra, FiniteAlgebra) and bool(self.levels)

    @property
    def stabilization(self) -> Optional[int]:
        return len(self.levels) if self.finite else None

    def finite_algebra(self) -> FiniteAlgebra:
        if not self.finite:
            raise AlgebraInputError("operation needs a finite-backend fragmentation")
        return self.algebra  # type: ignore[return-value]

    def level(self, n: int) -> UpwardClosedFamily:
        """第n层 C_n(1 ≤ n ≤ L)。"""
        if not 1 <= n <= len(self.levels):
            raise AlgebraInputError(f"level {n} outside 1..{len(self.levels)}")
        return self.levels[n - 1]

    @cached_property
    def level_index(self) -> list[int]:
        """有限后端: 每个掩码所在的最小层号; 由生成元经超集取最小(SOS)传播得到。"""
        algebra = self.finite_algebra()
        lev = [NEVER] * (1 << algebra.n_atoms)
        for n, family in enumerate(self.levels, start=1):
            for g in family.generators:
                lev[g] = min(lev[g], n)  # type: ignore[index]
        for i in range(algebra.n_atoms):
            bit = 1 << i
            for a in range(1 << algebra.n_atoms):
                if a & bit and lev[a ^ bit] < lev[a]:
                    lev[a] = lev[a ^ bit]
        return lev

    def level_of(self, a: Element) -> int:
        """最小的n使 a ∈ C_n; 0返回NEVER。"""
        a = self.algebra.own(a)
        if self.finite:
            return self.level_index[a]  # type: ignore[index]
        if self.level_fn is None:
            raise AlgebraInputError("fragmentation has neither levels nor a level rule")
        return NEVER if self.algebra.is_zero(a) else self.level_fn(a)

    def member(self, n: int, a: Element) -> bool:
        """a ∈ C_n。C_0 = ∅; 有限后端 n > L 时 C_n = C_L。"""
        return n >= 1 and self.level_of(a) <= n

    def in_u(self, n: int, a: Element) -> bool:
        """a ∈ U_n = B − C_n。"""
        return not self.member(n, a)

    def maximal_u(self, k: int) -> list[int]:
        """U_k的极大元(有限后端); U_k向下封闭, 由它们完全确定。"""
        algebra = self.finite_algebra()
        lev = self.level_index
        out = []
        for a in algebra.elements():
            if lev[a] <= k:
                continue
            if all(lev[a | (1 << i)] <= k for i in range(algebra.n_atoms) if not a >> i & 1):
                out.append(a)
        return out

    def with_bounds(self, bounds: Dict[int, int]) -> "Fragmentation":
        return Fragmentation(
            algebra=self.algebra,
            levels=self.levels,
            level_fn=self.level_fn,
            source=self.source,
            bounds=dict(bounds),
            selection=self.selection,
        )


def _ceil_div(num: int, den: int) -> int:
    return -(-num // den)


def harmonic_level(value: Fraction) -> int:
    """最小的n ≥ 1 使 value ≥ 1/n。"""
    if value <= 0:
        return NEVER
    return max(1, _ceil_div(value.denominator, value.numerator))


def dyadic_level(value: Fraction) -> int:
    """最小的n ≥ 1 使 value ≥ 2^-n。"""
    if value <= 0:
        return NEVER
    n = 1
    while value * (1 << n) < 1:
        n += 1
    return n


def levels_from_index(algebra: FiniteAlgebra, lev: Sequence[int]) -> tuple[UpwardClosedFamily, ...]:
    """由层号表得出每层的极小生成元: a是C_n的生成元 ⇔ lev(a) ≤ n < min_i lev(a − i)。"""
    size = 1 << algebra.n_atoms
    stabilization = max(lev[a] for a in range(1, size))
    gens: list[list[int]] = [[] for _ in range(stabilization + 1)]
    for a in range(1, size):
        low = lev[a]
        high = min((lev[a & ~(1 << i)] for i in range(algebra.n_atoms) if a >> i & 1), default=NEVER)
        for n in range(low, min(high, stabilization + 1)):
            gens[n].append(a)
    return tuple(
        UpwardClosedFamily(algebra=algebra, generators=tuple(gens[n]))
        for n in range(1, stabilization + 1)
    )


def _from_submeasure(m: Submeasure, rule: Callable[[Fraction], int], source: str) -> Fragmentation:
    witness = m.positivity_witness()
    if witness is not None:
        raise AlgebraInputError(
            f"submeasure is not strictly positive: m({m.algebra.format(witness)}) = 0"
        )
    if isinstance(m.algebra, FiniteAlgebra):
        lev = [rule(v) for v in m.table()]
        zero = next((a for a in range(1, len(lev)) if lev[a] == NEVER), None)
        if zero is not None:
            raise AlgebraInputError(
                f"submeasure is not strictly positive: m({zero:#x}) = 0"
            )
        levels = levels_from_index(m.algebra, lev)
        log.info("Fragmentation built from submeasure.", source=source, levels=len(levels))
        return Fragmentation(algebra=m.algebra, levels=levels, source=source)
    return Fragmentation(
        algebra=m.algebra, level_fn=lambda a: rule(m.eval(a)), source=source
    )


def from_submeasure_harmonic(m: Submeasure) -> Fragmentation:
    """C_n = {a : m(a) ≥ 1/n}。"""
    return _from_submeasure(m, harmonic_level, "harmonic")


def from_submeasure_dyadic(m: Submeasure) -> Fragmentation:
    """C_n = {a : m(a) ≥ 2^-n}; m次可加时总是graded。"""
    return _from_submeasure(m, dyadic_level, "dyadic")


def from_generators(
    algebra: FiniteAlgebra, levels: Sequence[Sequence[int]], source: str = "file"
) -> Fragmentation:
    """由每层的生成元列表构造(例如读取碎片化文件), 生成元先化为极小反链。"""
    families = tuple(upward_closure(algebra, gens) for gens in levels)
    if not families:
        raise AlgebraInputError("a fragmentation needs at least one level")
    return Fragmentation(algebra=algebra, levels=families, source=source)


def validate_fragmentation(f: Fragmentation) -> FragmentationReport:
    """检查链性质、生成元两两不可比、以及穷尽性(C_L ⊇ B+)。"""
    if not f.finite:
        # 规则给出的层按构造满足链性质与穷尽性
        return FragmentationReport(valid=True, levels=0)
    algebra = f.finite_algebra()
    issues: list[str] = []
    for n, family in enumerate(f.levels, start=1):
        gens = family.generators
        for i, g in enumerate(gens):
            for h in gens[i + 1 :]:
                if algebra.leq(g, h) or algebra.leq(h, g):
                    issues.append(f"level {n}: generators {g:#x} and {h:#x} are comparable")
        if n < len(f.levels):
            upper = f.levels[n]
            for g in gens:
                if not upper.member(g):
                    issues.append(f"chain broken: {g:#x} in C_{n} but not in C_{n + 1}")
    top = f.levels[-1]
    for atom in algebra.atoms():
        if not top.member(atom):
            issues.append(f"atom {atom:#x} is in no level")
    return FragmentationReport(valid=not issues, levels=len(f.levels), issues=tuple(issues))


def _submasks_ascending(g: int) -> Iterator[int]:
    s = 0
    while True:
        yield s
        s = ((s | ~g) + 1) & g
        if s == 0:
            return


def check_graded(
    f: Fragmentation,
    n: int,
    jobs: Optional[int] = None,
    samples: Optional[int] = None,
    seed: int = 0,
) -> GradedCheck:
    """
    a ∨ b ∈ C_n ⇒ a ∈ C_{n+1} 或 b ∈ C_{n+1}。

    有限后端只需检查C_n的生成元g的所有二分 g = a ∨ b(a, b不交):
    若 c ⊇ g 有坏分解, 与g相交后得到g的坏分解(U_{n+1}向下封闭)。
    """
    if n < 1:
        raise AlgebraInputError("graded check starts at level 1")
    if not f.finite:
        return _check_graded_sampled(f, n, samples or 200, seed)

    lev = f.level_index
    upper = n + 1
    gens = sorted(f.level(min(n, len(f.levels))).generators)  # type: ignore[type-var]

    def scan(block: Sequence[int]) -> Optional[tuple[int, int]]:
        for g in block:
            for a in _submasks_ascending(g):
                b = g ^ a
                if lev[a] > upper and lev[b] > upper:
                    return a, b
        return None

    witness = run_partitioned(scan, gens, jobs or get_settings().JOBS)
    if witness is None:
        return GradedCheck(level=n, graded=True)
    log.info("Graded check found a witness.", level=n, a=hex(witness[0]), b=hex(witness[1]))
    return GradedCheck(level=n, graded=False, witness_a=witness[0], witness_b=witness[1])


def _check_graded_sampled(f: Fragmentation, n: int, samples: int, seed: int) -> GradedCheck:
    """Cantor后端: 只沿规范节点的加细抽样分解。"""
    algebra = f.algebra
    assert isinstance(algebra, CantorAlgebra)
    rng = random.Random(seed)
    for _ in range(samples):
        c = algebra.random_element(rng)
        if not f.member(n, c):
            continue
        nodes = algebra.refine(c, algebra.depth(c) + 1)
        for _ in range(4):
            left = [x for x in nodes if rng.getrandbits(1)]
            a = algebra.element(*left)
            b = algebra.element(*(x for x in nodes if x not in left))
            if not f.member(n + 1, a) and not f.member(n + 1, b):
                return GradedCheck(level=n, graded=False, witness_a=a, witness_b=b, sampled=True)
    return GradedCheck(level=n, graded=True, sampled=True)


def is_graded(f: Fragmentation, jobs: Optional[int] = None) -> GradedCheck:
    """对所有 n < L 检查graded; 返回第一个失败的层或最后一个通过的结果。"""
    top = f.stabilization
    if top is None:
        raise AlgebraInputError("is_graded needs a finite-backend fragmentation")
    result = GradedCheck(level=max(top - 1, 0), graded=True)
    for n in range(1, top):
        result = check_graded(f, n, jobs=jobs)
        if not result.graded:
            return result
    return result


def check_sigma_cc(f: Fragmentation, n: int, budget: Optional[int] = None) -> PackingResult:
    """C_n内反链的精确最大规模K_n(σ-finite cc在有限规模上的重新解释)。"""
    f.finite_algebra()
    return max_disjoint_packing(f.level(n), budget=budget)


def sigma_bounds(f: Fragmentation, budget: Optional[int] = None) -> Fragmentation:
    """为每一层填入K_n; 任一层预算耗尽则抛出BudgetExhaustedError。"""
    bounds: Dict[int, int] = {}
    for n in range(1, len(f.levels) + 1):
        result = check_sigma_cc(f, n, budget=budget)
        if not result.exact:
            raise BudgetExhaustedError(
                f"K_{n} is unknown beyond {result.size}", steps=result.steps, best=result.witness
            )
        bounds[n] = result.size
    return f.with_bounds(bounds)


def join_closed_into(f: Fragmentation, k: int, n: int) -> bool:
    """U_k ∨ U_k ⊆ U_n, 只需检查U_k的极大元两两之并。"""
    lev = f.level_index
    tops = f.maximal_u(k)
    return all(
        lev[x | y] > n for i, x in enumerate(tops) for y in tops[i:]
    )


def find_grading_indices(f: Fragmentation) -> GradingIndices:
    """对每个 n < L 给出最小的 k ≤ L 使 U_k ∨ U_k ⊆ U_n, 不存在则为None。"""
    top = f.stabilization
    if top is None:
        raise AlgebraInputError("find_grading_indices needs a finite-backend fragmentation")
    indices: Dict[int, Optional[int]] = {}
    for n in range(1, top):
        # U_k随k递减, 性质对k单调, 所以线性扫描得到的第一个k就是最小的
        indices[n] = next((k for k in range(1, top + 1) if join_closed_into(f, k, n)), None)
    log.info("Grading indices computed.", indices=indices)
    return GradingIndices(indices=indices)


def graded_subfragmentation(f: Fragmentation) -> Fragmentation:
    """选出 n_1 = 1 < n_2 < … = L, 使 U_{n_{j+1}} ∨ U_{n_{j+1}} ⊆ U_{n_j}, 再重新编号。"""
    top = f.stabilization
    if top is None:
        raise AlgebraInputError("graded_subfragmentation needs a finite-backend fragmentation")
    indices = find_grading_indices(f).indices
    chosen = [1]
    while chosen[-1] < top:
        k = indices.get(chosen[-1])
        if k is None:
            raise GradingError(
                f"no grading index for level {chosen[-1]} within L={top}", level=chosen[-1]
            )
        # U随下标递减, 把k推到当前下标之后仍然满足包含关系
        chosen.append(max(k, chosen[-1] + 1))
    log.info("Graded subfragmentation selected.", indices=chosen)
    return Fragmentation(
        algebra=f.algebra,
        levels=tuple(f.levels[i - 1] for i in chosen),
        source=f"graded-sub({f.source})",
        selection=tuple(chosen),
    )


def check_index_law(f: Fragmentation, indices: Sequence[int]) -> bool:
    """graded链的下标律: U_{n_1+1} ∨ … ∨ U_{n_k+1} ⊆ U_{n_1}(n_1 < … < n_k)。"""
    if list(indices) != sorted(set(indices)) or not indices:
        raise AlgebraInputError("indices must be strictly increasing and nonempty")
    lev = f.level_index
    joined = {0}
    for n in indices:
        tops = f.maximal_u(n + 1)
        joined = {x | y for x in joined for y in tops}
    return all(lev[x] > indices[0] for x in joined)
