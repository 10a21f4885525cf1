# /engine/src/engine/construction.py

"""
由graded碎片化构造严格正的穷竭子测度:

    V_r = U_{n_1} ∨ … ∨ U_{n_k}   (r = Σ 2^-n_i ∈ D),   V_1 = U_0 = B,
    m(a) = inf{r ∈ D ∪ {1} : a ∈ V_r}.

U_n都向下封闭, 所以分解 a = x_1 ∨ … ∨ x_k 可以只取a的原子划分:
把y换成y ∧ −x不会离开y所在的U。块允许为空(0属于每个U_n)。
有限后端上 n ≥ L 时 U_n = {0}, 因此D截断到下标 < L, 下确界即为最小值。
"""

import itertools
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Optional, Sequence

from common.logging import get_logger
from common.models import (
    AxiomReport,
    ConstructionReport,
    Element,
    MembershipResult,
    SandwichRow,
)

from .algebra import BooleanAlgebra, CantorAlgebra, FiniteAlgebra, max_disjoint_packing
from .config import get_settings
from .errors import AlgebraInputError, BudgetExhaustedError, GradingError
from .fragmentation import NEVER, Fragmentation, is_graded
from .submeasure import Submeasure, TableSubmeasure, check_axioms, level_family

log = get_logger(__name__)

CONSTRUCTION_NOTE = "inf over an empty set of r < 1 is taken as 1 (V_1 = B)"


@dataclass(frozen=True)
class DyadicIndex:
    """有限的正整数下标集 n_1 < … < n_k, 表示 r = Σ 2^-n_i。"""

    indices: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.indices:
            raise AlgebraInputError("a dyadic index needs at least one level")
        if any(n < 1 for n in self.indices):
            raise AlgebraInputError("dyadic indices must be positive")
        if list(self.indices) != sorted(set(self.indices)):
            raise AlgebraInputError("dyadic indices must be distinct and sorted")

    @property
    def value(self) -> Fraction:
        return sum((Fraction(1, 1 << n) for n in self.indices), Fraction(0))

    @classmethod
    def of(cls, *indices: int) -> "DyadicIndex":
        return cls(tuple(sorted(indices)))

    @classmethod
    def from_value(cls, r: Fraction) -> "DyadicIndex":
        """二进制展开; r必须是(0, 1)内的二进有理数。"""
        r = Fraction(r)
        den = r.denominator
        if not 0 < r < 1 or den & (den - 1):
            raise AlgebraInputError(f"{r} is not a dyadic rational in (0, 1)")
        top = den.bit_length() - 1
        num = r.numerator
        return cls(tuple(top - i for i in range(top) if num >> i & 1)[::-1])

    def __str__(self) -> str:
        return "{" + ",".join(map(str, self.indices)) + "}"


def dyadic_indices(max_level: int) -> list[DyadicIndex]:
    """下标都 ≤ max_level 的全部DyadicIndex, 按取值递增。"""
    levels = range(1, max_level + 1)
    out = [
        DyadicIndex(combo)
        for k in range(1, max_level + 1)
        for combo in itertools.combinations(levels, k)
    ]
    return sorted(out, key=lambda r: r.value)


@dataclass(frozen=True)
class DecompositionWitness:
    """V_r的成员证书: 两两不交的 (part, level), 并为目标元素, part ∈ U_level。"""

    target: Element
    parts: tuple[tuple[Element, int], ...]

    def verify(self, f: Fragmentation) -> bool:
        algebra = f.algebra
        parts = [p for p, _ in self.parts]
        for i, p in enumerate(parts):
            if any(not algebra.disjoint(p, q) for q in parts[i + 1 :]):
                return False
        if algebra.join_all(parts) != algebra.own(self.target):
            return False
        return all(f.in_u(n, p) for p, n in self.parts)


class _LocalView:
    """把a拆成若干两两不交的小块, 在块的掩码上计算层号。"""

    def __init__(self, f: Fragmentation, a: Element, pieces: Sequence[Element]) -> None:
        self.f = f
        self.algebra = f.algebra
        self.target = a
        self.pieces = list(pieces)
        self._levels: dict[int, int] = {0: NEVER}

    @property
    def size(self) -> int:
        return len(self.pieces)

    @property
    def full(self) -> int:
        return (1 << len(self.pieces)) - 1

    def element(self, mask: int) -> Element:
        return self.algebra.join_all(p for i, p in enumerate(self.pieces) if mask >> i & 1)

    def level(self, mask: int) -> int:
        if mask not in self._levels:
            self._levels[mask] = self.f.level_of(self.element(mask))
        return self._levels[mask]

    def level_table(self) -> list[int]:
        return [self.level(mask) for mask in range(1 << self.size)]


def _view(f: Fragmentation, a: Element) -> _LocalView:
    algebra = f.algebra
    a = algebra.own(a)
    if isinstance(algebra, CantorAlgebra):
        return _LocalView(f, a, _cantor_pieces(algebra, a))
    return _LocalView(f, a, algebra.atoms_below(a))


def _cantor_pieces(algebra: CantorAlgebra, a: Element) -> list[Element]:
    """把a加细到块数不超过CANTOR_MAX_REFINED_ATOMS的最深深度。"""
    cap = get_settings().CANTOR_MAX_REFINED_ATOMS
    depth = algebra.depth(a)
    if len(algebra.refine(a, depth)) > cap:
        raise AlgebraInputError(
            f"{algebra.format(a)} needs more than {cap} pieces at its own depth"
        )
    while len(algebra.refine(a, depth + 1)) <= cap:
        depth += 1
    return [frozenset({x}) for x in algebra.refine(a, depth)]


def v_member(
    f: Fragmentation, a: Element, r: DyadicIndex, budget: Optional[int] = None
) -> MembershipResult:
    """
    a ∈ V_r: 依次为每个下标n_i选出剩余原子的一个子集 x_i ∈ U_{n_i}, 最后一块取走全部剩余。
    以 (块序号, 剩余掩码) 记忆化; 预算耗尽时返回unknown, 从不静默地返回false。
    """
    view = _view(f, a)
    budget = budget or get_settings().BUDGET_STEPS
    levels = r.indices
    memo: dict[tuple[int, int], Optional[int]] = {}
    steps = 0

    def search(i: int, rem: int) -> Optional[int]:
        """返回第i块的选择, 使剩余部分可以分完; 不可能时为None。"""
        nonlocal steps
        key = (i, rem)
        if key in memo:
            return memo[key]
        steps += 1
        if steps > budget:
            raise BudgetExhaustedError(f"v_member exceeded {budget} steps", steps=steps)
        choice: Optional[int] = None
        if i == len(levels) - 1:
            choice = rem if view.level(rem) > levels[i] else None
        else:
            x = 0
            while True:
                # 子集按数值递增枚举, 先尝试让低层块小
                if view.level(x) > levels[i] and search(i + 1, rem ^ x) is not None:
                    choice = x
                    break
                if x == rem:
                    break
                x = ((x | ~rem) + 1) & rem
        memo[key] = choice
        return choice

    try:
        found = search(0, view.full) is not None
    except BudgetExhaustedError:
        log.warning("Decomposition search hit the step budget.", r=str(r), budget=budget)
        return MembershipResult(status="unknown", steps=steps)
    if not found:
        return MembershipResult(status="not_member", steps=steps)

    parts = []
    rem = view.full
    for i, n in enumerate(levels):
        x = memo[(i, rem)]
        assert x is not None
        parts.append((view.element(x), n))
        rem ^= x
    return MembershipResult(status="member", witness=tuple(parts), steps=steps)


def v_set(f: Fragmentation, r: DyadicIndex, budget: Optional[int] = None) -> frozenset[int]:
    """有限后端上 V_r 的全部成员(只用于小代数上检验V的单调与可加规律)。"""
    algebra = f.finite_algebra()
    out = set()
    for a in algebra.elements():
        result = v_member(f, a, r, budget=budget)
        if result.status == "unknown":
            raise BudgetExhaustedError(f"membership of {a:#x} in V_{r} is unknown", steps=result.steps)
        if result.member:
            out.add(a)
    return frozenset(out)


def _max_level(f: Fragmentation, view: _LocalView) -> int:
    if f.stabilization is not None:
        return f.stabilization
    return max((view.level(1 << i) for i in range(view.size)), default=1)


def infimum_by_scan(f: Fragmentation, a: Element, budget: Optional[int] = None) -> Fraction:
    """逐个按取值递增尝试 r, 第一个成员即为 m(a); 是动态规划实现的参照。"""
    algebra = f.algebra
    if algebra.is_zero(a):
        return Fraction(0)
    top = _max_level(f, _view(f, a))
    for r in dyadic_indices(top - 1):
        result = v_member(f, a, r, budget=budget)
        if result.status == "unknown":
            raise BudgetExhaustedError(
                f"membership of {algebra.format(a)} in V_{r} is unknown", steps=result.steps
            )
        if result.member:
            return r.value
    return Fraction(1)


def _cost_table(size: int, lev: Sequence[int], top: int, budget: int) -> list[int]:
    """
    best[lo][rem] = 用严格递增且 > lo 的层覆盖rem的最小代价, 层ℓ的代价为 2^(top−ℓ)。
    只有 ℓ < top 的层有非零块。返回 best[0]。
    """
    size_masks = 1 << size
    inf = 1 << (top + 1)
    best = [[inf] * size_masks for _ in range(top)]
    steps = 0
    for lo in range(top - 1, -1, -1):
        row = best[lo]
        row[0] = 0
        for rem in range(1, size_masks):
            value = inf
            x = rem
            while x:
                t = lev[x]
                steps += 1
                # x ∈ U_ℓ ⇔ lev(x) > ℓ; 可用的层为 lo < ℓ < min(lev(x), top)
                for level in range(lo + 1, min(t, top)):
                    rest = best[level][rem ^ x]
                    candidate = (1 << (top - level)) + rest
                    if candidate < value:
                        value = candidate
                x = (x - 1) & rem
            if steps > budget:
                raise BudgetExhaustedError(f"construction exceeded {budget} steps", steps=steps)
            row[rem] = value
    return best[0] if top > 0 else [0] + [inf] * (size_masks - 1)


def _values_from_costs(costs: Sequence[int], top: int) -> list[Fraction]:
    scale = 1 << top
    return [min(Fraction(1), Fraction(c, scale)) for c in costs]


class ConstructedCantorSubmeasure(Submeasure):
    """Cantor后端: 对每个元素把它加细成有限块, 再在块上做同样的动态规划。"""

    kind = "constructed"

    def __init__(self, f: Fragmentation, budget: Optional[int] = None) -> None:
        # 随机元素的深度受加细块数上限约束, 保证抽到的元素都能求值
        cantor = f.algebra
        assert isinstance(cantor, CantorAlgebra)
        depth = max(1, min(cantor.sample_depth, get_settings().CANTOR_MAX_REFINED_ATOMS.bit_length() - 1))
        super().__init__(CantorAlgebra(sample_depth=depth), {"source": f.source})
        self.fragmentation = f
        self.budget = budget or get_settings().BUDGET_STEPS

    def eval(self, a: Element) -> Fraction:
        a = self.algebra.own(a)
        if self.algebra.is_zero(a):
            return Fraction(0)
        view = _view(self.fragmentation, a)
        top = _max_level(self.fragmentation, view)
        costs = _cost_table(view.size, view.level_table(), top, self.budget)
        return _values_from_costs(costs, top)[view.full]

    def positivity_witness(self) -> Optional[Element]:
        return None


def construct_submeasure(
    f: Fragmentation, budget: Optional[int] = None, require_graded: bool = True
) -> Submeasure:
    """m(a) = inf{r ∈ D ∪ {1} : a ∈ V_r}; 有限后端得到整张表(kind=constructed)。"""
    budget = budget or get_settings().BUDGET_STEPS
    if isinstance(f.algebra, CantorAlgebra):
        return ConstructedCantorSubmeasure(f, budget=budget)

    algebra = f.finite_algebra()
    if require_graded:
        check = is_graded(f)
        if not check.graded:
            raise GradingError(
                f"fragmentation is not graded at level {check.level}",
                level=check.level,
                witness=(check.witness_a, check.witness_b),
            )
    top = len(f.levels)
    costs = _cost_table(algebra.n_atoms, f.level_index, top, budget)
    values = _values_from_costs(costs, top)
    values[0] = Fraction(0)
    log.info(
        "Submeasure constructed from fragmentation.",
        source=f.source,
        levels=top,
        top_value=str(values[algebra.full]),
    )
    return TableSubmeasure(
        algebra,
        dict(enumerate(values)),
        kind="constructed",
        params={"source": f.source, "levels": top},
        require_unit=False,
    )


def _sandwich_row(f: Fragmentation, m: Submeasure, a: Element) -> SandwichRow:
    n0 = f.level_of(a)
    value = m.eval(a)
    lower = Fraction(1, 1 << n0)
    upper = Fraction(1, 1 << (n0 - 1))
    return SandwichRow(
        element=a, n0=n0, value=value, lower=lower, upper=upper, ok=lower <= value <= upper
    )


def _elements_to_check(m: Submeasure, samples: int, seed: int) -> Iterator[Element]:
    algebra: BooleanAlgebra = m.algebra
    if isinstance(algebra, FiniteAlgebra):
        yield from range(1, 1 << algebra.n_atoms)
        return
    rng = random.Random(seed)
    for _ in range(samples):
        a = algebra.random_element(rng)
        if not algebra.is_zero(a):
            yield a


def verify_construction(
    f: Fragmentation,
    m: Submeasure,
    budget: Optional[int] = None,
    samples: Optional[int] = None,
    seed: int = 0,
) -> ConstructionReport:
    """
    (1) 子测度公理; (2) 严格正; (3) 夹逼 2^-n0 ≤ m(a) ≤ 2^-(n0−1), n0为a离开U的最小下标;
    (4) 每个 {m ≥ 2^-n} 内反链的最大规模。失败都写进报告, 不抛异常。
    """
    settings = get_settings()
    notes = [CONSTRUCTION_NOTE]
    finite = isinstance(f.algebra, FiniteAlgebra)
    if finite and f.finite_algebra().n_atoms <= settings.EXHAUSTIVE_MAX_ATOMS:
        axioms: AxiomReport = check_axioms(m, "exhaustive", seed=seed)
    else:
        axioms = check_axioms(m, "sampled", samples=samples or 200, seed=seed)

    rows = tuple(_sandwich_row(f, m, a) for a in _elements_to_check(m, samples or 200, seed))
    bad = [row for row in rows if not row.ok]
    witness = next((row.element for row in rows if row.value == 0), None)

    level_bounds: dict[int, Optional[int]] = {}
    if finite:
        values = m.table()
        for n in range(1, len(f.levels) + 1):
            family = level_family(m, Fraction(1, 1 << n), values)
            result = max_disjoint_packing(family, budget=budget)
            level_bounds[n] = result.size if result.exact else None
    else:
        notes.append("level bounds are not computed on the cantor backend")

    passed = axioms.passed and witness is None and not bad
    log.info(
        "Construction verified.",
        passed=passed,
        sandwich_rows=len(rows),
        sandwich_violations=len(bad),
    )
    return ConstructionReport(
        passed=passed,
        axioms=axioms,
        strictly_positive=witness is None,
        positivity_witness=witness,
        sandwich=rows,
        sandwich_violations=len(bad),
        level_bounds=level_bounds,
        notes=tuple(notes),
    )

