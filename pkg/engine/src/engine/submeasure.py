# /engine/src/engine/submeasure.py

"""
子测度: 取值为精确有理数的映射 Element → [0,1]。

边界值、单调与次可加公理由check_axioms检查而非由构造保证; 只有原子权重型子测度是有限可加的。
有限后端上的所有结论都是无穷无原子代数的桌面规模类比, 报告中会注明。
"""

import math
import random
from abc import ABC, abstractmethod
from fractions import Fraction
from typing import Any, Dict, Iterable, Literal, Mapping, Optional, Sequence, Tuple

from common.logging import get_logger
from common.models import AxiomReport, AxiomViolation, Element, ExhaustivityResult
from pydantic import BaseModel, ConfigDict, Field

from .algebra import (
    BooleanAlgebra,
    CantorAlgebra,
    FiniteAlgebra,
    UpwardClosedFamily,
    max_disjoint_packing,
)
from .config import get_settings
from .errors import AlgebraInputError, BudgetExhaustedError
from .parallel import run_partitioned
from .streams import AntichainStream

log = get_logger(__name__)

DESK_SCALE_NOTE = (
    "finite backend: results are desk-scale analogues of an infinite atomless algebra"
)

SubmeasureKind = Literal["atom_weights", "covering", "table", "constructed"]


class Submeasure(ABC):
    """求值映射及其元数据(构造种类与参数)。"""

    kind: SubmeasureKind = "table"
    # 有限可加性是构造上的性质时为True(原子权重、Lebesgue)
    finitely_additive: bool = False

    def __init__(self, algebra: BooleanAlgebra, params: Optional[Dict[str, Any]] = None) -> None:
        self.algebra = algebra
        self.params: Dict[str, Any] = dict(params or {})

    @abstractmethod
    def eval(self, a: Element) -> Fraction: ...

    def __call__(self, a: Element) -> Fraction:
        return self.eval(a)

    def table(self) -> list[Fraction]:
        """有限后端上按掩码顺序的全部取值; 每次调用重新计算, 不共享可变状态。"""
        algebra = self.finite_algebra()
        if algebra.n_atoms > get_settings().MAX_TABULATED_ATOMS:
            raise AlgebraInputError(
                f"refusing to tabulate {algebra.n_atoms} atoms; "
                f"limit is {get_settings().MAX_TABULATED_ATOMS}"
            )
        return [self.eval(a) for a in algebra.elements()]

    def finite_algebra(self) -> FiniteAlgebra:
        if not isinstance(self.algebra, FiniteAlgebra):
            raise AlgebraInputError(f"{self.kind} operation needs the finite backend")
        return self.algebra

    def positivity_witness(self) -> Optional[Element]:
        """返回某个取值为0的非零元素; 严格正时返回None。"""
        if isinstance(self.algebra, FiniteAlgebra):
            # 单调时检查原子即可; 非单调的情况由check_axioms报告
            for atom in self.algebra.atoms():
                if self.eval(atom) == 0:
                    return atom
            return None
        return self.params.get("positivity_witness")

    @property
    def strictly_positive(self) -> bool:
        return self.positivity_witness() is None

    def describe(self) -> str:
        return f"{self.kind}({self.algebra!r})"


class AtomWeightSubmeasure(Submeasure):
    """μ(a) = Σ_{i∈a} w_i, 构造上有限可加。"""

    kind = "atom_weights"
    finitely_additive = True

    def __init__(self, algebra: FiniteAlgebra, weights: Sequence[Fraction]) -> None:
        weights = tuple(Fraction(w) for w in weights)
        if len(weights) != algebra.n_atoms:
            raise AlgebraInputError(
                f"expected {algebra.n_atoms} weights, got {len(weights)}"
            )
        if any(w < 0 for w in weights):
            raise AlgebraInputError("atom weights must be nonnegative")
        if sum(weights) != 1:
            raise AlgebraInputError(f"atom weights sum to {sum(weights)}, not 1")
        super().__init__(algebra, {"weights": weights})
        self.weights = weights

    def eval(self, a: Element) -> Fraction:
        mask = self.algebra.own(a)
        return sum(
            (w for i, w in enumerate(self.weights) if mask >> i & 1),  # type: ignore[operator]
            Fraction(0),
        )

    def table(self) -> list[Fraction]:
        algebra = self.finite_algebra()
        values = [Fraction(0)] * (1 << algebra.n_atoms)
        for a in range(1, 1 << algebra.n_atoms):
            low = a & -a
            values[a] = values[a ^ low] + self.weights[low.bit_length() - 1]
        return values


class LebesgueSubmeasure(Submeasure):
    """Cantor空间上的一致节点测度, 深度d的节点为2^-d。"""

    kind = "atom_weights"
    finitely_additive = True

    def __init__(self, algebra: CantorAlgebra) -> None:
        super().__init__(algebra, {"weights": "lebesgue"})
        self.cantor = algebra

    def eval(self, a: Element) -> Fraction:
        return self.cantor.node_measure(a)


class CoveringFamilyParams(BaseModel):
    """覆盖族参数: m(a) = min(1, c(a)/K), c(a)为并能支配a的最少成员数。"""

    model_config = ConfigDict(frozen=True)

    family: Tuple[int, ...] = Field(..., min_length=1)
    scale: int = Field(..., ge=1)


class CoveringSubmeasure(Submeasure):
    kind = "covering"

    def __init__(
        self,
        algebra: FiniteAlgebra,
        params: CoveringFamilyParams,
        budget: Optional[int] = None,
    ) -> None:
        family = tuple(sorted({algebra.own(f) for f in params.family}))
        if 0 in family:
            raise AlgebraInputError("covering family members must be nonzero")
        joined = 0
        for f in family:
            joined |= f
        if joined != algebra.full:
            raise AlgebraInputError(
                f"covering family does not cover 1 (join is {joined:#x})"
            )
        super().__init__(algebra, {"family": family, "scale": params.scale})
        self.family = family
        self.scale = params.scale
        self.budget = budget or get_settings().BUDGET_STEPS
        self._by_atom = [
            [f for f in family if f >> i & 1] for i in range(algebra.n_atoms)
        ]

    def cover_count(self, a: Element) -> int:
        """精确集合覆盖数: 对最低未覆盖原子分支, 按剩余掩码记忆化。"""
        mask = self.algebra.own(a)
        memo: dict[int, int] = {0: 0}
        steps = 0

        def cover(rem: int) -> int:
            nonlocal steps
            if rem in memo:
                return memo[rem]
            steps += 1
            if steps > self.budget:
                raise BudgetExhaustedError(
                    f"covering evaluation exceeded {self.budget} steps", steps=steps
                )
            low = (rem & -rem).bit_length() - 1
            best = min(1 + cover(rem & ~f) for f in self._by_atom[low])
            memo[rem] = best
            return best

        return cover(mask)

    def _value(self, count: int) -> Fraction:
        return Fraction(min(count, self.scale), self.scale)

    def eval(self, a: Element) -> Fraction:
        return self._value(self.cover_count(a))

    def table(self) -> list[Fraction]:
        algebra = self.finite_algebra()
        counts = [0] * (1 << algebra.n_atoms)
        for a in range(1, 1 << algebra.n_atoms):
            low = (a & -a).bit_length() - 1
            counts[a] = 1 + min(counts[a & ~f] for f in self._by_atom[low])
        return [self._value(c) for c in counts]


class TableSubmeasure(Submeasure):
    """按元素全表给出的子测度; 也用于承载构造得到的子测度(kind=constructed)。"""

    def __init__(
        self,
        algebra: FiniteAlgebra,
        values: Mapping[int, Fraction],
        kind: SubmeasureKind = "table",
        params: Optional[Dict[str, Any]] = None,
        require_unit: bool = True,
    ) -> None:
        missing = [a for a in algebra.elements() if a not in values]
        if missing:
            raise AlgebraInputError(
                f"table is missing {len(missing)} elements, first {missing[0]:#x}"
            )
        dense = [Fraction(values[a]) for a in algebra.elements()]
        # 构造得到的表不强制m(1)=1, 边界值交给check_axioms报告
        if dense[0] != 0 or (require_unit and dense[algebra.full] != 1):
            raise AlgebraInputError("table must have m(0) = 0 and m(1) = 1")
        bad = next((a for a, v in enumerate(dense) if not 0 <= v <= 1), None)
        if bad is not None:
            raise AlgebraInputError(f"table value {dense[bad]} at {bad:#x} is outside [0, 1]")
        super().__init__(algebra, params)
        self.kind = kind
        self._values = tuple(dense)

    def eval(self, a: Element) -> Fraction:
        return self._values[self.algebra.own(a)]  # type: ignore[index]

    def table(self) -> list[Fraction]:
        return list(self._values)


class ConstantSubmeasure(Submeasure):
    """病态例子 m(a) = 1 (a ≠ 0): 满足公理但不是穷竭的。"""

    kind = "table"

    def __init__(self, algebra: BooleanAlgebra) -> None:
        super().__init__(algebra, {"rule": "constant-one"})

    def eval(self, a: Element) -> Fraction:
        return Fraction(0) if self.algebra.is_zero(a) else Fraction(1)


def from_atom_weights(algebra: FiniteAlgebra, weights: Sequence[Fraction]) -> AtomWeightSubmeasure:
    return AtomWeightSubmeasure(algebra, weights)


def uniform(algebra: BooleanAlgebra) -> Submeasure:
    if isinstance(algebra, CantorAlgebra):
        return LebesgueSubmeasure(algebra)
    assert isinstance(algebra, FiniteAlgebra)
    return AtomWeightSubmeasure(algebra, [Fraction(1, algebra.n_atoms)] * algebra.n_atoms)


def from_covering(
    algebra: FiniteAlgebra, params: CoveringFamilyParams, budget: Optional[int] = None
) -> CoveringSubmeasure:
    return CoveringSubmeasure(algebra, params, budget=budget)


def from_table(algebra: FiniteAlgebra, values: Mapping[int, Fraction]) -> TableSubmeasure:
    return TableSubmeasure(algebra, values)


def constant_one(algebra: BooleanAlgebra) -> ConstantSubmeasure:
    return ConstantSubmeasure(algebra)


def distance(m: Submeasure, a: Element, b: Element) -> Fraction:
    """ρ(a, b) = m(a △ b)。m不严格正时只是伪度量, 见metric_kind。"""
    return m.eval(m.algebra.symdiff(a, b))


def metric_kind(m: Submeasure) -> str:
    return "metric" if m.strictly_positive else "pseudometric"


# --- 公理检查 -----------------------------------------------------------------


def _scaled(values: Sequence[Fraction]) -> tuple[list[int], int]:
    """把有理数表换成公分母下的整数, 使穷举比较只做整数运算。"""
    den = 1
    for v in values:
        den = math.lcm(den, v.denominator)
    return [v.numerator * (den // v.denominator) for v in values], den


def check_axioms(
    m: Submeasure,
    mode: Literal["exhaustive", "sampled"] = "exhaustive",
    samples: Optional[int] = None,
    seed: int = 0,
    jobs: Optional[int] = None,
) -> AxiomReport:
    """检查(i)边界值 (ii)单调 (iii)次可加 (iv)严格正, 并报告(v)有限可加性。失败不抛异常。"""
    settings = get_settings()
    if mode == "exhaustive":
        algebra = m.finite_algebra()
        if algebra.n_atoms > settings.EXHAUSTIVE_MAX_ATOMS:
            raise AlgebraInputError(
                f"exhaustive mode supports at most {settings.EXHAUSTIVE_MAX_ATOMS} atoms"
            )
        report = _check_exhaustive(m, algebra, samples or settings.SAMPLE_COUNT, seed, jobs or settings.JOBS)
    else:
        report = _check_sampled(m, samples or settings.SAMPLE_COUNT, seed)
    log.info(
        "Axiom check finished.",
        submeasure=m.describe(),
        mode=report.mode,
        passed=report.passed,
        pairs=report.checked_pairs,
    )
    return report


def _check_exhaustive(
    m: Submeasure, algebra: FiniteAlgebra, samples: int, seed: int, jobs: int
) -> AxiomReport:
    values = m.table()
    ints, den = _scaled(values)
    full = algebra.full
    n = algebra.n_atoms
    notes = [DESK_SCALE_NOTE]
    pairs = 0

    def violation(kind: str, a: int, b: Optional[int] = None, joined: Optional[int] = None) -> AxiomViolation:
        return AxiomViolation(
            axiom=kind,  # type: ignore[arg-type]
            a=a,
            b=b,
            value_a=values[a],
            value_b=values[b] if b is not None else None,
            value_join=values[joined] if joined is not None else None,
        )

    def finish(found: Optional[AxiomViolation], additive: Optional[bool] = None,
               witness: Optional[tuple[int, int]] = None) -> AxiomReport:
        return AxiomReport(
            passed=found is None,
            mode="exhaustive",
            checked_pairs=pairs,
            violation=found,
            finitely_additive=additive,
            additivity_witness=witness,
            notes=tuple(notes),
        )

    if values[0] != 0:
        return finish(violation("boundary", 0))
    if values[full] != 1:
        return finish(violation("boundary", full))

    # 单调性只需检查覆盖关系 a < a∪{i}; 失败时返回的仍是一对可比元素
    for a in range(1 << n):
        for i in range(n):
            b = a | (1 << i)
            if b != a:
                pairs += 1
                if ints[a] > ints[b]:
                    return finish(violation("monotone", a, b))

    def scan_subadditive(block: Sequence[int]) -> Optional[tuple[int, int]]:
        for a in block:
            va = ints[a]
            for b in range(a, 1 << n):
                if ints[a | b] > va + ints[b]:
                    return a, b
        return None

    if 4**n <= get_settings().EXHAUSTIVE_PAIR_LIMIT:
        bad = run_partitioned(scan_subadditive, range(1 << n), jobs)
        pairs += (1 << n) * ((1 << n) + 1) // 2
    else:
        notes.append(f"subadditivity sampled on {samples} pairs (seed {seed})")
        rng = random.Random(seed)
        bad = None
        for _ in range(samples):
            a, b = rng.getrandbits(n), rng.getrandbits(n)
            pairs += 1
            if ints[a | b] > ints[a] + ints[b]:
                bad = (min(a, b), max(a, b))
                break
    if bad is not None:
        a, b = bad
        return finish(violation("subadditive", a, b, a | b))

    zero = next((a for a in range(1, 1 << n) if ints[a] == 0), None)
    if zero is not None:
        return finish(violation("strictly_positive", zero))

    # 公理(v): 遍历所有不交对 (a, b ⊆ −a)
    additive, witness = True, None
    for a in range(1 << n):
        rest = full ^ a
        b = rest
        while True:
            if ints[a | b] != ints[a] + ints[b]:
                additive, witness = False, (a, b)
                break
            if b == 0:
                break
            b = (b - 1) & rest
        if not additive:
            break
    return finish(None, additive, witness)


def _check_sampled(m: Submeasure, samples: int, seed: int) -> AxiomReport:
    algebra = m.algebra
    rng = random.Random(seed)
    pairs = 0
    notes: list[str] = [f"sampled {samples} pairs (seed {seed})"]
    if isinstance(algebra, FiniteAlgebra):
        notes.append(DESK_SCALE_NOTE)

    def finish(found: Optional[AxiomViolation], additive: Optional[bool] = None,
               witness: Optional[tuple[Element, Element]] = None) -> AxiomReport:
        return AxiomReport(
            passed=found is None,
            mode="sampled",
            checked_pairs=pairs,
            violation=found,
            finitely_additive=additive,
            additivity_witness=witness,
            notes=tuple(notes),
        )

    zero, one = algebra.zero, algebra.one
    if m.eval(zero) != 0:
        return finish(AxiomViolation(axiom="boundary", a=zero, value_a=m.eval(zero)))
    if m.eval(one) != 1:
        return finish(AxiomViolation(axiom="boundary", a=one, value_a=m.eval(one)))

    additive, witness = True, None
    for _ in range(samples):
        a, b = algebra.random_element(rng), algebra.random_element(rng)
        pairs += 1
        va, vb = m.eval(a), m.eval(b)
        low, high = algebra.meet(a, b), algebra.join(a, b)
        vlow, vhigh = m.eval(low), m.eval(high)
        if vlow > va:
            return finish(AxiomViolation(axiom="monotone", a=low, b=a, value_a=vlow, value_b=va))
        if va > vhigh:
            return finish(AxiomViolation(axiom="monotone", a=a, b=high, value_a=va, value_b=vhigh))
        if vhigh > va + vb:
            return finish(
                AxiomViolation(axiom="subadditive", a=a, b=b, value_a=va, value_b=vb, value_join=vhigh)
            )
        if va == 0 and not algebra.is_zero(a):
            return finish(AxiomViolation(axiom="strictly_positive", a=a, value_a=va))
        if additive:
            rest = algebra.meet(b, algebra.complement(a))
            if m.eval(algebra.join(a, rest)) != va + m.eval(rest):
                additive, witness = False, (a, rest)
    return finish(None, additive, witness)


# --- 水平集与穷竭性 -----------------------------------------------------------


def level_family(m: Submeasure, threshold: Fraction, values: Optional[Sequence[Fraction]] = None) -> UpwardClosedFamily:
    """{a : m(a) ≥ threshold} 的极小生成元。要求m单调(水平集上闭)。"""
    algebra = m.finite_algebra()
    values = values if values is not None else m.table()
    gens = []
    for a in range(1, 1 << algebra.n_atoms):
        if values[a] < threshold:
            continue
        # 上闭族中a为极小元 ⇔ 去掉任一原子都会跌出该族
        if all(values[a & ~(1 << i)] < threshold for i in range(algebra.n_atoms) if a >> i & 1):
            gens.append(a)
    return UpwardClosedFamily(algebra=algebra, generators=tuple(gens))


def uniform_exhaustivity_bound(
    m: Submeasure, eps: Fraction, budget: Optional[int] = None
) -> int:
    """每个反链中 m(a) ≥ eps 的元素个数的精确上界K。"""
    m.finite_algebra()
    if eps > 1:
        return 0
    result = max_disjoint_packing(level_family(m, Fraction(eps)), budget=budget)
    if not result.exact:
        raise BudgetExhaustedError(
            f"packing for eps={eps} is unknown beyond {result.size}",
            steps=result.steps,
            best=result.witness,
        )
    return result.size


def exhaustivity_profile(
    m: Submeasure, thresholds: Iterable[Fraction], budget: Optional[int] = None
) -> Dict[Fraction, int]:
    values = m.table()
    profile: Dict[Fraction, int] = {}
    for eps in thresholds:
        eps = Fraction(eps)
        if eps > 1:
            profile[eps] = 0
            continue
        result = max_disjoint_packing(level_family(m, eps, values), budget=budget)
        if not result.exact:
            raise BudgetExhaustedError(
                f"packing for eps={eps} is unknown beyond {result.size}",
                steps=result.steps,
                best=result.witness,
            )
        profile[eps] = result.size
    return profile


def is_exhaustive_on(
    m: Submeasure, stream: AntichainStream, eps: Fraction, horizon: int
) -> ExhaustivityResult:
    """
    在horizon以内检查: 返回最小的下标i, 使所有采样到的 j ≥ i 都有 m(s_j) < eps。
    极限本身无法验证; 契约是"horizon以内无违例, 且与声明的包络一致"。
    流声明的包络若被某项超出, 扫描照常进行, 只是结果不再certified。
    """
    eps = Fraction(eps)
    sampled: list[tuple[int, Fraction]] = []
    violation: Optional[int] = None
    for n, a in stream.checked():
        if n > horizon:
            break
        value = m.eval(a)
        if violation is None and stream.envelope is not None and value > stream.envelope(n):
            violation = n
            log.info(
                "Stream term exceeds its declared envelope.",
                index=n,
                value=str(value),
                bound=str(stream.envelope(n)),
                stream=stream.label,
            )
        sampled.append((n, value))

    if not sampled:
        return ExhaustivityResult(index=stream.start, sampled=0)

    tail = sampled[len(sampled) // 2 :]
    trailing_max = max(v for _, v in tail)
    index: Optional[int] = None
    for n, value in reversed(sampled):
        if value >= eps:
            break
        index = n
    if index is None:
        return ExhaustivityResult(
            horizon_exhausted=True,
            sampled=len(sampled),
            trailing_max=trailing_max,
            envelope_violation=violation,
        )
    certified = violation is None and stream.envelope is not None and stream.envelope(index) < eps
    return ExhaustivityResult(
        index=index,
        sampled=len(sampled),
        trailing_max=trailing_max,
        certified=certified,
        envelope_violation=violation,
    )
