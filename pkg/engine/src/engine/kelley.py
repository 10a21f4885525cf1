# /engine/src/engine/kelley.py

"""
Kelley交数与有限可加测度的提取(有限后端)。

交数 = max_μ min_{a∈F} μ(a), μ取遍原子上的概率权重。用上图形式求解:
    max t  s.t.  t − μ(g) ≤ 0 (g为F的极小生成元),  Σμ ≤ 1,  μ ≥ 0.
F上闭时只需约束生成元: a ≥ g ⇒ μ(a) ≥ μ(g)。
对偶解是生成元上的权重y, 其最大原子覆盖等于交数; 把y放大成整数重数即得一条成员序列,
其比值(最大相交子族大小 / 序列长度)就是对偶证据。
"""

import itertools
import math
import random
from fractions import Fraction
from typing import Optional, Sequence

from common.logging import get_logger
from common.models import (
    Element,
    IntersectionResult,
    KelleyLevel,
    MeasureReport,
    WeakDualityReport,
)

from .algebra import BooleanAlgebra, FiniteAlgebra, upward_closure
from .config import get_settings
from .errors import AlgebraInputError, GradingError, LinearProgramError
from .fragmentation import Fragmentation, check_sigma_cc, is_graded
from .simplex import LPSolution, maximize
from .submeasure import AtomWeightSubmeasure, Submeasure

log = get_logger(__name__)


def sequence_ratio(algebra: BooleanAlgebra, seq: Sequence[Element]) -> Fraction:
    """(公共交非零的最大下标子集的大小) / (序列长度); 深度优先枚举, 交为0时剪枝。"""
    cap = get_settings().SEQUENCE_RATIO_CAP
    if not seq:
        raise AlgebraInputError("sequence_ratio needs a nonempty sequence")
    if len(seq) > cap:
        raise AlgebraInputError(f"sequence of length {len(seq)} exceeds the cap {cap}")
    items = [algebra.own(x) for x in seq]
    best = 0

    def extend(start: int, meet: Element, size: int) -> None:
        nonlocal best
        best = max(best, size)
        for i in range(start, len(items)):
            if size + len(items) - i <= best:
                return
            joint = algebra.meet(meet, items[i])
            if not algebra.is_zero(joint):
                extend(i + 1, joint, size + 1)

    extend(0, algebra.one, 0)
    return Fraction(best, len(items))


def _atom_ratio(n_atoms: int, seq: Sequence[int]) -> Fraction:
    """有限后端: 一组掩码的交非零 ⇔ 共有一个原子, 所以比值就是最大原子覆盖次数。"""
    counts = max(sum(1 for g in seq if g >> i & 1) for i in range(n_atoms))
    return Fraction(counts, len(seq))


def _generators(algebra: FiniteAlgebra, family: Sequence[Element]) -> list[int]:
    if not family:
        raise AlgebraInputError("intersection_number needs a nonempty family")
    members = [algebra.own(x) for x in family]
    if any(x == 0 for x in members):
        raise AlgebraInputError("family contains 0; its intersection number is 0 by definition")
    return list(upward_closure(algebra, members).generators)  # type: ignore[arg-type]


def _dual_sequence(
    algebra: FiniteAlgebra, gens: Sequence[int], dual: Sequence[Fraction], value: Fraction
) -> tuple[tuple[int, ...], Optional[Fraction]]:
    """先用LP对偶权重放大成整数重数; 太长时改为在短序列中穷举一条比值最小的。"""
    settings = get_settings()
    weights = [(g, y) for g, y in zip(gens, dual) if y > 0]
    if weights:
        scale = math.lcm(*(y.denominator for _, y in weights))
        total = sum(y for _, y in weights)
        seq = [g for g, y in weights for _ in range(int(y * scale))]
        if seq and len(seq) <= settings.SEQUENCE_RATIO_CAP:
            ratio = sequence_ratio(algebra, seq)
            log.debug("Dual sequence from LP weights.", length=len(seq), ratio=str(ratio), mass=str(total))
            return tuple(seq), ratio

    best: tuple[tuple[int, ...], Optional[Fraction]] = ((), None)
    examined = 0
    for length in range(1, settings.DUAL_SEARCH_LENGTH + 1):
        if math.comb(len(gens), length) > settings.SAMPLE_COUNT:
            break
        for combo in itertools.combinations(gens, length):
            examined += 1
            if examined > settings.DUAL_SEARCH_COMBINATIONS:
                log.debug("Dual search stopped at its combination cap.", examined=examined - 1)
                return best
            ratio = _atom_ratio(algebra.n_atoms, combo)
            if best[1] is None or ratio < best[1]:
                best = (combo, ratio)
                # 弱对偶: 比值不可能低于交数
                if ratio == value:
                    return best
    return best


def _solve_with_cuts(n: int, gens: Sequence[int]) -> tuple[LPSolution, list[int], list[Fraction]]:
    """
    割平面: 先只约束前n个生成元, 每轮加入μ最小的违反者, 直到全部生成元 μ(g) ≥ t。
    返回最后一轮的解、进入LP的生成元下标、以及补齐到和为1的μ。
    """
    active = list(range(min(n, len(gens))))
    while True:
        # 变量: μ_0 … μ_{N-1}, t
        c = [Fraction(0)] * n + [Fraction(1)]
        A = [[-Fraction(gens[k] >> i & 1) for i in range(n)] + [Fraction(1)] for k in active]
        A.append([Fraction(1)] * n + [Fraction(0)])
        b = [Fraction(0)] * len(active) + [Fraction(1)]
        solution = maximize(c, A, b)

        mu = list(solution.primal[:n])
        leftover = 1 - sum(mu)
        if leftover < 0:
            raise LinearProgramError(f"primal weights sum to {sum(mu)}")
        mu[0] += leftover
        covered = [sum((mu[i] for i in range(n) if g >> i & 1), Fraction(0)) for g in gens]
        worst = min(range(len(gens)), key=covered.__getitem__)
        if covered[worst] >= solution.value:
            return solution, active, mu
        active.append(worst)


def intersection_number(
    algebra: FiniteAlgebra, family: Sequence[Element], dual_evidence: bool = True
) -> IntersectionResult:
    """
    交数及其原始证书μ。dual_evidence为False时跳过对偶成员序列的搜索,
    只保留LP本身的最优性(批量求解每一层时使用)。
    """
    if not isinstance(algebra, FiniteAlgebra):
        raise AlgebraInputError("intersection_number needs the finite backend")
    gens = _generators(algebra, family)
    n = algebra.n_atoms
    solution, active, mu = _solve_with_cuts(n, gens)
    value = solution.value
    floor = min(sum((mu[i] for i in range(n) if g >> i & 1), Fraction(0)) for g in gens)
    if floor < value:
        raise LinearProgramError(f"primal certificate gives {floor} < value {value}")

    seq: tuple[int, ...] = ()
    ratio: Optional[Fraction] = None
    if dual_evidence:
        dual = [Fraction(0)] * len(gens)
        for row, k in enumerate(active):
            dual[k] = solution.dual[row]
        seq, ratio = _dual_sequence(algebra, gens, dual, value)
        if ratio is not None and ratio < value:
            raise LinearProgramError(f"dual evidence ratio {ratio} is below the value {value}")
    log.info(
        "Intersection number solved.",
        value=str(value),
        generators=len(gens),
        cuts=len(active),
        pivots=solution.pivots,
        dual_length=len(seq),
    )
    return IntersectionResult(
        value=value,
        mu=tuple(mu),
        dual_sequence=seq,
        dual_ratio=ratio,
        generators=len(gens),
        cuts=len(active),
    )


def sample_weak_duality(
    algebra: FiniteAlgebra,
    family: Sequence[Element],
    value: Fraction,
    count: int,
    max_len: int = 8,
    seed: int = 0,
) -> WeakDualityReport:
    """随机抽取成员序列(允许重复), 每条的比值都应 ≥ value。"""
    members = [algebra.own(x) for x in family]
    rng = random.Random(seed)
    violations = 0
    least: Optional[Fraction] = None
    worst: tuple[Element, ...] = ()
    for _ in range(count):
        seq = [members[rng.randrange(len(members))] for _ in range(rng.randint(1, max_len))]
        ratio = sequence_ratio(algebra, seq)
        if ratio < value:
            violations += 1
        if least is None or ratio < least:
            least, worst = ratio, tuple(seq)
    if violations:
        log.warning("Weak duality violated.", violations=violations, value=str(value))
    return WeakDualityReport(samples=count, violations=violations, least_ratio=least, worst_sequence=worst)


def measure_from_fragmentation(
    f: Fragmentation, reference: Optional[Submeasure] = None, budget: Optional[int] = None
) -> tuple[AtomWeightSubmeasure, MeasureReport]:
    """
    对每层 C_n 解交数得到 μ_n, 再合成 μ = Σ 2^-n μ_n / Σ 2^-n。
    结果是原子权重型(因而有限可加)的严格正测度; 报告每层的下界 v_n = min_{C_n} μ。
    """
    algebra = f.finite_algebra()
    check = is_graded(f)
    if not check.graded:
        raise GradingError(
            f"fragmentation is not graded at level {check.level}",
            level=check.level,
            witness=(check.witness_a, check.witness_b),
        )
    top = len(f.levels)
    per_level = []
    for n in range(1, top + 1):
        bound = f.bounds.get(n)
        if bound is None:
            packing = check_sigma_cc(f, n, budget=budget)
            bound = packing.size
        result = intersection_number(algebra, f.level(n).generators, dual_evidence=False)
        per_level.append((n, bound, result))

    norm = sum((Fraction(1, 1 << n) for n in range(1, top + 1)), Fraction(0))
    weights = [
        sum((Fraction(1, 1 << n) * r.mu[i] for n, _, r in per_level), Fraction(0)) / norm
        for i in range(algebra.n_atoms)
    ]
    measure = AtomWeightSubmeasure(algebra, weights)

    levels = []
    for n, bound, result in per_level:
        gens = f.level(n).generators
        floor = min(measure.eval(g) for g in gens)
        reference_floor = min(reference.eval(g) for g in gens) if reference is not None else None
        levels.append(
            KelleyLevel(
                level=n,
                bound=bound,
                value=result.value,
                floor=floor,
                reference_floor=reference_floor,
            )
        )
    positive = all(w > 0 for w in weights)
    log.info("Measure extracted from fragmentation.", levels=top, strictly_positive=positive)
    return measure, MeasureReport(
        weights=tuple(weights), strictly_positive=positive, levels=tuple(levels)
    )
