# /engine/src/engine/ideal.py

"""
由子测度诱导的收敛理想 I = {序列 : m(a_n) → 0}。

一般的构造对I中的所有序列和所有选择函数量化, 不可计算;
这里只处理子测度诱导的理想与标准选择函数F_k(扫描到第一个 m < 1/k 的项),
此时 V_n = {a : m(a) < 1/n} 有闭式, 一切都是精确的。
"属于I"总是由包络证书给出, 从不由样本推断极限。
"""

import itertools
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Iterator, Optional, Sequence, Union

from common.logging import get_logger
from common.models import (
    ConcentrationPick,
    ConcentrationReport,
    Element,
    IdealCheckReport,
)

from .algebra import BooleanAlgebra, CantorAlgebra, FiniteAlgebra
from .config import get_settings
from .errors import AlgebraInputError, EnvelopeViolationError
from .fragmentation import NEVER, Fragmentation, levels_from_index
from .streams import CertifiedSequence, Envelope, harmonic_envelope
from .submeasure import Submeasure

log = get_logger(__name__)

# --- 派生序列 -----------------------------------------------------------------


def subsequence(s: CertifiedSequence, step: int = 2, offset: int = 0) -> CertifiedSequence:
    """t_k = s_{start + offset + k·step}; 包络随之平移, 仍单调不增。"""
    if step < 1 or offset < 0:
        raise AlgebraInputError("subsequence needs step ≥ 1 and offset ≥ 0")
    first = s.start + offset

    return CertifiedSequence(
        algebra=s.algebra,
        source=lambda: itertools.islice(s.source(), offset, None, step),
        envelope=lambda k: s.envelope(first + (k - s.start) * step),
        start=s.start,
        label=f"sub({s.label})",
        limit=s.limit,
    )


def dominated(s: CertifiedSequence, bound: Element) -> CertifiedSequence:
    """b_n = a_n ∧ bound ≤ a_n, 沿用原包络。"""
    algebra = s.algebra
    bound = algebra.own(bound)
    return CertifiedSequence(
        algebra=algebra,
        source=lambda: (algebra.meet(a, bound) for a in s.source()),
        envelope=s.envelope,
        start=s.start,
        label=f"meet({s.label})",
    )


def join(s: CertifiedSequence, t: CertifiedSequence) -> CertifiedSequence:
    """a_n ∨ b_n, 由次可加性得到证书 e_s(n) + e_t(n)。"""
    if s.start != t.start or s.algebra != t.algebra:
        raise AlgebraInputError("joined sequences must share algebra and start index")
    algebra = s.algebra
    return CertifiedSequence(
        algebra=algebra,
        source=lambda: (algebra.join(a, b) for a, b in zip(s.source(), t.source())),
        envelope=lambda n: s.envelope(n) + t.envelope(n),
        start=s.start,
        label=f"join({s.label},{t.label})",
    )


def limit_to(s: CertifiedSequence, a: Element) -> CertifiedSequence:
    """把零序列 {a_n} 平移为收敛到a的序列 {a_n △ a}: lim b_n = a ⇔ lim (b_n △ a) = 0。"""
    algebra = s.algebra
    a = algebra.own(a)
    return CertifiedSequence(
        algebra=algebra,
        source=lambda: (algebra.symdiff(x, a) for x in s.source()),
        envelope=s.envelope,
        start=s.start,
        label=f"to({s.label})",
        limit=a,
    )


def shifted(s: CertifiedSequence, by: int = 1) -> CertifiedSequence:
    """同一序列向后错开by项, 下标不变; 用作join检查的伴随序列。"""
    return CertifiedSequence(
        algebra=s.algebra,
        source=lambda: itertools.islice(s.source(), by, None),
        envelope=lambda n: s.envelope(n + by),
        start=s.start,
        label=f"shift({s.label})",
    )


def _envelope_holds(m: Submeasure, s: CertifiedSequence, horizon: int) -> bool:
    try:
        for _ in s.terms(m, count=horizon):
            pass
    except EnvelopeViolationError as e:
        log.info("Derived sequence broke its certificate.", label=s.label, index=e.index)
        return False
    return True


def ideal_membership_check(
    m: Submeasure,
    s: CertifiedSequence,
    horizon: int,
    companion: Optional[CertifiedSequence] = None,
    seed: int = 0,
) -> IdealCheckReport:
    """
    检查证书直到horizon, 再对派生序列抽查理想公理:
    (i) 已采样项的交的取值不超过末项包络, (ii) 子序列, (iii) 逐项被控, (iv) 逐项并。
    """
    meet = s.algebra.one
    last_bound = Fraction(1)
    try:
        for n, a, _ in s.terms(m, count=horizon):
            meet = s.algebra.meet(meet, a if s.limit is None else s.algebra.symdiff(a, s.limit))
            last_bound = s.envelope(n)
    except EnvelopeViolationError as e:
        log.info("Certificate violated.", label=s.label, index=e.index)
        return IdealCheckReport(
            horizon=horizon,
            envelope_ok=False,
            violation_index=e.index,
            violation_value=e.value,
            violation_bound=e.bound,
        )

    rng = random.Random(seed)
    # 逐项被控检查使用的固定控制元
    bound = s.algebra.random_element(rng)
    base = s if s.limit is None else _differences(s)
    checks = {
        "meet_is_zero": m.eval(meet) <= last_bound,
        "subsequence": _envelope_holds(m, subsequence(base), horizon),
        "dominated": _envelope_holds(m, dominated(base, bound), horizon),
        "join": _envelope_holds(m, join(base, companion or shifted(base)), horizon),
    }
    log.info("Ideal membership checked.", label=s.label, horizon=horizon, **checks)
    return IdealCheckReport(horizon=horizon, envelope_ok=True, checks=checks)


def _differences(s: CertifiedSequence) -> CertifiedSequence:
    algebra = s.algebra
    assert s.limit is not None
    limit = s.limit
    return CertifiedSequence(
        algebra=algebra,
        source=lambda: (algebra.symdiff(a, limit) for a in s.source()),
        envelope=s.envelope,
        start=s.start,
        label=f"diff({s.label})",
    )


# --- 选择函数 -----------------------------------------------------------------


@dataclass(frozen=True)
class ChoiceFunctionFamily:
    """F_k: 返回第一个 m(a_n) < 1/k 的项。包络保证在第一个 envelope(n) < 1/k 处之前终止。"""

    m: Submeasure
    max_scan: int

    def select(self, k: int, s: CertifiedSequence) -> tuple[int, Element]:
        if k < 1:
            raise AlgebraInputError("choice functions are indexed from k = 1")
        if s.limit is not None:
            raise AlgebraInputError("choice functions act on null sequences only")
        target = Fraction(1, k)
        for n, a, value in s.terms(self.m):
            if value < target:
                return n, a
            if n - s.start >= self.max_scan:
                break
        raise AlgebraInputError(
            f"no term below 1/{k} within {self.max_scan} terms; the envelope does not reach 1/{k}"
        )

    def __call__(self, k: int, s: CertifiedSequence) -> Element:
        return self.select(k, s)[1]


def choice_functions_from_submeasure(
    m: Submeasure, max_scan: Optional[int] = None
) -> ChoiceFunctionFamily:
    return ChoiceFunctionFamily(m=m, max_scan=max_scan or get_settings().MAX_SCAN)


def _single_term(algebra: BooleanAlgebra, a: Element) -> CertifiedSequence:
    """(a, 0, 0, …) ∈ I, 证书为 1, 0, 0, …。"""
    return CertifiedSequence.from_elements(
        algebra, [a], envelope=lambda n: Fraction(1) if n == 0 else Fraction(0)
    )


def in_v(F: ChoiceFunctionFamily, n: int, a: Element) -> bool:
    """a ∈ V_n ⇔ a ≤ F_n(x) 对某个 x ∈ I; 取 x = (a, 0, 0, …) 即可判定。"""
    algebra = F.m.algebra
    return algebra.leq(a, F(n, _single_term(algebra, a)))


def fragmentation_from_choice_functions(
    m: Submeasure, depth: Optional[int] = None, max_scan: Optional[int] = None
) -> Fragmentation:
    """
    V_n由选择函数给出, U_n = V_1 ∩ … ∩ V_n, C_n = B − U_n。
    有限后端上逐元素求出最小的n使 a ∉ U_n; 在所有原子都进入C_n时停止。
    """
    F = choice_functions_from_submeasure(m, max_scan=max_scan)
    algebra = m.algebra
    witness = m.positivity_witness()
    if witness is not None:
        raise AlgebraInputError(
            f"submeasure is not strictly positive: m({algebra.format(witness)}) = 0"
        )
    if isinstance(algebra, CantorAlgebra):

        def level_rule(a: Element) -> int:
            n = 1
            while in_v(F, n, a):
                n += 1
                if depth is not None and n > depth:
                    raise AlgebraInputError(f"{algebra.format(a)} is in no level up to depth {depth}")
            return n

        return Fragmentation(algebra=algebra, level_fn=level_rule, source="choice")

    assert isinstance(algebra, FiniteAlgebra)
    limit = depth or F.max_scan
    lev = [NEVER] * (1 << algebra.n_atoms)
    for a in range(1, 1 << algebra.n_atoms):
        n = 1
        # U_n随n递减, 所以第一个不在V_n中的n就是a的层
        while in_v(F, n, a):
            n += 1
            if n > limit:
                raise AlgebraInputError(
                    f"depth {limit} is too shallow: {a:#x} is in no level up to it"
                )
        lev[a] = n
    levels = levels_from_index(algebra, lev)
    log.info("Fragmentation built from choice functions.", levels=len(levels))
    return Fragmentation(algebra=algebra, levels=levels, source="choice")


# --- 对角化 -------------------------------------------------------------------

StreamFamily = Union[Sequence[CertifiedSequence], Callable[[int], CertifiedSequence]]


def diagonal_select(
    F: ChoiceFunctionFamily, streams: StreamFamily, count: Optional[int] = None
) -> CertifiedSequence:
    """
    第k项为 F_k(s^k), k ≥ 1, 证书为 1/k。
    选择第k项时只把k和s^k交给F_k, 看不到其它序列。
    """
    if callable(streams):
        family = streams
        total = count
    else:
        items = tuple(streams)
        total = len(items) if count is None else min(count, len(items))

        def family(k: int) -> CertifiedSequence:
            return items[k - 1]

    def source() -> Iterator[Element]:
        ks = itertools.count(1) if total is None else range(1, total + 1)
        for k in ks:
            yield F(k, family(k))

    return CertifiedSequence(
        algebra=F.m.algebra,
        source=source,
        envelope=harmonic_envelope,
        start=1,
        label="diagonal",
    )


def random_null_stream(
    m: Submeasure, seed: int, scale: int = 1
) -> CertifiedSequence:
    """
    有限后端上的随机零序列: 第n项是随机元素删去随机原子直到 m ≤ scale/(n+1)。
    每次重放都从同一个种子重新生成。
    """
    algebra = m.finite_algebra()

    def envelope(n: int) -> Fraction:
        return min(Fraction(1), Fraction(scale, n + 1))

    def source() -> Iterator[int]:
        rng = random.Random(seed)
        for n in itertools.count():
            a = algebra.random_element(rng)
            while m.eval(a) > envelope(n):
                bits = algebra.atoms_below(a)
                a ^= bits[rng.randrange(len(bits))]  # type: ignore[operator]
            yield a

    return CertifiedSequence(
        algebra=algebra, source=source, envelope=envelope, label=f"random({seed})"
    )


# --- 零序列与碎片化层级 -----------------------------------------------------


def certify_outside_levels(
    m: Submeasure, f: Fragmentation, terms: Sequence[Element], start: int = 1
) -> IdealCheckReport:
    """若 a_n ∉ C_n (C_n = {m ≥ 1/n}), 则 m(a_n) < 1/n, 于是 1/n 就是 {a_n} 的证书。"""
    for offset, a in enumerate(terms):
        n = start + offset
        if n < 1 or f.member(n, a):
            raise AlgebraInputError(f"term {n} lies in C_{n}")
    s = CertifiedSequence.from_elements(m.algebra, terms, envelope=harmonic_envelope, start=start)
    return ideal_membership_check(m, s, horizon=len(terms))


def gdelta_exit_index(
    m: Submeasure, f: Fragmentation, s: CertifiedSequence, n: int, horizon: int
) -> Optional[int]:
    """
    零序列不能停留在任何一个C_n中: 返回第一个 envelope(n_1) < 1/n 的下标n_1,
    并确认horizon以内 n_1 之后的每一项都不在C_n中。horizon内包络未降到1/n以下时返回None。
    """
    target = Fraction(1, n)
    exit_index: Optional[int] = None
    for j, a, _ in s.terms(m, count=horizon):
        if exit_index is None and s.envelope(j) < target:
            exit_index = j
        if exit_index is not None and f.member(n, a):
            raise AlgebraInputError(
                f"term {j} is back in C_{n} although its envelope is below 1/{n}; "
                "the fragmentation is not the harmonic one of this submeasure"
            )
    return exit_index


# --- 集中性 -------------------------------------------------------------------

AntichainSchedule = Iterable[tuple[int, Sequence[Element]]]


def block_antichains(algebra: FiniteAlgebra, horizon: int) -> Iterator[tuple[int, tuple[int, ...]]]:
    """A_n: 把原子按顺序切成n个连续块(n ≤ N)。"""
    for n in range(1, min(horizon, algebra.n_atoms) + 1):
        size, extra = divmod(algebra.n_atoms, n)
        blocks, low = [], 0
        for i in range(n):
            width = size + (1 if i < extra else 0)
            blocks.append(((1 << width) - 1) << low)
            low += width
        yield n, tuple(blocks)


def depth_antichains(algebra: CantorAlgebra, horizon: int) -> Iterator[tuple[int, tuple[Element, ...]]]:
    """A_n: 深度 ⌈log₂ n⌉ 的全部节点。"""
    for n in range(1, horizon + 1):
        yield n, tuple(algebra.level_nodes((n - 1).bit_length()))


def concentration_witness(
    m: Submeasure, antichains: AntichainSchedule, horizon: int, min_tail: Optional[int] = None
) -> ConcentrationReport:
    """
    贪心地取 a_n = argmin_{A_n} m (平局按元素顺序), 再拟合包络 c/n。
    m有限可加时 min ≤ 1/|A_n| ≤ 1/n, 结果是certified。
    否则只有当尾部至少min_tail项、末项低于首项取值且 c ≤ 2 时才报告empirical。
    """
    algebra = m.algebra
    min_tail = min_tail or get_settings().CONCENTRATION_MIN_TAIL
    picks: list[ConcentrationPick] = []
    for n, members in antichains:
        if n > horizon:
            break
        members = [algebra.own(x) for x in members]
        if len(members) < n:
            raise AlgebraInputError(f"antichain A_{n} has {len(members)} < {n} members")
        if not algebra.is_antichain(members):
            raise AlgebraInputError(f"A_{n} is not an antichain of nonzero elements")
        scored = [(m.eval(x), algebra.sort_key(x), x) for x in members]
        value, _, best = min(scored, key=lambda t: (t[0], t[1]))
        picks.append(ConcentrationPick(n=n, element=best, value=value, envelope=Fraction(0)))

    if not picks:
        return ConcentrationReport(status="not_concentrated", picks=(), envelope_scale=Fraction(0))

    tail = picks[len(picks) // 2 :]
    scale = max(p.value * p.n for p in tail)
    if m.finitely_additive:
        status = "certified"
        scale = max(scale, max(p.value * p.n for p in picks))
    elif len(tail) >= min_tail and tail[-1].value < picks[0].value and scale <= 2:
        status = "empirical"
    else:
        status = "not_concentrated"
    picks = [p.model_copy(update={"envelope": scale / p.n}) for p in picks]
    log.info(
        "Concentration selection finished.",
        status=status,
        picks=len(picks),
        tail=len(tail),
        scale=str(scale),
    )
    return ConcentrationReport(status=status, picks=tuple(picks), envelope_scale=scale)


def envelope_from_table(values: dict[int, Fraction], default: Fraction = Fraction(0)) -> Envelope:
    """由流脚本中的 `envelope n=k value=p/q` 声明得到分段常值包络。"""
    keys = sorted(values)

    def envelope(n: int) -> Fraction:
        below = [k for k in keys if k <= n]
        if below:
            return values[below[-1]]
        return values[keys[0]] if keys else default

    return envelope
