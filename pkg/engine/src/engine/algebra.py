# /engine/src/engine/algebra.py

"""
布尔代数的精确表示。

两个后端共享同一个抽象能力 `BooleanAlgebra`:
  - FiniteAlgebra(N): 幂集代数, 元素为N位原子掩码(int), 1 ≤ N ≤ 24;
  - CantorAlgebra: Cantor空间的开闭集代数, 元素为二叉树节点的规范反链(frozenset[str])。

规范形式: 没有节点是另一节点的祖先, 且不存在同时出现的兄弟节点(兄弟合并为父节点)。
空集表示0, {""}表示1。因此元素相等就是结构相等。
"""

import random
from abc import ABC, abstractmethod
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Iterable, Iterator, Optional, Sequence

from common.logging import get_logger
from common.models import Element, PackingResult

from .config import get_settings
from .errors import AlgebraInputError

log = get_logger(__name__)

MAX_FINITE_ATOMS = 24


class BooleanAlgebra(ABC):
    """布尔代数的抽象能力。所有运算都是纯函数, 结果为规范形式。"""

    backend: str = ""

    @property
    @abstractmethod
    def zero(self) -> Element: ...

    @property
    @abstractmethod
    def one(self) -> Element: ...

    @abstractmethod
    def own(self, a: Any) -> Element:
        """校验a属于本代数并返回其规范形式; 否则抛出AlgebraInputError。"""

    @abstractmethod
    def join(self, a: Element, b: Element) -> Element: ...

    @abstractmethod
    def meet(self, a: Element, b: Element) -> Element: ...

    @abstractmethod
    def complement(self, a: Element) -> Element: ...

    @abstractmethod
    def leq(self, a: Element, b: Element) -> bool: ...

    @abstractmethod
    def atoms_below(self, a: Element) -> list[Element]: ...

    @abstractmethod
    def sort_key(self, a: Element) -> Any: ...

    @abstractmethod
    def format(self, a: Element) -> str: ...

    @abstractmethod
    def random_element(self, rng: random.Random) -> Element: ...

    def symdiff(self, a: Element, b: Element) -> Element:
        return self.join(
            self.meet(a, self.complement(b)), self.meet(b, self.complement(a))
        )

    def is_zero(self, a: Element) -> bool:
        return self.own(a) == self.zero

    def disjoint(self, a: Element, b: Element) -> bool:
        return self.is_zero(self.meet(a, b))

    def join_all(self, xs: Iterable[Element]) -> Element:
        acc = self.zero
        for x in xs:
            acc = self.join(acc, x)
        return acc

    def is_antichain(self, xs: Sequence[Element]) -> bool:
        """两两不交且不含0(反链位于B+中)。"""
        if not xs:
            raise AlgebraInputError("is_antichain expects a nonempty list")
        if any(self.is_zero(x) for x in xs):
            return False
        return all(
            self.disjoint(xs[i], xs[j])
            for i in range(len(xs))
            for j in range(i + 1, len(xs))
        )


class FiniteAlgebra(BooleanAlgebra):
    """N个原子上的幂集代数; 无穷无原子的情形由CantorAlgebra表示。"""

    backend = "finite"

    def __init__(self, n_atoms: int) -> None:
        if not 1 <= n_atoms <= MAX_FINITE_ATOMS:
            raise AlgebraInputError(
                f"finite algebra needs 1..{MAX_FINITE_ATOMS} atoms, got {n_atoms}"
            )
        self.n_atoms = n_atoms
        self.full = (1 << n_atoms) - 1

    def __repr__(self) -> str:
        return f"FiniteAlgebra({self.n_atoms})"

    def __eq__(self, other: object) -> bool:
        return isinstance(other, FiniteAlgebra) and other.n_atoms == self.n_atoms

    def __hash__(self) -> int:
        return hash(("finite", self.n_atoms))

    @property
    def zero(self) -> int:
        return 0

    @property
    def one(self) -> int:
        return self.full

    def own(self, a: Any) -> int:
        if type(a) is not int:
            raise AlgebraInputError(
                f"element {a!r} does not belong to the finite backend"
            )
        if not 0 <= a <= self.full:
            raise AlgebraInputError(
                f"mask {a:#x} out of range for {self.n_atoms} atoms"
            )
        return a

    def join(self, a: Element, b: Element) -> int:
        return self.own(a) | self.own(b)

    def meet(self, a: Element, b: Element) -> int:
        return self.own(a) & self.own(b)

    def complement(self, a: Element) -> int:
        return self.full ^ self.own(a)

    def symdiff(self, a: Element, b: Element) -> int:
        return self.own(a) ^ self.own(b)

    def leq(self, a: Element, b: Element) -> bool:
        return self.own(a) & ~self.own(b) == 0

    def atom(self, i: int) -> int:
        return 1 << i

    def atoms(self) -> list[int]:
        return [1 << i for i in range(self.n_atoms)]

    def atoms_below(self, a: Element) -> list[Element]:
        mask = self.own(a)
        return [1 << i for i in range(self.n_atoms) if mask >> i & 1]

    def elements(self) -> range:
        return range(1 << self.n_atoms)

    def size(self, a: int) -> int:
        return a.bit_count()

    def sort_key(self, a: Element) -> int:
        return self.own(a)

    def format(self, a: Element) -> str:
        return f"{self.own(a):#x}"

    def parse(self, text: str) -> int:
        try:
            value = int(text.strip(), 16)
        except ValueError as e:
            raise AlgebraInputError(f"not a hex bitmask: {text!r}") from e
        return self.own(value)

    def random_element(self, rng: random.Random) -> int:
        return rng.getrandbits(self.n_atoms)


def _sibling(node: str) -> str:
    return node[:-1] + ("1" if node[-1] == "0" else "0")


def canonicalize(nodes: Iterable[str]) -> frozenset[str]:
    """去掉被祖先覆盖的节点, 再自底向上合并完整的兄弟对。"""
    raw = set(nodes)
    for node in raw:
        if node.strip("01"):
            raise AlgebraInputError(f"cantor node must be a binary string: {node!r}")
    kept = {x for x in raw if not any(x[:i] in raw for i in range(len(x)))}
    # 按深度从深到浅处理, 合并后的父节点可能再与其兄弟合并
    pending = sorted(kept, key=len, reverse=True)
    while pending:
        node = pending.pop(0)
        if not node or node not in kept:
            continue
        sibling = _sibling(node)
        if sibling in kept:
            kept.discard(node)
            kept.discard(sibling)
            parent = node[:-1]
            kept.add(parent)
            # 父节点比队列中剩余的节点都浅或相等, 插到同深度节点之后即可
            pending.append(parent)
            pending.sort(key=len, reverse=True)
    return frozenset(kept)


class CantorAlgebra(BooleanAlgebra):
    """Cantor空间开闭集代数: 可数、无原子。"""

    backend = "cantor"

    def __init__(self, sample_depth: Optional[int] = None) -> None:
        self.sample_depth = sample_depth or get_settings().CANTOR_SAMPLE_DEPTH

    def __repr__(self) -> str:
        return "CantorAlgebra()"

    def __eq__(self, other: object) -> bool:
        return isinstance(other, CantorAlgebra)

    def __hash__(self) -> int:
        return hash("cantor")

    @property
    def zero(self) -> frozenset[str]:
        return frozenset()

    @property
    def one(self) -> frozenset[str]:
        return frozenset({""})

    def element(self, *nodes: str) -> frozenset[str]:
        return canonicalize(nodes)

    def own(self, a: Any) -> frozenset[str]:
        if not isinstance(a, frozenset):
            raise AlgebraInputError(
                f"element {a!r} does not belong to the cantor backend"
            )
        return canonicalize(a)

    def join(self, a: Element, b: Element) -> frozenset[str]:
        return canonicalize(self.own(a) | self.own(b))

    def meet(self, a: Element, b: Element) -> frozenset[str]:
        result = set()
        for x in self.own(a):
            for y in self.own(b):
                if y.startswith(x):
                    result.add(y)
                elif x.startswith(y):
                    result.add(x)
        return canonicalize(result)

    def complement(self, a: Element) -> frozenset[str]:
        def _rest(nodes: list[str], prefix: str) -> list[str]:
            if not nodes:
                return [prefix]
            if prefix in nodes:
                return []
            left = [x for x in nodes if x.startswith(prefix + "0")]
            right = [x for x in nodes if x.startswith(prefix + "1")]
            return _rest(left, prefix + "0") + _rest(right, prefix + "1")

        return canonicalize(_rest(list(self.own(a)), ""))

    def leq(self, a: Element, b: Element) -> bool:
        # b是规范的: 若b的后代覆盖了x则它们早已合并为x或其祖先
        upper = self.own(b)
        return all(
            any(x[:i] in upper for i in range(len(x) + 1)) for x in self.own(a)
        )

    def atoms_below(self, a: Element) -> list[Element]:
        """相对于a的"原子"即a的规范节点。"""
        return [frozenset({x}) for x in sorted(self.own(a))]

    def depth(self, a: Element) -> int:
        return max((len(x) for x in self.own(a)), default=0)

    def refine(self, a: Element, depth: int) -> list[str]:
        """a在给定深度上的全部节点(深度不足的节点展开为后代)。"""
        out: list[str] = []
        for x in sorted(self.own(a)):
            if len(x) > depth:
                raise AlgebraInputError(f"node {x!r} is deeper than {depth}")
            free = depth - len(x)
            out.extend(x + format(i, f"0{free}b") if free else x for i in range(1 << free))
        return out

    def node_measure(self, a: Element) -> Fraction:
        """一致节点权重(Lebesgue)测度: 深度d的节点为2^-d。"""
        return sum((Fraction(1, 1 << len(x)) for x in self.own(a)), Fraction(0))

    def depth_node(self, n: int) -> frozenset[str]:
        """深度n的节点 0^{n-1}1; n ≥ 1 时它们两两不交。"""
        if n < 1:
            raise AlgebraInputError("depth nodes start at depth 1")
        return frozenset({"0" * (n - 1) + "1"})

    def level_nodes(self, depth: int) -> list[frozenset[str]]:
        return [frozenset({format(i, f"0{depth}b") if depth else ""}) for i in range(1 << depth)]

    def sort_key(self, a: Element) -> tuple[str, ...]:
        return tuple(sorted(self.own(a)))

    def format(self, a: Element) -> str:
        nodes = sorted(self.own(a))
        return "{" + ",".join(x if x else "*" for x in nodes) + "}"

    def random_element(self, rng: random.Random) -> frozenset[str]:
        depth = rng.randint(1, self.sample_depth)
        return canonicalize(
            format(i, f"0{depth}b") for i in range(1 << depth) if rng.getrandbits(1)
        )


@dataclass(frozen=True)
class UpwardClosedFamily:
    """
    上闭族, 以其极小元(生成反链)存储, 从不展开。
    a ∈ C ⇔ 存在生成元g ≤ a; 补集 U = B − C 使用同一组生成元取反。
    """

    algebra: BooleanAlgebra
    generators: tuple[Element, ...]

    def member(self, a: Element) -> bool:
        a = self.algebra.own(a)
        if isinstance(self.algebra, FiniteAlgebra):
            return any(g & ~a == 0 for g in self.generators)  # type: ignore[operator]
        return any(self.algebra.leq(g, a) for g in self.generators)

    def __contains__(self, a: Element) -> bool:
        return self.member(a)

    def members(self) -> Iterator[int]:
        """有限后端上逐个枚举成员(仅用于小代数的检查)。"""
        if not isinstance(self.algebra, FiniteAlgebra):
            raise AlgebraInputError("members() needs the finite backend")
        return (a for a in self.algebra.elements() if self.member(a))


def upward_closure(algebra: BooleanAlgebra, xs: Iterable[Element]) -> UpwardClosedFamily:
    """由任意元素列表生成的上闭族; 生成元为xs的极小元。"""
    items = {algebra.own(x) for x in xs}
    if isinstance(algebra, FiniteAlgebra):
        ordered = sorted(items, key=lambda x: (x.bit_count(), x))  # type: ignore[union-attr]
    else:
        ordered = sorted(
            items, key=lambda x: (algebra.node_measure(x), algebra.sort_key(x))  # type: ignore[attr-defined]
        )
    minimal: list[Element] = []
    for x in ordered:
        if not any(algebra.leq(g, x) for g in minimal):
            minimal.append(x)
    minimal.sort(key=algebra.sort_key)
    return UpwardClosedFamily(algebra=algebra, generators=tuple(minimal))


class _SearchStopped(Exception):
    pass


def max_disjoint_packing(
    family: UpwardClosedFamily, budget: Optional[int] = None
) -> PackingResult:
    """
    族内最大反链的精确规模(有限后端)。

    任意反链的成员都可以换成其下方的生成元而保持不交, 因此只需在生成元上做集合打包:
    以剩余原子掩码为状态, 对最低剩余原子分支(用某个包含它的生成元, 或弃用它)。
    """
    algebra = family.algebra
    if not isinstance(algebra, FiniteAlgebra):
        raise AlgebraInputError("max_disjoint_packing needs the finite backend")
    budget = budget or get_settings().BUDGET_STEPS

    gens: list[int] = [g for g in family.generators if g]  # type: ignore[misc]
    if len(gens) < len(family.generators):
        # 0是生成元: 族为整个B, 反链最多为全部原子
        gens = algebra.atoms()
    if not gens:
        return PackingResult(size=0, witness=(), exact=True, steps=0)

    by_atom: list[list[int]] = [[] for _ in range(algebra.n_atoms)]
    for g in sorted(gens, key=lambda g: (g.bit_count(), g)):
        low = (g & -g).bit_length() - 1
        # 只在最低原子处挂载, 分支时最低剩余原子必须被覆盖或被弃用
        by_atom[low].append(g)
    min_size = min(g.bit_count() for g in gens)

    best: list[int] = []
    seen: dict[int, int] = {}
    steps = 0

    def search(rem: int, chosen: list[int]) -> None:
        nonlocal best, steps
        steps += 1
        if steps > budget:
            raise _SearchStopped
        if len(chosen) > len(best):
            best = list(chosen)
        if len(chosen) + rem.bit_count() // min_size <= len(best):
            return
        if seen.get(rem, -1) >= len(chosen):
            return
        seen[rem] = len(chosen)
        if rem == 0:
            return
        low = (rem & -rem).bit_length() - 1
        for g in by_atom[low]:
            if g & ~rem == 0:
                chosen.append(g)
                search(rem & ~g, chosen)
                chosen.pop()
        search(rem & ~(1 << low), chosen)

    exact = True
    try:
        search(algebra.full, [])
    except _SearchStopped:
        exact = False
        log.warning("Packing search hit the step budget.", budget=budget, best=len(best))
    log.debug("Packing search finished.", size=len(best), steps=steps, exact=exact)
    return PackingResult(
        size=len(best), witness=tuple(sorted(best)), exact=exact, steps=steps
    )
