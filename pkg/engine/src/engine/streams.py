# /engine/src/engine/streams.py

"""惰性序列: 反链流与带零包络证书的序列。二者都是单消费者的有状态迭代器。"""

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import TYPE_CHECKING, Callable, Iterable, Iterator, Optional

from common.models import Element

from .algebra import BooleanAlgebra, CantorAlgebra, FiniteAlgebra
from .errors import EnvelopeViolationError, StreamInputError

if TYPE_CHECKING:
    from .submeasure import Submeasure

Envelope = Callable[[int], Fraction]


def dyadic_envelope(n: int) -> Fraction:
    return Fraction(1, 1 << max(n, 0))


def harmonic_envelope(n: int) -> Fraction:
    return Fraction(1, max(n, 1))


@dataclass(frozen=True)
class AntichainStream:
    """
    两两不交的非零元素流 {a_n}_{n ≥ start}。
    每次调用checked()都从source重新开始, 并对已发出的历史逐项检查不交性。
    """

    algebra: BooleanAlgebra
    source: Callable[[], Iterable[Element]]
    start: int = 0
    envelope: Optional[Envelope] = None
    label: str = ""

    def checked(self) -> Iterator[tuple[int, Element]]:
        history: list[tuple[int, Element]] = []
        for offset, raw in enumerate(self.source()):
            n = self.start + offset
            a = self.algebra.own(raw)
            if self.algebra.is_zero(a):
                raise StreamInputError(f"stream emitted 0 at index {n}", (n, n))
            for j, b in history:
                if not self.algebra.disjoint(a, b):
                    raise StreamInputError(
                        f"stream elements {j} and {n} are not disjoint: "
                        f"{self.algebra.format(b)} and {self.algebra.format(a)}",
                        (j, n),
                    )
            history.append((n, a))
            yield n, a

    @classmethod
    def from_elements(
        cls, algebra: BooleanAlgebra, xs: Iterable[Element], start: int = 0
    ) -> "AntichainStream":
        items = tuple(xs)
        return cls(algebra=algebra, source=lambda: iter(items), start=start, label="list")

    @classmethod
    def atoms(cls, algebra: FiniteAlgebra) -> "AntichainStream":
        return cls.from_elements(algebra, algebra.atoms())

    @classmethod
    def depth_nodes(cls, algebra: CantorAlgebra) -> "AntichainStream":
        """第n项为深度n的节点0^{n-1}1, 在一致节点测度下包络为2^-n。"""
        return cls(
            algebra=algebra,
            source=lambda: (algebra.depth_node(n) for n in itertools.count(1)),
            start=1,
            envelope=dyadic_envelope,
            label="depth-nodes",
        )


@dataclass(frozen=True)
class CertifiedSequence:
    """
    带证书的序列: 单调不增的包络, 声明极限为0, 并保证 m(a_n) ≤ envelope(n)。
    证书在发出时检查, 极限从不由样本推断。
    """

    algebra: BooleanAlgebra
    source: Callable[[], Iterable[Element]]
    envelope: Envelope
    start: int = 0
    label: str = ""
    # 非空时序列收敛到limit: 证书约束的是 m(a_n △ limit)
    limit: Optional[Element] = None

    def raw(self) -> Iterator[tuple[int, Element]]:
        for offset, a in enumerate(self.source()):
            yield self.start + offset, a

    def terms(
        self, m: "Submeasure", count: Optional[int] = None
    ) -> Iterator[tuple[int, Element, Fraction]]:
        """逐项发出 (n, a_n, m(a_n)), 同时检查包络单调性与包络界。"""
        previous: Optional[Fraction] = None
        for n, raw in self.raw():
            if count is not None and n - self.start >= count:
                return
            a = self.algebra.own(raw)
            bound = self.envelope(n)
            if previous is not None and bound > previous:
                raise EnvelopeViolationError(
                    f"envelope increases at index {n}", n, bound, previous
                )
            value = m.eval(a if self.limit is None else self.algebra.symdiff(a, self.limit))
            if value > bound:
                raise EnvelopeViolationError(
                    f"term {n} has value {value} above its envelope {bound}",
                    n,
                    value,
                    bound,
                )
            previous = bound
            yield n, a, value

    def term(self, n: int) -> Element:
        offset = n - self.start
        if offset < 0:
            raise IndexError(n)
        for _, a in itertools.islice(self.raw(), offset, offset + 1):
            return self.algebra.own(a)
        raise IndexError(n)

    @classmethod
    def from_elements(
        cls,
        algebra: BooleanAlgebra,
        xs: Iterable[Element],
        envelope: Envelope,
        start: int = 0,
        tail: Optional[Element] = None,
    ) -> "CertifiedSequence":
        """有限前缀加常值尾部(默认为0)构成的无穷序列。"""
        items = tuple(xs)
        fill = algebra.zero if tail is None else tail
        return cls(
            algebra=algebra,
            source=lambda: itertools.chain(items, itertools.repeat(fill)),
            envelope=envelope,
            start=start,
            label="prefix",
        )
