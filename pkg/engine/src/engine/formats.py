# /engine/src/engine/formats.py

"""
行格式的读写: 子测度表、碎片化文件、流脚本、LP证书。
空行和以 # 开头的行被忽略; 解析失败抛出带行号的FormatError。
"""

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Optional

from common.models import Element, IntersectionResult

from .algebra import BooleanAlgebra, CantorAlgebra, FiniteAlgebra
from .errors import AlgebraInputError, FormatError
from .fragmentation import Fragmentation, from_generators, validate_fragmentation
from .submeasure import Submeasure, TableSubmeasure

_ELEMENT_TOKEN = re.compile(r"\{[^}]*\}|[^,\s]+")


def format_rational(value: Fraction) -> str:
    return f"{value.numerator}/{value.denominator}"


def parse_rational(text: str, line_no: int = 0) -> Fraction:
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError) as e:
        raise FormatError(f"not a rational: {text!r}", line_no) from e


def parse_element(algebra: BooleanAlgebra, text: str, line_no: int = 0) -> Element:
    text = text.strip()
    try:
        if isinstance(algebra, FiniteAlgebra):
            return algebra.parse(text)
        assert isinstance(algebra, CantorAlgebra)
        if not (text.startswith("{") and text.endswith("}")):
            raise AlgebraInputError(f"cantor element must look like {{0,10}}: {text!r}")
        nodes = [x.strip() for x in text[1:-1].split(",") if x.strip()]
        return algebra.element(*("" if x == "*" else x for x in nodes))
    except AlgebraInputError as e:
        raise FormatError(str(e), line_no) from e


def _lines(text: str) -> Iterator[tuple[int, str]]:
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line and not line.startswith("#"):
            yield line_no, line


def _fields(line: str, line_no: int) -> dict[str, str]:
    out = {}
    for token in line.split():
        key, sep, value = token.partition("=")
        if not sep:
            raise FormatError(f"expected key=value, got {token!r}", line_no)
        out[key] = value
    return out


def _int(value: str, line_no: int) -> int:
    try:
        return int(value)
    except ValueError as e:
        raise FormatError(f"not an integer: {value!r}", line_no) from e


# --- 子测度表 -----------------------------------------------------------------


@dataclass(frozen=True)
class TableFile:
    algebra: FiniteAlgebra
    values: dict[int, Fraction]
    kind: str = "table"
    source: Optional[str] = None

    def submeasure(self) -> TableSubmeasure:
        constructed = self.kind == "constructed"
        return TableSubmeasure(
            self.algebra,
            self.values,
            kind="constructed" if constructed else "table",
            params={"source": self.source} if self.source else None,
            require_unit=not constructed,
        )


def dump_table(m: Submeasure, source: Optional[str] = None) -> str:
    algebra = m.finite_algebra()
    lines = [f"atoms={algebra.n_atoms}"]
    if m.kind == "constructed":
        lines.append("kind=constructed")
    if source:
        lines.append(f"source={source}")
    for a, value in enumerate(m.table()):
        lines.append(f"elem={a:#x} value={format_rational(value)}")
    return "\n".join(lines) + "\n"


def load_table(text: str) -> TableFile:
    algebra: Optional[FiniteAlgebra] = None
    kind, source = "table", None
    values: dict[int, Fraction] = {}
    for line_no, line in _lines(text):
        fields = _fields(line, line_no)
        if "atoms" in fields:
            try:
                algebra = FiniteAlgebra(_int(fields["atoms"], line_no))
            except AlgebraInputError as e:
                raise FormatError(str(e), line_no) from e
        elif "kind" in fields:
            kind = fields["kind"]
        elif "source" in fields:
            source = fields["source"]
        elif "elem" in fields and "value" in fields:
            if algebra is None:
                raise FormatError("element line before the atoms= header", line_no)
            a = parse_element(algebra, fields["elem"], line_no)
            if a in values:
                raise FormatError(f"duplicate element {a:#x}", line_no)
            values[a] = parse_rational(fields["value"], line_no)  # type: ignore[index]
        else:
            raise FormatError(f"unrecognized line {line!r}", line_no)
    if algebra is None:
        raise FormatError("missing atoms= header")
    return TableFile(algebra=algebra, values=values, kind=kind, source=source)


# --- 碎片化文件 ---------------------------------------------------------------


def dump_fragmentation(f: Fragmentation) -> str:
    lines = [f"levels={len(f.levels)}"]
    for n, family in enumerate(f.levels, start=1):
        lines.append(f"level={n}")
        lines.extend(f"gen={f.algebra.format(g)}" for g in family.generators)
    return "\n".join(lines) + "\n"


def load_fragmentation(text: str, algebra: FiniteAlgebra, source: str = "file") -> Fragmentation:
    declared: Optional[int] = None
    levels: list[list[int]] = []
    for line_no, line in _lines(text):
        fields = _fields(line, line_no)
        if "levels" in fields:
            declared = _int(fields["levels"], line_no)
        elif "level" in fields:
            n = _int(fields["level"], line_no)
            if n != len(levels) + 1:
                raise FormatError(f"expected level={len(levels) + 1}, got level={n}", line_no)
            levels.append([])
        elif "gen" in fields:
            if not levels:
                raise FormatError("generator before the first level= line", line_no)
            levels[-1].append(parse_element(algebra, fields["gen"], line_no))  # type: ignore[arg-type]
        else:
            raise FormatError(f"unrecognized line {line!r}", line_no)
    if declared is None:
        raise FormatError("missing levels= header")
    if declared != len(levels):
        raise FormatError(f"header declares {declared} levels but {len(levels)} were given")
    f = from_generators(algebra, levels, source=source)
    report = validate_fragmentation(f)
    if not report.valid:
        raise FormatError("invalid fragmentation: " + "; ".join(report.issues))
    return f


# --- 流脚本 -------------------------------------------------------------------


@dataclass(frozen=True)
class StreamScript:
    antichains: dict[int, tuple[Element, ...]] = field(default_factory=dict)
    envelope: dict[int, Fraction] = field(default_factory=dict)

    def schedule(self) -> list[tuple[int, tuple[Element, ...]]]:
        return sorted(self.antichains.items())


_ANTICHAIN_LINE = re.compile(r"^antichain\s+n=(\d+)\s*:\s*(.*)$")
_ENVELOPE_LINE = re.compile(r"^envelope\s+n=(\d+)\s+value=(\S+)$")


def load_stream_script(text: str, algebra: BooleanAlgebra) -> StreamScript:
    script = StreamScript()
    for line_no, line in _lines(text):
        if match := _ANTICHAIN_LINE.match(line):
            n = int(match.group(1))
            members = tuple(
                parse_element(algebra, token, line_no)
                for token in _ELEMENT_TOKEN.findall(match.group(2))
            )
            if n in script.antichains:
                raise FormatError(f"antichain n={n} declared twice", line_no)
            script.antichains[n] = members
        elif match := _ENVELOPE_LINE.match(line):
            script.envelope[int(match.group(1))] = parse_rational(match.group(2), line_no)
        else:
            raise FormatError(f"unrecognized stream line {line!r}", line_no)
    return script


def dump_stream_script(algebra: BooleanAlgebra, script: StreamScript) -> str:
    lines = [
        f"antichain n={n}: " + ",".join(algebra.format(a) for a in members)
        for n, members in script.schedule()
    ]
    lines.extend(
        f"envelope n={n} value={format_rational(v)}" for n, v in sorted(script.envelope.items())
    )
    return "\n".join(lines) + "\n"


# --- LP证书 -------------------------------------------------------------------


def dump_lp_certificate(result: IntersectionResult) -> str:
    lines = [f"mu atom={i} value={format_rational(w)}" for i, w in enumerate(result.mu)]
    lines.append(f"value={format_rational(result.value)}")
    return "\n".join(lines) + "\n"


def load_lp_certificate(text: str) -> tuple[Fraction, tuple[Fraction, ...]]:
    value: Optional[Fraction] = None
    mu: dict[int, Fraction] = {}
    for line_no, line in _lines(text):
        if line.startswith("mu "):
            fields = _fields(line[3:], line_no)
            mu[_int(fields.get("atom", ""), line_no)] = parse_rational(fields.get("value", ""), line_no)
        else:
            fields = _fields(line, line_no)
            if "value" not in fields:
                raise FormatError(f"unrecognized certificate line {line!r}", line_no)
            value = parse_rational(fields["value"], line_no)
    if value is None:
        raise FormatError("missing value= line")
    if sorted(mu) != list(range(len(mu))):
        raise FormatError("mu lines must cover atoms 0..N-1")
    return value, tuple(mu[i] for i in range(len(mu)))
