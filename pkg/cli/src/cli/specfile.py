# /cli/src/cli/specfile.py

"""
规格文件: 每行一个子句, 在任何命令运行之前解析并校验为engine的输入。

    algebra finite 8 | algebra cantor
    submeasure uniform | weights 1/2 1/4 … | covering K { 0x3 0xc … } | table <path>
               | constructed <fragfile> | lebesgue | constant
    fragmentation harmonic | dyadic | file <path>
    horizon <n>      budget <n>      epsilon <p/q>
    family <hex> <hex> …             antichains <path>

相对路径以规格文件所在目录为基准。
"""

from fractions import Fraction
from pathlib import Path
from typing import Literal, Optional, Tuple

from common.models import Element
from engine.algebra import BooleanAlgebra, CantorAlgebra, FiniteAlgebra
from engine.construction import construct_submeasure
from engine.errors import AlgebraInputError, FormatError
from engine.formats import (
    StreamScript,
    load_fragmentation,
    load_stream_script,
    load_table,
    parse_element,
    parse_rational,
)
from engine.fragmentation import Fragmentation, from_submeasure_dyadic, from_submeasure_harmonic
from engine.submeasure import (
    CoveringFamilyParams,
    Submeasure,
    constant_one,
    from_atom_weights,
    from_covering,
    uniform,
)
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .config import get_settings


class AlgebraClause(BaseModel):
    model_config = ConfigDict(frozen=True)

    backend: Literal["finite", "cantor"]
    atoms: Optional[int] = Field(default=None, ge=1, le=24)

    @model_validator(mode="after")
    def _atoms_for_finite(self) -> "AlgebraClause":
        if self.backend == "finite":
            minimum = get_settings().MIN_ATOMS
            if self.atoms is None:
                raise ValueError("finite algebra needs an atom count")
            if self.atoms < minimum:
                raise ValueError(f"algebra must have at least {minimum} atoms")
        return self


class SubmeasureClause(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    kind: Literal["uniform", "weights", "covering", "table", "constructed", "lebesgue", "constant"]
    weights: Tuple[Fraction, ...] = ()
    scale: Optional[int] = Field(default=None, ge=1)
    family: Tuple[str, ...] = ()
    path: Optional[Path] = None


class FragmentationClause(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["harmonic", "dyadic", "file"]
    path: Optional[Path] = None


class SpecFile(BaseModel):
    """校验后的规格; 只含恰好一个algebra子句。"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    base_dir: Path
    algebra: AlgebraClause
    submeasure: Optional[SubmeasureClause] = None
    fragmentation: Optional[FragmentationClause] = None
    horizon: Optional[int] = Field(default=None, gt=0)
    budget: Optional[int] = Field(default=None, gt=0)
    epsilon: Optional[Fraction] = None
    family: Tuple[str, ...] = ()
    antichains: Optional[Path] = None

    def resolve(self, path: Path) -> Path:
        return path if path.is_absolute() else self.base_dir / path


def _tokens_after(words: list[str], line_no: int, at_least: int = 1) -> list[str]:
    if len(words) - 1 < at_least:
        raise FormatError(f"clause {words[0]!r} is missing arguments", line_no)
    return words[1:]


def parse_spec(text: str, base_dir: Path) -> SpecFile:
    fields: dict[str, object] = {"base_dir": base_dir}
    algebra_clauses = 0
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        words = line.split()
        head = words[0]
        args = _tokens_after(words, line_no)
        if head == "algebra":
            algebra_clauses += 1
            if args[0] == "finite":
                if len(args) != 2 or not args[1].isdigit():
                    raise FormatError("expected 'algebra finite <N>'", line_no)
                fields["algebra"] = {"backend": "finite", "atoms": int(args[1])}
            elif args == ["cantor"]:
                fields["algebra"] = {"backend": "cantor"}
            else:
                raise FormatError(f"unknown algebra clause {line!r}", line_no)
        elif head == "submeasure":
            fields["submeasure"] = _submeasure_clause(args, line_no)
        elif head == "fragmentation":
            if args[0] == "file":
                if len(args) != 2:
                    raise FormatError("expected 'fragmentation file <path>'", line_no)
                fields["fragmentation"] = {"kind": "file", "path": args[1]}
            else:
                fields["fragmentation"] = {"kind": args[0]}
        elif head in ("horizon", "budget"):
            if len(args) != 1 or not args[0].isdigit():
                raise FormatError(f"expected '{head} <n>'", line_no)
            fields[head] = int(args[0])
        elif head == "epsilon":
            fields["epsilon"] = parse_rational(args[0], line_no)
        elif head == "family":
            fields["family"] = tuple(args)
        elif head == "antichains":
            fields["antichains"] = args[0]
        else:
            raise FormatError(f"unknown clause {head!r}", line_no)
    if algebra_clauses != 1:
        raise FormatError(f"expected exactly one algebra clause, found {algebra_clauses}")
    return SpecFile.model_validate(fields)


def _submeasure_clause(args: list[str], line_no: int) -> dict[str, object]:
    kind = args[0]
    if kind == "weights":
        return {"kind": kind, "weights": tuple(parse_rational(w, line_no) for w in args[1:])}
    if kind == "covering":
        # covering K { 0x3 0x5 … }
        if len(args) < 4 or args[2] != "{" or args[-1] != "}":
            raise FormatError("expected 'covering K { <hex> … }'", line_no)
        if not args[1].isdigit():
            raise FormatError(f"covering scale must be an integer, got {args[1]!r}", line_no)
        return {"kind": kind, "scale": int(args[1]), "family": tuple(args[3:-1])}
    if kind in ("table", "constructed"):
        if len(args) != 2:
            raise FormatError(f"expected 'submeasure {kind} <path>'", line_no)
        return {"kind": kind, "path": args[1]}
    return {"kind": kind}


def load_spec(path: Path) -> SpecFile:
    return parse_spec(path.read_text(encoding="utf-8"), path.parent)


# --- 把子句变成engine对象 ------------------------------------------------------


def build_algebra(spec: SpecFile) -> BooleanAlgebra:
    if spec.algebra.backend == "cantor":
        return CantorAlgebra()
    assert spec.algebra.atoms is not None
    return FiniteAlgebra(spec.algebra.atoms)


def _finite(algebra: BooleanAlgebra, what: str) -> FiniteAlgebra:
    if not isinstance(algebra, FiniteAlgebra):
        raise AlgebraInputError(f"{what} needs a finite algebra")
    return algebra


def build_submeasure(spec: SpecFile, algebra: BooleanAlgebra, budget: Optional[int] = None) -> Submeasure:
    clause = spec.submeasure or SubmeasureClause(kind="uniform")
    if clause.kind in ("uniform", "lebesgue"):
        return uniform(algebra)
    if clause.kind == "constant":
        return constant_one(algebra)
    finite = _finite(algebra, f"submeasure {clause.kind}")
    if clause.kind == "weights":
        return from_atom_weights(finite, clause.weights)
    if clause.kind == "covering":
        family = tuple(parse_element(finite, x) for x in clause.family)
        params = CoveringFamilyParams(family=family, scale=clause.scale)  # type: ignore[arg-type]
        return from_covering(finite, params, budget=budget)
    assert clause.path is not None
    path = spec.resolve(clause.path)
    if clause.kind == "table":
        table = load_table(path.read_text(encoding="utf-8"))
        if table.algebra != finite:
            raise AlgebraInputError(
                f"table has {table.algebra.n_atoms} atoms, spec declares {finite.n_atoms}"
            )
        return table.submeasure()
    f = load_fragmentation(path.read_text(encoding="utf-8"), finite, source=str(clause.path))
    return construct_submeasure(f, budget=budget)


def build_fragmentation(spec: SpecFile, algebra: BooleanAlgebra, m: Optional[Submeasure]) -> Fragmentation:
    """没有fragmentation子句时默认取子测度的二进(dyadic)层。"""
    clause = spec.fragmentation or FragmentationClause(kind="dyadic")
    if clause.kind == "file":
        assert clause.path is not None
        finite = _finite(algebra, "fragmentation file")
        text = spec.resolve(clause.path).read_text(encoding="utf-8")
        return load_fragmentation(text, finite, source=str(clause.path))
    if m is None:
        raise AlgebraInputError(f"{clause.kind} fragmentation needs a submeasure clause")
    if clause.kind == "harmonic":
        return from_submeasure_harmonic(m)
    return from_submeasure_dyadic(m)


def build_family(spec: SpecFile, algebra: BooleanAlgebra) -> list[Element]:
    return [parse_element(algebra, x) for x in spec.family]


def build_stream_script(spec: SpecFile, algebra: BooleanAlgebra) -> Optional[StreamScript]:
    if spec.antichains is None:
        return None
    return load_stream_script(spec.resolve(spec.antichains).read_text(encoding="utf-8"), algebra)
