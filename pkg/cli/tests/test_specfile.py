# /cli/tests/test_specfile.py

from fractions import Fraction
from pathlib import Path

import pytest
from cli.specfile import (
    build_algebra,
    build_family,
    build_fragmentation,
    build_submeasure,
    load_spec,
    parse_spec,
)
from engine.algebra import CantorAlgebra, FiniteAlgebra
from engine.errors import AlgebraInputError, FormatError
from pydantic import ValidationError

BASE = Path("/specs")


class TestParseSpec:
    def test_full_spec(self):
        spec = parse_spec(
            "# demo\n"
            "algebra finite 6   # six atoms\n"
            "submeasure covering 2 { 0x7 0x38 0x1c }\n"
            "fragmentation harmonic\n"
            "horizon 12\n"
            "epsilon 1/4\n"
            "family 0x3 0xc\n"
            "antichains streams.txt\n",
            BASE,
        )
        assert spec.algebra.atoms == 6
        assert spec.submeasure.kind == "covering"
        assert spec.submeasure.scale == 2
        assert spec.submeasure.family == ("0x7", "0x38", "0x1c")
        assert spec.fragmentation.kind == "harmonic"
        assert spec.horizon == 12
        assert spec.epsilon == Fraction(1, 4)
        assert spec.family == ("0x3", "0xc")
        assert spec.resolve(spec.antichains) == BASE / "streams.txt"

    def test_absolute_paths_are_kept(self):
        spec = parse_spec("algebra finite 4\nsubmeasure table /data/t.txt\n", BASE)
        assert spec.resolve(spec.submeasure.path) == Path("/data/t.txt")

    @pytest.mark.parametrize(
        "text",
        ["submeasure uniform\n", "algebra finite 4\nalgebra cantor\n"],
        ids=["none", "two"],
    )
    def test_exactly_one_algebra(self, text):
        with pytest.raises(FormatError):
            parse_spec(text, BASE)

    @pytest.mark.parametrize(
        "text, line_no",
        [
            ("algebra finite 4\nhorizon many\n", 2),
            ("algebra finite 4\n\nsubmeasure covering 2 0x3 0xc\n", 3),
            ("algebra finite x\n", 1),
            ("algebra finite 4\nmystery 1\n", 2),
            ("algebra finite 4\nepsilon 1/0\n", 2),
            ("algebra finite 4\nfamily\n", 2),
        ],
        ids=["horizon", "covering", "atoms", "unknown", "epsilon", "empty-family"],
    )
    def test_errors_carry_line_numbers(self, text, line_no):
        with pytest.raises(FormatError) as info:
            parse_spec(text, BASE)
        assert info.value.line_no == line_no

    def test_one_atom_is_too_few(self):
        with pytest.raises(ValidationError):
            parse_spec("algebra finite 1\n", BASE)

    def test_unknown_submeasure_kind(self):
        with pytest.raises(ValidationError):
            parse_spec("algebra finite 4\nsubmeasure gaussian\n", BASE)

    def test_load_uses_the_file_directory(self, tmp_path):
        path = tmp_path / "run.spec"
        path.write_text("algebra cantor\nsubmeasure lebesgue\n", encoding="utf-8")
        spec = load_spec(path)
        assert spec.base_dir == tmp_path
        assert spec.algebra.backend == "cantor"


class TestBuilders:
    def test_defaults_are_uniform_and_dyadic(self):
        spec = parse_spec("algebra finite 8\n", BASE)
        algebra = build_algebra(spec)
        m = build_submeasure(spec, algebra)
        assert m.eval(0x1) == Fraction(1, 8)
        f = build_fragmentation(spec, algebra, m)
        assert f.source == "dyadic"
        assert f.stabilization == 3

    def test_weights(self):
        spec = parse_spec("algebra finite 3\nsubmeasure weights 1/2 1/4 1/4\n", BASE)
        m = build_submeasure(spec, build_algebra(spec))
        assert m.eval(0x3) == Fraction(3, 4)

    def test_covering(self):
        spec = parse_spec("algebra finite 6\nsubmeasure covering 2 { 0x7 0x38 0x1c }\n", BASE)
        m = build_submeasure(spec, build_algebra(spec))
        assert m.eval(0x3F) == 1
        assert m.eval(0x1) == Fraction(1, 2)

    def test_table_atom_count_must_match(self, tmp_path):
        (tmp_path / "t.txt").write_text(
            "atoms=2\nelem=0x0 value=0\nelem=0x1 value=1/2\nelem=0x2 value=1/2\nelem=0x3 value=1\n",
            encoding="utf-8",
        )
        spec = parse_spec("algebra finite 3\nsubmeasure table t.txt\n", tmp_path)
        with pytest.raises(AlgebraInputError):
            build_submeasure(spec, build_algebra(spec))

    def test_constructed_from_fragmentation_file(self, tmp_path):
        (tmp_path / "frag.txt").write_text(
            "levels=2\nlevel=1\ngen=0x3\ngen=0xc\nlevel=2\ngen=0x1\ngen=0x2\ngen=0x4\ngen=0x8\n",
            encoding="utf-8",
        )
        spec = parse_spec("algebra finite 4\nsubmeasure constructed frag.txt\n", tmp_path)
        m = build_submeasure(spec, build_algebra(spec))
        assert m.kind == "constructed"
        assert m.eval(0x1) == Fraction(1, 2)
        assert m.eval(0x3) == 1

    def test_finite_only_kinds_reject_cantor(self):
        spec = parse_spec("algebra cantor\nsubmeasure weights 1/2 1/2\n", BASE)
        algebra = build_algebra(spec)
        assert isinstance(algebra, CantorAlgebra)
        with pytest.raises(AlgebraInputError):
            build_submeasure(spec, algebra)

    def test_family_is_parsed_in_the_algebra(self):
        spec = parse_spec("algebra finite 4\nfamily 0x3 0xc\n", BASE)
        assert build_family(spec, FiniteAlgebra(4)) == [0x3, 0xC]
