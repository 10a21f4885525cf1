# /engine/tests/test_construction.py

from fractions import Fraction

import pytest
from engine.algebra import CantorAlgebra, FiniteAlgebra
from engine.construction import (
    DecompositionWitness,
    DyadicIndex,
    construct_submeasure,
    dyadic_indices,
    infimum_by_scan,
    v_member,
    v_set,
    verify_construction,
)
from engine.errors import AlgebraInputError, GradingError
from engine.fragmentation import from_submeasure_dyadic, from_submeasure_harmonic
from engine.submeasure import (
    CoveringFamilyParams,
    CoveringSubmeasure,
    check_axioms,
    from_atom_weights,
    from_covering,
    uniform,
)

from strategies import brute_v_member

F4 = FiniteAlgebra(4)
F6 = FiniteAlgebra(6)
F8 = FiniteAlgebra(8)


def covering_pairs() -> CoveringSubmeasure:
    return from_covering(F6, CoveringFamilyParams(family=(0x3, 0xC, 0x30, 0x6), scale=3))


def covering_triples() -> CoveringSubmeasure:
    return from_covering(F6, CoveringFamilyParams(family=(0x7, 0x38, 0x1C), scale=2))


def graded_corpus():
    """graded的碎片化: 均匀、非均匀原子权重、两种覆盖族子测度的二进层。"""
    f5 = FiniteAlgebra(5)
    weights = [Fraction(1, 2), Fraction(1, 8), Fraction(1, 8), Fraction(1, 8), Fraction(1, 8)]
    skewed = [Fraction(w, 16) for w in (1, 1, 1, 1, 2, 2, 4, 4)]
    return [
        from_submeasure_dyadic(uniform(F4)),
        from_submeasure_dyadic(uniform(F8)),
        from_submeasure_dyadic(from_atom_weights(f5, weights)),
        from_submeasure_dyadic(from_atom_weights(F8, skewed)),
        from_submeasure_dyadic(covering_pairs()),
        from_submeasure_dyadic(covering_triples()),
    ]


CORPUS_IDS = ["uniform-4", "uniform-8", "weights-5", "weights-8", "covering-pairs", "covering-triples"]


class TestDyadicIndex:
    def test_value(self):
        assert DyadicIndex.of(1, 3).value == Fraction(5, 8)

    def test_from_value(self):
        assert DyadicIndex.from_value(Fraction(5, 8)) == DyadicIndex.of(1, 3)
        assert DyadicIndex.from_value(Fraction(1, 4)).indices == (2,)

    @pytest.mark.parametrize("bad", [Fraction(1), Fraction(0), Fraction(1, 3)])
    def test_from_value_rejects(self, bad):
        with pytest.raises(AlgebraInputError):
            DyadicIndex.from_value(bad)

    def test_indices_must_be_sorted_and_distinct(self):
        with pytest.raises(AlgebraInputError):
            DyadicIndex((2, 1))
        with pytest.raises(AlgebraInputError):
            DyadicIndex(())

    def test_enumeration_is_sorted_by_value(self):
        values = [r.value for r in dyadic_indices(3)]
        assert values == [Fraction(k, 8) for k in range(1, 8)]
        assert str(dyadic_indices(2)[-1]) == "{1,2}"


class TestMembership:
    def test_four_atoms_split_over_two_levels(self):
        f = from_submeasure_dyadic(uniform(F8))
        result = v_member(f, 0xF, DyadicIndex.of(1, 2))
        assert result.member
        assert result.witness == ((0x7, 1), (0x8, 2))
        assert DecompositionWitness(0xF, result.witness).verify(f)

    def test_five_atoms_are_not_in_v_three_quarters(self):
        f = from_submeasure_dyadic(uniform(F8))
        assert v_member(f, 0x1F, DyadicIndex.of(1, 2)).status == "not_member"

    def test_budget_exhaustion_is_unknown(self):
        f = from_submeasure_dyadic(uniform(F8))
        result = v_member(f, 0xFF, DyadicIndex.of(1, 2, 3), budget=1)
        assert result.status == "unknown"
        assert not result.member

    @pytest.mark.parametrize(
        "f",
        [
            from_submeasure_dyadic(uniform(F6)),
            from_submeasure_harmonic(uniform(F4)),
            from_submeasure_dyadic(covering_pairs()),
            from_submeasure_dyadic(covering_triples()),
        ],
        ids=["dyadic-f6", "harmonic-f4", "covering-pairs", "covering-triples"],
    )
    def test_matches_labeled_partition_enumeration(self, f):
        top = min(f.stabilization, 4)
        for r in dyadic_indices(top):
            for a in f.algebra.elements():
                assert v_member(f, a, r).member == brute_v_member(f, a, r.indices), (a, str(r))

    @pytest.mark.parametrize("f", graded_corpus(), ids=CORPUS_IDS)
    def test_v_laws_on_graded_chain(self, f):
        indices = dyadic_indices(min(f.stabilization, 3))
        sets = {r.value: v_set(f, r) for r in indices}
        values = sorted(sets)
        for i, r in enumerate(values):
            for s in values[i + 1 :]:
                assert sets[r] <= sets[s]
        for r in values:
            for s in values:
                total = r + s
                if total >= 1:
                    continue
                target = v_set(f, DyadicIndex.from_value(total))
                assert {x | y for x in sets[r] for y in sets[s]} <= target


class TestConstruction:
    def test_dyadic_uniform_f8(self):
        m = construct_submeasure(from_submeasure_dyadic(uniform(F8)))
        expected = {1: Fraction(1, 4), 2: Fraction(1, 2), 3: Fraction(1, 2), 4: Fraction(3, 4)}
        for a in range(1, 256):
            assert m.eval(a) == expected.get(a.bit_count(), Fraction(1))
        assert m.kind == "constructed"

    def test_dyadic_uniform_f4(self):
        m = construct_submeasure(from_submeasure_dyadic(uniform(F4)))
        assert m.eval(0x1) == Fraction(1, 2)
        assert all(m.eval(a) == 1 for a in range(16) if a.bit_count() >= 2)

    def test_non_graded_input_is_rejected_with_witness(self):
        with pytest.raises(GradingError) as info:
            construct_submeasure(from_submeasure_harmonic(uniform(F4)))
        assert info.value.level == 2
        assert info.value.witness == (0x1, 0x2)

    @pytest.mark.parametrize("f", graded_corpus(), ids=CORPUS_IDS)
    def test_scan_reference_matches_table(self, f):
        m = construct_submeasure(f)
        for a in f.algebra.elements():
            assert infimum_by_scan(f, a) == m.eval(a), (f.source, a)

    @pytest.mark.parametrize("f", graded_corpus(), ids=CORPUS_IDS)
    def test_corpus_round_trip(self, f):
        m = construct_submeasure(f)
        axioms = check_axioms(m)
        assert axioms.passed, axioms.violation
        report = verify_construction(f, m)
        assert report.sandwich_violations == 0
        assert report.strictly_positive
        assert report.passed

    def test_dyadic_uniform_f10(self):
        f10 = FiniteAlgebra(10)
        f = from_submeasure_dyadic(uniform(f10))
        m = construct_submeasure(f)
        expected = {k: Fraction(k, 8) for k in range(1, 8)}
        for a in f10.elements():
            if a:
                assert m.eval(a) == expected.get(a.bit_count(), Fraction(1)), a
        report = verify_construction(f, m)
        assert report.passed
        assert report.sandwich_violations == 0
        assert report.axioms.passed

    def test_level_bounds_dyadic_uniform_f8(self):
        f = from_submeasure_dyadic(uniform(F8))
        report = verify_construction(f, construct_submeasure(f))
        assert report.level_bounds == {1: 4, 2: 8, 3: 8}
        assert len(report.sandwich) == 255

    def test_cantor_sandwich(self):
        cantor = CantorAlgebra()
        f = from_submeasure_dyadic(uniform(cantor))
        m = construct_submeasure(f)
        assert m.eval(cantor.zero) == 0
        report = verify_construction(f, m, samples=20, seed=5)
        assert report.sandwich_violations == 0
        assert report.strictly_positive
        assert report.level_bounds == {}
