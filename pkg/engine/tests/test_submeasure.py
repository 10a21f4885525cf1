# /engine/tests/test_submeasure.py

import random
from fractions import Fraction

import pytest
from engine.algebra import CantorAlgebra, FiniteAlgebra
from engine.errors import AlgebraInputError
from engine.streams import AntichainStream
from engine.submeasure import (
    CoveringFamilyParams,
    check_axioms,
    constant_one,
    distance,
    exhaustivity_profile,
    from_atom_weights,
    from_covering,
    from_table,
    is_exhaustive_on,
    metric_kind,
    uniform,
    uniform_exhaustivity_bound,
)
from hypothesis import given, settings

from strategies import atom_weights, brute_max_antichain, masks

F3 = FiniteAlgebra(3)
F4 = FiniteAlgebra(4)
F6 = FiniteAlgebra(6)


def planted_non_monotone() -> dict[int, Fraction]:
    return {
        0x0: Fraction(0),
        0x1: Fraction(3, 4),
        0x2: Fraction(1, 4),
        0x3: Fraction(1, 2),
        0x4: Fraction(1, 4),
        0x5: Fraction(3, 4),
        0x6: Fraction(1, 2),
        0x7: Fraction(1),
    }


def covering_f4():
    return from_covering(F4, CoveringFamilyParams(family=(0x3, 0xC, 0x6), scale=2))


class TestConstructors:
    def test_uniform_values(self):
        m = uniform(F6)
        assert m.eval(0x1) == Fraction(1, 6)
        assert m.eval(F6.one) == 1
        assert m.table()[0x7] == Fraction(1, 2)

    def test_weights_must_sum_to_one(self):
        with pytest.raises(AlgebraInputError):
            from_atom_weights(F3, [Fraction(1, 3)] * 2 + [Fraction(1, 2)])

    def test_weights_must_match_atoms(self):
        with pytest.raises(AlgebraInputError):
            from_atom_weights(F3, [Fraction(1, 2)] * 2)

    def test_covering_counts(self):
        m = covering_f4()
        assert m.cover_count(0x1) == 1
        assert m.cover_count(0x5) == 2
        assert m.eval(0x3) == Fraction(1, 2)
        assert m.eval(F4.one) == 1
        assert m.table() == [m.eval(a) for a in F4.elements()]

    def test_covering_must_cover_one(self):
        with pytest.raises(AlgebraInputError):
            from_covering(F4, CoveringFamilyParams(family=(0x3,), scale=1))

    def test_table_boundary_values(self):
        values = planted_non_monotone()
        values[0x7] = Fraction(1, 2)
        with pytest.raises(AlgebraInputError):
            from_table(F3, values)

    def test_table_must_be_complete(self):
        values = planted_non_monotone()
        del values[0x3]
        with pytest.raises(AlgebraInputError):
            from_table(F3, values)

    def test_lebesgue_on_cantor(self):
        cantor = CantorAlgebra()
        m = uniform(cantor)
        assert m.eval(cantor.element("0", "10")) == Fraction(3, 4)
        assert m.finitely_additive


class TestCheckAxioms:
    def test_uniform_passes_and_is_additive(self):
        report = check_axioms(uniform(F6))
        assert report.passed
        assert report.mode == "exhaustive"
        assert report.finitely_additive is True

    def test_planted_non_monotone_table(self):
        report = check_axioms(from_table(F3, planted_non_monotone()))
        assert not report.passed
        assert report.violation is not None
        assert report.violation.axiom == "monotone"
        assert (report.violation.a, report.violation.b) == (0x1, 0x3)

    def test_covering_is_a_submeasure_but_not_a_measure(self):
        report = check_axioms(covering_f4())
        assert report.passed
        assert report.finitely_additive is False
        a, b = report.additivity_witness
        assert a & b == 0

    def test_zero_weight_atom_breaks_strict_positivity(self):
        m = from_atom_weights(F3, [Fraction(0), Fraction(1, 2), Fraction(1, 2)])
        report = check_axioms(m)
        assert not report.passed
        assert report.violation.axiom == "strictly_positive"
        assert report.violation.a == 0x1

    def test_parallel_scan_agrees(self):
        m = covering_f4()
        assert check_axioms(m, jobs=4) == check_axioms(m, jobs=1)

    def test_exhaustive_mode_has_an_atom_limit(self):
        with pytest.raises(AlgebraInputError):
            check_axioms(uniform(FiniteAlgebra(13)))

    def test_sampled_on_cantor(self):
        report = check_axioms(uniform(CantorAlgebra()), "sampled", samples=300, seed=7)
        assert report.passed
        assert report.finitely_additive is True
        assert report.checked_pairs == 300

    def test_constant_one_passes_axioms(self):
        report = check_axioms(constant_one(F4))
        assert report.passed
        assert report.finitely_additive is False

    @settings(max_examples=25, deadline=None)
    @given(atom_weights(5))
    def test_atom_weights_always_pass(self, weights):
        report = check_axioms(from_atom_weights(FiniteAlgebra(5), weights))
        assert report.passed
        assert report.finitely_additive


def corpus_f6() -> list:
    covering = from_covering(F6, CoveringFamilyParams(family=(0x7, 0x38, 0x1C), scale=2))
    truncated = from_table(F6, {a: min(Fraction(1), Fraction(a.bit_count(), 3)) for a in F6.elements()})
    weights = [Fraction(w, 12) for w in (1, 1, 2, 2, 3, 3)]
    return [uniform(F6), from_atom_weights(F6, weights), covering, truncated]


CORPUS_IDS = ["uniform", "weights", "covering", "table"]


class TestDistance:
    @given(masks(6), masks(6), masks(6))
    def test_triangle_inequality(self, a, b, c):
        m = uniform(F6)
        assert distance(m, a, c) <= distance(m, a, b) + distance(m, b, c)

    @pytest.mark.parametrize("m", corpus_f6(), ids=CORPUS_IDS)
    def test_triangle_inequality_on_corpus(self, m):
        values = m.table()
        for a in F6.elements():
            for b in F6.elements():
                dab = values[a ^ b]
                for c in F6.elements():
                    assert values[a ^ c] <= dab + values[b ^ c]

    def test_triangle_inequality_on_cantor(self):
        cantor = CantorAlgebra(sample_depth=5)
        m = uniform(cantor)
        rng = random.Random(5)
        for _ in range(2000):
            a, b, c = (cantor.random_element(rng) for _ in range(3))
            assert distance(m, a, c) <= distance(m, a, b) + distance(m, b, c)

    def test_metric_kind(self):
        assert metric_kind(uniform(F3)) == "metric"
        m = from_atom_weights(F3, [Fraction(0), Fraction(1, 2), Fraction(1, 2)])
        assert metric_kind(m) == "pseudometric"
        assert distance(m, 0x1, 0x0) == 0


class TestCorpusLaws:
    @pytest.mark.parametrize("n_atoms", range(1, 9))
    def test_atom_weights_are_modular(self, n_atoms):
        algebra = FiniteAlgebra(n_atoms)
        total = n_atoms * (n_atoms + 1) // 2
        m = from_atom_weights(algebra, [Fraction(i + 1, total) for i in range(n_atoms)])
        values = m.table()
        for a in algebra.elements():
            for b in algebra.elements():
                assert values[a | b] + values[a & b] == values[a] + values[b]

    @pytest.mark.parametrize(
        "algebra, family, scale",
        [
            (F4, (0x3, 0xC, 0x6), 2),
            (F6, (0x7, 0x38, 0x1C), 2),
            (F6, (0x3, 0xC, 0x30, 0x6), 3),
        ],
        ids=["f4", "f6-triples", "f6-pairs"],
    )
    def test_covering_is_subadditive(self, algebra, family, scale):
        values = from_covering(algebra, CoveringFamilyParams(family=family, scale=scale)).table()
        for a in algebra.elements():
            for b in algebra.elements():
                assert values[a | b] <= values[a] + values[b]
                if a & b == a:
                    assert values[a] <= values[b]

    @pytest.mark.parametrize("m", corpus_f6(), ids=CORPUS_IDS)
    @pytest.mark.parametrize("eps", [Fraction(1, 6), Fraction(1, 4), Fraction(1, 3), Fraction(1, 2), Fraction(1)])
    def test_exhaustivity_bound_matches_brute_force(self, m, eps):
        members = [a for a in F6.elements() if m.eval(a) >= eps]
        assert uniform_exhaustivity_bound(m, eps) == brute_max_antichain(F6, members)


class TestExhaustivity:
    def test_uniform_bound(self):
        m = uniform(F6)
        assert uniform_exhaustivity_bound(m, Fraction(1, 3)) == 3
        assert uniform_exhaustivity_bound(m, Fraction(1, 6)) == 6
        assert uniform_exhaustivity_bound(m, Fraction(2)) == 0

    def test_profile(self):
        profile = exhaustivity_profile(uniform(F4), [Fraction(1, 2), Fraction(1, 4), Fraction(1, 8)])
        assert profile == {Fraction(1, 2): 2, Fraction(1, 4): 4, Fraction(1, 8): 4}

    @pytest.mark.parametrize("k", range(1, 17))
    def test_lebesgue_depth_nodes(self, k):
        cantor = CantorAlgebra()
        stream = AntichainStream.depth_nodes(cantor)
        result = is_exhaustive_on(uniform(cantor), stream, Fraction(1, 1 << k), horizon=40)
        assert result.index == k + 1
        assert result.certified
        assert not result.horizon_exhausted

    def test_atoms_above_eps_exhaust_the_horizon(self):
        result = is_exhaustive_on(uniform(F6), AntichainStream.atoms(F6), Fraction(1, 8), horizon=20)
        assert result.horizon_exhausted
        assert result.index is None
        assert result.sampled == 6
        assert result.trailing_max == Fraction(1, 6)

    @pytest.mark.parametrize("eps", [Fraction(1, 4), Fraction(1, 8)])
    def test_constant_one_exhausts_the_horizon_on_depth_nodes(self, eps):
        cantor = CantorAlgebra()
        result = is_exhaustive_on(constant_one(cantor), AntichainStream.depth_nodes(cantor), eps, horizon=10)
        assert result.horizon_exhausted
        assert result.index is None
        assert not result.certified
        assert result.envelope_violation == 1
        assert result.sampled == 10

    def test_constant_one_exhausts_the_horizon_on_atoms(self):
        result = is_exhaustive_on(constant_one(F6), AntichainStream.atoms(F6), Fraction(1, 2), horizon=20)
        assert result.horizon_exhausted
        assert result.trailing_max == 1

    def test_broken_envelope_is_never_certified(self):
        # 每一项都低于eps, 但都超出声明的包络
        items = [0x3, 0x4, 0x8]
        stream = AntichainStream(
            algebra=F6, source=lambda: iter(items), start=1, envelope=lambda n: Fraction(1, 16)
        )
        result = is_exhaustive_on(uniform(F6), stream, Fraction(1, 2), horizon=5)
        assert result.index == 1
        assert result.envelope_violation == 1
        assert not result.certified
