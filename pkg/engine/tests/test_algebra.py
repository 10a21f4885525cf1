# /engine/tests/test_algebra.py

import itertools
import random

import pytest
from engine.algebra import (
    CantorAlgebra,
    FiniteAlgebra,
    canonicalize,
    max_disjoint_packing,
    upward_closure,
)
from engine.errors import AlgebraInputError
from hypothesis import given
from hypothesis import strategies as st

from strategies import CANTOR, brute_max_antichain, cantor_elements, masks

F6 = FiniteAlgebra(6)


class TestFiniteAlgebra:
    @given(masks(6), masks(6))
    def test_de_morgan(self, a, b):
        assert F6.complement(F6.join(a, b)) == F6.meet(F6.complement(a), F6.complement(b))

    @given(masks(6), masks(6))
    def test_symdiff_matches_xor(self, a, b):
        assert F6.symdiff(a, b) == a ^ b

    def test_rejects_out_of_range_mask(self):
        with pytest.raises(AlgebraInputError):
            F6.own(1 << 6)

    def test_rejects_cantor_element(self):
        with pytest.raises(AlgebraInputError):
            F6.join(0x1, frozenset({"0"}))

    def test_atom_count_bounds(self):
        with pytest.raises(AlgebraInputError):
            FiniteAlgebra(0)
        with pytest.raises(AlgebraInputError):
            FiniteAlgebra(25)

    def test_parse_and_format(self):
        assert F6.parse("0x2a") == 42
        assert F6.format(42) == "0x2a"
        with pytest.raises(AlgebraInputError):
            F6.parse("zz")

    def test_is_antichain(self):
        assert F6.is_antichain([0x1, 0x6, 0x30])
        assert not F6.is_antichain([0x3, 0x6])
        assert not F6.is_antichain([0x1, 0x0])

    @given(masks(6))
    def test_atoms_below_join_back(self, a):
        atoms = F6.atoms_below(a)
        assert all(x.bit_count() == 1 for x in atoms)
        assert F6.join_all(atoms) == a



def _check_laws(algebra, a, b, c) -> None:
    join, meet, neg = algebra.join, algebra.meet, algebra.complement
    assert join(join(a, b), c) == join(a, join(b, c))
    assert meet(meet(a, b), c) == meet(a, meet(b, c))
    assert meet(a, join(b, c)) == join(meet(a, b), meet(a, c))
    assert join(a, meet(b, c)) == meet(join(a, b), join(a, c))
    assert neg(join(a, b)) == meet(neg(a), neg(b))
    assert neg(meet(a, b)) == join(neg(a), neg(b))
    assert algebra.symdiff(a, b) == meet(join(a, b), neg(meet(a, b)))


@pytest.mark.parametrize("n_atoms", range(1, 7))
def test_boolean_laws_on_every_finite_triple(n_atoms):
    algebra = FiniteAlgebra(n_atoms)
    for a, b, c in itertools.product(algebra.elements(), repeat=3):
        _check_laws(algebra, a, b, c)


def test_boolean_laws_on_random_cantor_triples():
    rng = random.Random(20240601)
    for _ in range(10_000):
        a, b, c = (CANTOR.random_element(rng) for _ in range(3))
        _check_laws(CANTOR, a, b, c)
        assert canonicalize(a) == a
        assert canonicalize(canonicalize(a | b)) == canonicalize(a | b)


class TestCantorAlgebra:
    def test_siblings_merge_into_parent(self):
        assert canonicalize(["00", "01"]) == frozenset({"0"})
        assert canonicalize(["0", "1"]) == CANTOR.one

    def test_atoms_below_are_the_canonical_nodes(self):
        a = CANTOR.element("1", "00")
        assert CANTOR.atoms_below(a) == [frozenset({"00"}), frozenset({"1"})]

    def test_descendants_are_absorbed(self):
        assert canonicalize(["0", "010", "1101"]) == frozenset({"0", "1101"})

    def test_rejects_non_binary_nodes(self):
        with pytest.raises(AlgebraInputError):
            canonicalize(["0a"])

    @given(cantor_elements())
    def test_complement_is_involution(self, a):
        assert CANTOR.complement(CANTOR.complement(a)) == a

    @given(cantor_elements())
    def test_join_with_complement_is_one(self, a):
        assert CANTOR.join(a, CANTOR.complement(a)) == CANTOR.one
        assert CANTOR.is_zero(CANTOR.meet(a, CANTOR.complement(a)))

    @given(cantor_elements(), cantor_elements())
    def test_node_measure_is_additive(self, a, b):
        joined = CANTOR.node_measure(CANTOR.join(a, b))
        met = CANTOR.node_measure(CANTOR.meet(a, b))
        assert joined + met == CANTOR.node_measure(a) + CANTOR.node_measure(b)

    @given(cantor_elements(), cantor_elements())
    def test_leq_agrees_with_meet(self, a, b):
        assert CANTOR.leq(a, b) == (CANTOR.meet(a, b) == a)

    def test_depth_nodes_are_disjoint(self):
        nodes = [CANTOR.depth_node(n) for n in range(1, 10)]
        assert CANTOR.is_antichain(nodes)
        assert CANTOR.node_measure(nodes[3]) == CANTOR.node_measure(CANTOR.element("0001"))

    def test_refine(self):
        assert CANTOR.refine(CANTOR.element("0"), 2) == ["00", "01"]
        with pytest.raises(AlgebraInputError):
            CANTOR.refine(CANTOR.element("000"), 1)

    def test_format_uses_star_for_one(self):
        assert CANTOR.format(CANTOR.one) == "{*}"
        assert CANTOR.format(CANTOR.element("1", "00")) == "{00,1}"

    def test_backends_compare_by_kind(self):
        assert CantorAlgebra() == CANTOR
        assert FiniteAlgebra(4) != FiniteAlgebra(5)


class TestUpwardClosedFamily:
    def test_generators_are_minimal(self):
        family = upward_closure(F6, [0x3, 0x7, 0x1, 0x30])
        assert family.generators == (0x1, 0x30)

    @given(st.lists(masks(5), min_size=1, max_size=6), masks(5))
    def test_membership_matches_definition(self, xs, a):
        algebra = FiniteAlgebra(5)
        family = upward_closure(algebra, xs)
        assert family.member(a) == any(x & ~a == 0 for x in xs)

    def test_cantor_membership(self):
        family = upward_closure(CANTOR, [CANTOR.element("01")])
        assert CANTOR.element("0") in family
        assert CANTOR.element("1") not in family


class TestMaxDisjointPacking:
    def test_atoms_family(self):
        result = max_disjoint_packing(upward_closure(F6, F6.atoms()))
        assert result.size == 6
        assert result.exact

    def test_pairs_family(self):
        pairs = [a for a in range(64) if a.bit_count() == 2]
        result = max_disjoint_packing(upward_closure(F6, pairs))
        assert result.size == 3
        assert F6.is_antichain(list(result.witness))

    @given(st.lists(masks(6).filter(bool), min_size=1, max_size=5))
    def test_matches_brute_force(self, xs):
        family = upward_closure(F6, xs)
        members = list(family.members())
        result = max_disjoint_packing(family)
        assert result.size == brute_max_antichain(F6, members)
        assert all(family.member(w) for w in result.witness)

    def test_budget_exhaustion_is_reported_not_hidden(self):
        algebra = FiniteAlgebra(12)
        pairs = [a for a in range(1 << 12) if a.bit_count() == 2]
        result = max_disjoint_packing(upward_closure(algebra, pairs), budget=3)
        assert not result.exact
        assert result.size <= 6

    def test_cantor_is_rejected(self):
        with pytest.raises(AlgebraInputError):
            max_disjoint_packing(upward_closure(CANTOR, [CANTOR.one]))
