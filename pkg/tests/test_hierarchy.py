import random

import pytest
from hypothesis import given, settings, strategies as st

from exhier.hierarchy import (
    FiniteHierarchy,
    LeafLabeledTree,
    binary_array,
    enumerate_hierarchies,
    enumerate_shapes,
    extension_shape_counts,
    extensions,
    from_tree,
    random_hierarchy,
    shape_successors,
)


def H(n, *blocks):
    return FiniteHierarchy(n, blocks)


@pytest.fixture
def h124():
    # {{1,2,4}} plus the trivial blocks on [4]
    return H(4, {1, 2, 4})


class TestConstruction:
    def test_trivial_blocks_always_present(self):
        h = FiniteHierarchy.trivial(3)
        assert frozenset({1, 2, 3}) in h.blocks
        assert frozenset({2}) in h.blocks
        assert frozenset() in h.blocks

    def test_rejects_non_laminar(self):
        with pytest.raises(ValueError):
            H(3, {1, 2}, {2, 3})

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            H(3, {1, 4})

    def test_duplicates_merged(self):
        assert H(4, {1, 2}, {2, 1}) == H(4, {1, 2})


class TestRestrict:
    def test_fig_example_to_3(self, h124):
        # {{1,2,4}} on [4] restricted to [3] gives {{1,2}} on [3]
        assert h124.restrict([1, 2, 3]) == H(3, {1, 2})

    def test_fig_example_to_2(self, h124):
        assert h124.restrict([1, 2]) == FiniteHierarchy.trivial(2)

    def test_trivial_restricts_trivially(self):
        for s0 in ([1], [2, 5], [1, 3, 4]):
            assert FiniteHierarchy.trivial(5).restrict(s0) == \
                FiniteHierarchy.trivial(len(s0))

    def test_empty_restriction_rejected(self, h124):
        with pytest.raises(ValueError):
            h124.restrict([])

    def test_out_of_range_rejected(self, h124):
        with pytest.raises(ValueError):
            h124.restrict([1, 5])

    def test_composition_of_restrictions(self):
        rng = random.Random(0)
        for _ in range(50):
            h = random_hierarchy(7, rng)
            s1 = sorted(rng.sample(range(1, 8), 5))
            s0_rel = sorted(rng.sample(range(1, 6), 3))
            s0_abs = [s1[i - 1] for i in s0_rel]
            assert h.restrict(s1).restrict(s0_rel) == h.restrict(s0_abs)


class TestMrca:
    def test_examples(self, h124):
        assert h124.mrca(1, 2) == frozenset({1, 2, 4})
        assert h124.mrca(3, 3) == frozenset({3})
        assert h124.mrca(1, 3) == frozenset({1, 2, 3, 4})

    def test_out_of_range(self, h124):
        with pytest.raises(ValueError):
            h124.mrca(0, 2)

    def test_closure_identity_trivial(self):
        h = FiniteHierarchy.trivial(5)
        assert h.mrca_closure() == h

    def test_closure_identity_example(self, h124):
        assert h124.mrca_closure() == h124

    def test_closure_identity_exhaustive_n4(self):
        for h in enumerate_hierarchies(4):
            assert h.mrca_closure() == h

    def test_mrca_commutes_with_restriction(self):
        # MRCA in the restriction equals restricted MRCA, under relabeling
        rng = random.Random(1)
        for _ in range(50):
            h = random_hierarchy(7, rng)
            s0 = sorted(rng.sample(range(1, 8), 4))
            hr = h.restrict(s0)
            for a in range(1, 5):
                for b in range(1, 5):
                    big = h.mrca(s0[a - 1], s0[b - 1])
                    rel = frozenset(s0.index(x) + 1 for x in big if x in s0)
                    assert hr.mrca(a, b) == rel


class TestParent:
    def test_trivial(self):
        assert FiniteHierarchy.trivial(4).parent(2) == frozenset({1, 2, 3, 4})

    def test_examples(self, h124):
        assert h124.parent(1) == frozenset({1, 2, 4})
        assert H(3, {1, 2}).parent(3) == frozenset({1, 2, 3})


class TestBinaryArray:
    def test_property_a(self, h124):
        for i in range(1, 5):
            for j in range(1, 5):
                assert binary_array(h124, i, j, j) == 1
                for k in range(1, 5):
                    assert binary_array(h124, i, j, k) == binary_array(h124, j, i, k)
                    if i == j:
                        assert binary_array(h124, i, i, k) == (1 if i == k else 0)

    def test_example(self, h124):
        assert binary_array(h124, 1, 2, 4) == 1
        assert binary_array(h124, 1, 3, 2) == 1
        assert binary_array(h124, 1, 2, 3) == 0

    def test_property_b_supports_laminar(self):
        rng = random.Random(2)
        for _ in range(20):
            h = random_hierarchy(6, rng)
            sets = set()
            for i in range(1, 7):
                for j in range(1, 7):
                    sets.add(h.mrca_mask(i, j))
            for a in sets:
                for b in sets:
                    assert a & b in (0, a, b)


class TestTrees:
    def test_star(self):
        t = FiniteHierarchy.trivial(3).to_tree()
        assert len(t.children[t.root]) == 3
        assert from_tree(t) == FiniteHierarchy.trivial(3)

    def test_cherry(self):
        h = H(3, {1, 2})
        t = h.to_tree()
        assert from_tree(t) == h
        kinds = sorted(len(t.children[c]) for c in t.children[t.root])
        assert kinds == [0, 2]

    def test_round_trip_all_n4(self):
        for h in enumerate_hierarchies(4):
            assert from_tree(h.to_tree()) == h

    def test_tree_round_trip_isomorphism(self):
        rng = random.Random(3)
        for _ in range(30):
            h = random_hierarchy(6, rng)
            t = h.to_tree()
            t2 = from_tree(t).to_tree()
            assert t.canonical_key() == t2.canonical_key()

    def test_malformed_degree_two(self):
        t = LeafLabeledTree()
        r = t.add_node()
        mid = t.add_node(parent=r)
        t.add_node(parent=mid, label=1)
        t.add_node(parent=r, label=2)
        with pytest.raises(ValueError):
            from_tree(t)

    def test_duplicate_labels(self):
        t = LeafLabeledTree()
        r = t.add_node()
        t.add_node(parent=r, label=1)
        t.add_node(parent=r, label=1)
        with pytest.raises(ValueError):
            from_tree(t)

    def test_dot_output(self):
        dot = H(3, {1, 2}).to_tree().to_dot()
        assert dot.startswith("graph")
        assert 'label="1"' in dot


class TestShapes:
    def test_relabeling_invariance(self):
        assert H(3, {1, 2}).shape() == H(3, {2, 3}).shape()

    def test_shape_counts(self):
        assert len(enumerate_shapes(3)) == 2
        assert len(enumerate_shapes(4)) == 5

    def test_representative_round_trip(self):
        for s in enumerate_shapes(4):
            assert s.representative().shape() == s

    def test_shape_distinguishes_n4(self):
        # brute force: equal keys iff some permutation maps one to the other
        import itertools as it
        hs = enumerate_hierarchies(4)
        for a in hs:
            for b in hs:
                same_shape = a.shape() == b.shape()
                related = any(
                    FiniteHierarchy(4, [[p[x - 1] for x in blk]
                                        for blk in map(sorted, map(list, a.blocks))
                                        if len(blk) >= 2]) == b
                    for p in it.permutations(range(1, 5)))
                assert same_shape == related

    def test_successors_of_single_leaf(self):
        s1 = FiniteHierarchy.trivial(1).shape()
        s2 = FiniteHierarchy.trivial(2).shape()
        assert shape_successors(s1) == {s2}

    def test_extension_counts_n2(self):
        # a 2-leaf shape grows to the 3-star once and to the 3-cherry 3 ways
        counts = extension_shape_counts(FiniteHierarchy.trivial(2).shape())
        star = FiniteHierarchy.trivial(3).shape()
        cherry = H(3, {1, 2}).shape()
        assert counts == {star: 1, cherry: 3}


class TestExtensions:
    def test_restriction_inverts_extension(self):
        rng = random.Random(4)
        for _ in range(20):
            h = random_hierarchy(5, rng)
            for h2 in extensions(h):
                assert h2.n == 6
                assert h2.restrict(range(1, 6)) == h

    def test_all_extensions_found(self):
        # every hierarchy on [n+1] restricts to some hierarchy on [n] and is
        # found among its extensions
        for n in (2, 3):
            bigger = enumerate_hierarchies(n + 1)
            for h2 in bigger:
                h = h2.restrict(range(1, n + 1))
                assert h2 in extensions(h)

    def test_extension_count(self):
        for h in enumerate_hierarchies(4):
            n_internal = 1 + len(h.nontrivial_masks)
            n_vertices = n_internal + 4
            assert len(extensions(h)) == n_internal + n_vertices


class TestEnumeration:
    def test_counts(self):
        assert [len(enumerate_hierarchies(n)) for n in (1, 2, 3, 4, 5)] == \
            [1, 1, 4, 26, 236]

    def test_no_duplicates_n5(self):
        hs = enumerate_hierarchies(5)
        assert len(set(hs)) == len(hs)

    def test_all_valid_n4(self):
        for h in enumerate_hierarchies(4):
            FiniteHierarchy(4, h.nontrivial_masks)  # revalidates

    def test_range_guard(self):
        with pytest.raises(ValueError):
            enumerate_hierarchies(7)


class TestTextFormat:
    def test_round_trip(self):
        rng = random.Random(5)
        for _ in range(20):
            h = random_hierarchy(6, rng)
            assert FiniteHierarchy.from_text(h.to_text()) == h

    def test_trivial_blocks_omitted(self):
        text = FiniteHierarchy.trivial(4).to_text()
        assert text == "n=4\n"
        assert FiniteHierarchy.from_text(text) == FiniteHierarchy.trivial(4)

    def test_missing_header(self):
        with pytest.raises(ValueError):
            FiniteHierarchy.from_text("{1,2}\n")


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_laminarity_preserved_by_operations(data):
    rng = random.Random(data.draw(st.integers(0, 10**6)))
    n = data.draw(st.integers(2, 7))
    h = random_hierarchy(n, rng)
    # restriction keeps laminarity (constructor of restrict would raise otherwise)
    k = data.draw(st.integers(1, n))
    s0 = sorted(rng.sample(range(1, n + 1), k))
    FiniteHierarchy(k, h.restrict(s0).nontrivial_masks)
    # closure reproduces the hierarchy
    assert h.mrca_closure() == h
