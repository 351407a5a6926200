import random
from fractions import Fraction

import numpy as np
import pytest

from exhier.hierarchy import FiniteHierarchy, random_hierarchy
from exhier.spinal import (
    CompositionArray,
    PiecewiseDistribution,
    SpinalVariables,
    check_order_consistency,
    is_left_uniformized,
    left_uniformize,
    spinal_composition,
    validate_composition,
)


class TestValidate:
    def test_total_order_valid(self):
        r = CompositionArray([1, 2], [[1, 1], [0, 1]])
        assert validate_composition(r).valid

    def test_totality_violation(self):
        r = CompositionArray([1, 2], [[1, 0], [0, 1]])
        rep = validate_composition(r)
        assert not rep.valid and rep.violated == "total"

    def test_transitivity_violation(self):
        bits = np.ones((3, 3), dtype=bool)
        bits[0, 2] = False
        r = CompositionArray([1, 2, 3], bits)
        rep = validate_composition(r)
        assert not rep.valid and rep.violated == "transitive"
        assert rep.witness == (1, 2, 3)

    def test_reflexivity_violation(self):
        r = CompositionArray([1], [[0]])
        rep = validate_composition(r)
        assert not rep.valid and rep.violated == "reflexive"

    def test_never_raises(self):
        rng = random.Random(0)
        for _ in range(100):
            bits = np.array(rng.choices([0, 1], k=9), dtype=bool).reshape(3, 3)
            validate_composition(CompositionArray([1, 2, 3], bits))


class TestSpinalComposition:
    def test_single_block_spine(self):
        h = FiniteHierarchy(4, [{1, 2, 4}])
        r = spinal_composition(h, 3)
        for j in (1, 2, 4):
            for k in (1, 2, 4):
                assert r.r(j, k) == 1

    def test_block_order_on_spine_1(self):
        h = FiniteHierarchy(4, [{1, 2, 4}])
        r = spinal_composition(h, 1)
        assert r.r(3, 2) == 1  # 2 is in mrca(1,3) = [4]
        assert r.r(2, 3) == 0  # 3 is not in mrca(1,2) = {1,2,4}

    def test_reflexive(self):
        h = FiniteHierarchy(4, [{1, 2, 4}])
        r = spinal_composition(h, 1)
        for j in (2, 3, 4):
            assert r.r(j, j) == 1

    def test_always_valid(self):
        rng = random.Random(1)
        for _ in range(50):
            h = random_hierarchy(6, rng)
            i = rng.randint(1, 6)
            assert validate_composition(spinal_composition(h, i)).valid

    def test_ordered_blocks_round_trip(self):
        h = FiniteHierarchy(4, [{1, 2, 4}])
        r = spinal_composition(h, 1)
        blocks = r.ordered_blocks()
        r2 = CompositionArray.from_order(blocks)
        for j in (2, 3, 4):
            for k in (2, 3, 4):
                assert r.r(j, k) == r2.r(j, k)

    def test_out_of_range_spine(self):
        with pytest.raises(ValueError):
            spinal_composition(FiniteHierarchy.trivial(3), 5)


class TestLeftUniformize:
    def test_uniform_stretch(self):
        f = PiecewiseDistribution(segments=[(0, 2, 1.0)])
        g = left_uniformize(f)
        assert g.atoms == []
        assert g.segments == [(0.0, 1.0, 1.0)]

    def test_single_atom_anywhere(self):
        for a in (0.0, 0.4, 1.7):
            f = PiecewiseDistribution(atoms=[(a, 1)])
            g = left_uniformize(f)
            assert g.atoms == [(0, 1)]
            assert g.segments == []

    def test_two_half_atoms(self):
        f = PiecewiseDistribution(atoms=[(0.2, Fraction(1, 2)), (0.9, Fraction(1, 2))])
        g = left_uniformize(f)
        assert g.atoms == [(Fraction(0), Fraction(1, 2)),
                           (Fraction(1, 2), Fraction(1, 2))]

    def test_idempotent(self):
        f = PiecewiseDistribution(
            atoms=[(Fraction(1, 3), Fraction(1, 4)), (2, Fraction(1, 4))],
            segments=[(Fraction(5), Fraction(6), Fraction(1, 2))])
        g = left_uniformize(f)
        assert left_uniformize(g) == g
        assert is_left_uniformized(g)

    def test_masses_preserved(self):
        f = PiecewiseDistribution(
            atoms=[(0.1, Fraction(1, 8)), (0.5, Fraction(1, 2)), (0.7, Fraction(1, 8))],
            segments=[(1, 2, Fraction(1, 4))])
        g = left_uniformize(f)
        assert g.atom_masses() == f.atom_masses()
        assert float(g.total_mass()) == pytest.approx(1.0)

    def test_gap_carries_no_mass(self):
        f = PiecewiseDistribution(atoms=[(0.5, Fraction(1, 2))],
                                  segments=[(0, 1, Fraction(1, 2))])
        g = left_uniformize(f)
        (u, m), = g.atoms
        assert (u, m) == (Fraction(1, 4), Fraction(1, 2))
        # no segment intersects the open gap (1/4, 3/4)
        for a, b, _ in g.segments:
            assert b <= u or a >= u + m


class TestDistributionValidation:
    def test_rejects_duplicate_atoms(self):
        with pytest.raises(ValueError):
            PiecewiseDistribution(atoms=[(0.5, 0.5), (0.5, 0.5)])

    def test_rejects_overlapping_segments(self):
        with pytest.raises(ValueError):
            PiecewiseDistribution(segments=[(0, 1, 0.5), (0.5, 1.5, 0.5)])

    def test_rejects_wrong_total(self):
        with pytest.raises(ValueError):
            PiecewiseDistribution(atoms=[(0, 0.25)])


class TestOrderConsistency:
    def test_exact_agreement(self):
        h = FiniteHierarchy(4, [{1, 2, 4}])
        r = spinal_composition(h, 1)
        # order along the spine to 1: block {2,4} attaches deeper than {3}
        x = SpinalVariables(1, {2: Fraction(3, 4), 3: Fraction(1, 2), 4: Fraction(3, 4)})
        ok, _ = check_order_consistency(r, x)
        assert ok

    def test_constant_values_single_block(self):
        r = CompositionArray([2, 3], [[1, 1], [1, 1]])
        x = SpinalVariables(1, {2: 0.5, 3: 0.5})
        ok, _ = check_order_consistency(r, x)
        assert ok

    def test_violation_with_witness(self):
        r = CompositionArray([2, 3], [[1, 0], [1, 1]])  # 3 precedes 2
        x = SpinalVariables(1, {2: 0.2, 3: 0.9})        # but X_2 < X_3
        ok, witness = check_order_consistency(r, x)
        assert not ok and witness is not None

    def test_tie_tolerance(self):
        r = CompositionArray([2, 3], [[1, 0], [1, 1]])
        x = SpinalVariables(1, {2: 0.5, 3: 0.5 + 1e-6})
        assert not check_order_consistency(r, x)[0]
        assert check_order_consistency(r, x, tie_tol=1e-4)[0]

    def test_index_mismatch(self):
        r = CompositionArray([2, 3], [[1, 1], [1, 1]])
        x = SpinalVariables(1, {2: 0.5})
        with pytest.raises(ValueError):
            check_order_consistency(r, x)


class TestEstimatorGuards:
    def test_inconsistent_oracle_detected(self):
        from exhier.spinal import estimate_spinal_variable

        class Broken:
            def hierarchy(self, n):
                # resamples instead of extending: not restriction-consistent
                import random

                rng = random.Random(n)
                from exhier.hierarchy import random_hierarchy

                return random_hierarchy(n, rng)

        with pytest.raises(ValueError):
            # labels far enough in that the resampled prefixes must disagree
            estimate_spinal_variable(Broken(), 1, 7, 50, check_consistency=True)

    def test_depth_guard(self):
        from exhier.spinal import estimate_spinal_variable
        from exhier.hierarchy import FiniteHierarchy

        class Trivial:
            def hierarchy(self, n):
                return FiniteHierarchy.trivial(n)

        with pytest.raises(ValueError):
            estimate_spinal_variable(Trivial(), 1, 5, 4)
        assert estimate_spinal_variable(Trivial(), 1, 2, 100) == 0.0
