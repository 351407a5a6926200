"""Nested-interval hierarchies on [0,1]: weight trees, uniform sampling,
exact hierarchy probabilities, shape/partition probability functions, and
the order-preserving embedding into a line-breaking tree.

A weight tree assigns a width w to every composition-indexed cell; each
cell splits into children cells laid out left to right, with any unsplit
remainder retained as an atom at the cell.  Sampling n uniforms and
collecting the cells' label sets yields an exchangeable hierarchy whose
distribution the functions below compute exactly.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .hierarchy import (
    FiniteHierarchy,
    HierarchyShape,
    enumerate_shapes,
    extension_shape_counts,
    extensions,
)
from .realtree import LineBreakTree, Segment, SparsePoint

RESOLUTION_BITS = 53


def _uniform_fraction(rng: random.Random) -> Fraction:
    return Fraction(rng.getrandbits(RESOLUTION_BITS), 1 << RESOLUTION_BITS)


class WeightTree:
    """Composition-indexed cell widths w in (0,1], with the root width 1.

    Children of a cell are numbered 1..m contiguously; sibling widths are
    nonincreasing and sum to at most the parent width, any deficit being
    mass retained at the cell's atom.  Leaves marked truncated stand for
    cells whose further splitting was cut off at the maximum depth.
    """

    def __init__(self, weights: dict, truncated_leaves=frozenset()):
        self.weights = {(): Fraction(1)}
        for k, v in weights.items():
            k = tuple(int(c) for c in k)
            if k == ():
                if v != 1:
                    raise ValueError("root width must be 1")
                continue
            v = Fraction(v)
            if not 0 < v <= 1:
                raise ValueError(f"width {v} outside (0,1]")
            self.weights[k] = v
        self._children = {}
        for k in self.weights:
            if k:
                self._children.setdefault(k[:-1], []).append(k[-1])
        for parent, idx in self._children.items():
            idx.sort()
            if idx != list(range(1, len(idx) + 1)):
                raise ValueError(f"children of {parent} are not numbered 1..m")
            if parent not in self.weights:
                raise ValueError(f"node {parent} missing")
            ws = [self.weights[parent + (c,)] for c in idx]
            if any(a < b for a, b in zip(ws, ws[1:])):
                raise ValueError(f"sibling widths below {parent} increase")
            if sum(ws) > self.weights[parent]:
                raise ValueError(f"children below {parent} exceed the parent width")
        self.depth = max((len(k) for k in self.weights), default=0)
        self.truncated_leaves = frozenset(tuple(t) for t in truncated_leaves)

    # -- structure ------------------------------------------------------

    def nodes(self):
        return sorted(self.weights, key=lambda k: (len(k), k))

    def children(self, node) -> list[tuple]:
        return [node + (c,) for c in self._children.get(node, [])]

    def weight(self, node) -> Fraction:
        return self.weights[tuple(node)]

    def deficit(self, node) -> Fraction:
        node = tuple(node)
        return self.weights[node] - sum(self.weights[c] for c in self.children(node))

    def is_leaf(self, node) -> bool:
        return not self._children.get(tuple(node))

    def ratio(self, node) -> Fraction:
        """x = w(node) / w(parent); for depth-1 nodes this is the width itself."""
        node = tuple(node)
        if not node:
            return Fraction(1)
        return self.weights[node] / self.weights[node[:-1]]

    @classmethod
    def from_ratios(cls, ratios: dict, truncated_leaves=frozenset()) -> "WeightTree":
        """Rebuild widths from the ratio family x."""
        keys = sorted((tuple(k) for k in ratios), key=len)
        weights = {}
        for k in keys:
            parent = Fraction(1) if len(k) == 1 else weights[k[:-1]]
            weights[k] = parent * Fraction(ratios[k])
        return cls(weights, truncated_leaves)

    # -- constructors ------------------------------------------------------

    @classmethod
    def dyadic(cls, depth: int) -> "WeightTree":
        """Even binary splitting to the given depth; leaves are truncated."""
        weights = {}
        leaves = []
        for d in range(1, depth + 1):
            for addr in itertools.product((1, 2), repeat=d):
                weights[addr] = Fraction(1, 1 << d)
                if d == depth:
                    leaves.append(addr)
        return cls(weights, truncated_leaves=leaves)

    @classmethod
    def flat(cls, k: int) -> "WeightTree":
        """A single full split into k equal children that never split again."""
        return cls({(c,): Fraction(1, k) for c in range(1, k + 1)})

    @classmethod
    def random_rational(cls, rng: random.Random, max_depth: int = 3,
                        max_children: int = 3) -> "WeightTree":
        """Random tree with small rational widths, for cross-checking."""
        weights = {}

        def grow(node, w, d):
            if d == max_depth or (d > 0 and rng.random() < 0.3):
                return
            k = rng.randint(2, max_children)
            den = rng.choice([4, 6, 8, 12])
            parts = sorted((rng.randint(1, den) for _ in range(k)), reverse=True)
            scale = Fraction(rng.randint(max(1, den // 2), den), den)  # deficit knob
            total = sum(parts)
            ws = [w * scale * Fraction(p, total) for p in parts]
            for c, wc in enumerate(ws, start=1):
                weights[node + (c,)] = wc
                grow(node + (c,), wc, d + 1)

        grow((), Fraction(1), 0)
        if not weights:
            weights = {(1,): Fraction(1, 2), (2,): Fraction(1, 2)}
        return cls(weights)

    # -- addressing ------------------------------------------------------

    def address(self, u, max_depth: int | None = None):
        """Chain of child indices of the nested cells containing u.

        Returns (address, kind) where kind is 'leaf' when the walk reached a
        deepest cell and 'gap' when u fell into retained (atom) mass.
        Intervals are left-closed.
        """
        if not 0 <= u < 1:
            raise ValueError("position must lie in [0, 1)")
        node = ()
        off = Fraction(u) if not isinstance(u, Fraction) else u
        lim = self.depth if max_depth is None else min(max_depth, self.depth)
        while len(node) < lim:
            kids = self.children(node)
            if not kids:
                return node, "leaf"
            cum = Fraction(0)
            for c in kids:
                w = self.weights[c]
                if off < cum + w:
                    node = c
                    off = off - cum
                    break
                cum += w
            else:
                return node, "gap"
        return node, "leaf"

    # -- textual format -----------------------------------------------------

    def to_text(self) -> str:
        lines = []

        def walk(node):  # depth-first listing
            for c in self.children(node):
                w = self.weights[c]
                mark = " !" if c in self.truncated_leaves else ""
                lines.append(f"{'.'.join(map(str, c))} -> "
                             f"{w.numerator}/{w.denominator}{mark}")
                walk(c)

        walk(())
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "WeightTree":
        weights = {}
        truncated = []
        for raw in text.splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, _, w = line.partition("->")
            if not _:
                raise ValueError(f"bad weight line: {raw!r}")
            w = w.strip()
            if w.endswith("!"):
                w = w[:-1].strip()
                trunc = True
            else:
                trunc = False
            node = tuple(int(tok) for tok in key.strip().split("."))
            num, _, den = w.partition("/")
            weights[node] = Fraction(int(num), int(den) if _ else 1)
            if trunc:
                truncated.append(node)
        return cls(weights, truncated_leaves=truncated)

    def __eq__(self, other):
        return (isinstance(other, WeightTree) and self.weights == other.weights
                and self.truncated_leaves == other.truncated_leaves)


@dataclass
class WeightTreeMixture:
    """Finite convex combination of weight trees: one component is drawn per
    sequence, then all labels sample from it."""

    components: list  # [(WeightTree, Fraction prob)]

    def __post_init__(self):
        total = sum(Fraction(p) for _, p in self.components)
        if total != 1:
            raise ValueError("mixture probabilities must sum to 1")


# -- explicit interval families -------------------------------------------------


class ExplicitIntervalHierarchy:
    """A hierarchy on an interval given by explicit member subsets; concrete
    families implement the block computation for sampled positions."""

    ground_length = Fraction(1)

    def blocks_for(self, positions) -> set[int]:
        raise NotImplementedError


class CombIntervals(ExplicitIntervalHierarchy):
    """Upper level sets {u >= x}: pure continuous erosion, no recursive splits."""

    def blocks_for(self, positions):
        order = sorted(range(len(positions)), key=lambda j: positions[j],
                       reverse=True)
        masks, m = set(), 0
        for j in order:
            m |= 1 << j
            masks.add(m)
        return masks


class DyadicIntervals(ExplicitIntervalHierarchy):
    """All open dyadic subintervals of [0,1] down to a depth."""

    def __init__(self, depth: int = 12):
        self.depth = depth

    def blocks_for(self, positions):
        masks = set()
        for d in range(1, self.depth + 1):
            cells = {}
            for j, u in enumerate(positions):
                cells.setdefault(int(u * (1 << d)), []).append(j)
            for grp in cells.values():
                if len(grp) >= 2:
                    m = 0
                    for j in grp:
                        m |= 1 << j
                    masks.add(m)
        return masks


class TripleIntervals(ExplicitIntervalHierarchy):
    """Dyadic splitting on (0,1), no proper subsets of (1,2), and the comb
    family (2,x) on (2,3), all inside the ground interval [0,3]."""

    ground_length = Fraction(3)

    def __init__(self, depth: int = 40):
        self.depth = depth

    def blocks_for(self, positions):
        masks = set()
        for lo in (0, 1, 2):
            grp = [j for j, u in enumerate(positions) if lo < u < lo + 1]
            m = 0
            for j in grp:
                m |= 1 << j
            if len(grp) >= 2:
                masks.add(m)
            if lo == 0:
                sub = DyadicIntervals(self.depth).blocks_for(
                    [positions[j] for j in grp])
                for sm in sub:
                    mm = 0
                    for b, j in enumerate(grp):
                        if sm >> b & 1:
                            mm |= 1 << j
                    masks.add(mm)
            elif lo == 2:
                order = sorted(grp, key=lambda j: positions[j])
                acc = 0
                for j in order:
                    acc |= 1 << j
                    if bin(acc).count("1") >= 2:
                        masks.add(acc)
        return masks


class NonWellOrderedIntervals(ExplicitIntervalHierarchy):
    """Upper level sets cut only at points outside a dense open set.

    The dense set is a union of shrinking neighborhoods of an enumeration of
    the rationals, so the surviving splits are not well ordered by
    inclusion; truncating the enumeration keeps the family finite.
    """

    def __init__(self, n_terms: int = 64):
        self.intervals = []
        k = 0
        for q in self._rationals():
            eps = Fraction(1, 8 << k)
            self.intervals.append((q - eps, q + eps))
            k += 1
            if k >= n_terms:
                break
        self.merged = self._merge(self.intervals)

    @staticmethod
    def _rationals():
        for den in itertools.count(2):
            for num in range(1, den):
                if math.gcd(num, den) == 1:
                    yield Fraction(num, den)

    @staticmethod
    def _merge(intervals):
        out = []
        for lo, hi in sorted(intervals):
            if out and lo <= out[-1][1]:
                out[-1] = (out[-1][0], max(out[-1][1], hi))
            else:
                out.append((lo, hi))
        return out

    def _has_cut(self, a, b) -> bool:
        """Whether (a, b] contains a point outside the dense open set."""
        for lo, hi in self.merged:
            if lo <= a and b < hi:
                return False
        return True

    def blocks_for(self, positions):
        order = sorted(range(len(positions)), key=lambda j: positions[j],
                       reverse=True)
        masks, m = set(), 0
        prev = None
        for j in order:
            m |= 1 << j
            lo = positions[j]
            hi = prev if prev is not None else Fraction(1)
            if self._has_cut(lo, hi):
                masks.add(m)
            prev = lo
        return masks


def sample_positions(src, n: int, rng: random.Random):
    length = getattr(src, "ground_length", Fraction(1))
    return [_uniform_fraction(rng) * length for _ in range(n)]


def sample_hierarchy(src, n: int, rng: random.Random) -> FiniteHierarchy:
    """Hierarchy of n uniform positions on the source's ground interval."""
    if n < 1:
        raise ValueError("need at least one label")
    if isinstance(src, WeightTreeMixture):
        u = _uniform_fraction(rng)
        cum = Fraction(0)
        tree = src.components[-1][0]
        for comp, p in src.components:
            cum += Fraction(p)
            if u < cum:
                tree = comp
                break
        return sample_hierarchy(tree, n, rng)
    positions = sample_positions(src, n, rng)
    if isinstance(src, WeightTree):
        masks = {}
        for j, u in enumerate(positions):
            addr, _ = src.address(u)
            for d in range(1, len(addr) + 1):
                masks[addr[:d]] = masks.get(addr[:d], 0) | 1 << j
        return FiniteHierarchy(n, [m for m in masks.values()
                                   if bin(m).count("1") >= 2], validate=False)
    return FiniteHierarchy(n, src.blocks_for(positions), validate=False)


# -- exact hierarchy probabilities ------------------------------------------------


def _node_fingerprints(tree: WeightTree):
    """Intern structurally identical subtrees so the recursion is shared."""
    interned = {}
    fid_of = {}

    def fid(node):
        kids = tree.children(node)
        w = tree.weight(node)
        if not kids:
            key = ("leaf",)
        else:
            key = (tuple((tree.weight(c) / w, fid(c)) for c in kids),
                   tree.deficit(node) / w)
        if key not in interned:
            interned[key] = len(interned)
        fid_of[node] = interned[key]
        return interned[key]

    fid(())
    return fid_of


def _shape_units(key: str) -> list[str]:
    """Top-level child keys of a shape key (the root's children subtrees)."""
    assert key.startswith("(")
    units = []
    depth = 0
    start = None
    for pos, ch in enumerate(key[1:-1], start=1):
        if ch == "•" and depth == 0:
            units.append(ch)
        elif ch == "(":
            if depth == 0:
                start = pos
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth == 0:
                units.append(key[start:pos + 1])
    return units


def prob_exact(src: WeightTree, h: FiniteHierarchy):
    """Exact probability that sampling from the weight tree yields h.

    Returns (probability, truncation_bound): the probability is exact for
    the tree as given; the bound caps the extra error against a source that
    keeps splitting below the truncated leaves (the chance that some pair
    of the n uniforms shares a truncated leaf cell).
    """
    if isinstance(src, WeightTreeMixture):
        p = Fraction(0)
        b = Fraction(0)
        for comp, cp in src.components:
            pc, bc = prob_exact(comp, h)
            p += Fraction(cp) * pc
            b += Fraction(cp) * bc
        return p, b
    n = h.n
    fid_of = _node_fingerprints(src)
    memo = {}

    def units_of(key):
        return _shape_units(key) if key != "•" else []

    def energy(node, key):
        if key == "•":
            return Fraction(1)
        mk = (fid_of[node], key)
        if mk in memo:
            return memo[mk]
        kids = src.children(node)
        w = src.weight(node)
        units = units_of(key)
        size = key.count("•")
        total = Fraction(0)
        if not kids:
            total = Fraction(1) if all(u == "•" for u in units) else Fraction(0)
            memo[mk] = total
            return total
        rel = [src.weight(c) / w for c in kids]
        drel = src.deficit(node) / w
        singles = sum(1 for u in units if u == "•")
        blocks = [u for u in units if u != "•"]

        def _singles_sum(free, count):
            # place `count` distinguishable singletons on distinct free
            # children or the atom (the atom holds any number of them)
            opts = [rel[ci] for ci in free]
            out = Fraction(0)
            for put in range(0, min(count, len(opts)) + 1):
                if count - put > 0 and drel == 0:
                    continue
                esym = Fraction(0)
                for combo in itertools.combinations(opts, put):
                    term = Fraction(1)
                    for v in combo:
                        term *= v
                    esym += term
                arrangements = math.comb(count, put) * math.factorial(put)
                out += arrangements * esym * drel ** (count - put)
            return out

        def assign(bi, free, acc):
            nonlocal total
            if bi == len(blocks):
                total += acc * _singles_sum(free, singles)
                return
            ksize = blocks[bi].count("•")
            for ci in free:
                e = energy(kids[ci], blocks[bi])
                if e:
                    assign(bi + 1, free - {ci}, acc * rel[ci] ** ksize * e)

        assign(0, frozenset(range(len(kids))), Fraction(1))
        for ci, c in enumerate(kids):  # everyone descends into one child
            e = energy(c, key)
            if e:
                total += rel[ci] ** size * e
        memo[mk] = total
        return total

    prob = energy((), h.shape().key)
    bound = truncation_bound(src, n)
    return prob, bound


def truncation_bound(src: WeightTree, n: int) -> Fraction:
    """Union bound on the chance that some pair of n uniforms lands in the
    same truncated leaf cell."""
    pairs = Fraction(n * (n - 1), 2)
    return pairs * sum((src.weight(leaf) ** 2 for leaf in src.truncated_leaves),
                       start=Fraction(0))


def prob_exact_monomial_check(src: WeightTree, h: FiniteHierarchy) -> Fraction:
    """Literal generalized-monomial evaluation for depth-1 trees only.

    Sums, over assignments of labels to the depth-1 cells, the products of
    cell widths whose induced grouping matches h; used to cross-check the
    recursive evaluation on flat trees.
    """
    if src.depth != 1:
        raise ValueError("literal evaluation only for depth-1 trees")
    kids = src.children(())
    ws = [src.weight(c) for c in kids] + [src.deficit(())]
    n = h.n
    want = set(h.nontrivial_masks)
    total = Fraction(0)
    for assign in itertools.product(range(len(ws)), repeat=n):
        groups = {}
        for j, c in enumerate(assign):
            if c < len(kids):  # the deficit atom produces no cell block
                groups[c] = groups.get(c, 0) | 1 << j
        got = {m for m in groups.values() if bin(m).count("1") >= 2}
        full = (1 << n) - 1
        got.discard(full)
        if got == want:
            term = Fraction(1)
            for c in assign:
                term *= ws[c]
            total += term
    return total


# -- shape and partition probability functions ------------------------------------


def automorphism_count(key: str) -> int:
    if key == "•":
        return 1
    out = 1
    units = _shape_units(key)
    for sub, mult in _multiset(units).items():
        out *= math.factorial(mult) * automorphism_count(sub) ** mult
    return out


def _multiset(items):
    out = {}
    for x in items:
        out[x] = out.get(x, 0) + 1
    return out


def labelings_count(s: HierarchyShape) -> int:
    """Number of labeled hierarchies with the given shape."""
    return math.factorial(s.n) // automorphism_count(s.key)


def ehpf_exact(src: WeightTree, n: int) -> dict:
    """Shape -> exact per-labeled-hierarchy probability, plus truncation bound
    under key 'bound'."""
    table = {}
    bound = Fraction(0)
    for s in enumerate_shapes(n):
        p, bound = prob_exact(src, s.representative())
        table[s] = p
    table["bound"] = bound
    return table


def ehpf_from_samples(sampler, n: int, replicas: int, seed: int = 0) -> dict:
    """Empirical shape table: estimates of the per-labeled probability h(s),
    with standard errors under key 'se'."""
    from . import _kernels

    counts = _kernels.sample_shape_counts(sampler, n, replicas, seed)
    table, se = {}, {}
    for s, c in counts.items():
        lab = labelings_count(s)
        phat = c / replicas
        table[s] = phat / lab
        se[s] = math.sqrt(max(phat * (1 - phat), 1e-300) / replicas) / lab
    table["se"] = se
    return table


@dataclass
class AdditionRuleReport:
    per_shape: dict  # shape -> (value, extension_sum, residual, tolerance)
    ok: bool

    def __str__(self):
        lines = []
        for s, (v, ext, res, tol) in self.per_shape.items():
            mark = "ok" if abs(res) <= tol else "VIOLATION"
            lines.append(f"{s.key}: h={float(v):.6g} sum={float(ext):.6g} "
                         f"residual={float(res):.3g} tol={float(tol):.3g} {mark}")
        return "\n".join(lines)


def check_addition_rule(table_n: dict, table_n1: dict, exact: bool = True,
                        tolerance=None) -> AdditionRuleReport:
    """Growth consistency of a shape probability function.

    The value at a shape must equal the sum of values at its one-leaf
    extensions, where each extension shape is weighted by the number of
    attachment positions producing it.
    """
    per = {}
    ok = True
    se_n = table_n.get("se", {})
    se_n1 = table_n1.get("se", {})
    for s, v in table_n.items():
        if not isinstance(s, HierarchyShape):
            continue
        ext = 0
        var = float(se_n.get(s, 0.0)) ** 2
        for s2, mult in extension_shape_counts(s).items():
            ext += mult * table_n1.get(s2, 0)
            var += (mult * float(se_n1.get(s2, 0.0))) ** 2
        res = v - ext
        if tolerance is not None:
            tol = tolerance
        elif exact:
            tol = table_n.get("bound", 0) + table_n1.get("bound", 0)
        else:
            tol = 4.0 * math.sqrt(var)
        if float(abs(res)) > float(tol):
            ok = False
        per[s] = (v, ext, res, tol)
    return AdditionRuleReport(per, ok)


def sample_from_ehpf(tables: dict, n: int, rng: random.Random) -> FiniteHierarchy:
    """Grow a hierarchy along the shape probability function: each step picks
    an extension with probability h(new)/h(current).

    Requires exact tables satisfying the addition rule; raises otherwise.
    """
    h = FiniteHierarchy.trivial(1)
    for m in range(1, n):
        cur = tables[m][h.shape()]
        exts = extensions(h)
        probs = [Fraction(tables[m + 1][e.shape()]) / cur for e in exts]
        total = sum(probs)
        if total != 1:
            raise ValueError(f"addition rule violated at n={m}: mass {total}")
        u = _uniform_fraction(rng)
        cum = Fraction(0)
        pick = exts[-1]
        for e, p in zip(exts, probs):
            cum += p
            if u < cum:
                pick = e
                break
        h = pick
    return h


class EhpfChainOracle:
    """Consistent hierarchy sequence grown from exact shape tables."""

    kind = "ehpf-table"

    def __init__(self, tables: dict, seed: int):
        self.tables = tables
        self.rng = random.Random(seed)
        self._chain = [FiniteHierarchy.trivial(1)]

    def hierarchy(self, n: int) -> FiniteHierarchy:
        if n > max(self.tables):
            raise ValueError(f"tables only reach n={max(self.tables)}")
        while len(self._chain) < n:
            h = self._chain[-1]
            m = h.n
            cur = self.tables[m][h.shape()]
            exts = extensions(h)
            probs = [Fraction(self.tables[m + 1][e.shape()]) / cur for e in exts]
            if sum(probs) != 1:
                raise ValueError("addition rule violated in supplied tables")
            u = _uniform_fraction(self.rng)
            cum = Fraction(0)
            pick = exts[-1]
            for e, p in zip(exts, probs):
                cum += p
                if u < cum:
                    pick = e
                    break
            self._chain.append(pick)
        return self._chain[n - 1]


# -- partition probability function (root partitions) ------------------------------


def partition_type(parts) -> tuple:
    return tuple(sorted((len(p) for p in parts), reverse=True))


def labeled_partition_count(lam: tuple, n: int | None = None) -> int:
    n = sum(lam) if n is None else n
    out = math.factorial(n)
    for sz in lam:
        out //= math.factorial(sz)
    for mult in _multiset(lam).values():
        out //= math.factorial(mult)
    return out


def root_atoms(src: WeightTree) -> list:
    """Masses of the top-level split: the depth-1 cells plus the retained
    root atom, which holds any labels that fall into no cell."""
    out = [src.weight(c) for c in src.children(())]
    d = src.deficit(())
    if d > 0:
        out.append(d)
    return out


def _partitions_of(n: int, cap: int):
    if n == 0:
        yield ()
        return
    for first in range(min(n, cap), 0, -1):
        for rest in _partitions_of(n - first, first):
            yield (first,) + rest


def eppf_exact(src: WeightTree, n: int) -> dict:
    """Partition type -> exact per-labeled-partition probability of the
    top-level partition (labels grouped by the depth-1 cell, or by the root
    atom, that their position falls in).

    This is the stable limit of the root split of sampled hierarchies; at
    finite n the bare hierarchy cannot reveal the split when all labels
    share one cell, so the extraction works at the address level.
    """
    atoms = root_atoms(src)
    table = {}
    for lam in _partitions_of(n, n):
        total = Fraction(0)
        for combo in itertools.permutations(range(len(atoms)), len(lam)):
            term = Fraction(1)
            for size, ai in zip(lam, combo):
                term *= atoms[ai] ** size
            total += term
        if total:
            table[lam] = total
    return table


def eppf_from_samples(src: WeightTree, n: int, replicas: int, seed: int = 0) -> dict:
    """Empirical table of the top-level partition: (estimate, se) per type."""
    atoms = root_atoms(src)
    cum = np.cumsum([float(a) for a in atoms])
    rng = np.random.Generator(np.random.PCG64(seed))
    u = rng.random((replicas, n)) * cum[-1]
    idx = np.searchsorted(cum, u, side="right")
    counts: dict = {}
    for row in idx:
        sizes = {}
        for a in row:
            sizes[a] = sizes.get(a, 0) + 1
        lam = tuple(sorted(sizes.values(), reverse=True))
        counts[lam] = counts.get(lam, 0) + 1
    table = {}
    for lam, c in counts.items():
        phat = c / replicas
        lab = labeled_partition_count(lam)
        table[lam] = (phat / lab,
                      math.sqrt(max(phat * (1 - phat), 1e-300) / replicas) / lab)
    return table


def eppf_addition_check(table_n: dict, table_n1: dict, exact: bool = True,
                        sigmas: float = 4.0):
    """Residuals of the partition growth rule p(lam) = sum of p over the
    k+1 ways of placing a new label."""
    out = {}
    ok = True
    for lam, val in table_n.items():
        v, se = (val, 0.0) if exact else val
        ext = 0
        var = float(se) ** 2
        grown = [tuple(sorted(lam[:i] + (lam[i] + 1,) + lam[i + 1:], reverse=True))
                 for i in range(len(lam))] + [tuple(sorted(lam + (1,), reverse=True))]
        for lam2 in grown:
            val2 = table_n1.get(lam2, Fraction(0) if exact else (0.0, 0.0))
            v2, se2 = (val2, 0.0) if exact else val2
            ext += v2
            var += float(se2) ** 2
        res = v - ext
        tol = 0 if exact else sigmas * math.sqrt(var)
        if abs(res) > tol:
            ok = False
        out[lam] = (v, ext, res, tol)
    return out, ok


# -- embedding into a line-breaking tree --------------------------------------------


class WeightTreeEmbedding:
    """Order-preserving embedding of a weight tree into sequence space.

    Cells become segments glued in discovery order; the branch point of a
    cell sits at distance 1 - w(cell) from the root.  The domain [0,1) is
    laid out so that each cell occupies an interval and, within any cell,
    the retained atom mass comes first and children follow in reverse
    discovery order; this keeps every stage of the bead-splitting monotone.
    """

    def __init__(self, src: WeightTree):
        self.src = src
        self.direction = {}
        self.branch_point = {(): SparsePoint.origin()}
        self.domain = {(): (Fraction(0), Fraction(1))}
        segments = []
        d = 0
        queue = [()]
        while queue:
            node = queue.pop(0)
            kids = self.src.children(node)
            base = self.branch_point[node]
            lo, hi = self.domain[node]
            cursor = lo + self.src.deficit(node)
            right = hi
            for c in kids:
                w = self.src.weight(c)
                length = self.src.weight(node) - w
                d += 1
                self.direction[c] = d
                pt = base.plus(d, length) if length > 0 else base
                self.branch_point[c] = pt
                if length > 0:
                    segments.append(Segment(base, d, length))
                self.domain[c] = (right - w, right)
                right -= w
                queue.append(c)
        self.tree = LineBreakTree(segments, validate=False)

    def domain_address(self, u, max_depth=None):
        """Cell chain of u under the embedding's own [0,1) layout."""
        if not 0 <= u < 1:
            raise ValueError("position must lie in [0, 1)")
        u = Fraction(u)
        node = ()
        lim = self.src.depth if max_depth is None else min(max_depth, self.src.depth)
        while len(node) < lim:
            lo, _ = self.domain[node]
            if u < lo + self.src.deficit(node):
                return node, "gap"
            for c in self.src.children(node):
                lo_c, hi_c = self.domain[c]
                if lo_c <= u < hi_c:
                    node = c
                    break
            else:
                return node, "leaf"
        return node, "leaf"

    def point_of(self, u, max_depth=None) -> SparsePoint:
        node, _ = self.domain_address(u, max_depth)
        return self.branch_point[node]

    def fringe_preimage(self, node) -> tuple:
        """Domain interval mapped into the fringe at the cell's segment."""
        return self.domain[tuple(node)]

    def fringe_mass(self, node) -> Fraction:
        return self.src.weight(node)

    def stage_bead_interval(self, node) -> tuple:
        """Domain interval of the bead crushed when this cell's direction is
        revealed: the retained mass of the parent plus all not-yet-revealed
        siblings plus the cell itself."""
        node = tuple(node)
        if not node:
            raise ValueError("the root is not revealed by a crush")
        lo_p, _ = self.domain[node[:-1]]
        _, hi = self.domain[node]
        return (lo_p, hi)

    def atom_points(self):
        """The measure: every deficit and truncated/terminal leaf is an atom
        at its cell's branch point."""
        out = []
        for node in self.src.nodes():
            if self.src.is_leaf(node):
                out.append((self.branch_point[node], self.src.weight(node)))
            else:
                d = self.src.deficit(node)
                if d > 0:
                    out.append((self.branch_point[node], d))
        return out


def xi_map(src: WeightTree, u, depth: int | None = None,
           embedding: WeightTreeEmbedding | None = None) -> SparsePoint:
    """Map a point of [0,1) to the embedded tree; preimages of fringes are
    intervals whose lengths equal the fringe masses."""
    if depth is not None and depth > src.depth:
        raise ValueError(f"depth {depth} exceeds the tree depth {src.depth}")
    emb = embedding or WeightTreeEmbedding(src)
    return emb.point_of(u, depth)


# -- oracle backed by a weight tree -------------------------------------------------


class WeightTreeOracle:
    """Consistent hierarchy sequence from persistent uniforms on a weight tree,
    exposing the exact cell structure."""

    kind = "weight-tree"

    def __init__(self, tree: WeightTree, seed: int):
        self.tree = tree
        self._rng = random.Random(seed)
        self._addr: list[tuple] = []

    def ensure(self, n: int):
        while len(self._addr) < n:
            u = _uniform_fraction(self._rng)
            self._addr.append(self.tree.address(u)[0])

    def address_of(self, j: int) -> tuple:
        self.ensure(j)
        return self._addr[j - 1]

    def hierarchy(self, n: int) -> FiniteHierarchy:
        self.ensure(n)
        masks = {}
        for j in range(n):
            addr = self._addr[j]
            for d in range(1, len(addr) + 1):
                masks[addr[:d]] = masks.get(addr[:d], 0) | 1 << j
        return FiniteHierarchy(n, [m for m in masks.values()
                                   if bin(m).count("1") >= 2], validate=False)

    def mrca_cell(self, i: int, j: int):
        a, b = self.address_of(i), self.address_of(j)
        common = []
        for x, y in zip(a, b):
            if x != y:
                break
            common.append(x)
        return ("node", tuple(common))

    def cell_measure(self, cell) -> Fraction:
        return self.tree.weight(cell[1])

    def cell_contains(self, cell, k: int) -> bool:
        node = cell[1]
        addr = self.address_of(k)
        return len(addr) >= len(node) and addr[:len(node)] == node

    def spinal_value(self, i: int, j: int) -> Fraction:
        if i == j:
            return Fraction(1)
        return 1 - self.cell_measure(self.mrca_cell(i, j))

    def parent_token(self, j: int, m: int):
        self.ensure(m)
        aj = self._addr[j - 1]
        for d in range(len(aj), -1, -1):
            node = aj[:d]
            for k in range(m):
                if k == j - 1:
                    continue
                ak = self._addr[k]
                if len(ak) >= d and ak[:d] == node:
                    return ("node", node)
        return ("node", ())

    def kernel_params(self):
        from . import _kernels

        return _kernels.wtree_params(self.tree)
