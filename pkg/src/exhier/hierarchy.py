"""Finite hierarchies (laminar families) on {1..n} and their leaf-labeled trees.

A hierarchy is a collection of subsets of {1..n} that is closed under the
laminar condition (any two blocks are nested or disjoint) and contains the
full set, every singleton and the empty set.  Blocks are stored internally
as bitmasks; only the nontrivial blocks (size >= 2, not the full set) are
kept explicitly, the trivial ones are implied.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache


def mask_of(labels, n: int) -> int:
    m = 0
    for x in labels:
        x = int(x)
        if not 1 <= x <= n:
            raise ValueError(f"label {x} out of range 1..{n}")
        m |= 1 << (x - 1)
    return m


def labels_of(mask: int) -> frozenset[int]:
    out = []
    i = 1
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return frozenset(out)


def _is_laminar(masks) -> bool:
    ms = list(masks)
    for a, b in itertools.combinations(ms, 2):
        c = a & b
        if c and c != a and c != b:
            return False
    return True


class FiniteHierarchy:
    """A laminar family of blocks over the ground set {1..n}."""

    __slots__ = ("n", "_nt")

    def __init__(self, n: int, blocks=(), *, validate: bool = True):
        if n < 1:
            raise ValueError("ground set must be nonempty")
        self.n = n
        full = (1 << n) - 1
        nt = set()
        for b in blocks:
            m = b if isinstance(b, int) else mask_of(b, n)
            if m & ~full:
                raise ValueError("block exceeds ground set")
            if m != full and bin(m).count("1") >= 2:
                nt.add(m)
        self._nt = tuple(sorted(nt))
        if validate and not _is_laminar(self._nt):
            raise ValueError("blocks are not laminar")

    # -- basic structure ------------------------------------------------

    @classmethod
    def trivial(cls, n: int) -> "FiniteHierarchy":
        """The smallest hierarchy on {1..n}: full set, singletons, empty set."""
        return cls(n, (), validate=False)

    @property
    def full_mask(self) -> int:
        return (1 << self.n) - 1

    @property
    def nontrivial_masks(self) -> tuple[int, ...]:
        return self._nt

    def all_masks(self):
        """Every block as a mask, including the trivial ones (empty set omitted)."""
        out = {self.full_mask}
        out.update(1 << i for i in range(self.n))
        out.update(self._nt)
        return out

    @property
    def blocks(self) -> frozenset[frozenset[int]]:
        out = {labels_of(m) for m in self.all_masks()}
        out.add(frozenset())
        return frozenset(out)

    def is_trivial(self) -> bool:
        return not self._nt

    def __eq__(self, other):
        return (isinstance(other, FiniteHierarchy)
                and self.n == other.n and self._nt == other._nt)

    def __hash__(self):
        return hash((self.n, self._nt))

    def __repr__(self):
        bl = ", ".join("{" + ",".join(map(str, sorted(labels_of(m)))) + "}"
                       for m in self._nt)
        return f"FiniteHierarchy(n={self.n}, [{bl}])"

    # -- core operations -------------------------------------------------

    def restrict(self, s0) -> "FiniteHierarchy":
        """Restriction to a nonempty subset, relabeled order-preservingly to {1..|s0|}."""
        s0 = sorted(set(s0))
        if not s0:
            raise ValueError("restriction to the empty set is undefined")
        if any(not 1 <= x <= self.n for x in s0):
            raise ValueError("restriction set exceeds ground set")
        pos = {x: i for i, x in enumerate(s0)}
        sel = mask_of(s0, self.n)
        nt = set()
        for m in self._nt:
            mm = m & sel
            r = 0
            for x in s0:
                if mm >> (x - 1) & 1:
                    r |= 1 << pos[x]
            nt.add(r)
        return FiniteHierarchy(len(s0), nt, validate=False)

    def mrca_mask(self, i: int, j: int) -> int:
        """Mask of the most recent common ancestor block of labels i and j."""
        if not (1 <= i <= self.n and 1 <= j <= self.n):
            raise ValueError("label out of range")
        if i == j:
            return 1 << (i - 1)
        want = (1 << (i - 1)) | (1 << (j - 1))
        best = self.full_mask
        for m in self._nt:
            if m & want == want and bin(m).count("1") < bin(best).count("1"):
                best = m
        return best

    def mrca(self, i: int, j: int) -> frozenset[int]:
        return labels_of(self.mrca_mask(i, j))

    def mrca_closure(self) -> "FiniteHierarchy":
        """Hierarchy built from all pairwise MRCAs; equals self for any valid input."""
        masks = {self.mrca_mask(i, j)
                 for i in range(1, self.n + 1) for j in range(i + 1, self.n + 1)}
        return FiniteHierarchy(self.n, masks, validate=False)

    def parent_mask(self, j: int) -> int:
        """Mask of the smallest non-singleton block containing j."""
        if not 1 <= j <= self.n:
            raise ValueError("label out of range")
        bit = 1 << (j - 1)
        best = self.full_mask
        for m in self._nt:
            if m & bit and bin(m).count("1") < bin(best).count("1"):
                best = m
        return best

    def parent(self, j: int) -> frozenset[int]:
        return labels_of(self.parent_mask(j))

    def root_partition(self) -> list[frozenset[int]]:
        """Children blocks of the root: the maximal proper blocks plus leftover singletons."""
        maximal = []
        for m in self._nt:
            if not any(o != m and o & m == m for o in self._nt):
                maximal.append(m)
        covered = 0
        for m in maximal:
            covered |= m
        parts = [labels_of(m) for m in maximal]
        for i in range(1, self.n + 1):
            if not covered >> (i - 1) & 1:
                parts.append(frozenset([i]))
        return sorted(parts, key=min)

    def children_masks(self, m: int) -> list[int]:
        """Children of block m in the tree: maximal blocks strictly inside m."""
        inside = [b for b in self._nt if b & m == b and b != m]
        out = [b for b in inside if not any(o != b and o & b == b for o in inside)]
        covered = 0
        for b in out:
            covered |= b
        rest = m & ~covered
        i = 1
        while rest:
            if rest & 1:
                out.append(1 << (i - 1))
            rest >>= 1
            i += 1
        return sorted(out)

    # -- trees and shapes --------------------------------------------------

    def to_tree(self) -> "LeafLabeledTree":
        """The graph of the hierarchy: a rooted tree whose leaves carry 1..n."""
        t = LeafLabeledTree()
        root = t.add_node()

        def grow(node, m):
            for c in self.children_masks(m):
                if bin(c).count("1") == 1:
                    t.add_node(parent=node, label=c.bit_length())
                else:
                    grow(t.add_node(parent=node), c)

        if self.n == 1:
            t.add_node(parent=root, label=1)
        else:
            grow(root, self.full_mask)
        return t

    def shape(self) -> "HierarchyShape":
        return HierarchyShape(_shape_key(self, self.full_mask))

    # -- textual format ----------------------------------------------------

    def to_text(self) -> str:
        """Block-per-line format; trivial blocks are omitted and implied."""
        lines = [f"n={self.n}"]
        for m in sorted(self._nt, key=lambda m: (-bin(m).count("1"), m)):
            lines.append("{" + ",".join(map(str, sorted(labels_of(m)))) + "}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "FiniteHierarchy":
        n = None
        blocks = []
        for raw in text.splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("n="):
                n = int(line[2:])
                continue
            if n is None:
                raise ValueError("missing 'n=<int>' header line")
            if not (line.startswith("{") and line.endswith("}")):
                raise ValueError(f"bad block line: {raw!r}")
            body = line[1:-1].strip()
            labels = [int(tok) for tok in body.split(",") if tok.strip()] if body else []
            blocks.append(labels)
        if n is None:
            raise ValueError("missing 'n=<int>' header line")
        return cls(n, blocks)


def restrict(h: FiniteHierarchy, s0) -> FiniteHierarchy:
    return h.restrict(s0)


def mrca(h: FiniteHierarchy, i: int, j: int) -> frozenset[int]:
    return h.mrca(i, j)


def mrca_closure(h: FiniteHierarchy) -> FiniteHierarchy:
    return h.mrca_closure()


def parent(h: FiniteHierarchy, j: int) -> frozenset[int]:
    return h.parent(j)


def binary_array(h, i: int, j: int, k: int) -> int:
    """Indicator that k belongs to the MRCA block of i and j.

    Accepts a FiniteHierarchy, or any oracle with a .hierarchy(m) method, in
    which case the MRCA is evaluated in the prefix of size max(i, j, k).
    """
    if not isinstance(h, FiniteHierarchy):
        h = h.hierarchy(max(i, j, k))
    return 1 if h.mrca_mask(i, j) >> (k - 1) & 1 else 0


# -- leaf-labeled trees ------------------------------------------------------


class LeafLabeledTree:
    """Rooted tree with distinctly labeled leaves; root is node 0."""

    def __init__(self):
        self.parent_of: list[int | None] = []
        self.children: list[list[int]] = []
        self.leaf_label: dict[int, int] = {}

    def add_node(self, parent=None, label=None) -> int:
        v = len(self.children)
        self.parent_of.append(parent)
        self.children.append([])
        if parent is not None:
            self.children[parent].append(v)
        if label is not None:
            self.leaf_label[v] = label
        return v

    @property
    def root(self) -> int:
        return 0

    def n_leaves(self) -> int:
        return len(self.leaf_label)

    def validate(self):
        """Raise ValueError on malformed trees (labels, degree-2 internals)."""
        if not self.children:
            raise ValueError("empty tree")
        labels = sorted(self.leaf_label.values())
        if labels != list(range(1, len(labels) + 1)):
            raise ValueError("leaf labels must be a bijection with 1..n")
        if 0 in self.leaf_label:
            raise ValueError("root must not be a leaf")
        for v, ch in enumerate(self.children):
            if ch and v in self.leaf_label:
                raise ValueError("labeled leaf has children")
            if not ch and v not in self.leaf_label and v != 0:
                raise ValueError("unlabeled non-root leaf")
            if v != 0 and len(ch) == 1:
                raise ValueError(f"internal vertex {v} has degree two")

    def leaf_set_mask(self, v: int, n: int) -> int:
        if v in self.leaf_label:
            return 1 << (self.leaf_label[v] - 1)
        m = 0
        for c in self.children[v]:
            m |= self.leaf_set_mask(c, n)
        return m

    def canonical_key(self) -> str:
        """Label-aware canonical form; equal keys iff trees are isomorphic."""

        def key(v):
            if v in self.leaf_label:
                return f"L{self.leaf_label[v]}"
            return "(" + ",".join(sorted(key(c) for c in self.children[v])) + ")"

        return key(self.root)

    def to_dot(self) -> str:
        lines = ["graph hierarchy {", "  node [shape=point];"]
        for v, lab in sorted(self.leaf_label.items()):
            lines.append(f'  v{v} [shape=circle, label="{lab}"];')
        for v, p in enumerate(self.parent_of):
            if p is not None:
                lines.append(f"  v{p} -- v{v};")
        lines.append("}")
        return "\n".join(lines) + "\n"


def from_tree(t: LeafLabeledTree) -> FiniteHierarchy:
    """Inverse of to_tree: collect, per vertex, the labels below it."""
    t.validate()
    n = t.n_leaves()
    masks = [t.leaf_set_mask(v, n) for v in range(len(t.children))]
    return FiniteHierarchy(n, masks)


def to_tree(h: FiniteHierarchy) -> LeafLabeledTree:
    return h.to_tree()


# -- shapes -------------------------------------------------------------------


def _shape_key(h: FiniteHierarchy, m: int) -> str:
    if bin(m).count("1") == 1:
        return "•"
    return "(" + "".join(sorted(_shape_key(h, c) for c in h.children_masks(m))) + ")"


@dataclass(frozen=True)
class HierarchyShape:
    """Canonical key of a hierarchy's orbit under leaf relabeling."""

    key: str

    @property
    def n(self) -> int:
        return self.key.count("•")

    def representative(self) -> FiniteHierarchy:
        """A concrete hierarchy with this shape, labeled 1..n in reading order."""
        blocks = []
        counter = itertools.count(1)

        def parse(s, pos):
            if s[pos] == "•":
                return frozenset([next(counter)]), pos + 1
            assert s[pos] == "("
            pos += 1
            members = set()
            while s[pos] != ")":
                child, pos = parse(s, pos)
                members |= child
            blocks.append(members)
            return frozenset(members), pos + 1

        full, _ = parse(self.key, 0)
        return FiniteHierarchy(len(full), blocks, validate=False)

    def __str__(self):
        return self.key


def shape(h: FiniteHierarchy) -> HierarchyShape:
    return h.shape()


def extensions(h: FiniteHierarchy) -> list[FiniteHierarchy]:
    """All distinct hierarchies on [n+1] whose restriction to [n] equals h.

    The new leaf attaches beneath an internal vertex or subdivides the edge
    above a vertex (above the root this adds a new root); distinct positions
    give distinct hierarchies except on a single leaf, where they collapse.
    """
    n = h.n
    new = 1 << n
    out = {}
    verts = [h.full_mask] + list(h.nontrivial_masks) + [1 << i for i in range(n)]
    internal = [h.full_mask] + list(h.nontrivial_masks)
    for b in internal:  # new leaf as an extra child of the vertex
        nt = [m | new if m & b == b else m for m in internal]
        h2 = FiniteHierarchy(n + 1, nt, validate=False)
        out[h2] = None
    for b in verts:  # subdivide the edge above the vertex
        nt = [m | new if (m & b == b and m != b) else m for m in internal]
        nt.append(b | new)
        h2 = FiniteHierarchy(n + 1, nt, validate=False)
        out[h2] = None
    return list(out)


def extension_shape_counts(s: HierarchyShape) -> dict[HierarchyShape, int]:
    """Shapes one leaf bigger than s, with attachment-position multiplicities.

    The multiplicity of s' counts the extensions of a fixed representative of
    s whose shape is s'; these weights make the growth rule for shape
    probability functions exact.
    """
    counts: dict[HierarchyShape, int] = {}
    for h2 in extensions(s.representative()):
        s2 = h2.shape()
        counts[s2] = counts.get(s2, 0) + 1
    return counts


def shape_successors(s: HierarchyShape) -> set[HierarchyShape]:
    """All shapes on n+1 leaves from which removing one leaf yields s."""
    return set(extension_shape_counts(s))


# -- enumeration ---------------------------------------------------------------

MAX_ENUM_N = 6


def _set_partitions(items):
    """All partitions of a list into disjoint nonempty parts."""
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]
        yield [[first]] + part


@lru_cache(maxsize=None)
def _hierarchies_on(labels: tuple[int, ...]) -> tuple[tuple[int, ...], ...]:
    """All hierarchies on the given labels, as tuples of nontrivial masks."""
    if len(labels) == 1:
        return ((),)
    out = []
    for part in _set_partitions(list(labels)):
        if len(part) < 2:
            continue
        per_part = []
        for p in part:
            subs = _hierarchies_on(tuple(sorted(p)))
            pm = mask_of(p, 64)
            if len(p) >= 2:
                subs = tuple(s + (pm,) for s in subs)
            per_part.append(subs)
        for combo in itertools.product(*per_part):
            masks = []
            for c in combo:
                masks.extend(c)
            out.append(tuple(sorted(masks)))
    return tuple(out)


def enumerate_hierarchies(n: int) -> list[FiniteHierarchy]:
    """All distinct hierarchies on [n]; guarded to n <= 6."""
    if not 1 <= n <= MAX_ENUM_N:
        raise ValueError(f"enumeration supported for 1 <= n <= {MAX_ENUM_N}")
    full = (1 << n) - 1
    out = []
    for masks in _hierarchies_on(tuple(range(1, n + 1))):
        out.append(FiniteHierarchy(n, [m for m in masks if m != full], validate=False))
    return out


def enumerate_shapes(n: int) -> list[HierarchyShape]:
    seen = {}
    for h in enumerate_hierarchies(n):
        s = h.shape()
        seen[s.key] = s
    return [seen[k] for k in sorted(seen)]


def random_hierarchy(n: int, rng) -> FiniteHierarchy:
    """A random hierarchy on [n] via recursive random partitioning."""
    blocks = []

    def split(labels):
        if len(labels) == 1:
            return
        while True:  # random assignment, retried until it actually splits
            k = rng.randint(2, len(labels))
            groups = {}
            for x in labels:
                groups.setdefault(rng.randint(1, k), []).append(x)
            if len(groups) >= 2:
                break
        for g in groups.values():
            if len(g) >= 2:
                blocks.append(g)
            split(g)

    split(list(range(1, n + 1)))
    return FiniteHierarchy(n, blocks, validate=False)
