"""Finitely supported points of sequence space, line-breaking trees, and
hierarchies derived by sampling.

Points live in the space of absolutely summable sequences with the l1
metric; a line-breaking tree is a union of axis-aligned segments glued in
fresh coordinate directions, so the path from the origin to any point is a
staircase visiting coordinates in increasing index order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .hierarchy import FiniteHierarchy

DEFAULT_TOL = 1e-12


class SparsePoint:
    """Immutable point with finitely many strictly positive coordinates."""

    __slots__ = ("entries",)

    def __init__(self, entries=()):
        if isinstance(entries, dict):
            entries = entries.items()
        es = [(int(i), v) for i, v in entries if v != 0]
        es.sort()
        for i, v in es:
            if i < 1:
                raise ValueError("coordinate indices start at 1")
            if v < 0:
                raise ValueError("coordinates must be nonnegative")
        if len({i for i, _ in es}) != len(es):
            raise ValueError("duplicate coordinate index")
        self.entries = tuple(es)

    @classmethod
    def origin(cls):
        return cls(())

    @classmethod
    def from_values(cls, values):
        """Dense constructor: from_values([0.3, 0.2]) has x_1=0.3, x_2=0.2."""
        return cls((i + 1, v) for i, v in enumerate(values))

    def get(self, i: int):
        for j, v in self.entries:
            if j == i:
                return v
        return 0

    def norm(self):
        return sum(v for _, v in self.entries)

    def max_index(self) -> int:
        return self.entries[-1][0] if self.entries else 0

    def plus(self, i: int, v) -> "SparsePoint":
        if v == 0:
            return self
        return SparsePoint(self.entries + ((i, v),))

    def __eq__(self, other):
        return isinstance(other, SparsePoint) and self.entries == other.entries

    def __hash__(self):
        return hash(self.entries)

    def __repr__(self):
        inner = ", ".join(f"{i}: {v}" for i, v in self.entries)
        return f"SparsePoint({{{inner}}})"


def project(x: SparsePoint, m: int) -> SparsePoint:
    """Orthogonal projection onto the span of the first m directions."""
    if m < 0:
        raise ValueError("projection index must be nonnegative")
    return SparsePoint(tuple((i, v) for i, v in x.entries if i <= m))


def _close(a, b, tol):
    if tol == 0:
        return a == b
    return abs(float(a) - float(b)) <= tol


def on_special_path(y: SparsePoint, x: SparsePoint, tol=DEFAULT_TOL) -> bool:
    """Whether y lies on the staircase path from the origin to x.

    The path completes coordinates of x one index at a time, so y qualifies
    iff it matches x on a prefix of coordinates and carries at most one
    partial final coordinate in x's next direction.
    """
    ye, xe = y.entries, x.entries
    if len(ye) > len(xe):
        return False
    for k, (yi, yv) in enumerate(ye):
        xi, xv = xe[k]
        if yi != xi:
            return False
        last = k == len(ye) - 1
        if _close(yv, xv, tol):
            continue
        if last and yv < xv:
            continue
        return False
    return True


def fringe_contains(x: SparsePoint, t: SparsePoint, tol=DEFAULT_TOL) -> bool:
    """Whether t belongs to the fringe subtree rooted at x (x on t's root path)."""
    return on_special_path(x, t, tol)


def meet_point(x: SparsePoint, y: SparsePoint, tol=DEFAULT_TOL) -> SparsePoint:
    """Branch point of the staircase paths to x and y: their longest common
    initial piece, including a shared partial final coordinate."""
    out = []
    for (xi, xv), (yi, yv) in zip(x.entries, y.entries):
        if xi != yi:
            break
        if _close(xv, yv, tol):
            out.append((xi, xv))
            continue
        out.append((xi, min(xv, yv)))
        break
    return SparsePoint(tuple(out))


@dataclass(frozen=True)
class Segment:
    attach: SparsePoint
    direction: int
    length: object  # positive float or Fraction

    def tip(self) -> SparsePoint:
        return self.attach.plus(self.direction, self.length)


class LineBreakTree:
    """Tree built by gluing axis-aligned segments in fresh directions."""

    def __init__(self, segments=(), validate=True, tol=DEFAULT_TOL):
        self.segments = list(segments)
        if validate:
            self.validate(tol)

    def validate(self, tol=DEFAULT_TOL):
        prev_dir = 0
        for k, seg in enumerate(self.segments):
            if seg.direction <= prev_dir:
                raise ValueError("segment directions must strictly increase")
            prev_dir = seg.direction
            if seg.length <= 0:
                raise ValueError("segment lengths must be positive")
            if k == 0:
                if seg.attach != SparsePoint.origin():
                    raise ValueError("first segment must attach at the origin")
            elif not LineBreakTree(self.segments[:k], validate=False).contains_point(
                    seg.attach, tol):
                raise ValueError(f"segment {k} attaches off the tree")

    def contains_point(self, p: SparsePoint, tol=DEFAULT_TOL) -> bool:
        if not p.entries:
            return True
        for seg in self.segments:
            ae = seg.attach.entries
            pe = p.entries
            if len(pe) != len(ae) + 1:
                continue
            if pe[:-1] != ae:
                if tol == 0 or len(pe) - 1 != len(ae):
                    continue
                if any(i != j or not _close(u, v, tol)
                       for (i, u), (j, v) in zip(pe[:-1], ae)):
                    continue
            i, v = pe[-1]
            if i == seg.direction and (v <= seg.length or _close(v, seg.length, tol)):
                return True
        return False

    def attach_points(self):
        return [seg.attach for seg in self.segments]

    def tips(self):
        return [seg.tip() for seg in self.segments]

    def total_length(self):
        return sum(seg.length for seg in self.segments)

    def to_json(self) -> str:
        def enc(p):
            return {str(i): float(v) for i, v in p.entries}

        return json.dumps({
            "segments": [{"attach": enc(s.attach), "direction": s.direction,
                          "length": float(s.length)} for s in self.segments]})

    @classmethod
    def from_json(cls, text: str) -> "LineBreakTree":
        data = json.loads(text)

        def dec(d):
            return SparsePoint({int(i): v for i, v in d.items()})

        return cls([Segment(dec(s["attach"]), s["direction"], s["length"])
                    for s in data["segments"]])

    def to_dot(self) -> str:
        """Combinatorial skeleton: one node per attach point and segment tip."""
        nodes = {SparsePoint.origin(): 0}
        for seg in self.segments:
            for p in (seg.attach, seg.tip()):
                if p not in nodes:
                    nodes[p] = len(nodes)
        lines = ["graph linebreak {", "  node [shape=point];"]
        for seg in self.segments:
            a, b = nodes[seg.attach], nodes[seg.tip()]
            lines.append(f'  v{a} -- v{b} [label="e{seg.direction}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def derived_hierarchy(samples, n: int | None = None, tree: LineBreakTree | None = None,
                      tol=DEFAULT_TOL) -> FiniteHierarchy:
    """Hierarchy derived from a tree and sample points.

    Blocks only change at sample points, pairwise branch points of the
    sample paths, and segment attach points, so those form a sufficient
    candidate set.  Coincident samples (within tol) land in the same
    minimal block.
    """
    samples = list(samples)
    if n is None:
        n = len(samples)
    if n > len(samples):
        raise ValueError("n exceeds the number of samples")
    pts = list(samples[:n])
    for a in range(n):
        for b in range(a + 1, n):
            pts.append(meet_point(samples[a], samples[b], tol))
    if tree is not None:
        pts.extend(tree.attach_points())
    masks = set()
    for x in pts:
        m = 0
        for j in range(n):
            if fringe_contains(x, samples[j], tol):
                m |= 1 << j
        masks.add(m)
    return FiniteHierarchy(n, masks)


class WeightedTree:
    """A line-breaking tree together with a probability measure on it.

    The measure is a list of atoms (point, mass) plus uniform densities
    (segment index, lo, hi, mass) spread over distance-intervals of
    segments.  Total mass may fall short of 1 by a truncation budget.
    """

    def __init__(self, tree: LineBreakTree, atoms=(), densities=(),
                 eps_trunc=1e-6, tol=DEFAULT_TOL):
        self.tree = tree
        self.atoms = list(atoms)
        self.densities = list(densities)
        self.eps_trunc = eps_trunc
        total = sum(m for _, m in self.atoms) + sum(d[3] for d in self.densities)
        if not 1 - eps_trunc <= float(total) <= 1 + tol:
            raise ValueError(f"total mass {float(total)} outside [1-eps, 1]")
        for p, m in self.atoms:
            if m <= 0:
                raise ValueError("atom masses must be positive")
            if not tree.contains_point(p, tol):
                raise ValueError("atom location off the tree")
        for k, lo, hi, m in self.densities:
            seg = tree.segments[k]
            if not (0 <= lo < hi) or float(hi) > float(seg.length) + tol or m <= 0:
                raise ValueError("bad density interval")
        self.total_mass = total

    def sample_point(self, rng) -> SparsePoint:
        """Draw one point: an atom with its mass, or a uniform position on a
        density interval.  Mass lost to truncation is redistributed
        proportionally."""
        if float(self.total_mass) <= 0:
            raise ValueError("degenerate weighted tree")
        u = rng.random() * float(self.total_mass)
        for p, m in self.atoms:
            u -= float(m)
            if u < 0:
                return p
        for k, lo, hi, m in self.densities:
            u -= float(m)
            if u < 0:
                seg = self.tree.segments[k]
                pos = lo + (hi - lo) * rng.random()
                return seg.attach.plus(seg.direction, pos)
        p, m = self.atoms[-1] if self.atoms else (None, None)
        if p is not None:
            return p
        k, lo, hi, _ = self.densities[-1]
        seg = self.tree.segments[k]
        return seg.attach.plus(seg.direction, lo + (hi - lo) * rng.random())

    def sample_points(self, n: int, rng):
        return [self.sample_point(rng) for _ in range(n)]

    def to_json(self) -> str:
        def enc(p):
            return {str(i): float(v) for i, v in p.entries}

        return json.dumps({
            "tree": json.loads(self.tree.to_json()),
            "atoms": [[enc(p), float(m)] for p, m in self.atoms],
            "densities": [[k, float(lo), float(hi), float(m)]
                          for k, lo, hi, m in self.densities],
            "eps_trunc": self.eps_trunc,
        })

    @classmethod
    def from_json(cls, text: str) -> "WeightedTree":
        data = json.loads(text)

        def dec(d):
            return SparsePoint({int(i): v for i, v in d.items()})

        tree = LineBreakTree([Segment(dec(s["attach"]), s["direction"], s["length"])
                              for s in data["tree"]["segments"]])
        return cls(tree,
                   atoms=[(dec(p), m) for p, m in data["atoms"]],
                   densities=[tuple(d) for d in data["densities"]],
                   eps_trunc=data["eps_trunc"])
