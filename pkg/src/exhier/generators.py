"""Reference generators of consistent exchangeable hierarchy sequences.

Each oracle owns a persistent per-seed sequence of label values, so the
hierarchy on [n] is always the restriction of the hierarchy on [n+1].  The
exact generators additionally expose the nested-cell structure behind their
hierarchies: the MRCA of two labels is a cell with an exact rational
sampling measure, which turns almost-sure identities into checkable
equalities.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .hierarchy import FiniteHierarchy
from .realtree import LineBreakTree, Segment, SparsePoint, WeightedTree
from .spinal import PiecewiseDistribution

RESOLUTION_BITS = 53  # label positions are dyadic rationals of this resolution


class _LazyLabels:
    """Base for oracles that draw one fixed-size record per label."""

    def __init__(self, seed: int):
        self.seed = seed
        self._rng = np.random.Generator(np.random.PCG64(seed))
        self._count = 0

    def ensure(self, n: int):
        if n > self._count:
            grow = max(n - self._count, 64)
            self._extend(grow)
            self._count += grow

    def _extend(self, k: int):
        raise NotImplementedError


def _common_prefix_len(a: int, b: int, depth: int) -> int:
    x = a ^ b
    return depth if x == 0 else depth - x.bit_length()


def _bitlen_array(x: np.ndarray) -> np.ndarray:
    """Elementwise bit length of nonnegative int64 values."""
    out = np.zeros(len(x), dtype=np.int64)
    nz = x > 0
    out[nz] = np.floor(np.log2(x[nz])).astype(np.int64) + 1
    # fix float rounding at power-of-two boundaries
    too_big = nz & (x < (1 << np.maximum(out - 1, 0)))
    out[too_big] -= 1
    too_small = nz & (x >> out > 0)
    out[too_small] += 1
    return out


def _neighbor_depth_tokens(addr: np.ndarray, depth: int, tag):
    """Per-label parent tokens for a prefix family: the deepest cell shared
    with another label, found via sorted-order neighbors."""
    m = len(addr)
    if m == 1:
        return [("root",)]
    order = np.argsort(addr, kind="stable")
    srt = addr[order]
    xor_prev = np.bitwise_xor(srt[1:], srt[:-1])
    best = np.full(m, np.int64(-1))
    big = np.int64(1) << np.int64(depth) if depth < 63 else np.int64(2 ** 62)
    left = np.concatenate(([big], xor_prev))
    right = np.concatenate((xor_prev, [big]))
    best_sorted = np.minimum(left, right)
    best[order] = best_sorted
    cs = depth - _bitlen_array(best)
    cs[best == 0] = depth
    tokens = []
    for i in range(m):
        c = int(cs[i])
        tokens.append((tag, c, int(addr[i]) >> (depth - c) if c else 0))
    return tokens


# -- comb ---------------------------------------------------------------------


class CombOracle(_LazyLabels):
    """Upper level sets of persistent uniforms: blocks {j : U_j >= x}."""

    kind = "comb"

    def __init__(self, seed: int):
        super().__init__(seed)
        self._pos = np.empty(0, dtype=np.int64)

    def _extend(self, k):
        new = self._rng.integers(0, 1 << RESOLUTION_BITS, size=k, dtype=np.int64)
        self._pos = np.concatenate([self._pos, new])

    def position(self, j: int) -> Fraction:
        self.ensure(j)
        return Fraction(int(self._pos[j - 1]), 1 << RESOLUTION_BITS)

    def hierarchy(self, n: int) -> FiniteHierarchy:
        self.ensure(n)
        order = sorted(range(n), key=lambda j: int(self._pos[j]))
        masks = []
        m = 0
        for j in reversed(order):  # upper sets, largest position first
            m |= 1 << j
            masks.append(m)
        return FiniteHierarchy(n, masks, validate=False)

    def mrca_cell(self, i: int, j: int):
        if i == j:
            raise ValueError("mrca cell of a label with itself is degenerate")
        self.ensure(max(i, j))
        return ("upper", min(int(self._pos[i - 1]), int(self._pos[j - 1])))

    def cell_measure(self, cell) -> Fraction:
        kind, lo = cell
        return 1 - Fraction(lo, 1 << RESOLUTION_BITS)

    def cell_contains(self, cell, k: int) -> bool:
        self.ensure(k)
        return int(self._pos[k - 1]) >= cell[1]

    def mrca_complement_count(self, i: int, j: int, m: int) -> int:
        self.ensure(m)
        lo = min(int(self._pos[i - 1]), int(self._pos[j - 1]))
        pos = self._pos[:m]
        out = int(np.count_nonzero(pos < lo))
        for x in (i, j):
            if int(self._pos[x - 1]) < lo:
                out -= 1
        return out

    def parent_token(self, j: int, m: int):
        self.ensure(m)
        pos = self._pos[:m]
        pj = int(pos[j - 1])
        higher = int(np.count_nonzero(pos > pj))
        if higher > 0:
            return ("upper-set", pj)
        # topmost label: its parent is the top pair
        second = int(np.partition(pos, m - 2)[m - 2]) if m >= 2 else pj
        return ("upper-set", second)

    def parent_tokens_all(self, m: int):
        self.ensure(m)
        pos = self._pos[:m]
        if m == 1:
            return [("root",)]
        top2 = np.partition(pos, m - 2)[m - 2:]
        second = int(top2.min())
        top = int(top2.max())
        return [("upper-set", second if int(p) == top else int(p)) for p in pos]

    def kernel_params(self):
        return ("regime", 0, 0.0, 0.0, 1.0)


# -- dyadic -------------------------------------------------------------------


class DyadicOracle(_LazyLabels):
    """Nested dyadic intervals of [0,1] down to a fixed depth."""

    kind = "dyadic"

    def __init__(self, seed: int, depth: int = 12):
        if depth < 1:
            raise ValueError("depth must be at least 1")
        super().__init__(seed)
        self.depth = depth
        self._addr = np.empty(0, dtype=np.int64)

    def _extend(self, k):
        new = self._rng.integers(0, 1 << self.depth, size=k, dtype=np.int64)
        self._addr = np.concatenate([self._addr, new])

    def address(self, j: int) -> int:
        self.ensure(j)
        return int(self._addr[j - 1])

    def hierarchy(self, n: int) -> FiniteHierarchy:
        self.ensure(n)
        masks = set()

        def split(indices, d):
            if len(indices) <= 1 or d == self.depth:
                return
            mid = [[], []]
            for j in indices:
                mid[int(self._addr[j]) >> (self.depth - d - 1) & 1].append(j)
            for part in mid:
                if len(part) >= 2:
                    m = 0
                    for j in part:
                        m |= 1 << j
                    masks.add(m)
                split(part, d + 1)

        split(list(range(n)), 0)
        return FiniteHierarchy(n, masks, validate=False)

    def common_depth(self, i: int, j: int) -> int:
        self.ensure(max(i, j))
        return _common_prefix_len(int(self._addr[i - 1]), int(self._addr[j - 1]),
                                  self.depth)

    def mrca_cell(self, i: int, j: int):
        c = self.common_depth(i, j)
        return ("dy", c, int(self._addr[i - 1]) >> (self.depth - c) if c else 0)

    def cell_measure(self, cell) -> Fraction:
        _, c, _ = cell
        return Fraction(1, 1 << c)

    def cell_contains(self, cell, k: int) -> bool:
        _, c, prefix = cell
        self.ensure(k)
        return int(self._addr[k - 1]) >> (self.depth - c) == prefix if c else True

    def spinal_value(self, i: int, j: int) -> Fraction:
        if i == j:
            return Fraction(1)
        return 1 - Fraction(1, 1 << self.common_depth(i, j))

    def mrca_complement_count(self, i: int, j: int, m: int) -> int:
        self.ensure(m)
        c = self.common_depth(i, j)
        if c == 0:
            return 0  # the MRCA is the whole ground set
        prefix = int(self._addr[i - 1]) >> (self.depth - c)
        addr = self._addr[:m]
        inside = np.count_nonzero((addr >> (self.depth - c)) == prefix)
        return m - 2 - (int(inside) - 2)

    def parent_token(self, j: int, m: int):
        self.ensure(m)
        if m < 2:
            return ("dy", 0, 0)
        addr = self._addr[:m]
        aj = int(addr[j - 1])
        x = np.bitwise_xor(addr, aj)
        x[j - 1] = 1 << self.depth  # exclude j itself
        best = int(x.min())
        c = self.depth if best == 0 else self.depth - best.bit_length()
        return ("dy", c, aj >> (self.depth - c) if c else 0)

    def parent_tokens_all(self, m: int):
        self.ensure(m)
        return _neighbor_depth_tokens(self._addr[:m], self.depth, "dy")

    def kernel_params(self):
        return ("regime", self.depth, 1.0, 0.0, 0.0)


# -- triple: binary splitting, broomstick, and comb side by side --------------


class TripleOracle(_LazyLabels):
    """Three regimes on [0,3]: dyadic splitting, a pure atom, and a comb.

    Labels fall uniformly in one of the three unit intervals; the first
    carries recursive binary splitting, the second no proper subsets, the
    third the lower level sets (2, x).
    """

    kind = "triple"

    DY, BROOM, COMB = 0, 1, 2

    def __init__(self, seed: int, depth: int = 40):
        super().__init__(seed)
        self.depth = depth
        self._regime = np.empty(0, dtype=np.int64)
        self._payload = np.empty(0, dtype=np.int64)

    def _extend(self, k):
        reg = self._rng.integers(0, 3, size=k, dtype=np.int64)
        dy = self._rng.integers(0, 1 << self.depth, size=k, dtype=np.int64)
        pos = self._rng.integers(0, 1 << RESOLUTION_BITS, size=k, dtype=np.int64)
        pay = np.where(reg == self.DY, dy, pos)
        self._regime = np.concatenate([self._regime, reg])
        self._payload = np.concatenate([self._payload, pay])

    def regime(self, j: int) -> int:
        self.ensure(j)
        return int(self._regime[j - 1])

    def payload(self, j: int) -> int:
        self.ensure(j)
        return int(self._payload[j - 1])

    def position(self, j: int) -> Fraction:
        """Location in [0,3]; dyadic-regime labels use their address bits."""
        r, p = self.regime(j), self.payload(j)
        if r == self.DY:
            return Fraction(p, 1 << self.depth)
        off = Fraction(p, 1 << RESOLUTION_BITS)
        return r + off

    def hierarchy(self, n: int) -> FiniteHierarchy:
        self.ensure(n)
        masks = set()
        for r in (self.DY, self.BROOM, self.COMB):
            grp = [j for j in range(n) if self._regime[j] == r]
            m = 0
            for j in grp:
                m |= 1 << j
            if len(grp) >= 2:
                masks.add(m)
            if r == self.DY:
                self._dy_blocks(grp, masks)
            elif r == self.COMB:
                order = sorted(grp, key=lambda j: int(self._payload[j]))
                acc = 0
                for j in order:  # lower sets (2, x)
                    acc |= 1 << j
                    if bin(acc).count("1") >= 2:
                        masks.add(acc)
        return FiniteHierarchy(n, masks, validate=False)

    def _dy_blocks(self, grp, masks):
        def split(indices, d):
            if len(indices) <= 1 or d == self.depth:
                return
            parts = [[], []]
            for j in indices:
                parts[int(self._payload[j]) >> (self.depth - d - 1) & 1].append(j)
            for part in parts:
                if len(part) >= 2:
                    m = 0
                    for j in part:
                        m |= 1 << j
                    masks.add(m)
                split(part, d + 1)

        split(grp, 0)

    def mrca_cell(self, i: int, j: int):
        self.ensure(max(i, j))
        ri, rj = int(self._regime[i - 1]), int(self._regime[j - 1])
        if ri != rj:
            return ("root",)
        if ri == self.BROOM:
            return ("broom",)
        pi, pj = int(self._payload[i - 1]), int(self._payload[j - 1])
        if ri == self.COMB:
            return ("comb", max(pi, pj))
        c = _common_prefix_len(pi, pj, self.depth)
        return ("dy", c, pi >> (self.depth - c) if c else 0)

    def cell_measure(self, cell) -> Fraction:
        kind = cell[0]
        if kind == "root":
            return Fraction(1)
        if kind == "broom":
            return Fraction(1, 3)
        if kind == "comb":
            return Fraction(cell[1], 1 << RESOLUTION_BITS) / 3
        _, c, _ = cell
        return Fraction(1, 3 << c)

    def cell_contains(self, cell, k: int) -> bool:
        self.ensure(k)
        kind = cell[0]
        if kind == "root":
            return True
        r, p = int(self._regime[k - 1]), int(self._payload[k - 1])
        if kind == "broom":
            return r == self.BROOM
        if kind == "comb":
            return r == self.COMB and p <= cell[1]
        _, c, prefix = cell
        return r == self.DY and (p >> (self.depth - c) == prefix if c else True)

    def spinal_value(self, i: int, j: int) -> Fraction:
        if i == j:
            return Fraction(1)
        return 1 - self.cell_measure(self.mrca_cell(i, j))

    def mrca_complement_count(self, i: int, j: int, m: int) -> int:
        self.ensure(m)
        cell = self.mrca_cell(i, j)
        kind = cell[0]
        reg, pay = self._regime[:m], self._payload[:m]
        if kind == "root":
            inside = m
        elif kind == "broom":
            inside = int(np.count_nonzero(reg == self.BROOM))
        elif kind == "comb":
            inside = int(np.count_nonzero((reg == self.COMB) & (pay <= cell[1])))
        else:
            _, c, prefix = cell
            ok = reg == self.DY
            if c:
                ok &= (pay >> (self.depth - c)) == prefix
            inside = int(np.count_nonzero(ok))
        return m - 2 - (inside - 2)

    def parent_token(self, j: int, m: int):
        self.ensure(m)
        r = int(self._regime[j - 1])
        pj = int(self._payload[j - 1])
        reg, pay = self._regime[:m], self._payload[:m]
        if r == self.BROOM:
            if int(np.count_nonzero(reg == self.BROOM)) >= 2:
                return ("broom",)
            return ("root",)
        if r == self.COMB:
            below = (reg == self.COMB) & (pay < pj)
            if int(np.count_nonzero(below)) > 0:
                return ("le", pj)
            comb_pos = np.sort(pay[reg == self.COMB])
            if len(comb_pos) >= 2:
                return ("le", int(comb_pos[1]))
            return ("root",)
        x = np.where(reg == self.DY, np.bitwise_xor(pay, pj), 1 << self.depth)
        x[j - 1] = 1 << self.depth
        best = int(x.min())
        if best >= 1 << self.depth:
            return ("root",)
        c = self.depth if best == 0 else self.depth - best.bit_length()
        return ("dy", c, pj >> (self.depth - c) if c else 0)

    def parent_tokens_all(self, m: int):
        self.ensure(m)
        reg = self._regime[:m]
        pay = self._payload[:m]
        tokens = [None] * m
        brooms = np.flatnonzero(reg == self.BROOM)
        broom_tok = ("broom",) if len(brooms) >= 2 else ("root",)
        for i in brooms:
            tokens[i] = broom_tok
        combs = np.flatnonzero(reg == self.COMB)
        if len(combs) == 1:
            tokens[combs[0]] = ("root",)
        elif len(combs) > 1:
            cp = pay[combs]
            bottom2 = np.partition(cp, 1)[:2]
            lowest, second = int(bottom2.min()), int(bottom2.max())
            for i in combs:
                p = int(pay[i])
                tokens[i] = ("le", second if p == lowest else p)
        dys = np.flatnonzero(reg == self.DY)
        if len(dys) == 1:
            tokens[dys[0]] = ("root",)
        elif len(dys) > 1:
            sub = _neighbor_depth_tokens(pay[dys], self.depth, "dy")
            for i, tok in zip(dys, sub):
                tokens[i] = tok
        return tokens

    def kernel_params(self):
        return ("regime", self.depth, 1 / 3, 1 / 3, 1 / 3)


# -- CRT line breaking ---------------------------------------------------------


def crt_linebreak_tree(rng: random.Random, k_max: int) -> WeightedTree:
    """Line-breaking tree from an inhomogeneous Poisson process of rate t dt.

    Cut points arrive at sqrt(2 * Gamma(k)) so the first arrival satisfies
    P(T > t) = exp(-t^2/2); each new segment attaches uniformly by length
    measure on the current tree, and the returned measure is normalized
    length measure.
    """
    if k_max < 1:
        raise ValueError("need at least one segment")
    gamma = 0.0
    arrivals = []
    for _ in range(k_max):
        gamma += rng.expovariate(1.0)
        arrivals.append(math.sqrt(2.0 * gamma))
    lengths = [arrivals[0]] + [arrivals[k + 1] - arrivals[k] for k in range(k_max - 1)]
    segments = [Segment(SparsePoint.origin(), 1, lengths[0])]
    total = lengths[0]
    for k in range(1, k_max):
        u = rng.random() * total
        for seg in segments:
            if u <= seg.length:
                attach = seg.attach.plus(seg.direction, u)
                break
            u -= seg.length
        else:
            seg = segments[-1]
            attach = seg.tip()
        segments.append(Segment(attach, k + 1, lengths[k]))
        total += lengths[k]
    tree = LineBreakTree(segments, validate=False)
    densities = [(k, 0.0, seg.length, seg.length / total)
                 for k, seg in enumerate(segments)]
    return WeightedTree(tree, densities=densities)


def first_linebreak_length(rng: random.Random) -> float:
    return math.sqrt(2.0 * rng.expovariate(1.0))


# -- diagnostics ----------------------------------------------------------------


def dyadic_spinal_atom_law(depth: int) -> PiecewiseDistribution:
    """Exact law of a spinal variable toward a fixed spine under the dyadic
    source: purely atomic, with an atom of mass 2^-(m+1) at 1 - 2^-m for
    each resolvable depth m, and the depth-capped remainder at the end."""
    atoms = [(1 - Fraction(1, 1 << m), Fraction(1, 1 << (m + 1)))
             for m in range(depth)]
    atoms.append((1 - Fraction(1, 1 << depth), Fraction(1, 1 << depth)))
    return PiecewiseDistribution(atoms=atoms)


def check_oracle_consistency(oracle, n: int) -> bool:
    """Restriction property: the hierarchy on [n+1] restricted to [n] equals
    the hierarchy on [n]."""
    return oracle.hierarchy(n + 1).restrict(range(1, n + 1)) == oracle.hierarchy(n)


# -- generator specs -------------------------------------------------------------


@dataclass
class GeneratorSpec:
    """CLI-facing description of a generator: kind, parameters, seed."""

    kind: str
    seed: int = 0
    params: dict = field(default_factory=dict)

    KNOWN = ("comb", "dyadic", "triple", "crt", "weight-tree", "ehpf-table")

    def build(self):
        if self.kind == "comb":
            return CombOracle(self.seed)
        if self.kind == "dyadic":
            return DyadicOracle(self.seed, int(self.params.get("depth", 12)))
        if self.kind == "triple":
            return TripleOracle(self.seed, int(self.params.get("depth", 40)))
        if self.kind == "crt":
            return crt_linebreak_tree(random.Random(self.seed),
                                      int(self.params.get("k_max", 8)))
        if self.kind == "weight-tree":
            from .weights import WeightTree, WeightTreeOracle

            path = self.params.get("weights")
            if path is None:
                raise ValueError("weight-tree generator needs params['weights']")
            with open(path, encoding="utf-8") as fh:
                wt = WeightTree.from_text(fh.read())
            return WeightTreeOracle(wt, self.seed)
        if self.kind == "ehpf-table":
            from .weights import WeightTree, WeightTreeOracle, ehpf_exact
            from .weights import EhpfChainOracle

            path = self.params.get("weights")
            if path is None:
                raise ValueError("ehpf-table generator needs params['weights']")
            with open(path, encoding="utf-8") as fh:
                wt = WeightTree.from_text(fh.read())
            n_max = int(self.params.get("n_max", 5))
            tables = {n: ehpf_exact(wt, n) for n in range(1, n_max + 1)}
            return EhpfChainOracle(tables, self.seed)
        raise ValueError(f"unknown generator kind {self.kind!r}")

    @classmethod
    def parse(cls, text: str, seed: int = 0) -> "GeneratorSpec":
        """Parse 'kind' or 'kind:key=val,key=val' descriptions."""
        kind, _, rest = text.partition(":")
        params = {}
        if rest:
            for item in rest.split(","):
                k, _, v = item.partition("=")
                if not _:
                    raise ValueError(f"bad generator parameter {item!r}")
                params[k] = v
        if kind not in cls.KNOWN:
            raise ValueError(f"unknown generator kind {kind!r}")
        return cls(kind, seed, params)

    @classmethod
    def from_config(cls, path: str) -> "GeneratorSpec":
        import json

        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        return cls(data["kind"], int(data.get("seed", 0)), data.get("params", {}))
