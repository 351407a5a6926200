"""Compositions as binary arrays, left-uniformization, and spinal variables.

A composition of a finite set is encoded by a reflexive, total, transitive
binary array whose complement is also transitive; the spinal composition of
a hierarchy orders the other labels by attachment point along the path from
the root to a chosen spine label.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .hierarchy import FiniteHierarchy


@dataclass(frozen=True)
class CompositionReport:
    valid: bool
    violated: str | None = None  # "reflexive" | "total" | "transitive" | "co-transitive"
    witness: tuple | None = None

    def __bool__(self):
        return self.valid


class CompositionArray:
    """Binary relation R over an index set, stored as a dense boolean matrix."""

    def __init__(self, labels, bits):
        self.labels = tuple(labels)
        self.index = {x: i for i, x in enumerate(self.labels)}
        self.bits = np.asarray(bits, dtype=bool)
        if self.bits.shape != (len(self.labels), len(self.labels)):
            raise ValueError("bits must be square over the index set")

    def r(self, i, j) -> int:
        return int(self.bits[self.index[i], self.index[j]])

    @classmethod
    def from_order(cls, ordered_blocks):
        """Build the array of a totally ordered partition (earlier blocks precede)."""
        labels = [x for blk in ordered_blocks for x in blk]
        rank = {}
        for r_, blk in enumerate(ordered_blocks):
            for x in blk:
                rank[x] = r_
        m = len(labels)
        bits = np.zeros((m, m), dtype=bool)
        for a in range(m):
            for b in range(m):
                bits[a, b] = rank[labels[a]] <= rank[labels[b]]
        return cls(labels, bits)

    def ordered_blocks(self) -> list[list]:
        """The totally ordered partition encoded by the array."""
        labels = self.labels
        key = {x: sum(self.r(y, x) for y in labels) for x in labels}
        blocks: dict[int, list] = {}
        for x in labels:
            blocks.setdefault(key[x], []).append(x)
        return [blocks[k] for k in sorted(blocks)]

    def to_text(self) -> str:
        lines = []
        for blk in self.ordered_blocks():
            lines.append("{" + ",".join(map(str, sorted(blk))) + "}")
        return "\n".join(lines) + "\n"


def validate_composition(r: CompositionArray) -> CompositionReport:
    """Check reflexivity, totality, transitivity and co-transitivity.

    Never raises; returns the first violated property with a witness.
    """
    b = r.bits
    m = len(r.labels)
    for i in range(m):
        if not b[i, i]:
            return CompositionReport(False, "reflexive", (r.labels[i],))
    for i in range(m):
        for j in range(m):
            if not b[i, j] and not b[j, i]:
                return CompositionReport(False, "total", (r.labels[i], r.labels[j]))
    for i in range(m):
        for j in range(m):
            for k in range(m):
                if b[i, j] and b[j, k] and not b[i, k]:
                    return CompositionReport(
                        False, "transitive", (r.labels[i], r.labels[j], r.labels[k]))
                if not b[i, j] and not b[j, k] and b[i, k]:
                    return CompositionReport(
                        False, "co-transitive", (r.labels[i], r.labels[j], r.labels[k]))
    return CompositionReport(True)


def spinal_composition(h, i: int, n: int | None = None) -> CompositionArray:
    """The spinal composition toward label i: R_i(j,k) = 1 iff k is in mrca(i,j).

    Accepts a FiniteHierarchy or an oracle with .hierarchy(n).
    """
    if not isinstance(h, FiniteHierarchy):
        if n is None:
            raise ValueError("an oracle source needs an explicit prefix size n")
        h = h.hierarchy(n)
    if not 1 <= i <= h.n:
        raise ValueError("spine label out of range")
    labels = [x for x in range(1, h.n + 1) if x != i]
    m = len(labels)
    bits = np.zeros((m, m), dtype=bool)
    for a, j in enumerate(labels):
        mask = h.mrca_mask(i, j)
        for b_, k in enumerate(labels):
            bits[a, b_] = bool(mask >> (k - 1) & 1)
    return CompositionArray(labels, bits)


# -- piecewise distributions and left-uniformization -------------------------


class PiecewiseDistribution:
    """A mix of point atoms and uniform segments on the line.

    Atoms are (location, mass) pairs; segments are (left, right, mass)
    triples carrying uniformly spread mass. Exact arithmetic is preserved
    when the inputs are Fractions.
    """

    def __init__(self, atoms=(), segments=(), tol=1e-12):
        self.atoms = sorted((loc, mass) for loc, mass in atoms)
        self.segments = sorted((a, b, m) for a, b, m in segments)
        locs = [a for a, _ in self.atoms]
        if len(set(locs)) != len(locs):
            raise ValueError("atom locations must be distinct")
        for (a, b, _) in self.segments:
            if not a < b:
                raise ValueError("segment endpoints out of order")
        for (_, b1, _), (a2, _, _) in zip(self.segments, self.segments[1:]):
            if a2 < b1:
                raise ValueError("segments overlap")
        if any(m <= 0 for _, m in self.atoms) or any(m <= 0 for *_, m in self.segments):
            raise ValueError("masses must be positive")
        total = self.total_mass()
        if abs(float(total) - 1.0) > tol:
            raise ValueError(f"total mass {float(total)} differs from 1")

    def total_mass(self):
        return sum((m for _, m in self.atoms), start=Fraction(0) if self._exact() else 0.0) \
            + sum(m for *_, m in self.segments)

    def _exact(self) -> bool:
        vals = [v for pair in self.atoms for v in pair]
        vals += [v for seg in self.segments for v in seg]
        return all(isinstance(v, (int, Fraction)) for v in vals)

    def mass_below(self, x):
        """Mass placed strictly below x."""
        zero = Fraction(0) if self._exact() else 0.0
        total = zero
        for loc, m in self.atoms:
            if loc < x:
                total += m
        for a, b, m in self.segments:
            if x >= b:
                total += m
            elif x > a:
                total += m * (x - a) / (b - a)
        return total

    def atom_masses(self):
        return sorted((m for _, m in self.atoms), reverse=True)

    def __eq__(self, other):
        return (isinstance(other, PiecewiseDistribution)
                and self.atoms == other.atoms and self.segments == other.segments)

    def __repr__(self):
        return f"PiecewiseDistribution(atoms={self.atoms}, segments={self.segments})"


def left_uniformize(f: PiecewiseDistribution) -> PiecewiseDistribution:
    """Relocate every atom of mass m at x to F(-inf, x), leave a massless gap
    of width m to its right, and spread the continuous mass as Lebesgue
    measure on the rest of [0,1].
    """
    atoms = [(f.mass_below(x), m) for x, m in f.atoms]
    gaps = sorted((u, u + m) for u, m in atoms)
    zero = atoms[0][0] * 0 if atoms else Fraction(0)
    one = zero + 1
    segments = []
    cursor = zero
    for a, b in gaps + [(one, one)]:
        if cursor < a:
            segments.append((cursor, a, a - cursor))
        cursor = max(cursor, b)
    total_atom = sum(m for _, m in atoms)
    if float(total_atom) >= 1.0 - 1e-15 and not isinstance(total_atom, Fraction):
        segments = []
    elif isinstance(total_atom, Fraction) and total_atom >= 1:
        segments = []
    return PiecewiseDistribution(atoms, segments)


def is_left_uniformized(f: PiecewiseDistribution) -> bool:
    return left_uniformize(f) == f


# -- spinal variables ----------------------------------------------------------


@dataclass
class SpinalVariables:
    """Values X^i_j in [0,1] for a fixed spine label i; X^i_i is 1."""

    spine: int
    values: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = dict(self.values)
        self.values[self.spine] = 1
        for j, v in self.values.items():
            if not 0 <= float(v) <= 1:
                raise ValueError(f"spinal value X[{j}]={v} outside [0,1]")

    def __getitem__(self, j):
        return self.values[j]

    def labels(self):
        return sorted(self.values)


def estimate_spinal_variable(oracle, i: int, j: int, m: int,
                             check_consistency: bool = False) -> float:
    """Empirical spinal variable: the fraction of the first m labels, besides
    i and j, that fall outside mrca(i, j)."""
    if i == j:
        return 1.0
    if m < max(i, j) or m < 3:
        raise ValueError("sample depth m must be at least max(i, j) and 3")
    if check_consistency:
        nn = max(i, j)
        if oracle.hierarchy(nn + 1).restrict(range(1, nn + 1)) != oracle.hierarchy(nn):
            raise ValueError("oracle is not restriction-consistent")
    count = None
    fast = getattr(oracle, "mrca_complement_count", None)
    if fast is not None:
        count = fast(i, j, m)
    if count is None:
        h = oracle.hierarchy(m)
        mask = h.mrca_mask(i, j)
        count = sum(1 for k in range(1, m + 1)
                    if k not in (i, j) and not mask >> (k - 1) & 1)
    return count / (m - 2)


def exact_spinal_value(generator, i: int, j: int):
    """Exact spinal variable from a generator exposing MRCA cell measures."""
    if i == j:
        return Fraction(1)
    return 1 - generator.cell_measure(generator.mrca_cell(i, j))


def spinal_variables(source, i: int, labels, mode: str = "exact", m: int | None = None):
    """Collect X^i_j for the given labels, in exact or empirical mode."""
    vals = {}
    for j in labels:
        if mode == "exact":
            vals[j] = exact_spinal_value(source, i, j)
        elif mode == "empirical":
            if m is None:
                raise ValueError("empirical mode needs a sample depth m")
            vals[j] = estimate_spinal_variable(source, i, j, m)
        else:
            raise ValueError(f"unknown mode {mode!r}")
    return SpinalVariables(i, vals)


def check_order_consistency(r: CompositionArray, x: SpinalVariables,
                            tie_tol=0) -> tuple[bool, tuple | None]:
    """Check R(j,k)=1 iff X_j <= X_k on the shared index set.

    With tie_tol > 0, pairs of values closer than tie_tol are treated as
    equal, which makes both directions of the biconditional hold vacuously.
    Returns (ok, witness).
    """
    shared = [j for j in r.labels if j in x.values]
    if set(r.labels) - set(x.values):
        raise ValueError("index sets differ")
    for j in shared:
        for k in shared:
            xj, xk = x[j], x[k]
            if tie_tol and abs(float(xj) - float(xk)) < tie_tol:
                continue
            if bool(r.r(j, k)) != (xj <= xk):
                return False, (j, k)
    return True, None


def hoeffding_radius(m: int, delta: float = 0.01) -> float:
    """Two-sided Hoeffding deviation bound for a mean of m Bernoulli terms."""
    import math

    return math.sqrt(math.log(2.0 / delta) / (2.0 * m))
