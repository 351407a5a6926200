"""The sampling representation as an executable pipeline.

A consistent exchangeable hierarchy sequence is split by a fixed bijection
into spine labels and retained sample labels.  Spinal values toward
successive spines become coordinates of points in sequence space, the union
of their staircase paths is a line-breaking tree, and the hierarchy derived
from that tree must reproduce the input hierarchy on the retained labels.
In exact mode every step of that chain is asserted, not assumed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .hierarchy import FiniteHierarchy
from .realtree import (
    LineBreakTree,
    Segment,
    SparsePoint,
    derived_hierarchy,
    project,
)
from .spinal import estimate_spinal_variable, hoeffding_radius


class SpineIndexing:
    """Bijection between pipeline roles and oracle labels.

    The default interleaves: odd oracle labels become spines, even ones the
    retained samples.  Any fixed bijection is admissible; an offset layout
    is provided for invariance checks.
    """

    def __init__(self, spine_of=None, sample_of=None):
        self._spine = spine_of or (lambda s: 2 * s - 1)
        self._sample = sample_of or (lambda j: 2 * j)

    def spine_label(self, s: int) -> int:
        return self._spine(s)

    def sample_label(self, j: int) -> int:
        return self._sample(j)

    @classmethod
    def block_layout(cls, n: int) -> "SpineIndexing":
        """Samples first, spines after: b puts 1..n as samples, the rest as spines."""
        return cls(spine_of=lambda s: n + s, sample_of=lambda j: j)


def build_sample_point(values) -> SparsePoint:
    """Staircase point of one sample from its spinal values toward spines
    1..K: each coordinate is the increment over the running maximum."""
    entries = []
    cur = 0
    for s, x in enumerate(values, start=1):
        if not 0 <= x <= 1:
            raise ValueError(f"spinal value {x} outside [0,1]")
        if x > cur:
            entries.append((s, x - cur))
            cur = x
    return SparsePoint(entries)


def build_tree(points, tol=0) -> LineBreakTree:
    """Union of the staircase paths, segment by segment.

    At each direction, the samples gaining that coordinate must all branch
    from a single point of the current tree; a violation means the spinal
    values were inconsistent (in empirical mode, snap ties first).
    """
    directions = sorted({i for p in points for i, _ in p.entries})
    segments = []
    for d in directions:
        attaches = {}
        length = 0
        for p in points:
            v = p.get(d)
            if v:
                att = SparsePoint(tuple((i, w) for i, w in p.entries if i < d))
                attaches[att] = None
                length = max(length, v)
        if len(attaches) > 1 and tol:
            merged = []
            for att in attaches:
                if not any(_points_close(att, m, tol) for m in merged):
                    merged.append(att)
            attaches = {m: None for m in merged}
        if len(attaches) != 1:
            raise ValueError(
                f"direction {d}: branch points {list(attaches)} are not a single point")
        segments.append(Segment(next(iter(attaches)), d, length))
    return LineBreakTree(segments, validate=False)


def _points_close(a, b, tol):
    if len(a.entries) != len(b.entries):
        return False
    return all(i == j and abs(float(u) - float(v)) <= tol
               for (i, u), (j, v) in zip(a.entries, b.entries))


# -- auxiliary hierarchies -----------------------------------------------------------


def aux_hierarchy_exact(gen, indexing: SpineIndexing, k: int, n: int) -> FiniteHierarchy:
    """Blocks cut out of the retained labels by MRCAs against spines 1..k,
    computed from the generator's exact cells."""
    samples = [indexing.sample_label(j) for j in range(1, n + 1)]
    masks = set()
    for s in range(1, k + 1):
        sp = indexing.spine_label(s)
        for u in samples:
            cell = gen.mrca_cell(sp, u)
            m = 0
            for b, v in enumerate(samples):
                if gen.cell_contains(cell, v):
                    m |= 1 << b
            masks.add(m)
    return FiniteHierarchy(n, masks, validate=False)


def aux_hierarchy_prefix(oracle, indexing: SpineIndexing, k: int, n: int,
                         start: int = 0, max_doublings: int = 12) -> FiniteHierarchy:
    """Prefix-stabilized version for oracles without exact cells: MRCAs are
    evaluated in growing prefixes until the blocks stop changing twice."""
    labels = [indexing.sample_label(j) for j in range(1, n + 1)]
    spines = [indexing.spine_label(s) for s in range(1, k + 1)]
    m0 = max(start, 2 * max(labels + spines))
    prev = None
    stable = 0
    for _ in range(max_doublings):
        h = oracle.hierarchy(m0)
        masks = set()
        for sp in spines:
            for u in labels:
                big = h.mrca_mask(sp, u)
                mm = 0
                for b, v in enumerate(labels):
                    if big >> (v - 1) & 1:
                        mm |= 1 << b
                masks.add(mm)
        cur = FiniteHierarchy(n, masks, validate=False)
        if cur == prev:
            stable += 1
            if stable >= 2:
                return cur
        else:
            stable = 0
        prev = cur
        m0 *= 2
    raise RuntimeError(f"MRCA blocks did not stabilize within {max_doublings} doublings")


def restricted_hierarchy(gen, indexing: SpineIndexing, n: int) -> FiniteHierarchy:
    """The input hierarchy restricted to the retained sample labels."""
    samples = [indexing.sample_label(j) for j in range(1, n + 1)]
    top = max(samples)
    return gen.hierarchy(top).restrict(samples)


# -- reconstruction ------------------------------------------------------------------


@dataclass
class ReconstructionResult:
    n: int
    mode: str
    spines_used: int
    residual_history: list
    tree: LineBreakTree
    points: list
    hierarchy: FiniteHierarchy
    aux_hierarchy: FiniteHierarchy | None = None
    checks: dict = field(default_factory=dict)
    growth_log: list = field(default_factory=list)

    @property
    def residual(self) -> float:
        return self.residual_history[-1] if self.residual_history else 1.0

    def report(self) -> str:
        lines = [f"reconstruction n={self.n} mode={self.mode}",
                 f"spines used: {self.spines_used}",
                 f"pair residual: {self.residual}"]
        for k, att, length in self.growth_log:
            lines.append(f"  spine {k}: new branch length {float(length):.6g} "
                         f"at {att.entries}")
        for name, ok in self.checks.items():
            lines.append(f"check {name}: {'pass' if ok else 'FAIL'}")
        return "\n".join(lines) + "\n"


def reconstruct(gen, n: int, spines: int = 16, mode: str = "exact",
                indexing: SpineIndexing | None = None, grow: bool = True,
                max_spines: int = 1 << 22, sample_depth: int = 100_000,
                verify: bool = True) -> ReconstructionResult:
    """Run the pipeline: spinal values toward spines 1..K, staircase points,
    line-breaking tree, derived hierarchy.

    In exact mode the spine set keeps growing (in batches of the requested
    size) until every pairwise MRCA of the retained samples holds a spine;
    at that point the derived hierarchy provably equals the input hierarchy
    on the samples, and the per-spine identities are asserted along the way.
    """
    indexing = indexing or SpineIndexing()
    if mode == "exact":
        return _reconstruct_exact(gen, n, spines, indexing, grow, max_spines, verify)
    if mode == "empirical":
        return _reconstruct_empirical(gen, n, spines, indexing, sample_depth)
    raise ValueError(f"unknown mode {mode!r}")


def _reconstruct_exact(gen, n, batch, indexing, grow, max_spines, verify):
    from .spinal import exact_spinal_value

    spinal = getattr(gen, "spinal_value", None) or (
        lambda i, j: exact_spinal_value(gen, i, j))
    samples = [indexing.sample_label(j) for j in range(1, n + 1)]
    cells = {}
    for a in range(n):
        for b in range(a + 1, n):
            cells[a, b] = gen.mrca_cell(samples[a], samples[b])
    unresolved = set(cells)
    residual_history = []
    k = 0
    values = [[] for _ in range(n)]  # spinal values per sample
    cur_max = [Fraction(0)] * n
    profiles = [[] for _ in range(n)]
    g_masks = {0, (1 << n) - 1} | {1 << b for b in range(n)}
    growth_log = []
    checks = {"per_spine_identity": True, "projection_compat": True,
              "norm_law": True}

    while True:
        target = k + batch if (grow and unresolved) or k == 0 else k
        while k < target and k < max_spines:
            k += 1
            sp = indexing.spine_label(k)
            changed = False
            for j in range(n):
                x = spinal(sp, samples[j])
                values[j].append(x)
                if x > cur_max[j]:
                    profiles[j].append((k, x))
                    cur_max[j] = x
                    changed = True
            for a in range(n):
                cell = gen.mrca_cell(sp, samples[a])
                m = 0
                for b, v in enumerate(samples):
                    if gen.cell_contains(cell, v):
                        m |= 1 << b
                if m not in g_masks:
                    g_masks.add(m)
                    changed = True
            unresolved = {p for p in unresolved
                          if not gen.cell_contains(cells[p], sp)}
            if changed and verify:
                i_k = _hierarchy_from_profiles(profiles, n)
                g_k = FiniteHierarchy(n, g_masks, validate=False)
                if i_k != g_k:
                    checks["per_spine_identity"] = False
        pairs = len(cells)
        residual_history.append(len(unresolved) / pairs if pairs else 0.0)
        if not unresolved or not grow or k >= max_spines:
            break
    if unresolved and grow:
        raise RuntimeError(f"pair MRCAs unresolved after {k} spines")

    points = [build_sample_point(values[j]) for j in range(n)]
    tree = _build_tree_logged(points, growth_log)
    hier = derived_hierarchy(points, n, tree, tol=0)
    if verify:
        for j in range(n):
            assert points[j].norm() == max(values[j], default=Fraction(0)), \
                "norm differs from the running spinal maximum"
            for kk in (1, k // 2, k):
                trunc = build_sample_point(values[j][:kk])
                if project(points[j], kk) != trunc:
                    checks["projection_compat"] = False
        g_final = FiniteHierarchy(n, g_masks, validate=False)
        checks["final_identity"] = hier == g_final
    else:
        g_final = FiniteHierarchy(n, g_masks, validate=False)
    return ReconstructionResult(n, "exact", k, residual_history, tree, points,
                                hier, g_final, checks, growth_log)


def _hierarchy_from_profiles(profiles, n):
    """Derived hierarchy of the truncated staircase points, computed from
    the (spine, value) profiles without materializing the tree."""
    masks = set()
    lens = [len(p) for p in profiles]
    cpl = [[0] * n for _ in range(n)]
    for u in range(n):
        for v in range(u + 1, n):
            d = 0
            lim = min(lens[u], lens[v])
            while d < lim and profiles[u][d] == profiles[v][d]:
                d += 1
            cpl[u][v] = cpl[v][u] = d
    for u in range(n):
        for v in range(u, n):
            c = cpl[u][v] if u != v else lens[u]
            if c == lens[u] or c == lens[v]:
                ref = u if lens[u] <= lens[v] else v
                p = lens[ref]
                if p == 0:
                    continue
                s, thresh = profiles[ref][p - 1]
            elif profiles[u][c][0] == profiles[v][c][0]:
                ref, p = u, c + 1
                s = profiles[u][c][0]
                thresh = min(profiles[u][c][1], profiles[v][c][1])
            else:
                if c == 0:
                    continue
                ref, p = u, c
                s, thresh = profiles[u][c - 1]
            m = 0
            for j in range(n):
                d = cpl[ref][j] if j != ref else lens[ref]
                if (d >= p - 1 and lens[j] >= p and profiles[j][p - 1][0] == s
                        and profiles[j][p - 1][1] >= thresh):
                    m |= 1 << j
            masks.add(m)
    return FiniteHierarchy(n, masks, validate=False)


def _build_tree_logged(points, growth_log) -> LineBreakTree:
    tree = build_tree(points)
    for seg in tree.segments:
        growth_log.append((seg.direction, seg.attach, seg.length))
    return tree


def _reconstruct_empirical(gen, n, k, indexing, m):
    samples = [indexing.sample_label(j) for j in range(1, n + 1)]
    tol = 2 * hoeffding_radius(m)
    values = [[] for _ in range(n)]
    for s in range(1, k + 1):
        sp = indexing.spine_label(s)
        row = [estimate_spinal_variable(gen, sp, samples[j], m) for j in range(n)]
        snapped = _snap_ties(row, tol)
        for j in range(n):
            values[j].append(snapped[j])
    for j in range(n):
        # estimation noise breaks exact ties against the running maximum and
        # would fabricate branches; clamp near-ties down to the maximum
        cur = 0.0
        for s in range(k):
            if values[j][s] <= cur + tol:
                values[j][s] = min(values[j][s], cur)
            cur = max(cur, values[j][s])
    points = [build_sample_point(values[j]) for j in range(n)]
    growth_log = []
    tree = build_tree(points, tol=tol)
    for seg in tree.segments:
        growth_log.append((seg.direction, seg.attach, seg.length))
    hier = derived_hierarchy(points, n, tree, tol=tol)
    return ReconstructionResult(n, "empirical", k, [float("nan")], tree, points,
                                hier, None, {}, growth_log)


def _snap_ties(row, tol):
    order = sorted(range(len(row)), key=lambda j: row[j])
    out = list(row)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and out[order[j + 1]] - out[order[j]] < tol:
            j += 1
        if j > i:
            grp = [order[t] for t in range(i, j + 1)]
            mean = sum(out[g] for g in grp) / len(grp)
            for g in grp:
                out[g] = mean
        i = j + 1
    return out


def check_distributional_equality(gen_direct, gen_pipeline, n: int, replicas: int,
                                  significance: float = 0.01, seed: int = 0):
    """Chi-square comparison of shape frequencies: direct sampling of one
    generator against the full reconstruction pipeline of another."""
    from . import _kernels
    from .analysis import chi_square_shapes

    direct = _kernels.sample_shape_counts(gen_direct, n, replicas, seed)
    recon = _kernels.reconstruct_shape_counts(gen_pipeline, n, replicas,
                                              seed + 0x5BD1E995)
    return chi_square_shapes(direct, recon, significance)
