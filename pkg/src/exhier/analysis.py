"""Structural diagnostics and the shared statistical test kit.

The comb relation singles out pairs arranged caterpillar-like along a
spine; atom masses of the underlying sampling measure are estimated from
the frequency of persistent parent sharing; frequency tables are compared
with a standard two-sample chi-square with small-cell pooling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .hierarchy import FiniteHierarchy


@dataclass
class CombPartition:
    """Partition of {1..n} into comb components (size >= 2) and singletons."""

    n: int
    blocks: list
    comb_flags: list

    def comb_blocks(self):
        return [b for b, f in zip(self.blocks, self.comb_flags) if f]

    def component_of(self, label: int):
        for b in self.blocks:
            if label in b:
                return b
        raise KeyError(label)


def comb_precedes(h: FiniteHierarchy, i: int, j: int,
                  parent_masks=None, parent_mult=None) -> bool:
    """Whether i sits below j along a comb: i's parent is strictly inside
    their MRCA, which is exactly j's parent, and every label of the MRCA
    outside i's parent has a parent no other label shares."""
    if i == j:
        return False
    if parent_masks is None:
        parent_masks = [h.parent_mask(x) for x in range(1, h.n + 1)]
        parent_mult = {}
        for m in parent_masks:
            parent_mult[m] = parent_mult.get(m, 0) + 1
    m = h.mrca_mask(i, j)
    ai = parent_masks[i - 1]
    if not (ai & m == ai and ai != m and parent_masks[j - 1] == m):
        return False
    urange = (m | 1 << (i - 1)) & ~ai
    b = 1
    while urange:
        if urange & 1 and parent_mult[parent_masks[b - 1]] >= 2:
            return False
        urange >>= 1
        b += 1
    return True


def comb_partition(h: FiniteHierarchy) -> CombPartition:
    """Group labels related (in either direction, transitively) by the comb
    relation; blocks of size >= 2 are flagged as comb components."""
    n = h.n
    parent_masks = [h.parent_mask(x) for x in range(1, n + 1)]
    parent_mult = {}
    for m in parent_masks:
        parent_mult[m] = parent_mult.get(m, 0) + 1
    root = list(range(n + 1))

    def find(x):
        while root[x] != x:
            root[x] = root[root[x]]
            x = root[x]
        return x

    for i in range(1, n + 1):
        for j in range(1, n + 1):
            if i != j and comb_precedes(h, i, j, parent_masks, parent_mult):
                ri, rj = find(i), find(j)
                if ri != rj:
                    root[ri] = rj
    groups = {}
    for x in range(1, n + 1):
        groups.setdefault(find(x), set()).add(x)
    blocks = [frozenset(g) for g in groups.values()]
    blocks.sort(key=min)
    return CombPartition(n, blocks, [len(b) >= 2 for b in blocks])


def atom_mass_estimate(oracle, j: int, n: int, schedule=None) -> float:
    """Estimated mass of the sample point behind label j: the fraction of
    labels that share j's parent block persistently across the schedule of
    prefix sizes (defaults to n/4, n/2, n)."""
    if schedule is None:
        schedule = [max(2, j, n // 4), max(2, j, n // 2), max(2, j, n)]
    schedule = sorted(set(schedule))
    bulk = getattr(oracle, "parent_tokens_all", None)
    per_m = []
    for m in schedule:
        if bulk is not None:
            per_m.append(bulk(m))
        else:
            h = oracle.hierarchy(m)
            per_m.append([h.parent_mask(k) for k in range(1, m + 1)])
    count = 0
    for k in range(1, n + 1):
        if all(tokens[k - 1] == tokens[j - 1]
               for m, tokens in zip(schedule, per_m) if m >= k and m >= j):
            count += 1
    return count / n


# -- statistical test kit ---------------------------------------------------------


@dataclass
class TestReport:
    __test__ = False  # not a pytest class, despite the name

    name: str
    statistic: float
    dof: int
    threshold: float
    passed: bool
    pvalue: float | None = None
    witness: dict = field(default_factory=dict)

    def __str__(self):
        head = (f"{self.name}: stat={self.statistic:.4g} dof={self.dof} "
                f"threshold={self.threshold:g} -> "
                f"{'pass' if self.passed else 'FAIL'}")
        if self.pvalue is not None:
            head += f" (p={self.pvalue:.4g})"
        return head

    def machine_lines(self):
        out = [f"name={self.name}", f"statistic={self.statistic!r}",
               f"dof={self.dof}", f"threshold={self.threshold!r}",
               f"pvalue={self.pvalue!r}", f"pass={int(self.passed)}"]
        for k, v in self.witness.items():
            out.append(f"{k}={v}")
        return out


def _pool_cells(counts_a: dict, counts_b: dict, min_expected: float):
    keys = sorted(set(counts_a) | set(counts_b), key=str)
    na = sum(counts_a.values())
    nb = sum(counts_b.values())
    total = na + nb
    cells = []
    small_a = small_b = 0.0
    for k in keys:
        a, b = counts_a.get(k, 0), counts_b.get(k, 0)
        exp_a = na * (a + b) / total
        exp_b = nb * (a + b) / total
        if exp_a < min_expected or exp_b < min_expected:
            small_a += a
            small_b += b
        else:
            cells.append((a, b))
    if small_a + small_b > 0:
        exp_a = na * (small_a + small_b) / total
        exp_b = nb * (small_a + small_b) / total
        if cells and (exp_a < min_expected or exp_b < min_expected):
            a, b = cells.pop()
            cells.append((a + small_a, b + small_b))
        else:
            cells.append((small_a, small_b))
    return cells, na, nb


def chi_square_shapes(freq_a: dict, freq_b: dict, significance: float = 0.01,
                      min_expected: float = 5.0, name: str = "chi-square") -> TestReport:
    """Two-sample chi-square over frequency tables (cells pooled until every
    expected count reaches the minimum)."""
    cells, na, nb = _pool_cells(freq_a, freq_b, min_expected)
    if na == 0 or nb == 0:
        raise ValueError("empty frequency table")
    if len(cells) < 2:
        return TestReport(name, 0.0, 0, significance, True, 1.0,
                          {"cells": len(cells)})
    stat = 0.0
    for a, b in cells:
        pa = na * (a + b) / (na + nb)
        pb = nb * (a + b) / (na + nb)
        stat += (a - pa) ** 2 / pa + (b - pb) ** 2 / pb
    dof = len(cells) - 1
    pvalue = float(stats.chi2.sf(stat, dof))
    return TestReport(name, stat, dof, significance, pvalue >= significance,
                      pvalue, {"cells": len(cells), "n_a": na, "n_b": nb})


def ks_uniform(values, significance: float = 0.01, name: str = "ks-uniform") -> TestReport:
    """Kolmogorov-Smirnov test of uniformity on [0,1]."""
    stat, pvalue = stats.kstest(np.asarray(values, dtype=float), "uniform")
    return TestReport(name, float(stat), len(values), significance,
                      bool(pvalue >= significance), float(pvalue))


def mean_within_sigmas(values, target: float, sigmas: float = 3.0,
                       name: str = "mean") -> TestReport:
    """Whether the sample mean is within a z-band of the target."""
    arr = np.asarray(values, dtype=float)
    se = float(arr.std(ddof=1)) / math.sqrt(len(arr))
    dev = abs(float(arr.mean()) - target)
    return TestReport(name, dev / se if se else 0.0, len(arr), sigmas,
                      dev <= sigmas * se,
                      witness={"mean": float(arr.mean()), "target": target,
                               "se": se})
