"""Named verification suites for the CLI: compact statistical and exact
checks runnable outside the full test suite."""

from __future__ import annotations

import math
import random

from .analysis import TestReport, atom_mass_estimate, ks_uniform, \
    mean_within_sigmas
from .generators import (
    CombOracle,
    DyadicOracle,
    TripleOracle,
    check_oracle_consistency,
    crt_linebreak_tree,
    first_linebreak_length,
)


def suite_oracle_consistency(seed, replicas, jobs):
    out = []
    for make, name in ((CombOracle, "comb"), (lambda s: DyadicOracle(s, 12), "dyadic"),
                       (TripleOracle, "triple")):
        bad = 0
        trials = 0
        rng = random.Random(seed)
        for _ in range(20):
            gen = make(rng.randrange(1 << 30))
            for n in (3, 5, 8):
                trials += 1
                if not check_oracle_consistency(gen, n):
                    bad += 1
        out.append(TestReport(f"consistency-{name}", bad, trials, 0, bad == 0))
    return out


def suite_spinal(seed, replicas, jobs):
    from .spinal import spinal_composition, spinal_variables, check_order_consistency

    gen = DyadicOracle(seed, depth=12)
    n = 8
    ok_sym = ok_order = True
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            if i != j and gen.spinal_value(i, j) != gen.spinal_value(j, i):
                ok_sym = False
    h = gen.hierarchy(n)
    for i in range(1, n + 1):
        r = spinal_composition(h, i)
        x = spinal_variables(gen, i, [j for j in range(1, n + 1) if j != i])
        ok, _ = check_order_consistency(r, x)
        ok_order = ok_order and ok
    return [TestReport("spinal-symmetry", 0 if ok_sym else 1, n * n, 0, ok_sym),
            TestReport("spinal-order", 0 if ok_order else 1, n, 0, ok_order)]


def suite_reconstruction(seed, replicas, jobs):
    from .definetti import SpineIndexing, reconstruct, restricted_hierarchy

    out = []
    for make, name in ((lambda s: DyadicOracle(s, 12), "dyadic"),
                       (TripleOracle, "triple")):
        bad = 0
        for s in range(seed, seed + 5):
            gen = make(s)
            res = reconstruct(gen, n=6, spines=12, mode="exact")
            want = restricted_hierarchy(gen, SpineIndexing(), 6)
            if res.hierarchy != want or not all(res.checks.values()):
                bad += 1
        out.append(TestReport(f"reconstruction-{name}", bad, 5, 0, bad == 0))
    return out


def suite_distribution(seed, replicas, jobs):
    from .definetti import check_distributional_equality

    replicas = replicas or 20_000
    gen = DyadicOracle(seed, depth=12)
    rep = check_distributional_equality(gen, gen, 4, replicas, 0.01, seed)
    rep.name = "distribution-dyadic"
    comb = CombOracle(seed)
    neg = check_distributional_equality(comb, gen, 4, replicas, 0.01, seed + 1)
    control = TestReport("distribution-negative-control", neg.statistic, neg.dof,
                         0.01, not neg.passed, neg.pvalue)
    return [rep, control]


def suite_crt(seed, replicas, jobs):
    replicas = replicas or 10_000
    rng = random.Random(seed)
    lengths = [first_linebreak_length(rng) for _ in range(replicas)]
    rep1 = mean_within_sigmas(lengths, math.sqrt(math.pi / 2), 3.0,
                              name="crt-first-length")
    rng = random.Random(seed + 1)
    attach = []
    for _ in range(2_000):
        wt = crt_linebreak_tree(rng, 2)
        seg1, seg2 = wt.tree.segments
        attach.append(float(seg2.attach.get(1)) / float(seg1.length))
    rep2 = ks_uniform(attach, name="crt-attach-uniform")
    return [rep1, rep2]


def suite_atoms(seed, replicas, jobs):
    n = replicas or 4_000
    gen = TripleOracle(seed)
    gen.ensure(n)
    j = next(k for k in range(1, n) if gen.regime(k) == TripleOracle.BROOM)
    est = atom_mass_estimate(gen, j, n)
    rep1 = TestReport("atom-broomstick", est, n, 0.02, abs(est - 1 / 3) <= 0.02,
                      witness={"estimate": est})
    comb = CombOracle(seed)
    worst = max(atom_mass_estimate(comb, k, n) for k in range(1, 4))
    rep2 = TestReport("atom-comb-diffuse", worst, n, 0.01, worst <= 0.01,
                      witness={"worst": worst})
    return [rep1, rep2]


def suite_ehpf(seed, replicas, jobs):
    from .weights import WeightTree, check_addition_rule, ehpf_exact

    wt = WeightTree.dyadic(10)
    t3 = ehpf_exact(wt, 3)
    t4 = ehpf_exact(wt, 4)
    rep = check_addition_rule(t3, t4, exact=True)
    worst = max(abs(float(r[2])) for r in rep.per_shape.values())
    return [TestReport("ehpf-exact-addition", worst, len(rep.per_shape),
                       float(t3["bound"] + t4["bound"]), rep.ok)]


_NAMED = {
    "oracle-consistency": suite_oracle_consistency,
    "spinal": suite_spinal,
    "reconstruction": suite_reconstruction,
    "distribution": suite_distribution,
    "crt": suite_crt,
    "atoms": suite_atoms,
    "ehpf": suite_ehpf,
}

SUITES = tuple(_NAMED) + ("all",)


def run_suite(name, seed=0, replicas=None, jobs=1):
    if name == "all":
        out = []
        for fn in _NAMED.values():
            out.extend(fn(seed, replicas, jobs))
        return out
    return _NAMED[name](seed, replicas, jobs)
