"""Command-line interface: generate, enumerate, reconstruct, evaluate exact
probabilities, run verification suites, export graphs.

All randomness is derived from a single --seed (or EXHIER_SEED); identical
invocations produce byte-identical output.  Exit codes: 0 success, 1
validation failure, 2 bad usage, 3 verification-suite failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import random
import sys

from .generators import GeneratorSpec
from .hierarchy import FiniteHierarchy, enumerate_hierarchies, enumerate_shapes
from .realtree import WeightedTree, derived_hierarchy


def _default_seed():
    return int(os.environ.get("EXHIER_SEED", "0"))


def _spec_from_args(args) -> GeneratorSpec:
    if getattr(args, "gen_config", None):
        spec = GeneratorSpec.from_config(args.gen_config)
        if args.seed is not None:
            spec.seed = args.seed
        return spec
    return GeneratorSpec.parse(args.gen, args.seed if args.seed is not None else 0)


def _emit(args, human: str, machine_lines):
    text = "\n".join(machine_lines) + "\n" if args.machine else human
    if getattr(args, "out", None):
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# -- subcommands -----------------------------------------------------------------


def cmd_enumerate(args) -> int:
    n = args.n
    hs = enumerate_hierarchies(n)
    if args.shapes:
        shapes = enumerate_shapes(n)
        human = "\n".join(s.key for s in shapes) + f"\ncount={len(shapes)}\n"
        _emit(args, human, [f"shape={s.key}" for s in shapes]
              + [f"count={len(shapes)}"])
    else:
        chunks = [h.to_text() for h in hs]
        human = "\n".join(chunks) + f"count={len(hs)}\n"
        _emit(args, human, [h.to_text().replace("\n", ";") for h in hs]
              + [f"count={len(hs)}"])
    return 0


def cmd_sample(args) -> int:
    spec = _spec_from_args(args)
    gen = spec.build()
    if isinstance(gen, WeightedTree):
        rng = random.Random(spec.seed)
        pts = gen.sample_points(args.n, rng)
        h = derived_hierarchy(pts, args.n, gen.tree)
    else:
        h = gen.hierarchy(args.n)
    human = h.to_text() + f"shape={h.shape().key}\n"
    _emit(args, human, h.to_text().strip().splitlines()
          + [f"shape={h.shape().key}"])
    return 0


def cmd_reconstruct(args) -> int:
    from .definetti import SpineIndexing, reconstruct, restricted_hierarchy

    spec = _spec_from_args(args)
    gen = spec.build()
    if isinstance(gen, WeightedTree):
        print("error: reconstruction needs a hierarchy oracle, not a tree",
              file=sys.stderr)
        return 1
    res = reconstruct(gen, args.n, spines=args.spines, mode=args.mode)
    lines = res.report().splitlines()
    ok = all(res.checks.values()) if res.checks else True
    if args.mode == "exact":
        want = restricted_hierarchy(gen, SpineIndexing(), args.n)
        match = res.hierarchy == want
        lines.append(f"matches input restriction: {'yes' if match else 'NO'}")
        ok = ok and match
    human = "\n".join(lines) + "\n"
    machine = [f"n={res.n}", f"mode={res.mode}", f"spines={res.spines_used}",
               f"residual={res.residual!r}"]
    machine += [f"check_{k}={int(v)}" for k, v in res.checks.items()]
    machine += ["hierarchy=" + res.hierarchy.to_text().replace("\n", ";")]
    _emit(args, human, machine)
    return 0 if ok else 1


def cmd_prob(args) -> int:
    from .weights import WeightTree, prob_exact

    with open(args.weights, encoding="utf-8") as fh:
        wt = WeightTree.from_text(fh.read())
    with open(args.hierarchy, encoding="utf-8") as fh:
        h = FiniteHierarchy.from_text(fh.read())
    p, bound = prob_exact(wt, h)
    human = (f"probability = {p} ({float(p):.10g})\n"
             f"truncation bound = {float(bound):.3g}\n")
    _emit(args, human, [f"prob={p}", f"prob_float={float(p)!r}",
                        f"bound={float(bound)!r}"])
    return 0


def cmd_ehpf(args) -> int:
    from .weights import check_addition_rule

    spec = _spec_from_args(args)
    sampler = spec.build()
    t_n = _sharded_ehpf(sampler, args.n, args.replicas, spec.seed, args.jobs)
    t_n1 = _sharded_ehpf(sampler, args.n + 1, args.replicas,
                         spec.seed + 0x9E3779B9, args.jobs)
    report = check_addition_rule(t_n, t_n1, exact=False)
    human = str(report) + f"\noverall: {'pass' if report.ok else 'FAIL'}\n"
    machine = []
    for s, (v, ext, res, tol) in report.per_shape.items():
        machine.append(f"shape={s.key} h={float(v)!r} sum={float(ext)!r} "
                       f"residual={float(res)!r} tol={float(tol)!r}")
    machine.append(f"pass={int(report.ok)}")
    _emit(args, human, machine)
    return 0 if report.ok else 1


def _sharded_ehpf(sampler, n, replicas, seed, jobs):
    from . import _kernels
    from .weights import labelings_count

    chunk = 1 << 16
    seeds = []
    left = replicas
    i = 0
    while left > 0:
        seeds.append((min(chunk, left), seed + 0x1000003 * i))
        left -= chunk
        i += 1
    params = _kernels.params_for(sampler)
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_ehpf_worker,
                                  [(params, n, c, s) for c, s in seeds]))
    else:
        parts = [_ehpf_worker((params, n, c, s)) for c, s in seeds]
    counts = {}
    for part in parts:
        for k, v in part.items():
            counts[k] = counts.get(k, 0) + v
    table, se = {}, {}
    for s, c in counts.items():
        lab = labelings_count(s)
        phat = c / replicas
        table[s] = phat / lab
        se[s] = math.sqrt(max(phat * (1 - phat), 1e-300) / replicas) / lab
    table["se"] = se
    return table


def _ehpf_worker(job):
    from . import _kernels

    params, n, count, seed = job
    return _kernels.sample_shape_counts(params, n, count, seed)


def cmd_verify(args) -> int:
    from .suites import run_suite, SUITES

    if args.suite not in SUITES:
        print(f"error: unknown suite {args.suite!r}; known: {', '.join(SUITES)}",
              file=sys.stderr)
        return 2
    reports = run_suite(args.suite, seed=args.seed if args.seed is not None else 0,
                        replicas=args.replicas, jobs=args.jobs)
    lines = []
    ok = True
    for rep in reports:
        ok = ok and rep.passed
        lines.append(str(rep))
    human = "\n".join(lines) + f"\nsuite {args.suite}: {'pass' if ok else 'FAIL'}\n"
    machine = []
    for rep in reports:
        machine.extend(rep.machine_lines())
    machine.append(f"suite_pass={int(ok)}")
    _emit(args, human, machine)
    return 0 if ok else 3


def cmd_export_dot(args) -> int:
    from .realtree import LineBreakTree

    with open(args.infile, encoding="utf-8") as fh:
        text = fh.read()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        data = json.loads(text)
        if "tree" in data:
            dot = WeightedTree.from_json(text).tree.to_dot()
        else:
            dot = LineBreakTree.from_json(text).to_dot()
    else:
        dot = FiniteHierarchy.from_text(text).to_tree().to_dot()
    with open(args.outfile, "w", encoding="utf-8") as fh:
        fh.write(dot)
    return 0


# -- parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="exhier",
        description="Hierarchies, spinal decompositions, and sampling "
                    "representations of exchangeable hierarchies.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, gen=False):
        p.add_argument("--seed", type=int, default=None,
                       help="random seed (default: EXHIER_SEED or 0)")
        p.add_argument("--machine", action="store_true",
                       help="line-oriented key=value output")
        p.add_argument("--out", default=None, help="write output to a file")
        if gen:
            p.add_argument("--gen", default="dyadic",
                           help="generator spec, e.g. dyadic:depth=12, triple, comb")
            p.add_argument("--gen-config", default=None,
                           help="JSON file with kind/params/seed")

    p = sub.add_parser("enumerate", help="list hierarchies or shapes on [n]")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--shapes", action="store_true")
    common(p)
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("sample", help="sample a hierarchy from a generator")
    p.add_argument("--n", type=int, required=True)
    common(p, gen=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("reconstruct", help="run the sampling-representation pipeline")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--K", dest="spines", type=int, default=16,
                   help="spine batch size (exact mode grows until resolved)")
    p.add_argument("--mode", choices=("exact", "empirical"), default="exact")
    common(p, gen=True)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("prob", help="exact probability of a hierarchy under a weight tree")
    p.add_argument("--weights", required=True)
    p.add_argument("--hierarchy", required=True)
    common(p)
    p.set_defaults(func=cmd_prob)

    p = sub.add_parser("ehpf", help="empirical shape probabilities and growth rule")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--replicas", type=int, default=100_000)
    p.add_argument("--jobs", type=int, default=1)
    common(p, gen=True)
    p.set_defaults(func=cmd_ehpf)

    p = sub.add_parser("verify", help="run a named verification suite")
    p.add_argument("--suite", required=True)
    p.add_argument("--replicas", type=int, default=None)
    p.add_argument("--jobs", type=int, default=1)
    common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("export-dot", help="export a hierarchy or tree as DOT")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", dest="outfile", required=True)
    p.set_defaults(func=cmd_export_dot, machine=False, out=None)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if getattr(args, "seed", None) is None:
        args.seed = _default_seed()
    try:
        return args.func(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
