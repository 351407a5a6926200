"""Kernel dispatch: compiled extension when available, pure Python otherwise.

The two implementations share algorithms and random streams, so switching
backends never changes results.  Set EXHIER_PURE=1 to force the fallback.
"""

from __future__ import annotations

import os

import numpy as np

from . import _pykernels

_impl = _pykernels
if not os.environ.get("EXHIER_PURE"):
    try:
        from . import _ckernels as _impl_c

        if hasattr(_impl_c, "sample_fingerprints"):
            _impl = _impl_c
    except ImportError:
        pass

BACKEND = _impl.BACKEND
OVERFLOW = _pykernels.OVERFLOW


def backend_name() -> str:
    return BACKEND


def implementations():
    """All importable kernel implementations, for equivalence tests and
    benchmarks."""
    out = {"python": _pykernels}
    if _impl is not _pykernels:
        out["cython"] = _impl
    return out


# -- parameter encoding ----------------------------------------------------------


def wtree_params(tree):
    """Flatten a weight tree for the kernels: nodes in breadth-first order,
    children contiguous, per-node cumulative child probabilities."""
    from .weights import WeightTree

    assert isinstance(tree, WeightTree)
    nodes = sorted(tree.weights, key=lambda k: (len(k), k))
    if tree.depth > 64:
        raise ValueError("kernel weight trees are limited to depth 64")
    index = {node: i for i, node in enumerate(nodes)}
    first_child = np.zeros(len(nodes), dtype=np.int64)
    n_children = np.zeros(len(nodes), dtype=np.int64)
    cum_off = np.zeros(len(nodes), dtype=np.int64)
    cum_val = []
    for node in nodes:
        i = index[node]
        kids = tree.children(node)
        cum_off[i] = len(cum_val)
        n_children[i] = len(kids)
        if kids:
            first_child[i] = index[kids[0]]
            w = tree.weight(node)
            acc = 0.0
            for c in kids:
                acc += float(tree.weight(c) / w)
                cum_val.append(acc)
    return ("wtree", first_child, n_children, cum_off,
            np.asarray(cum_val, dtype=np.float64))


def params_for(sampler):
    from .weights import WeightTree

    if isinstance(sampler, WeightTree):
        return wtree_params(sampler)
    if isinstance(sampler, tuple):
        return sampler
    return sampler.kernel_params()


# -- batch entry points -------------------------------------------------------------


def sample_fingerprints(sampler, n, replicas, seed, impl=None):
    impl = impl or _impl
    fps = impl.sample_fingerprints(params_for(sampler), n, replicas, seed)
    _check(fps)
    return fps


def reconstruct_fingerprints(sampler, n, replicas, seed, batch=16,
                             cap=1 << 21, impl=None):
    impl = impl or _impl
    fps = impl.reconstruct_fingerprints(params_for(sampler), n, replicas, seed,
                                        batch, cap)
    _check(fps)
    return fps


def _check(fps):
    if np.any(fps == np.uint64(OVERFLOW)):
        raise RuntimeError("kernel replica exceeded its buffers or spine cap")


# -- fingerprint decoding --------------------------------------------------------------


_shape_cache: dict = {}


def fingerprint_hierarchy(fp: int, n: int):
    from .hierarchy import FiniteHierarchy

    return FiniteHierarchy(n, _pykernels.unpack(int(fp), n), validate=False)


def fingerprint_shape(fp: int, n: int):
    key = (int(fp), n)
    if key not in _shape_cache:
        _shape_cache[key] = fingerprint_hierarchy(fp, n).shape()
    return _shape_cache[key]


def _counts(fps, n, decode):
    vals, counts = np.unique(fps, return_counts=True)
    out = {}
    for fp, c in zip(vals, counts):
        k = decode(fp, n)
        out[k] = out.get(k, 0) + int(c)
    return out


def sample_shape_counts(sampler, n, replicas, seed, impl=None):
    fps = sample_fingerprints(sampler, n, replicas, seed, impl=impl)
    return _counts(fps, n, fingerprint_shape)


def reconstruct_shape_counts(sampler, n, replicas, seed, batch=16,
                             cap=1 << 21, impl=None):
    fps = reconstruct_fingerprints(sampler, n, replicas, seed, batch, cap, impl=impl)
    return _counts(fps, n, fingerprint_shape)
