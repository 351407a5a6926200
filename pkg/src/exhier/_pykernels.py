"""Pure-Python Monte Carlo kernels.

Same algorithms and random streams as the compiled extension; selected at
import time when the extension is unavailable (or EXHIER_PURE is set).
Fingerprints pack the nontrivial block masks of a hierarchy on up to 8
labels into a uint64, most-significant block first.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"

_M64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
OVERFLOW = _M64  # sentinel fingerprint: per-replica buffers exceeded

DY, BROOM, COMB = 0, 1, 2


def _mix(z):
    z &= _M64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
    return z ^ (z >> 31)


def _stream_init(seed, replica):
    return _mix((seed & _M64) ^ ((replica + 1) * _GOLDEN & _M64))


def _next(state):
    state = (state + _GOLDEN) & _M64
    return state, _mix(state)


def _to_double(x):
    return (x >> 11) * 2.0 ** -53


def _cpl(a, b, depth):
    x = a ^ b
    return depth if x == 0 else depth - x.bit_length()


def _pack(masks, full):
    blocks = sorted((m for m in set(masks)
                     if m != full and bin(m).count("1") >= 2), reverse=True)
    if len(blocks) > 8:
        return OVERFLOW
    fp = 0
    for i, m in enumerate(blocks):
        fp |= m << (8 * i)
    return fp


def unpack(fp, n):
    """Inverse of the block packing; returns the nontrivial masks."""
    if fp == OVERFLOW:
        raise ValueError("overflowed fingerprint")
    out = []
    while fp:
        out.append(fp & 0xFF)
        fp >>= 8
    return out


# -- label drawing -------------------------------------------------------------


def _draw_regime_label(state, depth, p_dy, p_broom):
    state, a = _next(state)
    state, b = _next(state)
    u = _to_double(a)
    if u < p_dy:
        return state, (DY, b >> (64 - depth) if depth else 0, 0.0)
    if u < p_dy + p_broom:
        return state, (BROOM, 0, 0.0)
    return state, (COMB, 0, _to_double(b))


def _draw_wtree_path(state, first_child, n_children, cum_off, cum_val):
    path = []
    node = 0
    while True:
        k = n_children[node]
        if k == 0 or len(path) >= 64:
            return state, path
        state, a = _next(state)
        u = _to_double(a)
        off = cum_off[node]
        child = -1
        for c in range(k):
            if u < cum_val[off + c]:
                child = c
                break
        if child < 0:
            return state, path  # retained mass: stop at this cell's atom
        node = first_child[node] + child
        path.append(node)


# -- direct sampling -------------------------------------------------------------


def _regime_blocks(labels, depth, pure_comb):
    n = len(labels)
    masks = []
    for r in (DY, BROOM, COMB):
        m = 0
        for j in range(n):
            if labels[j][0] == r:
                m |= 1 << j
        masks.append(m)
    out = list(masks)
    dy = [j for j in range(n) if labels[j][0] == DY]
    for ai in range(len(dy)):
        for bi in range(ai + 1, len(dy)):
            u, v = dy[ai], dy[bi]
            c = _cpl(labels[u][1], labels[v][1], depth)
            if c > 0:
                m = 0
                pref = labels[u][1] >> (depth - c)
                for j in dy:
                    if labels[j][1] >> (depth - c) == pref:
                        m |= 1 << j
                out.append(m)
    comb = sorted((j for j in range(n) if labels[j][0] == COMB),
                  key=lambda j: labels[j][2], reverse=pure_comb)
    m = 0
    for j in comb:  # nested level sets, innermost first
        m |= 1 << j
        out.append(m)
    return out


def sample_fingerprints(params, n, replicas, seed):
    if n > 8:
        raise ValueError("fingerprint kernels support n <= 8")
    out = np.empty(replicas, dtype=np.uint64)
    full = (1 << n) - 1
    kind = params[0]
    if kind == "regime":
        _, depth, p_dy, p_broom, p_comb = params
        pure_comb = p_comb >= 1.0
        for r in range(replicas):
            state = _stream_init(seed, r)
            labels = []
            for _ in range(n):
                state, lab = _draw_regime_label(state, depth, p_dy, p_broom)
                labels.append(lab)
            out[r] = _pack(_regime_blocks(labels, depth, pure_comb), full)
        return out
    if kind == "wtree":
        _, first_child, n_children, cum_off, cum_val = params
        for r in range(replicas):
            state = _stream_init(seed, r)
            paths = []
            for _ in range(n):
                state, path = _draw_wtree_path(
                    state, first_child, n_children, cum_off, cum_val)
                paths.append(path)
            masks = []
            for u in range(n):
                for v in range(u + 1, n):
                    d = 0
                    while (d < len(paths[u]) and d < len(paths[v])
                           and paths[u][d] == paths[v][d]):
                        d += 1
                    if d > 0:
                        node = paths[u][d - 1]
                        m = 0
                        for j in range(n):
                            if len(paths[j]) >= d and paths[j][d - 1] == node:
                                m |= 1 << j
                        masks.append(m)
            out[r] = _pack(masks, full)
        return out
    raise ValueError(f"unknown kernel params {kind!r}")


# -- exact reconstruction pipeline -------------------------------------------------


def _xval(spine, sample, depth, p_dy, p_comb):
    """Spinal value proxy: 1 - (MRCA cell measure), comparable and collision
    free along any single chain."""
    rs, bs, ps = spine
    rj, bj, pj = sample
    if rs != rj:
        return 0.0
    if rs == DY:
        c = _cpl(bs, bj, depth)
        if p_dy >= 1.0:
            return 1.0 - 2.0 ** -c
        return 1.0 - 2.0 ** -c / 3.0
    if rs == BROOM:
        return 2.0 / 3.0
    if p_comb >= 1.0:
        return min(ps, pj)
    return 1.0 - max(ps, pj) / 3.0


def _pair_resolved(spine, u, v, depth, pure_comb):
    ru, bu, pu = u
    rv, bv, pv = v
    rs, bs, ps = spine
    if ru != rv:
        return True  # the MRCA is the whole space
    if ru == DY:
        need = _cpl(bu, bv, depth)
        return rs == DY and _cpl(bs, bu, depth) >= need
    if ru == BROOM:
        return rs == BROOM
    if rs != COMB:
        return False
    if pure_comb:
        return ps >= min(pu, pv)
    return ps <= max(pu, pv)


def reconstruct_fingerprints(params, n, replicas, seed, batch=16, cap=1 << 21):
    """Per replica: draw n samples, grow the spine set until every pairwise
    MRCA holds a spine, build the spinal profiles, and fingerprint the
    hierarchy derived from the resulting tree."""
    if params[0] != "regime":
        raise ValueError("reconstruction kernel needs a regime generator")
    if n > 8:
        raise ValueError("fingerprint kernels support n <= 8")
    _, depth, p_dy, p_broom, p_comb = params
    pure_comb = p_comb >= 1.0
    out = np.empty(replicas, dtype=np.uint64)
    full = (1 << n) - 1
    for r in range(replicas):
        state = _stream_init(seed, r)
        samples = []
        for _ in range(n):
            state, lab = _draw_regime_label(state, depth, p_dy, p_broom)
            samples.append(lab)
        unresolved = [(u, v) for u in range(n) for v in range(u + 1, n)]
        prof_spine = [[] for _ in range(n)]
        prof_x = [[] for _ in range(n)]
        cur = [0.0] * n
        spines = 0
        failed = False
        while unresolved:
            if spines >= cap:
                failed = True
                break
            state, sp = _draw_regime_label(state, depth, p_dy, p_broom)
            spines += 1
            for j in range(n):
                x = _xval(sp, samples[j], depth, p_dy, p_comb)
                if x > cur[j]:
                    if len(prof_spine[j]) >= 64:
                        failed = True
                        break
                    prof_spine[j].append(spines)
                    prof_x[j].append(x)
                    cur[j] = x
            if failed:
                break
            unresolved = [(u, v) for u, v in unresolved
                          if not _pair_resolved(sp, samples[u], samples[v],
                                                depth, pure_comb)]
        if failed:
            out[r] = OVERFLOW
            continue
        out[r] = _pack(_profile_blocks(prof_spine, prof_x, n), full)
    return out


def _profile_blocks(prof_spine, prof_x, n):
    lens = [len(p) for p in prof_spine]
    cpl = [[0] * n for _ in range(n)]
    for u in range(n):
        for v in range(u + 1, n):
            d = 0
            lim = min(lens[u], lens[v])
            while (d < lim and prof_spine[u][d] == prof_spine[v][d]
                   and prof_x[u][d] == prof_x[v][d]):
                d += 1
            cpl[u][v] = cpl[v][u] = d
    masks = []
    for u in range(n):
        for v in range(u, n):
            c = cpl[u][v] if u != v else lens[u]
            if c == lens[u] or c == lens[v]:
                # one point sits on the other's path; block at the lower point
                ref, p = (u, lens[u]) if lens[u] <= lens[v] else (v, lens[v])
                if p == 0:
                    continue
                s = prof_spine[ref][p - 1]
                thresh = prof_x[ref][p - 1]
            elif prof_spine[u][c] == prof_spine[v][c]:
                ref, p = u, c + 1
                s = prof_spine[u][c]
                thresh = min(prof_x[u][c], prof_x[v][c])
            else:
                if c == 0:
                    continue
                ref, p = u, c
                s = prof_spine[u][c - 1]
                thresh = prof_x[u][c - 1]
            m = 0
            for j in range(n):
                d = cpl[ref][j] if j != ref else lens[ref]
                if (d >= p - 1 and lens[j] >= p and prof_spine[j][p - 1] == s
                        and prof_x[j][p - 1] >= thresh):
                    m |= 1 << j
            masks.append(m)
    return masks
