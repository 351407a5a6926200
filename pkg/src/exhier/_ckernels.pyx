# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled Monte Carlo kernels; mirrors _pykernels bit for bit."""

import numpy as np

from libc.math cimport ldexp

BACKEND = "cython"

DEF MAXN = 8
DEF MAXPROF = 64
DEF MAXMASKS = 96

cdef unsigned long long GOLDEN = 0x9E3779B97F4A7C15ULL
cdef unsigned long long OVERFLOW = 0xFFFFFFFFFFFFFFFFULL

cdef int DY = 0, BROOM = 1, COMB = 2


cdef inline unsigned long long _mix(unsigned long long z) nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline unsigned long long _stream_init(unsigned long long seed,
                                            unsigned long long replica) nogil:
    return _mix(seed ^ ((replica + 1) * GOLDEN))


cdef inline unsigned long long _nxt(unsigned long long *state) nogil:
    state[0] = state[0] + GOLDEN
    return _mix(state[0])


cdef inline double _dbl(unsigned long long x) nogil:
    return (x >> 11) * (1.0 / 9007199254740992.0)


cdef inline int _bitlen(unsigned long long x) nogil:
    cdef int n = 0
    while x:
        x >>= 1
        n += 1
    return n


cdef inline int _cpl(unsigned long long a, unsigned long long b, int depth) nogil:
    cdef unsigned long long x = a ^ b
    if x == 0:
        return depth
    return depth - _bitlen(x)


cdef inline void _draw_label(unsigned long long *state, int depth, double p_dy,
                             double p_broom, int *reg, unsigned long long *bits,
                             double *pos) nogil:
    cdef unsigned long long a = _nxt(state)
    cdef unsigned long long b = _nxt(state)
    cdef double u = _dbl(a)
    reg[0] = DY
    bits[0] = 0
    pos[0] = 0.0
    if u < p_dy:
        if depth:
            bits[0] = b >> (64 - depth)
    elif u < p_dy + p_broom:
        reg[0] = BROOM
    else:
        reg[0] = COMB
        pos[0] = _dbl(b)


cdef unsigned long long _pack(unsigned char *masks, int count, int full) nogil:
    cdef unsigned char uniq[MAXMASKS]
    cdef int nu = 0, i, j, bits
    cdef unsigned char m
    cdef bint seen
    for i in range(count):
        m = masks[i]
        if m == <unsigned char> full:
            continue
        bits = 0
        j = m
        while j:
            bits += j & 1
            j >>= 1
        if bits < 2:
            continue
        seen = False
        for j in range(nu):
            if uniq[j] == m:
                seen = True
                break
        if not seen:
            if nu >= MAXMASKS:
                return OVERFLOW
            uniq[nu] = m
            nu += 1
    if nu > 8:
        return OVERFLOW
    # insertion sort descending
    cdef unsigned char key
    for i in range(1, nu):
        key = uniq[i]
        j = i - 1
        while j >= 0 and uniq[j] < key:
            uniq[j + 1] = uniq[j]
            j -= 1
        uniq[j + 1] = key
    cdef unsigned long long fp = 0
    for i in range(nu):
        fp |= (<unsigned long long> uniq[i]) << (8 * i)
    return fp


cdef int _regime_blocks(int n, int *reg, unsigned long long *bits, double *pos,
                        int depth, bint pure_comb, unsigned char *masks) nogil:
    cdef int count = 0, r, j, u, v, c, k
    cdef unsigned char m
    cdef unsigned long long pref
    for r in range(3):
        m = 0
        for j in range(n):
            if reg[j] == r:
                m |= <unsigned char> (1 << j)
        masks[count] = m
        count += 1
    # dyadic cells from pairwise prefixes
    for u in range(n):
        if reg[u] != DY:
            continue
        for v in range(u + 1, n):
            if reg[v] != DY:
                continue
            c = _cpl(bits[u], bits[v], depth)
            if c > 0:
                pref = bits[u] >> (depth - c)
                m = 0
                for j in range(n):
                    if reg[j] == DY and (bits[j] >> (depth - c)) == pref:
                        m |= <unsigned char> (1 << j)
                masks[count] = m
                count += 1
    # comb level sets, innermost first
    cdef int order[MAXN]
    cdef int nc = 0, t
    for j in range(n):
        if reg[j] == COMB:
            order[nc] = j
            nc += 1
    for u in range(1, nc):  # insertion sort by position
        k = order[u]
        t = u - 1
        while t >= 0 and pos[order[t]] > pos[k]:
            order[t + 1] = order[t]
            t -= 1
        order[t + 1] = k
    m = 0
    if pure_comb:
        for u in range(nc - 1, -1, -1):
            m |= <unsigned char> (1 << order[u])
            masks[count] = m
            count += 1
    else:
        for u in range(nc):
            m |= <unsigned char> (1 << order[u])
            masks[count] = m
            count += 1
    return count


def sample_fingerprints(params, int n, long long replicas, unsigned long long seed):
    if n > MAXN:
        raise ValueError("fingerprint kernels support n <= 8")
    out = np.empty(replicas, dtype=np.uint64)
    cdef unsigned long long[:] ov = out
    kind = params[0]
    if kind == "regime":
        _sample_regime(params, n, replicas, seed, ov)
        return out
    if kind == "wtree":
        _sample_wtree(params, n, replicas, seed, ov)
        return out
    raise ValueError(f"unknown kernel params {kind!r}")


cdef void _sample_regime(params, int n, long long replicas,
                         unsigned long long seed, unsigned long long[:] ov):
    cdef int depth = params[1]
    cdef double p_dy = params[2], p_broom = params[3], p_comb = params[4]
    cdef bint pure_comb = p_comb >= 1.0
    cdef int full = (1 << n) - 1
    cdef unsigned long long state
    cdef long long r
    cdef int j, count
    cdef int reg[MAXN]
    cdef unsigned long long bits[MAXN]
    cdef double pos[MAXN]
    cdef unsigned char masks[MAXMASKS]
    for r in range(replicas):
        state = _stream_init(seed, <unsigned long long> r)
        for j in range(n):
            _draw_label(&state, depth, p_dy, p_broom, &reg[j], &bits[j], &pos[j])
        count = _regime_blocks(n, reg, bits, pos, depth, pure_comb, masks)
        ov[r] = _pack(masks, count, full)


cdef void _sample_wtree(params, int n, long long replicas,
                        unsigned long long seed, unsigned long long[:] ov):
    cdef long long[:] first_child = params[1]
    cdef long long[:] n_children = params[2]
    cdef long long[:] cum_off = params[3]
    cdef double[:] cum_val = params[4]
    cdef int full = (1 << n) - 1
    cdef unsigned long long state
    cdef long long r
    cdef int j, u, v, d, lim, count
    cdef long long node
    cdef long long paths[MAXN][MAXPROF]
    cdef int plen[MAXN]
    cdef unsigned char masks[MAXMASKS]
    cdef unsigned char m
    cdef long long common
    for r in range(replicas):
        state = _stream_init(seed, <unsigned long long> r)
        for j in range(n):
            plen[j] = _walk_wtree(&state, first_child, n_children, cum_off,
                                  cum_val, paths[j])
        count = 0
        for u in range(n):
            for v in range(u + 1, n):
                lim = plen[u] if plen[u] < plen[v] else plen[v]
                d = 0
                while d < lim and paths[u][d] == paths[v][d]:
                    d += 1
                if d > 0:
                    common = paths[u][d - 1]
                    m = 0
                    for j in range(n):
                        if plen[j] >= d and paths[j][d - 1] == common:
                            m |= <unsigned char> (1 << j)
                    if count < MAXMASKS:
                        masks[count] = m
                        count += 1
        ov[r] = _pack(masks, count, full)


cdef int _walk_wtree(unsigned long long *state, long long[:] first_child,
                     long long[:] n_children, long long[:] cum_off,
                     double[:] cum_val, long long *path) nogil:
    cdef long long node = 0
    cdef int depth = 0
    cdef long long k, off
    cdef int c, child
    cdef double u
    while True:
        k = n_children[node]
        if k == 0 or depth >= MAXPROF:
            return depth
        u = _dbl(_nxt(state))
        off = cum_off[node]
        child = -1
        for c in range(k):
            if u < cum_val[off + c]:
                child = c
                break
        if child < 0:
            return depth
        node = first_child[node] + child
        path[depth] = node
        depth += 1


# -- exact reconstruction ---------------------------------------------------------


cdef inline double _xval(int rs, unsigned long long bs, double ps,
                         int rj, unsigned long long bj, double pj,
                         int depth, double p_dy, double p_comb) nogil:
    cdef int c
    if rs != rj:
        return 0.0
    if rs == DY:
        c = _cpl(bs, bj, depth)
        if p_dy >= 1.0:
            return 1.0 - ldexp(1.0, -c)
        return 1.0 - ldexp(1.0, -c) / 3.0
    if rs == BROOM:
        return 2.0 / 3.0
    if p_comb >= 1.0:
        return ps if ps < pj else pj
    return 1.0 - (ps if ps > pj else pj) / 3.0


cdef inline bint _pair_resolved(int rs, unsigned long long bs, double ps,
                                int ru, unsigned long long bu, double pu,
                                int rv, unsigned long long bv, double pv,
                                int depth, bint pure_comb) nogil:
    cdef int need
    if ru != rv:
        return True
    if ru == DY:
        need = _cpl(bu, bv, depth)
        return rs == DY and _cpl(bs, bu, depth) >= need
    if ru == BROOM:
        return rs == BROOM
    if rs != COMB:
        return False
    if pure_comb:
        return ps >= (pu if pu < pv else pv)
    return ps <= (pu if pu > pv else pv)


def reconstruct_fingerprints(params, int n, long long replicas,
                             unsigned long long seed, int batch=16,
                             long long cap=(1 << 21)):
    if params[0] != "regime":
        raise ValueError("reconstruction kernel needs a regime generator")
    if n > MAXN:
        raise ValueError("fingerprint kernels support n <= 8")
    out = np.empty(replicas, dtype=np.uint64)
    cdef unsigned long long[:] ov = out
    cdef int depth = params[1]
    cdef double p_dy = params[2], p_broom = params[3], p_comb = params[4]
    cdef bint pure_comb = p_comb >= 1.0
    cdef int full = (1 << n) - 1
    cdef unsigned long long state
    cdef long long r, spines
    cdef int j, u, v, npairs, w, count
    cdef int reg[MAXN]
    cdef unsigned long long bits[MAXN]
    cdef double pos[MAXN]
    cdef int sreg
    cdef unsigned long long sbits
    cdef double spos, x
    cdef int pa[28]
    cdef int pb[28]
    cdef int prof_spine[MAXN][MAXPROF]
    cdef double prof_x[MAXN][MAXPROF]
    cdef int plen[MAXN]
    cdef double cur[MAXN]
    cdef bint failed
    cdef unsigned char masks[MAXMASKS]
    for r in range(replicas):
        state = _stream_init(seed, <unsigned long long> r)
        for j in range(n):
            _draw_label(&state, depth, p_dy, p_broom, &reg[j], &bits[j], &pos[j])
        npairs = 0
        for u in range(n):
            for v in range(u + 1, n):
                pa[npairs] = u
                pb[npairs] = v
                npairs += 1
        for j in range(n):
            plen[j] = 0
            cur[j] = 0.0
        spines = 0
        failed = False
        while npairs > 0:
            if spines >= cap:
                failed = True
                break
            _draw_label(&state, depth, p_dy, p_broom, &sreg, &sbits, &spos)
            spines += 1
            for j in range(n):
                x = _xval(sreg, sbits, spos, reg[j], bits[j], pos[j],
                          depth, p_dy, p_comb)
                if x > cur[j]:
                    if plen[j] >= MAXPROF:
                        failed = True
                        break
                    prof_spine[j][plen[j]] = <int> spines
                    prof_x[j][plen[j]] = x
                    plen[j] += 1
                    cur[j] = x
            if failed:
                break
            w = 0
            for j in range(npairs):
                u = pa[j]
                v = pb[j]
                if not _pair_resolved(sreg, sbits, spos, reg[u], bits[u], pos[u],
                                      reg[v], bits[v], pos[v], depth, pure_comb):
                    pa[w] = u
                    pb[w] = v
                    w += 1
            npairs = w
        if failed:
            ov[r] = OVERFLOW
            continue
        count = _profile_blocks(n, prof_spine, prof_x, plen, masks)
        ov[r] = _pack(masks, count, full)
    return out


cdef int _profile_blocks(int n, int prof_spine[MAXN][MAXPROF],
                         double prof_x[MAXN][MAXPROF], int *plen,
                         unsigned char *masks) nogil:
    cdef int cpl[MAXN][MAXN]
    cdef int u, v, d, lim, count, j, p, s, ref
    cdef double thresh
    cdef unsigned char m
    for u in range(n):
        cpl[u][u] = plen[u]
        for v in range(u + 1, n):
            lim = plen[u] if plen[u] < plen[v] else plen[v]
            d = 0
            while (d < lim and prof_spine[u][d] == prof_spine[v][d]
                   and prof_x[u][d] == prof_x[v][d]):
                d += 1
            cpl[u][v] = d
            cpl[v][u] = d
    count = 0
    for u in range(n):
        for v in range(u, n):
            d = cpl[u][v]
            if d == plen[u] or d == plen[v]:
                ref = u if plen[u] <= plen[v] else v
                p = plen[ref]
                if p == 0:
                    continue
                s = prof_spine[ref][p - 1]
                thresh = prof_x[ref][p - 1]
            elif prof_spine[u][d] == prof_spine[v][d]:
                ref = u
                p = d + 1
                s = prof_spine[u][d]
                thresh = prof_x[u][d] if prof_x[u][d] < prof_x[v][d] else prof_x[v][d]
            else:
                if d == 0:
                    continue
                ref = u
                p = d
                s = prof_spine[u][d - 1]
                thresh = prof_x[u][d - 1]
            m = 0
            for j in range(n):
                if (cpl[ref][j] >= p - 1 and plen[j] >= p
                        and prof_spine[j][p - 1] == s
                        and prof_x[j][p - 1] >= thresh):
                    m |= <unsigned char> (1 << j)
            if count < MAXMASKS:
                masks[count] = m
                count += 1
    return count
