# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernel backend.

Mirrors ``padicband._kernels.pure`` bit for bit: Philox4x32-10 digit
streams, banded row reduction over Z/p^K with unit-column splitting, and
banded rank over F_p.  Restricted to moduli p^K <= 2^32 so that products
stay inside uint64; the dispatcher falls back to the pure backend beyond
that.
"""

import numpy as np

cimport numpy as cnp
from libc.stdint cimport int32_t, int64_t, uint32_t, uint64_t

cnp.import_array()

cdef uint32_t PHILOX_M0 = 0xD2511F53u
cdef uint32_t PHILOX_M1 = 0xCD9E8D57u
cdef uint32_t PHILOX_W0 = 0x9E3779B9u
cdef uint32_t PHILOX_W1 = 0xBB67AE85u


cdef inline void _philox_block(uint32_t k0, uint32_t k1,
                               uint32_t c0, uint32_t c1,
                               uint32_t c2, uint32_t c3,
                               uint32_t* out) noexcept nogil:
    cdef int r
    cdef uint64_t p0, p1
    cdef uint32_t kk0, kk1, n0, n1, n2, n3
    for r in range(10):
        kk0 = k0 + (<uint32_t> r) * PHILOX_W0
        kk1 = k1 + (<uint32_t> r) * PHILOX_W1
        p0 = (<uint64_t> PHILOX_M0) * c0
        p1 = (<uint64_t> PHILOX_M1) * c2
        n0 = (<uint32_t> (p1 >> 32)) ^ c1 ^ kk0
        n1 = <uint32_t> p1
        n2 = (<uint32_t> (p0 >> 32)) ^ c3 ^ kk1
        n3 = <uint32_t> p0
        c0 = n0
        c1 = n1
        c2 = n2
        c3 = n3
    out[0] = c0
    out[1] = c1
    out[2] = c2
    out[3] = c3


cdef inline uint32_t _stream_word(uint64_t seed, uint64_t trial,
                                  uint32_t code, uint32_t widx) noexcept nogil:
    cdef uint32_t out[4]
    _philox_block(<uint32_t> (seed & 0xFFFFFFFFu),
                  <uint32_t> (seed >> 32),
                  <uint32_t> (trial & 0xFFFFFFFFu),
                  <uint32_t> (trial >> 32),
                  code, widx >> 2, out)
    return out[widx & 3u]


cdef uint64_t _entry_value(uint64_t seed, uint64_t trial, int i, int j,
                           uint64_t p, int K) noexcept nogil:
    cdef uint32_t code = (<uint32_t> ((i - 1) << 16)) | (<uint32_t> (j - 1))
    cdef uint64_t value = 0, scale = 1
    cdef uint32_t word, limit, cursor = 0
    cdef int d
    if p == 2:
        word = _stream_word(seed, trial, code, 0)
        if K >= 32:
            return <uint64_t> word
        return (<uint64_t> word) & ((<uint64_t> 1 << K) - 1)
    limit = <uint32_t> (0x100000000u - (0x100000000u % p))
    for d in range(K):
        while True:
            word = _stream_word(seed, trial, code, cursor)
            cursor += 1
            if word < limit:
                break
        value += (<uint64_t> (word % (<uint32_t> p))) * scale
        scale *= p
    return value


def philox4x32(k0, k1, c0, c1, c2, c3):
    cdef uint32_t out[4]
    _philox_block(<uint32_t> k0, <uint32_t> k1, <uint32_t> c0,
                  <uint32_t> c1, <uint32_t> c2, <uint32_t> c3, out)
    return out[0], out[1], out[2], out[3]


def sample_band(seed, trial, int n, int w, p, int K):
    """In-band residues mod p^K (p^K <= 2^32), row-major uint64 array."""
    cdef uint64_t s = seed, t = trial, pp = p
    cdef int i, j, lo, hi
    cdef Py_ssize_t count = 0, pos = 0
    for i in range(1, n + 1):
        lo = i - w if i - w > 1 else 1
        hi = i + w if i + w < n else n
        count += hi - lo + 1
    out_arr = np.empty(count, dtype=np.uint64)
    cdef uint64_t[::1] out = out_arr
    with nogil:
        for i in range(1, n + 1):
            lo = i - w if i - w > 1 else 1
            hi = i + w if i + w < n else n
            for j in range(lo, hi + 1):
                out[pos] = _entry_value(s, t, i, j, pp, K)
                pos += 1
    return out_arr


cdef inline int _valuation(uint64_t value, uint64_t p, int cap) noexcept nogil:
    cdef int v = 0
    if value == 0:
        return cap
    while value % p == 0 and v < cap:
        value = value // p
        v += 1
    return v


cdef inline uint64_t _inv_mod(uint64_t a, uint64_t mod) noexcept nogil:
    # extended Euclid; a is a unit and mod <= 2^32, so int64 is safe
    cdef int64_t t = 0, newt = 1, r = <int64_t> mod, newr = <int64_t> (a % mod)
    cdef int64_t q, tmp
    while newr != 0:
        q = r / newr
        tmp = t - q * newt
        t = newt
        newt = tmp
        tmp = r - q * newr
        r = newr
        newr = tmp
    if t < 0:
        t += <int64_t> mod
    return <uint64_t> t


cdef _echelon_core(uint64_t[::1] rowbuf, int32_t[:, ::1] meta, int n, int w,
                   uint64_t p, int K, uint64_t mod,
                   int32_t[::1] bucket, int32_t[::1] nxt,
                   int32_t[::1] piv_idx, int32_t[::1] piv_val,
                   uint64_t[::1] piv_uinv):
    """Shared banded row reduction.  meta[i] = (start_col or -1).

    rowbuf holds n rows of fixed width 2w+1, row i aligned at meta[i, 0].
    Buckets are singly-linked lists per column.  Fills piv_idx/piv_val and
    piv_uinv per column (piv_val == K means no pivot).
    """
    cdef int width = 2 * w + 1
    cdef int c, ridx, best, best_v, v, lead, t, cur
    cdef uint64_t pv, uinv, m, b
    cdef uint64_t* base
    cdef uint64_t* prow
    with nogil:
        for c in range(1, n + 1):
            cur = bucket[c]
            if cur == -1:
                continue
            # pick the minimum-valuation candidate, tie-break smallest index
            best = -1
            best_v = K + 1
            ridx = cur
            while ridx != -1:
                v = _valuation(rowbuf[ridx * width], p, K)
                if v < best_v or (v == best_v and ridx < best):
                    best_v = v
                    best = ridx
                ridx = nxt[ridx]
            pv = 1
            for t in range(best_v):
                pv *= p
            uinv = _inv_mod(rowbuf[best * width] / pv, mod)
            piv_idx[c] = best
            piv_val[c] = best_v
            piv_uinv[c] = uinv
            prow = &rowbuf[best * width]
            ridx = cur
            while ridx != -1:
                if ridx == best:
                    ridx = nxt[ridx]
                    continue
                base = &rowbuf[ridx * width]
                b = base[0]
                m = ((b / pv) * uinv) % mod
                for t in range(width):
                    base[t] = (base[t] + mod - (m * prow[t]) % mod) % mod
                lead = 0
                while lead < width and base[lead] == 0:
                    lead += 1
                cur = nxt[ridx]  # save before relinking
                if lead < width:
                    if lead:
                        for t in range(width - lead):
                            base[t] = base[t + lead]
                        for t in range(width - lead, width):
                            base[t] = 0
                    meta[ridx, 0] = c + lead
                    nxt[ridx] = bucket[c + lead]
                    bucket[c + lead] = ridx
                else:
                    meta[ridx, 0] = -1
                ridx = cur


def band_echelon_residual(cnp.ndarray[cnp.uint64_t, ndim=1] entries,
                          int n, int w, p_in, int K):
    """(unit_count, residual block) for explicit band entries over Z/p^K."""
    cdef uint64_t p = p_in
    cdef uint64_t mod = 1
    cdef int t
    for t in range(K):
        mod *= p
    cdef int width = 2 * w + 1

    rowbuf_arr = np.zeros(n * width, dtype=np.uint64)
    meta_arr = np.full((n, 1), -1, dtype=np.int32)
    bucket_arr = np.full(n + 2 * w + 3, -1, dtype=np.int32)
    nxt_arr = np.full(n, -1, dtype=np.int32)
    piv_idx_arr = np.full(n + 1, -1, dtype=np.int32)
    piv_val_arr = np.full(n + 1, K, dtype=np.int32)
    piv_uinv_arr = np.zeros(n + 1, dtype=np.uint64)

    cdef uint64_t[::1] rowbuf = rowbuf_arr
    cdef int32_t[:, ::1] meta = meta_arr
    cdef int32_t[::1] bucket = bucket_arr
    cdef int32_t[::1] nxt = nxt_arr
    cdef int32_t[::1] piv_idx = piv_idx_arr
    cdef int32_t[::1] piv_val = piv_val_arr
    cdef uint64_t[::1] piv_uinv = piv_uinv_arr
    cdef uint64_t[::1] vals = entries

    cdef int i, lo, hi, lead, cnt
    cdef Py_ssize_t pos = 0
    for i in range(1, n + 1):
        lo = i - w if i - w > 1 else 1
        hi = i + w if i + w < n else n
        cnt = hi - lo + 1
        lead = 0
        while lead < cnt and vals[pos + lead] % mod == 0:
            lead += 1
        if lead < cnt:
            for t in range(cnt - lead):
                rowbuf[(i - 1) * width + t] = vals[pos + lead + t] % mod
            meta[i - 1, 0] = lo + lead
            nxt[i - 1] = bucket[lo + lead]
            bucket[lo + lead] = i - 1
        pos += cnt

    _echelon_core(rowbuf, meta, n, w, p, K, mod, bucket, nxt,
                  piv_idx, piv_val, piv_uinv)
    return _extract_residual(rowbuf, n, w, p, K, mod, piv_idx, piv_val, piv_uinv)


cdef _extract_residual(uint64_t[::1] rowbuf, int n, int w, uint64_t p, int K,
                       uint64_t mod, int32_t[::1] piv_idx,
                       int32_t[::1] piv_val, uint64_t[::1] piv_uinv):
    cdef int width = 2 * w + 1
    cdef int units = 0, r = 0
    cdef int c, t, j, k, row_out
    for c in range(1, n + 1):
        if piv_val[c] == 0:
            units += 1
    r = n - units
    res_arr = np.zeros((r, r), dtype=np.uint64)
    if r == 0:
        return units, res_arr
    cdef uint64_t[:, ::1] res = res_arr
    col_pos_arr = np.zeros(n + 1, dtype=np.int32)
    cdef int32_t[::1] col_pos = col_pos_arr
    k = 0
    for c in range(1, n + 1):
        if piv_val[c] != 0:
            col_pos[c] = k
            k += 1
        else:
            col_pos[c] = -1
    vec_arr = np.zeros(n + 2, dtype=np.uint64)
    cdef uint64_t[::1] vec = vec_arr
    cdef uint64_t m
    cdef uint64_t* prow
    with nogil:
        for c in range(1, n + 1):
            if piv_val[c] == 0 or piv_idx[c] == -1:
                continue
            row_out = col_pos[c]
            for j in range(n + 2):
                vec[j] = 0
            prow = &rowbuf[piv_idx[c] * width]
            for t in range(width):
                if c + t <= n:
                    vec[c + t] = prow[t]
            for j in range(c + 1, n + 1):
                if vec[j] != 0 and piv_val[j] == 0:
                    m = (vec[j] * piv_uinv[j]) % mod
                    prow = &rowbuf[piv_idx[j] * width]
                    for t in range(width):
                        if j + t <= n:
                            vec[j + t] = (vec[j + t] + mod - (m * prow[t]) % mod) % mod
            for j in range(1, n + 1):
                if col_pos[j] >= 0:
                    res[row_out, col_pos[j]] = vec[j]
    return units, res_arr


def band_cok_residual_trial(seed, trial, int n, int w, p_in, int K):
    """Fused sample + reduce for one (seed, trial): (units, residual block)."""
    entries = sample_band(seed, trial, n, w, p_in, K)
    return band_echelon_residual(entries, n, w, p_in, K)


def band_fp_rank_region_trial(seed, trial, int n, int w, p_in,
                              int r0, int r1, int c0, int c1):
    """Rank mod p of the (r0..r1) x (c0..c1) slice of the sampled band."""
    cdef uint64_t s = seed, t_ = trial, p = p_in
    cdef int width = 2 * w + 1
    cdef int nrows = r1 - r0 + 1
    cdef int ncols_hi = c1 + 2 * w + 3

    rowbuf_arr = np.zeros(nrows * width, dtype=np.uint64)
    bucket_arr = np.full(ncols_hi, -1, dtype=np.int32)
    nxt_arr = np.full(nrows, -1, dtype=np.int32)
    cdef uint64_t[::1] rowbuf = rowbuf_arr
    cdef int32_t[::1] bucket = bucket_arr
    cdef int32_t[::1] nxt = nxt_arr

    cdef int i, j, lo, hi, lead, cnt, ri, c, cur, best, ridx, t, rank = 0
    cdef uint64_t uinv, m
    cdef uint64_t* base
    cdef uint64_t* prow
    with nogil:
        for i in range(r0, r1 + 1):
            ri = i - r0
            lo = i - w if i - w > c0 else c0
            hi = i + w if i + w < c1 else c1
            if lo > hi:
                continue
            cnt = hi - lo + 1
            lead = 0
            j = 0
            for t in range(cnt):
                rowbuf[ri * width + t] = _entry_value(s, t_, i, lo + t, p, 1)
            while lead < cnt and rowbuf[ri * width + lead] == 0:
                lead += 1
            if lead < cnt:
                if lead:
                    for t in range(cnt - lead):
                        rowbuf[ri * width + t] = rowbuf[ri * width + t + lead]
                    for t in range(cnt - lead, width):
                        rowbuf[ri * width + t] = 0
                nxt[ri] = bucket[lo + lead]
                bucket[lo + lead] = ri

        for c in range(c0, c1 + 1):
            cur = bucket[c]
            if cur == -1:
                continue
            best = cur  # any unit pivot works over F_p
            rank += 1
            uinv = _inv_mod(rowbuf[best * width], p)
            prow = &rowbuf[best * width]
            ridx = cur
            while ridx != -1:
                if ridx == best:
                    ridx = nxt[ridx]
                    continue
                base = &rowbuf[ridx * width]
                m = (base[0] * uinv) % p
                for t in range(width):
                    base[t] = (base[t] + p - (m * prow[t]) % p) % p
                lead = 0
                while lead < width and base[lead] == 0:
                    lead += 1
                cur = nxt[ridx]
                if lead < width:
                    if lead:
                        for t in range(width - lead):
                            base[t] = base[t + lead]
                        for t in range(width - lead, width):
                            base[t] = 0
                    nxt[ridx] = bucket[c + lead]
                    bucket[c + lead] = ridx
                ridx = cur
    return rank
