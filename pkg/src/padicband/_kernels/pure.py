"""Pure-Python kernel backend.

This module is the reference semantics for everything the compiled backend
(`padicband._kernels._core`) accelerates.  Both backends must produce
bit-identical results; the parity tests in ``tests/test_kernels_parity.py``
enforce that.

Digit-stream conventions
------------------------

Every matrix entry owns an infinite stream of uniform 32-bit words produced
by the Philox4x32-10 counter-based generator:

* key     = (seed mod 2^32, seed >> 32)
* counter = (trial mod 2^32, trial >> 32, entry_code, block)
* entry_code = ((i - 1) << 16) | (j - 1)  for 1-based indices i, j <= 65536
* word index W lives in block W // 4, lane W % 4.

Base-p digits are extracted from the word stream as follows:

* p == 2: digit d is bit (d % 32) of word (d // 32).
* p odd:  digits are drawn sequentially.  Each draw consumes one word; a
  word is accepted when it is below p * floor(2^32 / p) and yields the
  digit word % p, otherwise the next word is tried.  Rejections are
  astronomically rare but keep the digits exactly uniform.

An entry's residue mod p^K is sum(digit_d * p^d for d < K).  Because word
positions are absolute, sampling the same entry at a higher precision K'
extends the digits without changing the first K of them, which is what
makes precision refinement exact.

Band layout
-----------

Band matrices with width w are passed around as a flat list/array of the
in-band entries in row-major order: row i contributes columns
max(1, i-w) .. min(n, i+w).
"""

from __future__ import annotations

import numpy as np

MASK32 = 0xFFFFFFFF
_PHILOX_M0 = 0xD2511F53
_PHILOX_M1 = 0xCD9E8D57
_PHILOX_W0 = 0x9E3779B9
_PHILOX_W1 = 0xBB67AE85

MAX_INDEX = 1 << 16  # entry_code packs (i-1, j-1) into 16 bits each


def philox4x32(k0: int, k1: int, c0: int, c1: int, c2: int, c3: int):
    """One Philox4x32-10 block: four 32-bit words from a 128-bit counter."""
    for r in range(10):
        kk0 = (k0 + r * _PHILOX_W0) & MASK32
        kk1 = (k1 + r * _PHILOX_W1) & MASK32
        prod0 = _PHILOX_M0 * c0
        prod1 = _PHILOX_M1 * c2
        c0, c1, c2, c3 = (
            ((prod1 >> 32) ^ c1 ^ kk0) & MASK32,
            prod1 & MASK32,
            ((prod0 >> 32) ^ c3 ^ kk1) & MASK32,
            prod0 & MASK32,
        )
    return c0, c1, c2, c3


def entry_code(i: int, j: int) -> int:
    if not (1 <= i <= MAX_INDEX and 1 <= j <= MAX_INDEX):
        raise ValueError(f"matrix indices ({i}, {j}) exceed the sampler limit {MAX_INDEX}")
    return ((i - 1) << 16) | (j - 1)


def stream_word(seed: int, trial: int, code: int, widx: int) -> int:
    """Word ``widx`` of the entry stream (recomputes the enclosing block)."""
    block = philox4x32(
        seed & MASK32,
        (seed >> 32) & MASK32,
        trial & MASK32,
        (trial >> 32) & MASK32,
        code,
        widx >> 2,
    )
    return block[widx & 3]


def entry_value(seed: int, trial: int, i: int, j: int, p: int, K: int) -> int:
    """Residue of entry (i, j) mod p^K, per the digit-stream conventions."""
    code = entry_code(i, j)
    if p == 2:
        value = 0
        nwords = (K + 31) // 32
        for limb in range(nwords):
            value |= stream_word(seed, trial, code, limb) << (32 * limb)
        return value & ((1 << K) - 1)
    limit = (1 << 32) - ((1 << 32) % p)
    value = 0
    scale = 1
    cursor = 0
    for _ in range(K):
        while True:
            word = stream_word(seed, trial, code, cursor)
            cursor += 1
            if word < limit:
                break
        value += (word % p) * scale
        scale *= p
    return value


# ---------------------------------------------------------------------------
# vectorised sampling
# ---------------------------------------------------------------------------


def _philox_words_vec(seed: int, trial: int, codes: np.ndarray, nwords: int) -> np.ndarray:
    """words[m, nwords] (uint32-valued uint64) for each entry code, vectorised."""
    m = codes.shape[0]
    nblocks = (nwords + 3) // 4
    out = np.empty((m, 4 * nblocks), dtype=np.uint64)
    k0 = np.uint64(seed & MASK32)
    k1 = np.uint64((seed >> 32) & MASK32)
    t0 = np.uint64(trial & MASK32)
    t1 = np.uint64((trial >> 32) & MASK32)
    mask = np.uint64(MASK32)
    m0 = np.uint64(_PHILOX_M0)
    m1 = np.uint64(_PHILOX_M1)
    for blk in range(nblocks):
        c0 = np.full(m, t0, dtype=np.uint64)
        c1 = np.full(m, t1, dtype=np.uint64)
        c2 = codes.astype(np.uint64)
        c3 = np.full(m, np.uint64(blk), dtype=np.uint64)
        for r in range(10):
            kk0 = np.uint64((k0 + np.uint64(r) * np.uint64(_PHILOX_W0)) & mask)
            kk1 = np.uint64((k1 + np.uint64(r) * np.uint64(_PHILOX_W1)) & mask)
            prod0 = m0 * c0
            prod1 = m1 * c2
            c0, c1, c2, c3 = (
                ((prod1 >> np.uint64(32)) ^ c1 ^ kk0) & mask,
                prod1 & mask,
                ((prod0 >> np.uint64(32)) ^ c3 ^ kk1) & mask,
                prod0 & mask,
            )
        out[:, 4 * blk + 0] = c0
        out[:, 4 * blk + 1] = c1
        out[:, 4 * blk + 2] = c2
        out[:, 4 * blk + 3] = c3
    return out[:, :nwords]


def band_entry_count(n: int, w: int) -> int:
    return sum(min(n, i + w) - max(1, i - w) + 1 for i in range(1, n + 1))


def band_entry_codes(n: int, w: int) -> np.ndarray:
    """entry_code for every in-band cell, row-major."""
    codes = np.empty(band_entry_count(n, w), dtype=np.uint64)
    pos = 0
    for i in range(1, n + 1):
        lo = max(1, i - w)
        hi = min(n, i + w)
        cnt = hi - lo + 1
        base = (i - 1) << 16
        codes[pos : pos + cnt] = base + np.arange(lo - 1, hi, dtype=np.uint64)
        pos += cnt
    return codes


def _values_from_codes(seed: int, trial: int, codes: np.ndarray, p: int, K: int):
    """Residues mod p^K for each code; list of Python ints."""
    if p == 2:
        nwords = (K + 31) // 32
        words = _philox_words_vec(seed, trial, codes, nwords)
        if K <= 32:
            vals = words[:, 0] & np.uint64((1 << K) - 1)
            return vals.tolist()
        out = []
        topmask = (1 << K) - 1
        rows = words.tolist()
        for row in rows:
            v = 0
            for limb, word in enumerate(row):
                v |= word << (32 * limb)
            out.append(v & topmask)
        return out
    limit = (1 << 32) - ((1 << 32) % p)
    words = _philox_words_vec(seed, trial, codes, K)
    rejected = np.nonzero((words >= np.uint64(limit)).any(axis=1))[0]
    digits = (words % np.uint64(p)).astype(np.int64)
    scales = [p**d for d in range(K)]
    out = []
    for row in digits.tolist():
        v = 0
        for d in range(K):
            v += row[d] * scales[d]
        out.append(v)
    # entries that hit a rejection follow the exact sequential semantics
    for idx in rejected.tolist():
        code = int(codes[idx])
        i = (code >> 16) + 1
        j = (code & 0xFFFF) + 1
        out[idx] = entry_value(seed, trial, i, j, p, K)
    return out


def sample_band(seed: int, trial: int, n: int, w: int, p: int, K: int):
    """All in-band residues mod p^K, row-major, as Python ints."""
    return _values_from_codes(seed, trial, band_entry_codes(n, w), p, K)


# ---------------------------------------------------------------------------
# banded elimination over Z/p^K
# ---------------------------------------------------------------------------


def _valuation(value: int, p: int, cap: int) -> int:
    if value == 0:
        return cap
    v = 0
    while value % p == 0:
        value //= p
        v += 1
    return v


def band_echelon_residual(entries, n: int, w: int, p: int, K: int):
    """Row-reduce a band matrix over Z/p^K and split off the unit part.

    Row operations (swaps and exact multiple subtractions, all unimodular
    mod p^K) bring the matrix to an upper-triangular profile.  Columns whose
    pivot is a unit contribute elementary divisor p^0 and are eliminated
    from the remaining rows by back-substitution, leaving a small dense
    residual block with the same cokernel as the input.

    Returns (unit_count, residual) where residual is an r x r list-of-lists
    over Z/p^K, r = n - unit_count.  The multiset of elementary-divisor
    valuations of the input is {0} * unit_count + snf(residual).
    """
    mod = p**K
    width = 2 * w + 1

    # rows stored as (original_index, start_col, values[start..start+width))
    buckets: dict[int, list[int]] = {}
    starts = [0] * n
    rows: list[list[int]] = []
    pos = 0
    for i in range(1, n + 1):
        lo = max(1, i - w)
        hi = min(n, i + w)
        vals = [0] * width
        for c in range(lo, hi + 1):
            vals[c - lo] = entries[pos]
            pos += 1
        lead = 0
        while lead < width and vals[lead] == 0:
            lead += 1
        if lead == width:
            continue  # zero row at this precision
        if lead:
            vals = vals[lead:] + [0] * lead
        starts[i - 1] = lo + lead
        rows.append(vals)
        buckets.setdefault(lo + lead, []).append(len(rows) - 1)

    pivot_row: list = [None] * (n + 1)  # column -> row values (aligned at column)
    pivot_val = [K] * (n + 1)  # K marks "no pivot / zero column"
    pivot_uinv = [0] * (n + 1)

    for c in range(1, n + 1):
        cand = buckets.pop(c, None)
        if not cand:
            continue
        best = -1
        best_v = K + 1
        for ridx in cand:
            v = _valuation(rows[ridx][0], p, K)
            if v < best_v:
                best_v = v
                best = ridx
                if v == 0:
                    break
        pivot = rows[best]
        pivot_val[c] = best_v
        pivot_row[c] = pivot
        scaled = pivot[0] // p**best_v
        uinv = pow(scaled, -1, mod)
        pivot_uinv[c] = uinv
        for ridx in cand:
            if ridx == best:
                continue
            vals = rows[ridx]
            m = ((vals[0] // p**best_v) * uinv) % mod
            for t in range(width):
                vals[t] = (vals[t] - m * pivot[t]) % mod
            lead = 0
            while lead < width and vals[lead] == 0:
                lead += 1
            if lead == width:
                continue
            rows[ridx] = vals[lead:] + [0] * lead
            buckets.setdefault(c + lead, []).append(ridx)

    unit_cols = [c for c in range(1, n + 1) if pivot_val[c] == 0]
    res_cols = [c for c in range(1, n + 1) if pivot_val[c] != 0]
    r = len(res_cols)
    col_index = {c: k for k, c in enumerate(res_cols)}
    residual = [[0] * r for _ in range(r)]
    for c in res_cols:
        if pivot_row[c] is None:
            continue  # zero row stays zero in the residual
        vec = [0] * (n + 2)
        vals = pivot_row[c]
        for t in range(width):
            if c + t <= n:
                vec[c + t] = vals[t]
        for j in range(c + 1, n + 1):
            if vec[j] and pivot_val[j] == 0:
                m = (vec[j] * pivot_uinv[j]) % mod
                prow = pivot_row[j]
                for t in range(width):
                    col = j + t
                    if col <= n:
                        vec[col] = (vec[col] - m * prow[t]) % mod
        out = residual[col_index[c]]
        for k, col in enumerate(res_cols):
            out[k] = vec[col]
    return len(unit_cols), residual


def peel_valuations(matrix, p: int, K: int):
    """Smith-form diagonal valuations of a dense matrix over Z/p^K.

    Repeatedly pivots on a minimum-valuation entry (ties broken by smallest
    (row, column)), scales it to a pure power of p, and clears its row and
    column; over the local ring Z/p^K the divisibility chain then comes out
    sorted automatically.  When the surviving block vanishes mod p^K the
    remaining diagonal entries are reported as the sentinel valuation K and
    the result is flagged inexact.

    Returns (valuations, exact) with len(valuations) == dim(matrix).
    """
    a = [list(row) for row in matrix]
    size = len(a)
    mod = p**K
    vals: list[int] = []
    top = 0
    while top < size:
        best_v = K
        best = None
        for i in range(top, size):
            row = a[i]
            for j in range(top, size):
                v = _valuation(row[j], p, K)
                if v < best_v:
                    best_v = v
                    best = (i, j)
                    if v == 0:
                        break
            if best_v == 0:
                break
        if best is None:
            vals.extend([K] * (size - top))
            return vals, False
        bi, bj = best
        if bi != top:
            a[bi], a[top] = a[top], a[bi]
        if bj != top:
            for row in a:
                row[bj], row[top] = row[top], row[bj]
        prow = a[top]
        uinv = pow(prow[top] // p**best_v, -1, mod)
        for j in range(top, size):
            prow[j] = (prow[j] * uinv) % mod
        # now prow[top] == p^best_v exactly
        for i in range(top + 1, size):
            row = a[i]
            if row[top]:
                m = row[top] // p**best_v
                for j in range(top, size):
                    row[j] = (row[j] - m * prow[j]) % mod
        vals.append(best_v)
        top += 1
    return vals, True


# ---------------------------------------------------------------------------
# banded elimination over F_p
# ---------------------------------------------------------------------------


def band_fp_rank_region(seed, trial, n, w, p, r0, r1, c0, c1) -> int:
    """Rank mod p of the (rows r0..r1) x (cols c0..c1) slice of a sampled band."""
    rows = []
    for i in range(r0, r1 + 1):
        lo = max(c0, i - w)
        hi = min(c1, i + w)
        if lo > hi:
            continue
        codes = (np.uint64((i - 1) << 16)) + np.arange(lo - 1, hi, dtype=np.uint64)
        vals = _values_from_codes(seed, trial, codes, p, 1)
        rows.append((lo, vals))
    return fp_rank_band_rows(rows, c0, c1, p)


def fp_rank_band_rows(rows, c0: int, c1: int, p: int) -> int:
    """Gaussian elimination on short banded rows; rows are (start_col, values)."""
    buckets: dict[int, list[int]] = {}
    stored: list[tuple[int, list[int]]] = []
    for start, vals in rows:
        lead = 0
        while lead < len(vals) and vals[lead] % p == 0:
            lead += 1
        if lead == len(vals):
            continue
        stored.append((start + lead, [v % p for v in vals[lead:]]))
        buckets.setdefault(start + lead, []).append(len(stored) - 1)
    rank = 0
    for c in range(c0, c1 + 1):
        cand = buckets.pop(c, None)
        if not cand:
            continue
        best = cand[0]
        _, pvals = stored[best]
        rank += 1
        inv = pow(pvals[0], -1, p)
        for ridx in cand[1:]:
            _, vals = stored[ridx]
            if len(vals) < len(pvals):
                vals.extend([0] * (len(pvals) - len(vals)))
            m = (vals[0] * inv) % p
            for t in range(len(pvals)):
                vals[t] = (vals[t] - m * pvals[t]) % p
            lead = 0
            while lead < len(vals) and vals[lead] == 0:
                lead += 1
            if lead == len(vals):
                continue
            stored[ridx] = (c + lead, vals[lead:])
            buckets.setdefault(c + lead, []).append(ridx)
    return rank


def trial_cok_residual(seed, trial, n, w, p, K):
    entries = sample_band(seed, trial, n, w, p, K)
    return band_echelon_residual(entries, n, w, p, K)
