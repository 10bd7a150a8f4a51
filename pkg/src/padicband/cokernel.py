"""Smith-form valuations over Z/p^K, cokernel extraction with precision
escalation, and F_p kernel computations (dense and banded).

Conventions: kernel vectors are right-kernel vectors (M v = 0); the cokernel
is the quotient by the row span.  Elementary-divisor valuations are reported
nondecreasing, each in [0, K], with K acting as the "precision exhausted"
sentinel.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._kernels import pure as _pure
from .errors import BlockTooSmallError, PrecisionLimitError
from .groups import AbelianPGroup
from .ring import PrimePower
from .sampler import (
    PrescriptionMask,
    ResidueBandMatrix,
    SampleKey,
    sample_matrix,
)

DEFAULT_K_INIT = 32
DEFAULT_K_MAX = 1024


class FpMatrix:
    """Dense matrix over F_p with an optional bandwidth hint.

    The hint routes rank queries through the O(n w^2) banded path; it never
    changes results, only speed.
    """

    __slots__ = ("p", "data", "bandwidth")

    def __init__(self, p: int, data, bandwidth: int | None = None):
        self.p = p
        self.data = np.asarray(data, dtype=np.int64) % p
        if self.data.ndim != 2:
            raise ValueError("matrix data must be two-dimensional")
        self.bandwidth = bandwidth

    @classmethod
    def from_entries(cls, p, n_rows, n_cols, entries: dict, bandwidth=None):
        data = np.zeros((n_rows, n_cols), dtype=np.int64)
        for (i, j), v in entries.items():
            data[i - 1, j - 1] = v % p
        return cls(p, data, bandwidth)

    @property
    def n_rows(self) -> int:
        return self.data.shape[0]

    @property
    def n_cols(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class SnfResult:
    """Diagonal valuations a_1 <= ... <= a_n plus an exactness flag."""

    valuations: tuple
    status: str  # "exact" | "exhausted"

    @property
    def exact(self) -> bool:
        return self.status == "exact"

    def to_json(self) -> str:
        return json.dumps(
            {"valuations": list(self.valuations), "status": self.status},
            sort_keys=True,
        )


INFINITE = "infinite"


@dataclass(frozen=True)
class CokernelClass:
    """Finite cokernel type, or the (measure-zero) singular marker."""

    group: AbelianPGroup | None

    @property
    def is_infinite(self) -> bool:
        return self.group is None

    def key(self) -> str:
        return INFINITE if self.group is None else self.group.to_string()


def smith_valuations(m: ResidueBandMatrix) -> SnfResult:
    """Valuations of the elementary divisors of a square masked matrix.

    Band masks go through the banded echelon + residual-block path, anything
    else through the dense minimum-valuation peel; both compute the same
    (unique) multiset and are cross-checked in the test suite.
    """
    n = m.n
    p, K = m.context.p, m.context.K
    if m.mask.is_band:
        w = min(m.mask.bandwidth, n - 1)
        vals, exact = _kernels.smith_valuations_band(m.band_entries(), n, w, p, K)
    else:
        dense = [[m.entry(i, j) for j in range(1, n + 1)] for i in range(1, n + 1)]
        vals, exact = _pure.peel_valuations(dense, p, K)
        vals = sorted(vals)
    return SnfResult(tuple(vals), "exact" if exact else "exhausted")


def smith_valuations_dense(m: ResidueBandMatrix) -> SnfResult:
    """Reference implementation: dense peel regardless of mask shape."""
    n = m.n
    dense = [[m.entry(i, j) for j in range(1, n + 1)] for i in range(1, n + 1)]
    vals, exact = _pure.peel_valuations(dense, m.context.p, m.context.K)
    return SnfResult(tuple(sorted(vals)), "exact" if exact else "exhausted")


def partition_from_valuations(vals, p) -> AbelianPGroup:
    positive = sorted((v for v in vals if v > 0), reverse=True)
    return AbelianPGroup(p, tuple(positive))


def cokernel(mask: PrescriptionMask, context: PrimePower, key: SampleKey,
             K_init: int = DEFAULT_K_INIT, K_max: int = DEFAULT_K_MAX) -> CokernelClass:
    """Cokernel type of a sampled matrix, escalating precision as needed.

    On an exhausted Smith form the same underlying matrix is re-read at
    doubled precision (never resampled, which would bias the conditional
    law toward small cokernels) until the form is exact or K exceeds K_max,
    at which point PrecisionLimitError is raised for the caller to count.
    """
    if K_init < 1:
        raise ValueError("K_init must be >= 1")
    p = context.p
    K = K_init
    if mask.is_band:
        n, w = mask.n, min(mask.bandwidth, mask.n - 1)
        while True:
            vals, exact = _kernels.trial_cokernel_valuations(key.seed, key.trial, n, w, p, K)
            if exact:
                return CokernelClass(partition_from_valuations(vals, p))
            if 2 * K > K_max:
                raise PrecisionLimitError(f"exhausted at K={K} (K_max={K_max})", K)
            K *= 2
    matrix = sample_matrix(mask, PrimePower(p, K), key)
    while True:
        res = smith_valuations(matrix)
        if res.exact:
            return CokernelClass(partition_from_valuations(res.valuations, p))
        if 2 * K > K_max:
            raise PrecisionLimitError(f"exhausted at K={K} (K_max={K_max})", K)
        K *= 2
        matrix = sample_matrix(mask, PrimePower(p, K), key)


def cokernel_of_matrix(m: ResidueBandMatrix, K_max: int = DEFAULT_K_MAX) -> CokernelClass:
    """Cokernel of an explicit matrix; refines only when a key is present."""
    from .sampler import refine_precision

    matrix = m
    while True:
        res = smith_valuations(matrix)
        if res.exact:
            return CokernelClass(partition_from_valuations(res.valuations, matrix.context.p))
        K = matrix.context.K
        if matrix.key is None or 2 * K > K_max:
            raise PrecisionLimitError(f"exhausted at K={K} (K_max={K_max})", K)
        matrix = refine_precision(matrix, 2 * K)


# ---------------------------------------------------------------------------
# F_p kernels
# ---------------------------------------------------------------------------


def dense_fp_rank(data: np.ndarray, p: int) -> int:
    a = (np.asarray(data, dtype=np.int64) % p).copy()
    rows, cols = a.shape
    rank = 0
    for c in range(cols):
        piv = None
        for r in range(rank, rows):
            if a[r, c]:
                piv = r
                break
        if piv is None:
            continue
        if piv != rank:
            a[[rank, piv]] = a[[piv, rank]]
        inv = pow(int(a[rank, c]), -1, p)
        a[rank] = (a[rank] * inv) % p
        below = a[rank + 1 :, c].nonzero()[0]
        if below.size:
            idx = below + rank + 1
            a[idx] = (a[idx] - np.outer(a[idx, c], a[rank])) % p
        rank += 1
        if rank == rows:
            break
    return rank


def _rref(data: np.ndarray, p: int):
    a = (np.asarray(data, dtype=np.int64) % p).copy()
    rows, cols = a.shape
    pivots = []
    rank = 0
    for c in range(cols):
        piv = None
        for r in range(rank, rows):
            if a[r, c]:
                piv = r
                break
        if piv is None:
            continue
        if piv != rank:
            a[[rank, piv]] = a[[piv, rank]]
        inv = pow(int(a[rank, c]), -1, p)
        a[rank] = (a[rank] * inv) % p
        others = np.concatenate([a[:rank, c], np.zeros(1, np.int64), a[rank + 1 :, c]])
        idx = others.nonzero()[0]
        if idx.size:
            a[idx] = (a[idx] - np.outer(a[idx, c], a[rank])) % p
        pivots.append(c)
        rank += 1
        if rank == rows:
            break
    return a, pivots


def fp_kernel_dim(m: FpMatrix) -> int:
    """Dimension of the right null space over F_p."""
    if m.bandwidth is not None and m.n_rows == m.n_cols:
        n = m.n_rows
        w = min(m.bandwidth, n - 1) if n > 1 else 0
        rows = []
        for i in range(1, n + 1):
            lo = max(1, i - w)
            hi = min(n, i + w)
            rows.append((lo, [int(x) for x in m.data[i - 1, lo - 1 : hi]]))
        return m.n_cols - _pure.fp_rank_band_rows(rows, 1, n, m.p)
    return m.n_cols - dense_fp_rank(m.data, m.p)


def fp_kernel_basis(m: FpMatrix) -> list:
    """Basis vectors v (as int arrays) of the right null space: m v = 0."""
    a, pivots = _rref(m.data, m.p)
    p = m.p
    cols = m.n_cols
    free = [c for c in range(cols) if c not in set(pivots)]
    basis = []
    for f in free:
        v = np.zeros(cols, dtype=np.int64)
        v[f] = 1
        for r, c in enumerate(pivots):
            v[c] = (-a[r, f]) % p
        basis.append(v)
    return basis


def localized_kernel_indicators(m: FpMatrix, L: int, w: int) -> list:
    """Per-block existence of a nonzero kernel vector supported in the block.

    Block i covers columns [(i-1) n0 + 1, i n0] with n0 = floor(n / L); only
    the band rows touching those columns can be nonzero there, so indicator i
    is the rank deficiency of that submatrix.  Blocks reference disjoint
    column sets, which is what makes the indicators independent for sampled
    band matrices.
    """
    n = m.n_cols
    if L < 1:
        raise ValueError("L must be >= 1")
    if n <= 2 * L:
        raise BlockTooSmallError(f"need n > 2L, got n={n}, L={L}")
    n0 = n // L
    out = []
    for i in range(1, L + 1):
        c_lo = (i - 1) * n0 + 1
        c_hi = i * n0
        r_lo = max(1, c_lo - w)
        r_hi = min(n, c_hi + w)
        sub = m.data[r_lo - 1 : r_hi, c_lo - 1 : c_hi]
        out.append(dense_fp_rank(sub, m.p) < n0)
    return out


def snf_result_from_json(text: str) -> SnfResult:
    obj = json.loads(text)
    status = obj["status"]
    if status not in ("exact", "exhausted"):
        raise ValueError(f"bad status {status!r}")
    return SnfResult(tuple(obj["valuations"]), status)
