"""Deterministic, refinable Haar-uniform sampling of masked matrices over Z/p^K.

Each entry's digits come from a counter-based generator keyed by
(seed, trial, i, j, digit block), so a (seed, trial) pair reproduces the
same matrix bit for bit on any platform, independent trials never share
stream positions, and raising the precision extends an existing matrix
instead of resampling it.  See ``padicband._kernels.pure`` for the exact
stream conventions.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import _kernels
from ._kernels import pure as _pure
from .errors import NotRefinableError
from .ring import PrimePower

MAX_DIMENSION = _pure.MAX_INDEX


@dataclass(frozen=True)
class SampleKey:
    """(seed, trial) fully determines every digit of every entry."""

    seed: int
    trial: int

    def __post_init__(self):
        if not (0 <= self.seed < 1 << 64):
            raise ValueError("seed must fit in 64 bits")
        if not (0 <= self.trial < 1 << 64):
            raise ValueError("trial must fit in 64 bits")


class PrescriptionMask:
    """Set of matrix cells allowed to be nonzero, 1-based.

    Band masks (|i-j| <= w) are kept in implicit form so large dimensions
    never materialize their cell set.
    """

    __slots__ = ("n", "bandwidth", "_pairs")

    def __init__(self, n: int, pairs=None, bandwidth: int | None = None):
        if n < 1:
            raise ValueError("n must be >= 1")
        if n > MAX_DIMENSION:
            raise ValueError(f"n exceeds the sampler limit {MAX_DIMENSION}")
        self.n = n
        self.bandwidth = bandwidth
        if bandwidth is None:
            cells = frozenset((int(i), int(j)) for i, j in pairs)
            for i, j in cells:
                if not (1 <= i <= n and 1 <= j <= n):
                    raise ValueError(f"cell ({i}, {j}) outside [1, {n}]^2")
            self._pairs = cells
        else:
            if bandwidth < 0:
                raise ValueError("bandwidth must be >= 0")
            self._pairs = None

    @property
    def is_band(self) -> bool:
        return self.bandwidth is not None

    def contains(self, i: int, j: int) -> bool:
        if self.is_band:
            return 1 <= i <= self.n and 1 <= j <= self.n and abs(i - j) <= self.bandwidth
        return (i, j) in self._pairs

    def pairs(self):
        """Cells in row-major order."""
        if self.is_band:
            w = self.bandwidth
            for i in range(1, self.n + 1):
                for j in range(max(1, i - w), min(self.n, i + w) + 1):
                    yield (i, j)
        else:
            yield from sorted(self._pairs)

    def count(self) -> int:
        if self.is_band:
            return _pure.band_entry_count(self.n, self.bandwidth)
        return len(self._pairs)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PrescriptionMask):
            return NotImplemented
        if self.n != other.n:
            return False
        if self.is_band and other.is_band:
            return min(self.bandwidth, self.n - 1) == min(other.bandwidth, other.n - 1)
        return set(self.pairs()) == set(other.pairs())

    def __repr__(self) -> str:
        if self.is_band:
            return f"PrescriptionMask(n={self.n}, band w={self.bandwidth})"
        return f"PrescriptionMask(n={self.n}, {len(self._pairs)} cells)"


def band_mask(n: int, w: int) -> PrescriptionMask:
    """Cells with |i - j| <= w."""
    return PrescriptionMask(n, bandwidth=w)


class ResidueBandMatrix:
    """Masked matrix over Z/p^K; off-mask cells are identically zero."""

    __slots__ = ("context", "mask", "entries", "key")

    def __init__(self, context: PrimePower, mask: PrescriptionMask, entries: dict,
                 key: SampleKey | None = None):
        self.context = context
        self.mask = mask
        self.key = key
        mod = context.modulus
        self.entries = {}
        for (i, j), v in entries.items():
            if not mask.contains(i, j):
                raise ValueError(f"entry ({i}, {j}) outside the mask")
            self.entries[(i, j)] = v % mod

    @property
    def n(self) -> int:
        return self.mask.n

    def entry(self, i: int, j: int) -> int:
        return self.entries.get((i, j), 0)

    def band_entries(self):
        """Row-major in-band values; only valid for band masks."""
        assert self.mask.is_band
        return [self.entries.get(pair, 0) for pair in self.mask.pairs()]

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, ResidueBandMatrix)
            and self.context == other.context
            and self.mask == other.mask
            and all(self.entry(i, j) == other.entry(i, j) for i, j in self.mask.pairs())
        )


def sample_matrix(mask: PrescriptionMask, context: PrimePower, key: SampleKey) -> ResidueBandMatrix:
    """Haar-uniform matrix on the mask: i.i.d. uniform residues per cell."""
    p, K = context.p, context.K
    if mask.is_band:
        w = mask.bandwidth
        values = _kernels.sample_band(key.seed, key.trial, mask.n, min(w, mask.n - 1), p, K)
        entries = dict(zip(band_mask(mask.n, min(w, mask.n - 1)).pairs(), values))
    else:
        entries = {
            (i, j): _pure.entry_value(key.seed, key.trial, i, j, p, K)
            for i, j in mask.pairs()
        }
    return ResidueBandMatrix(context, mask, entries, key)


def refine_precision(m: ResidueBandMatrix, K_new: int) -> ResidueBandMatrix:
    """The same underlying matrix, re-read at a higher precision.

    New digits come from the same absolute stream positions, so reducing the
    result mod p^K gives back ``m`` exactly.
    """
    if m.key is None:
        raise NotRefinableError("matrix was loaded externally and has no sample key")
    if K_new <= m.context.K:
        raise ValueError(f"K_new={K_new} must exceed current K={m.context.K}")
    return sample_matrix(m.mask, PrimePower(m.context.p, K_new), m.key)


def reduce_mod_p(m: ResidueBandMatrix):
    """Entrywise reduction mod p, preserving the mask."""
    from .cokernel import FpMatrix

    p = m.context.p
    return FpMatrix.from_entries(
        p,
        m.n,
        m.n,
        {pos: v % p for pos, v in m.entries.items()},
        bandwidth=m.mask.bandwidth if m.mask.is_band else None,
    )


# ---------------------------------------------------------------------------
# text fixtures: line 1 "p K n", then "i j value" per in-mask cell
# ---------------------------------------------------------------------------


def save_matrix(m: ResidueBandMatrix, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"{m.context.p} {m.context.K} {m.n}\n")
        for i, j in m.mask.pairs():
            fh.write(f"{i} {j} {m.entry(i, j)}\n")


def load_matrix(path) -> ResidueBandMatrix:
    """Load a fixture matrix; the listed cells define its mask, key is absent."""
    with open(path, "r", encoding="ascii") as fh:
        tokens = fh.read().split()
    if len(tokens) < 3 or (len(tokens) - 3) % 3 != 0:
        raise ValueError(f"malformed matrix file {path}")
    p, K, n = int(tokens[0]), int(tokens[1]), int(tokens[2])
    context = PrimePower(p, K)
    entries = {}
    for t in range(3, len(tokens), 3):
        i, j, v = int(tokens[t]), int(tokens[t + 1]), int(tokens[t + 2])
        entries[(i, j)] = v
    mask = PrescriptionMask(n, pairs=entries.keys())
    return ResidueBandMatrix(context, mask, entries, key=None)
