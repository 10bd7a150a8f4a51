"""Kernel backend selection.

The hot loops (entry sampling, banded elimination over Z/p^K and F_p) have
two interchangeable implementations: a Cython extension ``_core`` and the
pure-Python reference ``pure``.  The compiled backend is used when it
imported successfully and the modulus p^K fits its 32-bit word arithmetic;
everything else (large K after precision escalation, exotic inputs) goes
through the pure path.  Results are bit-identical either way.

Set the environment variable ``PADICBAND_BACKEND=pure`` before import to
force the fallback, e.g. for benchmarking.
"""

from __future__ import annotations

import os

from . import pure

try:  # pragma: no cover - depends on the build environment
    if os.environ.get("PADICBAND_BACKEND", "").lower() == "pure":
        _core = None
    else:
        from . import _core  # type: ignore[attr-defined]
except ImportError:  # pragma: no cover
    _core = None

HAVE_CORE = _core is not None
BACKEND = "cython" if HAVE_CORE else "pure"

_CORE_MOD_LIMIT = 1 << 32


def _core_ok(p: int, K: int) -> bool:
    return HAVE_CORE and p**K <= _CORE_MOD_LIMIT


def sample_band(seed: int, trial: int, n: int, w: int, p: int, K: int):
    """In-band residues mod p^K, row-major, as Python ints."""
    if _core_ok(p, K):
        return _core.sample_band(seed, trial, n, w, p, K).tolist()
    return pure.sample_band(seed, trial, n, w, p, K)


def trial_cokernel_valuations(seed: int, trial: int, n: int, w: int, p: int, K: int):
    """(sorted diagonal valuations, exact flag) for one sampled band matrix."""
    if _core_ok(p, K):
        units, residual = _core.band_cok_residual_trial(seed, trial, n, w, p, K)
        residual = [[int(x) for x in row] for row in residual]
    else:
        units, residual = pure.trial_cok_residual(seed, trial, n, w, p, K)
    vals, exact = pure.peel_valuations(residual, p, K)
    return [0] * units + sorted(vals), exact


def smith_valuations_band(entries, n: int, w: int, p: int, K: int):
    """Same as above but for explicit band entries (fixtures, refinements)."""
    if _core_ok(p, K):
        import numpy as np

        arr = np.asarray([int(x) for x in entries], dtype=np.uint64)
        units, residual = _core.band_echelon_residual(arr, n, w, p, K)
        residual = [[int(x) for x in row] for row in residual]
    else:
        units, residual = pure.band_echelon_residual(entries, n, w, p, K)
    vals, exact = pure.peel_valuations(residual, p, K)
    return [0] * units + sorted(vals), exact


def trial_fp_rank_region(seed, trial, n, w, p, r0, r1, c0, c1) -> int:
    """Rank mod p of a row/column slice of a sampled band matrix."""
    if HAVE_CORE:
        return _core.band_fp_rank_region_trial(seed, trial, n, w, p, r0, r1, c0, c1)
    return pure.band_fp_rank_region(seed, trial, n, w, p, r0, r1, c0, c1)


def trial_fp_corank(seed: int, trial: int, n: int, w: int, p: int) -> int:
    return n - trial_fp_rank_region(seed, trial, n, w, p, 1, n, 1, n)
