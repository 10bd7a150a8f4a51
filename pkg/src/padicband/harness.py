"""Experiment drivers: distribution sweeps, rank statistics, localization,
tightness and normalized-dimension runs, and the rare-set probe.

Every experiment consumes an :class:`ExperimentConfig`, fans trials out over
disjoint trial indices (optionally across processes), and returns a plain
dict report whose JSON serialisation is byte-identical for identical
config + seed.  Wall-clock data never enters reports for that reason.
"""

from __future__ import annotations

import math
import statistics
from collections import Counter
from dataclasses import dataclass, field, asdict
from fractions import Fraction

from . import _kernels
from ._kernels import BACKEND
from .cokernel import cokernel
from .errors import BlockTooSmallError, ConfigError, PrecisionLimitError, SetTooLargeError
from .groups import (
    AbelianPGroup,
    cohen_lenstra_reference,
    corank_mass,
    corank_reference,
)
from .moments import hom_moment_bound, moment_dp
from .ring import PrimePower
from .sampler import SampleKey, band_mask

Z95 = 1.959963984540054

RARE_SET_MAX_S = 20


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    experiment: str
    p: int = 2
    n_grid: list = field(default_factory=list)
    w: int | None = None
    w_offset: int | None = None
    w_list: list | None = None
    trials: int = 1000
    seed: int = 0
    k_init: int = 32
    k_max: int = 1024
    groups: list = field(default_factory=lambda: [])
    L: int = 2
    s: int = 3
    ref_max_order: int = 16
    jobs: int = 1
    mask_pairs: list | None = None  # prescription mode (dist/rank only)

    def validate(self) -> "ExperimentConfig":
        if self.trials < 1:
            raise ConfigError("trials must be positive")
        if self.k_init < 1 or self.k_max < self.k_init:
            raise ConfigError("need 1 <= k_init <= k_max")
        if self.jobs < 1:
            raise ConfigError("jobs must be positive")
        PrimePower(self.p, 1)  # validates primality
        if self.mask_pairs is not None:
            if self.experiment not in ("dist", "rank"):
                raise ConfigError(f"{self.experiment} does not take a prescription mask")
            if not self.n_grid or len(self.n_grid) != 1:
                raise ConfigError("prescription mode needs the mask dimension as n")
            return self
        if not self.n_grid:
            raise ConfigError("at least one n is required")
        if any(n < 1 for n in self.n_grid):
            raise ConfigError("n must be positive")
        rules = sum(x is not None for x in (self.w, self.w_offset, self.w_list))
        if rules != 1:
            raise ConfigError("exactly one of w, w_offset, w_list is required")
        if self.w is not None and self.w < 0:
            raise ConfigError("w must be >= 0")
        if self.w_list is not None and len(self.w_list) != len(self.n_grid):
            raise ConfigError("w_list must match n_grid in length")
        for n in self.n_grid:
            if self.width_for(n) < 0:
                raise ConfigError(f"bandwidth rule gives negative w at n={n}")
        return self

    def width_for(self, n: int) -> int:
        if self.w is not None:
            return self.w
        if self.w_offset is not None:
            return ceil_log(self.p, n) + self.w_offset
        return self.w_list[self.n_grid.index(n)]

    def echo(self) -> dict:
        return asdict(self)


def ceil_log(p: int, n: int) -> int:
    """Smallest m with p^m >= n (exact integer arithmetic)."""
    m = 0
    power = 1
    while power < n:
        power *= p
        m += 1
    return m


def offset_of(p: int, n: int, w: int) -> float:
    return w - math.log(n, p)


# ---------------------------------------------------------------------------
# small statistics helpers
# ---------------------------------------------------------------------------


def wilson_interval(successes: int, trials: int, z: float = Z95):
    """95% score interval; valid at small counts unlike the normal one."""
    if trials == 0:
        return (0.0, 1.0)
    phat = successes / trials
    denom = 1 + z * z / trials
    center = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    return (max(0.0, center - half), min(1.0, center + half))


def tv_distance(empirical: dict, reference: dict) -> float:
    """Half L1 over observed keys plus half the unobserved reference mass."""
    total = 0.0
    for key, freq in empirical.items():
        total += abs(float(freq) - float(reference.get(key, 0.0)))
    for key, mass in reference.items():
        if key not in empirical:
            total += float(mass)
    return total / 2


@dataclass
class EmpiricalDistribution:
    """Outcome counts plus the bookkeeping the spec requires per run."""

    counts: dict
    trials: int
    precision_limit: int
    seed: int
    config: dict

    def frequencies(self) -> dict:
        ok = self.trials - self.precision_limit
        if ok == 0:
            return {}
        return {k: v / ok for k, v in self.counts.items()}


# ---------------------------------------------------------------------------
# trial fan-out
# ---------------------------------------------------------------------------


def _run_chunked(jobs: int, trials: int, worker, args: tuple):
    """worker(args, start, stop) -> partial; partials merged in chunk order."""
    if jobs <= 1:
        return [worker(args, 0, trials)]
    import multiprocessing as mp

    chunk = (trials + jobs - 1) // jobs
    ranges = [(t, min(t + chunk, trials)) for t in range(0, trials, chunk)]
    with mp.get_context("fork").Pool(processes=jobs) as pool:
        return pool.starmap(worker, [(args, a, b) for a, b in ranges])


def _merge_counters(partials):
    counts: Counter = Counter()
    limited = 0
    for c, lim in partials:
        counts.update(c)
        limited += lim
    return counts, limited


def _dist_worker(args, start, stop):
    p, n, w, seed, k_init, k_max, mask_pairs = args
    if mask_pairs is None:
        mask = band_mask(n, w)
    else:
        from .sampler import PrescriptionMask

        mask = PrescriptionMask(n, pairs=mask_pairs)
    context = PrimePower(p, k_init)
    counts: Counter = Counter()
    limited = 0
    for trial in range(start, stop):
        try:
            cls = cokernel(mask, context, SampleKey(seed, trial), k_init, k_max)
        except PrecisionLimitError:
            limited += 1
            continue
        counts[cls.key()] += 1
    return counts, limited


def _corank_worker(args, start, stop):
    p, n, w, seed = args
    counts: Counter = Counter()
    for trial in range(start, stop):
        counts[_kernels.trial_fp_corank(seed, trial, n, w, p)] += 1
    return counts, 0


def _corank_worker_mask(args, start, stop):
    p, n, seed, mask_pairs = args
    from .cokernel import dense_fp_rank
    from .sampler import PrescriptionMask, sample_matrix
    import numpy as np

    mask = PrescriptionMask(n, pairs=mask_pairs)
    context = PrimePower(p, 1)
    counts: Counter = Counter()
    for trial in range(start, stop):
        m = sample_matrix(mask, context, SampleKey(seed, trial))
        dense = np.zeros((n, n), dtype=np.int64)
        for (i, j), v in m.entries.items():
            dense[i - 1, j - 1] = v
        counts[n - dense_fp_rank(dense, p)] += 1
    return counts, 0


def _localize_worker(args, start, stop):
    p, n, w, L, seed = args
    n0 = n // L
    per_block = [0] * L
    joint = 0
    tail = 0
    violations = 0
    for trial in range(start, stop):
        flags = []
        for i in range(1, L + 1):
            c_lo, c_hi = (i - 1) * n0 + 1, i * n0
            r_lo, r_hi = max(1, c_lo - w), min(n, c_hi + w)
            rank = _kernels.trial_fp_rank_region(seed, trial, n, w, p, r_lo, r_hi, c_lo, c_hi)
            flags.append(rank < n0)
        dim = _kernels.trial_fp_corank(seed, trial, n, w, p)
        for i, f in enumerate(flags):
            per_block[i] += f
        if all(flags):
            joint += 1
            if dim < L:
                violations += 1
        if dim >= L:
            tail += 1
    return per_block, joint, tail, violations


def _rareset_worker(args, start, stop):
    p, n, w, s, seed = args
    hits = 0
    r_hi = min(n, s + w)
    for trial in range(start, stop):
        rank = _kernels.trial_fp_rank_region(seed, trial, n, w, p, 1, r_hi, 1, s)
        if rank < s:
            hits += 1
    return hits


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------


def run_cokernel_distribution(cfg: ExperimentConfig) -> dict:
    cfg.validate()
    if len(cfg.n_grid) != 1:
        raise ConfigError("dist runs a single n")
    n = cfg.n_grid[0]
    if cfg.mask_pairs is not None:
        w = None
        mask_pairs = tuple((int(i), int(j)) for i, j in cfg.mask_pairs)
    else:
        w = min(cfg.width_for(n), n - 1) if n > 1 else 0
        mask_pairs = None
    partials = _run_chunked(
        cfg.jobs, cfg.trials, _dist_worker,
        (cfg.p, n, w, cfg.seed, cfg.k_init, cfg.k_max, mask_pairs),
    )
    counts, limited = _merge_counters(partials)
    dist = EmpiricalDistribution(dict(counts), cfg.trials, limited, cfg.seed, cfg.echo())
    reference = cohen_lenstra_reference(cfg.p, cfg.ref_max_order)
    ref_float = reference.float_masses()
    freqs = dist.frequencies()
    ok = cfg.trials - limited

    classes = []
    for key in sorted(set(freqs) | set(ref_float)):
        count = counts.get(key, 0)
        lo, hi = wilson_interval(count, ok) if ok else (0.0, 1.0)
        est = reference.values.get(key)
        classes.append({
            "key": key,
            "count": count,
            "freq": freqs.get(key, 0.0),
            "wilson_lo": lo,
            "wilson_hi": hi,
            "reference": float(est.value) if est else None,
            "ref_error": float(est.error_bound) if est else None,
        })

    small = {
        k: v for k, v in freqs.items()
        if k != "infinite" and AbelianPGroup.from_string(k).order <= cfg.ref_max_order
    }
    tv = tv_distance(small, ref_float)
    pl_fraction = limited / cfg.trials
    checks = {"precision_limit_fraction_below_1e-3": pl_fraction < 1e-3}
    return {
        "experiment": "dist",
        "backend": BACKEND,
        "config": cfg.echo(),
        "n": n,
        "w": w,
        "offset": offset_of(cfg.p, n, w),
        "counts": {k: counts[k] for k in sorted(counts)},
        "trials": cfg.trials,
        "precision_limit": limited,
        "classes": classes,
        "tv_restricted": tv,
        "checks": checks,
        "passed": all(checks.values()),
    }


def run_rank_distribution(cfg: ExperimentConfig) -> dict:
    cfg.validate()
    if len(cfg.n_grid) != 1:
        raise ConfigError("rank runs a single n")
    n = cfg.n_grid[0]
    w = min(cfg.width_for(n), n - 1) if n > 1 else 0
    partials = _run_chunked(cfg.jobs, cfg.trials, _corank_worker, (cfg.p, n, w, cfg.seed))
    counts, _ = _merge_counters(partials)
    k_max_obs = max(counts) if counts else 0
    reference = corank_reference(cfg.p, max(k_max_obs, 8))
    ref_float = {k: v.as_float() for k, v in reference.values.items()}
    freqs = {k: v / cfg.trials for k, v in counts.items()}

    rows = []
    for k in sorted(set(freqs) | set(ref_float)):
        count = counts.get(k, 0)
        lo, hi = wilson_interval(count, cfg.trials)
        est = reference.values.get(k)
        rows.append({
            "key": k,
            "count": count,
            "freq": freqs.get(k, 0.0),
            "wilson_lo": lo,
            "wilson_hi": hi,
            "reference": float(est.value) if est else None,
            "ref_error": float(est.error_bound) if est else None,
        })
    tv = tv_distance(freqs, ref_float)
    return {
        "experiment": "rank",
        "backend": BACKEND,
        "config": cfg.echo(),
        "n": n,
        "w": w,
        "offset": offset_of(cfg.p, n, w),
        "counts": {str(k): counts[k] for k in sorted(counts)},
        "trials": cfg.trials,
        "precision_limit": 0,
        "coranks": rows,
        "tv": tv,
        "checks": {},
        "passed": True,
    }


def run_localization(cfg: ExperimentConfig) -> dict:
    cfg.validate()
    if len(cfg.n_grid) != 1:
        raise ConfigError("localize runs a single n")
    n = cfg.n_grid[0]
    w = min(cfg.width_for(n), n - 1) if n > 1 else 0
    L = cfg.L
    if L < 1:
        raise ConfigError("L must be >= 1")
    if n <= 2 * L:
        raise BlockTooSmallError(f"need n > 2L, got n={n}, L={L}")
    partials = _run_chunked(cfg.jobs, cfg.trials, _localize_worker, (cfg.p, n, w, L, cfg.seed))
    per_block = [0] * L
    joint = tail = violations = 0
    for pb, j, t, v in partials:
        for i in range(L):
            per_block[i] += pb[i]
        joint += j
        tail += t
        violations += v

    N = cfg.trials
    marg = [c / N for c in per_block]
    joint_freq = joint / N
    product = math.prod(marg)
    var_joint = joint_freq * (1 - joint_freq) / N
    var_prod = 0.0
    for i in range(L):
        others = math.prod(m for k, m in enumerate(marg) if k != i)
        var_prod += others * others * marg[i] * (1 - marg[i]) / N
    sigma = math.sqrt(var_joint + var_prod)
    disc = joint_freq - product
    independent = abs(disc) <= 3 * sigma if sigma > 0 else disc == 0

    checks = {
        "independence_within_3_sigma": independent,
        "implication_dim_ge_L_exact": violations == 0,
        "marginals_positive": all(c > 0 for c in per_block),
    }
    return {
        "experiment": "localize",
        "backend": BACKEND,
        "config": cfg.echo(),
        "n": n,
        "w": w,
        "L": L,
        "block_size": n // L,
        "per_block": [
            {"count": c, "freq": c / N, "wilson": list(wilson_interval(c, N))}
            for c in per_block
        ],
        "joint": {"count": joint, "freq": joint_freq},
        "product_of_marginals": product,
        "discrepancy": disc,
        "discrepancy_sigma": sigma,
        "dim_tail_freq": tail / N,
        "implication_violations": violations,
        "trials": N,
        "checks": checks,
        "passed": all(checks.values()),
    }


def run_normalized_dim(cfg: ExperimentConfig) -> dict:
    cfg.validate()
    rows = []
    sweep = []
    medians = []
    for n in cfg.n_grid:
        w = min(cfg.width_for(n), n - 1) if n > 1 else 0
        partials = _run_chunked(cfg.jobs, cfg.trials, _corank_worker, (cfg.p, n, w, cfg.seed))
        counts, _ = _merge_counters(partials)
        ratios = sorted(
            k / n for k, c in counts.items() for _ in range(c)
        )
        qs = {
            "min": ratios[0],
            "q25": ratios[len(ratios) // 4],
            "median": statistics.median(ratios),
            "q75": ratios[(3 * len(ratios)) // 4],
            "max": ratios[-1],
        }
        medians.append(qs["median"])
        row = {
            "n": n,
            "w": w,
            "offset": offset_of(cfg.p, n, w),
            "quantiles": qs,
            "trials": cfg.trials,
        }
        if cfg.w is not None:
            threshold = 0.5 * cfg.p ** (-2 * w - 1)
            row["threshold"] = threshold
            row["frac_above_threshold"] = sum(1 for r in ratios if r >= threshold) / len(ratios)
        rows.append(row)
        for stat in ("min", "q25", "median", "q75", "max"):
            sweep.append({
                "n": n, "w": w, "offset": offset_of(cfg.p, n, w),
                "statistic": f"dim_ratio_{stat}", "value": qs[stat],
                "stderr": None, "trials": cfg.trials,
            })
        if cfg.w is not None:
            sweep.append({
                "n": n, "w": w, "offset": offset_of(cfg.p, n, w),
                "statistic": "frac_above_threshold",
                "value": row["frac_above_threshold"], "stderr": None,
                "trials": cfg.trials,
            })

    checks = {}
    if cfg.w is not None:
        checks["all_runs_meet_threshold"] = all(
            r["frac_above_threshold"] == 1.0 for r in rows
        )
    if len(medians) > 1:
        checks["median_ratio_nonincreasing"] = all(
            medians[i] >= medians[i + 1] for i in range(len(medians) - 1)
        )
    return {
        "experiment": "normdim",
        "backend": BACKEND,
        "config": cfg.echo(),
        "rows": rows,
        "sweep_rows": sweep,
        "checks": checks,
        "passed": all(checks.values()),
    }


def run_tightness_sweep(cfg: ExperimentConfig) -> dict:
    cfg.validate()
    group = AbelianPGroup.from_string(cfg.groups[0]) if cfg.groups else AbelianPGroup(cfg.p, (1,))
    if group.parts != (1,) or group.p != cfg.p:
        raise ConfigError("tightness sweep tracks the prime cyclic group")
    rows = []
    sweep = []
    checks = {}
    for n in cfg.n_grid:
        w = min(cfg.width_for(n), n - 1) if n > 1 else 0
        partials = _run_chunked(cfg.jobs, cfg.trials, _corank_worker, (cfg.p, n, w, cfg.seed))
        counts, _ = _merge_counters(partials)
        values = [cfg.p**k for k, c in counts.items() for _ in range(c)]
        mean = sum(values) / len(values)
        var = (
            sum((v - mean) ** 2 for v in values) / (len(values) - 1)
            if len(values) > 1 else 0.0
        )
        stderr = math.sqrt(var / len(values))
        bound = hom_moment_bound(n, w, cfg.p)
        dp_value = None
        dp_float = None
        try:
            dp_value = moment_dp(group, n, w, kind="hom")
            dp_float = float(dp_value.value)
        except Exception:
            pass
        row = {
            "n": n,
            "w": w,
            "offset": offset_of(cfg.p, n, w),
            "mc_mean": mean,
            "mc_stderr": stderr,
            "bound": bound,
            "dp_exact": dp_float,
            "trials": cfg.trials,
        }
        rows.append(row)
        sweep.append({"n": n, "w": w, "offset": row["offset"],
                      "statistic": "mean_p_pow_corank", "value": mean,
                      "stderr": stderr, "trials": cfg.trials})
        sweep.append({"n": n, "w": w, "offset": row["offset"],
                      "statistic": "hom_moment_bound", "value": bound,
                      "stderr": None, "trials": cfg.trials})
        if dp_float is not None:
            sweep.append({"n": n, "w": w, "offset": row["offset"],
                          "statistic": "dp_exact", "value": dp_float,
                          "stderr": None, "trials": cfg.trials})
    checks["mc_mean_below_bound"] = all(r["mc_mean"] <= r["bound"] for r in rows)
    checks["mc_within_4_sigma_of_dp"] = all(
        r["dp_exact"] is None
        or abs(r["mc_mean"] - r["dp_exact"]) <= 4 * max(r["mc_stderr"], 1e-12)
        for r in rows
    )
    return {
        "experiment": "tight",
        "backend": BACKEND,
        "config": cfg.echo(),
        "group": group.to_string(),
        "rows": rows,
        "sweep_rows": sweep,
        "checks": checks,
        "passed": all(checks.values()),
    }


def rare_set_union_bound(n: int, w: int, p: int, s: int) -> Fraction:
    """Exact sum over nonzero vectors supported in [1, s] of the kill
    probability p^-cover, where cover counts the rows whose band window
    meets the support.  Grouped by support: (p-1)^|S| vectors share one
    cover value."""
    if s < 1 or s > n:
        raise ConfigError("need 1 <= s <= n")
    if s > RARE_SET_MAX_S:
        raise SetTooLargeError(f"s={s} exceeds the enumeration cap {RARE_SET_MAX_S}")
    numerator = 0
    for mask in range(1, 1 << s):
        bits = []
        mm = mask
        while mm:
            low = mm & -mm
            bits.append(low.bit_length())  # 1-based support position
            mm ^= low
        cover = 0
        cur_lo = cur_hi = None
        for b in bits:
            lo, hi = max(1, b - w), min(n, b + w)
            if cur_lo is None:
                cur_lo, cur_hi = lo, hi
            elif lo <= cur_hi + 1:
                cur_hi = max(cur_hi, hi)
            else:
                cover += cur_hi - cur_lo + 1
                cur_lo, cur_hi = lo, hi
        cover += cur_hi - cur_lo + 1
        numerator += (p - 1) ** len(bits) * p ** (n - cover)
    return Fraction(numerator, p**n)


def run_rare_set_probe(cfg: ExperimentConfig) -> dict:
    cfg.validate()
    if len(cfg.n_grid) != 1:
        raise ConfigError("rareset runs a single n")
    n = cfg.n_grid[0]
    w = min(cfg.width_for(n), n - 1) if n > 1 else 0
    s = cfg.s
    bound = rare_set_union_bound(n, w, cfg.p, s)
    partials = _run_chunked(cfg.jobs, cfg.trials, _rareset_worker, (cfg.p, n, w, s, cfg.seed))
    hits = sum(partials)
    freq = hits / cfg.trials
    sigma = math.sqrt(max(freq * (1 - freq), 1.0 / cfg.trials) / cfg.trials)
    ok = freq <= float(bound) + 3 * sigma
    checks = {"frequency_below_union_bound_plus_3_sigma": ok}
    return {
        "experiment": "rareset",
        "backend": BACKEND,
        "config": cfg.echo(),
        "n": n,
        "w": w,
        "s": s,
        "union_bound_num": bound.numerator,
        "union_bound_den": bound.denominator,
        "union_bound": float(bound),
        "hits": hits,
        "frequency": freq,
        "sigma": sigma,
        "trials": cfg.trials,
        "checks": checks,
        "passed": ok,
    }
