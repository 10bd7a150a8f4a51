"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with plain `pytest`; the summary lines bypass pytest's capture so they
are visible in any mode.  Expected total runtime is a few minutes, dominated
by the n=512 distribution runs.
"""

import itertools
import random
import sys
from fractions import Fraction

import numpy as np
import pytest

import padicband._kernels as kernels
from bruteforce import (
    aut_order_bruteforce,
    det_cofactor_mod,
    groups_up_to,
    hom_count_bruteforce,
    kill_fraction_bruteforce,
    sur_count_bruteforce,
)
from padicband.cokernel import dense_fp_rank, smith_valuations
from padicband.groups import AbelianPGroup, aut_order, hom_count, sur_count
from padicband.harness import (
    ExperimentConfig,
    run_cokernel_distribution,
    run_localization,
    run_normalized_dim,
    run_rank_distribution,
)
from padicband.moments import GSequence, kernel_event_probability, moment_dp, moment_enumerate
from padicband.ring import PrimePower, valuation_int
from padicband.sampler import SampleKey, band_mask, refine_precision, sample_matrix

SEED = 20240801


def report(criterion: int, ok: bool, detail: str) -> None:
    line = f"ACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'} - {detail}\n"
    sys.__stdout__.write(line)
    sys.__stdout__.flush()


def grid_cells():
    for p in (2, 3):
        for parts in ((1,), (2,), (1, 1)):
            G = AbelianPGroup(p, parts)
            n_max = 1
            while G.order ** (n_max + 1) <= 10**6:
                n_max += 1
            for w in (1, 2, 3):
                for n in range(1, n_max + 1):
                    yield G, n, w


def test_criterion_1_dp_equals_enumeration():
    cells = kinds = 0
    try:
        for G, n, w in grid_cells():
            cells += 1
            for kind in ("hom", "sur"):
                kinds += 1
                ref = moment_enumerate(G, n, w=w, kind=kind).value
                got = moment_dp(G, n, w, kind=kind).value
                assert got == ref, (G.to_string(), n, w, kind, got, ref)
    except AssertionError:
        report(1, False, f"dp != enumeration after {kinds} checks")
        raise
    report(1, True, f"dp == enumeration exactly on {cells} grid cells x 2 kinds")


def test_criterion_2_kernel_event_probability_brute_force():
    Z2 = AbelianPGroup(2, (1,))
    checked = 0
    try:
        for n in range(1, 5):
            for w in (1, 2):
                pairs = list(band_mask(n, w).pairs())
                for combo in itertools.product(range(2), repeat=n):
                    vals = [(c,) for c in combo]
                    expected = kill_fraction_bruteforce(pairs, n, 2, Z2, vals)
                    got = kernel_event_probability(GSequence(Z2, n, vals), w=w)
                    assert got == expected, (n, w, combo, got, expected)
                    checked += 1
    except AssertionError:
        report(2, False, "kill probability disagrees with matrix enumeration")
        raise
    report(2, True, f"kill probability exact for all {checked} (n, w, g) cases")


TRIVIAL_MASS = 0.2887881


@pytest.fixture(scope="module")
def dist_512():
    cfg = ExperimentConfig("dist", p=2, n_grid=[512], w=24, trials=20000,
                           seed=SEED, k_init=32, k_max=1024, ref_max_order=16)
    return run_cokernel_distribution(cfg)


def test_criterion_3_cohen_lenstra_convergence(dist_512):
    rep = dist_512
    ok_trials = rep["trials"] - rep["precision_limit"]
    p_triv = rep["counts"].get("2^[]", 0) / ok_trials
    p_z2 = rep["counts"].get("2^[1]", 0) / ok_trials
    tv = rep["tv_restricted"]
    ok = (
        abs(p_triv - TRIVIAL_MASS) <= 0.015
        and abs(p_z2 - TRIVIAL_MASS) <= 0.015
        and tv < 0.03
        and rep["passed"]
    )
    report(3, ok,
           f"P(trivial)={p_triv:.4f}, P(Z/2)={p_z2:.4f} (target 0.2888 +/- 0.015), "
           f"TV={tv:.4f} (< 0.03), precision-limit={rep['precision_limit']}")
    assert abs(p_triv - TRIVIAL_MASS) <= 0.015
    assert abs(p_z2 - TRIVIAL_MASS) <= 0.015
    assert tv < 0.03
    assert rep["passed"]


def test_criterion_4_corank_law():
    cfg = ExperimentConfig("rank", p=2, n_grid=[512], w=24, trials=20000, seed=SEED)
    rep = run_rank_distribution(cfg)
    freqs = {int(k): v / rep["trials"] for k, v in rep["counts"].items()}
    targets = [(0, 0.2887881, 0.015), (1, 0.5775762, 0.015), (2, 0.1283503, 0.012)]
    ok = all(abs(freqs.get(k, 0.0) - ref) <= tol for k, ref, tol in targets)
    report(4, ok, ", ".join(
        f"P(k={k})={freqs.get(k, 0.0):.4f} (target {ref:.4f} +/- {tol})"
        for k, ref, tol in targets
    ))
    for k, ref, tol in targets:
        assert abs(freqs.get(k, 0.0) - ref) <= tol


def test_criterion_5_moment_bound_and_mc_dp_agreement():
    n, w, trials = 64, 8, 100000
    counts = {}
    for trial in range(trials):
        k = kernels.trial_fp_corank(SEED, trial, n, w, 2)
        counts[k] = counts.get(k, 0) + 1
    values = [2.0**k for k, c in counts.items() for _ in range(c)]
    mean = sum(2.0**k * c for k, c in counts.items()) / trials
    var = sum((v - mean) ** 2 for v in values) / (trials - 1)
    stderr = (var / trials) ** 0.5
    dp = float(moment_dp(AbelianPGroup(2, (1,)), n, w, kind="hom").value)
    ok = abs(mean - dp) <= 4 * stderr and mean <= 27.0
    report(5, ok,
           f"MC mean 2^corank = {mean:.4f} vs dp {dp:.4f} "
           f"(|diff| = {abs(mean-dp):.4f} <= 4 sigma = {4*stderr:.4f}), bound 27.0")
    assert abs(mean - dp) <= 4 * stderr
    assert mean <= 27.0


def test_criterion_6_localization_independence():
    cfg = ExperimentConfig("localize", p=2, n_grid=[200], w=1, trials=10000,
                           seed=SEED, L=2)
    rep = run_localization(cfg)
    disc = abs(rep["discrepancy"])
    sigma = rep["discrepancy_sigma"]
    independent = rep["checks"]["independence_within_3_sigma"]
    exact = rep["implication_violations"] == 0
    ok = independent and exact
    report(6, ok,
           f"|joint - product| = {disc:.5f} vs 3 sigma = {3*sigma:.5f}; "
           f"implication violations = {rep['implication_violations']}")
    assert independent
    assert exact


def test_criterion_7_normalized_dimension():
    cfg = ExperimentConfig("normdim", p=2, n_grid=[2000], w=1, trials=200, seed=SEED)
    rep = run_normalized_dim(cfg)
    frac = rep["rows"][0]["frac_above_threshold"]
    min_ratio = rep["rows"][0]["quantiles"]["min"]
    part1 = min_ratio >= 1 / 16

    cfg2 = ExperimentConfig("normdim", p=2, n_grid=[256, 512, 1024], w_offset=8,
                            trials=200, seed=SEED)
    rep2 = run_normalized_dim(cfg2)
    medians = [r["quantiles"]["median"] for r in rep2["rows"]]
    part2 = all(medians[i] > medians[i + 1] for i in range(2)) and medians[-1] < 0.01
    ok = part1 and part2
    report(7, ok,
           f"w=1: min dim/n = {min_ratio:.4f} (>= 1/16, frac above = {frac}); "
           f"offset c=8 medians = {['%.5f' % m for m in medians]} (< 0.01 at n=1024)")
    assert part1
    assert part2


def _criterion_8_snf_det_identity():
    random.seed(SEED)
    checked = 0
    cases = 0
    while checked < 1000 and cases < 3000:
        cases += 1
        n = random.randint(1, 8)
        w = random.randint(0, n)
        p = random.choice([2, 3])
        K = 12
        m = sample_matrix(band_mask(n, w), PrimePower(p, K), SampleKey(SEED, cases))
        res = smith_valuations(m)
        if not res.exact:
            continue
        dense = [[m.entry(i, j) for j in range(1, n + 1)] for i in range(1, n + 1)]
        dv = valuation_int(det_cofactor_mod(dense, p**K), p, K)
        if dv == K:
            continue
        assert sum(res.valuations) == dv, (cases, res.valuations, dv)
        checked += 1
    assert checked >= 1000
    return checked


def _criterion_8_banded_vs_dense():
    rng = random.Random(SEED + 1)
    for case in range(1000):
        n = rng.randint(1, 200)
        w = rng.randint(0, min(10, max(0, n - 1)))
        p = rng.choice([2, 3, 5])
        banded_dim = n - kernels.trial_fp_rank_region(SEED + 1, case, n, w, p, 1, n, 1, n)
        entries = kernels.sample_band(SEED + 1, case, n, w, p, 1)
        dense = np.zeros((n, n), dtype=np.int64)
        pos = 0
        for i in range(1, n + 1):
            lo, hi = max(1, i - w), min(n, i + w)
            for j in range(lo, hi + 1):
                dense[i - 1, j - 1] = entries[pos]
                pos += 1
        dense_dim = n - dense_fp_rank(dense, p)
        assert banded_dim == dense_dim, (case, n, w, p)
    return 1000


def _criterion_8_group_formulas():
    checked = 0
    for p, cap in ((2, 81), (3, 81)):
        small = [A for A in groups_up_to(p, 27 if p == 3 else 16)]
        for G in groups_up_to(p, cap):
            for A in groups_up_to(p, cap):
                assert hom_count(A, G) == hom_count_bruteforce(A, G)
                checked += 1
            for A in small + [G]:
                assert sur_count(A, G) == sur_count_bruteforce(A, G)
                checked += 1
            assert aut_order(G) == sur_count_bruteforce(G, G)
            dfs = aut_order_bruteforce(G, work_cap=200_000)
            if dfs is not None:
                assert aut_order(G) == dfs
            checked += 1
    return checked


def _criterion_8_refinement_coherence():
    for p, K in ((2, 16), (2, 32), (3, 8), (5, 5)):
        for trial in range(10):
            m = sample_matrix(band_mask(10, 2), PrimePower(p, K), SampleKey(SEED, trial))
            hi = refine_precision(m, 2 * K)
            mod = p**K
            assert all(
                hi.entry(i, j) % mod == m.entry(i, j) for i, j in m.mask.pairs()
            )
            assert refine_precision(hi, 4 * K) == refine_precision(m, 4 * K)
    return 40


def test_criterion_8_structural_oracle_suites():
    try:
        n_det = _criterion_8_snf_det_identity()
        n_dim = _criterion_8_banded_vs_dense()
        n_grp = _criterion_8_group_formulas()
        n_ref = _criterion_8_refinement_coherence()
    except AssertionError:
        report(8, False, "a structural oracle suite found a mismatch")
        raise
    report(8, True,
           f"det-valuation identity x{n_det}, banded==dense corank x{n_dim}, "
           f"group-count oracles x{n_grp}, refinement coherence x{n_ref} (all exact)")
