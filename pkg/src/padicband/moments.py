"""Exact and Monte Carlo moments of the cokernel against a fixed target group.

For a target group G and a coefficient sequence g: [1, n] -> G (read as zero
outside [1, n]), the probability that a Haar-uniform masked matrix kills g is
the product over rows k of 1 / |H_g(k)|, where H_g(k) is the subgroup
generated by the g-values the row can see (the band window, or the row's
mask support).  Summing that product over all sequences gives the expected
number of homomorphisms from the cokernel to G; restricting to sequences
whose values generate G gives the expected number of surjections.

Three routes compute the sums: direct enumeration (the oracle), a
transfer-style dynamic program over window states (exactly equal, checked
rationally), and Monte Carlo over sampled cokernels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .cokernel import cokernel
from .errors import (
    PrecisionLimitError,
    StateSpaceTooLargeError,
    TooLargeError,
    UnsupportedGroupError,
)
from .groups import AbelianPGroup, Subgroup, lattice_of
from .ring import PrimePower
from .sampler import PrescriptionMask, SampleKey

ENUMERATION_CAP = 10**6
DP_STATE_CAP = 2 * 10**6
MASK_ENUMERATION_CAP = 10**5


class GSequence:
    """Map [1, n] -> G with zero boundary padding outside the range."""

    __slots__ = ("group", "n", "values")

    def __init__(self, group: AbelianPGroup, n: int, values):
        self.group = group
        self.n = n
        if isinstance(values, dict):
            self.values = {k: v for k, v in values.items() if v != group.zero}
        else:
            vals = list(values)
            if len(vals) != n:
                raise ValueError("expected one value per position")
            self.values = {k + 1: v for k, v in enumerate(vals) if v != group.zero}
        for k in self.values:
            if not 1 <= k <= n:
                raise ValueError(f"index {k} outside [1, {n}]")

    def __call__(self, k: int):
        return self.values.get(k, self.group.zero)

    def support(self):
        return sorted(self.values)


def window_subgroup(g: GSequence, k: int, w: int) -> Subgroup:
    """Subgroup generated by the values in the window [k-w, k+w]."""
    if not 1 <= k <= g.n:
        raise ValueError(f"k={k} outside [1, {g.n}]")
    gens = [g(j) for j in range(max(1, k - w), min(g.n, k + w) + 1)]
    els = g.group.subgroup_generated(gens)
    return Subgroup(g.group, els, tuple(x for x in gens if x != g.group.zero))


def kernel_event_probability(g: GSequence, w: int | None = None,
                             mask: PrescriptionMask | None = None) -> Fraction:
    """P(M g = 0) for a Haar-uniform matrix on the band or mask: the exact
    product over rows of 1 / |subgroup generated by the visible values|."""
    if (w is None) == (mask is None):
        raise ValueError("pass exactly one of w or mask")
    G = g.group
    prob = Fraction(1)
    if mask is not None:
        if mask.n != g.n:
            raise ValueError("mask dimension differs from sequence length")
        rows: dict[int, list] = {}
        for i, j in mask.pairs():
            v = g(j)
            if v != G.zero:
                rows.setdefault(i, []).append(v)
        for i in range(1, g.n + 1):
            prob /= len(G.subgroup_generated(rows.get(i, ())))
        return prob
    for k in range(1, g.n + 1):
        gens = [g(j) for j in range(max(1, k - w), min(g.n, k + w) + 1)]
        prob /= len(G.subgroup_generated(gens))
    return prob


# ---------------------------------------------------------------------------
# shared window tables: subgroup ids for short value windows
# ---------------------------------------------------------------------------


class _GroupTables:
    """Join table over the subgroup lattice plus window-code lookups."""

    def __init__(self, G: AbelianPGroup):
        self.G = G
        lattice = lattice_of(G)
        self.t = len(lattice)
        elements = G.elements()
        self.element_index = {x: i for i, x in enumerate(elements)}
        by_els = {h.elements: i for i, h in enumerate(lattice.subgroups)}
        self.trivial_id = by_els[frozenset({G.zero})]
        self.full_id = 0  # lattice is sorted by nonincreasing order, G first
        self.order_exp = np.array(
            [round(math.log(h.order, G.p)) for h in lattice.subgroups], dtype=np.int64
        )
        join = np.empty((self.t, len(elements)), dtype=np.int64)
        for s, h in enumerate(lattice.subgroups):
            for e, x in enumerate(elements):
                join[s, e] = by_els[G.subgroup_join(h.elements, x)]
        self.join = join

    def window_tables(self, width: int):
        """sub id and order exponent for every base-|G| code of `width` digits.

        Codes put the newest value in the lowest digit, so appending a value
        x to code c gives c * |G| + x and dropping the oldest digit is a
        modulo by |G|^(width-1).
        """
        g = self.G.order
        total = g**width
        sub = np.empty(total, dtype=np.int32)
        sub[0] = self.trivial_id
        joinflat = self.join.ravel()
        for m in range(1, width + 1):
            lo, hi = g ** (m - 1), g**m
            idx = np.arange(lo, hi, dtype=np.int64)
            sub[lo:hi] = joinflat[sub[idx // g] * np.int64(g) + idx % g]
        return sub, self.order_exp[sub].astype(np.int16)


@lru_cache(maxsize=None)
def _tables_for(p: int, parts: tuple) -> _GroupTables:
    return _GroupTables(AbelianPGroup(p, parts))


@lru_cache(maxsize=32)
def _window_tables_for(p: int, parts: tuple, width: int):
    return _tables_for(p, parts).window_tables(width)


# ---------------------------------------------------------------------------
# results
# ---------------------------------------------------------------------------


@dataclass
class MomentValue:
    """An exact or estimated moment, tagged with how it was produced."""

    value: Fraction
    kind: str  # "hom" | "sur"
    method: str  # "enumeration" | "dp" | "monte_carlo"
    stderr: float | None = None
    group: str | None = None
    n: int | None = None
    w: int | None = None
    p: int | None = None
    trials: int | None = None
    precision_limit_count: int = 0

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind,
            "method": self.method,
            "n": self.n,
            "w": self.w,
            "p": self.p,
            "group": self.group,
            "value_num": self.value.numerator,
            "value_den": self.value.denominator,
            "stderr": self.stderr,
        }


def _check_kind(kind: str) -> None:
    if kind not in ("hom", "sur"):
        raise ValueError(f"kind must be 'hom' or 'sur', got {kind!r}")


def _tag(mv: MomentValue, G, n, w) -> MomentValue:
    mv.group = G.to_string()
    mv.n = n
    mv.w = w
    mv.p = G.p
    return mv


# ---------------------------------------------------------------------------
# enumeration (the oracle route)
# ---------------------------------------------------------------------------


def moment_enumerate(G: AbelianPGroup, n: int, w: int | None = None,
                     mask: PrescriptionMask | None = None, kind: str = "hom",
                     cap: int = ENUMERATION_CAP) -> MomentValue:
    """Exact moment by summing the kill probability over all |G|^n sequences.

    The band path is vectorised: every factor 1/|H| is a power of 1/p, so
    sequences are binned by their total exponent and the sum is assembled as
    one exact rational.
    """
    _check_kind(kind)
    if (w is None) == (mask is None):
        raise ValueError("pass exactly one of w or mask")
    if n < 0:
        raise ValueError("n must be >= 0")
    total = G.order**n
    if total > cap:
        raise TooLargeError(f"|G|^n = {total} exceeds the cap {cap}")
    if n == 0:
        value = Fraction(1) if (kind == "hom" or G.order == 1) else Fraction(0)
        return _tag(MomentValue(value, kind, "enumeration"), G, n, w)
    if mask is not None:
        return _moment_enumerate_mask(G, n, mask, kind)

    tables = _tables_for(G.p, G.parts)
    g = G.order
    width = 2 * w + 1
    sub_table, exp_table = _window_tables_for(G.p, G.parts, width)
    joinflat = tables.join.ravel()

    idx = np.arange(total, dtype=np.int64)
    expsum = np.zeros(total, dtype=np.int64)
    gen = np.full(total, tables.trivial_id, dtype=np.int64)
    win = np.zeros(total, dtype=np.int64)
    drop = g ** (2 * w)
    for j in range(1, n + 1):
        digit = (idx // g ** (j - 1)) % g
        win = (win % drop) * g + digit
        if j >= w + 1:
            expsum += exp_table[win]
        gen = joinflat[gen * g + digit]
    for k in range(max(1, n - w + 1), n + 1):
        ell = n - k + w + 1
        expsum += exp_table[win % g**ell]

    if kind == "sur":
        keep = gen == tables.full_id
        expsum = expsum[keep]
    if expsum.size == 0:
        return _tag(MomentValue(Fraction(0), kind, "enumeration"), G, n, w)
    counts = np.bincount(expsum)
    emax = len(counts) - 1
    numerator = 0
    for e, c in enumerate(counts.tolist()):
        numerator += c * G.p ** (emax - e)
    value = Fraction(numerator, G.p**emax)
    return _tag(MomentValue(value, kind, "enumeration"), G, n, w)


def _moment_enumerate_mask(G, n, mask, kind) -> MomentValue:
    import itertools

    if G.order**n > MASK_ENUMERATION_CAP:
        raise TooLargeError("mask enumeration cap exceeded")
    row_support = {i: [] for i in range(1, n + 1)}
    for i, j in mask.pairs():
        row_support[i].append(j)
    elements = G.elements()
    total = Fraction(0)
    for combo in itertools.product(range(G.order), repeat=n):
        vals = [elements[c] for c in combo]
        if kind == "sur" and len(G.subgroup_generated(vals)) != G.order:
            continue
        prob = Fraction(1)
        for i in range(1, n + 1):
            gens = [vals[j - 1] for j in row_support[i]]
            prob /= len(G.subgroup_generated(gens))
        total += prob
    return _tag(MomentValue(total, kind, "enumeration"), G, n, None)


# ---------------------------------------------------------------------------
# dynamic programs
# ---------------------------------------------------------------------------


def moment_dp(G: AbelianPGroup, n: int, w: int, kind: str = "hom",
              compressed: bool = True, state_cap: int = DP_STATE_CAP) -> MomentValue:
    """Exact moment by a left-to-right transfer pass; equals enumeration.

    The default state keeps, for each suffix length up to the window span,
    the subgroup generated by that suffix (a chain), which collapses the
    window-tuple state without changing any emitted factor; the equality of
    the two state spaces is exercised over the full oracle grid in the test
    suite.  Set compressed=False for the literal window-tuple state.
    """
    _check_kind(kind)
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        value = Fraction(1) if (kind == "hom" or G.order == 1) else Fraction(0)
        return _tag(MomentValue(value, kind, "dp"), G, n, w)
    if not compressed:
        return _moment_dp_windowed(G, n, w, kind, state_cap)

    tables = _tables_for(G.p, G.parts)
    p = G.p
    width = 2 * w + 1
    join = tables.join
    order_exp = tables.order_exp
    elements_count = G.order
    trivial = tables.trivial_id

    # state: (chain c[0..2w], gen) with c[m] = <last m+1 values>; weight Fraction
    init_chain = (trivial,) * width
    states = {(init_chain, trivial): Fraction(1)}
    for j in range(1, n + 1):
        new_states: dict = {}
        emit = j >= w + 1
        for (chain, gen), weight in states.items():
            for d in range(elements_count):
                c0 = int(join[trivial, d])
                new_chain = (c0,) + tuple(int(join[chain[m], d]) for m in range(width - 1))
                factor_exp = order_exp[new_chain[width - 1]] if emit else None
                ngen = int(join[gen, d])
                wt = weight if factor_exp is None else weight / p**int(factor_exp)
                key = (new_chain, ngen)
                if key in new_states:
                    new_states[key] += wt
                else:
                    new_states[key] = wt
        if len(new_states) > state_cap:
            raise StateSpaceTooLargeError(f"{len(new_states)} DP states exceed cap")
        states = new_states

    total = Fraction(0)
    full = tables.full_id
    for (chain, gen), weight in states.items():
        if kind == "sur" and gen != full:
            continue
        tail = Fraction(1)
        for k in range(max(1, n - w + 1), n + 1):
            ell = n - k + w + 1
            tail /= p ** int(order_exp[chain[ell - 1]])
        total += weight * tail
    return _tag(MomentValue(total, kind, "dp"), G, n, w)


def _moment_dp_windowed(G, n, w, kind, state_cap) -> MomentValue:
    tables = _tables_for(G.p, G.parts)
    g = G.order
    p = G.p
    width = 2 * w + 1
    if g ** (2 * w) * tables.t > state_cap:
        raise StateSpaceTooLargeError("window-state space exceeds cap")
    sub_table, exp_table = _window_tables_for(G.p, G.parts, width)
    joinflat = tables.join.ravel()
    drop = g ** (2 * w)

    # state: (code over last 2w values, gen id), newest value in lowest digit
    states = {(0, tables.trivial_id): Fraction(1)}
    for j in range(1, n + 1):
        new_states: dict = {}
        emit = j >= w + 1
        for (code, gen), weight in states.items():
            base = code * g
            for d in range(g):
                full_code = base + d
                wt = weight / p ** int(exp_table[full_code]) if emit else weight
                key = (full_code % drop, int(joinflat[gen * g + d]))
                if key in new_states:
                    new_states[key] += wt
                else:
                    new_states[key] = wt
        states = new_states

    total = Fraction(0)
    for (code, gen), weight in states.items():
        if kind == "sur" and gen != tables.full_id:
            continue
        tail = Fraction(1)
        for k in range(max(1, n - w + 1), n + 1):
            ell = n - k + w + 1
            tail /= p ** int(exp_table[code % g**ell])
        total += weight * tail
    return _tag(MomentValue(total, kind, "dp"), G, n, w)


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------


def moment_mc(G: AbelianPGroup, mask: PrescriptionMask, context: PrimePower,
              seed: int, trials: int, kind: str = "sur",
              K_init: int = 32, K_max: int = 1024) -> MomentValue:
    """Mean of |Sur(cok, G)| (or |Hom|) over sampled cokernels.

    Trials that exhaust the precision budget are counted separately and
    excluded from the mean; the summand is heavy-tailed near criticality, so
    the reported standard error is advisory rather than a confidence claim.
    """
    _check_kind(kind)
    if trials < 1:
        raise ValueError("trials must be >= 1")
    from .groups import hom_count, sur_count

    lattice = lattice_of(G)
    memo: dict[tuple, int] = {}
    counts = []
    limited = 0
    for trial in range(trials):
        try:
            cls = cokernel(mask, context, SampleKey(seed, trial), K_init, K_max)
        except PrecisionLimitError:
            limited += 1
            continue
        parts = cls.group.parts
        if parts not in memo:
            A = cls.group
            memo[parts] = sur_count(A, G, lattice) if kind == "sur" else hom_count(A, G)
        counts.append(memo[parts])
    if not counts:
        raise PrecisionLimitError("every trial exhausted the precision budget", K_max)
    total = sum(counts)
    m = len(counts)
    mean = Fraction(total, m)
    if m > 1:
        var = sum((c - total / m) ** 2 for c in counts) / (m - 1)
        stderr = math.sqrt(var / m)
    else:
        stderr = float("nan")
    mv = MomentValue(mean, kind, "monte_carlo", stderr=stderr,
                     trials=m, precision_limit_count=limited)
    w = mask.bandwidth if mask.is_band else None
    return _tag(mv, G, mask.n, w)


# ---------------------------------------------------------------------------
# analytic envelopes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AlphaBetaTable:
    """Recursive envelope used to bound window-sum contributions.

    alpha_1 = 1, beta_i = sum of earlier alphas, and
    alpha_i = (q beta_i + 2t)^2 exp(q^2 beta_i) for i > 1.  Evaluated in
    double precision; this is a diagnostic, not part of exact results.
    """

    t: int
    q: float
    alpha: tuple
    beta: tuple
    exp_rel_error: float

    def to_json_dict(self) -> dict:
        return {
            "t": self.t,
            "q": self.q,
            "alpha": list(self.alpha),
            "beta": list(self.beta),
            "exp_rel_error": self.exp_rel_error,
        }


def alpha_beta(t: int, q) -> AlphaBetaTable:
    if t < 1:
        raise ValueError("t must be >= 1")
    q = float(q)
    if q < 0:
        raise ValueError("q must be >= 0")
    alpha = [1.0]
    beta = [0.0]
    for _ in range(2, t + 1):
        b = sum(alpha)
        beta.append(b)
        try:
            a = (q * b + 2 * t) ** 2 * math.exp(q * q * b)
        except OverflowError:
            a = math.inf
        alpha.append(a)
    eps = 2.2e-16
    rel = max((1.0 + q * q * b) * eps for b in beta) if beta else eps
    return AlphaBetaTable(t, q, tuple(alpha), tuple(beta), rel)


def hom_moment_bound(n: int, w: int, p: int, G: AbelianPGroup | None = None) -> float:
    """Upper bound 1 + (q + 4)^2 exp(q^2) with q = 2 n p^-w on the expected
    kernel size of the mod-p reduction; stated for the prime cyclic target."""
    if G is not None and (G.p != p or G.parts != (1,)):
        raise UnsupportedGroupError("bound is stated for the prime cyclic group")
    if n < 0 or w < 0:
        raise ValueError("n and w must be nonnegative")
    q = 2.0 * n * float(p) ** (-w)
    return 1.0 + (q + 4.0) ** 2 * math.exp(q * q)
