from fractions import Fraction

import pytest

from bruteforce import (
    aut_order_bruteforce,
    groups_up_to,
    hom_count_bruteforce,
    sur_count_bruteforce,
)
from padicband.errors import PrimeMismatchError, TooLargeError
from padicband.groups import (
    AbelianPGroup,
    aut_order,
    cohen_lenstra_mass,
    cohen_lenstra_reference,
    corank_mass,
    corank_reference,
    enumerate_subgroups,
    hom_count,
    lattice_of,
    moebius_to_top,
    partitions_up_to,
    sur_count,
)

Z2 = AbelianPGroup(2, (1,))
Z4 = AbelianPGroup(2, (2,))
V4 = AbelianPGroup(2, (1, 1))
TRIV = AbelianPGroup(2, ())


def test_canonical_string_round_trip():
    assert AbelianPGroup(2, (2, 1)).to_string() == "2^[2,1]"
    assert TRIV.to_string() == "2^[]"
    for text in ("2^[]", "3^[1]", "2^[3,2,2,1]"):
        assert AbelianPGroup.from_string(text).to_string() == text
    with pytest.raises(ValueError):
        AbelianPGroup.from_string("6^[1]")
    with pytest.raises(ValueError):
        AbelianPGroup(2, (1, 2))  # not nonincreasing


@pytest.mark.parametrize(
    "G,count",
    [(Z2, 2), (V4, 5), (Z4, 3), (AbelianPGroup(2, (1, 1, 1)), 16), (AbelianPGroup(3, (1, 1)), 6)],
)
def test_subgroup_counts(G, count):
    lattice = enumerate_subgroups(G)
    assert len(lattice) == count
    assert lattice.subgroups[0].order == G.order
    assert lattice.subgroups[-1].order == 1
    orders = [h.order for h in lattice.subgroups]
    assert orders == sorted(orders, reverse=True)


def test_subgroup_cap():
    with pytest.raises(TooLargeError):
        enumerate_subgroups(AbelianPGroup(2, (11,)), cap=1024)


def test_moebius_examples():
    lattice = enumerate_subgroups(V4)
    assert moebius_to_top(lattice, lattice.subgroups[0]) == 1
    assert moebius_to_top(lattice, lattice.subgroups[-1]) == 2
    chain = enumerate_subgroups(AbelianPGroup(5, (1,)))
    assert moebius_to_top(chain, chain.subgroups[-1]) == -1


def test_hom_sur_aut_examples():
    assert hom_count(Z4, Z2) == 2
    assert hom_count(TRIV, V4) == 1
    assert hom_count(V4, V4) == 16
    assert sur_count(Z2, Z2) == 1
    assert sur_count(V4, Z2) == 3
    assert sur_count(Z2, Z4) == 0
    assert aut_order(Z2) == 1
    assert aut_order(V4) == 6
    assert aut_order(Z4) == 2
    assert aut_order(TRIV) == 1
    with pytest.raises(PrimeMismatchError):
        hom_count(Z2, AbelianPGroup(3, (1,)))
    with pytest.raises(PrimeMismatchError):
        sur_count(Z2, AbelianPGroup(3, (1,)))


def test_hom_symmetry():
    groups = groups_up_to(2, 32) + groups_up_to(3, 27)
    for A in groups:
        for B in groups:
            if A.p == B.p:
                assert hom_count(A, B) == hom_count(B, A)


def test_hom_against_torsion_oracle_small():
    for A in groups_up_to(2, 16):
        for B in groups_up_to(2, 16):
            assert hom_count(A, B) == hom_count_bruteforce(A, B)


def test_sur_against_enumeration_oracle_small():
    for A in groups_up_to(2, 16):
        for B in groups_up_to(2, 16):
            assert sur_count(A, B) == sur_count_bruteforce(A, B)
    for A in groups_up_to(3, 27):
        for B in groups_up_to(3, 27):
            assert sur_count(A, B) == sur_count_bruteforce(A, B)


def test_aut_against_dfs_oracle_small():
    for G in groups_up_to(2, 32) + groups_up_to(3, 27):
        expected = aut_order_bruteforce(G)
        if expected is not None:
            assert aut_order(G) == expected, G.to_string()


def test_aut_equals_sur_endomorphisms():
    for G in groups_up_to(2, 64) + groups_up_to(3, 81):
        assert aut_order(G) == sur_count(G, G), G.to_string()


def test_partition_of_homs_identity():
    # every hom onto some subgroup is a surjection onto exactly one of them
    for G in groups_up_to(2, 32) + groups_up_to(3, 27):
        lattice = lattice_of(G)
        for A in (Z2, Z4, V4, AbelianPGroup(2, (2, 1))):
            if A.p != G.p:
                continue
            total = sum(
                sur_count(A, AbelianPGroup(G.p, h.partition_type()))
                for h in lattice.subgroups
            )
            assert total == hom_count(A, G), (A.to_string(), G.to_string())


def test_subgroup_partition_types():
    # Z/4+Z/2: trivial, three Z/2, two Z/4, one V4, and the full group
    lattice = enumerate_subgroups(AbelianPGroup(2, (2, 1)))
    types = sorted(h.partition_type() for h in lattice.subgroups)
    assert types == sorted([(), (1,), (1,), (1,), (2,), (2,), (1, 1), (2, 1)])


def test_cohen_lenstra_masses():
    assert abs(cohen_lenstra_mass(TRIV).as_float() - 0.2887880951) < 1e-9
    assert abs(cohen_lenstra_mass(Z4).as_float() - 0.2887880951 / 2) < 1e-7
    assert abs(cohen_lenstra_mass(V4).as_float() - 0.2887880951 / 6) < 1e-7
    est = cohen_lenstra_mass(TRIV, Fraction(1, 10**12))
    assert est.error_bound < Fraction(1, 10**12)


def test_corank_masses():
    assert abs(corank_mass(0, 2).as_float() - 0.2887881) < 1e-6
    assert abs(corank_mass(1, 2).as_float() - 0.5775762) < 1e-6
    assert abs(corank_mass(2, 2).as_float() - 0.1283503) < 1e-6


def test_corank_masses_sum_to_one():
    # partial products overestimate, so allow the certified error upward
    estimates = [corank_mass(k, 2) for k in range(9)]
    total = sum(e.value for e in estimates)
    slack = sum(e.error_bound for e in estimates)
    assert 1 - Fraction(1, 1000) < total <= 1 + slack


def test_cohen_lenstra_mass_increasing_in_order():
    prev = Fraction(0)
    for m in range(0, 7):
        total = sum(
            cohen_lenstra_mass(AbelianPGroup(2, parts)).value
            for parts in partitions_up_to(m)
        )
        assert prev < total <= 1
        prev = total


def test_error_bound_decreases_with_epsilon():
    bounds = [
        cohen_lenstra_mass(TRIV, Fraction(1, 10**k)).error_bound for k in (3, 6, 9)
    ]
    assert bounds[0] > bounds[1] > bounds[2]


def test_reference_distributions():
    ref = cohen_lenstra_reference(2, 16)
    assert set(ref.values) >= {"2^[]", "2^[1]", "2^[2]", "2^[1,1]", "2^[4]", "2^[2,2]"}
    assert all(0 <= v.value <= 1 for v in ref.values.values())
    assert ref.total_mass() <= 1
    rk = corank_reference(2, 6)
    assert set(rk.values) == set(range(7))
