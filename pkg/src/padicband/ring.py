"""Exact arithmetic over Z/p^K: residues, valuations, unit inversion.

Exact rationals are handled by :class:`fractions.Fraction` from the standard
library, re-exported here as ``ExactRational``; it already guarantees lowest
terms and a positive denominator.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .errors import NonUnitError

ExactRational = Fraction


def is_prime(p: int) -> bool:
    """Trial-division primality check; inputs here are always small."""
    if p < 2:
        return False
    d = 2
    while d * d <= p:
        if p % d == 0:
            return False
        d += 1
    return True


@dataclass(frozen=True)
class PrimePower:
    """The coefficient ring Z/p^K: a prime p and precision exponent K >= 1."""

    p: int
    K: int

    def __post_init__(self):
        if not is_prime(self.p):
            raise ValueError(f"p={self.p} is not prime")
        if self.K < 1:
            raise ValueError(f"K={self.K} must be >= 1")

    @property
    def modulus(self) -> int:
        return self.p**self.K


class Residue:
    """A canonical representative in [0, p^K); reduction happens eagerly."""

    __slots__ = ("value", "context")

    def __init__(self, value: int, context: PrimePower):
        self.value = value % context.modulus
        self.context = context

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Residue)
            and self.value == other.value
            and self.context == other.context
        )

    def __hash__(self) -> int:
        return hash((self.value, self.context))

    def __repr__(self) -> str:
        return f"Residue({self.value} mod {self.context.p}^{self.context.K})"

    def __add__(self, other: "Residue") -> "Residue":
        self._check(other)
        return Residue(self.value + other.value, self.context)

    def __sub__(self, other: "Residue") -> "Residue":
        self._check(other)
        return Residue(self.value - other.value, self.context)

    def __mul__(self, other: "Residue") -> "Residue":
        self._check(other)
        return Residue(self.value * other.value, self.context)

    def _check(self, other: "Residue") -> None:
        if self.context != other.context:
            raise ValueError("residues live over different rings")


def valuation_int(value: int, p: int, cap: int) -> int:
    """Largest v <= cap with p^v | value; value == 0 returns the cap."""
    if value == 0:
        return cap
    v = 0
    while value % p == 0 and v < cap:
        value //= p
        v += 1
    return v


def padic_valuation(x: Residue) -> int:
    """Valuation in [0, K]; K is the 'indistinguishable from zero' sentinel."""
    return valuation_int(x.value, x.context.p, x.context.K)


def inv_mod_pk(x: Residue) -> Residue:
    """Inverse of a unit residue; raises NonUnitError when p divides x."""
    if x.value % x.context.p == 0:
        raise NonUnitError(f"{x!r} is divisible by {x.context.p}")
    return Residue(pow(x.value, -1, x.context.modulus), x.context)
