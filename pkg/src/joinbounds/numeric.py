"""Exact-arithmetic helpers: rationals, powers of two, log-space quantities."""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import Decimal, localcontext
from fractions import Fraction
from functools import reduce
from typing import Iterable

__all__ = [
    "Log2Value",
    "as_fraction",
    "exact_log2",
    "floor_pow2",
    "format_float",
    "format_rational",
    "lcm_of_denominators",
    "log2_cost",
    "rational_pow_le",
]


def as_fraction(value) -> Fraction:
    """Coerce ints, Fractions and ``"p/q"`` strings. Floats are taken exactly."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("bool is not a rational")
    if isinstance(value, (int, float, str)):
        return Fraction(value)
    raise TypeError(f"cannot interpret {value!r} as a rational")


def format_rational(q: Fraction | int) -> str:
    q = Fraction(q)
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def format_float(x: float) -> str:
    return format(x, ".12g")


def exact_log2(n: int) -> int | None:
    """log2(n) if n is a positive power of two, else None."""
    if n >= 1 and n & (n - 1) == 0:
        return n.bit_length() - 1
    return None


def log2_cost(n: int) -> tuple[Fraction, bool]:
    """Rational stand-in for log2(n).

    Exact for powers of two. Otherwise the binary64 value of log2(n) is
    converted exactly to a Fraction; the second item flags that perturbation.
    """
    if n < 1:
        raise ValueError("log2 cost needs n >= 1")
    k = exact_log2(n)
    if k is not None:
        return Fraction(k), False
    return Fraction(math.log2(n)), True


def lcm_of_denominators(values: Iterable[Fraction]) -> int:
    return reduce(math.lcm, (Fraction(v).denominator for v in values), 1)


def rational_pow_le(lhs: int, rhs_factors: Iterable[tuple[int, Fraction]],
                    max_bits: int = 1 << 22) -> bool | None:
    """Decide ``lhs <= prod(base ** exp)`` exactly, or return None if too costly.

    Raises both sides to the common exponent denominator and compares
    integers. ``None`` means the integers would exceed ``max_bits``.
    """
    factors = [(int(b), Fraction(e)) for b, e in rhs_factors]
    if any(b < 0 for b, _ in factors) or any(e < 0 for _, e in factors):
        raise ValueError("bases and exponents must be non-negative")
    for b, e in factors:
        if b == 0 and e > 0:
            return lhs <= 0
    factors = [(b, e) for b, e in factors if e != 0 and b != 1]
    L = lcm_of_denominators(e for _, e in factors)
    est = L * max(lhs, 1).bit_length() + sum(int(e * L) * b.bit_length() for b, e in factors)
    if est > max_bits:
        return None
    right = 1
    for b, e in factors:
        right *= b ** int(e * L)
    return lhs ** L <= right


def floor_pow2(y: Fraction) -> int:
    """floor(2**y) for a non-negative rational y, computed exactly."""
    y = Fraction(y)
    if y < 0:
        raise ValueError("exponent must be non-negative")
    whole, rest = divmod(y.numerator, y.denominator)
    if rest == 0:
        return 1 << whole
    p, q = y.numerator, y.denominator
    # Integer q-th root of 2**p when that is cheap; high-precision decimal otherwise.
    if p <= 1 << 16:
        k = _iroot(1 << p, q)
        return k
    with localcontext() as ctx:
        ctx.prec = 80
        approx = Decimal(2) ** (Decimal(p) / Decimal(q))
    k = int(approx)
    return k


def _iroot(n: int, q: int) -> int:
    """Largest k with k**q <= n."""
    if n < 2:
        return n
    k = 1 << ((n.bit_length() + q - 1) // q)
    while True:
        nxt = ((q - 1) * k + n // k ** (q - 1)) // q
        if nxt >= k:
            break
        k = nxt
    while k ** q > n:
        k -= 1
    while (k + 1) ** q <= n:
        k += 1
    return k


@dataclass(frozen=True)
class Log2Value:
    """A positive quantity held as its base-2 logarithm.

    ``log2_exact`` is set when the exponent is known as an exact rational.
    ``log2`` is always available; ``value`` may overflow to ``inf``.
    A zero quantity is represented with ``log2 = -inf``.
    """

    log2: float
    log2_exact: Fraction | None = None

    @classmethod
    def from_exact(cls, exponent: Fraction) -> "Log2Value":
        exponent = Fraction(exponent)
        return cls(float(exponent), exponent)

    @classmethod
    def zero(cls) -> "Log2Value":
        return cls(-math.inf, None)

    @property
    def value(self) -> float:
        if self.log2 == -math.inf:
            return 0.0
        try:
            return 2.0 ** self.log2
        except OverflowError:
            return math.inf

    @property
    def exact_int(self) -> int | None:
        """The value as an int when the exact exponent is a non-negative integer."""
        e = self.log2_exact
        if e is not None and e.denominator == 1 and e >= 0:
            return 1 << e.numerator
        return None
