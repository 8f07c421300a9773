"""Number-theoretic primitives: 2-adic valuation, the epsilon/lambda invariants,
Legendre symbols and Hilbert symbols over Q_2 and Q_l (l odd)."""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from math import isqrt

PRIME_BOUND = 10**6


def nu2(k: int) -> int:
    """Exponent of the largest power of 2 dividing ``k``."""
    if k == 0:
        raise ValueError("nu2 is undefined at 0")
    k = abs(k)
    return (k & -k).bit_length() - 1


def valuation(k: int, p: int) -> int:
    if k == 0:
        raise ValueError("valuation is undefined at 0")
    v = 0
    while k % p == 0:
        k //= p
        v += 1
    return v


@lru_cache(maxsize=None)
def is_prime(k: int, bound: int = PRIME_BOUND) -> bool:
    if k < 2:
        return False
    if k > bound * bound:
        raise ValueError(f"{k} exceeds the trial-division bound")
    if k % 2 == 0:
        return k == 2
    for d in range(3, isqrt(k) + 1, 2):
        if k % d == 0:
            return False
    return True


def primes_up_to(limit: int) -> list[int]:
    return [q for q in range(2, limit + 1) if is_prime(q)]


def check_odd_prime(p: int) -> int:
    if not isinstance(p, int) or p < 3 or not is_prime(p):
        raise ValueError(f"{p!r} is not an odd prime")
    return p


def epsilon(p: int) -> int:
    return nu2(check_odd_prime(p) - 1)


def lam(p: int) -> int:
    return nu2(check_odd_prime(p) ** 2 - 1)


# ``lambda`` is a keyword, so the public alias carries a trailing underscore.
lambda_ = lam


def legendre(a: int, p: int) -> int:
    check_odd_prime(p)
    a %= p
    if a == 0:
        return 0
    return 1 if pow(a, (p - 1) // 2, p) == 1 else -1


def _split(x, p: int) -> tuple[int, Fraction]:
    """Write a nonzero rational as p^alpha * unit."""
    x = Fraction(x)
    if x == 0:
        raise ValueError("Hilbert symbols need nonzero arguments")
    alpha = 0
    num, den = x.numerator, x.denominator
    while num % p == 0:
        num //= p
        alpha += 1
    while den % p == 0:
        den //= p
        alpha -= 1
    return alpha, Fraction(num, den)


def _unit_mod(u: Fraction, modulus: int) -> int:
    # a p-adic unit given as a fraction, reduced mod p^k
    return u.numerator * pow(u.denominator, -1, modulus) % modulus


def hilbert_odd(a, b, ell: int) -> int:
    check_odd_prime(ell)
    alpha, u = _split(a, ell)
    beta, v = _split(b, ell)
    sign = (-1) ** (alpha * beta * ((ell - 1) // 2) % 2)
    lu = legendre(_unit_mod(u, ell), ell)
    lv = legendre(_unit_mod(v, ell), ell)
    return sign * lu ** (beta % 2) * lv ** (alpha % 2)


def hilbert_two(a, b) -> int:
    alpha, u = _split(a, 2)
    beta, v = _split(b, 2)
    u8, v8 = _unit_mod(u, 8), _unit_mod(v, 8)
    e = ((u8 - 1) // 2) * ((v8 - 1) // 2) + alpha * (v8 * v8 - 1) // 8 + beta * (u8 * u8 - 1) // 8
    return -1 if e % 2 else 1


def hilbert_real(a, b) -> int:
    return -1 if Fraction(a) < 0 and Fraction(b) < 0 else 1


def hilbert(a, b, place) -> int:
    """Hilbert symbol at ``place``: 'real', 2, or an odd prime."""
    if place == "real":
        return hilbert_real(a, b)
    if place == 2:
        return hilbert_two(a, b)
    return hilbert_odd(a, b, place)
