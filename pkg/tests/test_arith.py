import itertools

import pytest
from hypothesis import given, strategies as st

from bpcalc.arith import (epsilon, hilbert, hilbert_odd, hilbert_real, hilbert_two, is_prime, lam,
                          legendre, nu2, primes_up_to)

SAMPLE = [-1, 2, 3, 5, 7, 11, 13]
SMALL_PRIMES = primes_up_to(50)


def locally_soluble(a: int, b: int, p: int, k: int) -> bool:
    """Brute force: a x^2 + b y^2 = z^2 has a primitive solution mod p^k."""
    mod = p ** k
    squares = {}
    for x in range(mod):
        squares.setdefault(x * x % mod, []).append(x)
    for x, y in itertools.product(range(mod), repeat=2):
        rhs = (a * x * x + b * y * y) % mod
        for z in squares.get(rhs, ()):
            if x % p or y % p or z % p:
                return True
    return False


def test_nu2_examples():
    assert nu2(1) == 0
    assert nu2(48) == 4
    assert nu2(7 * 7 - 1) == 4
    with pytest.raises(ValueError):
        nu2(0)


def test_epsilon_lambda_examples():
    assert epsilon(5) == 2
    assert lam(3) == 3
    assert lam(7) == 4
    with pytest.raises(ValueError):
        epsilon(9)


def test_legendre_examples():
    assert legendre(2, 7) == 1
    assert legendre(0, 5) == 0
    for p in SMALL_PRIMES[1:]:
        assert (legendre(-1, p) == 1) == (p % 4 == 1)


def test_hilbert_examples():
    for p in SMALL_PRIMES[1:]:
        if p % 4 == 3:
            assert hilbert_odd(-1, p, p) == -1
            assert hilbert_two(-1, p) == -1
        assert hilbert_odd(-1, 2, p) == 1
    assert hilbert_two(-1, 2) == 1
    assert hilbert_two(2, 7) == 1
    assert hilbert_odd(3, 5, 7) == 1


@pytest.mark.parametrize("a,b", list(itertools.product(SAMPLE, repeat=2)))
def test_two_adic_symbol_against_solubility(a, b):
    assert (hilbert_two(a, b) == 1) == locally_soluble(a, b, 2, 5)


@pytest.mark.parametrize("ell", [3, 5, 7])
def test_odd_symbol_against_solubility(ell):
    for a, b in itertools.product(SAMPLE, repeat=2):
        assert (hilbert_odd(a, b, ell) == 1) == locally_soluble(a, b, ell, 2), (a, b)


def test_bimultiplicative_and_symmetric():
    places = [2] + SMALL_PRIMES[1:6]
    for a, b, c in itertools.product(SAMPLE, repeat=3):
        for v in places:
            assert hilbert(a * b, c, v) == hilbert(a, c, v) * hilbert(b, c, v)
            assert hilbert(a, b, v) == hilbert(b, a, v)


@given(st.sampled_from([-1] + SMALL_PRIMES), st.sampled_from([-1] + SMALL_PRIMES))
def test_hilbert_reciprocity(a, b):
    top = max(abs(a), abs(b), 3)
    prod = hilbert_two(a, b) * hilbert_real(a, b)
    for ell in SMALL_PRIMES[1:]:
        if ell <= top:
            prod *= hilbert_odd(a, b, ell)
    assert prod == 1


@given(st.fractions().filter(lambda x: x != 0), st.fractions().filter(lambda x: x != 0))
def test_rational_inputs_are_reduced(x, y):
    # squares do not change the symbol
    assert hilbert_two(x, y) == hilbert_two(x * 4, y * 9)
    assert hilbert_odd(x, y, 3) == hilbert_odd(x * 25, y, 3)


def test_lambda_is_epsilon_plus_one_exactly_for_1_mod_4():
    # lambda = nu2(p - 1) + nu2(p + 1), and nu2(p + 1) = 1 iff p = 1 mod 4
    for p in primes_up_to(10**4)[1:]:
        assert (lam(p) == epsilon(p) + 1) == (p % 4 == 1)
        if p % 4 == 3:
            assert epsilon(p) == 1 and lam(p) >= 3


@given(st.integers(min_value=2, max_value=5000))
def test_is_prime_matches_sympy(k):
    from sympy import isprime
    assert is_prime(k) == isprime(k)
