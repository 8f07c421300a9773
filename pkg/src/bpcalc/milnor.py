"""Mod-2 Milnor K-theory of C, R, Q_p, Q_2 and Q with canonical bases,
the coefficient ring k^M[tau], and localization of symbols over Q."""

from __future__ import annotations

import re
from dataclasses import dataclass, field as dc_field
from functools import lru_cache
from typing import Iterable

from . import arith

DEFAULT_PRIMES = (2, 3, 5, 7, 11, 13)


@dataclass(frozen=True, order=True)
class BaseField:
    tag: str  # "C", "R", "Qp", "Q2", "Q"
    p: int | None = None

    def __post_init__(self):
        if self.tag not in ("C", "R", "Qp", "Q2", "Q"):
            raise ValueError(f"unknown field tag {self.tag!r}")
        if self.tag == "Qp":
            arith.check_odd_prime(self.p)
        elif self.p is not None:
            raise ValueError("only Qp carries a prime")

    @classmethod
    def parse(cls, text: str) -> "BaseField":
        text = text.strip()
        if text in ("C", "R", "Q"):
            return cls(text)
        m = re.fullmatch(r"Q(?:p:?|_)?(\d+)", text)
        if not m:
            raise ValueError(f"cannot parse field {text!r}")
        p = int(m.group(1))
        return cls("Q2") if p == 2 else cls("Qp", p)

    def __str__(self):
        return f"Qp:{self.p}" if self.tag == "Qp" else self.tag

    @property
    def p_mod4(self) -> int | None:
        return self.p % 4 if self.tag == "Qp" else None


C = BaseField("C")
R = BaseField("R")
Q = BaseField("Q")
Q2 = BaseField("Q2")


def Qp(p: int) -> BaseField:
    return BaseField("Qp", p)


@dataclass(frozen=True, order=True)
class Place:
    tag: str  # "real", "two", "odd"
    p: int | None = None

    def __post_init__(self):
        if self.tag == "odd":
            arith.check_odd_prime(self.p)
        elif self.tag not in ("real", "two") or self.p is not None:
            raise ValueError(f"bad place {self.tag!r} {self.p!r}")

    @classmethod
    def of(cls, v) -> "Place":
        if isinstance(v, Place):
            return v
        if v in ("real", "R", "inf", "oo"):
            return cls("real")
        v = int(v)
        return cls("two") if v == 2 else cls("odd", v)

    def completion(self) -> BaseField:
        if self.tag == "real":
            return R
        if self.tag == "two":
            return Q2
        return Qp(self.p)

    def __str__(self):
        return {"real": "real", "two": "2"}.get(self.tag) or str(self.p)

    @property
    def sort_key(self):
        return (0, 0) if self.tag == "real" else (1, 2 if self.tag == "two" else self.p)


def default_places(primes: Iterable[int]) -> list[Place]:
    return [Place("real")] + [Place.of(q) for q in sorted(set(primes))]


# --------------------------------------------------------------------------
# symbol tables


def _rho_name(k: int) -> str:
    return "1" if k == 0 else ("rho" if k == 1 else f"rho^{k}")


def _rho_exponent(name: str) -> int | None:
    if name == "1":
        return 0
    if name == "rho":
        return 1
    m = re.fullmatch(r"rho\^(\d+)", name)
    return int(m.group(1)) if m else None


def _bracket_prime(name: str) -> int | None:
    m = re.fullmatch(r"\[(\d+)\]", name)
    return int(m.group(1)) if m else None


def _a_prime(name: str) -> int | None:
    m = re.fullmatch(r"a_(\d+)", name)
    return int(m.group(1)) if m else None


class KTheory:
    """Milnor K-theory mod 2 of one field, restricted to a prime window over Q.

    Symbols are plain strings; classes are frozensets of symbol names.
    """

    def __init__(self, fld: BaseField, primes: Iterable[int] = DEFAULT_PRIMES):
        self.field = fld
        self.primes = tuple(sorted(set(primes))) if fld.tag == "Q" else ()
        for q in self.primes:
            if not arith.is_prime(q):
                raise ValueError(f"{q} is not prime")
        self._mul_cache: dict[tuple[str, str], frozenset] = {}
        self._order = {}

    # -- basis ---------------------------------------------------------
    @property
    def max_degree(self) -> int | None:
        return {"C": 0, "R": None, "Q": None, "Qp": 2, "Q2": 2}[self.field.tag]

    def basis(self, degree: int) -> list[str]:
        if degree < 0:
            return []
        tag = self.field.tag
        if tag == "C":
            return ["1"] if degree == 0 else []
        if tag == "R":
            return [_rho_name(degree)]
        if tag == "Q":
            if degree == 0:
                return ["1"]
            if degree == 1:
                return ["rho"] + [f"[{q}]" for q in self.primes]
            if degree == 2:
                return ["rho^2"] + [f"a_{q}" for q in self.primes if q != 2]
            return [_rho_name(degree)]
        if tag == "Q2":
            return [["1"], ["rho", "x", "y"], ["rho^2"]][degree] if degree <= 2 else []
        if self.field.p % 4 == 1:
            return [["1"], ["u", "p"], ["up"]][degree] if degree <= 2 else []
        return [["1"], ["rho", "p"], ["p^2"]][degree] if degree <= 2 else []

    def degree(self, name: str) -> int:
        if name == "1":
            return 0
        k = _rho_exponent(name)
        if k is not None:
            return k
        if _bracket_prime(name) is not None or name in ("u", "p", "x", "y"):
            return 1
        if _a_prime(name) is not None or name in ("up", "p^2"):
            return 2
        raise ValueError(f"unknown symbol {name!r}")

    def check(self, name: str) -> str:
        if name not in self.basis(self.degree(name)):
            raise ValueError(f"symbol {name!r} is not in the basis of {self.field} "
                             f"(primes {self.primes})")
        return name

    def rho_filtration(self, name: str) -> int:
        k = _rho_exponent(name)
        return k if k is not None else 0

    def order_key(self, name: str) -> tuple:
        """Smaller key = more leading (lower rho-filtration first)."""
        key = self._order.get(name)
        if key is None:
            deg = self.degree(name)
            idx = self.basis(deg).index(name) if deg <= 2 or self.field.tag not in ("R", "Q") else 0
            # prefer non-rho symbols: rho^2 sits at index 0 of degree 2 over Q but has filtration 2
            key = (self.rho_filtration(name), idx)
            self._order[name] = key
        return key

    @property
    def rho(self) -> frozenset:
        """The class [-1]."""
        tag = self.field.tag
        if tag == "C" or (tag == "Qp" and self.field.p % 4 == 1):
            return frozenset()
        return frozenset({"rho"})

    def rho_power(self, k: int) -> frozenset:
        out = frozenset({"1"})
        for _ in range(k):
            out = self.mul(out, self.rho)
            if not out:
                break
        return out

    # -- multiplication ------------------------------------------------
    def mul_sym(self, a: str, b: str) -> frozenset:
        if a == "1":
            return frozenset({b})
        if b == "1":
            return frozenset({a})
        key = (a, b) if a <= b else (b, a)
        hit = self._mul_cache.get(key)
        if hit is None:
            hit = frozenset(self._mul_sym(*key))
            self._mul_cache[key] = hit
        return hit

    def _mul_sym(self, a: str, b: str) -> set:
        tag = self.field.tag
        da, db = self.degree(a), self.degree(b)
        if tag == "R":
            return {_rho_name(da + db)}
        if tag == "C":
            return set()
        if tag == "Qp":
            if da + db > 2:
                return set()
            # degree 1 x degree 1
            if self.field.p % 4 == 1:
                return {"up"} if {a, b} == {"u", "p"} else set()
            # p = 3 mod 4: u = rho, rho^2 = 0, rho p = p^2, p^2 = p^2
            return set() if a == b == "rho" else {"p^2"}
        if tag == "Q2":
            if da + db > 2:
                return set()
            if (a, b) in (("rho", "rho"), ("x", "y"), ("y", "x")):
                return {"rho^2"}
            return set()
        # over Q
        if da + db >= 3:
            if self.real_component(a) and self.real_component(b):
                return {_rho_name(da + db)}
            return set()
        # degree 1 x degree 1 via Hilbert symbols
        la, lb = self.symbol_value(a), self.symbol_value(b)
        out = set()
        if arith.hilbert_two(la, lb) == -1:
            out.add("rho^2")
        for q in self.primes:
            if q == 2:
                continue
            if (la % q == 0 or lb % q == 0) and arith.hilbert_odd(la, lb, q) == -1:
                out.add(f"a_{q}")
        return out

    def symbol_value(self, name: str) -> int:
        """The rational number whose symbol is this degree-1 basis element over Q."""
        if name == "rho":
            return -1
        q = _bracket_prime(name)
        if q is None:
            raise ValueError(f"{name!r} is not a degree-1 symbol over Q")
        return q

    def real_component(self, name: str) -> int:
        """Coefficient of rho^deg in the real localization (over Q)."""
        if _rho_exponent(name) is not None or _a_prime(name) is not None:
            return 1
        return 0

    def mul(self, x: frozenset, y: frozenset) -> frozenset:
        out: set = set()
        for a in x:
            for b in y:
                out ^= self.mul_sym(a, b)
        return frozenset(out)

    # -- text ----------------------------------------------------------
    def render(self, x: Iterable[str]) -> str:
        names = sorted(x, key=self.sort_key)
        return " + ".join(names) if names else "0"

    def sort_key(self, name: str):
        deg = self.degree(name)
        basis = self.basis(deg)
        return (deg, basis.index(name) if name in basis else 0)


@lru_cache(maxsize=None)
def ktheory(fld: BaseField, primes: tuple = DEFAULT_PRIMES) -> KTheory:
    return KTheory(fld, primes if fld.tag == "Q" else ())


# --------------------------------------------------------------------------
# public value types


@dataclass(frozen=True)
class KSymbol:
    field: BaseField
    degree: int
    name: str


@dataclass(frozen=True)
class KClass:
    field: BaseField
    degree: int
    support: frozenset = dc_field(default_factory=frozenset)
    primes: tuple = DEFAULT_PRIMES

    @property
    def kt(self) -> KTheory:
        return ktheory(self.field, tuple(self.primes))

    def __add__(self, other: "KClass") -> "KClass":
        self._compatible(other)
        if self.degree != other.degree:
            raise ValueError("cannot add classes of different degrees")
        return KClass(self.field, self.degree, self.support ^ other.support, self.primes)

    def __mul__(self, other: "KClass") -> "KClass":
        return km_mul(self, other)

    def __bool__(self):
        return bool(self.support)

    def _compatible(self, other):
        if self.field != other.field:
            raise ValueError("classes over different fields")

    def __str__(self):
        return self.kt.render(self.support)

    @classmethod
    def parse(cls, text: str, fld: BaseField, primes=DEFAULT_PRIMES, degree: int | None = None) -> "KClass":
        kt = ktheory(fld, tuple(primes) if fld.tag == "Q" else ())
        text = text.strip()
        names: set = set()
        if text != "0":
            for part in text.split("+"):
                names ^= {kt.check(part.strip())}
        degrees = {kt.degree(nm) for nm in names}
        if len(degrees) > 1:
            raise ValueError(f"inhomogeneous class {text!r}")
        deg = degrees.pop() if degrees else (degree or 0)
        if degree is not None and deg != degree:
            raise ValueError(f"{text!r} does not have degree {degree}")
        return cls(fld, deg, frozenset(names), tuple(primes))


def kclass(fld: BaseField, names, primes=DEFAULT_PRIMES) -> KClass:
    if isinstance(names, str):
        return KClass.parse(names, fld, primes)
    names = frozenset(names)
    kt = ktheory(fld, tuple(primes) if fld.tag == "Q" else ())
    for nm in names:
        kt.check(nm)
    degs = {kt.degree(nm) for nm in names}
    if len(degs) > 1:
        raise ValueError("inhomogeneous class")
    return KClass(fld, degs.pop() if degs else 0, names, tuple(primes))


def km_basis(fld: BaseField, degree: int, primes=DEFAULT_PRIMES) -> list[KSymbol]:
    kt = ktheory(fld, tuple(primes) if fld.tag == "Q" else ())
    return [KSymbol(fld, degree, nm) for nm in kt.basis(degree)]


def km_mul(a: KClass, b: KClass) -> KClass:
    if a.field != b.field:
        raise ValueError("classes over different fields")
    kt = a.kt
    for nm in a.support | b.support:
        kt.check(nm)
    return KClass(a.field, a.degree + b.degree, kt.mul(a.support, b.support), a.primes)


# --------------------------------------------------------------------------
# localization over Q

_Q2_UNIT = {1: frozenset(), 3: frozenset({"rho", "y"}), 5: frozenset({"y"}), 7: frozenset({"rho"})}


@lru_cache(maxsize=None)
def localize_name(name: str, place: Place) -> frozenset:
    """Image of a Q basis symbol in k^M of the completion at ``place``."""
    kt = KTheory(Q, ())
    deg = kt.degree(name)
    if deg == 0:
        return frozenset({"1"})
    if place.tag == "real":
        if _bracket_prime(name) is not None:
            return frozenset()
        return frozenset({_rho_name(deg)})
    local = ktheory(place.completion())
    if deg == 1:
        value = kt.symbol_value(name)
        if place.tag == "two":
            alpha = arith.valuation(abs(value), 2)
            unit = (value // 2**alpha) % 8
            out = set(_Q2_UNIT[unit])
            if alpha % 2:
                out ^= {"x"}
            return frozenset(out)
        p = place.p
        alpha = arith.valuation(abs(value), p)
        unit = value // p**alpha
        out = set()
        if alpha % 2:
            out.add("p")
        if arith.legendre(unit, p) == -1:
            out ^= {"u"} if p % 4 == 1 else {"rho"}
        return frozenset(out)
    if deg == 2:
        q = _a_prime(name)
        if q is None:  # rho^2
            r = localize_name("rho", place)
            return local.mul(r, r)
        if place.tag == "odd" and place.p == q:
            return frozenset(local.basis(2))
        return frozenset()
    # degree >= 3 vanishes at every finite place
    return frozenset()


def localize_symbol(a: KClass, place) -> KClass:
    if a.field != Q:
        raise ValueError("localization starts over Q")
    place = Place.of(place)
    for nm in a.support:
        a.kt.check(nm)
    out: set = set()
    for nm in a.support:
        out ^= localize_name(nm, place)
    return KClass(place.completion(), a.degree, frozenset(out), ())


def hasse_km(a: KClass, places) -> dict:
    return {Place.of(v): localize_symbol(a, v) for v in places}


# --------------------------------------------------------------------------
# coefficient ring


@dataclass(frozen=True, order=True)
class BiDegree:
    m: int
    w: int

    def __str__(self):
        return f"{self.m}{self.w:+d}a"


def mstar_basis(fld: BaseField, d: BiDegree, primes=DEFAULT_PRIMES) -> list[tuple[KSymbol, int]]:
    """Monomials symbol * tau^t of bidegree d: t = m and symbol degree -w - m."""
    t, k = d.m, -d.w - d.m
    if t < 0 or k < 0:
        return []
    return [(s, t) for s in km_basis(fld, k, primes)]
