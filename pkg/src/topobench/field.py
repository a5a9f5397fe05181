"""Exact arithmetic in GF(q) for prime powers q.

Elements are packed as integers ``0 .. q-1``: the base-``p`` digits of the
value are the polynomial coefficients, lowest degree first.  For prime ``q``
this is ordinary modular arithmetic.  The canonical ordering of elements is
the integer order of this packing.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from functools import lru_cache
from itertools import product
from typing import Sequence

import numpy as np

from .errors import FieldMismatch, NotPrimePower


def factor_prime_power(q: int) -> tuple[int, int]:
    """Return ``(p, n)`` with ``q == p**n`` or raise NotPrimePower."""
    if q < 2:
        raise NotPrimePower(f"q={q} is not a prime power")
    p = None
    m = q
    d = 2
    while d * d <= m:
        if m % d == 0:
            p = d
            break
        d += 1
    if p is None:
        return q, 1
    n = 0
    while m % p == 0:
        m //= p
        n += 1
    if m != 1:
        raise NotPrimePower(f"q={q} has at least two distinct prime factors")
    return p, n


def is_prime_power(q: int) -> bool:
    try:
        factor_prime_power(q)
    except NotPrimePower:
        return False
    return True


# -- polynomial helpers over GF(p); coefficient lists, lowest degree first --

def _trim(a: list[int]) -> list[int]:
    while a and a[-1] == 0:
        a.pop()
    return a


def _poly_mod(a: Sequence[int], m: Sequence[int], p: int) -> list[int]:
    a = _trim(list(a))
    m = _trim(list(m))
    inv_lead = pow(m[-1], p - 2, p)
    while len(a) >= len(m):
        coef = (a[-1] * inv_lead) % p
        shift = len(a) - len(m)
        for i, c in enumerate(m):
            a[shift + i] = (a[shift + i] - coef * c) % p
        _trim(a)
    return a


def _is_irreducible(poly: Sequence[int], p: int) -> bool:
    """Trial division by every monic polynomial of degree 1 .. deg/2."""
    n = len(poly) - 1
    for d in range(1, n // 2 + 1):
        for low in product(range(p), repeat=d):
            divisor = list(low) + [1]
            if not _poly_mod(poly, divisor, p):
                return False
    return True


def smallest_irreducible(p: int, n: int) -> tuple[int, ...]:
    """Smallest monic irreducible of degree ``n`` over GF(p).

    Candidates are ordered by the packed integer of their lower coefficients,
    i.e. lexicographically with the ``x**(n-1)`` coefficient most significant.
    """
    if n == 1:
        return (0, 1)
    for code in range(p**n):
        low = [(code // p**i) % p for i in range(n)]
        poly = tuple(low) + (1,)
        if low[0] != 0 and _is_irreducible(poly, p):
            return poly
    raise AssertionError("an irreducible polynomial always exists")


@dataclass(frozen=True)
class Field:
    q: int
    characteristic: int
    degree: int
    reduction_polynomial: tuple[int, ...]
    _exp: tuple = dc_field(default=(), repr=False, compare=False, hash=False)
    _log: tuple = dc_field(default=(), repr=False, compare=False, hash=False)
    _add: object = dc_field(default=None, repr=False, compare=False, hash=False)

    def __post_init__(self):
        if self.degree == 1:
            return
        p, n, q = self.characteristic, self.degree, self.q
        digits = np.array([self._digits(v) for v in range(q)], dtype=np.int64)
        weights = p ** np.arange(n, dtype=np.int64)
        add = ((digits[:, None, :] + digits[None, :, :]) % p) @ weights
        object.__setattr__(self, "_add", add.tolist())
        # exp/log tables from the first generator found by direct multiplication
        for g in range(2, q):
            exp = [1]
            x = g
            while x != 1:
                exp.append(x)
                x = self._poly_mul(self._digits(x), self._digits(g))
            if len(exp) == q - 1:
                break
        log = [0] * q
        for i, v in enumerate(exp):
            log[v] = i
        object.__setattr__(self, "_exp", tuple(exp))
        object.__setattr__(self, "_log", tuple(log))

    # packing helpers
    def _digits(self, v: int) -> list[int]:
        p = self.characteristic
        return [(v // p**i) % p for i in range(self.degree)]

    def _pack(self, coeffs: Sequence[int]) -> int:
        p = self.characteristic
        return sum(c * p**i for i, c in enumerate(coeffs))

    def _poly_mul(self, a: list[int], b: list[int]) -> int:
        p = self.characteristic
        prod = [0] * (2 * self.degree - 1)
        for i, x in enumerate(a):
            if x:
                for j, y in enumerate(b):
                    prod[i + j] = (prod[i + j] + x * y) % p
        return self._pack(_poly_mod(prod, self.reduction_polynomial, p))

    # raw integer arithmetic, used by the graph builders in tight loops
    def add(self, a: int, b: int) -> int:
        if self.degree == 1:
            return (a + b) % self.q
        return self._add[a][b]

    def neg(self, a: int) -> int:
        if self.degree == 1:
            return (-a) % self.q
        p = self.characteristic
        return self._pack([(-c) % p for c in self._digits(a)])

    def sub(self, a: int, b: int) -> int:
        return self.add(a, self.neg(b))

    def mul(self, a: int, b: int) -> int:
        if self.degree == 1:
            return (a * b) % self.q
        if a == 0 or b == 0:
            return 0
        return self._exp[(self._log[a] + self._log[b]) % (self.q - 1)]

    def pow(self, a: int, e: int) -> int:
        if e < 0:
            return self.pow(self.inv(a), -e)
        if self.degree == 1:
            return pow(a, e, self.q)
        if a == 0:
            return 1 if e == 0 else 0
        return self._exp[(self._log[a] * e) % (self.q - 1)]

    def inv(self, a: int) -> int:
        if a == 0:
            raise ZeroDivisionError("0 has no multiplicative inverse")
        return self.pow(a, self.q - 2)

    def order(self, a: int) -> int:
        """Multiplicative order of a nonzero element."""
        if a == 0:
            raise ValueError("0 has no multiplicative order")
        k, x = 1, a
        while x != 1:
            x = self.mul(x, a)
            k += 1
        return k

    def element(self, value) -> "FieldElement":
        if isinstance(value, (list, tuple)):
            if len(value) > self.degree or any(not 0 <= c < self.characteristic for c in value):
                raise ValueError(f"{value!r} is not a reduced coefficient vector")
            value = self._pack(value)
        if not 0 <= value < self.q:
            raise ValueError(f"{value} outside 0..{self.q - 1}")
        return FieldElement(self, int(value))

    def elements(self) -> list["FieldElement"]:
        return [FieldElement(self, v) for v in range(self.q)]

    def __repr__(self):
        return f"GF({self.q})"


@dataclass(frozen=True)
class FieldElement:
    field: Field
    value: int

    @property
    def coeffs(self) -> tuple[int, ...]:
        return tuple(self.field._digits(self.value))

    def _check(self, other: "FieldElement") -> None:
        if not isinstance(other, FieldElement) or other.field != self.field:
            raise FieldMismatch(f"{self.field!r} vs {getattr(other, 'field', other)!r}")

    def __add__(self, other):
        self._check(other)
        return FieldElement(self.field, self.field.add(self.value, other.value))

    def __sub__(self, other):
        self._check(other)
        return FieldElement(self.field, self.field.sub(self.value, other.value))

    def __mul__(self, other):
        self._check(other)
        return FieldElement(self.field, self.field.mul(self.value, other.value))

    def __neg__(self):
        return FieldElement(self.field, self.field.neg(self.value))

    def __pow__(self, e: int):
        return FieldElement(self.field, self.field.pow(self.value, int(e)))

    def inverse(self) -> "FieldElement":
        return FieldElement(self.field, self.field.inv(self.value))

    def __int__(self):
        return self.value

    def __repr__(self):
        if self.field.degree == 1:
            return f"{self.value}"
        return f"{self.coeffs}"


@lru_cache(maxsize=None)
def make_field(q: int) -> Field:
    """Build GF(q); raises NotPrimePower when ``q`` is not a prime power."""
    p, n = factor_prime_power(q)
    return Field(q, p, n, smallest_irreducible(p, n))


def field_op(a: FieldElement, b, kind: str) -> FieldElement:
    """Apply ``kind`` in {add, sub, mul, pow}; ``pow`` takes an int exponent."""
    if kind == "pow":
        e = b.value if isinstance(b, FieldElement) else int(b)
        return a**e
    if not isinstance(b, FieldElement) or a.field != b.field:
        raise FieldMismatch("operands come from different fields")
    if kind == "add":
        return a + b
    if kind == "sub":
        return a - b
    if kind == "mul":
        return a * b
    raise ValueError(f"unknown op {kind!r}")


def find_primitive_element(f: Field) -> FieldElement:
    """Smallest element of multiplicative order q - 1 (exhaustive search)."""
    for v in range(1, f.q):
        if f.order(v) == f.q - 1:
            return FieldElement(f, v)
    raise AssertionError("finite fields always have a primitive element")
