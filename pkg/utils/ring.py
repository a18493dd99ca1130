"""
Exact arithmetic in Z[ω, 1/√2], ω = e^{iπ/4}.

An element is stored as (a + bω + cω² + dω³) / √2^k with ω⁴ = -1.
"""
from __future__ import annotations

import cmath
from functools import cached_property
from typing import Tuple, Union

from exceptions import RingDivisionError

Coeffs = Tuple[int, int, int, int]

OMEGA = cmath.exp(1j * cmath.pi / 4)
SQRT2_NUMERATOR: Coeffs = (0, 1, 0, -1)


def mul_coeffs(x: Coeffs, y: Coeffs) -> Coeffs:
    out = [0, 0, 0, 0]
    for p in range(4):
        if x[p] == 0:
            continue
        for q in range(4):
            term = x[p] * y[q]
            r = p + q
            if r >= 4:
                out[r - 4] -= term
            else:
                out[r] += term
    return tuple(out)


def omega_power(j: int) -> Coeffs:
    """Coefficients of ω^j."""
    j %= 8
    out = [0, 0, 0, 0]
    out[j % 4] = -1 if j >= 4 else 1
    return tuple(out)


def divisible_by_sqrt2(x: Coeffs) -> bool:
    return all(c % 2 == 0 for c in mul_coeffs(x, SQRT2_NUMERATOR))


def galois(x: Coeffs, j: int) -> Coeffs:
    """Image of x under ω ↦ ω^j, j odd."""
    out = [0, 0, 0, 0]
    for p, c in enumerate(x):
        for q, v in enumerate(omega_power(p * j)):
            out[q] += c * v
    return tuple(out)


class ExactScalar:
    """Element of Z[ω, 1/√2] kept in canonical form."""

    def __init__(self, a: int = 0, b: int = 0, c: int = 0, d: int = 0, k: int = 0) -> None:
        if k < 0:
            raise ValueError("k must be non-negative")
        num: Coeffs = (int(a), int(b), int(c), int(d))
        while k > 0 and divisible_by_sqrt2(num):
            num = tuple(v // 2 for v in mul_coeffs(num, SQRT2_NUMERATOR))
            k -= 1
        if num == (0, 0, 0, 0):
            k = 0
        self._num: Coeffs = num
        self._k: int = k

    @classmethod
    def from_coeffs(cls, num: Coeffs, k: int = 0) -> ExactScalar:
        """Build from a numerator that may need scaling up for a negative k."""
        while k < 0:
            num = mul_coeffs(num, SQRT2_NUMERATOR)
            k += 1
        return cls(*num, k=k)

    @classmethod
    def from_int(cls, n: int) -> ExactScalar:
        return cls(n)

    @classmethod
    def omega(cls, j: int = 1) -> ExactScalar:
        return cls(*omega_power(j))

    @classmethod
    def sqrt2(cls) -> ExactScalar:
        return cls(*SQRT2_NUMERATOR)

    @property
    def numerator(self) -> Coeffs:
        return self._num

    @property
    def k(self) -> int:
        return self._k

    @property
    def is_zero(self) -> bool:
        return self._num == (0, 0, 0, 0)

    def __repr__(self) -> str:
        a, b, c, d = self._num
        return f"ExactScalar({a}, {b}, {c}, {d}, k={self._k})"

    def __str__(self) -> str:
        a, b, c, d = self._num
        body = f"({a}{b:+}ω{c:+}ω²{d:+}ω³)"
        return body if self._k == 0 else f"{body}/√2^{self._k}"

    def _coerce(self, other: Union[int, ExactScalar]) -> ExactScalar:
        if isinstance(other, ExactScalar):
            return other
        if isinstance(other, int):
            return ExactScalar.from_int(other)
        return NotImplemented

    def _aligned(self, other: ExactScalar) -> Tuple[Coeffs, Coeffs, int]:
        x, y = self._num, other.numerator
        k = max(self._k, other.k)
        for _ in range(k - self._k):
            x = mul_coeffs(x, SQRT2_NUMERATOR)
        for _ in range(k - other.k):
            y = mul_coeffs(y, SQRT2_NUMERATOR)
        return x, y, k

    def __add__(self, other: Union[int, ExactScalar]) -> ExactScalar:
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        x, y, k = self._aligned(other)
        return ExactScalar(*(p + q for p, q in zip(x, y)), k=k)

    __radd__ = __add__

    def __neg__(self) -> ExactScalar:
        return ExactScalar(*(-v for v in self._num), k=self._k)

    def __sub__(self, other: Union[int, ExactScalar]) -> ExactScalar:
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other: Union[int, ExactScalar]) -> ExactScalar:
        return (-self) + other

    def __mul__(self, other: Union[int, ExactScalar]) -> ExactScalar:
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return ExactScalar(*mul_coeffs(self._num, other.numerator), k=self._k + other.k)

    __rmul__ = __mul__

    def conjugate(self) -> ExactScalar:
        # complex conjugation sends √2 to √2, so k is unchanged
        return ExactScalar(*galois(self._num, 7), k=self._k)

    @cached_property
    def norm(self) -> int:
        """Field norm of the numerator, a non-negative integer."""
        x = self._num
        prod = mul_coeffs(mul_coeffs(x, galois(x, 3)), mul_coeffs(galois(x, 5), galois(x, 7)))
        return prod[0]

    def __truediv__(self, other: Union[int, ExactScalar]) -> ExactScalar:
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        if other.is_zero:
            raise ZeroDivisionError("division by zero in Z[ω, 1/√2]")
        y = other.numerator
        adj = mul_coeffs(mul_coeffs(galois(y, 3), galois(y, 5)), galois(y, 7))
        q = mul_coeffs(self._num, adj)
        n = other.norm
        twos = 0
        while n % 2 == 0:
            n //= 2
            twos += 1
        if any(v % n for v in q):
            raise RingDivisionError(f"{self} / {other} is not in Z[ω, 1/√2]")
        q = tuple(v // n for v in q)
        # x/y = (xn·adj / N) · √2^(ky - kx), with N = odd · 2^twos = odd · √2^(2·twos)
        return ExactScalar.from_coeffs(q, self._k - other.k + 2 * twos)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, int):
            other = ExactScalar.from_int(other)
        if not isinstance(other, ExactScalar):
            return NotImplemented
        return self._num == other.numerator and self._k == other.k

    def __hash__(self) -> int:
        return hash((self._num, self._k))

    def __complex__(self) -> complex:
        a, b, c, d = self._num
        value = a + b * OMEGA + c * OMEGA ** 2 + d * OMEGA ** 3
        return value / (2 ** (self._k / 2))

    def to_complex(self) -> complex:
        return complex(self)


ZERO = ExactScalar()
ONE = ExactScalar(1)
