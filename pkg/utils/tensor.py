"""
Dense tensors and matrices over Z[ω, 1/√2].

Entries share one denominator √2^k; the last array axis holds the four
coefficients of 1, ω, ω², ω³.
"""
from __future__ import annotations

from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from exceptions import ArityMismatchError
from utils.ring import OMEGA, ExactScalar

# int64 is used until a product could overflow, then entries move to Python ints.
_INT64_SAFE = 2 ** 62


def _max_abs(a: np.ndarray) -> int:
    if a.size == 0:
        return 0
    return int(np.abs(a).max())


def _widen(a: np.ndarray) -> np.ndarray:
    return a if a.dtype == object else a.astype(object)


def _convolve(fn: Callable[[np.ndarray, np.ndarray], np.ndarray],
              a: np.ndarray, b: np.ndarray, shape: Tuple[int, ...], inner: int) -> np.ndarray:
    """Multiply coefficient arrays with ω⁴ = -1, combining slices with ``fn``."""
    if a.dtype != object and b.dtype != object:
        if _max_abs(a) * _max_abs(b) * max(inner, 1) * 4 >= _INT64_SAFE:
            a, b = _widen(a), _widen(b)
    elif a.dtype != b.dtype:
        a, b = _widen(a), _widen(b)
    out = np.zeros(shape + (4,), dtype=a.dtype)
    for p in range(4):
        ap = a[..., p]
        if not ap.any():
            continue
        for q in range(4):
            bq = b[..., q]
            if not bq.any():
                continue
            r = p + q
            if r >= 4:
                out[..., r - 4] -= fn(ap, bq)
            else:
                out[..., r] += fn(ap, bq)
    return out


def _times_sqrt2(x: np.ndarray) -> np.ndarray:
    a, b, c, d = x[..., 0], x[..., 1], x[..., 2], x[..., 3]
    return np.stack([b - d, a + c, b + d, c - a], axis=-1)


class ExactTensor:
    """Dense tensor with entries in Z[ω, 1/√2], kept with the smallest common k."""

    def __init__(self, data: np.ndarray, k: int = 0, reduce: bool = True) -> None:
        if data.shape[-1:] != (4,):
            raise ValueError("coefficient axis of size 4 expected")
        self.data = data
        self.k = k
        if reduce:
            self._reduce()

    def _reduce(self) -> None:
        if not self.data.any():
            self.k = 0
            return
        while self.k > 0:
            doubled = _times_sqrt2(self.data)
            if (doubled % 2).any():
                break
            self.data = doubled // 2
            self.k -= 1

    @classmethod
    def zeros(cls, shape: Sequence[int]) -> ExactTensor:
        return cls(np.zeros(tuple(shape) + (4,), dtype=np.int64), 0, reduce=False)

    @classmethod
    def scalar(cls, value: ExactScalar) -> ExactTensor:
        return cls(np.array(value.numerator, dtype=np.int64), value.k)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape[:-1]

    @property
    def ndim(self) -> int:
        return self.data.ndim - 1

    @property
    def size(self) -> int:
        return int(np.prod(self.shape, dtype=np.int64)) if self.shape else 1

    def nonzero_mask(self) -> np.ndarray:
        return self.data.any(axis=-1)

    def is_zero(self) -> bool:
        return not self.data.any()

    def entry(self, index: Tuple[int, ...]) -> ExactScalar:
        a, b, c, d = (int(v) for v in self.data[tuple(index)])
        return ExactScalar(a, b, c, d, k=self.k)

    def contract(self, other: ExactTensor, axes_self: Sequence[int], axes_other: Sequence[int]) -> ExactTensor:
        axes_self, axes_other = list(axes_self), list(axes_other)
        free_a = [s for i, s in enumerate(self.shape) if i not in axes_self]
        free_b = [s for i, s in enumerate(other.shape) if i not in axes_other]
        inner = int(np.prod([self.shape[i] for i in axes_self], dtype=np.int64)) if axes_self else 1
        data = _convolve(
            lambda x, y: np.tensordot(x, y, axes=(axes_self, axes_other)),
            self.data, other.data, tuple(free_a + free_b), inner,
        )
        return ExactTensor(data, self.k + other.k)

    def outer(self, other: ExactTensor) -> ExactTensor:
        return self.contract(other, [], [])

    def trace(self, axis1: int, axis2: int) -> ExactTensor:
        diag = np.diagonal(self.data, axis1=axis1, axis2=axis2)
        return ExactTensor(diag.sum(axis=-1), self.k)

    def transpose(self, perm: Sequence[int]) -> ExactTensor:
        return ExactTensor(np.transpose(self.data, tuple(perm) + (self.ndim,)), self.k, reduce=False)

    def reshape(self, shape: Sequence[int]) -> ExactTensor:
        return ExactTensor(self.data.reshape(tuple(shape) + (4,)), self.k, reduce=False)

    def scale(self, value: ExactScalar) -> ExactTensor:
        coeffs = np.array(value.numerator, dtype=object if self.data.dtype == object else np.int64)
        data = _convolve(lambda x, y: x * y, self.data, coeffs, self.shape, 1)
        return ExactTensor(data, self.k + value.k)

    def divide_sqrt2(self, times: int = 1) -> ExactTensor:
        return ExactTensor(self.data, self.k + times)

    def conjugate(self) -> ExactTensor:
        a, b, c, d = (self.data[..., i] for i in range(4))
        return ExactTensor(np.stack([a, -d, -c, -b], axis=-1), self.k, reduce=False)

    def to_complex(self) -> np.ndarray:
        d = self.data.astype(np.float64) if self.data.dtype != object else self.data.astype(float)
        value = d[..., 0] + d[..., 1] * OMEGA + d[..., 2] * OMEGA ** 2 + d[..., 3] * OMEGA ** 3
        return value / (2 ** (self.k / 2))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ExactTensor):
            return NotImplemented
        return self.shape == other.shape and self.k == other.k and np.array_equal(self.data, other.data)

    __hash__ = None


class ExactMatrix(ExactTensor):
    """2^m × 2^n matrix; basis index bits are read with wire 1 as the most significant."""

    @classmethod
    def of(cls, tensor: ExactTensor) -> ExactMatrix:
        if tensor.ndim != 2:
            raise ValueError("matrix needs exactly two axes")
        return cls(tensor.data, tensor.k, reduce=False)

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[object]]) -> ExactMatrix:
        """Build from rows of ints or ExactScalars."""
        scalars = [[v if isinstance(v, ExactScalar) else ExactScalar.from_int(int(v)) for v in row] for row in rows]
        k = max((s.k for row in scalars for s in row), default=0)
        data = np.zeros((len(scalars), len(scalars[0]) if scalars else 0, 4), dtype=object)
        for i, row in enumerate(scalars):
            for j, s in enumerate(row):
                num = s.numerator
                for _ in range(k - s.k):
                    num = tuple(_times_sqrt2(np.array(num, dtype=object)))
                data[i, j] = num
        return cls(data, k)

    @classmethod
    def identity(cls, dim: int) -> ExactMatrix:
        data = np.zeros((dim, dim, 4), dtype=np.int64)
        data[np.arange(dim), np.arange(dim), 0] = 1
        return cls(data, 0, reduce=False)

    @classmethod
    def diagonal(cls, entries: Sequence[ExactScalar]) -> ExactMatrix:
        n = len(entries)
        rows = [[entries[i] if i == j else ExactScalar() for j in range(n)] for i in range(n)]
        return cls.from_rows(rows)

    @classmethod
    def column_vector(cls, entries: Sequence[object]) -> ExactMatrix:
        return cls.from_rows([[v] for v in entries])

    @property
    def rows(self) -> int:
        return self.shape[0]

    @property
    def cols(self) -> int:
        return self.shape[1]

    def __matmul__(self, other: ExactMatrix) -> ExactMatrix:
        if self.cols != other.rows:
            raise ArityMismatchError(f"Cannot multiply {self.rows}×{self.cols} by {other.rows}×{other.cols}")
        return ExactMatrix.of(self.contract(other, [1], [0]))

    def kron(self, other: ExactMatrix) -> ExactMatrix:
        t = self.outer(other).transpose([0, 2, 1, 3])
        return ExactMatrix.of(t.reshape((self.rows * other.rows, self.cols * other.cols)))

    def dagger(self) -> ExactMatrix:
        return ExactMatrix.of(self.conjugate().transpose([1, 0]))

    def scaled(self, value: ExactScalar) -> ExactMatrix:
        return ExactMatrix.of(self.scale(value))

    def column(self, j: int) -> ExactMatrix:
        return ExactMatrix(self.data[:, j:j + 1], self.k)

    def first_nonzero(self) -> Optional[Tuple[int, int]]:
        mask = self.nonzero_mask()
        if not mask.any():
            return None
        flat = int(np.argmax(mask.reshape(-1)))
        return divmod(flat, self.cols)

    def format_rows(self) -> List[List[str]]:
        return [[str(self.entry((i, j))) for j in range(self.cols)] for i in range(self.rows)]


class FloatMatrix:
    """Double-precision matrix produced by the approximate backend."""

    def __init__(self, data: np.ndarray) -> None:
        self.data = np.asarray(data, dtype=np.complex128)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.data.shape

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    def to_complex(self) -> np.ndarray:
        return self.data

    def format_rows(self, digits: int = 6) -> List[List[str]]:
        return [[f"{v.real:.{digits}g}{v.imag:+.{digits}g}j" for v in row] for row in self.data]
