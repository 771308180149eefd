"""Bipolar hypervector algebra: bind, bundle, permute, sign and cosine.

Bipolar hypervectors are plain ``int8`` numpy arrays holding only +1/-1.
Bundles are kept un-signed in an :class:`AccumHV` so that member weighting
survives until a similarity is taken.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

HV_DTYPE = np.int8
ACC_DTYPE = np.int64


class DimensionMismatch(ValueError):
    pass


def _check_same_dim(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimensionMismatch(f"dimension mismatch: {a.shape} vs {b.shape}")


def random_hv(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Draw a hypervector uniformly from {-1, +1}^dim."""
    return (rng.integers(0, 2, size=dim, dtype=HV_DTYPE) * 2 - 1).astype(HV_DTYPE)


def is_bipolar(x: np.ndarray) -> bool:
    return bool(np.all((x == 1) | (x == -1)))


@dataclass
class AccumHV:
    """Integer bundling accumulator: element-wise sum of ``count`` bipolar vectors."""

    dims: np.ndarray
    count: int = 0

    @classmethod
    def zeros(cls, dim: int) -> AccumHV:
        return cls(np.zeros(dim, dtype=ACC_DTYPE), 0)

    @classmethod
    def of(cls, x: np.ndarray) -> AccumHV:
        return cls(np.asarray(x, dtype=ACC_DTYPE).copy(), 1)

    @property
    def D(self) -> int:
        return int(self.dims.shape[0])

    def copy(self) -> AccumHV:
        return AccumHV(self.dims.copy(), self.count)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AccumHV):
            return NotImplemented
        return self.count == other.count and np.array_equal(self.dims, other.dims)


def bind(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Element-wise product. Self-inverse for bipolar inputs."""
    _check_same_dim(a, b)
    return (a * b).astype(HV_DTYPE)


def bundle(acc: AccumHV, x: np.ndarray) -> AccumHV:
    """Return a new accumulator with ``x`` added in."""
    _check_same_dim(acc.dims, x)
    return AccumHV(acc.dims + x, acc.count + 1)


def permute(x: np.ndarray, shift: int) -> np.ndarray:
    """Cyclic shift: ``result[(i + shift) % D] == x[i]``."""
    return np.roll(x, shift % x.shape[-1], axis=-1)


def sign(acc: AccumHV | np.ndarray) -> np.ndarray:
    """Round to bipolar. Zero entries map to +1."""
    dims = acc.dims if isinstance(acc, AccumHV) else np.asarray(acc)
    return np.where(dims < 0, -1, 1).astype(HV_DTYPE)


def cosine(a: AccumHV | np.ndarray, b: AccumHV | np.ndarray) -> float:
    a = a.dims if isinstance(a, AccumHV) else np.asarray(a)
    b = b.dims if isinstance(b, AccumHV) else np.asarray(b)
    _check_same_dim(a, b)
    a = a.astype(np.float64)
    b = b.astype(np.float64)
    na = np.dot(a, a)
    nb = np.dot(b, b)
    if na == 0 or nb == 0:
        raise ValueError("cosine of a zero vector is undefined")
    return float(np.dot(a, b) / np.sqrt(na * nb))


def hamming(a: np.ndarray, b: np.ndarray) -> int:
    _check_same_dim(a, b)
    return int(np.count_nonzero(a != b))
