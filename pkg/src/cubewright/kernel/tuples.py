"""Radix-|A| codes for tuples in A^k, and sets of them."""

from __future__ import annotations

from typing import Iterable, Iterator

import numpy as np

DENSE_LIMIT = 1 << 26


def encode(t, size: int) -> int:
    code = 0
    for a in t:
        code = code * size + int(a)
    return code


def decode(code: int, size: int, k: int) -> tuple:
    out = [0] * k
    for i in range(k - 1, -1, -1):
        code, out[i] = divmod(code, size)
    return tuple(out)


def encode_rows(rows: np.ndarray, size: int) -> np.ndarray:
    """Codes for each row of an ``(n, k)`` array; requires ``size**k < 2**63``."""
    rows = np.asarray(rows, dtype=np.int64)
    codes = np.zeros(rows.shape[0], dtype=np.int64)
    for j in range(rows.shape[1]):
        codes = codes * size + rows[:, j]
    return codes


def subset_code(subset: Iterable[int]) -> int:
    """Bitmask of a subset of the universe; the tie-break key for subsets."""
    return sum(1 << a for a in set(subset))


def subset_key(subset) -> tuple:
    return (len(subset), subset_code(subset))


class TupleSet:
    """A set of k-tuples over ``range(size)``.

    Dense bitset when ``size**k`` is at most ``DENSE_LIMIT``, a Python set of
    codes otherwise. Iteration is always in ascending code order.
    """

    def __init__(self, size: int, k: int, items: Iterable = ()):
        self.size = size
        self.k = k
        self.capacity = size**k
        if self.capacity <= DENSE_LIMIT:
            self._bits = np.zeros(self.capacity, dtype=bool)
            self._codes = None
        else:
            self._bits = None
            self._codes = set()
        for t in items:
            self.add(t)

    @property
    def dense(self) -> bool:
        return self._bits is not None

    def _code(self, t) -> int:
        if isinstance(t, (int, np.integer)):
            return int(t)
        if len(t) != self.k:
            raise ValueError(f"expected a {self.k}-tuple, got {t!r}")
        return encode(t, self.size)

    def add(self, t) -> None:
        code = self._code(t)
        if not 0 <= code < self.capacity:
            raise ValueError(f"code {code} out of range")
        if self.dense:
            self._bits[code] = True
        else:
            self._codes.add(code)

    def add_codes(self, codes) -> None:
        if self.dense:
            self._bits[np.asarray(codes, dtype=np.int64)] = True
        else:
            self._codes.update(int(c) for c in codes)

    def __contains__(self, t) -> bool:
        code = self._code(t)
        if not 0 <= code < self.capacity:
            return False
        return bool(self._bits[code]) if self.dense else code in self._codes

    def codes(self) -> list:
        if self.dense:
            return [int(c) for c in np.flatnonzero(self._bits)]
        return sorted(self._codes)

    def __iter__(self) -> Iterator[tuple]:
        for c in self.codes():
            yield decode(c, self.size, self.k)

    def __len__(self) -> int:
        return int(self._bits.sum()) if self.dense else len(self._codes)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TupleSet):
            return NotImplemented
        return (self.size, self.k) == (other.size, other.k) and self.codes() == other.codes()

    def issubset(self, other) -> bool:
        return all(c in other for c in self.codes())

    def __repr__(self) -> str:
        shown = list(self)[:8]
        more = ", ..." if len(self) > 8 else ""
        return f"TupleSet(size={self.size}, k={self.k}, {shown}{more})"
