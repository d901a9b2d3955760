"""Congruences of finite algebras given as explicit element lists.

The congruence generated by a set of pairs is the least equivalence that
contains them and is preserved by every unary polynomial x -> f(c_1, ..., x,
..., c_r) with the c_j ranging over the carrier (Mal'cev's description of
principal congruences). It is enough to push the pairs that actually merged
two blocks through the translations: those pairs span the equivalence, and
translations map a chain of related elements to a chain of related elements.
"""

from __future__ import annotations

import itertools

import numpy as np

from .kernel import Closure, FiniteAlgebra, ResourceLimitError
from .kernel.tuples import encode_rows

TABLE_LIMIT = 1 << 24
CHUNK = 1 << 20


class Partition:
    """An equivalence on ``range(n)``, optionally relabelled by ``elements``."""

    def __init__(self, n, elements=None):
        self.n = n
        self.elements = list(elements) if elements is not None else None
        self._label = np.arange(n, dtype=np.int64)
        self._members = {i: [i] for i in range(n)}

    @classmethod
    def from_blocks(cls, n, blocks):
        p = cls(n)
        for block in blocks:
            for x in block[1:]:
                p.union(block[0], x)
        return p

    def find(self, i) -> int:
        return int(self._label[i])

    def union(self, i, j) -> bool:
        a, b = int(self._label[i]), int(self._label[j])
        if a == b:
            return False
        if len(self._members[a]) < len(self._members[b]):
            a, b = b, a
        moved = self._members.pop(b)
        self._label[moved] = a
        self._members[a].extend(moved)
        return True

    def same(self, i, j) -> bool:
        return self._label[i] == self._label[j]

    @property
    def labels(self) -> np.ndarray:
        return self._label

    @property
    def index(self) -> int:
        return len(self._members)

    def blocks(self) -> list:
        """Blocks as sorted position lists, ordered by least member."""
        return sorted(sorted(m) for m in self._members.values())

    def labelled_blocks(self) -> list:
        if self.elements is None:
            return self.blocks()
        return [[self.elements[i] for i in b] for b in self.blocks()]

    def key(self) -> tuple:
        """Canonical form: each position mapped to the least member of its block."""
        out = [0] * self.n
        for b in self._members.values():
            lo = min(b)
            for i in b:
                out[i] = lo
        return tuple(out)

    def edges(self):
        """Pairs spanning the equivalence."""
        for b in self._members.values():
            for x in b[1:]:
                yield b[0], x

    def copy(self) -> "Partition":
        p = Partition(self.n, self.elements)
        p._label = self._label.copy()
        p._members = {k: list(v) for k, v in self._members.items()}
        return p

    def __eq__(self, other):
        if not isinstance(other, Partition):
            return NotImplemented
        return self.n == other.n and self.key() == other.key()

    def __le__(self, other):
        return all(other.same(i, j) for i, j in self.edges())

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        return f"Partition({self.labelled_blocks()})"

    def to_json(self):
        return [list(map(int, b)) for b in self.labelled_blocks()]


class CarrierAlgebra:
    """A subuniverse of A^k listed element by element, with coordinatewise operations."""

    def __init__(self, alg: FiniteAlgebra, elements, check=True):
        self.alg = alg
        rows = np.asarray(elements, dtype=np.int64)
        if rows.ndim != 2:
            raise ValueError("elements must be a list of equal-length tuples")
        self.rows = rows
        self.n, self.k = rows.shape
        self._index = {tuple(int(v) for v in r): i for i, r in enumerate(rows)}
        if len(self._index) != self.n:
            raise ValueError("duplicate elements")
        # sorted integer codes let whole batches of results be located at once
        self._vector = alg.size**self.k < 2**62
        if self._vector:
            codes = encode_rows(rows, alg.size)
            self._order = np.argsort(codes, kind="stable")
            self._sorted = codes[self._order]
        self._tables = {}
        if check:
            self.verify_closed()

    @classmethod
    def from_closure(cls, closure: Closure):
        if not closure.complete:
            raise ValueError("closure is not complete")
        rows = closure.rows[:, : closure.k]
        return cls(closure.alg, rows, check=False)

    def index_of(self, t) -> int:
        return self._index.get(tuple(int(v) for v in t), -1)

    def element(self, i) -> tuple:
        return tuple(int(v) for v in self.rows[i])

    def _resolve(self, results):
        if self._vector and len(self._sorted):
            codes = encode_rows(results, self.alg.size)
            pos = np.minimum(np.searchsorted(self._sorted, codes), self.n - 1)
            found = self._sorted[pos] == codes
            if not found.all():
                bad = results[np.flatnonzero(~found)[0]]
                raise ValueError(f"carrier is not closed: produced {tuple(int(v) for v in bad)}")
            return self._order[pos]
        out = np.fromiter((self._index.get(tuple(r), -1) for r in results.tolist()), dtype=np.int64,
                          count=len(results))
        if (out < 0).any():
            bad = results[np.flatnonzero(out < 0)[0]]
            raise ValueError(f"carrier is not closed: produced {tuple(int(v) for v in bad)}")
        return out

    def _apply(self, f, arg_idx):
        """Result indices for argument index arrays ``arg_idx`` (shape m x r)."""
        acc = np.zeros((arg_idx.shape[0], self.k), dtype=np.int64)
        for j in range(f.arity):
            acc = acc * self.alg.size + self.rows[arg_idx[:, j]]
        return self._resolve(f.array[acc])

    def table(self, op_index):
        """The operation on element indices as an array of shape (n,)*arity, if small enough."""
        if op_index in self._tables:
            return self._tables[op_index]
        f = self.alg.operations[op_index]
        if self.n**f.arity > TABLE_LIMIT:
            return None
        if f.arity == 0:
            out = self._resolve(np.full((1, self.k), f.table[0]))
            self._tables[op_index] = out.reshape(())
            return self._tables[op_index]
        count = self.n**f.arity
        out = np.empty(count, dtype=np.int32)
        for start in range(0, count, CHUNK):
            flat = np.arange(start, min(count, start + CHUNK))
            args = np.stack(np.unravel_index(flat, (self.n,) * f.arity), axis=1)
            out[start:start + len(flat)] = self._apply(f, args)
        self._tables[op_index] = out.reshape((self.n,) * f.arity)
        return self._tables[op_index]

    def translation_images(self, op_index, position, u) -> np.ndarray:
        """f(c_1, .., u at position, .., c_r) for all choices of the other arguments."""
        f = self.alg.operations[op_index]
        t = self.table(op_index)
        if t is not None:
            return np.take(t, u, axis=position).ravel()
        others = np.indices((self.n,) * (f.arity - 1)).reshape(f.arity - 1, -1).T
        args = np.insert(others, position, u, axis=1)
        return self._apply(f, args)

    def verify_closed(self):
        for oi, f in enumerate(self.alg.operations):
            if self.table(oi) is None:
                count = self.n**f.arity
                for start in range(0, count, CHUNK):
                    flat = np.arange(start, min(count, start + CHUNK))
                    args = np.stack(np.unravel_index(flat, (self.n,) * f.arity), axis=1)
                    self._apply(f, args)
        return True


def generated_congruence(carrier: CarrierAlgebra, pairs, base: Partition = None,
                         base_is_congruence=False) -> Partition:
    """Least congruence containing ``pairs`` (and ``base``, if given)."""
    theta = base.copy() if base is not None else Partition(carrier.n)
    theta.elements = None
    work = list(theta.edges()) if base is not None and not base_is_congruence else []
    for u, v in pairs:
        if theta.union(u, v):
            work.append((u, v))
    ops = [(oi, f.arity) for oi, f in enumerate(carrier.alg.operations) if f.arity > 0]
    while work:
        u, v = work.pop()
        for oi, arity in ops:
            for p in range(arity):
                xs = carrier.translation_images(oi, p, u)
                ys = carrier.translation_images(oi, p, v)
                lab = theta.labels
                differ = np.flatnonzero(lab[xs] != lab[ys])
                for i in differ:
                    x, y = int(xs[i]), int(ys[i])
                    if theta.union(x, y):
                        work.append((x, y))
    return theta


def join(carrier, first: Partition, second: Partition) -> Partition:
    return generated_congruence(carrier, list(second.edges()), base=first, base_is_congruence=True)


def is_compatible(carrier: CarrierAlgebra, theta: Partition) -> bool:
    """Exhaustive check that every operation preserves ``theta``."""
    lab = theta.labels
    for oi, f in enumerate(carrier.alg.operations):
        if f.arity == 0:
            continue
        for p in range(f.arity):
            for u, v in theta.edges():
                xs = carrier.translation_images(oi, p, u)
                ys = carrier.translation_images(oi, p, v)
                if (lab[xs] != lab[ys]).any():
                    return False
    return True


def kernel_of_projection(carrier: CarrierAlgebra, z: int) -> Partition:
    if not 0 <= z < carrier.k:
        raise ValueError(f"coordinate {z} out of range")
    p = Partition(carrier.n)
    first = {}
    for i, v in enumerate(carrier.rows[:, z]):
        v = int(v)
        if v in first:
            p.union(first[v], i)
        else:
            first[v] = i
    return p


def restrict(theta: Partition, subset) -> Partition:
    """The induced equivalence on ``subset`` (positions of the parent)."""
    subset = list(subset)
    out = Partition(len(subset), elements=subset)
    first = {}
    for i, x in enumerate(subset):
        r = theta.find(x)
        if r in first:
            out.union(first[r], i)
        else:
            first[r] = i
    return out


def block_profile(theta: Partition, threshold: int):
    """Number of blocks with more than ``threshold`` members, and those blocks."""
    large = [b for b in theta.labelled_blocks() if len(b) > threshold]
    return len(large), large


def all_congruences(carrier: CarrierAlgebra, cap: int = 60, max_count: int = 200_000) -> list:
    """Every congruence, as joins of principal congruences.

    Ordered by decreasing index, then canonical form, so the identity comes
    first and the full relation last.
    """
    if carrier.n > cap:
        raise ResourceLimitError("carrier size", carrier.n, cap)
    principals = {}
    for i, j in itertools.combinations(range(carrier.n), 2):
        theta = generated_congruence(carrier, [(i, j)])
        principals.setdefault(theta.key(), theta)
    identity = Partition(carrier.n)
    found = {identity.key(): identity}
    found.update(principals)
    queue = list(principals.values())
    gens = list(principals.values())
    while queue:
        theta = queue.pop()
        for psi in gens:
            if psi <= theta:
                continue
            joined = join(carrier, theta, psi)
            key = joined.key()
            if key not in found:
                found[key] = joined
                queue.append(joined)
                if len(found) > max_count:
                    raise ResourceLimitError("congruence count", len(found), max_count)
    return sorted(found.values(), key=lambda t: (-t.index, t.key()))


def brute_force_congruences(carrier: CarrierAlgebra) -> list:
    """All compatible equivalences, by trying every set partition. Tiny carriers only."""
    out = []
    for blocks in _set_partitions(list(range(carrier.n))):
        theta = Partition.from_blocks(carrier.n, blocks)
        if is_compatible(carrier, theta):
            out.append(theta)
    return sorted(out, key=lambda t: (-t.index, t.key()))


def _set_partitions(items):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]
        yield [[first]] + part

