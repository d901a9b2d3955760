"""Subpower closure: the worklist engine behind every Sg computation.

Each round applies every basic operation to the argument tuples that use at
least one element found in the previous round, so no combination is
evaluated twice. Argument tuples are enumerated in a fixed order and work is
split into chunks; chunks may be computed on a thread pool, but they are
always merged in order, so the element order, the parent records and hence
every reconstructed term are the same for any thread count.

``idempotent_image_closure`` closes a set under all *idempotent* term
operations of an algebra, including non-idempotent presentations. It
appends the diagonal tag ``(0, 1, ..., |A|-1)`` to every generator and
closes in ``A^(k+|A|)``. The tag of an element produced by a term ``t`` is
``(t(a, ..., a))_a``, which is the identity tag exactly when ``t`` is
idempotent, so the elements carrying the identity tag are exactly the
images under idempotent terms.
"""

from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .algebra import FiniteAlgebra
from .errors import ResourceLimitError
from .terms import Apply, Var, evaluate
from .tuples import TupleSet, decode, encode, subset_key

DEFAULT_MAX_ELEMENTS = 2_000_000
CHUNK = 1 << 15
# index arrays above this many codes fall back to a dict
LOOKUP_DENSE_LIMIT = 1 << 20
_INT_KEY_LIMIT = 1 << 62


def default_max_elements() -> int:
    env = os.environ.get("CUBEWRIGHT_MAX_CLOSURE")
    return int(env) if env else DEFAULT_MAX_ELEMENTS


@dataclass
class Budget:
    """Resource caps for one closure.

    ``max_work`` counts operation applications (argument tuples evaluated);
    ``None`` means unbounded.
    """

    max_elements: Optional[int] = None
    max_work: Optional[int] = None
    threads: int = 1

    def __post_init__(self):
        if self.max_elements is None:
            self.max_elements = default_max_elements()


class Closure:
    """A closed (or partially closed, see ``complete``) subset of A^k.

    Elements are kept in discovery order together with a parent record
    ``(op_index, arg_indices)`` for each, or ``None`` for generators.
    With a ``tag`` the closure lives in A^(k + len(tag)) and only the
    elements ending in ``tag`` are members; their prefixes are what
    ``__iter__``, ``__contains__`` and ``term_for`` see.
    """

    def __init__(self, alg: FiniteAlgebra, k: int, generators: Sequence, tag=None, budget=None):
        self.alg = alg
        self.k = k
        self.tag = tuple(tag) if tag is not None else ()
        self.width = k + len(self.tag)
        self.budget = budget or Budget()
        self.complete = False
        self.work = 0
        self.rounds = 0
        size = alg.size
        self._int_keys = size**self.width < _INT_KEY_LIMIT
        self._dense = self._int_keys and size**self.width <= LOOKUP_DENSE_LIMIT
        self._lookup = np.full(size**self.width, -1, dtype=np.int32) if self._dense else {}
        self._rows = np.zeros((16, self.width), dtype=np.uint8)
        self.n = 0
        self.parents = []
        self.generators = [tuple(int(a) for a in g) for g in generators]
        self._gen_var = {}
        for i, g in enumerate(self.generators):
            if len(g) != k:
                raise ValueError(f"generator {g} is not a {k}-tuple")
            if any(not 0 <= a < size for a in g):
                raise ValueError(f"generator {g} has entries outside the universe")
            row = np.asarray(g + self.tag, dtype=np.uint8)[None, :]
            added = self._merge(row, None, None)
            if len(added):
                self._gen_var[int(added[0])] = i

    # -- storage ------------------------------------------------------------

    @property
    def rows(self) -> np.ndarray:
        """All elements in discovery order (tag columns included)."""
        return self._rows[: self.n]

    def _keys(self, rows):
        if self._int_keys:
            codes = np.zeros(rows.shape[0], dtype=np.int64)
            for j in range(self.width):
                codes = codes * self.alg.size + rows[:, j]
            return codes
        return [r.tobytes() for r in np.asarray(rows, dtype=np.uint8)]

    def _find(self, keys):
        if self._dense:
            return self._lookup[keys]
        return np.fromiter((self._lookup.get(int(c) if self._int_keys else c, -1) for c in keys),
                           dtype=np.int64, count=len(keys))

    def _merge(self, rows, op_index, args):
        """Append the rows not yet present; return their new indices."""
        keys = self._keys(rows)
        found = self._find(keys)
        fresh = np.flatnonzero(found < 0)
        if len(fresh) == 0:
            return fresh
        if self._int_keys:
            _, first = np.unique(np.asarray(keys)[fresh], return_index=True)
            pick = fresh[np.sort(first)]
        else:
            seen, pick = set(), []
            for i in fresh:
                if keys[i] not in seen:
                    seen.add(keys[i])
                    pick.append(i)
            pick = np.asarray(pick, dtype=np.int64)
        count = len(pick)
        if self.n + count > self.budget.max_elements:
            raise ResourceLimitError("closure elements", self.n + count, self.budget.max_elements)
        while self.n + count > len(self._rows):
            grown = np.zeros((2 * len(self._rows), self.width), dtype=np.uint8)
            grown[: self.n] = self._rows[: self.n]
            self._rows = grown
        new_idx = np.arange(self.n, self.n + count)
        self._rows[self.n : self.n + count] = rows[pick]
        if self._dense:
            self._lookup[np.asarray(keys)[pick]] = new_idx
        else:
            for i, j in zip(pick, new_idx):
                key = keys[i]
                self._lookup[int(key) if self._int_keys else key] = int(j)
        if op_index is None:
            self.parents.extend([None] * count)
        else:
            picked = args[pick]
            self.parents.extend((op_index, tuple(int(a) for a in r)) for r in picked)
        self.n += count
        return new_idx

    # -- the engine ---------------------------------------------------------

    def run(self, stop: Optional[Callable] = None, on_round: Optional[Callable] = None) -> "Closure":
        """Close under the basic operations.

        ``stop(closure, new_indices)`` is called after every merge that adds
        elements and ``on_round(closure)`` after every round; either
        returning true halts the closure early with ``complete`` False.
        """
        ops = self.alg.operations
        for oi, f in enumerate(ops):
            if f.arity == 0:
                row = np.full((1, self.width), f.table[0], dtype=np.uint8)
                added = self._merge(row, oi, np.zeros((1, 0), dtype=np.int64))
                if len(added) and stop is not None and stop(self, added):
                    return self
        if stop is not None and self.n and stop(self, np.arange(self.n)):
            return self
        start = 0
        pool = ThreadPoolExecutor(self.budget.threads) if self.budget.threads > 1 else None
        try:
            while start < self.n:
                old, total = start, self.n
                for oi, f in enumerate(ops):
                    if f.arity == 0:
                        continue
                    for block in _frontier_blocks(f.arity, old, total):
                        if self._run_block(oi, f, block, stop, pool):
                            return self
                start = total
                self.rounds += 1
                if on_round is not None and on_round(self):
                    return self
        finally:
            if pool is not None:
                pool.shutdown()
        self.complete = True
        return self

    def _run_block(self, oi, f, block, stop, pool):
        sizes, offsets = block
        count = math.prod(sizes)
        if self.budget.max_work is not None and self.work + count > self.budget.max_work:
            raise ResourceLimitError("closure work", self.work + count, self.budget.max_work)
        self.work += count
        snapshot = self._rows[: self.n]
        table = f.array
        size = self.alg.size

        def compute(span):
            lo, hi = span
            flat = np.arange(lo, hi, dtype=np.int64)
            args = np.empty((hi - lo, len(sizes)), dtype=np.int64)
            for j in range(len(sizes) - 1, -1, -1):
                flat, digit = np.divmod(flat, sizes[j])
                args[:, j] = digit + offsets[j]
            acc = np.zeros((hi - lo, self.width), dtype=np.int64)
            for j in range(len(sizes)):
                acc *= size
                acc += snapshot[args[:, j]]
            return table[acc].astype(np.uint8), args

        spans = [(lo, min(lo + CHUNK, count)) for lo in range(0, count, CHUNK)]
        results = pool.map(compute, spans) if pool is not None else map(compute, spans)
        for rows, args in results:
            added = self._merge(rows, oi, args)
            if len(added) and stop is not None and stop(self, added):
                return True
        return False

    # -- membership view ----------------------------------------------------

    def _member_mask(self):
        if not self.tag:
            return np.ones(self.n, dtype=bool)
        return np.all(self.rows[:, self.k :] == np.asarray(self.tag, dtype=np.uint8), axis=1)

    def member_indices(self) -> np.ndarray:
        """Indices (discovery order) of the members."""
        return np.flatnonzero(self._member_mask())

    def index_of(self, t) -> int:
        """Index of member ``t`` (a k-tuple), or -1."""
        row = np.asarray(tuple(t) + self.tag, dtype=np.int64)[None, :]
        return int(self._find(self._keys(row))[0])

    def __contains__(self, t) -> bool:
        return self.index_of(t) >= 0

    def codes(self) -> list:
        size = self.alg.size
        return sorted(encode(r[: self.k], size) for r in self.rows[self.member_indices()])

    def __iter__(self):
        for c in self.codes():
            yield decode(c, self.alg.size, self.k)

    def __len__(self) -> int:
        return int(self._member_mask().sum())

    def to_tupleset(self) -> TupleSet:
        ts = TupleSet(self.alg.size, self.k)
        ts.add_codes(self.codes())
        return ts

    def __eq__(self, other):
        if isinstance(other, (Closure, TupleSet)):
            return self.codes() == other.codes()
        return NotImplemented

    # -- terms --------------------------------------------------------------

    def term_at(self, index: int):
        """Term over the generators producing element ``index``."""
        ops = self.alg.operations
        memo = {}
        stack = [index]
        while stack:
            i = stack[-1]
            if i in memo:
                stack.pop()
                continue
            parent = self.parents[i]
            if parent is None:
                memo[i] = Var(self._gen_var[i])
                stack.pop()
                continue
            pending = [a for a in parent[1] if a not in memo]
            if pending:
                stack.extend(pending)
                continue
            memo[i] = Apply(ops[parent[0]].name, tuple(memo[a] for a in parent[1]))
            stack.pop()
        return memo[index]

    def term_for(self, target):
        """A term ``t`` with ``t(generators) == target``, re-checked before return."""
        index = self.index_of(target)
        if index < 0:
            raise KeyError(f"{tuple(target)} is not in the closure")
        term = self.term_at(index)
        check_generated(self, term, tuple(target))
        return term


def check_generated(closure, term, target):
    """Evaluate ``term`` on the generator columns and compare with ``target``."""
    if not closure.generators:
        got = evaluate(term, closure.alg, [])
        got = np.broadcast_to(got, (closure.width,))
    else:
        gens = np.asarray([g + closure.tag for g in closure.generators], dtype=np.int64)
        got = evaluate(term, closure.alg, list(gens))
    want = np.asarray(tuple(target) + closure.tag)
    if not np.array_equal(got, want):
        from .errors import InconsistencyError

        raise InconsistencyError(f"reconstructed term evaluates to {got.tolist()}, expected {want.tolist()}")


def _frontier_blocks(arity, old, total):
    """Disjoint products covering argument tuples with some index >= ``old``.

    Block ``p`` fixes the first frontier position at ``p``: positions before
    it range over old elements, position ``p`` over the frontier, the rest
    over everything.
    """
    fresh = total - old
    for p in range(arity):
        sizes = [old] * p + [fresh] + [total] * (arity - 1 - p)
        if 0 in sizes:
            continue
        offsets = [0] * p + [old] + [0] * (arity - 1 - p)
        yield sizes, offsets


def sg_power(alg: FiniteAlgebra, k: int, generators, *, budget=None, stop=None, on_round=None) -> Closure:
    """Subuniverse of A^k generated by ``generators`` under the basic operations."""
    return Closure(alg, k, _as_tuples(generators, alg.size, k), budget=budget).run(stop, on_round)


def idempotent_image_closure(alg: FiniteAlgebra, k: int, generators, *, budget=None, stop=None,
                             on_round=None) -> Closure:
    """Images of ``generators`` under all idempotent term operations of ``alg``.

    When every basic operation is idempotent the tag is constant on the whole
    closure, so it is dropped and this is plain :func:`sg_power`.
    """
    gens = _as_tuples(generators, alg.size, k)
    if alg.is_idempotent():
        return Closure(alg, k, gens, budget=budget).run(stop, on_round)
    tag = tuple(range(alg.size))
    return Closure(alg, k, gens, tag=tag, budget=budget).run(stop, on_round)


def _as_tuples(generators, size, k):
    if isinstance(generators, TupleSet):
        return list(generators)
    out = []
    for g in generators:
        if isinstance(g, (int, np.integer)):
            out.append(decode(int(g), size, k))
        else:
            out.append(tuple(g))
    return out


def stop_at(target) -> Callable:
    """``stop`` hook that halts as soon as ``target`` (a member k-tuple) appears."""
    target = tuple(target)

    def hit(closure, _new):
        return closure.index_of(target) >= 0

    return hit


def is_idempotent_subuniverse(alg: FiniteAlgebra, subset) -> bool:
    """True iff ``subset`` is closed under every idempotent term operation.

    Closing the one-element tuples of ``subset`` is enough: identifying
    variables of an idempotent term keeps it idempotent, so the term
    operations applied to elements of ``subset`` are covered.
    """
    subset = sorted(set(subset))
    if not subset:
        raise ValueError("subset must be nonempty")
    got = idempotent_image_closure(alg, 1, [(a,) for a in subset])
    return [t[0] for t in got] == subset


def idempotent_closure_of(alg: FiniteAlgebra, subset) -> list:
    got = idempotent_image_closure(alg, 1, [(a,) for a in sorted(set(subset))])
    return [t[0] for t in got]


def enumerate_idempotent_subuniverses(alg: FiniteAlgebra, bound: int = 8) -> list:
    """All nonempty idempotent subuniverses, ascending by (size, bitmask)."""
    if alg.size > bound:
        raise ResourceLimitError("universe size", alg.size, bound)
    found = []
    for r in range(1, alg.size + 1):
        for subset in itertools.combinations(range(alg.size), r):
            if is_idempotent_subuniverse(alg, subset):
                found.append(list(subset))
    found.sort(key=subset_key)
    return found
