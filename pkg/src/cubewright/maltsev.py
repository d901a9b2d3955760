"""Deciding term conditions of V(A) with evaluation vectors.

A term in n variables is known to V(A) only through its term operation on A,
so an identity s = t in those variables holds in V(A) iff s and t agree on
every assignment of the variables to A. Closing the projection vectors
(restricted to a list of assignments) under the basic operations gives
exactly the restrictions of all n-ary term operations to that list. As long
as the list contains every assignment instantiating the identities being
decided, searching the closure is a complete decision procedure; both
schemas below are built that way.

The chain search looks for idempotent 4-ary terms f_0, ..., f_{2m+1} with
f_0 = x, f_{2m+1} = v, f_i(x,y,y,y) = f_{i+1}(x,y,y,y) for even i, and
f_i(x,x,y,y) = f_{i+1}(x,x,y,y), f_i(x,y,x,y) = f_{i+1}(x,y,x,y) for odd i.
Each condition is a 2-variable identity, so the schema is the three shapes
at every (x, y) plus the diagonal points that force idempotence. The chain
then is a path from the x-projection to the v-projection alternating between
two equivalences on the closure, starting and ending with the even one;
repeated terms are allowed, so a path exists iff one exists in the join, and
breadth-first search returns one with the least m.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .kernel import Budget, Closure, ResourceLimitError, Var, evaluate, render, substitute

FOUND = "found"
ABSENT = "absent"
INCONCLUSIVE = "inconclusive"

CHAIN_VARS = ("x", "y", "u", "v")


@dataclass
class TermSearch:
    status: str
    term: object = None
    closure_size: int = 0
    note: str = ""

    def to_json(self, names=None):
        out = {"status": self.status, "closure_size": self.closure_size}
        if self.term is not None:
            out["term"] = render(self.term, names)
        if self.note:
            out["note"] = self.note
        return out


@dataclass
class Omit15Chain:
    m: int
    terms: list

    def to_json(self):
        return {"m": self.m, "terms": [render(t, CHAIN_VARS) for t in self.terms]}


@dataclass
class ChainSearch:
    status: str
    chain: Optional[Omit15Chain] = None
    closure_size: int = 0
    note: str = ""

    def to_json(self):
        out = {"status": self.status, "closure_size": self.closure_size}
        if self.chain is not None:
            out.update(self.chain.to_json())
        if self.note:
            out["note"] = self.note
        return out


def free_restriction_closure(alg, n_vars, points, budget=None, stop=None, on_round=None) -> Closure:
    """Restrictions of all n-ary term operations to ``points``.

    Element ``i`` of the result is a vector over ``points``; the first
    ``n_vars`` generators are the projections, so reconstructed terms are in
    variables ``0..n_vars-1``.
    """
    points = [tuple(p) for p in points]
    for p in points:
        if len(p) != n_vars:
            raise ValueError(f"point {p} does not assign {n_vars} variables")
    projections = [tuple(p[i] for p in points) for i in range(n_vars)]
    return Closure(alg, len(points), projections, budget=budget).run(stop, on_round)


def _run_partial(alg, n_vars, points, budget, stop=None, on_round=None):
    projections = [tuple(p[i] for p in points) for i in range(n_vars)]
    try:
        closure = Closure(alg, len(points), projections, budget=budget)
    except ResourceLimitError as exc:
        # the generators alone exceed the cap
        return None, exc
    try:
        closure.run(stop, on_round)
        return closure, None
    except ResourceLimitError as exc:
        return closure, exc


def verify_term_identities(alg, s, t, schema=None, n_vars=None) -> bool:
    """True iff ``s`` and ``t`` agree on every assignment in ``schema``.

    The default schema is all of A^n, which makes this the V(A) identity test.
    """
    if schema is None:
        n = n_vars if n_vars is not None else max(s.arity, t.arity)
        schema = list(itertools.product(range(alg.size), repeat=n))
    if not schema:
        return True
    cols = np.asarray(schema, dtype=np.int64).T
    values = list(cols) if len(cols) else []
    return bool(np.array_equal(evaluate(s, alg, values), evaluate(t, alg, values)))


# -- weak near-unanimity -----------------------------------------------------


def wnu_schema(size, n):
    """Points and the index maps: ``one_y[(x, y)][j]`` and ``diagonal[a]``."""
    points, index = [], {}

    def slot(p):
        if p not in index:
            index[p] = len(points)
            points.append(p)
        return index[p]

    one_y = {}
    for x in range(size):
        for y in range(size):
            if x != y:
                one_y[(x, y)] = [slot(tuple(y if i == j else x for i in range(n))) for j in range(n)]
    diagonal = [slot((a,) * n) for a in range(size)]
    return points, one_y, diagonal


def find_wnu(alg, n, budget=None) -> TermSearch:
    """An n-ary weak near-unanimity term, or a proof there is none.

    ``absent`` is only returned after the closure is exhausted.
    """
    if n < 2:
        raise ValueError("arity must be at least 2")
    points, one_y, diagonal = wnu_schema(alg.size, n)
    groups = np.asarray(list(one_y.values()), dtype=np.int64).reshape(-1, n)
    diag = np.asarray(diagonal, dtype=np.int64)
    hit = []

    def stop(closure, new):
        rows = closure.rows[new].astype(np.int64)
        ok = np.all(rows[:, diag] == np.arange(alg.size), axis=1)
        if len(groups):
            vals = rows[:, groups]
            ok &= np.all(vals == vals[:, :, :1], axis=(1, 2))
        good = np.flatnonzero(ok)
        if len(good):
            hit.append(int(new[good[0]]))
            return True
        return False

    closure, exc = _run_partial(alg, n, points, budget, stop)
    if closure is None:
        return TermSearch(INCONCLUSIVE, None, 0, str(exc))
    if hit:
        term = closure.term_at(hit[0])
        if not verify_wnu(alg, term, n):
            raise AssertionError(f"WNU candidate {render(term)} fails its identities")
        return TermSearch(FOUND, term, closure.n)
    if exc is not None:
        return TermSearch(INCONCLUSIVE, None, closure.n, str(exc))
    return TermSearch(ABSENT, None, closure.n)


def verify_wnu(alg, term, n) -> bool:
    """Idempotence and all one-y positions equal, over all assignments."""
    x, y = Var(0), Var(1)
    if not verify_term_identities(alg, substitute(term, [x] * n), x, n_vars=1):
        return False
    first = substitute(term, [y] + [x] * (n - 1))
    for j in range(1, n):
        other = substitute(term, [y if i == j else x for i in range(n)])
        if not verify_term_identities(alg, first, other, n_vars=2):
            return False
    return True


# -- the omit-{1,5} chain ----------------------------------------------------


def chain_schema(size):
    """Points over (x, y, u, v) and the coordinate groups of the two equivalences."""
    pairs = [(x, y) for x in range(size) for y in range(size) if x != y]
    shape1 = [(x, y, y, y) for x, y in pairs]
    shape2 = [(x, x, y, y) for x, y in pairs]
    shape3 = [(x, y, x, y) for x, y in pairs]
    diagonal = [(a,) * 4 for a in range(size)]
    points = shape1 + shape2 + shape3 + diagonal
    p = len(pairs)
    even = list(range(0, p))
    odd = list(range(p, 3 * p))
    diag = list(range(3 * p, 3 * p + size))
    return points, even, odd, diag


def _chain_bfs(closure, even, odd, diag, size):
    """Shortest alternating path from the x- to the v-projection, as indices."""
    rows = closure.rows
    idem = np.flatnonzero(np.all(rows[:, diag] == np.arange(size, dtype=np.uint8), axis=1))
    start = closure.index_of(tuple(closure.generators[0]))
    goal = closure.index_of(tuple(closure.generators[3]))

    def classes(cols):
        out, key_of = {}, {}
        sub = rows[:, cols]
        for i in idem:
            key = sub[i].tobytes()
            out.setdefault(key, []).append(int(i))
            key_of[int(i)] = key
        return out, key_of

    even_cls, even_key = classes(even)
    odd_cls, odd_key = classes(odd)
    # state (index, parity of the next step); parity 0 is the even step
    parent = {(start, 0): None}
    layer = [(start, 0)]
    done = [set(), set()]
    while layer:
        nxt = []
        for v, par in layer:
            cls, key_of = (even_cls, even_key) if par == 0 else (odd_cls, odd_key)
            key = key_of[v]
            if key in done[par]:
                continue
            done[par].add(key)
            for w in cls[key]:
                state = (w, 1 - par)
                if state not in parent:
                    parent[state] = (v, par)
                    nxt.append(state)
                    if state == (goal, 1):
                        path = [state]
                        while parent[path[-1]] is not None:
                            path.append(parent[path[-1]])
                        return [s[0] for s in reversed(path)]
        layer = nxt
    return None


def find_omit15_chain(alg, budget=None) -> ChainSearch:
    """Idempotent terms f_0..f_{2m+1} as above with least m, or a proof there are none.

    The search runs a BFS after every closure round, so a chain is often
    found before the closure is complete; ``absent`` needs the full closure
    and ``inconclusive`` means a resource cap was hit first.
    """
    points, even, odd, diag = chain_schema(alg.size)
    found = []

    def on_round(closure):
        path = _chain_bfs(closure, even, odd, diag, alg.size)
        if path is not None:
            found.append(path)
            return True
        return False

    closure, exc = _run_partial(alg, 4, points, budget, on_round=on_round)
    if closure is None:
        return ChainSearch(INCONCLUSIVE, None, 0, str(exc))
    if not found:
        path = _chain_bfs(closure, even, odd, diag, alg.size)
        if path is not None:
            found.append(path)
    if not found:
        if exc is not None:
            return ChainSearch(INCONCLUSIVE, None, closure.n, str(exc))
        return ChainSearch(ABSENT, None, closure.n)
    path = found[0]
    terms = [Var(0)] + [closure.term_at(i) for i in path[1:-1]] + [Var(3)]
    chain = Omit15Chain((len(terms) - 2) // 2, terms)
    if not verify_chain(alg, chain):
        raise AssertionError("reconstructed chain fails its identities")
    return ChainSearch(FOUND, chain, closure.n)


def verify_chain(alg, chain: Omit15Chain) -> bool:
    """Conditions (a)-(d) and idempotence, over all assignments."""
    f = chain.terms
    if len(f) != 2 * chain.m + 2 or f[0] != Var(0) or f[-1] != Var(3):
        return False
    x, y = Var(0), Var(1)
    for t in f:
        if not verify_term_identities(alg, substitute(t, [x] * 4), x, n_vars=1):
            return False
    for i in range(len(f) - 1):
        shapes = [(x, y, y, y)] if i % 2 == 0 else [(x, x, y, y), (x, y, x, y)]
        for shape in shapes:
            if not verify_term_identities(alg, substitute(f[i], shape), substitute(f[i + 1], shape), n_vars=2):
                return False
    return True
