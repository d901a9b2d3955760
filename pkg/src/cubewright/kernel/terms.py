"""Terms over an algebra's operation symbols.

Terms built by closure reconstruction share subterms, so evaluation memoizes
on node identity rather than walking the tree.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class Var:
    index: int

    @property
    def arity(self) -> int:
        return self.index + 1


@dataclass(frozen=True)
class Apply:
    op: str
    args: tuple

    @property
    def arity(self) -> int:
        return max((a.arity for a in self.args), default=0)


Term = Var | Apply


def variables(n: int) -> list:
    return [Var(i) for i in range(n)]


def evaluate(term, alg, values) -> np.ndarray:
    """Evaluate ``term`` coordinatewise.

    ``values[i]`` is the vector assigned to variable ``i``; all vectors share
    one length. Returns an int64 vector of that length.
    """
    vecs = [np.asarray(v, dtype=np.int64) for v in values]
    length = len(vecs[0]) if vecs else 1
    ops = {f.name: f for f in alg.operations}
    memo = {}

    def go(t):
        key = id(t)
        if key in memo:
            return memo[key]
        if isinstance(t, Var):
            out = vecs[t.index]
        else:
            f = ops[t.op]
            if len(t.args) != f.arity:
                raise ValueError(f"{t.op} expects {f.arity} arguments, got {len(t.args)}")
            idx = np.zeros(length, dtype=np.int64)
            for a in t.args:
                idx = idx * alg.size + go(a)
            out = f.array[idx]
        memo[key] = out
        return out

    return go(term)


def evaluate_at(term, alg, point: Sequence[int]) -> int:
    return int(evaluate(term, alg, [[v] for v in point])[0])


def substitute(term, replacement: Sequence):
    """Replace ``Var(i)`` by ``replacement[i]`` throughout, preserving sharing."""
    memo = {}

    def go(t):
        key = id(t)
        if key not in memo:
            if isinstance(t, Var):
                memo[key] = replacement[t.index]
            else:
                memo[key] = Apply(t.op, tuple(go(a) for a in t.args))
        return memo[key]

    return go(term)


def expand(term, alg):
    """Rewrite a term over derived operations into one over basic operations.

    Operations of ``alg`` carrying a ``definition`` are unfolded; basic ones
    are left alone.
    """
    defs = {f.name: f.definition for f in alg.operations if f.definition is not None}
    memo = {}

    def go(t):
        key = id(t)
        if key not in memo:
            if isinstance(t, Var):
                memo[key] = t
            elif t.op in defs:
                memo[key] = substitute(defs[t.op], [go(a) for a in t.args])
            else:
                memo[key] = Apply(t.op, tuple(go(a) for a in t.args))
        return memo[key]

    return go(term)


def term_size(term) -> int:
    """Number of nodes in the tree (not the shared DAG)."""
    memo = {}

    def go(t):
        key = id(t)
        if key not in memo:
            memo[key] = 1 if isinstance(t, Var) else 1 + sum(go(a) for a in t.args)
        return memo[key]

    return go(term)


def default_names(n):
    return [f"x{i + 1}" for i in range(n)]


def render(term, names=None) -> str:
    """Prefix notation: ``meet(x1,x2)``."""
    memo = {}

    def go(t):
        key = id(t)
        if key not in memo:
            if isinstance(t, Var):
                memo[key] = names[t.index] if names else f"x{t.index + 1}"
            else:
                memo[key] = f"{t.op}({','.join(go(a) for a in t.args)})"
        return memo[key]

    return go(term)


_TOKEN = re.compile(r"\s*([^\s(),]+|[(),])")


def parse_term(text: str, names=None):
    """Inverse of :func:`render`.

    Without ``names``, variables are ``x1, x2, ...``. Any other bare symbol
    followed by ``(`` is an operation; a bare symbol without arguments is an
    error unless it is a variable name (use ``c()`` for constants).
    """
    tokens = _TOKEN.findall(text)
    pos = 0
    lookup = {n: i for i, n in enumerate(names)} if names else None

    def var_index(sym):
        if lookup is not None:
            return lookup.get(sym)
        m = re.fullmatch(r"x(\d+)", sym)
        return int(m.group(1)) - 1 if m and int(m.group(1)) >= 1 else None

    def parse():
        nonlocal pos
        if pos >= len(tokens):
            raise ValueError("unexpected end of term")
        sym = tokens[pos]
        pos += 1
        if pos < len(tokens) and tokens[pos] == "(":
            pos += 1
            args = []
            if pos < len(tokens) and tokens[pos] == ")":
                pos += 1
                return Apply(sym, ())
            while True:
                args.append(parse())
                if pos >= len(tokens):
                    raise ValueError("unbalanced parentheses")
                tok = tokens[pos]
                pos += 1
                if tok == ")":
                    return Apply(sym, tuple(args))
                if tok != ",":
                    raise ValueError(f"expected ',' or ')', got {tok!r}")
        i = var_index(sym)
        if i is None:
            raise ValueError(f"unknown variable {sym!r}")
        return Var(i)

    term = parse()
    if pos != len(tokens):
        raise ValueError(f"trailing input after term: {''.join(tokens[pos:])!r}")
    return term
