"""Finite algebras given by operation tables, and their JSON file format.

Tables are flat and row-major: the entry for ``f(x_1, ..., x_k)`` sits at
index ``sum(x_i * size**(k - i))``, so the leftmost argument is the most
significant digit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from .errors import AlgebraFormatError


@dataclass(frozen=True)
class Operation:
    name: str
    arity: int
    table: tuple
    # term over the parent algebra's basic operations, for derived operations
    definition: Optional[object] = field(default=None, compare=False, repr=False)

    @cached_property
    def array(self) -> np.ndarray:
        return np.asarray(self.table, dtype=np.int64)

    def __call__(self, *args: int) -> int:
        if len(args) != self.arity:
            raise TypeError(f"{self.name} takes {self.arity} arguments, got {len(args)}")
        size = _table_base(len(self.table), self.arity)
        index = 0
        for a in args:
            index = index * size + a
        return self.table[index]


def _table_base(length, arity):
    if arity == 0:
        return 1
    return round(length ** (1.0 / arity))


@dataclass(frozen=True)
class FiniteAlgebra:
    size: int
    operations: tuple = ()
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "operations", tuple(self.operations))
        _validate(self.size, self.operations)

    def op(self, name: str) -> Operation:
        for f in self.operations:
            if f.name == name:
                return f
        raise KeyError(name)

    @property
    def universe(self) -> range:
        return range(self.size)

    @property
    def max_arity(self) -> int:
        return max((f.arity for f in self.operations), default=0)

    def is_idempotent(self) -> bool:
        return all(is_idempotent_operation(self, f) for f in self.operations)

    def induced(self, subset: Sequence[int], operations=None) -> "FiniteAlgebra":
        """Restriction to a subuniverse, relabelled ``subset[i] -> i``.

        ``operations`` defaults to the basic operations; each must map
        ``subset`` into itself.
        """
        subset = sorted(subset)
        relabel = {a: i for i, a in enumerate(subset)}
        ops = []
        for f in self.operations if operations is None else operations:
            idx = _index_grid(self.size, subset, f.arity)
            try:
                table = tuple(relabel[int(v)] for v in f.array[idx])
            except KeyError:
                raise ValueError(f"{sorted(subset)} is not closed under {f.name}") from None
            ops.append(Operation(f.name, f.arity, table, f.definition))
        return FiniteAlgebra(len(subset), ops, f"{self.name}|{subset}")


def _index_grid(size, subset, arity):
    """Flat table indices of ``subset**arity`` in row-major order."""
    idx = np.zeros(1, dtype=np.int64)
    sub = np.asarray(subset, dtype=np.int64)
    for _ in range(arity):
        idx = (idx[:, None] * size + sub[None, :]).ravel()
    return idx


def _validate(size, operations):
    if not isinstance(size, int) or isinstance(size, bool) or size < 1:
        raise AlgebraFormatError(f"size must be an integer >= 1, got {size!r}", "size")
    seen = set()
    for n, f in enumerate(operations):
        where = f"operations[{n}]"
        if not isinstance(f.name, str) or not f.name:
            raise AlgebraFormatError("operation name must be a non-empty string", f"{where}.name")
        if f.name in seen:
            raise AlgebraFormatError(f"duplicate operation name {f.name!r}", f"{where}.name")
        seen.add(f.name)
        if not isinstance(f.arity, int) or isinstance(f.arity, bool) or f.arity < 0:
            raise AlgebraFormatError(f"arity must be a non-negative integer, got {f.arity!r}", f"{where}.arity")
        expected = size**f.arity
        if len(f.table) != expected:
            raise AlgebraFormatError(
                f"operation {f.name!r}: table has {len(f.table)} entries, expected {expected}",
                f"{where}.table",
            )
        for i, v in enumerate(f.table):
            if not isinstance(v, (int, np.integer)) or isinstance(v, bool) or not 0 <= v < size:
                raise AlgebraFormatError(
                    f"operation {f.name!r}: entry {v!r} out of range [0, {size})",
                    f"{where}.table[{i}]",
                )


def is_idempotent_operation(alg: FiniteAlgebra, op: Operation) -> bool:
    """True iff ``op(a, ..., a) == a`` for every element ``a``."""
    if op.arity == 0:
        return alg.size == 1
    diag = sum(alg.size**j for j in range(op.arity))
    return all(op.table[a * diag] == a for a in range(alg.size))


def idempotent_basic_reduct(alg: FiniteAlgebra) -> FiniteAlgebra:
    """Same universe, keeping only the idempotent basic operations."""
    ops = [f for f in alg.operations if is_idempotent_operation(alg, f)]
    return FiniteAlgebra(alg.size, ops, alg.name)


def make_operation(name, arity, size, fn, definition=None) -> Operation:
    """Tabulate a Python callable on ``range(size)**arity``."""
    import itertools

    table = tuple(int(fn(*args)) for args in itertools.product(range(size), repeat=arity))
    return Operation(name, arity, table, definition)


def parse_algebra(text: str) -> FiniteAlgebra:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise AlgebraFormatError(exc.msg, f"line {exc.lineno}, column {exc.colno}") from None
    return algebra_from_dict(doc)


def algebra_from_dict(doc) -> FiniteAlgebra:
    if not isinstance(doc, dict):
        raise AlgebraFormatError("top level must be a JSON object", "$")
    if "size" not in doc:
        raise AlgebraFormatError("missing field 'size'", "$")
    name = doc.get("name", "")
    if not isinstance(name, str):
        raise AlgebraFormatError("name must be a string", "name")
    raw_ops = doc.get("operations", [])
    if not isinstance(raw_ops, list):
        raise AlgebraFormatError("operations must be a list", "operations")
    ops = []
    for n, raw in enumerate(raw_ops):
        where = f"operations[{n}]"
        if not isinstance(raw, dict):
            raise AlgebraFormatError("operation must be an object", where)
        for key in ("name", "arity", "table"):
            if key not in raw:
                raise AlgebraFormatError(f"missing field {key!r}", where)
        if not isinstance(raw["table"], list):
            raise AlgebraFormatError("table must be a list of integers", f"{where}.table")
        ops.append(Operation(raw["name"], raw["arity"], tuple(raw["table"])))
    return FiniteAlgebra(doc["size"], ops, name)


def algebra_to_dict(alg: FiniteAlgebra) -> dict:
    doc = {"name": alg.name, "size": alg.size, "operations": []}
    for f in alg.operations:
        doc["operations"].append({"name": f.name, "arity": f.arity, "table": [int(v) for v in f.table]})
    return doc


def dump_algebra(alg: FiniteAlgebra) -> str:
    """Canonical JSON text, one operation per line."""
    lines = ["{", f'  "name": {json.dumps(alg.name)},', f'  "size": {alg.size},', '  "operations": [']
    ops = algebra_to_dict(alg)["operations"]
    for i, op in enumerate(ops):
        sep = "," if i + 1 < len(ops) else ""
        lines.append("    " + json.dumps(op, separators=(", ", ": ")) + sep)
    lines += ["  ]", "}"]
    return "\n".join(lines) + "\n"
