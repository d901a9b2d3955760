"""Bundled example algebras and generators for population runs."""

from __future__ import annotations

import itertools
import random

from .kernel import FiniteAlgebra, Operation, make_operation


def semilattice() -> FiniteAlgebra:
    return FiniteAlgebra(2, [make_operation("meet", 2, 2, min)], "semilattice")


def z2_maltsev() -> FiniteAlgebra:
    return FiniteAlgebra(2, [make_operation("m", 3, 2, lambda x, y, z: x ^ y ^ z)], "z2-maltsev")


def majority() -> FiniteAlgebra:
    maj = make_operation("maj", 3, 2, lambda x, y, z: (x & y) | (y & z) | (x & z))
    return FiniteAlgebra(2, [maj], "majority")


def chain3() -> FiniteAlgebra:
    return FiniteAlgebra(3, [make_operation("meet", 2, 3, min)], "chain3-min")


def meet_const1() -> FiniteAlgebra:
    """A non-idempotent presentation: meet plus the constant 1."""
    return FiniteAlgebra(2, [make_operation("meet", 2, 2, min), Operation("one", 0, (1,))], "meet-const1")


def maltsev_const0() -> FiniteAlgebra:
    m = make_operation("m", 3, 2, lambda x, y, z: x ^ y ^ z)
    return FiniteAlgebra(2, [m, Operation("zero", 0, (0,))], "z2-maltsev-const0")


def trivial() -> FiniteAlgebra:
    return FiniteAlgebra(1, [], "trivial")


BUNDLED = {
    "semilattice": semilattice,
    "z2-maltsev": z2_maltsev,
    "majority": majority,
    "chain3-min": chain3,
    "meet-const1": meet_const1,
}

BLOCKER_EXAMPLES = ("semilattice", "chain3-min", "meet-const1")


def bundled() -> list:
    return [make() for make in BUNDLED.values()]


def idempotent_tables(size, arity):
    """Every idempotent table of the given arity, in lexicographic order."""
    points = list(itertools.product(range(size), repeat=arity))
    free = [i for i, p in enumerate(points) if len(set(p)) > 1]
    for values in itertools.product(range(size), repeat=len(free)):
        table = [p[0] for p in points]
        for i, v in zip(free, values):
            table[i] = v
        yield tuple(table)


def all_idempotent_algebras(size, arities, prefix="alg"):
    """All idempotent algebras with one operation of each listed arity."""
    names = [f"f{n}" for n in range(len(arities))]
    spaces = [list(idempotent_tables(size, r)) for r in arities]
    for n, tables in enumerate(itertools.product(*spaces)):
        ops = [Operation(name, r, t) for name, r, t in zip(names, arities, tables)]
        yield FiniteAlgebra(size, ops, f"{prefix}-{n:06d}")


def random_idempotent_algebras(size, arities, count, seed, blocker=False, prefix="rnd"):
    """``count`` uniformly random idempotent algebras, reproducible from ``seed``.

    With ``blocker=True`` every operation is drawn conditioned on a randomly
    chosen pair ``D < A`` (D a proper nonempty subset): each operation gets an
    absorbing coordinate ``i`` with ``f(.., d at i, ..) in D`` for ``d in D``.
    The whole universe then has the cube term blocker ``(D, A)``.
    """
    rng = random.Random(seed)
    for n in range(count):
        absorb = None
        if blocker:
            r = rng.randint(1, size - 1)
            absorb = set(rng.sample(range(size), r))
        ops = []
        for j, arity in enumerate(arities):
            coord = rng.randrange(arity) if absorb is not None else None
            table = []
            for p in itertools.product(range(size), repeat=arity):
                if len(set(p)) == 1:
                    table.append(p[0])
                elif coord is not None and p[coord] in absorb:
                    table.append(rng.choice(sorted(absorb)))
                else:
                    table.append(rng.randrange(size))
            ops.append(Operation(f"f{j}", arity, tuple(table)))
        yield FiniteAlgebra(size, ops, f"{prefix}-{seed}-{n:06d}")
