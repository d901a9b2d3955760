import itertools
import random

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from cubewright import corpus
from cubewright.congruence import (
    CarrierAlgebra,
    Partition,
    all_congruences,
    block_profile,
    brute_force_congruences,
    generated_congruence,
    is_compatible,
    join,
    kernel_of_projection,
    restrict,
)
from cubewright.kernel import ResourceLimitError, sg_power


def carrier_of(alg, k=1, gens=None):
    gens = gens if gens is not None else [(a,) for a in range(alg.size)]
    return CarrierAlgebra.from_closure(sg_power(alg, k, gens))


def test_partition_basics():
    p = Partition.from_blocks(5, [[0, 3], [1, 4]])
    assert p.blocks() == [[0, 3], [1, 4], [2]]
    assert p.index == 3 and p.same(1, 4) and not p.same(0, 1)
    assert p.key() == (0, 1, 2, 0, 1)
    q = p.copy()
    q.union(0, 2)
    assert p <= q and not q <= p and p != q
    assert Partition(3).to_json() == [[0], [1], [2]]


def test_generated_congruence_examples(chain3, semilattice):
    c = carrier_of(chain3)
    assert generated_congruence(c, [(1, 2)]).blocks() == [[0], [1, 2]]
    assert generated_congruence(c, []).blocks() == [[0], [1], [2]]
    c2 = carrier_of(semilattice)
    assert generated_congruence(c2, [(0, 1)]).blocks() == [[0, 1]]


def test_all_congruences_examples(chain3, semilattice, trivial):
    keys = [t.blocks() for t in all_congruences(carrier_of(chain3))]
    assert keys[0] == [[0], [1], [2]] and keys[-1] == [[0, 1, 2]]
    assert sorted(keys) == sorted([[[0], [1], [2]], [[0], [1, 2]], [[0, 1], [2]], [[0, 1, 2]]])
    assert [t.index for t in all_congruences(carrier_of(semilattice))] == [2, 1]
    assert [t.index for t in all_congruences(carrier_of(trivial))] == [1]


def test_all_congruences_cap(semilattice):
    c = carrier_of(semilattice, 6, [tuple(int(i != j) for j in range(6)) for i in range(6)])
    assert c.n == 63
    with pytest.raises(ResourceLimitError):
        all_congruences(c, cap=10)


def test_kernel_restrict_profile():
    alg = corpus.semilattice()
    c = carrier_of(alg, 3, [(0, 1, 1), (1, 0, 1), (1, 1, 0)])
    ker = kernel_of_projection(c, 0)
    gens = [c.index_of(t) for t in [(0, 1, 1), (1, 0, 1), (1, 1, 0)]]
    r = restrict(ker, gens)
    assert r.labelled_blocks() == [[gens[0]], sorted(gens[1:])] or len(r.blocks()) == 2
    count, blocks = block_profile(r, 1)
    assert count == 1 and sorted(blocks[0]) == sorted(gens[1:])
    assert block_profile(Partition(4), 1) == (0, [])
    assert block_profile(Partition.from_blocks(3, [[0, 1, 2]]), 1) == (1, [[0, 1, 2]])
    with pytest.raises(ValueError):
        kernel_of_projection(c, 3)


def test_single_element_carrier(trivial):
    c = carrier_of(trivial)
    assert kernel_of_projection(c, 0).index == 1


def test_carrier_rejects_non_closed(semilattice):
    with pytest.raises(ValueError):
        CarrierAlgebra(semilattice, [(0, 1), (1, 0)])


def _random_carrier(seed, max_size=20):
    rng = random.Random(seed)
    while True:
        alg = next(corpus.random_idempotent_algebras(rng.choice([2, 3]), rng.choice([(2,), (3,), (2, 3)]), 1,
                                                     rng.randrange(10**6)))
        k = rng.choice([1, 2])
        gens = [tuple(rng.randrange(alg.size) for _ in range(k)) for _ in range(rng.randint(1, 3))]
        c = carrier_of(alg, k, gens)
        if 2 <= c.n <= max_size:
            return alg, c


@pytest.mark.parametrize("seed", range(30))
def test_generated_congruence_is_least_and_compatible(seed):
    alg, c = _random_carrier(seed, 7)
    rng = random.Random(seed)
    pairs = [tuple(rng.sample(range(c.n), 2)) for _ in range(rng.randint(1, 2))]
    theta = generated_congruence(c, pairs)
    assert is_compatible(c, theta)
    elements = [c.element(i) for i in range(c.n)]
    assert theta.key() == oracles.least_congruence_above(elements, alg, pairs)


@pytest.mark.parametrize("seed", range(20))
def test_all_congruences_match_brute_force(seed):
    alg, c = _random_carrier(1000 + seed, 7)
    elements = [c.element(i) for i in range(c.n)]
    mine = {t.key() for t in all_congruences(c)}
    assert mine == oracles.congruences(elements, alg)
    assert mine == {t.key() for t in brute_force_congruences(c)}


@pytest.mark.parametrize("seed", range(10))
def test_compatibility_on_larger_carriers(seed):
    rng = random.Random(seed)
    alg = next(corpus.random_idempotent_algebras(3, (2, 3), 1, 500 + seed))
    gens = [tuple(rng.randrange(3) for _ in range(4)) for _ in range(3)]
    c = CarrierAlgebra.from_closure(sg_power(alg, 4, gens))
    if c.n > 200:
        pytest.skip("carrier larger than the exhaustive bound")
    pairs = [tuple(rng.sample(range(c.n), 2))] if c.n > 1 else []
    assert is_compatible(c, generated_congruence(c, pairs))


def test_join_is_generated_by_union(chain3):
    c = carrier_of(chain3)
    a = generated_congruence(c, [(0, 1)])
    b = generated_congruence(c, [(1, 2)])
    assert join(c, a, b) == generated_congruence(c, [(0, 1), (1, 2)])


@given(st.permutations(list(range(7))), st.integers(0, 6), st.integers(0, 6))
def test_restrict_and_profile_commute_with_relabeling(perm, u, v):
    alg = corpus.semilattice()
    gens = [(0, 1, 1), (1, 0, 1), (1, 1, 0)]
    c = carrier_of(alg, 3, gens)
    relabeled = CarrierAlgebra(alg, [c.element(perm.index(i)) for i in range(c.n)])
    theta = generated_congruence(c, [(u, v)])
    moved = generated_congruence(relabeled, [(perm[u], perm[v])])
    subset = list(range(0, c.n, 2))
    a = restrict(theta, subset)
    b = restrict(moved, [perm[x] for x in subset])
    assert sorted(map(sorted, ([c.element(x) for x in blk] for blk in a.labelled_blocks()))) == \
        sorted(map(sorted, ([relabeled.element(x) for x in blk] for blk in b.labelled_blocks())))
    assert block_profile(a, 1)[0] == block_profile(b, 1)[0]
