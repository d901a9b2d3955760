import itertools
import json
import random

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from cubewright import corpus
from cubewright.kernel import (
    AlgebraFormatError,
    Apply,
    Budget,
    Closure,
    FiniteAlgebra,
    Operation,
    ResourceLimitError,
    TupleSet,
    Var,
    algebra_from_dict,
    algebra_to_dict,
    decode,
    dump_algebra,
    encode,
    enumerate_idempotent_subuniverses,
    evaluate,
    evaluate_at,
    expand,
    idempotent_basic_reduct,
    idempotent_image_closure,
    is_idempotent_operation,
    is_idempotent_subuniverse,
    parse_algebra,
    parse_term,
    render,
    sg_power,
    stop_at,
    subset_key,
    substitute,
    term_for,
)
from cubewright.kernel.closure import default_max_elements
from cubewright.kernel.terms import term_size


# -- parsing -------------------------------------------------------------------


def test_parse_meet():
    alg = parse_algebra('{"size":2,"operations":[{"name":"meet","arity":2,"table":[0,0,0,1]}]}')
    f = alg.op("meet")
    assert all(f(i, j) == min(i, j) for i in range(2) for j in range(2))
    assert alg.is_idempotent()


def test_parse_empty_signature():
    alg = parse_algebra('{"size":2,"operations":[]}')
    assert alg.operations == () and alg.size == 2


def test_parse_z2_table_order():
    alg = parse_algebra('{"size":2,"operations":[{"name":"m","arity":3,"table":[0,1,1,0,1,0,0,1]}]}')
    m = alg.op("m")
    for x, y, z in itertools.product(range(2), repeat=3):
        assert m.table[4 * x + 2 * y + z] == x ^ y ^ z == m(x, y, z)


@pytest.mark.parametrize("doc, where", [
    ('{"size":2,"operations":[{"name":"f","arity":2,"table":[0,0,0]}]}', "operations[0].table"),
    ('{"size":2,"operations":[{"name":"f","arity":1,"table":[0,1]},{"name":"g","arity":2,"table":[0,0,0]}]}',
     "operations[1].table"),
    ('{"size":2,"operations":[{"name":"f","arity":2,"table":[0,0,2,1]}]}', "operations[0].table[2]"),
    ('{"size":0,"operations":[]}', "size"),
    ('{"size":2,"operations":[{"name":"f","arity":-1,"table":[0]}]}', "operations[0].arity"),
    ('{"size":2,"operations":[{"name":"f","arity":0,"table":[0]},{"name":"f","arity":0,"table":[1]}]}',
     "operations[1].name"),
    ('{"size":2,"operations":[{"arity":0,"table":[0]}]}', "operations[0]"),
    ('{"operations":[]}', "$"),
    ('[1,2]', "$"),
    ('{"size":2,"operations":[{"name":"f","arity":1,"table":[0,true]}]}', "operations[0].table"),
])
def test_format_errors_name_the_location(doc, where):
    with pytest.raises(AlgebraFormatError) as info:
        parse_algebra(doc)
    assert info.value.location.startswith(where)


def test_json_syntax_error_has_line_and_column():
    with pytest.raises(AlgebraFormatError) as info:
        parse_algebra('{\n  "size": 2,\n  "operations": [\n}')
    assert info.value.location.startswith("line 4")


def test_dump_roundtrip_is_canonical():
    for alg in corpus.bundled():
        text = dump_algebra(alg)
        again = parse_algebra(text)
        assert dump_algebra(again) == text
        assert algebra_from_dict(algebra_to_dict(alg)) == alg
        assert json.loads(text)["size"] == alg.size


def test_idempotence_of_operations(semilattice, z2, meet_const1):
    assert is_idempotent_operation(semilattice, semilattice.op("meet"))
    assert is_idempotent_operation(z2, z2.op("m"))
    assert not is_idempotent_operation(meet_const1, meet_const1.op("one"))
    unary0 = FiniteAlgebra(2, [Operation("c", 1, (0, 0))])
    assert not is_idempotent_operation(unary0, unary0.op("c"))
    single = FiniteAlgebra(1, [Operation("c", 0, (0,))])
    assert is_idempotent_operation(single, single.op("c"))


def test_idempotent_basic_reduct(z2, meet_const1):
    assert idempotent_basic_reduct(z2) == z2
    assert [f.name for f in idempotent_basic_reduct(meet_const1).operations] == ["meet"]
    empty = FiniteAlgebra(3, [])
    assert idempotent_basic_reduct(empty) == empty


def test_induced_relabels(chain3):
    sub = chain3.induced([1, 2])
    assert sub.size == 2 and sub.op("meet").table == (0, 0, 0, 1)
    cyclic = FiniteAlgebra(3, [Operation("s", 1, (1, 2, 0))])
    with pytest.raises(ValueError):
        cyclic.induced([0, 1])


# -- tuples ----------------------------------------------------------------------


@given(st.integers(2, 5), st.lists(st.integers(0, 4), min_size=1, max_size=6))
def test_encode_decode(size, raw):
    t = tuple(v % size for v in raw)
    assert decode(encode(t, size), size, len(t)) == t


def test_subset_key_orders_by_size_then_mask():
    subs = [[0, 1], [2], [0], [1, 2], [0, 1, 2], [1]]
    assert sorted(subs, key=subset_key) == [[0], [1], [2], [0, 1], [1, 2], [0, 1, 2]]


@given(st.sets(st.tuples(st.integers(0, 2), st.integers(0, 2), st.integers(0, 2)), max_size=20))
def test_tupleset_dense_and_sparse_agree(items):
    dense = TupleSet(3, 3, items)
    assert dense.dense
    assert list(dense) == sorted(items)
    assert len(dense) == len(items)
    sparse = TupleSet(3, 17, [t + (0,) * 14 for t in items])
    assert not sparse.dense
    assert [t[:3] for t in sparse] == sorted(items)
    assert all(t in dense for t in items)


def test_tupleset_rejects_wrong_length():
    ts = TupleSet(2, 2)
    with pytest.raises(ValueError):
        ts.add((0, 1, 1))
    assert (0, 1, 1) not in TupleSet(2, 3) and 99 not in ts


# -- terms -------------------------------------------------------------------------


def test_render_parse_roundtrip(z2):
    t = Apply("m", (Var(0), Apply("m", (Var(1), Var(2), Var(0))), Var(2)))
    assert render(t) == "m(x1,m(x2,x3,x1),x3)"
    assert parse_term(render(t)) == t
    assert render(t, ["x", "y", "z"]) == "m(x,m(y,z,x),z)"
    assert parse_term("m(x,m(y,z,x),z)", ["x", "y", "z"]) == t
    assert term_size(t) == 7
    for bad in ["m(x1,", "m(x1,x2))", "foo", "m(x1 x2)"]:
        with pytest.raises(ValueError):
            parse_term(bad)


def test_evaluate_matches_python(z2):
    t = parse_term("m(x1,m(x2,x3,x1),x3)")
    pts = list(itertools.product(range(2), repeat=3))
    got = evaluate(t, z2, [np.array(c) for c in zip(*pts)])
    assert got.tolist() == [x ^ (y ^ z ^ x) ^ z for x, y, z in pts]
    assert evaluate_at(t, z2, (1, 0, 1)) == 1 ^ (0 ^ 1 ^ 1) ^ 1


def test_substitute_and_expand(semilattice):
    t = parse_term("meet(x1,x2)")
    assert substitute(t, [Var(1), Var(1)]) == parse_term("meet(x2,x2)")
    defined = Operation("d", 2, semilattice.op("meet").table, parse_term("meet(x2,x1)"))
    alg = FiniteAlgebra(2, [semilattice.op("meet"), defined])
    assert expand(parse_term("d(x1,d(x2,x3))"), alg) == parse_term("meet(meet(x3,x2),x1)")


# -- closures ------------------------------------------------------------------------


def test_sg_power_semilattice(semilattice):
    c = sg_power(semilattice, 2, [(0, 1), (1, 0)])
    assert sorted(c) == [(0, 0), (0, 1), (1, 0)]
    assert c.complete


def test_sg_power_empty_generators(semilattice):
    assert len(sg_power(semilattice, 2, [])) == 0


def test_sg_power_constants_without_generators(meet_const1):
    assert sorted(sg_power(meet_const1, 2, [])) == [(1, 1)]


def test_sg_power_singleton_z2(z2):
    assert sorted(sg_power(z2, 1, [(0,)])) == [(0,)]


def test_sg_power_accepts_tupleset(semilattice):
    gens = TupleSet(2, 2, [(0, 1), (1, 0)])
    assert sg_power(semilattice, 2, gens).to_tupleset() == TupleSet(2, 2, [(0, 0), (0, 1), (1, 0)])


def test_term_for_examples(semilattice, z2):
    c = sg_power(semilattice, 2, [(0, 1), (1, 0)])
    assert term_for(c, (0, 0)) == parse_term("meet(x1,x2)")
    assert term_for(c, (1, 0)) == Var(1)
    c = sg_power(z2, 2, [(1, 1), (1, 0), (0, 1)])
    assert term_for(c, (0, 0)) == parse_term("m(x1,x2,x3)")
    with pytest.raises(KeyError):
        term_for(sg_power(semilattice, 1, [(1,)]), (0,))


def test_stop_hook_leaves_partial_closure(chain3):
    gens = [(2, 1, 0), (0, 2, 1), (1, 0, 2)]
    c = sg_power(chain3, 3, gens, stop=stop_at((0, 0, 0)))
    assert (0, 0, 0) in c and not c.complete


def test_element_cap(chain3):
    rng = random.Random(1)
    gens = [tuple(rng.randrange(3) for _ in range(8)) for _ in range(6)]
    with pytest.raises(ResourceLimitError) as info:
        sg_power(chain3, 8, gens, budget=Budget(max_elements=10))
    assert info.value.cap == 10


def test_work_cap(z2):
    gens = [tuple((i >> j) & 1 for j in range(6)) for i in range(5)]
    with pytest.raises(ResourceLimitError):
        sg_power(z2, 6, gens, budget=Budget(max_work=50))


def test_env_overrides_cap(monkeypatch):
    monkeypatch.setenv("CUBEWRIGHT_MAX_CLOSURE", "17")
    assert default_max_elements() == 17
    assert Budget().max_elements == 17


def _random_algebra(rng, size, arities):
    ops = [Operation(f"f{i}", r, tuple(rng.randrange(size) for _ in range(size**r))) for i, r in enumerate(arities)]
    return FiniteAlgebra(size, ops)


@pytest.mark.parametrize("seed", range(25))
def test_sg_power_matches_naive_fixpoint(seed):
    rng = random.Random(seed)
    size = rng.choice([2, 3])
    alg = _random_algebra(rng, size, rng.choice([(2,), (1, 2), (3,), (0, 2)]))
    k = rng.choice([1, 2, 3])
    gens = [tuple(rng.randrange(size) for _ in range(k)) for _ in range(rng.randint(1, 3))]
    got = sg_power(alg, k, gens)
    assert set(got) == oracles.power_closure(alg, gens)
    # variable i of a reconstructed term stands for generator i
    args = [np.array(g) for g in got.generators]
    for t in got:
        assert tuple(evaluate(got.term_for(t), alg, args).tolist()) == t


@pytest.mark.parametrize("threads", [2, 4])
def test_threads_do_not_change_results(threads):
    rng = random.Random(7)
    alg = _random_algebra(rng, 3, (2, 3))
    gens = [tuple(rng.randrange(3) for _ in range(5)) for _ in range(3)]
    one = sg_power(alg, 5, gens)
    many = sg_power(alg, 5, gens, budget=Budget(threads=threads))
    assert one.rows.tolist() == many.rows.tolist()
    assert one.parents == many.parents


def test_idempotent_image_closure_equals_sg_power_when_idempotent(z2):
    rng = random.Random(3)
    for k in (1, 2, 3):
        gens = [tuple(rng.randrange(2) for _ in range(k)) for _ in range(3)]
        assert set(idempotent_image_closure(z2, k, gens)) == set(sg_power(z2, k, gens))


def test_idempotent_image_closure_filters_constants(meet_const1):
    assert sorted(idempotent_image_closure(meet_const1, 1, [(0,)])) == [(0,)]
    assert sorted(sg_power(meet_const1, 1, [(0,)])) == [(0,), (1,)]


def test_idempotent_image_closure_of_full_power(meet_const1):
    full = list(itertools.product(range(2), repeat=2))
    assert sorted(idempotent_image_closure(meet_const1, 2, full)) == full


def test_idempotent_image_closure_terms_are_idempotent(meet_const1):
    c = idempotent_image_closure(meet_const1, 2, [(0, 1), (1, 1)])
    for t in c:
        term = c.term_for(t)
        diag = evaluate(term, meet_const1, [np.arange(2)] * 2)
        assert diag.tolist() == [0, 1]


def test_idempotent_subuniverses(semilattice, z2, meet_const1, trivial):
    assert is_idempotent_subuniverse(semilattice, [0, 1])
    assert is_idempotent_subuniverse(semilattice, [0])
    assert is_idempotent_subuniverse(meet_const1, [0])
    assert not oracles.is_subuniverse(meet_const1, [0])
    assert enumerate_idempotent_subuniverses(semilattice) == [[0], [1], [0, 1]]
    assert enumerate_idempotent_subuniverses(z2) == [[0], [1], [0, 1]]
    assert enumerate_idempotent_subuniverses(trivial) == [[0]]


@pytest.mark.parametrize("seed", range(20))
def test_subuniverses_match_oracle(seed):
    alg = next(corpus.random_idempotent_algebras(3, (2,), 1, seed))
    expected = sorted(oracles.subuniverses(alg), key=subset_key)
    assert [tuple(s) for s in enumerate_idempotent_subuniverses(alg)] == expected
