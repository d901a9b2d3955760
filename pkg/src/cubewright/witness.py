"""Finite-window replay of the non-dualizability construction.

Given a blocker (D, B) of a minimal idempotent subuniverse without a cube
term, with a in B minus D and b in D, the elements of A are enumerated as
a_0, a_-1, ..., a_-n (element e is a_-e) and the window is
J = [-n, 0] + [1, N], coordinates in that order. The generator alpha_i is
a_j on [-n, 0], b at i and a elsewhere; C is the subalgebra of A^J they
generate, under all basic operations. The element g is a_j on [-n, 0] and a
on [1, N].

Why g is never in C at any window size: a term t with t(alpha_1, ...,
alpha_N) = g fixes every a_j on the [-n, 0] block, and every element of A
appears there, so t is idempotent. On [1, N] it sends the unit-pattern
columns (b at one row, a elsewhere) to the constant a column, which would
witness a < b in the idempotent reduct, and the blocker rules that out. The
same term restricted to a smaller window would still be such a witness, so
g not in C at window N carries over to every larger window.

The congruence replays use theta = Cg((alpha_1, alpha_3), (alpha_2, alpha_4)),
the least congruence whose restriction to the generators has {1,3} and
{2,4} in non-singleton blocks; anything proved about it holds for every
larger congruence. The derivations only touch indices 1..4 and the
enumeration block, so a window with N >= 4 contains all of them.
"""

from __future__ import annotations

import itertools
import random
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .congruence import (
    CarrierAlgebra,
    Partition,
    all_congruences,
    block_profile,
    generated_congruence,
    kernel_of_projection,
    restrict,
)
from .cubeterm import (
    BlockerWitness,
    CubeAnalysis,
    CubeStatus,
    minimal_no_cube_subuniverse,
    pick_blocker_witness,
)
from .kernel import Budget, evaluate, idempotent_image_closure, render, sg_power, stop_at
from .kernel.errors import CubewrightError
from .maltsev import FOUND, Omit15Chain, find_wnu

PHI = 1
PASS, FAIL, SKIPPED = "pass", "fail", "skipped"


class NoBlockerError(CubewrightError):
    """The algebra has no (candidate) cube term blocker to build a witness from."""


@dataclass
class WitnessInstance:
    alg: object
    analysis: CubeAnalysis
    data: BlockerWitness
    window: int
    coords: list
    alphas: list
    g: tuple
    carrier: CarrierAlgebra
    closure: object = field(repr=False, default=None)

    @property
    def n(self):
        return self.alg.size - 1

    @property
    def a(self):
        return self.data.a

    @property
    def b(self):
        return self.data.b

    def pos(self, j) -> int:
        return j + self.n

    def alpha(self, indices, ys=None) -> tuple:
        """alpha_{i_1...i_k}^{y_1...y_k}; the y's default to b."""
        ys = ys if ys is not None else [self.b] * len(indices)
        out = [self.a] * len(self.coords)
        for j in range(-self.n, 1):
            out[self.pos(j)] = -j
        for i, y in zip(indices, ys):
            if not 1 <= i <= self.window:
                raise ValueError(f"index {i} outside the window")
            out[self.pos(i)] = y
        return tuple(out)

    def c0(self) -> list:
        """Carrier indices of alpha_1, ..., alpha_N."""
        return [self.carrier.index_of(t) for t in self.alphas]

    def to_json(self):
        return {
            "window": self.window,
            "coordinates": self.coords,
            "enumeration": [{"label": f"a_{-e}" if e else "a_0", "element": e} for e in range(self.alg.size)],
            "blocker_data": self.data.to_json(),
            "generators": [list(t) for t in self.alphas],
            "g": list(self.g),
            "carrier_size": self.carrier.n,
        }


def build_instance(alg, analysis: CubeAnalysis, window=4, budget=None) -> WitnessInstance:
    if analysis.status not in (CubeStatus.BLOCKER_CERTIFIED, CubeStatus.BLOCKER_CANDIDATE):
        raise NoBlockerError(f"no cube term blocker (status {analysis.status.value})")
    if window < 4:
        raise ValueError("window must be at least 4")
    b_min = minimal_no_cube_subuniverse(alg, analysis)
    data = pick_blocker_witness(alg, b_min, analysis, budget=budget)
    n = alg.size - 1
    coords = list(range(-n, window + 1))
    inst = WitnessInstance(alg, analysis, data, window, coords, [], (), None)
    inst.alphas = [inst.alpha([i]) for i in range(1, window + 1)]
    inst.g = tuple(-j if j <= 0 else data.a for j in coords)
    closure = sg_power(alg, len(coords), inst.alphas, budget=budget)
    inst.closure = closure
    inst.carrier = CarrierAlgebra.from_closure(closure)
    return inst


def check_g_not_in_C(inst: WitnessInstance) -> bool:
    """Whether g lies in C. The construction predicts False; callers assert."""
    return inst.carrier.index_of(inst.g) >= 0


def g_from_kernels(inst: WitnessInstance) -> tuple:
    """g(z) read off the unique large block of ker(pi_z) restricted to the generators."""
    c0 = inst.c0()
    out = []
    for z in range(len(inst.coords)):
        count, blocks = block_profile(restrict(kernel_of_projection(inst.carrier, z), c0), PHI)
        if count != 1:
            raise ValueError(f"coordinate {inst.coords[z]}: {count} blocks larger than {PHI}")
        out.append(int(inst.carrier.rows[blocks[0][0], z]))
    return tuple(out)


# -- reports -----------------------------------------------------------------


@dataclass
class WitnessReport:
    checks: list = field(default_factory=list)
    transcript: list = field(default_factory=list)
    sizes: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)

    def add(self, name, status, **details):
        self.checks.append({"name": name, "status": status, **details})

    def extend(self, other: "WitnessReport"):
        self.checks += other.checks
        self.transcript += other.transcript
        self.sizes.update(other.sizes)
        self.timings.update(other.timings)

    def status_of(self, name):
        for c in self.checks:
            if c["name"] == name:
                return c["status"]
        return None

    @property
    def ok(self) -> bool:
        return all(c["status"] != FAIL for c in self.checks)

    def to_json(self):
        return {"checks": self.checks, "transcript": self.transcript, "sizes": self.sizes,
                "volatile": {"timings": self.timings}}


class _Replay:
    """Shared plumbing: named window elements, term application, theta."""

    def __init__(self, inst, indices=(1, 3, 2, 4)):
        self.inst = inst
        s1, s2, t1, t2 = indices
        # the derivations are written for S = {1, 3}, T = {2, 4}
        self.ix = {1: s1, 2: t1, 3: s2, 4: t2}
        self.report = WitnessReport()
        c = inst.carrier
        self.theta = generated_congruence(c, [(c.index_of(self.al(1)), c.index_of(self.al(3))),
                                              (c.index_of(self.al(2)), c.index_of(self.al(4)))])

    def al(self, *idx, ys=None):
        return self.inst.alpha([self.ix[i] for i in idx], ys)

    def name(self, *idx, ys=None):
        sub = "".join(str(self.ix[i]) for i in idx)
        sup = "^" + "".join(f"<{y}>" for y in ys) if ys else ""
        return f"alpha_{sub}{sup}"

    def apply(self, term, args):
        vecs = [np.asarray(v, dtype=np.int64) for v in args]
        return tuple(int(v) for v in evaluate(term, self.inst.alg, vecs))

    def equal(self, label, lhs, rhs):
        ok = lhs == rhs
        self.report.transcript.append({"step": label, "lhs": list(lhs), "rhs": list(rhs), "equal": ok})
        return ok

    def related(self, label, *elements):
        idx = [self.inst.carrier.index_of(e) for e in elements]
        ok = all(i >= 0 for i in idx) and all(self.theta.same(idx[0], i) for i in idx[1:])
        self.report.transcript.append({"step": label, "theta_related": ok,
                                       "in_carrier": [i >= 0 for i in idx]})
        return ok


def _generating_term(alg, first, a, target, budget=None):
    """Idempotent binary term t with t(first, a) = target, via closure of {first, a}."""
    closure = idempotent_image_closure(alg, 1, [(first,), (a,)], budget=budget, stop=stop_at((target,)))
    if (target,) not in closure:
        return None
    return closure.term_for((target,))


def replay_claim1(inst: WitnessInstance, wnu_arities=(2, 3, 4), indices=(1, 3, 2, 4), budget=None) -> WitnessReport:
    """All alpha_mn, alpha_mnk with m in S, n in T lie in one theta-block."""
    started = time.perf_counter()
    r = _Replay(inst, indices)
    rep = r.report
    carrier = inst.carrier
    wanted = {}
    for m, n in itertools.product((1, 3), (2, 4)):
        wanted[r.name(m, n)] = r.al(m, n)
        for k in (1, 2, 3, 4):
            idx = tuple(dict.fromkeys((m, n, k)))
            wanted[r.name(*idx)] = r.al(*idx)
    positions = {name: carrier.index_of(t) for name, t in wanted.items()}
    missing = sorted(name for name, i in positions.items() if i < 0)
    if missing:
        rep.add("claim1-block", FAIL, reason="elements not in C", missing=missing)
    else:
        idx = list(positions.values())
        same = all(r.theta.same(idx[0], i) for i in idx)
        rep.add("claim1-block", PASS if same else FAIL, elements=sorted(positions),
                distinct=len(set(idx)), theta_index=r.theta.index)

    w = None
    for n in wnu_arities:
        found = find_wnu(inst.alg, n, budget)
        if found.status == FOUND:
            w, arity = found.term, n
            break
    if w is None:
        rep.add("claim1-transcript", SKIPPED, reason=f"no weak near-unanimity term of arity in {list(wnu_arities)}")
        rep.timings["claim1"] = time.perf_counter() - started
        return rep

    a, b = inst.a, inst.b
    D = set(inst.data.D)
    p1, p2 = inst.pos(r.ix[1]), inst.pos(r.ix[2])
    ok = True
    rest = arity - 1
    lhs = r.apply(w, [r.al(1)] + [r.al(2)] * rest)
    c, d = lhs[p1], lhs[p2]
    ok &= c in D and d in D
    ok &= r.equal(f"w({r.name(1)},{r.name(2)},...) = {r.name(1, 2, ys=['c', 'd'])}", lhs, r.al(1, 2, ys=[c, d]))
    cd = {}
    for m, n in itertools.product((1, 3), (2, 4)):
        cd[(m, n)] = r.apply(w, [r.al(m)] + [r.al(n)] * rest)
        ok &= r.equal(f"w({r.name(m)},{r.name(n)},...) = {r.name(m, n, ys=['c', 'd'])}", cd[(m, n)],
                      r.al(m, n, ys=[c, d]))
    ok &= r.related("alpha_12^cd theta alpha_32^cd theta alpha_14^cd theta alpha_34^cd", *cd.values())

    t = _generating_term(inst.alg, c, a, b, budget)
    if t is None:
        rep.add("claim1-transcript", FAIL, reason=f"{{c, a}} = {{{c}, {a}}} does not generate b idempotently")
        rep.timings["claim1"] = time.perf_counter() - started
        return rep
    e = r.apply(t, [[d], [b]])[0]
    ok &= e in D
    be = {}
    for (m, n), v in cd.items():
        be[(m, n)] = r.apply(t, [v, r.al(n)])
        ok &= r.equal(f"t({r.name(m, n, ys=['c', 'd'])},{r.name(n)}) = {r.name(m, n, ys=['b', 'e'])}", be[(m, n)],
                      r.al(m, n, ys=[b, e]))
    ok &= r.related("alpha_12^be theta alpha_32^be theta alpha_14^be theta alpha_34^be", *be.values())

    s = _generating_term(inst.alg, e, a, b, budget)
    if s is None:
        rep.add("claim1-transcript", FAIL, reason=f"{{e, a}} = {{{e}, {a}}} does not generate b idempotently")
        rep.timings["claim1"] = time.perf_counter() - started
        return rep
    plain = {}
    for (m, n), v in be.items():
        plain[(m, n)] = r.apply(s, [v, r.al(m)])
        ok &= r.equal(f"s({r.name(m, n, ys=['b', 'e'])},{r.name(m)}) = {r.name(m, n)}", plain[(m, n)], r.al(m, n))
    ok &= r.related("alpha_12 theta alpha_32 theta alpha_14 theta alpha_34", *plain.values())

    ccd = r.apply(w, [r.al(1, 2)] + [r.al(3)] * rest)
    ok &= r.equal(f"w({r.name(1, 2)},{r.name(3)},...) = {r.name(1, 2, 3, ys=['c', 'c', 'd'])}", ccd,
                  r.al(1, 2, 3, ys=[c, c, d]))
    side = r.apply(w, [r.al(1, 4)] + [r.al(3)] * rest)
    ok &= r.equal(f"w({r.name(1, 4)},{r.name(3)},...) = {r.name(1, 4, 3, ys=['c', 'c', 'd'])}", side,
                  r.al(1, 4, 3, ys=[c, c, d]))
    bc = r.apply(w, [r.al(1, 2)] + [r.al(1)] * rest)
    ok &= r.equal(f"w({r.name(1, 2)},{r.name(1)},...) = {r.name(1, 2, ys=['b', 'c'])}", bc, r.al(1, 2, ys=[b, c]))
    ok &= r.related("alpha_123^ccd theta alpha_143^ccd theta alpha_12^bc", ccd, side, bc)
    bbe = r.apply(t, [ccd, r.al(3)])
    ok &= r.equal(f"t({r.name(1, 2, 3, ys=['c', 'c', 'd'])},{r.name(3)}) = {r.name(1, 2, 3, ys=['b', 'b', 'e'])}",
                  bbe, r.al(1, 2, 3, ys=[b, b, e]))
    final = r.apply(s, [bbe, r.al(1, 2)])
    ok &= r.equal(f"s({r.name(1, 2, 3, ys=['b', 'b', 'e'])},{r.name(1, 2)}) = {r.name(1, 2, 3)}", final,
                  r.al(1, 2, 3))
    ok &= r.related("alpha_123 theta alpha_12", final, r.al(1, 2))

    rep.add("claim1-transcript", PASS if ok else FAIL, w=render(w), w_arity=arity, t=render(t), s=render(s),
            c=c, d=d, e=e)
    rep.timings["claim1"] = time.perf_counter() - started
    return rep


def replay_claim2(inst: WitnessInstance, chain: Optional[Omit15Chain], indices=(1, 3, 2, 4)) -> WitnessReport:
    """alpha_1 theta alpha_2, replaying the chain identities on the window."""
    started = time.perf_counter()
    if chain is None:
        rep = WitnessReport()
        rep.add("claim2", SKIPPED, reason="no omit-{1,5} chain")
        return rep
    r = _Replay(inst, indices)
    rep = r.report
    c = inst.carrier
    related = r.theta.same(c.index_of(r.al(1)), c.index_of(r.al(2)))
    rep.add("claim2", PASS if related else FAIL, theta_index=r.theta.index)

    ok = True
    plain = [r.al(1), r.al(1, 2), r.al(1, 2), r.al(1, 2)]
    mixed = [r.al(1), r.al(1, 2), r.al(3, 4), r.al(2, 3, 4)]
    f = chain.terms
    vals = [r.apply(t, plain) for t in f]
    for i in range(len(f) - 1):
        if i % 2 == 0:
            ok &= r.equal(f"f_{i}(a1,a12,a12,a12) = f_{i + 1}(a1,a12,a12,a12)", vals[i], vals[i + 1])
        else:
            lhs, rhs = r.apply(f[i], mixed), r.apply(f[i + 1], mixed)
            ok &= r.related(f"f_{i}(a1,a12,a12,a12) theta f_{i}(a1,a12,a34,a234)", vals[i], lhs)
            ok &= r.equal(f"f_{i}(a1,a12,a34,a234) = f_{i + 1}(a1,a12,a34,a234)", lhs, rhs)
            ok &= r.related(f"f_{i + 1}(a1,a12,a34,a234) theta f_{i + 1}(a1,a12,a12,a12)", rhs, vals[i + 1])
    ok &= r.equal("f_0(a1,a12,a12,a12) = alpha_1", vals[0], r.al(1))
    ok &= r.equal(f"f_{len(f) - 1}(a1,a12,a12,a12) = alpha_12", vals[-1], r.al(1, 2))
    rep.add("claim2-transcript", PASS if ok else FAIL, m=chain.m)
    rep.timings["claim2"] = time.perf_counter() - started
    return rep


def _two_large_blocks(carrier, c0):
    """A congruence whose restriction to ``c0`` has two blocks of size > 1, if any exists.

    Such a congruence contains some Cg((x1, x2), (y1, y2)) with {x1, x2} and
    {y1, y2} disjoint pairs from c0 in different blocks, and that generated
    congruence is then itself an example. So it suffices to try each one.
    """
    for (i, j), (k, l) in itertools.combinations(itertools.combinations(range(len(c0)), 2), 2):
        if {i, j} & {k, l}:
            continue
        psi = generated_congruence(carrier, [(c0[i], c0[j]), (c0[k], c0[l])])
        if not psi.same(c0[i], c0[k]):
            return (i, j, k, l), psi
    return None


def check_unique_large_block(inst: WitnessInstance, sample_budget=32, cap=60, seed=0,
                             literal_cap=12) -> WitnessReport:
    """At most one block of size > 1 on the generators, for a family of congruences.

    Covers every projection kernel; every congruence of C when C has at most
    ``cap`` elements (via the pair reduction above, cross-checked against a
    literal enumeration when C has at most ``literal_cap`` elements); and
    ``sample_budget`` random generated congruences otherwise. The underlying
    hypothesis quantifies over all finite-index congruences of an infinite
    power, so this is a finite approximation of it.
    """
    started = time.perf_counter()
    rep = WitnessReport()
    carrier = inst.carrier
    c0 = inst.c0()
    bad = []
    for z, label in enumerate(inst.coords):
        count, blocks = block_profile(restrict(kernel_of_projection(carrier, z), c0), PHI)
        if count > 1:
            bad.append({"coordinate": label, "blocks": _alpha_blocks(blocks, c0)})
    rep.add("large-block/kernels", FAIL if bad else PASS, kernels=len(inst.coords), failures=bad)

    if carrier.n <= cap:
        found = _two_large_blocks(carrier, c0)
        details = {"method": "disjoint pair reduction", "carrier_size": carrier.n}
        if carrier.n <= literal_cap:
            literal = [t for t in all_congruences(carrier, cap=cap)
                       if block_profile(restrict(t, c0), PHI)[0] > 1]
            details["literal_enumeration_agrees"] = bool(literal) == (found is not None)
        if found is None:
            rep.add("large-block/all-congruences", PASS, **details)
        else:
            _, psi = found
            count, blocks = block_profile(restrict(psi, c0), PHI)
            rep.add("large-block/all-congruences", FAIL, counterexample=_alpha_blocks(blocks, c0),
                    theta_index=psi.index, **details)
    else:
        rng = random.Random(seed)
        failures = []
        for _ in range(sample_budget):
            pairs = [tuple(rng.sample(range(carrier.n), 2)) for _ in range(rng.randint(1, 2))]
            psi = generated_congruence(carrier, pairs)
            count, blocks = block_profile(restrict(psi, c0), PHI)
            if count > 1:
                failures.append({"pairs": [list(p) for p in pairs], "blocks": _alpha_blocks(blocks, c0)})
        rep.add("large-block/sampled", FAIL if failures else PASS, samples=sample_budget, seed=seed,
                carrier_size=carrier.n, failures=failures[:5], failure_count=len(failures))
    rep.timings["large-block"] = time.perf_counter() - started
    return rep


def _alpha_blocks(blocks, c0):
    where = {x: i + 1 for i, x in enumerate(c0)}
    return [[f"alpha_{where[x]}" for x in b] for b in blocks]


def run_witness(alg, analysis, window=4, claims=False, chain=None, wnu_arities=(2, 3, 4), budget=None,
                samples=32, seed=0) -> dict:
    """Build the instance and run every applicable check."""
    started = time.perf_counter()
    inst = build_instance(alg, analysis, window, budget)
    rep = WitnessReport()
    rep.timings["build"] = time.perf_counter() - started
    rep.sizes = {"carrier": inst.carrier.n, "window": window, "coordinates": len(inst.coords)}
    rep.add("g-not-in-C", FAIL if check_g_not_in_C(inst) else PASS)
    try:
        recipe = g_from_kernels(inst)
        rep.add("g-recipe", PASS if recipe == inst.g else FAIL, g=list(inst.g), recipe=list(recipe))
    except ValueError as exc:
        rep.add("g-recipe", FAIL, reason=str(exc))
    rep.extend(check_unique_large_block(inst, samples, seed=seed))
    if claims:
        rep.extend(replay_claim1(inst, wnu_arities, budget=budget))
        rep.extend(replay_claim2(inst, chain))
    return {"instance": inst.to_json(), "report": rep.to_json(), "ok": rep.ok}
