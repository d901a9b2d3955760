"""Cube terms, cube term blockers and the relation a < b.

For a finite idempotent algebra, a cube term exists iff there is no cube
term blocker: a pair D < B of subuniverses such that every term operation
has a coordinate i with f(B, ..., D at i, ..., B) inside D.

Checking basic operations suffices. The operations having some absorbing
coordinate for a fixed (D, B) contain the projections and are closed under
composition: if f absorbs at i, the composite f(g_1, ..., g_n) absorbs at
any absorbing coordinate of g_i. So the pairs found by
:func:`find_blockers_basic` are blockers for the whole clone.

Non-idempotent presentations are handled through their idempotent reduct,
approximated at level m by the algebra of all idempotent m-ary term
operations. No blocker at some level proves a cube term (a cube term of the
approximation is an idempotent term of the original). A blocker surviving
every level is only a candidate; it is then tested against cross relations
{x in B^k : some x_i in D}, which every genuine blocker of the reduct
preserves. Statuses HasCubeTerm and BlockerCertified are proofs;
BlockerCandidate and BudgetExhausted are not.

a < b at length L: some idempotent term sends the columns
{a,b}^L minus a^L to the constant column a^L. Duplicating rows turns a
witness at length L into one at any L' >= L, so success is monotone in L.
Failure at every tried L is never reported as a refutation.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .kernel import (
    Budget,
    FiniteAlgebra,
    InconsistencyError,
    Operation,
    ResourceLimitError,
    enumerate_idempotent_subuniverses,
    evaluate,
    idempotent_image_closure,
    render,
    sg_power,
    stop_at,
    subset_key,
)
from .kernel.errors import CubewrightError
from .kernel.terms import Var, expand


class CubeStatus(str, Enum):
    HAS_CUBE_TERM = "HasCubeTerm"
    BLOCKER_CERTIFIED = "BlockerCertified"
    BLOCKER_CANDIDATE = "BlockerCandidate"
    BUDGET_EXHAUSTED = "BudgetExhausted"


class CandidateRefuted(CubewrightError):
    """A blocker candidate (non-idempotent presentation) turned out not to be one."""


@dataclass(frozen=True)
class BlockerPair:
    D: tuple
    B: tuple
    absorbing: dict = field(default_factory=dict, compare=False)

    def to_json(self):
        return {"D": list(self.D), "B": list(self.B), "absorbing": dict(self.absorbing)}


@dataclass(frozen=True)
class CubePattern:
    """Columns of 0/1 of length ``dimension``; a 1 in row r puts y there."""

    dimension: int
    columns: tuple

    def __post_init__(self):
        cols = tuple(tuple(int(v) for v in c) for c in self.columns)
        object.__setattr__(self, "columns", cols)
        if self.dimension < 1:
            raise ValueError("dimension must be positive")
        for c in cols:
            if len(c) != self.dimension or any(v not in (0, 1) for v in c):
                raise ValueError(f"bad column {c}")
            if not any(c):
                raise ValueError("zero column")
        for r in range(self.dimension):
            if not any(c[r] for c in cols):
                raise ValueError(f"row {r + 1} has no y")

    @property
    def arity(self):
        return len(self.columns)

    @classmethod
    def near_unanimity(cls, d):
        return cls(d, tuple(tuple(int(r == j) for r in range(d)) for j in range(d)))

    @classmethod
    def full(cls, d):
        return cls(d, tuple(tuple((c >> r) & 1 for r in range(d)) for c in range(1, 2**d)))

    @property
    def kind(self):
        if self == CubePattern.near_unanimity(self.dimension):
            return "near-unanimity"
        if self == CubePattern.full(self.dimension):
            return "full"
        return "custom"

    def to_json(self):
        return {"kind": self.kind, "dimension": self.dimension, "columns": [list(c) for c in self.columns]}


def canonical_patterns(d_max):
    """Near-unanimity patterns d = 3..d_max, then full cubes d = 2..d_max."""
    out = [CubePattern.near_unanimity(d) for d in range(3, d_max + 1)]
    out += [CubePattern.full(d) for d in range(2, d_max + 1)]
    return out


@dataclass
class CubeWitness:
    pattern: CubePattern
    term: object

    def to_json(self):
        return {"pattern": self.pattern.to_json(), "term": render(self.term)}


@dataclass
class CubeAnalysis:
    status: CubeStatus
    blocker: Optional[BlockerPair] = None
    witness: Optional[CubeWitness] = None
    level: int = 0
    cross_check_depth: int = 0
    certificate: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    blockers: list = field(default_factory=list)
    # the idempotent algebra the verdict was read from (basic ops or level-m ops)
    working: Optional[FiniteAlgebra] = field(default=None, repr=False)
    subuniverses: list = field(default_factory=list, repr=False)

    @property
    def is_proof(self):
        return self.status in (CubeStatus.HAS_CUBE_TERM, CubeStatus.BLOCKER_CERTIFIED)

    def to_json(self):
        return {
            "status": self.status.value,
            "proof": self.is_proof,
            "level": self.level,
            "cross_check_depth": self.cross_check_depth,
            "blocker": self.blocker.to_json() if self.blocker else None,
            "witness": self.witness.to_json() if self.witness else None,
            "certificate": self.certificate,
            "notes": list(self.notes),
        }


# -- the relation a < b ------------------------------------------------------


@dataclass
class PrecWitness:
    term: object
    columns: list
    length: int


def prec_columns(a, b, length):
    return [t for t in itertools.product((a, b), repeat=length) if any(v == b for v in t)]


def prec_at_length(alg: FiniteAlgebra, a: int, b: int, length: int, budget=None) -> Optional[PrecWitness]:
    """A term sending the columns {a,b}^L minus a^L to a^L, if one exists."""
    if a == b:
        raise ValueError("a and b must differ")
    if length < 1:
        raise ValueError("length must be positive")
    cols = prec_columns(a, b, length)
    target = (a,) * length
    closure = idempotent_image_closure(alg, length, cols, budget=budget, stop=stop_at(target))
    if target not in closure:
        return None
    return PrecWitness(closure.term_for(target), cols, length)


@dataclass
class PrecResult:
    holds: bool
    witness: Optional[PrecWitness]
    searched_up_to: int


def prec_bounded(alg, a, b, max_length, budget=None) -> PrecResult:
    """Try lengths 1..max_length. Not finding a witness refutes nothing."""
    for length in range(1, max_length + 1):
        w = prec_at_length(alg, a, b, length, budget)
        if w is not None:
            return PrecResult(True, w, length)
    return PrecResult(False, None, max_length)


# -- blockers ----------------------------------------------------------------


def absorbing_coordinates(f: Operation, size, D, B):
    """Coordinates i with f(B, ..., D at i, ..., B) inside D."""
    if f.arity == 0:
        return []
    in_d = np.zeros(size, dtype=bool)
    in_d[list(D)] = True
    cube = f.array.reshape((size,) * f.arity)[np.ix_(*[list(B)] * f.arity)]
    d_pos = [i for i, v in enumerate(B) if v in D]
    out = []
    for i in range(f.arity):
        if in_d[np.take(cube, d_pos, axis=i)].all():
            out.append(i)
    return out


def absorption_counterexamples(f: Operation, size, D, B):
    """For each coordinate, an input tuple with D at that coordinate escaping D."""
    in_d = np.zeros(size, dtype=bool)
    in_d[list(D)] = True
    cube = f.array.reshape((size,) * f.arity)[np.ix_(*[list(B)] * f.arity)]
    d_pos = [i for i, v in enumerate(B) if v in D]
    out = []
    for i in range(f.arity):
        sl = np.take(cube, d_pos, axis=i)
        bad = np.argwhere(~in_d[sl])
        if len(bad) == 0:
            return None
        pos = list(bad[0])
        pos[i] = d_pos[pos[i]]
        args = [int(B[p]) for p in pos]
        out.append({"coordinate": i, "args": args, "value": int(f(*args))})
    return out


def blocker_scan(alg: FiniteAlgebra, subuniverses):
    """Every blocker (D, B) among the given subuniverses, plus refutations of the rest.

    Pairs are ordered by (B, D) under the (size, bitmask) key.
    """
    subs = sorted((tuple(s) for s in subuniverses), key=subset_key)
    blockers, refutations = [], []
    for B in subs:
        if len(B) < 2:
            continue
        for D in subs:
            if len(D) >= len(B) or not set(D) < set(B):
                continue
            absorbing = {}
            for f in alg.operations:
                coords = absorbing_coordinates(f, alg.size, D, B)
                if not coords:
                    refutation = {"D": list(D), "B": list(B), "op": f.name,
                                  "counterexamples": absorption_counterexamples(f, alg.size, D, B)}
                    if f.definition is not None:
                        refutation["op_term"] = render(f.definition)
                    refutations.append(refutation)
                    break
                absorbing[f.name] = coords[0]
            else:
                blockers.append(BlockerPair(D, B, absorbing))
    return blockers, refutations


def find_blockers_basic(alg: FiniteAlgebra, subuniverses=None) -> list:
    """All cube term blockers of an idempotent algebra given by its basic operations."""
    if not alg.is_idempotent():
        raise ValueError("find_blockers_basic needs idempotent basic operations; use has_cube_term")
    if subuniverses is None:
        subuniverses = enumerate_idempotent_subuniverses(alg)
    return blocker_scan(alg, subuniverses)[0]


def verify_blocker(alg, blocker: BlockerPair) -> bool:
    """Re-check each recorded absorbing coordinate by a full table scan."""
    for name, i in blocker.absorbing.items():
        if i not in absorbing_coordinates(alg.op(name), alg.size, blocker.D, blocker.B):
            return False
    return True


# -- cube term witnesses -----------------------------------------------------


def _offdiagonal_pairs(size):
    return [(x, y) for x in range(size) for y in range(size) if x != y]


def find_cube_term_witness(alg: FiniteAlgebra, pattern: CubePattern, budget=None):
    """A term satisfying the cube identities of ``pattern``, if one exists.

    Coordinates are (row, (x, y)) for x != y; the diagonal pairs are left out
    because the closure only keeps idempotent terms, which send them to x
    regardless. The term's variable j is column j of the pattern.
    """
    pairs = _offdiagonal_pairs(alg.size)
    gens = []
    for col in pattern.columns:
        gens.append(tuple(y if col[r] else x for r in range(pattern.dimension) for x, y in pairs))
    target = tuple(x for _ in range(pattern.dimension) for x, _y in pairs)
    closure = idempotent_image_closure(alg, len(target), gens, budget=budget, stop=stop_at(target))
    if target not in closure:
        return None
    return closure.term_for(target)


def verify_cube_identities(alg, pattern: CubePattern, term) -> bool:
    """Each row's identity t(u_1, ..., u_n) = x, checked on all of A^2."""
    xs = np.repeat(np.arange(alg.size), alg.size)
    ys = np.tile(np.arange(alg.size), alg.size)
    for r in range(pattern.dimension):
        values = [ys if col[r] else xs for col in pattern.columns]
        if not np.array_equal(evaluate(term, alg, values), xs):
            return False
    return True


def _search_witness(alg, working, d_max, budget, notes):
    for pattern in canonical_patterns(d_max):
        try:
            term = find_cube_term_witness(working, pattern, budget)
        except ResourceLimitError as exc:
            notes.append(f"witness search for d={pattern.dimension} ({pattern.arity} columns) stopped: {exc}")
            continue
        if term is None:
            continue
        term = expand(term, working)
        if not verify_cube_identities(alg, pattern, term):
            raise InconsistencyError(f"cube witness {render(term)} fails its identities")
        return CubeWitness(pattern, term)
    return None


# -- level-m approximations of the idempotent reduct ---------------------------


def level_algebra(alg: FiniteAlgebra, m: int, budget=None) -> FiniteAlgebra:
    """All idempotent m-ary term operations of ``alg`` as an algebra.

    The m-ary clone is the subpower of A^(|A|^m) generated by the m
    projections; idempotent members are those fixing the diagonal points.
    Each operation carries its defining term.
    """
    points = list(itertools.product(range(alg.size), repeat=m))
    projections = [tuple(p[i] for p in points) for i in range(m)]
    clone = sg_power(alg, len(points), projections, budget=budget)
    diag = [points.index((a,) * m) for a in range(alg.size)]
    ops = []
    for idx in range(clone.n):
        row = clone.rows[idx]
        if all(row[d] == a for a, d in enumerate(diag)):
            ops.append(Operation(f"t{m}_{idx}", m, tuple(int(v) for v in row), clone.term_at(idx)))
    return FiniteAlgebra(alg.size, ops, f"{alg.name}@idempotent{m}")


def cross_relation(D, B, k):
    return [t for t in itertools.product(B, repeat=k) if any(v in D for v in t)]


def cross_check(alg, blocker, k, budget=None):
    """None if the k-ary cross of ``blocker`` is closed under idempotent terms,
    else an escaping tuple with its term."""
    rel = cross_relation(blocker.D, blocker.B, k)
    closure = idempotent_image_closure(alg, k, rel, budget=budget)
    allowed = set(rel)
    for t in closure:
        if t not in allowed:
            return {"k": k, "tuple": list(t), "term": render(closure.term_for(t))}
    return None


# -- the pipeline ------------------------------------------------------------


def has_cube_term(alg: FiniteAlgebra, m_max=3, k_max=4, d_max=3, budget=None, force_levels=False,
                  witness=True) -> CubeAnalysis:
    budget = budget or Budget()
    notes = []
    try:
        subs = enumerate_idempotent_subuniverses(alg)
    except ResourceLimitError as exc:
        return CubeAnalysis(CubeStatus.BUDGET_EXHAUSTED, notes=[str(exc)])
    if alg.is_idempotent() and not force_levels:
        blockers, refutations = blocker_scan(alg, subs)
        if blockers:
            return CubeAnalysis(CubeStatus.BLOCKER_CERTIFIED, blocker=blockers[0], blockers=blockers,
                                certificate={"kind": "blocker", "presentation": "idempotent"},
                                working=alg, subuniverses=subs)
        found = _search_witness(alg, alg, d_max, budget, notes) if witness else None
        cert = {"kind": "no-blocker", "presentation": "idempotent", "subuniverses": subs,
                "refutations": refutations}
        if found is None:
            notes.append("no blockers, so a cube term exists; no witness found within d_max")
        return CubeAnalysis(CubeStatus.HAS_CUBE_TERM, witness=found, certificate=cert, notes=notes,
                            working=alg, subuniverses=subs)

    blockers, refutations = [], []
    approx = None
    for m in range(1, m_max + 1):
        try:
            approx = level_algebra(alg, m, budget)
        except ResourceLimitError as exc:
            notes.append(f"level {m} materialization stopped: {exc}")
            return CubeAnalysis(CubeStatus.BUDGET_EXHAUSTED, level=m - 1, notes=notes,
                                blockers=blockers, subuniverses=subs)
        blockers, refutations = blocker_scan(approx, subs)
        if not blockers:
            found = _search_witness(alg, approx, d_max, budget, notes) if witness else None
            if found is None:
                notes.append("no blockers at this level, so a cube term exists; no witness found within d_max")
            cert = {"kind": "no-blocker", "presentation": f"level-{m}", "subuniverses": subs,
                    "level_operations": len(approx.operations), "refutations": refutations}
            return CubeAnalysis(CubeStatus.HAS_CUBE_TERM, witness=found, level=m, certificate=cert,
                                notes=notes, working=approx, subuniverses=subs)

    refuted = []
    for cand in blockers:
        failure = None
        depth = 0
        for k in range(1, k_max + 1):
            try:
                failure = cross_check(alg, cand, k, budget)
            except ResourceLimitError as exc:
                notes.append(f"cross check k={k} for D={list(cand.D)}, B={list(cand.B)} stopped: {exc}")
                break
            if failure is not None:
                break
            depth = k
        if failure is not None:
            refuted.append({"D": list(cand.D), "B": list(cand.B), "escape": failure})
            continue
        status = CubeStatus.BLOCKER_CANDIDATE if depth == k_max else CubeStatus.BUDGET_EXHAUSTED
        return CubeAnalysis(status, blocker=cand, blockers=blockers,
                            level=m_max, cross_check_depth=depth,
                            certificate={"kind": "candidate", "refuted": refuted},
                            notes=notes, working=approx, subuniverses=subs)

    # every level-m blocker failed a cross check, so the reduct has none
    found = _search_witness(alg, alg, d_max, budget, notes) if witness else None
    if found is None:
        notes.append("all candidate blockers refuted, so a cube term exists; no witness found within d_max")
    return CubeAnalysis(CubeStatus.HAS_CUBE_TERM, witness=found, level=m_max, cross_check_depth=k_max,
                        certificate={"kind": "candidates-refuted", "presentation": f"level-{m_max}",
                                     "subuniverses": subs, "refutations": refutations, "refuted": refuted},
                        notes=notes, working=approx, subuniverses=subs)


# -- the (D, B, a, b) data for the witness construction -------------------------


def _working_algebra(alg, analysis):
    if analysis.working is not None:
        return analysis.working
    if analysis.level == 0:
        return alg
    return level_algebra(alg, analysis.level)


def _induced_blockers(alg, working, subset, subuniverses):
    induced = working.induced(subset)
    relabel = {a: i for i, a in enumerate(subset)}
    inner = [[relabel[a] for a in s] for s in subuniverses if set(s) <= set(subset)]
    found = blocker_scan(induced, inner)[0]
    return [BlockerPair(tuple(subset[i] for i in b.D), tuple(subset[i] for i in b.B), b.absorbing)
            for b in found]


def minimal_no_cube_subuniverse(alg: FiniteAlgebra, analysis: CubeAnalysis) -> list:
    """Smallest idempotent subuniverse (by size, then bitmask) whose induced algebra has a blocker."""
    if analysis.status not in (CubeStatus.BLOCKER_CERTIFIED, CubeStatus.BLOCKER_CANDIDATE):
        raise ValueError(f"analysis status {analysis.status.value} has no blocker")
    working = _working_algebra(alg, analysis)
    subs = analysis.subuniverses or enumerate_idempotent_subuniverses(alg)
    for s in sorted(subs, key=subset_key):
        if len(s) >= 2 and _induced_blockers(alg, working, list(s), subs):
            return list(s)
    raise InconsistencyError("the whole universe should have had a blocker")


@dataclass
class BlockerWitness:
    D: tuple
    B: tuple
    a: int
    b: int
    probe: PrecResult

    def to_json(self):
        return {"D": list(self.D), "B": list(self.B), "a": self.a, "b": self.b,
                "prec_probe": {"holds": self.probe.holds, "searched_up_to": self.probe.searched_up_to}}


def pick_blocker_witness(alg, b_min, analysis: CubeAnalysis, probe_length=3, budget=None) -> BlockerWitness:
    """Least blocker (D, B_min), least a in B minus D and least b in D.

    a does not precede b: every term has a coordinate absorbing into D, and
    each column fed to it contains b, so some row lands in D while a does not.
    A bounded search for a witness of a < b is still run as a sanity probe.
    """
    working = _working_algebra(alg, analysis)
    subs = analysis.subuniverses or enumerate_idempotent_subuniverses(alg)
    b_min = sorted(b_min)
    found = [bp for bp in _induced_blockers(alg, working, b_min, subs) if list(bp.B) == b_min]
    if not found:
        raise InconsistencyError(f"{b_min} has no blocker of the form (D, B_min)")
    found.sort(key=lambda bp: subset_key(bp.D))
    pair = found[0]
    a = min(set(pair.B) - set(pair.D))
    b = min(pair.D)
    probe = prec_bounded(alg, a, b, probe_length, budget)
    if probe.holds:
        msg = f"found a witness for {a} < {b} although ({list(pair.D)}, {list(pair.B)}) blocks it"
        if analysis.status == CubeStatus.BLOCKER_CERTIFIED:
            raise InconsistencyError(msg)
        raise CandidateRefuted(msg)
    return BlockerWitness(pair.D, pair.B, a, b, probe)
