"""Analysis reports: the verdict logic and certificate re-verification.

A missing cube term combined with omitting types 1 and 5 makes an algebra
inherently non-dualizable, so no dualizable algebra in that class lacks a
cube term. The verdicts only ever state what the certificates prove:

  inherently-non-dualizable  certified blocker + omit-{1,5} chain
  has-cube-term              verified cube witness, or a verified no-blocker certificate
  outside-scope              the chain is proven absent (the implication says nothing)
  inconclusive               anything else

Nothing here ever claims dualizability. Reports serialize to canonical JSON
(sorted keys) with timings kept under "volatile", which comparisons drop.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import time

import numpy as np

from .cubeterm import (
    CubeAnalysis,
    CubePattern,
    CubeStatus,
    absorbing_coordinates,
    has_cube_term,
    verify_cube_identities,
)
from .kernel import Budget, dump_algebra, enumerate_idempotent_subuniverses, evaluate, parse_term
from .kernel.algebra import FiniteAlgebra, Operation
from .maltsev import ABSENT, CHAIN_VARS, FOUND, INCONCLUSIVE, Omit15Chain, find_omit15_chain, find_wnu, verify_chain, verify_wnu

NON_DUALIZABLE = "inherently-non-dualizable"
CUBE_TERM = "has-cube-term"
OUTSIDE = "outside-scope"
INCONCLUSIVE_VERDICT = "inconclusive"
VERDICTS = (NON_DUALIZABLE, CUBE_TERM, OUTSIDE, INCONCLUSIVE_VERDICT)
SKIPPED = "skipped"


class Settings:
    """Search bounds for one analysis; everything here is echoed into the report."""

    def __init__(self, m_max=3, k_max=4, d_max=3, wnu_arities=(2, 3, 4), max_closure=None, max_work=None,
                 threads=1, cube_witness=True, full=True):
        self.m_max, self.k_max, self.d_max = m_max, k_max, d_max
        self.wnu_arities = tuple(wnu_arities)
        self.budget = Budget(max_closure, max_work, threads)
        self.cube_witness = cube_witness
        self.full = full

    def to_json(self):
        # threads never change results, so they stay out of the comparable part
        return {"m_max": self.m_max, "k_max": self.k_max, "d_max": self.d_max,
                "wnu_arities": list(self.wnu_arities), "max_closure": self.budget.max_elements,
                "max_work": self.budget.max_work, "cube_witness": self.cube_witness, "full": self.full}


def algebra_digest(alg) -> str:
    return hashlib.sha256(dump_algebra(alg).encode()).hexdigest()


def algebra_meta(alg):
    return {"name": alg.name, "size": alg.size, "digest": algebra_digest(alg),
            "idempotent": alg.is_idempotent(),
            "operations": [{"name": f.name, "arity": f.arity} for f in alg.operations]}


def decide(cube: dict, chain: dict) -> tuple:
    """(verdict, basis) from the serialized cube and chain results."""
    status = cube["status"]
    if status == CubeStatus.HAS_CUBE_TERM.value:
        basis = "verified cube term witness" if cube.get("witness") else f"{cube['certificate']['kind']} certificate"
        return CUBE_TERM, basis
    if chain.get("status") == ABSENT:
        return OUTSIDE, "omit-{1,5} chain proven absent"
    if status == CubeStatus.BLOCKER_CERTIFIED.value and chain.get("status") == FOUND:
        return NON_DUALIZABLE, "certified blocker and omit-{1,5} chain"
    reasons = [f"cube status {status}", f"chain {chain.get('status')}"]
    return INCONCLUSIVE_VERDICT, ", ".join(reasons)


def analyze(alg, settings: Settings = None, keep=False) -> dict:
    """The full report for one algebra. With ``keep``, live objects ride along under ``_live``."""
    settings = settings or Settings()
    budget = settings.budget
    timings = {}
    started = time.perf_counter()
    cube = has_cube_term(alg, settings.m_max, settings.k_max, settings.d_max, budget,
                         witness=settings.cube_witness)
    timings["cube"] = time.perf_counter() - started

    report = {"algebra": algebra_meta(alg), "settings": settings.to_json(), "cube": cube.to_json()}
    decided = cube.status == CubeStatus.HAS_CUBE_TERM

    wnu = {}
    for n in settings.wnu_arities:
        if decided and not settings.full:
            wnu[str(n)] = {"status": SKIPPED}
            continue
        t = time.perf_counter()
        wnu[str(n)] = find_wnu(alg, n, budget).to_json()
        timings[f"wnu{n}"] = time.perf_counter() - t
    report["wnu"] = wnu

    chain = None
    if decided and not settings.full:
        report["omit15"] = {"status": SKIPPED}
    else:
        t = time.perf_counter()
        search = find_omit15_chain(alg, budget)
        timings["omit15"] = time.perf_counter() - t
        chain = search.chain
        report["omit15"] = search.to_json()

    report["verdict"], report["verdict_basis"] = decide(report["cube"], report["omit15"])
    timings["total"] = time.perf_counter() - started
    report["volatile"] = {"timings": timings}
    if keep:
        report["_live"] = {"cube": cube, "chain": chain}
    return report


def budget_hit(report) -> bool:
    """True when some part of the analysis stopped on a resource cap."""
    if report["cube"]["status"] == CubeStatus.BUDGET_EXHAUSTED.value:
        return True
    parts = list(report.get("wnu", {}).values()) + [report.get("omit15", {})]
    return any(p.get("status") == INCONCLUSIVE for p in parts)


def stable(report) -> dict:
    """The report without its volatile section or live objects."""
    return {k: v for k, v in report.items() if k not in ("volatile", "_live")}


def to_json(report, indent=None) -> str:
    clean = {k: v for k, v in report.items() if k != "_live"}
    if indent is None:
        return json.dumps(clean, sort_keys=True, separators=(",", ":"))
    return json.dumps(clean, sort_keys=True, indent=indent)


# -- re-verification -----------------------------------------------------------


def _term_op(alg, text, name, arity):
    term = parse_term(text)
    points = np.indices((alg.size,) * arity).reshape(arity, -1) if arity else np.zeros((0, 1), dtype=np.int64)
    table = evaluate(term, alg, list(points)) if arity else None
    return Operation(name, arity, tuple(int(v) for v in table), term)


def _check_refutation(alg, ref) -> bool:
    """The recorded operation really has no coordinate absorbing D into B."""
    D, B = tuple(ref["D"]), tuple(ref["B"])
    if "op_term" in ref:
        arity = len(ref["counterexamples"]) if ref["counterexamples"] else 0
        try:
            f = _term_op(alg, ref["op_term"], ref["op"], arity)
        except Exception:
            return False
    else:
        f = alg.op(ref["op"])
    if absorbing_coordinates(f, alg.size, D, B):
        return False
    for cx in ref["counterexamples"]:
        if f(*cx["args"]) != cx["value"] or cx["value"] in D:
            return False
    return True


def _check_no_blocker(alg, cert) -> list:
    problems = []
    subs = [list(s) for s in enumerate_idempotent_subuniverses(alg)]
    if [list(s) for s in cert["subuniverses"]] != subs:
        problems.append("subuniverse list does not match a fresh enumeration")
        return problems
    refuted = {(tuple(r["D"]), tuple(r["B"])) for r in cert["refutations"] if _check_refutation(alg, r)}
    for B in subs:
        for D in subs:
            if len(D) < len(B) and set(D) < set(B) and (tuple(D), tuple(B)) not in refuted:
                if (tuple(D), tuple(B)) not in {(tuple(r["D"]), tuple(r["B"])) for r in cert.get("refuted", [])}:
                    problems.append(f"pair D={D}, B={B} is not refuted")
    for r in cert.get("refuted", []):
        esc = r["escape"]
        rel = _cross(r["D"], r["B"], esc["k"])
        term = parse_term(esc["term"])
        cols = np.asarray(rel, dtype=np.int64).T
        got = tuple(int(v) for v in evaluate(term, alg, list(cols))) if term.arity else None
        diag = evaluate(term, alg, [np.arange(alg.size)] * len(rel))
        if got != tuple(esc["tuple"]) or got in set(rel) or not np.array_equal(diag, np.arange(alg.size)):
            problems.append(f"cross check escape for D={r['D']}, B={r['B']} does not re-verify")
    return problems


def _cross(D, B, k):
    return [t for t in itertools.product(B, repeat=k) if any(v in D for v in t)]


def verify_report(report, alg: FiniteAlgebra) -> list:
    """Re-check every certificate in ``report`` against ``alg``; returns a list of problems."""
    if report["algebra"]["digest"] != algebra_digest(alg):
        # the certificates are about some other algebra; checking them here means nothing
        return ["algebra digest mismatch"]
    try:
        return _verify(report, alg)
    except (ValueError, KeyError, TypeError, IndexError) as exc:
        return [f"malformed certificate: {exc}"]


def _verify(report, alg) -> list:
    problems = []
    cube = report["cube"]
    if cube.get("witness"):
        w = cube["witness"]
        pattern = CubePattern(w["pattern"]["dimension"], [tuple(c) for c in w["pattern"]["columns"]])
        if not verify_cube_identities(alg, pattern, parse_term(w["term"])):
            problems.append("cube witness fails its identities")
    cert = cube.get("certificate", {})
    if cube["status"] == CubeStatus.HAS_CUBE_TERM.value and not cube.get("witness"):
        problems += _check_no_blocker(alg, cert)
    if cube["status"] == CubeStatus.BLOCKER_CERTIFIED.value:
        b = cube["blocker"]
        subs = [list(s) for s in enumerate_idempotent_subuniverses(alg)]
        if b["D"] not in subs or b["B"] not in subs or not set(b["D"]) < set(b["B"]):
            problems.append("blocker pair is not a pair of subuniverses D < B")
        for name, i in b["absorbing"].items():
            if i not in absorbing_coordinates(alg.op(name), alg.size, tuple(b["D"]), tuple(b["B"])):
                problems.append(f"{name} does not absorb at coordinate {i}")
        if set(b["absorbing"]) != {f.name for f in alg.operations}:
            problems.append("blocker does not cover every basic operation")
    for n, res in report.get("wnu", {}).items():
        if res.get("status") == FOUND and not verify_wnu(alg, parse_term(res["term"]), int(n)):
            problems.append(f"WNU term of arity {n} fails its identities")
    chain = report.get("omit15", {})
    if chain.get("status") == FOUND:
        terms = [parse_term(t, CHAIN_VARS) for t in chain["terms"]]
        if not verify_chain(alg, Omit15Chain(chain["m"], terms)):
            problems.append("omit-{1,5} chain fails its identities")
    verdict, _ = decide(cube, chain)
    if verdict != report["verdict"]:
        problems.append(f"verdict {report['verdict']} does not follow from the certificates ({verdict})")
    return problems
