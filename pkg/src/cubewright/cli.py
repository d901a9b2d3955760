"""Command line front end.

Exit codes: 0 success, 1 usage, 2 format (or unreadable input), 3 resource
budget, 4 internal inconsistency.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import multiprocessing
import sys
import time
from pathlib import Path

from . import corpus
from .cubeterm import CubeStatus, has_cube_term
from .kernel import (
    AlgebraFormatError,
    Budget,
    CubewrightError,
    InconsistencyError,
    ResourceLimitError,
    dump_algebra,
    parse_algebra,
)
from .maltsev import find_omit15_chain
from .report import NON_DUALIZABLE, Settings, analyze, budget_hit, stable, to_json, verify_report
from .witness import NoBlockerError, build_instance, replay_claim2, run_witness

log = logging.getLogger("cubewright")

EXIT_OK, EXIT_USAGE, EXIT_FORMAT, EXIT_BUDGET, EXIT_INCONSISTENT = 0, 1, 2, 3, 4

# witness checks whose failure contradicts a proved statement
DEFECT_CHECKS = {"g-not-in-C", "g-recipe", "claim1-block", "claim1-transcript", "claim2", "claim2-transcript"}

# a cap on operation applications per closure keeps one hard algebra from stalling a run
DEFAULT_MAX_WORK = 50_000_000

CLASSIFY_DEFAULTS = {
    "m_max": 3, "k_max": 4, "d_max": 3, "wnu": "2+3+4", "max_closure": 200_000, "max_work": 5_000_000,
    "witness": 0, "full": 0, "replay": 1, "window": 4,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _int_list(text):
    try:
        values = [int(v) for v in text.replace("+", ",").split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of integers: {text!r}")
    if not values or min(values) < 2:
        raise argparse.ArgumentTypeError("arities must be integers >= 2")
    return values


def _window(text):
    n = int(text)
    if n < 4:
        raise argparse.ArgumentTypeError("window must be at least 4")
    return n


def load(path) -> object:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise AlgebraFormatError(f"cannot read file: {exc.strerror}", str(path))
    alg = parse_algebra(text)
    if not alg.name:
        alg = dataclasses.replace(alg, name=Path(path).stem)
    return alg


def _settings(args):
    return Settings(args.m_max, args.k_max, args.d_max, args.wnu_arities, args.max_closure, args.max_work,
                    args.threads)


# -- commands --------------------------------------------------------------------


def cmd_validate(args):
    alg = load(args.file)
    ops = ", ".join(f"{f.name}/{f.arity}" for f in alg.operations) or "no operations"
    print(f"{args.file}: ok, size {alg.size}, {ops}")
    return EXIT_OK


def cmd_analyze(args):
    alg = load(args.file)
    report = analyze(alg, _settings(args))
    problems = verify_report(json.loads(to_json(report)), alg)
    if problems:
        for p in problems:
            print(f"certificate check failed: {p}", file=sys.stderr)
        return EXIT_INCONSISTENT
    if args.json:
        print(to_json(report, indent=2))
    else:
        _print_summary(report)
    return EXIT_BUDGET if report["verdict"] == "inconclusive" and budget_hit(report) else EXIT_OK


def _print_summary(report):
    cube = report["cube"]
    print(f"algebra   {report['algebra']['name']} (size {report['algebra']['size']})")
    line = cube["status"]
    if cube.get("blocker"):
        line += f"  D={cube['blocker']['D']} B={cube['blocker']['B']}"
    if cube.get("witness"):
        line += f"  {cube['witness']['pattern']['kind']} d={cube['witness']['pattern']['dimension']}: {cube['witness']['term']}"
    print(f"cube      {line}")
    for n, res in report["wnu"].items():
        print(f"wnu{n:<6} {res['status']}" + (f"  {res['term']}" if "term" in res else ""))
    chain = report["omit15"]
    extra = f"  m={chain['m']}" if "m" in chain else ""
    print(f"omit15    {chain['status']}{extra}")
    print(f"verdict   {report['verdict']} ({report['verdict_basis']})")


def cmd_witness(args):
    alg = load(args.file)
    budget = Budget(args.max_closure, args.max_work, args.threads)
    analysis = has_cube_term(alg, args.m_max, args.k_max, args.d_max, budget, witness=False)
    if analysis.status not in (CubeStatus.BLOCKER_CERTIFIED, CubeStatus.BLOCKER_CANDIDATE):
        print(f"{args.file}: no cube term blocker ({analysis.status.value}); nothing to witness", file=sys.stderr)
        return EXIT_USAGE
    chain = find_omit15_chain(alg, budget).chain if args.claims else None
    out = run_witness(alg, analysis, args.window, args.claims, chain, args.wnu_arities, budget,
                      samples=args.samples, seed=args.seed)
    if args.json:
        print(json.dumps(out, sort_keys=True, indent=2))
    else:
        print(f"window N={args.window}, carrier |C| = {out['instance']['carrier_size']}, "
              f"blocker D={out['instance']['blocker_data']['D']} B={out['instance']['blocker_data']['B']}")
        for c in out["report"]["checks"]:
            reason = f"  ({c['reason']})" if "reason" in c else ""
            print(f"  {c['status']:<8} {c['name']}{reason}")
    failed = {c["name"] for c in out["report"]["checks"] if c["status"] == "fail"}
    if failed & DEFECT_CHECKS and analysis.status == CubeStatus.BLOCKER_CERTIFIED:
        return EXIT_INCONSISTENT
    return EXIT_OK


def cmd_examples(args):
    out = Path(args.emit)
    out.mkdir(parents=True, exist_ok=True)
    for name, make in sorted(corpus.BUNDLED.items()):
        path = out / f"{name}.json"
        path.write_text(dump_algebra(make()))
        print(path)
    return EXIT_OK


def cmd_verify(args):
    alg = load(args.file)
    report = json.loads(Path(args.report).read_text())
    problems = verify_report(report, alg)
    for p in problems:
        print(f"certificate check failed: {p}", file=sys.stderr)
    if not problems:
        print(f"{args.report}: all certificates re-verified ({report['verdict']})")
    return EXIT_INCONSISTENT if problems else EXIT_OK


# -- classify --------------------------------------------------------------------


def parse_budget(spec):
    """``key=value,...`` over CLASSIFY_DEFAULTS; lists use ``+`` (``wnu=2+3``)."""
    out = dict(CLASSIFY_DEFAULTS)
    if not spec:
        return out
    for item in spec.split(","):
        key, sep, value = item.partition("=")
        key = key.strip()
        if not sep or key not in out:
            raise UsageError(f"bad budget item {item!r}; known keys: {', '.join(sorted(out))}")
        if key == "wnu":
            try:
                _int_list(value)
            except argparse.ArgumentTypeError as exc:
                raise UsageError(f"budget item wnu: {exc}")
            out[key] = value
        else:
            try:
                out[key] = int(value)
            except ValueError:
                raise UsageError(f"budget item {key} needs an integer, got {value!r}")
    return out


def parse_generator(spec):
    """``random:size=3,arities=2+3,count=10000,seed=1[,blocker=1]`` or ``all:size=2,arities=3``."""
    kind, _, rest = spec.partition(":")
    opts = {}
    for item in filter(None, rest.split(",")):
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"bad generator item {item!r}")
        opts[key] = value
    try:
        size = int(opts.pop("size"))
        arities = tuple(int(a) for a in opts.pop("arities").split("+"))
        if kind == "all":
            if size > 3:
                raise UsageError("all: generators are limited to size <= 3")
            gen = corpus.all_idempotent_algebras(size, arities, opts.pop("prefix", f"all{size}"))
        elif kind == "random":
            count, seed = int(opts.pop("count")), int(opts.pop("seed"))
            blocker = bool(int(opts.pop("blocker", "0")))
            prefix = opts.pop("prefix", "rndb" if blocker else "rnd")
            gen = corpus.random_idempotent_algebras(size, arities, count, seed, blocker, prefix)
        else:
            raise UsageError(f"unknown generator {kind!r}")
    except KeyError as exc:
        raise UsageError(f"generator spec {spec!r} is missing {exc.args[0]}")
    except ValueError as exc:
        raise UsageError(f"generator spec {spec!r}: {exc}")
    if opts:
        raise UsageError(f"unknown generator options: {', '.join(sorted(opts))}")
    return gen


def iter_source(source):
    """(name, algebra dict or None, error or None) in input order."""
    path = Path(source)
    if ":" in source and not path.exists():
        for alg in parse_generator(source):
            yield alg.name, alg, None
        return
    if not path.is_dir():
        raise UsageError(f"{source}: not a directory or generator spec")
    for f in sorted(path.glob("*.json")):
        try:
            yield f.stem, load(f), None
        except AlgebraFormatError as exc:
            yield f.stem, None, str(exc)


def classify_one(item, budget):
    name, alg, error = item
    if error is not None:
        return {"name": name, "error": error, "kind": "format"}
    try:
        settings = Settings(budget["m_max"], budget["k_max"], budget["d_max"], _int_list(budget["wnu"]),
                            budget["max_closure"], budget["max_work"], 1, bool(budget["witness"]),
                            bool(budget["full"]))
        report = analyze(alg, settings, keep=True)
        line = {"name": name, "report": stable(report)}
        if report["verdict"] == NON_DUALIZABLE and budget["replay"]:
            line["claim2"] = _replay(alg, report, budget)
        return line
    except CubewrightError as exc:
        kind = "budget" if isinstance(exc, ResourceLimitError) else "inconsistency"
        return {"name": name, "error": str(exc), "kind": kind}


def _replay(alg, report, budget):
    live = report["_live"]
    b = Budget(budget["max_closure"], None)
    try:
        inst = build_instance(alg, live["cube"], budget["window"], b)
    except ResourceLimitError as exc:
        return {"status": "skipped", "reason": str(exc)}
    rep = replay_claim2(inst, live["chain"])
    return {"status": "pass" if rep.ok else "fail", "carrier": inst.carrier.n,
            "checks": {c["name"]: c["status"] for c in rep.checks}}


def _completed(out: Path):
    """Names already in ``out``; a torn last line (interrupted write) is dropped."""
    if not out.exists():
        return set()
    lines = out.read_text().splitlines(keepends=True)
    good, names = [], set()
    for line in lines:
        try:
            rec = json.loads(line)
        except ValueError:
            break
        if not line.endswith("\n"):
            break
        good.append(line)
        names.add(rec["name"])
    if len(good) != len(lines):
        out.write_text("".join(good))
    return names


def _worker(args):
    item, budget = args
    return classify_one(item, budget)


def summarize(out: Path):
    counts, hits, failures, errors, total = {}, [], [], 0, 0
    for line in out.read_text().splitlines():
        rec = json.loads(line)
        total += 1
        if "error" in rec:
            errors += 1
            continue
        v = rec["report"]["verdict"]
        counts[v] = counts.get(v, 0) + 1
        if v == NON_DUALIZABLE:
            hits.append(rec["name"])
            if rec.get("claim2", {}).get("status") == "fail":
                failures.append(rec["name"])
    return {"total": total, "verdicts": dict(sorted(counts.items())), "errors": errors,
            "hits": len(hits), "hit_names": hits, "claim2_failures": failures}


def cmd_classify(args):
    budget = parse_budget(args.budget)
    out = Path(args.out)
    done = _completed(out)
    started = time.perf_counter()
    todo = ((item, budget) for item in iter_source(args.source) if item[0] not in done)
    written = 0
    with out.open("a") as fh:
        if args.jobs > 1:
            pool = multiprocessing.Pool(args.jobs)
            results = pool.imap(_worker, todo, chunksize=16)
        else:
            pool, results = None, map(_worker, todo)
        try:
            for line in results:
                fh.write(json.dumps(line, sort_keys=True, separators=(",", ":")) + "\n")
                fh.flush()
                written += 1
                if args.progress and written % args.progress == 0:
                    log.info("%d algebras classified", written)
        finally:
            if pool is not None:
                pool.close()
                pool.join()
    summary = summarize(out)
    summary.update({"source": args.source, "budget": budget, "resumed_from": len(done), "written": written})
    if args.summary:
        record = dict(summary, elapsed_seconds=round(time.perf_counter() - started, 1))
        Path(args.summary).write_text(json.dumps(record, sort_keys=True, indent=2) + "\n")
    print(f"{summary['total']} algebras: " + ", ".join(f"{k} {v}" for k, v in summary["verdicts"].items())
          + f"; errors {summary['errors']}; hits {summary['hits']}; claim-2 failures {len(summary['claim2_failures'])}")
    return EXIT_INCONSISTENT if summary["claim2_failures"] else EXIT_OK


# -- entry point -----------------------------------------------------------------


def _search_flags(p, wnu=True):
    p.add_argument("--m-max", type=int, default=3, help="idempotent reduct approximation level")
    p.add_argument("--k-max", type=int, default=4, help="cross-check relation arity for candidate blockers")
    p.add_argument("--d-max", type=int, default=3, help="largest cube dimension for witness search")
    p.add_argument("--wnu-arities", type=_int_list, default=[2, 3, 4])
    p.add_argument("--max-closure", type=int, default=None,
                   help="closure element cap (default: $CUBEWRIGHT_MAX_CLOSURE or 2000000)")
    p.add_argument("--max-work", type=int, default=DEFAULT_MAX_WORK, help="operation applications per closure")
    p.add_argument("--threads", type=int, default=1)


def build_parser():
    parser = _Parser(prog="cubewright", description="Cube terms, blockers and non-dualizability certificates.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("validate", help="parse and validate an algebra file")
    p.add_argument("file")
    p.set_defaults(run=cmd_validate)

    p = sub.add_parser("analyze", help="cube term, WNU and omit-{1,5} analysis with a verdict")
    p.add_argument("file")
    _search_flags(p)
    p.add_argument("--json", action="store_true")
    p.set_defaults(run=cmd_analyze)

    p = sub.add_parser("witness", help="replay the non-dualizability construction on a finite window")
    p.add_argument("file")
    p.add_argument("--window", type=_window, default=4)
    p.add_argument("--claims", action="store_true", help="also replay the congruence claims")
    p.add_argument("--samples", type=int, default=32, help="random congruences for large carriers")
    p.add_argument("--seed", type=int, default=0)
    _search_flags(p)
    p.add_argument("--json", action="store_true")
    p.set_defaults(run=cmd_witness)

    p = sub.add_parser("classify", help="analyze a directory or generated population into JSONL")
    p.add_argument("source", help="directory of *.json files, or random:... / all:... generator spec")
    p.add_argument("--out", required=True)
    p.add_argument("--budget", default="", help="key=value,... (keys: " + ", ".join(sorted(CLASSIFY_DEFAULTS)) + ")")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--summary", help="write a JSON run record here")
    p.add_argument("--progress", type=int, default=0, help="log every N algebras")
    p.set_defaults(run=cmd_classify)

    p = sub.add_parser("examples", help="write the bundled corpus")
    p.add_argument("--emit", required=True, metavar="DIR")
    p.set_defaults(run=cmd_examples)

    p = sub.add_parser("verify", help="re-verify the certificates of a saved analyze --json report")
    p.add_argument("report")
    p.add_argument("file")
    p.set_defaults(run=cmd_verify)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(message)s")
    try:
        return args.run(args)
    except UsageError as exc:
        print(f"cubewright: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except AlgebraFormatError as exc:
        print(f"format error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except ResourceLimitError as exc:
        print(f"budget exhausted: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except NoBlockerError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except InconsistencyError as exc:
        print(f"internal inconsistency: {exc}", file=sys.stderr)
        return EXIT_INCONSISTENT
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_FORMAT


if __name__ == "__main__":
    sys.exit(main())
