import json

import pytest

from cubewright import corpus
from cubewright.cli import (
    EXIT_BUDGET,
    EXIT_FORMAT,
    EXIT_INCONSISTENT,
    EXIT_OK,
    EXIT_USAGE,
    UsageError,
    main,
    parse_budget,
    parse_generator,
)
from cubewright.kernel import dump_algebra


@pytest.fixture
def emitted(tmp_path):
    d = tmp_path / "corpus"
    assert main(["examples", "--emit", str(d)]) == EXIT_OK
    return d


def _write(path, alg):
    path.write_text(dump_algebra(alg))
    return path


def _records(path):
    return [json.loads(line) for line in path.read_text().splitlines()]


def test_examples_emit_every_bundled_algebra(emitted):
    names = sorted(p.stem for p in emitted.glob("*.json"))
    assert names == sorted(corpus.BUNDLED)


def test_examples_reemit_is_byte_identical(emitted, tmp_path):
    again = tmp_path / "again"
    main(["examples", "--emit", str(again)])
    for p in emitted.glob("*.json"):
        assert p.read_bytes() == (again / p.name).read_bytes()


def test_emitted_majority_analyzes_to_cube_term(emitted, capsys):
    capsys.readouterr()
    assert main(["analyze", str(emitted / "majority.json"), "--json"]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["verdict"] == "has-cube-term"
    assert report["cube"]["witness"]["pattern"]["kind"] == "near-unanimity"


def test_validate_ok(emitted, capsys):
    assert main(["validate", str(emitted / "semilattice.json")]) == EXIT_OK
    assert "ok, size 2, meet/2" in capsys.readouterr().out


def test_validate_bad_table_length(tmp_path, capsys):
    doc = json.loads(dump_algebra(corpus.semilattice()))
    doc["operations"][0]["table"] = [0, 0, 0]
    f = tmp_path / "bad.json"
    f.write_text(json.dumps(doc))
    assert main(["validate", str(f)]) == EXIT_FORMAT
    assert "operations[0].table" in capsys.readouterr().err


def test_validate_entry_out_of_range(tmp_path, capsys):
    doc = json.loads(dump_algebra(corpus.semilattice()))
    doc["operations"][0]["table"][2] = 5
    f = tmp_path / "bad.json"
    f.write_text(json.dumps(doc))
    assert main(["validate", str(f)]) == EXIT_FORMAT
    assert "operations[0].table[2]" in capsys.readouterr().err


def test_validate_missing_file_and_garbage(tmp_path):
    assert main(["validate", str(tmp_path / "nope.json")]) == EXIT_FORMAT
    f = tmp_path / "junk.json"
    f.write_text("{not json")
    assert main(["validate", str(f)]) == EXIT_FORMAT


def test_usage_errors():
    assert main([]) == EXIT_USAGE
    assert main(["frobnicate"]) == EXIT_USAGE
    assert main(["analyze"]) == EXIT_USAGE
    assert main(["analyze", "x.json", "--wnu-arities", "1,2"]) == EXIT_USAGE


def test_analyze_text_summary(emitted, capsys):
    assert main(["analyze", str(emitted / "semilattice.json")]) == EXIT_OK
    out = capsys.readouterr().out
    assert "BlockerCertified" in out and "outside-scope" in out


def test_analyze_budget_exit(emitted):
    assert main(["analyze", str(emitted / "semilattice.json"), "--max-closure", "3"]) == EXIT_BUDGET


def test_analyze_then_verify(emitted, tmp_path, capsys):
    capsys.readouterr()
    main(["analyze", str(emitted / "z2-maltsev.json"), "--json"])
    report = tmp_path / "r.json"
    report.write_text(capsys.readouterr().out)
    assert main(["verify", str(report), str(emitted / "z2-maltsev.json")]) == EXIT_OK
    doc = json.loads(report.read_text())
    doc["verdict"] = "outside-scope"
    report.write_text(json.dumps(doc))
    assert main(["verify", str(report), str(emitted / "z2-maltsev.json")]) == EXIT_INCONSISTENT


def test_witness_exit_codes(emitted, capsys):
    assert main(["witness", str(emitted / "z2-maltsev.json")]) == EXIT_USAGE
    assert main(["witness", str(emitted / "semilattice.json"), "--window", "3"]) == EXIT_USAGE
    assert main(["witness", str(emitted / "semilattice.json"), "--claims", "--json"]) == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    checks = {c["name"]: c["status"] for c in out["report"]["checks"]}
    assert checks["g-not-in-C"] == "pass" and checks["claim1-block"] == "pass"


def test_classify_directory(tmp_path):
    src = tmp_path / "src"
    src.mkdir()
    _write(src / "a-semilattice.json", corpus.semilattice())
    _write(src / "b-z2.json", corpus.z2_maltsev())
    _write(src / "c-majority.json", corpus.majority())
    out = tmp_path / "out.jsonl"
    assert main(["classify", str(src), "--out", str(out)]) == EXIT_OK
    recs = _records(out)
    assert [r["name"] for r in recs] == ["a-semilattice", "b-z2", "c-majority"]
    assert [r["report"]["verdict"] for r in recs] == ["outside-scope", "has-cube-term", "has-cube-term"]
    assert all("volatile" not in r["report"] for r in recs)


def test_classify_empty_directory(tmp_path, capsys):
    src = tmp_path / "empty"
    src.mkdir()
    out = tmp_path / "out.jsonl"
    assert main(["classify", str(src), "--out", str(out)]) == EXIT_OK
    assert out.read_text() == ""
    assert "0 algebras" in capsys.readouterr().out


def test_classify_records_corrupt_files_inline(tmp_path):
    src = tmp_path / "src"
    src.mkdir()
    _write(src / "good.json", corpus.semilattice())
    (src / "corrupt.json").write_text('{"size": 2, "operations": [{"name": "f", "arity": 2, "table": [0]}]}')
    out = tmp_path / "out.jsonl"
    assert main(["classify", str(src), "--out", str(out)]) == EXIT_OK
    recs = {r["name"]: r for r in _records(out)}
    assert recs["corrupt"]["kind"] == "format" and "table" in recs["corrupt"]["error"]
    assert recs["good"]["report"]["verdict"] == "outside-scope"


def test_classify_resume_after_torn_line(tmp_path):
    spec = "random:size=2,arities=2,count=6,seed=3"
    full = tmp_path / "full.jsonl"
    assert main(["classify", spec, "--out", str(full)]) == EXIT_OK
    lines = full.read_text().splitlines(keepends=True)
    assert len(lines) == 6
    part = tmp_path / "part.jsonl"
    part.write_text("".join(lines[:3]) + lines[3][: len(lines[3]) // 2])
    summary = tmp_path / "summary.json"
    assert main(["classify", spec, "--out", str(part), "--summary", str(summary)]) == EXIT_OK
    assert part.read_text() == full.read_text()
    record = json.loads(summary.read_text())
    assert record["resumed_from"] == 3 and record["written"] == 3 and record["total"] == 6


def test_classify_parallel_matches_serial(tmp_path):
    spec = "random:size=2,arities=2+3,count=12,seed=7"
    one, many = tmp_path / "one.jsonl", tmp_path / "many.jsonl"
    main(["classify", spec, "--out", str(one)])
    main(["classify", spec, "--out", str(many), "--jobs", "2"])
    assert one.read_bytes() == many.read_bytes()


def test_classify_hit_carries_claim2(tmp_path):
    spec = "random:size=3,arities=2+3,count=6,seed=1,blocker=1"
    out, summary = tmp_path / "hits.jsonl", tmp_path / "s.json"
    assert main(["classify", spec, "--out", str(out), "--summary", str(summary)]) == EXIT_OK
    record = json.loads(summary.read_text())
    assert record["hits"] > 0 and record["claim2_failures"] == []
    for r in _records(out):
        if r.get("report", {}).get("verdict") == "inherently-non-dualizable":
            assert r["claim2"]["status"] == "pass"


def test_classify_bad_sources(tmp_path):
    out = str(tmp_path / "o.jsonl")
    assert main(["classify", str(tmp_path / "missing"), "--out", out]) == EXIT_USAGE
    assert main(["classify", "random:size=3", "--out", out]) == EXIT_USAGE
    assert main(["classify", "bogus:size=2,arities=2", "--out", out]) == EXIT_USAGE
    assert main(["classify", "all:size=2,arities=2", "--out", out, "--budget", "m_max=x"]) == EXIT_USAGE


def test_parse_budget():
    b = parse_budget("m_max=2,wnu=2+3,replay=0")
    assert b["m_max"] == 2 and b["wnu"] == "2+3" and b["replay"] == 0
    with pytest.raises(UsageError):
        parse_budget("nonsense=1")
    with pytest.raises(UsageError):
        parse_budget("wnu=1")


def test_parse_generator_counts():
    assert sum(1 for _ in parse_generator("all:size=2,arities=2")) == 4
    assert sum(1 for _ in parse_generator("random:size=3,arities=2+3,count=5,seed=0")) == 5
    with pytest.raises(UsageError):
        parse_generator("all:size=4,arities=2")
    with pytest.raises(UsageError):
        parse_generator("random:size=3,arities=2,count=5,seed=0,colour=red")


def test_generated_prefix_is_stable():
    # a shorter run over the same seed is a prefix of the longer one
    short = [dump_algebra(a) for a in parse_generator("random:size=3,arities=2+3,count=20,seed=9")]
    long = [dump_algebra(a) for a in parse_generator("random:size=3,arities=2+3,count=50,seed=9")]
    assert long[:20] == short
