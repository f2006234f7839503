"""Batch driver and CLI behavior."""

import json
import pytest

from osv.cli import main
from osv.prove import ProveConfig, load_files, reports_to_json, run, stats
from tests.conftest import CORPUS


def test_run_proves_append(tmp_path):
    reports, artifacts, code = run([CORPUS / "append.osv"], config=ProveConfig())
    assert code == 0
    assert reports[0].verdict == "Proved"
    assert reports[0].rounds >= 1


def test_query_filter_unknown_name():
    from osv.errors import SpecError

    with pytest.raises(SpecError, match="no query named"):
        run([CORPUS / "append.osv"], query_filter="nope")


def test_exit_code_nonzero_on_failure(tmp_path):
    bad = tmp_path / "bad.osv"
    bad.write_text("query refutable { int x; shows x > 0 }\n")
    reports, _, code = run([bad], config=ProveConfig())
    assert reports[0].verdict == "Refuted"
    assert reports[0].countermodel
    assert code == 1


def test_parse_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "broken.osv"
    bad.write_text("struct S {")
    assert main(["prove", str(bad)]) == 2
    err = capsys.readouterr().err
    assert "broken.osv:1:11" in err


def test_cli_json_and_dumps(tmp_path, capsys):
    out_json = tmp_path / "report.json"
    smt_dir = tmp_path / "smt"
    rc = main([
        "prove", str(CORPUS / "unique_remove.osv"),
        "--json", str(out_json), "--dump-smt", str(smt_dir), "--dump-insts",
    ])
    assert rc == 0
    reports = json.loads(out_json.read_text())
    assert reports[0]["name"] == "unique_remove"
    assert reports[0]["verdict"] == "Proved"
    assert (smt_dir / "unique_remove.smt2").exists()
    stdout = capsys.readouterr().out
    trace_lines = [l for l in stdout.splitlines() if l.startswith("{")]
    assert trace_lines
    ev = json.loads(trace_lines[0])
    assert {"round", "rule", "node", "value", "conditions", "generation"} <= set(ev)


def test_cli_dump_normal(capsys):
    rc = main(["prove", str(CORPUS / "append.osv"), "--dump-normal"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "// normal form of query append_transfer" in out
    assert "fact" in out


def test_jobs_parallel_matches_serial():
    files = [CORPUS / "append.osv", CORPUS / "unique_remove.osv"]
    serial, _, _ = run(files, config=ProveConfig(jobs=1))
    parallel, _, _ = run(files, config=ProveConfig(jobs=2))
    assert [r.name for r in serial] == [r.name for r in parallel]
    assert [r.verdict for r in serial] == [r.verdict for r in parallel]


def test_stats_table_shape():
    from osv.prove import query_table

    reports, _, _ = run([CORPUS / "append.osv"], config=ProveConfig())
    per_file = stats(reports)
    assert "append.osv" in per_file
    assert "#Goals" in per_file and "Total" in per_file
    detailed = query_table(reports)
    assert "append_transfer" in detailed


def test_manifest_entries_resolve():
    import json

    manifest = json.loads((CORPUS / "manifest.json").read_text())
    _, goals, origin = load_files(sorted(CORPUS.glob("*.osv")))
    names = {g.name for g in goals}
    assert len(manifest) == 20
    for entry in manifest:
        assert entry["query"] in names, entry
        assert origin[entry["query"]] == entry["file"], entry


def test_report_json_excludes_timing_when_asked():
    reports, _, _ = run([CORPUS / "append.osv"], config=ProveConfig())
    with_t = json.loads(reports_to_json(reports, with_timing=True))
    without_t = json.loads(reports_to_json(reports, with_timing=False))
    assert "time_s" in with_t[0]
    assert "time_s" not in without_t[0]


def test_expected_verdict_contract(tmp_path):
    bad = tmp_path / "mixed.osv"
    bad.write_text(
        "query valid { int x; assumes x > 0; shows x >= 1 }\n"
        "query invalid { int x; shows x > 0 }\n"
    )
    reports, _, code = run(
        [bad], config=ProveConfig(),
        expected={"valid": "Proved", "invalid": "Refuted"},
    )
    assert code == 0  # both expectations met
