import json

import pytest
from click.testing import CliRunner

from exceptions import ResourceLimitError
from main import cli
from models import ObligationStatus, VertexType
from schemas import ObligationReport
from services.colour_code_service import ColourCodeService
from services.diagram_service import DiagramService
from services.verification_service import OBLIGATIONS
from utils.phase import Phase

from conftest import chain


def _json_lines(output):
    return [json.loads(line) for line in output.splitlines() if line.startswith("{")]


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def messy_file(tmp_path):
    d = chain([(VertexType.Z, Phase.parse("1/4")), (VertexType.Z, Phase.parse("1/4")), (VertexType.X, Phase(0))])
    return DiagramService.save(d, tmp_path / "messy.json")


def test_eval_json(runner, fixtures_dir):
    result = runner.invoke(cli, ["eval", str(fixtures_dir / "id3.json"), "--json"])
    assert result.exit_code == 0
    (doc,) = _json_lines(result.output)
    assert (doc["rows"], doc["cols"], doc["exact"]) == (8, 8, True)
    assert doc["entries"][0][0] == "(1+0ω+0ω²+0ω³)"


def test_eval_matrix_and_float(runner, tmp_path):
    path = DiagramService.save(DiagramService.spider(VertexType.Z, "1/3"), tmp_path / "z.json")
    result = runner.invoke(cli, ["eval", str(path), "--float"])
    assert result.exit_code == 0
    assert "j" in result.output


def test_eval_missing_file_is_a_usage_error(runner, tmp_path):
    result = runner.invoke(cli, ["eval", str(tmp_path / "missing.json")])
    assert result.exit_code == 2


def test_eval_malformed_file(runner, tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"vertices": {"a": {"kind": "Q"}}}')
    result = runner.invoke(cli, ["eval", str(path)])
    assert result.exit_code == 2


def test_code_emit_and_check_prop(runner, tmp_path, fixtures_dir):
    assert runner.invoke(cli, ["code", "emit", "enc", "-o", str(tmp_path / "enc.json")]).exit_code == 0
    assert runner.invoke(cli, ["code", "emit", "dec", "-o", str(tmp_path / "dec.json")]).exit_code == 0
    enc = DiagramService.load(tmp_path / "enc.json")
    assert DiagramService.iso_equal(enc, ColourCodeService.build_enc())
    both = DiagramService.compose(enc, DiagramService.load(tmp_path / "dec.json"))
    DiagramService.save(both, tmp_path / "enc_then_dec.json")
    result = runner.invoke(cli, ["check-prop", str(tmp_path / "enc_then_dec.json"), str(fixtures_dir / "id3.json")])
    assert result.exit_code == 0
    assert "proportional:" in result.output


def test_check_prop_false_and_mismatched(runner, tmp_path, fixtures_dir):
    s = DiagramService.save(DiagramService.spider(VertexType.Z, "1/2"), tmp_path / "s.json")
    i = DiagramService.save(DiagramService.identity(1), tmp_path / "i.json")
    result = runner.invoke(cli, ["check-prop", str(s), str(i)])
    assert result.exit_code == 1
    assert "not proportional" in result.output
    assert runner.invoke(cli, ["check-prop", str(s), str(fixtures_dir / "id3.json")]).exit_code == 2


def test_simp_then_replay_and_certify(runner, tmp_path, messy_file):
    out, trace = tmp_path / "out.json", tmp_path / "trace.json"
    result = runner.invoke(cli, ["simp", str(messy_file), "--proc", "basic_simp", "-o", str(out), "--trace", str(trace)])
    assert result.exit_code == 0
    assert DiagramService.iso_equal(DiagramService.load(out), chain([(VertexType.Z, Phase.parse("1/2"))]))

    result = runner.invoke(cli, ["replay", str(trace), "--initial", str(messy_file), "--certify"])
    assert result.exit_code == 0
    assert "certified: True" in result.output

    result = runner.invoke(cli, ["certify", str(trace), "--initial", str(messy_file), "--json"])
    assert result.exit_code == 0
    (report,) = _json_lines(result.output)
    assert report["passed"] and len(report["steps"]) == 2


def test_replay_from_the_wrong_diagram(runner, tmp_path, messy_file, fixtures_dir):
    trace = tmp_path / "trace.json"
    runner.invoke(cli, ["simp", str(messy_file), "-o", str(tmp_path / "out.json"), "--trace", str(trace)])
    result = runner.invoke(cli, ["replay", str(trace), "--initial", str(fixtures_dir / "id3.json")])
    assert result.exit_code == 1


def test_simp_step_budget(runner, tmp_path, messy_file):
    trace = tmp_path / "partial.json"
    result = runner.invoke(cli, ["simp", str(messy_file), "-o", str(tmp_path / "out.json"),
                                 "--trace", str(trace), "--max-steps", "1"])
    assert result.exit_code == 3
    assert trace.exists()
    assert not (tmp_path / "out.json").exists()


def test_rules_check(runner):
    result = runner.invoke(cli, ["rules-check", "--rule", "green_sp", "--rule", "hopf", "--arity", "2", "--json"])
    assert result.exit_code == 0
    assert [r["rule"] for r in _json_lines(result.output)] == ["green_sp", "hopf"]
    assert runner.invoke(cli, ["rules-check", "--rule", "nope"]).exit_code == 2


def test_code_verify(runner, tmp_path):
    result = runner.invoke(cli, ["--trace-dir", str(tmp_path), "code", "verify", "--prop", "enc-dec", "--json"])
    assert result.exit_code == 0
    (line,) = _json_lines(result.output)
    assert line["obligation"] == "enc-dec" and line["status"] == "pass"
    assert (tmp_path / "enc-dec.json").exists()


def test_code_verify_flag_conflicts(runner):
    assert runner.invoke(cli, ["code", "verify", "--all", "--prop", "ccz"]).exit_code == 2
    assert runner.invoke(cli, ["code", "verify", "--prop", "nonsense"]).exit_code == 2
    assert runner.invoke(cli, ["--step-budget", "0", "code", "verify"]).exit_code == 2


def test_code_verify_exit_codes_follow_the_failure(runner, monkeypatch):
    def out_of_budget(_config):
        raise ResourceLimitError("too big")

    def failing(_config):
        return ObligationReport(obligation="codewords", status=ObligationStatus.FAIL)

    monkeypatch.setitem(OBLIGATIONS, "ccz", out_of_budget)
    monkeypatch.setitem(OBLIGATIONS, "codewords", failing)
    assert runner.invoke(cli, ["code", "verify", "--prop", "codewords"]).exit_code == 1
    assert runner.invoke(cli, ["code", "verify", "--prop", "ccz"]).exit_code == 3
    assert runner.invoke(cli, ["code", "verify", "--prop", "ccz", "--prop", "codewords"]).exit_code == 3


def test_emit_physical_cnot_reads_the_fixture(runner, tmp_path, fixtures_dir):
    out = tmp_path / "cnot-p.json"
    assert runner.invoke(cli, ["code", "emit", "cnot-p", "-o", str(out)]).exit_code == 0
    assert DiagramService.iso_equal(DiagramService.load(out), DiagramService.load(fixtures_dir / "cnot-p-23.json"))
