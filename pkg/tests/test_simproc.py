import logging

import pytest
from hypothesis import given

from config import Settings
from exceptions import (
    DiagramFormatError,
    ResourceLimitError,
    RuleError,
    SearchExhaustedError,
    StepBudgetExceeded,
    TraceReplayError,
)
from models import Direction, SimprocKind, VertexType
from services.diagram_service import DiagramService
from services.semantics_service import SemanticsService
from services.simproc_service import (
    PAULI_X_RULES,
    ScriptedRun,
    SimprocService,
    dual,
    dual_rule_name,
    loop,
    reduce,
    reduce_all,
    rewrite,
    seq,
)
from utils.phase import Phase

from conftest import chain, circuits


@pytest.fixture
def messy():
    return chain([
        (VertexType.Z, Phase.parse("1/4")),
        (VertexType.Z, Phase.parse("1/4")),
        (VertexType.X, Phase(0)),
    ])


def test_basic_simp_fuses_and_removes(messy):
    result, trace = SimprocService.run("basic_simp", messy)
    assert DiagramService.iso_equal(result, chain([(VertexType.Z, Phase.parse("1/2"))]))
    assert [s.rule for s in trace.steps] == ["green_sp", "red_id"]
    assert trace.initial == DiagramService.digest(messy)
    assert DiagramService.iso_equal(DiagramService.from_file(trace.final), result)


def test_replay_reproduces_the_result(messy):
    result, trace = SimprocService.run("basic_simp", messy)
    replayed = SimprocService.replay(trace, messy)
    assert DiagramService.digest(replayed) == DiagramService.digest(result)


def test_replay_detects_tampering(messy):
    _, trace = SimprocService.run("basic_simp", messy)
    trace.steps[0].post = "0" * 32
    with pytest.raises(TraceReplayError) as info:
        SimprocService.replay(trace, messy)
    assert info.value.step == 1
    report = SimprocService.certify(trace, messy)
    assert not report.passed
    assert report.steps[-1].index == 1 and not report.steps[-1].holds


def test_replay_checks_the_initial_diagram(messy):
    _, trace = SimprocService.run("basic_simp", messy)
    with pytest.raises(TraceReplayError) as info:
        SimprocService.replay(trace, DiagramService.identity(1))
    assert info.value.step == 0


def test_certify_passes_every_step(messy):
    _, trace = SimprocService.run("basic_simp", messy)
    report = SimprocService.certify(trace, messy)
    assert report.passed
    assert [s.index for s in report.steps] == [1, 2]


def test_certify_bounds_the_wire_count(messy):
    _, trace = SimprocService.run("basic_simp", messy)
    with pytest.raises(ResourceLimitError):
        SimprocService.certify(trace, messy, config=Settings(certify_max_wires=1))


def test_step_budget_keeps_the_partial_trace(messy):
    with pytest.raises(StepBudgetExceeded) as info:
        SimprocService.run("basic_simp", messy, max_steps=1)
    assert len(info.value.trace.steps) == 1
    assert info.value.exit_code == 3


def test_inverted_rule_reference():
    proc = seq(rewrite("~green_id"))
    result, trace = SimprocService.run(proc, DiagramService.identity(1))
    assert DiagramService.iso_equal(result, chain([(VertexType.Z, Phase(0))]))
    assert trace.steps[0].dir == Direction.REV
    assert DiagramService.digest(SimprocService.replay(trace, DiagramService.identity(1))) == trace.steps[0].post


def test_unknown_names():
    with pytest.raises(RuleError):
        SimprocService.builtin("simplify_everything")
    with pytest.raises(RuleError):
        SimprocService.run(reduce_all(["no_such_rule"]), DiagramService.identity(1))


def test_dual_names():
    assert dual_rule_name("red_to_green") == "green_to_red"
    assert dual_rule_name("~red_sp") == "~green_sp"
    assert dual_rule_name("euler") == "euler2"
    assert dual_rule_name("hopf") == "hopf"
    node = dual(seq(rewrite("red_pi_lemma"), reduce_all(["green_copy", "h_cancel"])))
    assert node.kind == SimprocKind.SEQ
    assert node.children[0].rules == ["green_pi_lemma"]
    assert node.children[1].rules == ["red_copy", "h_cancel"]


def test_concat_requires_chaining(messy):
    _, first = SimprocService.run("basic_simp", messy)
    _, other = SimprocService.run("basic_simp", chain([(VertexType.Z, Phase(0)), (VertexType.Z, Phase(0))]))
    with pytest.raises(TraceReplayError):
        SimprocService.concat(first, other)


def test_trace_files(tmp_path, messy):
    _, trace = SimprocService.run("basic_simp", messy)
    path = SimprocService.save_trace(trace, tmp_path / "nested" / "trace.json")
    assert SimprocService.load_trace(path) == trace
    (tmp_path / "bad.json").write_text('{"initial": 3}')
    with pytest.raises(DiagramFormatError):
        SimprocService.load_trace(tmp_path / "bad.json")
    with pytest.raises(DiagramFormatError):
        SimprocService.load_trace(tmp_path / "missing.json")


def test_expand_and_reduce_returns_reduction_when_enough(messy):
    result, trace = SimprocService.expand_and_reduce(messy, chain([(VertexType.Z, Phase.parse("1/2"))]))
    assert len(trace.steps) == 2
    assert SimprocService.certify(trace, messy).passed


def test_expand_and_reduce_gives_up_on_unreachable_goals():
    with pytest.raises(SearchExhaustedError):
        SimprocService.expand_and_reduce(
            DiagramService.identity(1), chain([(VertexType.Z, Phase.parse("1/2"))]),
            config=Settings(expansion_limit=20),
        )


@given(circuits)
def test_simplification_is_certified(d):
    result, trace = SimprocService.run("basic_simp", d)
    assert SemanticsService.diagrams_proportional(result, d)[0]
    assert SimprocService.certify(trace, d).passed


def test_push_pauli_x_loops_reduction_then_the_pi_lemma():
    expected = loop(seq(reduce_all(PAULI_X_RULES), rewrite("red_pi_lemma"), reduce("red_sp")))
    assert SimprocService.builtin("push_pauli_x") == expected
    assert SimprocService.builtin("push_pauli_z") == dual(expected)


def test_invert_walks_a_trace_back(messy):
    result, trace = SimprocService.run("basic_simp", messy)
    back, undo = SimprocService.invert(trace, result)
    assert DiagramService.iso_equal(back, messy)
    assert [s.rule for s in undo.steps] == ["red_id", "green_sp"]
    assert all(s.dir == Direction.REV for s in undo.steps)
    assert undo.initial == DiagramService.digest(result)
    assert SimprocService.certify(undo, result).passed


def test_invert_needs_the_final_diagram(messy):
    _, trace = SimprocService.run("basic_simp", messy)
    with pytest.raises(TraceReplayError):
        SimprocService.invert(trace, messy)


def test_rebase_moves_a_trace_to_other_ids(messy):
    result, trace = SimprocService.run("basic_simp", messy)
    shifted = DiagramService.compose(DiagramService.identity(1), messy)
    assert set(shifted.vertex_ids()) != set(messy.vertex_ids())
    final, moved = SimprocService.rebase(trace, shifted)
    assert DiagramService.iso_equal(final, result)
    assert [s.post for s in moved.steps] == [s.post for s in trace.steps]
    assert SimprocService.certify(moved, shifted).passed


def test_replay_on_other_ids_warns_and_searches(messy, caplog):
    result, trace = SimprocService.run("basic_simp", messy)
    shifted = DiagramService.compose(DiagramService.identity(1), messy)
    with caplog.at_level(logging.WARNING, logger="services.simproc_service"):
        replayed = SimprocService.replay(trace, shifted)
    assert DiagramService.iso_equal(replayed, result)
    assert any("stored match does not apply" in r.getMessage() for r in caplog.records)


def test_scripted_run_leaves_frozen_vertices_alone():
    d = chain([(VertexType.Z, Phase.parse("1/4")), (VertexType.Z, Phase.parse("1/4")), (VertexType.Z, Phase(0))])
    first = d.interior()[0]
    run = ScriptedRun(d)
    assert run.simp("basic_simp", frozen=[first]) > 0
    assert first in run.diagram.vertex_ids()
    assert DiagramService.iso_equal(
        run.diagram, chain([(VertexType.Z, Phase.parse("1/4")), (VertexType.Z, Phase.parse("1/4"))])
    )
    assert run.frozen == frozenset()


def test_scripted_run_applies_a_rule_where_told(messy):
    first, second, red = messy.interior()
    run = ScriptedRun(messy)
    (fused,) = run.at("green_sp", first, second)
    assert run.diagram.kind(fused) == VertexType.Z
    assert run.diagram.phase(fused) == Phase.parse("1/2")
    with pytest.raises(SearchExhaustedError):
        run.at("green_sp", fused, red)
    assert SimprocService.certify(run.trace(), messy).passed
