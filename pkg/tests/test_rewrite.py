import json

import pytest
from hypothesis import given, strategies as st

from exceptions import RuleError, StaleMatchError
from models import Direction, VertexType
from services.circuit_service import CircuitService
from services.diagram_service import DiagramService
from services.rewrite_service import RewriteService, RuleBook
from services.semantics_service import SemanticsService
from utils.phase import Phase

from conftest import chain, circuits

SEMANTIC_RULES = ["green_sp", "red_sp", "green_id", "red_id", "h_cancel", "green_to_red", "hopf", "gen_bialg_simp"]


def _write_rule(path, doc):
    path.write_text(json.dumps(doc))
    return path


def test_default_book_has_every_rule(book):
    assert len(book) == 28
    assert "green_sp" in book and "red_h_leaf" in book
    assert book.names() == sorted(book.names())
    with pytest.raises(RuleError):
        book.get("no_such_rule")


def test_fusion_merges_phases(book):
    d = chain([(VertexType.Z, Phase.parse("1/4")), (VertexType.Z, Phase.parse("1/4"))])
    result, match = RewriteService.rewrite_first(book.get("green_sp"), d)
    assert match.assignment == {"a": Phase.parse("1/4"), "b": Phase.parse("1/4")}
    assert DiagramService.iso_equal(result, chain([(VertexType.Z, Phase.parse("1/2"))]))


def test_identity_removal(book):
    d = chain([(VertexType.X, Phase(0)), (VertexType.Z, Phase(1))])
    result, _ = RewriteService.rewrite_first(book.get("red_id"), d)
    assert DiagramService.iso_equal(result, chain([(VertexType.Z, Phase(1))]))
    assert RewriteService.first_match(book.get("green_id"), chain([(VertexType.Z, Phase(1))])) is None


def test_h_cancel(book):
    d = chain([(VertexType.H, Phase(0)), (VertexType.H, Phase(0))])
    result, _ = RewriteService.rewrite_first(book.get("h_cancel"), d)
    assert DiagramService.iso_equal(result, DiagramService.identity(1))


def test_inverted_identity_matches_every_wire(book):
    expansion = book.get("green_id", Direction.REV)
    assert expansion.direction == Direction.REV
    d = chain([(VertexType.Z, Phase.parse("1/2"))])
    matches = RewriteService.all_matches(expansion, d)
    assert len(matches) == 2
    grown = RewriteService.apply(matches[0], d)
    assert len(grown.interior()) == 2
    assert SemanticsService.diagrams_proportional(grown, d)[0]


def test_invert_is_an_involution(book):
    rule = book.get("green_sp")
    assert RewriteService.invert(RewriteService.invert(rule)) is rule
    assert book.get("green_sp", Direction.REV) is RewriteService.invert(rule)


def test_matches_are_deterministic(book):
    d = chain([(VertexType.Z, Phase(0))] * 4)
    first = [m.sort_key() for m in RewriteService.all_matches(book.get("green_sp"), d)]
    second = [m.sort_key() for m in RewriteService.all_matches(book.get("green_sp"), d.copy())]
    assert first == second
    assert len(first) == 3


def test_stale_match_is_refused(book):
    d = chain([(VertexType.Z, Phase(0)), (VertexType.Z, Phase(0))])
    match = RewriteService.first_match(book.get("green_sp"), d)
    changed = d.copy()
    changed.set_phase(match.target_vertices[0], Phase(1))
    with pytest.raises(StaleMatchError):
        RewriteService.apply(match, changed)


def test_match_record_round_trip(book):
    d = chain([(VertexType.Z, Phase.parse("3/4")), (VertexType.Z, Phase(1))])
    rule = book.get("green_sp")
    match = RewriteService.first_match(rule, d)
    rebuilt = RewriteService.match_from_record(rule, d, match.to_record())
    assert DiagramService.digest(RewriteService.apply(rebuilt)) == DiagramService.digest(RewriteService.apply(match))
    record = match.to_record()
    record.phases["a"] = "1/2"
    with pytest.raises(StaleMatchError):
        RewriteService.match_from_record(rule, d, record)


def test_instantiate_checks_counts(book):
    rule = book.get("green_sp")
    inst = RewriteService.instantiate(rule, (2, 1))
    assert inst.lhs.arity == (0, 3)
    assert RewriteService.instantiate(rule, (2, 1)) is inst
    with pytest.raises(RuleError):
        RewriteService.instantiate(rule, (1,))
    with pytest.raises(RuleError):
        RewriteService.instantiate(rule, (99, 0))


def test_substitute_binds_variables(book):
    split = RewriteService.substitute(book.get("green_sp", Direction.REV), {"a": Phase(0)})
    assert split.bindings == {"a": Phase(0)}
    assert "a" not in split.variables


def test_rule_file_errors(tmp_path):
    side = {"inputs": ["i"], "outputs": ["o"],
            "vertices": {"i": {"kind": "B"}, "v": {"kind": "Z"}, "o": {"kind": "B"}},
            "edges": [["i", "v"], ["v", "o"]]}
    with pytest.raises(RuleError, match="both sides"):
        RuleBook.load_file(_write_rule(tmp_path / "shared.json", {
            "name": "shared", "lhs": side, "rhs": side, "boundary_map": [["i", "i"], ["o", "o"]],
        }))
    rhs = {"inputs": ["i2"], "outputs": ["o2"],
           "vertices": {"i2": {"kind": "B"}, "w": {"kind": "Z", "phase": "c"}, "o2": {"kind": "B"}},
           "edges": [["i2", "w"], ["w", "o2"]]}
    with pytest.raises(RuleError, match="RHS variables"):
        RuleBook.load_file(_write_rule(tmp_path / "free.json", {
            "name": "free", "lhs": side, "rhs": rhs, "boundary_map": [["i", "i2"], ["o", "o2"]],
        }))
    with pytest.raises(RuleError, match="bijection"):
        RuleBook.load_file(_write_rule(tmp_path / "map.json", {
            "name": "map", "lhs": side, "rhs": rhs, "boundary_map": [["i", "i2"]],
        }))
    (tmp_path / "broken.json").write_text("{")
    with pytest.raises(RuleError):
        RuleBook.load_file(tmp_path / "broken.json")


def test_unsound_rule_is_reported(tmp_path):
    path = _write_rule(tmp_path / "bad_id.json", {
        "name": "bad_id",
        "lhs": {"inputs": ["i"], "outputs": ["o"],
                "vertices": {"i": {"kind": "B"}, "v": {"kind": "Z", "phase": "1/2"}, "o": {"kind": "B"}},
                "edges": [["i", "v"], ["v", "o"]]},
        "rhs": {"inputs": ["i2"], "outputs": ["o2"],
                "vertices": {"i2": {"kind": "B"}, "o2": {"kind": "B"}}, "edges": [["i2", "o2"]]},
        "boundary_map": [["i", "i2"], ["o", "o2"]],
    })
    report = RewriteService.check_soundness(RuleBook.load_file(path))
    assert not report.passed
    assert report.instances == 1 and len(report.counterexamples) == 1


@given(circuits, st.sampled_from(SEMANTIC_RULES))
def test_rewriting_preserves_semantics(book, d, name):
    rewritten = RewriteService.rewrite_first(book.get(name), d)
    if rewritten is not None:
        assert SemanticsService.diagrams_proportional(rewritten[0], d)[0]


def test_hopf_does_not_match_a_cnot(book):
    assert RewriteService.all_matches(book.get("hopf"), CircuitService.cnot(2, 1, 2)) == []


def test_matches_on_names_the_exact_vertices(book):
    d = chain([(VertexType.Z, Phase.parse("1/4")), (VertexType.Z, Phase.parse("1/2")), (VertexType.Z, Phase(0))])
    first, second, third = d.interior()
    (match,) = RewriteService.matches_on(book.get("green_sp"), d, [second, third])
    assert match.target_vertices == (second, third)
    assert RewriteService.matches_on(book.get("green_sp"), d, [first, third]) == []
    assert RewriteService.matches_on(book.get("green_sp"), d, [second]) == []


def test_unfusing_enumerates_every_leg_split(book):
    d = DiagramService.spider(VertexType.Z, "1/4", 1, 2)
    split = {"a": Phase.parse("1/4"), "b": Phase(0)}
    unfuse = RewriteService.substitute(book.get("green_sp", Direction.REV), split)
    some = RewriteService.all_matches(unfuse, d)
    every = RewriteService.all_matches(unfuse, d, all_legs=True)
    assert len(every) > len(some) > 0
    digests = {DiagramService.digest(RewriteService.apply(m, d)) for m in every}
    assert len(digests) > len({DiagramService.digest(RewriteService.apply(m, d)) for m in some})
    for m in every:
        assert SemanticsService.diagrams_proportional(RewriteService.apply(m, d), d)[0]
