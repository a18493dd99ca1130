import json

import pytest
from hypothesis import given

from exceptions import ArityMismatchError, DiagramFormatError, DiagramInvariantError
from models import Diagram, VertexType
from services.colour_code_service import ColourCodeService
from services.diagram_service import DiagramService
from services.semantics_service import SemanticsService
from utils.phase import Phase
from utils.tensor import ExactMatrix

from conftest import chain, circuits


def test_identity_and_spider_arity():
    assert DiagramService.identity(3).arity == (3, 3)
    d = DiagramService.spider(VertexType.Z, "1/2", 2, 3)
    assert d.arity == (2, 3)
    assert len(d.interior()) == 1
    with pytest.raises(ArityMismatchError):
        DiagramService.spider(VertexType.H, 0, 2, 1)


def test_compose_checks_arity():
    with pytest.raises(ArityMismatchError):
        DiagramService.compose(DiagramService.identity(2), DiagramService.identity(3))


def test_compose_with_identity_is_unchanged():
    d = chain([(VertexType.Z, Phase.parse("1/4")), (VertexType.X, Phase(1))])
    assert DiagramService.iso_equal(DiagramService.compose(DiagramService.identity(1), d), d)
    assert DiagramService.iso_equal(DiagramService.compose(d, DiagramService.identity(1)), d)


def test_compose_does_not_mutate_arguments():
    a, b = DiagramService.identity(1), chain([(VertexType.Z, Phase(0))])
    before = (a.fingerprint(), b.fingerprint())
    DiagramService.compose(a, b)
    assert (a.fingerprint(), b.fingerprint()) == before


def test_cup_meeting_cap_closes_into_a_scalar_two():
    cup = Diagram()
    o1, o2 = cup.add_boundary(False), cup.add_boundary(False)
    cup.add_edge(o1, o2)
    cap = Diagram()
    i1, i2 = cap.add_boundary(True), cap.add_boundary(True)
    cap.add_edge(i1, i2)
    closed = DiagramService.compose(cup, cap)
    assert closed.arity == (0, 0)
    (loop,) = closed.vertex_ids()
    assert closed.kind(loop) == VertexType.Z and closed.degree(loop) == 0
    assert SemanticsService.evaluate(closed) == ExactMatrix.from_rows([[2]])


@given(circuits, circuits, circuits)
def test_compose_is_associative(a, b, c):
    left = DiagramService.compose(DiagramService.compose(a, b), c)
    right = DiagramService.compose(a, DiagramService.compose(b, c))
    assert DiagramService.iso_equal(left, right)


@given(circuits, circuits)
def test_adjoint_reverses_composition(a, b):
    assert DiagramService.iso_equal(
        DiagramService.adjoint(DiagramService.compose(a, b)),
        DiagramService.compose(DiagramService.adjoint(b), DiagramService.adjoint(a)),
    )


def test_tensor_orders_wires():
    d = DiagramService.tensor(DiagramService.spider(VertexType.Z, 0, 1, 2), DiagramService.identity(1))
    assert d.arity == (2, 3)


def test_adjoint_negates_phases_and_swaps_boundaries():
    d = DiagramService.spider(VertexType.Z, "1/4", 1, 2)
    adj = DiagramService.adjoint(d)
    assert adj.arity == (2, 1)
    (v,) = adj.interior()
    assert adj.phase(v) == Phase.parse("7/4")
    assert DiagramService.iso_equal(DiagramService.adjoint(adj), d)


def test_colour_swap_is_an_involution():
    d = ColourCodeService.build_enc()
    swapped = DiagramService.colour_swap(d)
    assert not DiagramService.iso_equal(swapped, d)
    assert DiagramService.iso_equal(DiagramService.colour_swap(swapped), d)


def test_iso_ignores_ids_but_not_boundary_order():
    d = DiagramService.permutation([1, 0])
    assert not DiagramService.iso_equal(d, DiagramService.identity(2))
    assert DiagramService.iso_equal(DiagramService.permutation([0, 1]), DiagramService.identity(2))


def test_digest_is_relabelling_invariant():
    a = chain([(VertexType.Z, Phase.parse("1/2")), (VertexType.X, Phase(0))])
    b = Diagram()
    b.add_vertex(VertexType.X, Phase(0), vid=40)
    b.add_vertex(VertexType.Z, Phase.parse("1/2"), vid=7)
    i, o = b.add_boundary(True), b.add_boundary(False)
    b.add_edge(i, 7)
    b.add_edge(7, 40)
    b.add_edge(40, o)
    assert DiagramService.digest(a) == DiagramService.digest(b)
    assert a.fingerprint() != b.fingerprint()


def test_validate_rejects_bad_degrees():
    d = Diagram()
    h = d.add_vertex(VertexType.H)
    b = d.add_boundary(True)
    d.add_edge(b, h)
    with pytest.raises(DiagramInvariantError):
        d.validate()


def test_h_and_boundary_phases_are_zero():
    d = Diagram()
    h = d.add_vertex(VertexType.H, Phase(1))
    assert d.phase(h) == Phase(0)


def test_fixture_encoder_matches_builder(fixtures_dir):
    assert DiagramService.iso_equal(DiagramService.load(fixtures_dir / "enc.json"), ColourCodeService.build_enc())


def test_load_reports_bad_documents(tmp_path):
    bad_kind = {"vertices": {"a": {"kind": "Y"}}, "edges": []}
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(bad_kind))
    with pytest.raises(DiagramFormatError):
        DiagramService.load(path)
    dangling = {"inputs": ["a"], "vertices": {"a": {"kind": "B"}}, "edges": [["a", "z"]]}
    path.write_text(json.dumps(dangling))
    with pytest.raises(DiagramFormatError):
        DiagramService.load(path)
    with pytest.raises(DiagramFormatError):
        DiagramService.load(tmp_path / "missing.json")


def test_named_vertex_keys_are_accepted():
    text = json.dumps({
        "inputs": ["in"], "outputs": ["out"],
        "vertices": {"in": {"kind": "B"}, "z": {"kind": "Z", "phase": "1/2"}, "out": {"kind": "B"}},
        "edges": [["in", "z"], ["z", "out"]],
    })
    d = DiagramService.loads(text)
    assert DiagramService.iso_equal(d, DiagramService.spider(VertexType.Z, "1/2"))


@given(circuits)
def test_save_and_load_preserve_structure(d):
    assert DiagramService.iso_equal(DiagramService.loads(DiagramService.dumps(d)), d)
    assert DiagramService.digest(DiagramService.loads(DiagramService.dumps(d))) == DiagramService.digest(d)


def test_bare_wires():
    assert DiagramService.bare_wires(DiagramService.permutation([2, 0, 1])) == [(0, 2), (1, 0), (2, 1)]
