import pytest

from exceptions import ArityMismatchError, SearchExhaustedError
from models import VertexType
from services.circuit_service import CircuitBuilder, CircuitService
from services.colour_code_service import (
    CODEWORD_TABLE,
    LOGICAL,
    PHYSICAL,
    X_SUPPORT,
    ColourCodeService,
)
from services.diagram_service import DiagramService
from services.semantics_service import SemanticsService
from utils.tensor import ExactMatrix


@pytest.fixture(scope="module")
def enc_matrix():
    return SemanticsService.evaluate(ColourCodeService.build_enc())


def test_encoder_shape():
    enc = ColourCodeService.build_enc()
    assert enc.arity == (LOGICAL, PHYSICAL)
    assert ColourCodeService.build_dec().arity == (PHYSICAL, LOGICAL)


def test_encoder_rejects_unknown_support_wires():
    with pytest.raises(ArityMismatchError):
        ColourCodeService.build_enc({**X_SUPPORT, 1: frozenset({8})})


def test_decoder_inverts_encoder():
    composite = DiagramService.compose(ColourCodeService.build_enc(), ColourCodeService.build_dec())
    holds, _ = SemanticsService.proportional_equal(
        SemanticsService.evaluate(composite), ExactMatrix.identity(2 ** LOGICAL)
    )
    assert holds


def test_codewords_match_the_table_up_to_wire_order(enc_matrix):
    assert ColourCodeService.codeword_permutation(enc_matrix) == (2, 1, 0)


def test_codewords_are_even_weight():
    for s in CODEWORD_TABLE.values():
        assert s.count("1") % 2 == 0


@pytest.mark.parametrize("kind", [VertexType.X, VertexType.Z])
@pytest.mark.parametrize("logical", [1, 2, 3])
def test_transversal_paulis(kind, logical):
    lhs, rhs = ColourCodeService.pauli_sides(kind, logical)
    assert SemanticsService.diagrams_proportional(lhs, rhs)[0]


def test_wrong_pauli_support_fails():
    lhs, rhs = ColourCodeService.pauli_sides(VertexType.X, 1, support=[1, 2])
    assert not SemanticsService.diagrams_proportional(lhs, rhs)[0]


def test_logical_cnot_bounds():
    with pytest.raises(ArityMismatchError):
        ColourCodeService.cnot_logical(0, 1)
    with pytest.raises(ArityMismatchError):
        CircuitService.cnot(3, 2, 2)


def test_cnot_search_finds_short_circuits():
    circuits = list(ColourCodeService.search_cnot_circuits(2, 3))
    assert circuits
    assert all(len(c) <= 5 for c in circuits)
    assert [len(c) for c in circuits] == sorted(len(c) for c in circuits)


def test_derived_physical_cnot_implements_logical_cnot():
    physical, gates = ColourCodeService.derive_cnot_physical(2, 3)
    assert 1 <= len(gates) <= 5
    composite = DiagramService.compose_all([ColourCodeService.build_enc(), physical, ColourCodeService.build_dec()])
    expected = SemanticsService.evaluate(ColourCodeService.cnot_logical(2, 3))
    assert SemanticsService.proportional_equal(SemanticsService.evaluate(composite), expected)[0]


def test_ccz_phase_polynomial_is_ccz():
    m = SemanticsService.evaluate(ColourCodeService.ccz_logical())
    diagonal = [m.entry((i, i)) for i in range(8)]
    assert all(m.entry((i, j)).is_zero for i in range(8) for j in range(8) if i != j)
    assert all(d == diagonal[0] for d in diagonal[:7])
    assert diagonal[7] == -diagonal[0]


def test_transversal_t_pattern_gives_logical_ccz():
    composite = DiagramService.compose_all(
        [ColourCodeService.build_enc(), ColourCodeService.ccz_physical(), ColourCodeService.build_dec()]
    )
    assert SemanticsService.proportional_equal(
        SemanticsService.evaluate(composite), SemanticsService.evaluate(ColourCodeService.ccz_logical())
    )[0]


def test_encoder_circuit_embeds_encoder():
    circuit = ColourCodeService.encoder_circuit()
    assert circuit.arity == (LOGICAL, PHYSICAL)
    assert SemanticsService.diagrams_proportional(circuit, ColourCodeService.build_enc())[0]


def test_encoder_circuit_reduces_to_encoder():
    _, trace, reduct = ColourCodeService.derive_encoder_circuit()
    assert DiagramService.iso_equal(reduct, ColourCodeService.build_enc())
    assert trace.steps


def test_circuit_builder_prepared_wires():
    d = CircuitBuilder(2, prepared={1: "+"}).cnot(1, 2).build()
    assert d.arity == (1, 2)
    with pytest.raises(ArityMismatchError):
        CircuitBuilder(2, prepared={1: "?"})
    with pytest.raises(ArityMismatchError):
        CircuitBuilder(2).cnot(1, 3)
    with pytest.raises(ArityMismatchError):
        CircuitBuilder(3, prepared={1: "0"}).build(input_order=[2])


def test_cnot_proof_rejects_a_circuit_without_the_cnot():
    with pytest.raises(SearchExhaustedError):
        ColourCodeService.cnot_proof(DiagramService.identity(PHYSICAL))


def test_cnot_proof_rejects_other_gates():
    with pytest.raises(SearchExhaustedError):
        ColourCodeService.cnot_proof(CircuitService.pauli_layer(PHYSICAL, VertexType.Z, [1]))
