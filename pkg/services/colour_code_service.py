"""
Colour code service: diagrams of the [[8,3,2]] code and derivations of its circuits.

Conventions: logical wire j is the j-th tensor factor of |abc⟩ (leftmost is 1);
physical wire 1 is the most significant physical bit.
"""
import itertools
import logging
from typing import Dict, FrozenSet, Iterable, Iterator, List, Mapping, Optional, Sequence, Set, Tuple

from config import Settings, settings as default_settings
from exceptions import ArityMismatchError, SearchExhaustedError
from models import Diagram, Direction, VertexType
from schemas import ProofTraceFile
from services.circuit_service import CircuitBuilder, CircuitService
from services.diagram_service import DiagramService
from services.semantics_service import SemanticsService
from services.simproc_service import ScriptedRun, SimprocService
from utils.tensor import ExactMatrix

logger = logging.getLogger(__name__)

LOGICAL = 3
PHYSICAL = 8

X_SUPPORT: Dict[int, FrozenSet[int]] = {
    1: frozenset({1, 3, 5, 7}),
    2: frozenset({1, 2, 5, 6}),
    3: frozenset({1, 2, 3, 4}),
}
Z_SUPPORT: Dict[int, FrozenSet[int]] = {
    1: frozenset({1, 2}),
    2: frozenset({1, 3}),
    3: frozenset({1, 5}),
}

# Physical T-power pattern of the transversal CCZ, in units of π/4.
CCZ_PATTERN = (1, -1, -1, 1, -1, 1, 1, -1)

# Published codeword table: logical bits -> one term of |s⟩ + |s̄⟩.
CODEWORD_TABLE: Dict[str, str] = {
    "000": "00000000",
    "001": "10101010",
    "010": "11001100",
    "011": "01100110",
    "100": "11110000",
    "101": "01011010",
    "110": "00111100",
    "111": "10010110",
}

# Encoder circuit layout: logical wire -> physical wire, and the ancillas.
ENCODER_INPUT_WIRES = (7, 6, 4)
ENCODER_ANCILLAS = (1, 2, 3, 5, 8)
GHZ_WIRE = 8

Supports = Mapping[int, FrozenSet[int]]


class _EncoderFrame:
    """Current ids of the encoder's spiders while CNOTs are pushed into it.

    The GHZ spider and the rails form the Z layer; ``flips`` holds the X spider of
    each physical wire except the GHZ wire.
    """

    def __init__(self, enc: Diagram, offset: int = 0) -> None:
        def inner(b: int) -> int:
            (v,) = enc.neighbours(b)
            return v + offset

        self.ghz = inner(enc.outputs[GHZ_WIRE - 1])
        self.rails = {j: inner(b) for j, b in enumerate(enc.inputs, start=1)}
        self.flips = {w: inner(enc.outputs[w - 1]) for w in range(1, PHYSICAL + 1) if w != GHZ_WIRE}

    @property
    def layer(self) -> Set[int]:
        return {self.ghz, *self.rails.values()}

    @property
    def fan_outs(self) -> Set[int]:
        return set(self.flips.values())

    def replace(self, old: int, new: int) -> None:
        if self.ghz == old:
            self.ghz = new
        for table in (self.rails, self.flips):
            for key, v in table.items():
                if v == old:
                    table[key] = new


class ColourCodeService:
    """Service building the code's encoder, decoder and logical/physical gates."""

    @staticmethod
    def build_enc(x_support: Optional[Supports] = None) -> Diagram:
        """3→8 encoder: a GHZ spider on all wires plus one X fan-out per logical input."""
        x_support = x_support or X_SUPPORT
        d = Diagram()
        inputs = [d.add_boundary(True) for _ in range(LOGICAL)]
        ghz = d.add_vertex(VertexType.Z)
        flips = {w: d.add_vertex(VertexType.X) for w in range(1, PHYSICAL)}
        outputs = [d.add_boundary(False) for _ in range(PHYSICAL)]
        for w, r in flips.items():
            d.add_edge(ghz, r)
            d.add_edge(r, outputs[w - 1])
        d.add_edge(ghz, outputs[GHZ_WIRE - 1])
        for j in range(1, LOGICAL + 1):
            rail = d.add_vertex(VertexType.Z)
            d.add_edge(inputs[j - 1], rail)
            for w in sorted(x_support[j]):
                if w not in flips:
                    raise ArityMismatchError(f"Support wire {w} of logical {j} has no fan-out target")
                d.add_edge(rail, flips[w])
        d.validate()
        return d

    @staticmethod
    def build_dec(x_support: Optional[Supports] = None) -> Diagram:
        return DiagramService.adjoint(ColourCodeService.build_enc(x_support))

    @staticmethod
    def logical_pauli(kind: VertexType, logical: int) -> Diagram:
        return CircuitService.pauli_layer(LOGICAL, kind, [logical])

    @staticmethod
    def physical_pauli(kind: VertexType, logical: int) -> Diagram:
        support = X_SUPPORT if kind == VertexType.X else Z_SUPPORT
        return CircuitService.pauli_layer(PHYSICAL, kind, sorted(support[logical]))

    @staticmethod
    def pauli_sides(kind: VertexType, logical: int, support: Optional[Sequence[int]] = None) -> Tuple[Diagram, Diagram]:
        """(Enc after a logical Pauli, physical Pauli layer after Enc)."""
        enc = ColourCodeService.build_enc()
        physical = (
            CircuitService.pauli_layer(PHYSICAL, kind, support) if support is not None
            else ColourCodeService.physical_pauli(kind, logical)
        )
        lhs = DiagramService.compose(ColourCodeService.logical_pauli(kind, logical), enc)
        rhs = DiagramService.compose(enc, physical)
        return lhs, rhs

    @staticmethod
    def cnot_logical(control: int, target: int) -> Diagram:
        for q in (control, target):
            if not 1 <= q <= LOGICAL:
                raise ArityMismatchError(f"Logical wire {q} outside 1..{LOGICAL}")
        return CircuitService.cnot(LOGICAL, control, target)

    @staticmethod
    def ccz_logical() -> Diagram:
        return CircuitService.ccz()

    @staticmethod
    def ccz_physical() -> Diagram:
        return CircuitService.phase_layer([f"{p}/4" for p in CCZ_PATTERN])

    # codewords

    @staticmethod
    def codeword(bits: str) -> ExactMatrix:
        """|s⟩ + |s̄⟩ for the table entry of ``bits``."""
        s = CODEWORD_TABLE[bits]
        flipped = "".join("1" if c == "0" else "0" for c in s)
        return SemanticsService.ket_sum([s, flipped])

    @staticmethod
    def codeword_permutation(enc_matrix: ExactMatrix) -> Optional[Tuple[int, ...]]:
        """Permutation p of logical wires with Enc·|b⟩ ∝ table[b permuted by p], one scalar for all b.

        Returns p such that logical wire i of the encoder plays table position p[i].
        """
        for perm in itertools.permutations(range(LOGICAL)):
            if ColourCodeService._columns_match(enc_matrix, perm):
                return perm
        return None

    @staticmethod
    def _columns_match(enc_matrix: ExactMatrix, perm: Tuple[int, ...]) -> bool:
        scalar = None
        for bits in CODEWORD_TABLE:
            table_bits = ["0"] * LOGICAL
            for i, p in enumerate(perm):
                table_bits[p] = bits[i]
            column = enc_matrix.column(int(bits, 2))
            expected = ColourCodeService.codeword("".join(table_bits))
            if scalar is None:
                holds, scalar = SemanticsService.proportional_equal(column, expected)
                if not holds or scalar is None:
                    return False
            elif column != expected.scaled(scalar):
                return False
        return True

    # physical CNOT search

    @staticmethod
    def _mask(wires: FrozenSet[int]) -> int:
        return sum(1 << (w - 1) for w in wires)

    @staticmethod
    def _apply_cnot(state: Tuple[int, ...], control: int, target: int) -> Tuple[int, ...]:
        c, t = 1 << (control - 1), 1 << (target - 1)
        return tuple(v ^ t if v & c else v for v in state)

    @staticmethod
    def _goal_states(control: int, target: int) -> List[Tuple[int, ...]]:
        """Images of (1, s1, s2, s3) a logical CNOT may have; each s_j only up to adding 1."""
        ones = (1 << PHYSICAL) - 1
        wanted = []
        for j in range(1, LOGICAL + 1):
            image = ColourCodeService._mask(X_SUPPORT[j])
            if j == control:
                image ^= ColourCodeService._mask(X_SUPPORT[target])
            wanted.append(image)
        states = []
        for flips in itertools.product((0, ones), repeat=LOGICAL):
            states.append((ones,) + tuple(v ^ f for v, f in zip(wanted, flips)))
        return states

    @staticmethod
    def _gates() -> List[Tuple[int, int]]:
        return [(c, t) for c in range(1, PHYSICAL + 1) for t in range(1, PHYSICAL + 1) if c != t]

    @staticmethod
    def _layers(start: Sequence[Tuple[int, ...]], depth: int) -> Dict[Tuple[int, ...], Tuple[Tuple[int, int], ...]]:
        """Shortest gate sequence reaching each state from ``start`` within ``depth`` gates."""
        seen = {s: () for s in start}
        frontier = list(start)
        for _ in range(depth):
            nxt = []
            for state in frontier:
                path = seen[state]
                for gate in ColourCodeService._gates():
                    new = ColourCodeService._apply_cnot(state, *gate)
                    if new not in seen:
                        seen[new] = path + (gate,)
                        nxt.append(new)
            frontier = nxt
        return seen

    @staticmethod
    def search_cnot_circuits(control: int, target: int, max_gates: int = 5) -> Iterator[Tuple[Tuple[int, int], ...]]:
        """CNOT sequences whose GF(2) action realises the logical CNOT on the code, shortest first."""
        ones = (1 << PHYSICAL) - 1
        start = (ones,) + tuple(ColourCodeService._mask(X_SUPPORT[j]) for j in range(1, LOGICAL + 1))
        backward_depth = max_gates // 2
        forward = ColourCodeService._layers([start], max_gates - backward_depth)
        backward = ColourCodeService._layers(ColourCodeService._goal_states(control, target), backward_depth)
        found = []
        for state, head in forward.items():
            tail = backward.get(state)
            if tail is not None:
                # CNOTs are self-inverse: walk the backward path in reverse
                found.append(head + tuple(reversed(tail)))
        yield from sorted(found, key=lambda c: (len(c), c))

    @staticmethod
    def derive_cnot_physical(control: int = 2, target: int = 3, config: Optional[Settings] = None,
                             max_gates: int = 5) -> Tuple[Diagram, Tuple[Tuple[int, int], ...]]:
        """First searched circuit of at most ``max_gates`` CNOTs passing the exact oracle."""
        expected = SemanticsService.evaluate(ColourCodeService.cnot_logical(control, target), config=config)
        enc, dec = ColourCodeService.build_enc(), ColourCodeService.build_dec()
        for gates in ColourCodeService.search_cnot_circuits(control, target, max_gates):
            if not gates:
                continue
            circuit = CircuitService.cnot_circuit(PHYSICAL, gates)
            actual = SemanticsService.evaluate(DiagramService.compose_all([enc, circuit, dec]), config=config)
            if SemanticsService.proportional_equal(actual, expected)[0]:
                logger.info(f"Physical CNOT for logical {control}->{target}: {list(gates)}")
                return circuit, gates
        raise SearchExhaustedError(f"No circuit of at most {max_gates} CNOTs implements logical CNOT {control}->{target}")

    # CNOT proof

    @staticmethod
    def _absorb(run: ScriptedRun, frame: _EncoderFrame, spiders: Iterable[int], rule: str) -> None:
        """Fuse each spider into its one neighbour among the encoder spiders of its colour."""
        for s in spiders:
            pool = frame.layer if rule == "green_sp" else frame.fan_outs
            homes = [v for v in run.diagram.neighbours(s) if v in pool]
            if len(homes) != 1:
                raise SearchExhaustedError(f"Spider {s} does not touch exactly one encoder spider")
            (fused,) = run.at(rule, homes[0], s)
            frame.replace(homes[0], fused)

    @staticmethod
    def _cancel_pairs(run: ScriptedRun, frame: _EncoderFrame, hub: int, others: Iterable[int]) -> None:
        """Remove every double edge between ``hub`` and ``others`` with the Hopf rule."""
        for v in sorted(others):
            if len(run.diagram.edges_between(hub, v)) != 2:
                continue
            hub_kind = run.diagram.kind(hub)
            fresh = run.at("hopf", hub, v)
            (new_hub,) = [f for f in fresh if run.diagram.kind(f) == hub_kind]
            (new_v,) = [f for f in fresh if f != new_hub]
            frame.replace(hub, new_hub)
            frame.replace(v, new_v)
            hub = new_hub

    @staticmethod
    def _next_physical_gate(run: ScriptedRun, frame: _EncoderFrame) -> Optional[Tuple[int, int, int, int]]:
        """(control, target, Z spider, X spider) of a CNOT right after the encoder, if any."""
        d = run.diagram
        layer = frame.layer
        fronts = {}
        for w, r in frame.flips.items():
            ahead = [v for v in d.neighbours(r) if v not in layer]
            if len(ahead) != 1:
                raise SearchExhaustedError(f"Wire {w} does not leave the encoder through one edge")
            fronts[w] = ahead[0]
        wire_of = {v: w for w, v in fronts.items()}
        for c, z in sorted(fronts.items()):
            if d.kind(z) != VertexType.Z or d.degree(z) != 3:
                continue
            for x in d.neighbours(z):
                t = wire_of.get(x)
                if t is not None and t != c and d.kind(x) == VertexType.X and d.degree(x) == 3:
                    return c, t, z, x
        if any(d.kind(v) != VertexType.X for v in fronts.values()):
            raise SearchExhaustedError("The physical circuit holds gates other than CNOTs between wires 1..7")
        return None

    @staticmethod
    def _push_physical(run: ScriptedRun, frame: _EncoderFrame, control: int, target: int, z: int, x: int) -> None:
        """Absorb CNOT(control, target) into the encoder: the target's fan-out gains the control's."""
        (frame.flips[target],) = run.at("red_sp", frame.flips[target], x)
        fresh = run.at("gen_bialg", z, frame.flips[control], direction=Direction.REV)
        d = run.diagram
        reds = [v for v in fresh if d.kind(v) == VertexType.X]
        greens = [v for v in fresh if d.kind(v) == VertexType.Z]
        (towards,) = [v for v in reds if frame.flips[target] in d.neighbours(v)]
        (frame.flips[control],) = [v for v in reds if v != towards]
        (frame.flips[target],) = run.at("red_sp", frame.flips[target], towards)
        ColourCodeService._absorb(run, frame, greens, "green_sp")
        ColourCodeService._cancel_pairs(run, frame, frame.flips[target], frame.layer)

    @staticmethod
    def _push_logical(run: ScriptedRun, frame: _EncoderFrame, control: int, target: int) -> None:
        """Absorb a logical CNOT sitting before the encoder: the control rail gains the target's support."""
        d = run.diagram
        fan_outs = frame.fan_outs

        def behind(j: int) -> int:
            back = [v for v in d.neighbours(frame.rails[j]) if v not in fan_outs]
            if len(back) != 1:
                raise SearchExhaustedError(f"Rail {j} does not enter the encoder through one edge")
            return back[0]

        z, x = behind(control), behind(target)
        if d.kind(z) != VertexType.Z or d.kind(x) != VertexType.X or x not in d.neighbours(z):
            raise SearchExhaustedError(f"No logical CNOT({control}, {target}) before the encoder")
        (frame.rails[control],) = run.at("green_sp", frame.rails[control], z)
        fresh = run.at("gen_bialg", frame.rails[target], x, direction=Direction.REV)
        d = run.diagram
        reds = [v for v in fresh if d.kind(v) == VertexType.X]
        greens = [v for v in fresh if d.kind(v) == VertexType.Z]
        (towards,) = [v for v in greens if frame.rails[control] in d.neighbours(v)]
        (frame.rails[target],) = [v for v in greens if v != towards]
        (frame.rails[control],) = run.at("green_sp", frame.rails[control], towards)
        ColourCodeService._absorb(run, frame, reds, "red_sp")
        ColourCodeService._cancel_pairs(run, frame, frame.rails[control], frame.fan_outs)

    @staticmethod
    def cnot_proof(physical: Diagram, control: int = 2, target: int = 3,
                   config: Optional[Settings] = None) -> Tuple[Diagram, ProofTraceFile]:
        """Trace rewriting Dec ∘ physical ∘ Enc to the logical CNOT.

        The physical CNOTs are absorbed into the encoder one at a time. The logical CNOT
        is absorbed into the encoder from the input side; both must reach the same
        diagram, and that second run is then read backwards. What is left is Dec ∘ Enc
        after the logical CNOT, reduced by ``reduce_phase_free`` without touching the
        CNOT's own spiders. Raises SearchExhaustedError when any part does not go through.
        """
        config = config or default_settings
        enc, dec = ColourCodeService.build_enc(), ColourCodeService.build_dec()
        logical = ColourCodeService.cnot_logical(control, target)

        forward = ScriptedRun(DiagramService.compose_all([enc, physical, dec]), config=config)
        frame = _EncoderFrame(enc)
        while True:
            gate = ColourCodeService._next_physical_gate(forward, frame)
            if gate is None:
                break
            ColourCodeService._push_physical(forward, frame, *gate)

        start = DiagramService.compose_all([logical, enc, dec])
        backward = ScriptedRun(start, book=forward.book, config=config)
        ColourCodeService._push_logical(backward, _EncoderFrame(enc, logical.next_vertex_id), control, target)
        if DiagramService.digest(forward.diagram) != DiagramService.digest(backward.diagram):
            raise SearchExhaustedError("The physical and the logical CNOT leave different encoders")
        undone, undo = SimprocService.invert(backward.trace(), forward.diagram, book=forward.book, config=config)

        reduction = ScriptedRun(start, book=forward.book, config=config)
        reduction.simp("reduce_phase_free", frozen=logical.interior())
        if not DiagramService.iso_equal(reduction.diagram, logical):
            raise SearchExhaustedError("Dec ∘ Enc did not reduce to the identity around the logical CNOT")
        final, tail = SimprocService.rebase(reduction.trace(), undone, book=forward.book, config=config)

        trace = SimprocService.concat(SimprocService.concat(forward.trace(), undo), tail)
        logger.info(
            f"CNOT {control}->{target} proved in {len(trace.steps)} steps "
            f"({len(forward.steps)} absorbing, {len(undo.steps)} expanding, {len(tail.steps)} reducing)"
        )
        return final, trace

    # encoder circuit

    @staticmethod
    def encoder_unitary() -> Diagram:
        """8→8 circuit: H on the GHZ wire, logical fan-outs, then the GHZ fan-out."""
        b = CircuitBuilder(PHYSICAL)
        b.h(GHZ_WIRE)
        for j, wire in enumerate(ENCODER_INPUT_WIRES, start=1):
            for w in sorted(X_SUPPORT[j] - {wire}):
                b.cnot(wire, w)
        for w in range(1, PHYSICAL):
            b.cnot(GHZ_WIRE, w)
        return b.build()

    @staticmethod
    def encoder_preparation() -> Diagram:
        """3→8: logical inputs routed to their wires, |0⟩ on every ancilla."""
        b = CircuitBuilder(PHYSICAL, prepared={w: "0" for w in ENCODER_ANCILLAS})
        return b.build(input_order=ENCODER_INPUT_WIRES)

    @staticmethod
    def encoder_circuit() -> Diagram:
        return DiagramService.compose(ColourCodeService.encoder_preparation(), ColourCodeService.encoder_unitary())

    @staticmethod
    def derive_encoder_circuit(config: Optional[Settings] = None) -> Tuple[Diagram, ProofTraceFile, Diagram]:
        """Circuit form of the encoder with a trace rewriting the encoder diagram into it.

        ``circuit_simp`` reduces the circuit form to the encoder; that trace read
        backwards from a freshly built encoder is the one returned.
        Returns (circuit form, trace from the encoder, reduct of the circuit form).
        """
        circuit = ColourCodeService.encoder_circuit()
        reduct, reduction = SimprocService.run("circuit_simp", circuit, config=config)
        _, trace = SimprocService.invert(reduction, ColourCodeService.build_enc(), config=config)
        return circuit, trace, reduct
