"""
Circuit service: build diagrams gate by gate on numbered wires.
"""
import logging
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from exceptions import ArityMismatchError
from models import Diagram, VertexType
from services.diagram_service import STATE_SYMBOLS
from utils.phase import Phase, PhaseLike

logger = logging.getLogger(__name__)

T = Phase.parse("1/4")
T_DAGGER = Phase.parse("-1/4")

# state symbol -> (leaf kind, leaf phase)
_LEAVES: Dict[str, Tuple[VertexType, int]] = {
    "0": (VertexType.X, 0),
    "1": (VertexType.X, 1),
    "+": (VertexType.Z, 0),
    "-": (VertexType.Z, 1),
}


class CircuitBuilder:
    """Appends gates to wires 1..n of a diagram.

    Wires listed in ``prepared`` start from a state leaf ("0", "1", "+" or "-")
    instead of an input boundary.
    """

    def __init__(self, wires: int, prepared: Optional[Mapping[int, str]] = None) -> None:
        self.wires = wires
        self.prepared = dict(prepared or {})
        self.diagram = Diagram()
        self.gates: List[Tuple] = []
        self._inputs: Dict[int, int] = {}
        self._front: Dict[int, int] = {}
        for w in range(1, wires + 1):
            if w in self.prepared:
                symbol = self.prepared[w]
                if symbol not in STATE_SYMBOLS:
                    raise ArityMismatchError(f"Unknown state {symbol!r} for wire {w}")
                kind, phase = _LEAVES[symbol]
                self._front[w] = self.diagram.add_vertex(kind, Phase(phase))
            else:
                b = self.diagram.add_vertex(VertexType.BOUNDARY)
                self._inputs[w] = b
                self._front[w] = b

    def _check(self, *wires: int) -> None:
        for w in wires:
            if not 1 <= w <= self.wires:
                raise ArityMismatchError(f"Wire {w} outside 1..{self.wires}")
        if len(set(wires)) != len(wires):
            raise ArityMismatchError(f"Gate wires {list(wires)} must be distinct")

    def _append(self, w: int, kind: VertexType, phase: Phase = Phase(0)) -> int:
        v = self.diagram.add_vertex(kind, phase)
        self.diagram.add_edge(self._front[w], v)
        self._front[w] = v
        return v

    # single-wire gates

    def z_phase(self, w: int, phase: PhaseLike) -> "CircuitBuilder":
        self._check(w)
        self._append(w, VertexType.Z, Phase.parse(phase))
        self.gates.append(("Z", w, str(Phase.parse(phase))))
        return self

    def x_phase(self, w: int, phase: PhaseLike) -> "CircuitBuilder":
        self._check(w)
        self._append(w, VertexType.X, Phase.parse(phase))
        self.gates.append(("X", w, str(Phase.parse(phase))))
        return self

    def x(self, w: int) -> "CircuitBuilder":
        return self.x_phase(w, 1)

    def z(self, w: int) -> "CircuitBuilder":
        return self.z_phase(w, 1)

    def t(self, w: int) -> "CircuitBuilder":
        return self.z_phase(w, T)

    def tdg(self, w: int) -> "CircuitBuilder":
        return self.z_phase(w, T_DAGGER)

    def h(self, w: int) -> "CircuitBuilder":
        self._check(w)
        self._append(w, VertexType.H)
        self.gates.append(("H", w))
        return self

    # two-wire gates

    def cnot(self, control: int, target: int) -> "CircuitBuilder":
        """Green dot on the control joined to a red dot on the target."""
        self._check(control, target)
        c = self._append(control, VertexType.Z)
        t = self._append(target, VertexType.X)
        self.diagram.add_edge(c, t)
        self.gates.append(("CNOT", control, target))
        return self

    def cnots(self, pairs: Sequence[Tuple[int, int]]) -> "CircuitBuilder":
        for control, target in pairs:
            self.cnot(control, target)
        return self

    def build(self, input_order: Optional[Sequence[int]] = None) -> Diagram:
        """Close every wire with an output and return the diagram.

        ``input_order`` lists the unprepared wires in the order their inputs should
        appear; by default wire order.
        """
        order = list(input_order) if input_order is not None else sorted(self._inputs)
        if sorted(order) != sorted(self._inputs):
            raise ArityMismatchError(f"Input order {order} must list exactly the wires {sorted(self._inputs)}")
        d = self.diagram.copy()
        outputs = []
        for w in range(1, self.wires + 1):
            o = d.add_vertex(VertexType.BOUNDARY)
            d.add_edge(self._front[w], o)
            outputs.append(o)
        d.set_boundaries([self._inputs[w] for w in order], outputs)
        d.validate()
        logger.debug(f"Built circuit with {len(self.gates)} gates: {d!r}")
        return d


class CircuitService:
    """Named circuits built with CircuitBuilder."""

    @staticmethod
    def cnot(n: int, control: int, target: int) -> Diagram:
        if control == target:
            raise ArityMismatchError("CNOT control and target must differ")
        return CircuitBuilder(n).cnot(control, target).build()

    @staticmethod
    def cnot_circuit(n: int, pairs: Sequence[Tuple[int, int]]) -> Diagram:
        return CircuitBuilder(n).cnots(pairs).build()

    @staticmethod
    def pauli_layer(n: int, kind: VertexType, wires: Sequence[int]) -> Diagram:
        """π phase of the given colour on each listed wire."""
        builder = CircuitBuilder(n)
        for w in sorted(wires):
            if kind == VertexType.X:
                builder.x(w)
            else:
                builder.z(w)
        return builder.build()

    @staticmethod
    def phase_layer(phases: Sequence[PhaseLike]) -> Diagram:
        """Z phase gate phases[i] on wire i+1."""
        builder = CircuitBuilder(len(phases))
        for w, phase in enumerate(phases, start=1):
            builder.z_phase(w, phase)
        return builder.build()

    @staticmethod
    def ccz() -> Diagram:
        """CCZ from seven T/T† gates on the parities x, y, z, x⊕y, x⊕z, y⊕z, x⊕y⊕z."""
        b = CircuitBuilder(3)
        b.t(1).t(2).t(3)
        b.cnot(1, 2).tdg(2).cnot(1, 2)
        b.cnot(1, 3).tdg(3).cnot(1, 3)
        b.cnot(2, 3).tdg(3).cnot(2, 3)
        b.cnot(1, 3).cnot(2, 3).t(3).cnot(2, 3).cnot(1, 3)
        return b.build()
