"""
Core data models for zxcc: vertex kinds, enumerations and the ZX diagram.
"""
from __future__ import annotations

import enum
import hashlib
from typing import Dict, Iterator, List, NamedTuple, Optional, Sequence, Tuple

from exceptions import DiagramInvariantError
from utils.phase import Phase

HalfEdge = Tuple[int, int]  # (edge id, end index 0/1)


class VertexType(str, enum.Enum):
    """Kinds of diagram vertices."""
    Z = "Z"
    X = "X"
    H = "H"
    BOUNDARY = "B"

    @property
    def is_spider(self) -> bool:
        return self in (VertexType.Z, VertexType.X)

    def dual(self) -> VertexType:
        """Colour swap; H and boundaries are fixed."""
        if self == VertexType.Z:
            return VertexType.X
        if self == VertexType.X:
            return VertexType.Z
        return self


class Direction(str, enum.Enum):
    """Orientation in which a rule was used."""
    FWD = "fwd"
    REV = "rev"


class SimprocKind(str, enum.Enum):
    """Strategy combinator node types."""
    REWRITE = "REWRITE"
    REDUCE = "REDUCE"
    REDUCE_ALL = "REDUCE_ALL"
    LOOP = "LOOP"
    SEQ = "SEQ"


class ObligationStatus(str, enum.Enum):
    """Outcome of a verification obligation."""
    PASS = "pass"
    FAIL = "fail"
    SKIPPED = "skipped"


class Vertex(NamedTuple):
    kind: VertexType
    phase: Phase = Phase(0)


class Diagram:
    """Open multigraph with ordered input/output boundaries.

    Builders mutate a fresh diagram; every operation in the services returns a new
    diagram and never mutates its arguments. Vertex and edge ids are integers that are
    never reused within a diagram.
    """

    def __init__(self) -> None:
        self._vertices: Dict[int, Vertex] = {}
        self._edges: Dict[int, Tuple[int, int]] = {}
        self._incidence: Dict[int, List[int]] = {}
        self._inputs: List[int] = []
        self._outputs: List[int] = []
        self._next_vertex = 0
        self._next_edge = 0
        self._fingerprint: Optional[str] = None

    # construction

    def add_vertex(self, kind: VertexType, phase: Phase = Phase(0), vid: Optional[int] = None) -> int:
        if vid is None:
            vid = self._next_vertex
        elif vid in self._vertices:
            raise DiagramInvariantError(f"Vertex id {vid} already in use")
        if kind in (VertexType.H, VertexType.BOUNDARY):
            phase = Phase(0)
        self._vertices[vid] = Vertex(kind, phase)
        self._incidence[vid] = []
        self._next_vertex = max(self._next_vertex, vid + 1)
        self._fingerprint = None
        return vid

    def add_boundary(self, is_input: bool) -> int:
        vid = self.add_vertex(VertexType.BOUNDARY)
        (self._inputs if is_input else self._outputs).append(vid)
        return vid

    def add_edge(self, a: int, b: int) -> int:
        if a not in self._vertices or b not in self._vertices:
            raise DiagramInvariantError(f"Edge ({a}, {b}) references an undeclared vertex")
        eid = self._next_edge
        self._next_edge += 1
        self._edges[eid] = (a, b)
        self._incidence[a].append(eid)
        if b != a:
            self._incidence[b].append(eid)
        self._fingerprint = None
        return eid

    def remove_edge(self, eid: int) -> None:
        a, b = self._edges.pop(eid)
        self._incidence[a].remove(eid)
        if b != a:
            self._incidence[b].remove(eid)
        self._fingerprint = None

    def remove_vertex(self, vid: int) -> None:
        for eid in list(self._incidence[vid]):
            self.remove_edge(eid)
        del self._incidence[vid]
        del self._vertices[vid]
        if vid in self._inputs:
            self._inputs.remove(vid)
        if vid in self._outputs:
            self._outputs.remove(vid)
        self._fingerprint = None

    def set_phase(self, vid: int, phase: Phase) -> None:
        self._vertices[vid] = self._vertices[vid]._replace(phase=phase)
        self._fingerprint = None

    def set_boundaries(self, inputs: Sequence[int], outputs: Sequence[int]) -> None:
        self._inputs = list(inputs)
        self._outputs = list(outputs)
        self._fingerprint = None

    def copy(self) -> Diagram:
        other = Diagram()
        other._vertices = dict(self._vertices)
        other._edges = dict(self._edges)
        other._incidence = {v: list(es) for v, es in self._incidence.items()}
        other._inputs = list(self._inputs)
        other._outputs = list(self._outputs)
        other._next_vertex = self._next_vertex
        other._next_edge = self._next_edge
        other._fingerprint = self._fingerprint
        return other

    # queries

    @property
    def vertices(self) -> Dict[int, Vertex]:
        return dict(self._vertices)

    @property
    def edges(self) -> Dict[int, Tuple[int, int]]:
        return dict(self._edges)

    @property
    def inputs(self) -> Tuple[int, ...]:
        return tuple(self._inputs)

    @property
    def outputs(self) -> Tuple[int, ...]:
        return tuple(self._outputs)

    @property
    def arity(self) -> Tuple[int, int]:
        return len(self._inputs), len(self._outputs)

    @property
    def next_vertex_id(self) -> int:
        return self._next_vertex

    @property
    def boundary_count(self) -> int:
        return len(self._inputs) + len(self._outputs)

    def vertex(self, vid: int) -> Vertex:
        return self._vertices[vid]

    def kind(self, vid: int) -> VertexType:
        return self._vertices[vid].kind

    def phase(self, vid: int) -> Phase:
        return self._vertices[vid].phase

    def edge(self, eid: int) -> Tuple[int, int]:
        return self._edges[eid]

    def has_vertex(self, vid: int) -> bool:
        return vid in self._vertices

    def vertex_ids(self) -> List[int]:
        return sorted(self._vertices)

    def edge_ids(self) -> List[int]:
        return sorted(self._edges)

    def interior(self) -> List[int]:
        return sorted(v for v, vx in self._vertices.items() if vx.kind != VertexType.BOUNDARY)

    def incident_edges(self, vid: int) -> List[int]:
        return sorted(self._incidence[vid])

    def half_edges(self, vid: int) -> List[HalfEdge]:
        """Half-edges at a vertex, sorted; a self-loop contributes both ends."""
        out: List[HalfEdge] = []
        for eid in self._incidence[vid]:
            a, b = self._edges[eid]
            if a == vid:
                out.append((eid, 0))
            if b == vid:
                out.append((eid, 1))
        return sorted(out)

    def degree(self, vid: int) -> int:
        return len(self.half_edges(vid))

    def self_loops(self, vid: int) -> int:
        return sum(1 for eid in self._incidence[vid] if self._edges[eid] == (vid, vid))

    def neighbours(self, vid: int) -> List[int]:
        """Neighbour ids with multiplicity (self-loops excluded), sorted."""
        out = []
        for eid in self._incidence[vid]:
            a, b = self._edges[eid]
            if a != b:
                out.append(b if a == vid else a)
        return sorted(out)

    def edges_between(self, u: int, v: int) -> List[int]:
        return sorted(eid for eid in self._incidence[u] if set(self._edges[eid]) == {u, v})

    def other_end(self, half: HalfEdge) -> HalfEdge:
        return half[0], 1 - half[1]

    def endpoint(self, half: HalfEdge) -> int:
        return self._edges[half[0]][half[1]]

    def iter_edges(self) -> Iterator[Tuple[int, int, int]]:
        for eid in sorted(self._edges):
            a, b = self._edges[eid]
            yield eid, a, b

    # invariants

    def validate(self) -> None:
        """Raise DiagramInvariantError unless every structural invariant holds."""
        boundaries = {v for v, vx in self._vertices.items() if vx.kind == VertexType.BOUNDARY}
        listed = self._inputs + self._outputs
        if len(set(listed)) != len(listed):
            raise DiagramInvariantError("A boundary vertex appears twice in the boundary lists")
        if set(listed) != boundaries:
            raise DiagramInvariantError(
                f"Boundary lists {sorted(listed)} do not match boundary vertices {sorted(boundaries)}"
            )
        for eid, (a, b) in self._edges.items():
            if a not in self._vertices or b not in self._vertices:
                raise DiagramInvariantError(f"Edge {eid} references an undeclared vertex")
        for vid, vx in self._vertices.items():
            deg = self.degree(vid)
            if vx.kind == VertexType.H and deg != 2:
                raise DiagramInvariantError(f"H vertex {vid} has degree {deg}, expected 2")
            if vx.kind == VertexType.BOUNDARY and (deg != 1 or self.self_loops(vid)):
                raise DiagramInvariantError(f"Boundary vertex {vid} has degree {deg}, expected 1")

    # identity

    def fingerprint(self) -> str:
        """Exact structural key (ids included); used to detect stale matches."""
        if self._fingerprint is None:
            h = hashlib.sha256()
            for vid in sorted(self._vertices):
                vx = self._vertices[vid]
                h.update(f"v{vid}:{vx.kind.value}:{vx.phase};".encode())
            for eid in sorted(self._edges):
                a, b = self._edges[eid]
                h.update(f"e{eid}:{a}-{b};".encode())
            h.update(f"i{self._inputs}o{self._outputs}".encode())
            self._fingerprint = h.hexdigest()
        return self._fingerprint

    def __repr__(self) -> str:
        n_in, n_out = self.arity
        return f"<Diagram {n_in}→{n_out}: {len(self.interior())} interior, {len(self._edges)} edges>"
