"""
Diagram service: construction, composition and comparison of ZX diagrams.
"""
import hashlib
import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import networkx as nx
from pydantic import ValidationError

from exceptions import ArityMismatchError, DiagramFormatError
from models import Diagram, VertexType
from schemas import DiagramFile, VertexFile
from utils.phase import Phase, PhaseLike

logger = logging.getLogger(__name__)

# Symbols accepted for single-wire product states.
STATE_SYMBOLS = ("0", "1", "+", "-")


class DiagramService:
    """Service for building, combining and comparing diagrams."""

    # basic diagrams

    @staticmethod
    def identity(n: int) -> Diagram:
        """n bare wires."""
        d = Diagram()
        ins = [d.add_boundary(True) for _ in range(n)]
        outs = [d.add_boundary(False) for _ in range(n)]
        for i, o in zip(ins, outs):
            d.add_edge(i, o)
        return d

    @staticmethod
    def spider(kind: VertexType, phase: PhaseLike = 0, n_in: int = 1, n_out: int = 1) -> Diagram:
        """A single Z, X or H vertex with its legs attached to boundaries."""
        if kind == VertexType.H and (n_in, n_out) != (1, 1):
            raise ArityMismatchError(f"H must have arity (1, 1), got ({n_in}, {n_out})")
        d = Diagram()
        ins = [d.add_boundary(True) for _ in range(n_in)]
        v = d.add_vertex(kind, Phase.parse(phase))
        outs = [d.add_boundary(False) for _ in range(n_out)]
        for b in ins + outs:
            d.add_edge(b, v)
        return d

    @staticmethod
    def state(symbol: str) -> Diagram:
        """0→1 diagram proportional to |0⟩, |1⟩, |+⟩ or |−⟩ (factor √2)."""
        if symbol not in STATE_SYMBOLS:
            raise ArityMismatchError(f"Unknown basis symbol {symbol!r}")
        kind = VertexType.X if symbol in "01" else VertexType.Z
        phase = 1 if symbol in ("1", "-") else 0
        return DiagramService.spider(kind, phase, 0, 1)

    @staticmethod
    def permutation(perm: Sequence[int]) -> Diagram:
        """Wire permutation sending input i to output perm[i] (0-based)."""
        if sorted(perm) != list(range(len(perm))):
            raise ArityMismatchError(f"{list(perm)} is not a permutation")
        d = Diagram()
        ins = [d.add_boundary(True) for _ in perm]
        outs = [d.add_boundary(False) for _ in perm]
        for i, target in enumerate(perm):
            d.add_edge(ins[i], outs[target])
        return d

    # monoidal structure

    @staticmethod
    def _merge(a: Diagram, b: Diagram) -> Tuple[Diagram, Dict[int, int]]:
        """Disjoint union of a and b; returns the union and b's id relabelling."""
        out = a.copy()
        offset = a.next_vertex_id
        relabel = {v: v + offset for v in b.vertex_ids()}
        for v in b.vertex_ids():
            vx = b.vertex(v)
            out.add_vertex(vx.kind, vx.phase, vid=relabel[v])
        for _, x, y in b.iter_edges():
            out.add_edge(relabel[x], relabel[y])
        return out, relabel

    @staticmethod
    def compose(first: Diagram, second: Diagram) -> Diagram:
        """Plug the outputs of ``first`` into the inputs of ``second``."""
        n_out, m_in = first.arity[1], second.arity[0]
        if n_out != m_in:
            logger.error(f"Cannot compose: {n_out} outputs against {m_in} inputs")
            raise ArityMismatchError(
                f"Arity mismatch: first has {n_out} outputs, second has {m_in} inputs"
            )
        out, relabel = DiagramService._merge(first, second)
        joins = list(zip(first.outputs, (relabel[v] for v in second.inputs)))
        for o, j in joins:
            (eo,), (ej,) = out.incident_edges(o), out.incident_edges(j)
            x = out.edge(eo)[1] if out.edge(eo)[0] == o else out.edge(eo)[0]
            y = out.edge(ej)[1] if out.edge(ej)[0] == j else out.edge(ej)[0]
            out.remove_vertex(o)
            out.remove_vertex(j)
            if x != j:
                out.add_edge(x, y)
            else:
                # a cup meeting a cap closes into a loop, worth the scalar 2
                out.add_vertex(VertexType.Z)
        out.set_boundaries(first.inputs, [relabel[v] for v in second.outputs])
        out.validate()
        return out

    @staticmethod
    def tensor(a: Diagram, b: Diagram) -> Diagram:
        """Side-by-side composition; a's wires come first."""
        out, relabel = DiagramService._merge(a, b)
        out.set_boundaries(
            list(a.inputs) + [relabel[v] for v in b.inputs],
            list(a.outputs) + [relabel[v] for v in b.outputs],
        )
        out.validate()
        return out

    @staticmethod
    def tensor_all(parts: Sequence[Diagram]) -> Diagram:
        result = Diagram()
        for part in parts:
            result = DiagramService.tensor(result, part)
        return result

    @staticmethod
    def compose_all(parts: Sequence[Diagram]) -> Diagram:
        result = parts[0]
        for part in parts[1:]:
            result = DiagramService.compose(result, part)
        return result

    @staticmethod
    def adjoint(d: Diagram) -> Diagram:
        """Mirror the diagram: swap inputs and outputs and negate every phase."""
        out = d.copy()
        for v in out.interior():
            if out.kind(v).is_spider:
                out.set_phase(v, -out.phase(v))
        out.set_boundaries(d.outputs, d.inputs)
        return out

    @staticmethod
    def colour_swap(d: Diagram) -> Diagram:
        """Exchange Z and X spiders, keeping phases."""
        out = Diagram()
        for v in d.vertex_ids():
            vx = d.vertex(v)
            out.add_vertex(vx.kind.dual(), vx.phase, vid=v)
        for _, x, y in d.iter_edges():
            out.add_edge(x, y)
        out.set_boundaries(d.inputs, d.outputs)
        return out

    # comparison

    @staticmethod
    def to_graph(d: Diagram) -> nx.Graph:
        """Simple labelled graph: multiplicities on edges, loops and boundary slots on nodes."""
        g = nx.Graph()
        slots = {v: f"in{i}" for i, v in enumerate(d.inputs)}
        slots.update({v: f"out{i}" for i, v in enumerate(d.outputs)})
        for v in d.vertex_ids():
            vx = d.vertex(v)
            if vx.kind == VertexType.BOUNDARY:
                label = f"B:{slots.get(v, '?')}"
            else:
                label = f"{vx.kind.value}:{vx.phase}:{d.self_loops(v)}"
            g.add_node(v, label=label)
        for _, x, y in d.iter_edges():
            if x == y:
                continue
            if g.has_edge(x, y):
                g[x][y]["mult"] = str(int(g[x][y]["mult"]) + 1)
            else:
                g.add_edge(x, y, mult="1")
        return g

    @staticmethod
    def iso_equal(a: Diagram, b: Diagram) -> bool:
        """Syntactic equality up to renaming of vertices."""
        if a.arity != b.arity or len(a.vertex_ids()) != len(b.vertex_ids()) or len(a.edge_ids()) != len(b.edge_ids()):
            return False
        ga, gb = DiagramService.to_graph(a), DiagramService.to_graph(b)
        return nx.is_isomorphic(
            ga, gb,
            node_match=lambda x, y: x["label"] == y["label"],
            edge_match=lambda x, y: x["mult"] == y["mult"],
        )

    @staticmethod
    def digest(d: Diagram) -> str:
        """Relabelling-invariant hash of a diagram."""
        g = DiagramService.to_graph(d)
        head = f"{d.arity[0]}:{d.arity[1]}:{g.number_of_nodes()}:{len(d.edge_ids())}"
        if g.number_of_nodes() == 0:
            body = "empty"
        else:
            body = nx.weisfeiler_lehman_graph_hash(g, node_attr="label", edge_attr="mult", iterations=4)
        return hashlib.sha256(f"{head}|{body}".encode()).hexdigest()[:32]

    # serialization

    @staticmethod
    def from_file(doc: DiagramFile) -> Diagram:
        """Build a diagram from its JSON document."""
        keys = list(doc.vertices)
        if all(k.lstrip("-").isdigit() for k in keys):
            ids = {k: int(k) for k in keys}
        else:
            ids = {k: i for i, k in enumerate(keys)}
        d = Diagram()
        for key, spec in doc.vertices.items():
            try:
                phase = Phase.parse(spec.phase)
            except ValueError as e:
                raise DiagramFormatError(f"Vertex {key}: {e}") from e
            d.add_vertex(VertexType(spec.kind), phase, vid=ids[key])
        for a, b in doc.edges:
            if a not in ids or b not in ids:
                raise DiagramFormatError(f"Edge [{a}, {b}] references an undeclared vertex")
            d.add_edge(ids[a], ids[b])
        for key in doc.inputs + doc.outputs:
            if key not in ids:
                raise DiagramFormatError(f"Boundary {key} is not a declared vertex")
        d.set_boundaries([ids[k] for k in doc.inputs], [ids[k] for k in doc.outputs])
        d.validate()
        return d

    @staticmethod
    def to_file(d: Diagram) -> DiagramFile:
        vertices = {}
        for v in d.vertex_ids():
            vx = d.vertex(v)
            vertices[str(v)] = VertexFile(kind=vx.kind.value, phase=str(vx.phase))
        return DiagramFile(
            inputs=[str(v) for v in d.inputs],
            outputs=[str(v) for v in d.outputs],
            vertices=vertices,
            edges=[[str(x), str(y)] for _, x, y in d.iter_edges()],
        )

    @staticmethod
    def to_dict(d: Diagram) -> Dict:
        data = DiagramService.to_file(d).model_dump()
        for spec in data["vertices"].values():
            if spec["phase"] == "0":
                del spec["phase"]
        return data

    @staticmethod
    def dumps(d: Diagram) -> str:
        return json.dumps(DiagramService.to_dict(d), indent=2)

    @staticmethod
    def loads(text: str, source: Optional[str] = None) -> Diagram:
        where = f" in {source}" if source else ""
        try:
            doc = DiagramFile.model_validate_json(text)
        except ValidationError as e:
            logger.error(f"Invalid diagram document{where}: {e.error_count()} error(s)")
            raise DiagramFormatError(f"Invalid diagram document{where}: {e}") from e
        return DiagramService.from_file(doc)

    @staticmethod
    def load(path: Union[str, Path]) -> Diagram:
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as e:
            raise DiagramFormatError(f"Cannot read diagram {path}: {e}") from e
        return DiagramService.loads(text, source=str(path))

    @staticmethod
    def save(d: Diagram, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(DiagramService.dumps(d) + "\n", encoding="utf-8")
        logger.debug(f"Wrote diagram {d!r} to {path}")
        return path

    @staticmethod
    def bare_wires(d: Diagram) -> List[Tuple[int, int]]:
        """Pairs (input position, output position) joined directly by an edge."""
        pos_in = {v: i for i, v in enumerate(d.inputs)}
        pos_out = {v: i for i, v in enumerate(d.outputs)}
        pairs = []
        for _, x, y in d.iter_edges():
            if x in pos_in and y in pos_out:
                pairs.append((pos_in[x], pos_out[y]))
            elif y in pos_in and x in pos_out:
                pairs.append((pos_in[y], pos_out[x]))
        return sorted(pairs)
