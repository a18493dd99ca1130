"""
Shared fixtures and diagram builders for the zxcc test-suite.
"""
import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings, strategies as st

ROOT = Path(__file__).resolve().parent.parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from config import Settings  # noqa: E402
from models import Diagram, VertexType  # noqa: E402
from services.circuit_service import CircuitBuilder  # noqa: E402
from services.diagram_service import DiagramService  # noqa: E402
from services.rewrite_service import RuleBook  # noqa: E402
from utils.phase import Phase  # noqa: E402

settings.register_profile("zxcc", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("zxcc")

QUARTER_PHASES = [f"{n}/4" for n in range(8)]


@pytest.fixture
def config(tmp_path) -> Settings:
    return Settings(fixtures_dir=tmp_path / "fixtures" / "v1", trace_dir=tmp_path / "traces")


@pytest.fixture(scope="session")
def book() -> RuleBook:
    return RuleBook.default()


@pytest.fixture
def fixtures_dir() -> Path:
    return ROOT / "fixtures" / "v1"


def chain(kinds_and_phases) -> Diagram:
    """1→1 diagram: a line of spiders between one input and one output."""
    d = Diagram()
    prev = d.add_boundary(True)
    for kind, phase in kinds_and_phases:
        v = d.add_vertex(kind, phase)
        d.add_edge(prev, v)
        prev = v
    out = d.add_boundary(False)
    d.add_edge(prev, out)
    d.validate()
    return d


# Gates on two wires: (name, *args) tuples replayed onto a CircuitBuilder.
# "bend" closes both wires into a cap and reopens them from a cup; "scalar" and
# "dumbbell" add a component with no boundary. Their phases avoid π, so no
# generated diagram evaluates to zero.
NONZERO_PHASES = [p for p in QUARTER_PHASES if p != "4/4"]

gate = st.one_of(
    st.tuples(st.just("z"), st.integers(1, 2), st.sampled_from(QUARTER_PHASES)),
    st.tuples(st.just("x"), st.integers(1, 2), st.sampled_from(QUARTER_PHASES)),
    st.tuples(st.just("h"), st.integers(1, 2)),
    st.tuples(st.just("cnot"), st.permutations([1, 2])),
    st.tuples(st.just("bend")),
    st.tuples(st.just("scalar"), st.sampled_from(NONZERO_PHASES)),
    st.tuples(st.just("dumbbell"), st.sampled_from(QUARTER_PHASES)),
)


def cup_cap() -> Diagram:
    """2→2 diagram whose inputs meet in a cap and whose outputs leave from a cup."""
    d = Diagram()
    i1, i2 = d.add_boundary(True), d.add_boundary(True)
    o1, o2 = d.add_boundary(False), d.add_boundary(False)
    d.add_edge(i1, i2)
    d.add_edge(o1, o2)
    d.validate()
    return d


def closed(kind: str, phase: str) -> Diagram:
    """0→0 diagram: a lone Z spider, or a Z spider wired to a phase-free X spider."""
    d = Diagram()
    z = d.add_vertex(VertexType.Z, Phase.parse(phase))
    if kind == "dumbbell":
        d.add_edge(z, d.add_vertex(VertexType.X))
    d.validate()
    return d


def circuit(gates, wires: int = 2) -> Diagram:
    parts, extras = [], []
    b = CircuitBuilder(wires)
    for g in gates:
        if g[0] == "z":
            b.z_phase(g[1], g[2])
        elif g[0] == "x":
            b.x_phase(g[1], g[2])
        elif g[0] == "h":
            b.h(g[1])
        elif g[0] == "cnot":
            b.cnot(*g[1])
        elif g[0] == "bend":
            parts += [b.build(), cup_cap()]
            b = CircuitBuilder(wires)
        else:
            extras.append(closed(*g))
    d = DiagramService.compose_all(parts + [b.build()])
    for extra in extras:
        d = DiagramService.tensor(d, extra)
    return d


circuits = st.lists(gate, min_size=0, max_size=6).map(circuit)
