"""
Pydantic schemas for the JSON documents zxcc reads and writes.
"""
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

from models import Direction, ObligationStatus, SimprocKind


# Diagram schemas
class VertexFile(BaseModel):
    kind: str
    phase: str = "0"

    @field_validator("phase", mode="before")
    @classmethod
    def phase_as_string(cls, v: Any) -> Any:
        return "0" if v is None else str(v)

    @field_validator("kind")
    @classmethod
    def known_kind(cls, v: str) -> str:
        if v not in ("Z", "X", "H", "B"):
            raise ValueError(f"unknown vertex kind {v!r}")
        return v


class DiagramFile(BaseModel):
    model_config = ConfigDict(extra="forbid")

    inputs: List[str] = Field(default_factory=list)
    outputs: List[str] = Field(default_factory=list)
    vertices: Dict[str, VertexFile] = Field(default_factory=dict)
    edges: List[List[str]] = Field(default_factory=list)

    @field_validator("inputs", "outputs", mode="before")
    @classmethod
    def ids_as_strings(cls, v: Any) -> Any:
        return [str(x) for x in v] if isinstance(v, list) else v

    @field_validator("edges", mode="before")
    @classmethod
    def edge_pairs(cls, v: Any) -> Any:
        if not isinstance(v, list):
            return v
        for pair in v:
            if not isinstance(pair, (list, tuple)) or len(pair) != 2:
                raise ValueError(f"edge {pair!r} is not a pair")
        return [[str(a), str(b)] for a, b in v]


# Rule schemas
class BoxFile(BaseModel):
    vertices: List[str]
    max: Optional[int] = None
    min: int = 0

    @field_validator("vertices", mode="before")
    @classmethod
    def ids_as_strings(cls, v: Any) -> Any:
        return [str(x) for x in v] if isinstance(v, list) else v


class RuleFile(BaseModel):
    name: str
    lhs: DiagramFile
    rhs: DiagramFile
    boundary_map: List[List[str]] = Field(default_factory=list)
    boxes: List[BoxFile] = Field(default_factory=list)
    vars: List[str] = Field(default_factory=list)

    @field_validator("boundary_map", mode="before")
    @classmethod
    def pairs_as_strings(cls, v: Any) -> Any:
        return [[str(a), str(b)] for a, b in v] if isinstance(v, list) else v


# Proof trace schemas
class MatchRecord(BaseModel):
    vertices: Dict[str, int] = Field(default_factory=dict)
    edges: Dict[str, List[int]] = Field(default_factory=dict)
    boundary: Dict[str, List[int]] = Field(default_factory=dict)
    phases: Dict[str, str] = Field(default_factory=dict)
    counts: List[int] = Field(default_factory=list)


class TraceStep(BaseModel):
    rule: str
    dir: Direction = Direction.FWD
    match: MatchRecord
    post: str


class ProofTraceFile(BaseModel):
    """Digest of the start, one entry per rewrite step and the final diagram.

    Match ids refer to the diagram the trace was recorded on. Ids may shift when that
    diagram is reloaded or rebuilt; replay then finds each step again by its digest.
    """

    initial: str
    steps: List[TraceStep] = Field(default_factory=list)
    final: DiagramFile


# Simproc schema
class SimprocNode(BaseModel):
    kind: SimprocKind
    rules: List[str] = Field(default_factory=list)
    children: List["SimprocNode"] = Field(default_factory=list)


SimprocNode.model_rebuild()


# Report schemas
class SoundnessCase(BaseModel):
    counts: List[int]
    phases: Dict[str, str]
    holds: bool
    witness: Optional[str] = None


class SoundnessReport(BaseModel):
    rule: str
    passed: bool
    instances: int
    counterexamples: List[SoundnessCase] = Field(default_factory=list)


class CertifiedStep(BaseModel):
    index: int
    rule: str
    dir: Direction
    holds: bool
    witness: Optional[str] = None
    before: Optional[List[List[str]]] = None
    after: Optional[List[List[str]]] = None


class CertificationReport(BaseModel):
    passed: bool
    steps: List[CertifiedStep] = Field(default_factory=list)

    @property
    def failing(self) -> List[CertifiedStep]:
        return [s for s in self.steps if not s.holds]


class ObligationReport(BaseModel):
    obligation: str
    status: ObligationStatus
    witness: Optional[Any] = None
    trace: Optional[str] = None
    details: Dict[str, Any] = Field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.status == ObligationStatus.PASS

    def line(self) -> Dict[str, Any]:
        """Report JSON line with the four public keys."""
        return {
            "obligation": self.obligation,
            "status": self.status.value,
            "witness": self.witness,
            "trace": self.trace,
        }
