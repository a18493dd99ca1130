"""
Rewrite service: directed rules with phase variables and repetition boxes,
matching against diagrams and application of matches.
"""
import itertools
import logging
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

from pydantic import ValidationError

from config import Settings, settings as default_settings
from exceptions import DiagramInvariantError, RuleError, StaleMatchError
from models import Diagram, Direction, HalfEdge, VertexType
from schemas import DiagramFile, MatchRecord, RuleFile, SoundnessCase, SoundnessReport
from services.semantics_service import SemanticsService
from utils.phase import Phase, PhaseExpr

logger = logging.getLogger(__name__)

Counts = Tuple[int, ...]


@dataclass(frozen=True)
class Box:
    """Repetition box: vertices on each side copied together 0..max times."""
    lhs: Tuple[int, ...]
    rhs: Tuple[int, ...]
    max: int
    min: int = 0

    def counts(self) -> range:
        return range(self.min, self.max + 1)

    def swapped(self) -> "Box":
        return Box(self.rhs, self.lhs, self.max, self.min)


class RewriteRule:
    """A directed equation between two diagrams with identified boundaries.

    Interior vertex phases live in ``lhs_phases``/``rhs_phases`` as expressions; the
    diagrams themselves only carry the constant parts.
    """

    def __init__(
        self,
        name: str,
        lhs: Diagram,
        rhs: Diagram,
        lhs_phases: Mapping[int, PhaseExpr],
        rhs_phases: Mapping[int, PhaseExpr],
        boundary_map: Mapping[int, int],
        boxes: Sequence[Box] = (),
        inverted: bool = False,
        bindings: Optional[Mapping[str, Phase]] = None,
        counts: Counts = (),
        leg_classes: Optional[Mapping[int, int]] = None,
    ) -> None:
        self.name = name
        self.lhs = lhs
        self.rhs = rhs
        self.lhs_phases: Dict[int, PhaseExpr] = dict(lhs_phases)
        self.rhs_phases: Dict[int, PhaseExpr] = dict(rhs_phases)
        self.boundary_map: Dict[int, int] = dict(boundary_map)
        self.boxes: Tuple[Box, ...] = tuple(boxes)
        self.inverted = inverted
        self.bindings: Dict[str, Phase] = dict(bindings or {})
        self.counts: Counts = tuple(counts)
        # LHS boundary copy -> the boundary vertex it was copied from
        self.leg_classes: Dict[int, int] = dict(leg_classes or {})
        self._instances: Dict[Counts, "RewriteRule"] = {}
        self._inverse: Optional["RewriteRule"] = None
        self._profile: Optional[Counter] = None

    @property
    def direction(self) -> Direction:
        return Direction.REV if self.inverted else Direction.FWD

    @property
    def variables(self) -> Tuple[str, ...]:
        names = set()
        for expr in list(self.lhs_phases.values()) + list(self.rhs_phases.values()):
            names.update(expr.variables)
        return tuple(sorted(names))

    @property
    def is_concrete(self) -> bool:
        return not self.boxes

    @property
    def lhs_boundary(self) -> List[int]:
        return list(self.lhs.inputs) + list(self.lhs.outputs)

    def profile(self) -> Counter:
        """(kind, degree) multiset of the LHS interior."""
        if self._profile is None:
            self._profile = Counter((self.lhs.kind(v), self.lhs.degree(v)) for v in self.lhs.interior())
        return self._profile

    def _key(self) -> Tuple:
        return (
            self.name, self.inverted, self.counts, self.lhs.fingerprint(), self.rhs.fingerprint(),
            tuple(sorted(self.lhs_phases.items())), tuple(sorted(self.rhs_phases.items())),
            tuple(sorted(self.boundary_map.items())), self.boxes, tuple(sorted(self.bindings.items())),
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RewriteRule):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self) -> int:
        return hash((self.name, self.inverted, self.counts))

    def __repr__(self) -> str:
        arrow = "<-" if self.inverted else "->"
        counts = f" {list(self.counts)}" if self.counts else ""
        return f"<RewriteRule {self.name} {arrow}{counts}>"


@dataclass
class Match:
    """An occurrence of a concrete rule's LHS in one particular diagram."""
    rule: RewriteRule
    target: Diagram
    fingerprint: str
    vertex_map: Dict[int, int]
    edge_map: Dict[int, int]
    boundary: Dict[int, HalfEdge]
    assignment: Dict[str, Phase]
    counts: Counts = ()
    consumed: Tuple[int, ...] = ()

    @property
    def target_vertices(self) -> Tuple[int, ...]:
        return tuple(sorted(self.vertex_map.values()))

    def sort_key(self) -> Tuple:
        return (
            self.target_vertices, tuple(sorted(self.consumed)), self.counts,
            tuple(sorted(self.vertex_map.items())), tuple(sorted(self.boundary.items())),
        )

    def to_record(self) -> MatchRecord:
        return MatchRecord(
            vertices={str(l): t for l, t in sorted(self.vertex_map.items())},
            edges={str(l): [t] for l, t in sorted(self.edge_map.items())},
            boundary={str(b): [h[0], h[1]] for b, h in sorted(self.boundary.items())},
            phases={var: str(p) for var, p in sorted(self.assignment.items())},
            counts=list(self.counts),
        )


class RewriteService:
    """Service for instantiating, matching and applying rewrite rules."""

    # loading

    @staticmethod
    def from_file(doc: RuleFile, config: Optional[Settings] = None) -> RewriteRule:
        """Build and validate a rule from its JSON document."""
        config = config or default_settings
        shared = set(doc.lhs.vertices) & set(doc.rhs.vertices)
        if shared:
            raise RuleError(f"Rule {doc.name}: vertex ids {sorted(shared)} used on both sides")
        ids = {key: i for i, key in enumerate(list(doc.lhs.vertices) + list(doc.rhs.vertices))}
        lhs, lhs_phases = RewriteService._side(doc.name, doc.lhs, ids)
        rhs, rhs_phases = RewriteService._side(doc.name, doc.rhs, ids)

        boundary_map = {}
        for l_key, r_key in doc.boundary_map:
            if l_key not in doc.lhs.vertices or r_key not in doc.rhs.vertices:
                raise RuleError(f"Rule {doc.name}: boundary pair [{l_key}, {r_key}] is not lhs→rhs")
            boundary_map[ids[l_key]] = ids[r_key]

        boxes = []
        for spec in doc.boxes:
            missing = [k for k in spec.vertices if k not in ids]
            if missing:
                raise RuleError(f"Rule {doc.name}: box references unknown vertices {missing}")
            upper = spec.max if spec.max is not None else config.box_max
            if not 0 <= spec.min <= upper:
                raise RuleError(f"Rule {doc.name}: box range [{spec.min}, {upper}] is empty")
            boxes.append(Box(
                lhs=tuple(ids[k] for k in spec.vertices if k in doc.lhs.vertices),
                rhs=tuple(ids[k] for k in spec.vertices if k in doc.rhs.vertices),
                max=upper,
                min=spec.min,
            ))

        rule = RewriteRule(doc.name, lhs, rhs, lhs_phases, rhs_phases, boundary_map, boxes)
        RewriteService.validate(rule)
        return rule

    @staticmethod
    def _side(name: str, doc: DiagramFile, ids: Dict[str, int]) -> Tuple[Diagram, Dict[int, PhaseExpr]]:
        d = Diagram()
        phases: Dict[int, PhaseExpr] = {}
        for key, spec in doc.vertices.items():
            try:
                expr = PhaseExpr.parse(spec.phase)
            except ValueError as e:
                raise RuleError(f"Rule {name}, vertex {key}: {e}") from e
            kind = VertexType(spec.kind)
            d.add_vertex(kind, expr.constant if expr.is_constant else Phase(0), vid=ids[key])
            if kind != VertexType.BOUNDARY:
                phases[ids[key]] = expr if kind != VertexType.H else PhaseExpr()
        for a, b in doc.edges:
            if a not in doc.vertices or b not in doc.vertices:
                raise RuleError(f"Rule {name}: edge [{a}, {b}] leaves its side")
            d.add_edge(ids[a], ids[b])
        for key in doc.inputs + doc.outputs:
            if key not in doc.vertices:
                raise RuleError(f"Rule {name}: boundary {key} is not declared on its side")
        d.set_boundaries([ids[k] for k in doc.inputs], [ids[k] for k in doc.outputs])
        return d, phases

    @staticmethod
    def validate(rule: RewriteRule) -> None:
        """Raise RuleError unless the rule is well formed."""
        try:
            rule.lhs.validate()
            rule.rhs.validate()
        except DiagramInvariantError as e:
            raise RuleError(f"Rule {rule.name}: {e}") from e
        lb, rb = set(rule.lhs_boundary), set(rule.rhs.inputs) | set(rule.rhs.outputs)
        if set(rule.boundary_map) != lb or sorted(rule.boundary_map.values()) != sorted(rb):
            raise RuleError(f"Rule {rule.name}: boundary_map is not a bijection between the two boundaries")
        for l, r in rule.boundary_map.items():
            if (l in rule.lhs.inputs) != (r in rule.rhs.inputs):
                raise RuleError(f"Rule {rule.name}: boundary pair ({l}, {r}) mixes an input with an output")
        lhs_vars = {v for e in rule.lhs_phases.values() for v in e.variables}
        rhs_vars = {v for e in rule.rhs_phases.values() for v in e.variables}
        if not rhs_vars <= lhs_vars | set(rule.bindings):
            raise RuleError(f"Rule {rule.name}: RHS variables {sorted(rhs_vars - lhs_vars)} do not occur on the LHS")
        for v, expr in rule.lhs_phases.items():
            if len(expr.variables) > 1:
                raise RuleError(f"Rule {rule.name}: LHS phase {expr} has more than one variable")
        for box in rule.boxes:
            for v in box.lhs:
                if rule.lhs_phases.get(v, PhaseExpr()).variables:
                    raise RuleError(f"Rule {rule.name}: boxed vertex {v} has a variable phase")
            for v in box.rhs:
                if rule.rhs_phases.get(v, PhaseExpr()).variables:
                    raise RuleError(f"Rule {rule.name}: boxed vertex {v} has a variable phase")
        for l, r in rule.boundary_map.items():
            for box in rule.boxes:
                if (l in box.lhs) != (r in box.rhs):
                    raise RuleError(f"Rule {rule.name}: boundary pair ({l}, {r}) crosses a box edge")

    # transformations

    @staticmethod
    def instantiate(rule: RewriteRule, counts: Sequence[int]) -> RewriteRule:
        """Expand every box ``counts[i]`` times on both sides."""
        counts = tuple(int(c) for c in counts)
        if not rule.boxes:
            if counts:
                raise RuleError(f"Rule {rule.name} has no boxes, got counts {list(counts)}")
            return rule
        if len(counts) != len(rule.boxes):
            raise RuleError(f"Rule {rule.name} has {len(rule.boxes)} boxes, got {len(counts)} counts")
        for i, (box, n) in enumerate(zip(rule.boxes, counts)):
            if n not in box.counts():
                raise RuleError(f"Rule {rule.name}: count {n} for box {i} outside [{box.min}, {box.max}]")
        cached = rule._instances.get(counts)
        if cached is not None:
            return cached

        lhs_member = {v: i for i, box in enumerate(rule.boxes) for v in box.lhs}
        rhs_member = {v: i for i, box in enumerate(rule.boxes) for v in box.rhs}
        lhs, lhs_phases, lhs_copies = RewriteService._expand(rule.lhs, rule.lhs_phases, lhs_member, counts)
        rhs, rhs_phases, rhs_copies = RewriteService._expand(rule.rhs, rule.rhs_phases, rhs_member, counts)
        boundary_map = {}
        for l, r in rule.boundary_map.items():
            boundary_map.update(zip(lhs_copies[l], rhs_copies[r]))

        inst = RewriteRule(
            rule.name, lhs, rhs, lhs_phases, rhs_phases, boundary_map,
            inverted=rule.inverted, bindings=rule.bindings, counts=counts,
            leg_classes={c: b for b in rule.lhs_boundary for c in lhs_copies[b]},
        )
        rule._instances[counts] = inst
        return inst

    @staticmethod
    def _expand(d: Diagram, phases: Mapping[int, PhaseExpr], member: Mapping[int, int],
                counts: Counts) -> Tuple[Diagram, Dict[int, PhaseExpr], Dict[int, List[int]]]:
        out = Diagram()
        copies: Dict[int, List[int]] = {}
        for v in d.vertex_ids():
            n = counts[member[v]] if v in member else 1
            vx = d.vertex(v)
            copies[v] = [out.add_vertex(vx.kind, vx.phase) for _ in range(n)]
        new_phases = {c: phases[v] for v in phases for c in copies[v]}
        for _, x, y in d.iter_edges():
            same_box = x in member and member.get(y) == member[x]
            pairs = zip(copies[x], copies[y]) if same_box else itertools.product(copies[x], copies[y])
            for a, b in pairs:
                out.add_edge(a, b)
        out.set_boundaries(
            [c for v in d.inputs for c in copies[v]],
            [c for v in d.outputs for c in copies[v]],
        )
        return out, new_phases, copies

    @staticmethod
    def invert(rule: RewriteRule) -> RewriteRule:
        """The same equation read right to left."""
        if rule._inverse is None:
            inverse = RewriteRule(
                rule.name, rule.rhs, rule.lhs, rule.rhs_phases, rule.lhs_phases,
                {r: l for l, r in rule.boundary_map.items()},
                [box.swapped() for box in rule.boxes],
                inverted=not rule.inverted, bindings=rule.bindings, counts=rule.counts,
            )
            inverse._inverse = rule
            rule._inverse = inverse
        return rule._inverse

    @staticmethod
    def oriented(rule: RewriteRule, direction: Direction) -> RewriteRule:
        return RewriteService.invert(rule) if direction == Direction.REV else rule

    @staticmethod
    def substitute(rule: RewriteRule, assignment: Mapping[str, Phase]) -> RewriteRule:
        """Fix some phase variables, e.g. to choose how an inverted fusion splits a phase."""
        bound = {k: Phase.parse(v) for k, v in assignment.items()}
        return RewriteRule(
            rule.name, rule.lhs, rule.rhs,
            {v: e.substitute(bound) for v, e in rule.lhs_phases.items()},
            {v: e.substitute(bound) for v, e in rule.rhs_phases.items()},
            rule.boundary_map, rule.boxes, rule.inverted, {**rule.bindings, **bound}, rule.counts,
            rule.leg_classes,
        )

    # matching

    @staticmethod
    def find_matches(rule: RewriteRule, target: Diagram, all_legs: bool = False) -> List[Match]:
        """All matches of a box-free rule, in canonical order."""
        if rule.boxes:
            raise RuleError(f"Rule {rule.name} must be instantiated before matching")
        lhs = rule.lhs
        interior = lhs.interior()
        if not interior:
            return RewriteService._wire_matches(rule, target)
        if any(lhs.kind(lhs.edge(e)[0]) == lhs.kind(lhs.edge(e)[1]) == VertexType.BOUNDARY for e in lhs.edge_ids()):
            logger.debug(f"Rule {rule.name}: bare wires beside interior vertices are not matched")
            return []

        order, anchors = RewriteService._search_order(lhs, interior)
        index: Dict[Tuple[VertexType, int], List[int]] = {}
        for t in target.interior():
            index.setdefault((target.kind(t), target.degree(t)), []).append(t)

        found: List[Match] = []
        vmap: Dict[int, int] = {}
        used = set()

        def extend(i: int, assignment: Dict[str, Phase]) -> None:
            if i == len(order):
                found.extend(RewriteService._complete(rule, target, dict(vmap), assignment, all_legs))
                return
            l = order[i]
            anchor = anchors[i]
            if anchor is None:
                candidates = index.get((lhs.kind(l), lhs.degree(l)), [])
            else:
                candidates = sorted(set(target.neighbours(vmap[anchor])))
            for t in candidates:
                if t in used or not RewriteService._feasible(lhs, target, l, t, vmap):
                    continue
                extended = rule.lhs_phases[l].unify(target.phase(t), assignment)
                if extended is None:
                    continue
                vmap[l] = t
                used.add(t)
                extend(i + 1, extended)
                del vmap[l]
                used.discard(t)

        extend(0, dict(rule.bindings))
        return RewriteService._canonical(found, all_legs)

    @staticmethod
    def _search_order(lhs: Diagram, interior: List[int]) -> Tuple[List[int], List[Optional[int]]]:
        """Breadth-first order over the LHS interior; each vertex anchored on an earlier neighbour."""
        inside = set(interior)
        order: List[int] = []
        anchors: List[Optional[int]] = []
        seen = set()
        for root in interior:
            if root in seen:
                continue
            seen.add(root)
            queue = [(root, None)]
            while queue:
                v, anchor = queue.pop(0)
                order.append(v)
                anchors.append(anchor)
                for w in lhs.neighbours(v):
                    if w in inside and w not in seen:
                        seen.add(w)
                        queue.append((w, v))
        return order, anchors

    @staticmethod
    def _feasible(lhs: Diagram, target: Diagram, l: int, t: int, vmap: Mapping[int, int]) -> bool:
        if target.kind(t) != lhs.kind(l) or target.degree(t) != lhs.degree(l):
            return False
        if lhs.self_loops(l) > target.self_loops(t):
            return False
        for l2, t2 in vmap.items():
            need = len(lhs.edges_between(l, l2))
            if need and len(target.edges_between(t, t2)) < need:
                return False
        return True

    @staticmethod
    def _leg_choices(legs: Sequence[int], halves: Sequence[HalfEdge],
                     classes: Mapping[int, int]) -> Iterator[Dict[int, HalfEdge]]:
        """Every way to attach ``legs`` to ``halves``, up to swapping copies of one boundary vertex."""
        groups: Dict[int, List[int]] = {}
        for b in legs:
            groups.setdefault(classes.get(b, b), []).append(b)
        members = list(groups.values())

        def place(i: int, remaining: List[HalfEdge]) -> Iterator[Dict[int, HalfEdge]]:
            if i == len(members):
                yield {}
                return
            group = members[i]
            for chosen in itertools.combinations(remaining, len(group)):
                rest = [h for h in remaining if h not in chosen]
                for tail in place(i + 1, rest):
                    yield {**dict(zip(group, chosen)), **tail}

        yield from place(0, list(halves))

    @staticmethod
    def _complete(rule: RewriteRule, target: Diagram, vmap: Dict[int, int],
                  assignment: Dict[str, Phase], all_legs: bool = False) -> List[Match]:
        """Fix the edge map and boundary attachments of a vertex embedding.

        By default the legs of each vertex take its free half-edges in order. With
        ``all_legs`` every distinct attachment is returned; inverted fusions need this
        to choose which legs stay on which spider.
        """
        lhs = rule.lhs
        taken = set()
        edge_map: Dict[int, int] = {}
        for eid, x, y in lhs.iter_edges():
            if x not in vmap or y not in vmap:
                continue
            tx, ty = vmap[x], vmap[y]
            pool = [e for e in target.edges_between(tx, ty) if e not in taken]
            edge_map[eid] = pool[0]
            taken.add(pool[0])

        position = {b: i for i, b in enumerate(rule.lhs_boundary)}
        wires: Dict[int, List[int]] = {}
        for b in rule.lhs_boundary:
            (eid,) = lhs.incident_edges(b)
            x, y = lhs.edge(eid)
            wires.setdefault(y if x == b else x, []).append(b)
        options: List[List[Dict[int, HalfEdge]]] = []
        for l, t in sorted(vmap.items()):
            leftover = [h for h in target.half_edges(t) if h[0] not in taken]
            legs = sorted(wires.get(l, []), key=position.get)
            if all_legs:
                options.append(list(RewriteService._leg_choices(legs, leftover, rule.leg_classes)))
            else:
                options.append([dict(zip(legs, leftover))])

        fp = target.fingerprint()
        matches = []
        for parts in itertools.product(*options):
            boundary: Dict[int, HalfEdge] = {}
            for part in parts:
                boundary.update(part)
            matches.append(Match(rule, target, fp, dict(vmap), dict(edge_map), boundary, dict(assignment), rule.counts))
        return matches

    @staticmethod
    def _wire_matches(rule: RewriteRule, target: Diagram) -> List[Match]:
        """A single bare wire matches every edge of the target."""
        if rule.lhs.boundary_count != 2 or len(rule.lhs.edge_ids()) != 1:
            return []
        b1, b2 = rule.lhs_boundary
        fp = target.fingerprint()
        return [
            Match(rule, target, fp, {}, {}, {b1: (eid, 1), b2: (eid, 0)}, dict(rule.bindings), rule.counts, (eid,))
            for eid in target.edge_ids()
        ]

    @staticmethod
    def _canonical(matches: Iterable[Match], all_legs: bool = False) -> List[Match]:
        """Sort, keeping one match per (vertex set, consumed edges, counts).

        With ``all_legs`` matches differing only in their boundary attachments are all kept.
        """
        seen = set()
        out = []
        for m in sorted(matches, key=Match.sort_key):
            key = (m.target_vertices, m.consumed, m.counts)
            if all_legs:
                key += (tuple(sorted(m.boundary.items())),)
            if key not in seen:
                seen.add(key)
                out.append(m)
        return out

    @staticmethod
    def _instantiations(rule: RewriteRule) -> Iterator[RewriteRule]:
        if not rule.boxes:
            yield rule
            return
        for counts in itertools.product(*(box.counts() for box in rule.boxes)):
            yield RewriteService.instantiate(rule, counts)

    @staticmethod
    def all_matches(rule: RewriteRule, target: Diagram, all_legs: bool = False) -> List[Match]:
        """Matches over every box instantiation whose interior profile fits the target."""
        if not rule.boxes:
            return RewriteService.find_matches(rule, target, all_legs)
        available = Counter((target.kind(t), target.degree(t)) for t in target.interior())
        found: List[Match] = []
        for inst in RewriteService._instantiations(rule):
            if any(available[key] < n for key, n in inst.profile().items()):
                continue
            found.extend(RewriteService.find_matches(inst, target, all_legs))
        return RewriteService._canonical(found, all_legs)

    @staticmethod
    def matches_on(rule: RewriteRule, target: Diagram, vertices: Iterable[int]) -> List[Match]:
        """Matches whose interior lands exactly on ``vertices``."""
        wanted = tuple(sorted(vertices))
        profile = Counter((target.kind(v), target.degree(v)) for v in wanted)
        found: List[Match] = []
        for inst in RewriteService._instantiations(rule):
            if inst.profile() == profile:
                found.extend(m for m in RewriteService.find_matches(inst, target) if m.target_vertices == wanted)
        return RewriteService._canonical(found)

    @staticmethod
    def first_match(rule: RewriteRule, target: Diagram) -> Optional[Match]:
        matches = RewriteService.all_matches(rule, target)
        return matches[0] if matches else None

    @staticmethod
    def match_from_record(rule: RewriteRule, target: Diagram, record: MatchRecord) -> Match:
        """Rebuild a stored match against ``target``; StaleMatchError if it no longer fits."""
        inst = RewriteService.instantiate(rule, record.counts) if rule.boxes else rule
        vmap = {int(k): v for k, v in record.vertices.items()}
        edge_map = {int(k): v[0] for k, v in record.edges.items()}
        boundary = {int(k): (v[0], v[1]) for k, v in record.boundary.items()}
        try:
            assignment = {**inst.bindings, **{k: Phase.parse(v) for k, v in record.phases.items()}}
        except ValueError as e:
            raise StaleMatchError(f"Match for {rule.name} has an unreadable phase: {e}") from e

        def stale(reason: str) -> StaleMatchError:
            return StaleMatchError(f"Stored match for {rule.name} does not fit: {reason}")

        lhs = inst.lhs
        if sorted(vmap) != lhs.interior() or len(set(vmap.values())) != len(vmap):
            raise stale("vertex map does not cover the LHS interior")
        for l, t in vmap.items():
            if not target.has_vertex(t) or target.kind(t) != lhs.kind(l) or target.degree(t) != lhs.degree(l):
                raise stale(f"vertex {t} does not look like LHS vertex {l}")
            try:
                if inst.lhs_phases[l].evaluate(assignment) != target.phase(t):
                    raise stale(f"phase of vertex {t} differs")
            except KeyError as e:
                raise stale(str(e)) from e
        edges = target.edges
        for l_eid, t_eid in edge_map.items():
            x, y = lhs.edge(l_eid)
            if t_eid not in edges or sorted(edges[t_eid]) != sorted((vmap[x], vmap[y])):
                raise stale(f"edge {t_eid} is not the image of LHS edge {l_eid}")
        if sorted(boundary) != sorted(inst.lhs_boundary):
            raise stale("boundary attachments do not cover the LHS boundary")
        for b, (eid, end) in boundary.items():
            if eid not in edges or end not in (0, 1):
                raise stale(f"half-edge ({eid}, {end}) does not exist")

        consumed: Tuple[int, ...] = ()
        if not vmap:
            consumed = (boundary[inst.lhs_boundary[0]][0],)
        else:
            for b, h in boundary.items():
                (eid,) = lhs.incident_edges(b)
                x, y = lhs.edge(eid)
                if target.endpoint(h) != vmap[y if x == b else x]:
                    raise stale(f"half-edge {h} is not at the image of its LHS vertex")
        return Match(inst, target, target.fingerprint(), vmap, edge_map, boundary, assignment, inst.counts, consumed)

    # application

    @staticmethod
    def apply(match: Match, diagram: Optional[Diagram] = None) -> Diagram:
        """Replace the matched subgraph by the instantiated RHS."""
        d = diagram if diagram is not None else match.target
        if d.fingerprint() != match.fingerprint:
            raise StaleMatchError(f"Match for {match.rule.name} was found on a different diagram")
        rule = match.rule
        order = rule.lhs_boundary

        # how each LHS boundary wire continues outside the match
        partner = {h: b for b, h in match.boundary.items()} if match.vertex_map else {}
        outside: Dict[int, Tuple[str, int]] = {}
        for b in order:
            far = d.other_end(match.boundary[b])
            outside[b] = ("b", partner[far]) if far in partner else ("v", d.endpoint(far))

        out = d.copy()
        for t in match.vertex_map.values():
            out.remove_vertex(t)
        for eid in match.consumed:
            out.remove_edge(eid)

        fresh: Dict[int, int] = {}
        for r in rule.rhs.interior():
            phase = rule.rhs_phases[r].evaluate(match.assignment)
            fresh[r] = out.add_vertex(rule.rhs.kind(r), phase)
        for _, x, y in rule.rhs.iter_edges():
            if x in fresh and y in fresh:
                out.add_edge(fresh[x], fresh[y])

        # how each LHS boundary wire continues inside the RHS
        back = {r: l for l, r in rule.boundary_map.items()}
        inside: Dict[int, Tuple[str, int]] = {}
        for b in order:
            r = rule.boundary_map[b]
            (eid,) = rule.rhs.incident_edges(r)
            x, y = rule.rhs.edge(eid)
            nxt = y if x == r else x
            inside[b] = ("v", fresh[nxt]) if nxt in fresh else ("b", back[nxt])

        visited = set()
        sides = {"out": outside, "in": inside}
        for b in order:
            for side in ("out", "in"):
                kind, start = sides[side][b]
                if kind != "v" or b in visited:
                    continue
                current, entered = b, side
                while True:
                    visited.add(current)
                    leave = "in" if entered == "out" else "out"
                    kind, ref = sides[leave][current]
                    if kind == "v":
                        out.add_edge(start, ref)
                        break
                    current, entered = ref, leave
        # wires left unvisited close into loops: scalars, dropped

        out.validate()
        return out

    @staticmethod
    def rewrite_first(rule: RewriteRule, d: Diagram) -> Optional[Tuple[Diagram, Match]]:
        match = RewriteService.first_match(rule, d)
        if match is None:
            return None
        return RewriteService.apply(match, d), match

    # soundness

    @staticmethod
    def concrete_side(d: Diagram, phases: Mapping[int, PhaseExpr], assignment: Mapping[str, Phase]) -> Diagram:
        out = d.copy()
        for v, expr in phases.items():
            if out.kind(v).is_spider:
                out.set_phase(v, expr.evaluate(assignment))
        return out

    @staticmethod
    def check_soundness(rule: RewriteRule, arity: Optional[int] = None,
                        phases: Optional[Sequence[Phase]] = None,
                        config: Optional[Settings] = None) -> SoundnessReport:
        """Evaluate both sides of every instantiation up to ``arity`` copies per box."""
        config = config or default_settings
        arity = config.soundness_arity if arity is None else arity
        phases = tuple(phases) if phases is not None else config.sample_phases
        free = [v for v in rule.variables if v not in rule.bindings]
        ranges = [range(box.min, max(box.min, min(box.max, arity)) + 1) for box in rule.boxes]

        instances = 0
        failures: List[SoundnessCase] = []
        for counts in itertools.product(*ranges):
            inst = RewriteService.instantiate(rule, counts)
            for values in itertools.product(phases, repeat=len(free)):
                assignment = {**rule.bindings, **dict(zip(free, values))}
                lhs = RewriteService.concrete_side(inst.lhs, inst.lhs_phases, assignment)
                rhs = RewriteService.concrete_side(inst.rhs, inst.rhs_phases, assignment)
                holds, witness = SemanticsService.proportional_equal(
                    SemanticsService.evaluate(lhs, config=config),
                    SemanticsService.evaluate(rhs, config=config),
                )
                instances += 1
                if not holds:
                    logger.warning(f"Rule {rule.name} fails at counts {list(counts)}, phases {assignment}")
                    failures.append(SoundnessCase(
                        counts=list(counts),
                        phases={k: str(v) for k, v in assignment.items()},
                        holds=False,
                    ))
        return SoundnessReport(rule=rule.name, passed=not failures, instances=instances, counterexamples=failures)


class RuleBook:
    """The rules of one rules directory, by name."""

    def __init__(self, rules: Mapping[str, RewriteRule]) -> None:
        self._rules = dict(rules)

    @classmethod
    def load(cls, directory: Optional[Union[str, Path]] = None, config: Optional[Settings] = None) -> "RuleBook":
        config = config or default_settings
        directory = Path(directory) if directory is not None else config.rules_dir
        rules: Dict[str, RewriteRule] = {}
        for path in sorted(directory.glob("*.json")):
            rule = cls.load_file(path, config)
            if rule.name in rules:
                raise RuleError(f"Rule {rule.name} defined twice (second copy in {path})")
            rules[rule.name] = rule
        logger.info(f"Loaded {len(rules)} rules from {directory}")
        return cls(rules)

    @staticmethod
    def load_file(path: Union[str, Path], config: Optional[Settings] = None) -> RewriteRule:
        path = Path(path)
        try:
            doc = RuleFile.model_validate_json(path.read_text(encoding="utf-8"))
        except OSError as e:
            raise RuleError(f"Cannot read rule file {path}: {e}") from e
        except ValidationError as e:
            raise RuleError(f"Invalid rule file {path}: {e}") from e
        return RewriteService.from_file(doc, config)

    @classmethod
    def default(cls, config: Optional[Settings] = None) -> "RuleBook":
        config = config or default_settings
        return _cached_book(str(config.rules_dir), config.box_max)

    def get(self, name: str, direction: Direction = Direction.FWD) -> RewriteRule:
        try:
            rule = self._rules[name]
        except KeyError:
            raise RuleError(f"Unknown rule {name!r}") from None
        return RewriteService.oriented(rule, direction)

    def names(self) -> List[str]:
        return sorted(self._rules)

    def __contains__(self, name: object) -> bool:
        return name in self._rules

    def __iter__(self) -> Iterator[RewriteRule]:
        return iter(self._rules[name] for name in self.names())

    def __len__(self) -> int:
        return len(self._rules)


@lru_cache(maxsize=8)
def _cached_book(directory: str, box_max: int) -> RuleBook:
    return RuleBook.load(directory, default_settings.with_overrides(box_max=box_max))
