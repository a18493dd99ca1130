"""
Simproc service: strategy combinators over rewrite rules and certified proof traces.
"""
import logging
from pathlib import Path
from typing import Callable, Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple, Union

from pydantic import ValidationError

from config import Settings, settings as default_settings
from exceptions import (
    DiagramFormatError,
    ResourceLimitError,
    RuleError,
    SearchExhaustedError,
    StaleMatchError,
    StepBudgetExceeded,
    TraceReplayError,
)
from models import Diagram, Direction, SimprocKind
from schemas import CertificationReport, CertifiedStep, MatchRecord, ProofTraceFile, SimprocNode, TraceStep
from services.diagram_service import DiagramService
from services.rewrite_service import Match, RewriteRule, RewriteService, RuleBook
from services.semantics_service import SemanticsService

logger = logging.getLogger(__name__)

# Rule references in a simproc may name the inverted rule as "~name".
INVERTED_PREFIX = "~"

PHASE_FREE_RULES = [
    "green_sp", "red_sp", "green_id", "red_id", "green_elim", "red_elim", "green_loop", "red_loop",
    "green_scalar", "red_scalar", "hopf", "green_copy", "red_copy", "gen_bialg_simp",
]
PAULI_X_RULES = [
    "red_copy", "red_sp", "green_sp", "hopf", "red_scalar", "green_scalar",
    "green_id", "red_id", "red_loop", "green_loop",
]
# Rules an expansion step is followed by before reducing again.
FOLLOW_UP_RULES = ["gen_bialg_simp", "hopf", "red_copy", "green_copy"]


# strategy builders

def rewrite(rule: str) -> SimprocNode:
    return SimprocNode(kind=SimprocKind.REWRITE, rules=[rule])


def reduce(rule: str) -> SimprocNode:
    return SimprocNode(kind=SimprocKind.REDUCE, rules=[rule])


def reduce_all(rules: Sequence[str]) -> SimprocNode:
    return SimprocNode(kind=SimprocKind.REDUCE_ALL, rules=list(rules))


def loop(body: SimprocNode) -> SimprocNode:
    return SimprocNode(kind=SimprocKind.LOOP, children=[body])


def seq(*children: SimprocNode) -> SimprocNode:
    return SimprocNode(kind=SimprocKind.SEQ, children=list(children))


def dual_rule_name(name: str) -> str:
    """Colour-swapped counterpart of a rule name."""
    prefix = ""
    if name.startswith(INVERTED_PREFIX):
        prefix, name = INVERTED_PREFIX, name[1:]
    if name.startswith("red_") or name.startswith("green_"):
        head, _, tail = name.partition("_")
        swapped = {"red": "green", "green": "red"}[head]
        tail = {"to_green": "to_red", "to_red": "to_green"}.get(tail, tail)
        return f"{prefix}{swapped}_{tail}"
    return prefix + {"euler": "euler2", "euler2": "euler"}.get(name, name)


def dual(node: SimprocNode) -> SimprocNode:
    return SimprocNode(
        kind=node.kind,
        rules=[dual_rule_name(r) for r in node.rules],
        children=[dual(c) for c in node.children],
    )


def _push_pauli_x() -> SimprocNode:
    return loop(seq(reduce_all(PAULI_X_RULES), rewrite("red_pi_lemma"), reduce("red_sp")))


BUILTINS: Dict[str, Callable[[], SimprocNode]] = {
    "basic_simp": lambda: reduce_all([r for r in PHASE_FREE_RULES if r != "gen_bialg_simp"]),
    "reduce_phase_free": lambda: loop(reduce_all(PHASE_FREE_RULES)),
    "push_pauli_x": _push_pauli_x,
    "push_pauli_z": lambda: dual(_push_pauli_x()),
    "circuit_simp": lambda: seq(reduce_all(["red_h_leaf", "green_h_leaf", "h_cancel"]), loop(reduce_all(PHASE_FREE_RULES))),
}


class _Run:
    """Mutable state of one simproc execution.

    Matches touching a ``frozen`` vertex are never applied.
    """

    def __init__(self, d: Diagram, book: RuleBook, max_steps: int) -> None:
        self.diagram = d
        self.book = book
        self.max_steps = max_steps
        self.frozen: FrozenSet[int] = frozenset()
        self.initial = DiagramService.digest(d)
        self.steps: List[TraceStep] = []

    def trace(self) -> ProofTraceFile:
        return ProofTraceFile(initial=self.initial, steps=list(self.steps), final=DiagramService.to_file(self.diagram))

    def rule(self, ref: str) -> RewriteRule:
        if ref.startswith(INVERTED_PREFIX):
            return self.book.get(ref[1:], Direction.REV)
        return self.book.get(ref)

    def first(self, rule: RewriteRule) -> Optional[Match]:
        if not self.frozen:
            return RewriteService.first_match(rule, self.diagram)
        for match in RewriteService.all_matches(rule, self.diagram):
            if self.frozen.isdisjoint(match.vertex_map.values()):
                return match
        return None

    def step(self, rule: RewriteRule) -> bool:
        """Apply the first match of ``rule``; False when there is none."""
        match = self.first(rule)
        if match is None:
            return False
        self.record(match, RewriteService.apply(match, self.diagram))
        return True

    def record(self, match: Match, result: Diagram) -> None:
        if len(self.steps) >= self.max_steps:
            logger.error(f"Step budget of {self.max_steps} exhausted at rule {match.rule.name}")
            raise StepBudgetExceeded(f"Step budget of {self.max_steps} exceeded", trace=self.trace())
        self.diagram = result
        self.steps.append(TraceStep(
            rule=match.rule.name,
            dir=match.rule.direction,
            match=match.to_record(),
            post=DiagramService.digest(result),
        ))

    def execute(self, node: SimprocNode) -> int:
        before = len(self.steps)
        if node.kind == SimprocKind.REWRITE:
            self.step(self.rule(node.rules[0]))
        elif node.kind == SimprocKind.REDUCE:
            rule = self.rule(node.rules[0])
            while self.step(rule):
                pass
        elif node.kind == SimprocKind.REDUCE_ALL:
            rules = [self.rule(r) for r in node.rules]
            progress = True
            while progress:
                progress = False
                for rule in rules:
                    while self.step(rule):
                        progress = True
        elif node.kind == SimprocKind.LOOP:
            while self.execute(node.children[0]):
                pass
        elif node.kind == SimprocKind.SEQ:
            for child in node.children:
                self.execute(child)
        return len(self.steps) - before


class ScriptedRun(_Run):
    """A run steered by hand: each rewrite names the vertices its match must cover."""

    def __init__(self, d: Diagram, book: Optional[RuleBook] = None, config: Optional[Settings] = None) -> None:
        config = config or default_settings
        super().__init__(d, book or RuleBook.default(config), config.step_budget)

    def at(self, name: str, *vertices: int, direction: Direction = Direction.FWD) -> List[int]:
        """Apply ``name`` on exactly ``vertices``; returns the ids of the vertices it creates."""
        matches = RewriteService.matches_on(self.book.get(name, direction), self.diagram, vertices)
        if not matches:
            raise SearchExhaustedError(f"{name} does not match on vertices {sorted(vertices)}")
        before = set(self.diagram.vertex_ids())
        self.record(matches[0], RewriteService.apply(matches[0], self.diagram))
        return sorted(set(self.diagram.vertex_ids()) - before)

    def simp(self, proc: str, frozen: Iterable[int] = ()) -> int:
        """Run a builtin strategy without touching the ``frozen`` vertices; returns the step count."""
        self.frozen = frozenset(frozen)
        try:
            return self.execute(SimprocService.builtin(proc))
        finally:
            self.frozen = frozenset()


class SimprocService:
    """Service for running strategies and checking the proofs they produce."""

    @staticmethod
    def builtin(name: str) -> SimprocNode:
        try:
            return BUILTINS[name]()
        except KeyError:
            raise RuleError(f"Unknown simproc {name!r}; known: {', '.join(sorted(BUILTINS))}") from None

    @staticmethod
    def run(
        simproc: Union[SimprocNode, str],
        d: Diagram,
        max_steps: Optional[int] = None,
        book: Optional[RuleBook] = None,
        config: Optional[Settings] = None,
    ) -> Tuple[Diagram, ProofTraceFile]:
        """Run a strategy, returning the result and the trace of every step."""
        config = config or default_settings
        node = SimprocService.builtin(simproc) if isinstance(simproc, str) else simproc
        state = _Run(d, book or RuleBook.default(config), max_steps or config.step_budget)
        state.execute(node)
        logger.info(f"Simproc finished after {len(state.steps)} steps: {state.diagram!r}")
        return state.diagram, state.trace()

    @staticmethod
    def concat(first: ProofTraceFile, second: ProofTraceFile) -> ProofTraceFile:
        if first.steps and first.steps[-1].post != second.initial:
            raise TraceReplayError("Traces do not chain", step=len(first.steps))
        return ProofTraceFile(initial=first.initial, steps=first.steps + second.steps, final=second.final)

    @staticmethod
    def invert(trace: ProofTraceFile, d: Diagram, book: Optional[RuleBook] = None,
               config: Optional[Settings] = None) -> Tuple[Diagram, ProofTraceFile]:
        """The trace read backwards, recorded from ``d``; returns the diagram it ends on with it.

        ``d`` must have the digest the trace ends on. Each step is undone by the rule of
        the opposite direction with the step's phases and counts, at a match whose result
        has the digest the step started from.
        """
        config = config or default_settings
        book = book or RuleBook.default(config)
        digests = [trace.initial] + [s.post for s in trace.steps]
        if DiagramService.digest(d) != digests[-1]:
            raise TraceReplayError("Diagram does not match the end of the trace", step=len(trace.steps))
        state = _Run(d, book, max(len(trace.steps), 1))
        for index in range(len(trace.steps), 0, -1):
            step = trace.steps[index - 1]
            opposite = Direction.REV if step.dir == Direction.FWD else Direction.FWD
            try:
                rule = book.get(step.rule, opposite)
            except RuleError as e:
                raise TraceReplayError(f"Step {index}: {e}", step=index) from e
            found = SimprocService.search_step(rule, step.match, state.diagram, digests[index - 1])
            if found is None:
                logger.error(f"Step {index} ({step.rule}) cannot be undone")
                raise TraceReplayError(f"Step {index} ({step.rule}, {step.dir.value}) cannot be undone", step=index)
            state.record(*found)
        return state.diagram, state.trace()

    @staticmethod
    def rebase(trace: ProofTraceFile, d: Diagram, book: Optional[RuleBook] = None,
               config: Optional[Settings] = None) -> Tuple[Diagram, ProofTraceFile]:
        """The same steps re-recorded against the ids of ``d``, which has the trace's initial digest.

        Returns the diagram the steps end on together with the new trace.
        """
        config = config or default_settings
        book = book or RuleBook.default(config)
        if DiagramService.digest(d) != trace.initial:
            raise TraceReplayError("Initial diagram does not match the trace", step=0)
        state = _Run(d, book, max(len(trace.steps), 1))
        for index, step in enumerate(trace.steps, start=1):
            state.record(*SimprocService._resolve(step, state.diagram, book, index, quiet=True))
        return state.diagram, state.trace()

    # replay and certification

    @staticmethod
    def search_step(rule: RewriteRule, record: MatchRecord, d: Diagram, post: str) -> Optional[Tuple[Match, Diagram]]:
        """A match of ``rule`` with the record's phases and counts whose result has digest ``post``."""
        bound = RewriteService.substitute(rule, record.phases) if record.phases else rule
        inst = RewriteService.instantiate(bound, record.counts) if bound.boxes else bound
        for match in RewriteService.find_matches(inst, d, all_legs=True):
            result = RewriteService.apply(match, d)
            if DiagramService.digest(result) == post:
                return match, result
        return None

    @staticmethod
    def _resolve(step: TraceStep, d: Diagram, book: RuleBook, index: int, quiet: bool = False) -> Tuple[Match, Diagram]:
        try:
            rule = book.get(step.rule, step.dir)
        except RuleError as e:
            raise TraceReplayError(f"Step {index}: {e}", step=index) from e
        try:
            match = RewriteService.match_from_record(rule, d, step.match)
            result = RewriteService.apply(match, d)
            if DiagramService.digest(result) == step.post:
                return match, result
            reason = "its result has another digest"
        except StaleMatchError as e:
            reason = str(e)
        if quiet:
            logger.debug(f"Step {index} ({step.rule}): {reason}; searching")
        else:
            logger.warning(f"⚠️ Step {index} ({step.rule}): stored match does not apply ({reason}); searching by digest")
        found = SimprocService.search_step(rule, step.match, d, step.post)
        if found is None:
            logger.error(f"Step {index} ({step.rule}) does not reproduce digest {step.post}")
            raise TraceReplayError(
                f"Step {index} ({step.rule}, {step.dir.value}) does not reproduce its digest", step=index
            )
        return found

    @staticmethod
    def replay_step(step: TraceStep, d: Diagram, book: RuleBook, index: int) -> Diagram:
        """Re-apply one recorded step.

        A stored match names vertex and edge ids of the diagram the trace was recorded
        on. A diagram loaded from a file or built in another order may number its
        vertices differently; the step is then found again among all matches with the
        recorded phases and counts by the digest it must produce, and a warning is logged.
        """
        return SimprocService._resolve(step, d, book, index)[1]

    @staticmethod
    def replay(trace: ProofTraceFile, d: Diagram, book: Optional[RuleBook] = None,
               config: Optional[Settings] = None) -> Diagram:
        """Re-apply every step of ``trace`` starting from ``d``."""
        book = book or RuleBook.default(config)
        if DiagramService.digest(d) != trace.initial:
            raise TraceReplayError("Initial diagram does not match the trace", step=0)
        for index, step in enumerate(trace.steps, start=1):
            d = SimprocService.replay_step(step, d, book, index)
        final = DiagramService.from_file(trace.final)
        if DiagramService.digest(final) != DiagramService.digest(d):
            raise TraceReplayError("Replayed diagram differs from the recorded final diagram", step=len(trace.steps))
        return d

    @staticmethod
    def certify(trace: ProofTraceFile, d: Diagram, book: Optional[RuleBook] = None,
                config: Optional[Settings] = None) -> CertificationReport:
        """Replay the trace, checking that every step preserves the linear map up to scalar."""
        config = config or default_settings
        book = book or RuleBook.default(config)
        if DiagramService.digest(d) != trace.initial:
            return CertificationReport(passed=False, steps=[
                CertifiedStep(index=0, rule="initial", dir=Direction.FWD, holds=False)
            ])
        steps: List[CertifiedStep] = []
        for index, step in enumerate(trace.steps, start=1):
            if d.boundary_count > config.certify_max_wires:
                raise ResourceLimitError(
                    f"Step {index}: {d.boundary_count} boundary wires exceed the certification bound "
                    f"{config.certify_max_wires}"
                )
            try:
                after = SimprocService.replay_step(step, d, book, index)
            except TraceReplayError as e:
                logger.warning(str(e))
                steps.append(CertifiedStep(index=index, rule=step.rule, dir=step.dir, holds=False))
                return CertificationReport(passed=False, steps=steps)
            before_m = SemanticsService.evaluate(d, config=config)
            after_m = SemanticsService.evaluate(after, config=config)
            holds, witness = SemanticsService.proportional_equal(before_m, after_m, config.float_tolerance)
            entry = CertifiedStep(
                index=index, rule=step.rule, dir=step.dir, holds=holds,
                witness=str(witness) if witness is not None else None,
            )
            if not holds:
                entry.before = before_m.format_rows()
                entry.after = after_m.format_rows()
            steps.append(entry)
            d = after
        return CertificationReport(passed=all(s.holds for s in steps), steps=steps)

    # expansion search

    @staticmethod
    def expand_and_reduce(
        d: Diagram,
        goal: Diagram,
        proc: str = "reduce_phase_free",
        book: Optional[RuleBook] = None,
        config: Optional[Settings] = None,
    ) -> Tuple[Diagram, ProofTraceFile]:
        """Reduce ``d``; if it is not yet ``goal``, try one inverted-rule expansion.

        Each expansion is followed by one step of a follow-up rule touching a new
        vertex and a second reduction. Raises SearchExhaustedError when no attempt
        within ``expansion_limit`` reaches a diagram isomorphic to ``goal``.
        """
        config = config or default_settings
        book = book or RuleBook.default(config)
        reduced, trace = SimprocService.run(proc, d, book=book, config=config)
        if DiagramService.iso_equal(reduced, goal):
            return reduced, trace

        attempts = 0
        for name in config.expansion_candidates:
            expansion = book.get(name, Direction.REV)
            if any(len(e.variables) > 1 for e in expansion.lhs_phases.values()):
                expansion = RewriteService.substitute(expansion, {expansion.variables[0]: 0})
            for em in RewriteService.all_matches(expansion, reduced):
                expanded = RewriteService.apply(em, reduced)
                fresh = set(range(reduced.next_vertex_id, expanded.next_vertex_id))
                for follow in FOLLOW_UP_RULES:
                    for fm in RewriteService.all_matches(book.get(follow), expanded):
                        if not fresh & set(fm.vertex_map.values()):
                            continue
                        attempts += 1
                        if attempts > config.expansion_limit:
                            raise SearchExhaustedError(f"No expansion reached the goal within {config.expansion_limit} attempts")
                        stepped = RewriteService.apply(fm, expanded)
                        try:
                            final, tail = SimprocService.run(proc, stepped, book=book, config=config)
                        except StepBudgetExceeded:
                            continue
                        if DiagramService.iso_equal(final, goal):
                            logger.info(f"Goal reached by expanding with {name} and following with {follow}")
                            state = _Run(reduced, book, config.step_budget)
                            state.record(em, expanded)
                            state.record(fm, stepped)
                            middle = state.trace()
                            return final, SimprocService.concat(SimprocService.concat(trace, middle), tail)
        raise SearchExhaustedError(f"No single expansion reached the goal ({attempts} attempts)")

    # persistence

    @staticmethod
    def save_trace(trace: ProofTraceFile, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(trace.model_dump_json(indent=2) + "\n", encoding="utf-8")
        return path

    @staticmethod
    def load_trace(path: Union[str, Path]) -> ProofTraceFile:
        path = Path(path)
        try:
            return ProofTraceFile.model_validate_json(path.read_text(encoding="utf-8"))
        except OSError as e:
            raise DiagramFormatError(f"Cannot read trace {path}: {e}") from e
        except ValidationError as e:
            raise DiagramFormatError(f"Invalid trace {path}: {e}") from e
