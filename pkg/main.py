"""
Command line entry point for zxcc.
"""
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import click

from config import settings as default_settings
from exceptions import StepBudgetExceeded, ZXError
from models import Direction
from services.colour_code_service import ColourCodeService
from services.diagram_service import DiagramService
from services.rewrite_service import RewriteService, RuleBook
from services.semantics_service import SemanticsService
from services.simproc_service import BUILTINS, SimprocService
from services.verification_service import OBLIGATIONS, STATUS_MARK, VerificationService, run_all

logger = logging.getLogger(__name__)

EMITTERS = {
    "enc": lambda config: ColourCodeService.build_enc(),
    "dec": lambda config: ColourCodeService.build_dec(),
    "cnot-l": lambda config: ColourCodeService.cnot_logical(2, 3),
    "cnot-p": lambda config: VerificationService.physical_cnot(config),
    "ccz-l": lambda config: ColourCodeService.ccz_logical(),
    "ccz-p": lambda config: ColourCodeService.ccz_physical(),
}

existing_file = click.Path(exists=True, dir_okay=False, path_type=Path)
output_file = click.Path(dir_okay=False, path_type=Path)


class ZXGroup(click.Group):
    """Group mapping library errors to their exit codes."""

    def invoke(self, ctx: click.Context):
        try:
            return super().invoke(ctx)
        except ZXError as e:
            logger.error(f"❌ {type(e).__name__}: {e}")
            ctx.exit(e.exit_code)


def _emit_json(doc) -> None:
    click.echo(json.dumps(doc, sort_keys=True))


def _print_rows(rows: Sequence[Sequence[str]]) -> None:
    width = max((len(s) for row in rows for s in row), default=0)
    for row in rows:
        click.echo("  ".join(s.rjust(width) for s in row))


@click.group(cls=ZXGroup)
@click.option("--step-budget", type=click.IntRange(min=1), help="Maximum rewrite steps per strategy run.")
@click.option("--box-max", type=click.IntRange(min=0), help="Default upper bound on box copies.")
@click.option("--dimension-cap", type=click.IntRange(min=1), help="Largest tensor size the evaluator may build.")
@click.option("--certify-max-wires", type=click.IntRange(min=0), help="Boundary bound for certification.")
@click.option("--workers", type=click.IntRange(min=1), help="Parallel obligations in code verify.")
@click.option("--rules-dir", type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--fixtures-dir", type=click.Path(file_okay=False, path_type=Path))
@click.option("--trace-dir", type=click.Path(file_okay=False, path_type=Path), help="Write obligation traces here.")
@click.option("--log-level", type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False))
@click.pass_context
def cli(ctx: click.Context, log_level: Optional[str], **overrides) -> None:
    """Exact ZX-diagram evaluation, certified rewriting and [[8,3,2]] code verification."""
    config = default_settings.with_overrides(log_level=log_level.upper() if log_level else None, **overrides)
    logging.basicConfig(
        level=getattr(logging, config.log_level),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )
    ctx.obj = config


@cli.command("eval")
@click.argument("path", type=existing_file)
@click.option("--matrix", "mode", flag_value="matrix", default=True, help="Print the matrix row by row.")
@click.option("--json", "mode", flag_value="json", help="Print the matrix as a JSON document.")
@click.option("--float", "as_float", is_flag=True, help="Evaluate in double precision.")
@click.pass_obj
def eval_command(config, path: Path, mode: str, as_float: bool) -> None:
    """Print the linear map of the diagram in PATH."""
    d = DiagramService.load(path)
    m = SemanticsService.evaluate(d, exact=False if as_float else None, config=config)
    rows = m.format_rows()
    if mode == "json":
        _emit_json({"rows": m.rows, "cols": m.cols, "exact": not as_float and SemanticsService.is_exact(d),
                    "entries": rows})
    else:
        _print_rows(rows)


@cli.command("check-prop")
@click.argument("first", type=existing_file)
@click.argument("second", type=existing_file)
@click.pass_context
def check_prop(ctx: click.Context, first: Path, second: Path) -> None:
    """Exit 0 iff the two diagrams are equal up to a non-zero scalar."""
    config = ctx.obj
    holds, witness = SemanticsService.diagrams_proportional(
        DiagramService.load(first), DiagramService.load(second), config
    )
    if holds:
        click.echo(f"proportional: {witness}")
    else:
        click.echo("not proportional")
        ctx.exit(1)


@cli.command("simp")
@click.argument("path", type=existing_file)
@click.option("--proc", default="basic_simp", show_default=True, type=click.Choice(sorted(BUILTINS)))
@click.option("-o", "--output", type=output_file, required=True)
@click.option("--trace", "trace_path", type=output_file, help="Also write the proof trace.")
@click.option("--max-steps", type=click.IntRange(min=1))
@click.pass_obj
def simp(config, path: Path, proc: str, output: Path, trace_path: Optional[Path], max_steps: Optional[int]) -> None:
    """Run a built-in strategy on PATH and save the result."""
    d = DiagramService.load(path)
    try:
        result, trace = SimprocService.run(proc, d, max_steps=max_steps, config=config)
    except StepBudgetExceeded as e:
        if trace_path is not None and e.trace is not None:
            SimprocService.save_trace(e.trace, trace_path)
            logger.warning(f"⚠️ Partial trace written to {trace_path}")
        raise
    DiagramService.save(result, output)
    if trace_path is not None:
        SimprocService.save_trace(trace, trace_path)
    click.echo(f"{len(trace.steps)} steps: {result!r}")


@cli.command("replay")
@click.argument("trace_path", type=existing_file)
@click.option("--initial", type=existing_file, required=True, help="Diagram the trace starts from.")
@click.option("--certify", "with_certificate", is_flag=True, help="Check every step semantically.")
@click.option("-o", "--output", type=output_file, help="Write the replayed final diagram.")
@click.pass_context
def replay(ctx: click.Context, trace_path: Path, initial: Path, with_certificate: bool, output: Optional[Path]) -> None:
    """Re-apply a proof trace, checking each step's digest."""
    config = ctx.obj
    trace = SimprocService.load_trace(trace_path)
    d = DiagramService.load(initial)
    final = SimprocService.replay(trace, d, config=config)
    if output is not None:
        DiagramService.save(final, output)
    click.echo(f"replayed {len(trace.steps)} steps: {DiagramService.digest(final)}")
    if with_certificate:
        report = SimprocService.certify(trace, d, config=config)
        click.echo(f"certified: {report.passed}")
        if not report.passed:
            ctx.exit(1)


@cli.command("certify")
@click.argument("trace_path", type=existing_file)
@click.option("--initial", type=existing_file, required=True)
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
def certify(ctx: click.Context, trace_path: Path, initial: Path, as_json: bool) -> None:
    """Replay a trace and evaluate both sides of every step."""
    report = SimprocService.certify(
        SimprocService.load_trace(trace_path), DiagramService.load(initial), config=ctx.obj
    )
    if as_json:
        _emit_json(report.model_dump(mode="json"))
    else:
        for step in report.steps:
            mark = "✅" if step.holds else "❌"
            click.echo(f"{mark} {step.index:4d} {step.rule} ({step.dir.value}) {step.witness or ''}".rstrip())
    if not report.passed:
        ctx.exit(1)


@cli.command("rules-check")
@click.option("--arity", type=click.IntRange(min=0), help="Largest box instantiation to check.")
@click.option("--rule", "rule_names", multiple=True, help="Check only these rules.")
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
def rules_check(ctx: click.Context, arity: Optional[int], rule_names: Sequence[str], as_json: bool) -> None:
    """Check every rule file semantically on small instantiations."""
    config = ctx.obj
    book = RuleBook.load(config.rules_dir, config)
    rules = [book.get(n, Direction.FWD) for n in rule_names] if rule_names else list(book)
    failed = False
    for rule in rules:
        report = RewriteService.check_soundness(rule, arity, config.sample_phases, config)
        failed = failed or not report.passed
        if as_json:
            _emit_json(report.model_dump(mode="json"))
        else:
            mark = "✅" if report.passed else "❌"
            click.echo(f"{mark} {rule.name}: {report.instances} instances")
            for case in report.counterexamples:
                click.echo(f"    counts={case.counts} phases={case.phases}")
    if failed:
        ctx.exit(1)


@cli.group("code", cls=ZXGroup)
def code() -> None:
    """Diagrams and proof obligations of the [[8,3,2]] colour code."""


@code.command("emit")
@click.argument("kind", type=click.Choice(sorted(EMITTERS)))
@click.option("-o", "--output", type=output_file, required=True)
@click.pass_obj
def emit(config, kind: str, output: Path) -> None:
    """Write one of the code's diagrams as JSON."""
    d = EMITTERS[kind](config)
    DiagramService.save(d, output)
    click.echo(f"{kind}: {d!r}")


@code.command("verify")
@click.option("--all", "run_every", is_flag=True, help="Run every obligation (the default).")
@click.option("--prop", "props", multiple=True, type=click.Choice(sorted(OBLIGATIONS)))
@click.option("--json", "as_json", is_flag=True, help="One JSON line per obligation.")
@click.pass_context
def verify(ctx: click.Context, run_every: bool, props: Sequence[str], as_json: bool) -> None:
    """Run proof obligations.

    Exits 0 when every one passes, 3 when one ran out of resources and 1 otherwise.
    """
    if run_every and props:
        raise click.UsageError("--all and --prop are mutually exclusive")
    reports = run_all(None if run_every else props, ctx.obj)
    for report in reports:
        if as_json:
            _emit_json(report.line())
        else:
            witness = f" witness={report.witness}" if report.witness is not None else ""
            click.echo(f"{STATUS_MARK[report.status]} {report.obligation}: {report.status.value}{witness}")
    failed = [r for r in reports if not r.passed]
    if failed:
        ctx.exit(max(r.details.get("exit_code", 1) for r in failed))


if __name__ == "__main__":
    cli()
