"""Command line interface for disfluency-mapper."""

import functools
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import click

from . import __version__
from .__main__ import configure_logging
from .config import Config, load_config
from .core.align import (
    DifferenceOptions,
    difference_rate,
    read_alignments,
    write_alignments,
)
from .core.exceptions import (
    DisfluencyMapperError,
    EmptyCorpusError,
    UnsatisfiableConstraintsError,
)
from .core.ingest import (
    merge_conversations,
    parse_source,
    parse_target,
    read_canonical,
    write_canonical,
)
from .core.metrics import PRF, ip_prf, labels_by_unit, reparandum_prf, unlabeled_units
from .core.model import Conversation
from .interfaces import TerminalInterface, reports
from .pipeline import CorpusPipeline

EXIT_INPUT = 2
EXIT_UNSATISFIABLE = 3

_path = click.Path(path_type=Path)
_existing_file = click.Path(exists=True, dir_okay=False, path_type=Path)


def _config_option(command: Callable) -> Callable:
    return click.option(
        "--config",
        "config_path",
        type=_existing_file,
        default=None,
        help="Flat key=value configuration file",
    )(command)


def _workers_option(command: Callable) -> Callable:
    return click.option(
        "--workers", type=click.IntRange(min=1), default=None, help="Worker processes"
    )(command)


def _resolve(config_path: Optional[Path], **overrides: Any) -> Config:
    cfg = load_config(config_path, overrides=overrides)
    configure_logging(cfg.log_level)
    return cfg


def _handle_errors(command: Callable) -> Callable:
    """Map domain errors onto exit codes with an error panel on stderr."""

    @functools.wraps(command)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        terminal = TerminalInterface()
        try:
            return command(terminal, *args, **kwargs)
        except UnsatisfiableConstraintsError as e:
            terminal.show_error(str(e))
            sys.exit(EXIT_UNSATISFIABLE)
        except (DisfluencyMapperError, OSError) as e:
            terminal.show_error(str(e))
            sys.exit(EXIT_INPUT)

    return wrapper


def _input_files(path: Path) -> List[Path]:
    if path.is_file():
        return [path]
    files = (p for p in path.iterdir() if p.is_file())
    return sorted(p for p in files if not p.name.startswith("."))


def _summarize(terminal: TerminalInterface, conversations: List[Conversation]) -> None:
    units = sum(len(c.units) for c in conversations)
    tokens = sum(c.token_count for c in conversations)
    terminal.show_summary_line(units, tokens)


@click.group()
@click.version_option(version=__version__)
def cli():
    """Disfluency Mapper

    Transfers hand-annotated disfluency labels from an original transcript
    onto a careful re-transcription of the same speech, and measures how
    transcription errors relate to disfluencies.
    """
    pass


@cli.command()
@click.option(
    "--source",
    "source_dir",
    type=click.Path(exists=True, path_type=Path),
    help="Directory (or file) of bracket-annotated transcripts",
)
@click.option(
    "--target",
    "target_dir",
    type=click.Path(exists=True, path_type=Path),
    help="Directory (or file) of word-per-line transcripts",
)
@click.option("--out", type=_path, required=True, help="Canonical records output")
@_config_option
@_handle_errors
def parse(terminal, source_dir, target_dir, out, config_path):
    """Parse transcripts into canonical records."""
    if (source_dir is None) == (target_dir is None):
        raise click.UsageError("exactly one of --source or --target is required")
    cfg = _resolve(config_path)
    table = cfg.convention_table()
    directory = source_dir if source_dir is not None else target_dir
    files = _input_files(directory)
    if not files:
        terminal.show_warning(f"No input files in {directory}")

    if source_dir is not None:
        conversations = [parse_source(path, table=table) for path in files]
        conversations = sorted(conversations, key=lambda c: c.id)
    else:
        conversations = merge_conversations(
            [parse_target(path, table=table) for path in files], origins=files
        )

    with open(out, "w", encoding="utf-8", newline="\n") as handle:
        write_canonical(conversations, handle)
    terminal.show_status(f"Wrote {len(conversations)} conversations to {out}", "green")
    _summarize(terminal, conversations)


def _difference_variants(pipeline: CorpusPipeline, alignments) -> Dict[str, Any]:
    cfg = pipeline.config
    variants = {
        "configured": cfg.difference_options,
        "plain": DifferenceOptions(),
        "split_contractions": DifferenceOptions(split_contractions=True),
        "exclude_single_phone_fragments": DifferenceOptions(
            exclude_single_phone_fragments=True,
            single_phone_max_graphemes=cfg.single_phone_max_graphemes,
        ),
    }
    rates: Dict[str, Any] = {}
    for name, options in variants.items():
        try:
            rates[name] = difference_rate(alignments, options, pipeline.table).as_dict()
        except EmptyCorpusError:
            rates[name] = None
    return rates


@cli.command()
@click.option("--source", "source_file", type=_existing_file, required=True)
@click.option("--target", "target_file", type=_existing_file, required=True)
@click.option("--out", type=_path, required=True, help="Alignment TSV output")
@click.option("--report", type=_path, default=None, help="Difference-rate JSON report")
@click.option("--audit", type=_path, default=None, help="Boundary reassignment audit")
@_config_option
@_workers_option
@_handle_errors
def align(terminal, source_file, target_file, out, report, audit, config_path, workers):
    """Pair target words with source units and write word alignments."""
    cfg = _resolve(config_path, workers=workers)
    pipeline = CorpusPipeline(cfg)
    sources = read_canonical(source_file, pipeline.table)
    targets = read_canonical(target_file, pipeline.table)
    outcomes = pipeline.pair(sources, targets)

    rows = [(key, a) for outcome in outcomes for key, a in outcome.alignments.items()]
    with open(out, "w", encoding="utf-8", newline="") as handle:
        written = write_alignments(rows, handle)
    terminal.show_status(f"Wrote {written} alignment records to {out}", "green")
    if audit is not None:
        reports.write_audit(audit, (e for outcome in outcomes for e in outcome.audit))
    if report is not None:
        rates = _difference_variants(pipeline, [a for _, a in rows])
        payload = {"config": cfg.as_report_dict(), "difference": rates}
        reports.write_json(report, payload)
        if rates["configured"] is not None:
            terminal.show_key_values("Word difference rate", rates["configured"])
    _summarize(terminal, [outcome.conversation for outcome in outcomes])


@cli.command(name="map")
@click.option("--source", "source_file", type=_existing_file, required=True)
@click.option("--target", "target_file", type=_existing_file, required=True)
@click.option("--alignments", "alignments_file", type=_existing_file, default=None)
@click.option("--out", type=_path, required=True, help="Silver records output")
@click.option("--trace", type=_path, default=None, help="Decode trace (JSON lines)")
@click.option("--audit", type=_path, default=None, help="Boundary reassignment audit")
@_config_option
@_workers_option
@_handle_errors
def map_command(
    terminal,
    source_file,
    target_file,
    alignments_file,
    out,
    trace,
    audit,
    config_path,
    workers,
):
    """Project source disfluency labels onto the target transcript."""
    cfg = _resolve(config_path, workers=workers)
    pipeline = CorpusPipeline(cfg)
    sources = read_canonical(source_file, pipeline.table)
    targets = read_canonical(target_file, pipeline.table)
    alignments = None
    if alignments_file is not None:
        alignments = read_alignments(alignments_file, pipeline.table)
    outcomes = pipeline.map(sources, targets, alignments)

    silver = [outcome.conversation for outcome in outcomes]
    with open(out, "w", encoding="utf-8", newline="\n") as handle:
        write_canonical(silver, handle)
    if trace is not None:
        reports.write_traces(trace, (t for outcome in outcomes for t in outcome.traces))
    if audit is not None:
        reports.write_audit(audit, (e for outcome in outcomes for e in outcome.audit))

    decoded = sum(outcome.decoded_units for outcome in outcomes)
    terminal.show_status(f"Decoded {decoded} edited units", "green")
    _summarize(terminal, silver)
    failures = [f for outcome in outcomes for f in outcome.failures]
    if failures:
        terminal.show_failures(failures)
        sys.exit(EXIT_UNSATISFIABLE)


@cli.command()
@click.option("--silver", "silver_file", type=_existing_file, required=True)
@click.option("--alignments", "alignments_file", type=_existing_file, required=True)
@click.option("--report", "report_dir", type=_path, required=True, help="Output dir")
@click.option(
    "--source",
    "source_file",
    type=_existing_file,
    default=None,
    help="Source records, for source-side token rates",
)
@_config_option
@_workers_option
@_handle_errors
def analyze(
    terminal,
    silver_file,
    alignments_file,
    report_dir,
    source_file,
    config_path,
    workers,
):
    """Compute word-error and disfluency statistics."""
    cfg = _resolve(config_path, workers=workers)
    pipeline = CorpusPipeline(cfg)
    silver = read_canonical(silver_file, pipeline.table)
    alignments = read_alignments(alignments_file, pipeline.table)
    source = read_canonical(source_file, pipeline.table) if source_file else None

    report = pipeline.analyze(silver, alignments, source)
    written = report.write(report_dir)
    if report.pmi is not None:
        terminal.show_table(
            f"Disfluency type vs. error category (log base {report.pmi.base})",
            reports.PMI_COLUMNS,
            reports.pmi_rows(report.pmi),
        )
    terminal.show_status(f"Wrote {len(written)} report files to {report_dir}", "green")
    _summarize(terminal, silver)


@cli.command(name="eval")
@click.option("--gold", "gold_file", type=_existing_file, required=True)
@click.option("--pred", "pred_file", type=_existing_file, required=True)
@click.option("--report", type=_path, required=True, help="Metrics JSON report")
@click.option(
    "--alignments",
    "alignments_file",
    type=_existing_file,
    default=None,
    help="Alignments of pred words onto gold words, for interruption-point projection",
)
@_config_option
@_handle_errors
def eval_command(terminal, gold_file, pred_file, report, alignments_file, config_path):
    """Score predicted labels against gold labels."""
    cfg = _resolve(config_path)
    table = cfg.convention_table()
    gold_conversations = read_canonical(gold_file, table)
    pred_conversations = read_canonical(pred_file, table)
    skipped = unlabeled_units(gold_conversations) | unlabeled_units(pred_conversations)
    if skipped:
        terminal.show_warning(f"Skipping {len(skipped)} unlabeled units")
    gold = labels_by_unit(gold_conversations, skip=skipped)
    pred = labels_by_unit(pred_conversations, skip=skipped)

    reparandum: Optional[PRF] = None
    if alignments_file is not None:
        released = read_alignments(alignments_file, table)
        alignments = {
            f"{conv}/{speaker}/{index}": alignment
            for (conv, speaker, index), alignment in released.items()
        }
        ip = ip_prf(gold, pred, alignments)
    else:
        reparandum = reparandum_prf(gold, pred)
        ip = ip_prf(gold, pred)

    payload = {
        "config": cfg.as_report_dict(),
        "units": len(gold),
        "unlabeled_units": len(skipped),
        "reparandum": reparandum.as_dict() if reparandum is not None else None,
        "interruption_points": ip.as_dict(),
    }
    reports.write_json(report, payload)
    if reparandum is not None:
        terminal.show_key_values("Reparandum words", reparandum.as_dict())
    terminal.show_key_values("Interruption points", ip.as_dict())


@cli.command()
@click.option("--env", "as_env", is_flag=True, help="Print as a key=value config file")
@_config_option
@_handle_errors
def config(terminal, as_env, config_path):
    """Show current configuration."""
    cfg = _resolve(config_path)
    if as_env:
        click.echo(cfg.to_env_text(), nl=False)
        return
    terminal.show_key_values("⚙️ Current Configuration", vars(cfg))


if __name__ == "__main__":
    cli()
