"""Command-line audit pipeline: evaluate, simulate, report.

`evaluate` joins ranked runs, a label catalog and one or more target
sources, measures per-topic bias for every declared feature value at the
configured cutoff, and writes a deterministic report. `simulate` builds
synthetic fixture files with planted biases that `evaluate` measures back
exactly. `report` re-derives tables from an existing report document
without re-evaluating.

Exit codes: 0 success, 1 input error, 2 strict-mode violation.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from . import ingest
from .errors import (
    BiasLensError,
    EmptyPopulationError,
    InfeasibleSimulationError,
    ParseError,
    UnlabeledEntityError,
)
from .metrics import FeatureScheme, RankedRun, TargetCounts, bias_at_n, simulate_run
from .report import (
    EvaluatedTopic,
    Report,
    ReportMeta,
    SkippedTopic,
    build_report,
    emit_report,
    parse_report,
    rebuild_report,
)
from ._util import atomic_write, to_float

# Fixed default so repeated audits are comparable without a flag.
DEFAULT_SEED = 20191201
SEED_ENV_VAR = "BIASLENS_SEED"

SIMULATE_HEADER = ("topic_id", "target_ratio", "bias", "length", "population")


@dataclass
class AuditConfig:
    """Resolved settings: command-line flags > config file > environment > defaults."""

    cutoff: int = 10
    feature: str | None = None
    values: tuple[str, ...] = ()
    unknown_token: str = "unknown"
    strict: bool = False
    seed: int = DEFAULT_SEED
    fmt: str = "json"
    out: Path = Path("out")
    jobs: int = 1
    table_size: int = 11
    population_sd: bool = False
    runs: Path | None = None
    labels: Path | None = None
    targets: dict[str, Path] = field(default_factory=dict)
    members: dict[str, Path] = field(default_factory=dict)
    topic_var: str = "topic"
    entity_var: str = "entity"
    value_var: str = "value"

    def scheme(self) -> FeatureScheme:
        if not self.feature or not self.values:
            raise BiasLensError(
                "a feature and its values are required (--feature/--values or config)")
        return FeatureScheme(feature_name=self.feature, values=self.values,
                             unknown_token=self.unknown_token)


def parse_config_file(path: Path) -> dict[str, str]:
    """Read the flat key=value config format; '#' starts a comment line."""
    settings: dict[str, str] = {}
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read config: {exc.strerror}", path=str(path)) from None
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ParseError("expected key = value", path=str(path), line=line_no)
        key, _, value = stripped.partition("=")
        settings[key.strip()] = value.strip()
    return settings


def _parse_source_flags(entries: Sequence[str] | None, flag: str) -> dict[str, Path]:
    sources: dict[str, Path] = {}
    for entry in entries or ():
        label, sep, file_name = entry.partition("=")
        if not sep or not label.strip() or not file_name.strip():
            raise BiasLensError(f"{flag} expects LABEL=FILE, got {entry!r}")
        sources[label.strip()] = Path(file_name.strip())
    return sources


def _config_sources(settings: dict[str, str], prefix: str,
                    base: Path) -> dict[str, Path]:
    sources = {}
    for key, value in settings.items():
        if key.startswith(prefix + "."):
            label = key[len(prefix) + 1:]
            sources[label] = base / value
    return sources


def resolve_config(args: argparse.Namespace) -> AuditConfig:
    """Merge flags, the optional config file, the seed env var, and defaults."""
    settings: dict[str, str] = {}
    base = Path(".")
    if getattr(args, "config", None):
        config_path = Path(args.config)
        settings = parse_config_file(config_path)
        base = config_path.parent

    def pick(flag_value, key: str, convert, default):
        if flag_value is not None:
            return flag_value
        if key in settings:
            try:
                return convert(settings[key])
            except (ValueError, TypeError):
                raise BiasLensError(
                    f"config key {key!r} has invalid value {settings[key]!r}") from None
        return default

    def as_bool(text: str) -> bool:
        lowered = text.lower()
        if lowered in ("true", "yes", "1", "on"):
            return True
        if lowered in ("false", "no", "0", "off"):
            return False
        raise ValueError(text)

    seed_default = DEFAULT_SEED
    env_seed = os.environ.get(SEED_ENV_VAR)
    if env_seed is not None:
        try:
            seed_default = int(env_seed)
        except ValueError:
            raise BiasLensError(
                f"{SEED_ENV_VAR} must be an integer, got {env_seed!r}") from None

    raw_values = pick(getattr(args, "values", None), "values", str, None)
    config = AuditConfig(
        cutoff=pick(getattr(args, "cutoff", None), "cutoff", int, 10),
        feature=pick(getattr(args, "feature", None), "feature", str, None),
        values=tuple(v.strip() for v in raw_values.split(",")) if raw_values else (),
        unknown_token=pick(getattr(args, "unknown_token", None), "unknown_token",
                           str, "unknown"),
        strict=pick(True if getattr(args, "strict", False) else None, "strict",
                    as_bool, False),
        seed=pick(getattr(args, "seed", None), "seed", int, seed_default),
        fmt=pick(getattr(args, "format", None), "format", str, "json"),
        out=Path(pick(getattr(args, "out", None), "out", str, "out")),
        jobs=pick(getattr(args, "jobs", None), "jobs", int, 1),
        table_size=pick(getattr(args, "table_size", None), "table_size", int, 11),
        population_sd=pick(True if getattr(args, "population_sd", False) else None,
                           "population_sd", as_bool, False),
        topic_var=pick(None, "topic_var", str, "topic"),
        entity_var=pick(None, "entity_var", str, "entity"),
        value_var=pick(None, "value_var", str, "value"),
    )
    if config.cutoff < 1:
        raise BiasLensError(f"cutoff must be >= 1, got {config.cutoff}")
    if config.jobs < 1:
        raise BiasLensError(f"jobs must be >= 1, got {config.jobs}")
    if config.fmt not in ("json", "csv"):
        raise BiasLensError(f"format must be json or csv, got {config.fmt!r}")
    if config.table_size < 1:
        raise BiasLensError(f"table size must be >= 1, got {config.table_size}")

    runs_flag = getattr(args, "runs", None)
    labels_flag = getattr(args, "labels", None)
    config.runs = Path(runs_flag) if runs_flag else (
        base / settings["runs"] if "runs" in settings else None)
    config.labels = Path(labels_flag) if labels_flag else (
        base / settings["labels"] if "labels" in settings else None)
    flag_targets = _parse_source_flags(getattr(args, "target", None), "--target")
    flag_members = _parse_source_flags(getattr(args, "members", None), "--members")
    config.targets = flag_targets or _config_sources(settings, "target", base)
    config.members = flag_members or _config_sources(settings, "members", base)
    overlap = sorted(set(config.targets) & set(config.members))
    if overlap:
        raise BiasLensError(
            f"source labels used for both --target and --members: {', '.join(overlap)}")
    return config


# ---------------------------------------------------------------------------
# evaluate
# ---------------------------------------------------------------------------

def _load_target_sources(config: AuditConfig, scheme: FeatureScheme,
                         runs: list[RankedRun],
                         catalog: ingest.LabelCatalog
                         ) -> tuple[dict[str, dict[str, TargetCounts]],
                                    ingest.LabelCatalog, list[SkippedTopic]]:
    """Load every target source into per-topic counts.

    Pre-aggregated sources come from counts files. Membership sources are
    tallied against the label catalog; a members file ending in .json is
    treated as a SPARQL result export whose label fragments are merged into
    the catalog before tallying.
    """
    run_topics = {run.topic_id for run in runs}
    sources: dict[str, dict[str, TargetCounts]] = {}
    skipped: list[SkippedTopic] = []

    for label, path in sorted(config.targets.items()):
        with open(path, encoding="utf-8") as handle:
            counts = ingest.parse_target_counts(handle, scheme, path=str(path))
        sources[label] = {c.topic_id: c for c in counts}

    membership: dict[str, ingest.MembershipTable] = {}
    for label, path in sorted(config.members.items()):
        if path.suffix == ".json":
            with open(path, encoding="utf-8") as handle:
                extraction = ingest.parse_sparql_results(
                    handle, topic_var=config.topic_var, entity_var=config.entity_var,
                    value_var=config.value_var, strict=config.strict, path=str(path))
            catalog = catalog.merged(
                (entity, value, ingest.DEFAULT_PROVENANCE)
                for entity, value in extraction.label_rows
                if value in set(scheme.values) | {scheme.unknown_token})
            membership[label] = extraction.members
        else:
            with open(path, encoding="utf-8") as handle:
                membership[label] = ingest.parse_members(handle, path=str(path))

    for label, table in sorted(membership.items()):
        per_topic: dict[str, TargetCounts] = {}
        for topic in table.topics():
            if topic not in run_topics:
                skipped.append(SkippedTopic(topic, label, "missing-run",
                                            "membership topic has no ranked run"))
                continue
            try:
                per_topic[topic] = ingest.counts_for_topic(
                    topic, sorted(table.members[topic]), catalog)
            except EmptyPopulationError as exc:
                skipped.append(SkippedTopic(topic, label, "empty-population", str(exc)))
        sources[label] = per_topic
    return sources, catalog, skipped


def _evaluate_corpus(runs: list[RankedRun], catalog: ingest.LabelCatalog,
                     sources: dict[str, dict[str, TargetCounts]],
                     config: AuditConfig,
                     already_skipped: set[tuple[str, str]] = frozenset()
                     ) -> tuple[list[EvaluatedTopic], list[SkippedTopic]]:
    scheme = catalog.scheme
    skipped: list[SkippedTopic] = []
    tasks: list[tuple[str, RankedRun, TargetCounts]] = []
    run_topics = {run.topic_id for run in runs}
    for source in sorted(sources):
        per_topic = sources[source]
        for run in sorted(runs, key=lambda r: r.topic_id):
            target = per_topic.get(run.topic_id)
            if target is None:
                if (source, run.topic_id) not in already_skipped:
                    skipped.append(SkippedTopic(run.topic_id, source,
                                                "missing-target",
                                                "no target counts for this topic"))
                continue
            tasks.append((source, run, target))
        for topic in sorted(set(per_topic) - run_topics):
            skipped.append(SkippedTopic(topic, source, "missing-run",
                                        "target topic has no ranked run"))

    def measure(task: tuple[str, RankedRun, TargetCounts]) -> list[EvaluatedTopic]:
        source, run, target = task
        return [
            EvaluatedTopic(source=source, target_population=target.total,
                           record=bias_at_n(run, catalog, target, value,
                                            config.cutoff, strict=config.strict))
            for value in scheme.values
        ]

    if config.jobs > 1:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            batches = list(pool.map(measure, tasks))
    else:
        batches = [measure(task) for task in tasks]
    return [item for batch in batches for item in batch], skipped


def cmd_evaluate(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    scheme = config.scheme()
    if config.runs is None or config.labels is None:
        raise BiasLensError("evaluate needs --runs and --labels (or config keys)")
    if not config.targets and not config.members:
        raise BiasLensError(
            "evaluate needs at least one target source (--target/--members LABEL=FILE)")

    with open(config.runs, encoding="utf-8") as handle:
        runs = ingest.parse_runs(handle, path=str(config.runs))
    if not runs:
        raise BiasLensError(f"{config.runs}: no runs found")
    with open(config.labels, encoding="utf-8") as handle:
        catalog = ingest.parse_labels(handle, scheme, path=str(config.labels))

    sources, catalog, skipped = _load_target_sources(config, scheme, runs, catalog)
    evaluated, eval_skips = _evaluate_corpus(
        runs, catalog, sources, config,
        already_skipped={(s.source, s.topic_id) for s in skipped})
    skipped.extend(eval_skips)
    if not evaluated:
        raise BiasLensError("zero joinable topics: no (run, target) pair shares a topic")

    meta = ReportMeta(
        seed=config.seed, cutoff=config.cutoff, feature_name=scheme.feature_name,
        values=scheme.values, unknown_token=scheme.unknown_token,
        sources=tuple(sorted(sources)), strict=config.strict,
        table_size=config.table_size,
        sd_divisor="population" if config.population_sd else "sample",
    )
    report = build_report(meta, evaluated, skipped)
    written = emit_report(report, config.fmt, config.out)
    _print_evaluate_summary(report, catalog, written)
    return 0


def _print_evaluate_summary(report: Report, catalog: ingest.LabelCatalog,
                            written: list[Path]) -> None:
    topics = sorted({e.record.topic_id for e in report.records})
    print(f"evaluated {len(topics)} topics at cutoff {report.meta.cutoff} "
          f"({len(report.records)} records, "
          f"{len(report.meta.sources)} target sources, "
          f"{len(report.meta.values)} values)")
    if catalog.conflicts:
        print(f"label conflicts resolved by provenance: {len(catalog.conflicts)}")
    for block in report.blocks:
        s = block.summary
        print(f"  {block.source}/{block.feature_value}: topics={s.topic_count} "
              f"MB={to_float(s.mean_bias):.6g} SB={s.stdev_bias:.6g} "
              f"MAB={to_float(s.mean_abs_bias):.6g} "
              f"min={to_float(s.min_bias):.6g} max={to_float(s.max_bias):.6g}")
    if report.skipped:
        print(f"skipped {len(report.skipped)} topic-source pairs:")
        for skip in report.skipped[:10]:
            print(f"  {skip.source}/{skip.topic_id}: {skip.reason}")
        if len(report.skipped) > 10:
            print(f"  ... and {len(report.skipped) - 10} more (see report)")
    for path in written:
        print(f"wrote {path}")


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def cmd_simulate(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    scheme = config.scheme()
    value = scheme.values[0]
    spec_path = Path(args.plan)
    with open(spec_path, encoding="utf-8") as handle:
        text = handle.read()

    rows = []
    for line_no, fields in ingest._rows(text, str(spec_path), SIMULATE_HEADER):
        if len(fields) not in (4, 5):
            raise ParseError(f"expected 4 or 5 fields, got {len(fields)}",
                             path=str(spec_path), line=line_no)
        rows.append((line_no, fields))

    topics = []
    failures = []
    for line_no, fields in rows:
        topic_id = fields[0].strip()
        try:
            target = Fraction(fields[1].strip())
            bias = Fraction(fields[2].strip())
            length = int(fields[3].strip())
            population = (int(fields[4].strip())
                          if len(fields) == 5 and fields[4].strip() else None)
        except (ValueError, ZeroDivisionError) as exc:
            failures.append(f"{spec_path}:{line_no}: unparseable row: {exc}")
            continue
        try:
            topics.append(simulate_run(topic_id, target, bias, length, scheme, value,
                                       seed=config.seed, population=population))
        except InfeasibleSimulationError as exc:
            failures.append(f"{spec_path}:{line_no}: {exc}")
    if failures:
        for failure in failures:
            print(f"error: {failure}", file=sys.stderr)
        return 1
    if not topics:
        raise BiasLensError(f"{spec_path}: no simulation rows found")

    label_rows = []
    for topic in topics:
        assignments = topic.labels.assignments
        label_rows.extend((entity, assignments[entity], topic.labels.provenance[entity])
                          for entity in sorted(assignments))
    catalog = ingest.LabelCatalog.build(scheme, label_rows)

    out = config.out
    out.mkdir(parents=True, exist_ok=True)
    atomic_write(out / "runs.tsv", ingest.serialize_runs(t.run for t in topics))
    atomic_write(out / "labels.tsv", ingest.serialize_labels(catalog))
    atomic_write(out / "targets.tsv",
                 ingest.serialize_target_counts((t.target for t in topics), scheme))
    print(f"simulated {len(topics)} topics for value {value!r} "
          f"(runs.tsv, labels.tsv, targets.tsv in {out})")
    return 0


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

def cmd_report(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    exemplar_grid = getattr(args, "exemplar_grid", None)
    if exemplar_grid is not None and exemplar_grid < 1:
        raise BiasLensError(f"exemplar grid must be >= 1, got {exemplar_grid}")
    report_path = Path(args.report)
    with open(report_path, encoding="utf-8") as handle:
        report = parse_report(handle.read(), path=str(report_path))
    rebuilt = rebuild_report(report, table_size=getattr(args, "table_size", None),
                             exemplar_grid=exemplar_grid)
    written = emit_report(rebuilt, config.fmt, config.out)
    for path in written:
        print(f"wrote {path}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing and entry point
# ---------------------------------------------------------------------------

def _add_shared_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="FILE",
                        help="flat key=value config file (flags win)")
    parser.add_argument("--cutoff", type=int, metavar="N",
                        help="evaluation window size (default 10)")
    parser.add_argument("--feature", metavar="NAME",
                        help="feature to audit, e.g. gender")
    parser.add_argument("--values", metavar="A,B[,...]",
                        help="comma-separated declared feature values")
    parser.add_argument("--unknown-token", dest="unknown_token", metavar="TOKEN",
                        help="label marking an explicit unknown (default: unknown)")
    parser.add_argument("--strict", action="store_true", default=False,
                        help="treat unlabeled entities in a window as errors")
    parser.add_argument("--seed", type=int, metavar="N",
                        help=f"jitter/simulation seed (default {DEFAULT_SEED}; "
                             f"env {SEED_ENV_VAR})")
    parser.add_argument("--format", choices=("json", "csv"),
                        help="report output format (default json)")
    parser.add_argument("--out", metavar="DIR", help="output directory (default out)")
    parser.add_argument("--jobs", type=int, metavar="N",
                        help="parallel topic evaluations (default 1)")
    parser.add_argument("--table-size", dest="table_size", type=int, metavar="K",
                        help="rows per ranked bias table (default 11)")
    parser.add_argument("--population-sd", dest="population_sd", action="store_true",
                        default=False,
                        help="use the population standard-deviation divisor N")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="biaslens",
        description="Measure representation bias of ranked results for a "
                    "categorical feature.")
    commands = parser.add_subparsers(dest="command", required=True)

    evaluate = commands.add_parser(
        "evaluate", help="measure bias for runs against one or more target sources")
    _add_shared_flags(evaluate)
    evaluate.add_argument("--runs", metavar="FILE", help="ranked runs TSV")
    evaluate.add_argument("--labels", metavar="FILE", help="entity label TSV")
    evaluate.add_argument("--target", action="append", metavar="LABEL=FILE",
                          help="pre-aggregated target counts TSV (repeatable)")
    evaluate.add_argument("--members", action="append", metavar="LABEL=FILE",
                          help="membership TSV or SPARQL JSON export (repeatable)")
    evaluate.set_defaults(handler=cmd_evaluate)

    simulate = commands.add_parser(
        "simulate", help="write synthetic fixture files with planted biases")
    _add_shared_flags(simulate)
    simulate.add_argument("plan", metavar="PLAN_TSV",
                          help="rows: topic_id, target_ratio, bias, length"
                               "[, population]")
    simulate.set_defaults(handler=cmd_simulate)

    report = commands.add_parser(
        "report", help="re-derive tables from an existing report.json")
    _add_shared_flags(report)
    report.add_argument("report", metavar="REPORT_JSON", help="input report document")
    report.add_argument("--exemplar-grid", dest="exemplar_grid", type=int, metavar="G",
                        help="bucket count for the unbiased exemplar table "
                             "(default 10)")
    report.set_defaults(handler=cmd_report)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; exit 2 is reserved for strict-mode
        # violations, so usage problems map to the input-error code.
        return 0 if not exc.code else 1
    try:
        return args.handler(args)
    except UnlabeledEntityError as exc:
        print(f"error: strict mode: {exc}", file=sys.stderr)
        return 2
    except BiasLensError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
