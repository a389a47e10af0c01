"""biaslens: representation-bias measurement for ranked search results.

Measures, per topic and feature value, how far the top-n window of a ranked
result list deviates from the share a reference population would justify,
with all ratios carried as exact rationals. Ships ingestion for runs,
label catalogs, target populations and SPARQL exports, plus deterministic
reporting and a CLI (``biaslens evaluate | simulate | report``).
"""

from .errors import (
    BiasLensError,
    EmptyAggregateError,
    EmptyPopulationError,
    EmptyRunError,
    InfeasibleSimulationError,
    ParseError,
    SchemaVersionError,
    SchemeViolationError,
    TopicMismatchError,
    UnlabeledEntityError,
)
from .ingest import (
    LabelCatalog,
    LabelConflict,
    MembershipTable,
    SparqlExtraction,
    counts_for_topic,
    counts_from_membership,
    extraction_to_catalog,
    parse_labels,
    parse_members,
    parse_runs,
    parse_sparql_results,
    parse_target_counts,
    serialize_labels,
    serialize_members,
    serialize_runs,
    serialize_target_counts,
)
from .metrics import (
    BiasRecord,
    BiasSummary,
    FeatureScheme,
    RankedRun,
    SimulatedTopic,
    TargetCounts,
    WindowRatio,
    aggregate,
    bias_at_n,
    ideal_target_ratio_at_n,
    model_ratio_at_n,
    naive_target_ratio_at_n,
    simulate_run,
    target_ratio,
)
from .report import (
    EvaluatedTopic,
    ExemplarBucket,
    ExemplarTable,
    HistogramSpec,
    RankedTables,
    Report,
    ReportBlock,
    ReportMeta,
    ScatterPoint,
    SkippedTopic,
    TableRow,
    build_histogram,
    build_report,
    build_scatter,
    emit_report,
    parse_report,
    ranked_bias_table,
    rebuild_report,
    report_to_csv_bundle,
    report_to_json,
    unbiased_exemplars,
)

__version__ = "0.1.0"

__all__ = [
    "BiasLensError",
    "BiasRecord",
    "BiasSummary",
    "EmptyAggregateError",
    "EmptyPopulationError",
    "EmptyRunError",
    "EvaluatedTopic",
    "ExemplarBucket",
    "ExemplarTable",
    "FeatureScheme",
    "HistogramSpec",
    "InfeasibleSimulationError",
    "LabelCatalog",
    "LabelConflict",
    "MembershipTable",
    "ParseError",
    "RankedRun",
    "RankedTables",
    "Report",
    "ReportBlock",
    "ReportMeta",
    "ScatterPoint",
    "SchemaVersionError",
    "SchemeViolationError",
    "SimulatedTopic",
    "SkippedTopic",
    "SparqlExtraction",
    "TableRow",
    "TargetCounts",
    "TopicMismatchError",
    "UnlabeledEntityError",
    "WindowRatio",
    "aggregate",
    "bias_at_n",
    "build_histogram",
    "build_report",
    "build_scatter",
    "counts_for_topic",
    "counts_from_membership",
    "emit_report",
    "extraction_to_catalog",
    "ideal_target_ratio_at_n",
    "model_ratio_at_n",
    "naive_target_ratio_at_n",
    "parse_labels",
    "parse_members",
    "parse_report",
    "parse_runs",
    "parse_sparql_results",
    "parse_target_counts",
    "ranked_bias_table",
    "rebuild_report",
    "report_to_csv_bundle",
    "report_to_json",
    "serialize_labels",
    "serialize_members",
    "serialize_runs",
    "serialize_target_counts",
    "simulate_run",
    "target_ratio",
    "unbiased_exemplars",
]
