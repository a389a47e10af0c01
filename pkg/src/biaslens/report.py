"""Deterministic reporting artifacts built from bias records.

Everything here is plot-ready data, not rendered images: histogram bins on
the 1/n grid, jittered target-vs-model scatter points, ranked most-biased
tables, and per-bucket unbiased exemplars. Emission is byte-stable: given
the same records and seed, the JSON document and every CSV in the bundle
come out identical, and files are written atomically so a failed run never
leaves a partial report behind.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import ParseError, SchemaVersionError
from .metrics import BiasRecord, BiasSummary, aggregate
from ._util import atomic_write, ratio_str, round_half_away, to_float, unit_open

SCHEMA = "biaslens-report/1"

JSON_NAME = "report.json"
CSV_NAMES = ("summaries.csv", "records.csv", "histogram.csv", "scatter.csv",
             "table_towards.csv", "table_against.csv", "table_unbiased.csv")


@dataclass(frozen=True)
class HistogramSpec:
    """Bias histogram with bins centered on k/cutoff for k in [-cutoff, cutoff].

    Records measured at a shorter effective window land in the nearest bin
    and their topics are flagged. ``reference_counts`` is the bias-free
    comparison shape: all mass in the zero bin.
    """

    cutoff: int
    feature_value: str
    counts: tuple[int, ...]
    reference_counts: tuple[int, ...]
    off_grid_topics: tuple[str, ...]

    def centers(self) -> list[Fraction]:
        return [Fraction(k, self.cutoff) for k in range(-self.cutoff, self.cutoff + 1)]

    @property
    def total(self) -> int:
        return sum(self.counts)


@dataclass(frozen=True)
class ScatterPoint:
    """One topic in target-vs-model space, snapped to the 1/cutoff cell grid.

    ``dx``/``dy`` are deterministic jitter offsets strictly inside the half
    cell, a pure function of (seed, topic, value), so points sharing a cell
    stay distinguishable without ever leaving their square.
    """

    topic_id: str
    feature_value: str
    target_ratio: Fraction
    model_ratio: Fraction
    cell: tuple[int, int]
    dx: float
    dy: float
    on_diagonal: bool
    off_grid: bool


@dataclass(frozen=True)
class TableRow:
    """Projection of a bias record as printed in ranked tables."""

    topic_id: str
    cutoff_effective: int
    model_ratio: Fraction
    target_ratio_at_cutoff: Fraction
    bias: Fraction


@dataclass(frozen=True)
class RankedTables:
    """Top-k most biased topics in both directions, zero-bias rows excluded."""

    requested_size: int
    towards: tuple[TableRow, ...]
    against: tuple[TableRow, ...]
    towards_short: bool
    against_short: bool


@dataclass(frozen=True)
class ExemplarBucket:
    bucket: Fraction
    row: TableRow | None
    population: int | None


@dataclass(frozen=True)
class ExemplarTable:
    """One unbiased exemplar per target-ratio bucket; gaps stay explicit."""

    grid: int
    buckets: tuple[ExemplarBucket, ...]
    skipped: tuple[tuple[str, str], ...]


@dataclass(frozen=True)
class EvaluatedTopic:
    """A bias record plus its target source and reference-population size."""

    source: str
    target_population: int
    record: BiasRecord


@dataclass(frozen=True)
class SkippedTopic:
    topic_id: str
    source: str
    reason: str
    detail: str


@dataclass(frozen=True)
class ReportMeta:
    seed: int
    cutoff: int
    feature_name: str
    values: tuple[str, ...]
    unknown_token: str
    sources: tuple[str, ...]
    strict: bool
    table_size: int
    sd_divisor: str
    evaluation: str = "one-vs-rest"


@dataclass(frozen=True)
class ReportBlock:
    source: str
    feature_value: str
    summary: BiasSummary
    histogram: HistogramSpec
    scatter: tuple[ScatterPoint, ...]
    tables: RankedTables
    unbiased: ExemplarTable


@dataclass(frozen=True)
class Report:
    meta: ReportMeta
    records: tuple[EvaluatedTopic, ...]
    blocks: tuple[ReportBlock, ...]
    skipped: tuple[SkippedTopic, ...]


def _as_row(record: BiasRecord) -> TableRow:
    return TableRow(
        topic_id=record.topic_id,
        cutoff_effective=record.cutoff_effective,
        model_ratio=record.model_ratio,
        target_ratio_at_cutoff=record.target_ratio_at_cutoff,
        bias=record.bias,
    )


def build_histogram(records: Sequence[BiasRecord], value: str,
                    n: int) -> HistogramSpec:
    """Bin per-topic biases onto the 1/n grid, flagging short-window topics."""
    if not records:
        raise ValueError("cannot build a histogram from zero records")
    counts = [0] * (2 * n + 1)
    off_grid = []
    for record in records:
        scaled = record.bias * n
        if scaled.denominator == 1:
            k = scaled.numerator
        else:
            k = round_half_away(scaled)
        counts[k + n] += 1
        if record.cutoff_effective != n:
            off_grid.append(record.topic_id)
    reference = [0] * (2 * n + 1)
    reference[n] = len(records)
    return HistogramSpec(cutoff=n, feature_value=value, counts=tuple(counts),
                         reference_counts=tuple(reference),
                         off_grid_topics=tuple(sorted(off_grid)))


def build_scatter(records: Sequence[BiasRecord], value: str, n: int,
                  seed: int) -> tuple[ScatterPoint, ...]:
    """Target-vs-model points with deterministic in-cell jitter, by topic."""
    if not records:
        raise ValueError("cannot build a scatter from zero records")
    points = []
    for record in sorted(records, key=lambda r: r.topic_id):
        x = record.target_ratio_at_cutoff
        y = record.model_ratio
        off_grid = record.cutoff_effective != n
        cell = (round_half_away(x * n), round_half_away(y * n))
        dx = (unit_open(seed, record.topic_id, value, "x") - 0.5) / n
        dy = (unit_open(seed, record.topic_id, value, "y") - 0.5) / n
        points.append(ScatterPoint(
            topic_id=record.topic_id,
            feature_value=value,
            target_ratio=x,
            model_ratio=y,
            cell=cell,
            dx=dx,
            dy=dy,
            on_diagonal=record.bias == 0,
            off_grid=off_grid,
        ))
    return tuple(points)


def ranked_bias_table(records: Sequence[BiasRecord], value: str,
                      k: int) -> RankedTables:
    """Top-k topics most biased towards and against ``value``.

    Ties on bias break by the larger gap between model ratio and the raw
    target ratio, then by topic id, so the ordering is a total order. Tables
    come out shorter than k when fewer biased topics exist; that is flagged,
    not an error.
    """
    if k < 1:
        raise ValueError(f"table size must be >= 1, got {k}")
    towards = [r for r in records if r.bias > 0]
    against = [r for r in records if r.bias < 0]
    towards.sort(key=lambda r: (-r.bias, -abs(r.model_ratio - r.target_ratio_raw),
                                r.topic_id))
    against.sort(key=lambda r: (r.bias, -abs(r.model_ratio - r.target_ratio_raw),
                                r.topic_id))
    return RankedTables(
        requested_size=k,
        towards=tuple(_as_row(r) for r in towards[:k]),
        against=tuple(_as_row(r) for r in against[:k]),
        towards_short=len(towards) < k,
        against_short=len(against) < k,
    )


def unbiased_exemplars(records: Sequence[BiasRecord],
                       populations: Mapping[str, int],
                       *, grid: int = 10) -> ExemplarTable:
    """Pick, per target-ratio bucket, the most populous bias-free topic.

    Buckets span the 1/grid steps from 0 to 1 (half-way ratios round away
    from zero). Bias-free topics without a known population are skipped with
    a per-topic warning entry; empty buckets stay in the output as gaps.
    """
    best: dict[int, tuple[int, str, BiasRecord]] = {}
    skipped = []
    for record in sorted(records, key=lambda r: r.topic_id):
        if record.bias != 0:
            continue
        population = populations.get(record.topic_id)
        if population is None:
            skipped.append((record.topic_id, "missing-population"))
            continue
        index = round_half_away(record.target_ratio_at_cutoff * grid)
        held = best.get(index)
        if held is None or population > held[0]:
            best[index] = (population, record.topic_id, record)
    buckets = []
    for index in range(grid + 1):
        held = best.get(index)
        buckets.append(ExemplarBucket(
            bucket=Fraction(index, grid),
            row=_as_row(held[2]) if held else None,
            population=held[0] if held else None,
        ))
    return ExemplarTable(grid=grid, buckets=tuple(buckets), skipped=tuple(skipped))


def build_report(meta: ReportMeta, evaluated: Sequence[EvaluatedTopic],
                 skipped: Sequence[SkippedTopic] = ()) -> Report:
    """Assemble the full report: summaries, histograms, scatters and tables.

    Blocks exist per (source, value) pair that produced at least one record.
    All orderings are fixed (sources and topics sorted, values in scheme
    order) so the result is independent of evaluation order.
    """
    evaluated = tuple(sorted(
        evaluated, key=lambda e: (e.source, e.record.feature_value, e.record.topic_id)))
    grouped: dict[tuple[str, str], list[EvaluatedTopic]] = {}
    for item in evaluated:
        grouped.setdefault((item.source, item.record.feature_value), []).append(item)

    blocks = []
    for source in sorted(meta.sources):
        for value in meta.values:
            group = grouped.get((source, value))
            if not group:
                continue
            records = [g.record for g in group]
            populations = {g.record.topic_id: g.target_population for g in group}
            blocks.append(ReportBlock(
                source=source,
                feature_value=value,
                summary=aggregate(records, value, source,
                                  population_sd=meta.sd_divisor == "population"),
                histogram=build_histogram(records, value, meta.cutoff),
                scatter=build_scatter(records, value, meta.cutoff, meta.seed),
                tables=ranked_bias_table(records, value, meta.table_size),
                unbiased=unbiased_exemplars(records, populations),
            ))
    ordered_skips = tuple(sorted(skipped, key=lambda s: (s.source, s.topic_id)))
    return Report(meta=meta, records=evaluated, blocks=tuple(blocks),
                  skipped=ordered_skips)


def rebuild_report(report: Report, *, table_size: int | None = None,
                   exemplar_grid: int | None = None) -> Report:
    """Re-derive tables and artifacts from stored records, without re-evaluating."""
    meta = report.meta
    if table_size is not None:
        meta = ReportMeta(seed=meta.seed, cutoff=meta.cutoff,
                          feature_name=meta.feature_name, values=meta.values,
                          unknown_token=meta.unknown_token, sources=meta.sources,
                          strict=meta.strict, table_size=table_size,
                          sd_divisor=meta.sd_divisor, evaluation=meta.evaluation)
    rebuilt = build_report(meta, report.records, report.skipped)
    if exemplar_grid is None or exemplar_grid == 10:
        return rebuilt
    blocks = []
    for block in rebuilt.blocks:
        group = [e for e in rebuilt.records
                 if e.source == block.source
                 and e.record.feature_value == block.feature_value]
        populations = {e.record.topic_id: e.target_population for e in group}
        blocks.append(ReportBlock(
            source=block.source, feature_value=block.feature_value,
            summary=block.summary, histogram=block.histogram,
            scatter=block.scatter, tables=block.tables,
            unbiased=unbiased_exemplars([e.record for e in group], populations,
                                        grid=exemplar_grid),
        ))
    return Report(meta=rebuilt.meta, records=rebuilt.records,
                  blocks=tuple(blocks), skipped=rebuilt.skipped)


# ---------------------------------------------------------------------------
# JSON document
# ---------------------------------------------------------------------------

def _ratio_obj(value: Fraction, grid: int | None = None) -> dict:
    return {"ratio": ratio_str(value, grid), "value": to_float(value)}

def _read_ratio(obj: dict) -> Fraction:
    return Fraction(obj["ratio"])


def _row_obj(row: TableRow) -> dict:
    m = row.cutoff_effective
    return {
        "topic": row.topic_id,
        "cutoff_effective": m,
        "model_ratio": _ratio_obj(row.model_ratio, m),
        "target_ratio_at_cutoff": _ratio_obj(row.target_ratio_at_cutoff, m),
        "bias": _ratio_obj(row.bias, m),
    }


def _read_row(obj: dict | None) -> TableRow | None:
    if obj is None:
        return None
    return TableRow(
        topic_id=obj["topic"],
        cutoff_effective=obj["cutoff_effective"],
        model_ratio=_read_ratio(obj["model_ratio"]),
        target_ratio_at_cutoff=_read_ratio(obj["target_ratio_at_cutoff"]),
        bias=_read_ratio(obj["bias"]),
    )


def report_to_json(report: Report) -> str:
    """Render the report as the versioned JSON document (byte-stable)."""
    meta = report.meta
    payload = {
        "schema": SCHEMA,
        "meta": {
            "seed": meta.seed,
            "cutoff": meta.cutoff,
            "feature": meta.feature_name,
            "values": list(meta.values),
            "unknown_token": meta.unknown_token,
            "sources": list(meta.sources),
            "strict": meta.strict,
            "table_size": meta.table_size,
            "sd_divisor": meta.sd_divisor,
            "evaluation": meta.evaluation,
        },
        "summaries": [
            {
                "source": b.source,
                "value": b.feature_value,
                "topics": b.summary.topic_count,
                "MB": _ratio_obj(b.summary.mean_bias),
                "SB": b.summary.stdev_bias,
                "MAB": _ratio_obj(b.summary.mean_abs_bias),
                "min": _ratio_obj(b.summary.min_bias),
                "max": _ratio_obj(b.summary.max_bias),
                "single_sample": b.summary.single_sample,
            }
            for b in report.blocks
        ],
        "records": [
            {
                "source": e.source,
                "topic": r.topic_id,
                "value": r.feature_value,
                "cutoff_requested": r.cutoff_requested,
                "cutoff_effective": r.cutoff_effective,
                "model_ratio": _ratio_obj(r.model_ratio, r.cutoff_effective),
                "target_ratio_raw": _ratio_obj(r.target_ratio_raw),
                "rounding_remainder": _ratio_obj(r.rounding_remainder),
                "target_ratio_at_cutoff": _ratio_obj(r.target_ratio_at_cutoff,
                                                     r.cutoff_effective),
                "bias": _ratio_obj(r.bias, r.cutoff_effective),
                "unknown_in_window": r.unknown_in_window,
                "target_population": e.target_population,
            }
            for e in report.records for r in (e.record,)
        ],
        "histogram": [
            {
                "source": b.source,
                "value": b.feature_value,
                "cutoff": b.histogram.cutoff,
                "bins": [
                    {
                        "center": ratio_str(center, b.histogram.cutoff),
                        "value": to_float(center),
                        "count": count,
                        "reference_count": ref,
                    }
                    for center, count, ref in zip(b.histogram.centers(),
                                                  b.histogram.counts,
                                                  b.histogram.reference_counts)
                ],
                "off_grid_topics": list(b.histogram.off_grid_topics),
            }
            for b in report.blocks
        ],
        "scatter": [
            {
                "source": b.source,
                "value": b.feature_value,
                "points": [
                    {
                        "topic": p.topic_id,
                        "x": _ratio_obj(p.target_ratio),
                        "y": _ratio_obj(p.model_ratio),
                        "cell": list(p.cell),
                        "dx": p.dx,
                        "dy": p.dy,
                        "on_diagonal": p.on_diagonal,
                        "off_grid": p.off_grid,
                    }
                    for p in b.scatter
                ],
            }
            for b in report.blocks
        ],
        "tables": [
            {
                "source": b.source,
                "value": b.feature_value,
                "k": b.tables.requested_size,
                "towards": [_row_obj(r) for r in b.tables.towards],
                "against": [_row_obj(r) for r in b.tables.against],
                "towards_short": b.tables.towards_short,
                "against_short": b.tables.against_short,
                "unbiased": {
                    "grid": b.unbiased.grid,
                    "buckets": [
                        {
                            "bucket": ratio_str(bk.bucket, b.unbiased.grid),
                            "value": to_float(bk.bucket),
                            "topic": bk.row.topic_id if bk.row else None,
                            "population": bk.population,
                            "row": _row_obj(bk.row) if bk.row else None,
                        }
                        for bk in b.unbiased.buckets
                    ],
                    "skipped": [
                        {"topic": t, "reason": reason}
                        for t, reason in b.unbiased.skipped
                    ],
                },
            }
            for b in report.blocks
        ],
        "skipped": [
            {"topic": s.topic_id, "source": s.source, "reason": s.reason,
             "detail": s.detail}
            for s in report.skipped
        ],
    }
    return json.dumps(payload, indent=2, ensure_ascii=False) + "\n"


def parse_report(text: str, path: str = "<report>") -> Report:
    """Rebuild a Report object from its JSON document."""
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", path=path, line=exc.lineno) from None
    schema = payload.get("schema")
    if schema != SCHEMA:
        raise SchemaVersionError(
            f"{path}: unsupported schema {schema!r}, expected {SCHEMA!r}")
    m = payload["meta"]
    meta = ReportMeta(
        seed=m["seed"], cutoff=m["cutoff"], feature_name=m["feature"],
        values=tuple(m["values"]), unknown_token=m["unknown_token"],
        sources=tuple(m["sources"]), strict=m["strict"],
        table_size=m["table_size"], sd_divisor=m["sd_divisor"],
        evaluation=m.get("evaluation", "one-vs-rest"),
    )
    records = []
    for obj in payload["records"]:
        record = BiasRecord(
            topic_id=obj["topic"],
            feature_value=obj["value"],
            cutoff_requested=obj["cutoff_requested"],
            cutoff_effective=obj["cutoff_effective"],
            model_ratio=_read_ratio(obj["model_ratio"]),
            target_ratio_raw=_read_ratio(obj["target_ratio_raw"]),
            rounding_remainder=_read_ratio(obj["rounding_remainder"]),
            target_ratio_at_cutoff=_read_ratio(obj["target_ratio_at_cutoff"]),
            bias=_read_ratio(obj["bias"]),
            unknown_in_window=obj["unknown_in_window"],
        )
        records.append(EvaluatedTopic(source=obj["source"],
                                      target_population=obj["target_population"],
                                      record=record))

    summaries = {(s["source"], s["value"]): s for s in payload["summaries"]}
    histograms = {(h["source"], h["value"]): h for h in payload["histogram"]}
    scatters = {(s["source"], s["value"]): s for s in payload["scatter"]}
    tables = {(t["source"], t["value"]): t for t in payload["tables"]}

    blocks = []
    for key in summaries:
        source, value = key
        s = summaries[key]
        summary = BiasSummary(
            feature_value=value, target_source=source, topic_count=s["topics"],
            mean_bias=_read_ratio(s["MB"]), stdev_bias=s["SB"],
            mean_abs_bias=_read_ratio(s["MAB"]), min_bias=_read_ratio(s["min"]),
            max_bias=_read_ratio(s["max"]), single_sample=s["single_sample"],
            population_sd=meta.sd_divisor == "population",
        )
        h = histograms[key]
        histogram = HistogramSpec(
            cutoff=h["cutoff"], feature_value=value,
            counts=tuple(b["count"] for b in h["bins"]),
            reference_counts=tuple(b["reference_count"] for b in h["bins"]),
            off_grid_topics=tuple(h["off_grid_topics"]),
        )
        scatter = tuple(
            ScatterPoint(
                topic_id=p["topic"], feature_value=value,
                target_ratio=_read_ratio(p["x"]), model_ratio=_read_ratio(p["y"]),
                cell=(p["cell"][0], p["cell"][1]), dx=p["dx"], dy=p["dy"],
                on_diagonal=p["on_diagonal"], off_grid=p["off_grid"],
            )
            for p in scatters[key]["points"]
        )
        t = tables[key]
        ranked = RankedTables(
            requested_size=t["k"],
            towards=tuple(_read_row(r) for r in t["towards"]),
            against=tuple(_read_row(r) for r in t["against"]),
            towards_short=t["towards_short"],
            against_short=t["against_short"],
        )
        u = t["unbiased"]
        unbiased = ExemplarTable(
            grid=u["grid"],
            buckets=tuple(
                ExemplarBucket(bucket=Fraction(bk["bucket"]),
                               row=_read_row(bk["row"]),
                               population=bk["population"])
                for bk in u["buckets"]
            ),
            skipped=tuple((s["topic"], s["reason"]) for s in u["skipped"]),
        )
        blocks.append(ReportBlock(source=source, feature_value=value,
                                  summary=summary, histogram=histogram,
                                  scatter=scatter, tables=ranked,
                                  unbiased=unbiased))

    skipped = tuple(
        SkippedTopic(topic_id=s["topic"], source=s["source"], reason=s["reason"],
                     detail=s["detail"])
        for s in payload["skipped"]
    )
    return Report(meta=meta, records=tuple(records), blocks=tuple(blocks),
                  skipped=skipped)


# ---------------------------------------------------------------------------
# CSV bundle
# ---------------------------------------------------------------------------

def _csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer)
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    return buffer.getvalue()


def _flag(value: bool) -> str:
    return "true" if value else "false"


def report_to_csv_bundle(report: Report) -> dict[str, str]:
    """Render the report as named CSV files with fixed column orders."""
    summaries_rows = [
        (b.source, b.feature_value, b.summary.topic_count,
         ratio_str(b.summary.mean_bias), to_float(b.summary.mean_bias),
         b.summary.stdev_bias,
         ratio_str(b.summary.mean_abs_bias), to_float(b.summary.mean_abs_bias),
         ratio_str(b.summary.min_bias), to_float(b.summary.min_bias),
         ratio_str(b.summary.max_bias), to_float(b.summary.max_bias),
         _flag(b.summary.single_sample), report.meta.sd_divisor)
        for b in report.blocks
    ]
    record_rows = []
    for e in report.records:
        r = e.record
        m = r.cutoff_effective
        record_rows.append(
            (e.source, r.feature_value, r.topic_id, r.cutoff_requested, m,
             ratio_str(r.model_ratio, m), to_float(r.model_ratio),
             ratio_str(r.target_ratio_raw), to_float(r.target_ratio_raw),
             ratio_str(r.rounding_remainder), to_float(r.rounding_remainder),
             ratio_str(r.target_ratio_at_cutoff, m), to_float(r.target_ratio_at_cutoff),
             ratio_str(r.bias, m), to_float(r.bias),
             r.unknown_in_window, e.target_population))
    histogram_rows = []
    for b in report.blocks:
        for center, count, ref in zip(b.histogram.centers(), b.histogram.counts,
                                      b.histogram.reference_counts):
            histogram_rows.append(
                (b.source, b.feature_value, ratio_str(center, b.histogram.cutoff),
                 to_float(center), count, ref))
    scatter_rows = [
        (b.source, b.feature_value, p.topic_id,
         ratio_str(p.target_ratio), to_float(p.target_ratio),
         ratio_str(p.model_ratio), to_float(p.model_ratio),
         p.cell[0], p.cell[1], p.dx, p.dy,
         _flag(p.on_diagonal), _flag(p.off_grid))
        for b in report.blocks for p in b.scatter
    ]

    def table_rows(chooser):
        rows = []
        for b in report.blocks:
            for rank, row in enumerate(chooser(b.tables), start=1):
                rows.append(
                    (b.source, b.feature_value, rank, row.topic_id,
                     row.cutoff_effective,
                     ratio_str(row.model_ratio, row.cutoff_effective),
                     to_float(row.model_ratio),
                     ratio_str(row.target_ratio_at_cutoff, row.cutoff_effective),
                     to_float(row.target_ratio_at_cutoff),
                     ratio_str(row.bias, row.cutoff_effective),
                     to_float(row.bias)))
        return rows

    unbiased_rows = []
    for b in report.blocks:
        for bucket in b.unbiased.buckets:
            unbiased_rows.append(
                (b.source, b.feature_value,
                 ratio_str(bucket.bucket, b.unbiased.grid), to_float(bucket.bucket),
                 bucket.row.topic_id if bucket.row else "",
                 bucket.population if bucket.population is not None else ""))

    table_header = ("source", "value", "rank", "topic_id", "cutoff_effective",
                    "model_ratio", "model_ratio_value",
                    "target_ratio_at_cutoff", "target_ratio_at_cutoff_value",
                    "bias", "bias_value")
    return {
        "summaries.csv": _csv_text(
            ("source", "value", "topics", "MB", "MB_value", "SB_value",
             "MAB", "MAB_value", "min", "min_value", "max", "max_value",
             "single_sample", "sd_divisor"), summaries_rows),
        "records.csv": _csv_text(
            ("source", "value", "topic_id", "cutoff_requested", "cutoff_effective",
             "model_ratio", "model_ratio_value",
             "target_ratio_raw", "target_ratio_raw_value",
             "rounding_remainder", "rounding_remainder_value",
             "target_ratio_at_cutoff", "target_ratio_at_cutoff_value",
             "bias", "bias_value", "unknown_in_window", "target_population"),
            record_rows),
        "histogram.csv": _csv_text(
            ("source", "value", "center", "center_value", "count",
             "reference_count"), histogram_rows),
        "scatter.csv": _csv_text(
            ("source", "value", "topic_id", "x", "x_value", "y", "y_value",
             "cell_i", "cell_j", "dx", "dy", "on_diagonal", "off_grid"),
            scatter_rows),
        "table_towards.csv": _csv_text(table_header, table_rows(lambda t: t.towards)),
        "table_against.csv": _csv_text(table_header, table_rows(lambda t: t.against)),
        "table_unbiased.csv": _csv_text(
            ("source", "value", "bucket", "bucket_value", "topic_id", "population"),
            unbiased_rows),
    }


def emit_report(report: Report, fmt: str, out_dir: Path | str) -> list[Path]:
    """Write the report to ``out_dir`` as JSON or a CSV bundle, atomically.

    All file contents are rendered before anything touches the disk, so a
    rendering failure leaves no partial output.
    """
    if fmt not in ("json", "csv"):
        raise ValueError(f"unsupported report format {fmt!r} (use json or csv)")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        documents = {JSON_NAME: report_to_json(report)}
    else:
        documents = report_to_csv_bundle(report)
    written = []
    for name, content in sorted(documents.items()):
        target = out / name
        atomic_write(target, content)
        written.append(target)
    return written
