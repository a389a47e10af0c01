"""Parsing, validation and joining of audit inputs.

Four tab-separated formats plus SPARQL result exports feed the pipeline:

    runs.tsv     topic_id <TAB> rank <TAB> entity_id          (rank 1-based)
    labels.tsv   entity_id <TAB> feature_name <TAB> value [<TAB> provenance]
    members.tsv  topic_id <TAB> entity_id
    targets.tsv  topic_id <TAB> feature_name <TAB> value <TAB> count [<TAB> total]

All files are UTF-8. Lines starting with '#' are comments; one optional
header line using the canonical column names is tolerated. Fields may not
contain tabs or newlines (there is no quoting dialect), which keeps the
parsers bit-exact. Every parse failure names the file, the line and the
offending field.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator

from .errors import EmptyPopulationError, ParseError, SchemeViolationError
from .metrics import FeatureScheme, RankedRun, TargetCounts

# Higher provenance wins a conflicting assignment; unlisted tags rank lowest.
PROVENANCE_PRIORITY = {"manual": 3, "kb": 2, "inferred": 1}
DEFAULT_PROVENANCE = "kb"

RUNS_HEADER = ("topic_id", "rank", "entity_id")
LABELS_HEADER = ("entity_id", "feature_name", "value", "provenance")
MEMBERS_HEADER = ("topic_id", "entity_id")
TARGETS_HEADER = ("topic_id", "feature_name", "value", "count", "total")


@dataclass(frozen=True)
class LabelConflict:
    """Two sources disagreed about one entity; the kept side won on provenance."""

    entity_id: str
    kept_value: str
    kept_provenance: str
    dropped_value: str
    dropped_provenance: str


@dataclass(frozen=True)
class LabelCatalog:
    """Entity-to-value assignments for one feature, with provenance.

    Assignments may carry the scheme's unknown token to record an explicit
    unknown. ``label_of`` collapses explicit unknowns and missing entities
    to None, which is how the metrics treat both.
    """

    scheme: FeatureScheme
    assignments: dict[str, str]
    provenance: dict[str, str]
    conflicts: tuple[LabelConflict, ...] = field(default=(), compare=False)

    def __post_init__(self) -> None:
        allowed = set(self.scheme.values) | {self.scheme.unknown_token}
        for entity, value in self.assignments.items():
            if value not in allowed:
                raise SchemeViolationError(
                    f"entity {entity!r} labeled {value!r}, which is not declared for "
                    f"feature {self.scheme.feature_name!r}")
        if set(self.provenance) != set(self.assignments):
            raise SchemeViolationError("provenance must cover exactly the assigned entities")

    @property
    def feature_name(self) -> str:
        return self.scheme.feature_name

    def label_of(self, entity_id: str) -> str | None:
        value = self.assignments.get(entity_id)
        if value is None or value == self.scheme.unknown_token:
            return None
        return value

    def __len__(self) -> int:
        return len(self.assignments)

    @classmethod
    def build(cls, scheme: FeatureScheme,
              rows: Iterable[tuple[str, str, str]]) -> "LabelCatalog":
        """Fold (entity, value, provenance) rows into a catalog.

        At most one assignment survives per entity: a higher-priority
        provenance overrides a lower one, equal priorities keep the first
        assignment seen. Every disagreement is recorded.
        """
        assignments: dict[str, str] = {}
        provenance: dict[str, str] = {}
        conflicts: list[LabelConflict] = []
        for entity, value, prov in rows:
            if entity in assignments:
                held_value = assignments[entity]
                held_prov = provenance[entity]
                if value == held_value:
                    if _priority(prov) > _priority(held_prov):
                        provenance[entity] = prov
                    continue
                if _priority(prov) > _priority(held_prov):
                    conflicts.append(LabelConflict(entity, value, prov,
                                                   held_value, held_prov))
                    assignments[entity] = value
                    provenance[entity] = prov
                else:
                    conflicts.append(LabelConflict(entity, held_value, held_prov,
                                                   value, prov))
            else:
                assignments[entity] = value
                provenance[entity] = prov
        return cls(scheme=scheme, assignments=assignments, provenance=provenance,
                   conflicts=tuple(conflicts))

    def merged(self, rows: Iterable[tuple[str, str, str]]) -> "LabelCatalog":
        """New catalog with extra rows folded in under the same priority rules."""
        existing = [(e, self.assignments[e], self.provenance[e])
                    for e in sorted(self.assignments)]
        return self.build(self.scheme, existing + list(rows))


@dataclass(frozen=True)
class MembershipTable:
    """Reference-population membership: topic_id to the set of its entities."""

    members: dict[str, frozenset[str]]

    def topics(self) -> list[str]:
        return sorted(self.members)

    def restrict(self, topic_ids: Iterable[str]) -> "MembershipTable":
        keep = set(topic_ids)
        return MembershipTable({t: s for t, s in self.members.items() if t in keep})

    def __len__(self) -> int:
        return len(self.members)


def _priority(provenance: str) -> int:
    return PROVENANCE_PRIORITY.get(provenance, 0)


def _source_lines(source: str | IO[str]) -> Iterator[str]:
    if isinstance(source, str):
        return iter(source.splitlines())
    return iter(line.rstrip("\n").rstrip("\r") for line in source)


def _rows(source: str | IO[str], path: str,
          header: tuple[str, ...]) -> Iterator[tuple[int, list[str]]]:
    """Yield (line number, fields) skipping comments, blanks and the header."""
    first_data_seen = False
    for line_no, line in enumerate(_source_lines(source), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.split("\t")
        if not first_data_seen:
            first_data_seen = True
            lowered = tuple(f.strip().lower() for f in fields)
            if lowered == header[:len(lowered)] and len(lowered) >= 2:
                continue
        yield line_no, fields


def _expect_columns(fields: list[str], allowed: tuple[int, ...], path: str,
                    line: int) -> None:
    if len(fields) not in allowed:
        counts = " or ".join(str(a) for a in allowed)
        raise ParseError(f"expected {counts} tab-separated fields, got {len(fields)}",
                         path=path, line=line)


def _check_field(value: str, column: str) -> str:
    if "\t" in value or "\n" in value or "\r" in value:
        raise ValueError(f"{column} value {value!r} contains a tab or newline")
    return value


def _named(source: str | IO[str], path: str | None, fallback: str) -> str:
    if path is not None:
        return path
    return getattr(source, "name", fallback)


# ---------------------------------------------------------------------------
# runs
# ---------------------------------------------------------------------------

def parse_runs(source: str | IO[str], path: str | None = None) -> list[RankedRun]:
    """Parse ranked runs, validating 1-based contiguous ranks per topic."""
    path = _named(source, path, "<runs>")
    ordered: dict[str, list[str]] = {}
    seen: dict[str, set[str]] = {}
    for line_no, fields in _rows(source, path, RUNS_HEADER):
        _expect_columns(fields, (3,), path, line_no)
        topic_id, rank_text, entity_id = (f.strip() for f in fields)
        if not topic_id or not entity_id:
            raise ParseError("empty topic_id or entity_id", path=path, line=line_no,
                             field="topic_id" if not topic_id else "entity_id")
        try:
            rank = int(rank_text)
        except ValueError:
            raise ParseError(f"rank {rank_text!r} is not an integer", path=path,
                             line=line_no, field="rank") from None
        entries = ordered.setdefault(topic_id, [])
        expected = len(entries) + 1
        if rank != expected:
            raise ParseError(
                f"topic {topic_id!r}: expected rank {expected}, got {rank} "
                f"(ranks must be contiguous from 1)",
                path=path, line=line_no, field="rank")
        if entity_id in seen.setdefault(topic_id, set()):
            raise ParseError(f"topic {topic_id!r} lists entity {entity_id!r} twice",
                             path=path, line=line_no, field="entity_id")
        entries.append(entity_id)
        seen[topic_id].add(entity_id)
    return [RankedRun(topic_id=t, entries=tuple(ordered[t])) for t in sorted(ordered)]


def serialize_runs(runs: Iterable[RankedRun]) -> str:
    lines = ["\t".join(RUNS_HEADER)]
    for run in sorted(runs, key=lambda r: r.topic_id):
        for rank, entity in enumerate(run.entries, start=1):
            lines.append(f"{_check_field(run.topic_id, 'topic_id')}\t{rank}\t"
                         f"{_check_field(entity, 'entity_id')}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# labels
# ---------------------------------------------------------------------------

def parse_labels(source: str | IO[str], scheme: FeatureScheme,
                 path: str | None = None) -> LabelCatalog:
    """Parse a label catalog for ``scheme``'s feature.

    Rows for other features are ignored so one file can serve several audits.
    Conflicting assignments resolve by provenance priority
    (manual > kb > inferred > anything else); every override is recorded on
    the returned catalog.
    """
    path = _named(source, path, "<labels>")
    allowed = set(scheme.values) | {scheme.unknown_token}
    rows: list[tuple[str, str, str]] = []
    for line_no, fields in _rows(source, path, LABELS_HEADER):
        _expect_columns(fields, (3, 4), path, line_no)
        entity_id = fields[0].strip()
        feature_name = fields[1].strip()
        value = fields[2].strip()
        prov = fields[3].strip() if len(fields) == 4 and fields[3].strip() else DEFAULT_PROVENANCE
        if not entity_id:
            raise ParseError("empty entity_id", path=path, line=line_no, field="entity_id")
        if feature_name != scheme.feature_name:
            continue
        if value not in allowed:
            raise ParseError(
                f"value {value!r} is not declared for feature {scheme.feature_name!r} "
                f"(declared: {', '.join(scheme.values)}; unknown: {scheme.unknown_token!r})",
                path=path, line=line_no, field="value")
        rows.append((entity_id, value, prov))
    return LabelCatalog.build(scheme, rows)


def serialize_labels(catalog: LabelCatalog) -> str:
    lines = ["\t".join(LABELS_HEADER)]
    for entity in sorted(catalog.assignments):
        lines.append("\t".join((
            _check_field(entity, "entity_id"),
            _check_field(catalog.feature_name, "feature_name"),
            _check_field(catalog.assignments[entity], "value"),
            _check_field(catalog.provenance[entity], "provenance"),
        )))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# members and target counts
# ---------------------------------------------------------------------------

def parse_members(source: str | IO[str], path: str | None = None) -> MembershipTable:
    """Parse topic membership rows; duplicate pairs are deduplicated."""
    path = _named(source, path, "<members>")
    members: dict[str, set[str]] = {}
    for line_no, fields in _rows(source, path, MEMBERS_HEADER):
        _expect_columns(fields, (2,), path, line_no)
        topic_id, entity_id = (f.strip() for f in fields)
        if not topic_id or not entity_id:
            raise ParseError("empty topic_id or entity_id", path=path, line=line_no,
                             field="topic_id" if not topic_id else "entity_id")
        members.setdefault(topic_id, set()).add(entity_id)
    return MembershipTable({t: frozenset(s) for t, s in members.items()})


def serialize_members(table: MembershipTable) -> str:
    lines = ["\t".join(MEMBERS_HEADER)]
    for topic in table.topics():
        for entity in sorted(table.members[topic]):
            lines.append(f"{_check_field(topic, 'topic_id')}\t"
                         f"{_check_field(entity, 'entity_id')}")
    return "\n".join(lines) + "\n"


def counts_for_topic(topic_id: str, entity_ids: Iterable[str],
                     labels: LabelCatalog) -> TargetCounts:
    """Tally one topic's members by feature value.

    Members without a usable label are tallied separately and excluded from
    the total: the target ratio is a ratio over the labeled population.
    Raises EmptyPopulationError when no member is labeled.
    """
    counts = {value: 0 for value in labels.scheme.values}
    unknown = 0
    for entity in entity_ids:
        value = labels.label_of(entity)
        if value is None:
            unknown += 1
        else:
            counts[value] += 1
    if sum(counts.values()) == 0:
        raise EmptyPopulationError(
            f"topic {topic_id!r} has no labeled members for feature "
            f"{labels.feature_name!r} ({unknown} unknown)")
    return TargetCounts(topic_id=topic_id, feature_name=labels.feature_name,
                        counts={v: c for v, c in counts.items() if c > 0},
                        unknown_count=unknown)


def counts_from_membership(members: MembershipTable, labels: LabelCatalog,
                           scheme: FeatureScheme) -> list[TargetCounts]:
    """Per-topic value counts over the labeled members of each topic."""
    if labels.scheme != scheme:
        raise SchemeViolationError("label catalog does not use the given scheme")
    return [counts_for_topic(topic, sorted(members.members[topic]), labels)
            for topic in members.topics()]


def parse_target_counts(source: str | IO[str], scheme: FeatureScheme,
                        path: str | None = None) -> list[TargetCounts]:
    """Parse pre-aggregated target counts.

    Rows may carry an optional trailing total column; when present it is
    cross-checked against the recomputed sum of the topic's labeled counts.
    Rows whose value is the scheme's unknown token feed the separate unknown
    tally instead of the labeled total.
    """
    path = _named(source, path, "<targets>")
    allowed = set(scheme.values) | {scheme.unknown_token}
    counts: dict[str, dict[str, int]] = {}
    unknowns: dict[str, int] = {}
    declared_totals: dict[str, tuple[int, int]] = {}  # topic -> (total, line)
    first_lines: dict[str, int] = {}
    for line_no, fields in _rows(source, path, TARGETS_HEADER):
        _expect_columns(fields, (4, 5), path, line_no)
        topic_id = fields[0].strip()
        feature_name = fields[1].strip()
        value = fields[2].strip()
        if not topic_id:
            raise ParseError("empty topic_id", path=path, line=line_no, field="topic_id")
        if feature_name != scheme.feature_name:
            continue
        if value not in allowed:
            raise ParseError(
                f"value {value!r} is not declared for feature {scheme.feature_name!r}",
                path=path, line=line_no, field="value")
        try:
            count = int(fields[3].strip())
        except ValueError:
            raise ParseError(f"count {fields[3].strip()!r} is not an integer",
                             path=path, line=line_no, field="count") from None
        if count < 0:
            raise ParseError(f"negative count {count}", path=path, line=line_no,
                             field="count")
        if len(fields) == 5 and fields[4].strip():
            try:
                declared = int(fields[4].strip())
            except ValueError:
                raise ParseError(f"total {fields[4].strip()!r} is not an integer",
                                 path=path, line=line_no, field="total") from None
            held = declared_totals.get(topic_id)
            if held is not None and held[0] != declared:
                raise ParseError(
                    f"topic {topic_id!r} declares conflicting totals {held[0]} and {declared}",
                    path=path, line=line_no, field="total")
            if held is None:
                declared_totals[topic_id] = (declared, line_no)
        first_lines.setdefault(topic_id, line_no)
        if value == scheme.unknown_token:
            if topic_id in unknowns:
                raise ParseError(f"topic {topic_id!r} repeats its unknown row",
                                 path=path, line=line_no, field="value")
            unknowns[topic_id] = count
            continue
        per_topic = counts.setdefault(topic_id, {})
        if value in per_topic:
            raise ParseError(f"topic {topic_id!r} repeats value {value!r}",
                             path=path, line=line_no, field="value")
        per_topic[value] = count

    result = []
    for topic_id in sorted(set(counts) | set(unknowns)):
        labeled = counts.get(topic_id, {})
        total = sum(labeled.values())
        if topic_id in declared_totals:
            declared, decl_line = declared_totals[topic_id]
            if declared != total:
                raise ParseError(
                    f"topic {topic_id!r}: declared total {declared} does not match "
                    f"recomputed labeled total {total}",
                    path=path, line=decl_line, field="total")
        if total < 1:
            raise ParseError(
                f"topic {topic_id!r} has no labeled counts (empty population)",
                path=path, line=first_lines[topic_id], field="count")
        result.append(TargetCounts(topic_id=topic_id, feature_name=scheme.feature_name,
                                   counts=labeled,
                                   unknown_count=unknowns.get(topic_id, 0)))
    return result


def serialize_target_counts(counts: Iterable[TargetCounts],
                            scheme: FeatureScheme) -> str:
    lines = ["\t".join(TARGETS_HEADER[:4])]
    for tc in sorted(counts, key=lambda c: c.topic_id):
        for value in sorted(tc.counts):
            lines.append("\t".join((
                _check_field(tc.topic_id, "topic_id"),
                _check_field(tc.feature_name, "feature_name"),
                _check_field(value, "value"),
                str(tc.counts[value]),
            )))
        if tc.unknown_count:
            lines.append("\t".join((tc.topic_id, tc.feature_name,
                                    scheme.unknown_token, str(tc.unknown_count))))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# SPARQL result exports
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SparqlExtraction:
    """Membership plus raw label rows pulled from a SPARQL result export."""

    members: MembershipTable
    label_rows: tuple[tuple[str, str], ...]  # (entity_id, raw value), in file order

    def restrict(self, topic_ids: Iterable[str]) -> "SparqlExtraction":
        restricted = self.members.restrict(topic_ids)
        keep = set()
        for entities in restricted.members.values():
            keep |= entities
        rows = tuple((e, v) for e, v in self.label_rows if e in keep)
        return SparqlExtraction(members=restricted, label_rows=rows)


def _terminal_segment(iri: str) -> str:
    trimmed = iri.rstrip("/#")
    for sep in ("#", "/"):
        if sep in trimmed:
            trimmed = trimmed.rsplit(sep, 1)[1]
    return trimmed or iri


def _looks_like_iri(text: str) -> bool:
    return text.startswith(("http://", "https://", "urn:"))


def parse_sparql_results(source: str | IO[str], *, topic_var: str = "topic",
                         entity_var: str = "entity", value_var: str = "value",
                         shorten_iris: bool = True, strict: bool = False,
                         path: str | None = None) -> SparqlExtraction:
    """Parse a W3C SPARQL result export (JSON or TSV) into audit fragments.

    The three variables name the bindings acting as topic, entity and feature
    value. IRI-typed bindings are shortened to their terminal segment when
    ``shorten_iris`` is set, so Wikidata-style exports key by Q-identifier.
    Rows lacking a value binding contribute membership only. In strict mode a
    non-IRI entity binding is an error.
    """
    path = _named(source, path, "<sparql>")
    text = source if isinstance(source, str) else source.read()
    if text.lstrip().startswith("{"):
        return _parse_sparql_json(text, topic_var, entity_var, value_var,
                                  shorten_iris, strict, path)
    return _parse_sparql_tsv(text, topic_var, entity_var, value_var,
                             shorten_iris, strict, path)


def _parse_sparql_json(text: str, topic_var: str, entity_var: str, value_var: str,
                       shorten_iris: bool, strict: bool, path: str) -> SparqlExtraction:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", path=path, line=exc.lineno) from None
    declared = doc.get("head", {}).get("vars", [])
    for var in (topic_var, entity_var):
        if var not in declared:
            raise ParseError(f"missing binding column {var!r} (declared: "
                             f"{', '.join(declared) or 'none'})", path=path, field=var)
    bindings = doc.get("results", {}).get("bindings", [])

    members: dict[str, set[str]] = {}
    label_rows: list[tuple[str, str]] = []
    for row_no, binding in enumerate(bindings, start=1):
        topic = _binding_text(binding.get(topic_var), shorten_iris)
        entity_cell = binding.get(entity_var)
        entity = _binding_text(entity_cell, shorten_iris)
        if topic is None or entity is None:
            missing = topic_var if topic is None else entity_var
            raise ParseError(f"row is missing the {missing!r} binding", path=path,
                             line=row_no, field=missing)
        if strict and entity_cell.get("type") != "uri":
            raise ParseError(f"entity binding {entity!r} is not an IRI", path=path,
                             line=row_no, field=entity_var)
        members.setdefault(topic, set()).add(entity)
        value = _binding_text(binding.get(value_var), shorten_iris)
        if value is not None:
            label_rows.append((entity, value))
    return SparqlExtraction(
        members=MembershipTable({t: frozenset(s) for t, s in members.items()}),
        label_rows=tuple(label_rows))


def _binding_text(cell: dict | None, shorten_iris: bool) -> str | None:
    if cell is None:
        return None
    value = str(cell.get("value", ""))
    if not value:
        return None
    if shorten_iris and cell.get("type") == "uri":
        return _terminal_segment(value)
    return value


def _parse_sparql_tsv(text: str, topic_var: str, entity_var: str, value_var: str,
                      shorten_iris: bool, strict: bool, path: str) -> SparqlExtraction:
    lines = [l for l in text.splitlines()]
    header_idx = None
    for i, line in enumerate(lines):
        if line.strip() and not line.startswith("#"):
            header_idx = i
            break
    if header_idx is None:
        raise ParseError("no header line with variable names", path=path, line=1)
    names = [c.strip().lstrip("?") for c in lines[header_idx].split("\t")]
    columns = {}
    for var in (topic_var, entity_var, value_var):
        if var not in names:
            if var == value_var:
                continue  # value column may be absent; rows then carry no labels
            raise ParseError(f"missing binding column {var!r} (header: "
                             f"{', '.join(names)})", path=path,
                             line=header_idx + 1, field=var)
        columns[var] = names.index(var)

    members: dict[str, set[str]] = {}
    label_rows: list[tuple[str, str]] = []
    for line_no, line in enumerate(lines[header_idx + 1:], start=header_idx + 2):
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != len(names):
            raise ParseError(f"expected {len(names)} fields, got {len(fields)}",
                             path=path, line=line_no)
        topic = _tsv_term(fields[columns[topic_var]], shorten_iris)
        raw_entity = fields[columns[entity_var]].strip()
        entity = _tsv_term(raw_entity, shorten_iris)
        if not topic or not entity:
            which = topic_var if not topic else entity_var
            raise ParseError(f"row is missing the {which!r} binding", path=path,
                             line=line_no, field=which)
        if strict and not raw_entity.startswith("<"):
            raise ParseError(f"entity binding {entity!r} is not an IRI", path=path,
                             line=line_no, field=entity_var)
        members.setdefault(topic, set()).add(entity)
        if value_var in columns:
            value = _tsv_term(fields[columns[value_var]], shorten_iris)
            if value:
                label_rows.append((entity, value))
    return SparqlExtraction(
        members=MembershipTable({t: frozenset(s) for t, s in members.items()}),
        label_rows=tuple(label_rows))


def _tsv_term(raw: str, shorten_iris: bool) -> str:
    """Decode one SPARQL TSV term: <iri>, "literal"(@lang|^^type) or plain."""
    term = raw.strip()
    if term.startswith("<") and term.endswith(">"):
        iri = term[1:-1]
        return _terminal_segment(iri) if shorten_iris else iri
    if term.startswith('"'):
        end = term.rfind('"')
        if end > 0:
            body = term[1:end]
            return body.replace('\\"', '"').replace("\\\\", "\\")
    if shorten_iris and _looks_like_iri(term):
        return _terminal_segment(term)
    return term


def extraction_to_catalog(extraction: SparqlExtraction, scheme: FeatureScheme,
                          *, provenance: str = DEFAULT_PROVENANCE,
                          value_map: dict[str, str] | None = None) -> LabelCatalog:
    """Turn raw SPARQL label rows into a catalog under ``scheme``.

    ``value_map`` translates raw export values (for example Q-identifiers)
    into declared values or the unknown token; unmapped raw values must
    already be declared.
    """
    allowed = set(scheme.values) | {scheme.unknown_token}
    rows = []
    for entity, raw in extraction.label_rows:
        value = value_map.get(raw, raw) if value_map else raw
        if value not in allowed:
            raise SchemeViolationError(
                f"export value {raw!r} (mapped to {value!r}) is not declared for "
                f"feature {scheme.feature_name!r}")
        rows.append((entity, value, provenance))
    return LabelCatalog.build(scheme, rows)
