from __future__ import annotations

import io
import random
from fractions import Fraction

import pytest

import support
from biaslens import (
    EmptyPopulationError,
    FeatureScheme,
    LabelCatalog,
    MembershipTable,
    ParseError,
    counts_from_membership,
    parse_labels,
    parse_members,
    parse_runs,
    parse_target_counts,
    serialize_labels,
    serialize_members,
    serialize_runs,
    serialize_target_counts,
    simulate_run,
    target_ratio,
)

F = Fraction


class TestParseRuns:
    def test_three_line_fixture(self):
        runs = parse_runs("t1\t1\te1\nt1\t2\te2\nt2\t1\te9\n")
        assert [(r.topic_id, len(r)) for r in runs] == [("t1", 2), ("t2", 1)]

    def test_interleaved_topics(self):
        runs = parse_runs("t1\t1\te1\nt2\t1\te9\nt1\t2\te2\n")
        assert [(r.topic_id, r.entries) for r in runs] == [
            ("t1", ("e1", "e2")), ("t2", ("e9",))]

    def test_comments_blank_lines_and_header(self):
        text = "# crawl snapshot\ntopic_id\trank\tentity_id\n\nt1\t1\te1\n"
        runs = parse_runs(text)
        assert len(runs) == 1 and runs[0].entries == ("e1",)

    def test_rank_gap_names_file_and_line(self):
        with pytest.raises(ParseError) as err:
            parse_runs("t1\t1\te1\nt1\t3\te3\n", path="runs.tsv")
        assert "runs.tsv:2" in str(err.value)
        assert "expected rank 2" in str(err.value)

    def test_rank_not_integer(self):
        with pytest.raises(ParseError, match="rank"):
            parse_runs("t1\tfirst\te1\n")

    def test_duplicate_entity(self):
        with pytest.raises(ParseError, match="twice"):
            parse_runs("t1\t1\te1\nt1\t2\te1\n")

    def test_wrong_column_count(self):
        with pytest.raises(ParseError, match="fields"):
            parse_runs("t1\t1\n")

    def test_round_trip_identity(self):
        text = "t2\t1\tx\nt1\t1\te1\nt1\t2\te2\n"
        first = parse_runs(text)
        second = parse_runs(serialize_runs(first))
        assert first == second

    def test_large_generated_corpus(self, gender):
        rng = random.Random(4)
        topics = []
        for i in range(454):
            m = rng.randint(1, 10)
            topics.append(simulate_run(f"t{i:03d}", F(1, 2), F(0), m, gender,
                                       "female", seed=i))
        text = serialize_runs(t.run for t in topics)
        runs = parse_runs(text)
        assert len(runs) == 454
        assert all(len(r) <= 10 for r in runs)


class TestParseLabels:
    def test_direct_parse(self, gender):
        catalog = parse_labels("e1\tgender\tfemale\tkb\n", gender)
        assert catalog.assignments == {"e1": "female"}
        assert catalog.provenance == {"e1": "kb"}

    def test_provenance_defaults_to_kb(self, gender):
        catalog = parse_labels("e1\tgender\tfemale\n", gender)
        assert catalog.provenance["e1"] == "kb"

    def test_manual_overrides_kb(self, gender):
        catalog = parse_labels("e1\tgender\tfemale\tkb\ne1\tgender\tmale\tmanual\n",
                               gender)
        assert catalog.assignments["e1"] == "male"
        assert len(catalog.conflicts) == 1
        conflict = catalog.conflicts[0]
        assert conflict.kept_value == "male"
        assert conflict.kept_provenance == "manual"
        assert conflict.dropped_value == "female"
        assert conflict.dropped_provenance == "kb"

    def test_kb_does_not_override_manual(self, gender):
        catalog = parse_labels("e1\tgender\tmale\tmanual\ne1\tgender\tfemale\tkb\n",
                               gender)
        assert catalog.assignments["e1"] == "male"
        assert len(catalog.conflicts) == 1

    def test_equal_priority_keeps_first(self, gender):
        catalog = parse_labels("e1\tgender\tfemale\tkb\ne1\tgender\tmale\tkb\n",
                               gender)
        assert catalog.assignments["e1"] == "female"
        assert len(catalog.conflicts) == 1

    def test_same_value_upgrades_provenance_quietly(self, gender):
        catalog = parse_labels(
            "e1\tgender\tfemale\tkb\ne1\tgender\tfemale\tmanual\n", gender)
        assert catalog.provenance["e1"] == "manual"
        assert catalog.conflicts == ()

    def test_unlisted_provenance_ranks_lowest(self, gender):
        catalog = parse_labels(
            "e1\tgender\tfemale\tguessed\ne1\tgender\tmale\tinferred\n", gender)
        assert catalog.assignments["e1"] == "male"

    def test_explicit_unknown_round_trips(self, gender):
        catalog = parse_labels("e1\tgender\tunknown\tmanual\n", gender)
        assert catalog.label_of("e1") is None
        assert catalog.assignments["e1"] == "unknown"
        assert parse_labels(serialize_labels(catalog), gender) == catalog

    def test_other_features_ignored(self, gender):
        catalog = parse_labels("e1\tage\tyoung\ne2\tgender\tmale\n", gender)
        assert set(catalog.assignments) == {"e2"}

    def test_value_outside_scheme(self, gender):
        with pytest.raises(ParseError) as err:
            parse_labels("e1\tgender\tother\tkb\n", gender, path="labels.tsv")
        assert "labels.tsv:1" in str(err.value)

    def test_round_trip_identity(self, gender):
        text = ("b\tgender\tmale\tmanual\na\tgender\tfemale\tkb\n"
                "c\tgender\tunknown\tinferred\n")
        first = parse_labels(text, gender)
        assert parse_labels(serialize_labels(first), gender) == first

    def test_unknown_in_window_matches_hand_count(self, gender):
        # 20-entity fixture: entities e00..e19; labels only for even indexes,
        # with e04/e08 explicitly unknown. Window of 10 therefore has 5
        # catalog misses + 2 explicit unknowns = 7 unlabeled entities.
        rows = []
        for i in range(0, 20, 2):
            value = "unknown" if i in (4, 8) else ("female" if i % 4 == 0 else "male")
            rows.append(f"e{i:02d}\tgender\t{value}\tkb")
        catalog = parse_labels("\n".join(rows) + "\n", gender)
        window = [f"e{i:02d}" for i in range(10)]
        unlabeled = sum(1 for e in window if catalog.label_of(e) is None)
        assert unlabeled == 7


class TestMembersAndCounts:
    def test_parse_and_dedupe(self):
        table = parse_members("t1\te1\nt1\te1\nt1\te2\nt2\te9\n")
        assert table.members == {"t1": frozenset({"e1", "e2"}),
                                 "t2": frozenset({"e9"})}

    def test_round_trip_identity(self):
        table = parse_members("t2\tz\nt1\tb\nt1\ta\n")
        assert parse_members(serialize_members(table)) == table

    def test_counts_with_unknowns(self, gender):
        catalog = support.catalog_of(gender, {"e1": "female", "e2": "male",
                                              "e3": "male"})
        table = MembershipTable({"t": frozenset({"e1", "e2", "e3", "e4"})})
        (counts,) = counts_from_membership(table, catalog, gender)
        assert counts.counts == {"female": 1, "male": 2}
        assert counts.total == 3
        assert counts.unknown_count == 1

    def test_single_valued_population(self, gender):
        catalog = support.catalog_of(gender, {"e1": "male", "e2": "male"})
        table = MembershipTable({"t": frozenset({"e1", "e2"})})
        (counts,) = counts_from_membership(table, catalog, gender)
        assert target_ratio(counts, "male", gender) == 1

    def test_zero_labeled_members_names_topic(self, gender):
        catalog = support.catalog_of(gender, {"other": "male"})
        table = MembershipTable({"ghost-topic": frozenset({"e1", "e2"})})
        with pytest.raises(EmptyPopulationError, match="ghost-topic"):
            counts_from_membership(table, catalog, gender)

    def test_matches_group_by_oracle(self, gender):
        # 50 synthetic topics; oracle is an independent one-pass tally over
        # the raw (topic, entity, label) triples.
        rng = random.Random(11)
        mapping = {}
        members: dict[str, set[str]] = {}
        for t in range(50):
            topic = f"p{t:02d}"
            members[topic] = set()
            for i in range(rng.randint(1, 30)):
                entity = f"{topic}:e{i}"
                members[topic].add(entity)
                roll = rng.random()
                if roll < 0.45:
                    mapping[entity] = "female"
                elif roll < 0.9:
                    mapping[entity] = "male"
                # else: leave unlabeled
        # Guarantee every topic has at least one labeled member.
        for topic, entities in members.items():
            mapping[sorted(entities)[0]] = "female"
        catalog = support.catalog_of(gender, mapping)
        table = MembershipTable({t: frozenset(s) for t, s in members.items()})
        result = {c.topic_id: c for c in counts_from_membership(table, catalog, gender)}

        oracle: dict[str, dict[str, int]] = {}
        oracle_unknown: dict[str, int] = {}
        for topic, entities in members.items():
            for entity in entities:
                label = mapping.get(entity)
                if label is None:
                    oracle_unknown[topic] = oracle_unknown.get(topic, 0) + 1
                else:
                    oracle.setdefault(topic, {}).setdefault(label, 0)
                    oracle[topic][label] += 1
        for topic in members:
            assert result[topic].counts == oracle[topic]
            assert result[topic].unknown_count == oracle_unknown.get(topic, 0)


class TestParseTargetCounts:
    def test_direct_ratio(self, gender):
        counts = parse_target_counts(
            "t1\tgender\tfemale\t30\nt1\tgender\tmale\t70\n", gender)
        assert target_ratio(counts[0], "female", gender) == F(3, 10)

    def test_negative_count(self, gender):
        with pytest.raises(ParseError) as err:
            parse_target_counts("t1\tgender\tfemale\t-1\n", gender, path="targets.tsv")
        assert "negative count" in str(err.value)
        assert "targets.tsv:1" in str(err.value)

    def test_value_outside_scheme(self, gender):
        with pytest.raises(ParseError, match="not declared"):
            parse_target_counts("t1\tgender\tdog\t3\n", gender)

    def test_duplicate_value_row(self, gender):
        with pytest.raises(ParseError, match="repeats"):
            parse_target_counts(
                "t1\tgender\tfemale\t3\nt1\tgender\tfemale\t4\n", gender)

    def test_declared_total_cross_check(self, gender):
        good = "t1\tgender\tfemale\t3\t10\nt1\tgender\tmale\t7\t10\n"
        assert parse_target_counts(good, gender)[0].total == 10
        bad = "t1\tgender\tfemale\t3\t11\nt1\tgender\tmale\t7\t11\n"
        with pytest.raises(ParseError, match="total"):
            parse_target_counts(bad, gender)

    def test_conflicting_declared_totals(self, gender):
        text = "t1\tgender\tfemale\t3\t10\nt1\tgender\tmale\t7\t9\n"
        with pytest.raises(ParseError, match="conflicting totals"):
            parse_target_counts(text, gender)

    def test_unknown_row_excluded_from_total(self, gender):
        counts = parse_target_counts(
            "t1\tgender\tfemale\t3\nt1\tgender\tmale\t7\nt1\tgender\tunknown\t5\n",
            gender)
        assert counts[0].total == 10
        assert counts[0].unknown_count == 5

    def test_only_unknown_rows_is_empty_population(self, gender):
        with pytest.raises(ParseError, match="empty population"):
            parse_target_counts("t1\tgender\tunknown\t5\n", gender)

    def test_membership_round_trip(self, gender):
        catalog = support.catalog_of(
            gender, {"a": "female", "b": "male", "c": "male", "d": "female"})
        table = MembershipTable({"t1": frozenset({"a", "b", "e"}),
                                 "t2": frozenset({"c", "d"})})
        first = counts_from_membership(table, catalog, gender)
        text = serialize_target_counts(first, gender)
        assert parse_target_counts(text, gender) == first


class TestStreamsAndFields:
    def test_file_object_supplies_name(self, gender, tmp_path):
        path = tmp_path / "labels.tsv"
        path.write_text("e1\tgender\tbogus\n", encoding="utf-8")
        with open(path, encoding="utf-8") as handle:
            with pytest.raises(ParseError) as err:
                parse_labels(handle, gender)
        assert str(path) in str(err.value)

    def test_stringio_parses(self):
        runs = parse_runs(io.StringIO("t1\t1\te1\n"))
        assert runs[0].entries == ("e1",)

    def test_serializer_rejects_tab_in_field(self, gender):
        catalog = LabelCatalog.build(gender, [("e\t1", "female", "kb")])
        with pytest.raises(ValueError, match="tab"):
            serialize_labels(catalog)


class TestCatalogMerge:
    def test_merge_respects_priorities(self, gender):
        base = LabelCatalog.build(gender, [("e1", "female", "manual"),
                                           ("e2", "male", "kb")])
        merged = base.merged([("e1", "male", "kb"), ("e3", "female", "kb")])
        assert merged.assignments == {"e1": "female", "e2": "male", "e3": "female"}
        assert len(merged.conflicts) == 1

    def test_catalog_rejects_undeclared_value(self, gender):
        with pytest.raises(Exception):
            LabelCatalog(scheme=gender, assignments={"e": "dog"},
                         provenance={"e": "kb"})
