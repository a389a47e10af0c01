"""Core representation-bias measurement over ranked results.

The measurement compares, for one categorical feature value, the share of
results carrying that value inside the top-n window of a ranked list (the
model ratio) against the share expected from a reference population (the
target ratio). Because a length-m window can only realize ratios on the
1/m grid, the raw target ratio is first rounded to that grid; when it sits
exactly halfway between two attainable counts, the count shown by the
system is accepted as correct. Bias is the exact difference between the
model ratio and that rounded target ratio, so it always lies on the 1/m
grid with values in [-1, 1].

All arithmetic is carried as exact rationals (fractions.Fraction);
floating point appears only when results are rendered.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import TYPE_CHECKING, NamedTuple, Sequence

from .errors import (
    EmptyAggregateError,
    EmptyPopulationError,
    EmptyRunError,
    InfeasibleSimulationError,
    SchemeViolationError,
    TopicMismatchError,
    UnlabeledEntityError,
)
from ._util import derive_seed

if TYPE_CHECKING:  # pragma: no cover - import cycle guard for annotations only
    from .ingest import LabelCatalog

Ratio = Fraction

HALF = Fraction(1, 2)


@dataclass(frozen=True)
class FeatureScheme:
    """A categorical feature with its admissible values.

    ``values`` is an ordered set of at least two distinct value identifiers.
    ``unknown_token`` marks entities whose value is not known; it is reserved
    and must not collide with any declared value. Binary schemes get exact
    symmetry guarantees; larger schemes are evaluated one-vs-rest per value.
    """

    feature_name: str
    values: tuple[str, ...]
    unknown_token: str = "unknown"

    def __post_init__(self) -> None:
        if not self.feature_name:
            raise SchemeViolationError("feature_name must be non-empty")
        values = tuple(self.values)
        object.__setattr__(self, "values", values)
        if len(values) < 2:
            raise SchemeViolationError(
                f"scheme {self.feature_name!r} needs at least 2 values, got {len(values)}")
        if len(set(values)) != len(values):
            raise SchemeViolationError(f"scheme {self.feature_name!r} has duplicate values")
        if any(not v for v in values):
            raise SchemeViolationError(f"scheme {self.feature_name!r} has an empty value")
        if self.unknown_token in values:
            raise SchemeViolationError(
                f"unknown token {self.unknown_token!r} collides with a declared value")

    @property
    def is_binary(self) -> bool:
        return len(self.values) == 2

    def require_value(self, value: str) -> None:
        if value not in self.values:
            raise SchemeViolationError(
                f"value {value!r} is not declared for feature {self.feature_name!r}; "
                f"declared: {', '.join(self.values)}")

    def complement(self, value: str) -> str:
        """The other value of a binary scheme."""
        self.require_value(value)
        if not self.is_binary:
            raise SchemeViolationError(
                f"complement is defined only for binary schemes, {self.feature_name!r} "
                f"has {len(self.values)} values")
        first, second = self.values
        return second if value == first else first


@dataclass(frozen=True)
class RankedRun:
    """One topic's ranked list of entity identifiers, ranks 1..m."""

    topic_id: str
    entries: tuple[str, ...]

    def __post_init__(self) -> None:
        entries = tuple(self.entries)
        object.__setattr__(self, "entries", entries)
        if not self.topic_id:
            raise EmptyRunError("run has an empty topic_id")
        if not entries:
            raise EmptyRunError(f"run for topic {self.topic_id!r} has no entries")
        if len(set(entries)) != len(entries):
            dupes = sorted({e for e in entries if entries.count(e) > 1})
            raise SchemeViolationError(
                f"run for topic {self.topic_id!r} lists duplicate entities: {', '.join(dupes)}")

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class TargetCounts:
    """Per-topic feature-value counts over a reference population.

    ``counts`` covers labeled members only; ``unknown_count`` reports members
    without a usable label, which are excluded from the total (the target
    ratio is a ratio over the labeled population).
    """

    topic_id: str
    feature_name: str
    counts: dict[str, int]
    unknown_count: int = 0

    def __post_init__(self) -> None:
        for value, count in self.counts.items():
            if count < 0:
                raise EmptyPopulationError(
                    f"topic {self.topic_id!r}: negative count {count} for value {value!r}")
        if self.unknown_count < 0:
            raise EmptyPopulationError(f"topic {self.topic_id!r}: negative unknown count")
        if self.total < 1:
            raise EmptyPopulationError(
                f"topic {self.topic_id!r} has no labeled members for feature "
                f"{self.feature_name!r}")

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def count_of(self, value: str) -> int:
        return self.counts.get(value, 0)


@dataclass(frozen=True)
class BiasRecord:
    """Full per-topic measurement for one feature value at one cutoff.

    ``cutoff_effective`` is min(requested cutoff, run length); every window
    quantity lives on the 1/cutoff_effective grid. ``rounding_remainder`` is
    the fractional part of raw target ratio times window length, which decides
    whether the attainable target rounds down or up.
    """

    topic_id: str
    feature_value: str
    cutoff_requested: int
    cutoff_effective: int
    model_ratio: Ratio
    target_ratio_raw: Ratio
    rounding_remainder: Ratio
    target_ratio_at_cutoff: Ratio
    bias: Ratio
    unknown_in_window: int

    def __post_init__(self) -> None:
        m = self.cutoff_effective
        if not 1 <= m <= self.cutoff_requested:
            raise ValueError(f"effective cutoff {m} outside [1, {self.cutoff_requested}]")
        for name in ("model_ratio", "target_ratio_at_cutoff"):
            value = getattr(self, name)
            if (value * m).denominator != 1:
                raise ValueError(f"{name}={value} is not on the 1/{m} grid")
        if self.bias != self.model_ratio - self.target_ratio_at_cutoff:
            raise ValueError("bias must equal model_ratio - target_ratio_at_cutoff")
        if abs(self.bias) > 1:
            raise ValueError(f"bias {self.bias} outside [-1, 1]")
        if not 0 <= self.rounding_remainder < 1:
            raise ValueError(f"rounding remainder {self.rounding_remainder} outside [0, 1)")
        if not 0 <= self.unknown_in_window <= m:
            raise ValueError(f"unknown_in_window {self.unknown_in_window} outside [0, {m}]")


@dataclass(frozen=True)
class BiasSummary:
    """Corpus-level aggregates of per-topic bias for one (source, value) pair."""

    feature_value: str
    target_source: str
    topic_count: int
    mean_bias: Ratio
    stdev_bias: float
    mean_abs_bias: Ratio
    min_bias: Ratio
    max_bias: Ratio
    single_sample: bool = False
    population_sd: bool = False

    def __post_init__(self) -> None:
        if self.topic_count < 1:
            raise EmptyAggregateError("summary requires at least one record")
        if self.mean_abs_bias < abs(self.mean_bias):
            raise ValueError("mean absolute bias cannot be below |mean bias|")
        if not self.min_bias <= self.mean_bias <= self.max_bias:
            raise ValueError("mean bias must lie within [min, max]")
        if self.stdev_bias < 0:
            raise ValueError("standard deviation cannot be negative")


class WindowRatio(NamedTuple):
    """Share of a window carrying one value, plus window bookkeeping."""

    ratio: Ratio
    cutoff_effective: int
    unknown_in_window: int


def target_ratio(counts: TargetCounts, value: str, scheme: FeatureScheme) -> Ratio:
    """Share of the labeled reference population carrying ``value``.

    Exact rational count-over-total. The value must be declared by the
    scheme; a population with zero labeled members is rejected.
    """
    scheme.require_value(value)
    for counted in counts.counts:
        if counted not in scheme.values:
            raise SchemeViolationError(
                f"topic {counts.topic_id!r}: counted value {counted!r} is not declared "
                f"for feature {scheme.feature_name!r}")
    total = counts.total
    if total < 1:
        raise EmptyPopulationError(
            f"topic {counts.topic_id!r} has an empty labeled population")
    return Fraction(counts.count_of(value), total)


def _window(run: RankedRun, n: int) -> tuple[tuple[str, ...], int]:
    if n < 1:
        raise ValueError(f"cutoff must be >= 1, got {n}")
    if not run.entries:
        raise EmptyRunError(f"run for topic {run.topic_id!r} has no entries")
    m = min(n, len(run.entries))
    return run.entries[:m], m


def naive_target_ratio_at_n(run: RankedRun, labels: "LabelCatalog",
                            value: str, n: int) -> Ratio:
    """Plain share of the top-m window labeled ``value`` (diagnostic only).

    This cut-off estimator ignores that a length-m window cannot realize an
    arbitrary ratio, so it can indicate bias where none is attainable. It is
    provided for diagnostics and never feeds the bias computation.
    """
    labels.scheme.require_value(value)
    window, m = _window(run, n)
    hits = sum(1 for entity in window if labels.label_of(entity) == value)
    return Fraction(hits, m)


def model_ratio_at_n(run: RankedRun, labels: "LabelCatalog", value: str, n: int,
                     *, strict: bool = False) -> WindowRatio:
    """Share of the top-m window the system filled with ``value``.

    Entities without a label stay in the denominator but join no value's
    numerator; their number is reported. In strict mode any unlabeled entity
    inside the window is an error.
    """
    labels.scheme.require_value(value)
    window, m = _window(run, n)
    hits = 0
    unknown = 0
    for entity in window:
        label = labels.label_of(entity)
        if label == value:
            hits += 1
        elif label is None:
            unknown += 1
    if strict and unknown:
        missing = [e for e in window if labels.label_of(e) is None]
        raise UnlabeledEntityError(
            f"topic {run.topic_id!r}: {unknown} unlabeled entities in the top-{m} window: "
            f"{', '.join(missing)}")
    return WindowRatio(Fraction(hits, m), m, unknown)


def ideal_target_ratio_at_n(target: Ratio, model: Ratio, m: int) -> tuple[Ratio, Ratio]:
    """Round the raw target ratio onto the attainable 1/m grid.

    Returns (rounded ratio, rounding remainder). The remainder is the
    fractional part of target * m: below one half the count rounds down,
    above one half it rounds up, and at exactly one half the candidate
    closer to the model ratio is taken, i.e. the count the system shows is
    accepted as correct. The model ratio must lie on the 1/m grid, which
    also guarantees the half-way comparison never ties: the two candidates
    differ by exactly 1/m.
    """
    if m < 1:
        raise ValueError(f"window length must be >= 1, got {m}")
    target = Fraction(target)
    model = Fraction(model)
    if not 0 <= target <= 1:
        raise ValueError(f"target ratio {target} outside [0, 1]")
    if not 0 <= model <= 1:
        raise ValueError(f"model ratio {model} outside [0, 1]")
    model_count = model * m
    if model_count.denominator != 1:
        raise ValueError(f"model ratio {model} is not on the 1/{m} grid")

    scaled = target * m
    floor_count = scaled.numerator // scaled.denominator
    remainder = scaled - floor_count
    if remainder < HALF:
        count = floor_count
    elif remainder > HALF:
        count = floor_count + 1
    elif model_count.numerator <= floor_count:
        count = floor_count
    else:
        count = floor_count + 1
    return Fraction(count, m), remainder


def bias_at_n(run: RankedRun, labels: "LabelCatalog", target: TargetCounts,
              value: str, n: int, *, strict: bool = False) -> BiasRecord:
    """Measure the representation bias of one topic for one feature value.

    Positive bias means the window over-represents ``value`` relative to the
    attainable target share; negative means under-representation. Run and
    target must describe the same topic, and the label catalog must carry the
    target's feature.
    """
    if run.topic_id != target.topic_id:
        raise TopicMismatchError(
            f"run topic {run.topic_id!r} does not match target topic {target.topic_id!r}")
    if labels.feature_name != target.feature_name:
        raise SchemeViolationError(
            f"label catalog is for feature {labels.feature_name!r} but target counts "
            f"are for {target.feature_name!r}")
    window = model_ratio_at_n(run, labels, value, n, strict=strict)
    raw = target_ratio(target, value, labels.scheme)
    ideal, remainder = ideal_target_ratio_at_n(raw, window.ratio, window.cutoff_effective)
    return BiasRecord(
        topic_id=run.topic_id,
        feature_value=value,
        cutoff_requested=n,
        cutoff_effective=window.cutoff_effective,
        model_ratio=window.ratio,
        target_ratio_raw=raw,
        rounding_remainder=remainder,
        target_ratio_at_cutoff=ideal,
        bias=window.ratio - ideal,
        unknown_in_window=window.unknown_in_window,
    )


def aggregate(records: Sequence[BiasRecord], value: str, source_label: str,
              *, population_sd: bool = False) -> BiasSummary:
    """Aggregate per-topic biases into mean, spread and absolute-mean figures.

    Topics weigh equally regardless of window length. The standard deviation
    uses the sample divisor (N-1) by default since the audited topics are a
    sample of the query population; ``population_sd`` switches to N. With a
    single record the deviation is reported as 0 and flagged.
    """
    if not records:
        raise EmptyAggregateError(f"no records to aggregate for value {value!r}")
    off = sorted({r.feature_value for r in records} - {value})
    if off:
        raise ValueError(
            f"aggregate over value {value!r} received records for: {', '.join(off)}")
    biases = [r.bias for r in records]
    count = len(biases)
    mean = Fraction(sum(biases), count)
    mean_abs = Fraction(sum(abs(b) for b in biases), count)
    single = count == 1
    if single:
        stdev = 0.0
    else:
        divisor = count if population_sd else count - 1
        variance = sum((b - mean) ** 2 for b in biases) / divisor
        stdev = math.sqrt(variance)
    return BiasSummary(
        feature_value=value,
        target_source=source_label,
        topic_count=count,
        mean_bias=mean,
        stdev_bias=stdev,
        mean_abs_bias=mean_abs,
        min_bias=min(biases),
        max_bias=max(biases),
        single_sample=single,
        population_sd=population_sd,
    )


@dataclass(frozen=True)
class SimulatedTopic:
    """Synthetic (run, labels, target counts) triple with a planted bias."""

    run: RankedRun
    labels: "LabelCatalog"
    target: TargetCounts
    planted_bias: Ratio


def _planted_model_count(target: Ratio, bias_count: int, m: int) -> int:
    """Model count whose measured bias equals bias_count/m for this target."""
    scaled = target * m
    floor_count = scaled.numerator // scaled.denominator
    remainder = scaled - floor_count
    if remainder < HALF:
        ideal = floor_count
    elif remainder > HALF:
        ideal = floor_count + 1
    else:
        # Halfway case: the measured ideal follows the shown count, so plant
        # the count on the side that keeps the requested bias self-consistent.
        ideal = floor_count if bias_count <= 0 else floor_count + 1
    return ideal + bias_count


def simulate_run(topic_id: str, target: Ratio, bias: Ratio, m: int,
                 scheme: FeatureScheme, value: str, *, seed: int = 0,
                 population: int | None = None) -> SimulatedTopic:
    """Build a deterministic synthetic topic whose measured bias is exact.

    ``target`` is realized exactly by the emitted target counts (optionally
    scaled to ``population`` members) and ``bias`` must lie on the 1/m grid.
    The returned labels are complete over the run, so measuring the triple
    at cutoff m (or any larger cutoff) returns ``bias`` exactly.
    """
    from .ingest import LabelCatalog  # deferred: ingest imports this module

    scheme.require_value(value)
    target = Fraction(target)
    bias = Fraction(bias)
    if m < 1:
        raise InfeasibleSimulationError(f"topic {topic_id!r}: window length {m} < 1")
    if not 0 <= target <= 1:
        raise InfeasibleSimulationError(
            f"topic {topic_id!r}: target ratio {target} outside [0, 1]")
    bias_scaled = bias * m
    if bias_scaled.denominator != 1:
        raise InfeasibleSimulationError(
            f"topic {topic_id!r}: bias {bias} is not on the 1/{m} grid")
    model_count = _planted_model_count(target, bias_scaled.numerator, m)
    if model_count < 0:
        raise InfeasibleSimulationError(
            f"topic {topic_id!r}: bias {bias} would need a negative count "
            f"({model_count}) of {value!r} in a window of {m}")
    if model_count > m:
        raise InfeasibleSimulationError(
            f"topic {topic_id!r}: bias {bias} would need {model_count} entities "
            f"labeled {value!r} in a window of only {m}")

    pop = target.denominator if population is None else population
    if pop < 1:
        raise InfeasibleSimulationError(f"topic {topic_id!r}: population {pop} < 1")
    in_group = target * pop
    if in_group.denominator != 1:
        raise InfeasibleSimulationError(
            f"topic {topic_id!r}: population {pop} cannot realize target ratio "
            f"{target} exactly")
    other = next(v for v in scheme.values if v != value)
    counts = {value: in_group.numerator, other: pop - in_group.numerator}

    entities = tuple(f"{topic_id}:e{i + 1:04d}" for i in range(m))
    rng = random.Random(derive_seed(seed, topic_id, value))
    hit_positions = set(rng.sample(range(m), model_count))
    assignments = [
        (entity, value if i in hit_positions else other, "kb")
        for i, entity in enumerate(entities)
    ]
    labels = LabelCatalog.build(scheme, assignments)
    return SimulatedTopic(
        run=RankedRun(topic_id=topic_id, entries=entities),
        labels=labels,
        target=TargetCounts(topic_id=topic_id, feature_name=scheme.feature_name,
                            counts=counts),
        planted_bias=bias,
    )
