from __future__ import annotations

import random
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

import support
from biaslens import InfeasibleSimulationError, aggregate, bias_at_n, simulate_run

F = Fraction


def test_bias_free_construction(gender):
    topic = simulate_run("t", F(1, 2), F(0), 10, gender, "female", seed=1)
    hits = sum(1 for e in topic.run.entries[:10]
               if topic.labels.label_of(e) == "female")
    assert hits == 5
    assert bias_at_n(topic.run, topic.labels, topic.target, "female", 10).bias == 0


def test_fully_suppressed_window(gender):
    topic = simulate_run("t", F(1, 2), F(-1, 2), 10, gender, "female", seed=1)
    assert all(topic.labels.label_of(e) != "female" for e in topic.run.entries)
    record = bias_at_n(topic.run, topic.labels, topic.target, "female", 10)
    assert record.bias == F(-1, 2)


def test_measures_back_at_larger_cutoff(gender):
    topic = simulate_run("t", F(3, 10), F(2, 10), 10, gender, "female", seed=9)
    record = bias_at_n(topic.run, topic.labels, topic.target, "female", 25)
    assert record.cutoff_effective == 10
    assert record.bias == F(2, 10)


def test_same_seed_is_bit_identical(gender):
    first = simulate_run("t", F(1, 3), F(1, 9), 9, gender, "female", seed=42)
    second = simulate_run("t", F(1, 3), F(1, 9), 9, gender, "female", seed=42)
    assert first == second


def test_different_seed_moves_positions(gender):
    first = simulate_run("t", F(1, 2), F(0), 10, gender, "female", seed=1)
    second = simulate_run("t", F(1, 2), F(0), 10, gender, "female", seed=2)
    labels_1 = [first.labels.label_of(e) for e in first.run.entries]
    labels_2 = [second.labels.label_of(e) for e in second.run.entries]
    assert labels_1 != labels_2  # same counts, different arrangement
    assert labels_1.count("female") == labels_2.count("female")


def test_population_scaling(gender):
    topic = simulate_run("t", F(3, 10), F(0), 10, gender, "female",
                         population=1000)
    assert topic.target.total == 1000
    assert topic.target.count_of("female") == 300


def test_population_must_fit_ratio(gender):
    with pytest.raises(InfeasibleSimulationError, match="exactly"):
        simulate_run("t", F(1, 3), F(0), 9, gender, "female", population=10)


def test_off_grid_bias_rejected(gender):
    with pytest.raises(InfeasibleSimulationError, match="grid"):
        simulate_run("t", F(1, 2), F(1, 3), 10, gender, "female")


def test_bias_above_feasible_bound(gender):
    # Target share 1.0 leaves no room for over-representation.
    with pytest.raises(InfeasibleSimulationError, match="window of only"):
        simulate_run("t", F(1), F(1, 10), 10, gender, "female")


def test_bias_below_feasible_bound(gender):
    with pytest.raises(InfeasibleSimulationError, match="negative"):
        simulate_run("t", F(0), F(-1, 10), 10, gender, "female")


def test_halfway_target_supports_both_signs(gender):
    # With target * m exactly half-way, both adjacent counts are attainable
    # and biases on either side stay self-consistent.
    for bias_count in (-5, -1, 0, 1, 5):
        topic = simulate_run("t", F(1, 2), F(bias_count, 11), 11, gender,
                             "female", seed=3)
        record = bias_at_n(topic.run, topic.labels, topic.target, "female", 11)
        assert record.bias == F(bias_count, 11)


@given(
    den=st.integers(min_value=1, max_value=24),
    m=st.integers(min_value=1, max_value=20),
    seed=st.integers(min_value=0, max_value=2**32),
    data=st.data(),
)
def test_round_trip_property(den, m, seed, data):
    num = data.draw(st.integers(min_value=0, max_value=den))
    target = F(num, den)
    low, high = support.feasible_bias_range(target, m)
    bias_count = data.draw(st.integers(min_value=low, max_value=high))
    topic = simulate_run("t", target, F(bias_count, m), m, support.GENDER,
                         "female", seed=seed)
    record = bias_at_n(topic.run, topic.labels, topic.target, "female", m)
    assert record.bias == F(bias_count, m)


def test_suite_mean_equals_requested_mean(gender):
    rng = random.Random(777)
    requested = []
    records = []
    for i in range(300):
        target = F(rng.randint(0, 20), 20)
        low, high = support.feasible_bias_range(target, 10)
        bias = F(rng.randint(low, high), 10)
        topic = simulate_run(f"t{i:03d}", target, bias, 10, gender, "female",
                             seed=i)
        records.append(bias_at_n(topic.run, topic.labels, topic.target,
                                 "female", 10))
        requested.append(bias)
    summary = aggregate(records, "female", "sim")
    assert summary.mean_bias == F(sum(requested), len(requested))
