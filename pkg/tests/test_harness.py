import json
import random

import pytest

from benchforge.backends import MockBackend
from benchforge.calendar_eval import InstanceScore
from benchforge.calendar_gen import generate_benchmark
from benchforge.baselines import build_baseline
from benchforge.errors import ConfigError, ValidationError
from benchforge.harness import (
    EvalSettings,
    EvaluationRecord,
    LOW_SUPPORT_THRESHOLD,
    agreement_metrics,
    aggregate_by_constraint,
    aggregate_by_parameter,
    aggregate_pairwise,
    bucketize_by_constrainedness,
    emit_report,
    evaluate_model,
    gold_from_annotations,
    no_solution_confusion,
    read_records,
    write_records,
)
from benchforge.plan import default_calendar_plan

PLAN = default_calendar_plan()


def record(verdicts, constrainedness=0.0, outcome="solution_given", feasible=True,
           num_days=1, num_participants=2):
    fraction = sum(verdicts.values()) / len(verdicts) if verdicts else 0.0
    return EvaluationRecord(
        model="m",
        instance_id=f"r{random.random()}",
        response="x",
        parsed=None,
        score=InstanceScore(
            verdicts=verdicts,
            fraction_passed=fraction,
            pass_all=all(verdicts.values()) if verdicts else False,
            no_solution_outcome=outcome,
        ),
        active=list(verdicts),
        constrainedness=constrainedness,
        intended_feasible=feasible,
        num_days=num_days,
        num_participants=num_participants,
    )


# -- bucketing ---------------------------------------------------------------


def test_bucket_edges_and_closed_top():
    records = [
        record({"a": True}, constrainedness=0.0),
        record({"a": True}, constrainedness=0.05),
        record({"a": False}, constrainedness=0.1),   # lands in [0.1, 0.2)
        record({"a": True}, constrainedness=1.0),    # closed top -> last bucket
    ]
    buckets = bucketize_by_constrainedness(records, width=0.1)
    assert len(buckets) == 10
    assert buckets[0]["count"] == 2 and buckets[0]["mean_pass_all"] == 1.0
    assert buckets[1]["count"] == 1 and buckets[1]["mean_pass_all"] == 0.0
    assert buckets[9]["count"] == 1
    assert sum(b["count"] for b in buckets) == len(records)
    assert all(b["low_support"] for b in buckets)  # every bucket under threshold here
    assert buckets[5]["count"] == 0 and buckets[5]["mean_pass_all"] is None


def test_bucket_low_support_threshold():
    records = [record({"a": True}, constrainedness=0.01) for _ in range(LOW_SUPPORT_THRESHOLD)]
    buckets = bucketize_by_constrainedness(records, width=0.1)
    assert buckets[0]["count"] == 10
    assert buckets[0]["low_support"] is False


def test_bucket_widths():
    assert len(bucketize_by_constrainedness([], width=0.25)) == 4
    assert len(bucketize_by_constrainedness([], width=0.3)) == 4  # ceil(1/0.3)
    assert len(bucketize_by_constrainedness([], width=1.0)) == 1
    with pytest.raises(ConfigError):
        bucketize_by_constrainedness([], width=0.0)
    with pytest.raises(ConfigError):
        bucketize_by_constrainedness([], width=1.5)


# -- per-constraint aggregation ----------------------------------------------


def test_aggregate_by_constraint_hand_computed():
    records = [
        record({"availability": True, "buffer": True}),
        record({"availability": True, "buffer": False}),
        record({"availability": False}),
    ]
    agg = aggregate_by_constraint(records)
    assert agg == {
        "availability": {"n_active": 3, "pass_rate": 2 / 3},
        "buffer": {"n_active": 2, "pass_rate": 1 / 2},
    }
    assert "priority" not in agg  # never active -> absent, not zero


def test_aggregate_pairwise_joint_pass():
    records = [
        record({"a": True, "b": True}),
        record({"a": True, "b": False}),
        record({"b": True, "a": False}),
        record({"a": True}),  # b inactive: not counted for the pair
    ]
    agg = aggregate_pairwise(records)
    assert agg[("a", "b")] == {"n_active": 3, "pass_rate": 1 / 3}


def test_aggregate_by_parameter():
    records = [
        record({"a": True}, num_days=1),
        record({"a": False}, num_days=1),
        record({"a": True}, num_days=3),
    ]
    agg = aggregate_by_parameter(records, "num_days")
    assert agg == {
        1: {"count": 2, "mean_pass_all": 0.5},
        3: {"count": 1, "mean_pass_all": 1.0},
    }
    with pytest.raises(ConfigError):
        aggregate_by_parameter(records, "granularity")


def test_aggregations_are_order_independent():
    records = [
        record({"a": bool(i % 2), "b": True}, constrainedness=i / 10, num_days=i % 3 + 1)
        for i in range(10)
    ]
    shuffled = random.sample(records, len(records))
    assert aggregate_by_constraint(records) == aggregate_by_constraint(shuffled)
    assert aggregate_pairwise(records) == aggregate_pairwise(shuffled)
    assert bucketize_by_constrainedness(records) == bucketize_by_constrainedness(shuffled)
    assert aggregate_by_parameter(records, "num_days") == aggregate_by_parameter(shuffled, "num_days")


# -- refusal confusion -------------------------------------------------------


def test_no_solution_confusion_hand_computed():
    records = [
        record({"a": True}, feasible=True, outcome="solution_given"),
        record({"a": False}, feasible=True, outcome="incorrect_no_solution"),
        record({"a": True}, feasible=False, outcome="correct_no_solution"),
        record({"a": False}, feasible=False, outcome="solution_given"),
    ]
    rates = no_solution_confusion(records)
    assert rates == {"feasible_no_solution_rate": 0.5, "infeasible_no_solution_rate": 0.5}
    with pytest.raises(ValidationError):
        no_solution_confusion([])


# -- agreement ---------------------------------------------------------------


def test_gold_from_annotations_is_conjunction():
    assert gold_from_annotations([True, True, False], [True, False, False]) == [True, False, False]
    with pytest.raises(ValidationError):
        gold_from_annotations([True], [True, False])


def test_agreement_metrics_hand_computed():
    predicted = [True, True, False, False, True]
    gold = [True, False, False, True, True]
    # tp=2, fp=1, fn=1, correct=3
    metrics = agreement_metrics(predicted, gold)
    assert metrics == {"accuracy": 3 / 5, "precision": 2 / 3, "recall": 2 / 3}
    assert agreement_metrics([False], [False]) == {"accuracy": 1.0, "precision": None, "recall": None}
    with pytest.raises(ValidationError):
        agreement_metrics([], [])


# -- evaluation and reporting ------------------------------------------------


def test_evaluate_model_with_oracle_baseline():
    instances = generate_benchmark(31, PLAN, count=15)
    backend = build_baseline("oracle", instances)
    records = evaluate_model(instances, backend, EvalSettings(model="oracle"))
    assert len(records) == 15
    assert all(r.score.pass_all for r in records)
    assert all(r.model == "oracle" for r in records)


def test_evaluate_model_skips_and_survives_backend_failure():
    instances = generate_benchmark(31, PLAN, count=4)
    dead = MockBackend()  # raises on every request
    records = evaluate_model(
        instances, dead, EvalSettings(retries=0), skip_ids={instances[0].id}
    )
    assert [r.instance_id for r in records] == [x.id for x in instances[1:]]
    assert all(r.response == "" for r in records)
    assert all(not r.score.pass_all for r in records)


def test_records_file_round_trip(tmp_path):
    instances = generate_benchmark(31, PLAN, count=6)
    records = evaluate_model(instances, build_baseline("greedy", instances))
    path = tmp_path / "records.jsonl"
    write_records(records, path)
    back = read_records(path)
    assert [r.to_json() for r in back] == [r.to_json() for r in records]


def test_emit_report_files_and_recomputability(tmp_path):
    instances = generate_benchmark(31, PLAN, count=30)
    records = evaluate_model(instances, build_baseline("greedy", instances))
    out = tmp_path / "report"
    aggregates = emit_report(records, out)
    for name in (
        "by_constraint.csv",
        "pairwise.csv",
        "by_constrainedness.csv",
        "by_parameter.csv",
        "confusion.csv",
        "long_format.csv",
        "report.json",
    ):
        assert (out / name).exists(), name
    # the report regenerates identically from the serialized records alone
    path = tmp_path / "records.jsonl"
    write_records(records, path)
    again = emit_report(read_records(path), tmp_path / "report2")
    assert json.dumps(aggregates, sort_keys=True) == json.dumps(again, sort_keys=True)
    assert aggregates["n_records"] == 30
