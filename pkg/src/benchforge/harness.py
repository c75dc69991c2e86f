"""Run target models over a benchmark and emit dis-aggregated reports.

Every record snapshots the fields aggregation needs (active constraints,
constrainedness, feasibility intent, schedule-size parameters), so reports
can be regenerated from the records file alone.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .backends import (
    DEFAULT_MAX_TOKENS,
    DEFAULT_TOP_P,
    BackendError,
    ChatBackend,
    ChatRequest,
    chat,
)
from .calendar_eval import InstanceScore, parse_response, score as score_calendar
from .calendar_verify import constrainedness as calendar_constrainedness
from .errors import ConfigError, ValidationError
from .plan import PlanDoc


@dataclass
class EvalSettings:
    model: str = "target"
    temperature: float = 0.0
    top_p: float = DEFAULT_TOP_P
    max_tokens: int = DEFAULT_MAX_TOKENS
    retries: int = 3


@dataclass
class EvaluationRecord:
    model: str
    instance_id: str
    response: str
    parsed: dict | None
    score: InstanceScore
    latency: float = 0.0
    prompt_tokens: int = 0
    completion_tokens: int = 0
    # aggregation snapshot
    active: list[str] = field(default_factory=list)
    constrainedness: float = 0.0
    intended_feasible: bool | None = None
    num_days: int | None = None
    num_participants: int | None = None

    def to_json(self) -> dict:
        return {
            "model": self.model,
            "instance_id": self.instance_id,
            "response": self.response,
            "parsed": self.parsed,
            "score": self.score.to_json(),
            "latency": self.latency,
            "prompt_tokens": self.prompt_tokens,
            "completion_tokens": self.completion_tokens,
            "active": self.active,
            "constrainedness": self.constrainedness,
            "intended_feasible": self.intended_feasible,
            "num_days": self.num_days,
            "num_participants": self.num_participants,
        }

    @classmethod
    def from_json(cls, data: dict) -> "EvaluationRecord":
        return cls(
            model=data["model"],
            instance_id=data["instance_id"],
            response=data["response"],
            parsed=data["parsed"],
            score=InstanceScore.from_json(data["score"]),
            latency=data.get("latency", 0.0),
            prompt_tokens=data.get("prompt_tokens", 0),
            completion_tokens=data.get("completion_tokens", 0),
            active=list(data["active"]),
            constrainedness=data["constrainedness"],
            intended_feasible=data.get("intended_feasible"),
            num_days=data.get("num_days"),
            num_participants=data.get("num_participants"),
        )


def evaluate_model(
    instances: Sequence,
    backend: ChatBackend,
    settings: EvalSettings | None = None,
    task: str = "calendar",
    plan: PlanDoc | None = None,
    judge: ChatBackend | None = None,
    skip_ids: set[str] | None = None,
) -> list[EvaluationRecord]:
    """One record per instance: zero-shot inference, then scoring.

    Backend failures after retries become records with an empty response
    (scored as a full miss), never dropped rows. Already-evaluated instance
    ids can be skipped to resume a partial run.
    """
    settings = settings or EvalSettings()
    skip_ids = skip_ids or set()
    records: list[EvaluationRecord] = []
    for instance in instances:
        if instance.id in skip_ids:
            continue
        request = ChatRequest.user(
            settings.model,
            instance.prompt,
            temperature=settings.temperature,
            top_p=settings.top_p,
            max_tokens=settings.max_tokens,
        )
        started = time.monotonic()
        try:
            response = chat(backend, request, retries=settings.retries, stage="evaluate")
            text = response.content
            prompt_tokens, completion_tokens = response.prompt_tokens, response.completion_tokens
        except BackendError:
            text, prompt_tokens, completion_tokens = "", 0, 0
        latency = time.monotonic() - started
        if task == "calendar":
            parsed = parse_response(text)
            instance_score = score_calendar(instance, parsed)
            record = EvaluationRecord(
                model=settings.model,
                instance_id=instance.id,
                response=text,
                parsed=parsed.to_json(),
                score=instance_score,
                latency=latency,
                prompt_tokens=prompt_tokens,
                completion_tokens=completion_tokens,
                active=instance.constraints.active(),
                constrainedness=calendar_constrainedness(instance),
                intended_feasible=instance.intended_feasible,
                num_days=instance.parameters.num_days,
                num_participants=instance.parameters.num_participants,
            )
        elif task == "textgen":
            from .textgen import judge_response, textgen_constrainedness

            if plan is None or judge is None:
                raise ConfigError("textgen evaluation needs a plan and a judge backend")
            instance_score = judge_response(instance, text, plan, judge)
            record = EvaluationRecord(
                model=settings.model,
                instance_id=instance.id,
                response=text,
                parsed=None,
                score=instance_score,
                latency=latency,
                prompt_tokens=prompt_tokens,
                completion_tokens=completion_tokens,
                active=instance.parameters.active_groups(),
                constrainedness=textgen_constrainedness(instance.parameters, plan),
            )
        else:
            raise ConfigError(f"unknown task {task!r}")
        records.append(record)
    return records


# ---------------------------------------------------------------------------
# Aggregations

LOW_SUPPORT_THRESHOLD = 10


def bucketize_by_constrainedness(
    records: Sequence[EvaluationRecord], width: float = 0.1
) -> list[dict]:
    """Bucket records by constrainedness into [k*width, (k+1)*width) bins.

    The closed upper boundary 1.0 lands in the last bucket. Buckets with fewer
    than ten records are flagged low-support.
    """
    if not 0 < width <= 1:
        raise ConfigError(f"bucket width must be in (0, 1], got {width}")
    n_buckets = -(-100 // int(round(width * 100)))  # ceil(1/width) without float drift
    buckets = [
        {"lo": k * width, "hi": min(1.0, (k + 1) * width), "count": 0, "pass_all": 0, "fraction": 0.0}
        for k in range(n_buckets)
    ]
    for record in records:
        k = min(int(record.constrainedness / width), n_buckets - 1)
        buckets[k]["count"] += 1
        buckets[k]["pass_all"] += int(record.score.pass_all)
        buckets[k]["fraction"] += record.score.fraction_passed
    out = []
    for bucket in buckets:
        count = bucket["count"]
        out.append(
            {
                "lo": round(bucket["lo"], 6),
                "hi": round(bucket["hi"], 6),
                "count": count,
                "mean_pass_all": bucket["pass_all"] / count if count else None,
                "mean_fraction_passed": bucket["fraction"] / count if count else None,
                "low_support": count < LOW_SUPPORT_THRESHOLD,
            }
        )
    return out


def aggregate_by_constraint(records: Sequence[EvaluationRecord]) -> dict[str, dict]:
    """Pass rate per constraint, over instances where the constraint is active.

    A constraint active in zero records is absent from the result, not 0.
    """
    totals: dict[str, int] = {}
    passes: dict[str, int] = {}
    for record in records:
        for name in record.active:
            totals[name] = totals.get(name, 0) + 1
            if record.score.verdicts.get(name, False):
                passes[name] = passes.get(name, 0) + 1
    return {
        name: {"n_active": totals[name], "pass_rate": passes.get(name, 0) / totals[name]}
        for name in sorted(totals)
    }


def aggregate_pairwise(records: Sequence[EvaluationRecord]) -> dict[tuple[str, str], dict]:
    """Joint pass rate for each constraint pair, over instances with both active."""
    totals: dict[tuple[str, str], int] = {}
    passes: dict[tuple[str, str], int] = {}
    for record in records:
        active = sorted(set(record.active))
        for i, a in enumerate(active):
            for b in active[i + 1 :]:
                key = (a, b)
                totals[key] = totals.get(key, 0) + 1
                if record.score.verdicts.get(a, False) and record.score.verdicts.get(b, False):
                    passes[key] = passes.get(key, 0) + 1
    return {
        key: {"n_active": totals[key], "pass_rate": passes.get(key, 0) / totals[key]}
        for key in sorted(totals)
    }


def aggregate_by_parameter(records: Sequence[EvaluationRecord], parameter: str) -> dict[int, dict]:
    """Mean pass_all swept over a schedule-size parameter (num_days or
    num_participants)."""
    if parameter not in ("num_days", "num_participants"):
        raise ConfigError(f"unknown sweep parameter {parameter!r}")
    totals: dict[int, int] = {}
    passes: dict[int, int] = {}
    for record in records:
        value = getattr(record, parameter)
        if value is None:
            continue
        totals[value] = totals.get(value, 0) + 1
        passes[value] = passes.get(value, 0) + int(record.score.pass_all)
    return {
        value: {"count": totals[value], "mean_pass_all": passes[value] / totals[value]}
        for value in sorted(totals)
    }


def no_solution_confusion(records: Sequence[EvaluationRecord]) -> dict[str, float]:
    """Rate of no-solution responses among feasible and infeasible instances.

    Low on feasible and high on infeasible is the desirable corner.
    """
    calendar_records = [r for r in records if r.intended_feasible is not None]
    if not calendar_records:
        raise ValidationError("no calendar records to compute no-solution confusion from")
    rates = {}
    for label, wanted in (("feasible", True), ("infeasible", False)):
        group = [r for r in calendar_records if r.intended_feasible is wanted]
        refusals = sum(
            1 for r in group if r.score.no_solution_outcome in ("correct_no_solution", "incorrect_no_solution")
        )
        rates[f"{label}_no_solution_rate"] = refusals / len(group) if group else None
    return rates


def gold_from_annotations(first: Sequence[bool], second: Sequence[bool]) -> list[bool]:
    """Gold label rule: a check passes only when both annotators marked it passed."""
    if len(first) != len(second):
        raise ValidationError("annotator label lists differ in length")
    return [a and b for a, b in zip(first, second)]


def agreement_metrics(predicted: Sequence[bool], gold: Sequence[bool]) -> dict[str, float]:
    """Accuracy/precision/recall of predicted verdicts against gold, treating
    pass as the positive class."""
    if len(predicted) != len(gold):
        raise ValidationError("predicted and gold label lists differ in length")
    if not predicted:
        raise ValidationError("empty label lists")
    tp = sum(1 for p, g in zip(predicted, gold) if p and g)
    fp = sum(1 for p, g in zip(predicted, gold) if p and not g)
    fn = sum(1 for p, g in zip(predicted, gold) if not p and g)
    correct = sum(1 for p, g in zip(predicted, gold) if p == g)
    return {
        "accuracy": correct / len(predicted),
        "precision": tp / (tp + fp) if tp + fp else None,
        "recall": tp / (tp + fn) if tp + fn else None,
    }


# ---------------------------------------------------------------------------
# Report emission


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        writer.writerows(rows)


def emit_report(
    records: Sequence[EvaluationRecord], out_dir: str | Path, bucket_width: float = 0.1
) -> dict:
    """Write the fixed-name report files and return the aggregate dict.

    Pairwise rates are joint pass rates on instances where both constraints
    are active; the header of pairwise.csv says so to prevent misreading.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ValidationError(f"cannot create report directory {out}: {exc}") from exc
    by_constraint = aggregate_by_constraint(records)
    pairwise = aggregate_pairwise(records)
    buckets = bucketize_by_constrainedness(records, bucket_width)
    by_days = aggregate_by_parameter(records, "num_days")
    by_participants = aggregate_by_parameter(records, "num_participants")
    try:
        confusion = no_solution_confusion(records)
    except ValidationError:
        confusion = None

    _write_csv(
        out / "by_constraint.csv",
        ["constraint", "n_active", "pass_rate"],
        [[name, v["n_active"], v["pass_rate"]] for name, v in by_constraint.items()],
    )
    _write_csv(
        out / "pairwise.csv",
        ["constraint_a", "constraint_b", "n_both_active", "joint_pass_rate"],
        [[a, b, v["n_active"], v["pass_rate"]] for (a, b), v in pairwise.items()],
    )
    _write_csv(
        out / "by_constrainedness.csv",
        ["bucket_lo", "bucket_hi", "count", "mean_pass_all", "mean_fraction_passed", "low_support"],
        [
            [b["lo"], b["hi"], b["count"], b["mean_pass_all"], b["mean_fraction_passed"], b["low_support"]]
            for b in buckets
        ],
    )
    _write_csv(
        out / "by_parameter.csv",
        ["parameter", "value", "count", "mean_pass_all"],
        [["num_days", v, d["count"], d["mean_pass_all"]] for v, d in by_days.items()]
        + [["num_participants", v, d["count"], d["mean_pass_all"]] for v, d in by_participants.items()],
    )
    if confusion is not None:
        _write_csv(
            out / "confusion.csv",
            ["group", "no_solution_rate"],
            [
                ["feasible", confusion["feasible_no_solution_rate"]],
                ["infeasible", confusion["infeasible_no_solution_rate"]],
            ],
        )
    # Plot-ready long format: one (metric, group, value, count) row per cell.
    long_rows = []
    for name, v in by_constraint.items():
        long_rows.append(["pass_rate_by_constraint", name, v["pass_rate"], v["n_active"]])
    for b in buckets:
        if b["count"]:
            long_rows.append(
                ["pass_all_by_constrainedness", f"{b['lo']:.2f}-{b['hi']:.2f}", b["mean_pass_all"], b["count"]]
            )
    for v, d in by_days.items():
        long_rows.append(["pass_all_by_num_days", v, d["mean_pass_all"], d["count"]])
    for v, d in by_participants.items():
        long_rows.append(["pass_all_by_num_participants", v, d["mean_pass_all"], d["count"]])
    _write_csv(out / "long_format.csv", ["metric", "group", "value", "count"], long_rows)

    aggregates = {
        "n_records": len(records),
        "mean_pass_all": sum(r.score.pass_all for r in records) / len(records) if records else None,
        "mean_fraction_passed": (
            sum(r.score.fraction_passed for r in records) / len(records) if records else None
        ),
        "by_constraint": by_constraint,
        "pairwise": {f"{a}+{b}": v for (a, b), v in pairwise.items()},
        "by_constrainedness": buckets,
        "by_num_days": by_days,
        "by_num_participants": by_participants,
        "no_solution_confusion": confusion,
    }
    (out / "report.json").write_text(json.dumps(aggregates, indent=2) + "\n")
    return aggregates


def write_records(records: Sequence[EvaluationRecord], path: str | Path) -> None:
    with Path(path).open("w") as handle:
        for record in records:
            handle.write(json.dumps(record.to_json()) + "\n")


def read_records(path: str | Path) -> list[EvaluationRecord]:
    records = []
    with Path(path).open() as handle:
        for line in handle:
            if line.strip():
                records.append(EvaluationRecord.from_json(json.loads(line)))
    return records
