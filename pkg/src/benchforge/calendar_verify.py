"""Quality verification for calendar instances.

Feasibility and constrainedness are computed programmatically; clarity,
completeness and consistency go through a judge backend with a strict
PASS/FAIL verdict. Instances failing any check are filtered out of the final
benchmark.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Sequence

from .backends import ChatBackend
from .judging import run_judge_check
from .plan import PlanDoc
from .timecore import (
    WEEKEND,
    AvailabilitySchedule,
    DayOfWeek,
    Minutes,
    Slot,
    TimeBlock,
    enumerate_slots,
    format_time,
    union_any_available,
)

if TYPE_CHECKING:
    from .calendar_gen import CalendarInstance, SchedulingConstraints


@dataclass
class CheckResult:
    verdict: str  # pass | fail
    kind: str  # programmatic | model
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"


@dataclass
class CheckReport:
    instance_id: str
    checks: dict[str, CheckResult] = field(default_factory=dict)
    constrainedness: float = 0.0

    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def failed_checks(self) -> list[str]:
        return [name for name, c in self.checks.items() if not c.passed]

    def to_json(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "constrainedness": self.constrainedness,
            "checks": {
                name: {"verdict": c.verdict, "kind": c.kind, "detail": c.detail}
                for name, c in self.checks.items()
            },
        }

    @classmethod
    def from_json(cls, data: dict) -> "CheckReport":
        return cls(
            instance_id=data["instance_id"],
            constrainedness=data["constrainedness"],
            checks={
                name: CheckResult(c["verdict"], c["kind"], c.get("detail", ""))
                for name, c in data["checks"].items()
            },
        )


# ---------------------------------------------------------------------------
# Programmatic checks


def enumerate_feasible_slots(
    availability: AvailabilitySchedule,
    constraints: "SchedulingConstraints",
    days: Sequence[DayOfWeek],
    granularity: Minutes,
) -> list[Slot]:
    """All grid slots satisfying every active constraint, ascending by (day, start).

    A slot is feasible when every participant's availability contains the
    buffered meeting and the slot respects the weekday, time-restriction and
    blocked-interval constraints.
    """
    duration = constraints.meeting_duration
    buffer = constraints.buffer
    participants = list(availability.values())
    slots: list[Slot] = []
    for day in days:
        if constraints.weekdays_only and day in WEEKEND:
            continue
        day_blocks = [week.get(day, ()) for week in participants]
        if any(not blocks for blocks in day_blocks):
            continue
        lo = min(b.start for blocks in day_blocks for b in blocks)
        hi = max(b.end for blocks in day_blocks for b in blocks)
        t = -(-lo // granularity) * granularity
        while t + duration <= hi:
            start, end = t, t + duration
            ok = (
                (constraints.no_before is None or start >= constraints.no_before)
                and (constraints.no_after is None or end <= constraints.no_after)
                and (
                    constraints.blocked_interval is None
                    or not constraints.blocked_interval.overlaps(TimeBlock(start, end))
                )
                and all(
                    any(b.contains(start - buffer, end + buffer) for b in blocks)
                    for blocks in day_blocks
                )
            )
            if ok:
                slots.append(Slot(day, TimeBlock(start, end)))
            t += granularity
    return slots


def feasible_slots(instance: "CalendarInstance") -> list[Slot]:
    return enumerate_feasible_slots(
        instance.availability,
        instance.constraints,
        instance.parameters.days,
        instance.granularity,
    )


def is_feasible(instance: "CalendarInstance") -> bool:
    return bool(feasible_slots(instance))


def union_slot_count(instance: "CalendarInstance") -> int:
    """Number of grid slots of meeting length where at least one participant
    is available, summed over the instance's days."""
    count = 0
    for day in instance.parameters.days:
        union = union_any_available(instance.availability, day)
        count += len(
            enumerate_slots(union, instance.constraints.meeting_duration, instance.granularity)
        )
    return count


def constrainedness(instance: "CalendarInstance") -> float:
    """Difficulty proxy in [0, 1]: one minus the feasible fraction of slots
    where anyone is available. Defined as 1.0 when nobody is ever available."""
    denominator = union_slot_count(instance)
    if denominator == 0:
        return 1.0
    return 1.0 - len(feasible_slots(instance)) / denominator


# ---------------------------------------------------------------------------
# Judge-based checks and the combined report


def describe_active_constraints(constraints: "SchedulingConstraints") -> str:
    parts = [f"a meeting duration of {constraints.meeting_duration} minutes"]
    if constraints.buffer > 0:
        parts.append(f"a buffer time of {constraints.buffer} minutes before and after")
    if constraints.weekdays_only:
        parts.append("weekdays only")
    if constraints.no_before is not None:
        parts.append(f"no meetings before {format_time(constraints.no_before)}")
    if constraints.no_after is not None:
        parts.append(f"no meetings after {format_time(constraints.no_after)}")
    if constraints.blocked_interval is not None:
        parts.append(f"no meetings during {constraints.blocked_interval}")
    if constraints.priority:
        parts.append("the first available slot (high priority)")
    return "; ".join(parts)


def run_quality_checks(
    instance: "CalendarInstance", plan: PlanDoc, judge: ChatBackend
) -> CheckReport:
    """Run every check named in the plan against one instance."""
    report = CheckReport(instance_id=instance.id)
    score = constrainedness(instance)
    report.constrainedness = score
    context = {
        "prompt": instance.prompt,
        "constraints": describe_active_constraints(instance.constraints),
        "num_participants": instance.parameters.num_participants,
        "num_days": instance.parameters.num_days,
    }
    for check in plan.quality_checks:
        if check.name == "feasibility":
            actual = is_feasible(instance)
            ok = actual == instance.intended_feasible
            report.checks[check.name] = CheckResult(
                "pass" if ok else "fail",
                "programmatic",
                f"feasible={actual} intended={instance.intended_feasible}",
            )
        elif check.name == "constrainedness":
            report.checks[check.name] = CheckResult(
                "pass", "programmatic", f"constrainedness={score:.4f}"
            )
        else:
            prompt = plan.judge_prompt(check.name).format(**context)
            verdict, detail = run_judge_check(judge, prompt, stage=f"verify:{check.name}")
            report.checks[check.name] = CheckResult("pass" if verdict else "fail", "model", detail)
    return report


def filter_benchmark(
    instances: Sequence["CalendarInstance"], reports: Sequence[CheckReport]
) -> tuple[list["CalendarInstance"], list[dict], dict]:
    """Keep exactly the instances whose every check passed.

    Returns (retained, drop_log, summary); the summary carries per-check pass
    rates and the retention rate.
    """
    by_id = {r.instance_id: r for r in reports}
    retained: list = []
    drop_log: list[dict] = []
    check_totals: dict[str, int] = {}
    check_passes: dict[str, int] = {}
    for instance in instances:
        report = by_id.get(instance.id)
        if report is None:
            raise ValueError(f"no check report for instance {instance.id}")
        for name, result in report.checks.items():
            check_totals[name] = check_totals.get(name, 0) + 1
            if result.passed:
                check_passes[name] = check_passes.get(name, 0) + 1
        if report.all_passed():
            retained.append(instance)
        else:
            drop_log.append({"id": instance.id, "failed_checks": report.failed_checks()})
    summary = {
        "total": len(instances),
        "retained": len(retained),
        "retention_rate": len(retained) / len(instances) if instances else 0.0,
        "pass_rates": {
            name: check_passes.get(name, 0) / check_totals[name] for name in sorted(check_totals)
        },
    }
    return retained, drop_log, summary
