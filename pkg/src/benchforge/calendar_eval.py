"""Scoring of target-model answers for calendar instances.

Parsing is deliberately forgiving about chain-of-thought: the last stated
slot wins, and a no-solution phrase counts only when no slot is stated after
it. Scoring is fully programmatic, one verdict per active constraint.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

from .calendar_verify import feasible_slots
from .timecore import WEEKEND, DayOfWeek, Slot, TimeBlock, parse_time

if TYPE_CHECKING:
    from .calendar_gen import CalendarInstance

NO_SOLUTION_PHRASE = "No common time slot available"

_SLOT_RE = re.compile(
    r"\[?\b(monday|tuesday|wednesday|thursday|friday|saturday|sunday)\b\]?[\s,:]*"
    r"\[?(\d{1,2}:\d{2})\s*-\s*(\d{1,2}:\d{2})\]?",
    re.IGNORECASE,
)
_NO_SOLUTION_RE = re.compile(r"no\s+common\s+time\s+slot", re.IGNORECASE)


@dataclass
class ParsedSolution:
    """Exactly one of slot / no_solution / unparseable."""

    slot: Slot | None = None
    no_solution: bool = False
    unparseable: bool = False
    raw: str = ""

    def __post_init__(self):
        variants = sum([self.slot is not None, self.no_solution, self.unparseable])
        if variants != 1:
            raise ValueError("parsed solution must have exactly one variant set")

    def render(self) -> str:
        if self.no_solution:
            return NO_SOLUTION_PHRASE
        if self.slot is not None:
            return str(self.slot)
        return self.raw

    def to_json(self) -> dict:
        if self.no_solution:
            return {"no_solution": True}
        if self.slot is not None:
            return {"slot": str(self.slot)}
        return {"unparseable": True, "raw": self.raw}

    @classmethod
    def from_json(cls, data: dict) -> "ParsedSolution":
        if data.get("no_solution"):
            return cls(no_solution=True)
        if "slot" in data:
            day_text, _, block_text = data["slot"].partition(" ")
            return cls(slot=Slot(DayOfWeek.parse(day_text), TimeBlock.parse(block_text)))
        return cls(unparseable=True, raw=data.get("raw", ""))


def parse_response(text: str) -> ParsedSolution:
    """Extract the model's answer from a possibly verbose response."""
    text = text or ""
    slot_matches = list(_SLOT_RE.finditer(text))
    refusals = list(_NO_SOLUTION_RE.finditer(text))
    if refusals:
        last_refusal = refusals[-1].start()
        if not any(m.start() > last_refusal for m in slot_matches):
            return ParsedSolution(no_solution=True)
    for match in reversed(slot_matches):
        day = DayOfWeek.parse(match.group(1))
        try:
            start = parse_time(match.group(2))
            end = parse_time(match.group(3))
            block = TimeBlock(start, end)
        except ValueError:
            continue  # malformed times; try an earlier stated slot
        return ParsedSolution(slot=Slot(day, block))
    return ParsedSolution(unparseable=True, raw=text)


@dataclass
class InstanceScore:
    verdicts: dict[str, bool] = field(default_factory=dict)
    fraction_passed: float = 0.0
    pass_all: bool = False
    no_solution_outcome: str = "solution_given"  # correct_no_solution | incorrect_no_solution | solution_given
    detail: str = ""

    def to_json(self) -> dict:
        return {
            "verdicts": self.verdicts,
            "fraction_passed": self.fraction_passed,
            "pass_all": self.pass_all,
            "no_solution_outcome": self.no_solution_outcome,
            "detail": self.detail,
        }

    @classmethod
    def from_json(cls, data: dict) -> "InstanceScore":
        return cls(
            verdicts=dict(data["verdicts"]),
            fraction_passed=data["fraction_passed"],
            pass_all=data["pass_all"],
            no_solution_outcome=data["no_solution_outcome"],
            detail=data.get("detail", ""),
        )


def check_constraints(instance: "CalendarInstance", slot: Slot) -> dict[str, bool]:
    """One boolean verdict per active constraint for a proposed slot."""
    constraints = instance.constraints
    active = constraints.active()
    start, end = slot.block.start, slot.block.end
    day_blocks = {
        pid: week.get(slot.day, ()) for pid, week in instance.availability.items()
    }
    verdicts: dict[str, bool] = {}
    verdicts["availability"] = all(
        any(b.contains(start, end) for b in blocks) for blocks in day_blocks.values()
    )
    verdicts["meeting_duration"] = slot.block.length == constraints.meeting_duration
    if "buffer" in active:
        verdicts["buffer"] = all(
            any(b.contains(start - constraints.buffer, end + constraints.buffer) for b in blocks)
            for blocks in day_blocks.values()
        )
    if "weekdays_only" in active:
        verdicts["weekdays_only"] = slot.day not in WEEKEND
    if "no_before" in active:
        verdicts["no_before"] = start >= constraints.no_before
    if "no_after" in active:
        verdicts["no_after"] = end <= constraints.no_after
    if "blocked_interval" in active:
        verdicts["blocked_interval"] = not constraints.blocked_interval.overlaps(slot.block)
    if "priority" in active:
        slots = feasible_slots(instance)
        verdicts["priority"] = bool(slots) and slot == slots[0]
    return verdicts


def score(instance: "CalendarInstance", parsed: ParsedSolution) -> InstanceScore:
    """Score a parsed answer against the instance's active constraints.

    A refusal on an intentionally unsolvable instance is a full pass; a
    refusal on a solvable one, or an unparseable response, fails every
    active constraint.
    """
    active = instance.constraints.active()
    if parsed.no_solution:
        if not instance.intended_feasible:
            verdicts = {name: True for name in active}
            return InstanceScore(
                verdicts=verdicts,
                fraction_passed=1.0,
                pass_all=True,
                no_solution_outcome="correct_no_solution",
            )
        verdicts = {name: False for name in active}
        return InstanceScore(
            verdicts=verdicts,
            fraction_passed=0.0,
            pass_all=False,
            no_solution_outcome="incorrect_no_solution",
        )
    if parsed.unparseable:
        verdicts = {name: False for name in active}
        return InstanceScore(
            verdicts=verdicts,
            fraction_passed=0.0,
            pass_all=False,
            no_solution_outcome="solution_given",
            detail="unparseable response",
        )
    verdicts = check_constraints(instance, parsed.slot)
    passed = sum(verdicts.values())
    return InstanceScore(
        verdicts=verdicts,
        fraction_passed=passed / len(verdicts),
        pass_all=passed == len(verdicts),
        no_solution_outcome="solution_given",
    )
