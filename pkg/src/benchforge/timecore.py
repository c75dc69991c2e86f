"""Interval arithmetic over days of the week and minute-resolution times.

All times are integer minutes since midnight. There are no dates and no time
zones: schedules live on a single Monday..Sunday week. Blocks are treated as
half-open in spirit: touching blocks share no interior (so they do not
intersect) but are merged when building a union.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Iterable, Sequence

Minutes = int

MINUTES_PER_DAY = 1440

_TIME_RE = re.compile(r"^(\d{1,2}):(\d{2})$")


def parse_time(text: str) -> Minutes:
    """Parse "HH:MM" into minutes since midnight."""
    m = _TIME_RE.match(text.strip())
    if not m:
        raise ValueError(f"not a HH:MM time: {text!r}")
    hours, minutes = int(m.group(1)), int(m.group(2))
    if hours > 24 or minutes > 59 or hours * 60 + minutes > MINUTES_PER_DAY:
        raise ValueError(f"time out of range: {text!r}")
    return hours * 60 + minutes


def format_time(minutes: Minutes) -> str:
    """Render minutes since midnight as zero-padded 24h "HH:MM"."""
    if not 0 <= minutes <= MINUTES_PER_DAY:
        raise ValueError(f"minutes out of range: {minutes}")
    return f"{minutes // 60:02d}:{minutes % 60:02d}"


class DayOfWeek(enum.IntEnum):
    MONDAY = 0
    TUESDAY = 1
    WEDNESDAY = 2
    THURSDAY = 3
    FRIDAY = 4
    SATURDAY = 5
    SUNDAY = 6

    def __str__(self) -> str:
        return self.name.capitalize()

    @classmethod
    def parse(cls, text: str) -> "DayOfWeek":
        try:
            return cls[text.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown day of week: {text!r}") from None


WEEKEND = frozenset({DayOfWeek.SATURDAY, DayOfWeek.SUNDAY})


@dataclass(frozen=True, order=True)
class TimeBlock:
    """A contiguous span of minutes within one day; start < end."""

    start: Minutes
    end: Minutes

    def __post_init__(self):
        if not (0 <= self.start < self.end <= MINUTES_PER_DAY):
            raise ValueError(f"invalid block: {self.start}..{self.end}")

    @property
    def length(self) -> Minutes:
        return self.end - self.start

    def contains(self, start: Minutes, end: Minutes) -> bool:
        return self.start <= start and end <= self.end

    def overlaps(self, other: "TimeBlock") -> bool:
        return self.start < other.end and other.start < self.end

    def __str__(self) -> str:
        return f"{format_time(self.start)}-{format_time(self.end)}"

    @classmethod
    def parse(cls, text: str) -> "TimeBlock":
        left, sep, right = text.strip().partition("-")
        if not sep:
            raise ValueError(f"not a HH:MM-HH:MM block: {text!r}")
        return cls(parse_time(left), parse_time(right))


@dataclass(frozen=True, order=True)
class Slot:
    """A meeting proposal: one day plus one block of meeting-duration length."""

    day: DayOfWeek
    block: TimeBlock

    def __str__(self) -> str:
        return f"{self.day} {self.block}"


# A participant's week: day -> ordered disjoint blocks.
DayBlocks = tuple[TimeBlock, ...]
WeekSchedule = dict[DayOfWeek, DayBlocks]
AvailabilitySchedule = dict[str, WeekSchedule]


def normalize_blocks(blocks: Iterable[TimeBlock]) -> DayBlocks:
    """Sort and merge overlapping or touching blocks into a disjoint list."""
    merged: list[TimeBlock] = []
    for block in sorted(blocks):
        if merged and block.start <= merged[-1].end:
            if block.end > merged[-1].end:
                merged[-1] = TimeBlock(merged[-1].start, block.end)
        else:
            merged.append(block)
    return tuple(merged)


def intersect_blocks(a: Sequence[TimeBlock], b: Sequence[TimeBlock]) -> DayBlocks:
    """Maximal blocks contained in some block of both lists; sorted, disjoint.

    Touching blocks share no interior, so [9:00-10:00] against [10:00-11:00]
    intersects to nothing.
    """
    out: list[TimeBlock] = []
    i = j = 0
    while i < len(a) and j < len(b):
        start = max(a[i].start, b[j].start)
        end = min(a[i].end, b[j].end)
        if start < end:
            out.append(TimeBlock(start, end))
        if a[i].end <= b[j].end:
            i += 1
        else:
            j += 1
    return tuple(out)


def common_availability(schedule: AvailabilitySchedule, day: DayOfWeek) -> DayBlocks:
    """Blocks where every participant is available on the given day.

    An unknown day (absent from every participant) yields an empty result.
    """
    result: DayBlocks | None = None
    for week in schedule.values():
        blocks = week.get(day)
        if blocks is None:
            return ()
        result = tuple(blocks) if result is None else intersect_blocks(result, blocks)
        if not result:
            return ()
    return result or ()


def union_any_available(schedule: AvailabilitySchedule, day: DayOfWeek) -> DayBlocks:
    """Merged blocks where at least one participant is available."""
    all_blocks: list[TimeBlock] = []
    for week in schedule.values():
        all_blocks.extend(week.get(day, ()))
    return normalize_blocks(all_blocks)


def enumerate_slots(
    blocks: Sequence[TimeBlock], duration: Minutes, granularity: Minutes
) -> list[Minutes]:
    """All grid-aligned start times t with [t, t+duration] inside one block.

    Raises ConfigError when duration is not a multiple of granularity; that
    combination signals a misconfigured plan, not a data problem.
    """
    from .errors import ConfigError

    if duration <= 0 or granularity <= 0:
        raise ConfigError(f"duration and granularity must be positive, got {duration}/{granularity}")
    if duration % granularity != 0:
        raise ConfigError(
            f"meeting duration {duration} is not a multiple of granularity {granularity}"
        )
    starts: list[Minutes] = []
    for block in blocks:
        t = -(-block.start // granularity) * granularity  # round up to grid
        while t + duration <= block.end:
            starts.append(t)
            t += granularity
    return starts


def render_week(week: WeekSchedule) -> str:
    """Render one participant's week, one day per line."""
    lines = []
    for day in sorted(week):
        lines.append(f"{day}: " + ", ".join(str(b) for b in week[day]))
    return "\n".join(lines)
