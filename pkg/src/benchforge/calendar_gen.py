"""Seedable generation of calendar-scheduling instances.

Generation is answer-first: sample parameters, then constraints, then a
candidate answer satisfying the constraints, then availability schedules that
embed the candidate (or, for intentionally unsolvable instances, schedules
with every fully-constrained slot carved out). The whole path is a pure
function of (seed, plan) in deterministic prompt mode.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .backends import BackendError, ChatBackend, ChatRequest, chat
from .errors import ConfigError, GenerationError
from .plan import PlanDoc
from .timecore import (
    WEEKEND,
    AvailabilitySchedule,
    DayOfWeek,
    Minutes,
    Slot,
    TimeBlock,
    WeekSchedule,
    format_time,
    parse_time,
)

MAX_STAGE_RETRIES = 20


@dataclass(frozen=True)
class SchedulingParameters:
    min_block_len: Minutes
    max_block_len: Minutes
    num_participants: int
    num_days: int
    min_blocks_per_day: int
    max_blocks_per_day: int
    earliest_start: Minutes
    latest_end: Minutes
    start_day: DayOfWeek

    def __post_init__(self):
        if self.min_block_len > self.max_block_len:
            raise ValueError("min_block_len exceeds max_block_len")
        if self.min_blocks_per_day > self.max_blocks_per_day:
            raise ValueError("min_blocks_per_day exceeds max_blocks_per_day")
        if self.earliest_start >= self.latest_end:
            raise ValueError("earliest_start must precede latest_end")
        if int(self.start_day) + self.num_days > 7:
            raise ValueError("day window does not fit within Monday..Sunday")

    @property
    def days(self) -> list[DayOfWeek]:
        return [DayOfWeek(int(self.start_day) + i) for i in range(self.num_days)]

    @property
    def window(self) -> Minutes:
        return self.latest_end - self.earliest_start

    def to_json(self) -> dict:
        return {
            "min_block_len": self.min_block_len,
            "max_block_len": self.max_block_len,
            "num_participants": self.num_participants,
            "num_days": self.num_days,
            "min_blocks_per_day": self.min_blocks_per_day,
            "max_blocks_per_day": self.max_blocks_per_day,
            "earliest_start": format_time(self.earliest_start),
            "latest_end": format_time(self.latest_end),
            "start_day": str(self.start_day),
        }

    @classmethod
    def from_json(cls, data: dict) -> "SchedulingParameters":
        return cls(
            min_block_len=data["min_block_len"],
            max_block_len=data["max_block_len"],
            num_participants=data["num_participants"],
            num_days=data["num_days"],
            min_blocks_per_day=data["min_blocks_per_day"],
            max_blocks_per_day=data["max_blocks_per_day"],
            earliest_start=parse_time(data["earliest_start"]),
            latest_end=parse_time(data["latest_end"]),
            start_day=DayOfWeek.parse(data["start_day"]),
        )


@dataclass(frozen=True)
class SchedulingConstraints:
    meeting_duration: Minutes = 15
    buffer: Minutes = 0
    weekdays_only: bool = False
    no_before: Minutes | None = None
    no_after: Minutes | None = None
    priority: bool = False
    blocked_interval: TimeBlock | None = None

    def active(self) -> list[str]:
        """Names of the active constraints; availability and duration always are."""
        names = ["availability", "meeting_duration"]
        if self.buffer > 0:
            names.append("buffer")
        if self.weekdays_only:
            names.append("weekdays_only")
        if self.no_before is not None:
            names.append("no_before")
        if self.no_after is not None:
            names.append("no_after")
        if self.blocked_interval is not None:
            names.append("blocked_interval")
        if self.priority:
            names.append("priority")
        return names

    def to_json(self) -> dict:
        return {
            "meeting_duration": self.meeting_duration,
            "buffer": self.buffer,
            "weekdays_only": self.weekdays_only,
            "no_before": None if self.no_before is None else format_time(self.no_before),
            "no_after": None if self.no_after is None else format_time(self.no_after),
            "priority": self.priority,
            "blocked_interval": None if self.blocked_interval is None else str(self.blocked_interval),
        }

    @classmethod
    def from_json(cls, data: dict) -> "SchedulingConstraints":
        return cls(
            meeting_duration=data["meeting_duration"],
            buffer=data["buffer"],
            weekdays_only=data["weekdays_only"],
            no_before=None if data["no_before"] is None else parse_time(data["no_before"]),
            no_after=None if data["no_after"] is None else parse_time(data["no_after"]),
            priority=data["priority"],
            blocked_interval=(
                None if data["blocked_interval"] is None else TimeBlock.parse(data["blocked_interval"])
            ),
        )


@dataclass(frozen=True)
class CandidateAnswer:
    """Either an intended solution slot or an explicit no-solution intent."""

    slot: Slot | None = None
    no_solution: bool = False

    def __post_init__(self):
        if (self.slot is None) == (not self.no_solution):
            raise ValueError("candidate must be exactly one of slot / no_solution")

    def to_json(self) -> dict:
        if self.no_solution:
            return {"no_solution": True}
        return {"slot": str(self.slot)}

    @classmethod
    def from_json(cls, data: dict) -> "CandidateAnswer":
        if data.get("no_solution"):
            return cls(no_solution=True)
        day_text, _, block_text = data["slot"].partition(" ")
        return cls(slot=Slot(DayOfWeek.parse(day_text), TimeBlock.parse(block_text)))


@dataclass
class CalendarInstance:
    id: str
    seed: int
    prompt: str
    parameters: SchedulingParameters
    constraints: SchedulingConstraints
    availability: AvailabilitySchedule
    candidate: CandidateAnswer  # withheld from the prompt
    intended_feasible: bool
    granularity: Minutes = 15
    prompt_source: str = "template"  # template | paraphrase | template_fallback

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "seed": self.seed,
            "prompt": self.prompt,
            "parameters": self.parameters.to_json(),
            "constraints": self.constraints.to_json(),
            "availability": {
                pid: {str(day): [str(b) for b in blocks] for day, blocks in week.items()}
                for pid, week in self.availability.items()
            },
            "candidate": self.candidate.to_json(),
            "intended_feasible": self.intended_feasible,
            "granularity": self.granularity,
            "prompt_source": self.prompt_source,
        }

    @classmethod
    def from_json(cls, data: dict) -> "CalendarInstance":
        return cls(
            id=data["id"],
            seed=data["seed"],
            prompt=data["prompt"],
            parameters=SchedulingParameters.from_json(data["parameters"]),
            constraints=SchedulingConstraints.from_json(data["constraints"]),
            availability={
                pid: {
                    DayOfWeek.parse(day): tuple(TimeBlock.parse(b) for b in blocks)
                    for day, blocks in week.items()
                }
                for pid, week in data["availability"].items()
            },
            candidate=CandidateAnswer.from_json(data["candidate"]),
            intended_feasible=data["intended_feasible"],
            granularity=data.get("granularity", 15),
            prompt_source=data.get("prompt_source", "template"),
        )


# ---------------------------------------------------------------------------
# Sampling


def _choose(rng: random.Random, values: list[str]) -> str:
    if not values:
        raise ConfigError("empty value range in plan")
    return values[rng.randrange(len(values))]


def _parse_optional_time(text: str) -> Minutes | None:
    return None if text == "None" else parse_time(text)


def sample_parameters(rng: random.Random, plan: PlanDoc) -> SchedulingParameters:
    """Draw every parameter uniformly from its plan range.

    Min/max pairs that come out inverted are swapped rather than resampled, so
    a single rng pass always yields a valid parameter set.
    """
    min_block = int(_choose(rng, plan.parameter_values("min_block_len")))
    max_block = int(_choose(rng, plan.parameter_values("max_block_len")))
    if min_block > max_block:
        min_block, max_block = max_block, min_block
    num_participants = int(_choose(rng, plan.parameter_values("num_participants")))
    num_days = int(_choose(rng, plan.parameter_values("num_days")))
    min_blocks = int(_choose(rng, plan.parameter_values("min_blocks_per_day")))
    max_blocks = int(_choose(rng, plan.parameter_values("max_blocks_per_day")))
    if min_blocks > max_blocks:
        min_blocks, max_blocks = max_blocks, min_blocks
    earliest = parse_time(_choose(rng, plan.parameter_values("earliest_start")))
    latest = parse_time(_choose(rng, plan.parameter_values("latest_end")))
    # Any start day works as long as the window fits without wrapping the week.
    fitting_days = [DayOfWeek(i) for i in range(0, 8 - num_days)]
    start_day = fitting_days[rng.randrange(len(fitting_days))]
    return SchedulingParameters(
        min_block_len=min_block,
        max_block_len=max_block,
        num_participants=num_participants,
        num_days=num_days,
        min_blocks_per_day=min_blocks,
        max_blocks_per_day=max_blocks,
        earliest_start=earliest,
        latest_end=latest,
        start_day=start_day,
    )


def _grid_pad(buffer: Minutes, granularity: Minutes) -> Minutes:
    """Round a buffer up to the granularity grid (block bounds live on the grid)."""
    if buffer == 0:
        return 0
    return -(-buffer // granularity) * granularity


def sample_constraints(
    rng: random.Random, params: SchedulingParameters, plan: PlanDoc
) -> SchedulingConstraints:
    """Draw constraints from the plan ranges, filtered so a candidate slot can
    be embedded in a single availability block.

    The meeting duration is capped by the day window and the maximum block
    length; the buffer is capped so the buffered meeting (rounded out to the
    grid) still fits in one block of maximal length.
    """
    granularity = plan.granularity
    duration_values = [
        int(v)
        for v in plan.constraint_values("meeting_duration")
        if int(v) <= min(params.window, params.max_block_len)
    ]
    if not duration_values:
        raise GenerationError(
            f"no meeting duration fits window {params.window} and "
            f"max block length {params.max_block_len}"
        )
    duration = duration_values[rng.randrange(len(duration_values))]
    buffer_values = [
        int(v)
        for v in plan.constraint_values("buffer")
        if duration + 2 * _grid_pad(int(v), granularity) <= params.max_block_len
        and duration + 2 * int(v) <= params.window
    ]
    buffer = buffer_values[rng.randrange(len(buffer_values))]
    weekdays_only = _choose(rng, plan.constraint_values("weekdays_only")) == "True"
    no_before = _parse_optional_time(_choose(rng, plan.constraint_values("no_before")))
    no_after = _parse_optional_time(_choose(rng, plan.constraint_values("no_after")))
    priority = _choose(rng, plan.constraint_values("priority")) == "True"
    blocked_text = _choose(rng, plan.constraint_values("blocked_interval"))
    blocked = None if blocked_text == "None" else TimeBlock.parse(blocked_text)
    return SchedulingConstraints(
        meeting_duration=duration,
        buffer=buffer,
        weekdays_only=weekdays_only,
        no_before=no_before,
        no_after=no_after,
        priority=priority,
        blocked_interval=blocked,
    )


def admissible_slots(
    params: SchedulingParameters, constraints: SchedulingConstraints, granularity: Minutes
) -> list[Slot]:
    """All slots satisfying every non-availability constraint, ascending."""
    duration = constraints.meeting_duration
    buffer = constraints.buffer
    slots: list[Slot] = []
    for day in params.days:
        if constraints.weekdays_only and day in WEEKEND:
            continue
        t = params.earliest_start
        while t + duration <= params.latest_end:
            ok = (
                t - buffer >= params.earliest_start
                and t + duration + buffer <= params.latest_end
                and (constraints.no_before is None or t >= constraints.no_before)
                and (constraints.no_after is None or t + duration <= constraints.no_after)
            )
            if ok and constraints.blocked_interval is not None:
                ok = not constraints.blocked_interval.overlaps(TimeBlock(t, t + duration))
            if ok:
                slots.append(Slot(day, TimeBlock(t, t + duration)))
            t += granularity
    return slots


def sample_answer(
    rng: random.Random,
    params: SchedulingParameters,
    constraints: SchedulingConstraints,
    p_infeasible: float,
    granularity: Minutes,
) -> CandidateAnswer:
    """Pick an intended solution, or an explicit no-solution intent.

    The no-solution branch fires with probability p_infeasible, and
    deterministically whenever the constraints admit no slot at all.
    """
    want_infeasible = rng.random() < p_infeasible
    slots = admissible_slots(params, constraints, granularity)
    if want_infeasible or not slots:
        return CandidateAnswer(no_solution=True)
    return CandidateAnswer(slot=slots[rng.randrange(len(slots))])


# ---------------------------------------------------------------------------
# Availability sampling


def _place_in_segment(
    rng: random.Random,
    seg_start: Minutes,
    seg_end: Minutes,
    lengths: list[Minutes],
    granularity: Minutes,
) -> list[TimeBlock] | None:
    """Lay out blocks of the given lengths inside one segment with random
    grid-sized gaps; blocks stay pairwise non-adjacent. None when they don't fit."""
    if not lengths:
        return []
    if seg_end <= seg_start:
        return None
    needed = sum(lengths) + (len(lengths) - 1) * granularity
    free = (seg_end - seg_start) - needed
    if free < 0:
        return None
    units = free // granularity
    bars = sorted(rng.randint(0, units) for _ in range(len(lengths)))
    gaps = [bars[0]] + [bars[i] - bars[i - 1] for i in range(1, len(bars))]
    blocks = []
    pos = seg_start
    for gap_units, length in zip(gaps, lengths):
        pos += gap_units * granularity
        blocks.append(TimeBlock(pos, pos + length))
        pos += length + granularity
    return blocks


def _sample_lengths(
    rng: random.Random, count: int, params: SchedulingParameters, granularity: Minutes
) -> list[Minutes]:
    return [
        rng.randrange(params.min_block_len, params.max_block_len + 1, granularity)
        for _ in range(count)
    ]


def _sample_day_blocks(
    rng: random.Random,
    params: SchedulingParameters,
    granularity: Minutes,
    required: TimeBlock | None,
) -> tuple[TimeBlock, ...]:
    """One participant-day: between min and max blocks inside the day window,
    one of which must contain `required` when given."""
    w0, w1 = params.earliest_start, params.latest_end
    for attempt in range(MAX_STAGE_RETRIES):
        force_min = attempt == MAX_STAGE_RETRIES - 1  # last try is the conservative layout
        n = params.min_blocks_per_day if force_min else rng.randint(
            params.min_blocks_per_day, params.max_blocks_per_day
        )
        if required is None:
            lengths = (
                [params.min_block_len] * n if force_min else _sample_lengths(rng, n, params, granularity)
            )
            blocks = _place_in_segment(rng, w0, w1, lengths, granularity)
            if blocks is not None:
                return tuple(blocks)
            continue
        # Anchor block containing the required interval.
        anchor_min = max(params.min_block_len, required.length)
        anchor_max = max(params.max_block_len, anchor_min)
        anchor_len = anchor_min if force_min else rng.randrange(anchor_min, anchor_max + 1, granularity)
        lo = max(w0, required.end - anchor_len)
        hi = min(required.start, w1 - anchor_len)
        if lo > hi:
            continue
        starts = range(lo, hi + 1, granularity)
        anchor_start = starts[0] if force_min else starts[rng.randrange(len(starts))]
        anchor = TimeBlock(anchor_start, anchor_start + anchor_len)
        rest_lengths = (
            [params.min_block_len] * (n - 1)
            if force_min
            else _sample_lengths(rng, n - 1, params, granularity)
        )
        left_lengths: list[Minutes] = []
        right_lengths: list[Minutes] = []
        left_cap = max(0, anchor.start - granularity - w0)
        for length in rest_lengths:
            left_need = sum(left_lengths) + len(left_lengths) * granularity + length
            go_left = left_need <= left_cap if force_min else rng.random() < 0.5
            (left_lengths if go_left else right_lengths).append(length)
        left = _place_in_segment(rng, w0, anchor.start - granularity, left_lengths, granularity)
        right = _place_in_segment(rng, anchor.end + granularity, w1, right_lengths, granularity)
        if left is None or right is None:
            continue
        return tuple(sorted(left + [anchor] + right))
    raise GenerationError(
        f"cannot fit {params.min_blocks_per_day} blocks of at least {params.min_block_len} "
        f"minutes into the {w0}-{w1} window"
    )


def _is_slot_feasible(
    availability: AvailabilitySchedule,
    slot: Slot,
    buffer: Minutes,
) -> bool:
    start, end = slot.block.start - buffer, slot.block.end + buffer
    for week in availability.values():
        blocks = week.get(slot.day, ())
        if not any(b.contains(start, end) for b in blocks):
            return False
    return True


def _remove_chunk(week: WeekSchedule, day: DayOfWeek, chunk: TimeBlock, min_len: Minutes) -> None:
    """Cut a chunk out of one participant-day; fragments below the minimum
    block length are dropped entirely."""
    new_blocks: list[TimeBlock] = []
    for block in week.get(day, ()):
        if not block.overlaps(chunk):
            new_blocks.append(block)
            continue
        if chunk.start - block.start >= min_len:
            new_blocks.append(TimeBlock(block.start, chunk.start))
        if block.end - chunk.end >= min_len:
            new_blocks.append(TimeBlock(chunk.end, block.end))
    week[day] = tuple(new_blocks)


def _carve_all_feasible(
    rng: random.Random,
    availability: AvailabilitySchedule,
    params: SchedulingParameters,
    constraints: SchedulingConstraints,
    granularity: Minutes,
) -> None:
    """Make the instance unsolvable by carving every fully-constrained slot
    out of a randomly chosen participant's availability, slot by slot."""
    pids = list(availability)
    candidates = admissible_slots(params, constraints, granularity)
    for _ in range(MAX_STAGE_RETRIES):
        carved = False
        for slot in candidates:
            if not _is_slot_feasible(availability, slot, constraints.buffer):
                continue
            pid = pids[rng.randrange(len(pids))]
            s, e = slot.block.start, slot.block.end
            mid = s + ((e - s) // 2 // granularity) * granularity
            _remove_chunk(
                availability[pid], slot.day, TimeBlock(mid, mid + granularity), params.min_block_len
            )
            carved = True
        if not carved:
            return
    raise GenerationError("could not carve availability into an unsolvable instance")


def sample_availability(
    rng: random.Random,
    params: SchedulingParameters,
    constraints: SchedulingConstraints,
    candidate: CandidateAnswer,
    granularity: Minutes,
) -> AvailabilitySchedule:
    """Per-participant, per-day block sampling.

    With a candidate slot, every participant gets a block containing the
    buffered meeting (rounded out to the grid). With a no-solution intent,
    schedules are sampled freely and then carved until no slot satisfies all
    constraints.
    """
    required = None
    if candidate.slot is not None:
        pad = constraints.buffer
        req_start = (candidate.slot.block.start - pad) // granularity * granularity
        req_end = -(-(candidate.slot.block.end + pad) // granularity) * granularity
        required = TimeBlock(max(params.earliest_start, req_start), min(params.latest_end, req_end))
    availability: AvailabilitySchedule = {}
    for i in range(params.num_participants):
        pid = f"p{i + 1}"
        week: WeekSchedule = {}
        for day in params.days:
            anchor = required if (candidate.slot is not None and day == candidate.slot.day) else None
            week[day] = _sample_day_blocks(rng, params, granularity, anchor)
        availability[pid] = week
    if candidate.no_solution:
        _carve_all_feasible(rng, availability, params, constraints, granularity)
    return availability


# ---------------------------------------------------------------------------
# Prompt rendering


PARAPHRASE_INSTRUCTION = (
    "Rewrite the meeting-scheduling prompt below with different wording. Keep every "
    "number, time, day name, participant name and schedule line exactly as given, and "
    "do not add or remove any requirement. Reply with the rewritten prompt only.\n\n"
)


def render_prompt(
    params: SchedulingParameters,
    constraints: SchedulingConstraints,
    availability: AvailabilitySchedule,
    mode: str = "deterministic",
    backend: ChatBackend | None = None,
) -> tuple[str, str]:
    """Render the instance prompt; returns (text, source).

    Deterministic mode emits a fixed template: one sentence per active
    constraint, the availability section, then the question. Paraphrase mode
    asks a backend to restate the template and falls back to the template
    (tagging the instance) when the backend fails.
    """
    sentences = [
        "Given the following availability schedules for participants, find a common "
        f"time slot for a meeting that lasts {constraints.meeting_duration} minutes."
    ]
    if constraints.buffer > 0:
        sentences.append(
            f"Additionally, ensure there is a buffer time of {constraints.buffer} minutes "
            "before and after the meeting."
        )
    if constraints.weekdays_only:
        sentences.append("The meeting must be scheduled on a weekday.")
    if constraints.no_before is not None:
        sentences.append(f"No meetings before {format_time(constraints.no_before)}.")
    if constraints.no_after is not None:
        sentences.append(f"No meetings after {format_time(constraints.no_after)}.")
    if constraints.blocked_interval is not None:
        sentences.append(f"No meetings during {constraints.blocked_interval}.")
    if constraints.priority:
        sentences.append(
            "This is a high priority meeting and must be scheduled in the first available slot."
        )
    lines = [" ".join(sentences), "", "Availability:"]
    for pid in availability:
        lines.append(f"{pid}:")
        week = availability[pid]
        for day in sorted(week):
            lines.append(f"{day}: " + ", ".join(str(b) for b in week[day]))
    lines += ["", "What is the common time slot for the meeting?"]
    template = "\n".join(lines)
    if mode == "deterministic":
        return template, "template"
    if mode != "paraphrase":
        raise ConfigError(f"unknown prompt mode {mode!r}")
    if backend is None:
        raise ConfigError("paraphrase mode requires a chat backend")
    try:
        response = chat(
            backend,
            ChatRequest.user("paraphraser", PARAPHRASE_INSTRUCTION + template),
            stage="paraphrase",
        )
        return response.content.strip(), "paraphrase"
    except BackendError:
        return template, "template_fallback"


# ---------------------------------------------------------------------------
# Instance assembly


def generate_instance(
    master_seed: int,
    index: int,
    plan: PlanDoc,
    mode: str = "deterministic",
    backend: ChatBackend | None = None,
) -> CalendarInstance:
    """Compose the four sampling stages plus prompt rendering for one index.

    Each instance draws from its own rng stream derived from (seed, index), so
    instances generate independently and in parallel-safe fashion. Failed
    attempts retry with a fresh sub-seed, bounded by the stage retry budget.
    """
    granularity = plan.granularity
    p_infeasible = plan.p_infeasible
    last_error: GenerationError | None = None
    for attempt in range(MAX_STAGE_RETRIES):
        rng = random.Random(f"{master_seed}:{index}:{attempt}")
        try:
            params = sample_parameters(rng, plan)
            constraints = sample_constraints(rng, params, plan)
            candidate = sample_answer(rng, params, constraints, p_infeasible, granularity)
            availability = sample_availability(rng, params, constraints, candidate, granularity)
            if constraints.priority and candidate.slot is not None:
                # The priority constraint pins the answer to the chronologically
                # first feasible slot; re-anchor the candidate to it.
                from .calendar_verify import enumerate_feasible_slots

                slots = enumerate_feasible_slots(availability, constraints, params.days, granularity)
                candidate = CandidateAnswer(slot=slots[0])
            prompt, source = render_prompt(params, constraints, availability, mode, backend)
            return CalendarInstance(
                id=f"cal-{master_seed}-{index:05d}",
                seed=master_seed,
                prompt=prompt,
                parameters=params,
                constraints=constraints,
                availability=availability,
                candidate=candidate,
                intended_feasible=candidate.slot is not None,
                granularity=granularity,
                prompt_source=source,
            )
        except GenerationError as exc:
            last_error = exc
    raise GenerationError(
        f"instance {index} failed after {MAX_STAGE_RETRIES} attempts: {last_error}"
    )


def generate_benchmark(
    master_seed: int,
    plan: PlanDoc,
    count: int | None = None,
    mode: str | None = None,
    backend: ChatBackend | None = None,
) -> list[CalendarInstance]:
    count = plan.count if count is None else count
    mode = plan.settings.get("mode", "deterministic") if mode is None else mode
    return [generate_instance(master_seed, i, plan, mode, backend) for i in range(count)]
