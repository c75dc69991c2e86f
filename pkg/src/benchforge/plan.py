"""Benchmark plans: the structured document every pipeline stage shares.

A plan names the task, the parameter and constraint value ranges to sample
from, the quality checks to run, the evaluation metrics, and the judge prompt
templates. It serializes to a line-oriented text format with stable key order
so a reviewer can edit it in a text editor at a review gate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ConfigError, ValidationError

PLAN_HEADER = "# benchforge plan v1"

# Metric names that aggregate over constraints rather than naming one.
AGGREGATE_METRICS = frozenset({"availability", "topic_consistency", "fraction_passed", "pass_all"})


@dataclass
class PlanParameter:
    name: str
    values: list[str]
    distribution: str = "uniform"


@dataclass
class PlanConstraint:
    name: str
    values: list[str]
    default: str


@dataclass
class PlanCheck:
    name: str
    kind: str  # programmatic | model


@dataclass
class PlanMetric:
    name: str
    kind: str  # programmatic | model


@dataclass
class PlanDoc:
    task: str
    settings: dict[str, str] = field(default_factory=dict)
    parameters: list[PlanParameter] = field(default_factory=list)
    constraints: list[PlanConstraint] = field(default_factory=list)
    quality_checks: list[PlanCheck] = field(default_factory=list)
    metrics: list[PlanMetric] = field(default_factory=list)
    judge_prompts: dict[str, str] = field(default_factory=dict)

    # -- typed settings accessors ------------------------------------------

    def setting_int(self, name: str, default: int | None = None) -> int:
        raw = self.settings.get(name)
        if raw is None:
            if default is None:
                raise ConfigError(f"plan is missing required setting {name!r}")
            return default
        return int(raw)

    def setting_float(self, name: str, default: float | None = None) -> float:
        raw = self.settings.get(name)
        if raw is None:
            if default is None:
                raise ConfigError(f"plan is missing required setting {name!r}")
            return default
        return float(raw)

    @property
    def count(self) -> int:
        return self.setting_int("count", 2000)

    @property
    def granularity(self) -> int:
        return self.setting_int("granularity", 15)

    @property
    def p_infeasible(self) -> float:
        return self.setting_float("p_infeasible", 0.2)

    def parameter_values(self, name: str) -> list[str]:
        for param in self.parameters:
            if param.name == name:
                return param.values
        raise ConfigError(f"plan has no value range for parameter {name!r}")

    def constraint_values(self, name: str) -> list[str]:
        for constraint in self.constraints:
            if constraint.name == name:
                return constraint.values
        raise ConfigError(f"plan has no value range for constraint {name!r}")

    def judge_prompt(self, name: str) -> str:
        if name not in self.judge_prompts:
            raise ConfigError(f"plan has no judge prompt for check {name!r}")
        return self.judge_prompts[name]

    # -- validation ---------------------------------------------------------

    def validate(self) -> None:
        if not self.task:
            raise ValidationError("plan has an empty task name")
        for group, names in (
            ("parameter", [p.name for p in self.parameters]),
            ("constraint", [c.name for c in self.constraints]),
            ("quality check", [c.name for c in self.quality_checks]),
            ("metric", [m.name for m in self.metrics]),
        ):
            if len(names) != len(set(names)):
                raise ValidationError(f"duplicate {group} names in plan: {names}")
        for constraint in self.constraints:
            if not constraint.values:
                raise ValidationError(f"constraint {constraint.name!r} has an empty value range")
            if constraint.default is None or constraint.default == "":
                raise ValidationError(
                    f"constraint {constraint.name!r} has no default; every constraint "
                    f"needs a None/False/0-style default"
                )
        known = {c.name for c in self.constraints} | AGGREGATE_METRICS
        for metric in self.metrics:
            if metric.name not in known:
                raise ValidationError(
                    f"metric {metric.name!r} references neither a constraint nor an aggregate"
                )
        for check in self.quality_checks:
            if check.kind not in ("programmatic", "model"):
                raise ValidationError(f"quality check {check.name!r} has unknown kind {check.kind!r}")
            if check.kind == "model" and check.name not in self.judge_prompts:
                raise ValidationError(f"model-based check {check.name!r} has no judge prompt")

    # -- serialization ------------------------------------------------------

    def to_text(self) -> str:
        lines = [PLAN_HEADER, f"task: {self.task}"]
        for key, value in self.settings.items():
            lines.append(f"{key}: {value}")
        lines.append("")
        lines.append("[parameters]")
        for param in self.parameters:
            suffix = "" if param.distribution == "uniform" else f" ; dist={param.distribution}"
            lines.append(f"{param.name}: " + " | ".join(param.values) + suffix)
        lines.append("")
        lines.append("[constraints]")
        for constraint in self.constraints:
            lines.append(
                f"{constraint.name}: " + " | ".join(constraint.values)
                + f" ; default={constraint.default}"
            )
        lines.append("")
        lines.append("[quality_checks]")
        for check in self.quality_checks:
            lines.append(f"{check.name}: {check.kind}")
        lines.append("")
        lines.append("[metrics]")
        for metric in self.metrics:
            lines.append(f"{metric.name}: {metric.kind}")
        lines.append("")
        lines.append("[judge_prompts]")
        for name, prompt in self.judge_prompts.items():
            lines.append(f"{name}: {prompt}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "PlanDoc":
        plan = cls(task="")
        section = None
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("[") and line.endswith("]"):
                section = line[1:-1]
                if section not in ("parameters", "constraints", "quality_checks", "metrics", "judge_prompts"):
                    raise ValidationError(f"unknown plan section {section!r} (line {lineno})")
                continue
            name, sep, rest = line.partition(":")
            if not sep:
                raise ValidationError(f"malformed plan line {lineno}: {raw!r}")
            name, rest = name.strip(), rest.strip()
            if section is None:
                if name == "task":
                    plan.task = rest
                else:
                    plan.settings[name] = rest
            elif section == "parameters":
                values, opts = _split_options(rest)
                plan.parameters.append(
                    PlanParameter(name, values, distribution=opts.get("dist", "uniform"))
                )
            elif section == "constraints":
                values, opts = _split_options(rest)
                if "default" not in opts:
                    raise ValidationError(
                        f"constraint {name!r} is missing '; default=...' (line {lineno})"
                    )
                plan.constraints.append(PlanConstraint(name, values, default=opts["default"]))
            elif section == "quality_checks":
                plan.quality_checks.append(PlanCheck(name, rest))
            elif section == "metrics":
                plan.metrics.append(PlanMetric(name, rest))
            elif section == "judge_prompts":
                plan.judge_prompts[name] = rest
        plan.validate()
        return plan


def _split_options(rest: str) -> tuple[list[str], dict[str, str]]:
    parts = [p.strip() for p in rest.split(";")]
    values = [v.strip() for v in parts[0].split("|")] if parts[0] else []
    opts: dict[str, str] = {}
    for part in parts[1:]:
        key, sep, value = part.partition("=")
        if sep:
            opts[key.strip()] = value.strip()
    return values, opts


# ---------------------------------------------------------------------------
# Judge prompt templates. Single-line so they survive the line-oriented plan
# format; stage code fills the {placeholders}. Each demands a strict final
# verdict line so the response can be parsed mechanically.

VERDICT_SUFFIX = (
    "First give a one-sentence rationale, then end your reply with a final line "
    "reading exactly 'VERDICT: PASS' or 'VERDICT: FAIL'."
)

CALENDAR_JUDGE_PROMPTS = {
    "clarity": (
        "You are reviewing a benchmark task prompt. Decide whether the prompt below is "
        "understandable and unambiguous for a reader asked to solve it. "
        + VERDICT_SUFFIX
        + " Prompt: {prompt}"
    ),
    "completeness": (
        "You are reviewing a benchmark task prompt. The prompt must mention every one of "
        "these active constraints: {constraints}. Decide whether all of them appear. "
        + VERDICT_SUFFIX
        + " Prompt: {prompt}"
    ),
    "consistency": (
        "You are reviewing a benchmark task prompt. The instance was generated with "
        "{num_participants} participants and {num_days} days of availability. Decide whether "
        "the schedules in the prompt are consistent with those values. "
        + VERDICT_SUFFIX
        + " Prompt: {prompt}"
    ),
}

TEXTGEN_JUDGE_PROMPTS = {
    "clarity": (
        "You are reviewing a writing-task prompt. Decide whether the prompt below is clear "
        "and unambiguous. " + VERDICT_SUFFIX + " Prompt: {prompt}"
    ),
    "completeness": (
        "You are reviewing a writing-task prompt. The prompt must state the topic "
        "'{topic}' and every one of these constraints: {constraints}. Decide whether all "
        "appear. " + VERDICT_SUFFIX + " Prompt: {prompt}"
    ),
    "consistency": (
        "You are reviewing a writing-task prompt for internal consistency between its "
        "stated setting ({user}, {role}, {task}) and its content. "
        + VERDICT_SUFFIX
        + " Prompt: {prompt}"
    ),
    "feasibility": (
        "You are reviewing a writing-task prompt. Decide whether the constraints below can "
        "all be satisfied by a single text, paying particular attention to positional and "
        "sequencing constraints that contradict each other. Constraints: {constraints}. "
        + VERDICT_SUFFIX
    ),
    "constraint_satisfaction": (
        "You are grading a written response against one constraint. Constraint category: "
        "{group} ({definition}). Constraint: {constraint}. Decide whether the response "
        "satisfies it. " + VERDICT_SUFFIX + " Response: {response}"
    ),
    "topic_consistency": (
        "You are grading a written response. Decide whether the response stays on the "
        "topic '{topic}'. " + VERDICT_SUFFIX + " Response: {response}"
    ),
}


def default_calendar_plan(
    count: int = 2000, p_infeasible: float = 0.2, granularity: int = 15, mode: str = "deterministic"
) -> PlanDoc:
    """The built-in calendar-scheduling plan with the full value ranges."""
    plan = PlanDoc(
        task="calendar",
        settings={
            "count": str(count),
            "p_infeasible": str(p_infeasible),
            "granularity": str(granularity),
            "mode": mode,
        },
        parameters=[
            PlanParameter("min_block_len", ["15", "30", "45", "60"]),
            PlanParameter("max_block_len", ["60", "90", "120", "180", "240"]),
            PlanParameter("num_participants", [str(n) for n in range(2, 11)]),
            PlanParameter("num_days", [str(n) for n in range(1, 8)]),
            PlanParameter("min_blocks_per_day", [str(n) for n in range(1, 6)]),
            PlanParameter("max_blocks_per_day", [str(n) for n in range(1, 6)]),
            PlanParameter("earliest_start", ["06:00", "07:00", "08:00", "09:00"]),
            PlanParameter("latest_end", ["17:00", "18:00", "19:00", "20:00"]),
        ],
        constraints=[
            PlanConstraint("meeting_duration", ["15", "30", "45", "60", "90", "120"], default="15"),
            PlanConstraint("buffer", ["0", "5", "10", "15", "30"], default="0"),
            PlanConstraint("weekdays_only", ["False", "True"], default="False"),
            PlanConstraint("no_before", ["None", "08:00", "09:00", "10:00"], default="None"),
            PlanConstraint("no_after", ["None", "17:00", "18:00", "19:00"], default="None"),
            PlanConstraint("priority", ["False", "True"], default="False"),
            PlanConstraint("blocked_interval", ["None", "12:00-13:00", "16:00-17:00"], default="None"),
        ],
        quality_checks=[
            PlanCheck("clarity", "model"),
            PlanCheck("consistency", "model"),
            PlanCheck("constrainedness", "programmatic"),
            PlanCheck("completeness", "model"),
            PlanCheck("feasibility", "programmatic"),
        ],
        metrics=[
            PlanMetric("availability", "programmatic"),
            PlanMetric("meeting_duration", "programmatic"),
            PlanMetric("buffer", "programmatic"),
            PlanMetric("weekdays_only", "programmatic"),
            PlanMetric("no_before", "programmatic"),
            PlanMetric("no_after", "programmatic"),
            PlanMetric("priority", "programmatic"),
            PlanMetric("blocked_interval", "programmatic"),
        ],
        judge_prompts=dict(CALENDAR_JUDGE_PROMPTS),
    )
    plan.validate()
    return plan


def default_textgen_plan(count: int = 2000, mode: str = "deterministic") -> PlanDoc:
    """The built-in constrained-text-generation plan.

    Constraint entries carry per-group count ranges; the group taxonomy and
    the user/role/task table live in the textgen module.
    """
    groups = ["positive", "negative", "positional", "sequencing", "conditional", "iterative"]
    plan = PlanDoc(
        task="textgen",
        settings={
            "count": str(count),
            "mode": mode,
            "max_total_constraints": "12",
        },
        parameters=[
            PlanParameter("user", ["Chef", "Teacher", "Student", "Researcher", "Engineer"]),
        ],
        constraints=[PlanConstraint(group, ["0", "1", "2"], default="0") for group in groups],
        quality_checks=[
            PlanCheck("clarity", "model"),
            PlanCheck("consistency", "model"),
            PlanCheck("constrainedness", "programmatic"),
            PlanCheck("completeness", "model"),
            PlanCheck("feasibility", "model"),
        ],
        metrics=[PlanMetric("topic_consistency", "model")]
        + [PlanMetric(group, "model") for group in groups],
        judge_prompts=dict(TEXTGEN_JUDGE_PROMPTS),
    )
    plan.validate()
    return plan


def default_plan(task: str, **kwargs) -> PlanDoc:
    if task == "calendar":
        return default_calendar_plan(**kwargs)
    if task == "textgen":
        return default_textgen_plan(**kwargs)
    raise ConfigError(f"unknown task {task!r}; expected 'calendar' or 'textgen'")
