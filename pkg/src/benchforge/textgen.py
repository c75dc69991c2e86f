"""Constrained long-form text generation task.

Instances are built around a user/role/task setting, an LLM-generated topic,
and a set of LLM-generated constraints drawn from six constraint groups.
Constraints are generated one at a time with all earlier constraints kept
in-context so later ones stay consistent. Quality checks and response
evaluation are judge-based; only constrainedness is programmatic.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field

from .backends import BackendError, ChatBackend, ChatRequest, chat
from .calendar_eval import InstanceScore
from .calendar_verify import CheckReport, CheckResult
from .errors import ConfigError
from .judging import run_judge_check
from .plan import PlanDoc

# Writing settings: user -> (roles, task).
SETTINGS: dict[str, tuple[tuple[str, str], str]] = {
    "Chef": (("amateur", "professional"), "recipe"),
    "Teacher": (("primary school", "high school"), "lesson plan"),
    "Student": (("high school", "university"), "essay"),
    "Researcher": (("machine learning", "biology"), "scientific article"),
    "Engineer": (("mechanical", "structural"), "technical report"),
}

# Fixed generation order for constraint groups.
GROUPS = ["positive", "negative", "positional", "sequencing", "conditional", "iterative"]

GROUP_DEFINITIONS = {
    "positive": "the text must include specified content",
    "negative": "the text must exclude specified content",
    "positional": "specified content must appear at an absolute or relative position in the text",
    "sequencing": "specified pieces of content must appear in a given order",
    "conditional": (
        "a constraint applies only when the text meets a condition, optionally with else "
        "branches; never use the ambiguous form 'apply one constraint or another'"
    ),
    "iterative": "a constraint is applied repeatedly, once per item in a list",
}


@dataclass(frozen=True)
class TextGenParameters:
    user: str
    role: str
    task: str
    counts: dict[str, int]

    def active_groups(self) -> list[str]:
        return [g for g in GROUPS if self.counts.get(g, 0) > 0]

    def total_constraints(self) -> int:
        return sum(self.counts.values())

    def to_json(self) -> dict:
        return {"user": self.user, "role": self.role, "task": self.task, "counts": dict(self.counts)}

    @classmethod
    def from_json(cls, data: dict) -> "TextGenParameters":
        return cls(user=data["user"], role=data["role"], task=data["task"], counts=dict(data["counts"]))


@dataclass(frozen=True)
class TextGenConstraint:
    group: str
    text: str


@dataclass
class TextGenInstance:
    id: str
    seed: int
    prompt: str
    parameters: TextGenParameters
    topic: str
    constraints: list[TextGenConstraint] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "seed": self.seed,
            "prompt": self.prompt,
            "parameters": self.parameters.to_json(),
            "topic": self.topic,
            "constraints": [{"group": c.group, "text": c.text} for c in self.constraints],
        }

    @classmethod
    def from_json(cls, data: dict) -> "TextGenInstance":
        return cls(
            id=data["id"],
            seed=data["seed"],
            prompt=data["prompt"],
            parameters=TextGenParameters.from_json(data["parameters"]),
            topic=data["topic"],
            constraints=[TextGenConstraint(c["group"], c["text"]) for c in data["constraints"]],
        )


def sample_textgen_parameters(rng: random.Random, plan: PlanDoc) -> TextGenParameters:
    """Uniform draws for the setting and per-group constraint counts.

    At least one group must be non-zero; all-zero draws are retried and, for
    degenerate generators that cannot produce anything else, repaired by
    bumping the first group to one.
    """
    users = plan.parameter_values("user")
    user = users[rng.randrange(len(users))]
    if user not in SETTINGS:
        raise ConfigError(f"plan names unknown user {user!r}")
    roles, task = SETTINGS[user]
    role = roles[rng.randrange(len(roles))]
    for _ in range(10):
        counts = {g: int(plan.constraint_values(g)[rng.randrange(len(plan.constraint_values(g)))]) for g in GROUPS}
        if sum(counts.values()) > 0:
            break
    else:
        counts[GROUPS[0]] = 1
    return TextGenParameters(user=user, role=role, task=task, counts=counts)


def generate_topic(params: TextGenParameters, backend: ChatBackend) -> str:
    """One short topic grounded on the setting; retried once on empty output."""
    prompt = (
        f"Propose one short topic for a {params.task} written by a {params.role} "
        f"{params.user.lower()}. Reply with the topic only, no punctuation around it."
    )
    for attempt in range(2):
        response = chat(backend, ChatRequest.user("generator", prompt), stage="topic")
        topic = response.content.strip()
        if topic:
            return topic
    raise BackendError("topic generation returned empty output twice")


def generate_constraints(
    params: TextGenParameters, topic: str, backend: ChatBackend
) -> list[TextGenConstraint]:
    """Generate constraints group by group, one at a time, each with the full
    list of earlier constraints in-context. Backend failures abort the
    instance; there are no partial instances."""
    constraints: list[TextGenConstraint] = []
    for group in GROUPS:
        for _ in range(params.counts.get(group, 0)):
            prior = "\n".join(f"- {c.text}" for c in constraints) or "(none yet)"
            prompt = (
                f"You are creating constraints for a {params.task} written by a "
                f"{params.role} {params.user.lower()} on the topic of {topic}.\n"
                f"Constraint category: {group} ({GROUP_DEFINITIONS[group]}).\n"
                f"Constraints so far:\n{prior}\n"
                f"Write one new {group} constraint consistent with all constraints so far. "
                f"Reply with the constraint sentence only."
            )
            response = chat(backend, ChatRequest.user("generator", prompt), stage=f"constraint:{group}")
            text = response.content.strip()
            if not text:
                raise BackendError(f"empty {group} constraint for instance topic {topic!r}")
            constraints.append(TextGenConstraint(group, text))
    return constraints


def render_textgen_prompt(params: TextGenParameters, topic: str, constraints: list[TextGenConstraint]) -> str:
    lines = [
        f"You are a {params.role} {params.user.lower()}. Write a {params.task} on the "
        f"topic of {topic}.",
        "",
        "Your text must satisfy all of the following requirements:",
    ]
    lines += [f"- {c.text}" for c in constraints]
    return "\n".join(lines)


def textgen_constrainedness(params: TextGenParameters, plan: PlanDoc) -> float:
    """Fraction of the plan's maximum possible constraints actually applied."""
    total_possible = plan.setting_int("max_total_constraints")
    if total_possible <= 0:
        raise ConfigError("plan setting max_total_constraints must be positive")
    return min(1.0, params.total_constraints() / total_possible)


def generate_textgen_instance(
    master_seed: int, index: int, plan: PlanDoc, backend: ChatBackend
) -> TextGenInstance:
    rng = random.Random(f"{master_seed}:{index}")
    params = sample_textgen_parameters(rng, plan)
    topic = generate_topic(params, backend)
    constraints = generate_constraints(params, topic, backend)
    return TextGenInstance(
        id=f"txt-{master_seed}-{index:05d}",
        seed=master_seed,
        prompt=render_textgen_prompt(params, topic, constraints),
        parameters=params,
        topic=topic,
        constraints=constraints,
    )


def judge_quality(instance: TextGenInstance, plan: PlanDoc, judge: ChatBackend) -> CheckReport:
    """Plan-named quality checks for one instance; all model-based except
    constrainedness. The feasibility prompt probes for mutually contradictory
    constraints, which positional+sequencing pairs are prone to."""
    report = CheckReport(instance_id=instance.id)
    score = textgen_constrainedness(instance.parameters, plan)
    report.constrainedness = score
    constraint_list = "; ".join(c.text for c in instance.constraints)
    context = {
        "prompt": instance.prompt,
        "topic": instance.topic,
        "constraints": constraint_list,
        "user": instance.parameters.user,
        "role": instance.parameters.role,
        "task": instance.parameters.task,
    }
    for check in plan.quality_checks:
        if check.name == "constrainedness":
            report.checks[check.name] = CheckResult(
                "pass", "programmatic", f"constrainedness={score:.4f}"
            )
            continue
        prompt = plan.judge_prompt(check.name).format(**context)
        verdict, detail = run_judge_check(judge, prompt, stage=f"verify:{check.name}")
        report.checks[check.name] = CheckResult("pass" if verdict else "fail", "model", detail)
    return report


def judge_response(
    instance: TextGenInstance, response_text: str, plan: PlanDoc, judge: ChatBackend
) -> InstanceScore:
    """Judge a model response constraint by constraint.

    A constraint group passes only when every constraint in it passes, and
    fraction_passed is computed over groups (never raw constraints). pass_all
    additionally requires topic consistency.
    """
    if not response_text.strip():
        groups = instance.parameters.active_groups()
        verdicts = {g: False for g in groups}
        verdicts["topic_consistency"] = False
        return InstanceScore(
            verdicts=verdicts, fraction_passed=0.0, pass_all=False, detail="empty response"
        )
    per_constraint: list[dict] = []
    group_verdicts: dict[str, bool] = {g: True for g in instance.parameters.active_groups()}
    for constraint in instance.constraints:
        prompt = plan.judge_prompt("constraint_satisfaction").format(
            group=constraint.group,
            definition=GROUP_DEFINITIONS[constraint.group],
            constraint=constraint.text,
            response=response_text,
        )
        verdict, detail = run_judge_check(judge, prompt, stage=f"eval:{constraint.group}")
        per_constraint.append({"group": constraint.group, "constraint": constraint.text, "pass": verdict})
        if not verdict:
            group_verdicts[constraint.group] = False
    topic_prompt = plan.judge_prompt("topic_consistency").format(
        topic=instance.topic, response=response_text
    )
    topic_ok, _ = run_judge_check(judge, topic_prompt, stage="eval:topic")
    groups = list(group_verdicts)
    fraction = sum(group_verdicts.values()) / len(groups) if groups else 0.0
    verdicts = dict(group_verdicts)
    verdicts["topic_consistency"] = topic_ok
    return InstanceScore(
        verdicts=verdicts,
        fraction_passed=fraction,
        pass_all=all(group_verdicts.values()) and topic_ok,
        detail=json.dumps(per_constraint),
    )
