"""Pipeline orchestration: staged dataflow with review gates.

The stages (plan, generate, verify, evaluate, report) communicate through a
checkpoint directory, never through in-memory state, so any stage can be
re-run or resumed. Between stages sit review gates: in interactive mode the
pipeline halts until the artifact is approved (possibly after hand edits,
quantified by normalized edit distance); in auto mode gates approve
themselves with zero edit distance.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from .backends import ChatBackend, ChatRequest, build_backend, chat
from .baselines import BASELINES, build_baseline
from .calendar_gen import CalendarInstance, generate_instance
from .calendar_verify import filter_benchmark, run_quality_checks
from .errors import ConfigError, GatePendingError, ValidationError
from .harness import EvalSettings, emit_report, evaluate_model, read_records, write_records
from .plan import PlanDoc, default_plan
from .textgen import TextGenInstance, generate_textgen_instance, judge_quality

# ---------------------------------------------------------------------------
# Edit distance


def levenshtein(a: str, b: str) -> int:
    """Classic two-row dynamic program."""
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            current.append(
                min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + (ca != cb))
            )
        previous = current
    return previous[-1]


def normalized_edit_distance(a: str, b: str) -> float:
    """Levenshtein distance over the longer length; 0.0 for two empty strings."""
    longest = max(len(a), len(b))
    if longest == 0:
        return 0.0
    return levenshtein(a, b) / longest


# ---------------------------------------------------------------------------
# Run configuration


@dataclass
class RunConfig:
    task: str = "calendar"
    seed: int = 0
    count: int = 50
    mode: str = "deterministic"  # deterministic | paraphrase
    gates: str = "auto"  # auto | interactive
    out: str = "run"
    backend: str | None = None  # generator / paraphrase backend spec
    judge_backend: str | None = None
    target_backend: str | None = None  # backend spec or baseline name
    planner_backend: str | None = None
    auth_env: str = "BENCHFORGE_API_KEY"
    p_infeasible: float = 0.2
    bucket_width: float = 0.1
    granularity: int = 15
    target_model: str = "target"

    def validate(self) -> None:
        if self.task not in ("calendar", "textgen"):
            raise ConfigError(f"unknown task {self.task!r}")
        if self.mode not in ("deterministic", "paraphrase"):
            raise ConfigError(f"unknown prompt mode {self.mode!r}")
        if self.gates not in ("auto", "interactive"):
            raise ConfigError(f"unknown gate mode {self.gates!r}")
        if self.count <= 0:
            raise ConfigError(f"count must be positive, got {self.count}")
        if not 0 <= self.p_infeasible <= 1:
            raise ConfigError(f"p_infeasible must be in [0, 1], got {self.p_infeasible}")

    @classmethod
    def from_file(cls, path: str | Path, overrides: dict | None = None) -> "RunConfig":
        """Line-oriented key=value config file, with flag overrides on top."""
        values: dict = {}
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ConfigError(f"malformed config line {lineno}: {raw!r}")
            values[key.strip()] = value.strip()
        return cls.from_dict({**values, **(overrides or {})})

    @classmethod
    def from_dict(cls, values: dict) -> "RunConfig":
        config = cls()
        casts = {
            "seed": int,
            "count": int,
            "granularity": int,
            "p_infeasible": float,
            "bucket_width": float,
        }
        for key, value in values.items():
            if value is None:
                continue
            if not hasattr(config, key):
                raise ConfigError(f"unknown config key {key!r}")
            setattr(config, key, casts.get(key, str)(value) if isinstance(value, str) else value)
        config.validate()
        return config


def _resolve_backend(spec: str | None, config: RunConfig) -> ChatBackend | None:
    if spec is None:
        return None
    return build_backend(spec, auth_env=config.auth_env)


# ---------------------------------------------------------------------------
# Checkpoint layout


class Checkpoint:
    """Fixed file layout under one run directory."""

    def __init__(self, out: str | Path):
        self.root = Path(out)

    @property
    def plan_file(self) -> Path:
        return self.root / "plan" / "plan.txt"

    @property
    def instances_file(self) -> Path:
        return self.root / "instances" / "instances.jsonl"

    @property
    def retained_file(self) -> Path:
        return self.root / "instances" / "retained.jsonl"

    @property
    def checks_file(self) -> Path:
        return self.root / "reports" / "checks.jsonl"

    @property
    def drop_log_file(self) -> Path:
        return self.root / "reports" / "drop_log.jsonl"

    @property
    def summary_file(self) -> Path:
        return self.root / "reports" / "summary.json"

    @property
    def records_file(self) -> Path:
        return self.root / "scores" / "records.jsonl"

    @property
    def report_dir(self) -> Path:
        return self.root / "scores" / "report"

    @property
    def manifest_file(self) -> Path:
        return self.root / "manifest.json"

    def gate_file(self, stage: str) -> Path:
        return self.root / "gates" / f"{stage}.json"

    def state_file(self, stage: str) -> Path:
        return self.root / "stages" / f"{stage}.json"

    def write_text(self, path: Path, text: str) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)

    def load_manifest(self) -> dict:
        if self.manifest_file.exists():
            return json.loads(self.manifest_file.read_text())
        return {}

    def update_manifest(self, **fields) -> None:
        manifest = self.load_manifest()
        manifest.update(fields)
        self.write_text(self.manifest_file, json.dumps(manifest, indent=2) + "\n")


def _sha256(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


# ---------------------------------------------------------------------------
# Review gates


def review_gate(checkpoint: Checkpoint, stage: str, artifact: Path, mode: str) -> dict:
    """Pass, or halt at, the review gate guarding one stage's artifact.

    Auto mode approves immediately (zero edit distance). Interactive mode
    snapshots the artifact, records a pending gate, and raises; a later
    approve_gate call closes it.
    """
    if not artifact.exists():
        raise ValidationError(f"gate {stage!r}: artifact {artifact} does not exist")
    text = artifact.read_text()
    gate_path = checkpoint.gate_file(stage)
    if gate_path.exists():
        gate = json.loads(gate_path.read_text())
        if gate["status"] == "approved":
            if _sha256(text) != gate["post_sha"]:
                raise ValidationError(
                    f"gate {stage!r}: artifact changed after approval; re-run the stage "
                    f"or approve again"
                )
            return gate
        raise GatePendingError(stage, str(artifact))
    if mode == "auto":
        gate = {
            "stage": stage,
            "artifact": str(artifact),
            "status": "approved",
            "pre_sha": _sha256(text),
            "post_sha": _sha256(text),
            "pre_chars": len(text),
            "edit_distance": 0.0,
        }
        checkpoint.write_text(gate_path, json.dumps(gate, indent=2) + "\n")
        return gate
    gate = {
        "stage": stage,
        "artifact": str(artifact),
        "status": "pending",
        "pre_sha": _sha256(text),
        "pre_chars": len(text),
        "pre_snapshot": text,
    }
    checkpoint.write_text(gate_path, json.dumps(gate, indent=2) + "\n")
    raise GatePendingError(stage, str(artifact))


def approve_gate(out: str | Path, stage: str) -> dict:
    """Approve a pending gate, validating the (possibly edited) artifact and
    recording the normalized edit distance against the pre-edit snapshot."""
    checkpoint = Checkpoint(out)
    gate_path = checkpoint.gate_file(stage)
    if not gate_path.exists():
        raise ValidationError(f"no gate recorded for stage {stage!r} in {out}")
    gate = json.loads(gate_path.read_text())
    if gate["status"] == "approved":
        return gate
    artifact = Path(gate["artifact"])
    text = artifact.read_text()
    if stage == "plan":
        PlanDoc.from_text(text)  # reopens the gate with diagnostics on bad edits
    pre = gate.pop("pre_snapshot", "")
    gate.update(
        status="approved",
        post_sha=_sha256(text),
        edit_distance=normalized_edit_distance(pre, text),
    )
    checkpoint.write_text(gate_path, json.dumps(gate, indent=2) + "\n")
    return gate


def _require_gate(checkpoint: Checkpoint, stage: str) -> dict:
    gate_path = checkpoint.gate_file(stage)
    if not gate_path.exists():
        raise ValidationError(f"stage {stage!r} has not run yet in {checkpoint.root}")
    gate = json.loads(gate_path.read_text())
    if gate["status"] != "approved":
        raise GatePendingError(stage, gate["artifact"])
    artifact = Path(gate["artifact"])
    if not artifact.exists() or _sha256(artifact.read_text()) != gate["post_sha"]:
        raise ValidationError(
            f"artifact for stage {stage!r} no longer matches its approved snapshot"
        )
    return gate


# ---------------------------------------------------------------------------
# Plan proposal

CALENDAR_TASK_DESCRIPTION = (
    "Create a benchmark of meeting-scheduling questions. Each question gives an "
    "availability schedule for several participants (days of the week mapped to lists "
    "of HH:MM-HH:MM blocks) plus extra solution constraints, and asks for one day and "
    "common time slot where everyone is free. Answers are either '[day] "
    "[start_time]-[end_time]' or 'No common time slot available'. Constraints always "
    "have a None, False or 0 default."
)

TEXTGEN_TASK_DESCRIPTION = (
    "Create a benchmark of open-ended writing tasks under content constraints. Each "
    "question fixes a writer setting (user, role, task), a topic, and a set of "
    "constraints drawn from six categories: positive, negative, positional, "
    "sequencing, conditional and iterative. The response is judged per constraint."
)

TASK_DESCRIPTIONS = {"calendar": CALENDAR_TASK_DESCRIPTION, "textgen": TEXTGEN_TASK_DESCRIPTION}

_PLAN_PROPOSAL_INSTRUCTION = (
    "You are the planning stage of a benchmark-creation pipeline. Based on the task "
    "description below, produce a benchmark plan listing parameter value ranges, "
    "constraint value ranges with defaults, quality checks and evaluation metrics, in "
    "exactly this line-oriented format (values separated by ' | ', constraint lines "
    "ending in ' ; default=...'):\n\n{example}\n\nTask description:\n{description}\n\n"
    "Reply with the plan only."
)


def propose_plan(task_description: str, backend: ChatBackend, task: str = "calendar") -> PlanDoc:
    """Ask a backend for a plan in the plan grammar; two retries on bad output."""
    if not task_description.strip():
        raise ValidationError("task description is empty")
    example = default_plan(task, count=100).to_text()
    prompt = _PLAN_PROPOSAL_INSTRUCTION.format(example=example, description=task_description)
    last_raw = ""
    for _ in range(3):
        response = chat(backend, ChatRequest.user("planner", prompt), stage="plan")
        last_raw = response.content
        try:
            return PlanDoc.from_text(last_raw)
        except ValidationError:
            continue
    raise ValidationError(
        f"backend produced no parseable plan after 3 attempts; last output: {last_raw[:500]!r}"
    )


# ---------------------------------------------------------------------------
# Stages


def stage_plan(config: RunConfig) -> dict:
    config.validate()
    checkpoint = Checkpoint(config.out)
    state = checkpoint.state_file("plan")
    if not checkpoint.plan_file.exists():
        planner = _resolve_backend(config.planner_backend, config)
        if planner is not None:
            plan = propose_plan(TASK_DESCRIPTIONS[config.task], planner, task=config.task)
            plan.settings["count"] = str(config.count)
            plan.settings["mode"] = config.mode
        elif config.task == "calendar":
            plan = default_plan(
                config.task,
                count=config.count,
                p_infeasible=config.p_infeasible,
                granularity=config.granularity,
                mode=config.mode,
            )
        else:
            plan = default_plan(config.task, count=config.count, mode=config.mode)
        checkpoint.write_text(checkpoint.plan_file, plan.to_text())
        checkpoint.write_text(state, json.dumps({"written": True}))
    gate = review_gate(checkpoint, "plan", checkpoint.plan_file, config.gates)
    return {"stage": "plan", "plan_file": str(checkpoint.plan_file), "edit_distance": gate.get("edit_distance")}


def _load_plan(checkpoint: Checkpoint) -> PlanDoc:
    return PlanDoc.from_text(checkpoint.plan_file.read_text())


def stage_generate(config: RunConfig) -> dict:
    config.validate()
    checkpoint = Checkpoint(config.out)
    plan_gate = _require_gate(checkpoint, "plan")
    plan = _load_plan(checkpoint)
    state_path = checkpoint.state_file("generate")
    state = json.loads(state_path.read_text()) if state_path.exists() else {}
    if not (checkpoint.instances_file.exists() and state.get("input_sha") == plan_gate["post_sha"]):
        backend = _resolve_backend(config.backend, config)
        if config.mode == "paraphrase" and backend is None:
            raise ConfigError("paraphrase mode requires a generator backend")
        lines = []
        for index in range(config.count):
            if config.task == "calendar":
                instance = generate_instance(config.seed, index, plan, config.mode, backend)
            else:
                if backend is None:
                    raise ConfigError("textgen generation requires a generator backend")
                instance = generate_textgen_instance(config.seed, index, plan, backend)
            lines.append(json.dumps(instance.to_json()))
        checkpoint.write_text(checkpoint.instances_file, "\n".join(lines) + "\n")
        checkpoint.write_text(
            state_path, json.dumps({"input_sha": plan_gate["post_sha"], "count": config.count})
        )
    gate = review_gate(checkpoint, "generate", checkpoint.instances_file, config.gates)
    return {
        "stage": "generate",
        "instances_file": str(checkpoint.instances_file),
        "count": config.count,
        "edit_distance": gate.get("edit_distance"),
    }


def load_instances(path: str | Path, task: str) -> list:
    cls = CalendarInstance if task == "calendar" else TextGenInstance
    instances = []
    with Path(path).open() as handle:
        for line in handle:
            if line.strip():
                instances.append(cls.from_json(json.loads(line)))
    return instances


def stage_verify(config: RunConfig) -> dict:
    config.validate()
    checkpoint = Checkpoint(config.out)
    generate_gate = _require_gate(checkpoint, "generate")
    if not checkpoint.instances_file.exists():
        raise ValidationError(f"no instances checkpoint in {config.out}; run generate first")
    plan = _load_plan(checkpoint)
    instances = load_instances(checkpoint.instances_file, config.task)
    judge = _resolve_backend(config.judge_backend, config)
    if judge is None:
        raise ConfigError("verification requires a judge backend (a mock is fine)")
    state_path = checkpoint.state_file("verify")
    state = json.loads(state_path.read_text()) if state_path.exists() else {}
    if not (checkpoint.summary_file.exists() and state.get("input_sha") == generate_gate["post_sha"]):
        if config.task == "calendar":
            reports = [run_quality_checks(instance, plan, judge) for instance in instances]
        else:
            reports = [judge_quality(instance, plan, judge) for instance in instances]
        retained, drop_log, summary = filter_benchmark(instances, reports)
        checkpoint.write_text(
            checkpoint.checks_file, "\n".join(json.dumps(r.to_json()) for r in reports) + "\n"
        )
        checkpoint.write_text(
            checkpoint.drop_log_file,
            "\n".join(json.dumps(entry) for entry in drop_log) + "\n" if drop_log else "",
        )
        checkpoint.write_text(
            checkpoint.retained_file,
            "\n".join(json.dumps(i.to_json()) for i in retained) + "\n" if retained else "",
        )
        checkpoint.write_text(checkpoint.summary_file, json.dumps(summary, indent=2) + "\n")
        checkpoint.write_text(state_path, json.dumps({"input_sha": generate_gate["post_sha"]}))
    summary = json.loads(checkpoint.summary_file.read_text())
    gate = review_gate(checkpoint, "verify", checkpoint.summary_file, config.gates)
    return {"stage": "verify", "summary": summary, "edit_distance": gate.get("edit_distance")}


def stage_evaluate(config: RunConfig) -> dict:
    config.validate()
    checkpoint = Checkpoint(config.out)
    _require_gate(checkpoint, "verify")
    if config.target_backend is None:
        raise ConfigError("evaluation requires a target backend or baseline name")
    plan = _load_plan(checkpoint)
    instances = load_instances(checkpoint.retained_file, config.task)
    if config.target_backend in BASELINES:
        if config.task != "calendar":
            raise ConfigError("baseline targets only apply to the calendar task")
        target = build_baseline(config.target_backend, instances)
    else:
        target = _resolve_backend(config.target_backend, config)
    judge = _resolve_backend(config.judge_backend, config)
    existing = read_records(checkpoint.records_file) if checkpoint.records_file.exists() else []
    skip_ids = {record.instance_id for record in existing}
    settings = EvalSettings(model=config.target_model)
    records = evaluate_model(
        instances,
        target,
        settings=settings,
        task=config.task,
        plan=plan,
        judge=judge,
        skip_ids=skip_ids,
    )
    all_records = existing + records
    checkpoint.records_file.parent.mkdir(parents=True, exist_ok=True)
    write_records(all_records, checkpoint.records_file)
    return {
        "stage": "evaluate",
        "records_file": str(checkpoint.records_file),
        "new_records": len(records),
        "total_records": len(all_records),
    }


def stage_report(config: RunConfig) -> dict:
    config.validate()
    checkpoint = Checkpoint(config.out)
    if not checkpoint.records_file.exists():
        raise ValidationError(f"no score records in {config.out}; run evaluate first")
    records = read_records(checkpoint.records_file)
    emit_report(records, checkpoint.report_dir, bucket_width=config.bucket_width)
    return {"stage": "report", "report_dir": str(checkpoint.report_dir), "n_records": len(records)}


STAGES = {
    "plan": stage_plan,
    "generate": stage_generate,
    "verify": stage_verify,
    "evaluate": stage_evaluate,
    "report": stage_report,
}


def run_pipeline(config: RunConfig) -> dict:
    """Plan through report in order; evaluation and reporting only when a
    target backend is configured. Writes the run manifest with per-stage edit
    distances and instance counts."""
    config.validate()
    checkpoint = Checkpoint(config.out)
    results = [stage_plan(config), stage_generate(config), stage_verify(config)]
    if config.target_backend is not None:
        results.append(stage_evaluate(config))
        results.append(stage_report(config))
    manifest = {
        "task": config.task,
        "seed": config.seed,
        "count": config.count,
        "mode": config.mode,
        "gates": config.gates,
        "stages": {},
    }
    for stage_name in ("plan", "generate", "verify"):
        gate_path = checkpoint.gate_file(stage_name)
        if gate_path.exists():
            gate = json.loads(gate_path.read_text())
            manifest["stages"][stage_name] = {
                "edit_distance": gate.get("edit_distance"),
                "chars": gate.get("pre_chars"),
            }
    summary_path = checkpoint.summary_file
    if summary_path.exists():
        manifest["verification"] = json.loads(summary_path.read_text())
    checkpoint.update_manifest(**manifest)
    return {"stages": results, "manifest": str(checkpoint.manifest_file)}
