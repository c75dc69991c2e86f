"""Command-line client for the pipeline service.

The CLI never calls pipeline code directly: it posts to the HTTP service,
in-process by default (ASGI transport) or to a remote --server URL, and maps
error kinds to exit codes: config=2, validation=3, gate_pending=4, backend=5.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import httpx

from .errors import ConfigError

EXIT_CODES = {
    "config": 2,
    "validation": 3,
    "generation": 3,
    "gate_pending": 4,
    "backend": 5,
}


def _client(server: str | None) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server.rstrip("/"), timeout=600.0)
    # In-process default: drive the ASGI app directly, no socket involved.
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        from starlette.testclient import TestClient

    from .service import create_app

    return TestClient(create_app(), raise_server_exceptions=False)


def _load_config_file(path: str | None) -> dict:
    """key=value lines; '#' comments. Auth material never goes here — only the
    name of the environment variable that holds it (auth_env)."""
    if path is None:
        return {}
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
    return values


def _post(server: str | None, endpoint: str, payload: dict) -> dict:
    try:
        with _client(server) as client:
            response = client.post(endpoint, json=payload)
    except httpx.HTTPError as exc:
        click.echo(f"error: cannot reach service: {exc}", err=True)
        sys.exit(EXIT_CODES["backend"])
    body = response.json()
    if response.status_code != 200:
        kind = body.get("error", "error")
        click.echo(f"error [{kind}]: {body.get('message', response.text)}", err=True)
        sys.exit(EXIT_CODES.get(kind, 1))
    return body


_COMMON_OPTIONS = [
    click.option("--task", type=click.Choice(["calendar", "textgen"]), default=None),
    click.option("--seed", type=int, default=None),
    click.option("--count", type=int, default=None),
    click.option("--mode", type=click.Choice(["deterministic", "paraphrase"]), default=None),
    click.option("--gates", type=click.Choice(["auto", "interactive"]), default=None),
    click.option("--backend", default=None, help="generator backend spec (mock:PATH or openai:MODEL@URL)"),
    click.option("--judge-backend", "judge_backend", default=None),
    click.option("--target-backend", "target_backend", default=None,
                 help="backend spec, or a builtin baseline: oracle, refuse, greedy"),
    click.option("--planner-backend", "planner_backend", default=None),
    click.option("--out", default=None, help="run checkpoint directory"),
    click.option("--bucket-width", "bucket_width", type=float, default=None),
    click.option("--p-infeasible", "p_infeasible", type=float, default=None),
    click.option("--config", "config_file", default=None, help="key=value config file"),
    click.option("--server", default=None, help="remote service URL (default: in-process)"),
]


def _with_common_options(command):
    for option in reversed(_COMMON_OPTIONS):
        command = option(command)
    return command


def _build_payload(config_file: str | None, **flags) -> dict:
    try:
        payload = _load_config_file(config_file)
    except ConfigError as exc:
        click.echo(f"error [config]: {exc}", err=True)
        sys.exit(EXIT_CODES["config"])
    payload.update({k: v for k, v in flags.items() if v is not None})
    return payload


@click.group()
def main() -> None:
    """Benchmark synthesis and evaluation pipeline."""


def _stage_command(name: str, help_text: str):
    @main.command(name=name, help=help_text)
    @_with_common_options
    def command(config_file, server, **flags):
        payload = _build_payload(config_file, **flags)
        body = _post(server, f"/{name}", payload)
        click.echo(json.dumps(body, indent=2))

    return command


_stage_command("plan", "Write (or propose) the benchmark plan and pass its review gate.")
_stage_command("generate", "Generate benchmark instances from the approved plan.")
_stage_command("verify", "Run quality checks and filter the benchmark.")
_stage_command("evaluate", "Run the target model (or a baseline) over the retained instances.")
_stage_command("report", "Aggregate score records into the report tables.")
_stage_command("pipeline", "Run every stage in order.")


@main.command()
@click.option("--out", required=True)
@click.option("--stage", required=True, type=click.Choice(["plan", "generate", "verify"]))
@click.option("--server", default=None)
def approve(out, stage, server):
    """Approve a pending review gate after inspecting/editing its artifact."""
    body = _post(server, "/gates/approve", {"out": out, "stage": stage})
    click.echo(json.dumps(body, indent=2))


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8321)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    uvicorn.run("benchforge.service:app", host=host, port=port)


if __name__ == "__main__":
    main()
