"""Strict-verdict judging: send a rubric prompt, demand a PASS/FAIL token."""

from __future__ import annotations

import re

from .backends import BackendError, ChatBackend, ChatRequest, chat

_VERDICT_RE = re.compile(r"VERDICT:\s*(PASS|FAIL)", re.IGNORECASE)

JUDGE_RETRIES = 2


def parse_verdict(text: str) -> bool | None:
    """Extract the last strict verdict token; None when the judge emitted neither."""
    matches = _VERDICT_RE.findall(text or "")
    if not matches:
        return None
    return matches[-1].upper() == "PASS"


def run_judge_check(backend: ChatBackend, prompt: str, stage: str = "judge") -> tuple[bool, str]:
    """Ask the judge until it produces a parseable verdict.

    Returns (verdict, detail). An unparseable judge, or a dead backend, counts
    as a failing verdict rather than an exception: a quality gate must never
    silently pass on judge malfunction.
    """
    last_content = ""
    for _ in range(JUDGE_RETRIES + 1):
        try:
            response = chat(backend, ChatRequest.user("judge", prompt), stage=stage)
        except BackendError as exc:
            return False, f"judge backend failure: {exc}"
        last_content = response.content
        verdict = parse_verdict(last_content)
        if verdict is not None:
            return verdict, last_content.strip()
    return False, f"unparseable judge output: {last_content[:200]!r}"
