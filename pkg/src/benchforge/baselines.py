"""Scripted baseline backends for calendar benchmarks.

Each baseline looks up the instance by its prompt text and answers
programmatically, so a benchmark can be smoke-tested end to end with zero
network: an oracle (perfect solver), an always-refuser, and a greedy solver
that ignores everything but availability and duration.
"""

from __future__ import annotations

from typing import Sequence

from .backends import BackendError, ChatRequest, ChatResponse
from .calendar_eval import NO_SOLUTION_PHRASE
from .calendar_gen import CalendarInstance
from .timecore import TimeBlock, common_availability, enumerate_slots


class _InstanceLookupBackend:
    def __init__(self, instances: Sequence[CalendarInstance]):
        self._by_prompt = {instance.prompt: instance for instance in instances}

    def _instance_for(self, request: ChatRequest) -> CalendarInstance:
        content = request.messages[-1].content
        instance = self._by_prompt.get(content)
        if instance is None:
            raise BackendError("baseline backend received a prompt outside its benchmark")
        return instance


class OracleBackend(_InstanceLookupBackend):
    """Answers with the generator's candidate: the intended slot, or a refusal
    exactly on intent-infeasible instances."""

    def complete(self, request: ChatRequest) -> ChatResponse:
        instance = self._instance_for(request)
        if instance.candidate.no_solution:
            return ChatResponse(content=NO_SOLUTION_PHRASE)
        return ChatResponse(content=str(instance.candidate.slot))


class RefuseBackend:
    """Always claims no common slot exists."""

    def complete(self, request: ChatRequest) -> ChatResponse:
        return ChatResponse(content=NO_SOLUTION_PHRASE)


class GreedyBackend(_InstanceLookupBackend):
    """First common-availability slot of the right duration, ignoring buffer,
    priority, weekday and time-restriction constraints."""

    def complete(self, request: ChatRequest) -> ChatResponse:
        instance = self._instance_for(request)
        duration = instance.constraints.meeting_duration
        for day in instance.parameters.days:
            common = common_availability(instance.availability, day)
            starts = enumerate_slots(common, duration, instance.granularity)
            if starts:
                slot = TimeBlock(starts[0], starts[0] + duration)
                return ChatResponse(content=f"{day} {slot}")
        return ChatResponse(content=NO_SOLUTION_PHRASE)


BASELINES = {
    "oracle": OracleBackend,
    "refuse": lambda instances: RefuseBackend(),
    "greedy": GreedyBackend,
}


def build_baseline(name: str, instances: Sequence[CalendarInstance]):
    try:
        factory = BASELINES[name]
    except KeyError:
        raise BackendError(f"unknown baseline {name!r}; expected one of {sorted(BASELINES)}") from None
    return factory(instances)
