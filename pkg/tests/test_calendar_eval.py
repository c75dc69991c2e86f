import json

import pytest

from benchforge.calendar_eval import (
    NO_SOLUTION_PHRASE,
    InstanceScore,
    ParsedSolution,
    check_constraints,
    parse_response,
    score,
)
from benchforge.calendar_gen import (
    CalendarInstance,
    CandidateAnswer,
    SchedulingConstraints,
    SchedulingParameters,
)
from benchforge.timecore import DayOfWeek, Slot, TimeBlock, parse_time


def slot(day, text):
    return Slot(DayOfWeek.parse(day), TimeBlock.parse(text))


# -- response parsing --------------------------------------------------------


def test_parse_plain_slot():
    parsed = parse_response("Tuesday 14:00-15:00")
    assert parsed.slot == slot("Tuesday", "14:00-15:00")


def test_parse_bracketed_slot():
    parsed = parse_response("[Monday] [09:30-10:00]")
    assert parsed.slot == slot("Monday", "09:30-10:00")


def test_parse_last_stated_slot_wins():
    text = (
        "Let me check Monday 09:00-10:00 first... no, p2 is busy. "
        "What about Tuesday 11:00-12:00? Also busy. "
        "The answer is Wednesday 15:00-16:00."
    )
    assert parse_response(text).slot == slot("Wednesday", "15:00-16:00")


def test_parse_no_solution():
    assert parse_response(NO_SOLUTION_PHRASE).no_solution
    assert parse_response("there is no common time slot for these people").no_solution


def test_slot_after_refusal_wins():
    text = "At first glance there is no common time slot. But wait: Friday 08:00-08:30 works."
    assert parse_response(text).slot == slot("Friday", "08:00-08:30")


def test_refusal_after_slot_wins():
    text = "Friday 08:00-08:30 looked promising but p3 is out; no common time slot exists."
    assert parse_response(text).no_solution


def test_parse_unparseable():
    for text in ("", "I cannot help with that.", "Meet at 9ish on Monday", None):
        parsed = parse_response(text)
        assert parsed.unparseable


def test_parse_skips_malformed_times():
    text = "Maybe Monday 09:00-10:00. Final answer: Monday 99:00-99:30."
    assert parse_response(text).slot == slot("Monday", "09:00-10:00")


def test_parsed_solution_exclusive_variants():
    with pytest.raises(ValueError):
        ParsedSolution()
    with pytest.raises(ValueError):
        ParsedSolution(slot=slot("Monday", "09:00-10:00"), no_solution=True)


def test_parsed_solution_render_and_round_trip():
    cases = [
        ParsedSolution(slot=slot("Monday", "09:00-10:00")),
        ParsedSolution(no_solution=True),
        ParsedSolution(unparseable=True, raw="gibberish"),
    ]
    assert cases[0].render() == "Monday 09:00-10:00"
    assert cases[1].render() == NO_SOLUTION_PHRASE
    for parsed in cases:
        back = ParsedSolution.from_json(json.loads(json.dumps(parsed.to_json())))
        assert back.to_json() == parsed.to_json()


# -- scoring -----------------------------------------------------------------


def build_instance(constraints, intended_feasible=True):
    params = SchedulingParameters(30, 240, 2, 7, 1, 2, parse_time("06:00"), parse_time("20:00"),
                                  DayOfWeek.MONDAY)
    availability = {
        "p1": {day: (TimeBlock.parse("09:00-12:00"), TimeBlock.parse("13:00-17:00"))
               for day in params.days},
        "p2": {day: (TimeBlock.parse("10:00-15:00"),) for day in params.days},
    }
    candidate = (
        CandidateAnswer(slot=slot("Monday", "10:00-11:00"))
        if intended_feasible
        else CandidateAnswer(no_solution=True)
    )
    return CalendarInstance(
        id="eval-1",
        seed=0,
        prompt="(prompt)",
        parameters=params,
        constraints=constraints,
        availability=availability,
        candidate=candidate,
        intended_feasible=intended_feasible,
    )


def test_check_constraints_verdict_table():
    constraints = SchedulingConstraints(
        meeting_duration=60,
        buffer=30,
        weekdays_only=True,
        no_before=parse_time("09:00"),
        no_after=parse_time("17:00"),
        blocked_interval=TimeBlock.parse("12:00-13:00"),
    )
    instance = build_instance(constraints)
    # 10:30-11:30: inside both availabilities with 30 min to spare each side
    verdicts = check_constraints(instance, slot("Monday", "10:30-11:30"))
    assert verdicts == {
        "availability": True,
        "meeting_duration": True,
        "buffer": True,
        "weekdays_only": True,
        "no_before": True,
        "no_after": True,
        "blocked_interval": True,
    }
    # Saturday slot: valid times, wrong day
    verdicts = check_constraints(instance, slot("Saturday", "10:30-11:30"))
    assert verdicts["weekdays_only"] is False
    assert verdicts["availability"] is True
    # 11:30-12:30 collides with the blocked interval and has no buffer room
    verdicts = check_constraints(instance, slot("Monday", "11:30-12:30"))
    assert verdicts["blocked_interval"] is False
    assert verdicts["availability"] is False  # p1 splits at 12:00
    # wrong duration
    verdicts = check_constraints(instance, slot("Monday", "10:30-11:00"))
    assert verdicts["meeting_duration"] is False


def test_score_fraction_arithmetic():
    constraints = SchedulingConstraints(
        meeting_duration=60,
        weekdays_only=True,
        no_before=parse_time("09:00"),
    )
    instance = build_instance(constraints)
    # Saturday 10:00-11:00 passes availability, duration, no_before; fails weekdays_only
    result = score(instance, parse_response("Saturday 10:00-11:00"))
    assert result.verdicts["weekdays_only"] is False
    assert result.fraction_passed == 3 / 4
    assert result.pass_all is False
    assert result.no_solution_outcome == "solution_given"


def test_score_pass_all():
    instance = build_instance(SchedulingConstraints(meeting_duration=60))
    result = score(instance, parse_response("Monday 10:00-11:00"))
    assert result.pass_all is True
    assert result.fraction_passed == 1.0


def test_score_refusal_outcomes():
    feasible = build_instance(SchedulingConstraints(meeting_duration=60))
    wrong_refusal = score(feasible, parse_response(NO_SOLUTION_PHRASE))
    assert wrong_refusal.no_solution_outcome == "incorrect_no_solution"
    assert wrong_refusal.fraction_passed == 0.0
    assert not any(wrong_refusal.verdicts.values())

    infeasible = build_instance(SchedulingConstraints(meeting_duration=60), intended_feasible=False)
    right_refusal = score(infeasible, parse_response(NO_SOLUTION_PHRASE))
    assert right_refusal.no_solution_outcome == "correct_no_solution"
    assert right_refusal.pass_all is True
    assert right_refusal.fraction_passed == 1.0


def test_score_unparseable_fails_everything():
    instance = build_instance(
        SchedulingConstraints(meeting_duration=60, buffer=15, weekdays_only=True)
    )
    result = score(instance, parse_response("shrug"))
    assert result.fraction_passed == 0.0
    assert result.pass_all is False
    assert set(result.verdicts) == set(instance.constraints.active())
    assert result.detail == "unparseable response"


def test_priority_verdict_uses_first_feasible_slot():
    constraints = SchedulingConstraints(meeting_duration=60, priority=True)
    instance = build_instance(constraints)
    # first feasible slot on Monday is 10:00-11:00 (common availability starts at 10:00)
    assert score(instance, parse_response("Monday 10:00-11:00")).verdicts["priority"] is True
    assert score(instance, parse_response("Monday 10:15-11:15")).verdicts["priority"] is False


def test_instance_score_json_round_trip():
    original = InstanceScore(
        verdicts={"availability": True, "buffer": False},
        fraction_passed=0.5,
        pass_all=False,
        no_solution_outcome="solution_given",
        detail="x",
    )
    back = InstanceScore.from_json(json.loads(json.dumps(original.to_json())))
    assert back.to_json() == original.to_json()
