from benchforge.backends import MockBackend, MockRule
from benchforge.judging import JUDGE_RETRIES, parse_verdict, run_judge_check


def test_parse_verdict_basic():
    assert parse_verdict("Reasoning...\nVERDICT: PASS") is True
    assert parse_verdict("VERDICT: FAIL") is False
    assert parse_verdict("verdict: pass") is True  # tolerant of case
    assert parse_verdict("No verdict here") is None
    assert parse_verdict("") is None
    assert parse_verdict(None) is None


def test_parse_verdict_last_token_wins():
    text = "Hmm, VERDICT: FAIL... wait, on reflection.\nVERDICT: PASS"
    assert parse_verdict(text) is True


def test_run_judge_check_pass_and_fail():
    judge = MockBackend(rules=[MockRule("good", "ok VERDICT: PASS"), MockRule("bad", "VERDICT: FAIL")])
    assert run_judge_check(judge, "this one is good") == (True, "ok VERDICT: PASS")
    verdict, _ = run_judge_check(judge, "this one is bad")
    assert verdict is False


def test_unparseable_judge_fails_after_retries():
    judge = MockBackend(default="I refuse to commit to a verdict.")
    verdict, detail = run_judge_check(judge, "anything")
    assert verdict is False
    assert "unparseable judge output" in detail
    assert len(judge.calls) == JUDGE_RETRIES + 1


def test_dead_judge_backend_is_a_failing_verdict():
    judge = MockBackend()  # no rules, no default: every call raises
    verdict, detail = run_judge_check(judge, "anything")
    assert verdict is False
    assert "judge backend failure" in detail
