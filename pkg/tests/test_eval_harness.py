import json
import math

import pytest

from docqa.errors import SchemaMismatch
from docqa.eval_harness import (
    GoldAnswer,
    ItemScore,
    aggregate,
    extract_answer,
    infer_gold,
    judge_score,
    parse_number,
    parse_verdict,
    regex_extract,
    rule_score,
    score_files,
)
from docqa.model_clients import ScriptedClient, ScriptedScenario

from conftest import FIXTURES

CASES = json.loads((FIXTURES / "eval_cases.json").read_text())


@pytest.mark.parametrize("case", CASES["cases"], ids=lambda c: f"{c['extracted']!r}~{c['gold']['answer']!r}")
def test_hand_computed_case(case):
    correct, f1 = rule_score(case["extracted"], GoldAnswer.from_record(case["gold"]))
    assert correct is case["correct"]
    assert f1 == pytest.approx(case["f1"], abs=1e-9)


def test_hand_computed_aggregates():
    items = []
    for case in CASES["cases"]:
        ok, f1 = rule_score(case["extracted"], GoldAnswer.from_record(case["gold"]))
        items.append(ItemScore(case["extracted"], ok, f1))
    report = aggregate(items)
    assert abs(report.acc - CASES["expected_acc"]) < 1e-9
    assert abs(report.f1 - CASES["expected_f1"]) < 1e-9
    assert report.lasj is None and report.flags == ()


def test_empty_aggregate_flagged():
    r = aggregate([])
    assert (r.acc, r.f1, r.flags) == (0.0, 0.0, ("empty",))


@pytest.mark.parametrize(
    "text,value,pct",
    [("0.105", "0.105", False), ("10.5%", "0.105", True), ("$6,779,511", "6779511", False), ("-3.5", "-3.5", False), ("twelve", None, None)],
)
def test_parse_number(text, value, pct):
    got = parse_number(text)
    if value is None:
        assert got is None
    else:
        assert (str(got[0]), got[1]) == (value, pct)


def test_infer_gold():
    assert infer_gold("412").type == "integer"
    assert infer_gold("0.105").type == "number"
    assert infer_gold("Not answerable").type == "unanswerable"
    assert infer_gold("Los Gatos").type == "string"
    with pytest.raises(ValueError):
        GoldAnswer("x", "integer")


@pytest.mark.parametrize(
    "response,gold_type,expected",
    [
        ("<think>lots of 7s</think>\nThe ratio is **0.105**.", "number", "0.105"),
        ("Advertising was $714.3M and revenue $6,779.5M, so the ratio is 0.105 (or 10.5%).", "number", "0.105"),
        ("The answer is Los Gatos.", "string", "The answer is Los Gatos"),
        ("There were 412 employees.", "integer", "412"),
        ("", "string", ""),
    ],
)
def test_regex_extract(response, gold_type, expected):
    assert regex_extract(response, gold_type) == expected


def test_extractor_client_and_fallback():
    extractor = ScriptedClient.from_responses(["0.105"])
    assert extract_answer("long text about 0.2", extractor, "q") == "0.105"
    notes = []
    down = ScriptedClient(ScriptedScenario("ordered", [{"error": "unavailable"}]))
    assert extract_answer("So **0.105**.", down, "q", "number", notes) == "0.105"
    assert notes[0].startswith("ExtractorUnavailable")


@pytest.mark.parametrize(
    "text,expected",
    [("CORRECT", (True, True)), ("correct. The values match", (True, True)), ("<think>hmm</think>INCORRECT", (False, True)),
     ("Wrong", (False, True)), ("maybe", (False, False)), ("", (False, False))],
)
def test_parse_verdict(text, expected):
    assert parse_verdict(text) == expected


def test_judge_notes_unparsed():
    notes = []
    assert judge_score("q", "a", "p", ScriptedClient.from_responses(["perhaps"]), notes) is False
    assert notes and "unparsed" in notes[0]


def _write(path, rows):
    path.write_text("".join(json.dumps(r) + "\n" for r in rows))
    return path


def test_score_files_by_position_and_id(tmp_path):
    gold = _write(tmp_path / "g.jsonl", [{"question": "q1", "answer": "0.105", "type": "number", "precision": 3}, {"question": "q2", "answer": "Los Gatos"}])
    pred = _write(tmp_path / "p.jsonl", [{"prediction": "It is **0.105**."}, {"prediction": "Los Angeles."}])
    r = score_files(pred, gold)
    assert r.acc == 0.5 and r.f1 == pytest.approx(0.75)
    gold_id = _write(tmp_path / "gi.jsonl", [{"id": "a", "answer": "1"}, {"id": "b", "answer": "2"}])
    pred_id = _write(tmp_path / "pi.jsonl", [{"id": "b", "prediction": "2"}, {"id": "a", "prediction": "3"}])
    assert score_files(pred_id, gold_id).acc == 0.5


def test_score_files_with_judge(tmp_path):
    gold = _write(tmp_path / "g.jsonl", [{"answer": "1"}, {"answer": "2"}])
    pred = _write(tmp_path / "p.jsonl", [{"prediction": "1"}, {"prediction": "3"}])
    r = score_files(pred, gold, judge=ScriptedClient.from_responses(["CORRECT", "CORRECT"]))
    assert r.lasj == 1.0 and r.acc == 0.5


def test_score_files_empty_and_errors(tmp_path):
    gold = _write(tmp_path / "g.jsonl", [{"answer": "1"}])
    empty = _write(tmp_path / "e.jsonl", [])
    r = score_files(empty, gold)
    assert r.flags == ("empty",) and r.acc == 0.0
    with pytest.raises(SchemaMismatch) as info:
        score_files(_write(tmp_path / "p.jsonl", [{"prediction": "1"}, {"text": "2"}]), gold)
    assert info.value.line == 2
    with pytest.raises(SchemaMismatch):
        score_files(_write(tmp_path / "p2.jsonl", [{"prediction": "1"}, {"prediction": "2"}]), gold)
    (tmp_path / "bad.jsonl").write_text("{oops\n")
    with pytest.raises(SchemaMismatch):
        score_files(tmp_path / "bad.jsonl", gold)


def test_scores_are_bounded():
    for case in CASES["cases"]:
        _, f1 = rule_score(case["extracted"], GoldAnswer.from_record(case["gold"]))
        assert 0.0 <= f1 <= 1.0 and not math.isnan(f1)
