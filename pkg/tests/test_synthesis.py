import json

import pytest

from docqa.agent_loop import AgentConfig
from docqa.errors import SchemaMismatch, SynthesizerUnavailable, TeacherUnavailable, UnparseableOutput
from docqa.model_clients import ScriptedClient, ScriptedScenario
from docqa.synthesis import (
    DEFAULT_DEPTHS,
    ExplorationStep,
    ExplorationTrajectory,
    PipelineClients,
    QAPair,
    SynthesisConfig,
    accept_answer,
    explore,
    load_manifest,
    parse_exploration_output,
    read_dataset,
    reject_sample,
    run_pipeline,
    synthesize,
    validate_qa,
    write_pipeline_outputs,
)
from docqa.toolkit import ToolCall, Toolkit

from conftest import CASE_SCENARIO, CORPUS, EchoSummarizer


def _never_stops(i, messages):
    return f'<intent>look {i}</intent>\n<tool_call>{{"name": "search", "arguments": {{"keywords": ["k{i}"]}}}}</tool_call>'


def _xi(doc="d", steps=1):
    call = ToolCall("search", {"keywords": ["x"]})
    return ExplorationTrajectory(doc, "other", [ExplorationStep("i", call, "obs")] * steps)


# -- exploration ---------------------------------------------------------------


@pytest.mark.parametrize("tag,depth", [("longdocurl", 20), ("mmdocrag", 20), ("dude", 15), ("cuad", 15), ("other", 20)])
def test_depth_law(netflix_outline, tag, depth):
    explorer = ScriptedClient(responder=_never_stops)
    xi = explore(netflix_outline, explorer, Toolkit(netflix_outline, EchoSummarizer()), SynthesisConfig(), tag)
    assert len(xi.steps) == depth == explorer.calls
    assert DEFAULT_DEPTHS.get(tag, 20) == depth


def test_depth_override(netflix_outline):
    cfg = SynthesisConfig(max_depth_by_source={"dude": 4})
    xi = explore(netflix_outline, ScriptedClient(responder=_never_stops), Toolkit(netflix_outline, EchoSummarizer()), cfg, "dude")
    assert len(xi.steps) == 4


def test_duplicate_calls_suppressed(netflix_outline):
    call = '<intent>i</intent><tool_call>{"name": "search", "arguments": {"keywords": ["advertising"]}}</tool_call>'
    explorer = ScriptedClient.from_responses([call, call, "<intent>done</intent>"])
    summ = EchoSummarizer()
    xi = explore(netflix_outline, explorer, Toolkit(netflix_outline, summ), SynthesisConfig(), "dude")
    assert len(xi.steps) == 1
    assert xi.discarded == [{"attempt": 1, "reason": "duplicate", "action": {"name": "search", "arguments": {"keywords": ["advertising"]}}}]
    assert explorer.remaining == 0


def test_exploration_stop_and_malformed(netflix_outline):
    explorer = ScriptedClient.from_responses(["<intent>x</intent><tool_call>{oops}</tool_call>", "<intent>nothing here</intent>"])
    xi = explore(netflix_outline, explorer, Toolkit(netflix_outline, EchoSummarizer()))
    assert xi.steps == [] and xi.discarded[0]["reason"] == "malformed"


def test_explorer_unavailable_keeps_prefix(netflix_outline):
    sc = ScriptedScenario("ordered", [_never_stops(0, None), {"error": "unavailable"}])
    xi = explore(netflix_outline, ScriptedClient(sc), Toolkit(netflix_outline, EchoSummarizer()))
    assert len(xi.steps) == 1 and xi.incomplete and xi.error.startswith("ExplorerUnavailable")


def test_parse_exploration_output():
    assert parse_exploration_output("<intent>stop</intent>") == ("stop", None)
    intent, call = parse_exploration_output('<think>why</think><tool_call>{"name": "search", "arguments": {"keywords": ["a"]}}</tool_call>')
    assert intent == "why" and call.name == "search"


def test_exploration_round_trip(netflix_outline):
    xi = explore(netflix_outline, ScriptedClient(responder=_never_stops), Toolkit(netflix_outline, EchoSummarizer()), SynthesisConfig(), "cuad")
    again = ExplorationTrajectory.from_dict(json.loads(json.dumps(xi.to_dict())))
    assert again.to_dict() == xi.to_dict() and again.trajectory_id == xi.trajectory_id


# -- case study ----------------------------------------------------------------


def test_case_study_synthesis(netflix_outline):
    scenario = json.loads(CASE_SCENARIO.read_text())
    explorer = ScriptedClient.load(CASE_SCENARIO, role="explorer")
    summ = ScriptedClient.load(CASE_SCENARIO, role="summarizer")
    synth = ScriptedClient.load(CASE_SCENARIO, role="synthesizer")
    xi = explore(netflix_outline, explorer, Toolkit(netflix_outline, summ), SynthesisConfig(), "longdocurl")
    assert [s.action.name for s in xi.steps] == ["search", "read", "read", "read"]
    read_ids = [s.action.arguments["section_ids"][0] for s in xi.steps[1:]]
    pages = {netflix_outline.section(sid).elements[0].page_num for sid in read_ids}
    assert len(pages) == 3  # chart, table and text evidence sit on different pages
    qa = synthesize(xi, synth)
    assert qa.valid and qa.answer == "14.92%" == scenario["answer"]
    assert qa.question == scenario["question"]
    assert qa.provenance["exploration_id"] == xi.trajectory_id


# -- validation ----------------------------------------------------------------


VALIDATION_TABLE = [
    ({"question": "What was the advertising expense in 2015?", "answer": "$714.3 million"}, None),
    ({"question": "What was revenue?", "answer": "6.78B", "evidence": "x"}, "ExtraFields"),
    ({"question": "What was revenue?"}, "MissingFields"),
    ({"question": "What was revenue?", "answer": ""}, "MissingFields"),
    ({"question": "2015年的收入是多少?", "answer": "6.78B"}, "NonLatinScript"),
    ({"question": "What was revenue? And the margin?", "answer": "6.78B"}, "MultipleQuestions"),
    ({"question": "What does Table 2 report as revenue?", "answer": "6.78B"}, "LocationReference"),
    ({"question": "What is stated on page 47 about ads?", "answer": "$714.3 million"}, "LocationReference"),
    ({"question": "What does section 8.81 say?", "answer": "$714.3 million"}, "LocationReference"),
    ({"question": "What was revenue?", "answer": "It grew. It grew a lot."}, "AnswerTooLong"),
]


@pytest.mark.parametrize("fields,code", VALIDATION_TABLE)
def test_validation_table(fields, code):
    checks = validate_qa(QAPair.from_fields(fields))
    codes = {c.code for c in checks if c.status == "fail"}
    assert codes == ({code} if code else set())
    delegated = [c.name for c in checks if c.status == "delegated"]
    assert delegated == ["document_dependence", "multi_hop", "answerability"]


def test_validation_accents_and_long():
    assert all(c.passed for c in validate_qa(QAPair("Who founded the café in Zürich?", "Müller")))
    assert not all(c.passed for c in validate_qa(QAPair("Why?", "x" * 201)))


def test_synthesize_retry_then_valid():
    synth = ScriptedClient.from_responses(['{"question": "See Table 2: what is it?", "answer": "5"}', '{"question": "What is the total?", "answer": "5"}'])
    qa = synthesize(_xi(), synth)
    assert qa.valid and qa.provenance["synthesis_attempts"] == 2
    assert synth.calls == 2


def test_synthesize_invalid_after_retry():
    bad = '{"question": "See Table 2: what is it?", "answer": "5"}'
    qa = synthesize(_xi(), ScriptedClient.from_responses([bad, bad]))
    assert not qa.valid and qa.failures()[0].code == "LocationReference"


def test_synthesize_unparseable():
    with pytest.raises(UnparseableOutput):
        synthesize(_xi(), ScriptedClient.from_responses(["no json", "still none"]))
    with pytest.raises(ValueError):
        synthesize(_xi(steps=0), ScriptedClient.from_responses([]))
    with pytest.raises(SynthesizerUnavailable):
        synthesize(_xi(), ScriptedClient(ScriptedScenario("ordered", [{"error": "unavailable"}])))


# -- rejection sampling --------------------------------------------------------


def test_accept_answer_rules():
    qa = QAPair("What was the advertising expense?", "$714.3 million")
    assert accept_answer(qa, "Advertising was **$714.3 million**.", None, "judge") == (True, "rule")
    assert accept_answer(qa, "It was $600 million.", None, "exact_match") == (False, "rule")
    judge = ScriptedClient.from_responses(["CORRECT"])
    assert accept_answer(qa, "about 714 million", judge, "judge") == (True, "judge")
    notes = []
    down = ScriptedClient(ScriptedScenario("ordered", [{"error": "unavailable"}]))
    assert accept_answer(qa, "$714.3 million", down, "judge", notes) == (True, "rule")
    assert notes and "JudgeUnavailable" in notes[0]


def test_reject_sample_first_accepted(netflix_outline):
    qa = QAPair("What was the advertising expense?", "$714.3 million", provenance={"exploration_id": "e1", "source_tag": "dude"})
    teacher = ScriptedClient.from_responses(["$500 million", "**$714.3 million**", "unused"])
    out = reject_sample(qa, netflix_outline, teacher, None, Toolkit(netflix_outline, EchoSummarizer()))
    assert out.accepted and out.trajectory.attempt == 2 and len(out.attempts) == 2
    assert teacher.remaining == 1
    assert out.trajectory.exploration_id == "e1" and out.trajectory.source_tag == "dude"


def test_reject_sample_all_fail(netflix_outline):
    qa = QAPair("Q?", "42")
    teacher = ScriptedClient.from_responses(["7", "8", "9", "10"])
    out = reject_sample(qa, netflix_outline, teacher, None, Toolkit(netflix_outline, EchoSummarizer()), SynthesisConfig(k_rejection_samples=3))
    assert not out.accepted and [a["accepted"] for a in out.attempts] == [False] * 3


def test_reject_sample_teacher_down(netflix_outline):
    teacher = ScriptedClient(ScriptedScenario("ordered", [{"error": "unavailable"}]))
    with pytest.raises(TeacherUnavailable):
        reject_sample(QAPair("Q?", "42"), netflix_outline, teacher, None, Toolkit(netflix_outline, EchoSummarizer()))


def test_config_validation():
    with pytest.raises(ValueError):
        SynthesisConfig(max_depth_by_source={"dude": 0})
    with pytest.raises(ValueError):
        SynthesisConfig(acceptance_rule="vibes")
    with pytest.raises(ValueError):
        SynthesisConfig(k_rejection_samples=0)


# -- pipeline ------------------------------------------------------------------


def _corpus_clients(entry):
    doc = entry.path.rsplit("/", 1)[-1].split(".")[0]
    bundle = json.loads((CORPUS / "scenarios.json").read_text())["documents"][doc]["roles"]

    def load(role):
        if role not in bundle:
            return None
        return ScriptedClient(ScriptedScenario.from_dict(bundle[role]), identity=f"{doc}:{role}")

    return PipelineClients(load("explorer"), load("synthesizer"), load("teacher"), load("summarizer") or EchoSummarizer(), load("judge"))


def test_pipeline_counts(tmp_path):
    entries = load_manifest(CORPUS / "manifest.json")
    result = run_pipeline(entries, _corpus_clients)
    expected = json.loads((CORPUS / "expected_report.json").read_text())
    got = {k: result.report[k] for k in ("documents", "explored", "synthesized", "validated", "accepted")}
    assert got == {k: expected[k] for k in got}
    assert len(result.report["failed"]) == expected["failed"]
    # stage conservation
    r = result.report
    assert r["documents"] >= r["explored"] >= r["synthesized"] >= r["validated"] >= r["accepted"] == len(result.dataset)
    accepted = result.dataset[0]
    assert accepted.doc_id == "alpha" and accepted.accepted_by == "judge"
    paths = write_pipeline_outputs(result, tmp_path)
    back = read_dataset(paths["dataset"])
    assert [t.to_dict() for t in back] == [t.to_dict() for t in result.dataset]
    qa_rows = [json.loads(x) for x in paths["qa"].read_text().splitlines()]
    assert [row["valid"] for row in qa_rows] == [True, False, True]


def test_pipeline_parallel_is_deterministic(tmp_path):
    entries = load_manifest(CORPUS / "manifest.json")
    a = write_pipeline_outputs(run_pipeline(entries, _corpus_clients), tmp_path / "a")
    b = write_pipeline_outputs(run_pipeline(entries, _corpus_clients, parallel=3), tmp_path / "b")
    for key in a:
        assert a[key].read_bytes() == b[key].read_bytes()


def test_pipeline_isolates_failures():
    entries = load_manifest(CORPUS / "manifest.json")

    def clients(entry):
        if "beta" in entry.path:
            raise KeyError("no scenario")
        return _corpus_clients(entry)

    result = run_pipeline(entries, clients)
    assert result.report["documents"] == 3 and result.report["accepted"] == 1
    assert [f["stage"] for f in result.report["failed"]] == ["clients"]


def test_manifest_errors(tmp_path):
    p = tmp_path / "m.json"
    p.write_text('{"path": "x"}')
    with pytest.raises(SchemaMismatch):
        load_manifest(p)
    p.write_text('[{"path": "x", "source_tag": "web"}]')
    with pytest.raises(SchemaMismatch, match="source_tag"):
        load_manifest(p)
    bad = tmp_path / "d.jsonl"
    bad.write_text('{"id": 1}\n')
    with pytest.raises(SchemaMismatch):
        read_dataset(bad)
