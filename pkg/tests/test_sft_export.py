import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from docqa.agent_loop import AgentConfig, run_episode
from docqa.errors import EmptyKeptSet, SchemaMismatch
from docqa.sft_export import (
    HFTokenizer,
    LossMask,
    Segment,
    TrainingSample,
    WhitespaceTokenizer,
    build_loss_mask,
    build_sample,
    export_jsonl,
    get_tokenizer,
    import_jsonl,
    masked_nll,
    tokenize_sample,
)
from docqa.model_clients import ScriptedClient
from docqa.toolkit import Toolkit

from conftest import EchoSummarizer

WS = WhitespaceTokenizer()


def _sample(*pairs):
    return TrainingSample("ctx", tuple(Segment(t, r) for r, t in pairs))


# -- worked example ------------------------------------------------------------


def test_three_two_four_example():
    sample = _sample(("thought", "t1 t2 t3 "), ("action", "a1 a2 "), ("observation", "o1 o2 o3 o4"))
    mask = build_loss_mask(sample, WS)
    assert mask.token_flags == (1, 1, 1, 1, 1, 0, 0, 0, 0)
    assert mask.kept_count == 5
    assert masked_nll([-1.0] * 9, mask) == 1.0
    # observation logprobs never enter the loss
    assert masked_nll([-1.0] * 5 + [-50.0] * 4, mask) == 1.0
    assert masked_nll([-2.0] + [-1.0] * 8, mask) == pytest.approx(6 / 5)


def test_mask_invariants_checked():
    with pytest.raises(ValueError):
        LossMask((1, 0, 1), 1)
    with pytest.raises(ValueError):
        masked_nll([-1.0], LossMask((1, 1), 2))
    with pytest.raises(EmptyKeptSet):
        masked_nll([-1.0, -1.0], LossMask((0, 0), 0))


# -- properties ----------------------------------------------------------------

seg_text = st.text(alphabet="ab \n<>/_", max_size=20)
segments_st = st.lists(st.tuples(st.sampled_from(["thought", "action", "observation"]), seg_text), max_size=12)


@settings(max_examples=1000, deadline=None)
@given(segments_st)
def test_mask_matches_roles(pairs):
    sample = _sample(*pairs)
    toks = tokenize_sample(sample, WS)
    # tokens tile the text and never cross a segment boundary
    assert "".join(t.text for t, _ in toks) == sample.text
    per_segment = [len(WS.tokenize(t)) for _, t in pairs]
    assert len(toks) == sum(per_segment)
    mask = build_loss_mask(sample, WS)
    expected = tuple(int(r != "observation") for (r, t), n in zip(pairs, per_segment) for _ in range(n))
    assert mask.token_flags == expected and mask.kept_count == sum(expected)


@settings(max_examples=200, deadline=None)
@given(segments_st, st.floats(-20, 0, allow_nan=False))
def test_uniform_logprob_normalizer(pairs, lp):
    mask = build_loss_mask(_sample(*pairs), WS)
    if mask.kept_count == 0:
        with pytest.raises(EmptyKeptSet):
            masked_nll([lp] * len(mask.token_flags), mask)
    else:
        assert masked_nll([lp] * len(mask.token_flags), mask) == pytest.approx(-lp)
        assert masked_nll([-1.0] * len(mask.token_flags), mask) == 1.0


@settings(max_examples=200, deadline=None)
@given(segments_st, st.data())
def test_monotone_in_kept_tokens(pairs, data):
    mask = build_loss_mask(_sample(*pairs), WS)
    n = len(mask.token_flags)
    if mask.kept_count == 0:
        return
    base = data.draw(st.lists(st.floats(-10, 0, allow_nan=False), min_size=n, max_size=n))
    i = data.draw(st.integers(0, n - 1))
    lowered = list(base)
    lowered[i] -= 1.0
    if mask.token_flags[i]:
        assert masked_nll(lowered, mask) > masked_nll(base, mask)
    else:
        assert masked_nll(lowered, mask) == masked_nll(base, mask)


# -- from trajectories ---------------------------------------------------------


def test_netflix_sample_structure(netflix_outline, netflix_clients, netflix_scenario):
    policy, summarizer = netflix_clients
    traj, _ = run_episode(netflix_scenario["question"], netflix_outline, Toolkit(netflix_outline, summarizer), policy)
    sample = build_sample(traj)
    assert [s.role for s in sample.segments] == ["thought", "action", "observation"] * 4 + ["thought", "action"]
    assert sample.segments[0].text.startswith("<think>")
    assert sample.segments[1].text.lstrip().startswith("<tool_call>")
    assert sample.segments[2].text.startswith("\n<tool_response>\nA Document search for `advertising`")
    assert "0.105" in sample.segments[-1].text
    # the raw outputs are reproduced exactly by thought+action pairs
    for step, (t, a) in zip(traj.steps, zip(sample.segments[0::3], sample.segments[1::3])):
        assert t.text + a.text == step.raw
    msgs = sample.messages()
    assert [m["role"] for m in msgs] == ["system"] + ["assistant", "tool"] * 4 + ["assistant"]


def test_repairs_dropped_and_force_prompt_masked(netflix_outline):
    policy = ScriptedClient.from_responses(["<tool_call>bad</tool_call>", '<tool_call>{"name": "search", "arguments": {"keywords": ["a"]}}</tool_call>', "<think>t</think>final"])
    traj, _ = run_episode("q?", netflix_outline, Toolkit(netflix_outline, EchoSummarizer()), policy, AgentConfig(max_steps=2))
    assert [s.kind for s in traj.steps] == ["repair", "tool", "final"]
    roles = [s.role for s in build_sample(traj).segments]
    assert roles == ["thought", "action", "observation", "observation", "thought", "action"]


# -- JSONL ---------------------------------------------------------------------


def test_round_trip(tmp_path, netflix_outline, netflix_clients, netflix_scenario):
    policy, summarizer = netflix_clients
    traj, _ = run_episode(netflix_scenario["question"], netflix_outline, Toolkit(netflix_outline, summarizer), policy)
    sample = build_sample(traj)
    path = tmp_path / "sft.jsonl"
    assert export_jsonl([traj, sample], path, WS) == 2
    back, header = import_jsonl(path)
    assert back == [sample, sample]
    assert header["format"] == "docqa-sft" and header["count"] == 2 and header["tokenizer"] == "whitespace"
    rec = json.loads(path.read_text().splitlines()[1])
    assert rec["kept_count"] == sum(rec["token_flags"]) == build_loss_mask(sample, WS).kept_count


def test_empty_dataset(tmp_path):
    path = tmp_path / "e.jsonl"
    assert export_jsonl([], path) == 0
    back, header = import_jsonl(path)
    assert back == [] and header["count"] == 0


def test_import_errors(tmp_path):
    p = tmp_path / "x.jsonl"
    p.write_text("")
    with pytest.raises(SchemaMismatch):
        import_jsonl(p)
    p.write_text('{"format": "other"}\n')
    with pytest.raises(SchemaMismatch):
        import_jsonl(p)
    p.write_text('{"format": "docqa-sft"}\n{"segments": [{"role": "speech", "text": "x"}], "task_context": "c"}\n')
    with pytest.raises(SchemaMismatch) as info:
        import_jsonl(p)
    assert info.value.line == 2


def test_get_tokenizer():
    assert get_tokenizer(None).name == "whitespace"
    with pytest.raises(ValueError):
        get_tokenizer("bpe")


def test_hf_tokenizer_tiles(tmp_path):
    tokenizers = pytest.importorskip("tokenizers")
    from tokenizers import models, pre_tokenizers, trainers

    tok = tokenizers.Tokenizer(models.WordPiece(unk_token="[UNK]"))
    tok.pre_tokenizer = pre_tokenizers.Whitespace()
    tok.train_from_iterator(["<think> search advertising </think> tool_response 714.3"] * 5, trainers.WordPieceTrainer(special_tokens=["[UNK]"], vocab_size=200))
    tok.save(str(tmp_path / "tokenizer.json"))
    hf = get_tokenizer(f"hf:{tmp_path}")
    assert isinstance(hf, HFTokenizer)
    sample = _sample(("thought", "<think> search </think>\n"), ("action", "advertising  "), ("observation", "\n<tool_response>714.3"))
    toks = tokenize_sample(sample, hf)
    assert "".join(t.text for t, _ in toks) == sample.text
    mask = build_loss_mask(sample, hf)
    assert mask.token_flags[-1] == 0 and mask.token_flags[0] == 1
