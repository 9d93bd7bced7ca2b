"""Role-tagged training samples and observation-masked loss artifacts.

A trajectory becomes a flat sequence of segments. Each policy turn yields a
``thought`` segment (the raw ``<think>`` block, possibly empty) and an
``action`` segment (the rest of the raw output: a tool call or the final
answer). Tool observations become ``observation`` segments; so does the
force-answer prompt that precedes a forced final turn, since it is not
produced by the agent. Repair turns are dropped.
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

from .agent_loop import Step, Trajectory, render_assistant, split_thought
from .errors import EmptyKeptSet, SchemaMismatch
from .prompts import load_prompt

ROLES = ("thought", "action", "observation")
SFT_FORMAT = "docqa-sft"


@dataclass(frozen=True)
class Segment:
    text: str
    role: str

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown segment role {self.role!r}")


@dataclass(frozen=True)
class TrainingSample:
    task_context: str
    segments: tuple[Segment, ...]
    sample_id: str = ""
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def text(self) -> str:
        return "".join(s.text for s in self.segments)

    def messages(self) -> list[dict]:
        """Chat-format view: consecutive agent segments form one assistant
        message, each observation one tool message."""
        out = [{"role": "system", "content": self.task_context}]
        buf: list[str] = []
        for seg in self.segments:
            if seg.role == "observation":
                if buf:
                    out.append({"role": "assistant", "content": "".join(buf)})
                    buf = []
                out.append({"role": "tool", "content": seg.text})
            else:
                buf.append(seg.text)
        if buf:
            out.append({"role": "assistant", "content": "".join(buf)})
        return out


def _wrap_observation(text: str) -> str:
    return f"\n<tool_response>\n{text}\n</tool_response>\n"


def _step_segments(step: Step) -> list[Segment]:
    raw = step.raw if step.raw is not None else render_assistant(step.thought, step.action)
    _, think_block, rest = split_thought(raw)
    segs = []
    if step.forced:
        segs.append(Segment(_wrap_observation(load_prompt("force_answer")), "observation"))
    segs += [Segment(think_block, "thought"), Segment(rest, "action")]
    if step.observation is not None:
        segs.append(Segment(_wrap_observation(step.observation), "observation"))
    return segs


def build_sample(traj) -> TrainingSample:
    """Accepts a ``TrainingTrajectory`` (from the synthesis pipeline) or a bare
    ``Trajectory``."""
    inner: Trajectory = getattr(traj, "trajectory", traj)
    segments = []
    for step in inner.steps:
        if step.kind == "repair":
            continue
        segments.extend(_step_segments(step))
    meta = {"doc_id": inner.doc_id, "question": inner.question}
    sample_id = getattr(traj, "record_id", "")
    if sample_id:
        meta["answer"] = traj.qa.answer
    return TrainingSample(inner.task_context, tuple(segments), sample_id, meta)


# --------------------------------------------------------------------------
# tokenization


@dataclass(frozen=True)
class Token:
    text: str
    start: int
    end: int


class TokenizerAdapter(Protocol):
    name: str

    def tokenize(self, text: str) -> list[Token]:
        """Tokens whose spans tile ``text`` exactly."""


class WhitespaceTokenizer:
    """Each token is a run of non-space characters plus trailing whitespace
    (leading whitespace forms its own token)."""

    name = "whitespace"
    _PIECE = re.compile(r"\S+\s*|\s+")

    def tokenize(self, text: str) -> list[Token]:
        return [Token(m.group(), m.start(), m.end()) for m in self._PIECE.finditer(text)]


class HFTokenizer:
    """Adapter over a Hugging Face ``tokenizers`` tokenizer.

    Offsets from the backbone may skip characters (e.g. stripped spaces);
    each token is stretched back to the previous token's end so the spans
    tile the text.
    """

    def __init__(self, name_or_path: str):
        from tokenizers import Tokenizer

        path = Path(name_or_path)
        if path.is_dir():
            path = path / "tokenizer.json"
        self._tok = Tokenizer.from_file(str(path)) if path.is_file() else Tokenizer.from_pretrained(name_or_path)
        self.name = f"hf:{name_or_path}"

    def tokenize(self, text: str) -> list[Token]:
        if not text:
            return []
        enc = self._tok.encode(text, add_special_tokens=False)
        tokens, prev = [], 0
        for _, end in enc.offsets:
            end = max(prev, end)
            tokens.append(Token(text[prev:end], prev, end))
            prev = end
        if not tokens:
            return [Token(text, 0, len(text))]
        if prev < len(text):
            last = tokens[-1]
            tokens[-1] = Token(text[last.start:], last.start, len(text))
        return tokens


def get_tokenizer(spec: str | None) -> TokenizerAdapter:
    if spec in (None, "", "whitespace"):
        return WhitespaceTokenizer()
    if spec.startswith("hf:"):
        return HFTokenizer(spec[3:])
    raise ValueError(f"unknown tokenizer {spec!r}; use 'whitespace' or 'hf:<name-or-path>'")


# --------------------------------------------------------------------------
# masking


@dataclass(frozen=True)
class LossMask:
    token_flags: tuple[int, ...]
    kept_count: int
    tokenizer: str = ""

    def __post_init__(self):
        if self.kept_count != sum(self.token_flags):
            raise ValueError("kept_count must equal the number of 1 flags")


def tokenize_sample(sample: TrainingSample, tok: TokenizerAdapter) -> list[tuple[Token, str]]:
    """Tokens with the role of their segment. Segments are tokenized
    independently, so no token can straddle a segment boundary."""
    out = []
    for seg in sample.segments:
        out.extend((t, seg.role) for t in tok.tokenize(seg.text))
    return out


def build_loss_mask(sample: TrainingSample, tok: TokenizerAdapter) -> LossMask:
    flags = tuple(0 if role == "observation" else 1 for _, role in tokenize_sample(sample, tok))
    return LossMask(flags, sum(flags), tok.name)


def masked_nll(logprobs, mask: LossMask) -> float:
    """Mean negative log-likelihood over kept (non-observation) tokens."""
    logprobs = list(logprobs)
    if len(logprobs) != len(mask.token_flags):
        raise ValueError(f"{len(logprobs)} logprobs for {len(mask.token_flags)} tokens")
    if mask.kept_count == 0:
        raise EmptyKeptSet("mask keeps no tokens")
    total = math.fsum(lp for lp, f in zip(logprobs, mask.token_flags) if f)
    return -total / mask.kept_count


# --------------------------------------------------------------------------
# JSONL


def sample_record(sample: TrainingSample, tok: TokenizerAdapter | None = None) -> dict:
    rec = {
        "id": sample.sample_id,
        "meta": sample.meta,
        "task_context": sample.task_context,
        "messages": sample.messages(),
        "segments": [{"role": s.role, "text": s.text} for s in sample.segments],
    }
    if tok is not None:
        mask = build_loss_mask(sample, tok)
        rec["token_flags"] = list(mask.token_flags)
        rec["kept_count"] = mask.kept_count
    return rec


def export_jsonl(dataset, path, tok: TokenizerAdapter | None = None) -> int:
    """Write a manifest line followed by one record per sample; returns the
    number of samples. ``dataset`` items may be samples or trajectories."""
    samples = [d if isinstance(d, TrainingSample) else build_sample(d) for d in dataset]
    header = {
        "type": "manifest",
        "format": SFT_FORMAT,
        "version": 1,
        "count": len(samples),
        "tokenizer": tok.name if tok is not None else None,
        "roles": list(ROLES),
        "masked_roles": ["observation"],
    }
    lines = [header] + [sample_record(s, tok) for s in samples]
    Path(path).write_text("".join(json.dumps(x, ensure_ascii=False, sort_keys=True) + "\n" for x in lines), encoding="utf-8")
    return len(samples)


def import_jsonl(path) -> tuple[list[TrainingSample], dict]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise SchemaMismatch(f"{path}: missing manifest", 1)
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise SchemaMismatch(f"{path}: manifest is not JSON", 1) from exc
    if header.get("format") != SFT_FORMAT:
        raise SchemaMismatch(f"{path}: not a {SFT_FORMAT} file", 1)
    samples = []
    for n, line in enumerate(lines[1:], 2):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            segs = tuple(Segment(s["text"], s["role"]) for s in rec["segments"])
            samples.append(TrainingSample(rec["task_context"], segs, rec.get("id", ""), rec.get("meta", {})))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise SchemaMismatch(f"{path}: bad sample record ({exc})", n) from exc
    return samples, header
