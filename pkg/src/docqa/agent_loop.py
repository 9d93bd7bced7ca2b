"""Reason-act episode driver: prompt, call the policy, parse, dispatch, repeat."""
from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

from .document import Outline, serialize_xml
from .errors import ContextOverflow, ModelUnavailable, ParseFailure, PolicyUnavailable
from .model_clients import SamplingParams
from .prompts import fill, load_prompt
from .toolkit import ToolCall

log = logging.getLogger(__name__)

TERMINATIONS = ("final_answer", "step_limit", "policy_error")


@dataclass(frozen=True)
class FinalAnswer:
    text: str


@dataclass(frozen=True)
class ParsedOutput:
    thought: str
    action: ToolCall | FinalAnswer
    warnings: tuple[str, ...] = ()


@dataclass(frozen=True)
class Step:
    """One policy turn.

    ``kind`` is ``tool`` (a dispatched call with its observation), ``final``
    (the answer; no observation) or ``repair`` (unparseable output; the
    observation is the corrective message shown to the policy).
    """

    kind: str
    thought: str = ""
    action: ToolCall | FinalAnswer | None = None
    observation: str | None = None
    raw: str | None = None
    forced: bool = False

    def to_dict(self) -> dict:
        if isinstance(self.action, ToolCall):
            action = {"type": "tool_call", **self.action.to_dict()}
        elif isinstance(self.action, FinalAnswer):
            action = {"type": "final_answer", "text": self.action.text}
        else:
            action = None
        d = {"kind": self.kind, "thought": self.thought, "action": action, "observation": self.observation, "raw": self.raw}
        if self.forced:
            d["forced"] = True
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Step":
        a = d.get("action")
        if a is None:
            action = None
        elif a["type"] == "tool_call":
            action = ToolCall(a["name"], a.get("arguments", {}))
        else:
            action = FinalAnswer(a["text"])
        return cls(d["kind"], d.get("thought", ""), action, d.get("observation"), d.get("raw"), d.get("forced", False))


@dataclass
class Trajectory:
    task_context: str
    steps: list[Step] = field(default_factory=list)
    terminated_by: str | None = None
    question: str = ""
    doc_id: str = ""

    @property
    def answer(self) -> str:
        if self.steps and isinstance(self.steps[-1].action, FinalAnswer):
            return self.steps[-1].action.text
        return ""

    @property
    def tool_calls(self) -> list[ToolCall]:
        return [s.action for s in self.steps if s.kind == "tool"]

    def to_dict(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "question": self.question,
            "task_context": self.task_context,
            "terminated_by": self.terminated_by,
            "steps": [s.to_dict() for s in self.steps],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Trajectory":
        return cls(
            task_context=d["task_context"],
            steps=[Step.from_dict(s) for s in d.get("steps", [])],
            terminated_by=d.get("terminated_by"),
            question=d.get("question", ""),
            doc_id=d.get("doc_id", ""),
        )


@dataclass(frozen=True)
class AgentConfig:
    max_steps: int = 20
    sampling: SamplingParams = SamplingParams()
    retry_on_malformed: int = 2
    context_budget_tokens: int = 128_000

    def __post_init__(self):
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.retry_on_malformed < 0:
            raise ValueError("retry_on_malformed must be >= 0")


# --------------------------------------------------------------------------
# prompts and history


def system_prompt(outline_xml: str, question: str) -> str:
    return fill(load_prompt("agent_system"), document_outline=outline_xml, question=question)


def render_assistant(thought: str, action) -> str:
    parts = []
    if thought:
        parts.append(f"<think>\n{thought}\n</think>")
    if isinstance(action, ToolCall):
        parts.append(f"<tool_call>\n{action.to_json()}\n</tool_call>")
    elif isinstance(action, FinalAnswer):
        parts.append(action.text)
    return "\n\n".join(parts)


def format_history(task_context: str, steps) -> list[dict]:
    messages = [{"role": "system", "content": task_context}]
    for step in steps:
        if step.forced:
            messages.append({"role": "user", "content": load_prompt("force_answer")})
        content = step.raw if step.raw is not None else render_assistant(step.thought, step.action)
        messages.append({"role": "assistant", "content": content})
        if step.observation is not None:
            messages.append({"role": "tool", "content": step.observation})
    return messages


# --------------------------------------------------------------------------
# parsing

_THINK_RE = re.compile(r"<think>(.*?)</think>", re.S)
_CALL_RE = re.compile(r"<tool_call>(.*?)</tool_call>", re.S)
# some models print arguments as a quoted but unescaped object
_LOOSE_ARGS_FIRST = re.compile(r'"arguments"\s*:\s*"(\{.*\})"\s*,\s*"name"\s*:\s*"([^"]+)"', re.S)
_LOOSE_NAME_FIRST = re.compile(r'"name"\s*:\s*"([^"]+)"\s*,\s*"arguments"\s*:\s*"(\{.*\})"', re.S)


def split_thought(raw: str) -> tuple[str, str, str]:
    """Return ``(thought, think_block, rest)`` where ``think_block`` is the raw
    prefix up to and including ``</think>``."""
    m = _THINK_RE.search(raw)
    if m:
        return m.group(1).strip(), raw[: m.end()], raw[m.end():]
    if "</think>" in raw:
        # thinking models often drop the opening tag
        head, _, _ = raw.partition("</think>")
        cut = len(head) + len("</think>")
        return head.strip(), raw[:cut], raw[cut:]
    return "", "", raw


def _parse_call_body(body: str) -> ToolCall:
    body = body.strip()
    try:
        obj = json.loads(body)
    except json.JSONDecodeError:
        m = _LOOSE_ARGS_FIRST.search(body)
        if m:
            args_text, name = m.group(1), m.group(2)
        else:
            m = _LOOSE_NAME_FIRST.search(body)
            if not m:
                raise ParseFailure("tool_call body is not valid JSON", body)
            name, args_text = m.group(1), m.group(2)
        try:
            return ToolCall(name, _as_args(json.loads(args_text)))
        except json.JSONDecodeError as exc:
            raise ParseFailure(f"tool_call arguments are not valid JSON ({exc})", body) from exc
    if not isinstance(obj, dict) or not isinstance(obj.get("name"), str):
        raise ParseFailure('tool_call must be a JSON object with a string "name"', body)
    args = obj.get("arguments", obj.get("parameters", {}))
    if isinstance(args, str):
        try:
            args = json.loads(args) if args.strip() else {}
        except json.JSONDecodeError as exc:
            raise ParseFailure(f"tool_call arguments string is not valid JSON ({exc})", body) from exc
    return ToolCall(obj["name"], _as_args(args))


def _as_args(args) -> dict:
    if not isinstance(args, dict):
        raise ParseFailure("tool_call arguments must be a JSON object")
    return args


def parse_policy_output(raw: str) -> ParsedOutput:
    thought, _, rest = split_thought(raw)
    bodies = _CALL_RE.findall(rest)
    if bodies:
        warnings = ()
        if len(bodies) > 1:
            warnings = (f"ParseWarning: {len(bodies) - 1} extra tool_call block(s) ignored",)
        return ParsedOutput(thought, _parse_call_body(bodies[0]), warnings)
    if "<tool_call>" in rest:
        raise ParseFailure("unterminated <tool_call> block", raw)
    answer = rest.strip()
    if not answer:
        raise ParseFailure("response has neither a tool call nor an answer", raw)
    return ParsedOutput(thought, FinalAnswer(answer))


def _strip_markup(raw: str) -> str:
    _, _, rest = split_thought(raw)
    rest = _CALL_RE.sub("", rest)
    return rest.replace("<tool_call>", "").strip()


# --------------------------------------------------------------------------
# episode


def estimate_tokens(text: str) -> int:
    return len(text) // 4 + 1


def run_episode(question: str, outline: Outline, toolkit, policy, config: AgentConfig | None = None) -> tuple[Trajectory, str]:
    """Run one episode and return ``(trajectory, answer)``.

    Unparseable policy output becomes a ``repair`` step; more than
    ``retry_on_malformed`` in a row, or reaching ``max_steps``, triggers one
    final tool-free call asking for an answer. ``PolicyUnavailable`` carries
    the partial trajectory.
    """
    config = config or AgentConfig()
    tc = system_prompt(serialize_xml(outline), question)
    if estimate_tokens(tc) > config.context_budget_tokens:
        raise ContextOverflow(
            f"system prompt needs ~{estimate_tokens(tc)} tokens; budget is {config.context_budget_tokens}"
        )
    traj = Trajectory(task_context=tc, question=question, doc_id=outline.doc_id)
    tools = toolkit.schemas
    malformed = 0

    def call(messages, with_tools=True) -> str:
        try:
            return policy.complete(messages, tools if with_tools else None, config.sampling)
        except ModelUnavailable as exc:
            traj.terminated_by = "policy_error"
            raise PolicyUnavailable(f"policy {getattr(policy, 'identity', '?')}: {exc}", traj) from exc
        except ContextOverflow as exc:
            traj.terminated_by = "policy_error"
            exc.trajectory = traj
            raise

    while len(traj.steps) < config.max_steps:
        raw = call(format_history(tc, traj.steps))
        try:
            parsed = parse_policy_output(raw)
        except ParseFailure as exc:
            malformed += 1
            thought, _, _ = split_thought(raw)
            note = fill(load_prompt("repair"), error=str(exc))
            traj.steps.append(Step("repair", thought, None, note, raw))
            log.info("malformed policy output (%d in a row): %s", malformed, exc)
            if malformed > config.retry_on_malformed:
                break
            continue
        malformed = 0
        for w in parsed.warnings:
            log.info(w)
        if isinstance(parsed.action, FinalAnswer):
            traj.steps.append(Step("final", parsed.thought, parsed.action, None, raw))
            traj.terminated_by = "final_answer"
            return traj, parsed.action.text
        result = toolkit.dispatch(parsed.action)
        traj.steps.append(Step("tool", parsed.thought, parsed.action, result.rendered, raw))

    messages = format_history(tc, traj.steps)
    messages.append({"role": "user", "content": load_prompt("force_answer")})
    raw = call(messages, with_tools=False)
    thought, _, _ = split_thought(raw)
    answer = _strip_markup(raw) or "Unable to determine the answer from the information gathered."
    traj.steps.append(Step("final", thought, FinalAnswer(answer), None, raw, forced=True))
    traj.terminated_by = "step_limit"
    return traj, answer


# --------------------------------------------------------------------------
# persistence

TRAJECTORY_FORMAT = "docqa-trajectory"


def write_trajectory_jsonl(traj: Trajectory, path, extra: dict | None = None) -> None:
    """Manifest line, one line per step, then an ``end`` line."""
    lines = [
        {
            "type": "manifest",
            "format": TRAJECTORY_FORMAT,
            "version": 1,
            "doc_id": traj.doc_id,
            "question": traj.question,
            "task_context": traj.task_context,
            **(extra or {}),
        }
    ]
    for i, step in enumerate(traj.steps):
        lines.append({"type": "step", "index": i, **step.to_dict()})
    lines.append({"type": "end", "terminated_by": traj.terminated_by, "answer": traj.answer, "num_steps": len(traj.steps)})
    Path(path).write_text("".join(json.dumps(x, ensure_ascii=False) + "\n" for x in lines), encoding="utf-8")


def read_trajectory_jsonl(path) -> tuple[Trajectory, dict]:
    records = [json.loads(line) for line in Path(path).read_text(encoding="utf-8").splitlines() if line.strip()]
    if not records or records[0].get("type") != "manifest" or records[0].get("format") != TRAJECTORY_FORMAT:
        raise ValueError(f"{path}: not a trajectory file")
    manifest = records[0]
    steps = [Step.from_dict(r) for r in records if r.get("type") == "step"]
    end = next((r for r in records if r.get("type") == "end"), {})
    traj = Trajectory(
        task_context=manifest["task_context"],
        steps=steps,
        terminated_by=end.get("terminated_by"),
        question=manifest.get("question", ""),
        doc_id=manifest.get("doc_id", ""),
    )
    return traj, manifest
