"""Model endpoint contracts plus scripted and OpenAI-compatible HTTP clients.

Every model role (agent policy, explorer, synthesizer, teacher, judge,
extractor) talks to a :class:`PolicyClient`: messages in, raw text out. The
multimodal reader/captioner is a :class:`SummarizerClient`. Raw text follows
the ``<think>...</think>`` / ``<tool_call>...</tool_call>`` markup; the HTTP
client re-renders native tool calls into that form.
"""
from __future__ import annotations

import base64
import difflib
import hashlib
import json
import logging
import mimetypes
import os
import threading
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Protocol, runtime_checkable

import httpx

from .errors import AuthFailure, ContextOverflow, KeyMiss, ModelUnavailable, ScenarioExhausted

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SamplingParams:
    temperature: float = 0.6
    top_p: float = 0.95
    presence_penalty: float = 1.1


@runtime_checkable
class PolicyClient(Protocol):
    identity: str

    def complete(self, messages: list[dict], tools: list[dict] | None = None, sampling: SamplingParams | None = None) -> str:
        ...


@runtime_checkable
class SummarizerClient(Protocol):
    identity: str
    supports_media: bool

    def summarize(self, goal: str, text: str, media_refs: list[str]) -> str:
        ...


SUMMARIZER_SYSTEM = (
    "You are a careful document reader. Using only the provided document content "
    "and attached page images, extract the information that serves the user's goal. "
    "Quote exact figures and units. If the content does not contain the answer, say so."
)


def summarizer_messages(goal: str, text: str, media_refs, supports_media: bool = False) -> list[dict]:
    """Chat messages for a summarize/caption request.

    Text-only clients get media as a list of paths; media-capable clients get
    ``image_url`` content parts (see :meth:`HTTPClient._inline_media`).
    """
    body = f"User goal: {goal}\n\nDocument content:\n{text}"
    media_refs = [m for m in media_refs if m]
    if media_refs and not supports_media:
        body += "\n\nAttached media (paths):\n" + "\n".join(f"- {m}" for m in media_refs)
    user: dict = {"role": "user", "content": body}
    if media_refs and supports_media:
        user = {
            "role": "user",
            "content": [{"type": "text", "text": body}] + [{"type": "image_ref", "path": m} for m in media_refs],
        }
    return [{"role": "system", "content": SUMMARIZER_SYSTEM}, user]


def canonical_json(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True, separators=(",", ":"))


def input_hash(messages, tools=None) -> str:
    return hashlib.sha256(canonical_json({"messages": messages, "tools": tools}).encode("utf-8")).hexdigest()


def _last_text(messages) -> str:
    if not messages:
        return ""
    content = messages[-1].get("content", "")
    if isinstance(content, list):
        return " ".join(part.get("text", "") for part in content if isinstance(part, dict))
    return str(content)


# --------------------------------------------------------------------------
# scripted


_SCRIPTED_ERRORS = {
    "unavailable": ModelUnavailable,
    "context_overflow": ContextOverflow,
    "auth": AuthFailure,
}


@dataclass
class ScriptedScenario:
    """Canned responses, consumed in order or looked up by input hash.

    Ordered entries are plain strings or ``{"response": ..., "input_sha256":
    ..., "error": ...}`` objects; ``error`` (``unavailable``,
    ``context_overflow``, ``auth``) makes that call raise instead. Keyed
    entries map an input hash to ``{"response": ..., "probe": ...}`` where
    ``probe`` is the last message text, used to name the nearest key on a
    miss.
    """

    strictness: str = "ordered"
    responses: list = field(default_factory=list)
    keyed: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.strictness not in ("ordered", "keyed"):
            raise ValueError(f"unknown strictness {self.strictness!r}")

    @classmethod
    def from_dict(cls, d) -> "ScriptedScenario":
        if isinstance(d, list):
            return cls("ordered", list(d))
        return cls(d.get("strictness", "ordered"), list(d.get("responses", [])), dict(d.get("keyed", {})))

    @classmethod
    def load(cls, path, role: str | None = None, document: str | None = None) -> "ScriptedScenario":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls.from_dict(select_scenario(data, role, document))

    @classmethod
    def from_replay_log(cls, path, strictness: str = "ordered") -> "ScriptedScenario":
        records = [json.loads(line) for line in Path(path).read_text(encoding="utf-8").splitlines() if line.strip()]
        if strictness == "ordered":
            return cls("ordered", [{"response": r["response"], "input_sha256": r["input_sha256"]} for r in records])
        keyed = {r["input_sha256"]: {"response": r["response"], "probe": _last_text(r["messages"])} for r in records}
        return cls("keyed", keyed=keyed)

    def to_dict(self) -> dict:
        if self.strictness == "keyed":
            return {"strictness": "keyed", "keyed": self.keyed}
        return {"strictness": "ordered", "responses": self.responses}


def select_scenario(data, role: str | None = None, document: str | None = None):
    """Pick one scenario out of a bundle file.

    Bundles nest scenarios as ``{"documents": {doc_id: ...}}`` and/or
    ``{"roles": {role: ...}}``; a plain scenario is returned as-is.
    """
    if isinstance(data, dict) and "documents" in data:
        if document is None or document not in data["documents"]:
            raise KeyError(f"scenario bundle has no entry for document {document!r}")
        data = data["documents"][document]
    if isinstance(data, dict) and "roles" in data:
        if role is None or role not in data["roles"]:
            raise KeyError(f"scenario bundle has no entry for role {role!r}")
        data = data["roles"][role]
    return data


class ScriptedClient:
    """Deterministic client replaying a :class:`ScriptedScenario`.

    ``responder(call_index, messages)`` may stand in for a scenario when the
    responses are generated (e.g. an explorer that never stops).
    """

    def __init__(
        self,
        scenario: ScriptedScenario | None = None,
        identity: str = "scripted",
        responder: Callable[[int, list], str] | None = None,
        supports_media: bool = False,
    ):
        if scenario is None and responder is None:
            scenario = ScriptedScenario()
        self.scenario = scenario
        self.identity = identity
        self.responder = responder
        self.supports_media = supports_media
        self.calls = 0
        self.run_log: list[dict] = []
        self.drift: list[dict] = []
        self._lock = threading.Lock()

    @classmethod
    def from_responses(cls, responses, identity: str = "scripted") -> "ScriptedClient":
        return cls(ScriptedScenario("ordered", list(responses)), identity=identity)

    @classmethod
    def load(cls, path, role: str | None = None, document: str | None = None, identity: str | None = None) -> "ScriptedClient":
        return cls(ScriptedScenario.load(path, role, document), identity=identity or f"scripted:{Path(path).name}")

    @property
    def remaining(self) -> int:
        if self.scenario is None or self.scenario.strictness != "ordered":
            return -1
        return len(self.scenario.responses) - self.calls

    def complete(self, messages, tools=None, sampling=None) -> str:
        digest = input_hash(messages, tools)
        with self._lock:
            index = self.calls
            self.calls += 1
            entry = self._entry(index, digest, messages)
            self.run_log.append({"call": index, "input_sha256": digest})
        if isinstance(entry, dict):
            expected = entry.get("input_sha256")
            if expected and expected != digest:
                self.drift.append({"call": index, "expected": expected, "actual": digest})
                log.warning("%s: input drift on call %d", self.identity, index)
            if entry.get("error"):
                raise _SCRIPTED_ERRORS.get(entry["error"], ModelUnavailable)(
                    f"{self.identity}: scripted {entry['error']} on call {index}"
                )
            return entry["response"]
        return entry

    def _entry(self, index: int, digest: str, messages):
        if self.responder is not None:
            return self.responder(index, messages)
        sc = self.scenario
        if sc.strictness == "ordered":
            if index >= len(sc.responses):
                raise ScenarioExhausted(
                    f"{self.identity}: scenario exhausted after {len(sc.responses)} responses (call {index + 1})"
                )
            return sc.responses[index]
        if digest in sc.keyed:
            return sc.keyed[digest]
        probe = _last_text(messages)
        nearest, best = None, -1.0
        for key, entry in sorted(sc.keyed.items()):
            ratio = difflib.SequenceMatcher(None, probe, entry.get("probe", "")).ratio()
            if ratio > best:
                nearest, best = key, ratio
        raise KeyMiss(f"{self.identity}: no scripted response for input {digest[:12]}; nearest key {nearest}", nearest)

    def summarize(self, goal: str, text: str, media_refs) -> str:
        return self.complete(summarizer_messages(goal, text, list(media_refs), self.supports_media))


# --------------------------------------------------------------------------
# http


@dataclass
class EndpointConfig:
    base_url: str
    model: str
    api_key_env: str = "OPENAI_API_KEY"
    api_key: str | None = None
    max_retries: int = 3
    backoff_base: float = 1.0
    backoff_cap: float = 30.0
    timeout: float = 120.0
    supports_media: bool = False
    replay_log: str | None = None
    extra_body: dict = field(default_factory=dict)

    def resolve_key(self) -> str | None:
        return self.api_key or os.environ.get(self.api_key_env) or None


def render_raw(message: dict) -> str:
    """Flatten an OpenAI-style assistant message into the raw-text contract."""
    parts = []
    reasoning = message.get("reasoning_content") or message.get("reasoning")
    if reasoning:
        parts.append(f"<think>\n{reasoning.strip()}\n</think>")
    content = message.get("content")
    if content:
        parts.append(content.strip())
    for call in (message.get("tool_calls") or [])[:1]:
        fn = call.get("function", call)
        args = fn.get("arguments", {})
        if isinstance(args, str):
            try:
                args = json.loads(args)
            except json.JSONDecodeError:
                pass
        parts.append("<tool_call>\n" + json.dumps({"name": fn.get("name"), "arguments": args}, ensure_ascii=False) + "\n</tool_call>")
    return "\n".join(parts)


def _is_context_overflow(body: str) -> bool:
    low = body.lower()
    return "context" in low and ("length" in low or "too long" in low or "maximum" in low)


class HTTPClient:
    """OpenAI-compatible ``/chat/completions`` client with retry and replay log."""

    def __init__(
        self,
        endpoint: EndpointConfig,
        identity: str | None = None,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.endpoint = endpoint
        self.identity = identity or f"http:{endpoint.model}"
        self.supports_media = endpoint.supports_media
        self._transport = transport
        self._sleep = sleep
        self.attempt_log: list[dict] = []
        self._log_lock = threading.Lock()

    def _messages(self, messages) -> list[dict]:
        out = []
        for m in messages:
            if m.get("role") == "tool":
                # no tool_call ids are tracked; feed observations back as user turns
                out.append({"role": "user", "content": f"<tool_response>\n{m['content']}\n</tool_response>"})
            elif isinstance(m.get("content"), list):
                out.append({"role": m["role"], "content": [self._inline_media(p) for p in m["content"]]})
            else:
                out.append({"role": m["role"], "content": m.get("content", "")})
        return out

    @staticmethod
    def _inline_media(part: dict) -> dict:
        if part.get("type") != "image_ref":
            return part
        path = Path(part["path"])
        if not path.is_file():
            return {"type": "text", "text": f"[media: {part['path']}]"}
        mime = mimetypes.guess_type(path.name)[0] or "image/png"
        data = base64.b64encode(path.read_bytes()).decode("ascii")
        return {"type": "image_url", "image_url": {"url": f"data:{mime};base64,{data}"}}

    def complete(self, messages, tools=None, sampling=None) -> str:
        key = self.endpoint.resolve_key()
        if not key:
            raise AuthFailure(f"{self.identity}: no API key (set {self.endpoint.api_key_env})")
        sampling = sampling or SamplingParams()
        payload = {"model": self.endpoint.model, "messages": self._messages(messages), **asdict(sampling)}
        if tools:
            payload["tools"] = tools
        payload.update(self.endpoint.extra_body)
        url = self.endpoint.base_url.rstrip("/") + "/chat/completions"
        headers = {"Authorization": f"Bearer {key}"}

        last_error = ""
        attempts = max(1, self.endpoint.max_retries)
        with httpx.Client(transport=self._transport, timeout=self.endpoint.timeout) as http:
            for attempt in range(1, attempts + 1):
                try:
                    resp = http.post(url, json=payload, headers=headers)
                except httpx.TransportError as exc:
                    last_error = f"{type(exc).__name__}: {exc}"
                else:
                    if resp.status_code == 200:
                        self.attempt_log.append({"attempt": attempt, "status": 200})
                        raw = render_raw(resp.json()["choices"][0]["message"])
                        self._record(messages, tools, raw)
                        return raw
                    body = resp.text
                    if resp.status_code in (401, 403):
                        self.attempt_log.append({"attempt": attempt, "status": resp.status_code})
                        raise AuthFailure(f"{self.identity}: HTTP {resp.status_code}: {body[:200]}")
                    if resp.status_code == 400 and _is_context_overflow(body):
                        self.attempt_log.append({"attempt": attempt, "status": 400})
                        raise ContextOverflow(f"{self.identity}: {body[:200]}")
                    last_error = f"HTTP {resp.status_code}: {body[:200]}"
                    if resp.status_code != 429 and resp.status_code < 500:
                        self.attempt_log.append({"attempt": attempt, "status": resp.status_code})
                        raise ModelUnavailable(f"{self.identity}: {last_error}")
                self.attempt_log.append({"attempt": attempt, "error": last_error})
                log.warning("%s: attempt %d/%d failed: %s", self.identity, attempt, attempts, last_error)
                if attempt < attempts:
                    self._sleep(min(self.endpoint.backoff_cap, self.endpoint.backoff_base * 2 ** (attempt - 1)))
        raise ModelUnavailable(f"{self.identity}: unavailable after {attempts} attempts ({last_error})")

    def _record(self, messages, tools, raw: str) -> None:
        if not self.endpoint.replay_log:
            return
        record = {"input_sha256": input_hash(messages, tools), "messages": messages, "tools": tools, "response": raw}
        with self._log_lock, open(self.endpoint.replay_log, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")

    def summarize(self, goal: str, text: str, media_refs) -> str:
        return self.complete(summarizer_messages(goal, text, list(media_refs), self.supports_media))
