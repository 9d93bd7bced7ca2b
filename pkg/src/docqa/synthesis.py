"""Exploration-then-synthesis QA generation with rejection sampling."""
from __future__ import annotations

import hashlib
import json
import logging
import re
import unicodedata
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from .agent_loop import AgentConfig, Trajectory, run_episode, split_thought
from .document import Outline, build_outline, ingest_parsed, serialize_xml
from .errors import (
    DocQAError,
    ExplorerUnavailable,
    JudgeUnavailable,
    ModelUnavailable,
    ParseFailure,
    PolicyUnavailable,
    SchemaMismatch,
    SynthesizerUnavailable,
    TeacherUnavailable,
    UnparseableOutput,
)
from .eval_harness import extract_answer, infer_gold, judge_score, rule_score
from .model_clients import SamplingParams
from .prompts import fill, load_prompt
from .toolkit import ToolCall, Toolkit, ToolkitConfig

log = logging.getLogger(__name__)

SOURCE_TAGS = ("longdocurl", "mmdocrag", "dude", "cuad", "other")
DEFAULT_DEPTHS = {"longdocurl": 20, "mmdocrag": 20, "dude": 15, "cuad": 15}


def _digest(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True, ensure_ascii=False).encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class SynthesisConfig:
    max_depth_by_source: dict = field(default_factory=lambda: dict(DEFAULT_DEPTHS))
    default_depth: int = 20
    k_rejection_samples: int = 3
    acceptance_rule: str = "judge"
    explorations_per_doc: int = 1
    sampling: SamplingParams = SamplingParams()
    agent: AgentConfig = AgentConfig()

    def __post_init__(self):
        if any(int(d) < 1 for d in self.max_depth_by_source.values()) or self.default_depth < 1:
            raise ValueError("exploration depths must be >= 1")
        if self.acceptance_rule not in ("judge", "exact_match"):
            raise ValueError(f"unknown acceptance_rule {self.acceptance_rule!r}")
        if self.k_rejection_samples < 1:
            raise ValueError("k_rejection_samples must be >= 1")

    def max_depth(self, source_tag: str) -> int:
        return int(self.max_depth_by_source.get(source_tag, self.default_depth))


# --------------------------------------------------------------------------
# exploration


@dataclass(frozen=True)
class ExplorationStep:
    intent: str
    action: ToolCall
    observation: str
    raw: str | None = None

    def to_dict(self) -> dict:
        return {"intent": self.intent, "action": self.action.to_dict(), "observation": self.observation, "raw": self.raw}

    @classmethod
    def from_dict(cls, d: dict) -> "ExplorationStep":
        return cls(d["intent"], ToolCall.from_dict(d["action"]), d["observation"], d.get("raw"))


@dataclass
class ExplorationTrajectory:
    doc_id: str
    source_tag: str
    steps: list[ExplorationStep] = field(default_factory=list)
    discarded: list[dict] = field(default_factory=list)
    incomplete: bool = False
    error: str | None = None

    @property
    def trajectory_id(self) -> str:
        return _digest({"doc_id": self.doc_id, "steps": [s.to_dict() for s in self.steps]})

    def to_dict(self) -> dict:
        return {
            "exploration_id": self.trajectory_id,
            "doc_id": self.doc_id,
            "source_tag": self.source_tag,
            "steps": [s.to_dict() for s in self.steps],
            "discarded": self.discarded,
            "incomplete": self.incomplete,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExplorationTrajectory":
        return cls(
            d["doc_id"],
            d["source_tag"],
            [ExplorationStep.from_dict(s) for s in d.get("steps", [])],
            list(d.get("discarded", [])),
            d.get("incomplete", False),
            d.get("error"),
        )

    def render(self) -> str:
        parts = []
        for t, s in enumerate(self.steps, 1):
            parts.append(f"Step {t}\nIntent: {s.intent}\nAction: {s.action.to_json()}\nObservation:\n{s.observation}")
        return "\n\n".join(parts)


_INTENT_RE = re.compile(r"<intent>(.*?)</intent>", re.S)
_CALL_RE = re.compile(r"<tool_call>(.*?)</tool_call>", re.S)


def parse_exploration_output(raw: str) -> tuple[str, ToolCall | None]:
    """``(intent, call)``; ``call`` is None when the explorer chose to stop."""
    from .agent_loop import _parse_call_body

    m = _INTENT_RE.search(raw)
    thought, _, rest = split_thought(raw)
    if m:
        intent = m.group(1).strip()
    elif thought:
        intent = thought
    else:
        intent = rest.split("<tool_call>", 1)[0].strip()
    bodies = _CALL_RE.findall(raw)
    if not bodies:
        if "<tool_call>" in raw:
            raise ParseFailure("unterminated <tool_call> block", raw)
        return intent, None
    return intent, _parse_call_body(bodies[0])


def explore(outline: Outline, explorer, toolkit, cfg: SynthesisConfig | None = None, source_tag: str = "other") -> ExplorationTrajectory:
    """Intent-guided exploration up to the source's depth cap.

    Each explorer turn yields an intent and one tool call whose observation is
    appended to the history. Calls identical to an earlier one are not
    executed: the explorer sees a notice instead, the attempt is logged in
    ``discarded`` and still consumes depth.
    """
    cfg = cfg or SynthesisConfig()
    depth = cfg.max_depth(source_tag)
    xi = ExplorationTrajectory(outline.doc_id, source_tag)
    messages = [
        {"role": "system", "content": load_prompt("exploration_system")},
        {"role": "user", "content": fill(load_prompt("exploration_user"), document_outline=serialize_xml(outline))},
    ]
    seen: set[str] = set()
    for attempt in range(depth):
        try:
            raw = explorer.complete(messages, toolkit.schemas, cfg.sampling)
        except ModelUnavailable as exc:
            xi.incomplete = True
            xi.error = f"ExplorerUnavailable: {exc}"
            log.warning("%s: explorer unavailable after %d steps: %s", outline.doc_id, len(xi.steps), exc)
            break
        messages.append({"role": "assistant", "content": raw})
        try:
            intent, call = parse_exploration_output(raw)
        except ParseFailure as exc:
            note = fill(load_prompt("repair"), error=str(exc))
            xi.discarded.append({"attempt": attempt, "reason": "malformed", "raw": raw})
            messages.append({"role": "tool", "content": note})
            continue
        if call is None:
            break
        if call.key() in seen:
            note = (
                f"Duplicate tool call suppressed: `{call.name}` with these arguments was already executed. "
                "Repeating identical tool calls is not allowed; choose a different action."
            )
            xi.discarded.append({"attempt": attempt, "reason": "duplicate", "action": call.to_dict()})
            messages.append({"role": "tool", "content": note})
            continue
        seen.add(call.key())
        observation = toolkit.dispatch(call).rendered
        xi.steps.append(ExplorationStep(intent, call, observation, raw))
        messages.append({"role": "tool", "content": observation})
    return xi


# --------------------------------------------------------------------------
# QA pairs and mechanical checks


@dataclass(frozen=True)
class CheckResult:
    name: str
    status: str  # pass | fail | delegated
    code: str | None = None
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.status != "fail"

    def to_dict(self) -> dict:
        d = {"name": self.name, "status": self.status}
        if self.code:
            d["code"] = self.code
        if self.detail:
            d["detail"] = self.detail
        return d


@dataclass(frozen=True)
class QAPair:
    question: str
    answer: str
    field_names: tuple[str, ...] = ("question", "answer")
    provenance: dict = field(default_factory=dict, compare=False)
    validation: tuple[CheckResult, ...] = field(default=(), compare=False)

    @classmethod
    def from_fields(cls, fields: dict, provenance: dict | None = None) -> "QAPair":
        def text(v) -> str:
            if v is None:
                return ""
            if isinstance(v, list):
                return ", ".join(str(x) for x in v)
            return str(v).strip()

        return cls(text(fields.get("question")), text(fields.get("answer")), tuple(fields), dict(provenance or {}))

    @property
    def qa_id(self) -> str:
        return _digest(self.to_dict())

    @property
    def valid(self) -> bool:
        return bool(self.validation) and all(c.passed for c in self.validation)

    def failures(self) -> list[CheckResult]:
        return [c for c in self.validation if not c.passed]

    def to_dict(self) -> dict:
        return {"question": self.question, "answer": self.answer}

    def to_record(self) -> dict:
        return {
            "qa_id": self.qa_id,
            "qa": self.to_dict(),
            "provenance": self.provenance,
            "validation": [c.to_dict() for c in self.validation],
            "valid": self.valid,
        }


_LOCATION_PATTERNS = [
    (re.compile(r"\b(?:figure|fig\.?|table|chart|exhibit)\s*#?\s*\d+", re.I), "figure/table number"),
    (re.compile(r"\bpages?\b|\bp\.\s*\d+", re.I), "page reference"),
    (re.compile(r"\bsection[\s_-]*ids?\b|\bsection\s+\d+(?:\.\d+)*", re.I), "section id"),
]
_SENTENCE_END = re.compile(r"[.!?](?:\s+|$)")


def _non_latin_chars(text: str) -> list[str]:
    bad = []
    for ch in text:
        if ch.isascii():
            continue
        cat = unicodedata.category(ch)
        name = unicodedata.name(ch, "")
        if cat.startswith("L"):
            ok = name.startswith("LATIN")
        elif cat == "Nd":
            ok = False
        elif cat.startswith(("P", "S", "Z")):
            ok = not name.startswith(("FULLWIDTH", "IDEOGRAPHIC", "CJK", "HALFWIDTH"))
        elif cat == "Mn":
            ok = True  # combining accents on Latin letters
        else:
            ok = False
        if not ok:
            bad.append(ch)
    return bad


def _sentence_count(text: str) -> int:
    # decimals ("714.3") don't end sentences: a terminator must be followed by space or end
    return len([m for m in _SENTENCE_END.finditer(text.strip())]) or 1


def validate_qa(qa: QAPair) -> list[CheckResult]:
    """Mechanical second-pass checks; semantic ones are recorded as delegated."""
    out = []
    extra = [f for f in qa.field_names if f not in ("question", "answer")]
    missing = [f for f in ("question", "answer") if f not in qa.field_names or not getattr(qa, f)]
    if extra:
        out.append(CheckResult("two_fields", "fail", "ExtraFields", f"extra fields: {', '.join(extra)}"))
    elif missing:
        out.append(CheckResult("two_fields", "fail", "MissingFields", f"missing or empty: {', '.join(missing)}"))
    else:
        out.append(CheckResult("two_fields", "pass"))

    bad = _non_latin_chars(qa.question + qa.answer)
    if bad:
        out.append(CheckResult("english_only", "fail", "NonLatinScript", "characters: " + "".join(dict.fromkeys(bad))[:20]))
    else:
        out.append(CheckResult("english_only", "pass"))

    n_q = qa.question.count("?")
    if n_q > 1:
        out.append(CheckResult("single_question", "fail", "MultipleQuestions", f"{n_q} question marks"))
    else:
        out.append(CheckResult("single_question", "pass"))

    found = [label for pat, label in _LOCATION_PATTERNS if pat.search(qa.question)]
    if found:
        out.append(CheckResult("no_location_reference", "fail", "LocationReference", ", ".join(found)))
    else:
        out.append(CheckResult("no_location_reference", "pass"))

    if len(qa.answer) > 200 or "\n\n" in qa.answer or _sentence_count(qa.answer) > 1:
        out.append(CheckResult("short_answer", "fail", "AnswerTooLong", f"{len(qa.answer)} chars, {_sentence_count(qa.answer)} sentences"))
    else:
        out.append(CheckResult("short_answer", "pass"))

    for name in ("document_dependence", "multi_hop", "answerability"):
        out.append(CheckResult(name, "delegated", detail="checked by the synthesis model's second pass"))
    return out


_JSON_FENCE = re.compile(r"```(?:json)?\s*(.*?)```", re.S)


def parse_qa_output(raw: str) -> dict | None:
    """The first JSON object in the synthesizer output, or None."""
    _, _, text = split_thought(raw)
    candidates = _JSON_FENCE.findall(text) + [text]
    decoder = json.JSONDecoder()
    for cand in candidates:
        start = cand.find("{")
        while start != -1:
            try:
                obj, _ = decoder.raw_decode(cand[start:])
            except json.JSONDecodeError:
                start = cand.find("{", start + 1)
                continue
            if isinstance(obj, dict):
                return obj
            start = cand.find("{", start + 1)
    return None


def synthesize(traj: ExplorationTrajectory, synthesizer, cfg: SynthesisConfig | None = None) -> QAPair:
    """One QA pair from an exploration trajectory.

    Unparseable or check-failing output is resubmitted once with the failure
    notes. The returned pair carries its validation results; after the retry
    it may still be invalid (the caller discards it).
    """
    if not traj.steps:
        raise ValueError("cannot synthesize from an empty exploration trajectory")
    cfg = cfg or SynthesisConfig()
    provenance = {"doc_id": traj.doc_id, "exploration_id": traj.trajectory_id, "source_tag": traj.source_tag}
    messages = [
        {"role": "system", "content": load_prompt("synthesis_system")},
        {"role": "user", "content": fill(load_prompt("synthesis_user"), trajectory=traj.render())},
    ]

    def ask() -> str:
        try:
            return synthesizer.complete(messages, None, cfg.sampling)
        except ModelUnavailable as exc:
            raise SynthesizerUnavailable(str(exc)) from exc

    qa = None
    for attempt in range(2):
        raw = ask()
        fields = parse_qa_output(raw)
        if fields is None:
            failures = "- output is not a JSON object"
        else:
            qa = QAPair.from_fields(fields, {**provenance, "synthesis_attempts": attempt + 1})
            qa = QAPair(qa.question, qa.answer, qa.field_names, qa.provenance, tuple(validate_qa(qa)))
            if qa.valid:
                return qa
            failures = "\n".join(f"- {c.code}: {c.detail}" for c in qa.failures())
        if attempt == 0:
            messages += [
                {"role": "assistant", "content": raw},
                {"role": "user", "content": fill(load_prompt("synthesis_retry"), failures=failures)},
            ]
    if qa is None or fields is None:
        raise UnparseableOutput(f"{traj.doc_id}: synthesizer output is not a JSON object after retry")
    return qa


# --------------------------------------------------------------------------
# rejection sampling


@dataclass
class TrainingTrajectory:
    qa: QAPair
    doc_id: str
    exploration_id: str
    trajectory: Trajectory
    attempt: int
    accepted_by: str
    source_tag: str = "other"

    @property
    def record_id(self) -> str:
        return _digest({"qa_id": self.qa.qa_id, "exploration_id": self.exploration_id, "attempt": self.attempt})

    def to_dict(self) -> dict:
        return {
            "id": self.record_id,
            "doc_id": self.doc_id,
            "source_tag": self.source_tag,
            "exploration_id": self.exploration_id,
            "qa_id": self.qa.qa_id,
            "qa": self.qa.to_dict(),
            "attempt": self.attempt,
            "accepted_by": self.accepted_by,
            "trajectory": self.trajectory.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainingTrajectory":
        qa = QAPair(d["qa"]["question"], d["qa"]["answer"], provenance={"doc_id": d["doc_id"], "exploration_id": d["exploration_id"]})
        return cls(
            qa=qa,
            doc_id=d["doc_id"],
            exploration_id=d["exploration_id"],
            trajectory=Trajectory.from_dict(d["trajectory"]),
            attempt=int(d["attempt"]),
            accepted_by=d.get("accepted_by", "rule"),
            source_tag=d.get("source_tag", "other"),
        )


@dataclass
class RejectionOutcome:
    trajectory: TrainingTrajectory | None
    attempts: list[dict] = field(default_factory=list)

    @property
    def accepted(self) -> bool:
        return self.trajectory is not None


def accept_answer(qa: QAPair, prediction: str, judge=None, rule: str = "judge", notes: list | None = None) -> tuple[bool, str]:
    """Decide whether ``prediction`` answers ``qa``; returns ``(ok, method)``.

    Judge-based when a judge is configured and the rule is ``judge``; falls back
    to the rule-based scorer when no judge is given or it is unreachable.
    """
    if rule == "judge" and judge is not None:
        try:
            return judge_score(qa.question, qa.answer, prediction, judge, notes), "judge"
        except JudgeUnavailable as exc:
            if notes is not None:
                notes.append(f"JudgeUnavailable, rule fallback: {exc}")
    gold = infer_gold(qa.answer)
    extracted = extract_answer(prediction, None, qa.question, gold.type)
    return rule_score(extracted, gold)[0], "rule"


def reject_sample(
    qa: QAPair,
    outline: Outline,
    teacher,
    judge,
    toolkit,
    cfg: SynthesisConfig | None = None,
) -> RejectionOutcome:
    """Run up to k teacher episodes; keep the first accepted one."""
    cfg = cfg or SynthesisConfig()
    outcome = RejectionOutcome(None)
    for attempt in range(1, cfg.k_rejection_samples + 1):
        try:
            traj, answer = run_episode(qa.question, outline, toolkit, teacher, cfg.agent)
        except PolicyUnavailable as exc:
            raise TeacherUnavailable(str(exc)) from exc
        notes: list[str] = []
        ok, method = accept_answer(qa, answer, judge, cfg.acceptance_rule, notes)
        outcome.attempts.append({"attempt": attempt, "answer": answer, "accepted": ok, "method": method, "notes": notes})
        if ok:
            outcome.trajectory = TrainingTrajectory(
                qa=qa,
                doc_id=outline.doc_id,
                exploration_id=qa.provenance.get("exploration_id", ""),
                trajectory=traj,
                attempt=attempt,
                accepted_by=method,
                source_tag=qa.provenance.get("source_tag", "other"),
            )
            break
    return outcome


# --------------------------------------------------------------------------
# pipeline


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    source_tag: str = "other"
    format: str = "mineru_json"
    doc_id: str | None = None


def load_manifest(path) -> list[ManifestEntry]:
    """Corpus manifest: a JSON list of ``{"path", "source_tag", "format"?}``.

    Relative paths resolve against the manifest's directory.
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaMismatch(f"{path}: invalid JSON ({exc.msg})", exc.lineno) from exc
    if not isinstance(data, list):
        raise SchemaMismatch(f"{path}: manifest must be a JSON list")
    entries = []
    for i, item in enumerate(data):
        if not isinstance(item, dict) or "path" not in item:
            raise SchemaMismatch(f"{path}: entry {i} needs a 'path'")
        tag = item.get("source_tag", "other")
        if tag not in SOURCE_TAGS:
            raise SchemaMismatch(f"{path}: entry {i} has unknown source_tag {tag!r}")
        doc_path = Path(item["path"])
        if not doc_path.is_absolute():
            doc_path = path.parent / doc_path
        entries.append(ManifestEntry(str(doc_path), tag, item.get("format", "mineru_json"), item.get("doc_id")))
    return entries


@dataclass
class PipelineClients:
    explorer: object
    synthesizer: object
    teacher: object
    summarizer: object
    judge: object = None
    captioner: object = None


@dataclass
class PipelineResult:
    dataset: list[TrainingTrajectory]
    explorations: list[ExplorationTrajectory]
    qa_pairs: list[QAPair]
    report: dict


def load_outline(entry: ManifestEntry) -> Outline:
    if entry.format == "outline_json":
        return Outline.from_dict(json.loads(Path(entry.path).read_text(encoding="utf-8")))
    return build_outline(ingest_parsed(entry.path, entry.format))


def _process_document(entry: ManifestEntry, clients: PipelineClients, cfg: SynthesisConfig, toolkit_cfg: ToolkitConfig) -> dict:
    from .document import enrich_captions

    rec: dict = {"path": entry.path, "source_tag": entry.source_tag, "explorations": [], "qa": [], "dataset": []}
    stats = {"explored": 0, "synthesized": 0, "validated": 0, "accepted": 0, "attempts": 0}
    rec["stats"] = stats
    try:
        outline = load_outline(entry)
        if entry.doc_id:
            outline = Outline.from_roots(entry.doc_id, outline.roots, outline.screenshots, outline.notes)
        rec["doc_id"] = outline.doc_id
        if clients.captioner is not None:
            outline = enrich_captions(outline, clients.captioner)
        toolkit = Toolkit(outline, clients.summarizer, toolkit_cfg)
        for _ in range(cfg.explorations_per_doc):
            stage = "explore"
            xi = explore(outline, clients.explorer, toolkit, cfg, entry.source_tag)
            rec["explorations"].append(xi)
            if not xi.steps:
                continue
            stats["explored"] += 1
            stage = "synthesize"
            qa = synthesize(xi, clients.synthesizer, cfg)
            rec["qa"].append(qa)
            stats["synthesized"] += 1
            if not qa.valid:
                continue
            stats["validated"] += 1
            stage = "reject_sample"
            outcome = reject_sample(qa, outline, clients.teacher, clients.judge, toolkit, cfg)
            stats["attempts"] += len(outcome.attempts)
            if outcome.accepted:
                stats["accepted"] += 1
                rec["dataset"].append(outcome.trajectory)
    except (DocQAError, OSError, ValueError) as exc:
        rec["error"] = {"stage": locals().get("stage", "load"), "type": type(exc).__name__, "message": str(exc)}
        log.warning("%s failed: %s", entry.path, exc)
    return rec


def run_pipeline(
    entries,
    clients_for: Callable[[ManifestEntry], PipelineClients],
    cfg: SynthesisConfig | None = None,
    toolkit_cfg: ToolkitConfig | None = None,
    parallel: int = 1,
) -> PipelineResult:
    """explore -> synthesize -> validate -> reject_sample for every document.

    ``clients_for`` builds the model clients for one manifest entry (scripted
    scenarios are per document). Failures are isolated per document and
    listed in the report; outputs keep manifest order whatever ``parallel``.
    """
    cfg = cfg or SynthesisConfig()
    toolkit_cfg = toolkit_cfg or ToolkitConfig()
    entries = list(entries)

    def work(entry):
        try:
            clients = clients_for(entry)
        except (DocQAError, OSError, KeyError, ValueError) as exc:
            return {"path": entry.path, "source_tag": entry.source_tag, "explorations": [], "qa": [], "dataset": [],
                    "stats": {"explored": 0, "synthesized": 0, "validated": 0, "accepted": 0, "attempts": 0},
                    "error": {"stage": "clients", "type": type(exc).__name__, "message": str(exc)}}
        return _process_document(entry, clients, cfg, toolkit_cfg)

    if parallel > 1:
        with ThreadPoolExecutor(max_workers=parallel) as pool:
            records = list(pool.map(work, entries))
    else:
        records = [work(e) for e in entries]

    totals = {k: sum(r["stats"][k] for r in records) for k in ("explored", "synthesized", "validated", "accepted")}
    report = {
        "documents": len(records),
        **totals,
        "failed": [{"path": r["path"], **r["error"]} for r in records if "error" in r],
        "per_document": [
            {
                "doc_id": r.get("doc_id"),
                "path": r["path"],
                "source_tag": r["source_tag"],
                "exploration_steps": [len(x.steps) for x in r["explorations"]],
                **r["stats"],
                **({"error": r["error"]["type"]} if "error" in r else {}),
            }
            for r in records
        ],
    }
    return PipelineResult(
        dataset=[t for r in records for t in r["dataset"]],
        explorations=[x for r in records for x in r["explorations"]],
        qa_pairs=[q for r in records for q in r["qa"]],
        report=report,
    )


def write_pipeline_outputs(result: PipelineResult, out_dir) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "dataset": out / "dataset.jsonl",
        "explorations": out / "explorations.jsonl",
        "qa": out / "qa.jsonl",
        "report": out / "report.json",
    }

    def dump(path, rows):
        path.write_text("".join(json.dumps(r, ensure_ascii=False, sort_keys=True) + "\n" for r in rows), encoding="utf-8")

    dump(paths["dataset"], (t.to_dict() for t in result.dataset))
    dump(paths["explorations"], (x.to_dict() for x in result.explorations))
    dump(paths["qa"], (q.to_record() for q in result.qa_pairs))
    paths["report"].write_text(json.dumps(result.report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return paths


def read_dataset(path) -> list[TrainingTrajectory]:
    rows = []
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            rows.append(TrainingTrajectory.from_dict(json.loads(line)))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise SchemaMismatch(f"{path}: not a training trajectory record ({exc})", n) from exc
    return rows
