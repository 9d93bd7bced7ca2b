"""Answer extraction plus rule-based and judge-based scoring."""
from __future__ import annotations

import collections
import json
import logging
import re
import string
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal, InvalidOperation
from pathlib import Path

from .errors import ExtractorUnavailable, JudgeUnavailable, ModelUnavailable, SchemaMismatch
from .prompts import fill, load_prompt

log = logging.getLogger(__name__)

GOLD_TYPES = ("integer", "number", "string", "list", "unanswerable")
UNANSWERABLE_FORMS = {"unanswerable", "not answerable", "cannot be answered"}


@dataclass(frozen=True)
class GoldAnswer:
    value: object
    type: str
    float_precision: int | None = None

    def __post_init__(self):
        if self.type not in GOLD_TYPES:
            raise ValueError(f"unknown gold type {self.type!r}")
        ok = {
            "integer": lambda v: isinstance(v, int) and not isinstance(v, bool),
            "number": lambda v: isinstance(v, (int, float, str)) and not isinstance(v, bool),
            "string": lambda v: isinstance(v, str),
            "list": lambda v: isinstance(v, (list, tuple)) and all(isinstance(x, str) for x in v),
            "unanswerable": lambda v: True,
        }[self.type](self.value)
        if not ok:
            raise ValueError(f"gold value {self.value!r} does not match type {self.type}")

    @classmethod
    def from_record(cls, rec: dict) -> "GoldAnswer":
        kind = rec.get("type") or infer_gold(str(rec["answer"])).type
        value = rec["answer"]
        if kind == "integer" and isinstance(value, str):
            value = int(value.replace(",", ""))
        if kind == "list" and isinstance(value, str):
            value = split_list_items(value)
        return cls(value, kind, rec.get("precision"))


_NUMBER_RE = re.compile(r"(?<![\w.])([-+−]?)\$?\s?(\d+(?:\.\d+)?|\.\d+)\s?(%|percent\b)?", re.I)
_THOUSANDS_RE = re.compile(r"(?<=\d),(?=\d{3}(?!\d))")


def _strip_thousands(s: str) -> str:
    return _THOUSANDS_RE.sub("", s)


def parse_number(text: str) -> tuple[Decimal, bool] | None:
    """First number in ``text`` as ``(value, is_percent)``; percent values are
    already divided by 100."""
    m = _NUMBER_RE.search(_strip_thousands(text))
    if not m:
        return None
    sign, digits, pct = m.groups()
    try:
        value = Decimal(digits)
    except InvalidOperation:
        return None
    if sign in ("-", "−"):
        value = -value
    if pct:
        return value / 100, True
    return value, False


def infer_gold(answer: str) -> GoldAnswer:
    """Typed gold answer for a free-text answer (used for synthesized QA)."""
    text = answer.strip()
    if normalize_answer(text) in UNANSWERABLE_FORMS:
        return GoldAnswer(text, "unanswerable")
    stripped = _strip_thousands(text).replace("$", "").strip()
    m = re.fullmatch(r"([-+]?\d+)(?:\.(\d+))?\s*(%)?", stripped)
    if m:
        whole, frac, pct = m.groups()
        if pct:
            places = len(frac or "") + 2
            value = Decimal(f"{whole}.{frac}" if frac else whole) / 100
            return GoldAnswer(format(value, "f"), "number", places)
        if frac is None:
            return GoldAnswer(int(whole), "integer")
        return GoldAnswer(f"{whole}.{frac}", "number", len(frac))
    return GoldAnswer(text, "string")


def normalize_answer(s: str) -> str:
    """Lower-case, drop punctuation and articles, collapse whitespace."""
    s = s.casefold()
    s = "".join(ch for ch in s if ch not in set(string.punctuation))
    s = re.sub(r"\b(a|an|the)\b", " ", s)
    return " ".join(s.split())


def split_list_items(text: str) -> list[str]:
    text = text.strip().strip("[]")
    parts = re.split(r",|;|\n|\band\b", text)
    return [p.strip().strip("'\"") for p in parts if p.strip().strip("'\"")]


def _string_match(pred: str, gold: str) -> bool:
    p, g = normalize_answer(pred), normalize_answer(gold)
    if not g or not p:
        return False
    return p == g or f" {g} " in f" {p} "


def _token_f1(pred: str, gold: str) -> float:
    p, g = normalize_answer(pred).split(), normalize_answer(gold).split()
    if not p or not g:
        return 0.0
    common = sum((collections.Counter(p) & collections.Counter(g)).values())
    if common == 0:
        return 0.0
    precision, recall = common / len(p), common / len(g)
    return 2 * precision * recall / (precision + recall)


def _quantize(value: Decimal, places: int) -> Decimal:
    return value.quantize(Decimal(1).scaleb(-places), rounding=ROUND_HALF_UP)


def _decimal_places(value) -> int:
    exp = Decimal(str(value)).normalize().as_tuple().exponent
    return max(0, -exp) if isinstance(exp, int) else 0


def rule_score(extracted: str, gold: GoldAnswer) -> tuple[bool, float]:
    """Return ``(correct, partial_f1)``; ``correct`` implies ``partial_f1 == 1``.

    Numbers are compared after rounding to the gold precision, accepting the
    extracted value, its hundredth or its hundredfold (so ``10.5%``,
    ``0.105`` and ``10.5`` all match a gold ``0.105``).
    """
    extracted = extracted or ""
    if gold.type == "unanswerable":
        ok = normalize_answer(extracted) in UNANSWERABLE_FORMS
        return ok, float(ok)
    if gold.type == "integer":
        parsed = parse_number(extracted)
        ok = parsed is not None and not parsed[1] and parsed[0] == parsed[0].to_integral_value() and int(parsed[0]) == gold.value
        return ok, float(ok)
    if gold.type == "number":
        parsed = parse_number(extracted)
        if parsed is None:
            return False, 0.0
        target = Decimal(str(gold.value))
        places = gold.float_precision if gold.float_precision is not None else _decimal_places(gold.value)
        want = _quantize(target, places)
        value = parsed[0]
        ok = any(_quantize(c, places) == want for c in (value, value / 100, value * 100))
        return ok, float(ok)
    if gold.type == "string":
        if _string_match(extracted, gold.value):
            return True, 1.0
        return False, _token_f1(extracted, gold.value)
    # list
    golds = list(gold.value)
    preds = split_list_items(extracted)
    if not golds or not preds:
        ok = not golds and not preds
        return ok, float(ok)
    unmatched = list(range(len(golds)))
    hits = 0
    for p in preds:
        for gi in unmatched:
            if _string_match(p, golds[gi]):
                unmatched.remove(gi)
                hits += 1
                break
    if hits == 0:
        return False, 0.0
    precision, recall = hits / len(preds), hits / len(golds)
    f1 = 2 * precision * recall / (precision + recall)
    return f1 == 1.0, f1


# --------------------------------------------------------------------------
# extraction

_BOLD_RE = re.compile(r"\*\*(.+?)\*\*|\\textbf\{([^}]*)\}", re.S)
_SENTENCE_SPLIT = re.compile(r"(?<=[.!?])\s+(?=[A-Z0-9\"'(*$])")
_PAREN_RE = re.compile(r"\([^()]*\)")
_NUM_TOKEN_RE = re.compile(r"[-+−]?\$?\d[\d,]*(?:\.\d+)?\s?%?|[-+−]?\.\d+\s?%?")


def _strip_think(text: str) -> str:
    if "</think>" in text:
        text = text.rsplit("</think>", 1)[1]
    return text.strip()


def regex_extract(response: str, gold_type: str | None = None) -> str:
    text = _strip_think(response)
    if not text:
        return ""
    bolds = [a or b for a, b in _BOLD_RE.findall(text)]
    if bolds and gold_type not in ("list",):
        return bolds[-1].strip()
    sentences = [s for s in _SENTENCE_SPLIT.split(text.replace("**", "")) if s.strip()]
    last = sentences[-1].strip() if sentences else text
    if gold_type in (None, "integer", "number"):
        nums = _NUM_TOKEN_RE.findall(_PAREN_RE.sub(" ", last)) or _NUM_TOKEN_RE.findall(last)
        if nums:
            return nums[-1].replace("$", "").strip()
    return last.rstrip(".!").strip()


def extract_answer(response: str, extractor=None, question: str = "", gold_type: str | None = None, notes: list | None = None) -> str:
    """Pull the short answer out of a free-form response.

    With an ``extractor`` client a prompt asks for the answer; if that client
    is unavailable the regex rule is used and ``ExtractorUnavailable`` is
    appended to ``notes``.
    """
    if extractor is not None:
        prompt = fill(load_prompt("extractor"), question=question, response=response)
        try:
            out = extractor.complete([{"role": "user", "content": prompt}])
            return _strip_think(out) or regex_extract(response, gold_type)
        except ModelUnavailable as exc:
            log.warning("extractor unavailable, using regex rule: %s", exc)
            if notes is not None:
                notes.append(f"ExtractorUnavailable: {exc}")
    return regex_extract(response, gold_type)


# --------------------------------------------------------------------------
# judge

_POSITIVE = {"CORRECT", "TRUE", "YES", "RIGHT"}
_NEGATIVE = {"INCORRECT", "WRONG", "FALSE", "NO"}


def parse_verdict(text: str) -> tuple[bool, bool]:
    """``(verdict, parsed)``; anything unrecognised is ``(False, False)``."""
    words = re.findall(r"[A-Za-z]+", _strip_think(text))
    if not words:
        return False, False
    first = words[0].upper()
    if first in _POSITIVE:
        return True, True
    if first in _NEGATIVE:
        return False, True
    return False, False


def judge_score(question: str, gold, prediction: str, judge, notes: list | None = None) -> bool:
    gold_text = ", ".join(gold.value) if isinstance(gold, GoldAnswer) and gold.type == "list" else (
        str(gold.value) if isinstance(gold, GoldAnswer) else str(gold)
    )
    prompt = fill(load_prompt("judge"), question=question, gold=gold_text, prediction=prediction)
    try:
        raw = judge.complete([{"role": "user", "content": prompt}])
    except ModelUnavailable as exc:
        raise JudgeUnavailable(str(exc)) from exc
    verdict, parsed = parse_verdict(raw)
    if not parsed and notes is not None:
        notes.append(f"unparsed verdict: {raw[:80]!r}")
    return verdict


# --------------------------------------------------------------------------
# aggregation


@dataclass(frozen=True)
class ItemScore:
    extracted: str
    correct: bool
    partial_f1: float
    lasj: bool | None = None
    flags: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        d = {"extracted": self.extracted, "correct": self.correct, "partial_f1": self.partial_f1}
        if self.lasj is not None:
            d["lasj"] = self.lasj
        if self.flags:
            d["flags"] = list(self.flags)
        return d


@dataclass(frozen=True)
class ScoreReport:
    items: tuple[ItemScore, ...]
    acc: float
    f1: float
    lasj: float | None = None
    flags: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "aggregate": {"acc": self.acc, "f1": self.f1, "lasj": self.lasj, "n": len(self.items)},
            "flags": list(self.flags),
            "items": [i.to_dict() for i in self.items],
        }


def aggregate(items) -> ScoreReport:
    items = tuple(items)
    if not items:
        return ScoreReport((), 0.0, 0.0, None, ("empty",))
    n = len(items)
    acc = sum(1.0 for i in items if i.correct) / n
    f1 = sum(i.partial_f1 for i in items) / n
    judged = [i.lasj for i in items if i.lasj is not None]
    lasj = sum(1.0 for v in judged if v) / len(judged) if judged else None
    return ScoreReport(items, acc, f1, lasj)


def score_item(prediction: str, gold: GoldAnswer, question: str = "", extractor=None, judge=None) -> ItemScore:
    notes: list[str] = []
    extracted = extract_answer(prediction, extractor, question, gold.type, notes)
    correct, f1 = rule_score(extracted, gold)
    lasj = None
    if judge is not None:
        lasj = judge_score(question, gold, prediction, judge, notes)
    return ItemScore(extracted, correct, f1, lasj, tuple(notes))


def _read_jsonl(path) -> list[tuple[int, dict]]:
    out = []
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaMismatch(f"{path}: invalid JSON ({exc.msg})", n) from exc
        if not isinstance(rec, dict):
            raise SchemaMismatch(f"{path}: expected an object", n)
        out.append((n, rec))
    return out


def score_files(pred_path, gold_path, extractor=None, judge=None) -> ScoreReport:
    """Score a predictions JSONL against a gold JSONL.

    Gold lines: ``{"question", "answer", "type", "precision"?, "id"?}``.
    Prediction lines: ``{"prediction", "id"?}``; matched by ``id`` when every
    line has one, else by position.
    """
    golds = []
    for n, rec in _read_jsonl(gold_path):
        if "answer" not in rec:
            raise SchemaMismatch(f"{gold_path}: missing 'answer'", n)
        try:
            golds.append((rec, GoldAnswer.from_record(rec)))
        except (ValueError, TypeError) as exc:
            raise SchemaMismatch(f"{gold_path}: {exc}", n) from exc
    preds = _read_jsonl(pred_path)
    for n, rec in preds:
        if not isinstance(rec.get("prediction", rec.get("response")), str):
            raise SchemaMismatch(f"{pred_path}: missing string 'prediction'", n)
    if not preds:
        return aggregate([])
    if all("id" in r for _, r in preds) and all("id" in g for g, _ in golds):
        by_id = {g["id"]: (g, ga) for g, ga in golds}
        pairs = []
        for n, r in preds:
            if r["id"] not in by_id:
                raise SchemaMismatch(f"{pred_path}: unknown id {r['id']!r}", n)
            pairs.append((r, *by_id[r["id"]]))
    else:
        if len(preds) > len(golds):
            raise SchemaMismatch(f"{pred_path}: {len(preds)} predictions for {len(golds)} gold answers", len(golds) + 1)
        pairs = [(r, g, ga) for (_, r), (g, ga) in zip(preds, golds)]
    items = [
        score_item(r.get("prediction", r.get("response")), ga, g.get("question", ""), extractor, judge)
        for r, g, ga in pairs
    ]
    return aggregate(items)
