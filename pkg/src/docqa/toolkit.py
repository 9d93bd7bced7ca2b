"""The agent-facing ``search`` and ``read`` tools and tool-call dispatch."""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

import jsonschema

from .document.types import Element, ElementKind, Outline, SectionNode
from .errors import EmptyKeywords, ModelUnavailable

TOOL_NAMES = ("search", "read")

ITEM_TYPES = {
    ElementKind.TITLE: "Title",
    ElementKind.PARAGRAPH: "Paragraph",
    ElementKind.LIST: "List",
    ElementKind.TABLE: "HTML_Table",
    ElementKind.TABLE_CAPTION: "Table_Caption",
    ElementKind.TABLE_FOOTNOTE: "Table_Footnote",
    ElementKind.IMAGE: "Image",
    ElementKind.IMAGE_CAPTION: "Image_Caption",
    ElementKind.IMAGE_FOOTNOTE: "Image_Footnote",
    ElementKind.CHART: "Chart",
    ElementKind.FORMULA: "Formula",
    ElementKind.CODE: "Code",
    ElementKind.FOOTNOTE: "Footnote",
    ElementKind.TOC_ENTRY: "TOC_Entry",
}


@lru_cache(maxsize=None)
def tool_schema_text(name: str) -> str:
    """Schema document for ``name`` exactly as shipped (byte-stable)."""
    if name not in TOOL_NAMES:
        raise KeyError(name)
    return resources.files("docqa").joinpath("prompts", f"{name}_schema.json").read_text(encoding="utf-8")


def tool_schemas() -> list[dict]:
    return [json.loads(tool_schema_text(name)) for name in TOOL_NAMES]


@dataclass(frozen=True)
class ToolkitConfig:
    window: int = 300
    max_hits: int = 50
    evidence_chars: int = 8000
    summarizer_chars: int = 60000
    max_screenshots: int = 8


# --------------------------------------------------------------------------
# search


@dataclass(frozen=True)
class SearchHit:
    item_type: str
    section_id: str
    page_num: int
    snippet: str
    match_spans: tuple[tuple[int, int], ...]
    element_id: str = ""
    clipped_left: bool = False
    clipped_right: bool = False


def normalize_ws(text: str) -> str:
    return " ".join(text.split())


def section_sort_key(section_id: str) -> tuple:
    return tuple(int(p) if p.isdigit() else p for p in section_id.split("."))


def _clean_keywords(keywords) -> list[str]:
    if not keywords:
        raise EmptyKeywords("keywords must be a non-empty list")
    cleaned = []
    for kw in keywords:
        if not isinstance(kw, str) or not kw.strip():
            raise EmptyKeywords(f"blank keyword {kw!r}")
        cleaned.append(normalize_ws(kw))
    return cleaned


def _element_hits(section: SectionNode, el: Element, patterns, window: int) -> list[SearchHit]:
    text = normalize_ws(el.searchable_text())
    matches = sorted(
        {(m.start(), m.end()) for p in patterns for m in p.finditer(text)},
        key=lambda se: (se[0], -se[1]),
    )
    hits = []
    i = 0
    while i < len(matches):
        start, end = matches[i]
        lo, hi = max(0, start - window), min(len(text), end + window)
        spans = [(start - lo, end - start)]
        i += 1
        while i < len(matches) and matches[i][0] >= lo and matches[i][1] <= hi:
            spans.append((matches[i][0] - lo, matches[i][1] - matches[i][0]))
            i += 1
        hits.append(
            SearchHit(
                item_type=ITEM_TYPES[el.kind],
                section_id=section.section_id,
                page_num=el.page_num,
                snippet=text[lo:hi],
                match_spans=tuple(spans),
                element_id=el.element_id,
                clipped_left=lo > 0,
                clipped_right=hi < len(text),
            )
        )
    return hits


def search(outline: Outline, keywords, window: int = 300) -> list[SearchHit]:
    """Case-insensitive substring search, OR across keywords.

    Whitespace is collapsed in both text and keywords. Each element yields one
    hit per cluster of matches: a cluster is anchored at its first match and
    absorbs later matches that fall entirely inside that match's window.
    """
    kws = _clean_keywords(keywords)
    patterns = [re.compile(re.escape(kw), re.IGNORECASE) for kw in kws]
    hits = []
    for section, el in outline.iter_elements():
        hits.extend(_element_hits(section, el, patterns, window))
    # stable: document order is kept inside a (page, section) bucket
    hits.sort(key=lambda h: (h.page_num, section_sort_key(h.section_id)))
    return hits


def _page_attr(page: int) -> str:
    return f"{float(page):.1f}"


def render_search(keywords, hits: list[SearchHit], max_hits: int = 50) -> str:
    shown = hits[:max_hits]
    quoted = ", ".join(f"`{normalize_ws(k)}`" for k in keywords)
    if not hits:
        return f"A Document search for {quoted} found 0 results."
    head = f"A Document search for {quoted} found {len(hits)} results"
    head += f" (showing the first {len(shown)}):" if len(shown) < len(hits) else ":"
    lines = [head]
    for h in shown:
        attrs = f'type="{h.item_type}"'
        if h.item_type == "HTML_Table" and h.element_id.startswith("table-"):
            attrs += f' table_id="{h.element_id.split("-", 1)[1]}"'
        attrs += f' section_id="{h.section_id}" page_num="{_page_attr(h.page_num)}"'
        snippet = ("..." if h.clipped_left else "") + h.snippet + ("..." if h.clipped_right else "")
        lines.append(f"<Item {attrs}>\n{snippet}\n</Item>")
    if len(shown) < len(hits):
        lines.append(f"[{len(hits) - len(shown)} more results truncated; refine the keywords to narrow the search.]")
    return "\n".join(lines)


# --------------------------------------------------------------------------
# read


@dataclass(frozen=True)
class ReadResult:
    evidence: str
    summary: str
    sections_read: tuple[str, ...]
    goal: str
    unknown_ids: tuple[str, ...] = ()
    media_refs: tuple[str, ...] = ()
    error: str | None = None
    error_note: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def _evidence_line(el: Element) -> str:
    k = el.kind
    if k is ElementKind.TITLE:
        return f"Heading: {el.text}"
    if k is ElementKind.TABLE:
        body = el.table_html or el.text
        return f"<HTML_Table>\n{body}\n</HTML_Table>"
    if k in (ElementKind.TABLE_CAPTION, ElementKind.IMAGE_CAPTION):
        return f"Caption: {el.text}"
    if k in (ElementKind.TABLE_FOOTNOTE, ElementKind.IMAGE_FOOTNOTE, ElementKind.FOOTNOTE):
        return f"Footnote: {el.text}"
    if k.visual:
        line = f"{'Chart' if k is ElementKind.CHART else 'Image'}: {el.media_ref}"
        if el.generated_caption:
            line += f"\nGenerated caption: {el.generated_caption}"
        return line
    label = {
        ElementKind.PARAGRAPH: "Paragraph",
        ElementKind.LIST: "List",
        ElementKind.FORMULA: "Formula",
        ElementKind.CODE: "Code",
        ElementKind.TOC_ENTRY: "TOC",
    }[k]
    return f"{label}: {el.text}"


def gather_evidence(outline: Outline, section_ids, max_screenshots: int = 8):
    """Collect evidence text and media for the known ids among ``section_ids``.

    Returns ``(evidence, known, unknown, media_refs)``. A section's content
    includes its descendants; an element is emitted once even if requested
    through both a section and its ancestor.
    """
    known, unknown = [], []
    for sid in dict.fromkeys(section_ids):
        (known if outline.section(sid) is not None else unknown).append(sid)
    seen: set[str] = set()
    blocks, media, pages = [], [], []
    for sid in known:
        lines = []
        for el in outline.section(sid).all_elements():
            if el.element_id in seen:
                continue
            seen.add(el.element_id)
            lines.append(_evidence_line(el))
            if el.media_ref:
                media.append(el.media_ref)
            if el.page_num not in pages:
                pages.append(el.page_num)
        if lines:
            blocks.append("\n".join(lines))
    shots = [outline.screenshots[p] for p in sorted(pages) if p in outline.screenshots][:max_screenshots]
    return "\n\n".join(blocks), known, unknown, tuple(dict.fromkeys(media + shots))


def read(outline: Outline, section_ids, goal: str, summarizer, config: ToolkitConfig | None = None) -> ReadResult:
    if not isinstance(goal, str) or not goal.strip():
        raise ValueError("goal must be a non-empty string")
    config = config or ToolkitConfig()
    evidence, known, unknown, media = gather_evidence(outline, section_ids, config.max_screenshots)
    note = None
    if unknown or not known:
        note = "UnknownSectionId: " + (", ".join(unknown) if unknown else "no section IDs given")
    if not known:
        return ReadResult("", "", (), goal, tuple(unknown), (), "UnknownSectionId", note)
    try:
        summary = summarizer.summarize(goal, evidence[: config.summarizer_chars], list(media)).strip()
    except ModelUnavailable as exc:
        return ReadResult(
            evidence,
            f"Summary unavailable: the reading model could not be reached ({exc}).",
            tuple(known),
            goal,
            tuple(unknown),
            media,
            "SummarizerUnavailable",
            f"SummarizerUnavailable: {exc}",
        )
    if not summary:
        summary = "The reading model returned no summary for this goal."
    return ReadResult(evidence, summary, tuple(known), goal, tuple(unknown), media, "UnknownSectionId" if unknown else None, note)


def render_read(result: ReadResult, evidence_chars: int = 8000) -> str:
    if not result.sections_read:
        requested = ", ".join(result.unknown_ids) or "none"
        return (
            "No content was read: none of the requested section IDs exist in the document outline "
            f"(requested: {requested}). Use section IDs from the outline or from search results."
        )
    evidence = result.evidence
    if len(evidence) > evidence_chars:
        evidence = evidence[:evidence_chars] + "\n... [evidence truncated]"
    ids = ", ".join(result.sections_read)
    out = (
        f"The useful information from the document section (section_id={ids}) for user goal "
        f"`{result.goal}` is as follows:\nEvidence in document:\n{evidence}\nSummary:\n{result.summary}"
    )
    if result.unknown_ids:
        out += f"\nNote: unknown section IDs were skipped: {', '.join(result.unknown_ids)}."
    return out


# --------------------------------------------------------------------------
# dispatch


@dataclass(frozen=True)
class ToolCall:
    name: str
    arguments: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"name": self.name, "arguments": self.arguments}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False)

    def key(self) -> str:
        """Canonical identity used for duplicate detection."""
        return json.dumps(self.to_dict(), ensure_ascii=False, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "ToolCall":
        return cls(d["name"], dict(d.get("arguments", {})))


@dataclass(frozen=True)
class ToolResult:
    rendered: str
    ok: bool
    error_note: str | None = None
    payload: object = None


def _validate(call: ToolCall) -> str | None:
    schema = json.loads(tool_schema_text(call.name))["function"]["parameters"]
    errors = sorted(jsonschema.Draft7Validator(schema).iter_errors(call.arguments), key=lambda e: list(e.path))
    if not errors:
        return None
    required = ", ".join(schema["required"])
    detail = "; ".join(e.message for e in errors)
    return f"Error: invalid arguments for `{call.name}`: {detail}. Required fields: {required}."


def dispatch(call: ToolCall, outline: Outline, summarizer, config: ToolkitConfig | None = None) -> ToolResult:
    """Run one tool call; every outcome, including bad calls, renders as text."""
    config = config or ToolkitConfig()
    if call.name not in TOOL_NAMES:
        msg = f"Error: unknown tool `{call.name}`. Available tools are `search` and `read`."
        return ToolResult(msg, False, f"UnknownTool: {call.name}")
    if not isinstance(call.arguments, dict):
        msg = f"Error: arguments for `{call.name}` must be a JSON object."
        return ToolResult(msg, False, "InvalidArguments")
    problem = _validate(call)
    if problem:
        return ToolResult(problem, False, "InvalidArguments")
    args = call.arguments
    if call.name == "search":
        try:
            hits = search(outline, args["keywords"], config.window)
        except EmptyKeywords as exc:
            msg = f"Error: `search` needs at least one non-blank keyword ({exc})."
            return ToolResult(msg, False, f"EmptyKeywords: {exc}")
        return ToolResult(render_search(args["keywords"], hits, config.max_hits), True, None, hits)
    if not args["goal"].strip():
        return ToolResult("Error: `read` needs a non-empty goal describing what to extract.", False, "EmptyGoal")
    result = read(outline, args["section_ids"], args["goal"], summarizer, config)
    rendered = render_read(result, config.evidence_chars)
    return ToolResult(rendered, bool(result.sections_read) and result.error != "SummarizerUnavailable", result.error_note, result)


class Toolkit:
    """A document plus its reader model, ready to serve tool calls."""

    def __init__(self, outline: Outline, summarizer, config: ToolkitConfig | None = None):
        self.outline = outline
        self.summarizer = summarizer
        self.config = config or ToolkitConfig()

    @property
    def schemas(self) -> list[dict]:
        return tool_schemas()

    def dispatch(self, call: ToolCall) -> ToolResult:
        return dispatch(call, self.outline, self.summarizer, self.config)
