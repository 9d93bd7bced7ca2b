"""Adapters from layout-parser output to :class:`ParsedDocument`.

Two input formats are recognised:

``mineru_json``
    MinerU-style ``middle.json``: a ``pdf_info`` list of pages, each with
    ``page_idx``, ``page_size``, ``para_blocks`` and ``discarded_blocks``.
    Group blocks (``image``, ``table``, ``chart``, ``code``) carry nested
    ``blocks`` whose labels (``table_body``, ``image_caption``...) are
    flattened in order.

``neutral_json``
    The package's own interchange schema (``ParsedDocument.to_dict``),
    documented in ``docs/formats.md``.
"""
from __future__ import annotations

import json
import re
from pathlib import Path

from ..errors import MalformedLayout, UnknownFormat, UnreadableFile
from .types import Block, ElementKind, PageLayout, ParsedDocument

FORMATS = ("mineru_json", "neutral_json")

LABEL_MAP: dict[str, ElementKind] = {
    "title": ElementKind.TITLE,
    "text": ElementKind.PARAGRAPH,
    "paragraph": ElementKind.PARAGRAPH,
    "list": ElementKind.LIST,
    "index": ElementKind.TOC_ENTRY,
    "toc": ElementKind.TOC_ENTRY,
    "table_body": ElementKind.TABLE,
    "table": ElementKind.TABLE,
    "table_caption": ElementKind.TABLE_CAPTION,
    "table_footnote": ElementKind.TABLE_FOOTNOTE,
    "image_body": ElementKind.IMAGE,
    "image": ElementKind.IMAGE,
    "image_caption": ElementKind.IMAGE_CAPTION,
    "image_footnote": ElementKind.IMAGE_FOOTNOTE,
    "chart_body": ElementKind.CHART,
    "chart": ElementKind.CHART,
    "chart_caption": ElementKind.IMAGE_CAPTION,
    "chart_footnote": ElementKind.IMAGE_FOOTNOTE,
    "interline_equation": ElementKind.FORMULA,
    "equation": ElementKind.FORMULA,
    "formula": ElementKind.FORMULA,
    "code": ElementKind.CODE,
    "code_body": ElementKind.CODE,
    "algorithm": ElementKind.CODE,
    "page_footnote": ElementKind.FOOTNOTE,
    "footnote": ElementKind.FOOTNOTE,
    "header": ElementKind.HEADER,
    "footer": ElementKind.FOOTER,
    "page_number": ElementKind.PAGE_NUMBER,
}

_GROUP_LABELS = {"image", "table", "chart", "code"}
_TAG_RE = re.compile(r"<[^>]+>")
_CELL_END_RE = re.compile(r"</t[dh]>", re.I)
_ROW_END_RE = re.compile(r"</tr>", re.I)


def classify_label(label: str) -> ElementKind:
    """Map an upstream block label to the 17-kind taxonomy.

    ``discarded/<x>`` labels keep their sub-label; anything unknown becomes
    a paragraph.
    """
    label = label.strip().lower()
    if label.startswith("discarded/"):
        label = label.split("/", 1)[1]
    return LABEL_MAP.get(label, ElementKind.PARAGRAPH)


def html_table_text(html: str) -> str:
    """Flatten table markup into ``cell | cell`` rows for full-text search."""
    rows = []
    for row in _ROW_END_RE.split(html):
        cells = [_TAG_RE.sub("", c).strip() for c in _CELL_END_RE.split(row)]
        cells = [" ".join(c.split()) for c in cells if c.strip()]
        if cells:
            rows.append(" | ".join(cells))
    return "\n".join(rows)


def ingest_parsed(path, format: str = "mineru_json") -> ParsedDocument:
    if format not in FORMATS:
        raise UnknownFormat(f"unknown layout format {format!r}; expected one of {', '.join(FORMATS)}")
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError) as exc:
        raise UnreadableFile(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise MalformedLayout(f"{path}: invalid JSON ({exc})") from exc
    default_id = path.name.split(".", 1)[0]
    if format == "neutral_json":
        return _from_neutral(raw, str(path), default_id)
    return from_mineru(raw, source_path=str(path), default_doc_id=default_id)


def _from_neutral(raw, source_path: str, default_id: str) -> ParsedDocument:
    if not isinstance(raw, dict) or "pages" not in raw:
        raise MalformedLayout("neutral layout must be an object with a 'pages' list")
    raw = dict(raw)
    raw.setdefault("doc_id", default_id)
    raw.setdefault("source_path", source_path)
    try:
        return ParsedDocument.from_dict(raw)
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedLayout(f"neutral layout: {exc}") from exc


def from_mineru(raw, source_path: str = "", default_doc_id: str = "document") -> ParsedDocument:
    if not isinstance(raw, dict) or not isinstance(raw.get("pdf_info"), list):
        raise MalformedLayout("mineru layout must be an object with a 'pdf_info' list")
    pages = []
    for i, page in enumerate(raw["pdf_info"]):
        if "page_idx" not in page:
            raise MalformedLayout(f"pdf_info[{i}]: missing page_idx")
        if "page_size" not in page:
            raise MalformedLayout(f"pdf_info[{i}]: missing page_size")
        page_num = int(page["page_idx"]) + 1
        width, height = (float(v) for v in page["page_size"])
        blocks = []
        for label, b in _flatten(page.get("para_blocks", []), prefix=""):
            blocks.append(_to_block(label, b, page_num, width, height))
        for label, b in _flatten(page.get("discarded_blocks", []), prefix="discarded/"):
            blocks.append(_to_block(label, b, page_num, width, height))
        try:
            pages.append(
                PageLayout(
                    page_num=page_num,
                    width_px=width,
                    height_px=height,
                    blocks=tuple(blocks),
                    screenshot_ref=page.get("page_image"),
                )
            )
        except ValueError as exc:
            raise MalformedLayout(str(exc)) from exc
    try:
        return ParsedDocument(
            doc_id=raw.get("doc_id") or default_doc_id,
            pages=tuple(pages),
            source_path=source_path,
        )
    except ValueError as exc:
        raise MalformedLayout(str(exc)) from exc


def _flatten(blocks, prefix: str):
    for b in blocks:
        label = str(b.get("type", "text"))
        if label in _GROUP_LABELS and b.get("blocks"):
            for sub in b["blocks"]:
                yield prefix + str(sub.get("type", "text")), sub
        else:
            yield prefix + label, b


def _span_text(b: dict) -> str:
    if "text" in b:
        return " ".join(str(b["text"]).split())
    parts = []
    for line in b.get("lines", []):
        for span in line.get("spans", []):
            content = span.get("content")
            if content:
                parts.append(str(content))
    return " ".join(" ".join(parts).split())


def _find_span_key(b: dict, key: str) -> str | None:
    if b.get(key):
        return b[key]
    for line in b.get("lines", []):
        for span in line.get("spans", []):
            if span.get(key):
                return span[key]
    return None


def _line_height(b: dict) -> float | None:
    heights = [ln["bbox"][3] - ln["bbox"][1] for ln in b.get("lines", []) if ln.get("bbox")]
    if not heights:
        return None
    return sum(heights) / len(heights)


def _to_block(label: str, b: dict, page_num: int, width: float, height: float) -> Block:
    if "bbox" not in b:
        raise MalformedLayout(f"page {page_num}: block {label!r} has no bbox")
    try:
        x0, y0, x1, y1 = (float(v) for v in b["bbox"])
    except (TypeError, ValueError) as exc:
        raise MalformedLayout(f"page {page_num}: bad bbox {b['bbox']!r}") from exc
    # parsers overshoot page edges by a pixel or two
    bbox = (
        min(max(x0, 0.0), width),
        min(max(y0, 0.0), height),
        min(max(x1, 0.0), width),
        min(max(y1, 0.0), height),
    )
    kind = classify_label(label)
    table_html = None
    text = _span_text(b)
    if kind is ElementKind.TABLE:
        table_html = _find_span_key(b, "html")
        if table_html and not text:
            text = html_table_text(table_html)
    media_ref = _find_span_key(b, "image_path") if kind.visual else None
    if kind.visual and media_ref is None:
        raise MalformedLayout(f"page {page_num}: {kind.value} block without image_path")
    title_height = None
    if kind is ElementKind.TITLE:
        title_height = b.get("title_height")
        if title_height is None:
            title_height = _line_height(b)
    try:
        return Block(
            kind=kind,
            text=text,
            bbox=bbox,
            title_height=title_height,
            media_ref=media_ref,
            table_html=table_html,
        )
    except ValueError as exc:
        raise MalformedLayout(f"page {page_num}: {exc}") from exc
