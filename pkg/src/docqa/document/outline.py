"""Hierarchical outline construction and caption enrichment."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

from ..errors import ModelUnavailable
from .types import Element, ElementKind, Outline, ParsedDocument, SectionNode

log = logging.getLogger(__name__)

FRONT_MATTER_ID = "0"
FRONT_MATTER_TITLE = "(front matter)"

_CAPTION_FOR = {
    ElementKind.TABLE: ElementKind.TABLE_CAPTION,
    ElementKind.IMAGE: ElementKind.IMAGE_CAPTION,
    ElementKind.CHART: ElementKind.IMAGE_CAPTION,
}


@dataclass(frozen=True)
class OutlineOptions:
    max_levels: int = 4
    # distinct heights further apart than this (relative) start a new level
    gap_ratio: float = 0.15
    height_precision: int = 2


def cluster_title_levels(heights, max_levels: int = 4, gap_ratio: float = 0.15, precision: int = 2) -> dict[float, int]:
    """Map each distinct title height to a level; the largest height is level 1.

    Distinct heights are sorted descending and a new level starts wherever the
    relative drop from the previous height exceeds ``gap_ratio``. Levels past
    ``max_levels`` collapse into the last one.
    """
    distinct = sorted({round(float(h), precision) for h in heights}, reverse=True)
    levels: dict[float, int] = {}
    level = 1
    for i, h in enumerate(distinct):
        if i > 0:
            prev = distinct[i - 1]
            if prev > 0 and (prev - h) / prev > gap_ratio:
                level += 1
        levels[h] = min(level, max_levels)
    return levels


@dataclass
class _Open:
    section_id: str
    title: str
    level: int
    cluster_level: int
    elements: list = field(default_factory=list)
    children: list = field(default_factory=list)

    def freeze(self) -> SectionNode:
        children = tuple(c.freeze() for c in self.children)
        pages = [e.page_num for e in self.elements] + [p for c in children for p in c.page_span]
        span = (min(pages), max(pages)) if pages else (0, 0)
        return SectionNode(
            section_id=self.section_id,
            title=self.title,
            level=self.level,
            page_span=span,
            elements=tuple(_attach_captions(self.elements)),
            children=children,
        )


def _attach_captions(elements: list[Element]) -> list[Element]:
    """Give tables/images/charts the text of an adjacent caption block."""
    out = list(elements)
    claimed: set[int] = set()
    for i, el in enumerate(out):
        want = _CAPTION_FOR.get(el.kind)
        if want is None or el.caption is not None:
            continue
        for j in (i - 1, i + 1):
            if 0 <= j < len(out) and j not in claimed and out[j].kind is want:
                claimed.add(j)
                out[i] = replace(el, caption=out[j].text)
                break
    return out


def build_outline(doc: ParsedDocument, opts: OutlineOptions | None = None) -> Outline:
    opts = opts or OutlineOptions()
    blocks = [(p, b) for p, b in doc.iter_blocks() if not b.kind.structural_noise]
    levels = cluster_title_levels(
        (b.glyph_height for _, b in blocks if b.kind is ElementKind.TITLE),
        opts.max_levels,
        opts.gap_ratio,
        opts.height_precision,
    )

    roots: list[_Open] = []
    stack: list[_Open] = []
    front: _Open | None = None
    counters: dict[str, int] = {}

    for page_num, block in blocks:
        n = counters.get(block.kind.value, 0) + 1
        counters[block.kind.value] = n
        element = Element(
            element_id=f"{block.kind.value}-{n}",
            kind=block.kind,
            text=block.text,
            page_num=page_num,
            media_ref=block.media_ref,
            table_html=block.table_html,
            bbox=block.bbox,
        )
        if block.kind is ElementKind.TITLE:
            cluster = levels[round(block.glyph_height, opts.height_precision)]
            while stack and stack[-1].cluster_level >= cluster:
                stack.pop()
            if stack:
                parent = stack[-1]
                node = _Open(
                    f"{parent.section_id}.{len(parent.children) + 1}",
                    block.text,
                    parent.level + 1,
                    cluster,
                )
                parent.children.append(node)
            else:
                node = _Open(str(sum(1 for r in roots if r is not front) + 1), block.text, 1, cluster)
                roots.append(node)
            node.elements.append(element)
            stack.append(node)
        elif stack:
            stack[-1].elements.append(element)
        else:
            if front is None:
                front = _Open(FRONT_MATTER_ID, FRONT_MATTER_TITLE, 1, 0)
                roots.append(front)
            front.elements.append(element)

    if not roots:
        roots.append(_Open(FRONT_MATTER_ID, FRONT_MATTER_TITLE, 1, 0))

    frozen = [r.freeze() for r in roots]
    if not blocks and doc.pages:
        first = doc.pages[0].page_num
        frozen = [replace(frozen[0], page_span=(first, first))]
    screenshots = {p.page_num: p.screenshot_ref for p in doc.pages if p.screenshot_ref}
    return Outline.from_roots(doc.doc_id, frozen, screenshots)


CAPTION_GOAL = "Write a one-sentence caption describing this {kind}: what it shows, axis labels, units and key values."


def enrich_captions(outline: Outline, captioner) -> Outline:
    """Add generated captions to image/chart elements that have no caption.

    Elements already holding a caption or a generated caption are skipped, so
    re-running on an enriched outline makes no calls. If the captioner is
    unavailable the affected elements are left as they were and a note is
    recorded on the returned outline.
    """
    updates: dict[str, Element] = {}
    notes = []
    for section, el in outline.iter_elements():
        if not el.kind.visual or el.caption or el.generated_caption:
            continue
        context = f"Section {section.section_id}: {section.title}"
        try:
            text = captioner.summarize(CAPTION_GOAL.format(kind=el.kind.value), context, [el.media_ref])
        except ModelUnavailable as exc:
            log.warning("captioning %s failed: %s", el.element_id, exc)
            notes.append(f"caption failed for {el.element_id}: {exc}")
            continue
        text = " ".join(text.split())
        if text:
            updates[el.element_id] = replace(el, generated_caption=text)
    if not updates and not notes:
        return outline
    return outline.replace_elements(updates, notes)
