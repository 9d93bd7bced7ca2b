"""Layout-level and outline-level document types."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, NamedTuple


class ElementKind(str, Enum):
    TITLE = "title"
    PARAGRAPH = "paragraph"
    LIST = "list"
    TABLE = "table"
    TABLE_CAPTION = "table_caption"
    TABLE_FOOTNOTE = "table_footnote"
    IMAGE = "image"
    IMAGE_CAPTION = "image_caption"
    IMAGE_FOOTNOTE = "image_footnote"
    CHART = "chart"
    FORMULA = "formula"
    CODE = "code"
    FOOTNOTE = "footnote"
    HEADER = "header"
    FOOTER = "footer"
    PAGE_NUMBER = "page_number"
    TOC_ENTRY = "toc_entry"

    @property
    def structural_noise(self) -> bool:
        return self in _NOISE

    @property
    def visual(self) -> bool:
        return self in _VISUAL

    @property
    def is_caption(self) -> bool:
        return self in (ElementKind.TABLE_CAPTION, ElementKind.IMAGE_CAPTION)


_NOISE = frozenset({ElementKind.HEADER, ElementKind.FOOTER, ElementKind.PAGE_NUMBER})
_VISUAL = frozenset({ElementKind.IMAGE, ElementKind.CHART})

BBox = tuple[float, float, float, float]


@dataclass(frozen=True)
class Block:
    kind: ElementKind
    text: str = ""
    bbox: BBox = (0.0, 0.0, 0.0, 0.0)
    title_height: float | None = None
    media_ref: str | None = None
    table_html: str | None = None

    def __post_init__(self):
        if not isinstance(self.kind, ElementKind):
            object.__setattr__(self, "kind", ElementKind(self.kind))
        if self.kind.visual != (self.media_ref is not None):
            raise ValueError(f"{self.kind.value} block: media_ref must be present iff kind is visual")
        x0, y0, x1, y1 = self.bbox
        if x1 < x0 or y1 < y0:
            raise ValueError(f"inverted bbox {self.bbox}")

    @property
    def glyph_height(self) -> float:
        if self.title_height is not None:
            return float(self.title_height)
        return float(self.bbox[3] - self.bbox[1])

    def to_dict(self) -> dict:
        d: dict = {"kind": self.kind.value, "text": self.text, "bbox": list(self.bbox)}
        if self.title_height is not None:
            d["title_height"] = self.title_height
        if self.media_ref is not None:
            d["media_ref"] = self.media_ref
        if self.table_html is not None:
            d["table_html"] = self.table_html
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Block":
        return cls(
            kind=ElementKind(d["kind"]),
            text=d.get("text", ""),
            bbox=tuple(float(v) for v in d["bbox"]),
            title_height=d.get("title_height"),
            media_ref=d.get("media_ref"),
            table_html=d.get("table_html"),
        )


@dataclass(frozen=True)
class PageLayout:
    page_num: int
    width_px: float
    height_px: float
    blocks: tuple[Block, ...] = ()
    screenshot_ref: str | None = None

    def __post_init__(self):
        if self.page_num < 1:
            raise ValueError(f"page_num must be positive, got {self.page_num}")
        if self.width_px <= 0 or self.height_px <= 0:
            raise ValueError(f"page {self.page_num}: non-positive page size")
        for b in self.blocks:
            x0, y0, x1, y1 = b.bbox
            if x0 < 0 or y0 < 0 or x1 > self.width_px or y1 > self.height_px:
                raise ValueError(f"page {self.page_num}: bbox {b.bbox} outside page bounds")

    def to_dict(self) -> dict:
        d = {
            "page_num": self.page_num,
            "width_px": self.width_px,
            "height_px": self.height_px,
            "blocks": [b.to_dict() for b in self.blocks],
        }
        if self.screenshot_ref is not None:
            d["screenshot_ref"] = self.screenshot_ref
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PageLayout":
        return cls(
            page_num=int(d["page_num"]),
            width_px=float(d["width_px"]),
            height_px=float(d["height_px"]),
            blocks=tuple(Block.from_dict(b) for b in d.get("blocks", [])),
            screenshot_ref=d.get("screenshot_ref"),
        )


@dataclass(frozen=True)
class ParsedDocument:
    doc_id: str
    pages: tuple[PageLayout, ...] = ()
    source_path: str = ""

    def __post_init__(self):
        prev = 0
        for p in self.pages:
            if p.page_num <= prev:
                raise ValueError(f"page numbers must be strictly increasing (got {p.page_num} after {prev})")
            prev = p.page_num

    def iter_blocks(self) -> Iterator[tuple[int, Block]]:
        for page in self.pages:
            for block in page.blocks:
                yield page.page_num, block

    def kind_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for _, b in self.iter_blocks():
            counts[b.kind.value] = counts.get(b.kind.value, 0) + 1
        return counts

    def to_dict(self) -> dict:
        return {
            "format": "docqa-layout",
            "version": 1,
            "doc_id": self.doc_id,
            "source_path": self.source_path,
            "pages": [p.to_dict() for p in self.pages],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ParsedDocument":
        return cls(
            doc_id=d["doc_id"],
            pages=tuple(PageLayout.from_dict(p) for p in d.get("pages", [])),
            source_path=d.get("source_path", ""),
        )


@dataclass(frozen=True)
class Element:
    element_id: str
    kind: ElementKind
    text: str
    page_num: int
    caption: str | None = None
    generated_caption: str | None = None
    media_ref: str | None = None
    table_html: str | None = None
    bbox: BBox | None = None

    def searchable_text(self) -> str:
        """Text the search tool scans: own text plus any generated caption."""
        if self.generated_caption:
            return f"{self.text} {self.generated_caption}" if self.text else self.generated_caption
        return self.text

    def to_dict(self) -> dict:
        d: dict = {
            "element_id": self.element_id,
            "kind": self.kind.value,
            "text": self.text,
            "page_num": self.page_num,
        }
        for key in ("caption", "generated_caption", "media_ref", "table_html"):
            value = getattr(self, key)
            if value is not None:
                d[key] = value
        if self.bbox is not None:
            d["bbox"] = list(self.bbox)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Element":
        bbox = d.get("bbox")
        return cls(
            element_id=d["element_id"],
            kind=ElementKind(d["kind"]),
            text=d.get("text", ""),
            page_num=int(d["page_num"]),
            caption=d.get("caption"),
            generated_caption=d.get("generated_caption"),
            media_ref=d.get("media_ref"),
            table_html=d.get("table_html"),
            bbox=tuple(bbox) if bbox is not None else None,
        )


@dataclass(frozen=True)
class SectionNode:
    section_id: str
    title: str
    level: int
    page_span: tuple[int, int]
    elements: tuple[Element, ...] = ()
    children: tuple["SectionNode", ...] = ()

    def walk(self) -> Iterator["SectionNode"]:
        yield self
        for child in self.children:
            yield from child.walk()

    def all_elements(self) -> Iterator[Element]:
        """Own elements, then every descendant's, in document order."""
        for node in self.walk():
            yield from node.elements

    def to_dict(self) -> dict:
        return {
            "section_id": self.section_id,
            "title": self.title,
            "level": self.level,
            "page_span": list(self.page_span),
            "elements": [e.to_dict() for e in self.elements],
            "children": [c.to_dict() for c in self.children],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SectionNode":
        return cls(
            section_id=d["section_id"],
            title=d["title"],
            level=int(d["level"]),
            page_span=tuple(d["page_span"]),
            elements=tuple(Element.from_dict(e) for e in d.get("elements", [])),
            children=tuple(cls.from_dict(c) for c in d.get("children", [])),
        )


class ElementLocator(NamedTuple):
    section_id: str
    position: int
    page_num: int


@dataclass(frozen=True)
class Outline:
    doc_id: str
    roots: tuple[SectionNode, ...] = ()
    element_index: dict[str, ElementLocator] = field(default_factory=dict, compare=False)
    page_index: dict[int, tuple[str, ...]] = field(default_factory=dict, compare=False)
    screenshots: dict[int, str] = field(default_factory=dict)
    notes: tuple[str, ...] = ()
    _sections: dict[str, SectionNode] = field(default_factory=dict, compare=False, repr=False)

    @classmethod
    def from_roots(
        cls,
        doc_id: str,
        roots,
        screenshots: dict[int, str] | None = None,
        notes=(),
    ) -> "Outline":
        roots = tuple(roots)
        sections: dict[str, SectionNode] = {}
        element_index: dict[str, ElementLocator] = {}
        page_index: dict[int, list[str]] = {}
        for root in roots:
            for node in root.walk():
                if node.section_id in sections:
                    raise ValueError(f"duplicate section_id {node.section_id!r}")
                sections[node.section_id] = node
                for pos, el in enumerate(node.elements):
                    if el.element_id in element_index:
                        raise ValueError(f"duplicate element_id {el.element_id!r}")
                    element_index[el.element_id] = ElementLocator(node.section_id, pos, el.page_num)
                    ids = page_index.setdefault(el.page_num, [])
                    if node.section_id not in ids:
                        ids.append(node.section_id)
        return cls(
            doc_id=doc_id,
            roots=roots,
            element_index=element_index,
            page_index={p: tuple(v) for p, v in sorted(page_index.items())},
            screenshots=dict(screenshots or {}),
            notes=tuple(notes),
            _sections=sections,
        )

    def iter_sections(self) -> Iterator[SectionNode]:
        for root in self.roots:
            yield from root.walk()

    def iter_elements(self) -> Iterator[tuple[SectionNode, Element]]:
        for node in self.iter_sections():
            for el in node.elements:
                yield node, el

    def section(self, section_id: str) -> SectionNode | None:
        return self._sections.get(section_id)

    def element(self, element_id: str) -> Element | None:
        loc = self.element_index.get(element_id)
        if loc is None:
            return None
        return self._sections[loc.section_id].elements[loc.position]

    @property
    def is_empty(self) -> bool:
        return not self.roots

    def replace_elements(self, updates: dict[str, Element], notes=()) -> "Outline":
        """Copy of the outline with some elements swapped out (same ids)."""

        def rebuild(node: SectionNode) -> SectionNode:
            elements = tuple(updates.get(e.element_id, e) for e in node.elements)
            children = tuple(rebuild(c) for c in node.children)
            return SectionNode(node.section_id, node.title, node.level, node.page_span, elements, children)

        return Outline.from_roots(
            self.doc_id,
            (rebuild(r) for r in self.roots),
            self.screenshots,
            self.notes + tuple(notes),
        )

    def to_dict(self) -> dict:
        return {
            "format": "docqa-outline",
            "version": 1,
            "doc_id": self.doc_id,
            "roots": [r.to_dict() for r in self.roots],
            "element_index": {k: list(v) for k, v in self.element_index.items()},
            "page_index": {str(k): list(v) for k, v in self.page_index.items()},
            "screenshots": {str(k): v for k, v in sorted(self.screenshots.items())},
            "notes": list(self.notes),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Outline":
        return cls.from_roots(
            d["doc_id"],
            (SectionNode.from_dict(r) for r in d.get("roots", [])),
            {int(k): v for k, v in d.get("screenshots", {}).items()},
            d.get("notes", ()),
        )
