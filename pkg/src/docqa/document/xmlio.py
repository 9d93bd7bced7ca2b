"""Outline <-> XML.

The XML is what the agent sees in its system prompt, so elements are stubs:
kind, id, page and caption text only. Full element text lives in the JSON
sidecar (``Outline.to_dict``).
"""
from __future__ import annotations

import re
import xml.etree.ElementTree as ET

from .types import Element, ElementKind, Outline, SectionNode

_XML_ILLEGAL = re.compile("[\x00-\x08\x0b\x0c\x0e-\x1f￾￿]")


def _clean(text: str) -> str:
    return _XML_ILLEGAL.sub("", text)


def _section_xml(node: SectionNode) -> ET.Element:
    attrs = {
        "section_id": node.section_id,
        "title": _clean(node.title),
        "level": str(node.level),
        "page": str(node.page_span[0]),
        "page_end": str(node.page_span[1]),
    }
    elements = list(node.elements)
    if elements and elements[0].kind is ElementKind.TITLE:
        attrs["title_id"] = elements[0].element_id
        elements = elements[1:]
    sec = ET.Element("section", attrs)
    for el in elements:
        ea = {"kind": el.kind.value, "element_id": el.element_id, "page_num": str(el.page_num)}
        if el.kind.is_caption:
            ea["text"] = _clean(el.text)
        if el.caption is not None:
            ea["caption"] = _clean(el.caption)
        if el.generated_caption is not None:
            ea["generated_caption"] = _clean(el.generated_caption)
        ET.SubElement(sec, "element", ea)
    for child in node.children:
        sec.append(_section_xml(child))
    return sec


def serialize_xml(outline: Outline) -> str:
    root = ET.Element("document", {"doc_id": outline.doc_id})
    for node in outline.roots:
        root.append(_section_xml(node))
    ET.indent(root, space="  ")
    return ET.tostring(root, encoding="unicode")


def _parse_section(sec: ET.Element) -> SectionNode:
    a = sec.attrib
    page = int(a["page"])
    elements = []
    if "title_id" in a:
        elements.append(Element(a["title_id"], ElementKind.TITLE, a["title"], page))
    children = []
    for child in sec:
        if child.tag == "element":
            ea = child.attrib
            kind = ElementKind(ea["kind"])
            elements.append(
                Element(
                    element_id=ea["element_id"],
                    kind=kind,
                    text=ea.get("text", ""),
                    page_num=int(ea["page_num"]),
                    caption=ea.get("caption"),
                    generated_caption=ea.get("generated_caption"),
                )
            )
        elif child.tag == "section":
            children.append(_parse_section(child))
    return SectionNode(
        section_id=a["section_id"],
        title=a["title"],
        level=int(a["level"]),
        page_span=(page, int(a["page_end"])),
        elements=tuple(elements),
        children=tuple(children),
    )


def parse_xml(text: str) -> Outline:
    root = ET.fromstring(text)
    if root.tag != "document":
        raise ValueError(f"expected <document>, got <{root.tag}>")
    return Outline.from_roots(root.attrib["doc_id"], (_parse_section(s) for s in root if s.tag == "section"))


def skeleton(outline: Outline) -> tuple:
    """The part of an outline the XML form preserves; used for round-trip checks."""

    def el(e: Element):
        text = e.text if (e.kind.is_caption or e.kind is ElementKind.TITLE) else ""
        return (e.element_id, e.kind.value, e.page_num, text, e.caption, e.generated_caption)

    def sec(n: SectionNode):
        return (
            n.section_id,
            n.title,
            n.level,
            tuple(n.page_span),
            tuple(el(e) for e in n.elements),
            tuple(sec(c) for c in n.children),
        )

    return (outline.doc_id, tuple(sec(r) for r in outline.roots))
