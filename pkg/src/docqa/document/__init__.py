from .ingest import FORMATS, classify_label, from_mineru, html_table_text, ingest_parsed
from .outline import (
    FRONT_MATTER_ID,
    OutlineOptions,
    build_outline,
    cluster_title_levels,
    enrich_captions,
)
from .types import (
    Block,
    Element,
    ElementKind,
    ElementLocator,
    Outline,
    PageLayout,
    ParsedDocument,
    SectionNode,
)
from .xmlio import parse_xml, serialize_xml, skeleton

__all__ = [
    "FORMATS",
    "FRONT_MATTER_ID",
    "Block",
    "Element",
    "ElementKind",
    "ElementLocator",
    "Outline",
    "OutlineOptions",
    "PageLayout",
    "ParsedDocument",
    "SectionNode",
    "build_outline",
    "classify_label",
    "cluster_title_levels",
    "enrich_captions",
    "from_mineru",
    "html_table_text",
    "ingest_parsed",
    "parse_xml",
    "serialize_xml",
    "skeleton",
]
