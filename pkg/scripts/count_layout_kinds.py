"""Count content kinds in a MinerU-style layout file without using the package.

    python3 scripts/count_layout_kinds.py tests/fixtures/netflix10k.mineru.json

Prints a JSON object ``{"pages": N, "kept": {kind: count}, "noise": {kind: count}}``.
Used by the tests as an independent check on ingest + outline building: the
outline's element kinds must equal ``kept`` exactly.
"""
import json
import sys
from collections import Counter

NOISE = {"header": "header", "footer": "footer", "page_number": "page_number"}
KEPT = {
    "title": "title", "text": "paragraph", "paragraph": "paragraph", "list": "list", "index": "toc_entry",
    "toc": "toc_entry", "table_body": "table", "table": "table", "table_caption": "table_caption",
    "table_footnote": "table_footnote", "image_body": "image", "image": "image", "image_caption": "image_caption",
    "image_footnote": "image_footnote", "chart_body": "chart", "chart": "chart", "chart_caption": "image_caption",
    "chart_footnote": "image_footnote", "interline_equation": "formula", "equation": "formula", "formula": "formula",
    "code": "code", "code_body": "code", "algorithm": "code", "page_footnote": "footnote", "footnote": "footnote",
}
GROUPS = {"image", "table", "chart", "code"}


def leaves(blocks):
    for b in blocks:
        if b.get("type") in GROUPS and b.get("blocks"):
            yield from b["blocks"]
        else:
            yield b


def count(doc: dict) -> dict:
    kept, noise = Counter(), Counter()
    for page in doc["pdf_info"]:
        blocks = list(leaves(page.get("para_blocks", []))) + list(leaves(page.get("discarded_blocks", [])))
        for b in blocks:
            label = b.get("type", "text")
            if label in NOISE:
                noise[NOISE[label]] += 1
            else:
                kept[KEPT.get(label, "paragraph")] += 1
    return {"pages": len(doc["pdf_info"]), "kept": dict(sorted(kept.items())), "noise": dict(sorted(noise.items()))}


if __name__ == "__main__":
    with open(sys.argv[1], encoding="utf-8") as fh:
        print(json.dumps(count(json.load(fh)), indent=2))
