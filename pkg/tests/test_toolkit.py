import json

import jsonschema
import pytest
from hypothesis import given, settings

from docqa.agent_loop import parse_policy_output
from docqa.errors import EmptyKeywords, SummarizerUnavailable
from docqa.toolkit import (
    ToolCall,
    ToolkitConfig,
    dispatch,
    read,
    render_read,
    render_search,
    search,
    tool_schema_text,
    tool_schemas,
)

from conftest import FIXTURES, EchoSummarizer
from strategies import keywords_st, outlines


def naive_hits(outline, keywords):
    """Brute-force oracle: (section_id, page) of every element whose
    whitespace-collapsed text contains some keyword, ignoring case."""
    found = set()
    for section in outline.iter_sections():
        for el in section.elements:
            text = " ".join(el.searchable_text().split()).lower()
            if any(" ".join(k.split()).lower() in text for k in keywords):
                found.add((section.section_id, el.page_num))
    return found


# -- schemas -------------------------------------------------------------------


@pytest.mark.parametrize("name", ["search", "read"])
def test_schema_bytes_match_golden(name):
    golden = (FIXTURES / "golden" / f"{name}_schema.json").read_text(encoding="utf-8")
    assert tool_schema_text(name) == golden


def test_schema_required_fields():
    s, r = tool_schemas()
    assert s["function"]["name"] == "search" and s["function"]["parameters"]["required"] == ["keywords"]
    assert r["function"]["name"] == "read" and r["function"]["parameters"]["required"] == ["section_ids", "goal"]


LOOSE_CALLS = [
    '{ "arguments": "{ "keywords": ["advertising"] }", "name": "search" }',
    '{ "arguments": "{ "section_ids": ["8.81"], "goal": "Extract the advertising expense amount for 2015" }", "name": "read" }',
]


@pytest.mark.parametrize("payload", LOOSE_CALLS)
def test_loose_payloads_validate(payload):
    call = parse_policy_output(f"<tool_call>\n{payload}\n</tool_call>").action
    schema = next(s for s in tool_schemas() if s["function"]["name"] == call.name)
    jsonschema.validate(call.arguments, schema["function"]["parameters"])


# -- search --------------------------------------------------------------------


def test_search_advertising(netflix_outline):
    hits = search(netflix_outline, ["advertising"])
    assert len(hits) == 6
    target = [h for h in hits if h.section_id == "8.81"]
    assert len(target) == 1 and target[0].page_num == 47 and target[0].item_type == "Paragraph"
    assert "Advertising expenses were $714.3 million" in target[0].snippet
    rendered = render_search(["advertising"], hits)
    assert rendered.startswith("A Document search for `advertising` found 6 results:\n")
    assert '<Item type="Paragraph" section_id="8.81" page_num="47.0">' in rendered


def test_search_table_item(netflix_outline):
    rendered = render_search(["Revenues"], search(netflix_outline, ["Revenues"]))
    assert '<Item type="HTML_Table" table_id="5" section_id="8.20" page_num="19.0">' in rendered
    assert "$ 6,779,511" in rendered


def test_search_no_match(netflix_outline):
    assert search(netflix_outline, ["zzzqx"]) == []
    assert render_search(["zzzqx"], []) == "A Document search for `zzzqx` found 0 results."


@pytest.mark.parametrize("bad", [[], [""], ["  "], ["ok", " \n"], [3]])
def test_search_empty_keywords(netflix_outline, bad):
    with pytest.raises(EmptyKeywords):
        search(netflix_outline, bad)


def test_search_order_and_or_semantics(netflix_outline):
    hits = search(netflix_outline, ["advertising", "Revenues"])
    keys = [(h.page_num, tuple(int(p) for p in h.section_id.split("."))) for h in hits]
    assert keys == sorted(keys)
    assert len(hits) == len(search(netflix_outline, ["advertising"])) + len(search(netflix_outline, ["Revenues"]))


def test_search_whitespace_and_case(netflix_outline):
    a = search(netflix_outline, ["ADVERTISING   EXPENSES"])
    b = search(netflix_outline, ["advertising expenses"])
    assert [(h.section_id, h.page_num) for h in a] == [(h.section_id, h.page_num) for h in b] != []


def test_hit_cap_applied_at_render(netflix_outline):
    hits = search(netflix_outline, ["the"])
    assert len(hits) > 10
    text = render_search(["the"], hits, max_hits=10)
    assert text.count("<Item ") == 10
    assert f"found {len(hits)} results (showing the first 10):" in text
    assert "more results truncated" in text


def test_cluster_windows():
    from docqa.document import Block, ElementKind, PageLayout, ParsedDocument, build_outline

    text = "kw " + "x" * 50 + " kw " + "y" * 400 + " kw"
    doc = ParsedDocument("c", (PageLayout(1, 10, 10, (Block(ElementKind.PARAGRAPH, text, (0, 0, 1, 1)),)),))
    hits = search(build_outline(doc), ["kw"], window=100)
    # first two matches share a window, the third is 400+ chars away
    assert len(hits) == 2
    assert len(hits[0].match_spans) == 2 and len(hits[1].match_spans) == 1
    assert not hits[0].clipped_left and hits[0].clipped_right and hits[1].clipped_left


@settings(max_examples=300, deadline=None)
@given(outlines(), keywords_st)
def test_search_matches_naive_oracle(outline, keywords):
    hits = search(outline, keywords)
    assert {(h.section_id, h.page_num) for h in hits} == naive_hits(outline, keywords)


@settings(max_examples=200, deadline=None)
@given(outlines(), keywords_st)
def test_snippet_window_bound(outline, keywords):
    window = 20
    longest = max(len(" ".join(k.split())) for k in keywords)
    for h in search(outline, keywords, window=window):
        assert len(h.snippet) <= 2 * window + longest
        for start, length in h.match_spans:
            assert 0 <= start and start + length <= len(h.snippet)


# -- read ----------------------------------------------------------------------


def test_read_8_81(netflix_outline):
    summ = EchoSummarizer("The advertising expense amount for 2015 is $714.3 million.")
    result = read(netflix_outline, ["8.81"], "Extract the advertising expense amount for 2015", summ)
    assert result.ok and "$714.3 million" in result.summary
    assert "Advertising expenses were $714.3 million" in result.evidence
    goal, text, media = summ.calls[0]
    assert goal == "Extract the advertising expense amount for 2015"
    assert media == ["pages/p047.png"]


def test_read_8_60_evidence(netflix_outline):
    result = read(netflix_outline, ["8.60"], "Extract the revenue amount for 2015", EchoSummarizer())
    ev = result.evidence
    assert ev.startswith("Heading: NETFLIX, INC.\nParagraph: CONSOLIDATED STATEMENTS OF OPERATIONS\n<HTML_Table>\n")
    assert "$ 6,779,511" in ev
    assert "Caption: (in thousands, except per share data)" in ev
    rendered = render_read(result)
    assert rendered.startswith(
        "The useful information from the document section (section_id=8.60) for user goal "
        "`Extract the revenue amount for 2015` is as follows:\nEvidence in document:\n"
    )
    assert "\nSummary:\nsummary" in rendered


def test_read_visual_media(netflix_outline):
    summ = EchoSummarizer()
    result = read(netflix_outline, ["8.65"], "Describe the chart", summ)
    assert "Chart: charts/p040_contribution_margin.png" in result.evidence
    assert summ.calls[0][2] == ["charts/p040_contribution_margin.png", "pages/p040.png"]


def test_read_unknown_ids(netflix_outline):
    result = read(netflix_outline, ["8.81", "99.9"], "goal", EchoSummarizer())
    assert result.sections_read == ("8.81",)
    assert result.unknown_ids == ("99.9",)
    assert "UnknownSectionId" in result.error_note and "99.9" in result.error_note
    assert "Advertising expenses were" in result.evidence
    empty = read(netflix_outline, [], "goal", EchoSummarizer())
    assert empty.sections_read == () and empty.error == "UnknownSectionId"


def test_read_parent_includes_descendants_once(netflix_outline):
    summ = EchoSummarizer()
    both = read(netflix_outline, ["3", "3.19"], "goal", summ).evidence
    assert both.count("adjust pricing or service offerings") == 1
    assert "Heading: Item 1. Business" in both


def test_read_summarizer_unavailable(netflix_outline):
    class Down:
        def summarize(self, *a):
            raise SummarizerUnavailable("offline")

    result = read(netflix_outline, ["8.81"], "goal", Down())
    assert "Advertising expenses were" in result.evidence
    assert result.summary.startswith("Summary unavailable")
    assert result.error == "SummarizerUnavailable"


def test_read_empty_goal(netflix_outline):
    with pytest.raises(ValueError):
        read(netflix_outline, ["8.81"], "  ", EchoSummarizer())


# -- dispatch ------------------------------------------------------------------


def test_dispatch_search(netflix_outline):
    r = dispatch(ToolCall("search", {"keywords": ["advertising"]}), netflix_outline, EchoSummarizer())
    assert r.ok and r.rendered.startswith("A Document search for `advertising` found 6 results:")


def test_dispatch_unknown_tool(netflix_outline):
    r = dispatch(ToolCall("fetch", {}), netflix_outline, EchoSummarizer())
    assert not r.ok and "`search`" in r.rendered and "`read`" in r.rendered


def test_dispatch_missing_goal(netflix_outline):
    r = dispatch(ToolCall("read", {"section_ids": ["8.81"]}), netflix_outline, EchoSummarizer())
    assert not r.ok and "goal" in r.rendered and "Required fields: section_ids, goal" in r.rendered


@pytest.mark.parametrize(
    "call",
    [
        ToolCall("search", {"keywords": []}),
        ToolCall("search", {"keywords": [" "]}),
        ToolCall("search", {"keywords": "advertising"}),
        ToolCall("read", {"section_ids": [], "goal": "g"}),
        ToolCall("read", {"section_ids": ["x"], "goal": ""}),
        ToolCall("read", {"section_ids": "8.81", "goal": "g"}),
        ToolCall("", {}),
    ],
)
def test_dispatch_total(netflix_outline, call):
    r = dispatch(call, netflix_outline, EchoSummarizer())
    assert r.rendered.strip() and not r.ok


def test_evidence_truncation(netflix_outline):
    cfg = ToolkitConfig(evidence_chars=50)
    r = dispatch(ToolCall("read", {"section_ids": ["8"], "goal": "g"}), netflix_outline, EchoSummarizer(), cfg)
    assert "[evidence truncated]" in r.rendered
    assert r.payload.evidence.count("Heading:") > 100  # full evidence still kept in the payload
