"""Generate the synthetic test fixtures under tests/fixtures/.

    python3 scripts/make_fixtures.py [--out tests/fixtures]

Everything here is hand-designed data: a 73-page annual-report-like layout
document (MinerU ``middle.json`` shape), scripted model scenarios replaying
the financial case study and the synthesis case study, and a 3-document
corpus for the synthesis pipeline. Output is deterministic.
"""
from __future__ import annotations

import argparse
import json
from pathlib import Path

PAGE_W, PAGE_H = 612.0, 792.0
ROOT_H, SUB_H = 20.0, 14.0


# --------------------------------------------------------------------------
# MinerU block builders


class Page:
    def __init__(self, idx: int):
        self.idx = idx
        self.blocks: list[dict] = []
        self.y = 60.0

    def _box(self, h: float) -> list[float]:
        y0 = min(self.y, PAGE_H - 80 - h)
        self.y += h + 6
        return [54.0, round(y0, 1), 558.0, round(y0 + h, 1)]

    def title(self, text: str, height: float):
        box = self._box(height + 4)
        line = {"bbox": [box[0], box[1], box[2], box[1] + height], "spans": [{"type": "text", "content": text}]}
        self.blocks.append({"type": "title", "bbox": box, "lines": [line]})

    def text(self, text: str, label: str = "text"):
        h = 12.0 * (len(text) // 90 + 1)
        box = self._box(h)
        self.blocks.append({"type": label, "bbox": box, "lines": [{"bbox": box, "spans": [{"type": "text", "content": text}]}]})

    def table(self, html: str, caption: str | None = None, caption_first: bool = False):
        body_box = self._box(110)
        body = {"type": "table_body", "bbox": body_box, "lines": [{"bbox": body_box, "spans": [{"type": "table", "html": html}]}]}
        parts = [body]
        if caption is not None:
            cap_box = self._box(12)
            cap = {"type": "table_caption", "bbox": cap_box, "lines": [{"bbox": cap_box, "spans": [{"type": "text", "content": caption}]}]}
            parts = [cap, body] if caption_first else [body, cap]
        self.blocks.append({"type": "table", "bbox": [54.0, body_box[1], 558.0, self.y], "blocks": parts})

    def visual(self, kind: str, path: str, caption: str | None = None):
        box = self._box(160)
        body = {"type": f"{kind}_body", "bbox": box, "lines": [{"bbox": box, "spans": [{"type": kind, "image_path": path}]}]}
        parts = [body]
        if caption is not None:
            cap_box = self._box(12)
            parts.append({"type": f"{kind}_caption", "bbox": cap_box, "lines": [{"bbox": cap_box, "spans": [{"type": "text", "content": caption}]}]})
        self.blocks.append({"type": kind, "bbox": [54.0, box[1], 558.0, self.y], "blocks": parts})

    def to_dict(self, header: str) -> dict:
        n = self.idx + 1
        discarded = [
            {"type": "header", "bbox": [54.0, 20.0, 558.0, 32.0], "lines": [{"spans": [{"content": header}]}]},
            {"type": "footer", "bbox": [54.0, 740.0, 400.0, 752.0], "lines": [{"spans": [{"content": "Annual Report on Form 10-K"}]}]},
            {"type": "page_number", "bbox": [290.0, 760.0, 322.0, 772.0], "lines": [{"spans": [{"content": str(n)}]}]},
        ]
        return {
            "page_idx": self.idx,
            "page_size": [PAGE_W, PAGE_H],
            "page_image": f"pages/p{n:03d}.png",
            "para_blocks": self.blocks,
            "discarded_blocks": discarded,
        }


def _row(cells, tag="td") -> str:
    return "<tr>" + "".join(f"<{tag}>{c}</{tag}>" for c in cells) + "</tr>"


def _table(header, rows) -> str:
    return "<table>" + _row(header) + "".join(_row(r) for r in rows) + "</table>"


# --------------------------------------------------------------------------
# the 73-page financial document

# Exactly six elements mention "advertising"; each forms a single search hit.
ADVERTISING = {
    ("3", 19): "Competitors may force us to adjust pricing or service offerings, and to increase spending on advertising and promotion to retain members.",
    ("4", 3): "If our advertising and member acquisition efforts fail to attract new members, our growth could slow.",
    ("8", 35): "Marketing expenses increased in 2015 due primarily to higher advertising expenses and payments to device partners.",
    ("8", 40): "Payments to consumer electronics partners are included in marketing alongside advertising costs.",
    ("8", 81): (
        "Marketing expenses consist primarily of advertising expenses and certain payments made to our marketing partners. "
        "Advertising costs are expensed as incurred. Advertising expenses were $714.3 million, $533.1 million and "
        "$404.0 million for the years ended December 31, 2015, 2014 and 2013, respectively."
    ),
    ("8", 95): "Promotional advertising commitments for 2016 are not expected to exceed historical levels.",
}

BUSINESS_SUBS = [
    "Overview", "Our Strategy", "Streaming Service", "DVD Service", "Content", "Technology", "Members", "Segments",
    "Revenues", "Competition", "Seasonality", "Intellectual Property", "Employees", "Other Information",
    "Available Information", "Pricing", "Marketing", "Partnerships", "Competitive Pressure", "Regulation",
    "Privacy", "Content Delivery", "Executive Officers",
]
BUSINESS_PAGES = [3] * 9 + [4] * 6 + [5] * 4 + [6] * 2 + [7, 8]

RISK_SUBS = [
    "Member Growth", "Content Costs", "Member Acquisition", "Competition Risks", "Licensing", "Original Programming",
    "International Expansion", "Technology Risks", "Regulatory Risks", "Indebtedness",
]
RISK_PAGES = [9, 9, 10, 10, 11, 11, 12, 12, 13, 13]


def mdna_page(k: int) -> int:
    if k <= 12:
        return 18
    if k <= 22:
        return 19
    if k <= 59:
        return 20 + (k - 23) * 18 // 37
    if k <= 61:
        return 38
    if k <= 64:
        return 39
    if k == 65:
        return 40
    if k == 66:
        return 41
    if k <= 80:
        return 42 + (k - 67) * 5 // 14
    if k == 81:
        return 47
    if k <= 83:
        return 48
    if k == 84:
        return 49
    return 50 + (k - 85) * 24 // 26


MDNA_COUNT = 110
MDNA_TITLES = {
    5: "Streaming Membership",
    20: "Results of Operations",
    35: "Marketing",
    40: "Partner Payments",
    60: "NETFLIX, INC.",
    65: "Contribution Margin Trends",
    66: "Domestic Streaming Segment",
    81: "Marketing Expenses",
    84: "International Streaming Segment",
    95: "Commitments",
}

REVENUE_ROWS = [
    ["Revenues", "$ 6,779,511", "$ 5,504,656", "$ 4,374,562"],
    ["Cost of revenues", "4,591,476", "3,752,760", "3,117,203"],
    ["Marketing", "824,092", "607,186", "469,942"],
    ["Technology and development", "650,788", "472,321", "378,769"],
    ["General and administrative", "407,329", "269,741", "180,301"],
    ["Operating income", "305,826", "402,648", "228,347"],
]
YEARS = ["", "2015", "2014", "2013"]


def _filler(section_id: str, title: str) -> str:
    return (
        f"This part ({title.lower()}) summarizes matters relevant to the fiscal year ended December 31, 2015 "
        f"and is referenced as item {section_id} in the internal index."
    )


def netflix_document() -> dict:
    pages = [Page(i) for i in range(73)]

    def page(n: int) -> Page:
        return pages[n - 1]

    # front matter, no title yet
    p = page(1)
    p.text("UNITED STATES SECURITIES AND EXCHANGE COMMISSION")
    p.text("FORM 10-K")
    p.text("NETFLIX, INC. (Exact name of registrant as specified in its charter)")
    p.text("For the fiscal year ended December 31, 2015")

    p = page(2)
    p.title("Table of Contents", ROOT_H)
    for entry in ("Part I, Item 1. Business", "Item 1A. Risk Factors", "Item 2. Properties", "Part II, Item 5. Market",
                  "Item 6. Selected Financial Data", "Item 7. Management's Discussion and Analysis"):
        p.text(entry, label="index")
    p.title("Cautionary Note Regarding Forward-Looking Statements", ROOT_H)
    p.text("This report contains forward-looking statements that involve risks and uncertainties.")

    # 3: business
    page(3).title("Item 1. Business", ROOT_H)
    for i, (name, pg) in enumerate(zip(BUSINESS_SUBS, BUSINESS_PAGES), 1):
        p = page(pg)
        p.title(name, SUB_H)
        if ("3", i) in ADVERTISING:
            p.text(ADVERTISING[("3", i)])
        elif name == "Revenues":
            p.text("Revenues are generated primarily from monthly membership fees for streaming and DVD-by-mail services.")
        else:
            p.text(_filler(f"3.{i}", name))
        if name == "Available Information":
            p.table(_table(["", "2015", "2014"], [["Paid memberships (in thousands)", "74,762", "57,391"]]), "Membership statistics", caption_first=True)
        if name == "Executive Officers":
            p.visual("image", "images/p008_headquarters.png", "Corporate headquarters in Los Gatos, California")

    # 4: risk factors
    page(9).title("Item 1A. Risk Factors", ROOT_H)
    for i, (name, pg) in enumerate(zip(RISK_SUBS, RISK_PAGES), 1):
        p = page(pg)
        p.title(name, SUB_H)
        p.text(ADVERTISING.get(("4", i)) or _filler(f"4.{i}", name))

    # 5, 6, 7
    p = page(14)
    p.title("Item 2. Properties", ROOT_H)
    p.text("Our corporate headquarters are located in Los Gatos, California, where we lease office space.")
    p = page(15)
    p.title("Item 5. Market for Registrant's Common Equity", ROOT_H)
    p.title("Market Information", SUB_H)
    p.table(_table(["Quarter", "High", "Low"], [["First", "$ 69.50", "$ 45.69"], ["Second", "$ 100.89", "$ 58.46"]]))
    p.title("Stock Performance Graph", SUB_H)
    p.visual("chart", "charts/p015_total_return.png", "Comparison of cumulative total return")
    p = page(16)
    p.title("Item 6. Selected Financial Data", ROOT_H)
    p.table(_table(YEARS, REVENUE_ROWS[:1] + REVENUE_ROWS[-1:]), "Consolidated statements of operations data", caption_first=True)
    p = page(17)
    p.title("Key Metrics", SUB_H)
    p.text("Net membership additions and paid memberships are the key metrics we use to evaluate the business.")

    # 8: MD&A and financial statements
    page(18).title("Item 7. Management's Discussion and Analysis of Financial Condition and Results of Operations", ROOT_H)
    for k in range(1, MDNA_COUNT + 1):
        p = page(mdna_page(k))
        name = MDNA_TITLES.get(k, f"Discussion Topic {k}")
        p.title(name, SUB_H)
        sid = f"8.{k}"
        if ("8", k) in ADVERTISING:
            p.text(ADVERTISING[("8", k)])
        elif k == 5:
            p.table(_table(YEARS, [["Paid memberships at end of period", "44,738", "37,698", "31,712"]]))
        elif k == 20:
            p.text("The following table presents consolidated results for the last three years.")
            p.table(_table(YEARS, REVENUE_ROWS[:1] + [["Operating margin", "4.5 %", "7.3 %", "5.2 %"]]))
        elif k == 60:
            p.text("CONSOLIDATED STATEMENTS OF OPERATIONS")
            p.table(_table(YEARS, REVENUE_ROWS), "(in thousands, except per share data)")
        elif k == 65:
            p.text("The chart below shows domestic streaming contribution margin for 2013 through 2015.")
            p.visual("chart", "charts/p040_contribution_margin.png")
        elif k == 66:
            p.table(_table(YEARS, [["Contribution profit", "$ 1,375,500", "$ 1,258,958", "$ 889,320"],
                                   ["Contribution margin", "29.92%", "26.84%", "23.10%"]]))
        elif k == 84:
            p.text("Management targets a long-term contribution margin of 15% for the international streaming segment.")
        else:
            p.text(_filler(sid, name))

    return {"_backend": "pipeline", "_version_name": "synthetic", "pdf_info": [pg.to_dict("NETFLIX, INC.") for pg in pages]}


# --------------------------------------------------------------------------
# scripted scenarios

QUESTION = "What is advertising expense to sales ratio of Netflix in FY 2015? Round your answer to three decimal places."


def _think(text: str) -> str:
    return f"<think>\n{text}\n</think>\n\n"


def netflix_ask_scenario() -> dict:
    policy = [
        _think(
            "We need to answer: \"what is advertising expense to sales ratio of Netflix in FY 2015? Round your answer to three "
            "decimal places.\" We need to locate advertising expense and sales (revenues) for FY 2015. From outline we have "
            "various sections. First, find advertising expense. The term \"advertising\" appears in sections. Search for "
            "\"advertising\"."
        )
        + '<tool_call>\n{ "arguments": "{ "keywords": ["advertising"] }", "name": "search" }\n</tool_call>',
        _think(
            "One of the results is in section_id \"8.81\" paragraph page_num \"47.0\". It says: \"Advertising expenses were "
            "$714.3 million, $533.1 million and $404.0 million for the years ended December 31, 2015, 2014 and 2013, "
            "respectively.\" Thus advertising expense FY 2015 = $714.3 million.\nNow sales (revenues) for FY 2015: In "
            "consolidated statements of operations (section 8.60) we have revenues $6,779,511 (in thousands). That's "
            "$6,779,511 thousand = $6,779.511 million.\nAlternatively, there may be a line item \"Revenues\" in Table 5 etc. "
            "Let's locate \"Revenues\"."
        )
        + '<tool_call>\n{ "arguments": "{ "keywords": ["Revenues"] }", "name": "search" }\n</tool_call>',
        _think(
            "We have advertising expense: $714.3 million (2015). We need to compute ratio = advertising expense / revenue. "
            "Revenue for 2015: $6,779,511 thousand = $6,779.511 million. Thus ratio = 714.3 / 6,779.511 = ? ... First, we "
            "should cite sources: advertising expense paragraph (8.81) and revenue table.\nLet's extract the advertising "
            "expense paragraph text to be sure."
        )
        + '<tool_call>\n{ "arguments": "{ "section_ids": ["8.81"], "goal": "Extract the advertising expense amount for 2015" }", "name": "read" }\n</tool_call>',
        _think(
            "I have successfully extracted and verified the advertising expense ($714.3 million) from section 8.81. Now, I "
            "need to formally verify the total revenue for 2015 to serve as the denominator. The search results in Step 2 "
            "indicated that section 8.60 contains the \"Consolidated Statements of Operations,\" which is the authoritative "
            "source for revenue figures. I will read section 8.60 to extract the exact revenue amount for the year ended "
            "December 31, 2015."
        )
        + '<tool_call>\n{ "arguments": "{ "section_ids": ["8.60"], "goal": "Extract the revenue amount for 2015" }", "name": "read" }\n</tool_call>',
        "Netflix’s advertising expense for fiscal 2015 was **$714.3 million** [8.81], and its total revenue for the same "
        "year was **$6,779,511 thousand** (i.e., **$6,779.511 million**) [8.60].\n"
        "Advertising-to-sales ratio = 714.3 / 6,779.511 ≈ 0.10536.\n"
        "Rounded to three decimal places, the ratio is **0.105** (or 10.5%).",
    ]
    summarizer = [
        "The advertising expense amount for 2015 is $714.3 million, as stated in the marketing expenses note.",
        "The revenue amount for 2015 is $6,779,511, as explicitly stated in the 'Revenues' row of the 'CONSOLIDATED "
        "STATEMENTS OF OPERATIONS' table for the year ended December 31, 2015. This value is presented in thousands, as "
        "indicated by the caption.",
    ]
    return {"question": QUESTION, "gold": "0.105", "roles": {"policy": policy, "summarizer": summarizer}}


def _call(name: str, **arguments) -> str:
    return "<tool_call>\n" + json.dumps({"name": name, "arguments": arguments}) + "\n</tool_call>"


CASE_QUESTION = (
    "By how many percentage points did the 2015 domestic streaming contribution margin exceed the long-term contribution "
    "margin target for the international streaming segment?"
)


def case_study_scenario() -> dict:
    explorer = [
        "<intent>Find where contribution margin is reported across charts, tables and text.</intent>\n"
        + _call("search", keywords=["contribution margin"]),
        "<intent>Understand the visual trend of domestic contribution margin in the chart.</intent>\n"
        + _call("read", section_ids=["8.65"], goal="Describe the contribution margin trend shown in the chart"),
        "<intent>Get the precise 2015 domestic contribution margin from the segment table.</intent>\n"
        + _call("read", section_ids=["8.66"], goal="Extract the 2015 domestic streaming contribution margin"),
        "<intent>Find the stated contribution margin target for comparison.</intent>\n"
        + _call("read", section_ids=["8.84"], goal="Find the long-term contribution margin target"),
        "<intent>The evidence links a chart, a table and a text passage on different pages; stop exploring.</intent>",
    ]
    summarizer = [
        "The chart shows domestic streaming contribution margin rising each year from 2013 to 2015.",
        "The 2015 domestic streaming contribution margin is 29.92%.",
        "Management targets a long-term contribution margin of 15% for the international streaming segment.",
    ]
    synthesizer = ['```json\n{"question": "' + CASE_QUESTION + '", "answer": "14.92%"}\n```']
    return {"question": CASE_QUESTION, "answer": "14.92%", "roles": {"explorer": explorer, "summarizer": summarizer, "synthesizer": synthesizer}}


# --------------------------------------------------------------------------
# 3-document synthesis corpus


def small_document(topic: str, facts: list[tuple[str, str]]) -> dict:
    pages = [Page(i) for i in range(len(facts) + 1)]
    pages[0].text(f"{topic} reference document")
    for i, (title, text) in enumerate(facts, 1):
        pages[i].title(title, ROOT_H)
        pages[i].text(text)
    return {"pdf_info": [p.to_dict(topic) for p in pages]}


def corpus() -> tuple[dict[str, dict], list[dict], dict, dict]:
    docs = {
        "alpha": small_document("Alpha Grid Operator", [
            ("Capacity", "Installed wind capacity reached 412 megawatts at the end of 2022."),
            ("Outlook", "The operator plans to add storage capacity in 2024."),
        ]),
        "beta": small_document("Beta Logistics", [
            ("Fleet", "The delivery fleet consists of 86 electric vans."),
        ]),
        "gamma": small_document("Gamma Lease Agreement", [
            ("Term", "The lease term is seven years from the commencement date."),
            ("Renewal", "The tenant may renew the lease once for an additional five years."),
        ]),
    }
    manifest = [
        {"path": "alpha.mineru.json", "source_tag": "longdocurl"},
        {"path": "beta.mineru.json", "source_tag": "dude"},
        {"path": "gamma.mineru.json", "source_tag": "cuad"},
    ]
    alpha_q = "What was the installed wind capacity of the grid operator at the end of 2022, in megawatts?"
    gamma_q = "What is the maximum total lease duration in years if the tenant renews?"
    bundle = {
        "documents": {
            # accepted by the judge on the first teacher attempt
            "alpha": {"roles": {
                "explorer": [
                    "<intent>Locate capacity figures.</intent>\n" + _call("search", keywords=["capacity"]),
                    "<intent>Read the capacity section.</intent>\n" + _call("read", section_ids=["1"], goal="Extract installed capacity"),
                    "<intent>Done.</intent>",
                ],
                "summarizer": ["Installed wind capacity was 412 megawatts at the end of 2022."],
                "synthesizer": ['{"question": "' + alpha_q + '", "answer": "412"}'],
                "teacher": [
                    _think("Search for the capacity figure.") + _call("search", keywords=["wind capacity"]),
                    _think("The search result states 412 megawatts.") + "The installed wind capacity was **412** megawatts.",
                ],
                "judge": ["CORRECT"],
            }},
            # the synthesizer keeps citing a table number: rejected by the checks after one retry
            "beta": {"roles": {
                "explorer": [
                    "<intent>Find fleet details.</intent>\n" + _call("search", keywords=["fleet"]),
                    "<intent>Done.</intent>",
                ],
                "summarizer": [],
                "synthesizer": [
                    '{"question": "How many vans are listed in Table 2?", "answer": "86"}',
                    '{"question": "According to Table 2, how many electric vans are in the fleet?", "answer": "86"}',
                ],
                "teacher": [],
            }},
            # valid QA, but the teacher answers wrongly k=3 times (rule-based acceptance, no judge)
            "gamma": {"roles": {
                "explorer": [
                    "<intent>Find the lease term.</intent>\n" + _call("search", keywords=["lease term"]),
                    "<intent>Find renewal options.</intent>\n" + _call("search", keywords=["renew"]),
                    "<intent>Done.</intent>",
                ],
                "summarizer": [],
                "synthesizer": ['{"question": "' + gamma_q + '", "answer": "12"}'],
                "teacher": [
                    _think("The term is seven years.") + "The maximum lease duration is **7** years.",
                    _think("Only the base term counts.") + "The maximum lease duration is **7** years.",
                    _think("Renewal is five years.") + "The maximum lease duration is **5** years.",
                ],
            }},
        }
    }
    expected = {"documents": 3, "explored": 3, "synthesized": 3, "validated": 2, "accepted": 1, "failed": 0}
    return docs, manifest, bundle, expected


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "tests" / "fixtures"))
    args = ap.parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    def dump(path: Path, obj, indent=1):
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(obj, indent=indent, ensure_ascii=False) + "\n", encoding="utf-8")

    dump(out / "netflix10k.mineru.json", netflix_document(), indent=None)
    dump(out / "netflix_ask.scenario.json", netflix_ask_scenario())
    dump(out / "case_study.scenario.json", case_study_scenario())
    docs, manifest, bundle, expected = corpus()
    for name, doc in docs.items():
        dump(out / "corpus" / f"{name}.mineru.json", doc, indent=None)
    dump(out / "corpus" / "manifest.json", manifest)
    dump(out / "corpus" / "scenarios.json", bundle)
    dump(out / "corpus" / "expected_report.json", expected)
    print(f"fixtures written to {out}")


if __name__ == "__main__":
    main()
