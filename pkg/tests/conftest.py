import json
import sys
from pathlib import Path

import pytest

from docqa.cli import load_document
from docqa.model_clients import ScriptedClient
from docqa.toolkit import Toolkit

FIXTURES = Path(__file__).parent / "fixtures"
NETFLIX = FIXTURES / "netflix10k.mineru.json"
NETFLIX_SCENARIO = FIXTURES / "netflix_ask.scenario.json"
CASE_SCENARIO = FIXTURES / "case_study.scenario.json"
CORPUS = FIXTURES / "corpus"


@pytest.fixture(scope="session")
def netflix_outline():
    return load_document(NETFLIX)


@pytest.fixture(scope="session")
def netflix_scenario():
    return json.loads(NETFLIX_SCENARIO.read_text(encoding="utf-8"))


@pytest.fixture
def netflix_clients():
    policy = ScriptedClient.load(NETFLIX_SCENARIO, role="policy")
    summarizer = ScriptedClient.load(NETFLIX_SCENARIO, role="summarizer")
    return policy, summarizer


class EchoSummarizer:
    """Summarizer that records its inputs and answers with a fixed string."""

    identity = "echo"
    supports_media = False

    def __init__(self, reply: str = "summary"):
        self.reply = reply
        self.calls = []

    def summarize(self, goal, text, media_refs):
        self.calls.append((goal, text, list(media_refs)))
        return self.reply


@pytest.fixture
def echo():
    return EchoSummarizer()


def make_toolkit(outline, summarizer=None):
    return Toolkit(outline, summarizer or EchoSummarizer())


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.result_lines():
        terminalreporter.write_line(line)
