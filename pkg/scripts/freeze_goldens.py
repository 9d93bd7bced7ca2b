"""Regenerate implementation-derived golden files (run once, then review and commit).

    python3 scripts/freeze_goldens.py

Writes tests/fixtures/golden/netflix10k.outline.xml (ingest output) and
netflix_step1_history.json (the message list the policy sees after step 1 of
the scripted financial episode). Tests compare against these bytes, so any
change to outline building or prompt rendering shows up as a diff here.
"""
import json
from pathlib import Path

from docqa.agent_loop import format_history, run_episode
from docqa.cli import load_document
from docqa.document import serialize_xml
from docqa.model_clients import ScriptedClient
from docqa.toolkit import Toolkit

FIX = Path(__file__).resolve().parent.parent / "tests" / "fixtures"


def main() -> None:
    golden = FIX / "golden"
    golden.mkdir(parents=True, exist_ok=True)
    outline = load_document(FIX / "netflix10k.mineru.json")
    (golden / "netflix10k.outline.xml").write_text(serialize_xml(outline) + "\n", encoding="utf-8")

    scenario = FIX / "netflix_ask.scenario.json"
    question = json.loads(scenario.read_text(encoding="utf-8"))["question"]
    policy = ScriptedClient.load(scenario, role="policy")
    summarizer = ScriptedClient.load(scenario, role="summarizer")
    traj, _ = run_episode(question, outline, Toolkit(outline, summarizer), policy)
    messages = format_history(traj.task_context, traj.steps[:1])
    (golden / "netflix_step1_history.json").write_text(
        json.dumps(messages, indent=1, ensure_ascii=False) + "\n", encoding="utf-8"
    )
    print(f"goldens written to {golden}")


if __name__ == "__main__":
    main()
