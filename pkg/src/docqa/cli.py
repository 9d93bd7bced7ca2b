"""Command line: ``docqa {ingest,ask,synthesize,export-sft,eval}``.

Exit codes: 0 success, 1 partial result, 2 usage or input/schema error,
3 upstream model failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .agent_loop import run_episode, write_trajectory_jsonl
from .config import ROLES, RunConfig, load_config
from .document import FORMATS, Outline, build_outline, enrich_captions, ingest_parsed, parse_xml, serialize_xml
from .errors import (
    AuthFailure,
    ConfigError,
    ContextOverflow,
    DocQAError,
    EmptyKeywords,
    KeyMiss,
    MalformedLayout,
    ModelUnavailable,
    PolicyUnavailable,
    ScenarioExhausted,
    SchemaMismatch,
    SummarizerUnavailable,
    UnknownFormat,
    UnreadableFile,
)
from .eval_harness import score_files
from .sft_export import export_jsonl, get_tokenizer
from .synthesis import PipelineClients, load_manifest, read_dataset, run_pipeline, write_pipeline_outputs
from .toolkit import Toolkit

log = logging.getLogger("docqa")

EXIT_OK, EXIT_PARTIAL, EXIT_USAGE, EXIT_UPSTREAM = 0, 1, 2, 3
_USAGE_ERRORS = (UnreadableFile, MalformedLayout, UnknownFormat, SchemaMismatch, ConfigError, EmptyKeywords)
_UPSTREAM_ERRORS = (ModelUnavailable, AuthFailure, ContextOverflow, ScenarioExhausted, KeyMiss)
DOC_FORMATS = ("auto", *FORMATS, "outline_json", "outline_xml")


class _NoSummarizer:
    """Stand-in when no reader model is configured: ``read`` still returns
    the raw evidence, with a note that no summary was produced."""

    identity = "none"
    supports_media = False

    def summarize(self, goal, text, media_refs):
        raise SummarizerUnavailable("no summarizer endpoint configured")


def _detect_format(path: Path) -> str:
    if path.suffix == ".xml":
        return "outline_xml"
    try:
        head = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError) as exc:
        raise UnreadableFile(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise MalformedLayout(f"{path}: invalid JSON ({exc})") from exc
    tag = head.get("format") if isinstance(head, dict) else None
    return {"docqa-outline": "outline_json", "docqa-layout": "neutral_json"}.get(tag, "mineru_json")


def load_document(path, fmt: str = "auto") -> Outline:
    path = Path(path)
    if not path.is_file():
        raise UnreadableFile(f"no such file: {path}")
    if fmt == "auto":
        fmt = _detect_format(path)
    if fmt == "outline_xml":
        return parse_xml(path.read_text(encoding="utf-8"))
    if fmt == "outline_json":
        try:
            return Outline.from_dict(json.loads(path.read_text(encoding="utf-8")))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise MalformedLayout(f"{path}: not an outline ({exc})") from exc
    return build_outline(ingest_parsed(path, fmt))


def _run_config(args) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    scenario = getattr(args, "scenario", None)
    if scenario:
        for role in ROLES:
            cfg = cfg.with_scripted(role, scenario)
    for role in ROLES:
        path = getattr(args, role, None)
        if path:
            cfg = cfg.with_scripted(role, path)
    return cfg


def _optional_client(cfg: RunConfig, role: str, document: str | None):
    """A role client, or None when the role is unconfigured or the scenario
    bundle has no entry for it."""
    try:
        return cfg.client(role, document, required=False)
    except ConfigError as exc:
        log.info("%s: %s", role, exc)
        return None


# --------------------------------------------------------------------------
# commands


def cmd_ingest(args) -> int:
    outline = load_document(args.path, args.format)
    notes = []
    if args.captions:
        cfg = _run_config(args)
        outline = enrich_captions(outline, cfg.client("captioner", outline.doc_id))
        notes = list(outline.notes)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    xml_path = out / f"{outline.doc_id}.outline.xml"
    json_path = out / f"{outline.doc_id}.outline.json"
    xml_path.write_text(serialize_xml(outline) + "\n", encoding="utf-8")
    json_path.write_text(json.dumps(outline.to_dict(), ensure_ascii=False, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    index = {
        "doc_id": outline.doc_id,
        "sections": sum(1 for _ in outline.iter_sections()),
        "elements": sum(1 for _ in outline.iter_elements()),
        "pages": sorted(outline.page_index),
        "files": {"xml": xml_path.name, "outline": json_path.name},
        "notes": notes,
    }
    (out / f"{outline.doc_id}.index.json").write_text(json.dumps(index, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"{outline.doc_id}: {index['sections']} sections, {index['elements']} elements -> {xml_path}")
    return EXIT_PARTIAL if notes else EXIT_OK


def cmd_ask(args) -> int:
    cfg = _run_config(args)
    if args.max_steps is not None:
        cfg = RunConfig(**{**cfg.__dict__, "max_steps": args.max_steps})
    outline = load_document(args.doc, args.format)
    policy = cfg.client("policy", outline.doc_id)
    summarizer = _optional_client(cfg, "summarizer", outline.doc_id) or _NoSummarizer()
    toolkit = Toolkit(outline, summarizer, cfg.toolkit_config())
    trace = Path(args.trace)
    trace.parent.mkdir(parents=True, exist_ok=True)
    extra = {"policy": getattr(policy, "identity", "?"), "summarizer": getattr(summarizer, "identity", "?")}
    try:
        traj, answer = run_episode(args.question, outline, toolkit, policy, cfg.agent_config())
    except (PolicyUnavailable, ContextOverflow) as exc:
        partial = getattr(exc, "trajectory", None)
        if partial is not None:
            write_trajectory_jsonl(partial, trace, {**extra, "error": f"{type(exc).__name__}: {exc}"})
            print(f"partial trace written to {trace}", file=sys.stderr)
        raise
    write_trajectory_jsonl(traj, trace, extra)
    if traj.terminated_by == "step_limit":
        print(f"note: step limit reached; answer was forced (trace: {trace})", file=sys.stderr)
    print(answer)
    return EXIT_OK


def _doc_key(entry) -> str:
    return entry.doc_id or Path(entry.path).name.split(".", 1)[0]


def cmd_synthesize(args) -> int:
    cfg = _run_config(args)
    manifest = args.manifest or cfg.paths.get("manifest")
    out = args.out or cfg.paths.get("out_dir")
    if not manifest or not out:
        raise ConfigError("synthesize needs a manifest and --out (or paths.manifest / paths.out_dir in the config)")
    entries = load_manifest(manifest)

    def clients_for(entry) -> PipelineClients:
        doc = _doc_key(entry)
        return PipelineClients(
            explorer=cfg.client("explorer", doc),
            synthesizer=cfg.client("synthesizer", doc),
            teacher=cfg.client("teacher", doc),
            summarizer=_optional_client(cfg, "summarizer", doc) or _NoSummarizer(),
            judge=_optional_client(cfg, "judge", doc),
            captioner=_optional_client(cfg, "captioner", doc),
        )

    result = run_pipeline(entries, clients_for, cfg.synthesis_config(), cfg.toolkit_config(), parallel=args.parallel)
    paths = write_pipeline_outputs(result, out)
    r = result.report
    print(
        f"documents={r['documents']} explored={r['explored']} synthesized={r['synthesized']} "
        f"validated={r['validated']} accepted={r['accepted']} failed={len(r['failed'])} -> {paths['dataset']}"
    )
    for f in r["failed"]:
        print(f"failed: {f['path']} at {f['stage']}: {f['type']}: {f['message']}", file=sys.stderr)
    if entries and len(r["failed"]) == len(entries):
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_export_sft(args) -> int:
    dataset = read_dataset(args.dataset)
    tok = get_tokenizer(args.tokenizer) if args.tokenizer != "none" else None
    n = export_jsonl(dataset, args.out, tok)
    print(f"exported {n} samples -> {args.out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _run_config(args)
    judge = cfg.client("judge") if args.judge or "judge" in cfg.endpoints else None
    extractor = cfg.client("extractor") if args.extractor or "extractor" in cfg.endpoints else None
    report = score_files(args.pred, args.gold, extractor, judge)
    line = f"acc={report.acc:.4f} f1={report.f1:.4f}"
    if report.lasj is not None:
        line += f" lasj={report.lasj:.4f}"
    if report.flags:
        line += " flags=" + ",".join(report.flags)
    print(line)
    if args.out:
        Path(args.out).write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def _add_model_args(p, roles):
    p.add_argument("--config", help="run config JSON")
    p.add_argument("--scenario", help="scripted scenario bundle used for every role")
    for role in roles:
        p.add_argument(f"--{role}", metavar="SCENARIO", help=f"scripted scenario for the {role} role")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="docqa", description="Document-grounded agentic question answering toolkit.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="build an outline from a layout-parsed document")
    p.add_argument("path")
    p.add_argument("--format", choices=DOC_FORMATS, default="auto")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--captions", action="store_true", help="caption uncaptioned images/charts with the captioner role")
    _add_model_args(p, ["captioner"])
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("ask", help="answer one question about one document")
    p.add_argument("question")
    p.add_argument("--doc", required=True)
    p.add_argument("--format", choices=DOC_FORMATS, default="auto")
    p.add_argument("--trace", default="trajectory.jsonl", help="trajectory JSONL output")
    p.add_argument("--max-steps", type=int)
    _add_model_args(p, ["policy", "summarizer"])
    p.set_defaults(func=cmd_ask)

    p = sub.add_parser("synthesize", help="generate QA training data for a corpus")
    p.add_argument("manifest", nargs="?")
    p.add_argument("--out")
    p.add_argument("--parallel", type=int, default=1, help="documents processed concurrently")
    _add_model_args(p, ["explorer", "synthesizer", "teacher", "summarizer", "judge", "captioner"])
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("export-sft", help="export accepted trajectories as masked SFT samples")
    p.add_argument("dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--tokenizer", default="whitespace", help="'whitespace', 'hf:<name-or-path>' or 'none'")
    p.set_defaults(func=cmd_export_sft)

    p = sub.add_parser("eval", help="score predictions against gold answers")
    p.add_argument("pred")
    p.add_argument("gold")
    p.add_argument("--out", help="write the full report JSON here")
    _add_model_args(p, ["judge", "extractor"])
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    if getattr(args, "parallel", 1) < 1:
        parser.error("--parallel must be >= 1")
    try:
        return args.func(args)
    except _USAGE_ERRORS as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _UPSTREAM_ERRORS as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_UPSTREAM
    except (DocQAError, ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
