"""Command line entry point.

Subcommands: scenario run, translate, embed, descriptors, replay, serve.
Exit codes: 0 success, 1 usage error, 2 domain error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import yaml

from .. import agents as agents_mod
from ..embedder import EmbeddingPlan, EmbedPolicy, embed, plan_to_doc, report_to_doc
from ..errors import SliceforgeError, UnknownNsi
from ..intent import IntentText, RuleBasedAdapter, translate_intent
from ..embedder import plan_from_doc
from ..orchestrator import slice_profile_from_doc
from ..profiles import (
    bundle_to_yaml,
    instantiate_graph,
    render_descriptors,
    service_profile_to_doc,
    validate_service_profile,
)
from .inventory import load_store
from .scenario import build_context, load_scenario


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sliceforge")
    sub = parser.add_subparsers(dest="command", required=True)

    scenario = sub.add_parser("scenario", help="scenario operations")
    scenario_sub = scenario.add_subparsers(dest="scenario_command", required=True)
    run = scenario_sub.add_parser("run", help="execute a scripted workflow")
    run.add_argument("file")
    run.add_argument("--transcript", help="write the session transcript here")

    translate = sub.add_parser("translate", help="intent text -> service profile YAML")
    translate.add_argument("text")

    embed_cmd = sub.add_parser("embed", help="embed a profile onto a scenario")
    embed_cmd.add_argument("profile")
    embed_cmd.add_argument("scenario")

    descriptors = sub.add_parser("descriptors", help="emit the descriptor bundle")
    descriptors.add_argument("nsi_id")
    descriptors.add_argument("--data-dir", default=None)

    replay = sub.add_parser("replay", help="re-execute a recorded transcript")
    replay.add_argument("transcript")
    replay.add_argument("--scenario", required=True)

    serve = sub.add_parser("serve", help="run the HTTP gateway")
    serve.add_argument("scenario")
    serve.add_argument("--port", type=int, default=None)
    serve.add_argument("--data-dir", default=None)
    serve.add_argument("--ui-dir", default=None)
    return parser


def cli_run(argv: list[str] | None = None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return _dispatch(args)
    except SliceforgeError as exc:
        print(json.dumps({"error": type(exc).__name__, "detail": str(exc)}),
              file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _dispatch(args: argparse.Namespace) -> int:
    if args.command == "scenario" and args.scenario_command == "run":
        return _cmd_scenario_run(args)
    if args.command == "translate":
        return _cmd_translate(args)
    if args.command == "embed":
        return _cmd_embed(args)
    if args.command == "descriptors":
        return _cmd_descriptors(args)
    if args.command == "replay":
        return _cmd_replay(args)
    if args.command == "serve":
        return _cmd_serve(args)
    return 1


def _cmd_scenario_run(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.file)
    context = build_context(scenario)
    engine = agents_mod.WorkflowEngine(context)
    script = scenario.script or {}
    goal = script.get("goal")
    if not goal:
        raise SliceforgeError("scenario has no script.goal to run")
    session = engine.start_session(
        goal=goal,
        initiator=script.get("initiator", "operator"),
        auto_choices=list(script.get("choices", [])))
    engine.run_session(session, until="complete")
    if args.transcript:
        agents_mod.save_transcript(engine, session, args.transcript)
    summary = {
        "session_id": session.session_id,
        "state": session.state,
        "slices": (session.result or {}).get("slices", []),
    }
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0 if session.state == "Completed" else 2


def _cmd_translate(args: argparse.Namespace) -> int:
    profile = translate_intent(IntentText(raw=args.text), RuleBasedAdapter())
    print(yaml.dump(service_profile_to_doc(profile), sort_keys=False), end="")
    return 0


def _cmd_embed(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    context = build_context(scenario)
    profile = validate_service_profile(
        yaml.safe_load(Path(args.profile).read_text()), context.tiers)
    db = context.network.build_resource_db()
    infeasible = False
    results = []
    for requirement in profile.slice_requirements:
        template = context.resolve_graph(profile.service_type, requirement.slice_kind)
        graph = instantiate_graph(template, requirement)
        outcome = embed(graph, db,
                        EmbedPolicy(anti_affinity=requirement.isolation_required))
        if isinstance(outcome, EmbeddingPlan):
            results.append({"slice_kind": requirement.slice_kind,
                            "plan": plan_to_doc(outcome)})
        else:
            infeasible = True
            results.append({"slice_kind": requirement.slice_kind,
                            "infeasibility": report_to_doc(outcome)})
    print(json.dumps({"profile_id": profile.profile_id, "results": results},
                     indent=2, sort_keys=True))
    return 2 if infeasible else 0


def _cmd_descriptors(args: argparse.Namespace) -> int:
    data_dir = Path(args.data_dir or os.environ.get("SLICEFORGE_DATA_DIR",
                                                    ".sliceforge"))
    store = load_store(data_dir / "inventory.json")
    doc = store.nsis.get(args.nsi_id)
    if doc is None:
        raise UnknownNsi(f"{args.nsi_id} not in inventory at {data_dir}")
    if not doc.get("plan"):
        raise UnknownNsi(f"{args.nsi_id} has no recorded plan")
    bundle = render_descriptors(plan_from_doc(doc["plan"]),
                                slice_profile_from_doc(doc["slice_profile"]))
    print(bundle_to_yaml(bundle), end="")
    return 0


def _cmd_replay(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    context = build_context(scenario)
    lines = Path(args.transcript).read_text().splitlines()
    session = agents_mod.replay(lines, context)
    print(json.dumps({"session_id": session.session_id, "state": session.state,
                      "verdict": "identical"}, sort_keys=True))
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    from .app import serve
    scenario = load_scenario(args.scenario)
    serve(scenario, port=args.port, data_dir=args.data_dir, ui_dir=args.ui_dir)
    return 0


def main() -> None:
    raise SystemExit(cli_run())


if __name__ == "__main__":
    main()
