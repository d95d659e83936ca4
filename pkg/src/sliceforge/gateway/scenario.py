"""Scenario files: one YAML document describing domains, interconnects,
catalogue, rules/tier overrides, the optional operator request, telemetry
traces, and a scripted workflow. The seed is mandatory so every run is
reproducible."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Mapping

import yaml

from .. import agents as agents_mod
from ..embedder import ObjectiveConstraint
from ..errors import SchemaError
from ..intent import CatalogueOverlay, RuleBasedAdapter, adapter_from_env, load_rules
from ..orchestrator import EventLog, Orchestrator, TickClock
from ..profiles import load_catalogue, load_tier_table, validate_service_profile
from ..substrate import Network, SubstrateLink, build_domain


@dataclass
class Scenario:
    seed: int
    domains: list[Mapping]
    interconnects: list[Mapping]
    catalogue: list[Mapping]
    rules: Mapping | None
    tiers: Mapping | None
    objective: Mapping
    k: int
    request: Mapping | None
    telemetry: list[Mapping]
    script: Mapping
    agents_text: str
    sha: str
    path: str = ""


def default_agents_text() -> str:
    return resources.files("sliceforge.data").joinpath("agent_definitions.yaml").read_text()


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    raw = path.read_text()
    doc = yaml.safe_load(raw)
    if not isinstance(doc, Mapping):
        raise SchemaError("", "scenario must be a mapping")
    if "seed" not in doc:
        raise SchemaError("seed", "required for deterministic runs")
    if "domains" not in doc or not doc["domains"]:
        raise SchemaError("domains", "at least one domain required")

    agents_text = default_agents_text()
    if doc.get("agents_file"):
        agents_text = (path.parent / doc["agents_file"]).read_text()

    scenario = Scenario(
        seed=int(doc["seed"]),
        domains=list(doc["domains"]),
        interconnects=list(doc.get("interconnects", [])),
        catalogue=list(doc.get("catalogue", [])),
        rules=doc.get("rules_table"),
        tiers=doc.get("tiers"),
        objective=doc.get("objective", {"metric": "utilization_ratio",
                                        "op": ">", "value": 0.8}),
        k=int(doc.get("k", 3)),
        request=doc.get("request"),
        telemetry=list(doc.get("telemetry", [])),
        script=doc.get("script", {}),
        agents_text=agents_text,
        sha=hashlib.sha256(raw.encode()).hexdigest()[:16],
        path=str(path))
    _cross_check(scenario)
    return scenario


def _cross_check(scenario: Scenario) -> None:
    borders: set[str] = set()
    node_domains: dict[str, str] = {}
    for ddoc in scenario.domains:
        for ndoc in ddoc.get("nodes", []):
            node_domains[str(ndoc["id"])] = str(ddoc["domain_id"])
        borders.update(str(b) for b in ddoc.get("border", []))
    for i, ix in enumerate(scenario.interconnects):
        for end in (str(ix["a"]), str(ix["b"])):
            if end not in node_domains:
                raise SchemaError(f"interconnects[{i}]", f"unknown node {end!r}")
            if end not in borders:
                raise SchemaError(f"interconnects[{i}]",
                                  f"{end!r} is not a border node")
    for i, trace in enumerate(scenario.telemetry):
        if "segment_ref" not in trace:
            raise SchemaError(f"telemetry[{i}].segment_ref", "missing required key")


def build_network(scenario: Scenario) -> Network:
    domains = [build_domain(ddoc) for ddoc in scenario.domains]
    links = [SubstrateLink(link_id=str(ix["id"]),
                           endpoints=(str(ix["a"]), str(ix["b"])),
                           bandwidth_capacity=ix["bandwidth_mbps"],
                           latency=ix["latency_ms"])
             for ix in scenario.interconnects]
    return Network(domains, links)


def build_context(scenario: Scenario,
                  event_log_path: str | None = None,
                  use_env_adapter: bool = False) -> agents_mod.RuntimeContext:
    """A fresh runtime for one scenario; identical inputs give identical runs."""
    tiers = load_tier_table(scenario.tiers)
    rules = load_rules(scenario.rules)
    adapter = (adapter_from_env(rules, tiers) if use_env_adapter
               else RuleBasedAdapter(rules, tiers))
    network = build_network(scenario)
    orchestrator = Orchestrator(network, clock=TickClock(),
                                event_log=EventLog(event_log_path))
    catalogue = CatalogueOverlay(load_catalogue({"catalogue": scenario.catalogue}))
    agent_defs = agents_mod.load_agents(scenario.agents_text)
    request_profile = None
    if scenario.request is not None:
        request_profile = validate_service_profile(scenario.request, tiers)
    return agents_mod.RuntimeContext(
        network=network,
        orchestrator=orchestrator,
        catalogue=catalogue,
        adapter=adapter,
        tiers=tiers,
        agents=agent_defs,
        objective=ObjectiveConstraint(**scenario.objective),
        k=scenario.k,
        seed=scenario.seed,
        scenario_sha=scenario.sha,
        request_profile=request_profile)
