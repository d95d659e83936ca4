"""Free-text intent translation, chain proposal for unknown services, and
requirement negotiation.

All language behavior flows through a pluggable adapter. The shipped
rule-based adapter is deterministic (identical inputs, identical outputs),
which is what makes the workflows replayable; a real model can be dropped in
behind the same interface without touching any caller.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
from abc import ABC, abstractmethod
from dataclasses import dataclass, replace
from importlib import resources
from typing import TYPE_CHECKING, Callable, Mapping

import yaml

from .errors import (
    AdapterFailure,
    NoViableRelaxation,
    SchemaError,
    StaleProposal,
    UntranslatableIntent,
)
from .profiles import (
    Catalogue,
    ServiceGraph,
    ServiceProfile,
    TierTable,
    VirtualLink,
    Vnf,
    load_tier_table,
    service_profile_to_doc,
    validate_service_profile,
)

if TYPE_CHECKING:
    from .embedder import InfeasibilityReport

CATEGORIES = ("service", "quality", "latency", "security", "access")

GENERIC_BACKBONE = ("ingress-gw", "firewall", "load-balancer", "app-server")


@dataclass(frozen=True)
class IntentText:
    raw: str
    speaker: str = "tenant"

    def __post_init__(self):
        if not self.raw.strip():
            raise SchemaError("raw", "intent text is empty")
        if self.speaker not in ("tenant", "operator"):
            raise SchemaError("speaker", "must be tenant or operator")


@dataclass(frozen=True)
class KeywordHit:
    keyword: str
    category: str


@dataclass(frozen=True)
class KeywordHits:
    matched: tuple[KeywordHit, ...]
    unmodeled: tuple[str, ...]

    def by_category(self, category: str) -> list[KeywordHit]:
        return [h for h in self.matched if h.category == category]


@dataclass(frozen=True)
class RelaxationAttempt:
    attribute: str
    value: float


@dataclass(frozen=True)
class RelaxationProposal:
    target_requirement_index: int
    attribute: str
    current_value: float
    proposed_value: float
    reason: str
    profile_fingerprint: str


@dataclass(frozen=True)
class Rule:
    keyword: str
    category: str
    effect: Mapping


@dataclass(frozen=True)
class RuleTable:
    rules: tuple[Rule, ...]
    unmodeled_markers: tuple[str, ...]
    function_library: Mapping[str, Mapping[str, float]]


def load_rules(doc: Mapping | None = None) -> RuleTable:
    if doc is None:
        text = resources.files("sliceforge.data").joinpath("rules.yaml").read_text()
        doc = yaml.safe_load(text)
    rules = []
    for i, rdoc in enumerate(doc.get("rules", [])):
        if rdoc.get("category") not in CATEGORIES:
            raise SchemaError(f"rules[{i}].category",
                              f"must be one of {', '.join(CATEGORIES)}")
        rules.append(Rule(keyword=str(rdoc["keyword"]).lower(),
                          category=rdoc["category"],
                          effect=rdoc.get("effect") or {}))
    return RuleTable(
        rules=tuple(rules),
        unmodeled_markers=tuple(str(m).lower() for m in doc.get("unmodeled_markers", [])),
        function_library=doc.get("function_library", {}))


# ---------------------------------------------------------------------------
# adapter seam
# ---------------------------------------------------------------------------

class LanguageModelAdapter(ABC):
    """Completion interface standing in for the on-device model."""

    name: str = "adapter"
    deterministic: bool = False

    @abstractmethod
    def complete(self, prompt: str, context: Mapping) -> Mapping:
        """Return a structured response for a structured request."""


class RuleBasedAdapter(LanguageModelAdapter):
    """Deterministic table-driven adapter; the reference implementation."""

    name = "rules"
    deterministic = True

    def __init__(self, rules: RuleTable | None = None, tiers: TierTable | None = None):
        self.rules = rules or load_rules()
        self.tiers = tiers or load_tier_table()

    def complete(self, prompt: str, context: Mapping) -> Mapping:
        task = context.get("task")
        if task == "translate_intent":
            return self._translate(context["text"], context["speaker"])
        if task == "propose_chain":
            return self._chain(context["service_type"], context["slice_kind"])
        if task == "plan_tasks":
            return self._plan(context["goal"], context.get("tools", []))
        if task == "feedback_adjust":
            return self._feedback(context["feedback"])
        raise AdapterFailure(f"rule adapter has no recipe for task {task!r}")

    # -- intent translation ------------------------------------------------

    def _translate(self, text: str, speaker: str) -> Mapping:
        hits = scan_keywords(text, self.rules)
        service_rules = [r for r in self._hit_rules(hits) if r.category == "service"]
        quality_hits = hits.by_category("quality")
        if not service_rules and not quality_hits:
            return {"untranslatable": True, "hits": hits}

        tiers = self.tiers
        if service_rules:
            base = service_rules[0]
            service_type = base.keyword.replace(" ", "-")
            slice_docs = [dict(s) for s in base.effect.get("slices", [])]
        else:
            service_type = "generic"
            slice_docs = [{"kind": "embb", "throughput_tier": "low",
                           "latency_tier": "standard"}]

        requirements = []
        for sdoc in slice_docs:
            requirements.append({
                "kind": sdoc["kind"],
                "max_latency_ms": tiers.latency_ms[sdoc.get("latency_tier", "standard")],
                "min_throughput_mbps": tiers.throughput_mbps[sdoc.get("throughput_tier", "low")],
                "reliability": tiers.default_reliability[sdoc["kind"]],
                "isolation": False,
                "encryption": False,
            })

        for rule in self._hit_rules(hits):
            effect = rule.effect
            if rule.category == "quality" and "throughput_tier" in effect:
                target = self._pick(requirements, effect.get("applies_to"),
                                    key=lambda r: -r["min_throughput_mbps"])
                target["min_throughput_mbps"] = tiers.throughput_mbps[effect["throughput_tier"]]
            elif rule.category == "latency" and "latency_tier" in effect:
                target = self._pick(requirements, effect.get("applies_to"),
                                    key=lambda r: r["max_latency_ms"])
                target["max_latency_ms"] = tiers.latency_ms[effect["latency_tier"]]
            elif rule.category == "security":
                for req in requirements:
                    if effect.get("isolation"):
                        req["isolation"] = True
                    if effect.get("encryption"):
                        req["encryption"] = True

        digest = hashlib.sha256(" ".join(text.lower().split()).encode()).hexdigest()[:8]
        return {
            "profile": {
                "profile_id": f"{service_type}-{digest}",
                "service_type": service_type,
                "subscriber": speaker,
                "slices": requirements,
            },
            "hits": hits,
        }

    @staticmethod
    def _pick(requirements: list[dict], applies_to: str | None,
              key: Callable[[dict], float]) -> dict:
        pool = [r for r in requirements if r["kind"] == applies_to] or requirements
        return min(pool, key=key)

    def _hit_rules(self, hits: KeywordHits) -> list[Rule]:
        by_keyword = {r.keyword: r for r in self.rules.rules}
        return [by_keyword[h.keyword] for h in hits.matched]

    # -- chain proposal ------------------------------------------------------

    def _chain(self, service_type: str, slice_kind: str) -> Mapping:
        lib = self.rules.function_library
        missing = [f for f in GENERIC_BACKBONE if f not in lib]
        if missing:
            raise AdapterFailure("function library lacks " + ", ".join(missing))
        latency_tier = "ultra-low" if slice_kind == "urllc" else "standard"
        vnfs = []
        for i, function in enumerate(GENERIC_BACKBONE):
            spec = lib[function]
            vnfs.append({
                "id": f"{service_type}-{i + 1}-{function}",
                "function": function,
                "cpu": spec["cpu"], "mem": spec["mem"], "storage": spec["storage"],
                "affinity": "access" if (i == 0 and slice_kind == "urllc") else None,
            })
        vlinks = [{
            "src": vnfs[i]["id"], "dst": vnfs[i + 1]["id"],
            "bandwidth_mbps": self.tiers.throughput_mbps["low"],
            "max_latency_ms": self.tiers.latency_ms[latency_tier],
        } for i in range(len(vnfs) - 1)]
        return {"graph": {"vnfs": vnfs, "vlinks": vlinks}}

    # -- task planning (used by the agents runtime) --------------------------

    def _plan(self, goal: str, tools: list[Mapping]) -> Mapping:
        lowered = goal.lower()
        tool_names = {t["name"] for t in tools}
        hits = scan_keywords(goal, self.rules)
        has_constraint = bool(re.search(
            r"utilization|optimi[sz]|constraint|greater than|at least|[<>]\s*\d|\d+\s*(%|percent)",
            lowered))
        wants_deploy = bool(re.search(r"deploy|design|create|instantiate", lowered))

        if hits.by_category("service"):
            return {"tasks": [
                {"purpose": "translate", "tool": "intent-translator"},
                {"purpose": "model", "tool": "modeller" if "modeller" in tool_names else "intent-translator"},
                {"purpose": "deploy", "tool": "deployer" if "deployer" in tool_names else "nsi-deployer"},
            ]}
        if has_constraint and wants_deploy and {"modeller", "deployer"} <= tool_names:
            return {"tasks": [
                {"purpose": "modelling", "tool": "modeller"},
                {"purpose": "deployment", "tool": "deployer"},
            ]}
        return {"tasks": []}

    def _feedback(self, feedback: str) -> Mapping:
        lowered = feedback.lower()
        adjustments: dict[str, object] = {}
        if re.search(r"fewer domains|less domains|single domain|one domain", lowered):
            adjustments["secondary_objective"] = "fewer-domains"
        if re.search(r"higher utili[sz]ation|tighter", lowered):
            adjustments["raise_constraint"] = True
        return {"adjustments": adjustments}


class ExternalHttpAdapter(LanguageModelAdapter):
    """Speaks {prompt, context} JSON to a local completion endpoint."""

    name = "external"
    deterministic = False

    def __init__(self, endpoint: str):
        self.endpoint = endpoint

    def complete(self, prompt: str, context: Mapping) -> Mapping:
        import requests

        try:
            response = requests.post(
                self.endpoint, json={"prompt": prompt, "context": context}, timeout=30)
            response.raise_for_status()
            return response.json()["structured"]
        except Exception as exc:  # adapter diagnostics propagate to the caller
            raise AdapterFailure(f"external adapter at {self.endpoint}: {exc}") from exc


def adapter_from_env(rules: RuleTable | None = None,
                     tiers: TierTable | None = None) -> LanguageModelAdapter:
    """SLICEFORGE_ADAPTER=rules|external (external also needs SLICEFORGE_ADAPTER_URL)."""
    choice = os.environ.get("SLICEFORGE_ADAPTER", "rules")
    if choice == "rules":
        return RuleBasedAdapter(rules, tiers)
    if choice == "external":
        endpoint = os.environ.get("SLICEFORGE_ADAPTER_URL")
        if not endpoint:
            raise SchemaError("SLICEFORGE_ADAPTER_URL", "required for the external adapter")
        return ExternalHttpAdapter(endpoint)
    raise SchemaError("SLICEFORGE_ADAPTER", f"unknown adapter {choice!r}")


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def scan_keywords(text: str, rules: RuleTable) -> KeywordHits:
    """Case-insensitive longest-match scan; consumed spans never re-match."""
    lowered = text.lower()
    taken: list[tuple[int, int]] = []
    found: list[tuple[int, KeywordHit]] = []

    def free(start: int, end: int) -> bool:
        return all(end <= s or start >= e for s, e in taken)

    for rule in sorted(rules.rules, key=lambda r: -len(r.keyword)):
        for match in re.finditer(rf"\b{re.escape(rule.keyword)}\b", lowered):
            if free(match.start(), match.end()):
                taken.append((match.start(), match.end()))
                found.append((match.start(), KeywordHit(rule.keyword, rule.category)))

    unmodeled: list[tuple[int, str]] = []
    for marker in sorted(rules.unmodeled_markers, key=len, reverse=True):
        for match in re.finditer(rf"\b{re.escape(marker)}\b", lowered):
            if free(match.start(), match.end()):
                taken.append((match.start(), match.end()))
                unmodeled.append((match.start(), marker))

    found.sort(key=lambda pair: pair[0])
    unmodeled.sort(key=lambda pair: pair[0])
    return KeywordHits(matched=tuple(h for _, h in found),
                       unmodeled=tuple(m for _, m in unmodeled))


def extract_keywords(intent: IntentText, rules: RuleTable | None = None) -> KeywordHits:
    return scan_keywords(intent.raw, rules or load_rules())


def translate_intent(intent: IntentText, adapter: LanguageModelAdapter,
                     tiers: TierTable | None = None) -> ServiceProfile:
    """Turn natural language into a validated service profile via the adapter."""
    response = adapter.complete(
        prompt="Translate the user's intent into a service profile.",
        context={"task": "translate_intent", "text": intent.raw,
                 "speaker": intent.speaker})
    if response.get("untranslatable"):
        raise UntranslatableIntent(response.get("hits"))
    return validate_service_profile(response["profile"], tiers)


def propose_chain(service_type: str, slice_kind: str,
                  adapter: LanguageModelAdapter,
                  catalogue: Catalogue | None = None) -> ServiceGraph:
    """Assemble a chain for a service the catalogue does not know."""
    if catalogue is not None and catalogue.has(service_type, slice_kind):
        raise ValueError(
            f"{service_type}/{slice_kind} is already in the catalogue; use lookup_chain")
    response = adapter.complete(
        prompt="Propose a function chain for this service.",
        context={"task": "propose_chain", "service_type": service_type,
                 "slice_kind": slice_kind})
    gdoc = response.get("graph")
    if not gdoc:
        raise AdapterFailure("adapter returned no graph")
    vnfs = tuple(Vnf(vnf_id=str(v["id"]), function_kind=str(v["function"]),
                     cpu=v["cpu"], mem=v["mem"], storage=v["storage"],
                     domain_affinity=v.get("affinity"))
                 for v in gdoc["vnfs"])
    vlinks = tuple(VirtualLink(src=str(l["src"]), dst=str(l["dst"]),
                               bandwidth_mbps=l["bandwidth_mbps"],
                               max_latency_ms=l["max_latency_ms"])
                   for l in gdoc.get("vlinks", []))
    return ServiceGraph(vnfs=vnfs, vlinks=vlinks)


class CatalogueOverlay(Catalogue):
    """Session-local catalogue view: proposed chains cached without touching
    the shared base."""

    def __init__(self, base: Catalogue):
        super().__init__()
        self._base = base

    def has(self, service_type: str, slice_kind: str | None = None) -> bool:
        return super().has(service_type, slice_kind) or self._base.has(service_type, slice_kind)

    def get(self, service_type: str, slice_kind: str) -> ServiceGraph:
        if super().has(service_type, slice_kind):
            return super().get(service_type, slice_kind)
        return self._base.get(service_type, slice_kind)

    def resolve(self, service_type: str, slice_kind: str,
                adapter: LanguageModelAdapter) -> ServiceGraph:
        """Catalogue hit, or propose-and-cache."""
        if self.has(service_type, slice_kind):
            import copy as _copy
            return _copy.deepcopy(self.get(service_type, slice_kind))
        graph = propose_chain(service_type, slice_kind, adapter, catalogue=self)
        self.register(service_type, slice_kind, graph)
        return graph


def profile_fingerprint(profile: ServiceProfile) -> str:
    doc = service_profile_to_doc(profile)
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()[:16]


_LADDER_ORDER = ("max_latency_ms", "min_throughput_mbps", "reliability")

_VIOLATION_ATTRIBUTE = {
    "latency": "max_latency_ms",
    "bandwidth": "min_throughput_mbps",
    # no profile knob maps to compute directly; a lower throughput tier is the
    # lightest-footprint request we can make on the tenant's behalf
    "compute": "min_throughput_mbps",
}


def _ladder(tiers: TierTable, attribute: str, current: float) -> list[float]:
    """Strictly weaker legal tier values, nearest first."""
    if attribute == "max_latency_ms":
        return [v for v in tiers.latency_ladder() if v > current]
    if attribute == "min_throughput_mbps":
        return [v for v in tiers.throughput_ladder() if v < current]
    if attribute == "reliability":
        return [v for v in tiers.reliability_ladder() if v < current]
    raise SchemaError("attribute", f"unknown relaxation attribute {attribute!r}")


def _with_attribute(profile: ServiceProfile, index: int, attribute: str,
                    value: float) -> ServiceProfile:
    req = profile.slice_requirements[index]
    updated = replace(req, **{_REQ_FIELD[attribute]: value})
    reqs = list(profile.slice_requirements)
    reqs[index] = updated
    return replace(profile, slice_requirements=tuple(reqs))


_REQ_FIELD = {
    "max_latency_ms": "max_latency_ms",
    "min_throughput_mbps": "min_throughput_mbps",
    "reliability": "reliability",
}


def _binding_requirement(profile: ServiceProfile, attribute: str) -> int:
    """Index of the strictest requirement in the violated dimension."""
    reqs = profile.slice_requirements
    if attribute == "max_latency_ms":
        return min(range(len(reqs)), key=lambda i: (reqs[i].max_latency_ms, i))
    if attribute == "min_throughput_mbps":
        return min(range(len(reqs)), key=lambda i: (-reqs[i].min_throughput_mbps, i))
    return min(range(len(reqs)), key=lambda i: (-reqs[i].reliability, i))


def propose_relaxation(profile: ServiceProfile, failure: "InfeasibilityReport",
                       feasibility_oracle: Callable[[ServiceProfile], bool],
                       tiers: TierTable | None = None,
                       requirement_index: int | None = None) -> RelaxationProposal:
    """Minimal single-attribute relaxation along the tier ladder that the
    oracle accepts; raises NoViableRelaxation with every attempted tier."""
    tiers = tiers or load_tier_table()
    if feasibility_oracle(profile):
        raise ValueError("profile is already feasible; nothing to relax")

    attribute = _VIOLATION_ATTRIBUTE[failure.violated]
    index = (requirement_index if requirement_index is not None
             else _binding_requirement(profile, attribute))
    current = getattr(profile.slice_requirements[index], _REQ_FIELD[attribute])

    attempts: list[RelaxationAttempt] = []
    for value in _ladder(tiers, attribute, current):
        attempts.append(RelaxationAttempt(attribute, value))
        if feasibility_oracle(_with_attribute(profile, index, attribute, value)):
            return RelaxationProposal(
                target_requirement_index=index,
                attribute=attribute,
                current_value=current,
                proposed_value=value,
                reason=f"capacity limit at {failure.element}",
                profile_fingerprint=profile_fingerprint(profile))
    raise NoViableRelaxation(attempts)


def apply_relaxation(profile: ServiceProfile, proposal: RelaxationProposal,
                     accepted: bool) -> ServiceProfile:
    """Accepted: one attribute replaced. Rejected: the profile, untouched."""
    if proposal.profile_fingerprint != profile_fingerprint(profile):
        raise StaleProposal("profile changed since the proposal was made")
    if not accepted:
        return profile
    return _with_attribute(profile, proposal.target_requirement_index,
                           proposal.attribute, proposal.proposed_value)
