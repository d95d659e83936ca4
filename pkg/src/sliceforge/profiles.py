"""Tenant-facing service profiles, per-slice technical profiles, function
chains, the predefined chain catalogue, and deployment-descriptor rendering.

All types here are immutable values; looked-up chains are deep copies so the
catalogue can be shared across concurrent sessions.
"""

from __future__ import annotations

import copy
import io
from dataclasses import dataclass, replace
from importlib import resources
from typing import TYPE_CHECKING, Iterable, Mapping

import yaml

from .errors import IncompletePlan, SchemaError, UnknownServiceType

if TYPE_CHECKING:  # descriptor rendering consumes an embedding plan
    from .embedder import EmbeddingPlan

SLICE_KINDS = ("embb", "urllc", "mmtc")
SST_BY_KIND = {"embb": 1, "urllc": 2, "mmtc": 3}
ALL_DOMAIN_KINDS = ("access", "transport", "core", "cloud")


# ---------------------------------------------------------------------------
# tier table
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TierTable:
    """Numeric values behind qualitative tiers; loaded from config so the
    whole quantification is overridable per scenario."""

    throughput_mbps: Mapping[str, float]
    latency_ms: Mapping[str, float]
    urllc_latency_ceiling_ms: float
    default_reliability: Mapping[str, float]

    @classmethod
    def from_doc(cls, doc: Mapping) -> "TierTable":
        try:
            return cls(
                throughput_mbps=dict(doc["throughput_mbps"]),
                latency_ms=dict(doc["latency_ms"]),
                urllc_latency_ceiling_ms=doc["urllc_latency_ceiling_ms"],
                default_reliability=dict(doc["default_reliability"]),
            )
        except KeyError as exc:
            raise SchemaError("tiers", f"missing key {exc}") from exc

    def latency_ladder(self) -> list[float]:
        """Latency values from tightest to loosest."""
        return sorted(self.latency_ms.values())

    def throughput_ladder(self) -> list[float]:
        """Throughput values from highest to lowest."""
        return sorted(self.throughput_mbps.values(), reverse=True)

    def reliability_ladder(self) -> list[float]:
        return sorted(set(self.default_reliability.values()), reverse=True)


def load_tier_table(doc: Mapping | None = None) -> TierTable:
    if doc is None:
        text = resources.files("sliceforge.data").joinpath("tiers.yaml").read_text()
        doc = yaml.safe_load(text)
    return TierTable.from_doc(doc)


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SliceRequirement:
    slice_kind: str
    max_latency_ms: float
    min_throughput_mbps: float
    reliability: float
    isolation_required: bool = False
    encryption_required: bool = False


@dataclass(frozen=True)
class ServiceProfile:
    profile_id: str
    service_type: str
    subscriber: str
    slice_requirements: tuple[SliceRequirement, ...]


@dataclass(frozen=True)
class SliceProfile:
    slice_profile_id: str
    sst: int
    latency_ms: float
    throughput_mbps: float
    coverage_domains: tuple[str, ...]
    source_requirement: SliceRequirement


@dataclass(frozen=True)
class Vnf:
    vnf_id: str
    function_kind: str
    cpu: float
    mem: float
    storage: float
    domain_affinity: str | None = None


@dataclass(frozen=True)
class VirtualLink:
    src: str
    dst: str
    bandwidth_mbps: float
    max_latency_ms: float

    @property
    def vlink_id(self) -> str:
        return f"{self.src}->{self.dst}"


@dataclass(frozen=True)
class ServiceGraph:
    """A function chain/DAG with resource demands and edge constraints."""

    vnfs: tuple[Vnf, ...]
    vlinks: tuple[VirtualLink, ...]

    def __post_init__(self):
        ids = [v.vnf_id for v in self.vnfs]
        if len(set(ids)) != len(ids):
            raise SchemaError("vnfs", "duplicate vnf_id")
        known = set(ids)
        seen_edges = set()
        indegree = {i: 0 for i in known}
        for vl in self.vlinks:
            if vl.src not in known or vl.dst not in known:
                raise SchemaError(f"vlinks[{vl.vlink_id}]", "endpoint is not a vnf")
            if vl.bandwidth_mbps <= 0 or vl.max_latency_ms <= 0:
                raise SchemaError(f"vlinks[{vl.vlink_id}]",
                                  "bandwidth and latency bound must be > 0")
            if (vl.src, vl.dst) in seen_edges:
                raise SchemaError(f"vlinks[{vl.vlink_id}]", "duplicate edge")
            seen_edges.add((vl.src, vl.dst))
            indegree[vl.dst] += 1
        for vnf in self.vnfs:
            if min(vnf.cpu, vnf.mem, vnf.storage) <= 0:
                raise SchemaError(f"vnfs[{vnf.vnf_id}]",
                                  "resource demands must be positive")
        self._check_acyclic(indegree)

    def _check_acyclic(self, indegree: dict[str, int]) -> None:
        indegree = dict(indegree)
        out = {v.vnf_id: [] for v in self.vnfs}
        for vl in self.vlinks:
            out[vl.src].append(vl.dst)
        ready = [i for i, d in indegree.items() if d == 0]
        done = 0
        while ready:
            done += 1
            for nxt in out[ready.pop()]:
                indegree[nxt] -= 1
                if indegree[nxt] == 0:
                    ready.append(nxt)
        if done != len(self.vnfs):
            raise SchemaError("vlinks", "graph has a cycle")

    def vnf(self, vnf_id: str) -> Vnf:
        for v in self.vnfs:
            if v.vnf_id == vnf_id:
                return v
        raise KeyError(vnf_id)


class Catalogue:
    """Predefined chain templates keyed by (service_type, slice_kind)."""

    def __init__(self, entries: Mapping[tuple[str, str], ServiceGraph] | None = None):
        self._entries: dict[tuple[str, str], ServiceGraph] = dict(entries or {})

    def register(self, service_type: str, slice_kind: str, graph: ServiceGraph) -> None:
        self._entries[(service_type, slice_kind)] = graph

    def service_types(self) -> set[str]:
        return {stype for stype, _ in self._entries}

    def has(self, service_type: str, slice_kind: str | None = None) -> bool:
        if slice_kind is None:
            return service_type in self.service_types()
        return (service_type, slice_kind) in self._entries

    def get(self, service_type: str, slice_kind: str) -> ServiceGraph:
        key = (service_type, slice_kind)
        if key not in self._entries:
            raise UnknownServiceType(
                f"no predefined chain for service {service_type!r} kind {slice_kind!r}")
        return self._entries[key]


@dataclass(frozen=True)
class DescriptorBundle:
    """Simplified slice-profile / NSD / VNFD documents (documented subset,
    not full standards fidelity)."""

    slice_profile_doc: Mapping
    nsd_doc: Mapping
    vnfd_docs: tuple[Mapping, ...]


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def derive_slice_profiles(profile: ServiceProfile) -> list[SliceProfile]:
    """One SliceProfile per requirement, in requirement order."""
    out = []
    for i, req in enumerate(profile.slice_requirements):
        out.append(SliceProfile(
            slice_profile_id=f"{profile.profile_id}-s{i + 1}",
            sst=SST_BY_KIND[req.slice_kind],
            latency_ms=req.max_latency_ms,
            throughput_mbps=req.min_throughput_mbps,
            coverage_domains=ALL_DOMAIN_KINDS,
            source_requirement=req))
    return out


def lookup_chain(catalogue: Catalogue, service_type: str, slice_kind: str) -> ServiceGraph:
    """Deep copy of the catalogue template; caller mutations never leak back."""
    return copy.deepcopy(catalogue.get(service_type, slice_kind))


def instantiate_graph(template: ServiceGraph, requirement: SliceRequirement) -> ServiceGraph:
    """Apply a requirement's edge constraints to a chain template.

    Slice constraints live on edges: every virtual link carries the
    requirement's latency bound and throughput demand.
    """
    vlinks = tuple(replace(vl,
                           bandwidth_mbps=requirement.min_throughput_mbps,
                           max_latency_ms=requirement.max_latency_ms)
                   for vl in template.vlinks)
    return ServiceGraph(vnfs=template.vnfs, vlinks=vlinks)


def render_descriptors(nsi_plan: "EmbeddingPlan", slice_profile: SliceProfile) -> DescriptorBundle:
    """Deterministic descriptor documents for a complete plan.

    One NSD listing vnf instances and virtual links, one VNFD per distinct
    function kind. Key order is fixed, so identical inputs give identical
    bytes.
    """
    graph = nsi_plan.graph
    unmapped = [v.vnf_id for v in graph.vnfs if v.vnf_id not in nsi_plan.node_map]
    if unmapped:
        raise IncompletePlan("unmapped vnfs: " + ", ".join(sorted(unmapped)))

    req = slice_profile.source_requirement
    slice_profile_doc = {
        "kind": "SliceProfile",
        "slice_profile_id": slice_profile.slice_profile_id,
        "sst": slice_profile.sst,
        "max_latency_ms": slice_profile.latency_ms,
        "min_throughput_mbps": slice_profile.throughput_mbps,
        "reliability": req.reliability,
        "isolation": req.isolation_required,
        "encryption": req.encryption_required,
        "coverage_domains": list(slice_profile.coverage_domains),
    }

    vnf_instances = []
    for vnf in graph.vnfs:
        domain_id, node_id = nsi_plan.node_map[vnf.vnf_id]
        vnf_instances.append({
            "instance_id": vnf.vnf_id,
            "vnfd_ref": _vnfd_id(vnf.function_kind),
            "domain": domain_id,
            "node": node_id,
        })
    vlink_docs = []
    for vl in graph.vlinks:
        vlink_docs.append({
            "vlink_id": vl.vlink_id,
            "src": vl.src,
            "dst": vl.dst,
            "bandwidth_mbps": vl.bandwidth_mbps,
            "max_latency_ms": vl.max_latency_ms,
            "path": list(nsi_plan.link_map.get(vl.vlink_id, [])),
        })
    nsd_doc = {
        "kind": "NSD",
        "nsd_id": f"nsd-{slice_profile.slice_profile_id}",
        "slice_profile_ref": slice_profile.slice_profile_id,
        "vnf_instances": vnf_instances,
        "virtual_links": vlink_docs,
    }

    vnfd_docs = []
    seen_kinds: set[str] = set()
    for vnf in graph.vnfs:
        if vnf.function_kind in seen_kinds:
            continue
        seen_kinds.add(vnf.function_kind)
        vnfd_docs.append({
            "kind": "VNFD",
            "vnfd_id": _vnfd_id(vnf.function_kind),
            "function_kind": vnf.function_kind,
            "requirements": {
                "cpu_vcpu": vnf.cpu,
                "mem_gb": vnf.mem,
                "storage_gb": vnf.storage,
            },
            "domain_affinity": vnf.domain_affinity,
        })

    every_ref = {d["vnfd_ref"] for d in vnf_instances}
    have = {d["vnfd_id"] for d in vnfd_docs}
    if every_ref - have:
        raise IncompletePlan("nsd references vnfds that were not rendered")
    return DescriptorBundle(slice_profile_doc=slice_profile_doc,
                            nsd_doc=nsd_doc, vnfd_docs=tuple(vnfd_docs))


def _vnfd_id(function_kind: str) -> str:
    return f"vnfd-{function_kind}"


def bundle_to_yaml(bundle: DescriptorBundle) -> str:
    """Three-document YAML stream, stable key order."""
    buf = io.StringIO()
    docs = [bundle.slice_profile_doc, bundle.nsd_doc, *bundle.vnfd_docs]
    yaml.dump_all(docs, buf, sort_keys=False, default_flow_style=False)
    return buf.getvalue()


def validate_service_profile(doc: Mapping, tiers: TierTable | None = None) -> ServiceProfile:
    """Parse and invariant-check a service-profile document.

    Error paths use the canonical field names (slice_requirements[i].field).
    """
    tiers = tiers or load_tier_table()
    if not isinstance(doc, Mapping):
        raise SchemaError("", "profile document must be a mapping")
    for key in ("profile_id", "service_type", "subscriber"):
        if key not in doc:
            raise SchemaError(key, "missing required key")
    raw_slices = doc.get("slices", doc.get("slice_requirements"))
    if not raw_slices:
        raise SchemaError("slice_requirements", "at least one slice requirement needed")

    requirements = []
    for i, sdoc in enumerate(raw_slices):
        at = f"slice_requirements[{i}]"
        kind = sdoc.get("kind")
        if kind not in SLICE_KINDS:
            raise SchemaError(f"{at}.kind", f"must be one of {', '.join(SLICE_KINDS)}")
        latency = sdoc.get("max_latency_ms")
        if not isinstance(latency, (int, float)) or latency <= 0:
            raise SchemaError(f"{at}.max_latency_ms", "must be > 0")
        throughput = sdoc.get("min_throughput_mbps")
        if not isinstance(throughput, (int, float)) or throughput <= 0:
            raise SchemaError(f"{at}.min_throughput_mbps", "must be > 0")
        reliability = sdoc.get("reliability", tiers.default_reliability.get(kind))
        if not isinstance(reliability, (int, float)) or not 0 < reliability <= 1:
            raise SchemaError(f"{at}.reliability", "must be in (0, 1]")
        if kind == "urllc" and latency > tiers.urllc_latency_ceiling_ms:
            raise SchemaError(
                f"{at}.max_latency_ms",
                f"urllc latency {latency:g} ms exceeds ceiling "
                f"{tiers.urllc_latency_ceiling_ms:g} ms")
        requirements.append(SliceRequirement(
            slice_kind=kind,
            max_latency_ms=float(latency),
            min_throughput_mbps=float(throughput),
            reliability=float(reliability),
            isolation_required=bool(sdoc.get("isolation", False)),
            encryption_required=bool(sdoc.get("encryption", False))))
    return ServiceProfile(
        profile_id=str(doc["profile_id"]),
        service_type=str(doc["service_type"]),
        subscriber=str(doc["subscriber"]),
        slice_requirements=tuple(requirements))


def service_profile_to_doc(profile: ServiceProfile) -> dict:
    """Inverse of validate_service_profile (round-trip identity)."""
    return {
        "profile_id": profile.profile_id,
        "service_type": profile.service_type,
        "subscriber": profile.subscriber,
        "slices": [
            {
                "kind": r.slice_kind,
                "max_latency_ms": r.max_latency_ms,
                "min_throughput_mbps": r.min_throughput_mbps,
                "reliability": r.reliability,
                "isolation": r.isolation_required,
                "encryption": r.encryption_required,
            }
            for r in profile.slice_requirements
        ],
    }


def graph_to_doc(graph: ServiceGraph) -> dict:
    return {
        "vnfs": [{"id": v.vnf_id, "function": v.function_kind, "cpu": v.cpu,
                  "mem": v.mem, "storage": v.storage, "affinity": v.domain_affinity}
                 for v in graph.vnfs],
        "vlinks": [{"src": l.src, "dst": l.dst, "bandwidth_mbps": l.bandwidth_mbps,
                    "max_latency_ms": l.max_latency_ms} for l in graph.vlinks],
    }


def graph_from_doc(doc: Mapping) -> ServiceGraph:
    return ServiceGraph(
        vnfs=tuple(Vnf(vnf_id=str(v["id"]), function_kind=str(v["function"]),
                       cpu=v["cpu"], mem=v["mem"], storage=v["storage"],
                       domain_affinity=v.get("affinity")) for v in doc["vnfs"]),
        vlinks=tuple(VirtualLink(src=str(l["src"]), dst=str(l["dst"]),
                                 bandwidth_mbps=l["bandwidth_mbps"],
                                 max_latency_ms=l["max_latency_ms"])
                     for l in doc.get("vlinks", [])))


def load_catalogue(doc: Mapping | Iterable[Mapping]) -> Catalogue:
    """Build a catalogue from the YAML form:
    catalogue[{service_type, kind, vnfs[], vlinks[]}]."""
    if isinstance(doc, Mapping):
        entries = doc.get("catalogue", [])
    else:
        entries = list(doc)
    catalogue = Catalogue()
    for i, entry in enumerate(entries):
        at = f"catalogue[{i}]"
        for key in ("service_type", "kind", "vnfs"):
            if key not in entry:
                raise SchemaError(f"{at}.{key}", "missing required key")
        if entry["kind"] not in SLICE_KINDS:
            raise SchemaError(f"{at}.kind", f"must be one of {', '.join(SLICE_KINDS)}")
        vnfs = tuple(Vnf(
            vnf_id=str(v["id"]), function_kind=str(v["function"]),
            cpu=v["cpu"], mem=v["mem"], storage=v["storage"],
            domain_affinity=v.get("affinity"))
            for v in entry["vnfs"])
        vlinks = tuple(VirtualLink(
            src=str(l["src"]), dst=str(l["dst"]),
            bandwidth_mbps=l["bandwidth_mbps"], max_latency_ms=l["max_latency_ms"])
            for l in entry.get("vlinks", []))
        catalogue.register(entry["service_type"], entry["kind"],
                           ServiceGraph(vnfs=vnfs, vlinks=vlinks))
    return catalogue
