"""Slice lifecycle engine: instance creation, per-domain segment partitioning,
deterministic deploy with compensating rollback, tenant augmentation,
telemetry ingestion, auto-scaling, and SLA checks.

All mutations of an instance go through this single engine (one logical
command queue); domain allocations happen only via substrate receipts, so
every unit of capacity is traceable to a deployed segment.
"""

from __future__ import annotations

import copy
import json
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Mapping

from . import intent
from .embedder import (
    EmbeddingPlan,
    EmbedPolicy,
    InfeasibilityReport,
    check_plan,
    embed,
    plan_to_doc,
)
from .errors import (
    AlreadyTerminated,
    EmptyWindow,
    InsufficientCapacity,
    InsufficientSamples,
    InvalidTransition,
    NonMonotonicTimestamp,
    SchemaError,
    StaleSnapshot,
    UnknownNsi,
    UnknownSegment,
    UnstitchablePath,
)
from .profiles import (
    ServiceGraph,
    ServiceProfile,
    SliceProfile,
    SliceRequirement,
    graph_to_doc,
    instantiate_graph,
)
from .substrate import Network, ResourceDemand, AllocationReceipt

NSI_STATUSES = ("Requested", "Modelled", "AwaitingChoice", "Deploying",
                "Active", "Augmenting", "Terminated", "Failed")

# Modelled -> Deploying covers flows with no human confirmation step.
LEGAL_TRANSITIONS = {
    "Requested": {"Modelled", "Terminated"},
    "Modelled": {"AwaitingChoice", "Deploying", "Terminated"},
    "AwaitingChoice": {"Modelled", "Deploying", "Terminated"},
    "Deploying": {"Active", "Failed", "Terminated"},
    "Active": {"Augmenting", "Terminated"},
    "Augmenting": {"Active", "Terminated"},
    "Failed": {"Terminated"},
    "Terminated": set(),
}

AUGMENTABLE_ATTRIBUTES = ("max_latency_ms", "min_throughput_mbps")


class TickClock:
    """Deterministic clock for replayable runs; one unit per tick."""

    def __init__(self, start: float = 0.0):
        self._now = start

    def now(self) -> float:
        return self._now

    def advance(self, dt: float = 1.0) -> float:
        self._now += dt
        return self._now


@dataclass
class Segment:
    segment_id: str
    nsi_id: str
    domain_id: str
    nodes: dict[str, ResourceDemand]            # node_id -> demand
    paths: list[tuple[str, ...]]                # in-domain link-id runs
    link_demands: dict[str, float]              # link_id -> bandwidth
    stitch_points: list[tuple[str, str]]        # (border node, peer domain)
    status: str = "Planned"
    receipt: AllocationReceipt | None = None


@dataclass
class NetworkSliceInstance:
    nsi_id: str
    slice_profile: SliceProfile
    status: str
    plan: EmbeddingPlan | None
    segments: list[Segment]
    created_at: float
    updated_at: float
    requirement: SliceRequirement
    template_graph: ServiceGraph
    interconnect_demands: dict[str, float] = field(default_factory=dict)
    interconnect_receipt: AllocationReceipt | None = None
    failure_domain: str | None = None

    @property
    def slice_profile_id(self) -> str:
        return self.slice_profile.slice_profile_id


@dataclass(frozen=True)
class AugmentRequest:
    request_id: str
    nsi_id: str
    attribute: str
    new_value: float
    requested_by: str

    def __post_init__(self):
        if self.attribute not in AUGMENTABLE_ATTRIBUTES:
            raise SchemaError("attribute",
                              f"must be one of {', '.join(AUGMENTABLE_ATTRIBUTES)}")
        if self.new_value <= 0:
            raise SchemaError("new_value", "must be > 0")


@dataclass(frozen=True)
class TelemetrySample:
    nsi_id: str
    segment_id: str
    timestamp: float
    throughput_used_mbps: float
    cpu_used_vcpu: float
    observed_latency_ms: float

    def __post_init__(self):
        if min(self.throughput_used_mbps, self.cpu_used_vcpu,
               self.observed_latency_ms) < 0:
            raise SchemaError("telemetry", "sample values must be non-negative")


@dataclass(frozen=True)
class SlaVerdict:
    nsi_id: str
    window: tuple[float, float]
    violations: tuple[tuple[str, float, float], ...]   # (attribute, worst, bound)
    compliant: bool


@dataclass(frozen=True)
class ScalePolicy:
    window: int = 10
    high: float = 0.8
    low: float = 0.3
    step_mbps: float = 10.0
    floor_mbps: float = 10.0


@dataclass(frozen=True)
class ScaleDecision:
    nsi_id: str
    action: str                    # ScaleUp | ScaleDown | Hold | Failed
    segment_id: str | None = None
    dimension: str = "bandwidth"
    observed_utilization: float = 0.0
    applied: bool = False
    detail: str = ""


class EventLog:
    """Append-only transition log; one JSON record per state change."""

    def __init__(self, path=None):
        self.records: list[dict] = []
        self._path = path
        self._seq = 0

    def record(self, op: str, nsi_id: str, before: str | None,
               after: str | None, detail: str = "") -> None:
        self._seq += 1
        entry = {"seq": self._seq, "op": op, "nsi_id": nsi_id,
                 "before": before, "after": after, "detail": detail}
        self.records.append(entry)
        if self._path is not None:
            with open(self._path, "a") as fh:
                fh.write(json.dumps(entry, sort_keys=True) + "\n")


class Orchestrator:
    """Owns the live network, every slice instance, and their telemetry."""

    def __init__(self, network: Network, clock: TickClock | None = None,
                 event_log: EventLog | None = None, ring_size: int = 256):
        self.network = network
        self.clock = clock or TickClock()
        self.events = event_log or EventLog()
        self.ring_size = ring_size
        self.nsis: dict[str, NetworkSliceInstance] = {}
        self._nsi_seq = 0
        self._segment_index: dict[str, tuple[str, str]] = {}   # seg -> (nsi, domain)
        self._telemetry: dict[str, deque[TelemetrySample]] = {}

    # -- helpers -----------------------------------------------------------

    def get(self, nsi_id: str) -> NetworkSliceInstance:
        if nsi_id not in self.nsis:
            raise UnknownNsi(f"no such slice instance {nsi_id!r}")
        return self.nsis[nsi_id]

    def _transition(self, nsi: NetworkSliceInstance, after: str, detail: str = ""):
        before = nsi.status
        if after not in LEGAL_TRANSITIONS.get(before, set()):
            raise InvalidTransition(f"{nsi.nsi_id}: {before} -> {after}")
        nsi.status = after
        nsi.updated_at = self.clock.now()
        self.events.record("transition", nsi.nsi_id, before, after, detail)

    def effective_graph(self, nsi: NetworkSliceInstance) -> ServiceGraph:
        return instantiate_graph(nsi.template_graph, nsi.requirement)

    # -- lifecycle -----------------------------------------------------------

    def create_request(self, slice_profile: SliceProfile,
                       template_graph: ServiceGraph) -> NetworkSliceInstance:
        """Register a slice request before any plan exists."""
        self._nsi_seq += 1
        nsi = NetworkSliceInstance(
            nsi_id=f"nsi-{self._nsi_seq:04d}",
            slice_profile=slice_profile,
            status="Requested",
            plan=None,
            segments=[],
            created_at=self.clock.now(),
            updated_at=self.clock.now(),
            requirement=slice_profile.source_requirement,
            template_graph=template_graph)
        self.nsis[nsi.nsi_id] = nsi
        self.events.record("create", nsi.nsi_id, None, "Requested")
        return nsi

    def attach_plan(self, nsi: NetworkSliceInstance, plan: EmbeddingPlan) -> None:
        """Re-validate a plan against live state and record it (-> Modelled)."""
        violations = check_plan(plan, self.network)
        if violations:
            raise StaleSnapshot(violations)
        nsi.plan = plan
        if nsi.status == "Requested":
            self._transition(nsi, "Modelled", "plan attached")
        else:
            nsi.updated_at = self.clock.now()
            self.events.record("replan", nsi.nsi_id, nsi.status, nsi.status)

    def create_nsi(self, slice_profile: SliceProfile, plan: EmbeddingPlan,
                   template_graph: ServiceGraph | None = None) -> NetworkSliceInstance:
        """One-shot request + plan attachment; lands in Modelled."""
        nsi = self.create_request(slice_profile, template_graph or plan.graph)
        self.attach_plan(nsi, plan)
        return nsi

    def mark_awaiting_choice(self, nsi: NetworkSliceInstance) -> None:
        self._transition(nsi, "AwaitingChoice", "operator confirmation pending")

    # -- segment partitioning -------------------------------------------------

    def partition_segments(self, nsi: NetworkSliceInstance) -> list[Segment]:
        """One segment per domain the plan touches; cross-domain paths split
        at interconnects with matching stitch points on both sides."""
        if nsi.plan is None:
            raise InvalidTransition(f"{nsi.nsi_id}: no plan to partition")
        plan = nsi.plan
        graph = plan.graph

        def domain_of_node(node_id: str) -> str:
            for did in sorted(self.network.domains):
                if node_id in self.network.domains[did].nodes:
                    return did
            raise UnstitchablePath(f"node {node_id} belongs to no domain")

        segments: dict[str, Segment] = {}

        def segment_for(domain_id: str) -> Segment:
            if domain_id not in segments:
                segments[domain_id] = Segment(
                    segment_id=f"{nsi.nsi_id}-{domain_id}",
                    nsi_id=nsi.nsi_id, domain_id=domain_id,
                    nodes={}, paths=[], link_demands={}, stitch_points=[])
            return segments[domain_id]

        for vnf in graph.vnfs:
            domain_id, node_id = plan.node_map[vnf.vnf_id]
            seg = segment_for(domain_id)
            seg.nodes[node_id] = seg.nodes.get(node_id, ResourceDemand()) \
                + ResourceDemand(vnf.cpu, vnf.mem, vnf.storage)

        interconnect_demands: dict[str, float] = {}
        for vl in graph.vlinks:
            path = plan.link_map.get(vl.vlink_id, ())
            here = plan.node_map[vl.src][1]
            here_domain = domain_of_node(here)
            fragment: list[str] = []
            for lid in path:
                owner = None
                for did in sorted(self.network.domains):
                    if lid in self.network.domains[did].links:
                        owner = did
                        break
                if owner is not None:
                    link = self.network.domains[owner].links[lid]
                    if owner != here_domain:
                        raise UnstitchablePath(
                            f"{vl.vlink_id}: link {lid} of {owner} reached from "
                            f"{here_domain} without an interconnect")
                    fragment.append(lid)
                    seg = segment_for(owner)
                    seg.link_demands[lid] = seg.link_demands.get(lid, 0.0) \
                        + vl.bandwidth_mbps
                    here = link.other_end(here)
                elif lid in self.network.interconnects.links:
                    link = self.network.interconnects.links[lid]
                    peer = link.other_end(here)
                    peer_domain = domain_of_node(peer)
                    if fragment:
                        segment_for(here_domain).paths.append(tuple(fragment))
                        fragment = []
                    segment_for(here_domain).stitch_points.append((here, peer_domain))
                    segment_for(peer_domain).stitch_points.append((peer, here_domain))
                    interconnect_demands[lid] = interconnect_demands.get(lid, 0.0) \
                        + vl.bandwidth_mbps
                    here = peer
                    here_domain = peer_domain
                else:
                    raise UnstitchablePath(
                        f"{vl.vlink_id}: link {lid} is neither a domain link "
                        f"nor a registered interconnect")
            if fragment:
                segment_for(here_domain).paths.append(tuple(fragment))

        nsi.segments = [segments[d] for d in sorted(segments)]
        nsi.interconnect_demands = interconnect_demands
        for seg in nsi.segments:
            self._segment_index[seg.segment_id] = (nsi.nsi_id, seg.domain_id)
            self._telemetry.setdefault(seg.segment_id, deque(maxlen=self.ring_size))
        nsi.updated_at = self.clock.now()
        self.events.record("partition", nsi.nsi_id, nsi.status, nsi.status,
                           f"{len(nsi.segments)} segments")
        return nsi.segments

    # -- deployment -------------------------------------------------------------

    def deploy(self, nsi: NetworkSliceInstance) -> NetworkSliceInstance:
        """Allocate per-domain in lexicographic order; compensate on failure."""
        if nsi.status not in ("Modelled", "AwaitingChoice"):
            raise InvalidTransition(f"{nsi.nsi_id}: cannot deploy from {nsi.status}")
        if not nsi.segments:
            raise InvalidTransition(f"{nsi.nsi_id}: segments not partitioned")
        self._transition(nsi, "Deploying")

        deployed: list[Segment] = []
        try:
            for seg in nsi.segments:                       # sorted by domain id
                domain = self.network.domains[seg.domain_id]
                seg.receipt = domain.allocate(seg.nodes, seg.link_demands)
                seg.status = "Deployed"
                deployed.append(seg)
            if nsi.interconnect_demands:
                nsi.interconnect_receipt = self.network.interconnects.allocate(
                    {}, nsi.interconnect_demands)
        except InsufficientCapacity as exc:
            # the failed allocate changed nothing; undo the successful ones
            for seg in reversed(deployed):
                self.network.domains[seg.domain_id].release(seg.receipt)
                seg.receipt = None
                seg.status = "Planned"
            failing = self._failing_domain(nsi, deployed, exc)
            nsi.failure_domain = failing
            self._transition(nsi, "Failed", f"{failing}: {exc}")
            raise
        self._transition(nsi, "Active")
        return nsi

    def _failing_domain(self, nsi: NetworkSliceInstance,
                        deployed: list[Segment], exc: InsufficientCapacity) -> str:
        for seg in nsi.segments:
            if seg not in deployed:
                return seg.domain_id
        return "~interconnect"

    def terminate(self, nsi: NetworkSliceInstance) -> NetworkSliceInstance:
        if nsi.status == "Terminated":
            raise AlreadyTerminated(nsi.nsi_id)
        for seg in reversed(nsi.segments):
            if seg.status == "Deployed" and seg.receipt is not None:
                self.network.domains[seg.domain_id].release(seg.receipt)
                seg.receipt = None
                seg.status = "Released"
        if nsi.interconnect_receipt is not None:
            self.network.interconnects.release(nsi.interconnect_receipt)
            nsi.interconnect_receipt = None
        self._transition(nsi, "Terminated")
        return nsi

    # -- augmentation ----------------------------------------------------------

    def augment(self, nsi: NetworkSliceInstance, request: AugmentRequest):
        """Re-embed under the new constraint, treating this instance's own
        allocations as free; atomic swap on success, RelaxationProposal on
        infeasibility (instance untouched)."""
        if nsi.status != "Active":
            raise InvalidTransition(f"{nsi.nsi_id}: augment requires Active, "
                                    f"was {nsi.status}")
        if request.nsi_id != nsi.nsi_id:
            raise UnknownNsi(f"request targets {request.nsi_id}, got {nsi.nsi_id}")

        new_req = replace(nsi.requirement, **{request.attribute: request.new_value})

        if request.attribute == "max_latency_ms" and \
                request.new_value >= nsi.requirement.max_latency_ms:
            # weaker bound: the current mapping satisfies it as-is
            self._transition(nsi, "Augmenting", f"loosen {request.attribute}")
            nsi.requirement = new_req
            nsi.plan = self._replan_bounds(nsi)
            self._transition(nsi, "Active", "no re-route needed")
            return nsi

        scratch = copy.deepcopy(self.network)
        self._release_in_scratch(scratch, nsi)
        scratch_db = scratch.build_resource_db()
        new_graph = instantiate_graph(nsi.template_graph, new_req)
        policy = EmbedPolicy(anti_affinity=nsi.plan.anti_affinity if nsi.plan else False)
        result = embed(new_graph, scratch_db, policy)

        if isinstance(result, InfeasibilityReport):
            profile = self._augment_profile(nsi, new_req, request)

            def oracle(candidate) -> bool:
                req = candidate.slice_requirements[0]
                graph = instantiate_graph(nsi.template_graph, req)
                return isinstance(embed(graph, scratch_db, policy), EmbeddingPlan)

            proposal = intent.propose_relaxation(
                profile, result, oracle, requirement_index=0)
            self.events.record("augment-infeasible", nsi.nsi_id, nsi.status,
                               nsi.status, f"{request.attribute}={request.new_value:g}")
            return proposal

        self._transition(nsi, "Augmenting",
                         f"{request.attribute} -> {request.new_value:g}")
        old = self._snapshot_allocation(nsi)
        try:
            self._release_in(self.network, nsi)
            nsi.requirement = new_req
            nsi.plan = result
            self.partition_segments(nsi)
            for seg in nsi.segments:
                domain = self.network.domains[seg.domain_id]
                seg.receipt = domain.allocate(seg.nodes, seg.link_demands)
                seg.status = "Deployed"
            if nsi.interconnect_demands:
                nsi.interconnect_receipt = self.network.interconnects.allocate(
                    {}, nsi.interconnect_demands)
        except InsufficientCapacity:
            # scratch said yes but live said no: restore the previous footprint
            self._restore_allocation(nsi, old)
            self._transition(nsi, "Active", "augment swap failed; restored")
            raise
        self._transition(nsi, "Active", "augmented")
        return nsi

    def _replan_bounds(self, nsi: NetworkSliceInstance) -> EmbeddingPlan:
        """Rebuild the plan object against the current requirement without
        changing any mapping."""
        plan = nsi.plan
        graph = self.effective_graph(nsi)
        return EmbeddingPlan(
            node_map=plan.node_map, link_map=plan.link_map,
            metrics=plan.metrics, graph=graph,
            snapshot_version=plan.snapshot_version,
            anti_affinity=plan.anti_affinity)

    def _augment_profile(self, nsi: NetworkSliceInstance, req: SliceRequirement,
                         request: AugmentRequest):
        return ServiceProfile(
            profile_id=f"{nsi.nsi_id}-augment-{request.request_id}",
            service_type="augment",
            subscriber=request.requested_by,
            slice_requirements=(req,))

    def _release_in(self, network: Network, nsi: NetworkSliceInstance) -> None:
        for seg in reversed(nsi.segments):
            if seg.status == "Deployed" and seg.receipt is not None:
                network.domains[seg.domain_id].release(seg.receipt)
                seg.receipt = None
                seg.status = "Planned"
        if nsi.interconnect_receipt is not None:
            network.interconnects.release(nsi.interconnect_receipt)
            nsi.interconnect_receipt = None

    def _release_in_scratch(self, scratch: Network,
                            nsi: NetworkSliceInstance) -> None:
        """Free the instance's footprint on a what-if copy without touching
        the live segment bookkeeping."""
        for seg in reversed(nsi.segments):
            if seg.status == "Deployed" and seg.receipt is not None:
                scratch.domains[seg.domain_id].release(seg.receipt)
        if nsi.interconnect_receipt is not None:
            scratch.interconnects.release(nsi.interconnect_receipt)

    def _snapshot_allocation(self, nsi: NetworkSliceInstance):
        return (copy.deepcopy(nsi.requirement), nsi.plan,
                copy.deepcopy(nsi.segments), dict(nsi.interconnect_demands))

    def _restore_allocation(self, nsi: NetworkSliceInstance, old) -> None:
        requirement, plan, segments, inter = old
        self._release_in(self.network, nsi)
        nsi.requirement = requirement
        nsi.plan = plan
        nsi.segments = segments
        nsi.interconnect_demands = inter
        for seg in nsi.segments:
            domain = self.network.domains[seg.domain_id]
            seg.receipt = domain.allocate(seg.nodes, seg.link_demands)
            seg.status = "Deployed"
        if nsi.interconnect_demands:
            nsi.interconnect_receipt = self.network.interconnects.allocate(
                {}, nsi.interconnect_demands)

    # -- telemetry / autoscale / SLA -------------------------------------------

    def ingest_telemetry(self, sample: TelemetrySample) -> None:
        if sample.segment_id not in self._segment_index:
            raise UnknownSegment(f"no such segment {sample.segment_id!r}")
        buffer = self._telemetry[sample.segment_id]
        if buffer and sample.timestamp < buffer[-1].timestamp:
            raise NonMonotonicTimestamp(
                f"{sample.segment_id}: {sample.timestamp:g} after "
                f"{buffer[-1].timestamp:g}")
        buffer.append(sample)
        nsi = self.get(sample.nsi_id)
        nsi.updated_at = self.clock.now()

    def telemetry(self, segment_id: str) -> list[TelemetrySample]:
        if segment_id not in self._telemetry:
            raise UnknownSegment(f"no such segment {segment_id!r}")
        return list(self._telemetry[segment_id])

    def play_trace(self, nsi: NetworkSliceInstance, trace: Mapping) -> int:
        """Feed a piecewise-constant load trace (scenario `telemetry` entry);
        one sample per second of duration. Returns the sample count."""
        segment = next((s for s in nsi.segments
                        if s.domain_id == trace["segment_ref"]
                        or s.segment_id == trace["segment_ref"]), None)
        if segment is None:
            raise UnknownSegment(f"trace targets {trace['segment_ref']!r}")
        count = 0
        for step in trace.get("steps", []):
            for _ in range(int(step.get("duration_s", 1))):
                ts = self.clock.advance(1.0)
                self.ingest_telemetry(TelemetrySample(
                    nsi_id=nsi.nsi_id, segment_id=segment.segment_id,
                    timestamp=ts,
                    throughput_used_mbps=step.get("throughput_mbps", 0.0),
                    cpu_used_vcpu=step.get("cpu_vcpu", 0.0),
                    observed_latency_ms=step.get("latency_ms", 0.0)))
                count += 1
        return count

    def autoscale_tick(self, nsi: NetworkSliceInstance,
                       policy: ScalePolicy | None = None) -> ScaleDecision:
        """Window-mean bandwidth utilization against provisioned throughput;
        scale via the augment machinery, one decision per tick."""
        policy = policy or ScalePolicy()
        if nsi.status != "Active":
            raise InvalidTransition(f"{nsi.nsi_id}: autoscale requires Active")
        provisioned = nsi.requirement.min_throughput_mbps

        utilizations: list[tuple[float, str]] = []
        for seg in nsi.segments:
            buffer = self._telemetry.get(seg.segment_id, ())
            if len(buffer) < policy.window:
                raise InsufficientSamples(
                    f"{seg.segment_id}: {len(buffer)} samples < window {policy.window}")
            window = list(buffer)[-policy.window:]
            mean_used = sum(s.throughput_used_mbps for s in window) / policy.window
            utilizations.append((mean_used / provisioned, seg.segment_id))

        # act on the segment furthest outside the band; ties by segment id
        def deviation(pair):
            value = pair[0]
            if value > policy.high:
                return value - policy.high
            if value < policy.low:
                return policy.low - value
            return 0.0

        utilizations.sort(key=lambda pair: (-deviation(pair), pair[1]))
        observed, segment_id = utilizations[0]

        if observed > policy.high:
            action, new_value = "ScaleUp", provisioned + policy.step_mbps
        elif observed < policy.low:
            if provisioned <= policy.floor_mbps:
                return ScaleDecision(nsi.nsi_id, "Hold", segment_id,
                                     observed_utilization=observed,
                                     detail="already at floor")
            action = "ScaleDown"
            new_value = max(policy.floor_mbps, provisioned - policy.step_mbps)
        else:
            return ScaleDecision(nsi.nsi_id, "Hold", segment_id,
                                 observed_utilization=observed)

        request = AugmentRequest(
            request_id=f"scale-{segment_id}-{int(self.clock.now())}",
            nsi_id=nsi.nsi_id, attribute="min_throughput_mbps",
            new_value=new_value, requested_by="autoscaler")
        try:
            outcome = self.augment(nsi, request)
        except InsufficientCapacity as exc:
            self.events.record("alert", nsi.nsi_id, nsi.status, nsi.status,
                               f"autoscale failed: {exc}")
            return ScaleDecision(nsi.nsi_id, "Failed", segment_id,
                                 observed_utilization=observed, detail=str(exc))
        if isinstance(outcome, NetworkSliceInstance):
            return ScaleDecision(nsi.nsi_id, action, segment_id,
                                 observed_utilization=observed, applied=True,
                                 detail=f"throughput -> {new_value:g} Mbps")
        self.events.record("alert", nsi.nsi_id, nsi.status, nsi.status,
                           "autoscale infeasible: substrate exhausted")
        return ScaleDecision(nsi.nsi_id, "Failed", segment_id,
                             observed_utilization=observed,
                             detail="scale-up infeasible at every tier")

    def check_sla(self, nsi: NetworkSliceInstance,
                  window: tuple[float, float]) -> SlaVerdict:
        start, end = window
        samples: list[TelemetrySample] = []
        for seg in nsi.segments:
            samples.extend(s for s in self._telemetry.get(seg.segment_id, ())
                           if start <= s.timestamp <= end)
        if not samples:
            raise EmptyWindow(f"{nsi.nsi_id}: no telemetry in [{start:g}, {end:g}]")
        violations = []
        worst_latency = max(s.observed_latency_ms for s in samples)
        if worst_latency > nsi.requirement.max_latency_ms:
            violations.append(("max_latency_ms", worst_latency,
                               nsi.requirement.max_latency_ms))
        worst_throughput = min(s.throughput_used_mbps for s in samples)
        if worst_throughput < nsi.requirement.min_throughput_mbps:
            violations.append(("min_throughput_mbps", worst_throughput,
                               nsi.requirement.min_throughput_mbps))
        return SlaVerdict(nsi_id=nsi.nsi_id, window=window,
                          violations=tuple(violations),
                          compliant=not violations)

    # -- audit -------------------------------------------------------------------

    def audit_conservation(self) -> list[str]:
        """Every element's allocation must equal the sum of Deployed segment
        receipts; returns mismatches (empty = conserved)."""
        expected_nodes: dict[tuple[str, str, str], float] = {}
        expected_links: dict[tuple[str, str], float] = {}
        for nsi in self.nsis.values():
            for seg in nsi.segments:
                if seg.status != "Deployed" or seg.receipt is None:
                    continue
                for nid, demand in seg.receipt.node_deltas.items():
                    for dim in ("cpu", "mem", "storage"):
                        key = (seg.domain_id, nid, dim)
                        expected_nodes[key] = expected_nodes.get(key, 0.0) \
                            + getattr(demand, dim)
                for lid, bw in seg.receipt.link_deltas.items():
                    key = (seg.domain_id, lid)
                    expected_links[key] = expected_links.get(key, 0.0) + bw
            if nsi.interconnect_receipt is not None:
                for lid, bw in nsi.interconnect_receipt.link_deltas.items():
                    key = ("~interconnect", lid)
                    expected_links[key] = expected_links.get(key, 0.0) + bw

        problems = []
        for did in sorted(self.network.domains):
            domain = self.network.domains[did]
            for nid, node in sorted(domain.nodes.items()):
                for dim in ("cpu", "mem", "storage"):
                    want = expected_nodes.get((did, nid, dim), 0.0)
                    have = getattr(node, f"{dim}_allocated")
                    if have != want:
                        problems.append(f"{did}/{nid}.{dim}: allocated {have:g} "
                                        f"!= receipts {want:g}")
            for lid, link in sorted(domain.links.items()):
                want = expected_links.get((did, lid), 0.0)
                if link.bandwidth_allocated != want:
                    problems.append(f"{did}/{lid}: allocated "
                                    f"{link.bandwidth_allocated:g} != receipts {want:g}")
        for lid, link in sorted(self.network.interconnects.links.items()):
            want = expected_links.get(("~interconnect", lid), 0.0)
            if link.bandwidth_allocated != want:
                problems.append(f"~interconnect/{lid}: allocated "
                                f"{link.bandwidth_allocated:g} != receipts {want:g}")
        return problems


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def requirement_to_doc(req: SliceRequirement) -> dict:
    return {"kind": req.slice_kind, "max_latency_ms": req.max_latency_ms,
            "min_throughput_mbps": req.min_throughput_mbps,
            "reliability": req.reliability,
            "isolation": req.isolation_required,
            "encryption": req.encryption_required}


def requirement_from_doc(doc: Mapping) -> SliceRequirement:
    return SliceRequirement(
        slice_kind=doc["kind"], max_latency_ms=doc["max_latency_ms"],
        min_throughput_mbps=doc["min_throughput_mbps"],
        reliability=doc["reliability"],
        isolation_required=doc.get("isolation", False),
        encryption_required=doc.get("encryption", False))


def slice_profile_to_doc(sp: SliceProfile) -> dict:
    return {"slice_profile_id": sp.slice_profile_id, "sst": sp.sst,
            "latency_ms": sp.latency_ms, "throughput_mbps": sp.throughput_mbps,
            "coverage_domains": list(sp.coverage_domains),
            "source_requirement": requirement_to_doc(sp.source_requirement)}


def slice_profile_from_doc(doc: Mapping) -> SliceProfile:
    return SliceProfile(
        slice_profile_id=doc["slice_profile_id"], sst=doc["sst"],
        latency_ms=doc["latency_ms"], throughput_mbps=doc["throughput_mbps"],
        coverage_domains=tuple(doc.get("coverage_domains", [])),
        source_requirement=requirement_from_doc(doc["source_requirement"]))


def segment_to_doc(seg: Segment) -> dict:
    return {
        "segment_id": seg.segment_id, "nsi_id": seg.nsi_id,
        "domain_id": seg.domain_id,
        "nodes": {nid: {"cpu": d.cpu, "mem": d.mem, "storage": d.storage}
                  for nid, d in sorted(seg.nodes.items())},
        "paths": [list(p) for p in seg.paths],
        "link_demands": dict(sorted(seg.link_demands.items())),
        "stitch_points": [list(sp) for sp in seg.stitch_points],
        "status": seg.status,
    }


def nsi_to_doc(nsi: NetworkSliceInstance) -> dict:
    return {
        "nsi_id": nsi.nsi_id,
        "slice_profile": slice_profile_to_doc(nsi.slice_profile),
        "status": nsi.status,
        "plan": plan_to_doc(nsi.plan) if nsi.plan else None,
        "segments": [segment_to_doc(s) for s in nsi.segments],
        "created_at": nsi.created_at,
        "updated_at": nsi.updated_at,
        "requirement": requirement_to_doc(nsi.requirement),
        "template_graph": graph_to_doc(nsi.template_graph),
    }
