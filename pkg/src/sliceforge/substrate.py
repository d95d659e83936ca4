"""Multi-domain physical infrastructure: per-domain topologies, capacity
accounting with all-or-nothing receipts, topology abstraction between
domains, and the aggregated multi-domain resource database.

Each domain is a mutable, single-writer object (its domain controller);
everything handed across domain boundaries (AbstractedView, ResourceDB) is
an immutable snapshot.
"""

from __future__ import annotations

import copy
import itertools
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping

from .errors import (
    DanglingLinkEndpoint,
    DisconnectedGraph,
    DoubleRelease,
    DuplicateDomain,
    ForeignEndpoint,
    InsufficientCapacity,
    NoBorderNodes,
    NonPositiveCapacity,
    SchemaError,
    StateDrift,
    UnknownElement,
    UnknownReceipt,
)

NODE_KINDS = ("access", "transport", "core", "cloud")

RESOURCE_DIMS = ("cpu", "mem", "storage")


@dataclass(frozen=True)
class ResourceDemand:
    """Per-node demand triple (vCPU, GB, GB)."""

    cpu: float = 0.0
    mem: float = 0.0
    storage: float = 0.0

    def is_zero(self) -> bool:
        return self.cpu == 0 and self.mem == 0 and self.storage == 0

    def __add__(self, other: "ResourceDemand") -> "ResourceDemand":
        return ResourceDemand(self.cpu + other.cpu, self.mem + other.mem,
                              self.storage + other.storage)


@dataclass
class SubstrateNode:
    node_id: str
    domain_id: str
    kind: str
    cpu_capacity: float
    mem_capacity: float
    storage_capacity: float
    cpu_allocated: float = 0.0
    mem_allocated: float = 0.0
    storage_allocated: float = 0.0

    def __post_init__(self):
        if self.kind not in NODE_KINDS:
            raise SchemaError(f"nodes[{self.node_id}].kind",
                              f"unknown kind {self.kind!r}")
        for dim in RESOURCE_DIMS:
            if getattr(self, f"{dim}_capacity") <= 0:
                raise NonPositiveCapacity(
                    f"node {self.node_id}: {dim}_capacity must be > 0")

    def residual(self, dim: str) -> float:
        return getattr(self, f"{dim}_capacity") - getattr(self, f"{dim}_allocated")


@dataclass
class SubstrateLink:
    link_id: str
    endpoints: tuple[str, str]
    bandwidth_capacity: float
    latency: float
    bandwidth_allocated: float = 0.0

    def __post_init__(self):
        self.endpoints = tuple(self.endpoints)  # type: ignore[assignment]
        if self.bandwidth_capacity <= 0:
            raise NonPositiveCapacity(
                f"link {self.link_id}: bandwidth_capacity must be > 0")
        if self.latency <= 0:
            raise NonPositiveCapacity(
                f"link {self.link_id}: latency must be > 0")
        if self.endpoints[0] == self.endpoints[1]:
            raise DanglingLinkEndpoint(
                f"link {self.link_id}: self-loops are not allowed")

    def residual_bandwidth(self) -> float:
        return self.bandwidth_capacity - self.bandwidth_allocated

    def other_end(self, node_id: str) -> str:
        a, b = self.endpoints
        return b if node_id == a else a


@dataclass(frozen=True)
class AllocationReceipt:
    """Exact deltas applied by one allocate() call; the inverse of release()."""

    receipt_id: str
    store_id: str
    node_deltas: Mapping[str, ResourceDemand]
    link_deltas: Mapping[str, float]

    def is_empty(self) -> bool:
        return not self.node_deltas and not self.link_deltas


class CapacityStore:
    """Shared allocate/release machinery for anything that owns nodes/links.

    Allocated values are kept equal to the canonical sum of outstanding
    receipt deltas (summed in receipt-id order), so rollback restores
    bit-identical state and external mutation is detectable.
    """

    def __init__(self, store_id: str):
        self.store_id = store_id
        self.nodes: dict[str, SubstrateNode] = {}
        self.links: dict[str, SubstrateLink] = {}
        self._outstanding: dict[str, AllocationReceipt] = {}
        self._released: set[str] = set()
        self._receipt_seq = itertools.count(1)

    # -- canonical accounting -------------------------------------------

    def _canonical_node_sum(self, node_id: str, dim: str) -> float:
        total = 0.0
        for rid in sorted(self._outstanding):
            demand = self._outstanding[rid].node_deltas.get(node_id)
            if demand is not None:
                total += getattr(demand, dim)
        return total

    def _canonical_link_sum(self, link_id: str) -> float:
        total = 0.0
        for rid in sorted(self._outstanding):
            total += self._outstanding[rid].link_deltas.get(link_id, 0.0)
        return total

    def _recompute(self, node_ids: Iterable[str], link_ids: Iterable[str]) -> None:
        for nid in node_ids:
            node = self.nodes[nid]
            for dim in RESOURCE_DIMS:
                setattr(node, f"{dim}_allocated", self._canonical_node_sum(nid, dim))
        for lid in link_ids:
            self.links[lid].bandwidth_allocated = self._canonical_link_sum(lid)

    def allocation_state(self) -> dict[str, tuple]:
        """Snapshot of every allocated value, for exact state comparison."""
        state: dict[str, tuple] = {}
        for nid, node in sorted(self.nodes.items()):
            state[f"node:{nid}"] = (node.cpu_allocated, node.mem_allocated,
                                    node.storage_allocated)
        for lid, link in sorted(self.links.items()):
            state[f"link:{lid}"] = (link.bandwidth_allocated,)
        return state

    def outstanding_receipts(self) -> list[AllocationReceipt]:
        return [self._outstanding[rid] for rid in sorted(self._outstanding)]

    # -- operations ------------------------------------------------------

    def allocate(self,
                 node_demands: Mapping[str, ResourceDemand] | None = None,
                 link_demands: Mapping[str, float] | None = None) -> AllocationReceipt:
        """Apply all demands atomically or none; returns the exact deltas."""
        node_demands = dict(node_demands or {})
        link_demands = dict(link_demands or {})

        for nid in node_demands:
            if nid not in self.nodes:
                raise UnknownElement(f"{self.store_id}: unknown node {nid!r}")
        for lid in link_demands:
            if lid not in self.links:
                raise UnknownElement(f"{self.store_id}: unknown link {lid!r}")

        # validate everything before touching state
        for nid in sorted(node_demands):
            node = self.nodes[nid]
            demand = node_demands[nid]
            for dim in RESOURCE_DIMS:
                want = getattr(demand, dim)
                if want < 0:
                    raise UnknownElement(f"node {nid}: negative {dim} demand")
                if want > node.residual(dim):
                    raise InsufficientCapacity(nid, want - node.residual(dim), dim)
        for lid in sorted(link_demands):
            link = self.links[lid]
            want = link_demands[lid]
            if want < 0:
                raise UnknownElement(f"link {lid}: negative bandwidth demand")
            if want > link.residual_bandwidth():
                raise InsufficientCapacity(
                    lid, want - link.residual_bandwidth(), "bandwidth")

        receipt = AllocationReceipt(
            receipt_id=f"{self.store_id}-r{next(self._receipt_seq):04d}",
            store_id=self.store_id,
            node_deltas={nid: d for nid, d in node_demands.items() if not d.is_zero()},
            link_deltas={lid: bw for lid, bw in link_demands.items() if bw != 0},
        )
        self._outstanding[receipt.receipt_id] = receipt
        self._recompute(receipt.node_deltas, receipt.link_deltas)
        return receipt

    def release(self, receipt: AllocationReceipt) -> None:
        """Reverse every delta of a receipt produced by this store."""
        rid = receipt.receipt_id
        if rid in self._released:
            raise DoubleRelease(f"receipt {rid} already released")
        if rid not in self._outstanding:
            raise UnknownReceipt(f"receipt {rid} unknown to {self.store_id}")

        # detect external mutation before undoing anything
        for nid in receipt.node_deltas:
            node = self.nodes.get(nid)
            if node is None:
                raise StateDrift(f"node {nid} vanished since allocation")
            for dim in RESOURCE_DIMS:
                if getattr(node, f"{dim}_allocated") != self._canonical_node_sum(nid, dim):
                    raise StateDrift(
                        f"node {nid}: {dim}_allocated diverged from receipt ledger")
        for lid in receipt.link_deltas:
            link = self.links.get(lid)
            if link is None:
                raise StateDrift(f"link {lid} vanished since allocation")
            if link.bandwidth_allocated != self._canonical_link_sum(lid):
                raise StateDrift(
                    f"link {lid}: bandwidth_allocated diverged from receipt ledger")

        del self._outstanding[rid]
        self._released.add(rid)
        self._recompute(receipt.node_deltas, receipt.link_deltas)


class DomainTopology(CapacityStore):
    """One administrative domain: a connected graph with border attachment points."""

    def __init__(self, domain_id: str, operator_name: str,
                 nodes: Iterable[SubstrateNode], links: Iterable[SubstrateLink],
                 border_nodes: Iterable[str]):
        super().__init__(domain_id)
        self.domain_id = domain_id
        self.operator_name = operator_name
        for node in nodes:
            if node.domain_id != domain_id:
                raise SchemaError(f"nodes[{node.node_id}].domain_id",
                                  f"node belongs to {node.domain_id!r}, not {domain_id!r}")
            if node.node_id in self.nodes:
                raise SchemaError(f"nodes[{node.node_id}]", "duplicate node id")
            self.nodes[node.node_id] = node
        for link in links:
            for end in link.endpoints:
                if end not in self.nodes:
                    raise DanglingLinkEndpoint(
                        f"link {link.link_id}: endpoint {end!r} is not a node of {domain_id}")
            if link.link_id in self.links:
                raise SchemaError(f"links[{link.link_id}]", "duplicate link id")
            self.links[link.link_id] = link
        self.border_nodes = tuple(sorted(set(border_nodes)))
        for b in self.border_nodes:
            if b not in self.nodes:
                raise SchemaError("border", f"border node {b!r} is not a node of {domain_id}")
        self._check_connected()
        self._view_version = 0

    def _check_connected(self) -> None:
        if not self.nodes:
            raise DisconnectedGraph(f"domain {self.domain_id} has no nodes")
        seen = set()
        stack = [next(iter(sorted(self.nodes)))]
        adj = self.adjacency()
        while stack:
            nid = stack.pop()
            if nid in seen:
                continue
            seen.add(nid)
            stack.extend(n for n, _ in adj[nid] if n not in seen)
        missing = set(self.nodes) - seen
        if missing:
            raise DisconnectedGraph(
                f"domain {self.domain_id}: nodes unreachable from the rest: "
                + ", ".join(sorted(missing)))

    def adjacency(self) -> dict[str, list[tuple[str, SubstrateLink]]]:
        adj: dict[str, list[tuple[str, SubstrateLink]]] = {n: [] for n in self.nodes}
        for link in self.links.values():
            a, b = link.endpoints
            adj[a].append((b, link))
            adj[b].append((a, link))
        for entries in adj.values():
            entries.sort(key=lambda e: (e[0], e[1].link_id))
        return adj


@dataclass(frozen=True)
class AbstractLink:
    """Metrics of the best path between one border pair."""

    endpoints: tuple[str, str]
    min_latency_ms: float
    bottleneck_bandwidth_mbps: float


@dataclass(frozen=True)
class AbstractedView:
    """What a domain exposes to its peers: borders, border-to-border metrics,
    and aggregate headroom per node kind -- never per-node detail."""

    domain_id: str
    border_nodes: tuple[str, ...]
    abstract_links: tuple[AbstractLink, ...]
    aggregate_headroom: Mapping[str, ResourceDemand]
    version: int
    warnings: tuple[str, ...] = ()

    def headroom_total(self) -> ResourceDemand:
        total = ResourceDemand()
        for demand in self.aggregate_headroom.values():
            total = total + demand
        return total


class InterconnectPool(CapacityStore):
    """Inter-domain links: capacity-managed like a domain, but link-only."""

    def __init__(self, links: Iterable[SubstrateLink] = ()):
        super().__init__("~interconnect")
        for link in links:
            if link.link_id in self.links:
                raise SchemaError(f"interconnects[{link.link_id}]", "duplicate link id")
            self.links[link.link_id] = link


@dataclass(frozen=True)
class ResourceDB:
    """The slice provider's snapshot of every domain plus interconnects.

    ``views`` is the peer-visible abstraction; ``topologies`` holds frozen
    per-domain copies so instance computation can place functions on concrete
    nodes, exactly as the provider's aggregated database does.  Live
    deployment re-validates against the real domains, never this snapshot.
    """

    views: Mapping[str, AbstractedView]
    inter_domain_links: tuple[SubstrateLink, ...]
    snapshot_version: int
    topologies: Mapping[str, DomainTopology]

    def is_empty(self) -> bool:
        return not self.views

    def all_nodes(self) -> Iterator[tuple[str, SubstrateNode]]:
        for did in sorted(self.topologies):
            for nid in sorted(self.topologies[did].nodes):
                yield did, self.topologies[did].nodes[nid]

    def find_link(self, link_id: str) -> SubstrateLink | None:
        for topo in self.topologies.values():
            if link_id in topo.links:
                return topo.links[link_id]
        for link in self.inter_domain_links:
            if link.link_id == link_id:
                return link
        return None

    def domain_of_node(self, node_id: str) -> str | None:
        for did, topo in self.topologies.items():
            if node_id in topo.nodes:
                return did
        return None


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def build_domain(spec: Mapping) -> DomainTopology:
    """Validate a domain spec document and return a fresh topology.

    Expected keys: domain_id, operator, nodes[{id, kind, cpu, mem, storage}],
    links[{id, a, b, bandwidth_mbps, latency_ms}], border[].
    """
    for key in ("domain_id", "nodes"):
        if key not in spec:
            raise SchemaError(key, "missing required key")
    domain_id = str(spec["domain_id"])
    nodes = []
    for i, doc in enumerate(spec.get("nodes", [])):
        for key in ("id", "kind", "cpu", "mem", "storage"):
            if key not in doc:
                raise SchemaError(f"nodes[{i}].{key}", "missing required key")
        nodes.append(SubstrateNode(
            node_id=str(doc["id"]), domain_id=domain_id, kind=doc["kind"],
            cpu_capacity=doc["cpu"], mem_capacity=doc["mem"],
            storage_capacity=doc["storage"]))
    links = []
    for i, doc in enumerate(spec.get("links", [])):
        for key in ("id", "a", "b", "bandwidth_mbps", "latency_ms"):
            if key not in doc:
                raise SchemaError(f"links[{i}].{key}", "missing required key")
        links.append(SubstrateLink(
            link_id=str(doc["id"]), endpoints=(str(doc["a"]), str(doc["b"])),
            bandwidth_capacity=doc["bandwidth_mbps"], latency=doc["latency_ms"]))
    return DomainTopology(
        domain_id=domain_id,
        operator_name=str(spec.get("operator", domain_id)),
        nodes=nodes, links=links,
        border_nodes=[str(b) for b in spec.get("border", [])])


def _simple_paths(topology: DomainTopology, src: str, dst: str
                  ) -> Iterator[list[SubstrateLink]]:
    """All simple paths src->dst over links with residual bandwidth > 0.

    Handles parallel links (each is a distinct path). Domains are desk-scale,
    so exhaustive enumeration is fine and keeps tie-breaking exact.
    """
    adj = topology.adjacency()

    def walk(node: str, visited: set[str], path: list[SubstrateLink]):
        if node == dst:
            yield list(path)
            return
        for neighbor, link in adj[node]:
            if neighbor in visited or link.residual_bandwidth() <= 0:
                continue
            visited.add(neighbor)
            path.append(link)
            yield from walk(neighbor, visited, path)
            path.pop()
            visited.remove(neighbor)

    yield from walk(src, {src}, [])


def _path_metrics(path: list[SubstrateLink]) -> tuple[float, float]:
    latency = sum(link.latency for link in path)
    bottleneck = min(link.residual_bandwidth() for link in path)
    return latency, bottleneck


def _node_sequence(path: list[SubstrateLink], src: str) -> tuple[str, ...]:
    seq = [src]
    for link in path:
        seq.append(link.other_end(seq[-1]))
    return tuple(seq)


def abstract_view(topology: DomainTopology) -> AbstractedView:
    """Compute the peer-facing abstraction of a domain.

    One abstract link per border pair: the minimum-total-latency path over
    links with residual bandwidth > 0; ties broken by higher bottleneck
    bandwidth, then lexicographic node-id path. Unreachable pairs are
    omitted and recorded as warnings.
    """
    if not topology.border_nodes:
        raise NoBorderNodes(f"domain {topology.domain_id} has no border nodes")

    abstract_links = []
    warnings = []
    for src, dst in itertools.combinations(topology.border_nodes, 2):
        best = None
        for path in _simple_paths(topology, src, dst):
            latency, bottleneck = _path_metrics(path)
            key = (latency, -bottleneck, _node_sequence(path, src))
            if best is None or key < best[0]:
                best = (key, latency, bottleneck)
        if best is None:
            warnings.append(f"unreachable border pair {src}<->{dst}")
        else:
            abstract_links.append(AbstractLink((src, dst), best[1], best[2]))

    headroom: dict[str, ResourceDemand] = {}
    for node in topology.nodes.values():
        have = headroom.get(node.kind, ResourceDemand())
        headroom[node.kind] = have + ResourceDemand(
            node.residual("cpu"), node.residual("mem"), node.residual("storage"))

    topology._view_version += 1
    return AbstractedView(
        domain_id=topology.domain_id,
        border_nodes=topology.border_nodes,
        abstract_links=tuple(abstract_links),
        aggregate_headroom=headroom,
        version=topology._view_version,
        warnings=tuple(warnings))


def aggregate_resource_db(views: Iterable[AbstractedView],
                          inter_domain_links: Iterable[SubstrateLink],
                          topologies: Iterable[DomainTopology],
                          previous: ResourceDB | None = None) -> ResourceDB:
    """Stitch per-domain views (and frozen topology snapshots) into one DB."""
    view_map: dict[str, AbstractedView] = {}
    for view in views:
        if view.domain_id in view_map:
            raise DuplicateDomain(f"domain {view.domain_id} appears twice")
        view_map[view.domain_id] = view

    topo_map: dict[str, DomainTopology] = {}
    seen_nodes: dict[str, str] = {}
    seen_links: set[str] = set()
    for topo in topologies:
        if topo.domain_id not in view_map:
            raise ForeignEndpoint(
                f"topology {topo.domain_id} has no matching view")
        frozen = copy.deepcopy(topo)
        topo_map[topo.domain_id] = frozen
        for nid in frozen.nodes:
            if nid in seen_nodes:
                raise SchemaError(f"nodes[{nid}]",
                                  f"node id also used by domain {seen_nodes[nid]}")
            seen_nodes[nid] = topo.domain_id
        for lid in frozen.links:
            if lid in seen_links:
                raise SchemaError(f"links[{lid}]", "link id used by two domains")
            seen_links.add(lid)
    if set(topo_map) != set(view_map):
        raise ForeignEndpoint("views and topologies cover different domains")

    border_home = {b: view.domain_id
                   for view in view_map.values() for b in view.border_nodes}
    interconnects = []
    for link in inter_domain_links:
        ends = link.endpoints
        for end in ends:
            if end not in border_home:
                raise ForeignEndpoint(
                    f"interconnect {link.link_id}: endpoint {end!r} is not a "
                    f"border node of any view")
        if border_home[ends[0]] == border_home[ends[1]]:
            raise ForeignEndpoint(
                f"interconnect {link.link_id} joins two borders of the same domain")
        if link.link_id in seen_links:
            raise SchemaError(f"interconnects[{link.link_id}]",
                              "link id used by a domain")
        interconnects.append(copy.deepcopy(link))

    prev_version = previous.snapshot_version if previous else 0
    max_view = max((v.version for v in view_map.values()), default=0)
    return ResourceDB(
        views=view_map,
        inter_domain_links=tuple(interconnects),
        snapshot_version=max(prev_version + 1, max_view),
        topologies=topo_map)


def allocate(store: CapacityStore,
             node_demands: Mapping[str, ResourceDemand] | None = None,
             link_demands: Mapping[str, float] | None = None) -> AllocationReceipt:
    return store.allocate(node_demands, link_demands)


def release(store: CapacityStore, receipt: AllocationReceipt) -> None:
    store.release(receipt)


class Network:
    """The live multi-domain world: mutable domains plus the interconnect pool."""

    def __init__(self, domains: Iterable[DomainTopology],
                 interconnects: Iterable[SubstrateLink] = ()):
        self.domains: dict[str, DomainTopology] = {}
        for domain in domains:
            if domain.domain_id in self.domains:
                raise DuplicateDomain(f"domain {domain.domain_id} appears twice")
            self.domains[domain.domain_id] = domain
        self.interconnects = InterconnectPool(interconnects)
        self._db: ResourceDB | None = None

    def build_resource_db(self) -> ResourceDB:
        """Abstract every domain and aggregate; bumps the snapshot chain."""
        views = [abstract_view(self.domains[d]) for d in sorted(self.domains)]
        self._db = aggregate_resource_db(
            views, self.interconnects.links.values(),
            [self.domains[d] for d in sorted(self.domains)],
            previous=self._db)
        return self._db

    def store_of_link(self, link_id: str) -> CapacityStore | None:
        for domain in self.domains.values():
            if link_id in domain.links:
                return domain
        if link_id in self.interconnects.links:
            return self.interconnects
        return None

    def allocation_state(self) -> dict[str, dict[str, tuple]]:
        state = {d: self.domains[d].allocation_state() for d in sorted(self.domains)}
        state["~interconnect"] = self.interconnects.allocation_state()
        return state
