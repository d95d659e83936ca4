"""Maps service graphs onto the multi-domain substrate snapshot.

Two routes to the same answer, kept deliberately separate:

* ``embed``        greedy node ranking + latency-constrained Dijkstra routing
                   with bounded backtracking (the production path);
* ``oracle_embed`` exhaustive search over node assignments and simple paths
                   (guarded to small instances; the test oracle).

Both are pure functions over an immutable ResourceDB snapshot.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

from .errors import (
    DanglingReference,
    EmptyResourceDB,
    InstanceTooLarge,
    SchemaError,
)
from .profiles import ServiceGraph, VirtualLink, Vnf, graph_from_doc, graph_to_doc
from .substrate import (
    Network,
    ResourceDB,
    ResourceDemand,
    SubstrateLink,
    SubstrateNode,
)


@dataclass(frozen=True)
class EmbedPolicy:
    anti_affinity: bool = False
    backtrack_budget: int = 100
    pack: bool = False          # rank candidate nodes tightest-fit first
    pins: Mapping[str, str] = field(default_factory=dict)   # vnf_id -> node_id


@dataclass(frozen=True)
class ObjectiveConstraint:
    metric: str = "utilization_ratio"
    op: str = ">"
    value: float = 0.8

    def satisfied(self, observed: float) -> bool:
        if self.op == ">":
            return observed > self.value
        if self.op == ">=":
            return observed >= self.value
        if self.op == "<":
            return observed < self.value
        if self.op == "<=":
            return observed <= self.value
        raise SchemaError("objective.op", f"unsupported operator {self.op!r}")


@dataclass(frozen=True)
class PlanMetrics:
    total_latency_ms: Mapping[str, float]
    utilization_ratio: float
    domains_touched: frozenset[str]


@dataclass(frozen=True)
class EmbeddingPlan:
    node_map: Mapping[str, tuple[str, str]]        # vnf_id -> (domain, node)
    link_map: Mapping[str, tuple[str, ...]]        # vlink_id -> substrate link ids
    metrics: PlanMetrics
    graph: ServiceGraph
    snapshot_version: int
    anti_affinity: bool = False

    def node_map_key(self) -> tuple:
        return tuple(sorted((v, d, n) for v, (d, n) in self.node_map.items()))


@dataclass(frozen=True)
class Recommendation:
    rank: int
    plan: EmbeddingPlan
    summary: str
    objective_value: float


@dataclass(frozen=True)
class InfeasibilityReport:
    violated: str                 # latency | bandwidth | compute
    element: str                  # vlink id or vnf id
    best_achievable: float


# ---------------------------------------------------------------------------
# substrate indexing
# ---------------------------------------------------------------------------

class _Index:
    """Uniform node/link lookup over a ResourceDB snapshot or live Network."""

    def __init__(self, nodes: dict[str, tuple[str, SubstrateNode]],
                 links: dict[str, SubstrateLink]):
        self.nodes = nodes          # node_id -> (domain_id, node)
        self.links = links
        self.adjacency: dict[str, list[tuple[str, SubstrateLink]]] = {
            nid: [] for nid in nodes}
        for link in links.values():
            a, b = link.endpoints
            if a in self.adjacency and b in self.adjacency:
                self.adjacency[a].append((b, link))
                self.adjacency[b].append((a, link))
        for entries in self.adjacency.values():
            entries.sort(key=lambda e: (e[0], e[1].link_id))

    @classmethod
    def of(cls, source: ResourceDB | Network) -> "_Index":
        nodes: dict[str, tuple[str, SubstrateNode]] = {}
        links: dict[str, SubstrateLink] = {}
        if isinstance(source, Network):
            domains = source.domains
            inter = list(source.interconnects.links.values())
        else:
            domains = dict(source.topologies)
            inter = list(source.inter_domain_links)
        for did in sorted(domains):
            topo = domains[did]
            for nid, node in topo.nodes.items():
                nodes[nid] = (did, node)
            links.update(topo.links)
        for link in inter:
            links[link.link_id] = link
        return cls(nodes, links)

    def domain_of_link(self, link_id: str, source: ResourceDB | Network) -> str | None:
        if isinstance(source, Network):
            for did in sorted(source.domains):
                if link_id in source.domains[did].links:
                    return did
            return None
        for did in sorted(source.topologies):
            if link_id in source.topologies[did].links:
                return did
        return None


class _Usage:
    """Demand already committed by the plan under construction."""

    def __init__(self):
        self.node: dict[str, ResourceDemand] = {}
        self.link: dict[str, float] = {}

    def node_fits(self, node: SubstrateNode, demand: ResourceDemand) -> bool:
        used = self.node.get(node.node_id, ResourceDemand())
        return (node.residual("cpu") - used.cpu >= demand.cpu
                and node.residual("mem") - used.mem >= demand.mem
                and node.residual("storage") - used.storage >= demand.storage)

    def link_headroom(self, link: SubstrateLink) -> float:
        return link.residual_bandwidth() - self.link.get(link.link_id, 0.0)

    def add_node(self, node_id: str, demand: ResourceDemand):
        self.node[node_id] = self.node.get(node_id, ResourceDemand()) + demand

    def remove_node(self, node_id: str, demand: ResourceDemand):
        have = self.node[node_id]
        self.node[node_id] = ResourceDemand(have.cpu - demand.cpu,
                                            have.mem - demand.mem,
                                            have.storage - demand.storage)

    def add_path(self, path: Iterable[str], bandwidth: float):
        for lid in path:
            self.link[lid] = self.link.get(lid, 0.0) + bandwidth

    def remove_path(self, path: Iterable[str], bandwidth: float):
        for lid in path:
            self.link[lid] -= bandwidth


def _vnf_demand(vnf: Vnf) -> ResourceDemand:
    return ResourceDemand(vnf.cpu, vnf.mem, vnf.storage)


# ---------------------------------------------------------------------------
# routing
# ---------------------------------------------------------------------------

def _dijkstra(index: _Index, usage: _Usage, src: str, dst: str,
              bandwidth: float) -> tuple[float, tuple[str, ...]] | None:
    """Min-latency path over links with enough residual bandwidth.

    Heap keys carry the node/link sequences so latency ties resolve to the
    lexicographically smallest path, keeping every run replayable.
    """
    if src == dst:
        return 0.0, ()
    heap: list[tuple[float, tuple[str, ...], tuple[str, ...]]] = [(0.0, (src,), ())]
    settled: set[str] = set()
    while heap:
        latency, node_path, link_path = heapq.heappop(heap)
        here = node_path[-1]
        if here == dst:
            return latency, link_path
        if here in settled:
            continue
        settled.add(here)
        for neighbor, link in index.adjacency[here]:
            if neighbor in settled or usage.link_headroom(link) < bandwidth:
                continue
            heapq.heappush(heap, (latency + link.latency,
                                  node_path + (neighbor,),
                                  link_path + (link.link_id,)))
    return None


def _simple_paths(index: _Index, src: str, dst: str) -> Iterator[tuple[str, ...]]:
    """All simple link-id paths in deterministic order (oracle machinery)."""
    if src == dst:
        yield ()
        return

    def walk(node: str, visited: set[str], path: list[str]):
        if node == dst:
            yield tuple(path)
            return
        for neighbor, link in index.adjacency[node]:
            if neighbor in visited:
                continue
            visited.add(neighbor)
            path.append(link.link_id)
            yield from walk(neighbor, visited, path)
            path.pop()
            visited.remove(neighbor)

    yield from walk(src, {src}, [])


def _path_latency(index: _Index, path: Iterable[str]) -> float:
    return sum(index.links[lid].latency for lid in path)


def _path_bottleneck(index: _Index, path: tuple[str, ...]) -> float:
    if not path:
        return float("inf")
    return min(index.links[lid].residual_bandwidth() for lid in path)


# ---------------------------------------------------------------------------
# relaxed per-element bounds
#
# best_achievable is defined on the binding element in isolation: any
# capacity-feasible endpoint placement, a fresh snapshot, and no other
# demands of the same slice.  Greedy and oracle compute the SAME definition
# through different machinery, which is what the agreement tests compare.
# ---------------------------------------------------------------------------

def _endpoint_candidates(index: _Index, vnf: Vnf) -> list[str]:
    out = []
    for nid in sorted(index.nodes):
        _, node = index.nodes[nid]
        if vnf.domain_affinity and node.kind != vnf.domain_affinity:
            continue
        if (node.residual("cpu") >= vnf.cpu and node.residual("mem") >= vnf.mem
                and node.residual("storage") >= vnf.storage):
            out.append(nid)
    return out


def _placement_pairs(index: _Index, graph: ServiceGraph, vlink: VirtualLink,
                     anti_affinity: bool) -> Iterator[tuple[str, str]]:
    for a in _endpoint_candidates(index, graph.vnf(vlink.src)):
        for b in _endpoint_candidates(index, graph.vnf(vlink.dst)):
            if anti_affinity and a == b:
                continue
            yield a, b


def best_achievable_latency(source: ResourceDB | Network, graph: ServiceGraph,
                            vlink: VirtualLink, anti_affinity: bool = False) -> float:
    """Dijkstra sweep over every feasible endpoint placement."""
    index = _Index.of(source)
    best = float("inf")
    fresh = _Usage()
    for a, b in _placement_pairs(index, graph, vlink, anti_affinity):
        found = _dijkstra(index, fresh, a, b, vlink.bandwidth_mbps)
        if found is not None and found[0] < best:
            best = found[0]
    return best


def oracle_best_latency(source: ResourceDB | Network, graph: ServiceGraph,
                        vlink: VirtualLink, anti_affinity: bool = False) -> float:
    """Same bound as best_achievable_latency, by simple-path enumeration."""
    index = _Index.of(source)
    best = float("inf")
    for a, b in _placement_pairs(index, graph, vlink, anti_affinity):
        for path in _simple_paths(index, a, b):
            if _path_bottleneck(index, path) >= vlink.bandwidth_mbps:
                latency = _path_latency(index, path)
                if latency < best:
                    best = latency
    return best


def oracle_best_bandwidth(source: ResourceDB | Network, graph: ServiceGraph,
                          vlink: VirtualLink, anti_affinity: bool = False) -> float:
    """Max bottleneck bandwidth over any simple path, latency ignored."""
    index = _Index.of(source)
    best = 0.0
    for a, b in _placement_pairs(index, graph, vlink, anti_affinity):
        for path in _simple_paths(index, a, b):
            bottleneck = _path_bottleneck(index, path)
            if bottleneck > best:
                best = bottleneck
    return best


def best_achievable_compute(source: ResourceDB | Network, vnf: Vnf) -> float:
    """Max residual cpu among nodes matching the vnf's affinity."""
    index = _Index.of(source)
    pool = [index.nodes[nid][1].residual("cpu") for nid in sorted(index.nodes)
            if not vnf.domain_affinity
            or index.nodes[nid][1].kind == vnf.domain_affinity]
    return max(pool, default=0.0)


# ---------------------------------------------------------------------------
# greedy embedding
# ---------------------------------------------------------------------------

@dataclass
class _Failure:
    violated: str
    element: str


def _ready_vlinks(graph: ServiceGraph, placed: set[str],
                  routed: set[str], just_placed: str) -> list[VirtualLink]:
    out = []
    for vl in graph.vlinks:
        if vl.vlink_id in routed:
            continue
        if just_placed in (vl.src, vl.dst) and {vl.src, vl.dst} <= placed:
            out.append(vl)
    return out


def embed(graph: ServiceGraph, db: ResourceDB,
          policy: EmbedPolicy | None = None) -> EmbeddingPlan | InfeasibilityReport:
    """Greedy embedding: vnfs by descending cpu demand onto the max-residual
    feasible node, vlinks routed by latency-constrained shortest path, with a
    bounded backtracking budget over alternative node choices."""
    policy = policy or EmbedPolicy()
    if db.is_empty():
        raise EmptyResourceDB("resource database has no domain views")

    index = _Index.of(db)
    order = sorted(graph.vnfs, key=lambda v: (-v.cpu, v.vnf_id))
    usage = _Usage()
    node_map: dict[str, tuple[str, str]] = {}
    link_map: dict[str, tuple[str, ...]] = {}
    latencies: dict[str, float] = {}
    routed_stack: list[list[str]] = []        # vlink ids routed at each depth
    budget = policy.backtrack_budget
    first_failure: _Failure | None = None

    def candidates(vnf: Vnf) -> list[str]:
        pinned = policy.pins.get(vnf.vnf_id)
        pool = []
        for nid in sorted(index.nodes):
            _, node = index.nodes[nid]
            if pinned is not None and nid != pinned:
                continue
            if vnf.domain_affinity and node.kind != vnf.domain_affinity:
                continue
            if policy.anti_affinity and any(n == nid for _, n in node_map.values()):
                continue
            if not usage.node_fits(node, _vnf_demand(vnf)):
                continue
            pool.append(nid)
        residual = lambda nid: (index.nodes[nid][1].residual("cpu")
                                - usage.node.get(nid, ResourceDemand()).cpu)
        if policy.pack:
            pool.sort(key=lambda nid: (residual(nid), nid))
        else:
            pool.sort(key=lambda nid: (-residual(nid), nid))
        return pool

    def note_failure(violated: str, element: str):
        nonlocal first_failure
        if first_failure is None:
            first_failure = _Failure(violated, element)

    def route_ready(vnf_id: str) -> list[str] | None:
        """Route vlinks that just became routable; None on dead end."""
        done: list[str] = []
        placed = set(node_map)
        for vl in _ready_vlinks(graph, placed, set(link_map), vnf_id):
            src_node = node_map[vl.src][1]
            dst_node = node_map[vl.dst][1]
            found = _dijkstra(index, usage, src_node, dst_node, vl.bandwidth_mbps)
            if found is None:
                note_failure("bandwidth", vl.vlink_id)
                _unroute(done)
                return None
            latency, path = found
            if latency > vl.max_latency_ms:
                note_failure("latency", vl.vlink_id)
                _unroute(done)
                return None
            link_map[vl.vlink_id] = path
            latencies[vl.vlink_id] = latency
            usage.add_path(path, vl.bandwidth_mbps)
            done.append(vl.vlink_id)
        return done

    def _unroute(vlink_ids: list[str]):
        for vid in vlink_ids:
            vl = next(v for v in graph.vlinks if v.vlink_id == vid)
            usage.remove_path(link_map.pop(vid), vl.bandwidth_mbps)
            latencies.pop(vid)

    def place(depth: int, is_retry: bool) -> bool:
        nonlocal budget
        if depth == len(order):
            return True
        vnf = order[depth]
        pool = candidates(vnf)
        if not pool:
            note_failure("compute", vnf.vnf_id)
            return False
        for i, nid in enumerate(pool):
            if i > 0:
                if budget <= 0:
                    return False
                budget -= 1
            domain, node = index.nodes[nid]
            node_map[vnf.vnf_id] = (domain, nid)
            usage.add_node(nid, _vnf_demand(vnf))
            routed = route_ready(vnf.vnf_id)
            if routed is not None:
                if place(depth + 1, False):
                    return True
                _unroute(routed)
            usage.remove_node(nid, _vnf_demand(vnf))
            del node_map[vnf.vnf_id]
        return False

    if place(0, False):
        return _build_plan(graph, db, index, node_map, link_map, latencies,
                           policy.anti_affinity)

    failure = first_failure or _Failure("compute", order[0].vnf_id if order else "")
    return _report(db, graph, failure, policy.anti_affinity)


def _report(db: ResourceDB, graph: ServiceGraph, failure: _Failure,
            anti_affinity: bool) -> InfeasibilityReport:
    if failure.violated == "compute":
        vnf = graph.vnf(failure.element)
        best = best_achievable_compute(db, vnf)
    elif failure.violated == "latency":
        vl = next(v for v in graph.vlinks if v.vlink_id == failure.element)
        best = best_achievable_latency(db, graph, vl, anti_affinity)
    else:
        vl = next(v for v in graph.vlinks if v.vlink_id == failure.element)
        index = _Index.of(db)
        best = 0.0
        fresh = _Usage()
        # widest placement-to-placement bottleneck via per-pair probing
        for a, b in _placement_pairs(index, graph, vl, anti_affinity):
            best = max(best, _widest_bottleneck(index, fresh, a, b))
    return InfeasibilityReport(violated=failure.violated,
                               element=failure.element,
                               best_achievable=best)


def _widest_bottleneck(index: _Index, usage: _Usage, src: str, dst: str) -> float:
    """Maximum-bottleneck path value (Dijkstra variant on max-min bandwidth)."""
    if src == dst:
        return float("inf")
    best: dict[str, float] = {src: float("inf")}
    heap = [(-float("inf"), src)]
    while heap:
        neg_width, here = heapq.heappop(heap)
        width = -neg_width
        if width < best.get(here, 0.0):
            continue
        for neighbor, link in index.adjacency[here]:
            through = min(width, usage.link_headroom(link))
            if through > best.get(neighbor, 0.0):
                best[neighbor] = through
                heapq.heappush(heap, (-through, neighbor))
    return best.get(dst, 0.0)


def _build_plan(graph: ServiceGraph, db: ResourceDB, index: _Index,
                node_map: Mapping[str, tuple[str, str]],
                link_map: Mapping[str, tuple[str, ...]],
                latencies: Mapping[str, float],
                anti_affinity: bool) -> EmbeddingPlan:
    domains = {d for d, _ in node_map.values()}
    for path in link_map.values():
        for lid in path:
            owner = index.domain_of_link(lid, db)
            if owner is not None:
                domains.add(owner)
    plan = EmbeddingPlan(
        node_map=dict(sorted(node_map.items())),
        link_map=dict(sorted(link_map.items())),
        metrics=PlanMetrics(total_latency_ms=dict(sorted(latencies.items())),
                            utilization_ratio=0.0,
                            domains_touched=frozenset(domains)),
        graph=graph,
        snapshot_version=db.snapshot_version,
        anti_affinity=anti_affinity)
    ratio = utilization_ratio(plan, db)
    return EmbeddingPlan(
        node_map=plan.node_map, link_map=plan.link_map,
        metrics=PlanMetrics(plan.metrics.total_latency_ms, ratio,
                            plan.metrics.domains_touched),
        graph=graph, snapshot_version=db.snapshot_version,
        anti_affinity=anti_affinity)


# ---------------------------------------------------------------------------
# exhaustive oracle
# ---------------------------------------------------------------------------

ORACLE_MAX_VNFS = 5
ORACLE_MAX_NODES = 8


def oracle_embed(graph: ServiceGraph, db: ResourceDB,
                 policy: EmbedPolicy | None = None) -> EmbeddingPlan | InfeasibilityReport:
    """Exhaustive search over all node assignments and simple paths; returns
    the feasible plan maximizing utilization_ratio, else the true report."""
    policy = policy or EmbedPolicy()
    if db.is_empty():
        raise EmptyResourceDB("resource database has no domain views")
    index = _Index.of(db)
    if len(graph.vnfs) > ORACLE_MAX_VNFS:
        raise InstanceTooLarge(
            f"{len(graph.vnfs)} vnfs exceeds oracle guard {ORACLE_MAX_VNFS}")
    if len(index.nodes) > ORACLE_MAX_NODES:
        raise InstanceTooLarge(
            f"{len(index.nodes)} substrate nodes exceeds oracle guard {ORACLE_MAX_NODES}")

    per_vnf = []
    for vnf in graph.vnfs:
        pool = [nid for nid in sorted(index.nodes)
                if not vnf.domain_affinity
                or index.nodes[nid][1].kind == vnf.domain_affinity]
        per_vnf.append(pool)

    best_plan: EmbeddingPlan | None = None
    best_key: tuple | None = None

    for assignment in itertools.product(*per_vnf):
        if policy.anti_affinity and len(set(assignment)) != len(assignment):
            continue
        by_node: dict[str, ResourceDemand] = {}
        for vnf, nid in zip(graph.vnfs, assignment):
            by_node[nid] = by_node.get(nid, ResourceDemand()) + _vnf_demand(vnf)
        fits = all(
            index.nodes[nid][1].residual("cpu") >= demand.cpu
            and index.nodes[nid][1].residual("mem") >= demand.mem
            and index.nodes[nid][1].residual("storage") >= demand.storage
            for nid, demand in by_node.items())
        if not fits:
            continue

        placement = {vnf.vnf_id: nid for vnf, nid in zip(graph.vnfs, assignment)}
        for routing in _joint_routings(index, graph, placement):
            node_map = {vid: (index.nodes[nid][0], nid)
                        for vid, nid in placement.items()}
            latencies = {vl.vlink_id: _path_latency(index, routing[vl.vlink_id])
                         for vl in graph.vlinks}
            plan = _build_plan(graph, db, index, node_map, routing, latencies,
                               policy.anti_affinity)
            key = (-plan.metrics.utilization_ratio, plan.node_map_key(),
                   tuple(sorted(plan.link_map.items())))
            if best_key is None or key < best_key:
                best_key = key
                best_plan = plan

    if best_plan is not None:
        return best_plan
    return _oracle_report(db, graph, index, policy.anti_affinity)


def _joint_routings(index: _Index, graph: ServiceGraph,
                    placement: Mapping[str, str]) -> Iterator[dict[str, tuple[str, ...]]]:
    """All combinations of simple paths whose cumulative bandwidth fits."""
    vlinks = list(graph.vlinks)

    def walk(i: int, usage: _Usage, chosen: dict[str, tuple[str, ...]]):
        if i == len(vlinks):
            yield dict(chosen)
            return
        vl = vlinks[i]
        src, dst = placement[vl.src], placement[vl.dst]
        for path in _simple_paths(index, src, dst):
            if _path_latency(index, path) > vl.max_latency_ms:
                continue
            if any(usage.link_headroom(index.links[lid]) < vl.bandwidth_mbps
                   for lid in path):
                continue
            usage.add_path(path, vl.bandwidth_mbps)
            chosen[vl.vlink_id] = path
            yield from walk(i + 1, usage, chosen)
            del chosen[vl.vlink_id]
            usage.remove_path(path, vl.bandwidth_mbps)

    yield from walk(0, _Usage(), {})


def _oracle_report(db: ResourceDB, graph: ServiceGraph, index: _Index,
                   anti_affinity: bool) -> InfeasibilityReport:
    # precedence: compute, then bandwidth, then latency, element in declared order
    for vnf in graph.vnfs:
        if not _endpoint_candidates(index, vnf):
            return InfeasibilityReport("compute", vnf.vnf_id,
                                       best_achievable_compute(db, vnf))
    for vl in graph.vlinks:
        best_bw = oracle_best_bandwidth(db, graph, vl, anti_affinity)
        if best_bw < vl.bandwidth_mbps:
            return InfeasibilityReport("bandwidth", vl.vlink_id, best_bw)
    for vl in graph.vlinks:
        best_lat = oracle_best_latency(db, graph, vl, anti_affinity)
        if best_lat > vl.max_latency_ms:
            return InfeasibilityReport("latency", vl.vlink_id, best_lat)
    # every dimension is achievable in isolation; the binding constraint is
    # the interplay of placements, which we attribute to compute
    first = graph.vnfs[0]
    return InfeasibilityReport("compute", first.vnf_id,
                               best_achievable_compute(db, first))


# ---------------------------------------------------------------------------
# metrics and recommendations
# ---------------------------------------------------------------------------

def _plan_demands(plan: EmbeddingPlan) -> tuple[dict[str, float], dict[str, float]]:
    """Per-node cpu and per-link bandwidth demanded by a plan."""
    node_cpu: dict[str, float] = {}
    for vnf in plan.graph.vnfs:
        _, nid = plan.node_map[vnf.vnf_id]
        node_cpu[nid] = node_cpu.get(nid, 0.0) + vnf.cpu
    link_bw: dict[str, float] = {}
    for vl in plan.graph.vlinks:
        for lid in plan.link_map.get(vl.vlink_id, ()):
            link_bw[lid] = link_bw.get(lid, 0.0) + vl.bandwidth_mbps
    return node_cpu, link_bw


def utilization_ratio(plan: EmbeddingPlan, db: ResourceDB | Network) -> float:
    """Mean allocated-after-plan/capacity over elements the plan touches,
    counting each node's cpu dimension and each link's bandwidth once."""
    index = _Index.of(db)
    node_cpu, link_bw = _plan_demands(plan)
    ratios = []
    for nid in sorted(node_cpu):
        if nid not in index.nodes:
            raise DanglingReference(f"plan maps a vnf to unknown node {nid!r}")
        node = index.nodes[nid][1]
        ratios.append((node.cpu_allocated + node_cpu[nid]) / node.cpu_capacity)
    for lid in sorted(link_bw):
        if lid not in index.links:
            raise DanglingReference(f"plan routes over unknown link {lid!r}")
        link = index.links[lid]
        ratios.append((link.bandwidth_allocated + link_bw[lid]) / link.bandwidth_capacity)
    if not ratios:
        return 0.0
    return sum(ratios) / len(ratios)


METRICS = {"utilization_ratio": utilization_ratio}


def recommend(graph: ServiceGraph, db: ResourceDB,
              constraint: ObjectiveConstraint, k: int,
              policy: EmbedPolicy | None = None,
              secondary: str | None = None) -> list[Recommendation]:
    """Up to k distinct feasible plans satisfying the constraint, ranked by
    the objective descending. Diversity means distinct node maps; candidates
    come from the greedy embedder run under systematic placement variations.
    """
    if k < 1:
        raise SchemaError("k", "must be >= 1")
    base = policy or EmbedPolicy()
    metric = METRICS[constraint.metric]

    plans: dict[tuple, EmbeddingPlan] = {}

    def consider(result):
        if isinstance(result, EmbeddingPlan):
            plans.setdefault(result.node_map_key(), result)

    consider(embed(graph, db, base))
    consider(embed(graph, db, EmbedPolicy(base.anti_affinity,
                                          base.backtrack_budget, pack=True)))
    index = _Index.of(db)
    for vnf in graph.vnfs:
        for nid in sorted(index.nodes):
            node = index.nodes[nid][1]
            if vnf.domain_affinity and node.kind != vnf.domain_affinity:
                continue
            for pack in (False, True):
                pinned = EmbedPolicy(base.anti_affinity, base.backtrack_budget,
                                     pack=pack, pins={vnf.vnf_id: nid})
                consider(embed(graph, db, pinned))

    scored = []
    for plan in plans.values():
        value = metric(plan, db)
        if constraint.satisfied(value):
            scored.append((value, plan))
    if secondary == "fewer-domains":
        scored.sort(key=lambda pair: (-pair[0], len(pair[1].metrics.domains_touched),
                                      pair[1].node_map_key()))
    else:
        scored.sort(key=lambda pair: (-pair[0], pair[1].node_map_key()))

    out = []
    for rank, (value, plan) in enumerate(scored[:k], start=1):
        domains = "+".join(sorted(plan.metrics.domains_touched))
        worst = max(plan.metrics.total_latency_ms.values(), default=0.0)
        out.append(Recommendation(
            rank=rank, plan=plan,
            summary=(f"{len(plan.node_map)} functions over {domains or 'one node'}; "
                     f"utilization {value:.3f}; worst path latency {worst:g} ms"),
            objective_value=value))
    return out


# ---------------------------------------------------------------------------
# independent constraint checker
# ---------------------------------------------------------------------------

def check_plan(plan: EmbeddingPlan, source: ResourceDB | Network,
               graph: ServiceGraph | None = None) -> list[str]:
    """Re-validate every plan invariant from raw substrate state; returns the
    list of violations (empty = valid). Shares no bookkeeping with embed()."""
    graph = graph or plan.graph
    index = _Index.of(source)
    problems: list[str] = []

    node_cpu: dict[str, ResourceDemand] = {}
    for vnf in graph.vnfs:
        if vnf.vnf_id not in plan.node_map:
            problems.append(f"vnf {vnf.vnf_id} unmapped")
            continue
        domain, nid = plan.node_map[vnf.vnf_id]
        if nid not in index.nodes:
            problems.append(f"vnf {vnf.vnf_id} on unknown node {nid}")
            continue
        actual_domain, node = index.nodes[nid]
        if actual_domain != domain:
            problems.append(f"vnf {vnf.vnf_id}: node {nid} is in {actual_domain}, "
                            f"plan says {domain}")
        if vnf.domain_affinity and node.kind != vnf.domain_affinity:
            problems.append(f"vnf {vnf.vnf_id}: affinity {vnf.domain_affinity} "
                            f"but node kind {node.kind}")
        node_cpu[nid] = node_cpu.get(nid, ResourceDemand()) + _vnf_demand(vnf)

    if plan.anti_affinity:
        nodes_used = [n for _, n in plan.node_map.values()]
        if len(set(nodes_used)) != len(nodes_used):
            problems.append("anti-affinity violated: two vnfs share a node")

    for nid, demand in sorted(node_cpu.items()):
        if nid not in index.nodes:
            continue
        node = index.nodes[nid][1]
        for dim in ("cpu", "mem", "storage"):
            if getattr(demand, dim) > node.residual(dim) + 1e-9:
                problems.append(f"node {nid}: {dim} demand {getattr(demand, dim):g} "
                                f"exceeds residual {node.residual(dim):g}")

    link_bw: dict[str, float] = {}
    for vl in graph.vlinks:
        path = plan.link_map.get(vl.vlink_id)
        if path is None:
            problems.append(f"vlink {vl.vlink_id} unrouted")
            continue
        src = plan.node_map.get(vl.src, (None, None))[1]
        dst = plan.node_map.get(vl.dst, (None, None))[1]
        here = src
        ok = True
        for lid in path:
            link = index.links.get(lid)
            if link is None:
                problems.append(f"vlink {vl.vlink_id}: unknown link {lid}")
                ok = False
                break
            if here not in link.endpoints:
                problems.append(f"vlink {vl.vlink_id}: path breaks at {lid}")
                ok = False
                break
            here = link.other_end(here)
        if ok and here != dst:
            problems.append(f"vlink {vl.vlink_id}: path ends at {here}, not {dst}")
        if not ok:
            continue
        latency = sum(index.links[lid].latency for lid in path)
        if latency > vl.max_latency_ms + 1e-9:
            problems.append(f"vlink {vl.vlink_id}: latency {latency:g} ms over "
                            f"bound {vl.max_latency_ms:g} ms")
        recorded = plan.metrics.total_latency_ms.get(vl.vlink_id)
        if recorded is not None and abs(recorded - latency) > 1e-9:
            problems.append(f"vlink {vl.vlink_id}: recorded latency {recorded:g} "
                            f"!= actual {latency:g}")
        for lid in path:
            link_bw[lid] = link_bw.get(lid, 0.0) + vl.bandwidth_mbps

    for lid, demand in sorted(link_bw.items()):
        link = index.links[lid]
        if demand > link.residual_bandwidth() + 1e-9:
            problems.append(f"link {lid}: bandwidth demand {demand:g} exceeds "
                            f"residual {link.residual_bandwidth():g}")
    return problems


# ---------------------------------------------------------------------------
# serialization (gateway / inventory)
# ---------------------------------------------------------------------------

def plan_to_doc(plan: EmbeddingPlan) -> dict:
    return {
        "node_map": {v: list(dn) for v, dn in plan.node_map.items()},
        "link_map": {v: list(path) for v, path in plan.link_map.items()},
        "metrics": {
            "total_latency_ms": dict(plan.metrics.total_latency_ms),
            "utilization_ratio": plan.metrics.utilization_ratio,
            "domains_touched": sorted(plan.metrics.domains_touched),
        },
        "graph": graph_to_doc(plan.graph),
        "snapshot_version": plan.snapshot_version,
        "anti_affinity": plan.anti_affinity,
    }


def plan_from_doc(doc: Mapping) -> EmbeddingPlan:
    graph = graph_from_doc(doc["graph"])
    metrics = doc.get("metrics", {})
    return EmbeddingPlan(
        node_map={v: tuple(dn) for v, dn in doc["node_map"].items()},
        link_map={v: tuple(path) for v, path in doc["link_map"].items()},
        metrics=PlanMetrics(
            total_latency_ms=dict(metrics.get("total_latency_ms", {})),
            utilization_ratio=metrics.get("utilization_ratio", 0.0),
            domains_touched=frozenset(metrics.get("domains_touched", []))),
        graph=graph,
        snapshot_version=doc.get("snapshot_version", 0),
        anti_affinity=doc.get("anti_affinity", False))


def report_to_doc(report: InfeasibilityReport) -> dict:
    return {"violated": report.violated, "element": report.element,
            "best_achievable": report.best_achievable}
