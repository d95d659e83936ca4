"""Walkthrough: per-domain topologies, capacity receipts, and the abstracted
view each operator exposes to its peers.

Run from the repository root:  python demos/01_substrate_and_abstraction.py
"""

from sliceforge.substrate import (
    ResourceDemand,
    abstract_view,
    aggregate_resource_db,
    build_domain,
)

# A small transport domain: five routers, six links, two border nodes.
transport = build_domain({
    "domain_id": "transport-demo",
    "operator": "TransitNet",
    "nodes": [
        {"id": "t1", "kind": "transport", "cpu": 4, "mem": 16, "storage": 100},
        {"id": "t2", "kind": "transport", "cpu": 6, "mem": 16, "storage": 100},
        {"id": "t3", "kind": "transport", "cpu": 6, "mem": 16, "storage": 100},
        {"id": "t4", "kind": "transport", "cpu": 4, "mem": 16, "storage": 100},
        {"id": "t5", "kind": "transport", "cpu": 4, "mem": 16, "storage": 100},
    ],
    "links": [
        {"id": "tl1", "a": "t1", "b": "t2", "bandwidth_mbps": 300, "latency_ms": 2},
        {"id": "tl2", "a": "t2", "b": "t3", "bandwidth_mbps": 300, "latency_ms": 3},
        {"id": "tl3", "a": "t3", "b": "t5", "bandwidth_mbps": 300, "latency_ms": 2},
        {"id": "tl4", "a": "t1", "b": "t4", "bandwidth_mbps": 300, "latency_ms": 4},
        {"id": "tl5", "a": "t4", "b": "t5", "bandwidth_mbps": 300, "latency_ms": 5},
        {"id": "tl6", "a": "t2", "b": "t4", "bandwidth_mbps": 300, "latency_ms": 1},
    ],
    "border": ["t1", "t5"],
})
print(f"built {transport.domain_id}: {len(transport.nodes)} nodes, "
      f"{len(transport.links)} links, borders {transport.border_nodes}")

# Peers never see t2/t3/t4 -- only the border pair and the best path metrics.
view = abstract_view(transport)
for al in view.abstract_links:
    print(f"abstract link {al.endpoints}: {al.min_latency_ms} ms, "
          f"bottleneck {al.bottleneck_bandwidth_mbps} Mbps")
print(f"aggregate headroom by kind: "
      f"{ {k: v.cpu for k, v in view.aggregate_headroom.items()} } vCPU")

# Capacity accounting is all-or-nothing: a receipt is the exact inverse.
receipt = transport.allocate({"t2": ResourceDemand(cpu=4)}, {"tl1": 120})
print(f"\nallocated via {receipt.receipt_id}: "
      f"t2 now {transport.nodes['t2'].cpu_allocated}/6 vCPU, "
      f"tl1 now {transport.links['tl1'].bandwidth_allocated}/300 Mbps")

# The abstraction reflects live residuals, and versions only move forward.
after = abstract_view(transport)
print(f"view version {view.version} -> {after.version}; "
      f"headroom now { {k: v.cpu for k, v in after.aggregate_headroom.items()} }")

transport.release(receipt)
print(f"released: t2 back to {transport.nodes['t2'].cpu_allocated} allocated")

# The provider aggregates every domain's view into one resource database.
db = aggregate_resource_db([abstract_view(transport)], [], [transport])
print(f"\nresource db snapshot v{db.snapshot_version} with domains "
      f"{sorted(db.views)}")
