"""Walkthrough: mapping a function chain onto the multi-domain substrate,
checking the greedy result against the exhaustive oracle, and generating
ranked topology recommendations under a utilization constraint.

Run from the repository root:  python demos/03_embedding_and_recommendations.py
"""

from sliceforge.embedder import (
    ObjectiveConstraint,
    check_plan,
    embed,
    oracle_embed,
    recommend,
    utilization_ratio,
)
from sliceforge.gateway.scenario import build_context, load_scenario
from sliceforge.profiles import instantiate_graph

context = build_context(load_scenario("scenarios/operator.yaml"))
request = context.request_profile
requirement = request.slice_requirements[0]
template = context.resolve_graph(request.service_type, requirement.slice_kind)
graph = instantiate_graph(template, requirement)
db = context.network.build_resource_db()

plan = embed(graph, db)
print("greedy embedding:")
for vnf_id, (domain, node) in plan.node_map.items():
    print(f"  {vnf_id} -> {node} ({domain})")
for vlink, path in plan.link_map.items():
    latency = plan.metrics.total_latency_ms[vlink]
    print(f"  {vlink} via {list(path)} ({latency:g} ms)")
print(f"  utilization {plan.metrics.utilization_ratio:.3f}, "
      f"domains {sorted(plan.metrics.domains_touched)}")
print(f"  independent checker violations: {check_plan(plan, db)}")

# The exhaustive oracle is guarded to small instances; this one fits.
best = oracle_embed(graph, db)
print(f"\noracle optimum utilization: {best.metrics.utilization_ratio:.3f}")

# Topology recommendations for the operator's 80% constraint.
constraint = ObjectiveConstraint("utilization_ratio", ">", 0.80)
print(f"\nrecommendations under utilization > {constraint.value}:")
for rec in recommend(graph, db, constraint, k=3):
    recomputed = utilization_ratio(rec.plan, db)
    print(f"  #{rec.rank} {rec.summary}  (recomputed {recomputed:.3f})")
