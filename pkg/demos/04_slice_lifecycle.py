"""Walkthrough: the full slice lifecycle -- instance creation, per-domain
segments with stitch points, deployment, telemetry, SLA checks, auto-scaling,
a tenant augment request, and teardown with exact capacity restoration.

Run from the repository root:  python demos/04_slice_lifecycle.py
"""

from sliceforge.embedder import embed
from sliceforge.gateway.scenario import build_context, load_scenario
from sliceforge.orchestrator import AugmentRequest, ScalePolicy
from sliceforge.profiles import derive_slice_profiles, instantiate_graph

context = build_context(load_scenario("scenarios/operator.yaml"))
orchestrator = context.orchestrator
pristine = context.network.allocation_state()

request = context.request_profile
requirement = request.slice_requirements[0]
template = context.resolve_graph(request.service_type, requirement.slice_kind)
plan = embed(instantiate_graph(template, requirement),
             context.network.build_resource_db())
slice_profile = derive_slice_profiles(request)[0]

nsi = orchestrator.create_nsi(slice_profile, plan, template_graph=template)
orchestrator.partition_segments(nsi)
print(f"{nsi.nsi_id} modelled; segments:")
for seg in nsi.segments:
    print(f"  {seg.segment_id}: nodes {sorted(seg.nodes)}, "
          f"stitches {seg.stitch_points}")

orchestrator.deploy(nsi)
print(f"deployed -> {nsi.status}")

# Telemetry drives auto-scaling: ten samples at 90% of the provisioned rate.
for seg in nsi.segments:
    orchestrator.play_trace(nsi, {
        "segment_ref": seg.domain_id,
        "steps": [{"duration_s": 10, "throughput_mbps": 45.0,
                   "cpu_vcpu": 3.0, "latency_ms": 8.0}]})
decision = orchestrator.autoscale_tick(nsi, ScalePolicy())
print(f"autoscale: {decision.action} "
      f"(window mean {decision.observed_utilization:.2f}) {decision.detail}")

verdict = orchestrator.check_sla(nsi, (0.0, orchestrator.clock.now()))
print(f"SLA compliant: {verdict.compliant}; violations: {list(verdict.violations)}")

# The tenant loosens the latency bound at runtime; the mapping is untouched.
orchestrator.augment(nsi, AugmentRequest("demo-1", nsi.nsi_id,
                                         "max_latency_ms", 100.0, "tenant"))
print(f"augmented latency bound -> {nsi.requirement.max_latency_ms:g} ms, "
      f"status {nsi.status}")

orchestrator.terminate(nsi)
restored = context.network.allocation_state() == pristine
print(f"terminated; substrate restored exactly: {restored}")
print(f"event log wrote {len(orchestrator.events.records)} records, e.g.")
for record in orchestrator.events.records[:4]:
    print(f"  {record['op']}: {record['before']} -> {record['after']}")
