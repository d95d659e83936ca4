"""Acceptance suite: one test per criterion, each printing a PASS line.

Run:  pytest tests/test_acceptance.py -v -s
"""

import itertools
import random
import time

from sliceforge.agents import (
    WorkflowEngine,
    find_agent,
    load_agents,
    replay,
    transcript_to_lines,
)
from sliceforge.embedder import (
    EmbeddingPlan,
    EmbedPolicy,
    InfeasibilityReport,
    ObjectiveConstraint,
    check_plan,
    embed,
    oracle_best_latency,
    oracle_embed,
    recommend,
)
from sliceforge.errors import InsufficientCapacity, NoViableRelaxation
from sliceforge.gateway.scenario import build_context, default_agents_text
from sliceforge.intent import (
    IntentText,
    RuleBasedAdapter,
    propose_relaxation,
    translate_intent,
)
from sliceforge.orchestrator import AugmentRequest, ScalePolicy
from sliceforge.profiles import (
    ServiceGraph,
    ServiceProfile,
    SliceRequirement,
    VirtualLink,
    Vnf,
    derive_slice_profiles,
    instantiate_graph,
)

TELEMEDICINE_INTENT = ("telemedicine service with high quality video calls, "
                "security, sensitive medical data")
OPERATOR_GOAL = ("Design and deploy a network slice so that the average "
                 "slice utilization ratio is greater than 80 percent")


def ok(line):
    print(f"ACCEPTANCE PASS: {line}")


class TestCriterion1TelemedicineDecomposition:
    def test_two_slices_with_flags_under_1s(self):
        started = time.monotonic()
        profile = translate_intent(IntentText(TELEMEDICINE_INTENT), RuleBasedAdapter())
        elapsed = time.monotonic() - started

        assert len(profile.slice_requirements) == 2
        by_kind = {r.slice_kind: r for r in profile.slice_requirements}
        assert set(by_kind) == {"embb", "urllc"}
        assert by_kind["embb"].min_throughput_mbps == 100      # high tier
        assert by_kind["urllc"].max_latency_ms == 5            # ultra-low tier
        assert all(r.isolation_required and r.encryption_required
                   for r in profile.slice_requirements)
        assert elapsed < 1.0
        ok(f"1 telemedicine decomposition (2 slices, flags set, {elapsed:.3f}s)")


def independent_utilization(plan, network):
    """Recompute mean demand-vs-capacity from raw scenario state, sharing no
    code with the embedder's metric."""
    node_cpu, link_bw = {}, {}
    for vnf in plan.graph.vnfs:
        _, node = plan.node_map[vnf.vnf_id]
        node_cpu[node] = node_cpu.get(node, 0.0) + vnf.cpu
    for vl in plan.graph.vlinks:
        for lid in plan.link_map[vl.vlink_id]:
            link_bw[lid] = link_bw.get(lid, 0.0) + vl.bandwidth_mbps
    ratios = []
    for nid, demand in sorted(node_cpu.items()):
        for domain in network.domains.values():
            if nid in domain.nodes:
                node = domain.nodes[nid]
                ratios.append((node.cpu_allocated + demand) / node.cpu_capacity)
    for lid, demand in sorted(link_bw.items()):
        link = None
        for domain in network.domains.values():
            link = domain.links.get(lid) or link
        link = link or network.interconnects.links.get(lid)
        ratios.append((link.bandwidth_allocated + demand) / link.bandwidth_capacity)
    return sum(ratios) / len(ratios) if ratios else 0.0


class TestCriterion2OperatorConstraint:
    def test_every_recommendation_above_080_under_5s(self, operator_context):
        ctx = operator_context
        total_nodes = sum(len(d.nodes) for d in ctx.network.domains.values())
        assert len(ctx.network.domains) == 3 and total_nodes <= 12

        started = time.monotonic()
        req = ctx.request_profile.slice_requirements[0]
        graph = instantiate_graph(
            ctx.resolve_graph("telemedicine", "urllc"), req)
        db = ctx.network.build_resource_db()
        recs = recommend(graph, db, ObjectiveConstraint("utilization_ratio",
                                                        ">", 0.80), k=5)
        elapsed = time.monotonic() - started

        assert len(recs) >= 1
        for rec in recs:
            assert independent_utilization(rec.plan, ctx.network) > 0.80
        assert elapsed < 5.0
        ok(f"2 operator 80% constraint ({len(recs)} recommendations, "
           f"all > 0.80 by independent recomputation, {elapsed:.2f}s)")


def sweep_graphs():
    """Every DAG shape with <= 3 vnfs, uniform demands over the tier grid.
    The affinity-pinned shapes force cross-domain placement, so tight latency
    tiers produce genuine latency infeasibilities."""
    shapes = {
        "single": ((1,), (), None),
        "chain2": ((1, 2), (("v1", "v2"),), None),
        "chain3": ((1, 2, 3), (("v1", "v2"), ("v2", "v3")), None),
        "fan-out": ((1, 2, 3), (("v1", "v2"), ("v1", "v3")), None),
        "fan-in": ((1, 2, 3), (("v1", "v3"), ("v2", "v3")), None),
        "xdomain2": ((1, 2), (("v1", "v2"),), ("access", "cloud")),
        "xdomain3": ((1, 2, 3), (("v1", "v2"), ("v2", "v3")),
                     ("access", None, "cloud")),
    }
    for name, (nodes, edges, affinities) in shapes.items():
        for cpu, bw, lat in itertools.product((2.0, 5.0), (10.0, 50.0, 100.0),
                                              (5.0, 20.0, 100.0)):
            vnfs = tuple(
                Vnf(f"v{i}", f"fn{i}", cpu, 1.0, 1.0,
                    affinities[i - 1] if affinities else None)
                for i in nodes)
            vlinks = tuple(VirtualLink(a, b, bw, lat) for a, b in edges)
            yield f"{name}/cpu{cpu:g}/bw{bw:g}/lat{lat:g}", \
                ServiceGraph(vnfs=vnfs, vlinks=vlinks)


class TestCriterion3OracleAgreement:
    def test_sweep_within_10_minutes(self, sweep_context):
        db = sweep_context.network.build_resource_db()
        assert sum(len(t.nodes) for t in db.topologies.values()) == 6

        started = time.monotonic()
        total = agree = 0
        checker_clean = True
        latency_reports = 0
        for label, graph in sweep_graphs():
            total += 1
            mine = embed(graph, db)
            truth = oracle_embed(graph, db)
            mine_ok = isinstance(mine, EmbeddingPlan)
            truth_ok = isinstance(truth, EmbeddingPlan)
            if mine_ok == truth_ok:
                agree += 1
            if mine_ok:
                problems = check_plan(mine, db)
                assert problems == [], f"{label}: {problems}"
            elif mine.violated == "latency":
                latency_reports += 1
                vlink = next(v for v in graph.vlinks
                             if v.vlink_id == mine.element)
                assert mine.best_achievable == \
                    oracle_best_latency(db, graph, vlink), label
        elapsed = time.monotonic() - started

        assert agree / total >= 0.95
        assert elapsed < 600
        ok(f"3 oracle agreement ({agree}/{total} feasibility matches, "
           f"100% checker-clean plans, {latency_reports} latency reports exact, "
           f"{elapsed:.1f}s)")


class TestCriterion4RollbackConservation:
    def test_1000_randomized_steps(self, reference_context):
        ctx = reference_context
        orch = ctx.orchestrator
        rng = random.Random(20260810)
        active = []
        failures_checked = 0
        deploys = 0

        def model(latency, throughput, kind):
            profile = ServiceProfile(
                f"fuzz-{deploys}", "telemedicine", "tenant",
                (SliceRequirement(kind, latency, throughput, 0.99),))
            req = profile.slice_requirements[0]
            template = ctx.resolve_graph("telemedicine", kind)
            graph = instantiate_graph(template, req)
            db = ctx.network.build_resource_db()
            plan = embed(graph, db)
            if isinstance(plan, InfeasibilityReport):
                return None
            return derive_slice_profiles(profile)[0], template, plan

        for step in range(1000):
            op = rng.choice(["deploy", "deploy", "augment", "terminate",
                             "inject_failure"])
            pre = ctx.network.allocation_state()
            if op == "deploy":
                kind = rng.choice(["embb", "urllc"])
                modelled = model(rng.choice([20.0, 100.0]),
                                 rng.choice([10.0, 50.0]), kind)
                if modelled is None:
                    continue
                sp, template, plan = modelled
                nsi = orch.create_nsi(sp, plan, template_graph=template)
                orch.partition_segments(nsi)
                try:
                    orch.deploy(nsi)
                    active.append(nsi)
                    deploys += 1
                except InsufficientCapacity:
                    assert ctx.network.allocation_state() == pre
                    failures_checked += 1
            elif op == "inject_failure":
                modelled = model(100.0, 10.0, "embb")
                if modelled is None:
                    continue
                sp, template, plan = modelled
                nsi = orch.create_nsi(sp, plan, template_graph=template)
                orch.partition_segments(nsi)
                if len(nsi.segments) < 2:
                    orch.terminate(nsi)
                    continue
                later = next((s for s in reversed(nsi.segments) if s.nodes
                              or s.link_demands), None)
                if later is None:
                    orch.terminate(nsi)
                    continue
                domain = ctx.network.domains[later.domain_id]
                from sliceforge.substrate import ResourceDemand
                if later.nodes:
                    victim = next(iter(later.nodes))
                    node = domain.nodes[victim]
                    room = node.cpu_capacity - node.cpu_allocated
                    if room <= 0:
                        orch.terminate(nsi)
                        continue
                    saboteur = domain.allocate({victim: ResourceDemand(cpu=room)}, {})
                else:
                    victim = next(iter(later.link_demands))
                    link = domain.links[victim]
                    room = link.bandwidth_capacity - link.bandwidth_allocated
                    if room <= 0:
                        orch.terminate(nsi)
                        continue
                    saboteur = domain.allocate({}, {victim: room})
                pre_fail = ctx.network.allocation_state()
                try:
                    orch.deploy(nsi)
                    active.append(nsi)   # fit despite sabotage
                except InsufficientCapacity:
                    assert ctx.network.allocation_state() == pre_fail
                    failures_checked += 1
                domain.release(saboteur)
            elif op == "augment" and active:
                nsi = rng.choice(active)
                if nsi.status != "Active":
                    continue
                attribute = rng.choice(["max_latency_ms", "min_throughput_mbps"])
                value = rng.choice([5.0, 20.0, 100.0]) \
                    if attribute == "max_latency_ms" else rng.choice([10.0, 50.0])
                try:
                    orch.augment(nsi, AugmentRequest(
                        f"fz-{step}", nsi.nsi_id, attribute, value, "fuzz"))
                except (NoViableRelaxation, InsufficientCapacity):
                    pass
            elif op == "terminate" and active:
                nsi = rng.choice(active)
                if nsi.status in ("Active", "Failed"):
                    orch.terminate(nsi)
                if nsi.status == "Terminated":
                    active.remove(nsi)
            assert orch.audit_conservation() == [], f"step {step} ({op})"
            for nsi in orch.nsis.values():
                if nsi.status == "Active":
                    assert all(s.status == "Deployed" for s in nsi.segments)

        # final independent conservation check from receipts alone
        expected = {}
        for nsi in orch.nsis.values():
            for seg in nsi.segments:
                if seg.status == "Deployed" and seg.receipt is not None:
                    for nid, d in seg.receipt.node_deltas.items():
                        expected[nid] = expected.get(nid, 0.0) + d.cpu
        for domain in ctx.network.domains.values():
            for nid, node in domain.nodes.items():
                assert node.cpu_allocated == expected.get(nid, 0.0)
        assert failures_checked > 0 and deploys > 0
        ok(f"4 rollback/conservation (1000 steps, {deploys} deploys, "
           f"{failures_checked} injected failures all restored bit-exactly)")


class TestCriterion5AgentListingFidelity:
    def test_verbatim_listing(self):
        defs = load_agents(default_agents_text())
        assert len(defs) == 4
        tools = {a.name: [t.name for t in a.tools] for a in defs}
        assert tools == {
            "On-Device Agent": ["modeller", "deployer"],
            "Slice Modelling Agent": ["slicenet", "slicenet-preparer"],
            "Slice Deployment Agent": ["nsi-deployer", "nsi-preparer"],
            "Resource Management Agent": ["resource-deployer", "resource-manager"],
        }
        all_tools = {t for names in tools.values() for t in names}
        assert all_tools == {"modeller", "deployer", "slicenet",
                             "slicenet-preparer", "nsi-deployer", "nsi-preparer",
                             "resource-deployer", "resource-manager"}
        rm = find_agent(defs, "Resource Management Agent").tool("resource-manager")
        assert rm.actions() == {"start", "stop", "scale", "restart", "delete"}
        ok("5 agent-listing fidelity (4 agents, 8 tools as listed, 5 actions)")


class TestCriterion6OperatorWorkflow:
    def test_pause_resume_deploy_replay(self, operator_scenario):
        context = build_context(operator_scenario)
        engine = WorkflowEngine(context)
        session = engine.start_session(OPERATOR_GOAL, initiator="operator")
        engine.run_session(session, until="blocked")
        assert session.state == "AwaitingHumanChoice"
        assert [t.status for t in session.tasks] == ["Done", "Pending"]

        engine.submit_choice(session, selection=0)
        assert session.state == "Completed"
        (slice_out,) = session.result["slices"]
        assert slice_out["status"] == "Active"
        nsi = context.orchestrator.get(slice_out["nsi_id"])
        assert nsi.status == "Active"

        bundle = slice_out["descriptors"]
        assert bundle["slice_profile_doc"]["kind"] == "SliceProfile"
        assert bundle["nsd_doc"]["kind"] == "NSD"
        kinds = {v.function_kind for v in nsi.plan.graph.vnfs}
        assert len(bundle["vnfd_docs"]) == len(kinds)

        lines = transcript_to_lines(engine, session)
        replayed = replay(lines, build_context(operator_scenario))
        assert [m.to_doc() for m in replayed.transcript] == \
            [m.to_doc() for m in session.transcript]
        ok("6 operator workflow (pause, choice, Active NSI, descriptor bundle, "
           "replay message-identical)")


class TestCriterion7NegotiationMinimality:
    def test_minimal_tier_and_deployed_paths(self, reference_context):
        ctx = reference_context
        profile = translate_intent(IntentText(TELEMEDICINE_INTENT), ctx.adapter)
        urllc_index = next(i for i, r in enumerate(profile.slice_requirements)
                           if r.slice_kind == "urllc")
        req = profile.slice_requirements[urllc_index]
        template = ctx.resolve_graph("telemedicine", "urllc")
        db = ctx.network.build_resource_db()
        policy = EmbedPolicy(anti_affinity=req.isolation_required)

        def embed_at(latency):
            from dataclasses import replace
            graph = instantiate_graph(template, replace(req,
                                                        max_latency_ms=latency))
            return embed(graph, db, policy)

        report = embed_at(req.max_latency_ms)
        assert isinstance(report, InfeasibilityReport)

        # independent ladder oracle: feasibility of every tier by brute embed
        ladder = [5.0, 20.0, 100.0]
        feasible = {tier: isinstance(embed_at(tier), EmbeddingPlan)
                    for tier in ladder}
        minimal = min(t for t in ladder
                      if t > req.max_latency_ms and feasible[t])

        proposal = propose_relaxation(
            profile, report,
            lambda p: isinstance(
                embed_at(p.slice_requirements[urllc_index].max_latency_ms),
                EmbeddingPlan),
            tiers=ctx.tiers, requirement_index=urllc_index)
        assert proposal.attribute == "max_latency_ms"
        assert proposal.proposed_value == minimal == 20.0

        # acceptance deploys an instance whose paths satisfy the relaxed bound
        from sliceforge.intent import apply_relaxation
        relaxed = apply_relaxation(profile, proposal, accepted=True)
        new_req = relaxed.slice_requirements[urllc_index]
        graph = instantiate_graph(template, new_req)
        plan = embed(graph, ctx.network.build_resource_db(), policy)
        assert isinstance(plan, EmbeddingPlan)
        nsi = ctx.orchestrator.create_nsi(
            derive_slice_profiles(relaxed)[urllc_index], plan,
            template_graph=template)
        ctx.orchestrator.partition_segments(nsi)
        ctx.orchestrator.deploy(nsi)
        assert nsi.status == "Active"
        for vl in plan.graph.vlinks:
            latency = sum(
                next(l for l in _all_links(ctx.network) if l.link_id == lid).latency
                for lid in plan.link_map[vl.vlink_id])
            assert latency <= proposal.proposed_value
        ok(f"7 negotiation minimality (5 ms infeasible, minimal feasible tier "
           f"{minimal:g} ms, deployed paths within bound)")


def _all_links(network):
    for domain in network.domains.values():
        yield from domain.links.values()
    yield from network.interconnects.links.values()


class TestCriterion8AutoscaleThresholds:
    def test_one_scaleup_then_none(self, operator_context):
        ctx = operator_context
        engine = WorkflowEngine(ctx)
        session = engine.start_session(OPERATOR_GOAL, initiator="operator",
                                       auto_choices=[0])
        engine.run_session(session, until="complete")
        nsi = ctx.orchestrator.get(session.result["slices"][0]["nsi_id"])
        provisioned = nsi.requirement.min_throughput_mbps
        policy = ScalePolicy(window=10)

        high = {"steps": [{"duration_s": 10,
                           "throughput_mbps": 0.9 * provisioned,
                           "cpu_vcpu": 3.0, "latency_ms": 8.0}]}
        for seg in nsi.segments:
            ctx.orchestrator.play_trace(nsi, {**high, "segment_ref": seg.domain_id})
        decisions = [ctx.orchestrator.autoscale_tick(nsi, policy)]
        decisions.append(ctx.orchestrator.autoscale_tick(nsi, policy))
        scale_ups = [d for d in decisions if d.action == "ScaleUp"]
        assert len(scale_ups) == 1 and scale_ups[0].applied

        mid = {"steps": [{"duration_s": 10,
                          "throughput_mbps": 0.5 * nsi.requirement.min_throughput_mbps,
                          "cpu_vcpu": 1.0, "latency_ms": 8.0}]}
        for seg in nsi.segments:
            ctx.orchestrator.play_trace(nsi, {**mid, "segment_ref": seg.domain_id})
        decision = ctx.orchestrator.autoscale_tick(nsi, policy)
        assert decision.action == "Hold"
        ok("8 autoscale thresholds (0.9 window -> exactly one ScaleUp; "
           "0.5 window -> none)")
