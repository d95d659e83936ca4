import pytest

from sliceforge import agents
from sliceforge.agents import (
    WorkflowEngine,
    agents_to_doc,
    find_agent,
    load_agents,
    load_transcript,
    plan_tasks,
    replay,
    transcript_to_lines,
)
from sliceforge.errors import (
    DuplicateAgentName,
    IndexOutOfRange,
    NoApplicableTool,
    NonDeterministicSource,
    NotAwaitingChoice,
    ReplayIntegrityError,
    UnresolvedAgentReference,
)
from sliceforge.gateway.scenario import build_context, default_agents_text
from sliceforge.intent import RuleBasedAdapter

OPERATOR_GOAL = ("Design and deploy a network slice so that the average "
                 "slice utilization ratio is greater than 80 percent")


class TestLoadAgents:
    def test_verbatim_listing_loads(self):
        defs = load_agents(default_agents_text())
        assert [a.name for a in defs] == [
            "On-Device Agent", "Slice Modelling Agent",
            "Slice Deployment Agent", "Resource Management Agent"]

    def test_tool_distribution(self):
        defs = load_agents(default_agents_text())
        tools = {a.name: [t.name for t in a.tools] for a in defs}
        assert tools["On-Device Agent"] == ["modeller", "deployer"]
        assert tools["Slice Modelling Agent"] == ["slicenet", "slicenet-preparer"]
        assert tools["Slice Deployment Agent"] == ["nsi-deployer", "nsi-preparer"]
        assert tools["Resource Management Agent"] == \
            ["resource-deployer", "resource-manager"]

    def test_modeller_delegates_case_insensitively(self):
        defs = load_agents(default_agents_text())
        on_device = find_agent(defs, "On-Device Agent")
        modeller = on_device.tool("modeller")
        # the listing spells the delegate 'Slice modelling Agent'
        assert modeller.agent == "Slice modelling Agent"
        assert find_agent(defs, modeller.agent).name == "Slice Modelling Agent"

    def test_resource_manager_actions(self):
        defs = load_agents(default_agents_text())
        rm = find_agent(defs, "Resource Management Agent").tool("resource-manager")
        assert rm.actions() == {"start", "stop", "scale", "restart", "delete"}

    def test_ghost_agent_reference(self):
        doc = {"llm-assisted-slice-agents": [
            {"name": "A", "goal": "g", "prompt": "p",
             "tools": [{"name": "t", "agent": "Ghost Agent"}]}]}
        with pytest.raises(UnresolvedAgentReference):
            load_agents(doc)

    def test_duplicate_agent_name(self):
        doc = {"llm-assisted-slice-agents": [
            {"name": "A", "goal": "g", "prompt": "p", "tools": [{"name": "t"}]},
            {"name": "a", "goal": "g", "prompt": "p", "tools": [{"name": "u"}]}]}
        with pytest.raises(DuplicateAgentName):
            load_agents(doc)

    def test_round_trip_preserves_every_key(self):
        text = default_agents_text()
        parsed = agents._relaxed_yaml(text)
        defs = load_agents(text)
        assert agents_to_doc(defs) == parsed

    def test_unknown_keys_survive(self):
        doc = {"llm-assisted-slice-agents": [
            {"name": "A", "goal": "g", "prompt": "p", "priority": 9,
             "tools": [{"name": "t", "timeout_s": 30}]}]}
        defs = load_agents(doc)
        assert defs[0].extensions == {"priority": 9}
        assert defs[0].tools[0].extensions == {"timeout_s": 30}
        assert agents_to_doc(defs) == doc


class TestPlanTasks:
    @pytest.fixture
    def on_device(self):
        return find_agent(load_agents(default_agents_text()), "On-Device Agent")

    def test_operator_goal_two_tasks(self, on_device):
        tasks = plan_tasks(on_device, OPERATOR_GOAL, RuleBasedAdapter())
        assert [t.tool_used for t in tasks] == ["modeller", "deployer"]
        assert tasks[0].assigned_agent == "Slice modelling Agent"
        assert all(t.status == "Pending" for t in tasks)

    def test_tenant_goal_three_tasks(self, on_device):
        tasks = plan_tasks(on_device,
                           "telemedicine service with high quality video calls",
                           RuleBasedAdapter())
        assert [t.purpose for t in tasks] == ["translate", "model", "deploy"]

    def test_no_applicable_tool(self, on_device):
        with pytest.raises(NoApplicableTool):
            plan_tasks(on_device, "bake a cake", RuleBasedAdapter())


class TestOperatorWorkflow:
    def test_pause_choice_complete(self, operator_context):
        engine = WorkflowEngine(operator_context)
        session = engine.start_session(OPERATOR_GOAL, initiator="operator")
        engine.run_session(session, until="blocked")

        assert session.state == "AwaitingHumanChoice"
        assert len(session.pending_choice) >= 1
        kinds = [m.kind for m in session.transcript]
        assert "choice_request" in kinds
        # the instance carries the pause in its own state machine
        nsi = operator_context.orchestrator.get(session.artifacts["nsi_id"])
        assert nsi.status == "AwaitingChoice"

        engine.submit_choice(session, selection=0)
        assert session.state == "Completed"
        result = session.result
        assert result["slices"][0]["status"] == "Active"
        bundle = result["slices"][0]["descriptors"]
        assert bundle["slice_profile_doc"]["kind"] == "SliceProfile"
        assert len(bundle["vnfd_docs"]) == 3

    def test_no_tool_call_while_paused(self, operator_context):
        engine = WorkflowEngine(operator_context)
        session = engine.start_session(OPERATOR_GOAL, initiator="operator")
        engine.run_session(session, until="blocked")
        engine.submit_choice(session, selection=0)
        kinds = [m.kind for m in session.transcript]
        request_at = kinds.index("choice_request")
        response_at = kinds.index("choice_response")
        assert "tool_call" not in kinds[request_at + 1:response_at]

    def test_paused_iff_pending_choice(self, operator_context):
        engine = WorkflowEngine(operator_context)
        session = engine.start_session(OPERATOR_GOAL, initiator="operator")
        assert session.pending_choice == []
        engine.run_session(session, until="blocked")
        assert session.state == "AwaitingHumanChoice" and session.pending_choice
        engine.submit_choice(session, selection=0)
        assert session.state == "Completed" and not session.pending_choice

    def test_index_out_of_range(self, operator_context):
        engine = WorkflowEngine(operator_context)
        session = engine.start_session(OPERATOR_GOAL, initiator="operator")
        engine.run_session(session, until="blocked")
        options = len(session.pending_choice)
        with pytest.raises(IndexOutOfRange):
            engine.submit_choice(session, selection=options + 3)
        assert session.state == "AwaitingHumanChoice"

    def test_not_awaiting_choice(self, operator_context):
        engine = WorkflowEngine(operator_context)
        session = engine.start_session(OPERATOR_GOAL, initiator="operator")
        with pytest.raises(NotAwaitingChoice):
            engine.submit_choice(session, selection=0)

    def test_reject_with_feedback_remodels_once(self, operator_context):
        engine = WorkflowEngine(operator_context)
        session = engine.start_session(OPERATOR_GOAL, initiator="operator")
        engine.run_session(session, until="blocked")
        first_options = list(session.pending_choice)

        engine.submit_choice(session, feedback="prefer fewer domains")
        assert session.state == "AwaitingHumanChoice"
        kinds = [m.kind for m in session.transcript]
        assert kinds.count("choice_request") == 2
        modelling_tasks = [t for t in session.tasks if t.purpose == "modelling"]
        assert len(modelling_tasks) == 2
        # secondary objective reorders by fewer domains
        domains = [len(opt["plan"]["metrics"]["domains_touched"])
                   for opt in session.pending_choice]
        assert domains == sorted(domains) or first_options != session.pending_choice

        engine.submit_choice(session, feedback="still not happy")
        assert session.state == "Aborted"
        assert session.transcript[-1].kind == "error"

    def test_run_session_completes_with_script(self, operator_context):
        engine = WorkflowEngine(operator_context)
        session = engine.start_session(OPERATOR_GOAL, initiator="operator",
                                       auto_choices=[0])
        engine.run_session(session, until="complete")
        assert session.state == "Completed"


class TestTenantWorkflow:
    TELEMEDICINE = ("telemedicine service with high quality video calls, "
                    "security, sensitive medical data")

    def test_negotiation_pause_then_complete(self, reference_context):
        engine = WorkflowEngine(reference_context)
        session = engine.start_session(self.TELEMEDICINE, initiator="tenant")
        engine.run_session(session, until="blocked")

        assert session.state == "AwaitingRelaxationApproval"
        (proposal,) = session.pending_choice
        assert proposal["attribute"] == "max_latency_ms"
        assert proposal["current_value"] == 5
        assert proposal["proposed_value"] == 20

        engine.submit_choice(session, selection=0)
        assert session.state == "Completed"
        slices = session.result["slices"]
        assert len(slices) == 2
        assert all(s["status"] == "Active" for s in slices)

    def test_relaxation_rejected_aborts(self, reference_context):
        engine = WorkflowEngine(reference_context)
        session = engine.start_session(self.TELEMEDICINE, initiator="tenant")
        engine.run_session(session, until="blocked")
        engine.submit_choice(session, feedback="no, keep 5 ms")
        assert session.state == "Aborted"

    def test_zero_headroom_aborts_with_error(self, reference_context):
        # exhaust every access node so even the lightest tier cannot place
        network = reference_context.network
        from sliceforge.substrate import ResourceDemand
        for domain in network.domains.values():
            for nid, node in domain.nodes.items():
                domain.allocate({nid: ResourceDemand(cpu=node.cpu_capacity)}, {})
        engine = WorkflowEngine(reference_context)
        session = engine.start_session(self.TELEMEDICINE, initiator="tenant")
        engine.run_session(session, until="blocked")
        assert session.state == "Aborted"
        assert session.transcript[-1].kind == "error"


class TestDispatchTool:
    def test_unbound_tool(self, operator_context):
        from sliceforge.agents import ToolDefinition
        from sliceforge.errors import BindingError
        engine = WorkflowEngine(operator_context)
        session = engine.start_session(OPERATOR_GOAL, initiator="operator")
        ghost = ToolDefinition(name="mystery", agent=None, description="",
                               input="", output="")
        with pytest.raises(BindingError):
            engine.dispatch_tool(session, ghost, {})

    def test_resource_manager_scale_binding(self, operator_context):
        engine = WorkflowEngine(operator_context)
        session = engine.start_session(OPERATOR_GOAL, initiator="operator",
                                       auto_choices=[0])
        engine.run_session(session, until="complete")
        nsi_id = session.result["slices"][0]["nsi_id"]
        nsi = operator_context.orchestrator.get(nsi_id)
        trace = {"steps": [{"duration_s": 10, "throughput_mbps": 45.0,
                            "cpu_vcpu": 3.0, "latency_ms": 8.0}]}
        for seg in nsi.segments:
            operator_context.orchestrator.play_trace(
                nsi, {**trace, "segment_ref": seg.domain_id})
        defs = operator_context.agents
        rm = find_agent(defs, "Resource Management Agent").tool("resource-manager")
        out = engine.dispatch_tool(session, rm,
                                   {"action": "scale", "nsi_id": nsi_id})
        assert out["decision"] in ("ScaleUp", "ScaleDown", "Hold", "Failed")

    def test_nsi_preparer_binding(self, operator_context):
        engine = WorkflowEngine(operator_context)
        session = engine.start_session(OPERATOR_GOAL, initiator="operator",
                                       auto_choices=[0])
        engine.run_session(session, until="complete")
        chosen = session.artifacts["chosen_plans"][0]
        defs = operator_context.agents
        preparer = find_agent(defs, "Slice Deployment Agent").tool("nsi-preparer")
        out = engine.dispatch_tool(session, preparer, chosen)
        assert out["nsd_doc"]["kind"] == "NSD"


class TestReplay:
    def test_operator_replay_identical(self, operator_scenario):
        context_a = build_context(operator_scenario)
        engine_a = WorkflowEngine(context_a)
        session_a = engine_a.start_session(OPERATOR_GOAL, initiator="operator")
        engine_a.run_session(session_a, until="blocked")
        engine_a.submit_choice(session_a, selection=0)
        lines = transcript_to_lines(engine_a, session_a)

        context_b = build_context(operator_scenario)
        replayed = replay(lines, context_b)
        assert [m.to_doc() for m in replayed.transcript] == \
            [m.to_doc() for m in session_a.transcript]

    def test_non_deterministic_source(self, operator_scenario):
        context = build_context(operator_scenario)
        engine = WorkflowEngine(context)
        session = engine.start_session(OPERATOR_GOAL, initiator="operator",
                                       auto_choices=[0])
        engine.run_session(session, until="complete")
        lines = transcript_to_lines(engine, session)
        header, messages = load_transcript(lines)
        header["deterministic"] = False
        with pytest.raises(NonDeterministicSource):
            replay((header, messages), build_context(operator_scenario))

    def test_tampered_seq(self, operator_scenario):
        context = build_context(operator_scenario)
        engine = WorkflowEngine(context)
        session = engine.start_session(OPERATOR_GOAL, initiator="operator",
                                       auto_choices=[0])
        engine.run_session(session, until="complete")
        header, messages = load_transcript(transcript_to_lines(engine, session))
        messages[2]["seq"] = 99
        with pytest.raises(ReplayIntegrityError):
            replay((header, messages), build_context(operator_scenario))
