"""Multi-agent workflow runtime.

Loads declarative agent+tool definitions (the published YAML listing loads
verbatim, including its relaxed comma style), decomposes goals into tasks
through the language-model adapter, dispatches tools bound to the other
modules, pauses for human confirmation or relaxation approval, and records
a replayable transcript of every message.
"""

from __future__ import annotations

import copy
import json
import re
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

import yaml

from . import embedder as emb
from . import intent as intent_mod
from . import orchestrator as orch
from .errors import (
    BindingError,
    DuplicateAgentName,
    IndexOutOfRange,
    InvalidTransition,
    NoApplicableTool,
    NonDeterministicSource,
    NotAwaitingChoice,
    ReplayIntegrityError,
    SchemaError,
    SliceforgeError,
    UnresolvedAgentReference,
)
from .profiles import (
    ServiceProfile,
    derive_slice_profiles,
    instantiate_graph,
    render_descriptors,
    service_profile_to_doc,
    validate_service_profile,
)
from .substrate import Network, ResourceDemand

AGENTS_KEY = "llm-assisted-slice-agents"

KNOWN_AGENT_KEYS = ("name", "goal", "prompt", "tools")
KNOWN_TOOL_KEYS = ("name", "agent", "description", "input", "output")

MESSAGE_KINDS = ("task_assignment", "tool_call", "tool_result",
                 "choice_request", "choice_response", "error")

SESSION_STATES = ("Running", "AwaitingHumanChoice", "AwaitingRelaxationApproval",
                  "Completed", "Aborted")


# ---------------------------------------------------------------------------
# definitions
# ---------------------------------------------------------------------------

@dataclass
class ToolDefinition:
    name: str
    agent: str | None
    description: str
    input: str
    output: str
    extensions: dict = field(default_factory=dict)
    binding: str | None = None          # resolved operation reference

    def actions(self) -> set[str]:
        """Action set declared inline in the input tag, e.g. {start, stop}."""
        match = re.search(r"\{([^}]*)\}", self.input)
        if not match:
            return set()
        return {item.strip() for item in match.group(1).split(",") if item.strip()}


@dataclass
class AgentDefinition:
    name: str
    goal: str
    prompt: str
    tools: list[ToolDefinition]
    extensions: dict = field(default_factory=dict)

    def tool(self, name: str) -> ToolDefinition | None:
        for tool in self.tools:
            if tool.name == name:
                return tool
        return None


def _relaxed_yaml(text: str) -> Mapping:
    """Parse YAML, tolerating the listing's trailing commas at line ends."""
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError:
        return yaml.safe_load(re.sub(r",\s*$", "", text, flags=re.M))


def load_agents(source: str | Mapping) -> list[AgentDefinition]:
    """Parse an agent config document; unknown keys survive in extensions."""
    doc = _relaxed_yaml(source) if isinstance(source, str) else source
    if not isinstance(doc, Mapping) or AGENTS_KEY not in doc:
        raise SchemaError(AGENTS_KEY, "missing agent list")

    agents: list[AgentDefinition] = []
    seen: set[str] = set()
    for i, adoc in enumerate(doc[AGENTS_KEY]):
        at = f"{AGENTS_KEY}[{i}]"
        if "name" not in adoc:
            raise SchemaError(f"{at}.name", "missing required key")
        name = str(adoc["name"])
        if name.lower() in seen:
            raise DuplicateAgentName(name)
        seen.add(name.lower())
        tools = []
        for j, tdoc in enumerate(adoc.get("tools") or []):
            if "name" not in tdoc:
                raise SchemaError(f"{at}.tools[{j}].name", "missing required key")
            tools.append(ToolDefinition(
                name=str(tdoc["name"]),
                agent=tdoc.get("agent"),
                description=str(tdoc.get("description", "")),
                input=str(tdoc.get("input", "")),
                output=str(tdoc.get("output", "")),
                extensions={k: v for k, v in tdoc.items() if k not in KNOWN_TOOL_KEYS}))
        agents.append(AgentDefinition(
            name=name,
            goal=str(adoc.get("goal", "")),
            prompt=str(adoc.get("prompt", "")),
            tools=tools,
            extensions={k: v for k, v in adoc.items() if k not in KNOWN_AGENT_KEYS}))

    by_name = {a.name.lower(): a for a in agents}
    for agent in agents:
        for tool in agent.tools:
            if tool.agent and tool.agent.lower() not in by_name:
                raise UnresolvedAgentReference(
                    f"tool {tool.name!r} of {agent.name!r} delegates to "
                    f"unknown agent {tool.agent!r}")
    resolve_bindings(agents)
    return agents


def agents_to_doc(agents: Iterable[AgentDefinition]) -> dict:
    """Serialize back to the config shape (round-trip preserves every key)."""
    out = []
    for agent in agents:
        adoc: dict = {"name": agent.name}
        for key, value in (("goal", agent.goal), ("prompt", agent.prompt)):
            if value:
                adoc[key] = value
        adoc["tools"] = []
        for tool in agent.tools:
            tdoc: dict = {"name": tool.name}
            if tool.agent is not None:
                tdoc["agent"] = tool.agent
            for key, value in (("description", tool.description),
                               ("input", tool.input), ("output", tool.output)):
                if value:
                    tdoc[key] = value
            tdoc.update(tool.extensions)
            adoc["tools"].append(tdoc)
        adoc.update(agent.extensions)
        out.append(adoc)
    return {AGENTS_KEY: out}


def find_agent(agents: Iterable[AgentDefinition], name: str) -> AgentDefinition:
    for agent in agents:
        if agent.name.lower() == name.lower():
            return agent
    raise UnresolvedAgentReference(f"no agent named {name!r}")


# Published tool names mapped to the operations that implement them.
BINDING_TABLE = {
    "modeller": "embedder.recommend",
    "slicenet": "embedder.run_experiment",
    "slicenet-preparer": "embedder.prepare_experiment",
    "deployer": "orchestrator.deploy_pipeline",
    "nsi-deployer": "orchestrator.deploy_pipeline",
    "nsi-preparer": "profiles.render_descriptors",
    "resource-deployer": "orchestrator.deploy_pipeline",
    "resource-manager": "orchestrator.lifecycle",
    "intent-translator": "intent.translate_intent",
}


def resolve_bindings(agents: Iterable[AgentDefinition]) -> None:
    for agent in agents:
        for tool in agent.tools:
            tool.binding = BINDING_TABLE.get(tool.name)


# ---------------------------------------------------------------------------
# session state
# ---------------------------------------------------------------------------

@dataclass
class TaskRecord:
    task_id: str
    assigned_agent: str
    tool_used: str
    purpose: str
    input_snapshot: object = None
    output_snapshot: object = None
    status: str = "Pending"


@dataclass
class AgentMessage:
    seq: int
    from_agent: str
    to_agent: str
    kind: str
    payload: object

    def to_doc(self) -> dict:
        return {"seq": self.seq, "from": self.from_agent, "to": self.to_agent,
                "kind": self.kind, "payload": self.payload}


@dataclass
class WorkflowSession:
    session_id: str
    initiator: str
    goal: str
    agent_name: str = "On-Device Agent"
    tasks: list[TaskRecord] = field(default_factory=list)
    state: str = "Running"
    pending_choice: list = field(default_factory=list)
    transcript: list[AgentMessage] = field(default_factory=list)
    artifacts: dict = field(default_factory=dict)
    rejections: int = 0
    auto_choices: list = field(default_factory=list)
    result: dict | None = None

    def next_pending(self) -> TaskRecord | None:
        for task in self.tasks:
            if task.status == "Pending":
                return task
        return None


# ---------------------------------------------------------------------------
# runtime context
# ---------------------------------------------------------------------------

@dataclass
class RuntimeContext:
    """Everything a workflow run needs, built once per scenario."""

    network: Network
    orchestrator: orch.Orchestrator
    catalogue: intent_mod.CatalogueOverlay
    adapter: intent_mod.LanguageModelAdapter
    tiers: object
    agents: list[AgentDefinition]
    objective: emb.ObjectiveConstraint = field(
        default_factory=lambda: emb.ObjectiveConstraint("utilization_ratio", ">", 0.8))
    k: int = 3
    seed: int = 0
    scenario_sha: str = ""
    request_profile: ServiceProfile | None = None

    def resolve_graph(self, service_type: str, slice_kind: str):
        return self.catalogue.resolve(service_type, slice_kind, self.adapter)


def plan_footprint(plan: emb.EmbeddingPlan) -> tuple[dict[str, ResourceDemand],
                                                     dict[str, float]]:
    """Full per-node and per-link demand of a plan (for what-if allocation)."""
    nodes: dict[str, ResourceDemand] = {}
    for vnf in plan.graph.vnfs:
        _, nid = plan.node_map[vnf.vnf_id]
        nodes[nid] = nodes.get(nid, ResourceDemand()) \
            + ResourceDemand(vnf.cpu, vnf.mem, vnf.storage)
    links: dict[str, float] = {}
    for vl in plan.graph.vlinks:
        for lid in plan.link_map.get(vl.vlink_id, ()):
            links[lid] = links.get(lid, 0.0) + vl.bandwidth_mbps
    return nodes, links


def _apply_plan_to_scratch(network: Network, plan: emb.EmbeddingPlan) -> None:
    """Virtually allocate a plan's footprint on a scratch network copy."""
    nodes, links = plan_footprint(plan)
    by_store: dict[str, tuple[dict, dict]] = {}
    for nid, demand in nodes.items():
        for did in sorted(network.domains):
            if nid in network.domains[did].nodes:
                by_store.setdefault(did, ({}, {}))[0][nid] = demand
                break
    for lid, bw in links.items():
        owner = None
        for did in sorted(network.domains):
            if lid in network.domains[did].links:
                owner = did
                break
        if owner is None:
            owner = "~interconnect"
        by_store.setdefault(owner, ({}, {}))[1][lid] = bw
    for store_id in sorted(by_store):
        node_d, link_d = by_store[store_id]
        store = network.interconnects if store_id == "~interconnect" \
            else network.domains[store_id]
        store.allocate(node_d, link_d)


# ---------------------------------------------------------------------------
# task planning
# ---------------------------------------------------------------------------

def plan_tasks(agent: AgentDefinition, goal: str,
               adapter: intent_mod.LanguageModelAdapter) -> list[TaskRecord]:
    """Goal decomposition via the adapter (keyword -> tool-category match for
    the rule-based one)."""
    response = adapter.complete(
        prompt=agent.prompt,
        context={"task": "plan_tasks", "goal": goal,
                 "tools": [{"name": t.name, "description": t.description}
                           for t in agent.tools]})
    docs = response.get("tasks", [])
    if not docs:
        raise NoApplicableTool(f"no tool of {agent.name!r} matches the goal")
    tasks = []
    for i, tdoc in enumerate(docs, start=1):
        tool_name = tdoc["tool"]
        tool = agent.tool(tool_name)
        tasks.append(TaskRecord(
            task_id=f"task-{i:03d}",
            assigned_agent=(tool.agent if tool and tool.agent else agent.name),
            tool_used=tool_name,
            purpose=tdoc.get("purpose", tool_name)))
    return tasks


def _delegated_tool_order(agent: AgentDefinition) -> list[ToolDefinition]:
    """Preparer tools run before the tools that consume their output."""
    preparers = [t for t in agent.tools if t.name.endswith("-preparer")]
    rest = [t for t in agent.tools if not t.name.endswith("-preparer")]
    return preparers + rest


# ---------------------------------------------------------------------------
# engine
# ---------------------------------------------------------------------------

class WorkflowEngine:
    """Runs sessions against one scenario context; single-threaded per session."""

    def __init__(self, context: RuntimeContext):
        self.context = context
        self.sessions: dict[str, WorkflowSession] = {}
        self._session_seq = 0
        self._bindings: dict[str, Callable] = {
            "intent.translate_intent": self._op_translate,
            "embedder.prepare_experiment": self._op_prepare_experiment,
            "embedder.run_experiment": self._op_run_experiment,
            "embedder.recommend": self._op_recommend,
            "profiles.render_descriptors": self._op_render_descriptors,
            "orchestrator.deploy_pipeline": self._op_deploy_pipeline,
            "orchestrator.lifecycle": self._op_lifecycle,
        }

    # -- session lifecycle ---------------------------------------------------

    def start_session(self, goal: str, initiator: str = "operator",
                      agent_name: str = "On-Device Agent",
                      auto_choices: list | None = None) -> WorkflowSession:
        agent = find_agent(self.context.agents, agent_name)
        self._session_seq += 1
        session = WorkflowSession(
            session_id=f"session-{self._session_seq:03d}",
            initiator=initiator, goal=goal, agent_name=agent.name,
            auto_choices=list(auto_choices or []))
        session.tasks = plan_tasks(agent, goal, self.context.adapter)
        self.sessions[session.session_id] = session
        return session

    def _log(self, session: WorkflowSession, from_agent: str, to_agent: str,
             kind: str, payload) -> AgentMessage:
        message = AgentMessage(seq=len(session.transcript) + 1,
                               from_agent=from_agent, to_agent=to_agent,
                               kind=kind, payload=payload)
        session.transcript.append(message)
        return message

    def run_session(self, session: WorkflowSession,
                    until: str = "blocked") -> WorkflowSession:
        """Execute tasks in order until the session blocks or finishes.

        With until="complete", pauses are answered from the session's
        scripted choices; an unscripted pause stops the run.
        """
        if session.state in ("Completed", "Aborted"):
            raise InvalidTransition(f"session {session.session_id} is {session.state}")
        while True:
            if session.state in ("AwaitingHumanChoice", "AwaitingRelaxationApproval"):
                if until == "complete" and session.auto_choices:
                    choice = session.auto_choices.pop(0)
                    if isinstance(choice, int):
                        self.submit_choice(session, selection=choice)
                    else:
                        self.submit_choice(session, feedback=str(choice))
                    continue
                return session
            if session.state != "Running":
                return session
            task = session.next_pending()
            if task is None:
                self._complete(session)
                return session
            self._execute(session, task)

    def _complete(self, session: WorkflowSession) -> None:
        session.state = "Completed"
        session.result = session.artifacts.get("result")

    def _abort(self, session: WorkflowSession, reason: str) -> None:
        self._log(session, session.agent_name, "human",
                  "error", {"reason": reason})
        session.state = "Aborted"

    # -- task execution ------------------------------------------------------

    def _execute(self, session: WorkflowSession, task: TaskRecord) -> None:
        agent = find_agent(self.context.agents, session.agent_name)
        tool = agent.tool(task.tool_used) or ToolDefinition(
            name=task.tool_used, agent=None,
            description="builtin", input="", output="",
            binding=BINDING_TABLE.get(task.tool_used))
        if task.purpose == "model" and tool.agent is not None:
            # tenant-side modelling embeds directly; no delegated simulation run
            tool = ToolDefinition(name=tool.name, agent=None,
                                  description=tool.description, input=tool.input,
                                  output=tool.output, binding=tool.binding)

        task.input_snapshot = self._assemble_input(session, task)
        self._log(session, agent.name, task.assigned_agent, "task_assignment",
                  {"task_id": task.task_id, "tool": task.tool_used,
                   "purpose": task.purpose, "input": task.input_snapshot})
        try:
            output = self.dispatch_tool(session, tool, task.input_snapshot,
                                        caller=agent.name)
        except SliceforgeError as exc:
            task.status = "Failed"
            payload = {"task_id": task.task_id, "error": type(exc).__name__,
                       "detail": str(exc)}
            hits = getattr(exc, "hits", None)
            if hits is not None:     # untranslatable intents carry the scan
                payload["hits"] = {
                    "matched": [[h.keyword, h.category] for h in hits.matched],
                    "unmodeled": list(hits.unmodeled)}
            self._log(session, task.assigned_agent, agent.name, "error", payload)
            session.state = "Aborted"
            return
        task.output_snapshot = output
        task.status = "Done"
        self._after_task(session, task, output)

    def _assemble_input(self, session: WorkflowSession, task: TaskRecord):
        """Inputs come only from the goal, scenario config, or prior outputs."""
        ctx = self.context
        if task.purpose == "translate":
            return {"text": session.goal, "speaker": session.initiator}
        if task.purpose in ("modelling", "model"):
            profile_doc = session.artifacts.get("profile")
            if profile_doc is None:
                if ctx.request_profile is None:
                    raise SchemaError("request",
                                      "scenario has no request profile for this goal")
                profile_doc = service_profile_to_doc(ctx.request_profile)
            payload = {"profile": profile_doc,
                       "objective": {"metric": ctx.objective.metric,
                                     "op": ctx.objective.op,
                                     "value": ctx.objective.value},
                       "k": ctx.k}
            if session.artifacts.get("secondary_objective"):
                payload["secondary"] = session.artifacts["secondary_objective"]
            if task.purpose == "model":
                payload["mode"] = "single-plan"
            return payload
        if task.purpose in ("deployment", "deploy"):
            profile_doc = session.artifacts.get("profile")
            if profile_doc is None and ctx.request_profile is not None:
                profile_doc = service_profile_to_doc(ctx.request_profile)
            return {"profile": profile_doc,
                    "plans": session.artifacts.get("chosen_plans", []),
                    "nsi_id": session.artifacts.get("nsi_id")}
        return {"goal": session.goal}

    def dispatch_tool(self, session: WorkflowSession, tool: ToolDefinition,
                      payload, caller: str = "engine"):
        """Invoke the bound operation; snapshots recorded verbatim; tools that
        delegate to another agent run a nested session embedded in the log."""
        target = tool.agent or tool.name
        self._log(session, caller, target, "tool_call",
                  {"tool": tool.name, "input": payload})
        if tool.agent is not None:
            output = self._run_delegated(session, tool, payload, caller)
        else:
            if tool.binding is None:
                raise BindingError(f"tool {tool.name!r} has no resolved binding")
            operation = self._bindings.get(tool.binding)
            if operation is None:
                raise BindingError(f"no implementation for binding {tool.binding!r}")
            output = operation(session, payload)
        self._log(session, target, caller, "tool_result",
                  {"tool": tool.name, "output": output})
        return output

    def _run_delegated(self, session: WorkflowSession, tool: ToolDefinition,
                       payload, caller: str):
        """Nested session: the delegated agent runs its own tools in order."""
        delegate = find_agent(self.context.agents, tool.agent)
        nested = WorkflowSession(
            session_id=f"sub-{tool.name}",
            initiator=session.initiator,
            goal=delegate.goal,
            agent_name=delegate.name)
        nested.artifacts = session.artifacts
        carried = payload
        for i, sub in enumerate(_delegated_tool_order(delegate), start=1):
            record = TaskRecord(task_id=f"{nested.session_id}-t{i}",
                                assigned_agent=delegate.name,
                                tool_used=sub.name, purpose=sub.name,
                                input_snapshot=carried)
            nested.tasks.append(record)
            carried = self.dispatch_tool(nested, sub, carried, caller=delegate.name)
            record.output_snapshot = carried
            record.status = "Done"
        session.artifacts.setdefault("nested", []).append(nested.session_id)
        self._log(session, delegate.name, caller, "tool_result",
                  {"tool": tool.name, "nested_session": nested.session_id,
                   "nested_transcript": [m.to_doc() for m in nested.transcript]})
        return carried

    # -- post-task state handling ---------------------------------------------

    def _after_task(self, session: WorkflowSession, task: TaskRecord, output) -> None:
        if task.purpose == "translate":
            session.artifacts["profile"] = output["profile"]
            if output.get("unmodeled"):
                self._log(session, task.assigned_agent, "human", "tool_result",
                          {"notice": "not encoded", "phrases": output["unmodeled"]})
            return
        if task.purpose == "modelling":
            recommendations = output.get("recommendations", [])
            if not recommendations:
                self._abort(session, "modelling produced no feasible recommendation")
                return
            session.pending_choice = recommendations
            session.state = "AwaitingHumanChoice"
            self._log(session, task.assigned_agent, "human", "choice_request",
                      {"kind": "recommendations",
                       "options": [{"rank": r["rank"], "summary": r["summary"],
                                    "objective_value": r["objective_value"],
                                    "domains": r["plan"]["metrics"]["domains_touched"]}
                                   for r in recommendations]})
            return
        if task.purpose == "model":
            if output.get("relaxation") is not None:
                session.pending_choice = [output["relaxation"]]
                session.artifacts["model_task_id"] = task.task_id
                session.state = "AwaitingRelaxationApproval"
                self._log(session, task.assigned_agent, "human", "choice_request",
                          {"kind": "relaxation", "options": [output["relaxation"]]})
                return
            session.artifacts["chosen_plans"] = output["plans"]
            return
        if task.purpose in ("deployment", "deploy"):
            session.artifacts["result"] = output
            return

    # -- human choice ----------------------------------------------------------

    def submit_choice(self, session: WorkflowSession, selection: int | None = None,
                      feedback: str | None = None) -> WorkflowSession:
        if session.state not in ("AwaitingHumanChoice", "AwaitingRelaxationApproval"):
            raise NotAwaitingChoice(f"session {session.session_id} is {session.state}")
        if selection is None and feedback is None:
            raise SchemaError("choice", "need a selection index or feedback text")

        if selection is not None:
            if not 0 <= selection < len(session.pending_choice):
                raise IndexOutOfRange(
                    f"selection {selection} outside 0..{len(session.pending_choice) - 1}")
            self._log(session, "human", session.agent_name,
                      "choice_response", {"selection": selection})
            if session.state == "AwaitingHumanChoice":
                chosen = session.pending_choice[selection]
                session.artifacts["chosen_plans"] = [
                    {"plan": chosen["plan"],
                     "slice_profile": chosen.get("slice_profile")}]
                session.pending_choice = []
                session.state = "Running"
                nsi_id = session.artifacts.get("nsi_id")
                if nsi_id:
                    nsi = self.context.orchestrator.get(nsi_id)
                    plan = emb.plan_from_doc(chosen["plan"])
                    self.context.orchestrator.attach_plan(nsi, plan)
            else:
                proposal_doc = session.pending_choice[0]
                profile = validate_service_profile(session.artifacts["profile"],
                                                   self.context.tiers)
                proposal = _proposal_from_doc(proposal_doc, profile)
                relaxed = intent_mod.apply_relaxation(profile, proposal, accepted=True)
                session.artifacts["profile"] = service_profile_to_doc(relaxed)
                session.pending_choice = []
                session.state = "Running"
                self._reopen_task(session, session.artifacts.get("model_task_id"))
            return self.run_session(session, until="blocked")

        # rejection with feedback
        self._log(session, "human", session.agent_name,
                  "choice_response", {"rejection": True, "feedback": feedback})
        session.rejections += 1
        if session.state == "AwaitingRelaxationApproval":
            profile = validate_service_profile(session.artifacts["profile"],
                                               self.context.tiers)
            proposal = _proposal_from_doc(session.pending_choice[0], profile)
            intent_mod.apply_relaxation(profile, proposal, accepted=False)
            session.pending_choice = []
            self._abort(session, "tenant declined the relaxed requirements")
            return session
        if session.rejections >= 2:
            session.pending_choice = []
            self._abort(session, "operator rejected the recommendations twice")
            return session
        response = self.context.adapter.complete(
            prompt="Adjust the modelling task per the operator's feedback.",
            context={"task": "feedback_adjust", "feedback": feedback})
        adjustments = response.get("adjustments", {})
        if "secondary_objective" in adjustments:
            session.artifacts["secondary_objective"] = adjustments["secondary_objective"]
        session.pending_choice = []
        session.state = "Running"
        self._insert_remodel_task(session)
        return self.run_session(session, until="blocked")

    def _reopen_task(self, session: WorkflowSession, task_id: str | None) -> None:
        for task in session.tasks:
            if task.task_id == task_id:
                task.status = "Pending"
                task.output_snapshot = None
                return

    def _insert_remodel_task(self, session: WorkflowSession) -> None:
        done_modelling = [t for t in session.tasks if t.purpose == "modelling"]
        template = done_modelling[-1]
        retry = TaskRecord(
            task_id=f"task-{len(session.tasks) + 1:03d}",
            assigned_agent=template.assigned_agent,
            tool_used=template.tool_used,
            purpose="modelling")
        index = session.tasks.index(template)
        session.tasks.insert(index + 1, retry)

    # -- tool implementations ---------------------------------------------------

    def _op_translate(self, session: WorkflowSession, payload) -> dict:
        text = intent_mod.IntentText(raw=payload["text"],
                                     speaker=payload.get("speaker", "tenant"))
        profile = intent_mod.translate_intent(text, self.context.adapter,
                                              self.context.tiers)
        hits = intent_mod.extract_keywords(text)
        return {"profile": service_profile_to_doc(profile),
                "matched": [[h.keyword, h.category] for h in hits.matched],
                "unmodeled": list(hits.unmodeled)}

    def _op_prepare_experiment(self, session: WorkflowSession, payload) -> dict:
        """Turn modelling requirements into an experiment document."""
        profile = validate_service_profile(payload["profile"], self.context.tiers)
        requirement = profile.slice_requirements[0]
        template = self.context.resolve_graph(profile.service_type,
                                              requirement.slice_kind)
        graph = instantiate_graph(template, requirement)
        slice_profiles = derive_slice_profiles(profile)
        return {
            "experiment": {
                "goal": "fit the optimization constraint",
                "objective": payload["objective"],
                "k": payload.get("k", self.context.k),
                "graph": emb.graph_to_doc(graph),
                "anti_affinity": requirement.isolation_required,
                "secondary": payload.get("secondary"),
            },
            "slice_profile": orch.slice_profile_to_doc(slice_profiles[0]),
            "profile": payload["profile"],
        }

    def _op_run_experiment(self, session: WorkflowSession, payload) -> dict:
        """Run the experiment document: recommendations under the constraint."""
        exp = payload["experiment"]
        graph = emb.graph_from_doc(exp["graph"])
        objective = emb.ObjectiveConstraint(**exp["objective"])
        db = self.context.network.build_resource_db()
        policy = emb.EmbedPolicy(anti_affinity=exp.get("anti_affinity", False))
        recommendations = emb.recommend(graph, db, objective,
                                        exp.get("k", self.context.k),
                                        policy=policy,
                                        secondary=exp.get("secondary"))
        rec_docs = [{"rank": r.rank, "summary": r.summary,
                     "objective_value": r.objective_value,
                     "plan": emb.plan_to_doc(r.plan),
                     "slice_profile": payload.get("slice_profile")}
                    for r in recommendations]
        if rec_docs and payload.get("profile"):
            self._ensure_request_nsi(session, payload, rec_docs[0])
        return {"recommendations": rec_docs}

    def _ensure_request_nsi(self, session: WorkflowSession, payload,
                            top: dict) -> None:
        """Materialize the slice request so the instance carries the
        confirmation pause in its own state machine."""
        if session.artifacts.get("nsi_id"):
            return
        profile = validate_service_profile(payload["profile"], self.context.tiers)
        requirement = profile.slice_requirements[0]
        template = self.context.resolve_graph(profile.service_type,
                                              requirement.slice_kind)
        slice_profile = derive_slice_profiles(profile)[0]
        orchestrator = self.context.orchestrator
        nsi = orchestrator.create_request(slice_profile, template)
        orchestrator.attach_plan(nsi, emb.plan_from_doc(top["plan"]))
        orchestrator.mark_awaiting_choice(nsi)
        session.artifacts["nsi_id"] = nsi.nsi_id

    def _op_recommend(self, session: WorkflowSession, payload) -> dict:
        """The modeller binding when invoked without delegation, and the
        tenant-side single-plan modelling (mode=single-plan)."""
        if payload.get("mode") == "single-plan":
            return self._model_single_plans(session, payload)
        prepared = self._op_prepare_experiment(session, payload)
        return self._op_run_experiment(session, prepared)

    def _model_single_plans(self, session: WorkflowSession, payload) -> dict:
        """Embed every slice requirement sequentially on a scratch copy so the
        produced plans fit together at deploy time."""
        ctx = self.context
        profile = validate_service_profile(payload["profile"], ctx.tiers)
        slice_profiles = derive_slice_profiles(profile)
        scratch = copy.deepcopy(ctx.network)
        plans = []
        for index, requirement in enumerate(profile.slice_requirements):
            template = ctx.resolve_graph(profile.service_type, requirement.slice_kind)
            graph = instantiate_graph(template, requirement)
            policy = emb.EmbedPolicy(anti_affinity=requirement.isolation_required)
            db = scratch.build_resource_db()
            result = emb.embed(graph, db, policy)
            if isinstance(result, emb.InfeasibilityReport):
                proposal = self._negotiate(ctx, scratch, profile, index,
                                           requirement, result, policy)
                return {"relaxation": proposal, "plans": []}
            _apply_plan_to_scratch(scratch, result)
            plans.append({"slice_profile": orch.slice_profile_to_doc(slice_profiles[index]),
                          "plan": emb.plan_to_doc(result)})
        return {"plans": plans, "relaxation": None}

    def _negotiate(self, ctx: RuntimeContext, scratch: Network,
                   profile: ServiceProfile, index: int, requirement,
                   report: emb.InfeasibilityReport,
                   policy: emb.EmbedPolicy) -> dict:
        db = scratch.build_resource_db()

        def oracle(candidate: ServiceProfile) -> bool:
            req = candidate.slice_requirements[index]
            template = ctx.resolve_graph(candidate.service_type, req.slice_kind)
            graph = instantiate_graph(template, req)
            return isinstance(emb.embed(graph, db, policy), emb.EmbeddingPlan)

        proposal = intent_mod.propose_relaxation(
            profile, report, oracle, tiers=ctx.tiers, requirement_index=index)
        return _proposal_to_doc(proposal, report)

    def _op_render_descriptors(self, session: WorkflowSession, payload) -> dict:
        """nsi-preparer: descriptor bundles for one plan or a carried list."""
        if "plans" in payload:
            bundles = [self._render_bundle(item) for item in payload["plans"]]
            return {**payload, "bundles": bundles}
        return self._render_bundle(payload)

    def _render_bundle(self, item) -> dict:
        plan = emb.plan_from_doc(item["plan"])
        slice_profile = orch.slice_profile_from_doc(item["slice_profile"])
        bundle = render_descriptors(plan, slice_profile)
        return {"slice_profile_doc": bundle.slice_profile_doc,
                "nsd_doc": bundle.nsd_doc,
                "vnfd_docs": list(bundle.vnfd_docs),
                "slice_profile": item["slice_profile"],
                "plan": item["plan"]}

    def _op_deploy_pipeline(self, session: WorkflowSession, payload) -> dict:
        """Create (or reuse) the instance, partition segments, deploy."""
        orchestrator = self.context.orchestrator
        deployments = payload.get("plans") or [payload]
        bundles = payload.get("bundles") or [None] * len(deployments)
        slices = []
        for item, bundle in zip(deployments, bundles):
            plan = emb.plan_from_doc(item["plan"])
            slice_profile = orch.slice_profile_from_doc(item["slice_profile"])
            nsi_id = payload.get("nsi_id") if len(deployments) == 1 else None
            if nsi_id:
                nsi = orchestrator.get(nsi_id)
                if nsi.plan is None or emb.plan_to_doc(nsi.plan) != item["plan"]:
                    orchestrator.attach_plan(nsi, plan)
            else:
                requirement = slice_profile.source_requirement
                template = self.context.resolve_graph(
                    _service_type_of(session, slice_profile),
                    requirement.slice_kind)
                nsi = orchestrator.create_nsi(slice_profile, plan,
                                              template_graph=template)
            orchestrator.partition_segments(nsi)
            orchestrator.deploy(nsi)
            if bundle is None:
                bundle = self._render_bundle(item)
            slices.append({"nsi_id": nsi.nsi_id, "status": nsi.status,
                           "segments": [s.segment_id for s in nsi.segments],
                           "descriptors": {
                               "slice_profile_doc": bundle["slice_profile_doc"],
                               "nsd_doc": bundle["nsd_doc"],
                               "vnfd_docs": bundle["vnfd_docs"]}})
        return {"slices": slices}

    def _op_lifecycle(self, session: WorkflowSession, payload) -> dict:
        """resource-manager actions: start, stop, scale, restart, delete."""
        orchestrator = self.context.orchestrator
        action = payload.get("action")
        nsi = orchestrator.get(payload["nsi_id"])
        if action == "delete":
            orchestrator.terminate(nsi)
            return {"nsi_id": nsi.nsi_id, "status": nsi.status}
        if action == "scale":
            decision = orchestrator.autoscale_tick(nsi)
            return {"nsi_id": nsi.nsi_id, "decision": decision.action,
                    "applied": decision.applied}
        if action in ("start", "stop", "restart"):
            orchestrator.events.record(f"lifecycle-{action}", nsi.nsi_id,
                                       nsi.status, nsi.status)
            return {"nsi_id": nsi.nsi_id, "status": nsi.status, "action": action}
        raise SchemaError("action", f"unknown lifecycle action {action!r}")


def _service_type_of(session: WorkflowSession, slice_profile) -> str:
    profile_doc = session.artifacts.get("profile")
    if profile_doc:
        return profile_doc["service_type"]
    return "generic"


def _proposal_to_doc(proposal: intent_mod.RelaxationProposal,
                     report: emb.InfeasibilityReport) -> dict:
    return {"target_requirement_index": proposal.target_requirement_index,
            "attribute": proposal.attribute,
            "current_value": proposal.current_value,
            "proposed_value": proposal.proposed_value,
            "reason": proposal.reason,
            "profile_fingerprint": proposal.profile_fingerprint,
            "violated": report.violated,
            "element": report.element}


def _proposal_from_doc(doc: Mapping, profile: ServiceProfile
                       ) -> intent_mod.RelaxationProposal:
    return intent_mod.RelaxationProposal(
        target_requirement_index=doc["target_requirement_index"],
        attribute=doc["attribute"],
        current_value=doc["current_value"],
        proposed_value=doc["proposed_value"],
        reason=doc["reason"],
        profile_fingerprint=doc["profile_fingerprint"])


# ---------------------------------------------------------------------------
# transcripts and replay
# ---------------------------------------------------------------------------

def transcript_header(engine: WorkflowEngine, session: WorkflowSession) -> dict:
    return {
        "session_id": session.session_id,
        "goal": session.goal,
        "initiator": session.initiator,
        "adapter": engine.context.adapter.name,
        "deterministic": engine.context.adapter.deterministic,
        "seed": engine.context.seed,
        "scenario_sha": engine.context.scenario_sha,
        "state": session.state,
    }


def transcript_to_lines(engine: WorkflowEngine, session: WorkflowSession) -> list[str]:
    lines = [json.dumps({"header": transcript_header(engine, session)}, sort_keys=True)]
    lines.extend(json.dumps(m.to_doc(), sort_keys=True) for m in session.transcript)
    return lines


def save_transcript(engine: WorkflowEngine, session: WorkflowSession, path) -> None:
    with open(path, "w") as fh:
        fh.write("\n".join(transcript_to_lines(engine, session)) + "\n")


def load_transcript(lines: Iterable[str]) -> tuple[dict, list[dict]]:
    header = None
    messages = []
    for line in lines:
        line = line.strip()
        if not line:
            continue
        doc = json.loads(line)
        if "header" in doc:
            header = doc["header"]
        else:
            messages.append(doc)
    if header is None:
        raise ReplayIntegrityError("transcript has no header record")
    return header, messages


def replay(transcript: tuple[dict, list[dict]] | Iterable[str],
           context: RuntimeContext) -> WorkflowSession:
    """Re-execute a recorded session on a fresh context built from the same
    scenario; the transcripts must match message for message."""
    if not isinstance(transcript, tuple):
        transcript = load_transcript(transcript)
    header, messages = transcript

    if not header.get("deterministic", False):
        raise NonDeterministicSource(
            f"transcript was produced by adapter {header.get('adapter')!r}")
    for i, message in enumerate(messages, start=1):
        if message.get("seq") != i:
            raise ReplayIntegrityError(
                f"message {i} has seq {message.get('seq')!r}; expected {i}")
    if header.get("scenario_sha") and context.scenario_sha and \
            header["scenario_sha"] != context.scenario_sha:
        raise ReplayIntegrityError("scenario fingerprint mismatch")

    engine = WorkflowEngine(context)
    choices = [m["payload"] for m in messages if m["kind"] == "choice_response"]
    session = engine.start_session(header["goal"], header["initiator"])
    engine.run_session(session, until="blocked")
    for choice in choices:
        if session.state not in ("AwaitingHumanChoice", "AwaitingRelaxationApproval"):
            break
        if "selection" in choice:
            engine.submit_choice(session, selection=choice["selection"])
        else:
            engine.submit_choice(session, feedback=choice.get("feedback", ""))
    engine.run_session(session, until="blocked") if session.state == "Running" else None

    replayed = [m.to_doc() for m in session.transcript]
    if replayed != messages:
        raise ReplayIntegrityError(
            f"repl032y diverged: {len(replayed)} messages vs {len(messages)} recorded")
    return session
