"""JSON-over-HTTP gateway exposing intent intake, session control, slice
inventory, augmentation, SLA views, and per-domain abstracted views.

Status mapping: 202 for async session operations, 404 for unknown ids,
409 for state-machine conflicts, 422 for schema/value errors.
"""

from __future__ import annotations

import os
import socket
from contextlib import asynccontextmanager
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .. import agents as agents_mod
from ..errors import (
    AlreadyTerminated,
    CorruptInventory,
    EmptyWindow,
    IndexOutOfRange,
    InsufficientCapacity,
    InvalidTransition,
    NotAwaitingChoice,
    NoViableRelaxation,
    SchemaError,
    SliceforgeError,
    UnknownNsi,
    UnknownSegment,
    UnresolvedAgentReference,
)
from ..orchestrator import AugmentRequest, NetworkSliceInstance, nsi_to_doc
from ..profiles import bundle_to_yaml, render_descriptors
from ..substrate import abstract_view
from .inventory import load_store, save_store
from .scenario import Scenario, build_context

STATUS_BY_ERROR = [
    ((UnknownNsi, UnknownSegment), 404),
    ((NotAwaitingChoice, InvalidTransition, AlreadyTerminated,
      InsufficientCapacity), 409),
    ((IndexOutOfRange, SchemaError, EmptyWindow, UnresolvedAgentReference), 422),
]


class IntentBody(BaseModel):
    text: str
    speaker: str = "tenant"


class ChoiceBody(BaseModel):
    index: int | None = None
    feedback: str | None = None
    idempotency_key: str | None = None


class AugmentBody(BaseModel):
    attribute: str
    new_value: float
    requested_by: str = "tenant"


def session_to_doc(session: agents_mod.WorkflowSession) -> dict:
    return {
        "session_id": session.session_id,
        "initiator": session.initiator,
        "goal": session.goal,
        "state": session.state,
        "pending_choice": list(session.pending_choice),
        "tasks": [{"task_id": t.task_id, "assigned_agent": t.assigned_agent,
                   "tool_used": t.tool_used, "purpose": t.purpose,
                   "status": t.status} for t in session.tasks],
        "transcript": [m.to_doc() for m in session.transcript],
        "result": session.result,
    }


def view_to_doc(view) -> dict:
    return {
        "domain_id": view.domain_id,
        "border_nodes": list(view.border_nodes),
        "abstract_links": [{"a": al.endpoints[0], "b": al.endpoints[1],
                            "min_latency_ms": al.min_latency_ms,
                            "bottleneck_bandwidth_mbps": al.bottleneck_bandwidth_mbps}
                           for al in view.abstract_links],
        "aggregate_headroom": {kind: {"cpu": d.cpu, "mem": d.mem, "storage": d.storage}
                               for kind, d in sorted(view.aggregate_headroom.items())},
        "version": view.version,
        "warnings": list(view.warnings),
    }


def create_app(context: agents_mod.RuntimeContext,
               data_dir: str | Path | None = None,
               ui_dir: str | Path | None = None) -> FastAPI:
    engine = agents_mod.WorkflowEngine(context)
    data_dir = Path(data_dir or os.environ.get("SLICEFORGE_DATA_DIR", ".sliceforge"))
    inventory_path = data_dir / "inventory.json"
    store = load_store(inventory_path)   # CorruptInventory propagates: refuse to start

    def persist() -> None:
        orchestrator = context.orchestrator
        for nsi in orchestrator.nsis.values():
            store.nsis[nsi.nsi_id] = nsi_to_doc(nsi)
        for session in engine.sessions.values():
            store.sessions[session.session_id] = session_to_doc(session)
            store.transcripts[session.session_id] = \
                agents_mod.transcript_to_lines(engine, session)
        save_store(store, inventory_path)

    @asynccontextmanager
    async def lifespan(_app: FastAPI):
        yield
        persist()          # shutdown flushes the inventory

    app = FastAPI(title="sliceforge gateway", lifespan=lifespan)
    app.state.engine = engine
    app.state.context = context
    app.state.store = store
    app.state.inventory_path = inventory_path
    app.state.choice_keys = {}

    @app.exception_handler(SliceforgeError)
    async def domain_error(request: Request, exc: SliceforgeError):
        status = 422
        for classes, code in STATUS_BY_ERROR:
            if isinstance(exc, classes):
                status = code
                break
        return JSONResponse(status_code=status,
                            content={"error": type(exc).__name__, "detail": str(exc)})

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/intents", status_code=202)
    def post_intent(body: IntentBody):
        session = engine.start_session(goal=body.text, initiator=body.speaker)
        engine.run_session(session, until="blocked")
        persist()
        return {"session_id": session.session_id, "state": session.state}

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        session = engine.sessions.get(session_id)
        if session is None:
            raise UnknownNsi(f"no such session {session_id!r}")
        return session_to_doc(session)

    @app.post("/sessions/{session_id}/choice")
    def post_choice(session_id: str, body: ChoiceBody):
        session = engine.sessions.get(session_id)
        if session is None:
            raise UnknownNsi(f"no such session {session_id!r}")
        if body.idempotency_key:
            key = (session_id, body.idempotency_key)
            if key in app.state.choice_keys:
                return app.state.choice_keys[key]
        if body.index is None and body.feedback is None:
            raise SchemaError("choice", "need index or feedback")
        engine.submit_choice(session, selection=body.index, feedback=body.feedback)
        persist()
        response = {"session_id": session_id, "state": session.state}
        if body.idempotency_key:
            app.state.choice_keys[(session_id, body.idempotency_key)] = response
        return response

    @app.get("/slices")
    def list_slices():
        orchestrator = context.orchestrator
        live = [{"nsi_id": n.nsi_id, "status": n.status,
                 "slice_profile_id": n.slice_profile_id,
                 "updated_at": n.updated_at}
                for n in orchestrator.nsis.values()]
        live_ids = {entry["nsi_id"] for entry in live}
        restored = [{"nsi_id": doc["nsi_id"], "status": doc["status"],
                     "slice_profile_id": doc["slice_profile"]["slice_profile_id"],
                     "updated_at": doc["updated_at"], "restored": True}
                    for doc in store.nsis.values()
                    if doc["nsi_id"] not in live_ids]
        return {"slices": sorted(live + restored, key=lambda e: e["nsi_id"])}

    @app.get("/slices/{nsi_id}")
    def get_slice(nsi_id: str):
        return nsi_to_doc(context.orchestrator.get(nsi_id))

    @app.delete("/slices/{nsi_id}")
    def delete_slice(nsi_id: str):
        orchestrator = context.orchestrator
        nsi = orchestrator.terminate(orchestrator.get(nsi_id))
        persist()
        return nsi_to_doc(nsi)

    @app.post("/slices/{nsi_id}/augment")
    def augment_slice(nsi_id: str, body: AugmentBody):
        orchestrator = context.orchestrator
        nsi = orchestrator.get(nsi_id)
        request = AugmentRequest(
            request_id=f"aug-{nsi_id}-{len(orchestrator.events.records)}",
            nsi_id=nsi_id, attribute=body.attribute, new_value=body.new_value,
            requested_by=body.requested_by)
        try:
            outcome = orchestrator.augment(nsi, request)
        except NoViableRelaxation as exc:
            return {"outcome": "no_viable_relaxation",
                    "attempts": [{"attribute": a.attribute, "value": a.value}
                                 for a in exc.attempts]}
        finally:
            persist()
        if isinstance(outcome, NetworkSliceInstance):
            return {"outcome": "augmented", "nsi": nsi_to_doc(outcome)}
        return {"outcome": "relaxation_proposed",
                "proposal": {"attribute": outcome.attribute,
                             "current_value": outcome.current_value,
                             "proposed_value": outcome.proposed_value,
                             "reason": outcome.reason}}

    @app.get("/slices/{nsi_id}/descriptors")
    def get_descriptors(nsi_id: str):
        nsi = context.orchestrator.get(nsi_id)
        if nsi.plan is None:
            raise InvalidTransition(f"{nsi_id} has no plan yet")
        bundle = render_descriptors(nsi.plan, nsi.slice_profile)
        return {"slice_profile_doc": bundle.slice_profile_doc,
                "nsd_doc": bundle.nsd_doc,
                "vnfd_docs": list(bundle.vnfd_docs),
                "yaml": bundle_to_yaml(bundle)}

    @app.get("/slices/{nsi_id}/sla")
    def get_sla(nsi_id: str, window: str):
        try:
            start, end = (float(part) for part in window.split(","))
        except ValueError:
            raise SchemaError("window", "expected 'start,end' seconds")
        verdict = context.orchestrator.check_sla(
            context.orchestrator.get(nsi_id), (start, end))
        return {"nsi_id": verdict.nsi_id, "window": list(verdict.window),
                "violations": [{"attribute": a, "worst_observed": w, "bound": b}
                               for a, w, b in verdict.violations],
                "compliant": verdict.compliant}

    @app.get("/slices/{nsi_id}/telemetry")
    def get_telemetry(nsi_id: str):
        orchestrator = context.orchestrator
        nsi = orchestrator.get(nsi_id)
        out = {}
        for seg in nsi.segments:
            out[seg.segment_id] = [
                {"timestamp": s.timestamp,
                 "throughput_used_mbps": s.throughput_used_mbps,
                 "cpu_used_vcpu": s.cpu_used_vcpu,
                 "observed_latency_ms": s.observed_latency_ms}
                for s in orchestrator.telemetry(seg.segment_id)]
        return {"nsi_id": nsi_id, "segments": out}

    @app.get("/domains")
    def get_domains():
        # peers see abstraction only, never intra-domain detail
        network = context.network
        views = [abstract_view(network.domains[d]) for d in sorted(network.domains)]
        return {"domains": [view_to_doc(v) for v in views]}

    if ui_dir and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app


def serve(scenario: Scenario, port: int | None = None,
          data_dir: str | Path | None = None,
          ui_dir: str | Path | None = None) -> None:
    """Run the gateway for one scenario (blocking)."""
    import uvicorn

    from ..errors import PortInUse

    port = port or int(os.environ.get("SLICEFORGE_PORT", "8470"))
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.bind(("127.0.0.1", port))
    except OSError as exc:
        raise PortInUse(f"port {port} is already bound: {exc}") from exc
    finally:
        probe.close()

    data_dir = Path(data_dir or os.environ.get("SLICEFORGE_DATA_DIR", ".sliceforge"))
    data_dir.mkdir(parents=True, exist_ok=True)
    context = build_context(scenario, use_env_adapter=True,
                            event_log_path=str(data_dir / "events.jsonl"))
    try:
        app = create_app(context, data_dir=data_dir, ui_dir=ui_dir)
    except CorruptInventory as exc:
        print(f"refusing to start: {exc}")
        raise
    uvicorn.run(app, host="127.0.0.1", port=port)
