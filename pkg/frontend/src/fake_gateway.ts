// In-memory gateway implementing the documented API contract, used as the
// fixture for console component tests and for offline demos. Behaves like
// the real service: sessions pause for choices, choice submission is
// idempotent, slices move Active -> Terminated.

import type { FetchLike } from "./api.js";
import type { MessageDoc, SessionView, SliceSummary } from "./types.js";

interface FakeSlice {
  doc: SliceSummary & { plan?: unknown };
  telemetry: Record<string, { timestamp: number; throughput_used_mbps: number;
                              cpu_used_vcpu: number; observed_latency_ms: number }[]>;
  violations: { attribute: string; worst_observed: number; bound: number }[];
}

export class FakeGateway {
  sessions = new Map<string, SessionView>();
  slices = new Map<string, FakeSlice>();
  choiceKeys = new Map<string, { session_id: string; state: string }>();
  submissions = 0;           // counts choice POSTs that reached the engine
  private clock = 0;
  private sessionSeq = 0;
  private nsiSeq = 0;
  private rejections = new Map<string, number>();

  private message(view: SessionView, from: string, to: string,
                  kind: MessageDoc["kind"], payload: any): void {
    view.transcript.push({ seq: view.transcript.length + 1,
                           from, to, kind, payload });
  }

  private recommendations(round: number) {
    const note = round > 0 ? ` (re-modelled, round ${round})` : "";
    return [1, 2].map((rank) => ({
      rank,
      summary: `${rank === 1 ? 3 : 4} functions; utilization ` +
               `0.8${7 - rank}${note}`,
      objective_value: 0.87 - rank / 100 - round / 1000,
      plan: { metrics: { domains_touched: rank === 1
        ? ["access-p", "transport-q"] : ["access-p", "transport-q", "cloud-r"] } },
    }));
  }

  startSession(text: string, speaker: string): SessionView {
    this.sessionSeq += 1;
    const view: SessionView = {
      session_id: `session-${String(this.sessionSeq).padStart(3, "0")}`,
      initiator: speaker,
      goal: text,
      state: "Running",
      pending_choice: [],
      tasks: [],
      transcript: [],
      result: null,
    };
    if (text.includes("telemedicine")) {
      this.message(view, "On-Device Agent", "intent-translator", "tool_call",
                   { tool: "intent-translator", input: { text } });
      this.message(view, "intent-translator", "On-Device Agent", "tool_result",
                   { tool: "intent-translator",
                     output: { matched: [["telemedicine", "service"],
                                         ["security", "security"]] } });
      this.message(view, "On-Device Agent", "human", "tool_result",
                   { notice: "not encoded", phrases: ["premium"] });
      view.state = "AwaitingRelaxationApproval";
      view.pending_choice = [{
        attribute: "max_latency_ms", current_value: 5, proposed_value: 20,
        reason: "capacity limit at tm-u1->tm-u2",
      }];
      this.message(view, "On-Device Agent", "human", "choice_request",
                   { kind: "relaxation", options: view.pending_choice });
    } else if (text.includes("utilization")) {
      view.state = "AwaitingHumanChoice";
      view.pending_choice = this.recommendations(0);
      this.message(view, "Slice modelling Agent", "human", "choice_request",
                   { kind: "recommendations", options: view.pending_choice });
    } else {
      view.state = "Aborted";
      this.message(view, "On-Device Agent", "human", "error",
                   { error: "UntranslatableIntent",
                     detail: "intent matched no service or quality keyword" });
    }
    this.sessions.set(view.session_id, view);
    return view;
  }

  private createSlice(): SliceSummary {
    this.nsiSeq += 1;
    this.clock += 1;
    const doc: SliceSummary = {
      nsi_id: `nsi-${String(this.nsiSeq).padStart(4, "0")}`,
      status: "Active",
      slice_profile_id: `profile-s${this.nsiSeq}`,
      updated_at: this.clock,
    };
    this.slices.set(doc.nsi_id, { doc, telemetry: {}, violations: [] });
    return doc;
  }

  injectViolation(nsiId: string, attribute: string,
                  worst: number, bound: number): void {
    this.slices.get(nsiId)!.violations.push(
      { attribute, worst_observed: worst, bound });
  }

  injectTelemetry(nsiId: string, segmentId: string, count: number): void {
    const slice = this.slices.get(nsiId)!;
    slice.telemetry[segmentId] = Array.from({ length: count }, (_, i) => ({
      timestamp: i + 1, throughput_used_mbps: 45,
      cpu_used_vcpu: 3, observed_latency_ms: 8,
    }));
  }

  handle(method: string, path: string, body: any): { status: number; json: any } {
    const send = (status: number, json: any) => ({ status, json });

    if (method === "GET" && path === "/healthz") {
      return send(200, { status: "ok" });
    }
    if (method === "POST" && path === "/intents") {
      const view = this.startSession(body.text, body.speaker ?? "tenant");
      return send(202, { session_id: view.session_id, state: view.state });
    }

    let match = path.match(/^\/sessions\/([^/]+)$/);
    if (method === "GET" && match) {
      const view = this.sessions.get(match[1]);
      return view ? send(200, view)
                  : send(404, { error: "UnknownNsi", detail: "no such session" });
    }

    match = path.match(/^\/sessions\/([^/]+)\/choice$/);
    if (method === "POST" && match) {
      return this.handleChoice(match[1], body, send);
    }

    if (method === "GET" && path === "/slices") {
      return send(200, { slices: [...this.slices.values()].map((s) => s.doc) });
    }

    match = path.match(/^\/slices\/([^/]+)$/);
    if (match) {
      const slice = this.slices.get(match[1]);
      if (!slice) {
        return send(404, { error: "UnknownNsi", detail: "no such slice" });
      }
      if (method === "GET") {
        return send(200, slice.doc);
      }
      if (method === "DELETE") {
        if (slice.doc.status === "Terminated") {
          return send(409, { error: "AlreadyTerminated", detail: slice.doc.nsi_id });
        }
        this.clock += 1;
        slice.doc.status = "Terminated";
        slice.doc.updated_at = this.clock;
        return send(200, slice.doc);
      }
    }

    match = path.match(/^\/slices\/([^/]+)\/sla/);
    if (method === "GET" && match) {
      const slice = this.slices.get(match[1]);
      if (!slice) {
        return send(404, { error: "UnknownNsi", detail: "no such slice" });
      }
      if (!Object.keys(slice.telemetry).length) {
        return send(422, { error: "EmptyWindow", detail: "no telemetry" });
      }
      return send(200, {
        nsi_id: slice.doc.nsi_id, window: [0, this.clock],
        violations: slice.violations,
        compliant: slice.violations.length === 0,
      });
    }

    match = path.match(/^\/slices\/([^/]+)\/telemetry$/);
    if (method === "GET" && match) {
      const slice = this.slices.get(match[1]);
      return slice
        ? send(200, { nsi_id: slice.doc.nsi_id, segments: slice.telemetry })
        : send(404, { error: "UnknownNsi", detail: "no such slice" });
    }

    match = path.match(/^\/slices\/([^/]+)\/augment$/);
    if (method === "POST" && match) {
      const slice = this.slices.get(match[1]);
      if (!slice) {
        return send(404, { error: "UnknownNsi", detail: "no such slice" });
      }
      this.clock += 1;
      slice.doc.updated_at = this.clock;
      return send(200, { outcome: "augmented", nsi: slice.doc });
    }

    return send(404, { error: "NotFound", detail: path });
  }

  private handleChoice(sessionId: string, body: any,
                       send: (s: number, j: any) => { status: number; json: any }) {
    const view = this.sessions.get(sessionId);
    if (!view) {
      return send(404, { error: "UnknownNsi", detail: "no such session" });
    }
    if (body.idempotency_key) {
      const seen = this.choiceKeys.get(`${sessionId}:${body.idempotency_key}`);
      if (seen) {
        return send(200, seen);
      }
    }
    if (view.state !== "AwaitingHumanChoice"
        && view.state !== "AwaitingRelaxationApproval") {
      return send(409, { error: "NotAwaitingChoice", detail: view.state });
    }
    this.submissions += 1;

    if (typeof body.index === "number") {
      if (body.index < 0 || body.index >= view.pending_choice.length) {
        return send(422, { error: "IndexOutOfRange", detail: String(body.index) });
      }
      this.message(view, "human", "On-Device Agent", "choice_response",
                   { selection: body.index });
      const sliceCount = view.state === "AwaitingRelaxationApproval" ? 2 : 1;
      view.pending_choice = [];
      view.state = "Completed";
      view.result = { slices: Array.from({ length: sliceCount }, () => {
        const doc = this.createSlice();
        return { nsi_id: doc.nsi_id, status: doc.status, segments: [],
                 descriptors: { slice_profile_doc: {}, nsd_doc: {}, vnfd_docs: [] } };
      }) };
    } else {
      this.message(view, "human", "On-Device Agent", "choice_response",
                   { rejection: true, feedback: body.feedback ?? "" });
      const rejections = (this.rejections.get(sessionId) ?? 0) + 1;
      this.rejections.set(sessionId, rejections);
      if (view.state === "AwaitingRelaxationApproval" || rejections >= 2) {
        view.pending_choice = [];
        view.state = "Aborted";
        this.message(view, "On-Device Agent", "human", "error",
                     { reason: "rejected" });
      } else {
        view.pending_choice = this.recommendations(rejections);
        this.message(view, "Slice modelling Agent", "human", "choice_request",
                     { kind: "recommendations", options: view.pending_choice });
      }
    }
    const response = { session_id: sessionId, state: view.state };
    if (body.idempotency_key) {
      this.choiceKeys.set(`${sessionId}:${body.idempotency_key}`, response);
    }
    return send(200, response);
  }

  // adapter so GatewayClient can talk to the fixture directly
  asFetch(): FetchLike {
    return async (url: string, init?: RequestInit) => {
      const method = init?.method ?? "GET";
      const body = init?.body ? JSON.parse(String(init.body)) : undefined;
      const { status, json } = this.handle(method, url, body);
      return new Response(JSON.stringify(json), {
        status, headers: { "content-type": "application/json" },
      });
    };
  }
}
