// Chat machine for intent entry: framework-agnostic state, rebuilt entirely
// from the last gateway response (reloading the page loses nothing).

import { GatewayClient, GatewayError } from "./api.js";
import type { MessageDoc, SessionView } from "./types.js";

export interface ChatLine {
  kind: "user" | "agent" | "notice" | "error" | "collapsed";
  text: string;
}

export type ChatCard =
  | { type: "relaxation"; attribute: string; currentValue: number;
      proposedValue: number; reason: string }
  | { type: "completion"; slices: { nsiId: string; status: string }[] }
  | { type: "aborted"; reason: string };

export interface ChatSnapshot {
  sessionId: string | null;
  sessionState: string | null;
  lines: ChatLine[];
  card: ChatCard | null;
  connectionError: string | null;
  busy: boolean;
}

export class ChatMachine {
  private sessionId: string | null = null;
  private view: SessionView | null = null;
  private connectionError: string | null = null;
  private busy = false;

  constructor(private client: GatewayClient, private speaker = "tenant") {}

  canSubmit(text: string): boolean {
    return text.trim().length > 0 && !this.busy;
  }

  async submitIntent(text: string): Promise<void> {
    if (!this.canSubmit(text)) {
      return;
    }
    this.busy = true;
    try {
      const { session_id } = await this.client.postIntent(text.trim(), this.speaker);
      this.sessionId = session_id;
      this.connectionError = null;
      await this.refresh();
    } catch (err) {
      this.connectionError = describeError(err);
    } finally {
      this.busy = false;
    }
  }

  async refresh(): Promise<void> {
    if (this.sessionId === null) {
      return;
    }
    try {
      this.applySession(await this.client.getSession(this.sessionId));
      this.connectionError = null;
    } catch (err) {
      this.connectionError = describeError(err);
    }
  }

  applySession(view: SessionView): void {
    this.view = view;
    this.sessionId = view.session_id;
  }

  // version feed for the poller: the transcript only ever grows
  sessionVersion(view: SessionView): number {
    return view.transcript.length;
  }

  async approveRelaxation(accept: boolean, feedback = ""): Promise<void> {
    if (this.sessionId === null) {
      return;
    }
    try {
      await this.client.submitChoice(this.sessionId, accept
        ? { index: 0, idempotency_key: `${this.sessionId}:relax` }
        : { feedback });
      await this.refresh();
    } catch (err) {
      this.connectionError = describeError(err);
    }
  }

  snapshot(): ChatSnapshot {
    const lines: ChatLine[] = [];
    let card: ChatCard | null = null;
    if (this.view !== null) {
      lines.push({ kind: "user", text: this.view.goal });
      for (const message of this.view.transcript) {
        const line = lineFor(message);
        if (line !== null) {
          lines.push(line);
        }
      }
      card = cardFor(this.view);
    }
    return {
      sessionId: this.sessionId,
      sessionState: this.view?.state ?? null,
      lines,
      card,
      connectionError: this.connectionError,
      busy: this.busy,
    };
  }
}

function lineFor(message: MessageDoc): ChatLine | null {
  switch (message.kind) {
    case "task_assignment":
      return { kind: "collapsed",
               text: `${message.from} assigns ${message.payload.tool} ` +
                     `(${message.payload.purpose})` };
    case "tool_call":
      return { kind: "collapsed",
               text: `${message.from} calls ${message.payload.tool}` };
    case "tool_result":
      if (message.payload?.notice === "not encoded") {
        return { kind: "notice",
                 text: `not encoded: ${message.payload.phrases.join(", ")}` };
      }
      if (message.payload?.output?.matched) {
        const matched = message.payload.output.matched
          .map((pair: [string, string]) => pair[0]).join(", ");
        return { kind: "agent", text: `understood keywords: ${matched}` };
      }
      return { kind: "collapsed", text: `${message.from} returned output` };
    case "choice_request":
      return { kind: "agent", text: "the network needs your confirmation" };
    case "choice_response":
      return { kind: "user",
               text: message.payload.rejection
                 ? `rejected: ${message.payload.feedback}`
                 : `accepted option ${message.payload.selection}` };
    case "error":
      return { kind: "error",
               text: `${message.payload.error}: ${message.payload.detail ??
                     message.payload.reason ?? ""}` };
  }
}

function cardFor(view: SessionView): ChatCard | null {
  if (view.state === "AwaitingRelaxationApproval" && view.pending_choice.length) {
    const proposal = view.pending_choice[0];
    return {
      type: "relaxation",
      attribute: proposal.attribute,
      currentValue: proposal.current_value,
      proposedValue: proposal.proposed_value,
      reason: proposal.reason,
    };
  }
  if (view.state === "Completed" && view.result?.slices) {
    return {
      type: "completion",
      slices: view.result.slices.map((s) => ({ nsiId: s.nsi_id, status: s.status })),
    };
  }
  if (view.state === "Aborted") {
    const error = [...view.transcript].reverse().find((m) => m.kind === "error");
    return { type: "aborted",
             reason: error?.payload?.reason ?? error?.payload?.detail ?? "aborted" };
  }
  return null;
}

export function describeError(err: unknown): string {
  if (err instanceof GatewayError) {
    return `gateway error ${err.status}: ${JSON.stringify(err.body)}`;
  }
  return `connection error: ${String(err)}`;
}
