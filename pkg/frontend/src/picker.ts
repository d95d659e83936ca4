// Topology-recommendation / relaxation picker. Selection posts exactly one
// logical choice: a busy guard stops rapid double-clicks locally and an
// idempotency key makes retries safe on the wire.

import { GatewayClient, GatewayError } from "./api.js";
import type { SessionView } from "./types.js";

export interface PickerOption {
  label: string;
  detail: string;
}

export interface PickerSnapshot {
  state: string | null;
  options: PickerOption[];
  staleChoice: boolean;       // 409 seen: "choice no longer pending"
  busy: boolean;
  error: string | null;
}

export class ChoicePicker {
  private view: SessionView | null = null;
  private busy = false;
  private staleChoice = false;
  private error: string | null = null;

  constructor(private client: GatewayClient, private sessionId: string) {}

  applySession(view: SessionView): void {
    this.view = view;
    this.staleChoice = false;
  }

  private choiceEpoch(): number {
    // one key per round of options; a re-model opens a new round
    return this.view?.transcript.filter((m) => m.kind === "choice_request")
      .length ?? 0;
  }

  async select(index: number): Promise<void> {
    if (this.busy || this.view === null) {
      return;
    }
    this.busy = true;
    const key = `${this.sessionId}:choice:${this.choiceEpoch()}`;
    try {
      await this.client.submitChoice(this.sessionId,
                                     { index, idempotency_key: key });
      this.error = null;
    } catch (err) {
      if (err instanceof GatewayError && err.status === 409) {
        this.staleChoice = true;     // auto-refresh will follow
      } else {
        this.error = String(err);
      }
    } finally {
      this.busy = false;
    }
    await this.refresh();
  }

  async reject(feedback: string): Promise<void> {
    if (this.busy || this.view === null) {
      return;
    }
    this.busy = true;
    try {
      await this.client.submitChoice(this.sessionId, { feedback });
      this.error = null;
    } catch (err) {
      if (err instanceof GatewayError && err.status === 409) {
        this.staleChoice = true;
      } else {
        this.error = String(err);
      }
    } finally {
      this.busy = false;
    }
    await this.refresh();
  }

  async refresh(): Promise<void> {
    try {
      this.applySession(await this.client.getSession(this.sessionId));
    } catch (err) {
      this.error = String(err);
    }
  }

  snapshot(): PickerSnapshot {
    const options: PickerOption[] = [];
    if (this.view !== null) {
      for (const choice of this.view.pending_choice) {
        if ("summary" in choice) {
          const domains = choice.plan?.metrics?.domains_touched ?? [];
          options.push({
            label: `option ${choice.rank}`,
            detail: `${choice.summary} [domains: ${domains.join(", ")}]`,
          });
        } else {
          options.push({
            label: "relaxed requirements",
            detail: `${choice.attribute}: ${choice.current_value} -> ` +
                    `${choice.proposed_value} (${choice.reason})`,
          });
        }
      }
    }
    return {
      state: this.view?.state ?? null,
      options,
      staleChoice: this.staleChoice,
      busy: this.busy,
      error: this.error,
    };
  }
}
