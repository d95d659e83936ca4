// Slice dashboard: status table plus a detail view with telemetry and the
// SLA verdict. Polling only reads; mutations fire from explicit actions.

import { GatewayClient } from "./api.js";
import type { SlaView, SliceSummary, TelemetryView } from "./types.js";

export interface SliceRow {
  nsiId: string;
  status: string;
  profileId: string;
  updatedAt: number;
  restored: boolean;
  error: string | null;
}

export interface SliceDetail {
  nsiId: string;
  status: string;
  sla: SlaView | null;
  slaError: string | null;
  telemetry: { segmentId: string; points: [number, number][] }[];
}

export interface DashboardSnapshot {
  rows: SliceRow[];
  detail: SliceDetail | null;
  connectionError: string | null;
}

export class Dashboard {
  private rows: SliceRow[] = [];
  private detail: SliceDetail | null = null;
  private connectionError: string | null = null;
  private rowErrors = new Map<string, string>();   // survives poll refreshes

  constructor(private client: GatewayClient) {}

  // poll feed (read-only); version = max updated_at over rows
  applySlices(listing: { slices: SliceSummary[] }): void {
    this.rows = listing.slices.map((s) => ({
      nsiId: s.nsi_id,
      status: s.status,
      profileId: s.slice_profile_id,
      updatedAt: s.updated_at,
      restored: Boolean(s.restored),
      error: this.rowErrors.get(s.nsi_id) ?? null,
    }));
    this.connectionError = null;
  }

  listVersion(listing: { slices: SliceSummary[] }): number {
    return Math.max(0, ...listing.slices.map((s) => s.updated_at));
  }

  async refresh(): Promise<void> {
    try {
      this.applySlices(await this.client.listSlices());
    } catch (err) {
      this.connectionError = String(err);
    }
  }

  async openDetail(nsiId: string, window = "0,1000000"): Promise<void> {
    const doc = await this.client.getSlice(nsiId);
    let sla: SlaView | null = null;
    let slaError: string | null = null;
    try {
      sla = await this.client.getSla(nsiId, window);
    } catch (err) {
      slaError = String(err);       // e.g. no telemetry in the window
    }
    let telemetry: TelemetryView = { nsi_id: nsiId, segments: {} };
    try {
      telemetry = await this.client.getTelemetry(nsiId);
    } catch {
      // telemetry is optional detail; the row itself stays renderable
    }
    this.detail = {
      nsiId,
      status: doc.status,
      sla,
      slaError,
      telemetry: Object.entries(telemetry.segments).map(([segmentId, samples]) => ({
        segmentId,
        points: samples.map((s) => [s.timestamp, s.throughput_used_mbps]),
      })),
    };
  }

  async terminate(nsiId: string): Promise<void> {
    try {
      await this.client.terminateSlice(nsiId);
      this.rowErrors.delete(nsiId);
    } catch (err) {
      this.rowErrors.set(nsiId, String(err));
    }
    await this.refresh();
  }

  async augment(nsiId: string, attribute: string, value: number): Promise<void> {
    try {
      await this.client.augmentSlice(nsiId, attribute, value);
      this.rowErrors.delete(nsiId);
    } catch (err) {
      this.rowErrors.set(nsiId, String(err));
    }
    await this.refresh();
  }

  snapshot(): DashboardSnapshot {
    return { rows: this.rows, detail: this.detail,
             connectionError: this.connectionError };
  }
}
