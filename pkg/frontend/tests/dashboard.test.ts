import { describe, expect, it } from "vitest";
import { GatewayClient, type FetchLike } from "../src/api.js";
import { Dashboard } from "../src/dashboard.js";
import { FakeGateway } from "../src/fake_gateway.js";
import { renderDashboard } from "../src/render.js";

const OPERATOR = "deploy a slice with average utilization greater than 80 percent";

async function activeSlice() {
  const gateway = new FakeGateway();
  const calls: { method: string; url: string }[] = [];
  const audited: FetchLike = async (url, init) => {
    calls.push({ method: init?.method ?? "GET", url });
    return gateway.asFetch()(url, init);
  };
  const client = new GatewayClient("", audited);
  const { session_id } = await client.postIntent(OPERATOR, "operator");
  await client.submitChoice(session_id, { index: 0 });
  const dashboard = new Dashboard(client);
  return { gateway, client, dashboard, calls };
}

describe("slice dashboard", () => {
  it("shows one active row for the fixture slice", async () => {
    const { dashboard } = await activeSlice();
    await dashboard.refresh();
    const snap = dashboard.snapshot();
    expect(snap.rows).toHaveLength(1);
    expect(snap.rows[0].status).toBe("Active");
    expect(renderDashboard(snap)).toContain("status-active");
  });

  it("terminate shows within two poll intervals", async () => {
    const { dashboard } = await activeSlice();
    await dashboard.refresh();
    const nsiId = dashboard.snapshot().rows[0].nsiId;
    await dashboard.terminate(nsiId);      // refresh #1 happens inside
    await dashboard.refresh();             // poll #2
    const snap = dashboard.snapshot();
    expect(snap.rows[0].status).toBe("Terminated");
    expect(renderDashboard(snap)).toContain("status-terminated");
  });

  it("SLA violations render a badge with worst value and bound", async () => {
    const { gateway, dashboard } = await activeSlice();
    await dashboard.refresh();
    const nsiId = dashboard.snapshot().rows[0].nsiId;
    gateway.injectTelemetry(nsiId, `${nsiId}-transport-q`, 10);
    gateway.injectViolation(nsiId, "max_latency_ms", 25, 20);
    await dashboard.openDetail(nsiId);
    const html = renderDashboard(dashboard.snapshot());
    expect(html).toContain("violation");
    expect(html).toContain("worst 25 vs bound 20");
    expect(html).toContain("10 samples");
  });

  it("polling never mutates: only GETs without explicit user action", async () => {
    const { dashboard, calls } = await activeSlice();
    calls.length = 0;
    await dashboard.refresh();
    await dashboard.refresh();
    const nsiId = dashboard.snapshot().rows[0].nsiId;
    await dashboard.openDetail(nsiId);
    expect(calls.every((c) => c.method === "GET")).toBe(true);

    calls.length = 0;
    await dashboard.terminate(nsiId);      // the explicit action mutates
    expect(calls.some((c) => c.method === "DELETE")).toBe(true);
  });

  it("stale poll responses never overwrite newer state", async () => {
    const { dashboard, client } = await activeSlice();
    const { Poller } = await import("../src/poller.js");
    const poller = new Poller(
      () => client.listSlices(),
      (listing) => dashboard.listVersion(listing),
      (listing) => dashboard.applySlices(listing),
    );
    const fresh = await client.listSlices();
    const stale = JSON.parse(JSON.stringify(fresh));
    stale.slices[0].status = "Active";
    stale.slices[0].updated_at = fresh.slices[0].updated_at - 5;

    poller.apply(fresh);
    poller.apply(stale);                  // late arrival from an older poll
    expect(dashboard.snapshot().rows[0].updatedAt)
      .toBe(fresh.slices[0].updated_at);
  });

  it("partial failures render on the affected row only", async () => {
    const { dashboard } = await activeSlice();
    await dashboard.refresh();
    const nsiId = dashboard.snapshot().rows[0].nsiId;
    await dashboard.terminate(nsiId);
    await dashboard.terminate(nsiId);     // AlreadyTerminated -> 409
    const snap = dashboard.snapshot();
    expect(snap.rows[0].error).toContain("409");
    expect(snap.connectionError).toBeNull();
  });
});
