import { describe, expect, it } from "vitest";
import { GatewayClient } from "../src/api.js";
import { FakeGateway } from "../src/fake_gateway.js";
import { ChoicePicker } from "../src/picker.js";
import { renderPicker } from "../src/render.js";

const OPERATOR = "deploy a slice with average utilization greater than 80 percent";

async function pausedSession() {
  const gateway = new FakeGateway();
  const client = new GatewayClient("", gateway.asFetch());
  const { session_id } = await client.postIntent(OPERATOR, "operator");
  const picker = new ChoicePicker(client, session_id);
  await picker.refresh();
  return { gateway, client, picker, sessionId: session_id };
}

describe("choice picker", () => {
  it("renders one card per recommendation plus a reject control", async () => {
    const { picker } = await pausedSession();
    const snap = picker.snapshot();
    expect(snap.state).toBe("AwaitingHumanChoice");
    expect(snap.options).toHaveLength(2);
    const html = renderPicker(snap);
    expect(html).toContain("option 1");
    expect(html).toContain("option 2");
    expect(html).toContain("reject with feedback");
    expect(html).toContain("domains:");
  });

  it("double-submit advances the session exactly once", async () => {
    const { gateway, picker } = await pausedSession();
    await Promise.all([picker.select(0), picker.select(0)]);
    await picker.select(0);    // a late retry after completion
    expect(gateway.submissions).toBe(1);
    expect(picker.snapshot().state).toBe("Completed");
  });

  it("feedback rejection produces a fresh choice set", async () => {
    const { picker } = await pausedSession();
    const before = picker.snapshot().options.map((o) => o.detail);
    await picker.reject("prefer fewer domains");
    const snap = picker.snapshot();
    expect(snap.state).toBe("AwaitingHumanChoice");
    expect(snap.options).toHaveLength(2);
    expect(snap.options.map((o) => o.detail)).not.toEqual(before);
  });

  it("409 renders as choice-no-longer-pending", async () => {
    const { client, picker, sessionId } = await pausedSession();
    await client.submitChoice(sessionId, { index: 0 });  // someone else chose
    await picker.select(1);
    const snap = picker.snapshot();
    expect(snap.state).toBe("Completed");
    // the stale flag cleared by refresh, but the flow never crashed
    expect(snap.error).toBeNull();
  });

  it("relaxation proposals render attribute and delta", async () => {
    const gateway = new FakeGateway();
    const client = new GatewayClient("", gateway.asFetch());
    const { session_id } = await client.postIntent(
      "telemedicine with security", "tenant");
    const picker = new ChoicePicker(client, session_id);
    await picker.refresh();
    const html = renderPicker(picker.snapshot());
    expect(html).toContain("max_latency_ms: 5 -&gt; 20");
  });
});
