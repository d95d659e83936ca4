// Browser wiring: binds the machines to the DOM and runs the poll loops.
// All domain state lives server-side; this file only shuttles events.

import { GatewayClient } from "./api.js";
import { ChatMachine } from "./chat.js";
import { Dashboard } from "./dashboard.js";
import { ChoicePicker } from "./picker.js";
import { Poller } from "./poller.js";
import { renderChat, renderDashboard, renderPicker } from "./render.js";

const POLL_MS = Number(new URLSearchParams(location.search).get("poll") ?? 1000);

const client = new GatewayClient("");
const chat = new ChatMachine(client, "tenant");
const dashboard = new Dashboard(client);
let picker: ChoicePicker | null = null;
let sessionPoller: Poller<any> | null = null;

const chatPane = document.getElementById("chat")!;
const pickerPane = document.getElementById("picker")!;
const dashboardPane = document.getElementById("dashboard")!;
const input = document.getElementById("intent-input") as HTMLTextAreaElement;
const send = document.getElementById("intent-send") as HTMLButtonElement;

function redraw(): void {
  const snap = chat.snapshot();
  chatPane.innerHTML = renderChat(snap);
  pickerPane.innerHTML = picker ? renderPicker(picker.snapshot()) : "";
  dashboardPane.innerHTML = renderDashboard(dashboard.snapshot());
  send.disabled = !chat.canSubmit(input.value);
}

function watchSession(sessionId: string): void {
  sessionPoller?.stop();
  picker = new ChoicePicker(client, sessionId);
  sessionPoller = new Poller(
    () => client.getSession(sessionId),
    (view) => view.transcript.length,
    (view) => {
      chat.applySession(view);
      picker?.applySession(view);
      redraw();
    },
    () => redraw(),
    POLL_MS,
  );
  sessionPoller.start();
}

input.addEventListener("input", redraw);
send.addEventListener("click", async () => {
  await chat.submitIntent(input.value);
  const sessionId = chat.snapshot().sessionId;
  if (sessionId !== null) {
    input.value = "";
    watchSession(sessionId);
  }
  redraw();
});

chatPane.addEventListener("click", async (event) => {
  const target = event.target as HTMLElement;
  if (target.dataset.action === "approve") {
    await chat.approveRelaxation(true);
  } else if (target.dataset.action === "decline") {
    await chat.approveRelaxation(false, "declined in console");
  } else if (target.dataset.action === "retry") {
    await chat.refresh();
  }
  redraw();
});

pickerPane.addEventListener("click", async (event) => {
  const target = event.target as HTMLElement;
  if (!picker) {
    return;
  }
  if (target.dataset.action === "select") {
    await picker.select(Number(target.dataset.index));
  } else if (target.dataset.action === "reject") {
    const feedback = (pickerPane.querySelector("[data-role=feedback]") as
                      HTMLTextAreaElement | null)?.value ?? "";
    await picker.reject(feedback);
  }
  redraw();
});

dashboardPane.addEventListener("click", async (event) => {
  const target = event.target as HTMLElement;
  const nsiId = (target.closest("tr") as HTMLElement | null)?.dataset.nsi;
  if (!nsiId) {
    return;
  }
  if (target.dataset.action === "terminate") {
    if (confirm(`terminate ${nsiId}?`)) {
      await dashboard.terminate(nsiId);
    }
  } else if (target.dataset.action === "detail") {
    await dashboard.openDetail(nsiId);
  }
  redraw();
});

const slicePoller = new Poller(
  () => client.listSlices(),
  (listing) => dashboard.listVersion(listing),
  (listing) => {
    dashboard.applySlices(listing);
    redraw();
  },
  () => redraw(),
  POLL_MS,
);
slicePoller.start();
redraw();
