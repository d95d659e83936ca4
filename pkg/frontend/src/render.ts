// Render models to HTML strings. Pure functions so tests can assert on the
// markup without a browser.

import type { ChatSnapshot } from "./chat.js";
import type { DashboardSnapshot } from "./dashboard.js";
import type { PickerSnapshot } from "./picker.js";

export function escapeHtml(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderChat(snap: ChatSnapshot): string {
  const parts: string[] = [];
  if (snap.connectionError !== null) {
    parts.push(`<div class="banner error">${escapeHtml(snap.connectionError)}` +
               `<button data-action="retry">retry</button></div>`);
  }
  for (const line of snap.lines) {
    parts.push(`<div class="line ${line.kind}">${escapeHtml(line.text)}</div>`);
  }
  if (snap.card?.type === "relaxation") {
    parts.push(
      `<div class="card relaxation">` +
      `<p>relaxation proposed: ${escapeHtml(snap.card.attribute)} ` +
      `${snap.card.currentValue} &rarr; ${snap.card.proposedValue}</p>` +
      `<p>${escapeHtml(snap.card.reason)}</p>` +
      `<button data-action="approve">approve</button>` +
      `<button data-action="decline">decline</button></div>`);
  } else if (snap.card?.type === "completion") {
    const rows = snap.card.slices
      .map((s) => `<li>${escapeHtml(s.nsiId)}: ${escapeHtml(s.status)}</li>`)
      .join("");
    parts.push(`<div class="card completion"><p>slices ready</p><ul>${rows}</ul></div>`);
  } else if (snap.card?.type === "aborted") {
    parts.push(`<div class="card aborted">${escapeHtml(snap.card.reason)}</div>`);
  }
  return parts.join("\n");
}

export function renderPicker(snap: PickerSnapshot): string {
  if (snap.staleChoice) {
    return `<div class="banner">choice no longer pending; refreshing…</div>`;
  }
  const cards = snap.options.map((option, i) =>
    `<div class="card option">` +
    `<h4>${escapeHtml(option.label)}</h4>` +
    `<p>${escapeHtml(option.detail)}</p>` +
    `<button data-action="select" data-index="${i}">select</button></div>`);
  const reject =
    `<div class="card reject"><textarea data-role="feedback" ` +
    `placeholder="why not?"></textarea>` +
    `<button data-action="reject">reject with feedback</button></div>`;
  return cards.join("\n") + (snap.options.length ? reject : "");
}

export function renderDashboard(snap: DashboardSnapshot): string {
  const rows = snap.rows.map((row) => {
    const badge = `<span class="badge status-${row.status.toLowerCase()}">` +
                  `${escapeHtml(row.status)}</span>`;
    const error = row.error ? `<span class="row-error">${escapeHtml(row.error)}</span>` : "";
    return `<tr data-nsi="${escapeHtml(row.nsiId)}">` +
           `<td>${escapeHtml(row.nsiId)}</td><td>${badge}</td>` +
           `<td>${escapeHtml(row.profileId)}</td>` +
           `<td><button data-action="detail">detail</button>` +
           `<button data-action="terminate">terminate</button>${error}</td></tr>`;
  }).join("");
  const parts = [
    snap.connectionError !== null
      ? `<div class="banner error">${escapeHtml(snap.connectionError)}</div>` : "",
    `<table class="slices"><thead><tr><th>slice</th><th>status</th>` +
    `<th>profile</th><th></th></tr></thead><tbody>${rows}</tbody></table>`,
  ];
  if (snap.detail !== null) {
    const sla = snap.detail.sla === null
      ? `<p class="sla-unknown">${escapeHtml(snap.detail.slaError ?? "no SLA data")}</p>`
      : snap.detail.sla.compliant
        ? `<p class="sla-ok">SLA compliant</p>`
        : snap.detail.sla.violations.map((v) =>
            `<p class="badge violation">${escapeHtml(v.attribute)}: worst ` +
            `${v.worst_observed} vs bound ${v.bound}</p>`).join("");
    const plots = snap.detail.telemetry.map((t) =>
      `<div class="plot" data-segment="${escapeHtml(t.segmentId)}">` +
      `${t.points.length} samples</div>`).join("");
    parts.push(`<div class="detail"><h3>${escapeHtml(snap.detail.nsiId)} ` +
               `(${escapeHtml(snap.detail.status)})</h3>${sla}${plots}</div>`);
  }
  return parts.join("\n");
}
