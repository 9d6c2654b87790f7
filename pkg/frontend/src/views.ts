/**
 * Pure HTML renderers. Every function returns a string so screens can be
 * unit-tested without a DOM; app.ts owns mounting and event wiring. All
 * dynamic content passes through esc() to stay XSS-safe.
 */

import type {
  AuditFinding,
  AuditReport,
  BlockView,
  PendingDetails,
  ProfileView,
  VaccinationView,
} from "./api.js";

export function esc(value: unknown): string {
  return String(value)
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;")
    .replaceAll("'", "&#39;");
}

function rows(pairs: [string, unknown][]): string {
  return pairs
    .map(
      ([label, value]) =>
        `<tr><th scope="row">${esc(label)}</th><td class="mono">${esc(value)}</td></tr>`,
    )
    .join("");
}

/** The citizen-information card shown once, at registration completion. */
export function profileCard(profile: ProfileView): string {
  return `
<section class="card" data-view="citizen-information">
  <h2>Citizen Information</h2>
  <table>${rows([
    ["Pseudo UUID", profile.pseudoUUID],
    ["Gender", profile.gender],
    ["Age", profile.age],
    ["No. of Doses Completed", profile.dosesCompleted],
    ["Secret Code", profile.secretCode],
    ["Static Key", profile.staticKey],
  ])}</table>
  <p class="warning">Save your static key and secret code now. The static key is
  shown only on this screen and cannot be fetched again.</p>
</section>`;
}

/** The vaccination-information card shown after a confirmed dose. */
export function vaccinationCard(record: VaccinationView): string {
  return `
<section class="card" data-view="vaccination-information">
  <h2>Vaccination Information</h2>
  <table>${rows([
    ["Vaccination ID", record.vaccinationID],
    ["Citizen Pseudo UUID", record.pseudoUUID],
    ["Center ID", record.centerID],
    ["Vaccine Name", record.vaccineName],
    ["Vaccinator's Name", record.vaccinator],
    ["Dose Number", record.doseNumber],
    ["Health Conditions", record.healthConditions],
  ])}</table>
</section>`;
}

/** Dose details pending the citizen's confirmation, shown before solving. */
export function pendingDetailsCard(details: PendingDetails): string {
  return `
<section class="card pending" data-view="pending-details">
  <h3>Details entered by the health official</h3>
  <table>${rows([
    ["Vaccine Name", details.vaccineName],
    ["Vaccinator's Name", details.vaccinator],
    ["Dose Number", details.doseNumber],
    ["Center ID", details.centerID],
    ["Health Conditions", details.healthConditions],
  ])}</table>
  <p>Check the details above, then enter your static key and secret code to sign.</p>
</section>`;
}

export function deadPageScreen(reason: "used" | "expired"): string {
  const message =
    reason === "used"
      ? "This verification page has already been used."
      : "This verification page has expired.";
  return `
<section class="card dead" data-view="dead-page">
  <h2>Page no longer available</h2>
  <p>${message} Ask the health official for a new one.</p>
</section>`;
}

export function suffixBanner(suffix: string): string {
  return `
<div class="suffix-banner" data-view="suffix">
  <p>Read this code aloud to the citizen:</p>
  <div class="suffix mono">${esc(suffix)}</div>
  <p class="countdown">expires in <span data-countdown>-</span>s</p>
</div>`;
}

export function historyTable(records: VaccinationView[]): string {
  if (records.length === 0) {
    return `<p data-view="history-empty">No doses recorded yet.</p>`;
  }
  const body = records
    .map(
      (r) => `<tr>
      <td>${esc(r.doseNumber)}</td><td class="mono">${esc(r.vaccineName)}</td>
      <td>${esc(r.vaccinator)}</td><td class="mono">${esc(r.centerID)}</td>
      <td class="mono">${esc(r.timestamp)}</td></tr>`,
    )
    .join("");
  return `
<table class="list" data-view="history">
  <thead><tr><th>Dose</th><th>Vaccine</th><th>Vaccinator</th><th>Center</th><th>When</th></tr></thead>
  <tbody>${body}</tbody>
</table>`;
}

export function auditSummary(report: AuditReport): string {
  const status = report.chainOk && report.findings.length === 0
    ? `<span class="ok">0 findings — chain intact</span>`
    : `<span class="bad">${report.findings.length} findings — chain ${
        report.chainOk ? "intact" : "INVALID"
      }</span>`;
  return `
<div class="audit-summary" data-view="audit-summary">
  <p>${status}</p>
  <p>checked ${esc(report.checkedCitizens)} citizens,
     ${esc(report.checkedVaccinations)} vaccinations,
     ${esc(report.checkedCenters)} centers
     (${esc(report.startedAt)} → ${esc(report.finishedAt)})</p>
</div>`;
}

export function findingsTable(findings: AuditFinding[]): string {
  if (findings.length === 0) {
    return `<p class="ok" data-view="findings-empty">0 findings</p>`;
  }
  const groups = new Map<string, AuditFinding[]>();
  for (const finding of findings) {
    const bucket = groups.get(finding.kind) ?? [];
    bucket.push(finding);
    groups.set(finding.kind, bucket);
  }
  const sections = [...groups.entries()]
    .sort(([a], [b]) => a.localeCompare(b))
    .map(
      ([kind, group]) => `
  <tbody data-kind="${esc(kind)}">
    <tr class="group"><th colspan="2">${esc(kind)} (${group.length})</th></tr>
    ${group
      .map(
        (f) =>
          `<tr class="finding"><td class="mono">${esc(f.subjectKey)}</td><td>${esc(f.detail)}</td></tr>`,
      )
      .join("")}
  </tbody>`,
    )
    .join("");
  return `<table class="list findings" data-view="findings">${sections}</table>`;
}

export function blocksTable(blocks: BlockView[]): string {
  const body = blocks
    .map(
      (b) => `<tr>
      <td>${esc(b.header.height)}</td>
      <td class="mono">${esc(b.header.blockAddress.slice(0, 16))}…</td>
      <td class="mono">${esc(b.header.merkleRoot.slice(0, 16))}…</td>
      <td>${esc(b.transactions.length)}</td>
      <td>${esc(b.header.nonce)}</td>
      <td class="mono">${esc(b.header.timestamp)}</td></tr>`,
    )
    .join("");
  return `
<table class="list" data-view="blocks">
  <thead><tr><th>Height</th><th>Address</th><th>Merkle root</th><th>Txs</th><th>Nonce</th><th>Mined</th></tr></thead>
  <tbody>${body}</tbody>
</table>`;
}

export function errorBox(message: string): string {
  return `<p class="error" role="alert">${esc(message)}</p>`;
}
