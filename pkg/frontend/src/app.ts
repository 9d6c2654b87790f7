/**
 * Portal entry point: hash routing and DOM wiring for the four screens.
 *
 *   #/register        citizen registration wizard (uuid+phone -> OTP -> pin)
 *   #/verify/{suffix} one-time challenge page solved on the citizen's device
 *   #/official        health-official console (history, pages, dose details)
 *   #/audit           agency dashboard (report + block explorer)
 *
 * Static keys and secret codes live only in form fields and local variables;
 * nothing is written to browser storage.
 */

import { ApiError, PortalApi } from "./api.js";
import type { PageStatus, ProfileView } from "./api.js";
import {
  afterFailure,
  afterSolve,
  canSubmit,
  challengeFromStatus,
  initialWizard,
  isTerminalCode,
  secondsLeft,
  wizardReduce,
} from "./state.js";
import type { ChallengeFormState, WizardState } from "./state.js";
import {
  auditSummary,
  blocksTable,
  deadPageScreen,
  errorBox,
  esc,
  findingsTable,
  historyTable,
  pendingDetailsCard,
  profileCard,
  suffixBanner,
  vaccinationCard,
} from "./views.js";

declare global {
  interface Window {
    VAX_API_BASE?: string;
  }
}

const api = new PortalApi(window.VAX_API_BASE ?? "");
const app = () => document.getElementById("app")!;

let activeCountdown: number | undefined;

function clearCountdown(): void {
  if (activeCountdown !== undefined) {
    clearInterval(activeCountdown);
    activeCountdown = undefined;
  }
}

function startCountdown(expiresAt: string, onExpiry?: () => void): void {
  clearCountdown();
  const tick = () => {
    const left = secondsLeft(expiresAt, new Date());
    for (const el of document.querySelectorAll("[data-countdown]")) {
      el.textContent = String(left);
    }
    if (left <= 0) {
      clearCountdown();
      onExpiry?.();
    }
  };
  tick();
  activeCountdown = window.setInterval(tick, 1000);
}

function messageFor(err: unknown): string {
  if (err instanceof ApiError) return `${err.code}: ${err.message}`;
  return String(err);
}

// -- home -----------------------------------------------------------------

function renderHome(): void {
  app().innerHTML = `
<nav class="home">
  <a href="#/register">Citizen registration</a>
  <a href="#/verify">Verification page</a>
  <a href="#/official">Official console</a>
  <a href="#/audit">Audit dashboard</a>
</nav>`;
}

// -- registration wizard ----------------------------------------------------

function renderWizard(state: WizardState): void {
  const el = app();
  const error = state.error ? errorBox(state.error) : "";
  if (state.step === "identity") {
    el.innerHTML = `
<section class="card"><h2>Register — step 1 of 3</h2>${error}
  <form id="identity-form">
    <label>Government UUID <input name="uuid" required autocomplete="off"></label>
    <label>Phone number <input name="phone" required autocomplete="off"></label>
    <button type="submit">Send OTP</button>
  </form>
  <p class="hint">Dev mode: the OTP lands in the <a href="#/outbox">outbox viewer</a>.</p>
</section>`;
    bindSubmit("identity-form", async (fields) => {
      try {
        const session = await api.startRegistration(fields.uuid, fields.phone);
        renderWizard(wizardReduce(state, { type: "identity-accepted", sessionID: session.sessionID }));
      } catch (err) {
        renderWizard(wizardReduce(state, {
          type: "failed",
          message: messageFor(err),
          terminal: err instanceof ApiError && isTerminalCode(err.code),
        }));
      }
    });
  } else if (state.step === "otp") {
    el.innerHTML = `
<section class="card"><h2>Register — step 2 of 3</h2>${error}
  <p>An OTP was sent to your phone.</p>
  <form id="otp-form">
    <label>OTP <input name="otp" required autocomplete="off" inputmode="numeric"></label>
    <button type="submit">Verify</button>
  </form>
</section>`;
    bindSubmit("otp-form", async (fields) => {
      try {
        const draft = await api.verifyOtp(state.sessionID!, fields.otp);
        renderWizard(wizardReduce(state, { type: "otp-accepted", token: draft.token }));
      } catch (err) {
        renderWizard(wizardReduce(state, {
          type: "failed",
          message: messageFor(err),
          terminal: err instanceof ApiError && isTerminalCode(err.code),
        }));
      }
    });
  } else if (state.step === "profile") {
    el.innerHTML = `
<section class="card"><h2>Register — step 3 of 3</h2>${error}
  <form id="profile-form">
    <label>PIN code <input name="pin" required autocomplete="off"></label>
    <label>Gender
      <select name="gender"><option>Female</option><option>Male</option><option>Other</option></select>
    </label>
    <button type="submit">Create my profile</button>
  </form>
</section>`;
    bindSubmit("profile-form", async (fields) => {
      try {
        const profile = await api.completeRegistration(state.token!, fields.pin, fields.gender);
        renderWizard(wizardReduce(state, { type: "profile-created", profile }));
      } catch (err) {
        renderWizard(wizardReduce(state, { type: "failed", message: messageFor(err) }));
      }
    });
  } else if (state.step === "done") {
    el.innerHTML = profileCard(state.profile as ProfileView);
  } else {
    el.innerHTML = `
<section class="card dead"><h2>Registration stopped</h2>${error}
  <p>Start over from the <a href="#/register" onclick="location.reload()">beginning</a>.</p>
</section>`;
  }
}

function bindSubmit(formId: string, handler: (fields: Record<string, string>) => void): void {
  const form = document.getElementById(formId) as HTMLFormElement;
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const data = new FormData(form);
    const fields: Record<string, string> = {};
    for (const [key, value] of data.entries()) fields[key] = String(value);
    handler(fields);
  });
}

// -- verification page ---------------------------------------------------------

function renderVerifyEntry(): void {
  app().innerHTML = `
<section class="card"><h2>Verification page</h2>
  <form id="suffix-form">
    <label>Enter the 5-character code the official read to you
      <input name="suffix" required minlength="5" maxlength="5" autocomplete="off">
    </label>
    <button type="submit">Open page</button>
  </form>
</section>`;
  bindSubmit("suffix-form", (fields) => {
    location.hash = `#/verify/${fields.suffix.toLowerCase()}`;
  });
}

async function renderChallenge(suffix: string): Promise<void> {
  let status: PageStatus;
  try {
    status = await api.pageStatus(suffix);
  } catch (err) {
    app().innerHTML = errorBox(messageFor(err));
    return;
  }
  if (status.used || status.expired) {
    app().innerHTML = deadPageScreen(status.used ? "used" : "expired");
    return;
  }
  drawChallengeForm(challengeFromStatus(status), status);
}

function drawChallengeForm(state: ChallengeFormState, status: PageStatus): void {
  const pending = status.extraData ? pendingDetailsCard(status.extraData) : "";
  app().innerHTML = `
<section class="card"><h2>Solve your challenge</h2>
  ${pending}
  <form id="challenge-form">
    <label>Static key <input name="staticKey" required autocomplete="off"></label>
    <label>Secret code <input name="secretCode" required autocomplete="off" inputmode="numeric"></label>
    <button type="submit">Verify</button>
  </form>
  <p class="countdown">page expires in <span data-countdown>-</span>s</p>
  <div id="challenge-outcome"></div>
</section>`;
  startCountdown(state.expiresAt, () => {
    app().innerHTML = deadPageScreen("expired");
  });
  bindSubmit("challenge-form", async (fields) => {
    if (!canSubmit(state, new Date())) {
      return;
    }
    try {
      const result = await api.solvePage(state.suffix, fields.staticKey, Number(fields.secretCode));
      state = afterSolve(state, result.outcome);
      clearCountdown();
      if (result.outcome === "confirmation-accepted") {
        app().innerHTML =
          `<p class="ok">Vaccination confirmed — show this screen to the official.</p>` +
          vaccinationCard(result.vaccination);
      } else {
        app().innerHTML = `
<section class="card ok-card"><h2>Identity verified</h2>
  <p>Dose ${esc(result.doseNumber)} may now be administered at ${esc(result.centerID)}.</p>
</section>`;
      }
    } catch (err) {
      state = afterFailure(state);
      clearCountdown();
      const code = err instanceof ApiError ? err.code : "error";
      if (code === "page-used" || code === "page-expired") {
        app().innerHTML = deadPageScreen(code === "page-used" ? "used" : "expired");
      } else {
        app().innerHTML = `
<section class="card dead"><h2>Verification failed</h2>
  ${errorBox(messageFor(err))}
  <p>The page is single-use; ask the official for a new one.</p>
</section>`;
      }
    }
  });
}

// -- official console -------------------------------------------------------------

function renderOfficialConsole(): void {
  app().innerHTML = `
<section class="card"><h2>Official console</h2>
  <p class="hint">All actions need the citizen's secret code + PIN; dose details
  additionally need your center's static key (kept in memory only).</p>
  <form id="lookup-form" class="inline">
    <input name="secretCode" placeholder="secret code" required inputmode="numeric">
    <input name="pin" placeholder="PIN code" required>
    <button type="submit">Look up history</button>
  </form>
  <div id="history"></div>
  <form id="page-form" class="inline">
    <input name="secretCode" placeholder="secret code" required inputmode="numeric">
    <input name="pin" placeholder="PIN code" required>
    <input name="centerID" placeholder="center ID" required>
    <button type="submit">Create identity page</button>
  </form>
  <div id="page-out"></div>
  <form id="details-form">
    <h3>Dose details (after the citizen verified)</h3>
    <label>Draft ID <input name="draftID" required></label>
    <label>Vaccine name <input name="vaccineName" required></label>
    <label>Vaccinator <input name="vaccinator" required></label>
    <label>Health conditions <input name="healthConditions" required></label>
    <label>Center static key <input name="centerStaticKey" required type="password"></label>
    <button type="submit">Record details</button>
  </form>
  <div id="details-out"></div>
</section>`;

  bindSubmit("lookup-form", async (fields) => {
    const target = document.getElementById("history")!;
    try {
      const result = await api.history(Number(fields.secretCode), fields.pin);
      target.innerHTML = historyTable(result.records);
    } catch (err) {
      target.innerHTML = errorBox(messageFor(err));
    }
  });

  bindSubmit("page-form", async (fields) => {
    const target = document.getElementById("page-out")!;
    try {
      const page = await api.createPage(
        Number(fields.secretCode), fields.pin, fields.centerID, "identity");
      target.innerHTML = suffixBanner(page.suffix);
      startCountdown(page.expiresAt);
    } catch (err) {
      target.innerHTML = errorBox(messageFor(err));
    }
  });

  bindSubmit("details-form", async (fields) => {
    const target = document.getElementById("details-out")!;
    try {
      const result = await api.recordDetails(fields.draftID, {
        vaccineName: fields.vaccineName,
        vaccinator: fields.vaccinator,
        healthConditions: fields.healthConditions,
        centerStaticKey: fields.centerStaticKey,
      });
      target.innerHTML = suffixBanner(result.confirmationSuffix);
      startCountdown(result.expiresAt);
    } catch (err) {
      target.innerHTML = errorBox(messageFor(err));
    }
  });
}

// -- audit dashboard ---------------------------------------------------------------

async function renderAuditDashboard(): Promise<void> {
  app().innerHTML = `
<section class="card"><h2>Audit dashboard</h2>
  <button id="run-audit">Run full audit</button>
  <div id="audit-out"><p class="hint">No report yet.</p></div>
  <h3>Block explorer</h3>
  <div id="blocks-out"></div>
</section>`;
  document.getElementById("run-audit")!.addEventListener("click", async () => {
    const target = document.getElementById("audit-out")!;
    target.innerHTML = `<p class="hint">auditing…</p>`;
    try {
      const report = await api.runAudit();
      target.innerHTML = auditSummary(report) + findingsTable(report.findings);
      await refreshBlocks();
    } catch (err) {
      target.innerHTML = errorBox(messageFor(err));
    }
  });
  await refreshBlocks();
}

async function refreshBlocks(): Promise<void> {
  const target = document.getElementById("blocks-out");
  if (!target) return;
  try {
    const result = await api.blocks();
    target.innerHTML =
      `<p class="hint">height ${esc(result.height)}, ${esc(result.pending)} pending</p>` +
      blocksTable(result.blocks);
  } catch (err) {
    target.innerHTML = errorBox(messageFor(err));
  }
}

// -- outbox viewer (deterministic dev mode) -------------------------------------------

async function renderOutbox(): Promise<void> {
  try {
    const result = await api.outbox();
    const items = result.messages
      .map((m) => `<tr><td class="mono">${esc(m.phone)}</td><td>${esc(m.message)}</td>
        <td class="mono">${esc(m.timestamp)}</td></tr>`)
      .join("");
    app().innerHTML = `
<section class="card"><h2>Simulated SMS outbox</h2>
  <table class="list"><thead><tr><th>Phone</th><th>Message</th><th>Sent</th></tr></thead>
  <tbody>${items}</tbody></table>
</section>`;
  } catch (err) {
    app().innerHTML = errorBox(messageFor(err));
  }
}

// -- router -----------------------------------------------------------------------------

function route(): void {
  clearCountdown();
  const hash = location.hash || "#/";
  const verifyMatch = /^#\/verify\/([a-z0-9]{5})$/.exec(hash);
  if (verifyMatch) {
    void renderChallenge(verifyMatch[1]);
  } else if (hash === "#/register") {
    renderWizard(initialWizard());
  } else if (hash === "#/verify") {
    renderVerifyEntry();
  } else if (hash === "#/official") {
    renderOfficialConsole();
  } else if (hash === "#/audit") {
    void renderAuditDashboard();
  } else if (hash === "#/outbox") {
    void renderOutbox();
  } else {
    renderHome();
  }
}

window.addEventListener("hashchange", route);
window.addEventListener("DOMContentLoaded", route);
