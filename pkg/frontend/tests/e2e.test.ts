/**
 * End-to-end: spawns the registry service (Python) with generated fixtures
 * and drives the live API through the portal's client and renderers.
 *
 * Opt in with VAX_E2E=1 (wired as `npm run test:e2e`).
 */

import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiError, PortalApi } from "../src/api.js";
import { esc, findingsTable, historyTable, profileCard, vaccinationCard } from "../src/views.js";

const PORT = 8930 + (process.pid % 50);
const BASE = `http://127.0.0.1:${PORT}`;

let service: ChildProcess;
let fixtureDir: string;
let population: { uuid: string; phone: string; pin: string; gender: string }[];
const api = new PortalApi(BASE);

async function waitForHealth(timeoutMs = 30_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      const result = await api.health();
      if (result.status === "ok") return;
    } catch {
      await new Promise((resolve) => setTimeout(resolve, 250));
    }
  }
  throw new Error("service did not come up in time");
}

async function otpFor(phone: string): Promise<string> {
  const { messages } = await api.outbox();
  const mine = messages.filter((m) => m.phone === phone).at(-1);
  if (!mine) throw new Error(`no OTP for ${phone}`);
  return mine.message.split(" ").at(-1)!;
}

async function registerCitizen(row: (typeof population)[number]) {
  const session = await api.startRegistration(row.uuid, row.phone);
  const draft = await api.verifyOtp(session.sessionID, await otpFor(row.phone));
  return api.completeRegistration(draft.token, row.pin, row.gender);
}

beforeAll(async () => {
  fixtureDir = mkdtempSync(join(tmpdir(), "vax-e2e-"));
  const generated = spawnSync("python3", [
    "-m", "vaxledger.cli", "generate",
    "--citizens", "10", "--agencies", "2", "--seed", "5", "--out", fixtureDir,
  ], { encoding: "utf-8" });
  if (generated.status !== 0) {
    throw new Error(`fixture generation failed: ${generated.stderr}`);
  }
  population = readFileSync(join(fixtureDir, "directory.jsonl"), "utf-8")
    .trim()
    .split("\n")
    .map((line) => JSON.parse(line));

  service = spawn("python3", [
    "-m", "vaxledger.cli", "serve",
    "--directory", join(fixtureDir, "directory.jsonl"),
    "--regions", join(fixtureDir, "regions.jsonl"),
    "--port", String(PORT),
    "--seed", "7",
    "--min-age", "0",
    "--difficulty", "0",
    "--batch-size", "4",
  ], { stdio: ["ignore", "pipe", "pipe"] });
  await waitForHealth();
}, 60_000);

afterAll(() => {
  service?.kill("SIGTERM");
  rmSync(fixtureDir, { recursive: true, force: true });
});

describe("registration wizard against the live service", () => {
  it("ends on a profile card carrying the full citizen-information field set", async () => {
    const profile = await registerCitizen(population[0]);
    expect(profile.dosesCompleted).toBe(0);
    expect(profile.pseudoUUID).toMatch(/^[0-9a-f]{64}$/);
    expect(profile.staticKey).toMatch(/^[0-9a-f]{64}$/);

    const html = profileCard(profile);
    for (const label of [
      "Pseudo UUID", "Gender", "Age", "No. of Doses Completed", "Secret Code", "Static Key",
    ]) {
      expect(html).toContain(label);
    }
    expect(html).toContain(profile.pseudoUUID);
  });

  it("surfaces unknown-uuid as an inline-able error", async () => {
    const err = await api.startRegistration("000000000000", "+910000000000").catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.code).toBe("unknown-uuid");
  });
});

describe("vaccination flow through one-time pages", () => {
  it("solves a live challenge and renders the vaccination card on confirmation", async () => {
    const citizen = await registerCitizen(population[1]);
    const center = await api.registerCenter("E2E Clinic", "1 Test Way", population[1].pin);
    await api.addStock(center.centerID, 5);

    const page = await api.createPage(citizen.secretCode, citizen.pin, center.centerID, "identity");
    expect(page.suffix).toMatch(/^[a-z0-9]{5}$/);

    const status = await api.pageStatus(page.suffix);
    expect(status.used).toBe(false);
    expect(status.extraData).toBeNull();

    const solved = await api.solvePage(page.suffix, citizen.staticKey, citizen.secretCode);
    if (solved.outcome !== "identity-verified") throw new Error("expected identity outcome");
    expect(solved.doseNumber).toBe(1);

    const details = await api.recordDetails(solved.draftID, {
      vaccineName: "AlphaVaccine",
      vaccinator: "Dr. John Doe",
      healthConditions: "Normal, no COVID symptoms reported",
      centerStaticKey: center.staticKey,
    });
    const pending = await api.pageStatus(details.confirmationSuffix);
    expect(pending.extraData?.vaccineName).toBe("AlphaVaccine");

    const confirmed = await api.solvePage(
      details.confirmationSuffix, citizen.staticKey, citizen.secretCode);
    if (confirmed.outcome !== "confirmation-accepted") throw new Error("expected confirmation");

    const html = vaccinationCard(confirmed.vaccination);
    for (const label of [
      "Vaccination ID", "Citizen Pseudo UUID", "Center ID", "Vaccine Name",
      "Vaccinator's Name", "Dose Number", "Health Conditions",
    ]) {
      expect(html).toContain(esc(label));
    }
    expect(confirmed.vaccination.vaccinationID).toBe(
      `${citizen.pseudoUUID}1${center.centerID}`);

    const history = await api.history(citizen.secretCode, citizen.pin);
    expect(historyTable(history.records)).toContain("AlphaVaccine");
  });

  it("treats a solved page as dead on replay", async () => {
    const citizen = await registerCitizen(population[2]);
    const center = await api.registerCenter("E2E Clinic 2", "2 Test Way", population[2].pin);
    await api.addStock(center.centerID, 5);
    const page = await api.createPage(citizen.secretCode, citizen.pin, center.centerID, "identity");
    await api.solvePage(page.suffix, citizen.staticKey, citizen.secretCode);

    const replay = await api
      .solvePage(page.suffix, citizen.staticKey, citizen.secretCode)
      .catch((e) => e);
    expect(replay).toBeInstanceOf(ApiError);
    expect(replay.code).toBe("page-used");
    const status = await api.pageStatus(page.suffix);
    expect(status.used).toBe(true);
  });

  it("rejects a wrong static key with 401 and consumes the page", async () => {
    const citizen = await registerCitizen(population[3]);
    const center = await api.registerCenter("E2E Clinic 3", "3 Test Way", population[3].pin);
    await api.addStock(center.centerID, 5);
    const page = await api.createPage(citizen.secretCode, citizen.pin, center.centerID, "identity");
    const err = await api
      .solvePage(page.suffix, "f".repeat(64), citizen.secretCode)
      .catch((e) => e);
    expect(err.status).toBe(401);
    expect((await api.pageStatus(page.suffix)).used).toBe(true);
  });
});

describe("audit dashboard data", () => {
  it("renders the report findings one-to-one and lists blocks from genesis", async () => {
    const report = await api.runAudit();
    expect(report.chainOk).toBe(true);
    expect(report.findings).toEqual([]);
    expect(findingsTable(report.findings)).toContain("0 findings");

    const ledger = await api.blocks();
    const heights = ledger.blocks.map((b) => b.header.height);
    expect(heights[0]).toBe(0);
    for (let i = 1; i < heights.length; i++) {
      expect(heights[i]).toBe(heights[i - 1] + 1);
    }
  });
});
