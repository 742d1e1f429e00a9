// Contract tests against the real scoring platform: a fixture cohort is
// built with the CLI, the feed simulator is started as a child process, and
// the dashboard's client/store talk to it over HTTP exactly as the browser
// would.

import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { ApiClient, ApiError } from "../src/api.js";
import { DashboardStore } from "../src/store.js";
import { buildBoard } from "../src/board.js";
import type { PatientsPayload } from "../src/types.js";

const PORT = 8231;
const BASE = `http://127.0.0.1:${PORT}`;
const SPEEDUP = 36_000; // 10 simulated hours per wall second

let workDir: string;
let sim: ChildProcess | null = null;
const client = new ApiClient(BASE);

function cli(args: string[]): void {
  const res = spawnSync("python3", ["-m", "sepsiswatch.cli", ...args], {
    cwd: join(__dirname, "..", ".."),
    encoding: "utf8",
  });
  if (res.status !== 0) {
    throw new Error(`cli ${args[0]} failed: ${res.stderr}\n${res.stdout}`);
  }
}

async function waitFor<T>(
  probe: () => Promise<T | null>,
  timeoutMs: number,
  label: string,
): Promise<T> {
  const deadline = Date.now() + timeoutMs;
  let lastError: unknown = null;
  while (Date.now() < deadline) {
    try {
      const value = await probe();
      if (value !== null) return value;
    } catch (err) {
      lastError = err;
    }
    await new Promise((r) => setTimeout(r, 250));
  }
  throw new Error(`timed out waiting for ${label}: ${lastError ?? "condition never met"}`);
}

beforeAll(async () => {
  workDir = mkdtempSync(join(tmpdir(), "dash-contract-"));
  const cohort = join(workDir, "cohort");
  const labels = join(workDir, "labels.json");
  const model = join(workDir, "model");
  cli(["generate", "--out", cohort, "--n-patients", "24", "--prevalence", "0.4", "--seed", "5"]);
  cli(["label", "--cohort", cohort, "--out", labels]);
  cli([
    "train", "--cohort", cohort, "--labels", labels,
    "--kind", "ffnn-wcph", "--epochs", "10", "--hidden", "6", "--out", model,
  ]);
  sim = spawn(
    "python3",
    [
      "-m", "sepsiswatch.cli", "simulate",
      "--cohort", cohort, "--labels", labels, "--model", model,
      "--speedup", String(SPEEDUP), "--port", String(PORT),
    ],
    { cwd: join(__dirname, "..", ".."), stdio: "ignore" },
  );
  await waitFor(
    async () => {
      const payload = await client.getPatients();
      return payload.patients.length > 0 ? payload : null;
    },
    60_000,
    "first scored patient",
  );
}, 90_000);

afterAll(() => {
  sim?.kill();
  if (workDir) rmSync(workDir, { recursive: true, force: true });
});

describe("live platform contract", () => {
  it("serves the patients payload the dashboard expects", async () => {
    const payload: PatientsPayload = await client.getPatients();
    expect(typeof payload.schema_version).toBe("number");
    expect(typeof payload.clock_hour).toBe("number");
    for (const doc of payload.patients) {
      expect(typeof doc.patient_id).toBe("string");
      expect(typeof doc.hour).toBe("number");
      expect(doc.risk_score).toBeGreaterThanOrEqual(0);
      expect(doc.risk_score).toBeLessThan(1);
      expect(typeof doc.delta_last_hour).toBe("number");
      expect(Array.isArray(doc.top_factors)).toBe(true);
      expect(["under-observation", "snoozed", "treatment-initiated"]).toContain(
        doc.workflow_state.state,
      );
    }
    const scores = payload.patients.map((d) => d.risk_score);
    for (let i = 1; i < scores.length; i++) {
      expect(scores[i - 1]).toBeGreaterThanOrEqual(scores[i]);
    }
    const board = buildBoard(payload, new Map(), new Set());
    const total =
      board["under-observation"].length +
      board["snoozed"].length +
      board["treatment-initiated"].length;
    expect(total).toBe(payload.patients.length);
  });

  it("round-trips a snooze and rejects the conflicting double snooze", async () => {
    const payload = await client.getPatients();
    const pid = payload.patients[0].patient_id;
    const state = await client.postWorkflow(pid, "snooze", 500);
    expect(state.state).toBe("snoozed");
    expect(state.until).toBeGreaterThan(payload.clock_hour);
    await expect(client.postWorkflow(pid, "snooze", 500)).rejects.toMatchObject({
      status: 409,
      kind: "ConflictError",
    });
    const reopened = await client.postWorkflow(pid, "reopen");
    expect(reopened.state).toBe("under-observation");
  });

  it("store drag succeeds against the live server and a conflict snaps back", async () => {
    const store = new DashboardStore(client);
    await store.poll(Date.now());
    const payload = await client.getPatients();
    const pid = payload.patients[payload.patients.length - 1].patient_id;

    const moved = await store.dragCard(pid, "treatment-initiated");
    expect(moved.ok).toBe(true);
    expect(store.board()["treatment-initiated"].some((c) => c.patientId === pid)).toBe(true);

    // snoozing a treated patient is illegal; the card must snap back
    const conflict = await store.dragCard(pid, "snoozed", 500);
    expect(conflict.ok).toBe(false);
    await store.poll(Date.now());
    expect(store.board()["treatment-initiated"].some((c) => c.patientId === pid)).toBe(true);
    expect(store.board()["snoozed"].some((c) => c.patientId === pid)).toBe(false);

    await client.postWorkflow(pid, "reopen");
  });

  it("an expired snooze returns the card to observation on a later poll", async () => {
    const payload = await client.getPatients();
    const pid = payload.patients[0].patient_id;
    const state = await client.postWorkflow(pid, "snooze", 20); // ~2 s of wall time
    expect(state.state).toBe("snoozed");
    const back = await waitFor(
      async () => {
        const latest = await client.getPatients();
        const doc = latest.patients.find((d) => d.patient_id === pid);
        return doc && doc.workflow_state.state === "under-observation" ? doc : null;
      },
      30_000,
      "snooze expiry",
    );
    expect(back.workflow_state.state).toBe("under-observation");
  }, 40_000);

  it("serves the timeseries range the detail view reads", async () => {
    const payload = await client.getPatients();
    const doc = payload.patients[0];
    const docs = await client.getTimeseries(doc.patient_id, 0, doc.hour);
    expect(docs.length).toBeGreaterThan(0);
    for (const d of docs) {
      expect(d.patient_id).toBe(doc.patient_id);
      expect(d.hour).toBeLessThanOrEqual(doc.hour);
    }
  });

  it("surfaces invalid workflow actions as 400 errors", async () => {
    const payload = await client.getPatients();
    const pid = payload.patients[0].patient_id;
    await expect(client.postWorkflow(pid, "escalate")).rejects.toSatisfy(
      (err: unknown) => err instanceof ApiError && err.status === 400,
    );
  });
});
