import { describe, expect, it, vi } from "vitest";

import { ApiClient } from "../src/api.js";
import { DashboardStore } from "../src/store.js";
import type { PatientsPayload, WorkflowState } from "../src/types.js";

function payload(states: Record<string, WorkflowState>, clock = 20): PatientsPayload {
  return {
    schema_version: 1,
    clock_hour: clock,
    patients: Object.entries(states).map(([pid, wf], i) => ({
      patient_id: pid,
      hour: clock,
      observations: [],
      mask: [],
      risk_score: 0.9 - i * 0.1,
      delta_last_hour: 0,
      top_factors: [],
      workflow_state: wf,
    })),
  };
}

function mockClient(overrides: Partial<Record<keyof ApiClient, any>> = {}): ApiClient {
  const base = {
    getPatients: vi.fn(async () => payload({ a: { state: "under-observation" } })),
    postWorkflow: vi.fn(async (_pid: string, action: string, hours?: number) => {
      if (action === "snooze") return { state: "snoozed", until: 20 + (hours ?? 0) };
      if (action === "initiate-treatment") return { state: "treatment-initiated" };
      return { state: "under-observation" };
    }),
    getTimeseries: vi.fn(),
    getTrend: vi.fn(),
  };
  return Object.assign(base, overrides) as unknown as ApiClient;
}

describe("DashboardStore", () => {
  it("drag to snooze issues the POST and shows the server deadline", async () => {
    const client = mockClient();
    const store = new DashboardStore(client);
    store.applyPoll(payload({ a: { state: "under-observation" } }), 0);
    const result = await store.dragCard("a", "snoozed", 2);
    expect(result.ok).toBe(true);
    expect(client.postWorkflow).toHaveBeenCalledWith("a", "snooze", 2);
    const board = store.board();
    expect(board["snoozed"][0]?.patientId).toBe("a");
    expect(board["snoozed"][0]?.snoozeUntil).toBe(22);
  });

  it("conflict snaps the card back to the server state", async () => {
    const { ApiError } = await import("../src/api.js");
    const client = mockClient({
      postWorkflow: vi.fn(async () => {
        throw new ApiError(409, "ConflictError", "treatment already initiated");
      }),
    });
    const store = new DashboardStore(client);
    store.applyPoll(payload({ a: { state: "treatment-initiated" } }), 0);
    const result = await store.dragCard("a", "snoozed", 2);
    expect(result.ok).toBe(false);
    const board = store.board();
    expect(board["snoozed"]).toHaveLength(0);
    expect(board["treatment-initiated"][0]?.patientId).toBe("a");
  });

  it("network failure rolls the move back", async () => {
    const client = mockClient({
      postWorkflow: vi.fn(async () => {
        throw new TypeError("fetch failed");
      }),
    });
    const store = new DashboardStore(client);
    store.applyPoll(payload({ a: { state: "under-observation" } }), 0);
    const result = await store.dragCard("a", "treatment-initiated");
    expect(result.ok).toBe(false);
    expect(result.ok === false && result.reason).toBe("network failure");
    expect(store.board()["under-observation"][0]?.patientId).toBe("a");
  });

  it("the next poll supersedes optimistic state (server is source of truth)", async () => {
    const client = mockClient();
    const store = new DashboardStore(client);
    store.applyPoll(payload({ a: { state: "under-observation" } }), 0);
    await store.dragCard("a", "snoozed", 2);
    // server auto-expired the snooze by the next poll
    store.applyPoll(payload({ a: { state: "under-observation" } }, 23), 2_000);
    expect(store.board()["under-observation"][0]?.patientId).toBe("a");
    expect(store.board()["snoozed"]).toHaveLength(0);
  });

  it("failed polls keep the previous snapshot and turn stale after 2 intervals", async () => {
    const client = mockClient();
    const store = new DashboardStore(client, 2_000);
    await store.poll(0);
    expect(store.isStale(1_000)).toBe(false);
    (client.getPatients as any).mockRejectedValue(new Error("down"));
    expect(await store.poll(3_000)).toBe(false);
    expect(store.board()["under-observation"]).toHaveLength(1); // retained
    expect(store.isStale(3_900)).toBe(false); // within 2 intervals of last success
    expect(store.isStale(4_100)).toBe(true);
  });

  it("starts stale before the first successful poll", () => {
    const store = new DashboardStore(mockClient());
    expect(store.isStale(0)).toBe(true);
    expect(store.board()["under-observation"]).toHaveLength(0);
  });
});
