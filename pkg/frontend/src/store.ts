// Dashboard state: last poll snapshot, staleness, optimistic drag moves
// with conflict snap-back. The server is the source of truth after every
// poll; optimistic overrides live only until the next snapshot or a
// rejected POST.

import { ApiClient, ApiError } from "./api.js";
import { actionForColumn, buildBoard, toggleFlip } from "./board.js";
import type { Board, Column, PatientsPayload, WorkflowState } from "./types.js";

export type DragResult =
  | { ok: true; state: WorkflowState }
  | { ok: false; reason: string; serverState: WorkflowState | null };

export class DashboardStore {
  private snapshot: PatientsPayload | null = null;
  private optimistic = new Map<string, WorkflowState>();
  private flipped = new Set<string>();
  private lastPollMs: number | null = null;

  constructor(
    private client: ApiClient,
    public pollIntervalMs: number = 2_000,
  ) {}

  /** Apply one poll result; server state supersedes optimistic overrides. */
  applyPoll(payload: PatientsPayload, nowMs: number): void {
    this.snapshot = payload;
    this.optimistic.clear();
    this.lastPollMs = nowMs;
  }

  /** One poll cycle. Failures keep the previous snapshot (and staleness grows). */
  async poll(nowMs: number): Promise<boolean> {
    try {
      this.applyPoll(await this.client.getPatients(), nowMs);
      return true;
    } catch {
      return false;
    }
  }

  /** Stale when the last successful poll is more than two intervals old. */
  isStale(nowMs: number): boolean {
    if (this.lastPollMs === null) return true;
    return nowMs - this.lastPollMs > 2 * this.pollIntervalMs;
  }

  get clockHour(): number {
    return this.snapshot?.clock_hour ?? 0;
  }

  board(): Board {
    const payload = this.snapshot ?? {
      schema_version: 0,
      clock_hour: 0,
      patients: [],
    };
    return buildBoard(payload, this.optimistic, this.flipped);
  }

  flip(patientId: string): void {
    this.flipped = toggleFlip(this.flipped, patientId);
  }

  /**
   * Drag a card to a column: optimistic move, POST to the server, then
   * either adopt the server's answer or snap back on rejection.
   */
  async dragCard(
    patientId: string,
    target: Column,
    snoozeHours?: number,
  ): Promise<DragResult> {
    const { action, hours } = actionForColumn(target, snoozeHours);
    const guess: WorkflowState =
      target === "snoozed"
        ? { state: target, until: this.clockHour + (hours ?? 0) }
        : { state: target };
    this.optimistic.set(patientId, guess);
    try {
      const state = await this.client.postWorkflow(patientId, action, hours);
      this.optimistic.set(patientId, state); // server's exact answer
      return { ok: true, state };
    } catch (err) {
      this.optimistic.delete(patientId); // snap back
      if (err instanceof ApiError) {
        return { ok: false, reason: err.message, serverState: null };
      }
      return { ok: false, reason: "network failure", serverState: null };
    }
  }
}
