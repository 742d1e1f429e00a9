// Pure board derivation: latest poll payload + in-flight optimistic moves
// + client-side flip state -> three sorted columns.

import type {
  Board,
  CardViewModel,
  Column,
  PatientDoc,
  PatientsPayload,
  WorkflowState,
} from "./types.js";
import { COLUMNS } from "./types.js";

export function cardFromDoc(
  doc: PatientDoc,
  flipped: boolean,
  override?: WorkflowState,
): CardViewModel {
  const wf = override ?? doc.workflow_state;
  return {
    patientId: doc.patient_id,
    riskScore: doc.risk_score,
    deltaLastHour: doc.delta_last_hour,
    topFactors: doc.top_factors.map(([id, z]) => ({ id, z })),
    column: wf.state,
    snoozeUntil: wf.state === "snoozed" ? (wf.until ?? null) : null,
    flipped,
  };
}

/**
 * Column membership and ordering is a pure function of the latest payload
 * plus optimistic overrides; every column is ranked by risk descending with
 * patient id as the tiebreak (the same order the server returns).
 */
export function buildBoard(
  payload: PatientsPayload,
  optimistic: Map<string, WorkflowState>,
  flipped: Set<string>,
): Board {
  const board: Board = {
    "under-observation": [],
    "snoozed": [],
    "treatment-initiated": [],
  };
  for (const doc of payload.patients) {
    const card = cardFromDoc(
      doc,
      flipped.has(doc.patient_id),
      optimistic.get(doc.patient_id),
    );
    board[card.column].push(card);
  }
  for (const column of COLUMNS) {
    board[column].sort(
      (a, b) => b.riskScore - a.riskScore || a.patientId.localeCompare(b.patientId),
    );
  }
  return board;
}

export function isEmpty(board: Board): boolean {
  return COLUMNS.every((c) => board[c].length === 0);
}

/** Client-side flip toggle; flipping twice restores the original face. */
export function toggleFlip(flipped: Set<string>, patientId: string): Set<string> {
  const next = new Set(flipped);
  if (next.has(patientId)) next.delete(patientId);
  else next.add(patientId);
  return next;
}

/** The workflow action a drag to `target` must issue. */
export function actionForColumn(
  target: Column,
  snoozeHours?: number,
): { action: string; hours?: number } {
  if (target === "snoozed") return { action: "snooze", hours: snoozeHours };
  if (target === "treatment-initiated") return { action: "initiate-treatment" };
  return { action: "reopen" };
}

export function findCard(board: Board, patientId: string): CardViewModel | null {
  for (const column of COLUMNS) {
    const hit = board[column].find((c) => c.patientId === patientId);
    if (hit) return hit;
  }
  return null;
}
