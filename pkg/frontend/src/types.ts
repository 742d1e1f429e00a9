// API payload shapes (mirrors the platform's JSON envelope) and the card
// view model the board renders from.

export type Column = "under-observation" | "snoozed" | "treatment-initiated";

export const COLUMNS: Column[] = [
  "under-observation",
  "snoozed",
  "treatment-initiated",
];

export const COLUMN_LABELS: Record<Column, string> = {
  "under-observation": "Under Observation",
  "snoozed": "Snoozed Alarms",
  "treatment-initiated": "Treatment Initiated",
};

export interface WorkflowState {
  state: Column;
  until?: number; // snooze deadline, simulated hour
}

export interface PatientDoc {
  patient_id: string;
  hour: number;
  observations: number[];
  mask: boolean[];
  risk_score: number;
  delta_last_hour: number;
  top_factors: [string, number][];
  workflow_state: WorkflowState;
}

export interface PatientsPayload {
  schema_version: number;
  clock_hour: number;
  patients: PatientDoc[];
}

export interface CardViewModel {
  patientId: string;
  riskScore: number;
  deltaLastHour: number;
  topFactors: { id: string; z: number }[];
  column: Column;
  snoozeUntil: number | null;
  flipped: boolean;
}

export type Board = Record<Column, CardViewModel[]>;
