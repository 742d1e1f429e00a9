// Thin typed client over the platform HTTP endpoints. The base URL is the
// only configuration the dashboard takes.

import type { PatientsPayload, WorkflowState } from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public kind: string,
    detail: string,
  ) {
    super(`${kind}: ${detail}`);
  }
}

type FetchLike = typeof fetch;

export class ApiClient {
  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = fetch,
  ) {}

  private async request(path: string, init?: RequestInit): Promise<any> {
    const res = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    const body = await res.json();
    if (!res.ok) {
      throw new ApiError(res.status, body.error ?? "HttpError", body.detail ?? "");
    }
    return body;
  }

  getPatients(): Promise<PatientsPayload> {
    return this.request("/patients");
  }

  async postWorkflow(
    patientId: string,
    action: string,
    hours?: number,
  ): Promise<WorkflowState> {
    const body = await this.request(`/patients/${patientId}/workflow`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(hours === undefined ? { action } : { action, hours }),
    });
    return body.workflow_state;
  }

  async getTimeseries(patientId: string, from: number, to: number) {
    const body = await this.request(
      `/patients/${patientId}/timeseries?from=${from}&to=${to}`,
    );
    return body.documents;
  }

  async getTrend(hours: number) {
    const body = await this.request(`/trends?hours=${hours}`);
    return body.trend;
  }
}
