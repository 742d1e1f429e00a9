"""Desk-scale scoring runtime: stateless model service with an audit log,
an embedded document store with time-series and trend queries, a workflow
state machine for triage columns, and an orchestrator that replays a
patient feed through the scoring pipeline."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cohort import Cohort
from .interpret import relevance
from .schema import SCHEMA_VERSION, FeatureSchema
from .windowing import SCORE_START_HOUR, NormalizationStats, bin_hourly

RISK_TREND_THRESHOLD = 0.5
STATE_UNDER_OBSERVATION = "under-observation"
STATE_SNOOZED = "snoozed"
STATE_TREATMENT_INITIATED = "treatment-initiated"
WORKFLOW_STATES = (
    STATE_UNDER_OBSERVATION,
    STATE_SNOOZED,
    STATE_TREATMENT_INITIATED,
)


class PlatformError(ValueError):
    pass


class ValidationError(PlatformError):
    """Malformed request payload (4xx-class)."""


class NotFoundError(PlatformError):
    pass


class ConflictError(PlatformError):
    """Transition rejected by the workflow state machine."""


class QueryError(PlatformError):
    pass


class ServiceUnavailable(PlatformError):
    """Transient scoring failure; the orchestrator retries these."""


# ---------------------------------------------------------------------------
# documents and the embedded store
# ---------------------------------------------------------------------------

@dataclass
class ScoreDocument:
    """One patient-hour: raw observations plus the model's outputs."""

    patient_id: str
    hour: int
    observations: list[float]
    mask: list[bool]
    risk_score: float
    delta_last_hour: float
    top_factors: list[tuple[str, float]]
    workflow_state: dict

    def __post_init__(self):
        if not 0.0 <= self.risk_score < 1.0:
            raise PlatformError(f"risk_score {self.risk_score} outside [0, 1)")
        if self.workflow_state.get("state") not in WORKFLOW_STATES:
            raise PlatformError(f"bad workflow state {self.workflow_state!r}")

    def to_json(self) -> dict:
        return {
            "patient_id": self.patient_id,
            "hour": self.hour,
            "observations": list(self.observations),
            "mask": [bool(m) for m in self.mask],
            "risk_score": self.risk_score,
            "delta_last_hour": self.delta_last_hour,
            "top_factors": [[f, z] for f, z in self.top_factors],
            "workflow_state": self.workflow_state,
        }

    @classmethod
    def from_json(cls, payload: dict) -> "ScoreDocument":
        return cls(
            patient_id=payload["patient_id"],
            hour=int(payload["hour"]),
            observations=[float(v) for v in payload["observations"]],
            mask=[bool(m) for m in payload["mask"]],
            risk_score=float(payload["risk_score"]),
            delta_last_hour=float(payload["delta_last_hour"]),
            top_factors=[(f, float(z)) for f, z in payload["top_factors"]],
            workflow_state=dict(payload["workflow_state"]),
        )


class DocumentStore:
    """Append-log document store with an in-memory (patient, hour) index.

    Every put appends one line to the log (when a path is given) and
    upserts the index; reloading replays the log, so the last write for a
    key wins.
    """

    def __init__(self, path: str | Path | None = None):
        self._index: dict[tuple[str, int], ScoreDocument] = {}
        self._path = Path(path) if path is not None else None
        if self._path is not None and self._path.exists():
            with open(self._path) as fh:
                for line in fh:
                    doc = ScoreDocument.from_json(json.loads(line))
                    self._index[(doc.patient_id, doc.hour)] = doc

    def __len__(self) -> int:
        return len(self._index)

    def put(self, doc: ScoreDocument) -> None:
        self._index[(doc.patient_id, doc.hour)] = doc
        if self._path is not None:
            with open(self._path, "a") as fh:
                fh.write(json.dumps(doc.to_json()) + "\n")

    def get(self, patient_id: str, hour: int) -> ScoreDocument | None:
        return self._index.get((patient_id, hour))

    def query(self, patient_id: str, t_from: int, t_to: int) -> list[ScoreDocument]:
        """Time-ordered documents for one patient over [t_from, t_to]."""
        if t_to < t_from:
            raise QueryError(f"range end {t_to} before start {t_from}")
        rows = [
            doc
            for (pid, hour), doc in self._index.items()
            if pid == patient_id and t_from <= hour <= t_to
        ]
        return sorted(rows, key=lambda d: d.hour)

    def trend(
        self, now_hour: int, last_n_hours: int, threshold: float = RISK_TREND_THRESHOLD
    ) -> list[dict]:
        """Per-hour population aggregates over (now - n, now]."""
        if last_n_hours < 0:
            raise QueryError("trend window must be nonnegative")
        out = []
        for hour in range(now_hour - last_n_hours + 1, now_hour + 1):
            scores = [
                doc.risk_score for (pid, h), doc in self._index.items() if h == hour
            ]
            out.append(
                {
                    "hour": hour,
                    "count": len(scores),
                    "above_threshold": sum(1 for s in scores if s > threshold),
                    "mean_score": float(np.mean(scores)) if scores else 0.0,
                }
            )
        return out

    def patients(self) -> list[str]:
        return sorted({pid for pid, _ in self._index})

    def latest(self, patient_id: str) -> ScoreDocument | None:
        hours = [h for pid, h in self._index if pid == patient_id]
        if not hours:
            return None
        return self._index[(patient_id, max(hours))]

    def all_documents(self) -> list[ScoreDocument]:
        return sorted(self._index.values(), key=lambda d: (d.patient_id, d.hour))


# ---------------------------------------------------------------------------
# audit log
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AuditEntry:
    request_id: int
    arrival: float
    endpoint: str
    outcome: str  # "success" or "failure:<reason>"


class AuditLog:
    """Totally ordered append-only log of every request, success or not."""

    def __init__(self):
        self._entries: list[AuditEntry] = []

    def append(self, endpoint: str, outcome: str) -> AuditEntry:
        entry = AuditEntry(
            request_id=len(self._entries) + 1,
            arrival=time.time(),
            endpoint=endpoint,
            outcome=outcome,
        )
        self._entries.append(entry)
        return entry

    def entries(self) -> list[AuditEntry]:
        return list(self._entries)

    def __len__(self) -> int:
        return len(self._entries)


# ---------------------------------------------------------------------------
# workflow state machine
# ---------------------------------------------------------------------------

class WorkflowBoard:
    """Per-patient triage state: under-observation <-> snoozed ->
    treatment-initiated, with reopen back to under-observation and snoozes
    that auto-expire at their deadline."""

    def __init__(self):
        self._states: dict[str, dict] = {}

    def register(self, patient_id: str) -> None:
        self._states.setdefault(patient_id, {"state": STATE_UNDER_OBSERVATION})

    def state(self, patient_id: str, now_hour: int) -> dict:
        if patient_id not in self._states:
            raise NotFoundError(f"unknown patient {patient_id!r}")
        st = self._states[patient_id]
        if st["state"] == STATE_SNOOZED and now_hour >= st["until"]:
            st = {"state": STATE_UNDER_OBSERVATION}
            self._states[patient_id] = st
        return dict(st)

    def transition(
        self, patient_id: str, action: str, now_hour: int, hours: int | None = None
    ) -> dict:
        current = self.state(patient_id, now_hour)["state"]
        if action == "snooze":
            if hours is None or hours <= 0:
                raise ValidationError("snooze needs a positive hour count")
            if current != STATE_UNDER_OBSERVATION:
                raise ConflictError(f"cannot snooze a patient in state {current}")
            new = {"state": STATE_SNOOZED, "until": now_hour + int(hours)}
        elif action == "initiate-treatment":
            if current == STATE_TREATMENT_INITIATED:
                raise ConflictError("treatment already initiated")
            new = {"state": STATE_TREATMENT_INITIATED}
        elif action == "reopen":
            if current == STATE_UNDER_OBSERVATION:
                raise ConflictError("patient is already under observation")
            new = {"state": STATE_UNDER_OBSERVATION}
        else:
            raise ValidationError(f"unknown action {action!r}")
        self._states[patient_id] = new
        return dict(new)


# ---------------------------------------------------------------------------
# stateless model service
# ---------------------------------------------------------------------------

class ModelService:
    """Scores full window sequences with immutable model parameters.

    The service keeps no per-patient state; callers resubmit the entire
    history each request. Every request is audited.
    """

    def __init__(
        self,
        model,
        schema: FeatureSchema,
        stats: NormalizationStats,
        horizon: int,
        audit: AuditLog | None = None,
    ):
        self.model = model
        self.schema = schema
        self.stats = stats
        self.horizon = horizon
        self.audit = audit if audit is not None else AuditLog()

    def score_request(self, payload: dict) -> dict:
        """{"windows": [{"hour", "values", "mask"}, ...]} ->
        {"risk_score", "top_factors"}; values are raw (unnormalized)."""
        try:
            result = self._score(payload)
        except PlatformError as exc:
            self.audit.append("score", f"failure:{exc}")
            raise
        self.audit.append("score", "success")
        return result

    def _score(self, payload: dict) -> dict:
        windows = payload.get("windows")
        if not isinstance(windows, list) or not windows:
            raise ValidationError("payload needs a nonempty window list")
        dim = len(self.schema)
        rows = []
        for i, w in enumerate(windows):
            values = w.get("values")
            if not isinstance(values, list) or len(values) != dim:
                raise ValidationError(
                    f"window {i}: expected {dim} feature values"
                )
            if int(w.get("hour", -1)) != i:
                raise ValidationError(f"window {i}: hours must be contiguous from 0")
            rows.append([float(v) for v in values])
        x = self.stats.normalize(np.asarray(rows, dtype=np.float64))
        risk = self.model.risk_score(x, self.horizon)
        report = relevance(
            self.model, x, hour=len(x) - 1, horizon=self.horizon, schema=self.schema
        )
        factors = report.top_positive + report.top_negative
        factors.sort(key=lambda fz: -abs(fz[1]))
        return {
            "risk_score": float(risk),
            "top_factors": [[f, float(z)] for f, z in factors],
        }


# ---------------------------------------------------------------------------
# orchestrator: replays a cohort feed through the service into the store
# ---------------------------------------------------------------------------

class Orchestrator:
    """Owns patient histories and the simulated clock; the model service
    stays stateless by receiving the full sequence each tick."""

    def __init__(
        self,
        cohort: Cohort,
        service: ModelService,
        store: DocumentStore,
        board: WorkflowBoard,
        max_retries: int = 3,
        retry_sleep: float = 0.05,
    ):
        self.cohort = cohort
        self.service = service
        self.store = store
        self.board = board
        self.max_retries = max_retries
        self.retry_sleep = retry_sleep
        self.clock_hour = 0
        self._events = {
            p.patient_id: sorted(
                cohort.events_for(p.patient_id), key=lambda e: e.time
            )
            for p in cohort.patients
        }
        for p in cohort.patients:
            board.register(p.patient_id)

    def active_patients(self, hour: int):
        return [
            p
            for p in self.cohort.patients
            if p.icu_admit_time <= hour < p.icu_discharge_time
        ]

    def tick(self, hour: int) -> list[ScoreDocument]:
        """Score every active patient at `hour`; idempotent per (patient, hour)."""
        self.clock_hour = hour
        produced = []
        for patient in self.active_patients(hour):
            rel_hour = hour - patient.icu_admit_time
            if rel_hour < SCORE_START_HOUR:
                continue
            windows = bin_hourly(
                [e for e in self._events[patient.patient_id] if e.time <= hour],
                patient.icu_admit_time,
                hour + 1,
                self.service.schema,
                patient_id=patient.patient_id,
            )
            payload = {
                "patient_id": patient.patient_id,
                "windows": [
                    {"hour": w.hour_index, "values": list(w.x), "mask": list(w.mask)}
                    for w in windows
                ],
            }
            result = self._score_with_retry(payload)
            previous = self.store.get(patient.patient_id, hour - 1)
            delta = (
                result["risk_score"] - previous.risk_score if previous else 0.0
            )
            doc = ScoreDocument(
                patient_id=patient.patient_id,
                hour=hour,
                observations=list(windows[-1].x),
                mask=list(windows[-1].mask),
                risk_score=result["risk_score"],
                delta_last_hour=delta,
                top_factors=[(f, z) for f, z in result["top_factors"]],
                workflow_state=self.board.state(patient.patient_id, hour),
            )
            self.store.put(doc)
            produced.append(doc)
        return produced

    def _score_with_retry(self, payload: dict) -> dict:
        last_exc = None
        for attempt in range(self.max_retries):
            try:
                return self.service.score_request(payload)
            except ServiceUnavailable as exc:
                last_exc = exc
                time.sleep(self.retry_sleep * (2**attempt))
        raise last_exc

    def run(self, t_start: int, t_end: int) -> None:
        for hour in range(t_start, t_end):
            self.tick(hour)


__all__ = [
    "SCHEMA_VERSION",
    "AuditEntry",
    "AuditLog",
    "ConflictError",
    "DocumentStore",
    "ModelService",
    "NotFoundError",
    "Orchestrator",
    "PlatformError",
    "QueryError",
    "ScoreDocument",
    "ServiceUnavailable",
    "ValidationError",
    "WorkflowBoard",
]
