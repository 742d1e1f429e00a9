"""Patient event-stream data model, cohort exclusion rules, and disk I/O.

Timestamps throughout are integer hours since an arbitrary epoch; hourly
resolution is the native resolution of the whole pipeline.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

MIN_LOS_HOURS = 8
MAX_LOS_HOURS = 480  # "20 days", boundary inclusive
EARLY_SEPSIS_HOURS = 4

OUTCOME_SURVIVED = "survived"
OUTCOME_DIED = "died-or-hospice"

THERAPY_KINDS = ("antibiotic-order", "antibiotic-administration", "culture-order")


class CohortError(ValueError):
    pass


@dataclass
class PatientRecord:
    patient_id: str
    icu_admit_time: int
    icu_discharge_time: int
    demographics: dict[str, float] = field(default_factory=dict)
    outcome: str = OUTCOME_SURVIVED

    def __post_init__(self):
        if self.icu_discharge_time <= self.icu_admit_time:
            raise CohortError(f"{self.patient_id}: discharge must be after admit")

    @property
    def los_hours(self) -> int:
        return self.icu_discharge_time - self.icu_admit_time


@dataclass(frozen=True)
class ClinicalEvent:
    patient_id: str
    time: int
    feature_id: str
    value: float


@dataclass(frozen=True)
class TherapyEvent:
    patient_id: str
    time: int
    kind: str

    def __post_init__(self):
        if self.kind not in THERAPY_KINDS:
            raise CohortError(f"unknown therapy kind {self.kind!r}")


@dataclass
class Cohort:
    """A set of patients plus their event streams, keyed by patient id."""

    patients: list[PatientRecord] = field(default_factory=list)
    clinical_events: list[ClinicalEvent] = field(default_factory=list)
    therapy_events: list[TherapyEvent] = field(default_factory=list)

    def patient_ids(self) -> list[str]:
        return [p.patient_id for p in self.patients]

    def events_for(self, patient_id: str) -> list[ClinicalEvent]:
        return [e for e in self.clinical_events if e.patient_id == patient_id]

    def therapy_for(self, patient_id: str) -> list[TherapyEvent]:
        return [e for e in self.therapy_events if e.patient_id == patient_id]

    def subset(self, patient_ids) -> "Cohort":
        keep = set(patient_ids)
        return Cohort(
            patients=[p for p in self.patients if p.patient_id in keep],
            clinical_events=[e for e in self.clinical_events if e.patient_id in keep],
            therapy_events=[e for e in self.therapy_events if e.patient_id in keep],
        )


@dataclass
class ExclusionReport:
    short_stay: int = 0
    long_stay: int = 0
    early_sepsis: int = 0
    retained: int = 0

    def as_dict(self) -> dict[str, int]:
        return {
            "short-stay": self.short_stay,
            "long-stay": self.long_stay,
            "early-sepsis": self.early_sepsis,
            "retained": self.retained,
        }


def apply_exclusions(cohort: Cohort, onsets: dict[str, int | None]) -> tuple[Cohort, ExclusionReport]:
    """Drop short/long stays and patients septic within 4h of admission.

    `onsets` maps patient id to the sepsis onset timestamp (absolute hours) or
    None. Stays of exactly 8h or 480h are retained; onset exactly at
    admit + 4h is retained.
    """
    report = ExclusionReport()
    keep = []
    for p in cohort.patients:
        los = p.los_hours
        if los < MIN_LOS_HOURS:
            report.short_stay += 1
            continue
        if los > MAX_LOS_HOURS:
            report.long_stay += 1
            continue
        onset = onsets.get(p.patient_id)
        if onset is not None and onset < p.icu_admit_time + EARLY_SEPSIS_HOURS:
            report.early_sepsis += 1
            continue
        keep.append(p.patient_id)
    report.retained = len(keep)
    return cohort.subset(keep), report


# ---------------------------------------------------------------------------
# Disk format: one line-delimited CSV per stream.
#   patients.csv : patient_id, icu_admit_time, icu_discharge_time, outcome,
#                  then demographic columns (named in the header)
#   events.csv   : patient_id, time, feature_id, value
#   therapy.csv  : patient_id, time, kind
# ---------------------------------------------------------------------------

def save_cohort(cohort: Cohort, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    demo_keys = sorted({k for p in cohort.patients for k in p.demographics})
    with open(directory / "patients.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["patient_id", "icu_admit_time", "icu_discharge_time", "outcome", *demo_keys])
        for p in cohort.patients:
            w.writerow(
                [p.patient_id, p.icu_admit_time, p.icu_discharge_time, p.outcome]
                + [repr(float(p.demographics[k])) if k in p.demographics else "" for k in demo_keys]
            )
    with open(directory / "events.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["patient_id", "time", "feature_id", "value"])
        for e in cohort.clinical_events:
            w.writerow([e.patient_id, e.time, e.feature_id, repr(float(e.value))])
    with open(directory / "therapy.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["patient_id", "time", "kind"])
        for e in cohort.therapy_events:
            w.writerow([e.patient_id, e.time, e.kind])


def load_cohort(directory) -> Cohort:
    directory = Path(directory)
    cohort = Cohort()
    with open(directory / "patients.csv", newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        demo_keys = header[4:]
        for row in r:
            demo = {k: float(v) for k, v in zip(demo_keys, row[4:]) if v != ""}
            cohort.patients.append(
                PatientRecord(row[0], int(row[1]), int(row[2]), demo, row[3])
            )
    with open(directory / "events.csv", newline="") as fh:
        r = csv.reader(fh)
        next(r)
        for row in r:
            cohort.clinical_events.append(ClinicalEvent(row[0], int(row[1]), row[2], float(row[3])))
    with open(directory / "therapy.csv", newline="") as fh:
        r = csv.reader(fh)
        next(r)
        for row in r:
            cohort.therapy_events.append(TherapyEvent(row[0], int(row[1]), row[2]))
    return cohort
