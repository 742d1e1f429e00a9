"""Seeded synthetic ICU cohort generator.

Substitutes for real EHR data. Septic patients follow a two-state latent
health process: stationary until a hidden infection-onset hour, then linear
per-feature drift (tachycardia, fever or hypothermia, falling blood pressure,
rising creatinine/lactate, falling platelets, ...) plus Gaussian noise, with
culture/antibiotic therapy events emitted near clinical recognition. Controls
are stationary around patient-specific baselines. Between-patient baseline
spread is deliberately wide relative to the drift rate so that temporal trend,
not absolute level, carries much of the predictive signal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cohort import (
    OUTCOME_DIED,
    OUTCOME_SURVIVED,
    ClinicalEvent,
    Cohort,
    CohortError,
    PatientRecord,
    TherapyEvent,
)
from .schema import FeatureSchema, default_schema


@dataclass
class SynthConfig:
    n_patients: int
    sepsis_prevalence: float = 0.08
    schema: FeatureSchema | None = None
    seed: int = 0

    def __post_init__(self):
        if self.n_patients < 0:
            raise CohortError("n_patients must be >= 0")
        if not 0.0 <= self.sepsis_prevalence <= 1.0:
            raise CohortError("sepsis_prevalence must lie in [0,1]")
        if self.schema is None:
            self.schema = default_schema()
        if len(self.schema) == 0:
            raise CohortError("schema must be non-empty")


# healthy anchor value and between-patient baseline sd for named features
_ANCHORS = {
    "hr": (78.0, 18.0),
    "map": (86.0, 13.0),
    "sbp": (122.0, 12.0),
    "dbp": (72.0, 8.0),
    "resp": (16.0, 2.5),
    "temp": (36.8, 0.35),
    "o2sat": (97.0, 1.2),
    "gcs": (15.0, 0.3),
    "vasopressor": (0.0, 0.0),
    "mech_vent": (0.0, 0.0),
    "fio2": (0.21, 0.0),
    "pf_ratio": (400.0, 45.0),
    "etco2": (38.0, 3.0),
    "urine_output": (80.0, 20.0),
    "pao2": (90.0, 10.0),
    "paco2": (40.0, 4.0),
    "ph": (7.40, 0.03),
    "lactate": (1.0, 0.25),
    "wbc": (8.0, 1.8),
    "hemoglobin": (12.5, 1.5),
    "hematocrit": (38.0, 4.0),
    "platelets": (250.0, 55.0),
    "creatinine": (0.9, 0.12),
    "bun": (15.0, 4.0),
    "bilirubin": (0.7, 0.15),
    "albumin": (3.8, 0.4),
    "alt": (30.0, 10.0),
    "ast": (30.0, 10.0),
    "inr": (1.1, 0.1),
    "ptt": (30.0, 3.0),
    "fibrinogen": (350.0, 50.0),
    "glucose": (115.0, 20.0),
    "sodium": (140.0, 3.0),
    "potassium": (4.0, 0.35),
    "chloride": (102.0, 3.0),
    "bicarbonate": (24.0, 2.0),
    "magnesium": (2.0, 0.2),
    "calcium": (9.0, 0.5),
    "phosphorus": (3.5, 0.5),
    "troponin": (0.02, 0.01),
    "crp": (5.0, 2.0),
    "band_neutrophils": (3.0, 1.0),
}

# per-hour drift after infection onset (before the progression cap).
# Organ-dysfunction features (map, platelets, creatinine, bilirubin,
# pf_ratio, gcs) drift slowly -- they drive the onset label itself -- while
# the sentinel vitals and inflammatory markers deteriorate fast, so most of
# the learnable signal in the pre-onset windows is recent temporal change.
_DRIFTS = {
    "hr": 4.2,
    "map": -1.3,
    "sbp": -1.6,
    "resp": 1.5,
    "o2sat": -0.8,
    "gcs": -0.4,
    "pf_ratio": -14.0,
    "pao2": -5.0,
    "ph": -0.015,
    "lactate": 0.35,
    "wbc": 1.6,
    "platelets": -10.0,
    "creatinine": 0.16,
    "bun": 2.2,
    "bilirubin": 0.14,
    "urine_output": -7.0,
    "crp": 16.0,
    "band_neutrophils": 1.8,
    "phosphorus": -0.14,
    "etco2": -1.2,
    "troponin": 0.015,
}

# hourly measurement-noise sd, as a fraction of the baseline sd
_NOISE_FRAC = 0.4
# drift stops progressing after this many hours (treated/plateaued patient)
_PROGRESSION_CAP = 14
# fraction of septic patients whose temperature drifts down (hypothermia);
# makes the temperature effect non-monotone, i.e. nonlinear in level
_HYPOTHERMIA_FRAC = 0.5
_TEMP_DRIFT = 0.40


def _patient_los(rng: np.random.Generator, septic: bool) -> int:
    los = int(round(float(np.exp(rng.normal(3.4, 0.55)))))
    los = int(np.clip(los, 6, 490))
    if septic:
        los = max(los, 30)
    return los


def generate_synthetic_cohort(config: SynthConfig, return_truth: bool = False):
    """Generate a deterministic cohort of patients and event streams.

    With return_truth=True also returns {patient_id: latent infection hour or
    None}, for generator-level tests only; the modeling pipeline must never
    see it.
    """
    rng = np.random.default_rng(config.seed)
    schema = config.schema
    cohort = Cohort()
    truth: dict[str, int | None] = {}

    for idx in range(config.n_patients):
        pid = f"p{idx:05d}"
        septic = bool(rng.random() < config.sepsis_prevalence)
        los = _patient_los(rng, septic)
        admit = int(idx * 1000)  # non-overlapping absolute clocks
        discharge = admit + los

        demo = {
            "age": float(rng.uniform(18, 95)),
            "sex": float(rng.integers(0, 2)),
            "weight": float(np.clip(rng.normal(80, 15), 35, 240)),
            "height": float(np.clip(rng.normal(170, 10), 125, 215)),
            "charlson_index": float(min(rng.poisson(2), 18)),
            "care_unit": float(rng.integers(0, 5)),
            "recent_surgery": float(rng.random() < 0.3),
        }

        t_inf = None
        hypothermic = False
        if septic:
            t_inf = int(rng.integers(6, max(7, los - 12)))
            hypothermic = bool(rng.random() < _HYPOTHERMIA_FRAC)

        baselines = {}
        for spec in schema.entries:
            if spec.identifier in demo:
                baselines[spec.identifier] = demo[spec.identifier]
            elif spec.identifier == "icu_los_hours":
                baselines[spec.identifier] = 0.0
            elif spec.identifier in _ANCHORS:
                anchor, sd = _ANCHORS[spec.identifier]
                baselines[spec.identifier] = float(rng.normal(anchor, sd)) if sd else anchor
            else:  # filler labs
                baselines[spec.identifier] = float(rng.normal(50.0, 12.0))

        vaso_flag = rng.random() < 0.6 if septic else False
        vent_flag = rng.random() < 0.35 if septic else False
        vaso_start = t_inf + int(rng.integers(8, 13)) if septic else None
        vent_start = t_inf + int(rng.integers(7, 13)) if septic else None

        for h in range(los):
            progress = 0.0
            if t_inf is not None and h >= t_inf:
                progress = float(min(h - t_inf, _PROGRESSION_CAP))
            for spec in schema.entries:
                fid = spec.identifier
                miss = spec.missing_prob
                if septic and progress > 0 and spec.group == "laboratory":
                    miss = min(miss, 0.5)  # sicker patients get labs more often
                # hour 0 is the admission battery: everything measured once
                if h > 0 and rng.random() < miss:
                    continue
                value = baselines[fid]
                if fid == "icu_los_hours":
                    value = float(h)
                elif fid == "vasopressor":
                    value = float(vaso_flag and vaso_start is not None and h >= vaso_start)
                elif fid == "mech_vent":
                    value = float(vent_flag and vent_start is not None and h >= vent_start)
                elif fid in demo:
                    pass  # static
                else:
                    drift = _DRIFTS.get(fid, 0.0)
                    if fid == "temp":
                        drift = -_TEMP_DRIFT if hypothermic else _TEMP_DRIFT
                    _, sd = _ANCHORS.get(fid, (50.0, 12.0))
                    noise_sd = max(sd * _NOISE_FRAC, 1e-6)
                    value = value + drift * progress + float(rng.normal(0.0, noise_sd))
                if fid == "gcs":
                    value = float(round(value))
                span = spec.hi - spec.lo
                value = float(np.clip(value, spec.lo + 1e-9 * span, spec.hi - 1e-9 * span))
                cohort.clinical_events.append(ClinicalEvent(pid, admit + h, fid, value))

        abx_admin_delay = None
        if septic:
            t_rec = t_inf + int(rng.integers(2, 9))  # clinical recognition
            t_culture = min(admit + t_rec, discharge)
            t_abx = min(t_culture + int(rng.integers(0, 4)), discharge)
            t_admin = min(t_abx + int(rng.integers(1, 4)), discharge)
            cohort.therapy_events.append(TherapyEvent(pid, t_culture, "culture-order"))
            cohort.therapy_events.append(TherapyEvent(pid, t_abx, "antibiotic-order"))
            cohort.therapy_events.append(TherapyEvent(pid, t_admin, "antibiotic-administration"))
            abx_admin_delay = (t_admin - admit) - t_inf
        elif rng.random() < 0.05:
            # suspicion without deterioration: culture + antibiotics, no sepsis
            t_culture = admit + int(rng.integers(0, max(1, los - 1)))
            t_abx = min(t_culture + int(rng.integers(0, 4)), discharge)
            cohort.therapy_events.append(TherapyEvent(pid, t_culture, "culture-order"))
            cohort.therapy_events.append(TherapyEvent(pid, t_abx, "antibiotic-order"))
            cohort.therapy_events.append(
                TherapyEvent(pid, min(t_abx + 1, discharge), "antibiotic-administration")
            )

        if septic:
            p_survive = 0.92 - 0.012 * float(np.clip(abx_admin_delay, 0, 24))
        else:
            p_survive = 0.97
        outcome = OUTCOME_SURVIVED if rng.random() < p_survive else OUTCOME_DIED

        cohort.patients.append(PatientRecord(pid, admit, discharge, demo, outcome))
        truth[pid] = t_inf

    if return_truth:
        return cohort, truth
    return cohort
