"""Consensus-criteria sepsis onset labeling.

Produces, per patient: the suspicion-of-infection time from paired
antibiotic/culture orders, the organ-dysfunction times from hourly SOFA and
simplified eSOFA criteria, and the combined Sepsis-3 / CDC onset timestamps.

Conventions (documented divergences from unpublished site rules):
- SOFA deterioration looks back over hourly bins, inclusive of h-6 and
  exclusive of h.
- The suspicion/dysfunction pairing window is strict: timestamps exactly at
  t_dysfunction + 24 or t_dysfunction - 12 do not qualify.
- The cardiovascular sub-score collapses vasopressor dose tiers to a single
  flag (score 2 when on pressors, else MAP-based 0/1).
- The exact eSOFA thresholds in use at any given site are not public; the
  six-item simplified list below is a documented stand-in.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cohort import TherapyEvent
from .schema import FeatureSchema
from .windowing import HourlyWindow

ABX_TO_CULTURE_HOURS = 24   # antibiotics first: culture must follow within 24h
CULTURE_TO_ABX_HOURS = 72   # culture first: antibiotics must follow within 72h
PAIRING_BEFORE_HOURS = 12   # suspicion may precede dysfunction by < 12h
PAIRING_AFTER_HOURS = 24    # suspicion may follow dysfunction by < 24h
SOFA_LOOKBACK_HOURS = 6
SOFA_DELTA = 2

SOFA_COMPONENTS = ("respiration", "coagulation", "liver", "cardiovascular", "cns", "renal")


@dataclass
class SofaTimeline:
    patient_id: str
    hourly_total: list[int]
    hourly_components: list[tuple[int, int, int, int, int, int]]
    clamped_hours: list[int]  # hours where an input had to be clamped into range


@dataclass
class OnsetLabel:
    """All five onset-related timestamps, absolute hours; None = never."""

    t_suspicion: int | None = None
    t_sofa: int | None = None
    t_esofa: int | None = None
    t_sepsis3: int | None = None
    t_sepsis_cdc: int | None = None


def _resp_score(pf_ratio: float) -> int:
    if pf_ratio < 100:
        return 4
    if pf_ratio < 200:
        return 3
    if pf_ratio < 300:
        return 2
    if pf_ratio < 400:
        return 1
    return 0


def _coag_score(platelets: float) -> int:
    if platelets < 20:
        return 4
    if platelets < 50:
        return 3
    if platelets < 100:
        return 2
    if platelets < 150:
        return 1
    return 0


def _liver_score(bilirubin: float) -> int:
    if bilirubin >= 12.0:
        return 4
    if bilirubin >= 6.0:
        return 3
    if bilirubin >= 2.0:
        return 2
    if bilirubin >= 1.2:
        return 1
    return 0


def _cardio_score(mean_arterial_pressure: float, on_vasopressor: bool) -> int:
    if on_vasopressor:
        return 2
    return 1 if mean_arterial_pressure < 70 else 0


def _cns_score(gcs: float) -> int:
    if gcs < 6:
        return 4
    if gcs <= 9:
        return 3
    if gcs <= 12:
        return 2
    if gcs <= 14:
        return 1
    return 0


def _renal_score(creatinine: float) -> int:
    if creatinine >= 5.0:
        return 4
    if creatinine >= 3.5:
        return 3
    if creatinine >= 2.0:
        return 2
    if creatinine >= 1.2:
        return 1
    return 0


def compute_sofa(windows: list[HourlyWindow], schema: FeatureSchema) -> SofaTimeline:
    """Hourly six-component SOFA from imputed raw-scale windows."""
    idx = {k: schema.index(k) for k in
           ("pf_ratio", "platelets", "bilirubin", "map", "vasopressor", "gcs", "creatinine")}
    ranges = {k: (schema.entries[i].lo, schema.entries[i].hi) for k, i in idx.items()}

    totals, comps, clamped = [], [], []
    pid = windows[0].patient_id if windows else ""
    for w in windows:
        vals = {}
        hit = False
        for k, i in idx.items():
            v = float(w.x[i])
            lo, hi = ranges[k]
            cv = float(np.clip(v, lo, hi))
            hit = hit or cv != v
            vals[k] = cv
        if hit:
            clamped.append(w.hour_index)
        c = (
            _resp_score(vals["pf_ratio"]),
            _coag_score(vals["platelets"]),
            _liver_score(vals["bilirubin"]),
            _cardio_score(vals["map"], vals["vasopressor"] >= 0.5),
            _cns_score(vals["gcs"]),
            _renal_score(vals["creatinine"]),
        )
        comps.append(c)
        totals.append(sum(c))
    return SofaTimeline(pid, totals, comps, clamped)


def detect_suspicion(events: list[TherapyEvent]) -> int | None:
    """Earliest timestamp of a qualifying antibiotic/culture order pair."""
    abx = sorted(e.time for e in events if e.kind == "antibiotic-order")
    cultures = sorted(e.time for e in events if e.kind == "culture-order")
    best = None
    for a in abx:
        for c in cultures:
            if a <= c <= a + ABX_TO_CULTURE_HOURS or c <= a <= c + CULTURE_TO_ABX_HOURS:
                t = min(a, c)
                if best is None or t < best:
                    best = t
    return best


def detect_tsofa(timeline: SofaTimeline) -> int | None:
    """Earliest hour with a 2-point SOFA rise over the prior 6 hourly bins.

    Returns an hour index relative to the start of the timeline.
    """
    totals = timeline.hourly_total
    for h in range(1, len(totals)):
        lo = max(0, h - SOFA_LOOKBACK_HOURS)
        if totals[h] - min(totals[lo:h]) >= SOFA_DELTA:
            return h
    return None


def detect_tesofa(windows: list[HourlyWindow], schema: FeatureSchema) -> int | None:
    """Earliest hour any simplified eSOFA criterion fires.

    Baselines are the hour-0 values of the relevant labs (the first value the
    pipeline observes, possibly the imputation fallback).
    """
    if not windows:
        return None
    gi = schema.index
    vaso = np.array([w.x[gi("vasopressor")] >= 0.5 for w in windows])
    vent = np.array([w.x[gi("mech_vent")] >= 0.5 for w in windows])
    lactate = np.array([w.x[gi("lactate")] for w in windows])
    creat = np.array([w.x[gi("creatinine")] for w in windows])
    bili = np.array([w.x[gi("bilirubin")] for w in windows])
    plat = np.array([w.x[gi("platelets")] for w in windows])

    creat0, bili0, plat0 = creat[0], bili[0], plat[0]
    for h in range(len(windows)):
        vaso_init = vaso[h] and (h == 0 or not vaso[h - 1])
        vent_init = vent[h] and (h == 0 or not vent[h - 1])
        if vaso_init or vent_init:
            return h
        if lactate[h] >= 2.0:
            return h
        if creat[h] >= 2.0 * creat0:
            return h
        if bili[h] >= 2.0 and bili[h] >= 2.0 * bili0:
            return h
        if plat0 >= 100 and plat[h] < 100 and plat[h] <= 0.5 * plat0:
            return h
    return None


def assign_onset(t_suspicion: int | None, t_event: int | None) -> int | None:
    """Combine suspicion and organ-dysfunction times into an onset time.

    Both must be present and satisfy
    t_event - 12 < t_suspicion < t_event + 24 (strict); the onset is then the
    earlier of the two.
    """
    if t_suspicion is None or t_event is None:
        return None
    if t_event - PAIRING_BEFORE_HOURS < t_suspicion < t_event + PAIRING_AFTER_HOURS:
        return min(t_suspicion, t_event)
    return None


def label_patient(
    windows: list[HourlyWindow],
    therapy: list[TherapyEvent],
    schema: FeatureSchema,
    admit: int,
) -> OnsetLabel:
    """All five onset timestamps for one patient, in absolute hours."""
    timeline = compute_sofa(windows, schema)
    t_susp = detect_suspicion(therapy)
    h_sofa = detect_tsofa(timeline)
    h_esofa = detect_tesofa(windows, schema)
    t_sofa = admit + h_sofa if h_sofa is not None else None
    t_esofa = admit + h_esofa if h_esofa is not None else None
    return OnsetLabel(
        t_suspicion=t_susp,
        t_sofa=t_sofa,
        t_esofa=t_esofa,
        t_sepsis3=assign_onset(t_susp, t_sofa),
        t_sepsis_cdc=assign_onset(t_susp, t_esofa),
    )
