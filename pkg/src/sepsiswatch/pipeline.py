"""End-to-end glue shared by the CLI, the platform simulator, and the
test suite: cohort labeling, exclusion handling, dataset assembly, and
train/test splitting."""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .cohort import Cohort, apply_exclusions
from .labeling import OnsetLabel, label_patient
from .models import PatientSequence, sequence_from_windows
from .schema import FeatureSchema
from .windowing import (
    NormalizationStats,
    apply_normalization,
    bin_hourly,
    fit_normalization,
    make_targets,
)


def label_cohort(cohort: Cohort, schema: FeatureSchema) -> dict[str, OnsetLabel]:
    """Run the onset labeler over every patient."""
    labels = {}
    for p in cohort.patients:
        windows = bin_hourly(
            cohort.events_for(p.patient_id),
            p.icu_admit_time,
            p.icu_discharge_time,
            schema,
            patient_id=p.patient_id,
        )
        labels[p.patient_id] = label_patient(
            windows, cohort.therapy_for(p.patient_id), schema, p.icu_admit_time
        )
    return labels


def onsets_from_labels(
    labels: dict[str, OnsetLabel], criterion: str = "sepsis-3"
) -> dict[str, int | None]:
    """Operative onset per patient under one consensus criterion."""
    if criterion == "sepsis-3":
        return {pid: lab.t_sepsis3 for pid, lab in labels.items()}
    if criterion == "sepsis-cdc":
        return {pid: lab.t_sepsis_cdc for pid, lab in labels.items()}
    raise ValueError(f"unknown criterion {criterion!r}")


def save_labels(labels: dict[str, OnsetLabel], path) -> None:
    Path(path).write_text(
        json.dumps({pid: asdict(lab) for pid, lab in labels.items()}, indent=2)
    )


def load_labels(path) -> dict[str, OnsetLabel]:
    raw = json.loads(Path(path).read_text())
    return {pid: OnsetLabel(**fields) for pid, fields in raw.items()}


def split_patients(
    patient_ids: list[str], test_fraction: float, seed: int
) -> tuple[list[str], list[str]]:
    """Deterministic shuffle split into (train_ids, test_ids)."""
    rng = np.random.default_rng(seed)
    ids = sorted(patient_ids)
    rng.shuffle(ids)
    n_test = int(round(len(ids) * test_fraction))
    return ids[n_test:], ids[:n_test]


def build_dataset(
    cohort: Cohort,
    onsets: dict[str, int | None],
    schema: FeatureSchema,
    horizon: int,
    stats: NormalizationStats | None = None,
) -> tuple[list[PatientSequence], NormalizationStats]:
    """Excluded-cohort hourly sequences with survival targets.

    Normalization is fit on the given cohort's windows when `stats` is
    None (training); pass train-split stats when assembling a test set.
    """
    kept, _ = apply_exclusions(cohort, onsets)
    per_patient = []
    all_windows = []
    for p in kept.patients:
        windows = bin_hourly(
            kept.events_for(p.patient_id),
            p.icu_admit_time,
            p.icu_discharge_time,
            schema,
            patient_id=p.patient_id,
        )
        onset_abs = onsets.get(p.patient_id)
        onset_rel = None if onset_abs is None else onset_abs - p.icu_admit_time
        per_patient.append((p.patient_id, windows, onset_rel))
        all_windows.extend(windows)
    if stats is None:
        stats = fit_normalization(all_windows)
    sequences = []
    for pid, windows, onset_rel in per_patient:
        targets = make_targets(windows, onset_rel, horizon)
        if not targets:
            continue
        normalized = apply_normalization(windows, stats)
        sequences.append(
            sequence_from_windows(
                normalized, targets, pid, horizon, septic=onset_rel is not None
            )
        )
    return sequences, stats
