"""Hourly binning, imputation, normalization, and censored survival targets.

Each patient's event stream becomes one window per hour of ICU stay. Vitals
(group "clinical") aggregate by within-hour median, labs and demographics by
last observation; gaps forward-fill from prior hours and otherwise fall back
to the schema midpoint with the imputation mask set. Survival targets pair a
window with (tau, event) for a fixed prediction horizon.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cohort import ClinicalEvent
from .schema import FeatureSchema

HORIZONS = (2, 4, 6, 8, 10, 12)
SCORE_START_HOUR = 4  # scoring starts four hours after ICU admission

DATASET_VERSION = 1


class WindowingError(ValueError):
    pass


@dataclass
class HourlyWindow:
    patient_id: str
    hour_index: int
    x: np.ndarray       # float64, length = schema size
    mask: np.ndarray    # bool, True where imputed

    def copy(self) -> "HourlyWindow":
        return HourlyWindow(self.patient_id, self.hour_index, self.x.copy(), self.mask.copy())


@dataclass(frozen=True)
class SurvivalTarget:
    tau: int
    event: bool
    horizon: int

    def __post_init__(self):
        if self.horizon not in HORIZONS:
            raise WindowingError(f"horizon {self.horizon} not in {HORIZONS}")
        if self.event and not 0 < self.tau <= self.horizon:
            raise WindowingError("event targets require 0 < tau <= horizon")
        if not self.event and self.tau != self.horizon + 1:
            raise WindowingError("censored targets require tau = horizon + 1")


def bin_hourly(
    events: list[ClinicalEvent],
    admit: int,
    discharge: int,
    schema: FeatureSchema,
    patient_id: str | None = None,
) -> list[HourlyWindow]:
    """Bin one patient's events into hourly windows over [admit, discharge)."""
    n_hours = discharge - admit
    n_feat = len(schema)
    midpoints = np.asarray(schema.midpoints(), dtype=np.float64)
    is_vital = np.array([e.group == "clinical" for e in schema.entries])

    per_hour: list[dict[int, list[float]]] = [dict() for _ in range(n_hours)]
    pid = patient_id
    for ev in events:
        pid = ev.patient_id
        if ev.feature_id not in schema:
            raise WindowingError(f"unknown feature {ev.feature_id!r}")
        h = ev.time - admit
        if not 0 <= h < n_hours:
            continue
        j = schema.index(ev.feature_id)
        per_hour[h].setdefault(j, []).append(float(ev.value))

    windows = []
    last = midpoints.copy()
    for h in range(n_hours):
        x = last.copy()
        mask = np.ones(n_feat, dtype=bool)  # forward-fill and midpoint both count as imputed
        for j, vals in per_hour[h].items():
            x[j] = float(np.median(vals)) if is_vital[j] else vals[-1]
            mask[j] = False
        windows.append(HourlyWindow(pid or "", h, x, mask))
        last = x
    return windows


def make_targets(
    windows: list[HourlyWindow],
    onset_hour: int | None,
    horizon: int,
) -> list[tuple[HourlyWindow, SurvivalTarget]]:
    """Pair pre-onset windows (from hour 4 onward) with survival targets.

    onset_hour is relative to admission. Windows at or after onset are
    dropped; a septic window gets tau = onset - hour and event = True when
    that gap is within the horizon, otherwise the censored encoding
    tau = horizon + 1, event = False.
    """
    if horizon not in HORIZONS:
        raise WindowingError(f"horizon {horizon} not in {HORIZONS}")
    if onset_hour is not None and onset_hour < SCORE_START_HOUR:
        raise WindowingError(
            f"onset at hour {onset_hour} < {SCORE_START_HOUR}: patient should have been excluded"
        )
    out = []
    for w in windows:
        if w.hour_index < SCORE_START_HOUR:
            continue
        if onset_hour is not None and w.hour_index >= onset_hour:
            continue
        if onset_hour is not None and onset_hour - w.hour_index <= horizon:
            target = SurvivalTarget(onset_hour - w.hour_index, True, horizon)
        else:
            target = SurvivalTarget(horizon + 1, False, horizon)
        out.append((w, target))
    return out


@dataclass
class NormalizationStats:
    mean: np.ndarray
    std: np.ndarray
    split: str = "train"

    def normalize(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.std

    def denormalize(self, z: np.ndarray) -> np.ndarray:
        return z * self.std + self.mean


def fit_normalization(windows: list[HourlyWindow], split: str = "train") -> NormalizationStats:
    """Per-feature mean/sd over training windows; zero variance maps to sd 1."""
    if not windows:
        raise WindowingError("cannot fit normalization on an empty training set")
    data = np.stack([w.x for w in windows])
    mean = data.mean(axis=0)
    std = data.std(axis=0)
    std[std == 0.0] = 1.0
    return NormalizationStats(mean, std, split)


def apply_normalization(
    windows: list[HourlyWindow], stats: NormalizationStats
) -> list[HourlyWindow]:
    return [
        HourlyWindow(w.patient_id, w.hour_index, stats.normalize(w.x), w.mask.copy())
        for w in windows
    ]


# ---------------------------------------------------------------------------
# Persistence: line-delimited numeric file with a header naming features,
# stats as JSON alongside.
# ---------------------------------------------------------------------------

def save_windows(windows: list[HourlyWindow], schema: FeatureSchema, path) -> None:
    ids = schema.identifiers()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["patient_id", "hour_index", *ids, *[f"mask_{i}" for i in ids]])
        for win in windows:
            w.writerow(
                [win.patient_id, win.hour_index]
                + [repr(float(v)) for v in win.x]
                + [int(b) for b in win.mask]
            )


def load_windows(path, schema: FeatureSchema) -> list[HourlyWindow]:
    n = len(schema)
    out = []
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if header[2 : 2 + n] != schema.identifiers():
            raise WindowingError("window file header does not match schema")
        for row in r:
            x = np.array([float(v) for v in row[2 : 2 + n]])
            mask = np.array([bool(int(v)) for v in row[2 + n : 2 + 2 * n]])
            out.append(HourlyWindow(row[0], int(row[1]), x, mask))
    return out


def save_stats(stats: NormalizationStats, path) -> None:
    with open(path, "w") as fh:
        json.dump(
            {
                "version": DATASET_VERSION,
                "split": stats.split,
                "mean": stats.mean.tolist(),
                "std": stats.std.tolist(),
            },
            fh,
        )


def load_stats(path) -> NormalizationStats:
    with open(Path(path)) as fh:
        doc = json.load(fh)
    return NormalizationStats(
        np.array(doc["mean"], dtype=np.float64),
        np.array(doc["std"], dtype=np.float64),
        doc["split"],
    )
