"""Attributable treatment-effect estimation.

Antibiotic timing relative to onset is binned into four levels; a
propensity network (GPS) models the probability of each level given
pre-antibiotic covariates, an outcome network (ADRF) regresses survival
on [one-hot level, propensity of that level] with isotonic calibration,
and counterfactual policy deltas are summarized over random restarts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import AdamState, Tape, Tensor, adam_step

N_LEVELS = 4
LEVEL_EDGES = (-24.0, -6.0, 0.0, 3.0, 24.0)
GPS_HIDDEN = 32
ADRF_HIDDEN = 32
TRAIN_EPOCHS = 200
TRAIN_LR = 1e-2
TRAIN_L2 = 5e-3
RESTARTS = 50

CRITERIA = ("sepsis-3", "sepsis-cdc")


class TreatmentError(ValueError):
    pass


class DegenerateDataError(TreatmentError):
    """Raised when the sample does not support the requested fit."""


def assign_level(t_onset: float, t_abx: float) -> int | None:
    """Map (antibiotic time - onset time) to a treatment level 1..4.

    Intervals are [-24, -6), [-6, 0), [0, 3), and [3, 24]; only the last
    one is right-closed. Deltas outside [-24, 24] return None (the sample
    is excluded from effect estimation).
    """
    delta = float(t_abx) - float(t_onset)
    if delta < LEVEL_EDGES[0] or delta > LEVEL_EDGES[-1]:
        return None
    for level in range(1, N_LEVELS):
        if delta < LEVEL_EDGES[level]:
            return level
    return N_LEVELS


@dataclass
class PolicySample:
    """One patient's contribution: pre-antibiotic covariates, the level
    actually received, and the binary outcome (1 = survived, not hospice)."""

    patient_id: str
    covariates: np.ndarray
    actual_level: int
    outcome: int

    def __post_init__(self):
        self.covariates = np.asarray(self.covariates, dtype=np.float64)
        if self.covariates.ndim != 1:
            raise TreatmentError("covariates must be a flat vector")
        if self.actual_level not in range(1, N_LEVELS + 1):
            raise TreatmentError(f"actual_level must be 1..{N_LEVELS}")
        if self.outcome not in (0, 1):
            raise TreatmentError("outcome must be 0 or 1")


@dataclass
class TreatmentPolicy:
    criterion: str
    level: int

    def __post_init__(self):
        if self.criterion not in CRITERIA:
            raise TreatmentError(f"criterion must be one of {CRITERIA}")
        if self.level not in range(1, N_LEVELS + 1):
            raise TreatmentError(f"level must be 1..{N_LEVELS}")


@dataclass
class EffectEstimate:
    delta_median: float
    delta_iqr: tuple[float, float]
    deltas: np.ndarray
    restarts: int = RESTARTS

    def __post_init__(self):
        self.deltas = np.asarray(self.deltas, dtype=np.float64)
        if len(self.deltas) != self.restarts:
            raise TreatmentError(
                f"expected {self.restarts} restart deltas, got {len(self.deltas)}"
            )
        lo, hi = self.delta_iqr
        if not (lo - 1e-12 <= self.delta_median <= hi + 1e-12):
            raise TreatmentError("median must lie within the IQR")


def _stack(samples: list[PolicySample]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    x = np.stack([s.covariates for s in samples])
    levels = np.array([s.actual_level for s in samples], dtype=int)
    y = np.array([s.outcome for s in samples], dtype=np.float64)
    return x, levels, y


# ---------------------------------------------------------------------------
# GPS network: covariates -> probability over the four levels
# ---------------------------------------------------------------------------

@dataclass
class GpsNetwork:
    w1: Tensor
    b1: Tensor
    w2: Tensor
    b2: Tensor

    def params(self) -> list[Tensor]:
        return [self.w1, self.b1, self.w2, self.b2]

    def _logits(self, x: Tensor) -> Tensor:
        h = ad.tanh(x @ self.w1 + self.b1)
        return h @ self.w2 + self.b2

    def probabilities(self, covariates: np.ndarray) -> np.ndarray:
        """(n, 4) level probabilities; rows sum to one."""
        x = np.atleast_2d(np.asarray(covariates, dtype=np.float64))
        with Tape():
            p = ad.softmax(self._logits(Tensor(x)))
        return p.data


def _init_gps(dim: int, rng: np.random.Generator) -> GpsNetwork:
    s1 = 1.0 / np.sqrt(dim)
    s2 = 1.0 / np.sqrt(GPS_HIDDEN)
    return GpsNetwork(
        w1=Tensor(rng.uniform(-s1, s1, (dim, GPS_HIDDEN))),
        b1=Tensor(np.zeros(GPS_HIDDEN)),
        w2=Tensor(rng.uniform(-s2, s2, (GPS_HIDDEN, N_LEVELS))),
        b2=Tensor(np.zeros(N_LEVELS)),
    )


def fit_gps(samples: list[PolicySample], seed: int = 0) -> GpsNetwork:
    """Cross-entropy fit of the multi-class propensity network."""
    if not samples:
        raise DegenerateDataError("no samples")
    x, levels, _ = _stack(samples)
    if len(np.unique(levels)) < 2:
        raise DegenerateDataError("GPS fit needs at least two distinct levels")
    rng = np.random.default_rng(seed)
    net = _init_gps(x.shape[1], rng)
    onehot = np.zeros((len(samples), N_LEVELS))
    onehot[np.arange(len(samples)), levels - 1] = 1.0
    target = Tensor(onehot)
    xt = Tensor(x)
    state = AdamState(lr=TRAIN_LR)
    eps = Tensor(np.float64(1e-12))
    scale = Tensor(np.float64(1.0 - 2e-12))
    for _ in range(TRAIN_EPOCHS):
        with Tape() as tape:
            p = ad.softmax(net._logits(xt))
            clamped = p * scale + eps
            loss = ad.neg(ad.mean(ad.tensor_sum(target * ad.log(clamped), axis=1)))
            for prm in net.params():
                prm.zero_grad()
            tape.backward(loss)
        grads = [prm.grad for prm in net.params()]
        for prm, g in ((net.w1, grads[0]), (net.w2, grads[2])):
            g += 2.0 * TRAIN_L2 * prm.data
        adam_step(net.params(), grads, state)
    return net


# ---------------------------------------------------------------------------
# isotonic regression (pool-adjacent-violators)
# ---------------------------------------------------------------------------

def pava(values, weights) -> np.ndarray:
    """Weighted least-squares isotonic fit: the nondecreasing sequence
    minimizing sum w_i (out_i - values_i)^2."""
    values = np.asarray(values, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if values.shape != weights.shape or values.ndim != 1:
        raise TreatmentError("values and weights must be flat and aligned")
    if len(values) == 0:
        return np.array([])
    if np.any(weights <= 0):
        raise TreatmentError("weights must be positive")
    # blocks of (mean, weight, count), merged while out of order
    means, wts, counts = [], [], []
    for v, w in zip(values, weights):
        means.append(v)
        wts.append(w)
        counts.append(1)
        while len(means) > 1 and means[-2] > means[-1]:
            v2, w2, c2 = means.pop(), wts.pop(), counts.pop()
            means[-1] = (means[-1] * wts[-1] + v2 * w2) / (wts[-1] + w2)
            wts[-1] += w2
            counts[-1] += c2
    return np.repeat(means, counts)


# ---------------------------------------------------------------------------
# ADRF network: [one-hot level, GPS(level | C)] -> calibrated survival
# ---------------------------------------------------------------------------

@dataclass
class AdrfModel:
    w1: Tensor
    b1: Tensor
    w2: Tensor
    b2: Tensor
    calib_raw: np.ndarray = field(default_factory=lambda: np.array([]))
    calib_fit: np.ndarray = field(default_factory=lambda: np.array([]))
    constant: bool = False  # all training outcomes identical

    def params(self) -> list[Tensor]:
        return [self.w1, self.b1, self.w2, self.b2]

    def _raw(self, inputs: np.ndarray) -> np.ndarray:
        with Tape():
            out = self._taped_raw(Tensor(np.atleast_2d(inputs)))
        return out.data[:, 0]

    def _taped_raw(self, x: Tensor) -> Tensor:
        h = ad.tanh(x @ self.w1 + self.b1)
        return ad.sigmoid(h @ self.w2 + self.b2)

    def predict(self, levels: np.ndarray, gps_scalar: np.ndarray) -> np.ndarray:
        """Calibrated survival estimate for (level, propensity) pairs."""
        inputs = _adrf_inputs(np.asarray(levels, dtype=int), np.asarray(gps_scalar))
        raw = self._raw(inputs)
        if self.constant or len(self.calib_raw) == 0:
            return raw
        return np.interp(raw, self.calib_raw, self.calib_fit)


def _adrf_inputs(levels: np.ndarray, gps_scalar: np.ndarray) -> np.ndarray:
    onehot = np.zeros((len(levels), N_LEVELS))
    onehot[np.arange(len(levels)), levels - 1] = 1.0
    return np.concatenate([onehot, gps_scalar[:, None]], axis=1)


def fit_adrf(samples: list[PolicySample], gps: GpsNetwork, seed: int = 0) -> AdrfModel:
    """Fit the outcome network then an isotonic calibration map on the
    (sorted raw prediction, outcome) pairs."""
    if not samples:
        raise DegenerateDataError("no samples")
    x, levels, y = _stack(samples)
    probs = gps.probabilities(x)
    gps_scalar = probs[np.arange(len(samples)), levels - 1]
    inputs = _adrf_inputs(levels, gps_scalar)

    rng = np.random.default_rng(seed)
    dim = inputs.shape[1]
    s1 = 1.0 / np.sqrt(dim)
    s2 = 1.0 / np.sqrt(ADRF_HIDDEN)
    model = AdrfModel(
        w1=Tensor(rng.uniform(-s1, s1, (dim, ADRF_HIDDEN))),
        b1=Tensor(np.zeros(ADRF_HIDDEN)),
        w2=Tensor(rng.uniform(-s2, s2, (ADRF_HIDDEN, 1))),
        b2=Tensor(np.zeros(1)),
    )
    xt = Tensor(inputs)
    yt = Tensor(y[:, None])
    one = Tensor(np.float64(1.0))
    eps = Tensor(np.float64(1e-12))
    scale = Tensor(np.float64(1.0 - 2e-12))
    state = AdamState(lr=TRAIN_LR)
    for _ in range(TRAIN_EPOCHS):
        with Tape() as tape:
            p = model._taped_raw(xt) * scale + eps
            loss = ad.neg(
                ad.mean(yt * ad.log(p) + (one - yt) * ad.log(one - p))
            )
            for prm in model.params():
                prm.zero_grad()
            tape.backward(loss)
        grads = [prm.grad for prm in model.params()]
        for prm, g in ((model.w1, grads[0]), (model.w2, grads[2])):
            g += 2.0 * TRAIN_L2 * prm.data
        adam_step(model.params(), grads, state)

    if len(np.unique(y)) < 2:
        model.constant = True
        return model

    raw = model._raw(inputs)
    order = np.argsort(raw, kind="mergesort")
    fitted = pava(y[order], np.ones(len(y)))
    # collapse to unique raw scores so interpolation is well defined
    raw_sorted = raw[order]
    uniq, inverse = np.unique(raw_sorted, return_inverse=True)
    avg = np.zeros(len(uniq))
    cnt = np.zeros(len(uniq))
    np.add.at(avg, inverse, fitted)
    np.add.at(cnt, inverse, 1.0)
    model.calib_raw = uniq
    model.calib_fit = avg / cnt
    return model


# ---------------------------------------------------------------------------
# policy effects
# ---------------------------------------------------------------------------

def policy_delta(
    policy: TreatmentPolicy,
    samples: list[PolicySample],
    gps: GpsNetwork,
    adrf: AdrfModel,
) -> float:
    """Mean counterfactual-minus-actual calibrated survival under one fit."""
    if not samples:
        raise DegenerateDataError("no samples")
    x, levels, _ = _stack(samples)
    probs = gps.probabilities(x)
    n = len(samples)
    cf_levels = np.full(n, policy.level, dtype=int)
    cf = adrf.predict(cf_levels, probs[np.arange(n), policy.level - 1])
    actual = adrf.predict(levels, probs[np.arange(n), levels - 1])
    return float(np.mean(cf - actual))


def estimate_effect(
    policy: TreatmentPolicy,
    samples: list[PolicySample],
    restarts: int = RESTARTS,
    seed: int = 0,
    fit_samples: list[PolicySample] | None = None,
) -> EffectEstimate:
    """Refit the GPS/ADRF pipeline `restarts` times from fresh random
    initializations and summarize the policy delta as median [IQR].

    `fit_samples` defaults to `samples`; passing a separate training set
    keeps the fitted pipeline fixed while the evaluation cohort varies.
    """
    training = samples if fit_samples is None else fit_samples
    root = np.random.default_rng(seed)
    restart_seeds = root.integers(0, 2**31 - 1, size=restarts)
    deltas = np.empty(restarts)
    for i, rs in enumerate(restart_seeds):
        gps = fit_gps(training, seed=int(rs))
        adrf = fit_adrf(training, gps, seed=int(rs) + 1)
        deltas[i] = policy_delta(policy, samples, gps, adrf)
    q25, median, q75 = np.percentile(deltas, [25, 50, 75])
    return EffectEstimate(
        delta_median=float(median),
        delta_iqr=(float(q25), float(q75)),
        deltas=deltas,
        restarts=restarts,
    )


def policy_samples_from_cohort(cohort, onsets: dict, schema) -> list[PolicySample]:
    """One sample per septic patient with antibiotics inside [-24, 24]h of
    onset: covariates are the last hourly window strictly before the first
    antibiotic administration."""
    from .cohort import OUTCOME_SURVIVED
    from .windowing import bin_hourly

    samples = []
    for p in cohort.patients:
        onset = onsets.get(p.patient_id)
        if onset is None:
            continue
        admin_times = [
            e.time
            for e in cohort.therapy_for(p.patient_id)
            if e.kind == "antibiotic-administration"
        ]
        if not admin_times:
            continue
        t_abx = min(admin_times)
        level = assign_level(onset, t_abx)
        if level is None:
            continue
        cov_hour = min(t_abx - 1, p.icu_discharge_time - 1)
        if cov_hour < p.icu_admit_time:
            continue
        windows = bin_hourly(
            [e for e in cohort.events_for(p.patient_id) if e.time <= cov_hour],
            p.icu_admit_time,
            cov_hour + 1,
            schema,
            patient_id=p.patient_id,
        )
        samples.append(
            PolicySample(
                patient_id=p.patient_id,
                covariates=windows[-1].x,
                actual_level=level,
                outcome=int(p.outcome == OUTCOME_SURVIVED),
            )
        )
    return samples


def format_effect_table(rows: list[tuple[str, int, EffectEstimate]]) -> str:
    """criterion x interval table of median [IQR] percent improvement."""
    intervals = {
        1: "[-24, -6)",
        2: "[-6, 0)",
        3: "[0, 3)",
        4: "[3, 24]",
    }
    lines = [f"{'criterion':<12} {'interval':<12} {'median [IQR] %':<24}"]
    for criterion, level, est in rows:
        lo, hi = est.delta_iqr
        cell = f"{100 * est.delta_median:.1f} [{100 * lo:.1f}, {100 * hi:.1f}]"
        lines.append(f"{criterion:<12} {intervals[level]:<12} {cell:<24}")
    return "\n".join(lines)
