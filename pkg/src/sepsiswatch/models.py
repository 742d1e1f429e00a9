"""Recurrent survival models: stacked GRU -> feedforward -> Weibull-Cox
hazard head, plus the logistic-regression, direct-WCPH, and FFNN-WCPH
baselines, and their shared censored-likelihood training loop.

All models are trained end-to-end on the hourly (x, tau, e) triples with the
same Adam settings; the hazard parameters lambda and nu are stored as
logarithms so positivity is structural.
"""

from __future__ import annotations

import math
import json
from pathlib import Path
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import AdamState, NonFiniteError, Tape, Tensor, adam_step
from .windowing import SCORE_START_HOUR

HIDDEN_SIZE = 100

MODEL_KINDS = ("gru-wcph", "logistic-regression", "wcph-direct", "ffnn-wcph")


class ModelError(ValueError):
    pass


class TrainingDivergenceError(RuntimeError):
    pass


def _uniform_init(rng: np.random.Generator, shape: tuple, fan_in: int) -> Tensor:
    bound = 1.0 / math.sqrt(max(fan_in, 1))
    return Tensor(rng.uniform(-bound, bound, size=shape))


# ---------------------------------------------------------------------------
# GRU
# ---------------------------------------------------------------------------

@dataclass
class GruLayerParams:
    wz: Tensor
    uz: Tensor
    bz: Tensor
    wr: Tensor
    ur: Tensor
    br: Tensor
    wh: Tensor
    uh: Tensor
    bh: Tensor

    @classmethod
    def init(cls, rng: np.random.Generator, input_dim: int, hidden: int) -> "GruLayerParams":
        def w():
            return _uniform_init(rng, (input_dim, hidden), input_dim)

        def u():
            return _uniform_init(rng, (hidden, hidden), hidden)

        def b():
            return Tensor(np.zeros(hidden))

        return cls(w(), u(), b(), w(), u(), b(), w(), u(), b())

    def weights(self) -> list[Tensor]:
        return [self.wz, self.uz, self.wr, self.ur, self.wh, self.uh]

    def all_params(self) -> list[Tensor]:
        return [self.wz, self.uz, self.bz, self.wr, self.ur, self.br, self.wh, self.uh, self.bh]


def gru_step(p: GruLayerParams, xt: Tensor, h: Tensor) -> Tensor:
    """One recurrence step: h' = (1-z) * h + z * h_candidate."""
    z = ad.sigmoid(xt @ p.wz + h @ p.uz + p.bz)
    r = ad.sigmoid(xt @ p.wr + h @ p.ur + p.br)
    cand = ad.tanh(xt @ p.wh + (r * h) @ p.uh + p.bh)
    one = Tensor(1.0)
    return (one - z) * h + z * cand


def gru_forward(layers: list[GruLayerParams], xs: list[Tensor]) -> list[Tensor]:
    """Run stacked GRU layers over a time-major sequence of (B, D) tensors.

    Returns the top layer's hidden state at every hour. Initial hidden states
    are zero. A non-finite activation raises with the offending hour.
    """
    batch = xs[0].data.shape[0]
    hidden = layers[0].uz.data.shape[0]
    states = [Tensor(np.zeros((batch, hidden))) for _ in layers]
    outputs = []
    for t, xt in enumerate(xs):
        inp = xt
        try:
            for li, layer in enumerate(layers):
                states[li] = gru_step(layer, inp, states[li])
                inp = states[li]
        except NonFiniteError as err:
            raise TrainingDivergenceError(f"non-finite GRU activation at hour {t}") from err
        outputs.append(states[-1])
    return outputs


# ---------------------------------------------------------------------------
# Weibull-Cox head
# ---------------------------------------------------------------------------

@dataclass
class WcphHead:
    beta: Tensor        # (F, 1)
    log_lambda: Tensor  # scalar
    log_nu: Tensor      # scalar

    @classmethod
    def init(cls, rng: np.random.Generator, dim: int, lam_init: float = 1.0) -> "WcphHead":
        return cls(
            _uniform_init(rng, (dim, 1), dim),
            Tensor(math.log(max(lam_init, 1e-6))),
            Tensor(0.0),
        )

    @property
    def lam(self) -> float:
        return float(np.exp(self.log_lambda.data))

    @property
    def nu(self) -> float:
        return float(np.exp(self.log_nu.data))

    def linear_predictor(self, f: np.ndarray) -> np.ndarray:
        return np.asarray(f) @ self.beta.data[:, 0]

    def hazard(self, f: np.ndarray, t: float) -> float:
        """(nu/lam) (t/lam)^(nu-1) exp(beta.f); defined for t > 0."""
        if t <= 0:
            raise ModelError(f"hazard is defined for t > 0, got {t}")
        lam, nu = self.lam, self.nu
        eta = float(self.linear_predictor(np.atleast_1d(np.asarray(f, dtype=float)).reshape(-1)))
        return (nu / lam) * (t / lam) ** (nu - 1.0) * math.exp(eta)

    def survival(self, f: np.ndarray, tau: float) -> float:
        """S(tau) = exp(-(tau/lam)^nu exp(beta.f)); S(0) = 1."""
        if tau < 0:
            raise ModelError(f"survival is defined for tau >= 0, got {tau}")
        if tau == 0:
            return 1.0
        lam, nu = self.lam, self.nu
        eta = float(self.linear_predictor(np.atleast_1d(np.asarray(f, dtype=float)).reshape(-1)))
        return math.exp(-((tau / lam) ** nu) * math.exp(eta))

    def risk(self, f: np.ndarray, horizon: float) -> float:
        return 1.0 - self.survival(f, horizon)

    def params(self) -> list[Tensor]:
        return [self.beta, self.log_lambda, self.log_nu]


def wcph_taped_loss(
    head: WcphHead,
    feats: Tensor,
    tau: np.ndarray,
    event: np.ndarray,
    valid: np.ndarray,
    reduction: str = "mean",
) -> Tensor:
    """Negative log-likelihood over valid windows, on the tape.

    Per-window contribution is -[e log h(tau) - Lambda(tau)] with
    Lambda(tau) = (tau/lam)^nu exp(beta.f). Invalid (padded) rows are masked
    out; their tau values must still be positive.
    """
    eta = feats @ head.beta                               # (N, 1)
    log_tau = Tensor(np.log(tau).reshape(-1, 1))
    u = log_tau - head.log_lambda                         # log(tau) - log(lam)
    nu = ad.exp(head.log_nu)
    cumhaz = ad.exp(nu * u + eta)
    log_h = head.log_nu + (nu - Tensor(1.0)) * u - head.log_lambda + eta
    e = Tensor(event.reshape(-1, 1).astype(np.float64))
    contrib = cumhaz - e * log_h
    masked = contrib * Tensor(valid.reshape(-1, 1).astype(np.float64))
    total = ad.tensor_sum(masked)
    if reduction == "sum":
        return total
    return total * Tensor(1.0 / max(int(valid.sum()), 1))


def regularization_term(weights: list[Tensor], l1: float, l2: float) -> Tensor:
    """L2 + L1 penalty over weight matrices (biases and log-params excluded)."""
    total = Tensor(0.0)
    for w in weights:
        if l2:
            total = total + Tensor(l2) * ad.tensor_sum(w * w)
        if l1:
            total = total + Tensor(l1) * ad.tensor_sum(ad.absolute(w))
    return total


# ---------------------------------------------------------------------------
# model definitions
# ---------------------------------------------------------------------------

class GruHazardModel:
    """2-layer stacked GRU -> tanh feedforward layer -> Weibull-Cox head."""

    kind = "gru-wcph"
    recurrent = True

    def __init__(self, input_dim: int, hidden: int = HIDDEN_SIZE, seed: int = 0,
                 lam_init: float = 1.0):
        rng = np.random.default_rng(seed)
        self.input_dim = input_dim
        self.hidden = hidden
        self.gru_layers = [
            GruLayerParams.init(rng, input_dim, hidden),
            GruLayerParams.init(rng, hidden, hidden),
        ]
        self.w_f = _uniform_init(rng, (hidden, hidden), hidden)
        self.b_f = Tensor(np.zeros(hidden))
        self.head = WcphHead.init(rng, hidden, lam_init)

    def params(self) -> list[Tensor]:
        out = []
        for layer in self.gru_layers:
            out.extend(layer.all_params())
        out.extend([self.w_f, self.b_f])
        out.extend(self.head.params())
        return out

    def weights(self) -> list[Tensor]:
        out = []
        for layer in self.gru_layers:
            out.extend(layer.weights())
        out.append(self.w_f)
        out.append(self.head.beta)
        return out

    def named_params(self) -> dict[str, Tensor]:
        out = {}
        for i, layer in enumerate(self.gru_layers):
            for name in ("wz", "uz", "bz", "wr", "ur", "br", "wh", "uh", "bh"):
                out[f"gru{i}.{name}"] = getattr(layer, name)
        out["ffnn.w"] = self.w_f
        out["ffnn.b"] = self.b_f
        out["head.beta"] = self.head.beta
        out["head.log_lambda"] = self.head.log_lambda
        out["head.log_nu"] = self.head.log_nu
        return out

    def representations(self, xs: list[Tensor]) -> list[Tensor]:
        """f(x_t): feedforward output on top of the GRU stack, per hour."""
        hs = gru_forward(self.gru_layers, xs)
        return [ad.tanh(h @ self.w_f + self.b_f) for h in hs]

    def risk_sequence(self, x_seq: np.ndarray, horizon: float) -> np.ndarray:
        """Risk score for every hour of one patient sequence (H, D)."""
        if len(x_seq) < 1:
            raise ModelError("risk_sequence needs at least one window")
        xs = [Tensor(x_seq[t : t + 1]) for t in range(len(x_seq))]
        feats = self.representations(xs)
        return np.array([self.head.risk(f.data[0], horizon) for f in feats])

    def risk_score(self, x_seq: np.ndarray, horizon: float) -> float:
        """Risk at the final hour of the sequence."""
        return float(self.risk_sequence(x_seq, horizon)[-1])


class LogisticModel:
    kind = "logistic-regression"
    recurrent = False

    def __init__(self, input_dim: int, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.input_dim = input_dim
        self.w = _uniform_init(rng, (input_dim, 1), input_dim)
        self.b = Tensor(0.0)

    def params(self) -> list[Tensor]:
        return [self.w, self.b]

    def weights(self) -> list[Tensor]:
        return [self.w]

    def named_params(self) -> dict[str, Tensor]:
        return {"lr.w": self.w, "lr.b": self.b}

    def scores(self, x: np.ndarray) -> np.ndarray:
        z = x @ self.w.data[:, 0] + float(self.b.data)
        return 1.0 / (1.0 + np.exp(-z))

    def risk_sequence(self, x_seq: np.ndarray, horizon: float) -> np.ndarray:
        return self.scores(x_seq)

    def risk_score(self, x_seq: np.ndarray, horizon: float) -> float:
        return float(self.scores(x_seq[-1:])[0])


class DirectWcphModel:
    """Weibull-Cox head fit directly on per-window features (no network)."""

    kind = "wcph-direct"
    recurrent = False

    def __init__(self, input_dim: int, seed: int = 0, lam_init: float = 1.0):
        rng = np.random.default_rng(seed)
        self.input_dim = input_dim
        self.head = WcphHead.init(rng, input_dim, lam_init)

    def params(self) -> list[Tensor]:
        return self.head.params()

    def weights(self) -> list[Tensor]:
        return [self.head.beta]

    def named_params(self) -> dict[str, Tensor]:
        return {
            "head.beta": self.head.beta,
            "head.log_lambda": self.head.log_lambda,
            "head.log_nu": self.head.log_nu,
        }

    def features(self, x: np.ndarray) -> np.ndarray:
        return x

    def risk_sequence(self, x_seq: np.ndarray, horizon: float) -> np.ndarray:
        return np.array([self.head.risk(x, horizon) for x in x_seq])

    def risk_score(self, x_seq: np.ndarray, horizon: float) -> float:
        return float(self.head.risk(x_seq[-1], horizon))


class FfnnWcphModel:
    """Two 100-unit tanh layers feeding a Weibull-Cox head."""

    kind = "ffnn-wcph"
    recurrent = False

    def __init__(self, input_dim: int, hidden: int = HIDDEN_SIZE, seed: int = 0,
                 lam_init: float = 1.0):
        rng = np.random.default_rng(seed)
        self.input_dim = input_dim
        self.hidden = hidden
        self.w1 = _uniform_init(rng, (input_dim, hidden), input_dim)
        self.b1 = Tensor(np.zeros(hidden))
        self.w2 = _uniform_init(rng, (hidden, hidden), hidden)
        self.b2 = Tensor(np.zeros(hidden))
        self.head = WcphHead.init(rng, hidden, lam_init)

    def params(self) -> list[Tensor]:
        return [self.w1, self.b1, self.w2, self.b2, *self.head.params()]

    def weights(self) -> list[Tensor]:
        return [self.w1, self.w2, self.head.beta]

    def named_params(self) -> dict[str, Tensor]:
        return {
            "ffnn.w1": self.w1,
            "ffnn.b1": self.b1,
            "ffnn.w2": self.w2,
            "ffnn.b2": self.b2,
            "head.beta": self.head.beta,
            "head.log_lambda": self.head.log_lambda,
            "head.log_nu": self.head.log_nu,
        }

    def taped_features(self, x: Tensor) -> Tensor:
        h1 = ad.tanh(x @ self.w1 + self.b1)
        return ad.tanh(h1 @ self.w2 + self.b2)

    def features(self, x: np.ndarray) -> np.ndarray:
        h1 = np.tanh(x @ self.w1.data + self.b1.data)
        return np.tanh(h1 @ self.w2.data + self.b2.data)

    def risk_sequence(self, x_seq: np.ndarray, horizon: float) -> np.ndarray:
        feats = self.features(x_seq)
        return np.array([self.head.risk(f, horizon) for f in feats])

    def risk_score(self, x_seq: np.ndarray, horizon: float) -> float:
        return float(self.risk_sequence(x_seq[-1:], horizon)[0])


def build_model(kind: str, input_dim: int, hidden: int = HIDDEN_SIZE, seed: int = 0,
                lam_init: float = 1.0):
    if kind == "gru-wcph":
        return GruHazardModel(input_dim, hidden, seed, lam_init)
    if kind == "logistic-regression":
        return LogisticModel(input_dim, seed)
    if kind == "wcph-direct":
        return DirectWcphModel(input_dim, seed, lam_init)
    if kind == "ffnn-wcph":
        return FfnnWcphModel(input_dim, hidden, seed, lam_init)
    raise ModelError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")


# ---------------------------------------------------------------------------
# training data containers and batch assembly
# ---------------------------------------------------------------------------

@dataclass
class PatientSequence:
    """One patient's normalized windows plus per-hour survival targets.

    Rows run from hour 0 to the last scored hour (exclusive of onset). valid
    marks rows that carry a training target (hour >= 4, pre-onset).
    """

    patient_id: str
    x: np.ndarray        # (H, D)
    tau: np.ndarray      # (H,) positive everywhere; padded rows use horizon+1
    event: np.ndarray    # (H,) bool
    valid: np.ndarray    # (H,) bool
    septic: bool


def sequence_from_windows(windows, targets, patient_id: str, horizon: int,
                          septic: bool) -> PatientSequence:
    """Assemble a PatientSequence from bin_hourly windows and make_targets output."""
    by_hour = {t[0].hour_index: t[1] for t in targets}
    n_hours = max(by_hour) + 1 if by_hour else min(len(windows), SCORE_START_HOUR)
    x = np.stack([w.x for w in windows[:n_hours]])
    tau = np.full(n_hours, horizon + 1, dtype=np.float64)
    event = np.zeros(n_hours, dtype=bool)
    valid = np.zeros(n_hours, dtype=bool)
    for h, tgt in by_hour.items():
        tau[h] = tgt.tau
        event[h] = tgt.event
        valid[h] = True
    return PatientSequence(patient_id, x, tau, event, valid, septic)


@dataclass
class SequenceBatch:
    x: np.ndarray       # (T, B, D) zero-padded
    tau: np.ndarray     # (T, B)
    event: np.ndarray   # (T, B)
    valid: np.ndarray   # (T, B)


def make_batch(sequences: list[PatientSequence], horizon: int) -> SequenceBatch:
    t_max = max(len(s.x) for s in sequences)
    b = len(sequences)
    d = sequences[0].x.shape[1]
    x = np.zeros((t_max, b, d))
    tau = np.full((t_max, b), float(horizon + 1))
    event = np.zeros((t_max, b), dtype=bool)
    valid = np.zeros((t_max, b), dtype=bool)
    for j, s in enumerate(sequences):
        h = len(s.x)
        x[:h, j] = s.x
        tau[:h, j] = s.tau
        event[:h, j] = s.event
        valid[:h, j] = s.valid
    return SequenceBatch(x, tau, event, valid)


# ---------------------------------------------------------------------------
# losses
# ---------------------------------------------------------------------------

def data_loss(model, batch: SequenceBatch, reduction: str = "mean") -> Tensor:
    """Unregularized training loss for any model kind, on the tape."""
    if isinstance(model, GruHazardModel):
        xs = [Tensor(batch.x[t]) for t in range(batch.x.shape[0])]
        feats = ad.concat(model.representations(xs), axis=0)      # (T*B, H)
        tau = batch.tau.reshape(-1)
        event = batch.event.reshape(-1)
        valid = batch.valid.reshape(-1)
        return wcph_taped_loss(model.head, feats, tau, event, valid, reduction)
    if isinstance(model, LogisticModel):
        flat_x, tau, event, valid = _flatten(batch)
        z = Tensor(flat_x) @ model.w + model.b
        # clamp away exact 0/1 so log stays finite under saturation
        p = ad.sigmoid(z) * Tensor(1.0 - 2e-12) + Tensor(1e-12)
        y = Tensor(event.reshape(-1, 1).astype(np.float64))
        one = Tensor(1.0)
        bce = -(y * ad.log(p) + (one - y) * ad.log(one - p))
        total = ad.tensor_sum(bce * Tensor(valid.reshape(-1, 1).astype(np.float64)))
        if reduction == "sum":
            return total
        return total * Tensor(1.0 / max(int(valid.sum()), 1))
    if isinstance(model, DirectWcphModel):
        flat_x, tau, event, valid = _flatten(batch)
        return wcph_taped_loss(model.head, Tensor(flat_x), tau, event, valid, reduction)
    if isinstance(model, FfnnWcphModel):
        flat_x, tau, event, valid = _flatten(batch)
        feats = model.taped_features(Tensor(flat_x))
        return wcph_taped_loss(model.head, feats, tau, event, valid, reduction)
    raise ModelError(f"unknown model type {type(model)!r}")


def model_loss(model, batch: SequenceBatch, l1: float, l2: float) -> Tensor:
    """Full regularized training loss, on the tape (used by gradient checks)."""
    return data_loss(model, batch) + regularization_term(model.weights(), l1, l2)


def _flatten(batch: SequenceBatch):
    d = batch.x.shape[2]
    return (
        batch.x.reshape(-1, d),
        batch.tau.reshape(-1),
        batch.event.reshape(-1),
        batch.valid.reshape(-1),
    )


# ---------------------------------------------------------------------------
# training loop
# ---------------------------------------------------------------------------

@dataclass
class TrainConfig:
    horizon: int = 4
    epochs: int = 200
    lr: float = 1e-2
    l1: float = 1e-5
    l2: float = 1e-3
    batch_patients: int = 1000
    septic_fraction: float = 0.1  # 90% controls / 10% septic per mini-batch
    hidden: int = HIDDEN_SIZE
    seed: int = 0


@dataclass
class TrainResult:
    model: object
    loss_trace: list[float] = field(default_factory=list)


# training batches are processed in length-sorted chunks so the tape never
# holds more than ~chunk_patients * cap_hours of activations at once; the
# accumulated gradient equals the full-batch gradient exactly
TRAIN_CHUNK_PATIENTS = 100
TRAIN_CAP_HOURS = 168


def _truncate(s: PatientSequence, cap: int) -> PatientSequence:
    if len(s.x) <= cap:
        return s
    return PatientSequence(s.patient_id, s.x[:cap], s.tau[:cap], s.event[:cap],
                           s.valid[:cap], s.septic)


def _mean_event_tau(sequences: list[PatientSequence]) -> float:
    taus = np.concatenate([s.tau[s.valid & s.event] for s in sequences]) if sequences else np.array([])
    return float(taus.mean()) if taus.size else 1.0


def train(kind: str, sequences: list[PatientSequence], config: TrainConfig) -> TrainResult:
    """Stratified patient-level mini-batch training, one Adam step per epoch.

    Each epoch samples batch_patients patients with replacement at the
    configured septic/control split; all windows of a sampled patient enter
    the batch.
    """
    septic = [s for s in sequences if s.septic]
    controls = [s for s in sequences if not s.septic]
    if not septic or not controls:
        raise ModelError("training requires both septic and control patients")

    rng = np.random.default_rng(config.seed)
    model = build_model(kind, sequences[0].x.shape[1], config.hidden, config.seed,
                        lam_init=_mean_event_tau(sequences))
    params = model.params()
    state = AdamState(lr=config.lr)
    n_septic = int(round(config.batch_patients * config.septic_fraction))
    n_control = config.batch_patients - n_septic

    weight_ids = {id(w) for w in model.weights()}
    result = TrainResult(model)
    for _ in range(config.epochs):
        picked = [septic[i] for i in rng.integers(0, len(septic), n_septic)]
        picked += [controls[i] for i in rng.integers(0, len(controls), n_control)]
        picked = [_truncate(s, TRAIN_CAP_HOURS) for s in picked]
        picked.sort(key=lambda s: len(s.x))
        total_valid = max(sum(int(s.valid.sum()) for s in picked), 1)

        grad_acc = [np.zeros_like(p.data) for p in params]
        loss_sum = 0.0
        for lo in range(0, len(picked), TRAIN_CHUNK_PATIENTS):
            chunk = picked[lo : lo + TRAIN_CHUNK_PATIENTS]
            batch = make_batch(chunk, config.horizon)
            for p in params:
                p.zero_grad()
            with Tape() as tape:
                loss = data_loss(model, batch, reduction="sum")
                tape.backward(loss)
            loss_sum += float(loss.data)
            for g, p in zip(grad_acc, params):
                if p.grad is not None:
                    g += p.grad

        loss_value = loss_sum / total_valid
        grads = [g / total_valid for g in grad_acc]
        for p, g in zip(params, grads):
            if id(p) in weight_ids:
                loss_value += config.l2 * float((p.data ** 2).sum())
                loss_value += config.l1 * float(np.abs(p.data).sum())
                g += 2.0 * config.l2 * p.data + config.l1 * np.sign(p.data)
        if not np.isfinite(loss_value):
            raise TrainingDivergenceError("non-finite training loss")
        adam_step(params, grads, state)
        result.loss_trace.append(loss_value)
    return result


# ---------------------------------------------------------------------------
# batched inference over many patients
# ---------------------------------------------------------------------------

def score_sequences(model, sequences: list[PatientSequence], horizon: int):
    """Risk scores for every valid window; returns (scores, labels, groups)."""
    scores, labels, groups = [], [], []
    if getattr(model, "recurrent", False):
        # time-major batched forward in length-sorted chunks to bound padding,
        # then emitted in the caller's sequence order
        order = sorted(range(len(sequences)), key=lambda i: len(sequences[i].x))
        risk_by_seq = {}
        for lo in range(0, len(order), 256):
            idx_chunk = order[lo : lo + 256]
            chunk = [sequences[i] for i in idx_chunk]
            batch = make_batch(chunk, horizon)
            xs = [Tensor(batch.x[t]) for t in range(batch.x.shape[0])]
            feats = model.representations(xs)
            lam, nu = model.head.lam, model.head.nu
            risks = np.zeros((len(xs), len(chunk)))
            for t, f in enumerate(feats):
                eta = f.data @ model.head.beta.data[:, 0]
                risks[t] = 1.0 - np.exp(-((horizon / lam) ** nu) * np.exp(eta))
            for j, i in enumerate(idx_chunk):
                risk_by_seq[i] = risks[: len(sequences[i].x), j]
        for i, s in enumerate(sequences):
            for h in np.nonzero(s.valid)[0]:
                scores.append(float(risk_by_seq[i][h]))
                labels.append(bool(s.event[h]))
                groups.append(s.patient_id)
    else:
        for s in sequences:
            risks = model.risk_sequence(s.x, horizon)
            for h in np.nonzero(s.valid)[0]:
                scores.append(float(risks[h]))
                labels.append(bool(s.event[h]))
                groups.append(s.patient_id)
    return np.array(scores), np.array(labels, dtype=bool), groups


# ---------------------------------------------------------------------------
# model persistence: parameter checkpoint plus a metadata sidecar
# ---------------------------------------------------------------------------

def save_model(model, path) -> None:
    """Write parameters to `path` and architecture metadata alongside."""
    path = Path(path)
    ad.save_checkpoint(model.named_params(), path)
    meta = {
        "kind": model.kind,
        "input_dim": model.input_dim,
        "hidden": getattr(model, "hidden", 0),
    }
    path.with_suffix(".meta.json").write_text(json.dumps(meta, indent=2))


def load_model(path):
    """Rebuild a model from save_model output."""
    path = Path(path)
    meta = json.loads(path.with_suffix(".meta.json").read_text())
    model = build_model(
        meta["kind"], meta["input_dim"], hidden=meta.get("hidden") or HIDDEN_SIZE
    )
    loaded = ad.load_checkpoint(path)
    params = model.named_params()
    if set(loaded) != set(params):
        raise ModelError("checkpoint parameters do not match the architecture")
    for name, tensor in params.items():
        if tensor.data.shape != loaded[name].data.shape:
            raise ModelError(f"shape mismatch for {name}")
        tensor.data[...] = loaded[name].data
    return model
