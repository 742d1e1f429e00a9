"""Model interpretability: gradient-times-input relevance scores,
feature-replacement perturbation analyses, and spectral embedding of the
learned 100-dim representations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh
from scipy.sparse.csgraph import connected_components

from . import autodiff as ad
from .autodiff import Tape, Tensor
from .metrics import ScoredSet, auc
from .models import (
    DirectWcphModel,
    FfnnWcphModel,
    GruHazardModel,
    LogisticModel,
    PatientSequence,
    make_batch,
)
from .schema import FeatureSchema
from .windowing import NormalizationStats

Z_CUTOFF = 1.96
TOP_K = 10


class InterpretError(ValueError):
    pass


@dataclass
class RelevanceReport:
    patient_id: str
    hour: int
    relevance: np.ndarray            # (F,) gradient * input, signed
    z_scores: np.ndarray             # (F,) z-scored across the window's features
    top_positive: list               # [(feature_id, z)], |z| desc, z > +cutoff
    top_negative: list               # [(feature_id, z)], |z| desc, z < -cutoff


@dataclass
class Embedding:
    points: np.ndarray       # (n, dims)
    eigenvalues: np.ndarray  # (dims + 1,), ascending, first ~ 0
    source: str = ""


def _taped_risks(model, xs: list[Tensor], horizon: float) -> list[Tensor]:
    """Per-hour risk tensors (B, 1), differentiable wrt the inputs."""
    hz = Tensor(float(horizon))
    if isinstance(model, GruHazardModel):
        feats = model.representations(xs)
        head = model.head
    elif isinstance(model, DirectWcphModel):
        feats, head = xs, model.head
    elif isinstance(model, FfnnWcphModel):
        feats = [model.taped_features(x) for x in xs]
        head = model.head
    elif isinstance(model, LogisticModel):
        return [ad.sigmoid(x @ model.w + model.b) for x in xs]
    else:
        raise InterpretError(f"unsupported model type {type(model)!r}")
    one = Tensor(1.0)
    out = []
    for f in feats:
        eta = f @ head.beta
        cumhaz = ad.exp(ad.exp(head.log_nu) * (ad.log(hz) - head.log_lambda) + eta)
        out.append(one - ad.exp(ad.neg(cumhaz)))
    return out


def risk_input_gradients(
    model, x_batch: np.ndarray, horizon: float, hours=None
) -> np.ndarray:
    """d risk(t) / d x(t) for each requested hour, batched over patients.

    x_batch is (T, B, D); the result is (T, B, D) with rows outside the
    requested hours left at zero.
    """
    t_max, batch, dim = x_batch.shape
    hours = range(t_max) if hours is None else hours
    xs = [Tensor(x_batch[t]) for t in range(t_max)]
    grads = np.zeros_like(x_batch)
    with Tape() as tape:
        risks = _taped_risks(model, xs, horizon)
        sums = [ad.tensor_sum(r) for r in risks]
        for t in hours:
            for x in xs:
                x.zero_grad()
            tape.backward(sums[t], clear=True)
            if xs[t].grad is not None:
                grads[t] = xs[t].grad
    return grads


def _z_scores(rel: np.ndarray) -> np.ndarray:
    sd = rel.std()
    if sd == 0:
        return np.zeros_like(rel)
    return (rel - rel.mean()) / sd


def relevance(
    model,
    x_seq: np.ndarray,
    hour: int,
    horizon: float,
    schema: FeatureSchema,
    patient_id: str = "",
) -> RelevanceReport:
    """Gradient-times-input relevance of the risk score at one hour.

    x_seq is the patient's normalized window sequence (H, D); the gradient is
    taken with respect to that hour's own input vector and multiplied
    elementwise by it, then z-scored across the features of the window.
    """
    if hour < 0 or hour >= len(x_seq):
        raise InterpretError(f"hour {hour} outside sequence of length {len(x_seq)}")
    grads = risk_input_gradients(model, x_seq[: hour + 1, None, :], horizon, hours=[hour])
    rel = grads[hour, 0] * x_seq[hour]
    if not np.all(np.isfinite(rel)):
        raise InterpretError("non-finite relevance gradient")
    z = _z_scores(rel)
    ids = schema.identifiers()
    order = np.argsort(-np.abs(z))
    top_pos = [(ids[i], float(z[i])) for i in order if z[i] > Z_CUTOFF][:TOP_K]
    top_neg = [(ids[i], float(z[i])) for i in order if z[i] < -Z_CUTOFF][:TOP_K]
    return RelevanceReport(patient_id, hour, rel, z, top_pos, top_neg)


# ---------------------------------------------------------------------------
# feature replacement analyses
# ---------------------------------------------------------------------------

def _topk_indices(rel_row: np.ndarray, k: int) -> np.ndarray:
    z = _z_scores(rel_row)
    return np.argsort(-np.abs(z))[:k]


def _batched_relevance(model, sequences: list[PatientSequence], horizon: float):
    """relevance rows for every valid window; returns (T, B, D) plus batch."""
    batch = make_batch(sequences, int(horizon))
    grads = risk_input_gradients(model, batch.x, horizon)
    return grads * batch.x, batch


def global_top_features(
    model, sequences: list[PatientSequence], horizon: float,
    k: int = TOP_K, last_hours: int = 10,
) -> np.ndarray:
    """Population-level top-k by frequency in per-window top-k lists.

    Counted over septic patients' final `last_hours` pre-onset windows,
    mirroring how global interpretability is usually summarized.
    """
    septic = [s for s in sequences if s.septic]
    if not septic:
        raise InterpretError("global feature list needs septic sequences")
    rel, batch = _batched_relevance(model, septic, horizon)
    dim = rel.shape[2]
    counts = np.zeros(dim, dtype=int)
    for j, s in enumerate(septic):
        h_end = len(s.x)
        for t in range(max(0, h_end - last_hours), h_end):
            if s.valid[t]:
                counts[_topk_indices(rel[t, j], k)] += 1
    return np.argsort(-counts)[:k]


def _score_masked(model, sequences, horizon: float, mask_fn, fallback: np.ndarray):
    """AUC after replacing selected features with the imputation fallback.

    mask_fn(seq_index, hour) -> index array of features to replace in that
    window (the mask applies at each point in time, so the recurrent model
    sees the replaced values in its history too).
    """
    masked = []
    for j, s in enumerate(sequences):
        x = s.x.copy()
        for t in range(len(x)):
            idx = mask_fn(j, t)
            if len(idx):
                x[t, idx] = fallback[idx]
        masked.append(PatientSequence(s.patient_id, x, s.tau, s.event, s.valid, s.septic))
    from .models import score_sequences

    scores, labels, groups = score_sequences(model, masked, int(horizon))
    return auc(ScoredSet(scores, labels, groups))


def feature_replacement(
    model,
    sequences: list[PatientSequence],
    schema: FeatureSchema,
    stats: NormalizationStats,
    horizon: float,
    mode: str,
    k: int = TOP_K,
    trials: int = 100,
    seed: int = 0,
    global_list: np.ndarray | None = None,
):
    """AUC(s) after masking features; mode is 'global', 'local', or 'random'.

    Masked values are the training-population means (zero in normalized
    units), which removes a feature's information without injecting an
    out-of-range value. Global masks one fixed population-level top-k list;
    local masks each window's own top-k; random masks a fresh random k-set
    per window, repeated `trials` times, returning one AUC per trial.
    """
    if k > len(schema):
        raise InterpretError(f"k={k} exceeds feature count {len(schema)}")
    fallback = np.zeros(len(schema), dtype=np.float64)

    if mode == "global":
        idx = global_top_features(model, sequences, horizon, k) if global_list is None else global_list
        return _score_masked(model, sequences, horizon, lambda j, t: idx, fallback)
    if mode == "local":
        rel, batch = _batched_relevance(model, sequences, horizon)
        local_idx = {}
        for j, s in enumerate(sequences):
            for t in range(len(s.x)):
                local_idx[(j, t)] = _topk_indices(rel[t, j], k)
        return _score_masked(
            model, sequences, horizon, lambda j, t: local_idx[(j, t)], fallback
        )
    if mode == "random":
        rng = np.random.default_rng(seed)
        aucs = []
        for _ in range(trials):
            pick = {}

            def mask_fn(j, t):
                key = (j, t)
                if key not in pick:
                    pick[key] = rng.choice(len(schema), size=k, replace=False)
                return pick[key]

            aucs.append(_score_masked(model, sequences, horizon, mask_fn, fallback))
        return np.array(aucs)
    raise InterpretError(f"unknown mode {mode!r}")


# ---------------------------------------------------------------------------
# spectral embedding
# ---------------------------------------------------------------------------

def spectral_embed(
    representations: np.ndarray, k_neighbors: int, dims: int = 3, source: str = ""
) -> Embedding:
    """Laplacian-eigenmap embedding of representation vectors.

    Symmetric k-nearest-neighbor graph with Gaussian affinities (bandwidth =
    median neighbor distance), normalized Laplacian, coordinates from
    eigenvectors 2..dims+1 in ascending eigenvalue order.
    """
    x = np.asarray(representations, dtype=np.float64)
    n = len(x)
    if n < dims + 2:
        raise InterpretError(f"need at least {dims + 2} points, got {n}")
    d2 = np.maximum(
        (x * x).sum(1)[:, None] + (x * x).sum(1)[None, :] - 2.0 * x @ x.T, 0.0
    )
    dist = np.sqrt(d2)
    np.fill_diagonal(dist, np.inf)
    k = min(k_neighbors, n - 1)
    neighbor_idx = np.argsort(dist, axis=1)[:, :k]
    neighbor_d = np.take_along_axis(dist, neighbor_idx, axis=1)
    sigma = float(np.median(neighbor_d))
    if sigma == 0.0:  # duplicate-heavy input: fall back to a tiny bandwidth
        positive = neighbor_d[neighbor_d > 0]
        sigma = float(positive.min()) * 1e-3 if positive.size else 1.0

    w = np.zeros((n, n))
    adj = np.zeros((n, n), dtype=bool)
    rows = np.repeat(np.arange(n), k)
    cols = neighbor_idx.reshape(-1)
    # floor the affinity so a far outlier cannot underflow its edges to
    # exactly zero and disconnect a structurally connected graph
    vals = np.maximum(
        np.exp(-(neighbor_d.reshape(-1) ** 2) / (2.0 * sigma**2)), 1e-290
    )
    w[rows, cols] = vals
    adj[rows, cols] = True
    w = np.maximum(w, w.T)  # symmetrize (undirected kNN union)
    adj |= adj.T

    n_comp, _ = connected_components(adj, directed=False)
    if n_comp > 1:
        raise InterpretError(
            f"kNN graph has {n_comp} components; increase k_neighbors (got {k_neighbors})"
        )
    deg = w.sum(axis=1)
    d_inv_sqrt = 1.0 / np.sqrt(np.maximum(deg, 1e-300))
    lap = np.eye(n) - (d_inv_sqrt[:, None] * w) * d_inv_sqrt[None, :]
    lap = 0.5 * (lap + lap.T)
    eigenvalues, vectors = eigh(lap, subset_by_index=[0, dims])
    return Embedding(points=vectors[:, 1 : dims + 1], eigenvalues=eigenvalues, source=source)
