"""Survival head against a quadrature oracle, loss/gradient checks, training
behavior, batching equivalences, and checkpoint round-trips."""

import numpy as np
import pytest

from sepsiswatch.autodiff import Tape, Tensor, grad_check
from sepsiswatch.models import (
    DirectWcphModel,
    FfnnWcphModel,
    GruHazardModel,
    LogisticModel,
    ModelError,
    PatientSequence,
    TrainConfig,
    WcphHead,
    build_model,
    data_loss,
    load_model,
    make_batch,
    model_loss,
    save_model,
    score_sequences,
    train,
)

from oracles import oracle_survival_by_quadrature

RNG = np.random.default_rng(321)
KINDS = ("logistic-regression", "wcph-direct", "ffnn-wcph", "gru-wcph")


def _random_head(rng, dim=4):
    head = WcphHead.init(rng, dim)
    head.log_lambda.data[...] = rng.uniform(-0.5, 2.0)
    head.log_nu.data[...] = rng.uniform(-0.7, 0.9)
    return head


def _random_sequences(rng, n, dim=6, horizon=4, min_len=5, max_len=20):
    out = []
    for i in range(n):
        h = int(rng.integers(min_len, max_len))
        x = rng.normal(size=(h, dim))
        tau = rng.uniform(0.5, horizon + 1, size=h)
        event = rng.random(h) < 0.3
        valid = np.zeros(h, dtype=bool)
        valid[4:] = True
        out.append(PatientSequence(f"s{i}", x, tau, event, valid, bool(event[valid].any())))
    return out


class TestWeibullHead:
    def test_survival_matches_hazard_quadrature(self):
        """S(tau) agrees with exp(-integral of the hazard) to 1e-6."""
        rng = np.random.default_rng(5)
        for _ in range(50):
            head = _random_head(rng)
            f = rng.normal(scale=0.5, size=4)
            tau = float(rng.uniform(0.2, 12.0))
            eta = float(head.linear_predictor(f))
            want = oracle_survival_by_quadrature(head.lam, head.nu, eta, tau)
            assert head.survival(f, tau) == pytest.approx(want, abs=1e-6)

    def test_proportional_hazards(self):
        """h(f1,t)/h(f2,t) is constant in t to 1e-12."""
        rng = np.random.default_rng(6)
        head = _random_head(rng)
        f1, f2 = rng.normal(size=4), rng.normal(size=4)
        ratios = [head.hazard(f1, t) / head.hazard(f2, t)
                  for t in (0.1, 0.5, 1.0, 3.0, 7.0, 11.9)]
        for r in ratios[1:]:
            assert r == pytest.approx(ratios[0], rel=1e-12)

    def test_boundaries(self):
        head = _random_head(np.random.default_rng(7))
        f = np.zeros(4)
        assert head.survival(f, 0.0) == 1.0
        assert 0.0 < head.risk(f, 4.0) < 1.0
        with pytest.raises(ModelError):
            head.survival(f, -1.0)
        with pytest.raises(ModelError):
            head.hazard(f, 0.0)

    def test_risk_monotone_in_horizon(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            head = _random_head(rng)
            f = rng.normal(size=4)
            risks = [head.risk(f, h) for h in (2, 4, 6, 8, 10, 12)]
            assert all(a <= b for a, b in zip(risks, risks[1:]))


class TestLossGradients:
    @pytest.mark.parametrize("kind", KINDS)
    def test_regularized_loss_gradcheck(self, kind):
        rng = np.random.default_rng(9)
        seqs = _random_sequences(rng, 3, dim=5, max_len=9)
        model = build_model(kind, 5, hidden=4, seed=1)
        batch = make_batch(seqs, 4)

        def fn(_params):
            return model_loss(model, batch, l1=1e-4, l2=1e-3)

        err = grad_check(fn, model.params())
        assert err < 1e-4

    @pytest.mark.parametrize("kind", KINDS)
    def test_sum_loss_additive_over_patients(self, kind):
        """Padding and batching never change the summed loss."""
        rng = np.random.default_rng(10)
        seqs = _random_sequences(rng, 4, dim=5, max_len=12)
        model = build_model(kind, 5, hidden=4, seed=1)

        def total(batch_seqs):
            with Tape():
                return float(data_loss(model, make_batch(batch_seqs, 4),
                                       reduction="sum").data)

        whole = total(seqs)
        parts = sum(total([s]) for s in seqs)
        assert whole == pytest.approx(parts, rel=1e-10)


class TestTraining:
    @pytest.mark.parametrize("kind", KINDS)
    def test_loss_decreases(self, kind):
        rng = np.random.default_rng(11)
        seqs = _random_sequences(rng, 12, dim=5)
        res = train(kind, seqs, TrainConfig(horizon=4, epochs=25, hidden=6, seed=0))
        assert len(res.loss_trace) == 25
        assert res.loss_trace[-1] < res.loss_trace[0]

    def test_training_is_seeded(self):
        rng = np.random.default_rng(12)
        seqs = _random_sequences(rng, 8, dim=5)
        cfg = TrainConfig(horizon=4, epochs=5, hidden=4, seed=3)
        a = train("ffnn-wcph", seqs, cfg)
        b = train("ffnn-wcph", seqs, cfg)
        assert a.loss_trace == b.loss_trace
        for k, p in a.model.named_params().items():
            assert np.array_equal(p.data, b.model.named_params()[k].data)


class TestScoring:
    def test_batched_recurrent_scores_match_sequential(self):
        rng = np.random.default_rng(13)
        seqs = _random_sequences(rng, 6, dim=5)
        model = GruHazardModel(5, hidden=4, seed=2)
        scores, labels, groups = score_sequences(model, seqs, 4)
        want_scores, want_labels = [], []
        for s in seqs:
            risks = model.risk_sequence(s.x, 4)
            for h in np.nonzero(s.valid)[0]:
                want_scores.append(risks[h])
                want_labels.append(bool(s.event[h]))
        assert np.allclose(scores, want_scores, atol=1e-12)
        assert np.array_equal(labels, np.array(want_labels))

    def test_score_order_is_model_independent(self):
        """Labels line up across model kinds, as DeLong requires."""
        rng = np.random.default_rng(14)
        seqs = _random_sequences(rng, 5, dim=5)
        ref = None
        for kind in KINDS:
            model = build_model(kind, 5, hidden=4, seed=0)
            _, labels, groups = score_sequences(model, seqs, 4)
            if ref is None:
                ref = (labels, groups)
            assert np.array_equal(labels, ref[0])
            assert groups == ref[1]

    def test_risk_scores_in_unit_interval(self):
        rng = np.random.default_rng(15)
        x = rng.normal(size=(10, 5))
        for kind in KINDS:
            model = build_model(kind, 5, hidden=4, seed=0)
            r = model.risk_score(x, 4)
            assert 0.0 <= r < 1.0


class TestPersistence:
    @pytest.mark.parametrize("kind", KINDS)
    def test_save_load_roundtrip(self, kind, tmp_path):
        rng = np.random.default_rng(16)
        model = build_model(kind, 5, hidden=4, seed=7)
        path = tmp_path / "model.ckpt"
        save_model(model, path)
        loaded = load_model(path)
        assert loaded.kind == kind
        x = rng.normal(size=(8, 5))
        assert loaded.risk_score(x, 4) == model.risk_score(x, 4)
        assert np.array_equal(loaded.risk_sequence(x, 12), model.risk_sequence(x, 12))


def test_unknown_kind_rejected():
    with pytest.raises(ModelError):
        build_model("transformer", 5)
