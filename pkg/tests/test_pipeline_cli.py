"""Dataset-pipeline helpers and an end-to-end CLI smoke run on a tiny
cohort: generate -> label -> window -> train -> evaluate -> explain -> ate,
plus exit codes, run manifests, and determinism."""

import json

import numpy as np
import pytest
from click.testing import CliRunner

from sepsiswatch.cli import main
from sepsiswatch.pipeline import (
    build_dataset,
    label_cohort,
    load_labels,
    onsets_from_labels,
    save_labels,
    split_patients,
)
from sepsiswatch.schema import default_schema
from sepsiswatch.synth import SynthConfig, generate_synthetic_cohort

SCHEMA = default_schema()


class TestPipelineHelpers:
    def test_split_deterministic_and_disjoint(self):
        ids = [f"p{i}" for i in range(40)]
        a_train, a_test = split_patients(ids, 0.25, seed=9)
        b_train, b_test = split_patients(ids, 0.25, seed=9)
        assert a_train == b_train and a_test == b_test
        assert len(a_test) == 10
        assert set(a_train) | set(a_test) == set(ids)
        assert not set(a_train) & set(a_test)
        c_train, _ = split_patients(ids, 0.25, seed=10)
        assert c_train != a_train

    def test_labels_roundtrip(self, tmp_path):
        cohort = generate_synthetic_cohort(SynthConfig(20, sepsis_prevalence=0.4, seed=3))
        labels = label_cohort(cohort, SCHEMA)
        path = tmp_path / "labels.json"
        save_labels(labels, path)
        assert load_labels(path) == labels

    def test_build_dataset_reuses_stats(self):
        cohort = generate_synthetic_cohort(SynthConfig(25, sepsis_prevalence=0.3, seed=4))
        labels = label_cohort(cohort, SCHEMA)
        onsets = onsets_from_labels(labels, "sepsis-3")
        seqs, stats = build_dataset(cohort, onsets, SCHEMA, 4)
        seqs2, stats2 = build_dataset(cohort, onsets, SCHEMA, 4, stats=stats)
        assert stats2 is stats
        for a, b in zip(seqs, seqs2):
            assert np.array_equal(a.x, b.x)
        assert any(s.septic for s in seqs)
        # onset criteria flow through: every septic sequence stops pre-onset
        for s in seqs:
            if s.septic:
                assert s.valid.any()

    def test_onsets_criterion_selects_field(self):
        cohort = generate_synthetic_cohort(SynthConfig(30, sepsis_prevalence=0.5, seed=5))
        labels = label_cohort(cohort, SCHEMA)
        s3 = onsets_from_labels(labels, "sepsis-3")
        cdc = onsets_from_labels(labels, "sepsis-cdc")
        assert set(s3) == set(cdc) == set(labels)
        assert any(s3[p] != cdc[p] for p in s3) or s3 == cdc


@pytest.fixture(scope="module")
def cli_world(tmp_path_factory):
    """One tiny cohort pushed through the whole CLI once, shared read-only."""
    root = tmp_path_factory.mktemp("cli")
    runner = CliRunner()
    paths = {
        "cohort": root / "cohort",
        "labels": root / "labels",
        "windows": root / "windows",
        "model": root / "model",
        "eval": root / "eval",
        "explain": root / "explain",
        "ate": root / "ate",
    }
    steps = [
        ["generate", "--n-patients", "40", "--prevalence", "0.4", "--seed", "11",
         "--out", str(paths["cohort"])],
        ["label", "--cohort", str(paths["cohort"]),
         "--out", str(paths["labels"] / "labels.json")],
        ["window", "--cohort", str(paths["cohort"]), "--out", str(paths["windows"])],
        ["train", "--cohort", str(paths["cohort"]),
         "--labels", str(paths["labels"] / "labels.json"),
         "--kind", "ffnn-wcph", "--epochs", "8", "--hidden", "6",
         "--out", str(paths["model"])],
        ["evaluate", "--cohort", str(paths["cohort"]),
         "--labels", str(paths["labels"] / "labels.json"),
         "--model", str(paths["model"]), "--horizons", "4,12",
         "--out", str(paths["eval"])],
        ["ate", "--cohort", str(paths["cohort"]),
         "--labels", str(paths["labels"] / "labels.json"),
         "--level", "3", "--restarts", "3", "--out", str(paths["ate"])],
    ]
    outputs = {}
    for argv in steps:
        result = runner.invoke(main, argv, catch_exceptions=False)
        assert result.exit_code == 0, f"{argv[0]} failed:\n{result.output}"
        outputs[argv[0]] = result.output
    return runner, paths, outputs


class TestCliPipeline:
    def test_artifacts_and_manifests_written(self, cli_world):
        _, paths, _ = cli_world
        assert (paths["cohort"] / "manifest-generate.json").exists()
        assert (paths["labels"] / "labels.json").exists()
        assert (paths["windows"] / "windows.csv").exists()
        assert (paths["windows"] / "stats.json").exists()
        assert (paths["model"] / "model.ckpt").exists()
        assert (paths["model"] / "loss_trace.json").exists()
        assert (paths["eval"] / "evaluation.json").exists()
        assert (paths["ate"] / "effect.json").exists()

    def test_manifest_records_flags_and_seed(self, cli_world):
        _, paths, _ = cli_world
        manifest = json.loads((paths["cohort"] / "manifest-generate.json").read_text())
        assert manifest["subcommand"] == "generate"
        assert manifest["seed"] == 11
        assert manifest["flags"]["n_patients"] == 40
        assert manifest["tool_version"]
        assert manifest["started"] and manifest["finished"]

    def test_evaluate_prints_table(self, cli_world):
        _, paths, outputs = cli_world
        assert "auc" in outputs["evaluate"]
        reports = json.loads((paths["eval"] / "evaluation.json").read_text())
        assert sorted(r["horizon"] for r in reports) == [4, 12]
        for r in reports:
            assert 0.0 <= r["auc"] <= 1.0

    def test_explain_outputs_signed_factors(self, cli_world):
        runner, paths, _ = cli_world
        labels = json.loads((paths["labels"] / "labels.json").read_text())
        pid = sorted(labels)[0]
        out = paths["explain"]
        result = runner.invoke(main, [
            "explain", "--cohort", str(paths["cohort"]),
            "--labels", str(paths["labels"] / "labels.json"),
            "--model", str(paths["model"]), "--patient", pid,
            "--hour", "5", "--out", str(out)], catch_exceptions=False)
        assert result.exit_code == 0, result.output
        assert "(+)" in result.output or "(-)" in result.output
        payload = json.loads((out / f"relevance-{pid}-h5.json").read_text())
        assert payload["patient_id"] == pid and payload["hour"] == 5

    def test_ate_reports_median_and_iqr(self, cli_world):
        _, paths, outputs = cli_world
        effect = json.loads((paths["ate"] / "effect.json").read_text())
        lo, hi = effect["delta_iqr"]
        assert lo <= effect["delta_median"] <= hi
        assert len(effect["deltas"]) == 3

    def test_train_loss_trace_decreases(self, cli_world):
        _, paths, _ = cli_world
        trace = json.loads((paths["model"] / "loss_trace.json").read_text())
        assert len(trace) == 8
        assert trace[-1] < trace[0]


class TestCliErrors:
    def test_missing_cohort_is_config_error(self, tmp_path):
        runner = CliRunner()
        result = runner.invoke(main, [
            "label", "--cohort", str(tmp_path / "nope"),
            "--out", str(tmp_path / "out")])
        assert result.exit_code == 2
        assert "config:" in result.output

    def test_bad_flag_value_rejected(self, tmp_path):
        runner = CliRunner()
        result = runner.invoke(main, [
            "generate", "--n-patients", "-5", "--out", str(tmp_path / "c")])
        assert result.exit_code == 2

    def test_unknown_model_kind_rejected(self, tmp_path):
        runner = CliRunner()
        result = runner.invoke(main, [
            "train", "--cohort", str(tmp_path), "--labels", str(tmp_path),
            "--kind", "transformer", "--out", str(tmp_path / "m")])
        assert result.exit_code == 2


class TestCliDeterminism:
    def test_same_seed_same_cohort(self, tmp_path):
        runner = CliRunner()
        for name in ("a", "b"):
            result = runner.invoke(main, [
                "generate", "--n-patients", "15", "--seed", "21",
                "--out", str(tmp_path / name)], catch_exceptions=False)
            assert result.exit_code == 0
        a = (tmp_path / "a" / "events.csv").read_text()
        b = (tmp_path / "b" / "events.csv").read_text()
        assert a == b
