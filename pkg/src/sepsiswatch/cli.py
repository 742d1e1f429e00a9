"""Command-line entry point: generate, label, window, train, evaluate,
explain, embed, ate, serve, simulate.

Every subcommand writes a run manifest next to its outputs; failures exit
with code 2 and a one-line `error category: message` on stderr.
"""

from __future__ import annotations

import json
import sys
import threading
import time
from dataclasses import asdict
from datetime import datetime, timezone
from pathlib import Path

import click
import numpy as np

from . import __version__
from .cohort import CohortError, load_cohort, save_cohort
from .metrics import ScoredSet, format_report_table, horizon_sweep
from .models import (
    MODEL_KINDS,
    TrainConfig,
    load_model,
    save_model,
    score_sequences,
    train,
)
from .pipeline import (
    build_dataset,
    label_cohort,
    load_labels,
    onsets_from_labels,
    save_labels,
    split_patients,
)
from .schema import default_schema
from .synth import SynthConfig, generate_synthetic_cohort
from .windowing import (
    HORIZONS,
    apply_normalization,
    bin_hourly,
    fit_normalization,
    load_stats,
    save_stats,
    save_windows,
)

ERR_CONFIG = "config"
ERR_DATA = "data"
ERR_RUNTIME = "runtime"


class CliError(click.ClickException):
    exit_code = 2

    def __init__(self, category: str, message: str):
        super().__init__(f"{category}: {message}")
        self.category = category


def _manifest(subcommand: str, params: dict, out_dir: Path, started: str) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {
        "subcommand": subcommand,
        "flags": {k: (str(v) if isinstance(v, Path) else v) for k, v in params.items()},
        "seed": params.get("seed"),
        "tool_version": __version__,
        "started": started,
        "finished": datetime.now(timezone.utc).isoformat(),
    }
    (out_dir / f"manifest-{subcommand}.json").write_text(json.dumps(payload, indent=2))


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _require_dir(path: Path, what: str) -> Path:
    if not path.exists():
        raise CliError(ERR_CONFIG, f"{what} not found at {path}")
    return path


@click.group()
@click.version_option(__version__)
def main():
    """Early-sepsis risk pipeline and scoring platform."""


@main.command()
@click.option("--n-patients", default=200, show_default=True)
@click.option("--prevalence", default=0.08, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
def generate(n_patients, prevalence, seed, out):
    """Write a synthetic cohort (patients, events, therapy) to --out."""
    started = _now()
    schema = default_schema()
    try:
        config = SynthConfig(
            n_patients=n_patients,
            sepsis_prevalence=prevalence,
            schema=schema,
            seed=seed,
        )
    except CohortError as exc:
        raise CliError(ERR_CONFIG, str(exc)) from exc
    cohort = generate_synthetic_cohort(config)
    out.mkdir(parents=True, exist_ok=True)
    save_cohort(cohort, out)
    _manifest("generate", dict(n_patients=n_patients, prevalence=prevalence,
                               seed=seed, out=out), out, started)
    click.echo(f"wrote {len(cohort.patients)} patients to {out}")


@main.command()
@click.option("--cohort", "cohort_dir", type=click.Path(path_type=Path), required=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
def label(cohort_dir, out):
    """Label every patient with the five onset timestamps."""
    started = _now()
    _require_dir(cohort_dir, "cohort directory")
    schema = default_schema()
    cohort = load_cohort(cohort_dir)
    labels = label_cohort(cohort, schema)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_labels(labels, out)
    _manifest("label", dict(cohort=cohort_dir, out=out), out.parent, started)
    n_septic = sum(1 for lab in labels.values() if lab.t_sepsis3 is not None)
    click.echo(f"labeled {len(labels)} patients ({n_septic} sepsis-3 positive)")


@main.command()
@click.option("--cohort", "cohort_dir", type=click.Path(path_type=Path), required=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
def window(cohort_dir, out):
    """Bin hourly windows for the whole cohort and fit normalization."""
    started = _now()
    _require_dir(cohort_dir, "cohort directory")
    schema = default_schema()
    cohort = load_cohort(cohort_dir)
    windows = []
    for p in cohort.patients:
        windows.extend(
            bin_hourly(
                cohort.events_for(p.patient_id),
                p.icu_admit_time,
                p.icu_discharge_time,
                schema,
                patient_id=p.patient_id,
            )
        )
    out.mkdir(parents=True, exist_ok=True)
    save_windows(windows, schema, out / "windows.csv")
    save_stats(fit_normalization(windows), out / "stats.json")
    _manifest("window", dict(cohort=cohort_dir, out=out), out, started)
    click.echo(f"wrote {len(windows)} windows to {out}")


def _load_training_inputs(cohort_dir: Path, labels_path: Path, criterion: str):
    _require_dir(cohort_dir, "cohort directory")
    _require_dir(labels_path, "labels file")
    schema = default_schema()
    cohort = load_cohort(cohort_dir)
    onsets = onsets_from_labels(load_labels(labels_path), criterion)
    return schema, cohort, onsets


@main.command(name="train")
@click.option("--cohort", "cohort_dir", type=click.Path(path_type=Path), required=True)
@click.option("--labels", "labels_path", type=click.Path(path_type=Path), required=True)
@click.option("--kind", type=click.Choice(MODEL_KINDS), default="gru-wcph", show_default=True)
@click.option("--criterion", type=click.Choice(["sepsis-3", "sepsis-cdc"]), default="sepsis-3", show_default=True)
@click.option("--horizon", type=click.Choice([str(h) for h in HORIZONS]), default="4", show_default=True)
@click.option("--epochs", default=200, show_default=True)
@click.option("--hidden", default=100, show_default=True)
@click.option("--test-fraction", default=0.25, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
def train_cmd(cohort_dir, labels_path, kind, criterion, horizon, epochs, hidden,
              test_fraction, seed, out):
    """Train one model on the training split and checkpoint it."""
    started = _now()
    horizon = int(horizon)
    schema, cohort, onsets = _load_training_inputs(cohort_dir, labels_path, criterion)
    train_ids, _ = split_patients(
        [p.patient_id for p in cohort.patients], test_fraction, seed
    )
    sequences, stats = build_dataset(
        cohort.subset(train_ids), onsets, schema, horizon
    )
    try:
        result = train(
            kind,
            sequences,
            TrainConfig(horizon=horizon, epochs=epochs, hidden=hidden, seed=seed),
        )
    except ValueError as exc:
        raise CliError(ERR_DATA, str(exc)) from exc
    out.mkdir(parents=True, exist_ok=True)
    save_model(result.model, out / "model.ckpt")
    save_stats(stats, out / "stats.json")
    (out / "loss_trace.json").write_text(json.dumps(result.loss_trace))
    _manifest("train", dict(cohort=cohort_dir, labels=labels_path, kind=kind,
                            criterion=criterion, horizon=horizon, epochs=epochs,
                            hidden=hidden, test_fraction=test_fraction,
                            seed=seed, out=out), out, started)
    click.echo(f"trained {kind} (final loss {result.loss_trace[-1]:.4f}) -> {out}")


@main.command()
@click.option("--cohort", "cohort_dir", type=click.Path(path_type=Path), required=True)
@click.option("--labels", "labels_path", type=click.Path(path_type=Path), required=True)
@click.option("--model", "model_dir", type=click.Path(path_type=Path), required=True)
@click.option("--criterion", type=click.Choice(["sepsis-3", "sepsis-cdc"]), default="sepsis-3", show_default=True)
@click.option("--horizons", default="4", show_default=True, help="comma-separated")
@click.option("--test-fraction", default=0.25, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
def evaluate(cohort_dir, labels_path, model_dir, criterion, horizons,
             test_fraction, seed, out):
    """Window-level AUC and 0.85-sensitivity operating point on the test split."""
    started = _now()
    _require_dir(model_dir, "model directory")
    schema, cohort, onsets = _load_training_inputs(cohort_dir, labels_path, criterion)
    model = load_model(model_dir / "model.ckpt")
    stats = load_stats(model_dir / "stats.json")
    _, test_ids = split_patients(
        [p.patient_id for p in cohort.patients], test_fraction, seed
    )
    test_cohort = cohort.subset(test_ids)
    scored = {}
    for h in [int(v) for v in horizons.split(",")]:
        sequences, _ = build_dataset(test_cohort, onsets, schema, h, stats=stats)
        scores, labels, groups = score_sequences(model, sequences, h)
        scored[(model.kind, h)] = ScoredSet(scores, labels, groups)
    reports = horizon_sweep(scored)
    out.mkdir(parents=True, exist_ok=True)
    (out / "evaluation.json").write_text(
        json.dumps([asdict(r) for r in reports], indent=2)
    )
    _manifest("evaluate", dict(cohort=cohort_dir, labels=labels_path,
                               model=model_dir, criterion=criterion,
                               horizons=horizons, test_fraction=test_fraction,
                               seed=seed, out=out), out, started)
    click.echo(format_report_table(reports))


@main.command()
@click.option("--cohort", "cohort_dir", type=click.Path(path_type=Path), required=True)
@click.option("--labels", "labels_path", type=click.Path(path_type=Path), required=True)
@click.option("--model", "model_dir", type=click.Path(path_type=Path), required=True)
@click.option("--patient", "patient_id", required=True)
@click.option("--hour", type=int, required=True, help="hour since admission")
@click.option("--horizon", default=4, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
def explain(cohort_dir, labels_path, model_dir, patient_id, hour, horizon, out):
    """Per-feature relevance for one patient-hour."""
    from .interpret import InterpretError, relevance

    started = _now()
    _require_dir(model_dir, "model directory")
    schema, cohort, _ = _load_training_inputs(cohort_dir, labels_path, "sepsis-3")
    model = load_model(model_dir / "model.ckpt")
    stats = load_stats(model_dir / "stats.json")
    match = [p for p in cohort.patients if p.patient_id == patient_id]
    if not match:
        raise CliError(ERR_DATA, f"patient {patient_id} not in cohort")
    p = match[0]
    windows = bin_hourly(
        cohort.events_for(patient_id), p.icu_admit_time, p.icu_discharge_time,
        schema, patient_id=patient_id,
    )
    x = np.stack([w.x for w in apply_normalization(windows, stats)])
    try:
        report = relevance(model, x, hour, horizon, schema, patient_id)
    except InterpretError as exc:
        raise CliError(ERR_DATA, str(exc)) from exc
    out.mkdir(parents=True, exist_ok=True)
    (out / f"relevance-{patient_id}-h{hour}.json").write_text(json.dumps({
        "patient_id": patient_id,
        "hour": hour,
        "top_positive": report.top_positive,
        "top_negative": report.top_negative,
        "z_scores": dict(zip(schema.identifiers(), report.z_scores.tolist())),
    }, indent=2))
    _manifest("explain", dict(cohort=cohort_dir, labels=labels_path, model=model_dir,
                              patient=patient_id, hour=hour, horizon=horizon,
                              out=out), out, started)
    for fid, z in report.top_positive:
        click.echo(f"(+) {fid}: z={z:+.2f}")
    for fid, z in report.top_negative:
        click.echo(f"(-) {fid}: z={z:+.2f}")


@main.command()
@click.option("--cohort", "cohort_dir", type=click.Path(path_type=Path), required=True)
@click.option("--labels", "labels_path", type=click.Path(path_type=Path), required=True)
@click.option("--model", "model_dir", type=click.Path(path_type=Path), required=True)
@click.option("--horizon", default=4, show_default=True)
@click.option("--k-neighbors", default=20, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
def embed(cohort_dir, labels_path, model_dir, horizon, k_neighbors, out):
    """Spectral embedding of the model's final-hour representations."""
    from .autodiff import Tape, Tensor
    from .interpret import InterpretError, spectral_embed

    started = _now()
    _require_dir(model_dir, "model directory")
    schema, cohort, onsets = _load_training_inputs(cohort_dir, labels_path, "sepsis-3")
    model = load_model(model_dir / "model.ckpt")
    stats = load_stats(model_dir / "stats.json")
    if not hasattr(model, "representations"):
        raise CliError(ERR_CONFIG, f"{model.kind} has no learned representation to embed")
    sequences, _ = build_dataset(cohort, onsets, schema, horizon, stats=stats)
    ids, reps = [], []
    with Tape():
        for s in sequences:
            xs = [Tensor(s.x[t : t + 1]) for t in range(len(s.x))]
            reps.append(model.representations(xs)[-1].data[0])
            ids.append(s.patient_id)
    try:
        embedding = spectral_embed(np.stack(reps), k_neighbors, source="final-hour")
    except InterpretError as exc:
        raise CliError(ERR_DATA, str(exc)) from exc
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "embedding.csv", "w") as fh:
        fh.write("patient_id,c1,c2,c3\n")
        for pid, row in zip(ids, embedding.points):
            fh.write(f"{pid},{row[0]:.10g},{row[1]:.10g},{row[2]:.10g}\n")
    _manifest("embed", dict(cohort=cohort_dir, labels=labels_path, model=model_dir,
                            horizon=horizon, k_neighbors=k_neighbors, out=out),
              out, started)
    click.echo(f"embedded {len(ids)} patients -> {out / 'embedding.csv'}")


@main.command()
@click.option("--cohort", "cohort_dir", type=click.Path(path_type=Path), required=True)
@click.option("--labels", "labels_path", type=click.Path(path_type=Path), required=True)
@click.option("--criterion", type=click.Choice(["sepsis-3", "sepsis-cdc"]), default="sepsis-3", show_default=True)
@click.option("--level", type=click.IntRange(1, 4), default=3, show_default=True)
@click.option("--restarts", default=50, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
def ate(cohort_dir, labels_path, criterion, level, restarts, seed, out):
    """Attributable treatment effect of moving everyone to --level."""
    from .treatment import (
        DegenerateDataError,
        TreatmentPolicy,
        estimate_effect,
        format_effect_table,
        policy_samples_from_cohort,
    )

    started = _now()
    schema, cohort, onsets = _load_training_inputs(cohort_dir, labels_path, criterion)
    samples = policy_samples_from_cohort(cohort, onsets, schema)
    if not samples:
        raise CliError(ERR_DATA, "no patients with both onset and antibiotics in range")
    policy = TreatmentPolicy(criterion, level)
    try:
        estimate = estimate_effect(policy, samples, restarts=restarts, seed=seed)
    except DegenerateDataError as exc:
        raise CliError(ERR_DATA, str(exc)) from exc
    out.mkdir(parents=True, exist_ok=True)
    (out / "effect.json").write_text(json.dumps({
        "criterion": criterion,
        "level": level,
        "delta_median": estimate.delta_median,
        "delta_iqr": list(estimate.delta_iqr),
        "deltas": estimate.deltas.tolist(),
    }, indent=2))
    _manifest("ate", dict(cohort=cohort_dir, labels=labels_path, criterion=criterion,
                          level=level, restarts=restarts, seed=seed, out=out),
              out, started)
    click.echo(format_effect_table([(criterion, level, estimate)]))


def _platform_stack(cohort_dir: Path, labels_path: Path, model_dir: Path, horizon: int):
    from .platform import DocumentStore, ModelService, Orchestrator, WorkflowBoard

    schema, cohort, onsets = _load_training_inputs(cohort_dir, labels_path, "sepsis-3")
    model = load_model(model_dir / "model.ckpt")
    stats = load_stats(model_dir / "stats.json")
    service = ModelService(model, schema, stats, horizon)
    store = DocumentStore()
    board = WorkflowBoard()
    orch = Orchestrator(cohort, service, store, board)
    return service, store, board, orch, cohort


@main.command()
@click.option("--cohort", "cohort_dir", type=click.Path(path_type=Path), required=True)
@click.option("--labels", "labels_path", type=click.Path(path_type=Path), required=True)
@click.option("--model", "model_dir", type=click.Path(path_type=Path), required=True)
@click.option("--horizon", default=4, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8100, show_default=True)
def serve(cohort_dir, labels_path, model_dir, horizon, host, port):
    """Run the scoring API without advancing the simulated clock."""
    import uvicorn

    from .service import build_app

    _require_dir(model_dir, "model directory")
    service, store, board, orch, _ = _platform_stack(
        cohort_dir, labels_path, model_dir, horizon
    )
    uvicorn.run(build_app(service, store, board, orch), host=host, port=port)


@main.command()
@click.option("--cohort", "cohort_dir", type=click.Path(path_type=Path), required=True)
@click.option("--labels", "labels_path", type=click.Path(path_type=Path), required=True)
@click.option("--model", "model_dir", type=click.Path(path_type=Path), required=True)
@click.option("--horizon", default=4, show_default=True)
@click.option("--speedup", default=3600.0, show_default=True,
              help="simulated hours per wall-hour; 3600 = 1 s per patient-hour")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8100, show_default=True)
def simulate(cohort_dir, labels_path, model_dir, horizon, speedup, host, port):
    """Replay the cohort feed through the platform while serving the API."""
    import uvicorn

    from .service import build_app

    _require_dir(model_dir, "model directory")
    service, store, board, orch, cohort = _platform_stack(
        cohort_dir, labels_path, model_dir, horizon
    )
    spans = sorted(
        (p.icu_admit_time, p.icu_discharge_time) for p in cohort.patients
    )
    tick_sleep = 3600.0 / speedup

    def feed():
        for admit, discharge in spans:
            for hour in range(admit, discharge):
                orch.tick(hour)
                time.sleep(tick_sleep)

    threading.Thread(target=feed, daemon=True).start()
    uvicorn.run(build_app(service, store, board, orch), host=host, port=port)


if __name__ == "__main__":
    main()
