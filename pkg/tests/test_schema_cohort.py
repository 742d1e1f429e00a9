"""Feature schema and cohort container contracts."""

import numpy as np
import pytest

from sepsiswatch.cohort import (
    Cohort,
    CohortError,
    ExclusionReport,
    PatientRecord,
    TherapyEvent,
    apply_exclusions,
    load_cohort,
    save_cohort,
)
from sepsiswatch.schema import (
    FeatureSchema,
    FeatureSpec,
    SchemaError,
    default_schema,
    load_schema,
    save_schema,
)
from sepsiswatch.synth import SynthConfig, generate_synthetic_cohort


class TestSchema:
    def test_default_has_65_features(self):
        assert len(default_schema()) == 65

    def test_groups_are_constrained(self):
        with pytest.raises(SchemaError):
            FeatureSpec("x", "bogus-group", "unit", 0, 1, 0.1)

    def test_range_must_be_ordered(self):
        with pytest.raises(SchemaError):
            FeatureSpec("x", "clinical", "unit", 5, 1, 0.1)

    def test_missing_prob_in_unit_interval(self):
        with pytest.raises(SchemaError):
            FeatureSpec("x", "clinical", "unit", 0, 1, 1.5)

    def test_duplicate_identifiers_rejected(self):
        spec = FeatureSpec("hr", "clinical", "bpm", 0, 300, 0.1)
        with pytest.raises(SchemaError):
            FeatureSchema([spec, spec])

    def test_midpoints(self):
        schema = default_schema()
        spec = schema.get("hr")
        assert schema.midpoints()[schema.index("hr")] == (spec.lo + spec.hi) / 2

    def test_roundtrip(self, tmp_path):
        schema = default_schema()
        save_schema(schema, tmp_path / "schema.yaml")
        loaded = load_schema(tmp_path / "schema.yaml")
        assert loaded.identifiers() == schema.identifiers()
        assert loaded.midpoints() == schema.midpoints()


class TestPatientRecord:
    def test_discharge_after_admit(self):
        with pytest.raises(CohortError):
            PatientRecord("p1", 10, 10)

    def test_los(self):
        assert PatientRecord("p1", 5, 30).los_hours == 25


class TestExclusions:
    @staticmethod
    def _cohort(records):
        return Cohort(patients=records, clinical_events=[], therapy_events=[])

    def test_boundaries_inclusive(self):
        cohort = self._cohort([
            PatientRecord("exact-min", 0, 8),
            PatientRecord("too-short", 0, 7),
            PatientRecord("exact-max", 0, 480),
            PatientRecord("too-long", 0, 481),
        ])
        kept, report = apply_exclusions(cohort, {})
        ids = {p.patient_id for p in kept.patients}
        assert ids == {"exact-min", "exact-max"}
        assert report.short_stay == 1
        assert report.long_stay == 1
        assert report.retained == 2

    def test_early_sepsis_boundary(self):
        cohort = self._cohort([
            PatientRecord("at-four", 0, 48),
            PatientRecord("before-four", 0, 48),
        ])
        kept, report = apply_exclusions(
            cohort, {"at-four": 4, "before-four": 3}
        )
        assert {p.patient_id for p in kept.patients} == {"at-four"}
        assert report.early_sepsis == 1


class TestCohortRoundtrip:
    def test_save_load(self, tmp_path):
        cohort = generate_synthetic_cohort(
            SynthConfig(n_patients=5, schema=default_schema(), seed=3)
        )
        save_cohort(cohort, tmp_path)
        loaded = load_cohort(tmp_path)
        assert [p.patient_id for p in loaded.patients] == [
            p.patient_id for p in cohort.patients
        ]
        assert loaded.clinical_events == cohort.clinical_events
        assert loaded.therapy_events == cohort.therapy_events


class TestSynth:
    def test_deterministic(self):
        cfg = SynthConfig(n_patients=6, schema=default_schema(), seed=9)
        a = generate_synthetic_cohort(cfg)
        b = generate_synthetic_cohort(cfg)
        assert a.clinical_events == b.clinical_events
        assert a.therapy_events == b.therapy_events

    def test_truth_flag_returns_onsets(self):
        cohort, truth = generate_synthetic_cohort(
            SynthConfig(n_patients=30, schema=default_schema(), seed=9),
            return_truth=True,
        )
        assert set(truth) == {p.patient_id for p in cohort.patients}
        # truth onsets are hours since admission, inside the stay
        for pid, t_inf in truth.items():
            if t_inf is not None:
                p = next(q for q in cohort.patients if q.patient_id == pid)
                assert 0 < t_inf < p.los_hours

    def test_hour_zero_battery_full(self):
        schema = default_schema()
        cohort = generate_synthetic_cohort(
            SynthConfig(n_patients=4, schema=schema, seed=1)
        )
        for p in cohort.patients:
            seen = {
                e.feature_id
                for e in cohort.events_for(p.patient_id)
                if e.time == p.icu_admit_time
            }
            assert seen == set(schema.identifiers())

    def test_therapy_ordering_for_septic(self):
        cohort, truth = generate_synthetic_cohort(
            SynthConfig(n_patients=40, schema=default_schema(), seed=2),
            return_truth=True,
        )
        for pid, t_inf in truth.items():
            if t_inf is None:
                continue
            kinds = {e.kind: e.time for e in cohort.therapy_for(pid)}
            assert kinds["culture-order"] >= t_inf
            assert kinds["antibiotic-order"] >= kinds["culture-order"]
            assert kinds["antibiotic-administration"] > kinds["antibiotic-order"]
