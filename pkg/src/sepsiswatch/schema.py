"""Feature schema: the ordered list of model inputs and their metadata.

The default schema ships 65 entries: named vitals, labs, and
demographic/context features plus generically named filler labs. It is a
stand-in for a site-specific feature dictionary, which is not public; treat
the filler labs as placeholders when adapting to real data.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import yaml

SCHEMA_VERSION = 1

GROUPS = ("clinical", "laboratory", "demographic-context")


class SchemaError(ValueError):
    pass


@dataclass(frozen=True)
class FeatureSpec:
    """One model input feature."""

    identifier: str
    group: str
    unit: str
    lo: float
    hi: float
    missing_prob: float

    def __post_init__(self):
        if self.group not in GROUPS:
            raise SchemaError(f"unknown group {self.group!r} for {self.identifier}")
        if not self.lo < self.hi:
            raise SchemaError(f"range for {self.identifier} must satisfy lo < hi")
        if not 0.0 <= self.missing_prob <= 1.0:
            raise SchemaError(f"missing_prob for {self.identifier} out of [0,1]")

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lo + self.hi)


@dataclass
class FeatureSchema:
    entries: list[FeatureSpec] = field(default_factory=list)

    def __post_init__(self):
        ids = [e.identifier for e in self.entries]
        if len(set(ids)) != len(ids):
            raise SchemaError("duplicate feature identifiers")
        self._index = {e.identifier: i for i, e in enumerate(self.entries)}

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, identifier: str) -> bool:
        return identifier in self._index

    def index(self, identifier: str) -> int:
        return self._index[identifier]

    def get(self, identifier: str) -> FeatureSpec:
        return self.entries[self._index[identifier]]

    def identifiers(self) -> list[str]:
        return [e.identifier for e in self.entries]

    def midpoints(self) -> list[float]:
        return [e.midpoint for e in self.entries]


def _named_entries() -> list[FeatureSpec]:
    C, L, D = GROUPS
    rows = [
        # identifier, group, unit, lo, hi, hourly missingness
        ("hr", C, "beats/min", 20, 220, 0.05),
        ("map", C, "mmHg", 30, 180, 0.05),
        ("sbp", C, "mmHg", 50, 250, 0.05),
        ("dbp", C, "mmHg", 20, 150, 0.05),
        ("resp", C, "breaths/min", 4, 60, 0.05),
        ("temp", C, "degC", 32, 42.5, 0.15),
        ("o2sat", C, "%", 60, 100, 0.05),
        ("gcs", C, "points", 3, 15, 0.2),
        ("vasopressor", C, "flag", -0.5, 1.5, 0.0),
        ("mech_vent", C, "flag", -0.5, 1.5, 0.0),
        ("fio2", C, "fraction", 0.21, 1.0, 0.3),
        ("pf_ratio", C, "mmHg", 40, 600, 0.6),
        ("etco2", C, "mmHg", 10, 80, 0.7),
        ("urine_output", C, "mL/h", 0, 500, 0.3),
        ("pao2", L, "mmHg", 30, 500, 0.6),
        ("paco2", L, "mmHg", 10, 110, 0.6),
        ("ph", L, "pH", 6.8, 7.8, 0.6),
        ("lactate", L, "mmol/L", 0.2, 20, 0.8),
        ("wbc", L, "x10^3/uL", 0.1, 60, 0.7),
        ("hemoglobin", L, "g/dL", 3, 22, 0.7),
        ("hematocrit", L, "%", 10, 65, 0.7),
        ("platelets", L, "x10^3/uL", 5, 800, 0.7),
        ("creatinine", L, "mg/dL", 0.2, 12, 0.7),
        ("bun", L, "mg/dL", 2, 150, 0.7),
        ("bilirubin", L, "mg/dL", 0.1, 25, 0.85),
        ("albumin", L, "g/dL", 1, 6, 0.85),
        ("alt", L, "U/L", 5, 2000, 0.85),
        ("ast", L, "U/L", 5, 2000, 0.85),
        ("inr", L, "ratio", 0.8, 10, 0.8),
        ("ptt", L, "s", 15, 150, 0.8),
        ("fibrinogen", L, "mg/dL", 50, 900, 0.9),
        ("glucose", L, "mg/dL", 20, 600, 0.5),
        ("sodium", L, "mmol/L", 110, 170, 0.7),
        ("potassium", L, "mmol/L", 1.5, 8.5, 0.7),
        ("chloride", L, "mmol/L", 80, 130, 0.7),
        ("bicarbonate", L, "mmol/L", 5, 45, 0.7),
        ("magnesium", L, "mg/dL", 0.5, 5, 0.8),
        ("calcium", L, "mg/dL", 5, 14, 0.8),
        ("phosphorus", L, "mg/dL", 0.5, 10, 0.85),
        ("troponin", L, "ng/mL", 0.0, 50, 0.95),
        ("crp", L, "mg/L", 0.1, 400, 0.95),
        ("band_neutrophils", L, "%", 0, 50, 0.95),
        ("age", D, "years", 18, 100, 0.0),
        ("sex", D, "flag", -0.5, 1.5, 0.0),
        ("weight", D, "kg", 30, 250, 0.0),
        ("height", D, "cm", 120, 220, 0.0),
        ("charlson_index", D, "points", 0, 20, 0.0),
        ("care_unit", D, "code", -0.5, 4.5, 0.0),
        ("recent_surgery", D, "flag", -0.5, 1.5, 0.0),
        ("icu_los_hours", D, "h", 0, 481, 0.0),
    ]
    entries = [FeatureSpec(i, g, u, float(lo), float(hi), float(m)) for i, g, u, lo, hi, m in rows]
    # filler labs; placeholders for unnamed site-specific features
    for k in range(1, 16):
        entries.append(FeatureSpec(f"lab_{k:02d}", L, "arb", 0.0, 100.0, 0.9))
    return entries


def default_schema() -> FeatureSchema:
    """The default 65-feature schema."""
    schema = FeatureSchema(_named_entries())
    assert len(schema) == 65
    return schema


def save_schema(schema: FeatureSchema, path) -> None:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "features": [
            {
                "identifier": e.identifier,
                "group": e.group,
                "unit": e.unit,
                "range": [e.lo, e.hi],
                "missing_prob": e.missing_prob,
            }
            for e in schema.entries
        ],
    }
    with open(path, "w") as fh:
        yaml.safe_dump(doc, fh, sort_keys=False)


def load_schema(path) -> FeatureSchema:
    with open(path) as fh:
        doc = yaml.safe_load(fh)
    if "schema_version" not in doc:
        raise SchemaError("schema file missing schema_version")
    entries = [
        FeatureSpec(
            identifier=f["identifier"],
            group=f["group"],
            unit=f["unit"],
            lo=float(f["range"][0]),
            hi=float(f["range"][1]),
            missing_prob=float(f["missing_prob"]),
        )
        for f in doc["features"]
    ]
    return FeatureSchema(entries)
