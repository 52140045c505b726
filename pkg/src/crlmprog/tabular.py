"""Cohort data model, CSV/JSON ingestion and a synthetic CRLM cohort generator."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

KINDS = ("continuous", "categorical")
TEMPORAL_TAGS = ("baseline", "postoperative", "outcome")
PROVENANCES = ("clinical", "radiomic", "derived")

# Structural outcome columns of the cohort CSV; these are record fields, not schema variables.
OUTCOME_FIELDS = (
    "months_to_progression",
    "recurrence_event",
    "os_months",
    "os_event",
    "dfs_months",
    "dfs_event",
)
ID_FIELD = "id"


class CohortError(ValueError):
    """Invalid cohort data or schema."""


class DuplicateId(CohortError):
    pass


class SchemaError(CohortError):
    pass


def is_missing_token(cell: str | None) -> bool:
    return cell is None or cell.strip() == "" or cell.strip().lower() == "na"


def is_missing(value: Any) -> bool:
    if value is None:
        return True
    return isinstance(value, float) and math.isnan(value)


@dataclass(frozen=True)
class VariableSchema:
    name: str
    kind: str
    temporal_tag: str
    provenance: str = "clinical"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"variable {self.name!r}: kind must be one of {KINDS}, got {self.kind!r}")
        if self.temporal_tag not in TEMPORAL_TAGS:
            raise SchemaError(
                f"variable {self.name!r}: temporal_tag must be one of {TEMPORAL_TAGS}, got {self.temporal_tag!r}"
            )
        if self.provenance not in PROVENANCES:
            raise SchemaError(f"variable {self.name!r}: unknown provenance {self.provenance!r}")

    def to_dict(self) -> dict:
        return {"name": self.name, "kind": self.kind, "temporal_tag": self.temporal_tag, "provenance": self.provenance}


@dataclass(frozen=True)
class PatientRecord:
    id: str
    variables: Mapping[str, Any]
    months_to_progression: float | None = None
    recurrence_event: int = 0
    os_months: float | None = None
    os_event: int = 0
    dfs_months: float | None = None
    dfs_event: int = 0

    def __post_init__(self):
        for name in ("recurrence_event", "os_event", "dfs_event"):
            if getattr(self, name) not in (0, 1):
                raise CohortError(f"patient {self.id}: {name} must be 0 or 1")
        for name in ("months_to_progression", "os_months", "dfs_months"):
            v = getattr(self, name)
            if v is not None and not v >= 0:
                raise CohortError(f"patient {self.id}: {name} must be >= 0, got {v}")
        if self.recurrence_event == 1 and self.months_to_progression is None:
            raise CohortError(f"patient {self.id}: recurrence_event=1 requires months_to_progression")


@dataclass(frozen=True)
class Cohort:
    records: tuple[PatientRecord, ...]
    schema: tuple[VariableSchema, ...]
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        object.__setattr__(self, "schema", tuple(self.schema))
        names = [v.name for v in self.schema]
        if len(set(names)) != len(names):
            raise SchemaError("schema declares a variable more than once")
        seen = set()
        for r in self.records:
            if r.id in seen:
                raise DuplicateId(f"duplicate patient id {r.id!r}")
            seen.add(r.id)
            extra = set(r.variables) - set(names)
            if extra:
                raise SchemaError(f"patient {r.id}: variables absent from schema: {sorted(extra)}")
        object.__setattr__(self, "_index", {v.name: v for v in self.schema})

    def __len__(self) -> int:
        return len(self.records)

    @property
    def ids(self) -> list[str]:
        return [r.id for r in self.records]

    @property
    def names(self) -> list[str]:
        return [v.name for v in self.schema]

    def variable(self, name: str) -> VariableSchema:
        try:
            return self._index[name]
        except KeyError:
            raise KeyError(f"unknown variable {name!r}") from None

    def column(self, name: str) -> list:
        self.variable(name)
        return [r.variables.get(name) for r in self.records]

    def numeric_column(self, name: str) -> np.ndarray:
        """Continuous column as float array with NaN for missing values."""
        return np.array([np.nan if is_missing(v) else float(v) for v in self.column(name)], dtype=float)

    def outcome(self, name: str) -> np.ndarray:
        if name not in OUTCOME_FIELDS:
            raise KeyError(name)
        return np.array([np.nan if getattr(r, name) is None else getattr(r, name) for r in self.records], float)

    def missing_fraction(self, name: str) -> float:
        col = self.column(name)
        if not col:
            return 0.0
        return sum(is_missing(v) for v in col) / len(col)

    def drop_variables(self, names: Iterable[str]) -> "Cohort":
        names = set(names)
        schema = [v for v in self.schema if v.name not in names]
        records = [
            PatientRecord(
                id=r.id,
                variables={k: v for k, v in r.variables.items() if k not in names},
                months_to_progression=r.months_to_progression,
                recurrence_event=r.recurrence_event,
                os_months=r.os_months,
                os_event=r.os_event,
                dfs_months=r.dfs_months,
                dfs_event=r.dfs_event,
            )
            for r in self.records
        ]
        return Cohort(records, schema)

    def subset(self, indices: Sequence[int]) -> "Cohort":
        return Cohort([self.records[i] for i in indices], self.schema)


# ---------------------------------------------------------------------------
# serialization


def load_schema_json(path: str | Path) -> list[VariableSchema]:
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    if isinstance(raw, dict) and "variables" in raw:
        raw = raw["variables"]  # annotated form: {"variables": [...], other metadata}
    if not isinstance(raw, list):
        raise SchemaError("schema JSON must be an array of {name, kind, temporal_tag}")
    out = []
    for entry in raw:
        for key in ("name", "kind", "temporal_tag"):
            if key not in entry or entry[key] in (None, ""):
                raise SchemaError(f"schema entry {entry.get('name', '?')!r} lacks {key}")
        out.append(
            VariableSchema(entry["name"], entry["kind"], entry["temporal_tag"], entry.get("provenance", "clinical"))
        )
    return out


def write_schema_json(schema: Sequence[VariableSchema], path: str | Path, metadata: dict | None = None) -> None:
    """Write the schema as a JSON array, or as {"variables": [...], **metadata} when metadata is given."""
    doc: Any = [v.to_dict() for v in schema]
    if metadata:
        doc = {**metadata, "variables": doc}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=bool(metadata))
        fh.write("\n")


def _parse_float(cell: str) -> float | None:
    if is_missing_token(cell):
        return None
    try:
        v = float(cell)
    except ValueError:
        return None
    return None if math.isnan(v) else v


def _parse_event(cell: str, pid: str, name: str) -> int:
    v = _parse_float(cell)
    if v is None:
        return 0
    if v not in (0.0, 1.0):
        raise CohortError(f"patient {pid}: {name} must be 0 or 1, got {cell!r}")
    return int(v)


def _data_lines(fh):
    for line in fh:
        if not line.startswith("#"):
            yield line


def load_cohort_csv(path: str | Path, schema_path: str | Path) -> Cohort:
    """Read a cohort CSV against its schema JSON.

    Empty cells and ``NA`` (any case) are missing; unparseable numbers in
    continuous columns are also treated as missing. Lines starting with ``#``
    are metadata comments and are skipped.
    """
    schema = load_schema_json(schema_path)
    by_name = {v.name: v for v in schema}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(_data_lines(fh))
        header = reader.fieldnames or []
        if ID_FIELD not in header:
            raise SchemaError(f"cohort CSV lacks an {ID_FIELD!r} column")
        unknown = [h for h in header if h != ID_FIELD and h not in OUTCOME_FIELDS and h not in by_name]
        if unknown:
            raise SchemaError(f"CSV columns absent from schema: {unknown}")
        var_cols = [h for h in header if h in by_name]
        records = []
        seen = set()
        for row in reader:
            pid = row[ID_FIELD]
            if pid in seen:
                raise DuplicateId(f"duplicate patient id {pid!r}")
            seen.add(pid)
            values: dict[str, Any] = {}
            for name in var_cols:
                cell = row[name]
                if by_name[name].kind == "continuous":
                    values[name] = _parse_float(cell)
                else:
                    values[name] = None if is_missing_token(cell) else cell
            records.append(
                PatientRecord(
                    id=pid,
                    variables=values,
                    months_to_progression=_parse_float(row.get("months_to_progression", "")),
                    recurrence_event=_parse_event(row.get("recurrence_event", ""), pid, "recurrence_event"),
                    os_months=_parse_float(row.get("os_months", "")),
                    os_event=_parse_event(row.get("os_event", ""), pid, "os_event"),
                    dfs_months=_parse_float(row.get("dfs_months", "")),
                    dfs_event=_parse_event(row.get("dfs_event", ""), pid, "dfs_event"),
                )
            )
    # Schema entries not present in the CSV stay in the schema as fully missing columns.
    return Cohort(records, schema)


def _fmt(value: Any) -> str:
    if is_missing(value):
        return "NA"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_cohort_csv(cohort: Cohort, path: str | Path, header_comment: str | None = None) -> None:
    names = cohort.names
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([ID_FIELD, *OUTCOME_FIELDS, *names])
        for r in cohort.records:
            w.writerow(
                [r.id]
                + [_fmt(getattr(r, f)) for f in OUTCOME_FIELDS]
                + [_fmt(r.variables.get(n)) for n in names]
            )


# ---------------------------------------------------------------------------
# summary


@dataclass(frozen=True)
class SummaryRow:
    variable: str
    level: str | None  # None for continuous rows
    n: int
    mean: float | None = None
    sd: float | None = None
    count: int | None = None
    percent: float | None = None
    missing_fraction: float = 0.0

    def formatted(self) -> str:
        if self.level is None:
            if self.mean is None:
                return "NA"
            return f"{self.mean:.1f} ± {self.sd:.1f}" if self.sd is not None else f"{self.mean:.1f}"
        return f"{self.count} ({self.percent:.1f})"


def summarize_cohort(cohort: Cohort) -> list[SummaryRow]:
    """Table-I style summary: mean ± SD (n−1) or count (%) per level, with missingness."""
    if len(cohort) == 0:
        raise CohortError("cannot summarize an empty cohort")
    rows: list[SummaryRow] = []
    for var in cohort.schema:
        miss = cohort.missing_fraction(var.name)
        if var.kind == "continuous":
            x = cohort.numeric_column(var.name)
            x = x[~np.isnan(x)]
            mean = float(x.mean()) if x.size else None
            sd = float(x.std(ddof=1)) if x.size > 1 else None
            rows.append(SummaryRow(var.name, None, int(x.size), mean=mean, sd=sd, missing_fraction=miss))
        else:
            col = [v for v in cohort.column(var.name) if not is_missing(v)]
            levels = sorted(set(map(str, col)))
            for lev in levels:
                c = sum(1 for v in col if str(v) == lev)
                rows.append(
                    SummaryRow(var.name, lev, len(col), count=c, percent=100.0 * c / len(col), missing_fraction=miss)
                )
            if not levels:
                rows.append(SummaryRow(var.name, "", 0, count=0, percent=float("nan"), missing_fraction=miss))
    return rows


def format_summary(rows: Sequence[SummaryRow]) -> str:
    width = max(len(f"{r.variable} [{r.level}]") if r.level else len(r.variable) for r in rows) + 2
    lines = [f"{'variable':<{width}}{'value':>18}{'missing':>10}"]
    for r in rows:
        label = f"{r.variable} [{r.level}]" if r.level else r.variable
        lines.append(f"{label:<{width}}{r.formatted():>18}{r.missing_fraction:>10.3f}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# synthetic cohort

# Table I targets: (variable, level, proportion)
TABLE_I_PROPORTIONS = {
    "sex": ("male", 0.599),
    "primary_location": ("colon", 0.701),
    "synchronous_metastases": ("1", 0.589),
    "extrahepatic_disease": ("1", 0.228),
    "tumor_size_le_5cm": ("1", 0.396),
}
TABLE_I_AGE = (62.1, 11.5)

# Recurrence model. A baseline risk index drives the probability of an early
# (biologically aggressive) recurrence, whose timing is fast exponential; every
# patient also carries a slower exponential late-recurrence hazard that depends
# only weakly on the same index.
_EARLY_INTERCEPT = -1.1
_EARLY_RATE = 2.0  # per month
_LATE_RATE = 0.022  # per month
_LATE_INDEX_EFFECT = 0.2
_METABOLIC_EFFECT = 1.25
_COMORBIDITY_EFFECT = -1.2
_CLINICAL_EFFECTS = {"extrahepatic_disease": 0.7, "synchronous_metastases": 0.4, "log_cea": 0.4, "log_size": 0.45}


SYNTHETIC_SCHEMA: tuple[VariableSchema, ...] = (
    VariableSchema("age", "continuous", "baseline"),
    VariableSchema("sex", "categorical", "baseline"),
    VariableSchema("bmi", "continuous", "baseline"),
    VariableSchema("nash_score", "continuous", "baseline"),
    VariableSchema("liver_hu", "continuous", "baseline"),
    VariableSchema("primary_location", "categorical", "baseline"),
    VariableSchema("t_stage", "categorical", "baseline"),
    VariableSchema("n_stage", "categorical", "baseline"),
    VariableSchema("synchronous_metastases", "categorical", "baseline"),
    VariableSchema("extrahepatic_disease", "categorical", "baseline"),
    VariableSchema("tumor_count", "continuous", "baseline"),
    VariableSchema("largest_tumor_cm", "continuous", "baseline"),
    VariableSchema("tumor_size_le_5cm", "categorical", "baseline"),
    VariableSchema("cea_preop", "continuous", "baseline"),
    VariableSchema("ca199_preop", "continuous", "baseline"),
    VariableSchema("albumin", "continuous", "baseline"),
    VariableSchema("alt", "continuous", "baseline"),
    VariableSchema("platelet_count", "continuous", "baseline"),
    VariableSchema("diabetes", "categorical", "baseline"),
    VariableSchema("hypertension", "categorical", "baseline"),
    VariableSchema("comorbidity", "categorical", "baseline"),
    VariableSchema("asa_class", "categorical", "baseline"),
    VariableSchema("neoadjuvant_chemo", "categorical", "baseline"),
    VariableSchema("kras_status", "categorical", "baseline"),
    VariableSchema("bmi_age_interaction", "continuous", "baseline", "derived"),
    VariableSchema("adjuvant_chemo", "categorical", "postoperative"),
    VariableSchema("postop_complication", "categorical", "postoperative"),
    VariableSchema("postop_cea", "continuous", "postoperative"),
    VariableSchema("resection_margin_r1", "categorical", "postoperative"),
    VariableSchema("vital_status_DFS", "categorical", "outcome"),
    VariableSchema("vital_status_liver_DFS", "categorical", "outcome"),
    VariableSchema("progression_or_recurrence_liveronly", "categorical", "outcome"),
    VariableSchema("dfs_time_months", "continuous", "outcome"),
)

RADIOMIC_SCHEMA: tuple[VariableSchema, ...] = tuple(
    VariableSchema(name, "continuous", "baseline", "radiomic")
    for name in (
        "original_shape_Maximum3DDiameter_mean",
        "original_shape_Sphericity_mean",
        "original_firstorder_Mean_mean",
        "original_firstorder_Entropy_mean",
        "original_glcm_Contrast_mean",
        "original_glrlm_RunPercentage_mean",
        "original_glszm_ZonePercentage_mean",
    )
)


def _flag(b: bool) -> str:
    return "1" if b else "0"


def generate_synthetic_cohort(
    n: int, seed: int, planted_signal: str = "metabolic", radiomic: bool = True
) -> Cohort:
    """Simulate a resected-CRLM cohort whose marginals follow Table I.

    Recurrence combines an early component (probability logistic in a risk
    index, exponential timing) with a late exponential hazard that is
    log-linear in the same index. With ``planted_signal="metabolic"`` the index
    rises with a latent metabolic dysfunction variable that also drives BMI,
    NASH score and (inversely) liver attenuation; comorbidity lowers it.
    Tumour-burden effects are present in both modes. Follow-up is uniform on
    24-60 months.
    """
    if planted_signal not in ("none", "metabolic"):
        raise ValueError(f"planted_signal must be 'none' or 'metabolic', got {planted_signal!r}")
    if n < 10:
        raise ValueError(f"n must be >= 10, got {n}")
    rng = np.random.default_rng(seed)

    age = np.clip(rng.normal(*TABLE_I_AGE, n), 18.0, 95.0)
    male = rng.random(n) < TABLE_I_PROPORTIONS["sex"][1]
    colon = rng.random(n) < TABLE_I_PROPORTIONS["primary_location"][1]
    synchronous = rng.random(n) < TABLE_I_PROPORTIONS["synchronous_metastases"][1]
    extrahepatic = rng.random(n) < TABLE_I_PROPORTIONS["extrahepatic_disease"][1]
    # lognormal size with P(size <= 5 cm) = 0.396
    sigma_size = 0.5
    mu_size = math.log(5.0) + 0.26376 * sigma_size
    size = np.exp(rng.normal(mu_size, sigma_size, n))
    tumor_count = 1.0 + rng.poisson(np.where(synchronous, 1.4, 0.8))

    metabolic = rng.normal(0.0, 1.0, n)
    bmi = 26.0 + 3.6 * (0.75 * metabolic + 0.66 * rng.normal(size=n))
    nash = np.clip(2.5 + 1.4 * (0.75 * metabolic + 0.66 * rng.normal(size=n)), 0.0, 8.0)
    liver_hu = 56.0 - 7.5 * (0.75 * metabolic + 0.66 * rng.normal(size=n))
    diabetes = rng.random(n) < 1 / (1 + np.exp(-(-1.6 + 0.6 * metabolic)))
    hypertension = rng.random(n) < 0.34
    comorbidity = diabetes | hypertension | (rng.random(n) < 0.08)

    log_cea = rng.normal(1.8, 1.0, n) + 0.3 * extrahepatic
    cea = np.exp(log_cea)
    ca199 = np.exp(rng.normal(3.0, 1.1, n) + 0.2 * log_cea)
    albumin = rng.normal(40.0, 4.0, n)
    alt = np.exp(rng.normal(3.2, 0.45, n) + 0.15 * metabolic)
    platelet = rng.normal(230.0, 60.0, n).clip(50.0)
    t_stage = rng.choice(np.array(["T1", "T2", "T3", "T4"]), n, p=[0.05, 0.15, 0.6, 0.2])
    n_stage = rng.choice(np.array(["N0", "N1", "N2"]), n, p=[0.35, 0.4, 0.25])
    asa = rng.choice(np.array(["1", "2", "3"]), n, p=[0.2, 0.6, 0.2])
    neoadjuvant = rng.random(n) < 0.45
    kras = rng.choice(np.array(["wild", "mutant"]), n, p=[0.55, 0.45])

    lp = _COMORBIDITY_EFFECT * comorbidity
    lp = lp + _CLINICAL_EFFECTS["extrahepatic_disease"] * extrahepatic
    lp = lp + _CLINICAL_EFFECTS["synchronous_metastases"] * synchronous
    lp = lp + _CLINICAL_EFFECTS["log_cea"] * (log_cea - 1.8)
    lp = lp + _CLINICAL_EFFECTS["log_size"] * (np.log(size) - mu_size) / sigma_size
    if planted_signal == "metabolic":
        lp = lp + _METABOLIC_EFFECT * metabolic
    early = rng.random(n) < 1.0 / (1.0 + np.exp(-(_EARLY_INTERCEPT + lp)))
    t_early = rng.exponential(1.0 / _EARLY_RATE, n)
    t_late = rng.exponential(1.0 / (_LATE_RATE * np.exp(_LATE_INDEX_EFFECT * lp)))
    t_rec = np.where(early, np.minimum(t_early, t_late), t_late)
    follow_up = rng.uniform(24.0, 60.0, n)
    recurred = t_rec <= follow_up
    # death: more likely after recurrence; cohort requires survival beyond 3 months
    t_death = np.where(recurred, t_rec + rng.exponential(30.0, n), 3.0 + rng.exponential(180.0, n))
    os_event = t_death <= follow_up
    os_months = np.minimum(t_death, follow_up)
    dfs_time = np.where(recurred, t_rec, np.minimum(t_death, follow_up))
    dfs_event = recurred | os_event
    liver_only = recurred & (rng.random(n) < np.where(extrahepatic, 0.35, 0.65))

    # postoperative variables carry information about the future course
    adjuvant = rng.random(n) < 0.55 + 0.2 * extrahepatic
    complication = rng.random(n) < 0.22 + 0.08 * comorbidity
    postop_cea = np.exp(rng.normal(1.0, 0.5, n) + 1.2 * recurred * np.exp(-t_rec / 12.0))
    margin_r1 = rng.random(n) < 0.12 + 0.1 * recurred

    radiomic_vals = {}
    if radiomic:
        tex = rng.normal(size=n)
        radiomic_vals = {
            "original_shape_Maximum3DDiameter_mean": size * 10.0 * np.exp(rng.normal(0, 0.08, n)),
            "original_shape_Sphericity_mean": np.clip(rng.normal(0.72, 0.07, n) - 0.02 * (tumor_count - 1), 0.3, 0.99),
            "original_firstorder_Mean_mean": 78.0 - 6.0 * (0.6 * metabolic + 0.8 * rng.normal(size=n)),
            "original_firstorder_Entropy_mean": 3.4 + 0.25 * tex + 0.1 * rng.normal(size=n),
            "original_glcm_Contrast_mean": np.exp(1.2 + 0.3 * tex + 0.15 * rng.normal(size=n)),
            "original_glrlm_RunPercentage_mean": np.clip(0.82 + 0.04 * tex + 0.02 * rng.normal(size=n), 0.3, 1.0),
            "original_glszm_ZonePercentage_mean": np.clip(0.45 + 0.06 * tex + 0.03 * rng.normal(size=n), 0.05, 1.0),
        }

    # missingness: ca199 ~12%, albumin ~4%, kras ~38% (exceeds the 30% filter)
    miss_ca199 = rng.random(n) < 0.12
    miss_albumin = rng.random(n) < 0.04
    miss_kras = rng.random(n) < 0.38

    schema = list(SYNTHETIC_SCHEMA) + (list(RADIOMIC_SCHEMA) if radiomic else [])
    width = max(3, len(str(n)))
    records = []
    for i in range(n):
        v: dict[str, Any] = {
            "age": round(float(age[i]), 1),
            "sex": "male" if male[i] else "female",
            "bmi": round(float(bmi[i]), 2),
            "nash_score": round(float(nash[i]), 2),
            "liver_hu": round(float(liver_hu[i]), 1),
            "primary_location": "colon" if colon[i] else "rectum",
            "t_stage": str(t_stage[i]),
            "n_stage": str(n_stage[i]),
            "synchronous_metastases": _flag(synchronous[i]),
            "extrahepatic_disease": _flag(extrahepatic[i]),
            "tumor_count": float(tumor_count[i]),
            "largest_tumor_cm": round(float(size[i]), 2),
            "tumor_size_le_5cm": _flag(round(float(size[i]), 2) <= 5.0),
            "cea_preop": round(float(cea[i]), 2),
            "ca199_preop": None if miss_ca199[i] else round(float(ca199[i]), 1),
            "albumin": None if miss_albumin[i] else round(float(albumin[i]), 1),
            "alt": round(float(alt[i]), 1),
            "platelet_count": round(float(platelet[i]), 0),
            "diabetes": _flag(diabetes[i]),
            "hypertension": _flag(hypertension[i]),
            "comorbidity": _flag(comorbidity[i]),
            "asa_class": str(asa[i]),
            "neoadjuvant_chemo": _flag(neoadjuvant[i]),
            "kras_status": None if miss_kras[i] else str(kras[i]),
            "bmi_age_interaction": round(float(bmi[i] * age[i] / 100.0), 3),
            "adjuvant_chemo": _flag(adjuvant[i]),
            "postop_complication": _flag(complication[i]),
            "postop_cea": round(float(postop_cea[i]), 2),
            "resection_margin_r1": _flag(margin_r1[i]),
            "vital_status_DFS": _flag(dfs_event[i]),
            "vital_status_liver_DFS": _flag(liver_only[i] or os_event[i]),
            "progression_or_recurrence_liveronly": _flag(liver_only[i]),
            "dfs_time_months": max(0.01, round(float(dfs_time[i]), 2)),
        }
        for name, arr in radiomic_vals.items():
            v[name] = round(float(arr[i]), 4)
        records.append(
            PatientRecord(
                id=f"P{i + 1:0{width}d}",
                variables=v,
                months_to_progression=max(0.01, round(float(t_rec[i]), 2)) if recurred[i] else None,
                recurrence_event=int(recurred[i]),
                os_months=round(float(os_months[i]), 2),
                os_event=int(os_event[i]),
                dfs_months=max(0.01, round(float(dfs_time[i]), 2)),
                dfs_event=int(dfs_event[i]),
            )
        )
    return Cohort(records, schema)
