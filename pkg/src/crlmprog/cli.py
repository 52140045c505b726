"""Command-line workflow: generate, extract, preprocess, train-eval, survival, dca, audit, verify.

Every run is a pure function of its resolved configuration and input files. Options come
from built-in defaults, then an optional ``--config`` JSON file, then explicit flags. Each
artifact embeds the configuration hash and each output directory gets a ``manifest.json``
listing SHA-256 digests of inputs and artifacts, which ``verify`` replays and compares.

Exit codes: 0 success, 1 verification mismatch, 2 input error, 3 numerical non-convergence.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import tempfile
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .dca import DcaError, decision_curve, treatment_efficiency
from .evaluation import (
    EvaluationError,
    auc_score,
    bootstrap_ci,
    cross_validate,
    fit_pipeline,
    leakage_audit,
    metrics_dict,
    roc_auc,
    threshold_metrics,
    write_json,
    write_roc_csv,
)
from .models import ModelError, load_model, save_model
from .plotting import dca_svg, km_svg, write_svg
from .preprocess import (
    FeatureMatrix,
    PreprocessError,
    baseline_only_filter,
    drop_high_missingness,
    fit_preprocessor,
    make_horizon_labels,
    metabolic_score,
    stratified_split,
    write_manifest_csv,
)
from .radiomics import (
    DiscretizationSpec,
    ExtractionSettings,
    VolumeError,
    aggregate_lesions,
    ccc_filter,
    eroded_mask,
    extract_lesion_features,
    make_phantom,
    read_mask,
    read_volume,
    write_long_csv,
)
from .survival import (
    RISK_GROUPS,
    CoxNonConvergence,
    SurvivalDataset,
    SurvivalError,
    fit_cox,
    kaplan_meier,
    log_rank_test,
    number_at_risk,
    risk_group_stratification,
    tertile_cutoffs,
    write_km_csv,
)
from .tabular import (
    ID_FIELD,
    CohortError,
    format_summary,
    generate_synthetic_cohort,
    load_cohort_csv,
    summarize_cohort,
    write_cohort_csv,
    write_schema_json,
)

EXIT_OK, EXIT_MISMATCH, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3
LABEL_FIELDS = ("months_to_progression", "recurrence_event")
ENDPOINTS = {"os": ("os_months", "os_event"), "dfs": ("dfs_months", "dfs_event")}
INPUT_ERRORS = (CohortError, PreprocessError, VolumeError, SurvivalError, DcaError, EvaluationError, ModelError,
                ValueError, KeyError, OSError)


class InputError(Exception):
    """Bad or missing input; reported with exit code 2."""


@dataclass
class RunConfig:
    """Everything a run depends on besides its input files. ``out`` is excluded from the hash."""

    command: str = ""
    seed: int | None = None
    out: str = "."
    # generate
    n: int = 197
    signal: str = "metabolic"
    radiomic: bool = True
    # data inputs
    cohort: str | None = None
    schema: str | None = None
    scores: str | None = None
    model: str | None = None
    # extract
    volume: str | None = None
    masks: list[str] = field(default_factory=list)
    phantoms: int = 0
    lesions_per_phantom: int = 2
    bin_width: float | None = 25.0
    n_bins: int | None = None
    ccc_threshold: float | None = None
    # pipeline
    missingness_threshold: float = 0.30
    include_postop: bool = False
    model_spec: dict | None = None
    horizons: list[float] = field(default_factory=lambda: [3, 6, 12])
    train_fraction: float = 0.7
    smote: bool = True
    cv_folds: int = 5
    bootstrap_iterations: int = 1000
    threshold: float = 0.5
    # survival / dca / audit
    endpoint: str = "os"
    group_by: str = "score"
    score_column: str | None = None
    horizon: float | None = None
    rows: str = "test"
    pt_grid: list[float] | None = None
    diagnostic: bool = False
    risk_times: list[float] | None = None
    cox_covariates: list[str] = field(default_factory=list)

    def hashable(self) -> dict:
        d = asdict(self)
        d.pop("out")
        return d

    def config_hash(self) -> str:
        return sha256_bytes(canonical_json(self.hashable()).encode())[:16]


FIELD_NAMES = {f.name for f in fields(RunConfig)}


def canonical_json(doc: Any) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False)


def sha256_bytes(b: bytes) -> str:
    return hashlib.sha256(b).hexdigest()


def sha256_file(path: str | Path) -> str:
    return sha256_bytes(Path(path).read_bytes())


# ---------------------------------------------------------------------------
# configuration


def resolve_config(command: str, args: argparse.Namespace) -> RunConfig:
    """Defaults, then the JSON config file, then flags that were given explicitly."""
    values: dict[str, Any] = {}
    if getattr(args, "config", None):
        try:
            doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(doc, dict):
            raise InputError("config file must hold a JSON object")
        unknown = sorted(set(doc) - FIELD_NAMES)
        if unknown:
            raise InputError(f"unknown config keys: {unknown}")
        values.update(doc)
    for k, v in vars(args).items():
        if k in FIELD_NAMES and v is not None:
            values[k] = v
    values["command"] = command
    cfg = RunConfig(**values)
    if cfg.seed is not None:
        cfg.seed = int(cfg.seed)
    cfg.horizons = [_num(h) for h in cfg.horizons]
    if cfg.horizon is not None:
        cfg.horizon = _num(cfg.horizon)
    return cfg


def _num(v):
    v = float(v)
    return int(v) if v.is_integer() else v


def _hlabel(h) -> str:
    return f"{_num(h)}m"


class Run:
    """Output directory bookkeeping: artifact paths, config-hash stamping and the manifest."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.hash = cfg.config_hash()
        self.dir = Path(cfg.out)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.artifacts: list[str] = []
        self.inputs: dict[str, str] = {}

    @property
    def stamp(self) -> str:
        return f"config_hash: {self.hash}"

    def path(self, name: str) -> Path:
        self.artifacts.append(name)
        return self.dir / name

    def input(self, path: str | None, what: str) -> Path:
        if not path:
            raise InputError(f"--{what} is required for {self.cfg.command}")
        p = Path(path)
        if not p.is_file():
            raise InputError(f"{what} file not found: {p}")
        self.inputs[str(p)] = sha256_file(p)
        return p

    def json(self, name: str, doc: dict) -> None:
        write_json({"config_hash": self.hash, **doc}, self.path(name))

    def text(self, name: str, text: str) -> None:
        self.path(name).write_text(f"# {self.stamp}\n{text}", encoding="utf-8")

    def finish(self) -> None:
        manifest = {
            "tool": "crlmprog",
            "version": __version__,
            "command": self.cfg.command,
            "config": self.cfg.hashable(),
            "config_hash": self.hash,
            "inputs": self.inputs,
            "artifacts": {a: sha256_file(self.dir / a) for a in sorted(set(self.artifacts))},
        }
        write_json(manifest, self.dir / "manifest.json")


def _load_cohort(run: Run, *, need_labels: bool = False):
    cohort_path = run.input(run.cfg.cohort, "cohort")
    schema_path = run.input(run.cfg.schema, "schema")
    if need_labels:
        header = _csv_header(cohort_path)
        missing = [c for c in LABEL_FIELDS if c not in header]
        if missing:
            raise InputError(f"label column {missing[0]!r} not found in {cohort_path}; horizon labels need "
                             f"{' and '.join(LABEL_FIELDS)}")
    return load_cohort_csv(cohort_path, schema_path)


def _csv_header(path: Path) -> list[str]:
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.reader(line for line in fh if not line.startswith("#")):
            return row
    return []


def _read_scores(path: Path) -> dict[str, dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(line for line in fh if not line.startswith("#")))
    if not rows or ID_FIELD not in rows[0]:
        raise InputError(f"{path} must be a CSV with an {ID_FIELD!r} column")
    return {r[ID_FIELD]: r for r in rows}


def _prepared_matrix(cohort, cfg: RunConfig):
    """Missingness filter, then (unless postoperative columns are requested) the baseline-only gate."""
    cohort, dropped = drop_high_missingness(cohort, cfg.missingness_threshold)
    full = FeatureMatrix.from_cohort(cohort)
    if cfg.include_postop:
        return cohort, full, full, dropped, []
    clean, removed = baseline_only_filter(full)
    return cohort, full, clean, dropped, removed


# ---------------------------------------------------------------------------
# commands


def cmd_generate(cfg: RunConfig) -> int:
    if cfg.seed is None:
        raise InputError("--seed is required for generate")
    if cfg.n < 10:
        raise InputError(f"precondition failed: --n must be at least 10 to simulate a cohort (got {cfg.n})")
    if cfg.signal not in ("metabolic", "none"):
        raise InputError(f"--signal must be 'metabolic' or 'none', got {cfg.signal!r}")
    run = Run(cfg)
    cohort = generate_synthetic_cohort(cfg.n, cfg.seed, cfg.signal, cfg.radiomic)
    write_cohort_csv(cohort, run.path("cohort.csv"), run.stamp)
    write_schema_json(cohort.schema, run.path("schema.json"), {"config_hash": run.hash})
    summary = format_summary(summarize_cohort(cohort))
    run.text("summary.txt", summary + "\n")
    run.finish()
    print(f"{len(cohort)} patients, {len(cohort.schema)} variables -> {run.dir}")
    print(summary)
    return EXIT_OK


def _discretization(cfg: RunConfig) -> DiscretizationSpec:
    if cfg.n_bins is not None:
        return DiscretizationSpec.fixed_count(int(cfg.n_bins))
    return DiscretizationSpec(bin_width=float(cfg.bin_width))


def cmd_extract(cfg: RunConfig) -> int:
    run = Run(cfg)
    settings = ExtractionSettings(_discretization(cfg))
    cases = []  # (patient id, volume, masks)
    if cfg.phantoms:
        if cfg.seed is None:
            raise InputError("--seed is required when simulating phantoms")
        for i in range(cfg.phantoms):
            vol, masks = make_phantom(cfg.seed + i, n_lesions=cfg.lesions_per_phantom)
            cases.append((f"P{i + 1:03d}", vol, masks))
    else:
        vol = read_volume(run.input(cfg.volume, "volume"))
        if not cfg.masks:
            raise InputError("--mask is required unless --phantoms is given")
        masks = [read_mask(run.input(m, "mask")) for m in cfg.masks]
        cases.append((Path(cfg.volume).stem, vol, masks))

    long_rows, agg_rows, erosion = [], [], []
    for pid, vol, masks in cases:
        per = []
        for m in masks:
            m.check_matches(vol)
            fs = extract_lesion_features(vol, m, settings)
            per.append(fs)
            long_rows.append((pid, fs))
            if cfg.ccc_threshold is not None:
                erosion.append((fs, extract_lesion_features(vol, eroded_mask(m), settings)))
        largest, weighted = aggregate_lesions(per, [fs.values["original_shape_VoxelVolume"] for fs in per])
        agg_rows.append((pid, largest, weighted))
    write_long_csv(long_rows, run.path("features_long.csv"), run.stamp)
    names = sorted(long_rows[0][1].values)
    with open(run.path("features_aggregated.csv"), "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# {run.stamp}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["patient_id", "aggregation", *names])
        for pid, largest, weighted in agg_rows:
            w.writerow([pid, "largest", *(repr(largest.values[n]) for n in names)])
            w.writerow([pid, "volume_weighted", *(repr(weighted.values[n]) for n in names)])
    print(f"{len(long_rows)} lesions, {len(names)} features per lesion -> {run.dir}")
    if cfg.ccc_threshold is not None:
        if len(erosion) < 2:
            raise InputError("the CCC filter needs at least two lesions")
        A = [[a.values[n] for n in names] for a, _ in erosion]
        B = [[b.values[n] for n in names] for _, b in erosion]
        rep = ccc_filter(A, B, names, float(cfg.ccc_threshold))
        run.json("ccc.json", {"threshold": rep.threshold, "ccc": rep.ccc, "retained": rep.retained,
                              "n_lesions": len(erosion), "comparison": "one-voxel erosion"})
        print(f"CCC >= {rep.threshold}: {len(rep.retained)}/{len(names)} features retained")
        for n in rep.retained:
            print(f"  {n}")
    run.finish()
    return EXIT_OK


def cmd_preprocess(cfg: RunConfig) -> int:
    run = Run(cfg)
    cohort = _load_cohort(run, need_labels=True)
    cohort, full, matrix, dropped, removed = _prepared_matrix(cohort, cfg)
    manifest = [{"column": d["column"], "reason": d.get("reason", "missingness"), "detail": d.get("missing_fraction", "")}
                for d in dropped]
    manifest += [{"column": r["column"], "reason": r["reason"], "detail": r["temporal_tag"]} for r in removed]
    write_manifest_csv(manifest, run.path("removed_columns.csv"), run.stamp)
    # fitted on every row for inspection; train-eval refits on training rows only
    design = fit_preprocessor(matrix).transform(matrix)
    design.to_csv(run.path("design.csv"), run.stamp)
    with open(run.path("labels.csv"), "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# {run.stamp}\n")
        w = csv.writer(fh, lineterminator="\n")
        labels = [make_horizon_labels(cohort, h).labels for h in cfg.horizons]
        w.writerow([ID_FIELD, *(f"label_{_hlabel(h)}" for h in cfg.horizons)])
        for i, pid in enumerate(cohort.ids):
            w.writerow([pid, *(int(lab[i]) for lab in labels)])
    try:
        ms = metabolic_score(cohort)
    except (PreprocessError, KeyError) as exc:
        print(f"metabolic score skipped: {exc}")
    else:
        with open(run.path("metabolic.csv"), "w", newline="", encoding="utf-8") as fh:
            fh.write(f"# {run.stamp}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([ID_FIELD, "metabolic_score", "tertile"])
            for pid, s, t in zip(ms.ids, ms.score, ms.tertile):
                w.writerow([pid, repr(float(s)), t])
        print("metabolic tertiles:", ms.counts())
    run.finish()
    print(f"{design.n_rows} rows x {len(design.names)} encoded columns; {len(manifest)} columns removed -> {run.dir}")
    return EXIT_OK


def cmd_train_eval(cfg: RunConfig) -> int:
    if cfg.seed is None:
        raise InputError("--seed is mandatory for train-eval")
    run = Run(cfg)
    cohort = _load_cohort(run, need_labels=True)
    cohort, full, matrix, dropped, removed = _prepared_matrix(cohort, cfg)
    report: dict[str, Any] = {"config": cfg.hashable(), "n_patients": len(cohort),
                              "removed_columns": [r["column"] for r in removed] + [d["column"] for d in dropped],
                              "horizons": {}}
    scores, splits, audits = {}, {}, {}
    for h in cfg.horizons:
        y = make_horizon_labels(cohort, h).labels
        if np.unique(y).size < 2:
            raise InputError(f"{_hlabel(h)} labels contain a single class; cannot train this horizon")
        tr, te = stratified_split(y, cfg.train_fraction, cfg.seed)
        splits[h] = np.full(len(y), "train", dtype=object)
        splits[h][te] = "test"
        pipe = fit_pipeline(matrix.take(tr), y[tr], cfg.model_spec, cfg.seed, smote=cfg.smote)
        p_test = pipe.predict_proba(matrix.take(te))
        scores[h] = pipe.predict_proba(matrix)
        roc = roc_auc(p_test, y[te])
        ci = bootstrap_ci(auc_score, p_test, y[te], cfg.bootstrap_iterations, cfg.seed)
        entry = {
            "n_train": int(tr.size), "n_test": int(te.size), "prevalence_test": float(y[te].mean()),
            "smote_rows": pipe.smote_rows, "auc": roc.auc, "auc_ci": ci.to_dict(),
            "metrics": metrics_dict(threshold_metrics(p_test, y[te], cfg.threshold)),
        }
        if cfg.cv_folds and cfg.cv_folds >= 2:
            cv = cross_validate(matrix.take(tr), y[tr], cfg.model_spec, cfg.cv_folds, cfg.seed, smote=cfg.smote)
            entry["cv"] = cv.to_dict()
        report["horizons"][_hlabel(h)] = entry
        write_roc_csv(roc, run.path(f"roc_{_hlabel(h)}.csv"), run.stamp)
        save_model(pipe.model, run.path(f"model_{_hlabel(h)}.json"),
                   {"config_hash": run.hash, "horizon_months": h, "preprocessor": pipe.preprocessor.to_dict()})
        audits[_hlabel(h)] = leakage_audit(pipe.model, full.take(tr))
    leaked = any(a.verdict == "leaked" for a in audits.values())
    run.json("leakage.json", {"verdict": "leaked" if leaked else "clean",
                              "horizons": {k: a.to_dict() for k, a in audits.items()}})
    run.text("leakage.txt", "".join(f"[{k}]\n{a.to_text()}" for k, a in audits.items()))
    run.json("evaluation.json", report)
    with open(run.path("scores.csv"), "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# {run.stamp}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([ID_FIELD, *(f"p_{_hlabel(h)}" for h in cfg.horizons),
                    *(f"split_{_hlabel(h)}" for h in cfg.horizons)])
        for i, pid in enumerate(matrix.ids):
            w.writerow([pid, *(repr(float(scores[h][i])) for h in cfg.horizons),
                        *(splits[h][i] for h in cfg.horizons)])
    run.finish()
    print(f"{'horizon':<8}{'AUC (95% CI)':>24}{'sens':>8}{'spec':>8}{'NPV':>8}")
    for k, e in report["horizons"].items():
        m = e["metrics"]
        ci = e["auc_ci"]
        print(f"{k:<8}{e['auc']:>8.3f} ({ci['lower']:.3f}-{ci['upper']:.3f}){_fmt(m['sensitivity']):>8}"
              f"{_fmt(m['specificity']):>8}{_fmt(m['npv']):>8}")
    print(f"leakage audit: {'leaked' if leaked else 'clean'}")
    return EXIT_OK


def _fmt(v) -> str:
    return "NA" if v is None else f"{v:.3f}"


def _score_column(cfg: RunConfig, table: dict) -> str:
    col = cfg.score_column or (f"p_{_hlabel(cfg.horizon)}" if cfg.horizon is not None
                              else f"p_{_hlabel(cfg.horizons[-1])}")
    first = next(iter(table.values()))
    if col not in first:
        raise InputError(f"score column {col!r} not found in scores file (columns: {sorted(first)})")
    return col


def cmd_survival(cfg: RunConfig) -> int:
    if cfg.endpoint not in ENDPOINTS:
        raise InputError(f"--endpoint must be one of {sorted(ENDPOINTS)}")
    run = Run(cfg)
    cohort = _load_cohort(run)
    t_name, e_name = ENDPOINTS[cfg.endpoint]
    time = cohort.outcome(t_name)
    event = cohort.outcome(e_name)
    if cfg.group_by == "metabolic":
        groups = metabolic_score(cohort).tertile
        source = "metabolic score tertiles"
    elif cfg.group_by == "score":
        table = _read_scores(run.input(cfg.scores, "scores"))
        col = _score_column(cfg, table)
        missing = [pid for pid in cohort.ids if pid not in table]
        if missing:
            raise InputError(f"{len(missing)} cohort patients have no score (first: {missing[0]})")
        s = np.array([float(table[pid][col]) for pid in cohort.ids])
        groups = risk_group_stratification(s, tertile_cutoffs(s))
        source = f"{col} tertile cutoffs"
    else:
        raise InputError("--group-by must be 'score' or 'metabolic'")
    keep = ~np.isnan(time)
    data = SurvivalDataset(time[keep], np.nan_to_num(event[keep]).astype(int), np.asarray(groups)[keep])
    levels = [g for g in RISK_GROUPS if np.any(data.group == g)]
    curves = {g: kaplan_meier(data.subset(data.group == g)) for g in levels}
    tmax = float(data.time.max())
    risk_times = cfg.risk_times or [float(t) for t in np.arange(0.0, tmax + 1e-9, 12.0)]
    risk_table = {g: number_at_risk(data.subset(data.group == g), risk_times) for g in levels}
    doc: dict[str, Any] = {"endpoint": cfg.endpoint, "grouping": source, "n": len(data),
                           "n_excluded_missing_time": int((~keep).sum()), "groups": {}}
    for g, c in curves.items():
        doc["groups"][g] = {"n": int(np.sum(data.group == g)), "events": int(data.event[data.group == g].sum()),
                            "median_survival": c.median_survival,
                            "median_undefined": c.median_survival is None}
    p_value = None
    if len(levels) < 2:
        msg = f"log-rank test refused: only one non-empty group ({levels[0] if levels else 'none'})"
        print(msg)
        doc["log_rank"] = {"refused": msg}
    else:
        lr = log_rank_test(data, levels=levels)
        p_value = lr.p_value
        doc["log_rank"] = {"chi_square": lr.chi_square, "df": lr.df, "p_value": lr.p_value}
        ref = levels[-1]
        covs = [g for g in levels if g != ref]
        X = np.column_stack([(data.group == g).astype(float) for g in covs])
        names = [f"{g}_vs_{ref}" for g in covs]
        if cfg.cox_covariates:
            A, extra = _adjustment_covariates(cohort, cfg.cox_covariates)
            X, names = np.column_stack([X, A[keep]]), names + extra
        cox = fit_cox(data, X, names=names)
        doc["cox"] = cox.to_dict()
        run.text("cox.txt", cox.to_text())
        print(cox.to_text(), end="")
    for g, info in doc["groups"].items():
        med = "undefined (curve stays above 0.5)" if info["median_undefined"] else f"{info['median_survival']:g}"
        print(f"{g:<8} n={info['n']:<5} events={info['events']:<5} median={med}")
    if p_value is not None:
        print(f"log-rank p = {p_value:.4g}")
    write_km_csv(curves, run.path("km.csv"), run.stamp)
    write_svg(km_svg(curves, risk_table, risk_times, p_value, f"{cfg.endpoint.upper()} by {source}",
                     comment=run.stamp), run.path("km.svg"))
    run.json("survival.json", doc)
    run.finish()
    return EXIT_OK


def _adjustment_covariates(cohort, names) -> tuple[np.ndarray, list[str]]:
    """Cox adjustment design: z-scored continuous columns, first-level-reference dummies for categorical ones.

    Missing values take the column median (continuous) or most frequent level (categorical).
    """
    cols, out_names = [], []
    for name in names:
        try:
            var = cohort.variable(name)
        except KeyError:
            raise InputError(f"Cox covariate {name!r} is not a cohort column") from None
        if var.kind == "continuous":
            x = cohort.numeric_column(name)
            if np.isnan(x).all():
                raise InputError(f"Cox covariate {name!r} is entirely missing")
            x = np.where(np.isnan(x), np.nanmedian(x), x)
            sd = x.std()
            cols.append((x - x.mean()) / sd if sd > 0 else np.zeros_like(x))
            out_names.append(f"{name}_per_sd")
        else:
            raw = [None if v is None else str(v) for v in cohort.column(name)]
            present = [v for v in raw if v is not None]
            if not present:
                raise InputError(f"Cox covariate {name!r} is entirely missing")
            levels = sorted(set(present))
            mode = max(levels, key=present.count)
            raw = [mode if v is None else v for v in raw]
            for lev in levels[1:]:
                cols.append(np.array([v == lev for v in raw], dtype=float))
                out_names.append(f"{name}={lev}_vs_{levels[0]}")
    return np.column_stack(cols) if cols else np.empty((len(cohort), 0)), out_names


def cmd_dca(cfg: RunConfig) -> int:
    run = Run(cfg)
    cohort = _load_cohort(run, need_labels=True)
    table = _read_scores(run.input(cfg.scores, "scores"))
    col = _score_column(cfg, table)
    horizon = cfg.horizon if cfg.horizon is not None else _num(col.removeprefix("p_").removesuffix("m"))
    y_all = make_horizon_labels(cohort, horizon).labels
    split_col = f"split_{_hlabel(horizon)}"
    if cfg.rows != "all" and split_col not in next(iter(table.values())):
        raise InputError(f"scores file has no {split_col!r} column; use --rows all")
    idx = [i for i, pid in enumerate(cohort.ids) if pid in table
           and (cfg.rows == "all" or table[pid][split_col] == cfg.rows)]
    if not idx:
        raise InputError(f"no scored patients with split {cfg.rows!r}")
    s = np.array([float(table[cohort.ids[i]][col]) for i in idx])
    y = y_all[idx]
    curve = decision_curve(s, y, cfg.pt_grid)
    curve.to_csv(run.path("dca.csv"), run.stamp)
    write_svg(dca_svg(curve, f"Decision curve, {_hlabel(horizon)} recurrence", col, run.stamp), run.path("dca.svg"))
    eff = {}
    for pt in curve.thresholds:
        e = treatment_efficiency(s, y, float(pt))
        eff[repr(float(pt))] = {"treated_per_1000": e.treated_per_1000, "beneficial_per_1000": e.beneficial_per_1000,
                                "unnecessary_per_1000": e.unnecessary_per_1000, "efficiency": e.efficiency}
    run.json("dca.json", {"horizon_months": horizon, "score_column": col, "rows": cfg.rows, "n": len(idx),
                          "prevalence": curve.prevalence, "efficiency": eff})
    run.finish()
    better = [float(pt) for pt, m, a in zip(curve.thresholds, curve.net_benefit_model, curve.net_benefit_treat_all)
              if m > max(a, 0.0)]
    print(f"n={len(idx)} prevalence={curve.prevalence:.3f}; model beats both references at "
          f"{len(better)}/{len(curve.thresholds)} thresholds")
    return EXIT_OK


def cmd_audit(cfg: RunConfig) -> int:
    run = Run(cfg)
    model = load_model(run.input(cfg.model, "model"))
    cohort = _load_cohort(run, need_labels=cfg.diagnostic)
    cohort, _ = drop_high_missingness(cohort, cfg.missingness_threshold)
    matrix = FeatureMatrix.from_cohort(cohort)
    labels = None
    if cfg.diagnostic:
        h = cfg.horizon if cfg.horizon is not None else cfg.horizons[-1]
        labels = make_horizon_labels(cohort, h).labels
    rep = leakage_audit(model, matrix, labels=labels, diagnostic_spec=cfg.model_spec, seed=cfg.seed or 0)
    run.json("leakage.json", rep.to_dict())
    run.text("leakage.txt", rep.to_text())
    run.finish()
    print(rep.to_text(), end="")
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "extract": cmd_extract,
    "preprocess": cmd_preprocess,
    "train-eval": cmd_train_eval,
    "survival": cmd_survival,
    "dca": cmd_dca,
    "audit": cmd_audit,
}


def verify(manifest_path: str | Path) -> int:
    """Replay the run recorded in a manifest into a scratch directory and compare digests."""
    manifest = json.loads(Path(manifest_path).read_text(encoding="utf-8"))
    cfg_doc = dict(manifest["config"])
    command = cfg_doc["command"]
    if command not in COMMANDS:
        raise InputError(f"manifest records unknown command {command!r}")
    ok = True
    for path, digest in sorted(manifest.get("inputs", {}).items()):
        if not Path(path).is_file():
            raise InputError(f"input {path} recorded in the manifest is missing")
        if sha256_file(path) != digest:
            print(f"INPUT CHANGED {path}")
            ok = False
    with tempfile.TemporaryDirectory() as tmp:
        cfg = RunConfig(**{**cfg_doc, "out": tmp})
        if cfg.config_hash() != manifest["config_hash"]:
            print("config hash mismatch: manifest was produced by a different configuration encoding")
            ok = False
        _quiet(COMMANDS[command], cfg)
        replay = json.loads((Path(tmp) / "manifest.json").read_text(encoding="utf-8"))["artifacts"]
    recorded = manifest["artifacts"]
    for name in sorted(set(recorded) | set(replay)):
        a, b = recorded.get(name), replay.get(name)
        status = "OK" if a == b else ("MISSING" if b is None else "EXTRA" if a is None else "DIFF")
        ok &= status == "OK"
        print(f"{status:<8}{name}")
    print("verified: byte-identical replay" if ok else "verification FAILED")
    return EXIT_OK if ok else EXIT_MISMATCH


def _quiet(fn, cfg):
    import contextlib
    import io

    with contextlib.redirect_stdout(io.StringIO()):
        return fn(cfg)


# ---------------------------------------------------------------------------
# argument parsing


def _bool_flag(p, name, help_text):
    dest = name.replace("-", "_")
    p.add_argument(f"--{name}", dest=dest, action="store_true", default=None, help=help_text)
    p.add_argument(f"--no-{name}", dest=dest, action="store_false", help=argparse.SUPPRESS)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crlmprog", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="cmd", required=True)

    def common(p, data=True):
        p.add_argument("--config", help="JSON file with RunConfig fields; flags override it")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory (default: current directory)")
        if data:
            p.add_argument("--cohort", help="cohort CSV")
            p.add_argument("--schema", help="schema JSON")
            p.add_argument("--missingness-threshold", dest="missingness_threshold", type=float)

    p = sub.add_parser("generate", help="simulate a synthetic cohort")
    common(p, data=False)
    p.add_argument("--n", type=int)
    p.add_argument("--signal", choices=["metabolic", "none"])
    _bool_flag(p, "radiomic", "include aggregated radiomic columns (default on; --no-radiomic to omit)")

    p = sub.add_parser("extract", help="radiomic features from volume/mask files or simulated phantoms")
    common(p, data=False)
    p.add_argument("--volume")
    p.add_argument("--mask", dest="masks", action="append", help="lesion mask (repeatable)")
    p.add_argument("--phantoms", type=int, help="simulate this many phantom patients instead of reading files")
    p.add_argument("--lesions-per-phantom", dest="lesions_per_phantom", type=int)
    p.add_argument("--bin-width", dest="bin_width", type=float)
    p.add_argument("--n-bins", dest="n_bins", type=int)
    p.add_argument("--ccc-threshold", dest="ccc_threshold", type=float,
                   help="compare against one-voxel-eroded masks and keep features with CCC >= this")

    p = sub.add_parser("preprocess", help="missingness filter, baseline gate, encoded design and labels")
    common(p)
    _bool_flag(p, "include-postop", "keep postoperative and outcome columns")
    p.add_argument("--horizons", type=float, nargs="+")

    p = sub.add_parser("train-eval", help="fit per-horizon models and evaluate on a held-out split")
    common(p)
    _bool_flag(p, "include-postop", "diagnostic: keep postoperative and outcome columns (the audit reports leaked)")
    _bool_flag(p, "smote", "oversample the training minority class (default on)")
    p.add_argument("--horizons", type=float, nargs="+")
    p.add_argument("--model-spec", dest="model_spec", type=json.loads, help="model spec as inline JSON")
    p.add_argument("--train-fraction", dest="train_fraction", type=float)
    p.add_argument("--cv-folds", dest="cv_folds", type=int, help="0 disables cross-validation")
    p.add_argument("--bootstrap-iterations", dest="bootstrap_iterations", type=int)
    p.add_argument("--threshold", type=float)

    p = sub.add_parser("survival", help="Kaplan-Meier, log-rank and Cox by risk group")
    common(p)
    p.add_argument("--scores", help="scores CSV from train-eval")
    p.add_argument("--score-column", dest="score_column")
    p.add_argument("--horizon", type=float)
    p.add_argument("--group-by", dest="group_by", choices=["score", "metabolic"])
    p.add_argument("--endpoint", choices=sorted(ENDPOINTS))
    p.add_argument("--risk-times", dest="risk_times", type=float, nargs="+")
    p.add_argument("--cox-covariates", dest="cox_covariates", nargs="+", help="cohort columns to adjust for")

    p = sub.add_parser("dca", help="decision curves and treatment efficiency")
    common(p)
    p.add_argument("--scores", help="scores CSV from train-eval")
    p.add_argument("--score-column", dest="score_column")
    p.add_argument("--horizon", type=float)
    p.add_argument("--rows", choices=["test", "train", "all"])
    p.add_argument("--pt-grid", dest="pt_grid", type=float, nargs="+")

    p = sub.add_parser("audit", help="leakage audit of a saved model against a tagged cohort")
    common(p)
    p.add_argument("--model", help="model JSON written by train-eval")
    p.add_argument("--horizon", type=float)
    _bool_flag(p, "diagnostic", "refit on every column to measure non-baseline importance")
    p.add_argument("--model-spec", dest="model_spec", type=json.loads)

    p = sub.add_parser("verify", help="replay a run from its manifest and diff artifact digests")
    p.add_argument("manifest")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.cmd == "verify":
            return verify(args.manifest)
        cfg = resolve_config(args.cmd, args)
        return COMMANDS[args.cmd](cfg)
    except CoxNonConvergence as exc:
        print(f"error: numerical non-convergence: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ArithmeticError as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except INPUT_ERRORS as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
