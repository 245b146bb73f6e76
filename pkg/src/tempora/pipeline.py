"""End-to-end runs: load, engineer, split, fit members, predict, post-process, score."""

from __future__ import annotations

import concurrent.futures as cf
import csv
import io
import itertools
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from tempora import gbdt
from tempora.config import RunConfig
from tempora.cv import GroupedSplitSpec, Split, make_split
from tempora.data_io import generate_synthetic, read_panel_csv, write_panel_csv, write_predictions_csv
from tempora.errors import ConfigError, DataError, UndefinedMetricError
from tempora.features import engineer
from tempora.metrics import (
    CorrSeries, Regime, SummaryMetrics, classify_series, era_corr, nmi_series, nrvix, regime_report,
)
from tempora.models import FactorMomentumModel, average_predictions, member_seed
from tempora.panel import PanelSet, validate_panel
from tempora.projection import DYNAMIC_KINDS, DynamicProjector, ProjectionRule, default_k
from tempora.selection import OnlineSelector

log = logging.getLogger(__name__)

SCOPES = ("all", "high", "low")
SUMMARY_FIELDS = ("mean", "volatility", "max_drawdown", "sharpe", "calmar")


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


# --------------------------------------------------------------------------
# data and split
# --------------------------------------------------------------------------

def load_panel(cfg: RunConfig) -> PanelSet:
    if cfg.data_path is not None:
        panel = read_panel_csv(cfg.data_path)
    else:
        panel = generate_synthetic(cfg.synthetic)
    problems = validate_panel(panel)
    if problems:
        raise DataError(f"panel failed validation: {problems[0].message} ({len(problems)} issues)")
    return panel


def default_split(era_ids) -> GroupedSplitSpec:
    """Half train, a fifth validation, the rest test, with 4-era gaps."""
    first, last = int(era_ids[0]), int(era_ids[-1])
    n = last - first + 1
    if n < 20:
        raise ConfigError(f"panel spans {n} eras; an explicit split is needed")
    gap = 4
    tr_end = first + n // 2 - 1
    v0 = tr_end + gap + 1
    v1 = v0 + n // 5 - 1
    t0 = v1 + gap + 1
    return GroupedSplitSpec((first, tr_end), gap, (v0, v1), gap, (t0, last), name="default")


def resolve_split(cfg: RunConfig, panel: PanelSet) -> Split:
    spec = cfg.split if cfg.split is not None else default_split(panel.era_ids)
    return make_split(panel, spec)


def model_panel(cfg: RunConfig, panel: PanelSet) -> PanelSet:
    """Features the models see; post-processing always uses the raw features."""
    return engineer(panel, cfg.fe) if cfg.fe is not None else panel


# --------------------------------------------------------------------------
# member fitting
# --------------------------------------------------------------------------

def _with_target(panel: PanelSet, target: str) -> PanelSet:
    return panel.select(e.era for e in panel if e.has_target(target))


def _fit_job(job):
    X, y, valid, boost = job
    return gbdt.train_arrays(X, y, boost, valid)


def _pool_map(fn, jobs, workers: int) -> list:
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with cf.ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(fn, jobs))


def member_keys(cfg: RunConfig) -> list[tuple[int, str]]:
    n_seeds = 1 if cfg.model.kind == "baseline" else cfg.ensemble.n_seeds
    return [(s, t) for s in range(n_seeds) for t in cfg.ensemble.targets]


def fit_members(cfg: RunConfig, split: Split, workers: int | None = None) -> dict:
    """Boosters keyed by ``(seed_index, target)``; order-stable across worker counts."""
    if cfg.model.kind != "gbdt":
        raise ConfigError("only gbdt models have fitted members")
    workers = cfg.workers if workers is None else workers
    data = {}
    for t in cfg.ensemble.targets:
        tr = _with_target(split.train, t)
        if not len(tr):
            raise DataError(f"no training eras carry target {t!r}")
        va = _with_target(split.validation, t)
        data[t] = (tr.stack(t), va.stack(t) if len(va) else None)
    keys = member_keys(cfg)
    jobs = []
    for s, t in keys:
        (X, y), valid = data[t]
        seed = member_seed(cfg.seed, s, cfg.ensemble.targets.index(t))
        jobs.append((X, y, valid, cfg.model.boost.replace(seed=seed)))
    return dict(zip(keys, _pool_map(_fit_job, jobs, workers)))


class _Members:
    """Per-seed raw predictions for one era, averaged over targets."""

    def __init__(self, cfg: RunConfig, split: Split, full_model_panel: PanelSet, workers: int | None):
        self.cfg = cfg
        self.targets = cfg.ensemble.targets
        if cfg.model.kind == "gbdt":
            self.n_seeds = cfg.ensemble.n_seeds
            boosters = fit_members(cfg, split, workers)
            self.predictors = {
                k: (lambda era, b=b: gbdt.predict(b, era.features, cfg.model.prune_first))
                for k, b in boosters.items()
            }
        else:
            self.n_seeds = 1
            self.predictors = {}
            for t in self.targets:
                m = FactorMomentumModel(cfg.model.window, cfg.model.lag).fit(full_model_panel, t)
                self.predictors[(0, t)] = m.predict

    def seed_predictions(self, era) -> list[np.ndarray]:
        return [
            average_predictions([self.predictors[(s, t)](era) for t in self.targets])
            for s in range(self.n_seeds)
        ]


# --------------------------------------------------------------------------
# backtest
# --------------------------------------------------------------------------

@dataclass
class BacktestResult:
    predictions: dict  # era -> (ids, scores)
    corr: CorrSeries  # mean over streams
    stream_corrs: list  # one CorrSeries per stream
    labels: dict  # era -> Regime
    summary: dict  # scope -> SummaryMetrics or None
    selection_rows: list = field(default_factory=list)
    methods: list = field(default_factory=list)


def _projection_methods(cfg: RunConfig, n_features: int) -> dict[str, ProjectionRule | None]:
    p = cfg.project
    k = (p.k if p and p.k is not None else default_k(n_features))
    k = min(k, n_features)
    kw = dict(k=k, window=p.window if p else 52, lag=p.lag if p else 6, beta=p.beta if p else 1.0)
    fixed = p.fixed_set if p else None
    if cfg.select is not None:
        methods: dict = {"none": None}
        if fixed:
            methods["fixed"] = ProjectionRule("fixed", fixed_set=fixed, **kw)
        for kind in DYNAMIC_KINDS:
            methods[kind] = ProjectionRule(kind, **kw)
        return methods
    if p is not None:
        return {p.rule: ProjectionRule(p.rule, fixed_set=fixed, **kw)}
    return {"none": None}


def _regime_labels(cfg: RunConfig, panel: PanelSet) -> dict[int, Regime]:
    index = nrvix(nmi_series(panel, cfg.main_target, cfg.model.window, cfg.model.lag), cfg.regime_window)
    labels = {e: Regime.UNDEFINED for e in panel.era_ids}
    labels.update({lab.era: lab.label for lab in classify_series(index, cfg.regime_threshold)})
    return labels


def _safe_report(series: CorrSeries, labels) -> dict:
    try:
        rep = regime_report(series, labels)
    except UndefinedMetricError as exc:
        log.warning("summary undefined: %s", exc)
        rep = {}
    return {s: rep.get(s) for s in SCOPES}


def _average_summaries(reports: list[dict]) -> dict:
    out = {}
    for scope in SCOPES:
        items = [r[scope] for r in reports]
        if any(m is None for m in items):
            out[scope] = None
        else:
            out[scope] = SummaryMetrics(*(float(np.mean([getattr(m, f) for m in items])) for f in SUMMARY_FIELDS))
    return out


def run_backtest(
    cfg: RunConfig, panel: PanelSet | None = None, workers: int | None = None,
    on_score: Callable[[int], None] | None = None,
) -> BacktestResult:
    """Walk the test eras in order; an era's target is read only after ``on_score(era)``."""
    panel = load_panel(cfg) if panel is None else panel
    mpanel = model_panel(cfg, panel)
    split = resolve_split(cfg, mpanel)
    members = _Members(cfg, split, mpanel, workers)
    target = cfg.main_target

    methods = _projection_methods(cfg, len(panel.feature_names))
    need_stats = any(r is not None and r.kind != "fixed" for r in methods.values())
    projector = None
    if need_stats or any(methods.values()):
        rule0 = next(r for r in methods.values() if r is not None)
        projector = DynamicProjector(panel, target, rule0.window, rule0.lag)

    n_streams = members.n_seeds if cfg.ensemble.mode == "over-models" else 1
    selectors = None
    if cfg.select is not None:
        s = cfg.select
        selectors = [OnlineSelector(list(methods), s.rule, s.warm_up, s.window, s.lag) for _ in range(n_streams)]

    stream_pairs: list[list] = [[] for _ in range(n_streams)]
    predictions, selection_rows = {}, []
    for mera in split.test:
        t = mera.era
        raw_era = panel.era(t)
        seed_preds = members.seed_predictions(mera)
        streams = seed_preds if n_streams > 1 else [average_predictions(seed_preds)]
        stats = projector.stats(t) if need_stats else None

        method_preds = []
        for y in streams:
            row = []
            for rule in methods.values():
                if rule is None:
                    row.append(y)
                else:
                    row.append(projector.project(y, raw_era, rule, stats).scores)
            method_preds.append(row)

        if not raw_era.has_target(target):
            raise DataError(f"test era {t} has no {target!r} target to score")
        finals = []
        if selectors is None:
            if on_score is not None:
                on_score(t)
            y_true = raw_era.target(target)
            for i, row in enumerate(method_preds):
                finals.append(row[0])
                stream_pairs[i].append((t, era_corr(row[0], y_true)))
        else:
            scored = False
            for i, (sel, row) in enumerate(zip(selectors, method_preds)):
                hook = on_score if (on_score is not None and not scored) else None
                w, combo, corr, _ = sel.step(t, row, lambda e: raw_era.target(target), hook)
                scored = True
                finals.append(combo)
                stream_pairs[i].append((t, corr))
                chosen = sel.methods[int(np.argmax(w))] if np.count_nonzero(w) == 1 else "equal"
                selection_rows.append((t, i, chosen, w, corr))
        predictions[t] = (list(raw_era.ids), average_predictions(finals))

    stream_corrs = [CorrSeries.from_pairs(p) for p in stream_pairs]
    corr = CorrSeries(stream_corrs[0].eras, np.mean([s.values for s in stream_corrs], axis=0))
    labels = _regime_labels(cfg, panel)
    summary = _average_summaries([_safe_report(s, labels) for s in stream_corrs])
    return BacktestResult(predictions, corr, stream_corrs, labels, summary, selection_rows, list(methods))


# --------------------------------------------------------------------------
# artifacts
# --------------------------------------------------------------------------

def eras_csv(result: BacktestResult) -> str:
    buf = io.StringIO()
    buf.write("era,corr,regime\n")
    for e, v in zip(result.corr.eras.tolist(), result.corr.values.tolist()):
        buf.write(f"{e},{_fmt(v)},{Regime(result.labels.get(e, Regime.UNDEFINED)).value}\n")
    return buf.getvalue()


def summary_csv(summary: dict) -> str:
    buf = io.StringIO()
    buf.write("scope," + ",".join(SUMMARY_FIELDS) + "\n")
    for scope in SCOPES:
        m = summary.get(scope)
        vals = [m.as_dict()[f] for f in SUMMARY_FIELDS] if m is not None else [math.nan] * len(SUMMARY_FIELDS)
        buf.write(scope + "," + ",".join(_fmt(v) for v in vals) + "\n")
    return buf.getvalue()


def selection_csv(result: BacktestResult) -> str:
    buf = io.StringIO()
    methods = result.methods
    buf.write("era,member,chosen_method," + ",".join(f"weight_{m}" for m in methods) + ",combined_corr\n")
    for t, i, chosen, w, corr in result.selection_rows:
        buf.write(f"{t},{i},{chosen}," + ",".join(_fmt(x) for x in w) + f",{_fmt(corr)}\n")
    return buf.getvalue()


def write_backtest(result: BacktestResult, out: Path) -> list[Path]:
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / "predictions.csv", out / "eras.csv", out / "summary.csv"]
    write_predictions_csv(paths[0], result.predictions)
    paths[1].write_text(eras_csv(result), encoding="utf-8", newline="")
    paths[2].write_text(summary_csv(result.summary), encoding="utf-8", newline="")
    if result.selection_rows:
        paths.append(out / "selection.csv")
        paths[-1].write_text(selection_csv(result), encoding="utf-8", newline="")
    return paths


def read_eras_csv(path) -> tuple[CorrSeries, dict]:
    pairs, labels = [], {}
    try:
        fh = open(path, encoding="utf-8", newline="")
    except FileNotFoundError:
        raise DataError(f"{path} not found; run backtest first") from None
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["era", "corr", "regime"]:
            raise DataError(f"{path}: unexpected header {reader.fieldnames}")
        for row in reader:
            e = int(row["era"])
            pairs.append((e, float(row["corr"])))
            labels[e] = Regime(row["regime"])
    return CorrSeries.from_pairs(pairs), labels


def report(eras_path) -> dict:
    series, labels = read_eras_csv(eras_path)
    return _safe_report(series, labels)


def format_report(summary: dict) -> str:
    lines = [f"{'scope':<6}" + "".join(f"{f:>14}" for f in SUMMARY_FIELDS)]
    for scope in SCOPES:
        m = summary.get(scope)
        vals = [m.as_dict()[f] for f in SUMMARY_FIELDS] if m is not None else [math.nan] * 5
        lines.append(f"{scope:<6}" + "".join(f"{v:>14.4f}" for v in vals))
    return "\n".join(lines)


def run_generate(cfg: RunConfig, out: Path) -> Path:
    if cfg.synthetic is None:
        raise ConfigError("generate needs a synthetic data source")
    out.mkdir(parents=True, exist_ok=True)
    path = out / "panel.csv"
    write_panel_csv(path, generate_synthetic(cfg.synthetic))
    return path


def run_train(cfg: RunConfig, out: Path, workers: int | None = None) -> list[Path]:
    panel = load_panel(cfg)
    split = resolve_split(cfg, model_panel(cfg, panel))
    boosters = fit_members(cfg, split, workers)
    mdir = out / "models"
    mdir.mkdir(parents=True, exist_ok=True)
    paths, manifest = [], []
    for (s, t), b in boosters.items():
        p = mdir / f"booster_s{s}_{t}.txt"
        gbdt.save(b, p)
        paths.append(p)
        manifest.append({"seed_index": s, "target": t, "file": p.name, "trees": b.n_trees})
    (mdir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return paths


# --------------------------------------------------------------------------
# sweep
# --------------------------------------------------------------------------

def sweep_cells(cfg: RunConfig) -> list[dict]:
    grid = cfg.sweep.grid
    names = list(grid)
    cells = [dict(zip(names, combo)) for combo in itertools.product(*(grid[n] for n in names))]
    if cfg.sweep.sample is not None and cfg.sweep.sample < len(cells):
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, cfg.sweep.seed]))
        keep = np.sort(rng.choice(len(cells), size=cfg.sweep.sample, replace=False))
        cells = [cells[i] for i in keep]
    return cells


def _cell_config(cfg: RunConfig, cell: dict) -> RunConfig:
    boost = {k: v for k, v in cell.items() if not k.startswith("fe.")}
    fe = {k[3:]: v for k, v in cell.items() if k.startswith("fe.")}
    out = cfg.replace(model=type(cfg.model)(
        cfg.model.kind, cfg.model.boost.replace(**boost), cfg.model.prune_first,
        cfg.model.window, cfg.model.lag,
    ))
    if fe:
        from tempora.features import FeatureEngConfig
        base = cfg.fe if cfg.fe is not None else FeatureEngConfig()
        out = out.replace(fe=FeatureEngConfig(**{**base.__dict__, **fe}))
    return out


def _sweep_job(job):
    X, y, valid_eras, boost = job
    booster = gbdt.train_arrays(X, y, boost, None)
    pairs = [(e, era_corr(gbdt.predict(booster, Xe), ye)) for e, Xe, ye in valid_eras]
    return CorrSeries.from_pairs(pairs)


def validation_sharpe(series: CorrSeries) -> float:
    """Mean over population std of the validation Corr; ``nan`` when flat."""
    vol = float(series.values.std())
    return float(series.values.mean()) / vol if vol > 0 else math.nan


@dataclass
class SweepRow:
    cell: int
    params: dict
    mean: float
    volatility: float
    sharpe: float


def run_sweep(cfg: RunConfig, panel: PanelSet | None = None, workers: int | None = None) -> list[SweepRow]:
    """Exhaustive (or subsampled) grid; one main-target model per cell, scored on validation."""
    if cfg.sweep is None:
        raise ConfigError("config has no sweep section")
    if cfg.model.kind != "gbdt":
        raise ConfigError("sweep needs a gbdt model")
    workers = cfg.workers if workers is None else workers
    panel = load_panel(cfg) if panel is None else panel
    target = cfg.main_target
    seed = member_seed(cfg.seed, 0, 0)
    cells = sweep_cells(cfg)
    jobs = []
    for cell in cells:
        ccfg = _cell_config(cfg, cell)
        split = resolve_split(ccfg, model_panel(ccfg, panel))
        X, y = _with_target(split.train, target).stack(target)
        valid = [(e.era, e.features, e.target(target)) for e in _with_target(split.validation, target)]
        jobs.append((X, y, valid, ccfg.model.boost.replace(seed=seed)))
    series = _pool_map(_sweep_job, jobs, workers)
    rows = [
        SweepRow(i, cell, float(s.values.mean()), float(s.values.std()), validation_sharpe(s))
        for i, (cell, s) in enumerate(zip(cells, series))
    ]
    rows.sort(key=lambda r: (math.isnan(r.sharpe), -r.sharpe if not math.isnan(r.sharpe) else 0.0, r.cell))
    return rows


def sweep_csv(rows: list[SweepRow]) -> str:
    names = list(rows[0].params) if rows else []
    buf = io.StringIO()
    buf.write("rank,cell," + "".join(f"{n}," for n in names) + "val_mean,val_volatility,val_sharpe\n")
    for rank, r in enumerate(rows, start=1):
        buf.write(f"{rank},{r.cell}," + "".join(f"{r.params[n]}," for n in names)
                  + f"{_fmt(r.mean)},{_fmt(r.volatility)},{_fmt(r.sharpe)}\n")
    return buf.getvalue()
