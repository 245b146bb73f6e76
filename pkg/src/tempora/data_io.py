"""Panel and prediction CSV files, plus a synthetic regime-switching panel generator.

Panel CSV: header ``era,id,f_<name>...,t_<name>...``; features are integers
``-2..2`` (``-4..4`` for product columns), targets one of
``-0.5,-0.25,0,0.25,0.5`` or an empty field when unresolved.  Prediction
CSV: header ``era,id,score`` with 17-significant-digit scores.  Both files
are UTF-8 with ``\\n`` line endings.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from tempora.errors import ConfigError, ParseError
from tempora.panel import (
    FEATURE_VALUES,
    PRODUCT_PREFIX,
    PRODUCT_VALUES,
    TARGET_VALUES,
    PanelEra,
    PanelSet,
)

FEATURE_COL = "f_"
TARGET_COL = "t_"


def _format_target(v: float) -> str:
    return repr(float(v))


def panel_to_csv(panel: PanelSet) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    tnames = panel.target_names
    writer.writerow(
        ["era", "id"]
        + [FEATURE_COL + n for n in panel.feature_names]
        + [TARGET_COL + n for n in tnames]
    )
    for era in panel:
        feats = np.ascontiguousarray(era.features).tolist()
        tvecs = [era.targets.get(n) for n in tnames]
        for r, rid in enumerate(era.ids):
            row = [era.era, rid] + feats[r]
            row += ["" if t is None else _format_target(t[r]) for t in tvecs]
            writer.writerow(row)
    return buf.getvalue()


def write_panel_csv(path, panel: PanelSet) -> None:
    Path(path).write_text(panel_to_csv(panel), encoding="utf-8", newline="")


def _parse_int(text: str, line: int, column: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ParseError(f"column {column!r}: {text!r} is not an integer", line=line) from None


def read_panel_csv(path) -> PanelSet:
    """Read a panel file; rows are regrouped by era and eras sorted ascending.

    Within an era the file's row order is kept.
    """
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file", line=1) from None
        if header[:2] != ["era", "id"]:
            raise ParseError("header must start with 'era,id'", line=1)
        fcols = [i for i, h in enumerate(header) if h.startswith(FEATURE_COL)]
        tcols = [i for i, h in enumerate(header) if h.startswith(TARGET_COL)]
        if len(fcols) + len(tcols) + 2 != len(header):
            bad = [h for h in header[2:] if not h.startswith((FEATURE_COL, TARGET_COL))]
            raise ParseError(f"unexpected columns {bad}", line=1)
        if not fcols:
            raise ParseError("no feature columns (f_*)", line=1)
        if tcols and min(tcols) < max(fcols):
            raise ParseError("target columns must follow feature columns", line=1)
        fnames = [header[i][len(FEATURE_COL):] for i in fcols]
        tnames = [header[i][len(TARGET_COL):] for i in tcols]
        allowed = [
            set(PRODUCT_VALUES if n.startswith(PRODUCT_PREFIX) else FEATURE_VALUES) for n in fnames
        ]

        groups: dict[int, dict] = {}
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(row)}", line=lineno)
            era = _parse_int(row[0], lineno, "era")
            if era < 1:
                raise ParseError(f"era must be positive, got {era}", line=lineno)
            rid = row[1]
            g = groups.setdefault(era, {"ids": [], "seen": set(), "X": [], "T": [[] for _ in tnames]})
            if rid in g["seen"]:
                raise ParseError(f"duplicate id {rid!r} in era {era}", line=lineno)
            g["seen"].add(rid)
            g["ids"].append(rid)
            feats = []
            for j, i in enumerate(fcols):
                v = _parse_int(row[i], lineno, header[i])
                if v not in allowed[j]:
                    raise ParseError(f"column {header[i]!r}: value {v} outside allowed set", line=lineno)
                feats.append(v)
            g["X"].append(feats)
            for j, i in enumerate(tcols):
                text = row[i]
                if text == "":
                    g["T"][j].append(None)
                    continue
                try:
                    v = float(text)
                except ValueError:
                    raise ParseError(f"column {header[i]!r}: {text!r} is not a number", line=lineno) from None
                if v not in TARGET_VALUES:
                    raise ParseError(f"column {header[i]!r}: value {v} outside allowed set", line=lineno)
                g["T"][j].append(v)
                g.setdefault("tline", {}).setdefault(j, lineno)

    eras = []
    for era in sorted(groups):
        g = groups[era]
        targets = {}
        for j, name in enumerate(tnames):
            vals = g["T"][j]
            missing = sum(v is None for v in vals)
            if missing == len(vals):
                targets[name] = None
            elif missing:
                raise ParseError(
                    f"era {era}: target {name!r} partially missing", line=g["tline"][j]
                )
            else:
                targets[name] = np.array(vals, dtype=np.float64)
        X = np.array(g["X"], dtype=np.int8).reshape(len(g["ids"]), len(fnames))
        eras.append(PanelEra(era, g["ids"], X, targets))
    return PanelSet(tuple(eras), tuple(fnames))


def predictions_to_csv(predictions: Mapping[int, tuple]) -> str:
    """Rows ordered by ``(era, id)``; ``predictions`` maps era to ``(ids, scores)``."""
    buf = io.StringIO()
    buf.write("era,id,score\n")
    for era in sorted(predictions):
        ids, scores = predictions[era]
        scores = np.asarray(scores, dtype=np.float64)
        if len(ids) != scores.shape[0]:
            raise ValueError(f"era {era}: {len(ids)} ids for {scores.shape[0]} scores")
        if not np.all(np.isfinite(scores)):
            raise ValueError(f"era {era}: non-finite score")
        for rid, s in sorted(zip(ids, scores.tolist())):
            if "," in rid or "\n" in rid:
                raise ValueError(f"id {rid!r} cannot be written unquoted")
            buf.write(f"{int(era)},{rid},{s:.17g}\n")
    return buf.getvalue()


def write_predictions_csv(path, predictions: Mapping[int, tuple]) -> None:
    Path(path).write_text(predictions_to_csv(predictions), encoding="utf-8", newline="")


def read_predictions_csv(path) -> dict[int, tuple]:
    out: dict[int, tuple] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["era", "id", "score"]:
            raise ParseError("header must be 'era,id,score'", line=1)
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 3:
                raise ParseError("expected 3 fields", line=lineno)
            era = _parse_int(row[0], lineno, "era")
            ids, scores = out.setdefault(era, ([], []))
            ids.append(row[1])
            scores.append(float(row[2]))
    return {e: (ids, np.array(s)) for e, (ids, s) in out.items()}


# --------------------------------------------------------------------------
# synthetic panels
# --------------------------------------------------------------------------

DEFAULT_PROPORTIONS = (0.05, 0.20, 0.50, 0.20, 0.05)

# purposes for per-era random streams
_S_COUNT, _S_EXPOSURE, _S_FEATURE_NOISE, _S_RETURN_NOISE, _S_TIES, _S_AUX, _S_FACTOR = range(7)
_S_LOADINGS = 100


@dataclass(frozen=True)
class Regime:
    start_era: int
    weights: tuple
    noise_scale: float


@dataclass(frozen=True)
class SyntheticConfig:
    """Latent-factor panel with piecewise-constant factor returns.

    Feature ``j`` is a noisy view of factor ``j % n_factors`` (plus a small
    random mix of the others) binned into five equal groups per era.  The
    main target bins the era's return ranks with ``target_bin_proportions``;
    each auxiliary target re-bins the return plus independent noise.  An
    era's factor returns are the regime weights plus a per-era shock of
    size ``factor_volatility``.  The last ``n_live_eras`` eras have no
    resolved targets.
    """

    n_eras: int = 150
    stocks_per_era: tuple = (200, 300)
    n_factors: int = 4
    n_features: int = 20
    regime_schedule: tuple = ((1, (0.25, 0.15, 0.1, 0.05), 1.0),)
    target_bin_proportions: tuple = DEFAULT_PROPORTIONS
    seed: int = 0
    feature_noise: float = 0.5
    cross_loading: float = 0.2
    target_names: tuple = ("main",)
    aux_target_noise: float = 0.5
    n_live_eras: int = 0
    factor_volatility: float = 0.05

    def __post_init__(self):
        object.__setattr__(self, "stocks_per_era", tuple(int(v) for v in self.stocks_per_era))
        sched = tuple(
            r if isinstance(r, Regime) else Regime(int(r[0]), tuple(float(w) for w in r[1]), float(r[2]))
            for r in self.regime_schedule
        )
        object.__setattr__(self, "regime_schedule", sched)
        object.__setattr__(self, "target_bin_proportions", tuple(float(p) for p in self.target_bin_proportions))
        object.__setattr__(self, "target_names", tuple(self.target_names))
        if self.n_eras < 1:
            raise ConfigError("n_eras must be >= 1")
        lo, hi = self.stocks_per_era
        if not 2 <= lo <= hi:
            raise ConfigError("stocks_per_era must be an inclusive range with 2 <= lo <= hi")
        if self.n_factors < 1:
            raise ConfigError("n_factors must be >= 1")
        if self.n_features < self.n_factors:
            raise ConfigError("n_features must be >= n_factors")
        if not sched or sched[0].start_era != 1:
            raise ConfigError("regime_schedule must start at era 1")
        if any(b.start_era <= a.start_era for a, b in zip(sched, sched[1:])):
            raise ConfigError("regime start eras must be strictly increasing")
        for r in sched:
            if len(r.weights) != self.n_factors:
                raise ConfigError("each regime needs one weight per factor")
            if r.noise_scale < 0:
                raise ConfigError("noise_scale must be >= 0")
        props = self.target_bin_proportions
        if len(props) != 5 or any(p < 0 for p in props) or abs(sum(props) - 1.0) > 1e-12:
            raise ConfigError("target_bin_proportions must be 5 non-negative values summing to 1")
        if not self.target_names:
            raise ConfigError("at least one target name required")
        if self.factor_volatility < 0:
            raise ConfigError("factor_volatility must be >= 0")
        if not 0 <= self.n_live_eras <= self.n_eras:
            raise ConfigError("n_live_eras out of range")

    def regime_at(self, era: int) -> Regime:
        active = self.regime_schedule[0]
        for r in self.regime_schedule:
            if r.start_era <= era:
                active = r
        return active

    @property
    def feature_names(self) -> tuple:
        width = len(str(self.n_features - 1))
        return tuple(f"{j:0{width}d}" for j in range(self.n_features))


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(key)))


def _ranks(values: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """0-based ranks; ties broken by position after a seeded shuffle."""
    perm = rng.permutation(values.shape[0])
    order = perm[np.argsort(values[perm], kind="stable")]
    ranks = np.empty(values.shape[0], dtype=np.int64)
    ranks[order] = np.arange(values.shape[0])
    return ranks


def _bin_by_proportions(ranks: np.ndarray, proportions) -> np.ndarray:
    n = ranks.shape[0]
    edges = np.cumsum(proportions)[:-1]
    return np.searchsorted(edges, (ranks + 0.5) / n, side="right")


def _loadings(cfg: SyntheticConfig) -> np.ndarray:
    rng = _rng(cfg.seed, _S_LOADINGS)
    L = cfg.cross_loading * rng.standard_normal((cfg.n_features, cfg.n_factors))
    L[np.arange(cfg.n_features), np.arange(cfg.n_features) % cfg.n_factors] = 1.0
    return L


def _row_ids(seed: int, era: int, n: int) -> list[str]:
    return [
        hashlib.blake2b(f"{seed}:{era}:{i}".encode(), digest_size=8).hexdigest() for i in range(n)
    ]


def generate_era(cfg: SyntheticConfig, era: int, loadings: np.ndarray | None = None) -> PanelEra:
    L = _loadings(cfg) if loadings is None else loadings
    lo, hi = cfg.stocks_per_era
    n = int(_rng(cfg.seed, era, _S_COUNT).integers(lo, hi + 1))
    Z = _rng(cfg.seed, era, _S_EXPOSURE).standard_normal((n, cfg.n_factors))
    views = Z @ L.T + cfg.feature_noise * _rng(cfg.seed, era, _S_FEATURE_NOISE).standard_normal(
        (n, cfg.n_features)
    )
    tie_rng = _rng(cfg.seed, era, _S_TIES)
    X = np.empty((n, cfg.n_features), dtype=np.int8)
    for j in range(cfg.n_features):
        X[:, j] = (_ranks(views[:, j], tie_rng) * 5) // n - 2

    regime = cfg.regime_at(era)
    weights = np.asarray(regime.weights) + cfg.factor_volatility * _rng(
        cfg.seed, era, _S_FACTOR
    ).standard_normal(cfg.n_factors)
    ret = Z @ weights + regime.noise_scale * _rng(
        cfg.seed, era, _S_RETURN_NOISE
    ).standard_normal(n)
    targets: dict = {}
    live = era > cfg.n_eras - cfg.n_live_eras
    aux_rng = _rng(cfg.seed, era, _S_AUX)
    for k, name in enumerate(cfg.target_names):
        r = ret if k == 0 else ret + cfg.aux_target_noise * aux_rng.standard_normal(n)
        if live:
            targets[name] = None
            continue
        bins = _bin_by_proportions(_ranks(r, tie_rng), cfg.target_bin_proportions)
        targets[name] = np.asarray(TARGET_VALUES)[bins]
    return PanelEra(era, _row_ids(cfg.seed, era, n), X, targets)


def generate_synthetic(cfg: SyntheticConfig) -> PanelSet:
    """Deterministic synthetic panel; each era draws from its own sub-streams."""
    L = _loadings(cfg)
    eras = tuple(generate_era(cfg, e, L) for e in range(1, cfg.n_eras + 1))
    return PanelSet(eras, cfg.feature_names)


def synthetic_config_from_dict(data: dict) -> SyntheticConfig:
    known = set(SyntheticConfig.__dataclass_fields__)
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown synthetic keys: {sorted(unknown)}")
    data = dict(data)
    if "regime_schedule" in data:
        sched = []
        for r in data["regime_schedule"]:
            if isinstance(r, Mapping):
                sched.append((r["start_era"], r["weights"], r["noise_scale"]))
            else:
                sched.append(tuple(r))
        data["regime_schedule"] = tuple(sched)
    return SyntheticConfig(**data)
