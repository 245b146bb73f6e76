"""Run configuration: a JSON document with strict keys.

Example::

    {
      "data": {"synthetic": {"n_eras": 120}},
      "split": {"train": [1, 60], "gap1": 4, "validation": [65, 80], "gap2": 4, "test": [85, 120]},
      "model": {"kind": "gbdt", "boost": {"mode": "dart", "n_estimators": 50}},
      "ensemble": {"n_seeds": 3, "targets": ["main"]},
      "project": {"rule": "low_mean"},
      "select": {"rule": "momentum", "warm_up": 10},
      "seed": 7
    }
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from tempora.cv import GroupedSplitSpec, preset
from tempora.data_io import SyntheticConfig, synthetic_config_from_dict
from tempora.errors import ConfigError
from tempora.features import FeatureEngConfig
from tempora.gbdt import SEARCH_BOUNDS, BoostConfig
from tempora.models import ENSEMBLE_MODES
from tempora.projection import RULE_KINDS
from tempora.selection import SELECTION_RULES

TOP_KEYS = {
    "data", "split", "fe", "model", "ensemble", "project", "select", "sweep",
    "regime", "output", "seed", "workers",
}
MODEL_KINDS = ("gbdt", "baseline")


def _check_keys(section: str, data, allowed) -> dict:
    if not isinstance(data, dict):
        raise ConfigError(f"{section} must be an object")
    unknown = set(data) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown keys in {section}: {sorted(unknown)}")
    return data


@dataclass(frozen=True)
class ModelConfig:
    kind: str = "gbdt"
    boost: BoostConfig = field(default_factory=BoostConfig)
    prune_first: int = 0
    window: int = 52
    lag: int = 6


@dataclass(frozen=True)
class EnsembleConfig:
    n_seeds: int = 10
    targets: tuple = ("main",)
    mode: str = "over-predictions"


@dataclass(frozen=True)
class ProjectConfig:
    rule: str = "low_mean"
    k: int | None = None
    beta: float = 1.0
    window: int = 52
    lag: int = 6
    fixed_set: tuple | None = None


@dataclass(frozen=True)
class SelectConfig:
    rule: str = "momentum"
    warm_up: int = 52
    window: int = 52
    lag: int = 6


@dataclass(frozen=True)
class SweepConfig:
    grid: dict = field(default_factory=dict)
    sample: int | None = None
    seed: int = 0


@dataclass(frozen=True)
class RunConfig:
    data_path: Path | None = None
    synthetic: SyntheticConfig | None = None
    split: GroupedSplitSpec | None = None
    fe: FeatureEngConfig | None = None
    model: ModelConfig = field(default_factory=ModelConfig)
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    project: ProjectConfig | None = None
    select: SelectConfig | None = None
    sweep: SweepConfig | None = None
    regime_window: int = 52
    regime_threshold: float = 0.025
    output: Path = Path("out")
    seed: int = 0
    workers: int = 1

    @property
    def main_target(self) -> str:
        return self.ensemble.targets[0]

    def replace(self, **changes) -> "RunConfig":
        return replace(self, **changes)


def _split(data) -> GroupedSplitSpec:
    if isinstance(data, str):
        return preset(data)
    _check_keys("split", data, {"preset", "train", "gap1", "validation", "gap2", "test"})
    if "preset" in data:
        if len(data) != 1:
            raise ConfigError("split.preset cannot be combined with explicit ranges")
        return preset(data["preset"])
    try:
        return GroupedSplitSpec(
            tuple(data["train"]), data.get("gap1", 0), tuple(data["validation"]),
            data.get("gap2", 0), tuple(data["test"]),
        )
    except KeyError as exc:
        raise ConfigError(f"split is missing {exc.args[0]!r}") from None


def _check_bounds(name: str, value) -> None:
    if name in SEARCH_BOUNDS:
        lo, hi = SEARCH_BOUNDS[name]
        if not lo <= value <= hi:
            raise ConfigError(f"sweep value {name}={value} outside [{lo}, {hi}]")


SWEEP_FE_KEYS = {"fe.n_products": (0, 1000), "fe.dropout_pct": (0.0, 0.25)}


def _sweep(data) -> SweepConfig:
    _check_keys("sweep", data, {"grid", "sample", "seed"})
    grid = data.get("grid", {})
    if not isinstance(grid, dict) or not grid:
        raise ConfigError("sweep.grid must be a non-empty object")
    boost_fields = set(BoostConfig.__dataclass_fields__) - {"seed", "mode"}
    for name, values in grid.items():
        if not isinstance(values, list) or not values:
            raise ConfigError(f"sweep.grid.{name} must be a non-empty list")
        if name in SWEEP_FE_KEYS:
            lo, hi = SWEEP_FE_KEYS[name]
            for v in values:
                if not lo <= v <= hi:
                    raise ConfigError(f"sweep value {name}={v} outside [{lo}, {hi}]")
        elif name in boost_fields:
            for v in values:
                _check_bounds(name, v)
        else:
            raise ConfigError(f"sweep.grid.{name} is not a tunable hyperparameter")
    sample = data.get("sample")
    if sample is not None and sample < 1:
        raise ConfigError("sweep.sample must be >= 1")
    return SweepConfig(dict(grid), sample, int(data.get("seed", 0)))


def parse_config(doc: dict, base_dir: Path | None = None) -> RunConfig:
    base_dir = Path(".") if base_dir is None else base_dir
    _check_keys("config", doc, TOP_KEYS)
    kw: dict = {}

    data = _check_keys("data", doc.get("data", {}), {"path", "synthetic"})
    if ("path" in data) == ("synthetic" in data):
        raise ConfigError("data needs exactly one of 'path' or 'synthetic'")
    if "path" in data:
        path = Path(data["path"])
        path = path if path.is_absolute() else base_dir / path
        if not path.exists():
            raise ConfigError(f"data file {path} does not exist")
        kw["data_path"] = path
    else:
        kw["synthetic"] = synthetic_config_from_dict(data["synthetic"] or {})

    if doc.get("split") is not None:
        kw["split"] = _split(doc["split"])

    if doc.get("fe") is not None:
        fe = _check_keys("fe", doc["fe"], FeatureEngConfig.__dataclass_fields__)
        kw["fe"] = FeatureEngConfig(**fe)

    if "model" in doc:
        m = _check_keys("model", doc["model"], {"kind", "boost", "prune_first", "window", "lag"})
        kind = m.get("kind", "gbdt")
        if kind not in MODEL_KINDS:
            raise ConfigError(f"model.kind must be one of {MODEL_KINDS}")
        prune = int(m.get("prune_first", 0))
        if prune < 0:
            raise ConfigError("model.prune_first must be >= 0")
        if int(m.get("lag", 6)) < 1:
            raise ConfigError("model.lag must be >= 1 so an era never sees its own target")
        kw["model"] = ModelConfig(
            kind, BoostConfig.from_dict(m.get("boost", {})), prune,
            int(m.get("window", 52)), int(m.get("lag", 6)),
        )

    if "ensemble" in doc:
        e = _check_keys("ensemble", doc["ensemble"], {"n_seeds", "targets", "mode"})
        ens = EnsembleConfig(
            int(e.get("n_seeds", 10)), tuple(e.get("targets", ("main",))),
            e.get("mode", "over-predictions"),
        )
        if ens.n_seeds < 1 or not ens.targets or ens.mode not in ENSEMBLE_MODES:
            raise ConfigError("ensemble needs n_seeds >= 1, a target list and a valid mode")
        kw["ensemble"] = ens

    if doc.get("project") is not None:
        p = _check_keys("project", doc["project"], {"rule", "k", "beta", "window", "lag", "fixed_set_file"})
        fixed = None
        if p.get("fixed_set_file"):
            fpath = Path(p["fixed_set_file"])
            fpath = fpath if fpath.is_absolute() else base_dir / fpath
            if not fpath.exists():
                raise ConfigError(f"fixed_set_file {fpath} does not exist")
            fixed = tuple(l.strip() for l in fpath.read_text(encoding="utf-8").splitlines() if l.strip())
        proj = ProjectConfig(
            p.get("rule", "low_mean"), p.get("k"), float(p.get("beta", 1.0)),
            int(p.get("window", 52)), int(p.get("lag", 6)), fixed,
        )
        if proj.lag < 1:
            raise ConfigError("project.lag must be >= 1 so an era never sees its own target")
        if proj.rule not in RULE_KINDS:
            raise ConfigError(f"project.rule must be one of {RULE_KINDS}")
        if proj.rule == "fixed" and not fixed:
            raise ConfigError("project.rule 'fixed' needs project.fixed_set_file")
        kw["project"] = proj

    if doc.get("select") is not None:
        s = _check_keys("select", doc["select"], {"rule", "warm_up", "window", "lag"})
        sel = SelectConfig(
            s.get("rule", "momentum"), int(s.get("warm_up", 52)),
            int(s.get("window", 52)), int(s.get("lag", 6)),
        )
        if sel.lag < 1:
            raise ConfigError("select.lag must be >= 1 so an era never sees its own target")
        if sel.rule not in SELECTION_RULES:
            raise ConfigError(f"select.rule must be one of {SELECTION_RULES}")
        kw["select"] = sel

    if doc.get("sweep") is not None:
        kw["sweep"] = _sweep(doc["sweep"])

    if doc.get("regime") is not None:
        r = _check_keys("regime", doc["regime"], {"window", "threshold"})
        kw["regime_window"] = int(r.get("window", 52))
        kw["regime_threshold"] = float(r.get("threshold", 0.025))

    if "output" in doc:
        out = Path(doc["output"])
        kw["output"] = out if out.is_absolute() else base_dir / out
    if "seed" in doc:
        kw["seed"] = int(doc["seed"])
    if "workers" in doc:
        kw["workers"] = int(doc["workers"])
        if kw["workers"] < 1:
            raise ConfigError("workers must be >= 1")
    return RunConfig(**kw)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    return parse_config(doc, path.parent)
