import json

import pytest

from tempora.config import load_config, parse_config
from tempora.cv import preset
from tempora.errors import ConfigError


def test_minimal_synthetic():
    cfg = parse_config({"data": {"synthetic": {"n_eras": 30}}})
    assert cfg.synthetic.n_eras == 30 and cfg.data_path is None
    assert cfg.main_target == "main" and cfg.model.kind == "gbdt"


def test_exactly_one_source(tmp_path):
    with pytest.raises(ConfigError):
        parse_config({"data": {}})
    (tmp_path / "p.csv").write_text("era,id,f_a\n")
    with pytest.raises(ConfigError):
        parse_config({"data": {"path": "p.csv", "synthetic": {}}}, tmp_path)
    assert parse_config({"data": {"path": "p.csv"}}, tmp_path).data_path == tmp_path / "p.csv"


def test_missing_file_is_config_error(tmp_path):
    with pytest.raises(ConfigError):
        parse_config({"data": {"path": "nope.csv"}}, tmp_path)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.json")


@pytest.mark.parametrize("doc", [
    {"data": {"synthetic": {}}, "extra": 1},
    {"data": {"synthetic": {}}, "model": {"kind": "gbdt", "depth": 3}},
    {"data": {"synthetic": {}}, "model": {"boost": {"n_trees": 3}}},
    {"data": {"synthetic": {}}, "project": {"rule": "low_mean", "size": 3}},
    {"data": {"synthetic": {"eras": 3}}},
])
def test_unknown_keys_rejected(doc):
    with pytest.raises(ConfigError):
        parse_config(doc)


def test_split_forms():
    assert parse_config({"data": {"synthetic": {}}, "split": "CV-2"}).split == preset("CV-2")
    assert parse_config({"data": {"synthetic": {}}, "split": {"preset": "cv-1"}}).split == preset("CV-1")
    cfg = parse_config({"data": {"synthetic": {}},
                        "split": {"train": [1, 10], "gap1": 2, "validation": [13, 15], "gap2": 1, "test": [17, 20]}})
    assert cfg.split.test == (17, 20)
    with pytest.raises(ConfigError):
        parse_config({"data": {"synthetic": {}}, "split": {"train": [1, 10], "validation": [10, 12], "test": [14, 15]}})


def test_fixed_set_file(tmp_path):
    (tmp_path / "fixed.txt").write_text("00\n03\n")
    cfg = parse_config({"data": {"synthetic": {}}, "project": {"rule": "fixed", "fixed_set_file": "fixed.txt"}}, tmp_path)
    assert cfg.project.fixed_set == ("00", "03")
    with pytest.raises(ConfigError):
        parse_config({"data": {"synthetic": {}}, "project": {"rule": "fixed"}})


def test_sweep_bounds():
    base = {"data": {"synthetic": {}}}
    ok = parse_config({**base, "sweep": {"grid": {"num_leaves": [4, 8], "fe.dropout_pct": [0.05]}}})
    assert ok.sweep.grid["num_leaves"] == [4, 8]
    for grid in ({"learning_rate": [0.5]}, {"seed": [1]}, {"num_leaves": []}, {"fe.n_products": [5000]}):
        with pytest.raises(ConfigError):
            parse_config({**base, "sweep": {"grid": grid}})


def test_lag_must_be_positive():
    with pytest.raises(ConfigError):
        parse_config({"data": {"synthetic": {}}, "project": {"rule": "low_mean", "lag": 0}})
    with pytest.raises(ConfigError):
        parse_config({"data": {"synthetic": {}}, "model": {"kind": "baseline", "lag": 0}})
    with pytest.raises(ConfigError):
        parse_config({"data": {"synthetic": {}}, "select": {"rule": "momentum", "lag": 0}})


def test_load_relative_paths(tmp_path):
    (tmp_path / "cfg.json").write_text(json.dumps({"data": {"synthetic": {}}, "output": "out", "seed": 4}))
    cfg = load_config(tmp_path / "cfg.json")
    assert cfg.output == tmp_path / "out" and cfg.seed == 4
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "bad.json")
