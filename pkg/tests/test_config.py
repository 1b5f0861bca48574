"""
配置加载与日志级别测试
"""
import logging
from pathlib import Path

import pytest
import yaml

from src.core.config import (
    LOG_ENV_VAR,
    TABLE_BURST_PROBS,
    TABLE_GRIDS,
    load_config,
    resolve_log_level,
    resolved_config,
)
from src.core.errors import ConfigError
from src.core.models import ExperimentConfig

CONFIG_DIR = Path(__file__).resolve().parent.parent / "config"


def write_config(tmp_path, data) -> Path:
    path = tmp_path / "config.yaml"
    path.write_text(yaml.safe_dump(data), encoding="utf-8")
    return path


@pytest.mark.parametrize("path", sorted(CONFIG_DIR.glob("*.yaml")), ids=lambda p: p.stem)
def test_bundled_configs_load(path):
    config = load_config(path)
    assert config.topology.node_count >= 6


@pytest.mark.parametrize("path", sorted(CONFIG_DIR.glob("*.yaml")), ids=lambda p: p.stem)
def test_resolved_config_reloads_identically(path, tmp_path):
    config = load_config(path)
    reloaded = load_config(write_config(tmp_path, resolved_config(config)))
    assert reloaded == config


def test_defaults_fill_missing_sections(tmp_path):
    config = load_config(write_config(tmp_path, {"name": "bare"}))
    assert config.topology.label == "ring6x1"
    assert config.simulation.warmup == 200_000
    assert config.simulation.measure == 2_000_000
    assert config.solver.damping == 0.5
    assert config.rate_axis() == [config.traffic.injection_rate]


def test_empty_file_is_all_defaults(tmp_path):
    path = tmp_path / "empty.yaml"
    path.write_text("", encoding="utf-8")
    assert load_config(path) == ExperimentConfig()


def test_application_overrides_burst_prob():
    config = load_config(CONFIG_DIR / "application_trace.yaml")
    assert config.traffic.burst_prob == 0.43


@pytest.mark.parametrize("data", [
    {"topology": {"kind": "torus"}},
    {"unknown_section": {}},
    {"topology": {"kind": "ring", "size": 6}, "routing": "yx"},
    {"traffic": {"pattern": "explicit"}},
    {"traffic": {"flows": [{"src": 0, "dst": 9, "rate": 0.1}]}},
    {"traffic": {"flows": [{"src": 2, "dst": 2, "rate": 0.1}]}},
    {"traffic": {"application": "doom"}},
    {"sweep": {"burst_probs": [1.0]}},
    {"sweep": {"injection_rates": [0.0]}},
    {"simulation": {"percentiles": [101]}},
    {"solver": {"damping": 0}},
])
def test_invalid_configs_are_rejected(tmp_path, data):
    with pytest.raises(ConfigError):
        load_config(write_config(tmp_path, data))


def test_missing_and_malformed_files(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.yaml")

    broken = tmp_path / "broken.yaml"
    broken.write_text("topology: [unclosed", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(broken)

    listing = tmp_path / "list.yaml"
    listing.write_text("- 1\n- 2\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(listing)


def test_table_grids_cover_every_burst_probability():
    for grid in TABLE_GRIDS.values():
        assert sorted(grid) == TABLE_BURST_PROBS
    assert TABLE_GRIDS["mesh6x6"][0.6] == [0.1, 0.3, 0.6]


# ============ 日志级别 ============

def test_log_level_precedence(monkeypatch):
    config = ExperimentConfig.model_validate({"logging": {"level": "ERROR"}})
    monkeypatch.delenv(LOG_ENV_VAR, raising=False)
    assert resolve_log_level(None, config) == logging.ERROR

    monkeypatch.setenv(LOG_ENV_VAR, "info")
    assert resolve_log_level(None, config) == logging.INFO
    assert resolve_log_level("debug", config) == logging.DEBUG


def test_unknown_log_level_falls_back(monkeypatch):
    monkeypatch.delenv(LOG_ENV_VAR, raising=False)
    assert resolve_log_level("chatty") == logging.WARNING
    assert resolve_log_level() == logging.WARNING
