"""
NocPerf - 配置加载与日志初始化
"""
import logging
import os
from pathlib import Path

import yaml
from pydantic import ValidationError

from .errors import ConfigError
from .models import ExperimentConfig

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
LOG_ENV_VAR = "NOCPERF_LOG"
DEFAULT_LOG_LEVEL = "WARNING"

# 误差表的 λ 网格, p_b 统一为 {0.2, 0.4, 0.6}
TABLE_BURST_PROBS = [0.2, 0.4, 0.6]
TABLE_GRIDS: dict[str, dict[float, list[float]]] = {
    "ring6x1": {p: [0.1, 0.4, 0.6] for p in TABLE_BURST_PROBS},
    "ring8x1": {p: [0.1, 0.3, 0.5] for p in TABLE_BURST_PROBS},
    "mesh4x4": {p: [0.2, 0.5, 0.8] for p in TABLE_BURST_PROBS},
    "mesh6x6": {0.2: [0.1, 0.4, 0.6], 0.4: [0.1, 0.4, 0.6], 0.6: [0.1, 0.3, 0.6]},
}


def load_config(path: str | Path) -> ExperimentConfig:
    """读取YAML/JSON配置并校验"""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")

    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ConfigError(f"cannot parse {path}: {e}") from e

    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")

    try:
        config = ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"invalid config {path}:\n{e}") from e

    logger.info(f"Loaded config '{config.name}' from {path}")
    return config


def resolved_config(config: ExperimentConfig) -> dict:
    """默认值回显, 重新加载后得到相同配置"""
    return config.model_dump(mode="json")


def resolve_log_level(cli_level: str | None = None, config: ExperimentConfig | None = None) -> int:
    """命令行 > 环境变量 NOCPERF_LOG > 配置文件"""
    name = cli_level or os.environ.get(LOG_ENV_VAR)
    if not name and config is not None:
        name = config.logging.level
    name = (name or DEFAULT_LOG_LEVEL).upper()

    level = logging.getLevelName(name)
    if not isinstance(level, int):
        logger.warning(f"Unknown log level '{name}', using {DEFAULT_LOG_LEVEL}")
        return logging.WARNING
    return level


def setup_logging(level: int = logging.WARNING):
    """初始化日志"""
    logging.basicConfig(level=level, format=LOG_FORMAT, force=True)
