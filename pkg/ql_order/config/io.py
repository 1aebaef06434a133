"""Read and write experiment configurations as TOML."""
import logging
from pathlib import Path
import sys
from typing import Union

import tomli_w

from ql_order.config.model import ExperimentConfig
from ql_order.config.validate import validate_config
from ql_order.errors import ConfigError
from ql_order.utils import create_dirs


if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


logger = logging.getLogger(__name__)


def parse_config(text: str, source: str = "<string>") -> ExperimentConfig:
    """Parse and validate a TOML document."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        logger.error(f"Cannot parse {source}")
        raise ConfigError(f"{source}: {exc}") from exc
    return validate_config(data, logger, ExperimentConfig, source=source)


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """Read a TOML config file."""
    logger.info(f"Loading config {path}")
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, source=str(path))


def config_to_toml(config: ExperimentConfig) -> str:
    """Serialise a config; unset optional entries are omitted."""
    return tomli_w.dumps(config.dict(exclude_none=True))


def dump_config(config: ExperimentConfig, path: Union[str, Path]):
    """Write a config as TOML, creating missing directories."""
    text = config_to_toml(config)
    try:
        create_dirs(str(path))
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc}") from exc
    logger.info(f"Config written to {path}")
