"""Experiment configuration: pydantic models and TOML I/O."""

from ql_order.config.io import config_to_toml, dump_config, load_config, parse_config  # noqa: F401
from ql_order.config.model import ExperimentConfig  # noqa: F401
