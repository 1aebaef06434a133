"""Validate ql-order config data with pydantic."""
from typing import Any, Dict, Type, TypeVar

from pydantic import BaseModel, ValidationError

from ql_order.errors import ConfigError


ModelT = TypeVar("ModelT", bound=BaseModel)


def validate_config(data: Dict[str, Any], logger, pydantic_class: Type[ModelT], source: str = "<config>") -> ModelT:
    """Run pydantic on the parsed config tables."""
    try:
        config = pydantic_class(**data)
    except ValidationError as exc:
        logger.error(f"Config validation failed for {source}")
        logger.error(exc)
        raise ConfigError(f"invalid configuration {source}:\n{exc}") from exc
    logger.info(f"Config validation successful for {source}")
    return config
