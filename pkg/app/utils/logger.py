import logging
from typing import Optional, Union

from app.config import Config
from app.models.errors import ConfigurationError

ROOT = "app"
LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")

Level = Union[str, int]


def parse_level(level: Level) -> int:
    if isinstance(level, int):
        return level
    value = logging.getLevelName(level.strip().upper())
    if not isinstance(value, int):
        raise ConfigurationError(f"unknown log level {level!r}; use one of {LEVELS}")
    return value


def _root() -> logging.Logger:
    """Package logger holding the only handler; module loggers propagate into it"""
    root = logging.getLogger(ROOT)
    if not root.handlers:
        try:
            root.setLevel(parse_level(Config.LOG_LEVEL))
        except ConfigurationError:
            root.setLevel(logging.INFO)

        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(Config.LOG_FORMAT))
        root.addHandler(handler)
    return root


def setup_logger(name: str, level: Optional[Level] = None) -> logging.Logger:
    """Logger under the package handler; names outside the package are nested into it"""
    _root()
    if name != ROOT and not name.startswith(ROOT + "."):
        name = f"{ROOT}.{name}"
    logger = logging.getLogger(name)
    if level is not None:
        logger.setLevel(parse_level(level))
    return logger


def set_log_level(level: Level) -> None:
    """Run-wide level; loggers without their own level follow it"""
    _root().setLevel(parse_level(level))
