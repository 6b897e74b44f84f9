"""Package logger configuration."""

from __future__ import annotations

import logging
import sys

ROOT_LOGGER_NAME = "chase"

_LOGGER = logging.getLogger(ROOT_LOGGER_NAME)
if not _LOGGER.handlers:
    handler = logging.StreamHandler(sys.stdout)
    handler.setFormatter(logging.Formatter("[chase] %(message)s"))
    _LOGGER.addHandler(handler)
_LOGGER.setLevel(logging.INFO)
_LOGGER.propagate = False


def get_logger(name: str) -> logging.Logger:
    """Return a child of the package logger for a module ``__name__``."""

    if name == ROOT_LOGGER_NAME or name.startswith(ROOT_LOGGER_NAME + "."):
        return logging.getLogger(name)
    return _LOGGER.getChild(name)


def set_debug(enabled: bool) -> None:
    _LOGGER.setLevel(logging.DEBUG if enabled else logging.INFO)
