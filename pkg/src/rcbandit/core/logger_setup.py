"""Logging configuration for rcbandit.

This module configures Loguru for application-wide logging with proper formatting
and optional file output.
"""

import sys
from pathlib import Path
from typing import Optional

from loguru import logger

from rcbandit.core.config import settings

_CONSOLE_FORMAT = (
    "<green>{time:YYYY-MM-DD HH:mm:ss}</green> | <level>{level: <8}</level> | "
    "<cyan>{file.name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> - <level>{message}</level>"
)
_FILE_FORMAT = "{time:YYYY-MM-DD HH:mm:ss} | {level: <8} | {file.name}:{function}:{line} - {message}"


def configure_logging(level: Optional[str] = None, log_file: Optional[Path] = None) -> None:
    """(Re)install the console sink and, when requested, a JSON file sink.

    Args:
        level: Minimum level for all sinks, defaults to ``settings.log_level``
        log_file: Path of a rotating, serialized log file
    """
    resolved_level = level or settings.log_level
    logger.remove()
    logger.add(sys.stderr, format=_CONSOLE_FORMAT, level=resolved_level)

    target = log_file or settings.log_file
    if target is not None:
        logger.add(
            Path(target),
            rotation="100 MB",
            retention="10 days",
            format=_FILE_FORMAT,
            level=resolved_level,
            serialize=True,
        )


configure_logging()


def get_logger(name: str):
    """Get a logger instance for the specified module.

    Args:
        name: The module name (typically __name__)

    Returns:
        A configured logger instance
    """
    return logger.bind(name=name)
