"""
Logging module for demuxlimit.

This module provides a configurable logging setup for the command-line tool.
Library modules only obtain named loggers and never configure handlers.
"""

import logging
import os
from pathlib import Path

from .constants import DEFAULT_LOG_FILE


def setup_logging(log_file=DEFAULT_LOG_FILE, level=logging.INFO, file_mode="a", console=True):
    """
    Set up logging configuration for the application.

    Args:
        log_file: Path to the log file
        level: Logging level (e.g., logging.INFO, logging.DEBUG)
        file_mode: File mode for the log file ('a' to append, 'w' to overwrite)
        console: Whether to mirror log records to stderr
    """
    # Ensure the log directory exists
    log_path = Path(log_file)
    if log_path.parent != Path('.'):
        os.makedirs(log_path.parent, exist_ok=True)

    logging.basicConfig(
        filename=log_file,
        level=level,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
        filemode=file_mode
    )

    root_logger = logging.getLogger()
    if console:
        # stderr keeps stdout free for data written with --out -
        console_handler = logging.StreamHandler()
        console_handler.setLevel(level)
        console_handler.setFormatter(logging.Formatter("%(levelname)s: %(message)s"))
        root_logger.addHandler(console_handler)

    root_logger.info("Logging initialized")


def parse_level(name):
    """
    Convert a level name such as 'debug' to a logging level.

    Args:
        name: Level name, case-insensitive

    Returns:
        The numeric logging level

    Raises:
        ValueError: If the name is not a standard level
    """
    level = logging.getLevelName(str(name).upper())
    if not isinstance(level, int):
        raise ValueError(f"Unknown log level: {name}")
    return level


def get_logger(name):
    """
    Get a logger with the specified name.

    Args:
        name: The name for the logger

    Returns:
        A configured logger instance
    """
    return logging.getLogger(name)
