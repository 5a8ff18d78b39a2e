"""
Cache module for storing and retrieving calibrated coupling strengths.

Calibrating mu for a random crosstalk ensemble eigendecomposes hundreds of
matrices per bisection step. This module keeps the results on disk, keyed by
everything the calibration depends on.
"""

import json
import logging
import os
from pathlib import Path
from typing import Dict, Optional

from .constants import DEFAULT_CACHE_FILE


class CalibrationCache:
    """A simple JSON cache of calibrated mu values."""

    def __init__(self, cache_file: str = DEFAULT_CACHE_FILE):
        """Initialize the cache from the cache file or create an empty cache."""
        self.logger = logging.getLogger("cache")
        self.cache: Dict[str, float] = {}
        self.cache_file = Path(cache_file)
        if not self.cache_file.is_absolute():
            self.cache_file = Path(os.getcwd()) / self.cache_file

        try:
            if self.cache_file.exists():
                with open(self.cache_file, "r", encoding="utf-8") as f:
                    self.cache = json.load(f)
                self.logger.debug(f"Loaded {len(self.cache)} calibrations from {self.cache_file}")
        except (json.JSONDecodeError, OSError) as e:
            self.logger.warning(f"Error loading calibration cache {self.cache_file}: {e}")
            self.cache = {}

    @staticmethod
    def key(dim: int, target: float, samples: int, seed: int) -> str:
        """
        Build the cache key of one calibration.

        Args:
            dim: Matrix dimension D
            target: Target ensemble-mean off-diagonal crosstalk
            samples: Ensemble size used by the calibration
            seed: Master seed of the calibration draws

        Returns:
            A string key such as "D9:t0.0017:s500:seed1"
        """
        return f"D{dim}:t{target!r}:s{samples}:seed{seed}"

    def get(self, calibration_key: str) -> Optional[float]:
        """
        Get the cached mu for a calibration.

        Returns:
            The cached mu or None if not in cache
        """
        return self.cache.get(calibration_key)

    def set(self, calibration_key: str, mu: float) -> None:
        """
        Store a calibrated mu and save the cache to disk.

        A failed write is logged; the value stays cached in memory.
        """
        self.cache[calibration_key] = mu
        try:
            self.cache_file.parent.mkdir(parents=True, exist_ok=True)
            with open(self.cache_file, "w", encoding="utf-8") as f:
                json.dump(self.cache, f, indent=2, sort_keys=True)
        except OSError as e:
            self.logger.error(f"Error saving calibration cache {self.cache_file}: {e}")

    def clear(self) -> None:
        """Clear the cache and delete the cache file."""
        self.cache = {}
        try:
            if self.cache_file.exists():
                os.remove(self.cache_file)
        except OSError as e:
            self.logger.error(f"Error clearing calibration cache: {e}")
