"""
Report formatter module.

Formats command results as CSV or JSON artifacts. Every artifact carries the
tool version and the full run configuration, so re-running the embedded
configuration reproduces the data.
"""

import csv
import io
import json
import logging
import math
import os
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from .constants import FLOAT_FORMAT


def format_value(value: Any) -> str:
    """CSV text for one cell; floats use 17 significant digits."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return FLOAT_FORMAT.format(value)
    if isinstance(value, (dict, list)):
        return json.dumps(value, sort_keys=True, separators=(",", ":"))
    return str(value)


def _to_json_compatible(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _to_json_compatible(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_to_json_compatible(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_to_json_compatible(v) for v in value.tolist()]
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        # JSON has no inf/nan; they travel as strings like in the CSV cells
        return value if math.isfinite(value) else format_value(value)
    if isinstance(value, complex):
        return [value.real, value.imag]
    return value


class ReportFormatter:
    """Class to format command results and write them to an output file."""

    def __init__(self, version: str):
        """
        Initialize the report formatter.

        Args:
            version: Tool version embedded in every artifact
        """
        self.version = version
        self.logger = logging.getLogger("report_formatter")

    def config_line(self, config: Dict[str, Any]) -> str:
        return json.dumps(_to_json_compatible(config), sort_keys=True, separators=(",", ":"))

    def format_csv(self, columns: Sequence[str], rows: List[Dict[str, Any]], config: Dict[str, Any]) -> str:
        """
        Format rows as CSV behind two comment lines with version and configuration.

        Args:
            columns: Column names in output order
            rows: One dict per row; missing keys give empty cells
            config: The run configuration

        Returns:
            The CSV text
        """
        buffer = io.StringIO()
        buffer.write(f"# demuxlimit {self.version}\n")
        buffer.write(f"# config: {self.config_line(config)}\n")
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_value(row.get(column)) for column in columns])
        return buffer.getvalue()

    def format_json(self, data: Any, config: Dict[str, Any]) -> str:
        """Format data as {"version", "config", "data"}."""
        document = {
            "version": self.version,
            "config": _to_json_compatible(config),
            "data": _to_json_compatible(data),
        }
        return json.dumps(document, indent=2, sort_keys=True) + "\n"

    def format_table(self, columns: Sequence[str], rows: List[Dict[str, Any]], config: Dict[str, Any],
                     output_format: str) -> str:
        if output_format == "json":
            return self.format_json([{c: row.get(c) for c in columns} for row in rows], config)
        return self.format_csv(columns, rows, config)

    def write_to_report(self, output_file: Optional[str], content: str, mode: str = "w") -> None:
        """
        Write content to the output file; '-' or None writes to stdout.

        Raises:
            PermissionError: If the output directory is not writable
            OSError: If the file cannot be written
        """
        if output_file in (None, "-"):
            sys.stdout.write(content)
            sys.stdout.flush()
            return
        output_path = Path(output_file)
        output_dir = output_path.parent
        try:
            if str(output_dir) != ".":
                self.logger.debug(f"Creating directory: {output_dir}")
                output_dir.mkdir(parents=True, exist_ok=True)
            if not os.access(output_dir, os.W_OK):
                raise PermissionError(f"No write permissions for directory: {output_dir}")
            with open(output_path, mode, encoding="utf-8", newline="") as f:
                f.write(content)
            self.logger.info(f"Wrote {output_path}")
        except OSError as e:
            self.logger.error(f"Failed to write output file '{output_file}': {e}")
            raise
