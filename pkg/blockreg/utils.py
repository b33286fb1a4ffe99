"""
Utility functions for formatting blockreg results.

This module provides JSON and text formatting shared by the CLI and the
MCP tool server.
"""

import json
import os
from typing import Any, Dict, List, Optional

import numpy as np


# Custom JSON encoder for handling numpy scalars and arrays
class NumpyEncoder(json.JSONEncoder):
    def default(self, o):
        if isinstance(o, np.integer):
            return int(o)
        if isinstance(o, np.floating):
            return float(o)
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, os.PathLike):
            return os.fspath(o)
        return super().default(o)


def to_jsonable(result: Any) -> Any:
    """Round-trip through JSON so tool payloads contain only plain Python types."""
    return json.loads(json.dumps(result, cls=NumpyEncoder))


def format_float(value: Optional[float]) -> str:
    """17 significant digits, enough to reproduce any double exactly."""
    if value is None:
        return ""
    return "%.17g" % value


def format_table(rows: List[Dict[str, Any]]) -> str:
    """Format a list of dictionaries as a markdown table."""
    if not rows:
        return "No results found."
    header = list(rows[0].keys())
    table_str = "| " + " | ".join(header) + " |\n"
    table_str += "| " + " | ".join(["---"] * len(header)) + " |\n"
    for row in rows:
        formatted_values = []
        for val in row.values():
            if val is None:
                formatted_values.append("")
            elif isinstance(val, (float, np.floating)):
                formatted_values.append(f"{float(val):.4f}")
            else:
                formatted_values.append(str(val))
        table_str += "| " + " | ".join(formatted_values) + " |\n"
    return table_str
