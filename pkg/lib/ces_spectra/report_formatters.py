"""
    Output formats of the command line: CSV with 17 significant digits, deterministic JSON
    validated against resources/report_schema.json, and plain text tables.
"""

import csv
import io
import json
import logging
import math
from enum import Enum
from functools import lru_cache
from pathlib import Path
from typing import Any, Iterable, Sequence

import allure
import jsonschema
import numpy as np
import orjson

logger = logging.getLogger("CesLogger")

SCHEMA_PATH = Path(__file__).parent / "resources" / "report_schema.json"
CSV_FLOAT_FORMAT = "%.17g"
TABLE_FLOAT_FORMAT = "%.10g"


class OutputFormat(Enum):
    TABLE = "table"
    CSV = "csv"
    JSON = "json"


def _csv_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return CSV_FLOAT_FORMAT % value
    return str(value)


def to_csv(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    """
    Render rows as CSV: ',' separator, '.' decimal point, LF line endings.

    Floats are written with 17 significant digits so that they read back bit-exact.
    """
    buffer = io.StringIO(newline="")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_csv_cell(value) for value in row])
    return buffer.getvalue()


def _table_cell(value: Any) -> str:
    if value is None:
        return "-"
    if isinstance(value, complex):
        if value.imag == 0:
            return TABLE_FLOAT_FORMAT % value.real
        return f"{TABLE_FLOAT_FORMAT % value.real}{value.imag:+.6g}j"
    if isinstance(value, float):
        return TABLE_FLOAT_FORMAT % value
    if isinstance(value, (list, tuple)):
        return "(" + ", ".join(_table_cell(item) for item in value) + ")"
    return str(value)


def to_table(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    cells = [list(header)] + [[_table_cell(value) for value in row] for row in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(header))]
    lines = ["  ".join(cell.rjust(width) for cell, width in zip(row, widths)) for row in cells]
    lines.insert(1, "  ".join("-" * width for width in widths))
    return "\n".join(lines) + "\n"


def _plain(value: Any) -> Any:
    """Replace non-finite floats and complex numbers with JSON-representable values."""
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, dict):
        return {str(key): _plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_plain(item) for item in value]
    if isinstance(value, complex):
        return {"re": value.real, "im": value.imag}
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, Enum):
        return value.value
    return value


@lru_cache(maxsize=1)
def report_schema() -> dict:
    with open(SCHEMA_PATH, "r") as file:
        return json.load(file)


def validate_report(payload: dict) -> None:
    try:
        jsonschema.validate(instance=payload, schema=report_schema())
    except jsonschema.ValidationError as exc:
        raise ValueError(f"Report does not match {SCHEMA_PATH.name}: {exc.message}") from exc


def to_json(payload: dict) -> str:
    """Schema-checked JSON with sorted keys and two-space indentation."""
    plain = _plain(payload)
    validate_report(plain)
    return orjson.dumps(plain, option=orjson.OPT_SORT_KEYS | orjson.OPT_INDENT_2).decode() + "\n"


def attach_output(name: str, text: str, output: OutputFormat) -> None:
    attachment_type = {
        OutputFormat.TABLE: allure.attachment_type.TEXT,
        OutputFormat.CSV: allure.attachment_type.CSV,
        OutputFormat.JSON: allure.attachment_type.JSON,
    }[output]
    logger.debug(f"{name}:\n{text}")
    allure.attach(text, name, attachment_type)
