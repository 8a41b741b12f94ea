"""Deterministic report writers shared by the CLI commands.

CSV cells carry 17 significant digits so every float round-trips exactly;
byte-identical reruns are part of the output contract, hence the pinned
line terminator and the explicit non-finite spellings.
"""

from __future__ import annotations

import csv
import json

FLOAT_FORMAT = "%.17g"


def format_cell(value) -> str:
    # bool checked before float/int: it is an int subclass
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return FLOAT_FORMAT % value
    return str(value)


def render_csv(fieldnames, rows) -> str:
    """Header plus one line per row dict, fields in the given order."""
    if not fieldnames:
        raise ValueError("a report needs at least one column")
    out = []
    for row in rows:
        out.append([format_cell(row[name]) for name in fieldnames])
    lines = [",".join(fieldnames)]
    lines.extend(",".join(cells) for cells in out)
    return "\n".join(lines) + "\n"


def write_csv(path, fieldnames, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(render_csv(fieldnames, rows))


def _jsonable(value):
    if isinstance(value, float):
        # keep the document standard JSON: non-finite floats as strings
        if value != value or value in (float("inf"), float("-inf")):
            return FLOAT_FORMAT % value
        return value
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def render_json(payload) -> str:
    return json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n"


def write_json(path, payload) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(render_json(payload))


def read_csv(path) -> list[dict]:
    """Rows back as dicts of floats where cells parse as numbers."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = []
        for raw in reader:
            row = {}
            for key, cell in raw.items():
                try:
                    row[key] = float(cell)
                except (TypeError, ValueError):
                    row[key] = cell
            rows.append(row)
    return rows
