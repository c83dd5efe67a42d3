"""Table and report emission with exact numeric round-trip.

Floats are serialized with repr, the shortest string that parses back to
the identical double, so read-then-rewrite reproduces any emitted file
byte for byte.  Cells hold floats, strings, or None; None marks an
absent measurement (an empty CSV cell, a JSON null).
"""

import json

import numpy as np

from .errors import ConfigError


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    return repr(float(value))


def write_table(path, columns, rows, fmt="csv"):
    """Write rows under a fixed column order as CSV or a JSON record list."""
    if fmt == "csv":
        lines = [",".join(columns)]
        for row in rows:
            if len(row) != len(columns):
                raise ValueError(f"row width {len(row)} != {len(columns)} columns")
            lines.append(",".join(_cell(v) for v in row))
        text = "\n".join(lines) + "\n"
    elif fmt == "json":
        records = []
        for row in rows:
            if len(row) != len(columns):
                raise ValueError(f"row width {len(row)} != {len(columns)} columns")
            records.append(
                {c: (v if v is None or isinstance(v, str) else float(v))
                 for c, v in zip(columns, row)}
            )
        text = json.dumps(records, indent=2) + "\n"
    else:
        raise ValueError(f"unknown table format {fmt!r}")
    with open(path, "w") as fh:
        fh.write(text)
    return path


def _parse_cell(text):
    if text == "":
        return None
    try:
        return float(text)
    except ValueError:
        return text


def read_table(path):
    """Read a file written by write_table; returns (columns, rows).

    The format is taken from the extension (.csv or .json).
    """
    name = str(path)
    with open(path) as fh:
        text = fh.read()
    if name.endswith(".json"):
        records = json.loads(text)
        if not records:
            raise ConfigError(f"{path}: empty record list")
        columns = list(records[0].keys())
        rows = [tuple(rec[c] for c in columns) for rec in records]
        return columns, rows
    lines = text.splitlines()
    if not lines or not lines[0]:
        raise ConfigError(f"{path}: missing header line")
    columns = lines[0].split(",")
    rows = [tuple(_parse_cell(c) for c in line.split(",")) for line in lines[1:]]
    return columns, rows


def write_report(path, payload):
    """Write a JSON report object (fold summary, scaling fit)."""
    with open(path, "w") as fh:
        fh.write(json.dumps(payload, indent=2) + "\n")
    return path


def read_report(path):
    with open(path) as fh:
        return json.load(fh)


def column(columns, rows, name):
    """Extract one column as a list; absent name is a schema error."""
    try:
        idx = columns.index(name)
    except ValueError:
        raise ConfigError(f"missing column {name!r}") from None
    return [row[idx] for row in rows]


def trajectory_rows(trajectory, eta, kappa):
    """Per-sample table rows: time, transmission (linear and dB), mean
    inversion, and the instantaneous decay rate -d ln|T|^2/dt [1/s]."""
    t = trajectory.times
    trans = trajectory.intensity * (kappa / eta) ** 2
    # one-sided at the ends, central inside; deterministic for fixed samples
    rate = -np.gradient(np.log(trans), t)
    rows = []
    for i in range(t.size):
        rows.append((
            float(t[i]),
            float(trans[i]),
            float(10.0 * np.log10(trans[i])),
            float(trajectory.inversion[i]),
            float(rate[i]),
        ))
    return rows


TRAJECTORY_COLUMNS = ("time_s", "transmission", "transmission_db",
                      "mean_inversion", "decay_rate")
SUMMARY_COLUMNS = ("p_target_flux", "p_target_db", "t_steady_s",
                   "t_switch_s", "branch")
DIAGRAM_COLUMNS = ("power_flux", "power_db", "branch", "intensity",
                   "transmission_db", "stability")
POTENTIAL_COLUMNS = ("x", "V", "rhs")
