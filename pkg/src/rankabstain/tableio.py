"""CSV and float formatting shared by reports and the CLI.

Floats are printed with 9 significant digits and a locale-independent ``.``
decimal separator so repeated runs produce byte-identical tables.
"""

from __future__ import annotations

import csv
import datetime
import io


def fmt_float(v: float) -> str:
    return format(float(v), ".9g")


def write_csv(path, header: list[str], rows: list[list[str]], reproducible: bool = False) -> None:
    """Write a CSV table; a timestamped comment line is added unless reproducible."""
    buf = io.StringIO()
    if not reproducible:
        stamp = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
        buf.write(f"# generated {stamp}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    with open(path, "w", newline="") as f:
        f.write(buf.getvalue())
