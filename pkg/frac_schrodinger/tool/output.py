"""CSV emission shared by the CLI and the acceptance runner.

Floats are written in shortest round-trip form (repr), booleans as
true/false, with a mandatory header row, UTF-8 and LF line endings.
"""
import csv
import io
import math
from pathlib import Path
from typing import Any, Iterable, List, Sequence

import numpy as np

REPORT_HEADER = ("name", "lhs", "rhs", "constant_estimate", "passed", "N", "M",
                 "ensemble", "seed")
ML_HEADER = ("t", "re", "im", "abs", "method", "err_estimate")
MODE_HEADER = ("t", "mode", "re", "im")
PHYSICAL_HEADER = ("t", "x", "re", "im", "abs2")
TRACE_HEADER = ("iter", "increment", "ratio")
PLOT_TX_HEADER = ("t", "x", "abs2")
PLOT_NORMS_HEADER = ("t", "h_norm", "da_norm")


def format_cell(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(float(value))
    if isinstance(value, np.generic):
        return format_cell(value.item())
    return str(value)


def render_csv(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buffer = io.StringIO(newline="")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_cell(v) for v in row])
    return buffer.getvalue()


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(render_csv(header, rows))
    return path


def report_rows(reports) -> List[List[Any]]:
    """RegularityReport rows in REPORT_HEADER order."""
    return [[r.row()[key] for key in REPORT_HEADER] for r in reports]
