"""Serialization of result envelopes.

CSV writes only the table; floats use 17 significant digits so every
double round-trips. JSON mirrors the envelope with ``repr`` floats (the
shortest exact form) and ``null`` for NaN. The wall-clock duration is left
out of both so repeated runs are byte-identical.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile

from .scenarios import ResultEnvelope

FORMATS = ("csv", "json")


def _csv_cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def _json_value(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def render(envelope: ResultEnvelope, fmt: str) -> str:
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(envelope.table.columns)
        for row in envelope.table.rows:
            writer.writerow([_csv_cell(v) for v in row])
        return buf.getvalue()
    if fmt == "json":
        doc = {
            "scenario": envelope.scenario,
            "version": envelope.version,
            "config": envelope.config,
            "summary": {k: _json_value(v) for k, v in envelope.summary.items()},
            "table": {
                "columns": list(envelope.table.columns),
                "rows": [[_json_value(v) for v in row] for row in envelope.table.rows],
            },
        }
        return json.dumps(doc, indent=1, allow_nan=False) + "\n"
    raise ValueError(f"unknown format {fmt!r}; choose from {FORMATS}")


def atomic_write(path: str, text: str) -> None:
    """Write ``text`` to a temp file in the target directory, then rename over ``path``."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit(envelope: ResultEnvelope, fmt: str, path: str | None = None) -> str:
    """Render ``envelope``; write it atomically to ``path`` when given. Returns the text."""
    text = render(envelope, fmt)
    if path is not None:
        atomic_write(path, text)
    return text
