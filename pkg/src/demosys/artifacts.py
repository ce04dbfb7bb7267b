"""CSV / JSON artifacts with an embedded config echo.

CSV layout: ``# config: {json}`` on the first line, one header row, then
data rows.  Floats use ``repr`` (shortest round-trip form) so re-parsing
returns bit-identical values.  JSON mirrors the same content; floats are
written with 17 significant digits.
"""

from __future__ import annotations

import csv
import io
import json
import math
from typing import Any, Mapping, Sequence

CONFIG_PREFIX = "# config: "


def _cell(v: Any) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return repr(v)
    return str(v)


def render_csv(columns: Sequence[str], rows: Sequence[Mapping[str, Any]],
               config: Mapping[str, Any]) -> str:
    buf = io.StringIO()
    buf.write(CONFIG_PREFIX + json.dumps(config, sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(row[c]) for c in columns])
    return buf.getvalue()


def _json_value(v: Any) -> str:
    if isinstance(v, bool) or v is None:
        return json.dumps(v)
    if isinstance(v, float):
        if not math.isfinite(v):
            return json.dumps(str(v))
        text = format(v, ".17g")
        return text if any(ch in text for ch in ".en") else text + ".0"
    if isinstance(v, (int, str)):
        return json.dumps(v)
    if isinstance(v, Mapping):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_json_value(x)}" for k, x in v.items()) + "}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_json_value(x) for x in v) + "]"
    return json.dumps(str(v))


def render_json(columns: Sequence[str], rows: Sequence[Mapping[str, Any]],
                config: Mapping[str, Any]) -> str:
    doc = {"config": dict(config), "columns": list(columns),
           "rows": [{c: row[c] for c in columns} for row in rows]}
    return _json_value(doc) + "\n"


def render(fmt: str, columns, rows, config) -> str:
    if fmt == "csv":
        return render_csv(columns, rows, config)
    if fmt == "json":
        return render_json(columns, rows, config)
    raise ValueError(f"unknown format {fmt!r}")


def _parse(text: str):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def read_csv(text: str) -> tuple[dict, list[str], list[dict]]:
    """Inverse of :func:`render_csv`: (config, columns, typed rows)."""
    lines = text.splitlines()
    if not lines or not lines[0].startswith(CONFIG_PREFIX):
        raise ValueError("missing config echo line")
    config = json.loads(lines[0][len(CONFIG_PREFIX):])
    reader = csv.reader(lines[1:])
    columns = next(reader)
    rows = [{c: _parse(v) for c, v in zip(columns, r)} for r in reader]
    return config, columns, rows
