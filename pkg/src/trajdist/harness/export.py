"""CSV and JSON persistence of experiment results.

Output is byte-for-byte deterministic: rows are sorted, floats use the
shortest round-tripping representation, and no timestamps are written.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

from ..core import TrajDistError
from .disturbance import LEVELS
from .experiment import CONTROLLERS, ExperimentResult

CSV_COLUMNS = ("system", "controller", "disturbance_kind", "level", "seed", "raw_cost", "normalized_cost", "diverged")
_LEVEL_ORDER = {lv.value: i for i, lv in enumerate(LEVELS)}
_CTRL_ORDER = {k: i for i, k in enumerate(CONTROLLERS)}


class ExportError(TrajDistError, OSError):
    """Writing a result file failed."""


def _as_list(results) -> list[ExperimentResult]:
    return [results] if isinstance(results, ExperimentResult) else list(results)


def _fmt(x: float) -> str:
    return repr(float(x))


def _json_float(x: float):
    return None if math.isnan(x) else x if math.isfinite(x) else ("inf" if x > 0 else "-inf")


def csv_text(results: ExperimentResult | Sequence[ExperimentResult]) -> str:
    rows = [r for res in _as_list(results) for r in res.records]
    rows.sort(key=lambda r: (r.system, r.disturbance_kind, _LEVEL_ORDER.get(r.level, -1), r.level, r.seed,
                             _CTRL_ORDER[r.controller]))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([r.system, r.controller.value, r.disturbance_kind, r.level, r.seed, _fmt(r.raw_cost),
                    _fmt(r.normalized_cost), "true" if r.diverged else "false"])
    return buf.getvalue()


def aggregate(results: ExperimentResult | Iterable[ExperimentResult]) -> dict:
    """Nested ``kind -> system -> controller -> level -> {mean, std, n_excluded, n_diverged}``.

    Non-finite statistics are encoded as JSON-safe values (``None`` for nan).
    """
    out: dict = {}
    for res in _as_list(results):
        by_sys = out.setdefault(res.disturbance_kind, {}).setdefault(res.system, {})
        for kind, s in res.summary.items():
            by_sys.setdefault(kind.value, {})[res.level] = {
                "mean": _json_float(s.mean), "std": _json_float(s.std),
                "n_excluded": s.n_excluded, "n_diverged": s.n_diverged,
            }
    return out


def json_text(results: ExperimentResult | Sequence[ExperimentResult]) -> str:
    return json.dumps(aggregate(results), indent=2, sort_keys=True) + "\n"


def _write(path, text: str) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise ExportError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def export_results(results: ExperimentResult | Sequence[ExperimentResult], path, format: str = "csv") -> Path:
    fmt = format.lower()
    if fmt == "csv":
        return _write(path, csv_text(results))
    if fmt == "json":
        return _write(path, json_text(results))
    raise ValueError(f"unknown export format {format!r}; use 'csv' or 'json'")


def format_table(results: Sequence[ExperimentResult]) -> str:
    """Plain-text table: one row per (kind, controller), one column per level."""
    results = _as_list(results)
    lines = []
    kinds = sorted({r.disturbance_kind for r in results})
    for kind in kinds:
        cells = {(r.level, c): s for r in results if r.disturbance_kind == kind for c, s in r.summary.items()}
        levels = sorted({lv for lv, _ in cells}, key=lambda v: _LEVEL_ORDER.get(v, -1))
        system = next(r.system for r in results if r.disturbance_kind == kind)
        lines.append(f"{system} / {kind}")
        lines.append(f"{'controller':<12}" + "".join(f"{lv:>22}" for lv in levels))
        for c in CONTROLLERS:
            row = []
            for lv in levels:
                s = cells.get((lv, c))
                if s is None:
                    row.append(f"{'-':>22}")
                    continue
                extra = f" ({s.n_diverged} div)" if s.n_diverged else ""
                row.append(f"{s.mean:>9.3f} ± {s.std:<6.3f}{extra}".rjust(22))
            if any(cell.strip() != "-" for cell in row):
                lines.append(f"{c.value:<12}" + "".join(row))
        lines.append("")
    return "\n".join(lines)


__all__ = ["CSV_COLUMNS", "ExportError", "csv_text", "json_text", "aggregate", "export_results", "format_table"]
