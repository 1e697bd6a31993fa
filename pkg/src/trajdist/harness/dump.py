"""Plain-text dumps of plans, samples and closed-loop runs.

Format: ``# key: value`` header lines (``system``, ``nx``, ``nu``, ``T``,
``dt`` plus optional extras), then a CSV block whose first row names the
columns ``t, x0..x{nx-1}, u0..u{nu-1}[, std0..std{nx-1}]``.  The control
columns of the final step ``T`` are empty.  Sample dumps add a leading
``sample`` column.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from ..core import FloatArray
from .export import ExportError

HEADER_KEYS = ("system", "nx", "nu", "T", "dt")


@dataclass(frozen=True)
class Dump:
    header: dict[str, str]
    columns: tuple[str, ...]
    rows: FloatArray  # nan where a cell is empty


def _columns(nx: int, nu: int, with_std: bool, sample: bool) -> list[str]:
    cols = (["sample"] if sample else []) + ["t"] + [f"x{i}" for i in range(nx)] + [f"u{i}" for i in range(nu)]
    return cols + ([f"std{i}" for i in range(nx)] if with_std else [])


def _cell(v: float) -> str:
    return "" if np.isnan(v) else repr(float(v))


def dump_text(system: str, dt: float, states, controls, std=None, extra: Mapping[str, object] | None = None,
              sample_index=None) -> str:
    """Serialize one or more trajectories.

    ``states`` is ``(T+1, nx)`` or ``(S, T+1, nx)`` with matching
    ``controls`` ``(T, nu)`` / ``(S, T, nu)``; the stacked form writes one
    block per sample with a ``sample`` column.
    """
    xs = np.asarray(states, dtype=float)
    us = np.asarray(controls, dtype=float)
    stacked = xs.ndim == 3
    if not stacked:
        xs, us = xs[None], us[None]
    S, T1, nx = xs.shape
    nu = us.shape[2]
    if us.shape[:2] != (S, T1 - 1):
        raise ValueError("controls must have one row fewer than states")
    sd = None if std is None else np.asarray(std, dtype=float)
    if sd is not None and sd.shape != (T1, nx):
        raise ValueError(f"std must have shape {(T1, nx)}")
    buf = io.StringIO()
    header = {"system": system, "nx": nx, "nu": nu, "T": T1 - 1, "dt": repr(float(dt))}
    header.update(extra or {})
    for key, val in header.items():
        buf.write(f"# {key}: {val}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(_columns(nx, nu, sd is not None, stacked))
    for s in range(S):
        for t in range(T1):
            u = us[s, t] if t < T1 - 1 else np.full(nu, np.nan)
            row = ([s if sample_index is None else sample_index[s]] if stacked else []) + [t]
            row += [_cell(v) for v in xs[s, t]] + [_cell(v) for v in u]
            if sd is not None:
                row += [_cell(v) for v in sd[t]]
            w.writerow(row)
    return buf.getvalue()


def write_dump(path, text: str) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise ExportError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def read_dump(path_or_text) -> Dump:
    text = str(path_or_text)
    if "\n" not in text:
        text = Path(text).read_text()
    header, body = {}, []
    for line in text.splitlines():
        if line.startswith("# "):
            key, _, val = line[2:].partition(": ")
            header[key] = val
        elif line:
            body.append(line)
    reader = csv.reader(body)
    columns = tuple(next(reader))
    rows = np.array([[float(c) if c else np.nan for c in r] for r in reader], dtype=float)
    return Dump(header, columns, rows.reshape(-1, len(columns)))


__all__ = ["Dump", "HEADER_KEYS", "dump_text", "write_dump", "read_dump"]
