"""Sampled observables with provenance, and their CSV / JSON file forms.

CSV layout: one header row, first column ``t`` followed by any of
``Jz, J2, JpJm, Jz2, nb, nd`` (in that order), floats written with 17
significant digits so that a re-parse is bit-identical. Metadata goes to a
sidecar ``<path>.meta.json``.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = ["TimeSeries", "COLUMN_ORDER", "SolverError", "read_csv", "read_json"]

COLUMN_ORDER = ("Jz", "J2", "JpJm", "Jz2", "nb", "nd")


class SolverError(RuntimeError):
    """Integration failed or drifted outside its invariants."""


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


@dataclass
class TimeSeries:
    """Observables sampled on a strictly increasing time grid.

    ``columns`` holds the CSV-exportable observables; ``extras`` carries
    arrays that do not fit the flat schema (population vectors, density
    matrix snapshots, dense interpolants).
    """

    t: np.ndarray
    columns: dict[str, np.ndarray]
    meta: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        if self.t.ndim != 1:
            raise ValueError("t must be one-dimensional")
        if self.t.size > 1 and not np.all(np.diff(self.t) > 0):
            raise ValueError("t must be strictly increasing")
        cols = {}
        for name, values in self.columns.items():
            values = np.asarray(values, dtype=float)
            if values.shape != self.t.shape:
                raise ValueError(f"column {name!r} has shape {values.shape}, expected {self.t.shape}")
            cols[name] = values
        self.columns = cols

    def __getitem__(self, name: str) -> np.ndarray:
        if name == "t":
            return self.t
        return self.columns[name]

    def __contains__(self, name: str) -> bool:
        return name == "t" or name in self.columns

    def __len__(self) -> int:
        return self.t.size

    @property
    def N(self) -> int:
        return int(self.meta["N"])

    def ordered_names(self) -> list[str]:
        known = [c for c in COLUMN_ORDER if c in self.columns]
        return known + sorted(c for c in self.columns if c not in COLUMN_ORDER)

    def normalized(self) -> dict[str, np.ndarray]:
        """Columns in the plotting units: Jz / (N/2); J2 and JpJm / (N/2 (N/2 + 1))."""
        half = self.N / 2
        out = {}
        if "Jz" in self.columns:
            out["Jz"] = self.columns["Jz"] / half
        for name in ("J2", "JpJm"):
            if name in self.columns:
                out[name] = self.columns[name] / (half * (half + 1))
        return out

    def to_csv(self, path, write_meta: bool = True) -> Path:
        path = Path(path)
        names = self.ordered_names()
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", *names])
            data = [self.t] + [self.columns[n] for n in names]
            for row in zip(*data):
                writer.writerow([_fmt(x) for x in row])
        if write_meta:
            meta_path = path.with_name(path.name + ".meta.json")
            meta_path.write_text(json.dumps(_jsonable(self.meta), indent=2, sort_keys=True))
        return path

    def to_json(self, path) -> Path:
        path = Path(path)
        payload = {
            "t": [float(x) for x in self.t],
            "columns": {n: [float(x) for x in self.columns[n]] for n in self.ordered_names()},
            "meta": _jsonable(self.meta),
        }
        path.write_text(json.dumps(payload, indent=1))
        return path


def read_csv(path) -> TimeSeries:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(x) for x in row] for row in reader if row]
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    if header[0] != "t":
        raise ValueError(f"{path}: first column must be 't'")
    meta_path = path.with_name(path.name + ".meta.json")
    meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    return TimeSeries(data[:, 0], {name: data[:, i + 1] for i, name in enumerate(header[1:])}, meta)


def read_json(path) -> TimeSeries:
    payload = json.loads(Path(path).read_text())
    return TimeSeries(np.array(payload["t"]), {k: np.array(v) for k, v in payload["columns"].items()},
                      payload.get("meta", {}))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (str, int, float, bool)) or obj is None:
        return obj
    return str(obj)
