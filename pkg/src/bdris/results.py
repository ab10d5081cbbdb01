"""Result tables and plain-text dumps (CSV plus JSON sidecar)."""

from __future__ import annotations

import csv
import hashlib
import json
import os
from dataclasses import dataclass, field

import numpy as np


def _cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))  # shortest round-tripping form
    return str(value)


def _parse_cell(text: str):
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    if text in ("true", "false"):
        return text == "true"
    return text


@dataclass
class ResultTable:
    """One row per axis point; ``se_*`` columns carry Monte-Carlo standard errors."""

    columns: list[str]
    rows: list[list] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def add_row(self, **values):
        extra = set(values) - set(self.columns)
        if extra:
            raise KeyError(f"unknown columns {sorted(extra)}")
        self.rows.append([values.get(c, "") for c in self.columns])

    def column(self, name: str) -> np.ndarray:
        k = self.columns.index(name)
        return np.array([r[k] for r in self.rows])

    def __len__(self):
        return len(self.rows)

    def to_csv_text(self) -> str:
        lines = [",".join(self.columns)]
        lines += [",".join(_cell(v) for v in row) for row in self.rows]
        return "\n".join(lines) + "\n"

    def content_hash(self) -> str:
        return hashlib.sha256(self.to_csv_text().encode()).hexdigest()

    def write(self, path: str | os.PathLike) -> tuple[str, str]:
        """Write ``path`` (CSV) and ``path + '.json'``; returns both paths."""
        path = os.fspath(path)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv_text())
        meta = dict(self.metadata)
        meta["content_sha256"] = self.content_hash()
        sidecar = path + ".json"
        with open(sidecar, "w", encoding="utf-8") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True, default=str)
            fh.write("\n")
        return path, sidecar

    @classmethod
    def read(cls, path: str | os.PathLike) -> "ResultTable":
        path = os.fspath(path)
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            columns = next(reader)
            rows = [[_parse_cell(v) for v in row] for row in reader]
        meta = {}
        if os.path.exists(path + ".json"):
            with open(path + ".json", encoding="utf-8") as fh:
                meta = json.load(fh)
        return cls(columns, rows, meta)


def write_pattern_grid(path, azimuth, elevation, directivity_db) -> str:
    """``azimuth_deg, elevation_deg, directivity_dbi`` rows, azimuth-major."""
    az, el = np.meshgrid(np.degrees(azimuth), np.degrees(elevation), indexing="ij")
    data = np.column_stack([az.ravel(), el.ravel(), np.asarray(directivity_db).ravel()])
    np.savetxt(path, data, delimiter=",", header="azimuth_deg,elevation_deg,directivity_dbi",
               comments="", fmt="%.17g")
    return os.fspath(path)


def read_pattern_grid(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1], data[:, 2]


def write_channel_dump(path, g, h) -> str:
    """One row per cell: ``index, Re(g), Im(g), Re(h), Im(h)``."""
    g = np.asarray(g)
    h = np.asarray(h)
    data = np.column_stack([np.arange(g.size), g.real, g.imag, h.real, h.imag])
    np.savetxt(path, data, delimiter=",", header="index,re_g,im_g,re_h,im_h",
               comments="", fmt=["%d"] + ["%.17g"] * 4)
    return os.fspath(path)


def write_matrix_dump(path, matrix) -> str:
    """Non-zero entries as ``row, col, re, im``."""
    matrix = np.asarray(matrix)
    r, c = np.nonzero(matrix)
    v = matrix[r, c]
    np.savetxt(path, np.column_stack([r, c, v.real, v.imag]), delimiter=",",
               header="row,col,re,im", comments="", fmt=["%d", "%d", "%.17g", "%.17g"])
    return os.fspath(path)


def read_matrix_dump(path, shape) -> np.ndarray:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    out = np.zeros(shape, dtype=complex)
    if data.size:
        out[data[:, 0].astype(int), data[:, 1].astype(int)] = data[:, 2] + 1j * data[:, 3]
    return out


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()

