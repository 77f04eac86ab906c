"""Deterministic CSV / JSON output and harmonic table files."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .cones import contains, parse_cone
from .errors import InvalidInputError
from .harmonic import HarmonicTable, _window
from .increments import integer_support, parse_steps


def fmt(v) -> str:
    """Shortest round-trip text for a number; integers stay integral."""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    f = float(v)
    if f == int(f) and abs(f) < 2**53:
        return str(int(f))
    return repr(f)


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else repr(f)
    return obj


def dumps(obj) -> str:
    return json.dumps(_plain(obj), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dumps(obj), encoding="utf-8", newline="\n")


def write_csv(path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else fmt(v) for v in row])


def read_csv(path):
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InvalidInputError(f"{path} is empty")
    return rows[0], rows[1:]


def path_rows(positions, times, exits=None):
    """Rows replica,k,coords...,exited for recorded positions (count, len(times), d)."""
    count = positions.shape[0]
    for i in range(count):
        ex = 0 if exits is None else int(exits[i])
        for j, k in enumerate(times):
            exited = 1 if ex and k >= ex else 0
            yield [i, int(k), *positions[i, j].tolist(), exited]


def write_paths(path, positions, times, exits=None) -> None:
    d = positions.shape[2]
    write_csv(path, ["replica", "k", *[f"coord_{c + 1}" for c in range(d)], "exited"],
              path_rows(positions, times, exits))


def write_table(path, table: HarmonicTable) -> None:
    """CSV coord_1..coord_d,value over the cone points of the box, plus a JSON sidecar."""
    pts, vals = table.rows()
    d = table.cone.dimension
    write_csv(path, [*[f"coord_{c + 1}" for c in range(d)], "value"],
              ([*map(int, p), v] for p, v in zip(pts, vals)))
    write_json(sidecar_path(path), table.sidecar())


def sidecar_path(path) -> Path:
    p = Path(path)
    return p.with_name(p.name + ".json")


def read_table(path) -> HarmonicTable:
    """Load a table written by write_table."""
    side = json.loads(sidecar_path(path).read_text(encoding="utf-8"))
    cone = parse_cone(side["cone"])
    dist = parse_steps(side["steps"], cone.dimension)
    atoms, _ = integer_support(dist)
    R = float(side["window_radius"])
    box, rho = _window(cone, atoms, R)
    if [int(v) for v in box.lo] != side["box_lo"] or [int(v) for v in box.shape] != side["box_shape"]:
        raise InvalidInputError("table sidecar does not match its window")
    header, rows = read_csv(path)
    if len(header) != cone.dimension + 1:
        raise InvalidInputError("table columns do not match the cone dimension")
    values = np.zeros(box.shape)
    for row in rows:
        z = np.array([int(v) for v in row[:-1]])
        values[box.index(z)] = float(row[-1])
    pts = box.points().astype(float)
    inside = np.asarray(contains(cone, pts)).reshape(-1)
    interior = (inside & ((pts**2).sum(axis=1) <= R * R)).reshape(box.shape)
    return HarmonicTable(
        cone=cone, dist=dist, window_radius=R, box=box, values=values, interior=interior,
        residual=float(side["residual"]), relative_residual=float(side["relative_residual"]), tol=float(side["tol"]),
        sweeps=int(side["sweeps"]), method=side["method"], anchor_scale=float(side.get("anchor_scale", 1.0)),
    )
