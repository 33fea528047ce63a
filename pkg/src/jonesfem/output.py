"""Report and field writers: JSON reports, legacy ASCII VTK, CSV tables."""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import json
from pathlib import Path

import numpy as np

from . import __version__
from .mesh import Mesh2D


OUTPUT_KEYS = frozenset({"output", "vtk", "csv"})


def config_hash(config: dict) -> str:
    """SHA-256 of the canonical JSON form of ``config``, ignoring output destinations."""
    config = {k: v for k, v in config.items() if k not in OUTPUT_KEYS}
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=_jsonable)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, (set, frozenset)):
        return sorted(obj)
    if isinstance(obj, Path):
        return str(obj)
    if hasattr(obj, "value"):  # enums
        return obj.value
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _finite(obj):
    """Replace non-finite floats by None (JSON has no inf/nan)."""
    if isinstance(obj, float):
        return obj if np.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    return obj


def make_report(command: str, config: dict, payload: dict, timestamp: str | None = None) -> dict:
    if timestamp is None:
        timestamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    return {
        "command": command,
        "version": __version__,
        "config_hash": config_hash(config),
        "config": config,
        "timestamp": timestamp,
        "result": payload,
    }


def write_json(path, report: dict) -> None:
    text = json.dumps(_finite(json.loads(json.dumps(report, default=_jsonable))), indent=2, sort_keys=True)
    Path(path).write_text(text + "\n", encoding="utf-8")


def write_vtk(path, mesh: Mesh2D, fields: dict[str, np.ndarray] | None = None, title: str = "jonesfem") -> None:
    """Legacy ASCII unstructured grid; nodal vector fields given as length-2V arrays."""
    fields = fields or {}
    V, T = mesh.n_vertices, mesh.n_triangles
    lines = ["# vtk DataFile Version 3.0", title[:255], "ASCII", "DATASET UNSTRUCTURED_GRID"]
    lines.append(f"POINTS {V} double")
    lines += [f"{x!r} {y!r} 0.0" for x, y in mesh.vertices.tolist()]
    lines.append(f"CELLS {T} {4 * T}")
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles.tolist()]
    lines.append(f"CELL_TYPES {T}")
    lines += ["5"] * T
    if fields:
        lines.append(f"POINT_DATA {V}")
        for name, vals in fields.items():
            U = np.asarray(vals, dtype=float).reshape(V, 2)
            lines.append(f"VECTORS {name} double")
            lines += [f"{ux!r} {uy!r} 0.0" for ux, uy in U.tolist()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def read_vtk_points(path) -> tuple[np.ndarray, np.ndarray]:
    """Points and triangle connectivity of a file written by :func:`write_vtk`."""
    toks = Path(path).read_text(encoding="ascii").split("\n")
    i = next(k for k, t in enumerate(toks) if t.startswith("POINTS"))
    n = int(toks[i].split()[1])
    pts = np.array([[float(v) for v in toks[i + 1 + j].split()[:2]] for j in range(n)])
    i = next(k for k, t in enumerate(toks) if t.startswith("CELLS"))
    m = int(toks[i].split()[1])
    tri = np.array([[int(v) for v in toks[i + 1 + j].split()[1:]] for j in range(m)])
    return pts, tri


def write_eigen_csv(path, eigenvalues) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "omega2"])
        for i, v in enumerate(np.asarray(eigenvalues, dtype=float)):
            w.writerow([i, repr(float(v))])
