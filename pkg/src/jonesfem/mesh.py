"""Triangular meshes of planar domains with tagged boundary facets.

A :class:`Mesh2D` stores vertices, counterclockwise triangles and the oriented
boundary facets. Facets are ordered so the adjacent triangle lies to the left
of ``p -> q``; the outward normal is then ``(q - p)`` rotated by -90 degrees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

MAGIC = "mesh2d"
FORMAT_VERSION = 1


class MeshError(ValueError):
    """Invalid mesh geometry or connectivity."""


class MeshFormatError(MeshError):
    """Malformed mesh file. ``lineno`` is 1-based, ``None`` for end of file."""

    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        where = f"line {lineno}: " if lineno is not None else ""
        super().__init__(where + message)


@dataclass(frozen=True, eq=False)
class Mesh2D:
    vertices: np.ndarray  # (V, 2) float
    triangles: np.ndarray  # (T, 3) int, counterclockwise
    facets: np.ndarray  # (F, 2) int, adjacent triangle on the left
    facet_triangle: np.ndarray  # (F,) int
    facet_tags: np.ndarray  # (F,) int
    dimension: int = field(default=2, init=False)

    def __post_init__(self):
        for name in ("vertices", "triangles", "facets", "facet_triangle", "facet_tags"):
            getattr(self, name).setflags(write=False)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_facets(self) -> int:
        return len(self.facets)

    @property
    def n_dofs(self) -> int:
        return 2 * len(self.vertices)

    @property
    def tags(self) -> set[int]:
        return {int(t) for t in np.unique(self.facet_tags)}

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def facet_vectors(self) -> np.ndarray:
        return self.vertices[self.facets[:, 1]] - self.vertices[self.facets[:, 0]]

    def facet_lengths(self) -> np.ndarray:
        return np.hypot(*self.facet_vectors().T)

    def facet_normals(self) -> np.ndarray:
        d = self.facet_vectors()
        n = np.column_stack([d[:, 1], -d[:, 0]])
        return n / np.hypot(*d.T)[:, None]

    def facet_tangents(self) -> np.ndarray:
        d = self.facet_vectors()
        return d / np.hypot(*d.T)[:, None]

    def facet_midpoints(self) -> np.ndarray:
        return 0.5 * (self.vertices[self.facets[:, 0]] + self.vertices[self.facets[:, 1]])

    def edges(self) -> np.ndarray:
        """Unique undirected edges, sorted vertex pairs."""
        e = np.sort(self.triangles[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
        return np.unique(e, axis=0)

    def mesh_size(self) -> float:
        e = self.edges()
        return float(np.max(np.hypot(*(self.vertices[e[:, 1]] - self.vertices[e[:, 0]]).T)))

    def euler_characteristic(self) -> int:
        return self.n_vertices - len(self.edges()) + self.n_triangles

    def translated(self, d) -> "Mesh2D":
        return self._with_vertices(self.vertices + np.asarray(d, dtype=float))

    def scaled(self, s: float) -> "Mesh2D":
        if s <= 0:
            raise MeshError("scale factor must be positive")
        return self._with_vertices(self.vertices * float(s))

    def _with_vertices(self, v: np.ndarray) -> "Mesh2D":
        return Mesh2D(
            vertices=np.ascontiguousarray(v, dtype=float),
            triangles=self.triangles.copy(),
            facets=self.facets.copy(),
            facet_triangle=self.facet_triangle.copy(),
            facet_tags=self.facet_tags.copy(),
        )

    def equals(self, other: "Mesh2D") -> bool:
        return (
            np.array_equal(self.vertices, other.vertices)
            and np.array_equal(self.triangles, other.triangles)
            and np.array_equal(self.facets, other.facets)
            and np.array_equal(self.facet_tags, other.facet_tags)
        )


@dataclass(frozen=True)
class SigmaSelector:
    """The boundary subset carrying the trace constraint, as a set of facet tags."""

    tags: frozenset[int]

    def __init__(self, tags: Iterable[int]):
        if isinstance(tags, (int, np.integer)):
            tags = [tags]
        object.__setattr__(self, "tags", frozenset(int(t) for t in tags))

    def mask(self, mesh: Mesh2D) -> np.ndarray:
        missing = self.tags - mesh.tags
        if missing:
            raise MeshError(f"sigma tags {sorted(missing)} do not exist in mesh (available: {sorted(mesh.tags)})")
        m = np.isin(mesh.facet_tags, sorted(self.tags))
        if not m.any():
            raise MeshError("empty sigma selection: |Sigma| must be positive")
        return m

    @classmethod
    def all(cls, mesh: Mesh2D) -> "SigmaSelector":
        return cls(mesh.tags)


def sigma_measure(mesh: Mesh2D, selector: SigmaSelector) -> float:
    """Total length of the selected boundary facets."""
    length = float(mesh.facet_lengths()[selector.mask(mesh)].sum())
    if not length > 0:
        raise MeshError("selected boundary has zero length")
    return length


# -- construction ----------------------------------------------------------------


def _boundary_from_triangles(triangles: np.ndarray):
    """Oriented boundary edges (edges used by exactly one triangle)."""
    directed = triangles[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2)
    owner = np.repeat(np.arange(len(triangles)), 3)
    key = np.sort(directed, axis=1)
    _, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    inv = inv.ravel()
    if np.any(counts > 2):
        raise MeshError("non-manifold mesh: an edge is shared by more than two triangles")
    on_boundary = counts[inv] == 1
    return directed[on_boundary], owner[on_boundary]


def build_mesh(vertices, triangles, tag_fn: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> Mesh2D:
    """Mesh from vertices and triangles; boundary facets are detected and tagged.

    ``tag_fn(midpoints, normals)`` returns one integer tag per boundary facet.
    Clockwise triangles are reoriented.
    """
    v = np.ascontiguousarray(vertices, dtype=float)
    t = np.array(triangles, dtype=np.int64).reshape(-1, 3)
    p = v[t]
    area2 = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0])
    t[area2 < 0] = t[area2 < 0][:, [0, 2, 1]]
    facets, owner = _boundary_from_triangles(t)
    order = np.lexsort((facets[:, 1], facets[:, 0]))
    facets, owner = facets[order], owner[order]
    d = v[facets[:, 1]] - v[facets[:, 0]]
    normals = np.column_stack([d[:, 1], -d[:, 0]]) / np.hypot(*d.T)[:, None]
    mid = 0.5 * (v[facets[:, 0]] + v[facets[:, 1]])
    tags = np.asarray(tag_fn(mid, normals), dtype=np.int64)
    mesh = Mesh2D(v, t, facets, owner, tags)
    validate_mesh(mesh)
    return mesh


def validate_mesh(mesh: Mesh2D) -> None:
    v, t = mesh.vertices, mesh.triangles
    if v.ndim != 2 or v.shape[1] != 2:
        raise MeshError("vertices must be an array of 2D points")
    if len(t) == 0:
        raise MeshError("no elements")
    if t.min() < 0 or t.max() >= len(v):
        raise MeshError("triangle references a vertex index out of range")
    areas = mesh.signed_areas()
    bad = np.flatnonzero(~(areas > 0))
    if bad.size:
        raise MeshError(f"triangle {int(bad[0])} has non-positive signed area {areas[bad[0]]:.3e}")
    facets, owner = _boundary_from_triangles(t)
    expected = {tuple(f): int(o) for f, o in zip(facets.tolist(), owner.tolist())}
    given = {tuple(f): int(o) for f, o in zip(mesh.facets.tolist(), mesh.facet_triangle.tolist())}
    if expected != given:
        raise MeshError("boundary facets do not match the boundary edges of the triangulation")
    if len(mesh.facet_tags) != len(mesh.facets):
        raise MeshError("one tag per boundary facet required")
    if not np.all(mesh.facet_lengths() > 0):
        raise MeshError("zero-length boundary facet")


# -- generators --------------------------------------------------------------------


def generate_rectangle(a: float, b: float, nx: int, ny: int) -> Mesh2D:
    """Structured mesh of [0,a]x[0,b]; each cell is split along its (0,0)-(1,1) diagonal.

    Tags: bottom=1, right=2, top=3, left=4.
    """
    if not (a > 0 and b > 0):
        raise MeshError(f"rectangle sides must be positive, got a={a}, b={b}")
    if int(nx) != nx or int(ny) != ny or nx < 1 or ny < 1:
        raise MeshError(f"nx, ny must be integers >= 1, got nx={nx}, ny={ny}")
    nx, ny = int(nx), int(ny)
    xs = np.linspace(0.0, a, nx + 1)
    ys = np.linspace(0.0, b, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    verts = np.column_stack([X.ravel(), Y.ravel()])
    idx = np.arange((nx + 1) * (ny + 1)).reshape(ny + 1, nx + 1)
    v00 = idx[:-1, :-1].ravel()
    v10 = idx[:-1, 1:].ravel()
    v01 = idx[1:, :-1].ravel()
    v11 = idx[1:, 1:].ravel()
    tris = np.empty((2 * nx * ny, 3), dtype=np.int64)
    tris[0::2] = np.column_stack([v00, v10, v11])
    tris[1::2] = np.column_stack([v00, v11, v01])

    def tags(mid, normals):
        out = np.zeros(len(mid), dtype=np.int64)
        out[normals[:, 1] < -0.5] = 1
        out[normals[:, 0] > 0.5] = 2
        out[normals[:, 1] > 0.5] = 3
        out[normals[:, 0] < -0.5] = 4
        return out

    return build_mesh(verts, tris, tags)


def _ring(radius: float, n: int, offset: float = 0.0) -> np.ndarray:
    th = offset + 2.0 * np.pi * np.arange(n) / n
    return np.column_stack([radius * np.cos(th), radius * np.sin(th)]), th


def _zip_rings(inner: np.ndarray, th_in: np.ndarray, outer: np.ndarray, th_out: np.ndarray) -> list:
    """Triangulate the band between two closed rings of nodes (indices + angles)."""
    n1, n2 = len(inner), len(outer)
    a = np.concatenate([th_in, th_in[:1] + 2 * np.pi])
    b = np.concatenate([th_out, th_out[:1] + 2 * np.pi])
    tris = []
    i = j = 0
    while i < n1 or j < n2:
        advance_inner = j == n2 or (i < n1 and a[i + 1] <= b[j + 1])
        if advance_inner:
            tris.append((inner[i], outer[j % n2], inner[(i + 1) % n1]))
            i += 1
        else:
            tris.append((inner[i % n1], outer[j], outer[(j + 1) % n2]))
            j += 1
    return tris


def generate_disk(radius: float, n_boundary: int, n_rings: int, center=(0.0, 0.0)) -> Mesh2D:
    """Disk approximated by an inscribed ``n_boundary``-gon, meshed by concentric rings.

    Ring ``j`` has roughly ``n_boundary * j / n_rings`` nodes (at least 6); the
    outermost ring carries the boundary nodes at angles ``2*pi*k/n_boundary``.
    All boundary facets get tag 1.
    """
    if not radius > 0:
        raise MeshError(f"radius must be positive, got {radius}")
    if int(n_boundary) != n_boundary or n_boundary < 8:
        raise MeshError(f"n_boundary must be an integer >= 8, got {n_boundary}")
    if int(n_rings) != n_rings or n_rings < 1:
        raise MeshError(f"n_rings must be an integer >= 1, got {n_rings}")
    n_boundary, n_rings = int(n_boundary), int(n_rings)
    points = [np.zeros((1, 2))]
    rings = []
    start = 1
    for j in range(1, n_rings + 1):
        n = n_boundary if j == n_rings else max(6, int(round(n_boundary * j / n_rings)))
        offset = 0.0 if (n_rings - j) % 2 == 0 else np.pi / n
        pts, th = _ring(radius * j / n_rings, n, offset)
        points.append(pts)
        rings.append((np.arange(start, start + n), th))
        start += n
    tris = []
    idx0, _ = rings[0]
    n0 = len(idx0)
    tris += [(0, idx0[k], idx0[(k + 1) % n0]) for k in range(n0)]
    for (ia, ta), (ib, tb) in zip(rings[:-1], rings[1:]):
        tris += _zip_rings(ia, ta, ib, tb)
    verts = np.vstack(points) + np.asarray(center, dtype=float)
    return build_mesh(verts, tris, lambda mid, nrm: np.ones(len(mid), dtype=np.int64))


def generate_annulus(r_in: float, r_out: float, n_boundary: int, n_rings: int) -> Mesh2D:
    """Annulus centred at the origin with ``n_boundary`` nodes on every ring.

    Tags: inner circle=1, outer circle=2.
    """
    if not (0 < r_in < r_out):
        raise MeshError(f"annulus requires 0 < r_in < r_out, got r_in={r_in}, r_out={r_out}")
    if int(n_boundary) != n_boundary or n_boundary < 3:
        raise MeshError(f"n_boundary must be an integer >= 3, got {n_boundary}")
    if int(n_rings) != n_rings or n_rings < 1:
        raise MeshError(f"n_rings must be an integer >= 1, got {n_rings}")
    n_boundary, n_rings = int(n_boundary), int(n_rings)
    points, rings = [], []
    for k in range(n_rings + 1):
        r = r_in + (r_out - r_in) * k / n_rings
        pts, th = _ring(r, n_boundary, 0.0 if k % 2 == 0 else np.pi / n_boundary)
        rings.append((np.arange(len(points) * n_boundary, (len(points) + 1) * n_boundary), th))
        points.append(pts)
    tris = []
    for (ia, ta), (ib, tb) in zip(rings[:-1], rings[1:]):
        tris += _zip_rings(ia, ta, ib, tb)
    r_mid = 0.5 * (r_in + r_out)

    def tags(mid, normals):
        return np.where(np.hypot(*mid.T) < r_mid, 1, 2).astype(np.int64)

    return build_mesh(np.vstack(points), tris, tags)


# -- text format --------------------------------------------------------------------


def save_mesh(mesh: Mesh2D, path) -> None:
    lines = [f"{MAGIC} {FORMAT_VERSION}", f"vertices {mesh.n_vertices}"]
    lines += [f"{x!r} {y!r}" for x, y in mesh.vertices.tolist()]
    lines.append(f"triangles {mesh.n_triangles}")
    lines += [f"{i} {j} {k}" for i, j, k in mesh.triangles.tolist()]
    lines.append(f"boundary {mesh.n_facets}")
    lines += [f"{i} {j} {g}" for (i, j), g in zip(mesh.facets.tolist(), mesh.facet_tags.tolist())]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_mesh(path) -> Mesh2D:
    text = Path(path).read_text(encoding="utf-8")
    rows = [(n, ln.strip()) for n, ln in enumerate(text.splitlines(), start=1)]
    rows = [(n, ln) for n, ln in rows if ln and not ln.startswith("#")]
    it = iter(rows)

    def next_row():
        try:
            return next(it)
        except StopIteration:
            raise MeshFormatError("unexpected end of file") from None

    n, ln = next_row()
    head = ln.split()
    if len(head) != 2 or head[0] != MAGIC:
        raise MeshFormatError(f"expected header '{MAGIC} {FORMAT_VERSION}'", n)
    if head[1] != str(FORMAT_VERSION):
        raise MeshFormatError(f"unsupported format version {head[1]!r}", n)

    def section(name: str):
        n, ln = next_row()
        parts = ln.split()
        if len(parts) != 2 or parts[0] != name or not parts[1].isdigit():
            raise MeshFormatError(f"expected '{name} <count>'", n)
        return int(parts[1]), n

    def records(count: int, width: int, conv):
        out, where = [], []
        for _ in range(count):
            n, ln = next_row()
            parts = ln.split()
            if len(parts) != width:
                raise MeshFormatError(f"expected {width} fields, got {len(parts)}", n)
            try:
                out.append([conv(p) for p in parts])
            except ValueError:
                raise MeshFormatError(f"cannot parse {ln!r}", n) from None
            where.append(n)
        return out, where

    nv, _ = section("vertices")
    verts, _ = records(nv, 2, float)
    nt, n_tri = section("triangles")
    if nt == 0:
        raise MeshFormatError("no elements", n_tri)
    tris, tri_lines = records(nt, 3, int)
    nf, _ = section("boundary")
    bnd, bnd_lines = records(nf, 3, int)
    leftover = next(it, None)
    if leftover is not None:
        raise MeshFormatError("unexpected trailing content", leftover[0])

    for rec, ln_no in zip(tris, tri_lines):
        for i in rec:
            if not 0 <= i < nv:
                raise MeshFormatError(f"vertex index {i} out of range [0, {nv})", ln_no)
    for rec, ln_no in zip(bnd, bnd_lines):
        for i in rec[:2]:
            if not 0 <= i < nv:
                raise MeshFormatError(f"vertex index {i} out of range [0, {nv})", ln_no)

    v = np.array(verts, dtype=float).reshape(-1, 2)
    t = np.array(tris, dtype=np.int64).reshape(-1, 3)
    try:
        directed, owner = _boundary_from_triangles(t)
    except MeshError as exc:
        raise MeshFormatError(str(exc), tri_lines[0]) from None
    orient = {tuple(sorted(f)): (tuple(f), int(o)) for f, o in zip(directed.tolist(), owner.tolist())}
    facets, owners, tags = [], [], []
    seen = set()
    for (i, j, g), ln_no in zip(bnd, bnd_lines):
        key = (min(i, j), max(i, j))
        if key not in orient:
            raise MeshFormatError(f"facet ({i}, {j}) is not a boundary edge of the triangulation", ln_no)
        if key in seen:
            raise MeshFormatError(f"duplicate boundary facet ({i}, {j})", ln_no)
        seen.add(key)
        f, o = orient[key]
        facets.append(f)
        owners.append(o)
        tags.append(g)
    if len(seen) != len(orient):
        raise MeshFormatError(f"{len(orient) - len(seen)} boundary edges carry no facet record", bnd_lines[-1] if bnd_lines else None)
    mesh = Mesh2D(v, t, np.array(facets, dtype=np.int64).reshape(-1, 2), np.array(owners, dtype=np.int64), np.array(tags, dtype=np.int64))
    try:
        validate_mesh(mesh)
    except MeshError as exc:
        raise MeshFormatError(str(exc)) from None
    return mesh


def polygon_perimeter(n: int, radius: float = 1.0) -> float:
    return 2.0 * n * radius * math.sin(math.pi / n)


SHAPES = ("rect", "disk", "annulus", "file")


def mesh_from_spec(spec: dict) -> Mesh2D:
    """Build a mesh from a geometry record such as
    ``{"shape": "rect", "a": 1, "b": 1, "nx": 16, "ny": 16}``."""
    shape = spec.get("shape")
    try:
        if shape == "rect":
            return generate_rectangle(spec.get("a", 1.0), spec.get("b", 1.0), spec["nx"], spec.get("ny", spec["nx"]))
        if shape == "disk":
            return generate_disk(spec.get("r", 1.0), spec["nb"], spec["nr"])
        if shape == "annulus":
            return generate_annulus(spec["r_in"], spec.get("r_out", 1.0), spec["nb"], spec["nr"])
        if shape == "file":
            return load_mesh(spec["path"])
    except KeyError as exc:
        raise MeshError(f"geometry {shape!r} is missing key {exc.args[0]!r}") from None
    raise MeshError(f"unknown shape {shape!r}; valid shapes: {', '.join(SHAPES)}")
