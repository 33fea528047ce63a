"""Elimination of normal- or tangential-trace constraints on a boundary subset.

The admissible nodal subspace is represented by a prolongation ``P`` with
orthonormal columns, so a constrained problem ``(P^T A P, P^T B P)`` stays
symmetric definite.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .mesh import Mesh2D, SigmaSelector

# Deflection angle between adjacent Sigma facets at or above which a node is
# treated as a corner (both constraints imposed). Below it, the two facet
# directions are merged into their normalized average.
DEFAULT_CORNER_ANGLE = math.pi / 3
SPAN_TOL = 1e-8


class ConstraintKind(str, enum.Enum):
    NORMAL_ZERO = "normal_zero"
    TANGENTIAL_ZERO = "tangential_zero"

    @classmethod
    def parse(cls, value) -> "ConstraintKind":
        if isinstance(value, cls):
            return value
        aliases = {"normal": cls.NORMAL_ZERO, "tangential": cls.TANGENTIAL_ZERO}
        try:
            return aliases.get(value) or cls(value)
        except ValueError:
            names = ", ".join(["normal", "tangential"] + [k.value for k in cls])
            raise ValueError(f"unknown constraint kind {value!r}; use one of {names}") from None


class CornerPolicy(str, enum.Enum):
    AUTO = "auto"  # merge below the corner angle, impose both above it
    PIN = "pin"  # always impose every facet direction
    MERGE = "merge"  # always merge into one averaged direction


class ConstraintError(ValueError):
    pass


@dataclass(frozen=True)
class NodeConstraint:
    node: int
    position: tuple[float, float]
    directions: tuple[tuple[float, float], ...]
    pinned: bool
    turning_angle: float  # angle between the adjacent Sigma facet normals (0 at Sigma endpoints)
    merged: bool


@dataclass(frozen=True, eq=False)
class ConstraintReduction:
    P: sp.csr_matrix  # (N, M), orthonormal columns
    kind: ConstraintKind
    nodes: tuple[NodeConstraint, ...] = field(repr=False)

    @property
    def n_full(self) -> int:
        return self.P.shape[0]

    @property
    def n_free(self) -> int:
        return self.P.shape[1]

    @property
    def pinned_nodes(self) -> list[int]:
        return [c.node for c in self.nodes if c.pinned]

    def max_merged_angle(self) -> float:
        """Largest facet deflection that was merged away (0 for straight Sigma)."""
        return max((c.turning_angle for c in self.nodes if c.merged), default=0.0)

    def lift(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if z.shape[0] != self.n_free:
            raise ConstraintError(f"reduced vector has length {z.shape[0]}, expected {self.n_free}")
        return self.P @ z

    def restrict(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape[0] != self.n_full:
            raise ConstraintError(f"full vector has length {u.shape[0]}, expected {self.n_full}")
        return self.P.T @ u

    def reduce_matrix(self, K: sp.spmatrix) -> sp.csr_matrix:
        return reduce_matrix(K, self)

    def write_report(self, path) -> None:
        """Per-node constraint report as JSON lines."""
        with Path(path).open("w", encoding="utf-8") as fh:
            for c in self.nodes:
                fh.write(
                    json.dumps(
                        {
                            "node": c.node,
                            "position": list(c.position),
                            "directions": [list(d) for d in c.directions],
                            "pinned": c.pinned,
                            "merged": c.merged,
                        }
                    )
                    + "\n"
                )


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def build_reduction(
    mesh: Mesh2D,
    selector: SigmaSelector,
    kind: ConstraintKind | str,
    corner_policy: CornerPolicy | str = CornerPolicy.AUTO,
    corner_angle: float = DEFAULT_CORNER_ANGLE,
) -> ConstraintReduction:
    """Orthonormal basis of nodal fields with zero normal (or tangential) trace on Sigma.

    Each Sigma node gets one constraint direction per adjacent Sigma facet:
    the facet normal for ``normal_zero``, the facet tangent for
    ``tangential_zero``. Two directions deflecting by less than
    ``corner_angle`` are merged into their average; otherwise both are kept
    and the node is pinned if they span the plane.
    """
    kind = ConstraintKind.parse(kind)
    corner_policy = CornerPolicy(corner_policy)
    mask = selector.mask(mesh)
    normals = mesh.facet_normals()
    dirs = normals if kind is ConstraintKind.NORMAL_ZERO else mesh.facet_tangents()

    per_node: dict[int, list[int]] = {}
    for f in np.flatnonzero(mask):
        for v in mesh.facets[f]:
            per_node.setdefault(int(v), []).append(int(f))

    records = []
    basis_cols: dict[int, list[np.ndarray]] = {}
    for node in sorted(per_node):
        fs = per_node[node]
        d = dirs[fs]
        turning = 0.0
        if len(fs) >= 2:
            cosang = np.clip(np.dot(normals[fs[0]], normals[fs[1]]), -1.0, 1.0)
            turning = float(np.arccos(cosang))
        merge = len(fs) == 2 and (
            corner_policy is CornerPolicy.MERGE
            or (corner_policy is CornerPolicy.AUTO and turning < corner_angle)
        )
        if merge:
            avg = d[0] + d[1]
            if np.linalg.norm(avg) < SPAN_TOL:
                # antiparallel facets (slit): the single line constrains both
                avg = d[0]
            d = _unit(avg)[None, :]
        svals = np.linalg.svd(d, compute_uv=False)
        pinned = len(svals) >= 2 and svals[1] >= SPAN_TOL
        if pinned:
            free = []
        else:
            # unique constrained line: the dominant right singular vector
            _, _, vt = np.linalg.svd(d)
            c = vt[0]
            free = [np.array([-c[1], c[0]])]
            d = c[None, :]
        basis_cols[node] = free
        records.append(
            NodeConstraint(
                node=node,
                position=tuple(float(x) for x in mesh.vertices[node]),
                directions=tuple(tuple(float(x) for x in row) for row in d),
                pinned=bool(pinned),
                turning_angle=turning,
                merged=bool(merge),
            )
        )

    rows, cols, vals = [], [], []
    col = 0
    for node in range(mesh.n_vertices):
        if node in basis_cols:
            for vec in basis_cols[node]:
                rows += [2 * node, 2 * node + 1]
                cols += [col, col]
                vals += [float(vec[0]), float(vec[1])]
                col += 1
        else:
            rows += [2 * node, 2 * node + 1]
            cols += [col, col + 1]
            vals += [1.0, 1.0]
            col += 2
    P = sp.csr_matrix((vals, (rows, cols)), shape=(mesh.n_dofs, col))
    P.eliminate_zeros()
    return ConstraintReduction(P=P, kind=kind, nodes=tuple(records))


def full_space(mesh: Mesh2D) -> ConstraintReduction:
    """Identity reduction (no constraints)."""
    n = mesh.n_dofs
    return ConstraintReduction(P=sp.identity(n, format="csr"), kind=ConstraintKind.NORMAL_ZERO, nodes=())


def reduce_matrix(K: sp.spmatrix, red: ConstraintReduction) -> sp.csr_matrix:
    """Galerkin restriction ``P^T K P``, symmetrized exactly."""
    if K.shape != (red.n_full, red.n_full):
        raise ConstraintError(f"matrix shape {K.shape} does not match reduction ({red.n_full} DOFs)")
    R = (red.P.T @ sp.csr_matrix(K) @ red.P).tocsr()
    upper = sp.triu(R, format="csr")
    return (upper + sp.triu(R, k=1, format="csr").T).tocsr()


def trace_violation(mesh: Mesh2D, selector: SigmaSelector, kind: ConstraintKind | str, u) -> np.ndarray:
    """Per-facet L2 norm of the constrained trace of the P1 field ``u`` on Sigma.

    The trace is linear along a facet, so the integral of its square is exact
    with the endpoint values.
    """
    kind = ConstraintKind.parse(kind)
    mask = selector.mask(mesh)
    dirs = mesh.facet_normals() if kind is ConstraintKind.NORMAL_ZERO else mesh.facet_tangents()
    U = np.asarray(u, dtype=float).reshape(-1, 2)
    f = mesh.facets[mask]
    a = np.einsum("fd,fd->f", U[f[:, 0]], dirs[mask])
    b = np.einsum("fd,fd->f", U[f[:, 1]], dirs[mask])
    length = mesh.facet_lengths()[mask]
    return np.sqrt(length * (a * a + a * b + b * b) / 3.0)
