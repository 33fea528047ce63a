"""Rigid motions surviving a trace constraint, and axisymmetry detection.

Rigid motions in 2D are spanned by ``t1 = (1, 0)``, ``t2 = (0, 1)`` and the
rotation about the origin ``r = (-y, x)``; a rotation about ``c`` is
``r - c_perp``, so the three-dimensional basis covers every centre.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sl

from .constraints import DEFAULT_CORNER_ANGLE, ConstraintKind, build_reduction
from .mesh import Mesh2D, MeshError, SigmaSelector, sigma_measure

STRAIGHT_TOL = 1e-10
MOTION_NAMES = ("t1", "t2", "r")

_GAUSS_X = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])
_GAUSS_W = np.array([0.5, 0.5])


def rigid_motion_values(points: np.ndarray) -> np.ndarray:
    """Values of (t1, t2, r) at ``points``: array (npts, 3, 2)."""
    pts = np.asarray(points, dtype=float)
    out = np.zeros((len(pts), 3, 2))
    out[:, 0, 0] = 1.0
    out[:, 1, 1] = 1.0
    out[:, 2, 0] = -pts[:, 1]
    out[:, 2, 1] = pts[:, 0]
    return out


def rigid_motion_basis(mesh: Mesh2D) -> np.ndarray:
    """Nodal interpolants of t1, t2 and r as columns of an (N, 3) array."""
    vals = rigid_motion_values(mesh.vertices)  # (V, 3, 2)
    return vals.transpose(0, 2, 1).reshape(mesh.n_dofs, 3)


def _sigma_quadrature(mesh: Mesh2D, selector: SigmaSelector):
    mask = selector.mask(mesh)
    f = mesh.facets[mask]
    p, q = mesh.vertices[f[:, 0]], mesh.vertices[f[:, 1]]
    length = mesh.facet_lengths()[mask]
    pts = p[:, None, :] + _GAUSS_X[None, :, None] * (q - p)[:, None, :]  # (F, 2, 2)
    w = length[:, None] * _GAUSS_W[None, :]
    return pts, w, mesh.facet_normals()[mask], mesh.facet_tangents()[mask]


def trace_grams(mesh: Mesh2D, selector: SigmaSelector):
    """Gram matrices over Sigma of the normal trace, the tangential trace and
    the full trace of (t1, t2, r), each 3x3 and exact on straight facets."""
    pts, w, n, t = _sigma_quadrature(mesh, selector)
    F = len(w)
    vals = rigid_motion_values(pts.reshape(-1, 2)).reshape(F, 2, 3, 2)
    vn = np.einsum("fqkd,fd->fqk", vals, n)
    vt = np.einsum("fqkd,fd->fqk", vals, t)
    g_n = np.einsum("fq,fqj,fqk->jk", w, vn, vn)
    g_t = np.einsum("fq,fqj,fqk->jk", w, vt, vt)
    g_full = g_n + g_t
    return g_n, g_t, g_full


def kernel_tolerance(mesh: Mesh2D, selector: SigmaSelector, kind, corner_angle: float = DEFAULT_CORNER_ANGLE) -> float:
    """Relative kernel threshold: 1e-10 on straight Sigma, else the squared
    largest merged facet deflection (the polygonal rotation defect scales as
    h^2 / (12 R^2), the squared deflection as h^2 / R^2)."""
    red = build_reduction(mesh, selector, kind, corner_angle=corner_angle)
    phi = red.max_merged_angle()
    return max(STRAIGHT_TOL, phi * phi)


@dataclass
class KernelResult:
    dim: int
    basis: np.ndarray  # (3, dim) coefficients in (t1, t2, r)
    ratios: np.ndarray  # generalized eigenvalues, ascending
    tolerance: float
    gram: np.ndarray
    gram_full: np.ndarray


def kernel_dimension(
    mesh: Mesh2D,
    selector: SigmaSelector,
    kind: ConstraintKind | str,
    corner_angle: float = DEFAULT_CORNER_ANGLE,
) -> KernelResult:
    """Dimension of the rigid motions whose constrained trace vanishes on Sigma.

    Solves ``G z = theta G_full z`` where ``G`` is the Gram of the constrained
    trace and ``G_full`` that of the full trace; ``theta`` is the fraction of a
    motion's boundary energy that violates the constraint.
    """
    kind = ConstraintKind.parse(kind)
    sigma_measure(mesh, selector)
    g_n, g_t, g_full = trace_grams(mesh, selector)
    gram = g_n if kind is ConstraintKind.NORMAL_ZERO else g_t
    theta, vecs = sl.eigh(gram, g_full)
    tol = kernel_tolerance(mesh, selector, kind, corner_angle)
    keep = theta <= tol
    basis = vecs[:, keep]
    if basis.size:
        basis = basis / np.linalg.norm(basis, axis=0)
    return KernelResult(int(keep.sum()), basis, theta, tol, gram, g_full)


def constrained_trace_energy(mesh: Mesh2D, selector: SigmaSelector, kind, z) -> tuple[float, float]:
    """(integral of |constrained trace|^2, integral of |trace|^2) of the motion ``z``."""
    kind = ConstraintKind.parse(kind)
    g_n, g_t, g_full = trace_grams(mesh, selector)
    gram = g_n if kind is ConstraintKind.NORMAL_ZERO else g_t
    z = np.asarray(z, dtype=float)
    return float(z @ gram @ z), float(z @ g_full @ z)


@dataclass
class AxisymmetryResult:
    axisymmetric: bool
    center: np.ndarray | None
    residual: float  # F(c*) / (|Gamma| R^2)
    tolerance: float
    mean_radius: float
    message: str = ""


def detect_axisymmetry(mesh: Mesh2D, selector: SigmaSelector | None = None) -> AxisymmetryResult:
    """Best rotation centre for the boundary and the axisymmetry verdict.

    Minimizes ``F(c) = int |((x - c)^perp) . n|^2 ds``. With ``s`` the facet
    tangent, ``(x - c)^perp . n = x^perp . n + c . s``, so ``F`` is quadratic
    and its minimizer solves ``(int s s^T) c = -int (x^perp . n) s``.
    """
    selector = selector or SigmaSelector.all(mesh)
    pts, w, n, s = _sigma_quadrature(mesh, selector)
    xperp_n = -pts[..., 1] * n[:, None, 0] + pts[..., 0] * n[:, None, 1]  # (F, 2)
    wf = w.sum(axis=1)
    S = np.einsum("f,fi,fj->ij", wf, s, s)
    rhs = -np.einsum("fq,fq,fi->i", w, xperp_n, s)
    total = float(wf.sum())
    svals = np.linalg.svd(S, compute_uv=False)
    if svals[-1] <= 1e-12 * svals[0]:
        return AxisymmetryResult(False, None, float("inf"), 0.0, float("nan"), "center line-degenerate")
    c = np.linalg.solve(S, rhs)
    resid = xperp_n + (s @ c)[:, None]
    F = float(np.sum(w * resid * resid))
    dist = np.hypot(pts[..., 0] - c[0], pts[..., 1] - c[1])
    rbar = float(np.sum(w * dist) / total)
    rel = F / (total * rbar * rbar)
    h = float(mesh.facet_lengths()[selector.mask(mesh)].max())
    tol = max(1e-10, (h / rbar) ** 2)
    return AxisymmetryResult(bool(rel <= tol), c, rel, tol, rbar)


# -- shape characterisation -------------------------------------------------------


@dataclass
class ShapeReport:
    kind: ConstraintKind
    line_point: np.ndarray
    line_direction: np.ndarray
    line_residual: float
    is_line: bool
    circle_center: np.ndarray | None
    circle_radius: float
    circle_residual: float
    is_circle: bool
    surviving: list[str] = field(default_factory=list)
    surviving_basis: np.ndarray = field(default_factory=lambda: np.zeros((3, 0)))


def _rotation_about(c) -> np.ndarray:
    # (x - c)^perp = r - (-c2, c1) = r + c2 t1 - c1 t2
    return np.array([c[1], -c[0], 1.0])


def verify_shape_theorem(points, kind: ConstraintKind | str, tol: float = 1e-8) -> ShapeReport:
    """Classify sampled boundary points as lying on a line and/or a circle and
    list the rigid motions whose constrained trace vanishes there.

    Normal constraint: a line keeps the translation along it, a circle keeps
    the rotation about its centre. Tangential constraint: a line keeps the
    translation along its normal and rotations about points of the line; a
    circle keeps nothing.

    The points are taken to sample a single smooth arc. Piecewise curves
    need facet tangents (see :func:`kernel_dimension`): two segments on
    crossing lines, for instance, keep the rotation about the crossing under
    the tangential constraint.
    """
    kind = ConstraintKind.parse(kind)
    X = np.asarray(points, dtype=float)
    if X.ndim != 2 or X.shape[1] != 2 or len(X) < 3:
        raise MeshError("shape fit needs at least 3 planar sample points")
    centroid = X.mean(axis=0)
    Y = X - centroid
    scale = float(np.sqrt(np.mean(np.sum(Y * Y, axis=1))))
    _, sv, vt = np.linalg.svd(Y, full_matrices=False)
    direction = vt[0]
    line_res = float(np.sqrt(np.mean((Y @ vt[1]) ** 2)) / scale)
    is_line = line_res <= tol

    # algebraic circle fit: x^2 + y^2 + D x + E y + F = 0, on centred data
    M = np.column_stack([Y, np.ones(len(Y))])
    rhs = -np.sum(Y * Y, axis=1)
    coef, *_ = np.linalg.lstsq(M, rhs, rcond=None)
    cc = -0.5 * coef[:2]
    r2 = float(cc @ cc - coef[2])
    center, radius, circ_res, is_circle = None, float("inf"), float("inf"), False
    if r2 > 0 and np.sqrt(r2) < 1e6 * scale and not is_line:
        radius = float(np.sqrt(r2))
        center = cc + centroid
        circ_res = float(np.sqrt(np.mean((np.hypot(*(X - center).T) - radius) ** 2)) / radius)
        is_circle = circ_res <= tol

    names, basis = [], []
    if kind is ConstraintKind.NORMAL_ZERO:
        if is_line:
            names.append(f"translation along ({direction[0]:.6g}, {direction[1]:.6g})")
            basis.append(np.array([direction[0], direction[1], 0.0]))
        if is_circle:
            names.append(f"rotation about ({center[0]:.6g}, {center[1]:.6g})")
            basis.append(_rotation_about(center))
    elif is_line:
        normal = np.array([-direction[1], direction[0]])
        names.append(f"translation along ({normal[0]:.6g}, {normal[1]:.6g})")
        basis.append(np.array([normal[0], normal[1], 0.0]))
        names.append(f"rotation about ({centroid[0]:.6g}, {centroid[1]:.6g})")
        basis.append(_rotation_about(centroid))
    B = np.column_stack(basis) if basis else np.zeros((3, 0))
    return ShapeReport(kind, centroid, direction, line_res, is_line, center, radius, circ_res, is_circle, names, B)


def sigma_points(mesh: Mesh2D, selector: SigmaSelector) -> np.ndarray:
    nodes = np.unique(mesh.facets[selector.mask(mesh)])
    return mesh.vertices[nodes]


# -- report ----------------------------------------------------------------------


@dataclass
class RigidMotionReport:
    gram_normal: np.ndarray
    gram_tangential: np.ndarray
    gram_full: np.ndarray
    normal: KernelResult
    tangential: KernelResult
    axisymmetry: AxisymmetryResult
    sigma_length: float

    @property
    def kernel_dim_normal(self) -> int:
        return self.normal.dim

    @property
    def kernel_dim_tangential(self) -> int:
        return self.tangential.dim

    def to_dict(self) -> dict:
        ax = self.axisymmetry
        return {
            "basis": list(MOTION_NAMES),
            "sigma_length": self.sigma_length,
            "gram_normal": self.gram_normal.tolist(),
            "gram_tangential": self.gram_tangential.tolist(),
            "gram_full": self.gram_full.tolist(),
            "eigenvalues_normal": self.normal.ratios.tolist(),
            "eigenvalues_tangential": self.tangential.ratios.tolist(),
            "kernel_tolerance_normal": self.normal.tolerance,
            "kernel_tolerance_tangential": self.tangential.tolerance,
            "kernel_dim_normal": self.kernel_dim_normal,
            "kernel_dim_tangential": self.kernel_dim_tangential,
            "kernel_basis_normal": self.normal.basis.T.tolist(),
            "kernel_basis_tangential": self.tangential.basis.T.tolist(),
            "rotation_center": None if ax.center is None else ax.center.tolist(),
            "rotation_center_residual": ax.residual,
            "axisymmetric": ax.axisymmetric,
            "axisymmetry_tolerance": ax.tolerance,
            "axisymmetry_message": ax.message,
        }


def classify(mesh: Mesh2D, selector: SigmaSelector, corner_angle: float = DEFAULT_CORNER_ANGLE) -> RigidMotionReport:
    nk = kernel_dimension(mesh, selector, ConstraintKind.NORMAL_ZERO, corner_angle)
    tk = kernel_dimension(mesh, selector, ConstraintKind.TANGENTIAL_ZERO, corner_angle)
    return RigidMotionReport(
        gram_normal=nk.gram,
        gram_tangential=tk.gram,
        gram_full=nk.gram_full,
        normal=nk,
        tangential=tk,
        axisymmetry=detect_axisymmetry(mesh),
        sigma_length=sigma_measure(mesh, selector),
    )
