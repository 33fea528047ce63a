"""Discrete Korn constants on constrained subspaces.

``theta_min = min ||eps(u)||^2 / ||u||_1^2`` over admissible P1 fields, so
``C_h = theta_min^(-1/2)`` is the smallest constant with
``||u||_1 <= C_h ||eps(u)||`` on the discrete space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sl
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import assemble_gradient_gram, assemble_mass, assemble_strain_gram
from .constraints import DEFAULT_CORNER_ANGLE, ConstraintError, ConstraintKind, CornerPolicy, build_reduction
from .eigensolver import DEFAULT_MAX_DENSE
from .material import MaterialParams
from .mesh import Mesh2D, SigmaSelector, sigma_measure
from .rigid_motions import kernel_dimension

KORN_ZERO = 1e-12


@dataclass
class KornEstimate:
    theta_min: float
    korn_constant: float  # inf when theta_min <= KORN_ZERO
    kind: ConstraintKind
    h: float
    mode: np.ndarray  # full-space minimizer, unit H1 norm
    thetas: np.ndarray  # the few smallest values
    rayleigh_defect: float

    def to_dict(self) -> dict:
        return {
            "theta_min": self.theta_min,
            "korn_constant": self.korn_constant if np.isfinite(self.korn_constant) else None,
            "kind": self.kind.value,
            "h": self.h,
            "thetas": self.thetas.tolist(),
            "rayleigh_defect": self.rayleigh_defect,
        }


def korn_pencil(Keps: sp.spmatrix, M1: sp.spmatrix, n_values: int = 4, max_dense: int = DEFAULT_MAX_DENSE):
    """Smallest eigenpairs of ``Keps z = theta M1 z`` (both already reduced)."""
    n = Keps.shape[0]
    k = min(n_values, n)
    if n <= max_dense:
        w, Z = sl.eigh(Keps.toarray(), M1.toarray(), subset_by_index=[0, k - 1], driver="gvx")
    else:
        delta = 1e-14 * M1.diagonal().sum() / n
        v0 = np.random.default_rng(0).standard_normal(n)
        w, Z = spla.eigsh(Keps.tocsc(), k=k, M=M1.tocsc(), sigma=-delta, which="LM", v0=v0)
        order = np.argsort(w)
        w, Z = w[order], Z[:, order]
    return w, Z


def estimate_korn(
    mesh: Mesh2D,
    selector: SigmaSelector,
    kind: ConstraintKind | str,
    corner_policy=CornerPolicy.AUTO,
    corner_angle: float = DEFAULT_CORNER_ANGLE,
    max_dense: int = DEFAULT_MAX_DENSE,
) -> KornEstimate:
    kind = ConstraintKind.parse(kind)
    sigma_measure(mesh, selector)
    red = build_reduction(mesh, selector, kind, corner_policy, corner_angle)
    if red.n_free == 0:
        raise ConstraintError("the constraint leaves no free degrees of freedom; refine the mesh")
    Keps = red.reduce_matrix(assemble_strain_gram(mesh))
    M1 = red.reduce_matrix(assemble_mass(mesh) + assemble_gradient_gram(mesh))
    w, Z = korn_pencil(Keps, M1, max_dense=max_dense)
    z = Z[:, 0]
    num = float(z @ (Keps @ z))
    den = float(z @ (M1 @ z))
    z = z / np.sqrt(den)
    theta = float(w[0])
    rq = num / den
    # theta is dimensionless and O(1) when Korn holds; near zero the
    # identity is checked in absolute terms
    defect = abs(theta - rq) / max(abs(theta), 1.0)
    C = theta ** -0.5 if theta > KORN_ZERO else float("inf")
    return KornEstimate(theta, C, kind, mesh.mesh_size(), red.lift(z), w, defect)


def theta_from_matrices(Keps, M0, G, red, scale: float = 1.0) -> float:
    """theta_min for the mesh scaled by ``scale``: the strain and gradient
    Grams are invariant in 2D, the L2 Gram scales by ``scale**2``."""
    M1 = red.reduce_matrix(scale * scale * M0 + G)
    w, _ = korn_pencil(red.reduce_matrix(Keps), M1, n_values=1)
    return float(w[0])


@dataclass
class KornCrossCheck:
    consistent: bool
    kernel_dim: int
    theta_min: float
    threshold: float

    def to_dict(self) -> dict:
        return {
            "consistent": self.consistent,
            "kernel_dim": self.kernel_dim,
            "theta_min": self.theta_min,
            "threshold": self.threshold,
        }


def korn_zero_threshold(mesh: Mesh2D, selector: SigmaSelector, kind, corner_angle: float = DEFAULT_CORNER_ANGLE, c_geo: float = 1.0) -> float:
    """1e-12 on straight Sigma; on polygonalized curves also ``c_geo h^2 / |Omega|``
    (theta is dimensionless up to the L2 length scale)."""
    red = build_reduction(mesh, selector, kind, corner_angle=corner_angle)
    eps = KORN_ZERO
    if red.max_merged_angle() > 0:
        h = mesh.mesh_size()
        eps = max(eps, c_geo * h * h / float(mesh.signed_areas().sum()))
    return eps


def korn_cross_check(
    mesh: Mesh2D,
    selector: SigmaSelector,
    kind: ConstraintKind | str,
    corner_angle: float = DEFAULT_CORNER_ANGLE,
    estimate: KornEstimate | None = None,
) -> KornCrossCheck:
    """Korn fails on the discrete space exactly when a rigid motion is admissible."""
    kind = ConstraintKind.parse(kind)
    kdim = kernel_dimension(mesh, selector, kind, corner_angle).dim
    est = estimate or estimate_korn(mesh, selector, kind, corner_angle=corner_angle)
    thr = korn_zero_threshold(mesh, selector, kind, corner_angle)
    ok = (kdim == 0) == (est.theta_min > thr)
    return KornCrossCheck(bool(ok), kdim, est.theta_min, thr)


def unconstrained_rigid_count(mesh: Mesh2D, params: MaterialParams, rel_tol: float = 1e-10) -> tuple[int, float]:
    """Number of eigenvalues of the unconstrained stiffness below ``rel_tol ||A||``."""
    from .assembly import assemble_stiffness

    A = assemble_stiffness(mesh, params).toarray()
    w = np.linalg.eigvalsh(A)
    norm = float(np.max(np.abs(w)))
    return int(np.sum(w < rel_tol * norm)), norm
