"""Constrained generalized eigenproblems ``P^T A P z = w2 P^T B P z``.

Small problems are solved densely (the reference path); larger ones by
shift-invert Lanczos on the same pencil. When rigid motions survive the
constraint, the stiffness is shifted by the mass (``a + b``), which moves
every eigenvalue up by exactly one and makes the pencil definite.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sl
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import assemble_mass, assemble_stiffness, max_pencil_eigenvalue_bound
from .constraints import (
    DEFAULT_CORNER_ANGLE,
    ConstraintError,
    ConstraintKind,
    ConstraintReduction,
    CornerPolicy,
    build_reduction,
)
from .material import MaterialParams, validate
from .mesh import Mesh2D, SigmaSelector
from .rigid_motions import kernel_dimension

log = logging.getLogger(__name__)

DEFAULT_MAX_DENSE = 6000
CLUSTER_RTOL = 1e-6


class EigenSolveError(RuntimeError):
    pass


class SingularStiffnessError(ValueError):
    pass


@dataclass
class SolveConfig:
    kind: ConstraintKind | str = ConstraintKind.NORMAL_ZERO
    shift: str = "auto"  # auto | on | off
    k: int = 6
    tol: float = 0.0  # ARPACK tolerance, 0 = machine precision
    max_dense: int = DEFAULT_MAX_DENSE
    corner_policy: CornerPolicy | str = CornerPolicy.AUTO
    corner_angle: float = DEFAULT_CORNER_ANGLE
    c_geo: float = 1.0

    def __post_init__(self):
        self.kind = ConstraintKind.parse(self.kind)
        if self.shift not in ("auto", "on", "off"):
            raise ValueError(f"shift must be 'auto', 'on' or 'off', got {self.shift!r}")
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"k must be a positive integer, got {self.k}")
        self.k = int(self.k)


@dataclass(eq=False)
class Problem:
    """Assembled and reduced matrices for one mesh / material / constraint."""

    mesh: Mesh2D
    params: MaterialParams
    selector: SigmaSelector
    reduction: ConstraintReduction
    A: sp.csr_matrix
    B: sp.csr_matrix
    Ar: sp.csr_matrix
    Br: sp.csr_matrix

    @property
    def kind(self) -> ConstraintKind:
        return self.reduction.kind


def setup_problem(
    mesh: Mesh2D,
    params: MaterialParams,
    selector: SigmaSelector,
    kind,
    corner_policy=CornerPolicy.AUTO,
    corner_angle: float = DEFAULT_CORNER_ANGLE,
) -> Problem:
    validate(params, mesh)
    red = build_reduction(mesh, selector, kind, corner_policy, corner_angle)
    A = assemble_stiffness(mesh, params)
    B = assemble_mass(mesh, params)
    return Problem(mesh, params, selector, red, A, B, red.reduce_matrix(A), red.reduce_matrix(B))


@dataclass
class SpectralResult:
    eigenvalues: np.ndarray  # ascending w^2
    modes: np.ndarray  # (N, k) full-space nodal fields, B-orthonormal
    reduced_modes: np.ndarray  # (M, k)
    residuals: np.ndarray
    shift_used: int
    k: int
    method: str
    kernel_dim: int
    zero_threshold: float
    lambda_max: float
    orthogonality_defect: float
    rayleigh_defect: float
    clusters: list[tuple[float, int]] = field(default_factory=list)
    shifted_operator_bound: float | None = None  # rho_max / min(mu, rho_min), reported only

    @property
    def n_zero(self) -> int:
        return int(np.sum(self.eigenvalues < self.zero_threshold))

    @property
    def shifted_operator_norm(self) -> float | None:
        """Largest eigenvalue ``1 / (w2_min + 1)`` of the shifted solution operator."""
        if not self.shift_used:
            return None
        return float(1.0 / (max(self.eigenvalues[0], 0.0) + 1.0))  # w2 >= 0 exactly

    def to_dict(self) -> dict:
        return {
            "eigenvalues": self.eigenvalues.tolist(),
            "residuals": self.residuals.tolist(),
            "shift_used": self.shift_used,
            "k": self.k,
            "method": self.method,
            "kernel_dim": self.kernel_dim,
            "zero_threshold": self.zero_threshold,
            "n_zero": self.n_zero,
            "shifted_operator_norm": self.shifted_operator_norm,
            "shifted_operator_bound": self.shifted_operator_bound,
            "lambda_max_bound": self.lambda_max,
            "orthogonality_defect": self.orthogonality_defect,
            "rayleigh_defect": self.rayleigh_defect,
            "clusters": [{"value": v, "multiplicity": m} for v, m in self.clusters],
        }


def cluster_eigenvalues(values, rtol: float = CLUSTER_RTOL, atol: float = 0.0) -> list[tuple[float, int]]:
    """Group sorted values whose consecutive relative gap is at most ``rtol``."""
    out: list[list] = []
    for v in np.sort(np.asarray(values, dtype=float)):
        if out:
            last = out[-1][1][-1]
            if abs(v - last) <= rtol * max(abs(v), abs(last)) + atol:
                out[-1][1].append(v)
                continue
        out.append([v, [v]])
    return [(float(np.mean(vs)), len(vs)) for _, vs in out]


def _rayleigh_ritz(K: sp.spmatrix, M: sp.spmatrix, Z: np.ndarray):
    """Re-solve the pencil on span(Z); returns ascending values and M-orthonormal vectors."""
    Kz = np.asarray(K @ Z)
    Mz = np.asarray(M @ Z)
    Kp = Z.T @ Kz
    Mp = Z.T @ Mz
    Kp = 0.5 * (Kp + Kp.T)
    Mp = 0.5 * (Mp + Mp.T)
    w, C = sl.eigh(Kp, Mp)
    return w, Z @ C


def solve_pencil(K: sp.spmatrix, M: sp.spmatrix, k: int, max_dense: int = DEFAULT_MAX_DENSE, tol: float = 0.0, sigma: float = 0.0):
    """Smallest ``k`` eigenpairs of a symmetric definite sparse pencil.

    Dense LAPACK for dimension up to ``max_dense``, otherwise shift-invert
    Lanczos about ``sigma`` (``K - sigma M`` must be positive definite).
    """
    n = K.shape[0]
    if n <= max_dense:
        try:
            w, Z = sl.eigh(K.toarray(), M.toarray(), subset_by_index=[0, k - 1], driver="gvx")
        except np.linalg.LinAlgError as exc:
            raise EigenSolveError(f"dense generalized eigensolve failed: {exc}") from exc
        method = "dense"
    else:
        v0 = np.random.default_rng(0).standard_normal(n)
        try:
            w, Z = spla.eigsh(K.tocsc(), k=k, M=M.tocsc(), sigma=sigma, which="LM", tol=tol, v0=v0)
        except (spla.ArpackError, RuntimeError) as exc:
            raise EigenSolveError(f"shift-invert Lanczos failed: {exc}") from exc
        method = "shift-invert"
    w, Z = _rayleigh_ritz(K, M, Z)
    return w, Z, method


def zero_threshold(problem: Problem, lambda_max: float, c_geo: float = 1.0) -> float:
    """``max(1e-9 lambda_max, c_geo h^2 mu / (rho_min |Omega|^2))``; the h^2
    term only applies when Sigma is a polygonal approximation of a curve."""
    eps = 1e-9 * lambda_max
    if problem.reduction.max_merged_angle() > 0:
        mesh, params = problem.mesh, problem.params
        area = float(mesh.signed_areas().sum())
        h = mesh.mesh_size()
        eps = max(eps, c_geo * h * h * params.mu / (params.rho_min * area * area))
    return eps


def solve_eigen(
    mesh: Mesh2D,
    params: MaterialParams,
    selector: SigmaSelector,
    config: SolveConfig | None = None,
    problem: Problem | None = None,
) -> SpectralResult:
    """Smallest eigenpairs of the constrained traction-free Lamé problem."""
    config = config or SolveConfig()
    if problem is None:
        problem = setup_problem(mesh, params, selector, config.kind, config.corner_policy, config.corner_angle)
    red = problem.reduction
    kdim = kernel_dimension(mesh, selector, config.kind, config.corner_angle).dim
    shift = {"on": 1, "off": 0}.get(config.shift, 1 if kdim > 0 else 0)

    k = config.k
    if red.n_free == 0:
        raise ConstraintError("the constraint leaves no free degrees of freedom; refine the mesh")
    if k > red.n_free:
        warnings.warn(f"requested {k} eigenpairs but only {red.n_free} free DOFs; clamping", stacklevel=2)
        k = red.n_free

    K = problem.Ar + problem.Br if shift else problem.Ar
    sigma = 0.0 if shift else -1.0
    wt, Z, method = solve_pencil(K, problem.Br, k, config.max_dense, config.tol, sigma)
    w = wt - shift
    log.info("solved %d pairs (%s, shift=%d, M=%d)", k, method, shift, red.n_free)

    U = red.P @ Z
    lam_max = max_pencil_eigenvalue_bound(mesh, params)
    res = _reduced_residuals(problem.Ar, problem.Br, Z, w)
    G = Z.T @ (problem.Br @ Z)
    ortho = float(np.max(np.abs(G - np.eye(k))))
    au = np.einsum("ik,ik->k", Z, problem.Ar @ Z)
    bu = np.einsum("ik,ik->k", Z, problem.Br @ Z)
    rayleigh = float(np.max(np.abs(w - au / bu) / (np.abs(w) + shift))) if shift else float(
        np.max(np.abs(w - au / bu) / np.abs(w))
    )
    return SpectralResult(
        eigenvalues=w,
        modes=U,
        reduced_modes=Z,
        residuals=res,
        shift_used=shift,
        k=k,
        method=method,
        kernel_dim=kdim,
        zero_threshold=zero_threshold(problem, lam_max, config.c_geo),
        lambda_max=lam_max,
        orthogonality_defect=ortho,
        rayleigh_defect=rayleigh,
        clusters=cluster_eigenvalues(w),
        shifted_operator_bound=params.rho_max / min(params.mu, params.rho_min) if shift else None,
    )


def _reduced_residuals(Ar, Br, Z, w) -> np.ndarray:
    AZ = np.asarray(Ar @ Z)
    BZ = np.asarray(Br @ Z)
    R = AZ - BZ * w[None, :]
    return np.linalg.norm(R, axis=0) / np.linalg.norm(BZ, axis=0)


def residual_report(result: SpectralResult, A: sp.spmatrix, B: sp.spmatrix, reduction: ConstraintReduction | None = None) -> np.ndarray:
    """Recompute ``||A u - w2 B u|| / ||B u||`` for each pair.

    With a reduction, the equation is the Galerkin-projected one on the
    admissible subspace (full-space residuals contain constraint reactions).
    """
    U = np.asarray(result.modes)
    w = np.asarray(result.eigenvalues)
    if reduction is not None:
        return _reduced_residuals(reduction.reduce_matrix(A), reduction.reduce_matrix(B), reduction.P.T @ U, w)
    return _reduced_residuals(A, B, U, w)


class SolutionOperator:
    """Discrete source-problem solver ``f -> u`` with ``a(u, v) = b(f, v)``
    for all admissible ``v``; with ``shift`` the form ``a + b`` is used."""

    def __init__(self, problem: Problem, shift: bool = False):
        self.problem = problem
        self.shift = bool(shift)
        kdim = kernel_dimension(problem.mesh, problem.selector, problem.kind).dim
        if kdim > 0 and not self.shift:
            raise SingularStiffnessError(
                f"{kdim} rigid motion(s) satisfy the constraint, so the reduced stiffness is singular; use shift=True"
            )
        self.K = (problem.Ar + problem.Br) if self.shift else problem.Ar
        self._lu = spla.splu(self.K.tocsc())

    def __call__(self, f) -> np.ndarray:
        p = self.problem
        f = np.asarray(f, dtype=float)
        rhs = p.reduction.restrict(p.B @ f)
        z = self._lu.solve(rhs)
        z += self._lu.solve(rhs - self.K @ z)  # one refinement step
        return p.reduction.lift(z)

    def relative_residual(self, f, u) -> float:
        p = self.problem
        rhs = p.reduction.restrict(p.B @ np.asarray(f, dtype=float))
        z = p.reduction.restrict(u)
        nr = np.linalg.norm(rhs)
        return float(np.linalg.norm(self.K @ z - rhs) / nr) if nr > 0 else float(np.linalg.norm(self.K @ z))


def solve_source(mesh: Mesh2D, params: MaterialParams, selector: SigmaSelector, kind, f, shift: bool = False) -> np.ndarray:
    return SolutionOperator(setup_problem(mesh, params, selector, kind), shift=shift)(f)
