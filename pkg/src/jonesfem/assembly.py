"""Continuous P1 vector elements: stiffness, mass and H1 Gram matrices.

DOF ``2*i`` is the x-component at vertex ``i`` and ``2*i + 1`` the y-component.
All integrals are exact on affine triangles.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .material import MaterialParams, validate
from .mesh import Mesh2D

_P1_MASS = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0


class AssemblyError(ValueError):
    pass


def element_gradients(mesh: Mesh2D):
    """Barycentric gradients (T, 3, 2) and triangle areas (T,)."""
    p = mesh.vertices[mesh.triangles]
    x, y = p[:, :, 0], p[:, :, 1]
    area = 0.5 * ((x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0]))
    bad = np.flatnonzero(~(area > 0))
    if bad.size:
        raise AssemblyError(f"degenerate element {int(bad[0])} (area {area[bad[0]]:.3e})")
    # grad(lambda_i) = (y_j - y_k, x_k - x_j) / (2 area), (i, j, k) cyclic
    j, k = [1, 2, 0], [2, 0, 1]
    g = np.empty((len(area), 3, 2))
    g[:, :, 0] = (y[:, j] - y[:, k]) / (2 * area[:, None])
    g[:, :, 1] = (x[:, k] - x[:, j]) / (2 * area[:, None])
    return g, area


def element_dofs(mesh: Mesh2D) -> np.ndarray:
    t = mesh.triangles
    d = np.empty((len(t), 6), dtype=np.int64)
    d[:, 0::2] = 2 * t
    d[:, 1::2] = 2 * t + 1
    return d


def strain(mesh: Mesh2D, element: int, nodal_values) -> np.ndarray:
    """Constant strain tensor of the P1 field on one element.

    ``nodal_values`` is either a full DOF vector or a (3, 2) array of the
    element's vertex values.
    """
    u = np.asarray(nodal_values, dtype=float)
    tri = mesh.triangles[element]
    p = mesh.vertices[tri]
    area = 0.5 * ((p[1, 0] - p[0, 0]) * (p[2, 1] - p[0, 1]) - (p[2, 0] - p[0, 0]) * (p[1, 1] - p[0, 1]))
    if not area > 0:
        raise AssemblyError(f"degenerate element {element}")
    if u.shape != (3, 2):
        u = u.reshape(-1, 2)[tri]
    j, k = [1, 2, 0], [2, 0, 1]
    grad_l = np.column_stack([p[j, 1] - p[k, 1], p[k, 0] - p[j, 0]]) / (2 * area)
    grad_u = u.T @ grad_l  # grad_u[a, b] = d u_a / d x_b
    return 0.5 * (grad_u + grad_u.T)


def stress(eps, params: MaterialParams) -> np.ndarray:
    eps = np.asarray(eps, dtype=float)
    return 2.0 * params.mu * eps + params.lam * np.trace(eps) * np.eye(2)


def _strain_operator(g: np.ndarray) -> np.ndarray:
    """Voigt strain-displacement operator (T, 3, 6) with rows (e11, e22, 2 e12)."""
    Bm = np.zeros((len(g), 3, 6))
    Bm[:, 0, 0::2] = g[:, :, 0]
    Bm[:, 1, 1::2] = g[:, :, 1]
    Bm[:, 2, 0::2] = g[:, :, 1]
    Bm[:, 2, 1::2] = g[:, :, 0]
    return Bm


def _assemble(mesh: Mesh2D, local: np.ndarray) -> sp.csr_matrix:
    dofs = element_dofs(mesh)
    rows = np.repeat(dofs, 6, axis=1).ravel()
    cols = np.tile(dofs, (1, 6)).ravel()
    n = mesh.n_dofs
    K = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    # mirror the upper triangle so symmetry is exact regardless of summation order
    upper = sp.triu(K, format="csr")
    return (upper + sp.triu(K, k=1, format="csr").T).tocsr()


def local_stiffness(mesh: Mesh2D, params: MaterialParams) -> np.ndarray:
    g, area = element_gradients(mesh)
    Bm = _strain_operator(g)
    mu, lam = float(params.mu), float(params.lam)
    D = np.array([[lam + 2 * mu, lam, 0.0], [lam, lam + 2 * mu, 0.0], [0.0, 0.0, mu]])
    return area[:, None, None] * np.einsum("tai,ab,tbj->tij", Bm, D, Bm)


def local_mass(mesh: Mesh2D, rho: np.ndarray) -> np.ndarray:
    _, area = element_gradients(mesh)
    m = np.zeros((mesh.n_triangles, 6, 6))
    scal = (rho * area)[:, None, None] * _P1_MASS
    m[:, 0::2, 0::2] = scal
    m[:, 1::2, 1::2] = scal
    return m


def assemble_stiffness(mesh: Mesh2D, params: MaterialParams) -> sp.csr_matrix:
    """Matrix of a(u, v) = (sigma(u), eps(v))."""
    validate(params, mesh)
    return _assemble(mesh, local_stiffness(mesh, params))


def assemble_strain_gram(mesh: Mesh2D) -> sp.csr_matrix:
    """Matrix of (eps(u), eps(v)); the stiffness with mu = 1/2, lam = 0."""
    return _assemble(mesh, local_stiffness(mesh, MaterialParams(mu=0.5, lam=0.0)))


def assemble_mass(mesh: Mesh2D, params: MaterialParams | None = None) -> sp.csr_matrix:
    """Matrix of b(u, v) = (rho u, v). ``params=None`` means rho = 1."""
    if params is None:
        rho = np.ones(mesh.n_triangles)
    else:
        validate(params, mesh)
        rho = params.density(mesh.n_triangles)
    return _assemble(mesh, local_mass(mesh, rho))


def assemble_gradient_gram(mesh: Mesh2D) -> sp.csr_matrix:
    """Matrix of (grad u, grad v)."""
    return _assemble(mesh, _local_grad(mesh))


def assemble_h1_gram(mesh: Mesh2D) -> sp.csr_matrix:
    """Matrix of the full H1 inner product (u, v) + (grad u, grad v)."""
    return _assemble(mesh, local_mass(mesh, np.ones(mesh.n_triangles)) + _local_grad(mesh))


def _local_grad(mesh: Mesh2D) -> np.ndarray:
    g, area = element_gradients(mesh)
    scal = area[:, None, None] * np.einsum("tid,tjd->tij", g, g)
    m = np.zeros((mesh.n_triangles, 6, 6))
    m[:, 0::2, 0::2] = scal
    m[:, 1::2, 1::2] = scal
    return m


def interpolate(mesh: Mesh2D, field) -> np.ndarray:
    """Nodal interpolant of a vector field ``field(x, y) -> (ux, uy)``."""
    x, y = mesh.vertices[:, 0], mesh.vertices[:, 1]
    ux, uy = field(x, y)
    u = np.empty(mesh.n_dofs)
    u[0::2] = np.broadcast_to(ux, x.shape)
    u[1::2] = np.broadcast_to(uy, x.shape)
    return u


def max_pencil_eigenvalue_bound(mesh: Mesh2D, params: MaterialParams) -> float:
    """Upper bound on the largest eigenvalue of (A, B) from element pencils.

    The global maximum is bounded by the largest element-level generalized
    eigenvalue; restricting to a subspace only lowers it.
    """
    ka = local_stiffness(mesh, params)
    mb = local_mass(mesh, params.density(mesh.n_triangles))
    L = np.linalg.cholesky(mb)
    X = np.linalg.solve(L, ka)
    C = np.linalg.solve(L, X.transpose(0, 2, 1))
    C = 0.5 * (C + C.transpose(0, 2, 1))
    return float(np.max(np.linalg.eigvalsh(C)))


def write_coo(path, K: sp.spmatrix) -> None:
    """Coordinate-format dump, one ``i j value`` line per stored entry (0-based)."""
    c = sp.coo_matrix(K)
    order = np.lexsort((c.col, c.row))
    with Path(path).open("w", encoding="utf-8") as fh:
        for i, j, v in zip(c.row[order].tolist(), c.col[order].tolist(), c.data[order].tolist()):
            fh.write(f"{i} {j} {v!r}\n")


def read_coo(path, n: int) -> sp.csr_matrix:
    data = np.loadtxt(path, ndmin=2)
    return sp.coo_matrix((data[:, 2], (data[:, 0].astype(int), data[:, 1].astype(int))), shape=(n, n)).tocsr()
