"""Isotropic elastic parameters and density."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import Mesh2D

DIM = 2


class MaterialError(ValueError):
    pass


@dataclass(frozen=True)
class MaterialParams:
    """Lamé constants ``mu``, ``lam`` and a density that is either a positive
    constant or one positive value per triangle."""

    mu: float
    lam: float
    rho: float | np.ndarray = 1.0

    def density(self, n_triangles: int) -> np.ndarray:
        rho = np.asarray(self.rho, dtype=float)
        if rho.ndim == 0:
            return np.full(n_triangles, float(rho))
        return rho

    @property
    def rho_min(self) -> float:
        return float(np.min(self.rho))

    @property
    def rho_max(self) -> float:
        return float(np.max(self.rho))

    def coercivity_factor(self) -> float:
        """min{2 mu, n (lam + 2 mu / n)}, the lower bound of a(u,u) / ||eps(u)||^2."""
        return min(2.0 * self.mu, DIM * (self.lam + 2.0 * self.mu / DIM))


def validate(params: MaterialParams, mesh: Mesh2D | None = None) -> MaterialParams:
    mu, lam = float(params.mu), float(params.lam)
    if not np.isfinite(mu) or not np.isfinite(lam):
        raise MaterialError("mu and lambda must be finite")
    if not mu > 0:
        raise MaterialError(f"shear modulus mu must be positive, got {mu}")
    bound = lam + 2.0 * mu / DIM
    if not bound > 0:
        raise MaterialError(f"Lamé condition violated: lambda + mu = {bound:g} is not > 0")
    rho = np.asarray(params.rho, dtype=float)
    if rho.ndim == 0:
        if not (np.isfinite(rho) and rho > 0):
            raise MaterialError(f"density must be positive, got {float(rho)}")
    else:
        if rho.ndim != 1:
            raise MaterialError("per-element density must be a 1D array")
        if mesh is not None and len(rho) != mesh.n_triangles:
            raise MaterialError(f"per-element density has length {len(rho)}, mesh has {mesh.n_triangles} triangles")
        bad = np.flatnonzero(~(np.isfinite(rho) & (rho > 0)))
        if bad.size:
            raise MaterialError(f"density must be positive: element {int(bad[0])} has rho = {rho[bad[0]]}")
    return params


def halfplane_density(mesh: Mesh2D, x_split: float, left: float, right: float) -> np.ndarray:
    """Per-element density: ``left`` for centroids with x < x_split, else ``right``."""
    cx = mesh.vertices[mesh.triangles][:, :, 0].mean(axis=1)
    return np.where(cx < x_split, float(left), float(right))
