"""Closed-form reference eigenpairs on the rectangle ``[0, a] x [0, b]``.

Every field here is a gradient or a curl of a separable potential
``F(m pi x / a) G(l pi y / b)`` with ``F, G`` in {sin, cos}, so derivatives
of any order are exact. Finite differences are used only as an
independent cross-check.

Tangential-trace problem (Sigma = boundary), with ``k2 = m^2/a^2 + l^2/b^2``:

* shear    ``u_s = (a l cos sin, -b m sin cos)`` = ``-(ab/pi) curl(cos cos)``,
  ``w2 = mu pi^2 k2 / rho``
* pressure ``u_p = (b m cos sin, a l sin cos)`` = ``(ab/pi) grad(sin sin)``,
  ``w2 = (lam + 2 mu) pi^2 k2 / rho``

The formulas are usually quoted with ``m, l >= 1`` for the shear family and
``m, l >= 0, m + l > 0`` for the pressure family (``index_ranges="stated"``).
With those ranges ``u_p`` vanishes identically whenever ``m l = 0`` and
the shear modes ``(m, 0)``, ``(0, l)`` are missing. ``"admissible"`` swaps
the ranges and gives the true spectrum.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .material import MaterialParams, validate

SHEAR = "shear"
PRESSURE = "pressure"
_FAMILY_RANK = {SHEAR: 0, PRESSURE: 1}
MULTIPLICITY_RTOL = 1e-9

# d^n/dt^n of sin and cos, as (function, sign) per n mod 4
_DERIV = {
    "sin": [("sin", 1.0), ("cos", 1.0), ("sin", -1.0), ("cos", -1.0)],
    "cos": [("cos", 1.0), ("sin", -1.0), ("cos", -1.0), ("sin", 1.0)],
}


def _trig(name: str, k: float, t, order: int):
    fn, sign = _DERIV[name][order % 4]
    base = np.sin(k * t) if fn == "sin" else np.cos(k * t)
    return sign * k**order * base


@dataclass(frozen=True)
class AnalyticField:
    """``amplitude * grad(phi)`` or ``amplitude * curl(phi)`` with
    ``phi = F(kx x) G(ky y)``; ``curl(phi) = (d_y phi, -d_x phi)``."""

    family: str
    m: int
    l: int
    a: float
    b: float
    potential: tuple[str, str]
    operator: str  # "grad" | "curl"
    amplitude: float = 1.0

    @property
    def kx(self) -> float:
        return self.m * math.pi / self.a

    @property
    def ky(self) -> float:
        return self.l * math.pi / self.b

    def _phi(self, x, y, i: int, j: int):
        return _trig(self.potential[0], self.kx, x, i) * _trig(self.potential[1], self.ky, y, j)

    def derivative(self, x, y, dx: int = 0, dy: int = 0) -> np.ndarray:
        """``d^dx/dx^dx d^dy/dy^dy`` of the field, shape ``(2,) + shape(x)``."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.operator == "grad":
            comps = (self._phi(x, y, dx + 1, dy), self._phi(x, y, dx, dy + 1))
        else:
            comps = (self._phi(x, y, dx, dy + 1), -self._phi(x, y, dx + 1, dy))
        return self.amplitude * np.stack(comps)

    def __call__(self, x, y) -> np.ndarray:
        return self.derivative(x, y)

    def divergence(self, x, y):
        return self.derivative(x, y, 1, 0)[0] + self.derivative(x, y, 0, 1)[1]

    def stress(self, x, y, params: MaterialParams) -> np.ndarray:
        """Cauchy stress, shape ``(2, 2) + shape(x)``."""
        ux_x, uy_x = self.derivative(x, y, 1, 0)
        ux_y, uy_y = self.derivative(x, y, 0, 1)
        div = ux_x + uy_y
        shear = params.mu * (ux_y + uy_x)
        return np.array(
            [[params.lam * div + 2 * params.mu * ux_x, shear], [shear, params.lam * div + 2 * params.mu * uy_y]]
        )

    def lame(self, x, y, params: MaterialParams) -> np.ndarray:
        """``div sigma(u) = mu lap u + (lam + mu) grad div u`` with exact derivatives."""
        dxx = self.derivative(x, y, 2, 0)
        dyy = self.derivative(x, y, 0, 2)
        dxy = self.derivative(x, y, 1, 1)
        grad_div = np.stack([dxx[0] + dxy[1], dxy[0] + dyy[1]])
        return params.mu * (dxx + dyy) + (params.lam + params.mu) * grad_div

    def is_trivial(self) -> bool:
        """True when the field vanishes identically (a sine with zero wavenumber)."""
        px, py = self.potential
        if (px == "sin" and self.m == 0) or (py == "sin" and self.l == 0):
            return True
        return self.m == 0 and self.l == 0  # constant potential


@dataclass(frozen=True)
class OracleEntry:
    omega2: float
    multiplicity: int
    family: str
    m: int
    l: int

    @property
    def indices(self) -> tuple[int, int]:
        return (self.m, self.l)


@dataclass
class RectangleTangentialSpectrum:
    a: float
    b: float
    params: MaterialParams
    entries: list[OracleEntry]
    index_ranges: str

    @property
    def values(self) -> np.ndarray:
        return np.array([e.omega2 for e in self.entries])

    def to_csv(self, path) -> None:
        write_oracle_csv(path, self.entries)


def _wavenumber2(a: float, b: float, m: int, l: int) -> float:
    return (m * m) / (a * a) + (l * l) / (b * b)


def _family_speed2(params: MaterialParams, family: str) -> float:
    return (params.mu if family == SHEAR else params.lam + 2 * params.mu) / params.rho


def _mode_table(a, b, params, k, families: dict[str, str]) -> list[OracleEntry]:
    """Smallest ``k`` modes of the families; ``families`` maps family -> index rule
    ("full": m, l >= 0, m + l > 0; "positive": m, l >= 1)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    c_min = min(_family_speed2(params, f) for f in families)
    n = 2
    while True:
        rows = []
        for fam, rule in families.items():
            c = _family_speed2(params, fam)
            for m in range(n + 1):
                for l in range(n + 1):
                    if m + l == 0 or (rule == "positive" and (m == 0 or l == 0)):
                        continue
                    rows.append((c * math.pi**2 * _wavenumber2(a, b, m, l), fam, m, l))
        rows.sort(key=lambda r: (r[0], _FAMILY_RANK[r[1]], r[3], r[2]))
        # anything with an index above n is at least this large
        bound = c_min * math.pi**2 * (n + 1) ** 2 / max(a, b) ** 2
        if len(rows) >= k and rows[k - 1][0] * (1 + 2 * MULTIPLICITY_RTOL) < bound:
            break
        n *= 2
    vals = np.array([r[0] for r in rows])
    entries = []
    for w, fam, m, l in rows[:k]:
        mult = int(np.sum(np.abs(vals - w) <= MULTIPLICITY_RTOL * w))
        entries.append(OracleEntry(float(w), mult, fam, m, l))
    return entries


def rectangle_tangential_spectrum(
    a: float, b: float, params: MaterialParams, k: int, index_ranges: str = "stated"
) -> RectangleTangentialSpectrum:
    """First ``k`` eigenvalues of the tangential-trace problem with Sigma = boundary,
    ascending, ties ordered shear first then by ``(l, m)``."""
    if a <= 0 or b <= 0:
        raise ValueError("side lengths must be positive")
    validate(params)
    if index_ranges == "stated":
        families = {SHEAR: "positive", PRESSURE: "full"}
    elif index_ranges == "admissible":
        families = {SHEAR: "full", PRESSURE: "positive"}
    else:
        raise ValueError(f"index_ranges must be 'stated' or 'admissible', got {index_ranges!r}")
    return RectangleTangentialSpectrum(a, b, params, _mode_table(a, b, params, k, families), index_ranges)


def tangential_field(a: float, b: float, family: str, m: int, l: int) -> AnalyticField:
    s = a * b / math.pi
    if family == SHEAR:
        return AnalyticField(SHEAR, m, l, a, b, ("cos", "cos"), "curl", -s)
    if family == PRESSURE:
        return AnalyticField(PRESSURE, m, l, a, b, ("sin", "sin"), "grad", s)
    raise ValueError(f"unknown family {family!r}")


def evaluate_mode(entry: OracleEntry, point, a: float = 1.0, b: float = 1.0) -> np.ndarray:
    """Value of the tangential-problem eigenfunction of ``entry`` at ``point``."""
    x, y = point
    return tangential_field(a, b, entry.family, entry.m, entry.l)(x, y)


def write_oracle_csv(path, entries) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["family", "m", "l", "omega2", "multiplicity"])
        for e in entries:
            w.writerow([e.family, e.m, e.l, repr(e.omega2), e.multiplicity])


def read_oracle_csv(path) -> list[OracleEntry]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return [
            OracleEntry(float(r["omega2"]), int(r["multiplicity"]), r["family"], int(r["m"]), int(r["l"]))
            for r in csv.DictReader(fh)
        ]


# --- verification -----------------------------------------------------------

def _edges(a: float, b: float, n: int):
    """Sample points, outward normals and tangents on the four edges (corners excluded)."""
    s = (np.arange(n) + 0.5) / n
    out = []
    for pts, nrm in (
        ((s * a, np.zeros(n)), (0.0, -1.0)),
        ((np.full(n, a), s * b), (1.0, 0.0)),
        ((s * a, np.full(n, b)), (0.0, 1.0)),
        ((np.zeros(n), s * b), (-1.0, 0.0)),
    ):
        nv = np.array(nrm)
        out.append((pts[0], pts[1], nv, np.array([-nv[1], nv[0]])))
    return out


def fd_lame(fld, x, y, params: MaterialParams, h: float) -> np.ndarray:
    """Central-difference ``mu lap u + (lam + mu) grad div u`` from field values only."""
    u0 = fld(x, y)
    uxx = (fld(x + h, y) - 2 * u0 + fld(x - h, y)) / h**2
    uyy = (fld(x, y + h) - 2 * u0 + fld(x, y - h)) / h**2
    uxy = (fld(x + h, y + h) - fld(x + h, y - h) - fld(x - h, y + h) + fld(x - h, y - h)) / (4 * h * h)
    grad_div = np.stack([uxx[0] + uxy[1], uxy[0] + uyy[1]])
    return params.mu * (uxx + uyy) + (params.lam + params.mu) * grad_div


def fd_rounding_floor(params: MaterialParams, omega2: float, h: float) -> float:
    """Worst-case relative rounding error of :func:`fd_lame` (each second
    difference loses about ``4 eps / h^2`` of the field magnitude)."""
    eps = np.finfo(float).eps
    coef = 8 * params.mu + 5 * abs(params.lam + params.mu)
    return 2 * coef * eps / (h * h * params.rho * omega2)


@dataclass
class FieldCheck:
    pde_residual: float  # max |div sigma + rho w2 u| / (rho w2 max|u|), exact derivatives
    fd_residual: float  # same with central differences
    normal_trace: float  # max |u.n| / max|u| on the edges
    tangential_trace: float
    normal_traction: float  # max |n.sigma n| / (scale of sigma)
    tangential_traction: float
    u_max: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def check_field(
    fld: AnalyticField,
    omega2: float,
    params: MaterialParams,
    n_interior: int = 1000,
    n_edge: int = 25,
    seed: int = 0,
) -> FieldCheck:
    a, b = fld.a, fld.b
    rng = np.random.default_rng(seed)
    h_fd = 1e-5 * min(a, b)
    x = h_fd + (a - 2 * h_fd) * rng.random(n_interior)
    y = h_fd + (b - 2 * h_fd) * rng.random(n_interior)
    u = fld(x, y)
    umax = float(np.max(np.linalg.norm(u, axis=0)))
    scale = params.rho * omega2 * umax if umax > 0 else 1.0
    res = fld.lame(x, y, params) + params.rho * omega2 * u
    fd = fd_lame(fld, x, y, params, h_fd) + params.rho * omega2 * u

    un = ut = tn = tt = 0.0
    smax = 0.0
    for ex, ey, nv, tv in _edges(a, b, n_edge):
        ue = fld(ex, ey)
        sig = fld.stress(ex, ey, params)
        tr = np.einsum("ijp,j->ip", sig, nv)
        un = max(un, float(np.max(np.abs(nv @ ue))))
        ut = max(ut, float(np.max(np.abs(tv @ ue))))
        tn = max(tn, float(np.max(np.abs(nv @ tr))))
        tt = max(tt, float(np.max(np.abs(tv @ tr))))
        smax = max(smax, float(np.max(np.abs(sig))))
    # stress scale: (lam + 2 mu) |grad u| ~ sqrt(omega2 rho (lam + 2 mu)) |u|
    sref = max(smax, math.sqrt(max(omega2, 0.0) * params.rho * (params.lam + 2 * params.mu)) * umax, 1e-300)
    uref = umax if umax > 0 else 1.0
    return FieldCheck(
        pde_residual=float(np.max(np.linalg.norm(res, axis=0)) / scale),
        fd_residual=float(np.max(np.linalg.norm(fd, axis=0)) / scale),
        normal_trace=un / uref,
        tangential_trace=ut / uref,
        normal_traction=tn / sref,
        tangential_traction=tt / sref,
        u_max=umax,
    )


@dataclass
class JonesCandidate:
    entry: OracleEntry
    field: AnalyticField
    check: FieldCheck | None
    full_traction_free: bool = False
    reason: str = ""


@dataclass
class JonesCandidates:
    verified: list[JonesCandidate]
    rejected: list[JonesCandidate]
    conditions: str
    tolerances: dict = field(default_factory=dict)

    @property
    def entries(self) -> list[OracleEntry]:
        return [c.entry for c in self.verified]

    def report(self) -> list[dict]:
        rows = []
        for c in self.verified + self.rejected:
            rows.append(
                {
                    "family": c.entry.family,
                    "m": c.entry.m,
                    "l": c.entry.l,
                    "omega2": c.entry.omega2,
                    "verified": c in self.verified,
                    "full_traction_free": c.full_traction_free,
                    "reason": c.reason,
                    "check": c.check.to_dict() if c.check else None,
                }
            )
        return rows


def jones_rectangle_candidates(
    a: float,
    b: float,
    params: MaterialParams,
    k: int,
    conditions: str = "weak",
    pde_tol: float = 1e-8,
    trace_tol: float = 1e-12,
    traction_tol: float = 1e-6,
) -> JonesCandidates:
    """Generate-and-verify references for the normal-trace problem on the rectangle.

    Candidates swap the sine/cosine roles of the tangential modes:
    ``grad(cos cos)`` (pressure) and ``curl(sin sin)`` (shear), each over
    ``m, l >= 0, m + l > 0``. A candidate is admitted only if it is nonzero,
    satisfies the PDE with its ``omega2`` (exact and finite-difference
    derivatives; the finite-difference bound is relaxed to its rounding floor
    when that exceeds 1e-6), has ``u.n = 0`` on every edge, and satisfies the traction
    condition selected by ``conditions``:

    * ``"weak"``: zero tangential traction, the natural boundary condition of
      the variational problem on ``{v : v.n = 0}`` (what the FEM computes);
    * ``"strong"``: the full traction ``sigma(u) n`` vanishes.

    The full-traction status is recorded for every candidate either way.
    """
    if conditions not in ("weak", "strong"):
        raise ValueError("conditions must be 'weak' or 'strong'")
    validate(params)
    pool = _mode_table(a, b, params, 4 * k + 8, {SHEAR: "full", PRESSURE: "full"})
    s = a * b / math.pi
    verified: list[JonesCandidate] = []
    rejected: list[JonesCandidate] = []
    for e in pool:
        if e.family == SHEAR:
            fld = AnalyticField(SHEAR, e.m, e.l, a, b, ("sin", "sin"), "curl", s)
        else:
            fld = AnalyticField(PRESSURE, e.m, e.l, a, b, ("cos", "cos"), "grad", -s)
        if fld.is_trivial():
            rejected.append(JonesCandidate(e, fld, None, reason="field vanishes identically"))
            continue
        chk = check_field(fld, e.omega2, params)
        full = chk.normal_traction <= traction_tol and chk.tangential_traction <= traction_tol
        reasons = []
        if chk.pde_residual > pde_tol:
            reasons.append(f"PDE residual {chk.pde_residual:.2e}")
        fd_tol = max(1e-6, fd_rounding_floor(params, e.omega2, 1e-5 * min(a, b)))
        if chk.fd_residual > fd_tol:
            reasons.append(f"finite-difference residual {chk.fd_residual:.2e}")
        if chk.normal_trace > trace_tol:
            reasons.append(f"normal trace {chk.normal_trace:.2e}")
        if chk.tangential_traction > traction_tol:
            reasons.append(f"tangential traction {chk.tangential_traction:.2e}")
        if conditions == "strong" and chk.normal_traction > traction_tol:
            reasons.append(f"normal traction {chk.normal_traction:.2e}")
        cand = JonesCandidate(e, fld, chk, full, "; ".join(reasons))
        (rejected if reasons else verified).append(cand)

    # multiplicities among the verified set only, then truncate
    vals = np.array([c.entry.omega2 for c in verified])
    out = []
    for c in verified[:k]:
        mult = int(np.sum(np.abs(vals - c.entry.omega2) <= MULTIPLICITY_RTOL * c.entry.omega2))
        c.entry = OracleEntry(c.entry.omega2, mult, c.entry.family, c.entry.m, c.entry.l)
        out.append(c)
    return JonesCandidates(
        out,
        rejected,
        conditions,
        {"pde": pde_tol, "fd": 1e-6, "trace": trace_tol, "traction": traction_tol},
    )
