"""Acceptance matrix: ten end-to-end checks of the solver against oracles and invariants.

Each ``criterion_*`` method returns a :class:`CriterionResult`. Solves are
cached on the :class:`Verifier`, so the hygiene check (7) reuses the solves
of checks 1 to 3.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .assembly import assemble_stiffness, interpolate
from .eigensolver import SolutionOperator, SolveConfig, setup_problem, solve_eigen
from .korn import estimate_korn, korn_cross_check
from .material import MaterialParams, halfplane_density
from .mesh import SigmaSelector, generate_annulus, generate_disk, generate_rectangle
from .oracles import OracleEntry, read_oracle_csv, rectangle_tangential_spectrum
from .rigid_motions import kernel_dimension, rigid_motion_basis

GROUPS = {
    "spectrum": (1,),
    "disk": (2,),
    "jones": (3,),
    "kernel": (4,),
    "korn": (5,),
    "shift": (6,),
    "hygiene": (7,),
    "density": (8,),
    "source": (9,),
    "rigid": (10,),
}

NAMES = {
    1: "rectangle tangential spectrum",
    2: "disk zero mode",
    3: "non-axisymmetric positivity",
    4: "kernel-dimension table",
    5: "Korn cross-check",
    6: "shift exactness",
    7: "spectral hygiene",
    8: "variable density",
    9: "solution-operator symmetry",
    10: "rigid kernel of unconstrained stiffness",
}

SQUARE_PARAMS = MaterialParams(mu=1.0, lam=0.5, rho=1.0)
TANGENTIAL_H = (8, 16, 32, 64)
JONES_H = (16, 32, 64)
KORN_H = (8, 16, 32)
TABLE_N = 16  # square resolution for the kernel table and Korn checks
RUNTIME_LIMIT = {1: 60.0, 2: 60.0}  # seconds


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        return f"criterion {self.number:2d} [{'PASS' if self.passed else 'FAIL'}] {self.name} ({self.seconds:.1f} s)"

    def to_dict(self) -> dict:
        return {
            "criterion": self.number,
            "name": self.name,
            "passed": self.passed,
            "seconds": round(self.seconds, 3),
            "detail": self.detail,
        }


def default_fixture_dir() -> Path:
    return Path(str(resources.files("jonesfem") / "data"))


def load_kernel_table(path) -> list[dict]:
    rows = json.loads(Path(path).read_text(encoding="utf-8"))
    for r in rows:
        missing = {"geometry", "sigma", "kind", "dim"} - set(r)
        if missing:
            raise ValueError(f"kernel table row {r} lacks {sorted(missing)}")
    return rows


def _geometry(name: str):
    if name == "square":
        return generate_rectangle(1.0, 1.0, TABLE_N, TABLE_N)
    if name == "disk":
        return generate_disk(1.0, 256, 16)
    raise ValueError(f"unknown fixture geometry {name!r}")


def _sigma(mesh, spec) -> SigmaSelector:
    if spec == "all":
        return SigmaSelector(mesh.tags)
    return SigmaSelector(spec)


def order_of_convergence(hs, errors) -> float:
    """Least-squares slope of log(error) against log(h)."""
    errors = np.maximum(np.asarray(errors, dtype=float), 1e-300)
    return float(np.polyfit(np.log(hs), np.log(errors), 1)[0])


def b_correlation(B, u, v) -> float:
    uv = float(u @ (B @ v))
    return abs(uv) / math.sqrt(float(u @ (B @ u)) * float(v @ (B @ v)))


class Verifier:
    def __init__(self, fixture_dir=None, k: int = 6):
        self.fixture_dir = Path(fixture_dir) if fixture_dir is not None else default_fixture_dir()
        self.k = k
        self._solves: dict = {}
        self._meshes: dict = {}

    # -- shared solves -------------------------------------------------------

    def mesh(self, key):
        if key not in self._meshes:
            if key[0] == "square":
                self._meshes[key] = generate_rectangle(1.0, 1.0, key[1], key[1])
            else:
                self._meshes[key] = _geometry(key[0])
        return self._meshes[key]

    def solve(self, geometry: str, n: int, kind: str, params=SQUARE_PARAMS, shift="auto", k=None):
        pkey = (params.mu, params.lam, np.asarray(params.rho, dtype=float).tobytes())
        key = (geometry, n, kind, shift, k or self.k, pkey)
        if key not in self._solves:
            mesh = self.mesh((geometry, n))
            sel = SigmaSelector(mesh.tags)
            cfg = SolveConfig(kind=kind, shift=shift, k=k or self.k)
            problem = setup_problem(mesh, params, sel, cfg.kind)
            self._solves[key] = (solve_eigen(mesh, params, sel, cfg, problem=problem), problem)
        return self._solves[key]

    # -- criteria ------------------------------------------------------------

    def oracle_entries(self) -> list[OracleEntry]:
        return read_oracle_csv(self.fixture_dir / "tangential_square.csv")

    def criterion_1(self, entries: list[OracleEntry] | None = None) -> CriterionResult:
        """Tangential square spectrum vs the closed forms (1% at h=1/64, order ~2)."""
        fixture_ok = True
        if entries is None:
            entries = self.oracle_entries()
            fresh = rectangle_tangential_spectrum(1.0, 1.0, SQUARE_PARAMS, len(entries)).entries
            fixture_ok = [(e.family, e.m, e.l, e.multiplicity) for e in entries] == [
                (e.family, e.m, e.l, e.multiplicity) for e in fresh
            ] and np.allclose([e.omega2 for e in entries], [e.omega2 for e in fresh], rtol=1e-14, atol=0)
        ref = np.array([e.omega2 for e in entries[:6]])
        hs, eigs = [], []
        for n in TANGENTIAL_H:
            res, _ = self.solve("square", n, "tangential")
            hs.append(1.0 / n)
            eigs.append(res.eigenvalues[:6])
        eigs = np.array(eigs)
        rel = np.abs(eigs[-1] - ref) / ref
        orders = [order_of_convergence(hs, np.abs(eigs[:, i] - ref[i]) / ref[i]) for i in range(3)]
        ok_match = bool(np.all(rel <= 0.01))
        ok_order = all(1.7 <= p <= 2.3 for p in orders)
        return CriterionResult(
            1,
            NAMES[1],
            bool(fixture_ok and ok_match and ok_order),
            {
                "fixture_matches_oracle": bool(fixture_ok),
                "reference_over_pi2": (ref / math.pi**2).tolist(),
                "fem_over_pi2_h64": (eigs[-1] / math.pi**2).tolist(),
                "relative_error_h64": rel.tolist(),
                "orders_first_three": orders,
                "match_within_1pct": ok_match,
                "order_in_range": ok_order,
            },
        )

    def criterion_2(self) -> CriterionResult:
        res, problem = self.solve("disk", 0, "normal")
        mesh = problem.mesh
        rot = interpolate(mesh, lambda x, y: (-y, x))
        corr = b_correlation(problem.B, res.modes[:, 0], rot)
        w = res.eigenvalues
        ratio_ok = bool(w[1] > 100 * abs(w[0]))
        passed = res.n_zero == 1 and corr >= 0.999 and ratio_ok
        return CriterionResult(
            2,
            NAMES[2],
            passed,
            {
                "eigenvalues": w.tolist(),
                "zero_threshold": res.zero_threshold,
                "n_zero": res.n_zero,
                "rotation_correlation": corr,
                "second_over_first_ok": ratio_ok,
            },
        )

    def criterion_3(self) -> CriterionResult:
        smallest, nz = [], []
        for n in JONES_H:
            res, _ = self.solve("square", n, "normal")
            smallest.append(float(res.eigenvalues[0]))
            nz.append(res.n_zero)
        drift = abs(smallest[-1] - smallest[-2]) / smallest[-1]
        return CriterionResult(
            3,
            NAMES[3],
            all(z == 0 for z in nz) and drift < 0.05,
            {"n": list(JONES_H), "smallest": smallest, "n_zero": nz, "drift_finest": drift},
        )

    def criterion_4(self) -> CriterionResult:
        rows = load_kernel_table(self.fixture_dir / "kernel_table.json")
        out, ok = [], True
        for r in rows:
            mesh = self.mesh((r["geometry"], TABLE_N if r["geometry"] == "square" else 0))
            got = kernel_dimension(mesh, _sigma(mesh, r["sigma"]), r["kind"]).dim
            ok &= got == r["dim"]
            out.append({**r, "computed": got, "match": got == r["dim"]})
        return CriterionResult(4, NAMES[4], bool(ok), {"rows": out})

    def criterion_5(self) -> CriterionResult:
        rows = load_kernel_table(self.fixture_dir / "kernel_table.json")
        checks, ok = [], True
        for r in rows:
            mesh = self.mesh((r["geometry"], TABLE_N if r["geometry"] == "square" else 0))
            cc = korn_cross_check(mesh, _sigma(mesh, r["sigma"]), r["kind"])
            ok &= cc.consistent
            checks.append({"geometry": r["geometry"], "sigma": r["sigma"], "kind": r["kind"], **cc.to_dict()})
        stability = []
        for r in rows:
            if r["geometry"] != "square":
                continue
            mesh = self.mesh(("square", TABLE_N))
            if kernel_dimension(mesh, _sigma(mesh, r["sigma"]), r["kind"]).dim > 0:
                continue
            thetas = []
            for n in KORN_H:
                m = self.mesh(("square", n))
                thetas.append(estimate_korn(m, _sigma(m, r["sigma"]), r["kind"]).theta_min)
            spread = (max(thetas) - min(thetas)) / max(thetas)
            ok &= spread <= 0.2
            stability.append({"sigma": r["sigma"], "kind": r["kind"], "thetas": thetas, "spread": spread})
        return CriterionResult(5, NAMES[5], bool(ok), {"cross_checks": checks, "stability": stability})

    def criterion_6(self) -> CriterionResult:
        on, _ = self.solve("square", 16, "normal", shift="on")
        off, _ = self.solve("square", 16, "normal", shift="off")
        rel = float(np.max(np.abs(on.eigenvalues - off.eigenvalues) / np.abs(off.eigenvalues)))
        return CriterionResult(6, NAMES[6], rel <= 1e-9, {"max_relative_difference": rel})

    def criterion_7(self) -> CriterionResult:
        keys = [("square", n, "tangential") for n in TANGENTIAL_H]
        keys += [("disk", 0, "normal")] + [("square", n, "normal") for n in JONES_H]
        rows, ok = [], True
        for g, n, kind in keys:
            res, _ = self.solve(g, n, kind)
            row = {
                "case": f"{g}{'' if g == 'disk' else f' 1/{n}'} {kind}",
                "max_residual": float(np.max(res.residuals)),
                "orthogonality_defect": res.orthogonality_defect,
                "rayleigh_defect": res.rayleigh_defect,
                "min_eigenvalue_over_lambda_max": float(np.min(res.eigenvalues) / res.lambda_max),
            }
            row["passed"] = (
                row["max_residual"] <= 1e-8
                and row["orthogonality_defect"] <= 1e-8
                and row["rayleigh_defect"] <= 1e-10
                and row["min_eigenvalue_over_lambda_max"] >= -1e-9
            )
            ok &= row["passed"]
            rows.append(row)
        return CriterionResult(7, NAMES[7], bool(ok), {"solves": rows})

    def criterion_8(self, n: int = 16) -> CriterionResult:
        mesh = self.mesh(("square", n))
        rho = halfplane_density(mesh, 0.5, 1.0, 4.0)
        var = MaterialParams(1.0, 0.5, rho)
        res, problem = self.solve("square", n, "tangential", params=var)
        light, _ = self.solve("square", n, "tangential", params=MaterialParams(1.0, 0.5, 1.0))
        heavy, _ = self.solve("square", n, "tangential", params=MaterialParams(1.0, 0.5, 4.0))
        G = res.modes.T @ (problem.B @ res.modes)
        off = float(np.max(np.abs(G - np.diag(np.diag(G)))))
        slack = 1e-12 * np.abs(light.eigenvalues)
        between = bool(
            np.all(heavy.eigenvalues <= res.eigenvalues + slack) and np.all(res.eigenvalues <= light.eigenvalues + slack)
        )
        return CriterionResult(
            8,
            NAMES[8],
            off <= 1e-8 and between,
            {
                "weighted_offdiagonal": off,
                "eigenvalues": res.eigenvalues.tolist(),
                "rho4": heavy.eigenvalues.tolist(),
                "rho1": light.eigenvalues.tolist(),
                "bracketed": between,
            },
        )

    def criterion_9(self, n: int = 16, pairs: int = 10, seed: int = 0) -> CriterionResult:
        mesh = self.mesh(("square", n))
        sel = SigmaSelector([1, 4])
        problem = setup_problem(mesh, SQUARE_PARAMS, sel, "normal")
        T = SolutionOperator(problem)
        B = problem.B
        rng = np.random.default_rng(seed)
        sym = 0.0
        for _ in range(pairs):
            f, g = rng.standard_normal((2, mesh.n_dofs))
            Tf, Tg = T(f), T(g)
            scale = math.sqrt(float(Tf @ (B @ Tf)) * float(g @ (B @ g)))
            sym = max(sym, abs(float(Tf @ (B @ g)) - float(f @ (B @ Tg))) / scale)
        res = solve_eigen(mesh, SQUARE_PARAMS, sel, SolveConfig(kind="normal", k=3), problem=problem)
        inv = 0.0
        for i in range(res.k):
            u = res.modes[:, i]
            d = T(u) - u / res.eigenvalues[i]
            inv = max(inv, math.sqrt(float(d @ (B @ d)) / float(u @ (B @ u))) * res.eigenvalues[i])
        return CriterionResult(
            9, NAMES[9], sym <= 1e-10 and inv <= 1e-8, {"symmetry_defect": sym, "eigenmode_inverse_defect": inv}
        )

    def criterion_10(self) -> CriterionResult:
        meshes = {
            "rect 1x1 8x8": generate_rectangle(1, 1, 8, 8),
            "rect 2x1 20x10": generate_rectangle(2, 1, 20, 10),
            "rect 1x1 32x32": generate_rectangle(1, 1, 32, 32),
            "disk 64/8": generate_disk(1, 64, 8),
            "disk 128/16": generate_disk(1, 128, 16),
            "annulus 64/4": generate_annulus(0.5, 1, 64, 4),
        }
        rows, ok = [], True
        for name, mesh in meshes.items():
            assert mesh.n_dofs <= 6000
            A = assemble_stiffness(mesh, SQUARE_PARAMS)
            w = np.linalg.eigvalsh(A.toarray())
            norm = float(np.max(np.abs(w)))
            deficiency = int(np.sum(w < 1e-10 * norm))
            R = rigid_motion_basis(mesh)
            ar = float(np.max(np.linalg.norm(A @ R, axis=0)) / norm)
            good = deficiency == 3 and ar <= 1e-12
            ok &= good
            rows.append({"mesh": name, "dofs": mesh.n_dofs, "deficiency": deficiency, "max_Ar_over_A": ar, "passed": good})
        return CriterionResult(10, NAMES[10], bool(ok), {"meshes": rows})

    # -- driver --------------------------------------------------------------

    def run(self, numbers) -> list[CriterionResult]:
        out = []
        for n in numbers:
            t0 = time.perf_counter()
            try:
                r = getattr(self, f"criterion_{n}")()
            except Exception as exc:  # a crash is a failure of that criterion, not of the run
                r = CriterionResult(n, NAMES[n], False, {"error": f"{type(exc).__name__}: {exc}"})
            r.seconds = time.perf_counter() - t0
            limit = RUNTIME_LIMIT.get(n)
            if limit is not None:
                r.detail["runtime_limit_s"] = limit
                if r.seconds > limit:
                    r.passed = False
                    r.detail["runtime_exceeded"] = True
            out.append(r)
        return out


def select(only=None) -> list[int]:
    """Criterion numbers for ``--only`` values (group names or numbers)."""
    if not only:
        return list(NAMES)
    nums: set[int] = set()
    for item in only:
        for tok in str(item).split(","):
            tok = tok.strip()
            if tok in GROUPS:
                nums.update(GROUPS[tok])
            elif tok.isdigit() and int(tok) in NAMES:
                nums.add(int(tok))
            else:
                raise ValueError(f"unknown criterion {tok!r}; use 1-10 or one of {', '.join(GROUPS)}")
    return sorted(nums)


def write_fixtures(directory) -> None:
    """Regenerate the shipped fixture files from the oracles."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    rectangle_tangential_spectrum(1.0, 1.0, SQUARE_PARAMS, 6).to_csv(directory / "tangential_square.csv")
    table = [
        {"geometry": "square", "sigma": [1], "kind": "normal", "dim": 1},
        {"geometry": "square", "sigma": [1, 4], "kind": "normal", "dim": 0},
        {"geometry": "disk", "sigma": "all", "kind": "normal", "dim": 1},
        {"geometry": "square", "sigma": [1], "kind": "tangential", "dim": 1},
        {"geometry": "square", "sigma": "all", "kind": "tangential", "dim": 0},
    ]
    (directory / "kernel_table.json").write_text(json.dumps(table, indent=2) + "\n", encoding="utf-8")
