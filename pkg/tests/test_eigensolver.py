import math
import os
import types
import warnings

import numpy as np
import pytest
from threadpoolctl import threadpool_limits

from jonesfem.assembly import assemble_mass, assemble_stiffness, interpolate
from jonesfem.constraints import full_space
from jonesfem.eigensolver import (
    SingularStiffnessError,
    SolutionOperator,
    SolveConfig,
    cluster_eigenvalues,
    residual_report,
    setup_problem,
    solve_eigen,
    solve_source,
)
from jonesfem.material import MaterialParams, halfplane_density
from jonesfem.mesh import SigmaSelector, generate_rectangle
from jonesfem.oracles import rectangle_tangential_spectrum

ALL = SigmaSelector([1, 2, 3, 4])
PI2 = math.pi**2


@pytest.fixture(scope="module")
def tangential16(square16, params):
    return solve_eigen(square16, params, ALL, SolveConfig(kind="tangential", k=6))


def test_config_validation():
    with pytest.raises(ValueError):
        SolveConfig(shift="maybe")
    with pytest.raises(ValueError):
        SolveConfig(k=0)
    with pytest.raises(ValueError):
        SolveConfig(kind="diagonal")


def test_cluster_eigenvalues():
    assert cluster_eigenvalues([1.0, 1.0 + 1e-9, 2.0]) == [(pytest.approx(1.0), 2), (2.0, 1)]
    assert cluster_eigenvalues([]) == []


def test_square_tangential_matches_admissible_oracle(tangential16, params):
    ref = rectangle_tangential_spectrum(1, 1, params, 6, index_ranges="admissible").values
    rel = np.abs(tangential16.eigenvalues - ref) / ref
    assert rel.max() <= 2e-2  # O(h^2) at h = 1/16
    assert tangential16.kernel_dim == 0 and tangential16.n_zero == 0
    assert tangential16.shift_used == 0
    assert tangential16.eigenvalues[0] == pytest.approx(PI2, rel=5e-3)


def test_mode_quality(tangential16):
    assert tangential16.residuals.max() <= 1e-10
    assert tangential16.orthogonality_defect <= 1e-10
    assert tangential16.rayleigh_defect <= 1e-10
    # the pi^2 pair (m, l) = (1, 0), (0, 1) survives the diagonal mesh; the
    # 4 pi^2 pair splits at O(h^2)
    assert tangential16.clusters[0][1] == 2


@pytest.mark.parametrize(
    "tags,kind,expected",
    [([1], "normal", 1), ([1], "tangential", 2), ([1, 4], "normal", 0), ([1, 2, 3, 4], "normal", 0)],
)
def test_zero_modes_equal_kernel(square8, params, tags, kind, expected):
    res = solve_eigen(square8, params, SigmaSelector(tags), SolveConfig(kind=kind, k=4))
    assert res.kernel_dim == expected
    assert res.n_zero == expected
    assert res.shift_used == (1 if expected else 0)
    if expected:
        assert np.all(np.abs(res.eigenvalues[:expected]) <= 1e-9)
        assert res.shifted_operator_norm == pytest.approx(1.0, abs=1e-9)
        assert res.shifted_operator_norm <= res.shifted_operator_bound
    else:
        assert res.shifted_operator_norm is None


def test_disk_rotation_zero_mode(disk64, params):
    res = solve_eigen(disk64, params, SigmaSelector([1]), SolveConfig(kind="normal", k=3))
    assert res.kernel_dim == 1 and res.n_zero == 1
    assert res.eigenvalues[1] > 100 * res.zero_threshold


def test_shift_on_off_agree(square8, params):
    sel = SigmaSelector([1])
    on = solve_eigen(square8, params, sel, SolveConfig(kind="normal", k=6, shift="on"))
    off = solve_eigen(square8, params, sel, SolveConfig(kind="normal", k=6, shift="off"))
    assert np.allclose(on.eigenvalues[1:], off.eigenvalues[1:], rtol=1e-10)
    assert abs(off.eigenvalues[0]) <= 1e-10


@pytest.mark.parametrize("tags,kind", [([1, 2, 3, 4], "tangential"), ([1], "normal")])
def test_iterative_matches_dense(square16, params, tags, kind):
    sel = SigmaSelector(tags)
    dense = solve_eigen(square16, params, sel, SolveConfig(kind=kind, k=6))
    it = solve_eigen(square16, params, sel, SolveConfig(kind=kind, k=6, max_dense=0))
    assert dense.method == "dense" and it.method == "shift-invert"
    scale = max(1.0, dense.eigenvalues.max())
    assert np.abs(dense.eigenvalues - it.eigenvalues).max() <= 1e-8 * scale


def test_residual_report_recomputes(square8, params, tangential16, square16):
    prob = setup_problem(square16, params, ALL, "tangential")
    again = residual_report(tangential16, prob.A, prob.B, prob.reduction)
    assert np.allclose(again, tangential16.residuals, atol=1e-14)


def test_residual_report_rotation(square8, params):
    rot = interpolate(square8, lambda x, y: (-y, x))
    fake = types.SimpleNamespace(modes=rot[:, None], eigenvalues=np.array([0.0]))
    A, B = assemble_stiffness(square8, params), assemble_mass(square8, params)
    assert residual_report(fake, A, B)[0] <= 1e-12
    assert residual_report(fake, A, B, full_space(square8))[0] <= 1e-12


def test_residual_report_detects_perturbation(square8, params):
    res = solve_eigen(square8, params, ALL, SolveConfig(kind="tangential", k=2))
    prob = setup_problem(square8, params, ALL, "tangential")
    bad = types.SimpleNamespace(modes=res.modes, eigenvalues=1.01 * res.eigenvalues)
    r = residual_report(bad, prob.A, prob.B, prob.reduction)
    assert np.allclose(r, 0.01 * res.eigenvalues, rtol=1e-6)


def test_k_clamped_with_warning(params):
    mesh = generate_rectangle(1, 1, 2, 2)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        res = solve_eigen(mesh, params, ALL, SolveConfig(kind="tangential", k=50))
    assert res.k == 6 and len(res.eigenvalues) == 6
    assert any("clamping" in str(w.message) for w in caught)


def test_thread_count_invariance(square16, params):
    cfg = SolveConfig(kind="tangential", k=6)
    with threadpool_limits(1):
        one = solve_eigen(square16, params, ALL, cfg).eigenvalues
    with threadpool_limits(min(4, os.cpu_count() or 1)):
        four = solve_eigen(square16, params, ALL, cfg).eigenvalues
    assert np.allclose(one, four, rtol=1e-12)


def test_variable_density(square16):
    rho = halfplane_density(square16, 0.5, 1.0, 4.0)
    p = MaterialParams(1.0, 0.5, rho)
    res = solve_eigen(square16, p, ALL, SolveConfig(kind="tangential", k=6))
    B = assemble_mass(square16, p)
    G = res.modes.T @ (B @ res.modes)
    assert np.abs(G - np.eye(6)).max() <= 1e-10
    uniform = solve_eigen(square16, MaterialParams(1.0, 0.5, 1.0), ALL, SolveConfig(kind="tangential", k=6))
    # heavier material lowers every frequency, but by less than the density ratio
    assert np.all(res.eigenvalues < uniform.eigenvalues)
    assert np.all(res.eigenvalues > uniform.eigenvalues / 4)


def test_rayleigh_quotient_counterexample(square16, params):
    """u = (0, sin(pi x)) is admissible for the tangential constraint on the
    whole square and has Rayleigh quotient mu pi^2, below 2 pi^2."""
    u = interpolate(square16, lambda x, y: (0 * x, np.sin(np.pi * x)))
    prob = setup_problem(square16, params, ALL, "tangential")
    assert np.linalg.norm(prob.reduction.lift(prob.reduction.restrict(u)) - u) <= 1e-12
    q = float(u @ (prob.A @ u)) / float(u @ (prob.B @ u))
    assert q == pytest.approx(params.mu * PI2, rel=1e-2)
    w1 = solve_eigen(square16, params, ALL, SolveConfig(kind="tangential", k=1)).eigenvalues[0]
    assert w1 <= q * (1 + 1e-12) < 2 * PI2


def test_source_zero(square8, params):
    u = solve_source(square8, params, ALL, "tangential", np.zeros(square8.n_dofs))
    assert np.array_equal(u, np.zeros(square8.n_dofs))


@pytest.mark.parametrize("shift", [False, True])
def test_source_eigenmode(square8, params, shift):
    res = solve_eigen(square8, params, ALL, SolveConfig(kind="tangential", k=3))
    op = SolutionOperator(setup_problem(square8, params, ALL, "tangential"), shift=shift)
    for j in range(3):
        u = op(res.modes[:, j])
        expected = res.modes[:, j] / (res.eigenvalues[j] + shift)
        assert np.linalg.norm(u - expected) <= 1e-10 * np.linalg.norm(expected)
        assert op.relative_residual(res.modes[:, j], u) <= 1e-12


def test_source_operator_symmetric(square8, params):
    prob = setup_problem(square8, params, SigmaSelector([1]), "normal")
    op = SolutionOperator(prob, shift=True)
    rng = np.random.default_rng(5)
    f = prob.reduction.lift(rng.standard_normal(prob.reduction.n_free))
    g = prob.reduction.lift(rng.standard_normal(prob.reduction.n_free))
    lhs = op(f) @ (prob.B @ g)
    rhs = f @ (prob.B @ op(g))
    assert abs(lhs - rhs) <= 1e-12 * abs(lhs)


def test_singular_stiffness_requires_shift(square8, params):
    prob = setup_problem(square8, params, SigmaSelector([1]), "normal")
    with pytest.raises(SingularStiffnessError, match="shift"):
        SolutionOperator(prob)


def test_no_free_dofs(params):
    from jonesfem.constraints import ConstraintError

    mesh = generate_rectangle(1, 1, 1, 1)
    with pytest.raises(ConstraintError, match="no free degrees of freedom"):
        solve_eigen(mesh, params, ALL, SolveConfig(kind="normal"))


def test_convergence_from_above(params):
    ref = rectangle_tangential_spectrum(1, 1, params, 6, index_ranges="admissible").values
    prev = None
    for n in (4, 8, 16):
        w = solve_eigen(generate_rectangle(1, 1, n, n), params, ALL, SolveConfig(kind="tangential", k=6)).eigenvalues
        assert np.all(w >= ref)
        if prev is not None:
            assert np.all(w <= prev)
        prev = w
