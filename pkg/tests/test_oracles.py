import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jonesfem.eigensolver import SolveConfig, solve_eigen
from jonesfem.material import MaterialParams
from jonesfem.mesh import SigmaSelector, generate_rectangle
from jonesfem.oracles import (
    PRESSURE,
    SHEAR,
    AnalyticField,
    OracleEntry,
    check_field,
    evaluate_mode,
    fd_rounding_floor,
    jones_rectangle_candidates,
    read_oracle_csv,
    rectangle_tangential_spectrum,
    tangential_field,
    write_oracle_csv,
)

PI2 = math.pi**2
UNIT = MaterialParams(1.0, 0.5, 1.0)


def _boundary_samples(a, b, n=100, seed=0):
    """``n`` random points on the rectangle boundary with unit tangents."""
    rng = np.random.default_rng(seed)
    side = rng.integers(0, 4, n)
    s = rng.random(n)
    x = np.select([side == 0, side == 1, side == 2], [s * a, np.full(n, a), s * a], np.zeros(n))
    y = np.select([side == 0, side == 1, side == 2], [np.zeros(n), s * b, np.full(n, b)], s * b)
    t = np.where(side[:, None] % 2 == 0, [1.0, 0.0], [0.0, 1.0])
    return x, y, t


def test_stated_first_three():
    spec = rectangle_tangential_spectrum(1, 1, UNIT, 3)
    assert spec.values / PI2 == pytest.approx([2.0, 2.5, 2.5], rel=1e-15)
    e = spec.entries
    assert (e[0].family, e[0].indices) == (SHEAR, (1, 1))
    assert (e[1].family, e[1].indices) == (PRESSURE, (1, 0))
    assert (e[2].family, e[2].indices) == (PRESSURE, (0, 1))
    assert [x.multiplicity for x in e] == [1, 2, 2]


def test_admissible_first_values():
    spec = rectangle_tangential_spectrum(1, 1, UNIT, 8, index_ranges="admissible")
    assert spec.values / PI2 == pytest.approx([1, 1, 2, 4, 4, 5, 5, 5], rel=1e-15)
    assert {e.family for e in spec.entries[:5]} == {SHEAR}


def test_rectangle_smallest_shear():
    spec = rectangle_tangential_spectrum(2, 1, MaterialParams(1.0, 0.5, 1.0), 20)
    shear = [e.omega2 for e in spec.entries if e.family == SHEAR]
    assert min(shear) == pytest.approx(1.25 * PI2, rel=1e-15)


def test_bad_arguments():
    with pytest.raises(ValueError):
        rectangle_tangential_spectrum(0, 1, UNIT, 3)
    with pytest.raises(ValueError):
        rectangle_tangential_spectrum(1, 1, UNIT, 3, index_ranges="other")
    with pytest.raises(ValueError):
        tangential_field(1, 1, "torsion", 1, 1)


@settings(max_examples=30, deadline=None)
@given(lam=st.floats(-0.5, 10), dlam=st.floats(0.01, 5), ranges=st.sampled_from(["stated", "admissible"]))
def test_lambda_monotonicity(lam, dlam, ranges):
    lo = rectangle_tangential_spectrum(1.3, 0.7, MaterialParams(1.0, lam, 1.0), 40, ranges).entries
    hi = rectangle_tangential_spectrum(1.3, 0.7, MaterialParams(1.0, lam + dlam, 1.0), 40, ranges).entries

    def by_family(entries, fam):
        return {e.indices: e.omega2 for e in entries if e.family == fam}

    s_lo, s_hi = by_family(lo, SHEAR), by_family(hi, SHEAR)
    for idx in s_lo.keys() & s_hi.keys():
        assert s_lo[idx] == s_hi[idx]
    p_lo, p_hi = by_family(lo, PRESSURE), by_family(hi, PRESSURE)
    for idx in p_lo.keys() & p_hi.keys():
        assert p_hi[idx] > p_lo[idx]


def test_sorted_with_multiplicities():
    spec = rectangle_tangential_spectrum(1, 1, UNIT, 30)
    assert np.all(np.diff(spec.values) >= 0)
    for e in spec.entries:
        same = np.sum(np.isclose(spec.values, e.omega2, rtol=1e-9))
        assert e.multiplicity >= same  # clusters may continue past k


def test_corner_value():
    assert np.array_equal(evaluate_mode(OracleEntry(2 * PI2, 1, SHEAR, 1, 1), (0.0, 0.0)), [0.0, 0.0])


@pytest.mark.parametrize("family", [SHEAR, PRESSURE])
@pytest.mark.parametrize("a,b", [(1.0, 1.0), (2.0, 1.0), (1.3, 0.7)])
def test_tangential_trace_vanishes(family, a, b):
    x, y, t = _boundary_samples(a, b)
    for m in range(4):
        for l in range(4):
            u = tangential_field(a, b, family, m, l)(x, y)
            assert np.max(np.abs(np.einsum("pi,ip->p", t, u))) <= 1e-12


@pytest.mark.parametrize("m,l", [(m, l) for m in range(4) for l in range(4) if m + l])
def test_shear_divergence_free_pressure_curl_free(m, l):
    rng = np.random.default_rng(m * 4 + l)
    x, y = rng.random(200), rng.random(200)
    us = tangential_field(1, 1, SHEAR, m, l)
    assert np.max(np.abs(us.divergence(x, y))) <= 1e-12 * max(1, m * m + l * l)
    up = tangential_field(1, 1, PRESSURE, m, l)
    curl = up.derivative(x, y, 1, 0)[1] - up.derivative(x, y, 0, 1)[0]
    assert np.max(np.abs(curl)) <= 1e-12 * max(1, m * m + l * l)
    # the same statements by finite differences, relative to the gradient scale
    h = 1e-5
    fd_div = (us(x + h, y)[0] - us(x - h, y)[0] + us(x, y + h)[1] - us(x, y - h)[1]) / (2 * h)
    grad_scale = math.pi * math.hypot(m, l) * np.max(np.abs(us(x, y))) + 1e-300
    assert np.max(np.abs(fd_div)) <= 1e-6 * grad_scale


@pytest.mark.parametrize("family", [SHEAR, PRESSURE])
def test_fd_pde_residual_unit_square(family):
    for m in range(4):
        for l in range(4):
            fld = tangential_field(1, 1, family, m, l)
            if fld.is_trivial():
                continue
            speed2 = UNIT.mu if family == SHEAR else UNIT.lam + 2 * UNIT.mu
            chk = check_field(fld, speed2 * PI2 * (m * m + l * l), UNIT)
            assert chk.fd_residual <= 1e-6
            assert chk.pde_residual <= 1e-13
            assert chk.tangential_trace <= 1e-12


def test_fd_rounding_floor_scaling():
    f1 = fd_rounding_floor(UNIT, PI2, 1e-5)
    assert fd_rounding_floor(UNIT, PI2, 2e-5) == pytest.approx(f1 / 4)
    assert fd_rounding_floor(UNIT, 2 * PI2, 1e-5) == pytest.approx(f1 / 2)


def test_tangential_modes_traction():
    chk = check_field(tangential_field(1, 1, SHEAR, 1, 0), PI2, UNIT)
    assert chk.normal_traction <= 1e-12
    assert chk.tangential_traction > 1e-2
    # m^2 / a^2 = l^2 / b^2 kills the shear stress on the edges as well
    chk = check_field(tangential_field(1, 1, SHEAR, 1, 1), 2 * PI2, UNIT)
    assert chk.normal_traction <= 1e-12 and chk.tangential_traction <= 1e-12


def test_trivial_fields():
    assert tangential_field(1, 1, PRESSURE, 1, 0).is_trivial()
    assert not tangential_field(1, 1, SHEAR, 1, 0).is_trivial()
    assert AnalyticField(SHEAR, 0, 0, 1, 1, ("cos", "cos"), "curl").is_trivial()


@pytest.mark.parametrize("a,b", [(1.0, 1.0), (1.3, 0.7)])
def test_jones_candidates_weak(a, b):
    cands = jones_rectangle_candidates(a, b, UNIT, 8)
    assert len(cands.verified) == 8
    assert np.all(np.diff([e.omega2 for e in cands.entries]) >= 0)
    for c in cands.verified:
        assert c.check.pde_residual <= 1e-8
        assert c.check.normal_trace <= 1e-12
        assert c.check.tangential_traction <= 1e-6
        assert c.full_traction_free is False
    reasons = {c.reason for c in cands.rejected}
    assert "field vanishes identically" in reasons


def test_jones_candidates_square_values():
    cands = jones_rectangle_candidates(1, 1, UNIT, 6)
    assert np.array([e.omega2 for e in cands.entries]) / PI2 == pytest.approx([2, 2.5, 2.5, 5, 5, 5], rel=1e-14)


def test_jones_candidates_strong_is_empty():
    cands = jones_rectangle_candidates(1, 1, UNIT, 6, conditions="strong")
    assert cands.verified == []
    assert all("traction" in c.reason or "vanishes" in c.reason for c in cands.rejected)
    rows = cands.report()
    assert rows and all(r["verified"] is False for r in rows)


def test_jones_candidates_bad_mode():
    with pytest.raises(ValueError):
        jones_rectangle_candidates(1, 1, UNIT, 3, conditions="medium")


def test_csv_roundtrip(tmp_path):
    spec = rectangle_tangential_spectrum(1.3, 0.7, UNIT, 10)
    path = tmp_path / "oracle.csv"
    spec.to_csv(path)
    assert read_oracle_csv(path) == spec.entries
    write_oracle_csv(path, spec.entries[:2])
    assert read_oracle_csv(path) == spec.entries[:2]


def test_fem_agrees_with_admissible_tangential_oracle():
    mesh = generate_rectangle(1, 1, 32, 32)
    res = solve_eigen(mesh, UNIT, SigmaSelector([1, 2, 3, 4]), SolveConfig(kind="tangential", k=8))
    ref = rectangle_tangential_spectrum(1, 1, UNIT, 8, index_ranges="admissible").values
    assert np.max(np.abs(res.eigenvalues - ref) / ref) <= 2e-2  # O(h^2) at h = 1/32


def test_fem_agrees_with_jones_candidates():
    mesh = generate_rectangle(1, 1, 32, 32)
    res = solve_eigen(mesh, UNIT, SigmaSelector([1, 2, 3, 4]), SolveConfig(kind="normal", k=6))
    ref = np.array([e.omega2 for e in jones_rectangle_candidates(1, 1, UNIT, 6).entries])
    assert np.max(np.abs(res.eigenvalues - ref) / ref) <= 2e-2  # O(h^2) at h = 1/32
