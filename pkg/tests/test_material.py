import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from jonesfem.material import MaterialError, MaterialParams, halfplane_density, validate


def test_valid_params():
    p = MaterialParams(1.0, 0.5, 1.0)
    assert validate(p) is p


def test_lame_condition_boundary():
    with pytest.raises(MaterialError, match=r"lambda \+ mu = 0"):
        validate(MaterialParams(1.0, -1.0, 1.0))


def test_negative_lambda_allowed():
    validate(MaterialParams(1.0, -0.9, 1.0))


def test_nonpositive_mu():
    with pytest.raises(MaterialError, match="mu"):
        validate(MaterialParams(0.0, 1.0))


def test_zero_density_names_element(square8):
    rho = np.ones(square8.n_triangles)
    rho[17] = 0.0
    with pytest.raises(MaterialError, match="element 17"):
        validate(MaterialParams(1.0, 0.5, rho), square8)


def test_density_length_mismatch(square8):
    with pytest.raises(MaterialError, match="length"):
        validate(MaterialParams(1.0, 0.5, np.ones(3)), square8)


def test_halfplane_density(square8):
    rho = halfplane_density(square8, 0.5, 1.0, 4.0)
    assert set(np.unique(rho)) == {1.0, 4.0}
    assert (rho == 1.0).sum() == (rho == 4.0).sum()


@given(mu=st.floats(1e-3, 1e3), lam=st.floats(-1e3, 1e3))
def test_coercivity_factor_positive(mu, lam):
    p = MaterialParams(mu, lam)
    try:
        validate(p)
    except MaterialError:
        assert lam + mu <= 0
        return
    assert p.coercivity_factor() > 0
    assert p.coercivity_factor() == min(2 * mu, 2 * (lam + mu))
