import numpy as np
import pytest
from hypothesis import given, strategies as st

from cancelkit.catalog import catalog_get
from cancelkit.lab import (
    GridField,
    TorusGrid,
    apply_operator,
    band_limited,
    bump,
    derivative_tensor,
    divfree_field,
    forward,
    inverse,
    lp_norm,
    mollifier,
)
from cancelkit.operators import OperatorError


def test_grid_geometry():
    g = TorusGrid(2, 16)
    assert g.h == 1 / 16 and g.shape == (16, 16) and g.points == 256
    np.testing.assert_allclose(g.center, [0.5 + 1 / 32] * 2)
    assert g.coords.shape == (16, 16, 2)
    assert g.nyquist.sum() == 2 * 16 - 1


@pytest.mark.parametrize("size", [0, 7, 9, 6])
def test_bad_grid_size(size):
    with pytest.raises(ValueError):
        TorusGrid(2, size)


def test_sine_eigenfunction_laplacian():
    g = TorusGrid(2, 32)
    x, y = g.coords[..., 0], g.coords[..., 1]
    u = g.field(np.sin(2 * np.pi * x) * np.cos(4 * np.pi * y))
    lap = apply_operator(catalog_get("laplacian", 2), u)
    np.testing.assert_allclose(lap.values, -(4 * np.pi ** 2) * 5 * u.values, atol=1e-9)


def test_grad_then_grad_matches_hessian():
    g = TorusGrid(2, 32)
    u = bump(g, g.center, 0.3)
    gg = derivative_tensor(derivative_tensor(u, 1), 1)
    hess = apply_operator(catalog_get("dk_scalar", 2, k=2), u)
    np.testing.assert_allclose(gg.values, derivative_tensor(u, 2).values, atol=1e-9)
    np.testing.assert_allclose(hess.values, derivative_tensor(u, 2).values, atol=1e-9)


def test_derivative_order_zero_is_identity():
    g = TorusGrid(2, 16)
    u = bump(g, g.center, 0.3)
    assert derivative_tensor(u, 0) is u


def test_fiber_dimension_mismatch():
    g = TorusGrid(2, 16)
    with pytest.raises(OperatorError):
        apply_operator(catalog_get("divergence", 2), bump(g, g.center, 0.3))
    with pytest.raises(OperatorError):
        apply_operator(catalog_get("grad", 3), bump(g, g.center, 0.3))


@given(seed=st.integers(0, 2 ** 32 - 1), n=st.sampled_from([1, 2, 3]))
def test_roundtrip_and_parseval(seed, n):
    rng = np.random.default_rng(seed)
    g = TorusGrid(n, 8 if n == 3 else 16)
    u = g.field(rng.standard_normal(g.shape + (2,)))
    spec = forward(u)
    back = inverse(g, spec)
    np.testing.assert_allclose(back.values, u.values, atol=1e-12)
    lhs = g.cell_volume * np.sum(u.values ** 2)
    assert abs(lhs - np.sum(np.abs(spec) ** 2)) <= 1e-10 * lhs


def test_inverse_rejects_complex():
    g = TorusGrid(1, 8)
    spec = np.zeros((8, 1), dtype=complex)
    spec[1] = 1.0
    with pytest.raises(ValueError, match="not real"):
        inverse(g, spec)


def test_lp_norms():
    g = TorusGrid(2, 16)
    ones = g.field(np.ones(g.shape + (2,)) / np.sqrt(2))
    for p in (1, 2, 3.5, np.inf):
        assert lp_norm(ones, p) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        lp_norm(ones, 0.5)


def test_lp_scaling(rng):
    g = TorusGrid(2, 16)
    u = g.field(rng.standard_normal(g.shape))
    for p in (1, 1.5, 2, 4, np.inf):
        assert lp_norm(3.0 * u, p) == pytest.approx(3.0 * lp_norm(u, p), rel=1e-12)


@pytest.mark.parametrize("n,size,eps", [(2, 64, 1 / 8), (2, 128, 1 / 16), (3, 32, 1 / 4), (1, 64, 1 / 8)])
def test_mollifier_mass(n, size, eps):
    g = TorusGrid(n, size)
    m = mollifier(g, eps)
    assert m.values.sum() * g.cell_volume == pytest.approx(1.0, abs=0.01)


def test_mollifier_resolution_guard():
    with pytest.raises(ValueError):
        mollifier(TorusGrid(2, 16), 1 / 16)


def test_band_limited_is_grid_independent():
    fine = band_limited(TorusGrid(2, 32), 1, 3, np.random.default_rng(1))
    coarse = band_limited(TorusGrid(2, 16), 1, 3, np.random.default_rng(1))
    np.testing.assert_allclose(fine.values[::2, ::2], coarse.values, atol=1e-12)
    assert abs(fine.values.mean()) < 1e-12


def test_divfree_field_constraint(rng):
    g = TorusGrid(2, 32)
    f = divfree_field(g, 4, rng)
    div = apply_operator(catalog_get("divergence", 2), f)
    assert np.abs(div.values).max() <= 1e-9 * np.abs(f.values).max()


def test_field_arithmetic_and_roll():
    g = TorusGrid(2, 8)
    u = g.field(np.arange(64.0).reshape(8, 8))
    assert u.dim == 1 and u.flat.shape == (64, 1)
    np.testing.assert_array_equal((2 * u - u + (-u)).values, 0 * u.values)
    np.testing.assert_array_equal(u.roll((1, 0)).values[1], u.values[0])
    with pytest.raises(ValueError):
        u + TorusGrid(2, 16).zeros()
    with pytest.raises(ValueError):
        GridField(g, np.full((8, 8), np.nan))
    with pytest.raises(ValueError):
        GridField(g, np.zeros((4, 4)))
