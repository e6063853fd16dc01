import warnings

import numpy as np
import pytest

from cancelkit.catalog import catalog_get
from cancelkit.lab import (
    GridField,
    PreconditionError,
    TorusGrid,
    ZeroDenominatorWarning,
    band_limited,
    blowup_family,
    bump,
    circulation_numerator,
    circulation_ratio,
    divfree_field,
    divfree_witness_growth,
    duality_ratio,
    fractional_ratio,
    gagliardo_seminorm,
    hardy_ratio,
    mollifier,
    p2_sharp_check,
    random_bump,
    reconstruction_check,
    sobolev_ratio,
    square_curve,
    symbol_bound,
    uniform_ratio,
)
from cancelkit.operators import OperatorError

GRAD2 = catalog_get("grad", 2)


# -- reconstruction and p = 2 ------------------------------------------------

@pytest.mark.parametrize("name,n,params", [("grad", 2, {}), ("laplacian", 2, {}), ("sym_grad", 2, {}),
                                           ("hodge", 3, {"m": 1})])
def test_reconstruction_exact_on_mean_zero_fields(name, n, params, rng):
    op = catalog_get(name, n, **params)
    u = band_limited(TorusGrid(n, 16), op.dim_v, 3, rng)
    assert reconstruction_check(op, u) <= 1e-10


def test_reconstruction_preconditions():
    g = TorusGrid(2, 16)
    with pytest.raises(PreconditionError) as exc:
        reconstruction_check(GRAD2, bump(g, g.center, 0.3))
    assert exc.value.name == "mean_zero"
    with pytest.raises(PreconditionError) as exc:
        reconstruction_check(catalog_get("divergence", 2), g.zeros(2))
    assert exc.value.name == "elliptic"


@pytest.mark.parametrize("name,n,params", [("grad", 2, {}), ("laplacian", 2, {}), ("hodge", 3, {"m": 1})])
def test_p2_bound_is_one_for_isotropic_operators(name, n, params):
    op = catalog_get(name, n, **params)
    measured, bound = p2_sharp_check(op, trials=5)
    assert bound == pytest.approx(1.0, abs=1e-8)
    assert measured <= bound * (1 + 1e-10)


def test_p2_bound_sym_grad():
    # |xi (x) v| / |sym(xi (x) v)| peaks at sqrt 2 when v is orthogonal to xi
    op = catalog_get("sym_grad", 2)
    measured, bound = p2_sharp_check(op, trials=5)
    assert bound == pytest.approx(np.sqrt(2), rel=1e-6)
    assert measured <= bound * (1 + 1e-10)


def test_symbol_bound_rejects_degenerate():
    with pytest.raises(PreconditionError):
        symbol_bound(catalog_get("divergence", 2))


# -- Sobolev and Hardy -------------------------------------------------------

def _dk1():
    return catalog_get("dk_scalar", 2, k=1)


def _smooth(size, radius=0.24):
    g = TorusGrid(2, size)
    return bump(g, g.center, radius, power=2.0)


def test_sobolev_refinement():
    vals = [sobolev_ratio(_dk1(), _smooth(s)) for s in (64, 128)]
    assert vals[0] > 0
    assert abs(vals[1] - vals[0]) <= 0.02 * vals[1]


@pytest.mark.parametrize("fn", [sobolev_ratio, hardy_ratio])
def test_dilation_invariance(fn):
    # u(2x) on the doubled grid: both sides scale by the same power of 2
    assert fn(_dk1(), _smooth(128, 0.12)) == pytest.approx(fn(_dk1(), _smooth(64)), rel=0.01)


@pytest.mark.parametrize("c", [-3.0, 0.5, 7.0])
def test_homogeneity_in_u(c):
    g = TorusGrid(2, 64)
    u = bump(g, g.center, 0.2, [0.6, 0.8])
    op = catalog_get("sym_grad", 2)
    for fn in (sobolev_ratio, hardy_ratio):
        assert fn(op, c * u) == pytest.approx(fn(op, u), rel=1e-10)


def test_zero_field_gives_nan_with_warning():
    g = TorusGrid(2, 16)
    with pytest.warns(ZeroDenominatorWarning):
        assert np.isnan(sobolev_ratio(GRAD2, g.zeros()))
    with pytest.warns(ZeroDenominatorWarning):
        assert np.isnan(hardy_ratio(GRAD2, g.zeros()))


def test_exponent_range_and_fit():
    g = TorusGrid(2, 16)
    with pytest.raises(PreconditionError) as exc:
        sobolev_ratio(catalog_get("laplacian", 2), g.zeros(), ell=0)
    assert exc.value.name == "exponent_range"
    with pytest.raises(OperatorError):
        sobolev_ratio(GRAD2, g.zeros(2))
    with pytest.raises(PreconditionError) as exc:
        hardy_ratio(GRAD2, bump(g, g.center, 0.3), center=(0.5, 0.5))
    assert exc.value.name == "weight_center"


def test_uniform_ratio_laplacian():
    g = TorusGrid(2, 64)
    u = bump(g, g.center, 0.2)
    lap = catalog_get("laplacian", 2)
    assert np.isfinite(uniform_ratio(lap, u, 0))
    with pytest.raises(PreconditionError):
        uniform_ratio(lap, u, 1)


# -- fractional --------------------------------------------------------------

def test_gagliardo_of_constant_is_zero():
    g = TorusGrid(2, 16)
    assert gagliardo_seminorm(g.field(np.ones(g.shape)), 0.5, 1.5, extrapolate=False) == 0.0


def test_gagliardo_homogeneity(rng):
    g = TorusGrid(1, 64)
    w = band_limited(g, 1, 4, rng)
    a = gagliardo_seminorm(w, 0.4, 2.0)
    assert gagliardo_seminorm(2.5 * w, 0.4, 2.0) == pytest.approx(2.5 * a, rel=1e-12)


def test_gagliardo_p2_against_spectral_formula():
    # for p = 2 the periodic seminorm is sum |w_hat|^2 times a multiplier; a
    # single mode in n = 1 reduces it to a 1-d lattice sum we can do by hand
    size, sigma = 64, 0.5
    g = TorusGrid(1, size)
    x = g.coords[..., 0]
    w = g.field(np.cos(2 * np.pi * x))
    j = np.arange(1, size)
    d = np.minimum(j, size - j) / size
    # sum_x |w(x+d) - w(x)|^2 = N (1 - cos(2 pi d)) for the unit cosine
    direct = np.sum(size * (1 - np.cos(2 * np.pi * j / size)) / d ** (1 + 2 * sigma)) / size ** 2
    assert gagliardo_seminorm(w, sigma, 2.0, extrapolate=False) == pytest.approx(direct ** 0.5, rel=1e-12)


def test_fractional_refinement_and_translation():
    vals = []
    for size in (32, 48):
        g = TorusGrid(2, size)
        u = bump(g, g.center, 0.24, [1.0], power=2.0)
        vals.append(fractional_ratio(GRAD2, u, 0, 0.5, 4 / 3))
    assert abs(vals[1] - vals[0]) <= 0.05 * vals[1]
    g = TorusGrid(2, 32)
    u = bump(g, g.center, 0.24, [1.0], power=2.0)
    assert fractional_ratio(GRAD2, u.roll((3, -2)), 0, 0.5, 4 / 3) == pytest.approx(vals[0], rel=1e-10)


def test_fractional_zero_field():
    with pytest.warns(ZeroDenominatorWarning):
        assert np.isnan(fractional_ratio(GRAD2, TorusGrid(2, 16).zeros(), 0, 0.5, 4 / 3))


@pytest.mark.parametrize("sigma,p,name", [(0.0, 2.0, "exponent_range"), (1.0, 2.0, "exponent_range"),
                                          (0.5, 1.0, "exponent_range"), (0.5, 2.0, "scaling_relation")])
def test_fractional_preconditions(sigma, p, name):
    g = TorusGrid(2, 16)
    with pytest.raises(PreconditionError) as exc:
        fractional_ratio(GRAD2, bump(g, g.center, 0.3), 0, sigma, p)
    assert exc.value.name == name


def test_fractional_grid_limits():
    with pytest.raises(PreconditionError) as exc:
        fractional_ratio(GRAD2, TorusGrid(2, 64).zeros(), 0, 0.5, 4 / 3)
    assert exc.value.name == "grid_size"
    with pytest.raises(PreconditionError) as exc:
        gagliardo_seminorm(TorusGrid(1, 18).zeros(), 0.5, 2.0)
    assert exc.value.name == "grid_size"


# -- duality -----------------------------------------------------------------

def test_duality_sign_invariance_and_bound(rng):
    g = TorusGrid(2, 64)
    div = catalog_get("divergence", 2)
    for _ in range(5):
        f, phi = divfree_field(g, 4, rng), random_bump(g, rng, 2)
        r = duality_ratio(div, f, phi)
        assert duality_ratio(div, -f, phi) == r
        assert 0 <= r < 1


def test_duality_kernel_constraint(rng):
    g = TorusGrid(2, 32)
    f = band_limited(g, 2, 3, rng)
    with pytest.raises(PreconditionError) as exc:
        duality_ratio(catalog_get("divergence", 2), f, random_bump(g, rng, 2))
    assert exc.value.name == "kernel_constraint"
    with pytest.raises(PreconditionError) as exc:
        duality_ratio(catalog_get("divergence", 2), divfree_field(g, 3, rng), f, ell=2)
    assert exc.value.name == "exponent_range"


def test_mollified_point_source_violates_divergence_constraint(rng):
    g = TorusGrid(2, 64)
    rho = mollifier(g, 1 / 8).values[..., 0]
    f = GridField(g, np.stack([rho, np.zeros_like(rho)], -1))
    with pytest.raises(PreconditionError) as exc:
        duality_ratio(catalog_get("divergence", 2), f, random_bump(g, rng, 2))
    assert exc.value.name == "kernel_constraint"


def test_divfree_growth_increases():
    g = TorusGrid(2, 128)
    rows = divfree_witness_growth([1 / 8, 1 / 16, 1 / 32, 1 / 64], g)
    ratios = [r for _, r in rows]
    assert all(b > a for a, b in zip(ratios, ratios[1:]))


def test_divfree_growth_translation():
    g = TorusGrid(2, 64)
    base = divfree_witness_growth([1 / 16], g)[0][1]
    moved = divfree_witness_growth([1 / 16], g, center=g.center + 3 * g.h)[0][1]
    assert moved == pytest.approx(base, rel=1e-10)


def test_divfree_growth_resolution():
    with pytest.raises(PreconditionError) as exc:
        divfree_witness_growth([1 / 64], TorusGrid(2, 64))
    assert exc.value.name == "resolvable"


# -- blow-up -----------------------------------------------------------------

def test_laplacian_blowup_increases():
    rows = blowup_family(catalog_get("laplacian", 2), [1.0], [1 / 4, 1 / 8, 1 / 16, 1 / 32], ell=1, size=128)
    ratios = [r.ratio for r in rows]
    assert all(b > a for a, b in zip(ratios, ratios[1:]))
    assert all(r.source_perturbation == pytest.approx(1.0, abs=0.01) for r in rows)


@pytest.mark.parametrize("target", ["sobolev", "hardy"])
def test_laplacian_blowup_two_resolutions_agree(target):
    lap = catalog_get("laplacian", 2)
    eps = [1 / 8, 1 / 16, 1 / 32]
    coarse = [r.ratio for r in blowup_family(lap, [1.0], eps, 1, target, 128)]
    fine = [r.ratio for r in blowup_family(lap, [1.0], eps, 1, target, 256)]
    assert all(b > a for a, b in zip(fine, fine[1:]))
    for a, b in zip(coarse, fine):
        assert abs(a - b) <= 0.05 * b


def test_blowup_preconditions():
    with pytest.raises(PreconditionError) as exc:
        blowup_family(GRAD2, [1.0, 0.0], [1 / 64], size=64)
    assert exc.value.name == "resolvable"
    with pytest.raises(PreconditionError) as exc:
        blowup_family(catalog_get("divergence", 2), [1.0], [1 / 8], size=64)
    assert exc.value.name == "elliptic"
    with pytest.raises(PreconditionError) as exc:
        blowup_family(GRAD2, [1.0], [1 / 8], size=64)
    assert exc.value.name == "witness"
    with pytest.raises(PreconditionError) as exc:
        blowup_family(GRAD2, [1.0, 0.0], [1 / 8], target="nope", size=64)
    assert exc.value.name == "target"


# -- circulation -------------------------------------------------------------

def test_constant_field_has_no_circulation():
    g = TorusGrid(2, 128)
    phi = g.field(np.tile([0.3, -0.7], g.shape + (1,)))
    assert abs(circulation_numerator(square_curve(), phi, 1 / 16)) <= 1e-12


def test_reversal_negates_circulation(rng):
    g = TorusGrid(2, 64)
    curve = square_curve()
    for _ in range(3):
        phi = random_bump(g, rng, 2)
        assert circulation_numerator(curve[::-1], phi, 1 / 16) == -circulation_numerator(curve, phi, 1 / 16)


def test_circulation_of_swirl_matches_area():
    # phi = (-y, x) / 2 near the curve circulates the enclosed area 1/4
    g = TorusGrid(2, 128)
    d = g.periodic_offset((0.5, 0.5))
    phi = g.field(np.stack([-d[..., 1], d[..., 0]], -1) / 2 * bump(g, (0.5, 0.5), 0.49, power=0.01).values
                  / np.exp(-0.01))
    num = circulation_numerator(square_curve(), phi, 1 / 16)
    assert num == pytest.approx(0.25, rel=0.02)


@pytest.mark.parametrize("curve,name", [
    (np.array([[0.3, 0.3], [0.6, 0.3], [0.6, 0.6]]), "closed_curve"),
    (np.array([[0.3, 0.3], [0.6, 0.3]]), "curve_shape"),
    (square_curve(side=0.95), "inside_cell"),
])
def test_curve_preconditions(curve, name):
    g = TorusGrid(2, 64)
    with pytest.raises(PreconditionError) as exc:
        circulation_ratio(curve, g.zeros(2), 1 / 16)
    assert exc.value.name == name


def test_circulation_zero_phi_warns():
    g = TorusGrid(2, 64)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        with pytest.raises(ZeroDenominatorWarning):
            circulation_ratio(square_curve(), g.zeros(2), 1 / 16)


def test_precondition_error_carries_name():
    err = PreconditionError("resolvable", "too small")
    assert err.name == "resolvable" and str(err) == "resolvable: too small"
    assert isinstance(err, ValueError)
    assert isinstance(GridField, type)
