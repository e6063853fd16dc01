import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cancelkit.catalog import catalog_get
from cancelkit.classifier import (
    SphereSampler,
    check_cancelling,
    check_cocancelling,
    check_elliptic,
    check_weakly_cancelling,
    sphere_quadrature,
    weak_cancellation_residual,
)
from cancelkit.compatibility import build_compatibility
from cancelkit.operators import Operator, eval_symbol
from cancelkit.subspace import image

CATALOG_INSTANCES = [
    ("grad", 2, {}), ("grad", 3, {}), ("dk_scalar", 2, {"k": 2}), ("dk_scalar", 3, {"k": 2}),
    ("dk_scalar", 2, {"k": 3}), ("laplacian", 2, {}), ("laplacian", 3, {}), ("sym_grad", 2, {}),
    ("sym_grad", 3, {}), ("hodge", 3, {"m": 1}), ("hodge", 3, {"m": 2}), ("hodge", 4, {"m": 2}),
    ("dbar_power", 2, {"j": 1}), ("dbar_power", 2, {"j": 2}), ("divergence", 2, {}),
    ("divergence", 3, {}), ("rot", 2, {}), ("rot", 3, {}), ("curl3", 3, {}), ("saint_venant", 2, {}),
    ("partial_slice", 2, {}),
]


# -- sampler ----------------------------------------------------------------

@pytest.mark.parametrize("strategy", ["low-discrepancy", "uniform-random"])
def test_sampler_unit_norm_and_deterministic(strategy):
    s = SphereSampler(4, strategy=strategy, count_per_round=64, max_rounds=3, seed=9)
    a = np.concatenate(list(s.rounds()))
    b = np.concatenate(list(s.rounds()))
    assert a.shape == (192, 4)
    np.testing.assert_array_equal(a, b)
    assert np.abs(np.linalg.norm(a, axis=1) - 1).max() <= 1e-14
    assert not np.array_equal(s.fresh(), a[: len(s.fresh())])


def test_sampler_seed_changes_points():
    a = next(SphereSampler(3, seed=1).rounds())
    b = next(SphereSampler(3, seed=2).rounds())
    assert not np.array_equal(a, b)


def test_sampler_rejects_bad_strategy():
    with pytest.raises(ValueError):
        SphereSampler(2, strategy="grid")


# -- ellipticity --------------------------------------------------------------

def test_grad_elliptic_margin_one():
    v = check_elliptic(catalog_get("grad", 3))
    assert v.value == "holds" and v.margin == pytest.approx(1.0, abs=1e-12)
    assert not v.certified


def test_divergence_not_elliptic_with_witness_orthogonal_to_xi():
    v = check_elliptic(catalog_get("divergence", 2))
    assert v.value == "fails" and v.witness is not None
    xi = np.array(v.details["worst_xi"])
    assert abs(v.witness @ xi) <= 1e-10
    assert v.residual <= 1e-10


def test_hodge_margin_matches_svd_oracle():
    op = catalog_get("hodge", 3, m=1)
    v = check_elliptic(op)
    assert v.margin == pytest.approx(1.0, abs=1e-9)
    xis = np.concatenate(list(SphereSampler(3, max_rounds=1).rounds()))
    smin = np.array([np.linalg.svd(eval_symbol(op, x).matrix, compute_uv=False)[-1] for x in xis])
    np.testing.assert_allclose(smin, 1.0, atol=1e-12)


def test_ellipticity_refinement_finds_thin_degeneracy():
    # A(xi) = (xi_1 - 0.3 xi_2) (xi_1 + xi_2): vanishes on two lines only
    op = Operator(2, 2, 1, 1, {(2, 0): [[1.0]], (1, 1): [[0.7]], (0, 2): [[-0.3]]})
    assert check_elliptic(op).value == "fails"


# -- cancellation -------------------------------------------------------------

def test_hodge_2_4_cancelling_certified():
    v = check_cancelling(catalog_get("hodge", 4, m=2))
    assert v.value == "holds" and v.certified and v.witness is None


def test_laplacian_not_cancelling_witness_one():
    v = check_cancelling(catalog_get("laplacian", 2))
    assert v.value == "fails"
    np.testing.assert_allclose(v.witness, [1.0])
    assert v.residual <= 1e-8


def test_grad_cancelling_after_two_directions():
    v = check_cancelling(catalog_get("grad", 2))
    assert v.value == "holds" and v.samples_used >= 2 and v.trajectory[-1] == 0


def test_sym_grad_3_cancelling():
    assert check_cancelling(catalog_get("sym_grad", 3)).holds


@pytest.mark.parametrize("m", [1, 2])
def test_hodge_extreme_degrees_not_cancelling(m):
    op = catalog_get("hodge", 3, m=m)
    v = check_cancelling(op)
    assert v.value == "fails"
    # the witness lies in every image, checked on an independent stream
    for xi in SphereSampler(3, strategy="uniform-random", seed=77, count_per_round=64).fresh()[:64]:
        assert image(eval_symbol(op, xi)).contains(v.witness, atol=1e-8)


def test_dbar_not_cancelling():
    assert check_cancelling(catalog_get("dbar_power", 2, j=1)).value == "fails"


def test_divergence_cocancelling():
    for n in (2, 3, 4):
        assert check_cocancelling(catalog_get("divergence", n)).value == "holds"


def test_partial_slice_not_cocancelling_witness_e2():
    v = check_cocancelling(catalog_get("partial_slice", 2))
    assert v.value == "fails"
    np.testing.assert_allclose(v.witness, [0.0, 1.0], atol=1e-12)


def test_grad_as_l_cocancelling():
    assert check_cocancelling(catalog_get("grad", 3)).holds


def test_inconclusive_when_witness_fails_validation():
    # one sampled direction leaves span{xi_0}, which fresh directions reject
    v = check_cancelling(catalog_get("grad", 2), SphereSampler(2, count_per_round=1, max_rounds=1))
    assert v.value == "inconclusive"
    assert v.witness is None and v.residual > 1e-8


@pytest.mark.parametrize("name,n,params", CATALOG_INSTANCES)
def test_verdicts_deterministic_and_trajectory_monotone(name, n, params):
    op = catalog_get(name, n, **params)
    for check in (check_cancelling, check_cocancelling):
        a, b = check(op), check(op)
        assert a.to_dict() == b.to_dict()
        assert all(x >= y for x, y in zip(a.trajectory, a.trajectory[1:]))
        assert (a.witness is not None) == (a.value == "fails")
        assert a.margin >= 0


@settings(max_examples=15)
@given(st.sampled_from(CATALOG_INSTANCES), st.floats(0.01, 100.0), st.booleans())
def test_scalar_invariance(inst, c, negate):
    name, n, params = inst
    op = catalog_get(name, n, **params)
    c = -c if negate else c
    a, b = check_cancelling(op), check_cancelling(op.scaled(c))
    assert a.value == b.value
    if a.witness is not None:
        assert abs(abs(a.witness @ b.witness) - 1.0) <= 1e-9


@pytest.mark.parametrize("name,n,params", [i for i in CATALOG_INSTANCES
                                           if i[0] not in ("divergence", "rot", "curl3", "saint_venant",
                                                           "partial_slice")])
def test_cocancelling_compat_iff_cancelling(name, n, params):
    op = catalog_get(name, n, **params)
    l = build_compatibility(op)
    cancelling = check_cancelling(op).holds
    if l.is_zero:
        # pointwise surjective: the images are all of E, never cancelling
        assert not cancelling
        return
    assert check_cocancelling(l).holds == cancelling


# -- weak cancellation ----------------------------------------------------

def test_laplacian_weak_residual_is_two_pi():
    res, err = weak_cancellation_residual(catalog_get("laplacian", 2))
    assert res[0][1] == pytest.approx(2 * np.pi, abs=1e-6)
    assert err <= 1e-12


def test_dbar_square_weakly_cancelling():
    v = check_weakly_cancelling(catalog_get("dbar_power", 2, j=2))
    assert v.value == "holds" and v.residual < 1e-6


def test_grad_weak_residual_is_pi():
    res, _ = weak_cancellation_residual(catalog_get("grad", 2))
    for _, r in res:
        assert r == pytest.approx(np.pi, abs=1e-9)
    assert check_weakly_cancelling(catalog_get("grad", 2)).value == "fails"


def test_weak_cancellation_n3_quadrature():
    # |S^2| = 4 pi for the Laplacian in 3D (exponent n - k = 1): int xi / |xi|^2 = 0
    res, err = weak_cancellation_residual(catalog_get("laplacian", 3))
    assert res[0][1] <= 1e-10


def test_sphere_quadrature_area():
    for n, area in [(2, 2 * np.pi), (3, 4 * np.pi), (4, 2 * np.pi ** 2)]:
        nodes, w = sphere_quadrature(n, 32)
        assert w.sum() == pytest.approx(area, rel=1e-12)
        np.testing.assert_allclose(np.linalg.norm(nodes, axis=1), 1.0, atol=1e-14)


def test_weak_cancellation_preconditions():
    with pytest.raises(ValueError, match="n >= k"):
        weak_cancellation_residual(catalog_get("dk_scalar", 2, k=3))
    with pytest.raises(ValueError, match="elliptic"):
        weak_cancellation_residual(catalog_get("divergence", 2))
