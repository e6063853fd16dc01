"""Inequality experiments on the torus.

Every ratio here is ``LHS / RHS`` of a homogeneous estimate, so only its
boundedness (or growth) along a family of fields is meaningful; the constants
measured on the torus are not those of the whole space.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from ..classifier import SphereSampler, check_elliptic
from ..operators import Operator, OperatorError, symbol_batch
from ..subspace import pinv_batch
from ._kernels import gagliardo_sum
from .fields import mollifier
from .grid import (
    GridField,
    TorusGrid,
    apply_operator,
    derivative_tensor,
    forward,
    inverse,
    lp_norm,
)

__all__ = [
    "PreconditionError",
    "ZeroDenominatorWarning",
    "reconstruction_check",
    "symbol_bound",
    "p2_sharp_check",
    "sobolev_ratio",
    "hardy_ratio",
    "uniform_ratio",
    "fractional_ratio",
    "gagliardo_seminorm",
    "duality_ratio",
    "blowup_field",
    "blowup_family",
    "BlowupRow",
    "divfree_witness_growth",
    "log_test_function",
    "tangent_measure",
    "circulation_ratio",
    "circulation_numerator",
    "curve_length",
    "square_curve",
    "circulation_suite",
    "boundary_fraction",
]

ELLIPTIC_MIN = 1e-6
KERNEL_TOL = 1e-8
DIVFREE_TOL = 1e-6
SCALING_TOL = 1e-12
MEAN_TOL = 1e-10
FRACTIONAL_MAX_N = 48


class PreconditionError(ValueError):
    """A named precondition of an experiment is violated."""

    def __init__(self, name: str, message: str):
        super().__init__(f"{name}: {message}")
        self.name = name


class ZeroDenominatorWarning(RuntimeWarning):
    """The right-hand side of a ratio vanished; the ratio is reported as NaN."""


def _ratio(num: float, den: float) -> float:
    if den == 0.0:
        warnings.warn("zero denominator", ZeroDenominatorWarning, stacklevel=3)
        return float("nan")
    return float(num / den)


def _require_elliptic(op: Operator):
    v = check_elliptic(op, SphereSampler(op.n, count_per_round=256, max_rounds=2), refine=False)
    if v.details["relative_margin"] <= ELLIPTIC_MIN:
        raise PreconditionError(
            "elliptic", f"ellipticity margin {v.details['relative_margin']:.3e} <= {ELLIPTIC_MIN:g}")


def _require_resolvable(grid: TorusGrid, eps: float):
    if eps < 2 * grid.h:
        raise PreconditionError("resolvable", f"epsilon {eps} < 2h = {2 * grid.h} on N={grid.size}")


def _check_fit(op: Operator, u: GridField):
    if u.grid.n != op.n:
        raise OperatorError(f"operator acts on R^{op.n}, grid is {u.grid.n}-dimensional")
    if u.dim != op.dim_v:
        raise OperatorError(f"field has fiber dimension {u.dim}, operator expects {op.dim_v}")


def boundary_fraction(u: GridField, band: float = 0.125) -> float:
    """L^2 mass of ``u`` within ``band`` of the cell boundary, relative to the total."""
    x = u.grid.coords
    near = np.any((x < band) | (x > 1.0 - band), axis=-1)
    mag = np.sum(u.values ** 2, axis=-1)
    total = mag.sum()
    return float(np.sqrt(mag[near].sum() / total)) if total > 0 else 0.0


# -- identities at p = 2 ---------------------------------------------------

def _tensor_power(xis: np.ndarray, k: int) -> np.ndarray:
    out = np.ones((len(xis), 1))
    for _ in range(k):
        out = (out[:, :, None] * xis[:, None, :]).reshape(len(xis), -1)
    return out


def reconstruction_check(op: Operator, u: GridField) -> float:
    """Relative L^2 gap between ``D^k u`` and ``xi^{(x)k} (x) A(xi)^+ [F(A(D) u)]``.

    Returns
    -------
    float
        Relative discrepancy, zero for the zero field.

    Raises
    ------
    PreconditionError
        ``elliptic`` or ``mean_zero``.
    """
    _check_fit(op, u)
    _require_elliptic(op)
    grid = u.grid
    spec = forward(u)
    scale = float(np.linalg.norm(spec))
    if np.linalg.norm(spec[0]) > MEAN_TOL * max(scale, 1e-300) and scale > 0:
        raise PreconditionError("mean_zero", "field has a nonzero mean")
    direct = derivative_tensor(u, op.k)
    au = forward(apply_operator(op, u))
    w = np.einsum("mve,me->mv", pinv_batch(symbol_batch(op, grid.freqs)), au)
    via = (w[:, :, None] * _tensor_power(grid.freqs, op.k)[:, None, :]).reshape(len(w), -1)
    via[grid.nyquist] = 0.0
    rebuilt = inverse(grid, via)
    ref = lp_norm(direct, 2)
    gap = lp_norm(rebuilt - direct, 2)
    return 0.0 if ref == 0.0 and gap == 0.0 else float(gap / ref)


def symbol_bound(op: Operator, seed: int = 0) -> float:
    """``max_{|w|=1} ||A(w)^+||_op = 1 / min sigma_min(A(w))`` by sampling plus polishing."""
    if op.dim_e < op.dim_v:
        raise PreconditionError("elliptic", f"symbol maps R^{op.dim_v} into R^{op.dim_e} and cannot be injective")
    sampler = SphereSampler(op.n, seed=seed)
    xis = np.concatenate(list(sampler.rounds()))
    smin = np.linalg.svd(symbol_batch(op, xis), compute_uv=False)[:, -1]

    def f(x):
        nx = np.linalg.norm(x)
        if nx == 0:
            return 0.0
        return float(np.linalg.svd(symbol_batch(op, (x / nx)[None, :]), compute_uv=False)[0, -1])

    best = float(smin.min())
    for start in np.argsort(smin, kind="stable")[:3]:
        res = optimize.minimize(f, xis[start], method="Nelder-Mead",
                                options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 400 * op.n})
        best = min(best, float(res.fun))
    if best <= 0:
        raise PreconditionError("elliptic", "symbol is not injective on the sphere")
    return 1.0 / best


def p2_sharp_check(op: Operator, trials: int = 20, seed: int = 0, size: int | None = None,
                   kmax: int = 4) -> tuple[float, float]:
    """Largest ``||D^k u||_2 / ||A(D) u||_2`` over random trigonometric fields,
    and the multiplier bound it may not exceed.

    The ``(2 pi)^k`` factors of both sides cancel, so the ratio is at most
    :func:`symbol_bound`.
    """
    from .fields import band_limited

    _require_elliptic(op)
    grid = TorusGrid(op.n, size if size is not None else (32 if op.n <= 2 else 16))
    bound = symbol_bound(op, seed)
    worst = 0.0
    for t in range(trials):
        rng = np.random.default_rng(np.random.SeedSequence([seed, 2, t]))
        u = band_limited(grid, op.dim_v, kmax, rng)
        worst = max(worst, _ratio(lp_norm(derivative_tensor(u, op.k), 2),
                                  lp_norm(apply_operator(op, u), 2)))
    return float(worst), float(bound)


# -- endpoint estimates ----------------------------------------------------

def _order_gap(op: Operator, ell: int, kind: str) -> int:
    gap = op.k - ell
    if ell < 0 or not 0 < gap < op.n:
        raise PreconditionError("exponent_range", f"{kind} needs 0 < k - ell < n, got k={op.k}, ell={ell}, n={op.n}")
    return gap


def sobolev_ratio(op: Operator, u: GridField, ell: int = 0) -> float:
    """``||D^ell u||_q / ||A(D) u||_1`` with ``q = n / (n - (k - ell))``.

    A zero right-hand side gives NaN together with a
    :class:`ZeroDenominatorWarning`.
    """
    _check_fit(op, u)
    gap = _order_gap(op, ell, "sobolev")
    q = op.n / (op.n - gap)
    return _ratio(lp_norm(derivative_tensor(u, ell), q), lp_norm(apply_operator(op, u), 1))


def hardy_ratio(op: Operator, u: GridField, ell: int = 0, center=None) -> float:
    """``int |D^ell u(x)| / |x - c|^{k - ell} dx / ||A(D) u||_1``.

    The default center is the midpoint of the central cell, so the weight is
    finite at every grid point.
    """
    _check_fit(op, u)
    gap = _order_gap(op, ell, "hardy")
    grid = u.grid
    c = grid.center if center is None else np.asarray(center, dtype=float)
    r = np.linalg.norm(grid.periodic_offset(c), axis=-1)
    if np.any(r == 0):
        raise PreconditionError("weight_center", "weight center lies on a grid point")
    mag = np.linalg.norm(derivative_tensor(u, ell).values, axis=-1)
    lhs = float(np.sum(mag / r ** gap) * grid.cell_volume)
    return _ratio(lhs, lp_norm(apply_operator(op, u), 1))


def uniform_ratio(op: Operator, u: GridField, ell: int) -> float:
    """``||D^ell u||_inf / ||A(D) u||_1``, requiring ``k - ell = n``."""
    _check_fit(op, u)
    if op.k - ell != op.n:
        raise PreconditionError("exponent_range", f"uniform estimate needs k - ell = n, got {op.k - ell}")
    return _ratio(lp_norm(derivative_tensor(u, ell), np.inf), lp_norm(apply_operator(op, u), 1))


def _gagliardo_power(w: GridField, sigma: float, p: float, jit) -> float:
    grid = w.grid
    idx = np.stack(np.meshgrid(*([np.arange(grid.size)] * grid.n), indexing="ij"), -1).reshape(-1, grid.n)
    total = gagliardo_sum(w.flat, idx, grid.size, grid.h, p, grid.n + sigma * p, jit=jit)
    return total * grid.cell_volume ** 2


def gagliardo_seminorm(w: GridField, sigma: float, p: float, *, extrapolate: bool = True,
                       jit=None) -> float:
    """``(int int |w(y) - w(x)|^p / |y - x|^{n + sigma p})^{1/p}`` with periodic distance.

    The lattice sum misses the diagonal, which costs ``O(h^{p(1 - sigma)})``.
    With ``extrapolate`` the sum is repeated on the ``2^n`` half-resolution
    subsamples of ``w`` (averaged, so grid translations act exactly) and the
    leading error is removed by Richardson extrapolation.
    """
    grid = w.grid
    fine = _gagliardo_power(w, sigma, p, jit)
    if not extrapolate:
        return float(fine ** (1.0 / p))
    if grid.size % 4:
        raise PreconditionError("grid_size", f"extrapolation needs N divisible by 4, got {grid.size}")
    half = TorusGrid(grid.n, grid.size // 2)
    coarse = []
    for off in np.ndindex(*([2] * grid.n)):
        sub = w.values[tuple(slice(o, None, 2) for o in off)]
        coarse.append(_gagliardo_power(GridField(half, sub), sigma, p, jit))
    gain = 2.0 ** (p * (1.0 - sigma))
    total = (gain * fine - float(np.mean(coarse))) / (gain - 1.0)
    return float(max(total, 0.0) ** (1.0 / p))


def fractional_ratio(op: Operator, u: GridField, ell: int, sigma: float, p: float, *,
                     extrapolate: bool = True, jit=None) -> float:
    """``[D^ell u]_{sigma, p} / ||A(D) u||_1`` under ``k - n = ell + sigma - n / p``.

    The seminorm is a direct double sum, ``O(N^{2n})``; grids above
    ``N = 48`` are refused.
    """
    _check_fit(op, u)
    if not 0.0 < sigma < 1.0:
        raise PreconditionError("exponent_range", f"sigma must lie in (0, 1), got {sigma}")
    if not 1.0 < p < np.inf:
        raise PreconditionError("exponent_range", f"p must lie in (1, inf), got {p}")
    if abs((op.k - op.n) - (ell + sigma - op.n / p)) > SCALING_TOL:
        raise PreconditionError(
            "scaling_relation", f"k - n = {op.k - op.n} but ell + sigma - n/p = {ell + sigma - op.n / p}")
    if u.grid.size > FRACTIONAL_MAX_N:
        raise PreconditionError("grid_size", f"direct double sum limited to N <= {FRACTIONAL_MAX_N}")
    semi = gagliardo_seminorm(derivative_tensor(u, ell), sigma, p, extrapolate=extrapolate, jit=jit)
    return _ratio(semi, lp_norm(apply_operator(op, u), 1))


# -- duality ---------------------------------------------------------------

def _kernel_residual(l: Operator, f: GridField) -> float:
    """``||L(xi / |xi|) f_hat(xi)|| / ||f_hat||`` over nonzero frequencies."""
    grid = f.grid
    spec = forward(f)
    unit = grid.freqs.copy()
    nz = np.any(unit != 0, axis=1)
    unit[nz] /= np.linalg.norm(unit[nz], axis=1, keepdims=True)
    lf = np.einsum("mev,mv->me", symbol_batch(l, unit), spec)
    lf[grid.nyquist] = 0.0
    total = float(np.linalg.norm(spec))
    return float(np.linalg.norm(lf)) / total if total > 0 else 0.0


def duality_ratio(l: Operator, f: GridField, phi: GridField, ell: int = 1) -> float:
    """``|int <f, phi>| / (||f||_1 ||D^ell phi||_{n / ell})`` for ``L(D) f = 0``.

    Raises
    ------
    PreconditionError
        ``kernel_constraint`` when ``L(D) f`` is not spectrally zero to
        ``1e-8`` relative, ``exponent_range`` unless ``1 <= ell <= n - 1``.
    """
    grid = f.grid
    if l.n != grid.n or f.dim != l.dim_v or phi.dim != f.dim:
        raise OperatorError("operator, f and phi do not fit together")
    if not 1 <= ell <= grid.n - 1:
        raise PreconditionError("exponent_range", f"ell must lie in 1..{grid.n - 1}, got {ell}")
    res = _kernel_residual(l, f)
    if res > KERNEL_TOL:
        raise PreconditionError("kernel_constraint", f"L(D)f residual {res:.3e} > {KERNEL_TOL:g}")
    num = abs(float(np.sum(f.values * phi.values)) * grid.cell_volume)
    den = lp_norm(f, 1) * lp_norm(derivative_tensor(phi, ell), grid.n / ell)
    return _ratio(num, den)


# -- blow-up families ------------------------------------------------------

@dataclass(frozen=True)
class BlowupRow:
    epsilon: float
    ratio: float
    source_perturbation: float   # L^1 size of the constant removed from the source


def blowup_field(op: Operator, e, grid: TorusGrid, eps: float) -> tuple[GridField, float]:
    """Mollified solution of ``A(D) u = e delta``: ``u_hat = (2 pi i)^{-k} A(xi)^+ e rho_eps_hat``.

    The zero frequency is dropped (mean-zero projection of the source); the
    size of what was dropped is returned with the field.
    """
    _require_resolvable(grid, eps)
    e = np.asarray(e, dtype=float)
    if e.shape != (op.dim_e,):
        raise PreconditionError("witness", f"witness must have length {op.dim_e}")
    rho = forward(mollifier(grid, eps))[:, 0]
    pinv = pinv_batch(symbol_batch(op, grid.freqs))
    spec = (2j * np.pi) ** (-op.k) * np.einsum("mve,e->mv", pinv, e) * rho[:, None]
    spec[0] = 0.0
    spec[grid.nyquist] = 0.0
    return inverse(grid, spec), float(np.linalg.norm(e) * abs(rho[0]))


def blowup_family(op: Operator, e, eps_list, ell: int = 0, target: str = "sobolev",
                  size: int = 256) -> list[BlowupRow]:
    """Ratio along the blow-up family for each scale in ``eps_list``.

    ``target`` is ``"sobolev"``, ``"hardy"`` or ``"uniform"``.
    """
    _require_elliptic(op)
    grid = TorusGrid(op.n, size)
    for eps in eps_list:
        _require_resolvable(grid, eps)
    fn = {"sobolev": sobolev_ratio, "hardy": hardy_ratio, "uniform": uniform_ratio}.get(target)
    if fn is None:
        raise PreconditionError("target", f"unknown target {target!r}")
    rows = []
    for eps in eps_list:
        u, pert = blowup_field(op, e, grid, eps)
        rows.append(BlowupRow(float(eps), fn(op, u, ell), pert))
    return rows


def _smooth_step(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def log_test_function(grid: TorusGrid, eps: float, center=None, inner: float = 0.1,
                      outer: float = 0.25) -> np.ndarray:
    """``log(1 / (|x - x0| + eps))`` times a smooth cutoff equal to one on
    ``|x - x0| < inner`` and zero beyond ``outer``."""
    c = grid.center if center is None else np.asarray(center, dtype=float)
    r = np.linalg.norm(grid.periodic_offset(c), axis=-1)
    a, b = _smooth_step(outer - r), _smooth_step(r - inner)
    cut = a / (a + b)
    return np.log(1.0 / (r + eps)) * cut


def divfree_witness_growth(eps_list, grid: TorusGrid, center=None) -> list[tuple[float, float]]:
    """Duality ratio for ``L = partial_slice`` on ``f = e_2 rho_eps`` against a
    capped logarithm, for each scale.

    ``L(D) f = grad f_1 = 0`` exactly, while the logarithm has bounded
    ``||D phi||_2`` growth only like ``sqrt(log(1/eps))``; the ratio grows.
    """
    from ..catalog import catalog_get

    if grid.n != 2:
        raise PreconditionError("dimension", "the slice witness is implemented for n=2")
    l = catalog_get("partial_slice", 2)
    out = []
    for eps in eps_list:
        _require_resolvable(grid, eps)
        rho = mollifier(grid, eps, center).values[..., 0]
        f = GridField(grid, np.stack([np.zeros_like(rho), rho], axis=-1))
        logf = log_test_function(grid, eps, center)
        phi = GridField(grid, np.stack([np.zeros_like(logf), logf], axis=-1))
        out.append((float(eps), duality_ratio(l, f, phi, 1)))
    return out


# -- circulation -----------------------------------------------------------

def square_curve(side: float = 0.5, center=(0.5, 0.5)) -> np.ndarray:
    """Counter-clockwise closed square, first vertex repeated at the end."""
    c = np.asarray(center, dtype=float)
    s = side / 2.0
    corners = np.array([[-s, -s], [s, -s], [s, s], [-s, s], [-s, -s]])
    return corners + c


def _segments(curve: np.ndarray):
    """Segments in a canonical order with canonical direction and a sign.

    Reversing the curve yields the same list with every sign flipped, so all
    downstream sums are negated exactly.
    """
    a, b = curve[:-1], curve[1:]
    flip = np.array([tuple(x) > tuple(y) for x, y in zip(a, b)])
    lo = np.where(flip[:, None], b, a)
    hi = np.where(flip[:, None], a, b)
    sign = np.where(flip, -1.0, 1.0)
    order = np.lexsort(tuple(np.concatenate([lo, hi], axis=1).T[::-1]))
    return lo[order], hi[order], sign[order]


def _check_curve(curve, grid: TorusGrid, eps: float) -> np.ndarray:
    curve = np.asarray(curve, dtype=float)
    if curve.ndim != 2 or curve.shape[1] != grid.n or len(curve) < 3:
        raise PreconditionError("curve_shape", f"curve must be a (K, {grid.n}) vertex list")
    if not np.array_equal(curve[0], curve[-1]):
        raise PreconditionError("closed_curve", "first and last vertices differ")
    if curve.min() < eps or curve.max() > 1.0 - eps:
        raise PreconditionError("inside_cell", "curve plus mollification radius leaves the cell")
    return curve


def tangent_measure(curve, grid: TorusGrid, eps: float) -> GridField:
    """Mollified tangent measure ``t H^1`` of a closed polyline.

    Each segment ``[a, b]`` with ``d = b - a`` and midpoint ``m`` contributes
    ``d exp(-2 pi i xi.m) sinc(xi.d)`` to the spectrum, exactly, before
    multiplication by the mollifier's spectrum.
    """
    _require_resolvable(grid, eps)
    curve = _check_curve(curve, grid, eps)
    lo, hi, sign = _segments(curve)
    xi = grid.freqs
    rho = forward(mollifier(grid, eps, np.zeros(grid.n)))[:, 0]
    spec = np.zeros((grid.points, grid.n), dtype=complex)
    for a, b, s in zip(lo, hi, sign):
        d = b - a
        m = 0.5 * (a + b)
        wave = np.exp(-2j * np.pi * (xi @ m)) * np.sinc(xi @ d)
        spec += s * wave[:, None] * d[None, :]
    spec *= rho[:, None]
    spec[0] = 0.0
    spec[grid.nyquist] = 0.0
    div = np.abs(np.sum(spec * xi, axis=1))
    size = np.linalg.norm(spec, axis=1) * np.linalg.norm(xi, axis=1)
    if np.linalg.norm(div) > DIVFREE_TOL * max(np.linalg.norm(size), 1e-300):
        raise PreconditionError("divergence_free", "rasterized tangent measure is not divergence free")
    return inverse(grid, spec)


def curve_length(curve) -> float:
    curve = np.asarray(curve, dtype=float)
    return float(np.sum(np.linalg.norm(np.diff(curve, axis=0), axis=1)))


def circulation_numerator(curve, phi: GridField, eps: float) -> float:
    """``int <f, phi>`` for the mollified tangent measure ``f``, signed."""
    f = tangent_measure(curve, phi.grid, eps)
    if phi.dim != f.dim:
        raise OperatorError(f"phi must be {f.dim}-vector valued")
    return float(np.sum(f.values * phi.values) * phi.grid.cell_volume)


def circulation_ratio(curve, phi: GridField, eps: float) -> float:
    """``|circulation of phi along the curve| / (length * ||D phi||_n)``."""
    num = abs(circulation_numerator(curve, phi, eps))
    return _ratio(num, curve_length(curve) * lp_norm(derivative_tensor(phi, 1), phi.grid.n))


def circulation_suite(grid: TorusGrid, curve, count: int = 20, seed: int = 0) -> list[GridField]:
    """Vector bumps sitting on the curve, alternately of constant direction and
    rotating about their center."""
    from .fields import bump

    curve = np.asarray(curve, dtype=float)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 5]))
    out = []
    for i in range(count):
        seg = rng.integers(len(curve) - 1)
        t = rng.uniform()
        c = curve[seg] + t * (curve[seg + 1] - curve[seg]) + rng.uniform(-0.04, 0.04, grid.n)
        radius = rng.uniform(0.08, 0.2)
        if i % 2 == 0:
            v = rng.standard_normal(grid.n)
            out.append(bump(grid, c, radius, v / np.linalg.norm(v)))
        else:
            prof = bump(grid, c, radius).values
            d = grid.periodic_offset(c) / radius
            swirl = np.stack([-d[..., 1], d[..., 0]], axis=-1) if grid.n == 2 else d
            out.append(GridField(grid, prof * swirl))
    return out
