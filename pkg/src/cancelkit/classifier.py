"""Injective ellipticity, cancellation, cocancellation and weak cancellation.

All checks discretize the quantifier over ``xi != 0`` by sampling the unit
sphere.  A cancellation "holds" verdict is a certificate: once a finite
intersection of images is ``{0}`` the full intersection is too.  A "fails"
verdict carries a witness revalidated on fresh directions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np
from scipy import optimize, stats
from scipy.special import roots_legendre

from .operators import Operator, symbol_batch
from .subspace import (
    DEFAULT_POLICY,
    Subspace,
    TolerancePolicy,
    intersect,
    intersect_gap,
    pinv_batch,
)

__all__ = [
    "SphereSampler",
    "Verdict",
    "check_elliptic",
    "check_cancelling",
    "check_cocancelling",
    "weak_cancellation_residual",
    "check_weakly_cancelling",
    "sphere_quadrature",
    "WITNESS_TOL",
    "VALIDATION_DIRECTIONS",
]

WITNESS_TOL = 1e-8
VALIDATION_DIRECTIONS = 256


@dataclass(frozen=True)
class SphereSampler:
    """Deterministic sampler of unit directions in R^n.

    With ``strategy="low-discrepancy"`` the first round is a scrambled Halton
    sequence pushed through the Gaussian quantile map; later rounds (and all
    rounds for ``"uniform-random"``) are normalized Gaussians.
    """

    n: int
    strategy: str = "low-discrepancy"
    count_per_round: int = 512
    max_rounds: int = 8
    seed: int = 0

    def __post_init__(self):
        if self.strategy not in ("low-discrepancy", "uniform-random"):
            raise ValueError(f"unknown sampling strategy {self.strategy!r}")
        if self.n < 1 or self.count_per_round < 1 or self.max_rounds < 1:
            raise ValueError("n, count_per_round and max_rounds must be positive")

    def _stream(self, tag: int) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence([self.seed & (2**64 - 1), tag]))

    def round(self, r: int) -> np.ndarray:
        """Points of round ``r`` as an array ``(count_per_round, n)``."""
        if r == 0 and self.strategy == "low-discrepancy":
            halton = stats.qmc.Halton(d=self.n, scramble=True, seed=self._stream(0))
            u = np.clip(halton.random(self.count_per_round), 1e-12, 1 - 1e-12)
            g = stats.norm.ppf(u)
        else:
            g = self._stream(r + 1).standard_normal((self.count_per_round, self.n))
        return _normalize(g)

    def rounds(self):
        for r in range(self.max_rounds):
            yield self.round(r)

    def fresh(self, count: int = VALIDATION_DIRECTIONS) -> np.ndarray:
        """Directions independent of every round, for witness validation."""
        return _normalize(self._stream(10_000).standard_normal((count, self.n)))


def _normalize(g: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(g, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    g = g / norms
    # second pass pulls the norms to within an ulp of one
    return g / np.linalg.norm(g, axis=1, keepdims=True)


@dataclass
class Verdict:
    """Outcome of one classification check.

    ``value`` is ``"holds"``, ``"fails"`` or ``"inconclusive"``.  ``margin`` is
    the smallest singular value found for ellipticity, the last intersection
    gap for (co)cancellation, and the quadrature error estimate for weak
    cancellation.
    """

    property: str
    value: str
    margin: float
    witness: np.ndarray | None = None
    samples_used: int = 0
    residual: float = 0.0
    certified: bool = False
    trajectory: list[int] = field(default_factory=list)
    details: dict = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return self.value == "holds"

    def to_dict(self) -> dict:
        return {
            "property": self.property,
            "value": self.value,
            "margin": float(self.margin),
            "witness": None if self.witness is None else [float(x) for x in self.witness],
            "samples_used": int(self.samples_used),
            "residual": float(self.residual),
            "certified": bool(self.certified),
            "trajectory": [int(t) for t in self.trajectory],
            "details": self.details,
        }


def _canonical_sign(v: np.ndarray) -> np.ndarray:
    """Flip ``v`` so its largest-magnitude entry (first on ties) is positive."""
    v = np.asarray(v, dtype=float)
    i = int(np.argmax(np.abs(v) > np.abs(v).max() * (1 - 1e-9)))
    return -v if v[i] < 0 else v


def _default_sampler(op: Operator, sampler):
    return sampler if sampler is not None else SphereSampler(op.n)


# -- ellipticity -----------------------------------------------------------

def _sigma_extremes(op: Operator, xis: np.ndarray):
    mats = symbol_batch(op, xis)
    s = np.linalg.svd(mats, compute_uv=False)
    smin = s[:, -1] if op.dim_v <= op.dim_e else np.zeros(len(xis))
    return smin, s[:, 0]


def check_elliptic(op: Operator, sampler: SphereSampler | None = None,
                   pol: TolerancePolicy = DEFAULT_POLICY, refine: bool = True) -> Verdict:
    """Sampled test of ``ker A(xi) = {0}`` on the unit sphere.

    ``sigma_min(A(xi))`` is compared with the largest ``sigma_max`` seen over
    all samples, so the test is scale invariant and also sees degeneracies of
    scalar symbols.  The worst sampled directions are polished by a
    Nelder-Mead search so that zeros on thin sets of the sphere are not missed
    by sampling alone.  The verdict is never certified.
    """
    sampler = _default_sampler(op, sampler)
    xis = np.concatenate(list(sampler.rounds()))
    smin, smax = _sigma_extremes(op, xis)
    scale = float(smax.max())
    ratio = smin / scale if scale > 0 else np.zeros_like(smin)
    worst = int(np.argmin(ratio))
    best_xi, best_ratio, best_smin = xis[worst], ratio[worst], smin[worst]
    evaluations = len(xis)

    if refine and best_ratio > pol.rank_rel_tol and op.dim_v <= op.dim_e:
        def f(x):
            nx = np.linalg.norm(x)
            if nx == 0:
                return 1.0
            return float(_sigma_extremes(op, (x / nx)[None, :])[0][0]) / scale

        for start in np.argsort(ratio, kind="stable")[:3]:
            res = optimize.minimize(f, xis[start], method="Nelder-Mead",
                                    options={"xatol": 1e-12, "fatol": 1e-16, "maxiter": 400 * op.n})
            evaluations += int(res.nfev)
            if res.fun < best_ratio:
                x = res.x / np.linalg.norm(res.x)
                s = _sigma_extremes(op, x[None, :])[0][0]
                best_xi, best_ratio, best_smin = x, s / scale, s

    details = {"worst_xi": [float(x) for x in best_xi], "relative_margin": float(best_ratio)}
    if best_ratio > pol.rank_rel_tol:
        return Verdict("elliptic", "holds", float(best_smin), samples_used=evaluations, details=details)
    mat = symbol_batch(op, best_xi[None, :])[0]
    _, _, vt = np.linalg.svd(mat, full_matrices=True)
    witness = _canonical_sign(vt[-1])
    residual = float(np.linalg.norm(mat @ witness))
    return Verdict("elliptic", "fails", float(max(best_smin, 0.0)), witness=witness,
                   samples_used=evaluations, residual=residual, details=details)


# -- cancellation / cocancellation -----------------------------------------

def _subspaces(mats: np.ndarray, which: str, tol: float):
    """Image or kernel subspaces for a stack of matrices."""
    u, s, vt = np.linalg.svd(mats, full_matrices=True)
    for m in range(mats.shape[0]):
        sm = s[m]
        cut = tol * sm[0] if sm.size and sm[0] > 0 else np.inf
        r = int(np.sum(sm > cut))
        if which == "image":
            yield Subspace(mats.shape[1], u[m][:, :r], tol)
        else:
            yield Subspace(mats.shape[2], vt[m][r:].T, tol)


def _running_intersection(op: Operator, which: str, prop: str, sampler, pol) -> Verdict:
    sampler = _default_sampler(op, sampler)
    ambient = op.dim_e if which == "image" else op.dim_v
    current = None
    trajectory = []
    used = 0
    gap = 0.0
    for pts in sampler.rounds():
        mats = symbol_batch(op, pts)
        for sub in _subspaces(mats, which, pol.rank_rel_tol):
            used += 1
            if current is None:
                current = sub
            else:
                gap = intersect_gap(current, sub)
                current = intersect(current, sub, pol)
            if not trajectory or trajectory[-1] != current.dim:
                trajectory.append(current.dim)
            if current.dim == 0:
                return Verdict(prop, "holds", gap, samples_used=used, certified=True,
                               trajectory=trajectory)

    # the intersection survived every round: validate a witness
    witness = _canonical_sign(current.basis[:, 0])
    fresh = symbol_batch(op, sampler.fresh())
    residuals = []
    for sub in _subspaces(fresh, which, pol.rank_rel_tol):
        residuals.append(np.linalg.norm(witness - sub.projector @ witness))
    residual = float(max(residuals))
    value = "fails" if residual <= WITNESS_TOL else "inconclusive"
    return Verdict(prop, value, 0.0, witness=witness if value == "fails" else None,
                   samples_used=used + len(residuals), residual=residual,
                   trajectory=trajectory, details={"intersection_dim": current.dim})


def check_cancelling(op: Operator, sampler: SphereSampler | None = None,
                     pol: TolerancePolicy = DEFAULT_POLICY) -> Verdict:
    """Is the intersection of the images ``A(xi)[V]`` over ``xi != 0`` trivial?"""
    return _running_intersection(op, "image", "cancelling", sampler, pol)


def check_cocancelling(op: Operator, sampler: SphereSampler | None = None,
                       pol: TolerancePolicy = DEFAULT_POLICY) -> Verdict:
    """Is the intersection of the kernels ``ker L(xi)`` over ``xi != 0`` trivial?"""
    return _running_intersection(op, "kernel", "cocancelling", sampler, pol)


# -- weak cancellation -----------------------------------------------------

def _sphere_area(n: int) -> float:
    from math import gamma, pi
    return 2 * pi ** (n / 2) / gamma(n / 2)


def sphere_quadrature(n: int, points: int, seed: int = 0):
    """Nodes and weights on the unit sphere of R^n.

    n=1: the two points +-1.  n=2: ``points`` equispaced angles (trapezoid,
    spectrally accurate for smooth periodic integrands).  n=3: Gauss-Legendre
    in ``cos(theta)`` times ``2 * points`` equispaced azimuths.  n>=4:
    ``points`` Gaussian directions together with their antipodes, equal
    weights.
    """
    if n == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    if n == 2:
        t = 2 * np.pi * np.arange(points) / points
        return np.column_stack([np.cos(t), np.sin(t)]), np.full(points, 2 * np.pi / points)
    if n == 3:
        z, wz = roots_legendre(points)
        phi = 2 * np.pi * np.arange(2 * points) / (2 * points)
        zz, pp = np.meshgrid(z, phi, indexing="ij")
        r = np.sqrt(1 - zz ** 2)
        nodes = np.column_stack([(r * np.cos(pp)).ravel(), (r * np.sin(pp)).ravel(), zz.ravel()])
        w = (wz[:, None] * np.full(2 * points, np.pi / points)[None, :]).ravel()
        return nodes, w
    g = _normalize(np.random.default_rng(seed).standard_normal((points, n)))
    nodes = np.concatenate([g, -g])
    return nodes, np.full(2 * points, _sphere_area(n) / (2 * points))


def _tensor_terms(op: Operator, nodes, weights) -> np.ndarray:
    """Weighted integrand per node: ``(m, dim_e, n^(n-k) * dim_v)``.

    Row ``e`` holds the flattened ``xi^{(x)(n-k)} (x) A^dagger(xi) e``.
    """
    p = op.n - op.k
    pinv = pinv_batch(symbol_batch(op, nodes))          # (m, v, e)
    tens = np.ones((len(nodes), 1))
    for _ in range(p):
        tens = (tens[:, :, None] * nodes[:, None, :]).reshape(len(nodes), -1)
    terms = np.einsum("m,mt,mve->metv", weights, tens, pinv)
    return terms.reshape(len(nodes), op.dim_e, -1)


def weak_cancellation_residual(op: Operator, quad_points: int = 64, seed: int = 0):
    """Spherical moments ``int_{S^{n-1}} xi^{(x)(n-k)} (x) A^dagger(xi)[e]``.

    For n >= 4 the Monte Carlo rule uses ``64 * quad_points`` antipodal pairs.

    Returns
    -------
    residuals : list of (ndarray, float)
        One ``(e, norm)`` pair per standard basis vector ``e`` of ``E``.
    error_estimate : float
        Difference to the same rule at half resolution (n <= 3) or the
        Monte Carlo standard error (n >= 4), maximized over ``e``.

    Raises
    ------
    ValueError
        If ``n < k``, or the operator is not injectively elliptic.
    """
    if op.n < op.k:
        raise ValueError(f"weak cancellation needs n >= k (got n={op.n}, k={op.k})")
    v = check_elliptic(op, SphereSampler(op.n, count_per_round=256, max_rounds=2, seed=seed), refine=False)
    if not v.holds or v.margin <= 1e-6:
        raise ValueError(f"operator is not injectively elliptic (margin {v.margin:.3e})")
    if op.n <= 3:
        nodes, w = sphere_quadrature(op.n, quad_points, seed)
        full = _tensor_terms(op, nodes, w).sum(axis=0)
        nodes2, w2 = sphere_quadrature(op.n, max(quad_points // 2, 2), seed)
        half = _tensor_terms(op, nodes2, w2).sum(axis=0)
        err = float(np.linalg.norm(full - half, axis=1).max())
    else:
        nodes, w = sphere_quadrature(op.n, 64 * quad_points, seed)
        terms = _tensor_terms(op, nodes, w)
        m = len(nodes) // 2
        # each antipodal pair, rescaled, is one unbiased estimate of the integral
        pairs = (terms[:m] + terms[m:]) * m
        full = pairs.mean(axis=0)
        err = float(np.linalg.norm(pairs.std(axis=0), axis=1).max() / np.sqrt(m))
    eye = np.eye(op.dim_e)
    return [(eye[i], float(np.linalg.norm(full[i]))) for i in range(op.dim_e)], err


def check_weakly_cancelling(op: Operator, quad_points: int = 64, seed: int = 0,
                            atol: float = 1e-6) -> Verdict:
    """Weakly cancelling when every residual is below ``error_estimate + atol``."""
    res, err = weak_cancellation_residual(op, quad_points, seed)
    norms = np.array([r for _, r in res])
    worst = int(np.argmax(norms))
    holds = norms[worst] < err + atol
    return Verdict(
        "weakly_cancelling", "holds" if holds else "fails", err,
        witness=None if holds else res[worst][0],
        samples_used=quad_points, residual=float(norms[worst]), certified=False,
        details={"residuals": [float(r) for r in norms], "exponent": op.n - op.k},
    )
