"""Compatibility operators: ``L(D)`` with ``ker L(xi) = A(xi)[V]``.

For an injectively elliptic ``A`` with ``M(xi) = A(xi)^T A(xi)``,

    L(xi) = det M(xi) * id_E - A(xi) adj(M(xi)) A(xi)^T,

which is ``det M`` times the orthogonal projector onto the complement of the
image and is a homogeneous polynomial of degree ``2 k dim_v``.  Coefficients
are recovered by least squares on integer nodes and verified at fresh random
frequencies.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .classifier import SphereSampler, check_elliptic
from .operators import Operator, OperatorError, monomials, multi_indices, symbol_batch
from .subspace import DEFAULT_POLICY, TolerancePolicy, image, kernel, numerical_rank

__all__ = [
    "PolyMatrix",
    "CompatibilityError",
    "CompatibilityInfo",
    "compatibility_symbol",
    "build_compatibility",
    "verify_compatibility",
    "CompatibilityReport",
]

MARGIN_MIN = 1e-6
INTERP_TOL = 1e-8
ZERO_TOL = 1e-10
# round-off coefficients below this fraction of the largest are set to zero
SNAP_REL = 1e-13


class CompatibilityError(ValueError):
    """Non-elliptic input or a failed interpolation check."""

    def __init__(self, message, *, margin=None, worst_xi=None, residual=None):
        super().__init__(message)
        self.margin = margin
        self.worst_xi = worst_xi
        self.residual = residual


@dataclass(frozen=True, eq=False)
class PolyMatrix:
    """Matrix whose entries are homogeneous polynomials of one degree.

    ``coeffs`` is a stack aligned with ``alphas``: ``coeffs[j]`` multiplies
    ``xi^alphas[j]``.
    """

    n: int
    degree: int
    alphas: tuple
    coeffs: np.ndarray

    @property
    def shape(self):
        return self.coeffs.shape[1:]

    def __call__(self, xis) -> np.ndarray:
        xis = np.atleast_2d(np.asarray(xis, dtype=float))
        return np.einsum("ma,arc->mrc", monomials(self.alphas, xis), self.coeffs)

    @classmethod
    def from_operator(cls, op: Operator) -> "PolyMatrix":
        alphas = tuple(multi_indices(op.n, op.k))
        coeffs = np.stack([op.terms.get(a, np.zeros(op.shape)) for a in alphas])
        return cls(op.n, op.k, alphas, coeffs)

    def to_operator(self, name=None) -> Operator:
        rows, cols = self.shape
        terms = {a: c for a, c in zip(self.alphas, self.coeffs) if np.any(c != 0)}
        return Operator(self.n, self.degree, cols, rows, terms, name)


def _adjugate_sym(m: np.ndarray):
    """``det`` and ``adj`` of a stack of symmetric PSD matrices.

    ``adj(M) = sum_i (prod_{j != i} lambda_j) v_i v_i^T`` stays polynomial even
    where ``M`` is singular.
    """
    lam, vec = np.linalg.eigh(m)
    d = lam.shape[-1]
    det = np.prod(lam, axis=-1)
    others = np.stack([np.prod(np.delete(lam, i, axis=-1), axis=-1) for i in range(d)], axis=-1)
    adj = np.einsum("mij,mj,mkj->mik", vec, others, vec)
    return det, adj


def compatibility_symbol(op: Operator, xis) -> np.ndarray:
    """Direct evaluation of ``L(xi)`` at each row of ``xis``: ``(m, E, E)``."""
    a = symbol_batch(op, xis)
    det, adj = _adjugate_sym(np.einsum("mev,mew->mvw", a, a))
    eye = np.eye(op.dim_e)
    return det[:, None, None] * eye - np.einsum("mev,mvw,mfw->mef", a, adj, a)


def _integer_nodes(n: int, count: int) -> np.ndarray:
    """Nonzero integer vectors from the smallest centered box holding ``count``
    primitive directions (one representative per +-pair)."""
    radius = 1
    while True:
        pts = np.array(list(product(range(-radius, radius + 1), repeat=n)), dtype=float)
        pts = pts[np.any(pts != 0, axis=1)]
        # keep one of each antipodal pair: the first nonzero entry positive
        first = pts[np.arange(len(pts)), np.argmax(pts != 0, axis=1)]
        pts = pts[first > 0]
        if len(pts) >= count:
            return pts
        radius += 1


@dataclass
class CompatibilityInfo:
    degree: int
    nodes: int
    monomials: int
    max_residual: float
    worst_xi: list
    pointwise_surjective: bool
    ellipticity_margin: float

    def to_dict(self):
        return dict(self.__dict__)


def build_compatibility(op: Operator, *, verify_points: int = 50, seed: int = 0,
                        return_info: bool = False, margin: float | None = None):
    """Construct the compatibility operator ``L(D)`` from ``E`` to ``E``.

    Parameters
    ----------
    op : Operator
        Injectively elliptic operator.
    verify_points : int
        Fresh random frequencies for the interpolation residual check.
    seed : int
        Seed for the verification frequencies.
    return_info : bool
        Also return a :class:`CompatibilityInfo`.
    margin : float, optional
        Known ellipticity margin; skips the sampled ellipticity check.

    Returns
    -------
    Operator, or (Operator, CompatibilityInfo)
        The zero operator (``is_zero``) when ``A(xi)`` is onto for every xi.

    Raises
    ------
    CompatibilityError
        Ellipticity margin at most 1e-6, or residual above
        ``1e-8 * ||L_direct(xi)||`` at some verification point.
    """
    if margin is None:
        margin = check_elliptic(op, SphereSampler(op.n, seed=seed)).margin \
            if op.dim_v <= op.dim_e else 0.0
    if margin <= MARGIN_MIN:
        raise CompatibilityError(
            f"operator is not injectively elliptic (margin {margin:.3e} <= {MARGIN_MIN:g})",
            margin=margin)

    degree = 2 * op.k * op.dim_v
    alphas = multi_indices(op.n, degree)
    nodes = _integer_nodes(op.n, 2 * len(alphas))
    values = compatibility_symbol(op, nodes).reshape(len(nodes), -1)
    vander = monomials(alphas, nodes)
    # rows rescaled to the unit sphere, columns to unit norm: same solution,
    # much better conditioning than raw integer powers
    row_scale = np.linalg.norm(nodes, axis=1) ** degree
    vander = vander / row_scale[:, None]
    col_scale = np.linalg.norm(vander, axis=0)
    sol, *_ = np.linalg.lstsq(vander / col_scale, values / row_scale[:, None], rcond=None)
    coeffs = (sol / col_scale[:, None]).reshape(len(alphas), op.dim_e, op.dim_e)
    biggest = np.abs(coeffs).max()
    coeffs[np.abs(coeffs) < SNAP_REL * biggest] = 0.0

    surjective = bool(np.all(np.linalg.norm(coeffs, axis=(1, 2)) < ZERO_TOL))
    name = f"compat({op.name})" if op.name else "compat"
    poly = PolyMatrix(op.n, degree, tuple(alphas), coeffs)

    rng = np.random.default_rng(np.random.SeedSequence([seed, 7]))
    fresh = rng.standard_normal((verify_points, op.n))
    direct = compatibility_symbol(op, fresh)
    recovered = np.zeros_like(direct) if surjective else poly(fresh)
    scale = np.linalg.norm(direct, axis=(1, 2))
    err = np.linalg.norm(recovered - direct, axis=(1, 2))
    if surjective:
        # the recovered operator is exactly zero, so check L_direct itself
        # against the scale of its two terms
        a = symbol_batch(op, fresh)
        scale = np.linalg.norm(a, axis=(1, 2)) ** (2 * op.dim_v)
    rel = err / np.where(scale > 0, scale, 1.0)
    worst = int(np.argmax(rel))
    if rel[worst] > INTERP_TOL:
        raise CompatibilityError(
            f"interpolation residual {rel[worst]:.3e} exceeds {INTERP_TOL:g} at xi={fresh[worst].tolist()}",
            worst_xi=fresh[worst].tolist(), residual=float(rel[worst]))

    if surjective:
        out = Operator.zero(op.n, degree, op.dim_e, op.dim_e, name)
    else:
        out = poly.to_operator(name)
    if not return_info:
        return out
    info = CompatibilityInfo(degree, len(nodes), len(alphas), float(rel[worst]),
                             fresh[worst].tolist(), surjective, float(margin))
    return out, info


@dataclass
class CompatibilityReport:
    trials: int
    annihilation: float        # max ||L A|| / (1 + ||L|| ||A||)
    rank_defect: int | None    # max |rank L - (dim_e - rank A)|; None when not checked
    projector_distance: float  # max ||P_ker L - P_im A||_2
    passed: bool

    def to_dict(self):
        return dict(self.__dict__)


def verify_compatibility(a: Operator, l: Operator, trials: int = 100, seed: int = 0,
                         pol: TolerancePolicy = DEFAULT_POLICY) -> CompatibilityReport:
    """Check ``L(xi) A(xi) = 0`` and ``ker L(xi) = A(xi)[V]`` at random unit xi.

    The rank check (ii) only runs when ``L`` maps ``E`` to ``E``; external
    operators into other spaces (curl, Saint-Venant) get checks (i) and (iii).
    """
    if l.n != a.n or l.dim_v != a.dim_e:
        raise OperatorError(
            f"shapes do not compose: L acts on R^{l.dim_v} over R^{l.n}, "
            f"A maps into R^{a.dim_e} over R^{a.n}")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 11]))
    xis = rng.standard_normal((trials, a.n))
    xis /= np.linalg.norm(xis, axis=1, keepdims=True)
    am = symbol_batch(a, xis)
    lm = symbol_batch(l, xis)
    same_space = l.dim_e == a.dim_e
    ann, proj, defect = 0.0, 0.0, 0
    for A, L in zip(am, lm):
        prod = np.linalg.norm(L @ A, 2)
        ann = max(ann, prod / (1.0 + np.linalg.norm(L, 2) * np.linalg.norm(A, 2)))
        if same_space:
            defect = max(defect, abs(numerical_rank(L, pol) - (a.dim_e - numerical_rank(A, pol))))
        pk = kernel(L, pol).projector
        pi = image(A, pol).projector
        proj = max(proj, float(np.linalg.norm(pk - pi, 2)))
    passed = ann <= 1e-8 and proj <= 1e-7 and (not same_space or defect == 0)
    return CompatibilityReport(trials, float(ann), defect if same_space else None, proj, passed)
