"""Tolerance-aware linear algebra on small dense symbol matrices."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .operators import SymbolMatrix

__all__ = [
    "TolerancePolicy",
    "Subspace",
    "SymbolNotInjective",
    "image",
    "kernel",
    "moore_penrose",
    "pinv_batch",
    "intersect",
    "projector",
    "numerical_rank",
]


@dataclass(frozen=True)
class TolerancePolicy:
    """Cutoffs for rank decisions.

    ``rank_rel_tol`` is relative to the largest singular value; an eigenvalue
    of ``P_a + P_b`` above ``2 - intersect_eig_tol`` marks a common direction.
    """

    rank_rel_tol: float = 1e-9
    intersect_eig_tol: float = 1e-9

    def __post_init__(self):
        for name in ("rank_rel_tol", "intersect_eig_tol"):
            val = getattr(self, name)
            if not 0.0 < val < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {val}")


DEFAULT_POLICY = TolerancePolicy()


class SymbolNotInjective(np.linalg.LinAlgError):
    """Raised by :func:`moore_penrose` on a rank-deficient symbol."""

    def __init__(self, sigma_min, xi=None):
        self.sigma_min = float(sigma_min)
        self.xi = xi
        super().__init__(f"symbol not injective at xi={None if xi is None else list(xi)}: sigma_min={sigma_min:.3e}")


@dataclass(frozen=True, eq=False)
class Subspace:
    """Orthonormal-basis representation of a subspace of R^ambient_dim.

    ``basis`` has shape ``(ambient_dim, dim)``; the zero space has ``dim == 0``.
    """

    ambient_dim: int
    basis: np.ndarray
    tol: float = DEFAULT_POLICY.rank_rel_tol

    def __post_init__(self):
        b = np.array(self.basis, dtype=float).reshape(self.ambient_dim, -1)
        if b.shape[1] > self.ambient_dim:
            raise ValueError("more basis vectors than the ambient dimension")
        b.setflags(write=False)
        object.__setattr__(self, "basis", b)

    @classmethod
    def zero(cls, ambient_dim: int, tol: float = DEFAULT_POLICY.rank_rel_tol) -> "Subspace":
        return cls(ambient_dim, np.zeros((ambient_dim, 0)), tol)

    @classmethod
    def full(cls, ambient_dim: int, tol: float = DEFAULT_POLICY.rank_rel_tol) -> "Subspace":
        return cls(ambient_dim, np.eye(ambient_dim), tol)

    @classmethod
    def span(cls, vectors, tol: float = DEFAULT_POLICY.rank_rel_tol) -> "Subspace":
        """Orthonormalized span of the columns of ``vectors``."""
        vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
        return _column_space(vectors, tol)

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @property
    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.T

    def contains(self, v, atol: float = 1e-8) -> bool:
        v = np.asarray(v, dtype=float)
        return np.linalg.norm(v - self.projector @ v) <= atol * max(1.0, np.linalg.norm(v))

    def __repr__(self):
        return f"<Subspace dim={self.dim} in R^{self.ambient_dim}>"


def _cutoff(s: np.ndarray, tol: float) -> float:
    return tol * s[0] if s.size and s[0] > 0 else np.inf


def numerical_rank(matrix, pol: TolerancePolicy = DEFAULT_POLICY) -> int:
    s = np.linalg.svd(np.asarray(matrix, dtype=float), compute_uv=False)
    return int(np.sum(s > _cutoff(s, pol.rank_rel_tol)))


def _column_space(mat: np.ndarray, tol: float) -> Subspace:
    u, s, _ = np.linalg.svd(mat, full_matrices=False)
    r = int(np.sum(s > _cutoff(s, tol)))
    return Subspace(mat.shape[0], u[:, :r], tol)


def _as_matrix(sm) -> np.ndarray:
    return np.asarray(sm.matrix if isinstance(sm, SymbolMatrix) else sm, dtype=float)


def image(sm, pol: TolerancePolicy = DEFAULT_POLICY) -> Subspace:
    """Column space of ``A(xi)``; a zero matrix gives the zero subspace."""
    return _column_space(_as_matrix(sm), pol.rank_rel_tol)


def kernel(sm, pol: TolerancePolicy = DEFAULT_POLICY) -> Subspace:
    """Null space of ``A(xi)`` from the trailing right singular vectors."""
    mat = _as_matrix(sm)
    _, s, vt = np.linalg.svd(mat, full_matrices=True)
    r = int(np.sum(s > _cutoff(s, pol.rank_rel_tol)))
    return Subspace(mat.shape[1], vt[r:].T, pol.rank_rel_tol)


def moore_penrose(sm, pol: TolerancePolicy = DEFAULT_POLICY) -> np.ndarray:
    """``A^dagger = (A^* A)^{-1} A^*`` for an injective symbol.

    Evaluated through the thin SVD, ``V diag(1/s) U^T``, which is the same
    matrix without squaring the condition number.

    Raises
    ------
    SymbolNotInjective
        If ``sigma_min <= rank_rel_tol * sigma_max`` or ``dim_v > dim_e``.
    """
    mat = _as_matrix(sm)
    u, s, vt = np.linalg.svd(mat, full_matrices=False)
    xi = sm.xi if isinstance(sm, SymbolMatrix) else None
    if mat.shape[1] > mat.shape[0]:
        raise SymbolNotInjective(0.0, xi)
    if s[-1] <= _cutoff(s, pol.rank_rel_tol):
        raise SymbolNotInjective(s[-1], xi)
    return (vt.T / s) @ u.T


def pinv_batch(mats: np.ndarray) -> np.ndarray:
    """Pseudoinverse of a stack ``(m, e, v)`` of injective matrices.

    Rank-deficient members (zero matrices at the zero frequency, say) get
    their small singular values dropped rather than raising.
    """
    u, s, vt = np.linalg.svd(mats, full_matrices=False)
    smax = s[:, :1]
    with np.errstate(divide="ignore"):
        inv = np.where(s > DEFAULT_POLICY.rank_rel_tol * smax, 1.0 / np.where(s > 0, s, 1.0), 0.0)
    return np.einsum("mij,mi,mki->mjk", vt, inv, u)


def projector(sub: Subspace) -> np.ndarray:
    return sub.projector


def intersect(a: Subspace, b: Subspace, pol: TolerancePolicy = DEFAULT_POLICY) -> Subspace:
    """Intersection via the top eigenspace of ``P_a + P_b``.

    Eigenvalues of ``P_a + P_b`` are ``1 + cos(theta)`` over principal angles,
    so the eigenvalue 2 eigenspace is exactly ``a & b``.
    """
    if a.ambient_dim != b.ambient_dim:
        raise ValueError(f"ambient dimensions differ: {a.ambient_dim} vs {b.ambient_dim}")
    tol = max(a.tol, b.tol)
    if a.dim == 0 or b.dim == 0:
        return Subspace.zero(a.ambient_dim, tol)
    w, v = np.linalg.eigh(a.projector + b.projector)
    keep = w > 2.0 - pol.intersect_eig_tol
    return Subspace(a.ambient_dim, v[:, keep], tol)


def intersect_gap(a: Subspace, b: Subspace) -> float:
    """``2 - lambda_max(P_a + P_b)``: zero when the spaces share a direction."""
    if a.dim == 0 or b.dim == 0:
        return 2.0
    return float(2.0 - np.linalg.eigvalsh(a.projector + b.projector)[-1])
