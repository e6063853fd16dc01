"""Homogeneous constant-coefficient differential operators and their symbols.

An operator of order ``k`` from ``V = R^dim_v`` to ``E = R^dim_e`` on ``R^n``
is stored as a map ``alpha -> A_alpha`` with ``|alpha| = k``; its symbol is

    A(xi) = sum_alpha A_alpha xi^alpha.

The ``(2 pi i)^k`` Fourier factor is deliberately left out of the symbol: all
classification algebra stays real and only :mod:`cancelkit.lab` applies it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from pathlib import Path
from typing import Mapping

import numpy as np

__all__ = [
    "FORMAT_VERSION",
    "OperatorError",
    "Operator",
    "SymbolMatrix",
    "multi_indices",
    "monomials",
    "eval_symbol",
    "symbol_batch",
    "read_operator",
    "write_operator",
    "operator_to_dict",
    "operator_from_dict",
]

FORMAT_VERSION = 1


class OperatorError(ValueError):
    """Invalid operator data or a dimension mismatch."""


def multi_indices(n: int, k: int) -> list[tuple[int, ...]]:
    """All multi-indices of length ``n`` and order ``k`` in lexicographic
    (descending first entry) order."""
    out = []
    for combo in combinations_with_replacement(range(n), k):
        alpha = [0] * n
        for i in combo:
            alpha[i] += 1
        out.append(tuple(alpha))
    return out


def monomials(alphas, xis: np.ndarray) -> np.ndarray:
    """Evaluate ``xi^alpha`` for every alpha at every row of ``xis``.

    Returns an array of shape ``(len(xis), len(alphas))``.
    """
    xis = np.atleast_2d(np.asarray(xis, dtype=float))
    alphas = np.asarray(alphas, dtype=int).reshape(-1, xis.shape[1])
    if alphas.size == 0:
        return np.ones((xis.shape[0], 0))
    kmax = int(alphas.max())
    # powers[p, m, i] = xis[m, i] ** p, built by repeated products so that
    # integer-valued inputs stay exact
    powers = np.empty((kmax + 1,) + xis.shape)
    powers[0] = 1.0
    for p in range(1, kmax + 1):
        powers[p] = powers[p - 1] * xis
    cols = np.arange(xis.shape[1])
    out = np.ones((xis.shape[0], alphas.shape[0]))
    for j, alpha in enumerate(alphas):
        for i in cols[alpha > 0]:
            out[:, j] *= powers[alpha[i], :, i]
    return out


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Operator:
    """A homogeneous constant-coefficient operator ``A(D) = sum A_alpha d^alpha``.

    Parameters
    ----------
    n : int
        Ambient dimension.
    k : int
        Order; every multi-index key has ``|alpha| = k``.
    dim_v, dim_e : int
        Dimensions of the source space ``V`` and the target space ``E``.
    terms : mapping
        ``alpha -> A_alpha`` with ``A_alpha`` of shape ``(dim_e, dim_v)``.
        Terms whose matrix is identically zero are dropped.  An empty map is
        the canonical zero operator (only produced by compatibility
        construction for pointwise-surjective symbols); a non-empty map must
        contain a nonzero matrix.
    name : str, optional
        Label used in reports.
    """

    n: int
    k: int
    dim_v: int
    dim_e: int
    terms: Mapping[tuple[int, ...], np.ndarray]
    name: str | None = None
    _alphas: tuple = field(init=False, repr=False)
    _stack: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        for attr in ("n", "k", "dim_v", "dim_e"):
            val = getattr(self, attr)
            if int(val) != val or val < 1:
                raise OperatorError(f"{attr} must be a positive integer, got {val!r}")
        clean = {}
        for alpha, mat in self.terms.items():
            alpha = tuple(int(a) for a in alpha)
            if len(alpha) != self.n:
                raise OperatorError(f"multi-index {alpha} has length {len(alpha)}, expected n={self.n}")
            if min(alpha) < 0:
                raise OperatorError(f"multi-index {alpha} has a negative entry")
            if sum(alpha) != self.k:
                raise OperatorError(f"multi-index {alpha} has order {sum(alpha)}, expected k={self.k}")
            mat = np.asarray(mat, dtype=float)
            if mat.shape != (self.dim_e, self.dim_v):
                raise OperatorError(
                    f"coefficient for {alpha} has shape {mat.shape}, expected {(self.dim_e, self.dim_v)}"
                )
            if not np.all(np.isfinite(mat)):
                raise OperatorError(f"coefficient for {alpha} is not finite")
            if alpha in clean:
                raise OperatorError(f"duplicate multi-index {alpha}")
            if np.any(mat != 0.0):
                clean[alpha] = _frozen(mat)
        if self.terms and not clean:
            raise OperatorError("all coefficient matrices are zero")
        alphas = tuple(sorted(clean, reverse=True))
        object.__setattr__(self, "terms", {a: clean[a] for a in alphas})
        object.__setattr__(self, "_alphas", alphas)
        stack = np.stack([clean[a] for a in alphas]) if alphas else np.zeros((0, self.dim_e, self.dim_v))
        stack.setflags(write=False)
        object.__setattr__(self, "_stack", stack)

    @classmethod
    def zero(cls, n: int, k: int, dim_v: int, dim_e: int, name: str | None = None) -> "Operator":
        """The canonical zero operator."""
        return cls(n, k, dim_v, dim_e, {}, name)

    @property
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def shape(self) -> tuple[int, int]:
        return (self.dim_e, self.dim_v)

    def scaled(self, c: float) -> "Operator":
        if c == 0:
            raise OperatorError("scaling by zero")
        return Operator(self.n, self.k, self.dim_v, self.dim_e,
                        {a: c * m for a, m in self.terms.items()}, self.name)

    def __add__(self, other: "Operator") -> "Operator":
        if (self.n, self.k, self.dim_v, self.dim_e) != (other.n, other.k, other.dim_v, other.dim_e):
            raise OperatorError("operators of different shape cannot be added")
        terms = dict(self.terms)
        for a, m in other.terms.items():
            terms[a] = terms[a] + m if a in terms else m
        return Operator(self.n, self.k, self.dim_v, self.dim_e, terms)

    def __eq__(self, other):
        if not isinstance(other, Operator):
            return NotImplemented
        return (
            (self.n, self.k, self.dim_v, self.dim_e, self.name)
            == (other.n, other.k, other.dim_v, other.dim_e, other.name)
            and self._alphas == other._alphas
            and all(np.array_equal(self.terms[a], other.terms[a]) for a in self._alphas)
        )

    __hash__ = None

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return (f"<Operator{label} n={self.n} k={self.k} V=R^{self.dim_v} "
                f"E=R^{self.dim_e} terms={len(self.terms)}>")


@dataclass(frozen=True)
class SymbolMatrix:
    """The symbol ``A(xi)`` evaluated at a single frequency."""

    xi: np.ndarray
    matrix: np.ndarray

    def __matmul__(self, v):
        return self.matrix @ v


def symbol_batch(op: Operator, xis) -> np.ndarray:
    """Evaluate the symbol at many frequencies at once.

    Parameters
    ----------
    op : Operator
    xis : array_like, shape (m, n)

    Returns
    -------
    ndarray, shape (m, dim_e, dim_v)
    """
    xis = np.atleast_2d(np.asarray(xis, dtype=float))
    if xis.shape[1] != op.n:
        raise OperatorError(f"frequency has length {xis.shape[1]}, operator acts on R^{op.n}")
    if op.is_zero:
        return np.zeros((xis.shape[0], op.dim_e, op.dim_v))
    mono = monomials(op._alphas, xis)
    return np.einsum("ma,aev->mev", mono, op._stack)


def eval_symbol(op: Operator, xi) -> SymbolMatrix:
    """Evaluate ``A(xi) = sum_alpha A_alpha xi^alpha``.

    >>> from cancelkit.catalog import catalog_get
    >>> eval_symbol(catalog_get("laplacian", 2), [3.0, 4.0]).matrix
    array([[25.]])
    """
    xi = np.asarray(xi, dtype=float)
    if xi.ndim != 1 or xi.shape[0] != op.n:
        raise OperatorError(f"frequency must be a vector of length {op.n}, got shape {xi.shape}")
    mat = symbol_batch(op, xi[None, :])[0]
    xi = xi.copy()
    xi.setflags(write=False)
    mat.setflags(write=False)
    return SymbolMatrix(xi, mat)


# -- serialization ---------------------------------------------------------

_FIELDS = {"version", "n", "k", "dim_v", "dim_e", "name", "terms"}
_REQUIRED = _FIELDS - {"name"}


def operator_to_dict(op: Operator) -> dict:
    doc = {
        "version": FORMAT_VERSION,
        "n": op.n,
        "k": op.k,
        "dim_v": op.dim_v,
        "dim_e": op.dim_e,
        "terms": [
            {"alpha": list(alpha), "matrix": mat.tolist()}
            for alpha, mat in op.terms.items()
        ],
    }
    if op.name is not None:
        doc["name"] = op.name
    return doc


def _check_int(doc, key):
    val = doc[key]
    if isinstance(val, bool) or not isinstance(val, int):
        raise OperatorError(f"field {key!r} must be an integer")
    return val


def operator_from_dict(doc: dict) -> Operator:
    if not isinstance(doc, dict):
        raise OperatorError("operator document must be a JSON object")
    unknown = set(doc) - _FIELDS
    if unknown:
        raise OperatorError(f"unknown fields: {sorted(unknown)}")
    missing = _REQUIRED - set(doc)
    if missing:
        raise OperatorError(f"missing fields: {sorted(missing)}")
    if doc["version"] != FORMAT_VERSION:
        raise OperatorError(f"unsupported format version {doc['version']!r}")
    n, k, dim_v, dim_e = (_check_int(doc, key) for key in ("n", "k", "dim_v", "dim_e"))
    name = doc.get("name")
    if name is not None and not isinstance(name, str):
        raise OperatorError("field 'name' must be a string")
    if not isinstance(doc["terms"], list):
        raise OperatorError("field 'terms' must be a list")
    terms = {}
    for t in doc["terms"]:
        if not isinstance(t, dict) or set(t) != {"alpha", "matrix"}:
            raise OperatorError("each term must have exactly the fields 'alpha' and 'matrix'")
        alpha = t["alpha"]
        if not isinstance(alpha, list) or not all(isinstance(a, int) and not isinstance(a, bool) for a in alpha):
            raise OperatorError(f"alpha must be a list of integers, got {alpha!r}")
        rows = t["matrix"]
        if not isinstance(rows, list) or not all(isinstance(r, list) for r in rows):
            raise OperatorError("matrix must be a list of rows")
        if len({len(r) for r in rows}) > 1:
            raise OperatorError("matrix rows have unequal lengths")
        try:
            mat = np.array(rows, dtype=float).reshape(len(rows), -1 if rows and rows[0] else 0)
        except (TypeError, ValueError) as exc:
            raise OperatorError(f"matrix entries must be numbers: {exc}") from None
        if tuple(alpha) in terms:
            raise OperatorError(f"duplicate multi-index {tuple(alpha)}")
        terms[tuple(alpha)] = mat
    return Operator(n, k, dim_v, dim_e, terms, name)


def write_operator(op: Operator, path) -> None:
    """Write ``op`` in the versioned JSON operator format."""
    text = json.dumps(operator_to_dict(op), sort_keys=True)
    Path(path).write_text(text + "\n", encoding="utf-8")


def read_operator(path) -> Operator:
    """Read an operator file; raises :class:`OperatorError` on malformed input."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise OperatorError(f"malformed operator file: {exc}") from None
    return operator_from_dict(doc)
