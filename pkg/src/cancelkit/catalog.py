"""Named operators with fixed basis conventions.

Conventions
-----------
* m-forms on R^n live in R^C(n, m) with the lexicographic basis of increasing
  index tuples ``dx_I``.
* Symmetric n x n matrices live in R^(n(n+1)/2): upper-triangle entries in
  row-major order, off-diagonal entries weighted by sqrt(2) so that the
  Euclidean norm of the vector equals the Frobenius norm of the matrix.
* Full k-tensors on R^n live in R^(n^k) in C order.
"""

from __future__ import annotations

from collections import defaultdict
from itertools import combinations, product
from math import comb, sqrt

import numpy as np

from .operators import Operator, OperatorError

__all__ = [
    "CATALOG",
    "catalog_get",
    "catalog_names",
    "parse_params",
    "load_operator",
    "form_basis",
    "sym_index",
    "sym_to_matrix",
    "matrix_to_sym",
]


def form_basis(n: int, m: int) -> list[tuple[int, ...]]:
    return list(combinations(range(n), m))


def sym_index(n: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(n) for j in range(i, n)]


def sym_to_matrix(vec, n: int) -> np.ndarray:
    vec = np.asarray(vec, dtype=float)
    out = np.zeros((n, n))
    for p, (i, j) in enumerate(sym_index(n)):
        if i == j:
            out[i, i] = vec[p]
        else:
            out[i, j] = out[j, i] = vec[p] / sqrt(2.0)
    return out


def matrix_to_sym(mat) -> np.ndarray:
    mat = np.asarray(mat, dtype=float)
    n = mat.shape[0]
    return np.array([mat[i, i] if i == j else sqrt(2.0) * 0.5 * (mat[i, j] + mat[j, i])
                     for i, j in sym_index(n)])


class _Builder:
    """Accumulates symbol contributions ``value * xi_{i1}...xi_{ik}`` at (row, col)."""

    def __init__(self, n, k, dim_v, dim_e):
        self.n, self.k, self.dim_v, self.dim_e = n, k, dim_v, dim_e
        self.terms = defaultdict(lambda: np.zeros((dim_e, dim_v)))

    def add(self, axes, row, col, value):
        alpha = [0] * self.n
        for i in axes:
            alpha[i] += 1
        self.terms[tuple(alpha)][row, col] += value

    def build(self, name):
        return Operator(self.n, self.k, self.dim_v, self.dim_e, dict(self.terms), name)


def _grad(n):
    return _dk_scalar(n, 1, name="grad")


def _dk_scalar(n, k, name=None):
    # A(xi) v = v xi^{(x)k}, the full tensor of k-th derivatives
    b = _Builder(n, k, 1, n ** k)
    for row, axes in enumerate(product(range(n), repeat=k)):
        b.add(axes, row, 0, 1.0)
    return b.build(name or f"dk_scalar(k={k})")


def _laplacian(n):
    b = _Builder(n, 2, 1, 1)
    for i in range(n):
        b.add((i, i), 0, 0, 1.0)
    return b.build("laplacian")


def _divergence(n):
    b = _Builder(n, 1, n, 1)
    for i in range(n):
        b.add((i,), 0, i, 1.0)
    return b.build("divergence")


def _sym_grad(n):
    # (xi v^T + v xi^T) / 2 in the weighted upper-triangle basis
    b = _Builder(n, 1, n, n * (n + 1) // 2)
    for row, (i, j) in enumerate(sym_index(n)):
        if i == j:
            b.add((i,), row, i, 1.0)
        else:
            w = sqrt(2.0) / 2.0
            b.add((i,), row, j, w)
            b.add((j,), row, i, w)
    return b.build("sym_grad")


def _wedge(i, I):
    """``dx_i ^ dx_I`` as (sign, sorted index tuple), or None if it vanishes."""
    if i in I:
        return None
    pos = sum(1 for j in I if j < i)
    return (-1.0) ** pos, tuple(sorted(I + (i,)))


def _interior(i, I):
    """Contraction of ``dx_I`` with ``e_i`` as (sign, tuple), or None."""
    if i not in I:
        return None
    pos = I.index(i)
    return (-1.0) ** pos, I[:pos] + I[pos + 1:]


def _hodge(n, m):
    if not 1 <= m <= n - 1:
        raise OperatorError(f"hodge requires 1 <= m <= n-1, got m={m}, n={n}")
    src = form_basis(n, m)
    up = {I: r for r, I in enumerate(form_basis(n, m + 1))}
    down = {I: r + len(up) for r, I in enumerate(form_basis(n, m - 1))}
    b = _Builder(n, 1, len(src), len(up) + len(down))
    for col, I in enumerate(src):
        for i in range(n):
            w = _wedge(i, I)
            if w is not None:
                b.add((i,), up[w[1]], col, w[0])
            c = _interior(i, I)
            if c is not None:
                # codifferential d* = -sum_i e_i _| d_i
                b.add((i,), down[c[1]], col, -c[0])
    return b.build(f"hodge(m={m})")


def _rot(n):
    # exterior derivative on 1-forms: (xi_i v_j - xi_j v_i)_{i<j}
    if n < 2:
        raise OperatorError("rot requires n >= 2")
    pairs = form_basis(n, 2)
    b = _Builder(n, 1, n, len(pairs))
    for row, (i, j) in enumerate(pairs):
        b.add((i,), row, j, 1.0)
        b.add((j,), row, i, -1.0)
    return b.build("rot")


def _curl3(n):
    if n != 3:
        raise OperatorError("curl3 is defined for n=3 only")
    b = _Builder(3, 1, 3, 3)
    for r in range(3):
        p, q = (r + 1) % 3, (r + 2) % 3
        b.add((p,), r, q, 1.0)
        b.add((q,), r, p, -1.0)
    return b.build("curl3")


def _saint_venant(n):
    # (L eps)_{ijkl} = d_kl eps_ij + d_ij eps_kl - d_kj eps_il - d_il eps_kj,
    # acting on eps given in the weighted symmetric basis
    sidx = {}
    for p, (i, j) in enumerate(sym_index(n)):
        w = 1.0 if i == j else 1.0 / sqrt(2.0)
        sidx[(i, j)] = sidx[(j, i)] = (p, w)
    b = _Builder(n, 2, len(sym_index(n)), n ** 4)
    for row, (i, j, k, l) in enumerate(product(range(n), repeat=4)):
        for axes, ent, sign in (((k, l), (i, j), 1.0), ((i, j), (k, l), 1.0),
                                ((k, j), (i, l), -1.0), ((i, l), (k, j), -1.0)):
            col, w = sidx[ent]
            b.add(axes, row, col, sign * w)
    return b.build("saint_venant")


def _dbar_power(n, j):
    # real 2x2 form of multiplication by (xi_1 + i xi_2)^j on C = R^2
    if n != 2:
        raise OperatorError("dbar_power is defined for n=2 only")
    if j < 1:
        raise OperatorError(f"dbar_power requires j >= 1, got {j}")
    b = _Builder(2, j, 2, 2)
    for a in range(j + 1):
        c = comb(j, a) * (1j) ** a
        axes = (0,) * (j - a) + (1,) * a
        for (r, col), val in (((0, 0), c.real), ((0, 1), -c.imag), ((1, 0), c.imag), ((1, 1), c.real)):
            if val:
                b.add(axes, r, col, val)
    return b.build(f"dbar_power(j={j})")


def _partial_slice(n):
    # gradient of the first component of an R^2-valued field; ignores e_2
    b = _Builder(n, 1, 2, n)
    for i in range(n):
        b.add((i,), i, 0, 1.0)
    return b.build("partial_slice")


# name -> (factory, parameter schema, defaults); every factory takes n first
CATALOG = {
    "grad": (_grad, {}, {"n": 2}),
    "dk_scalar": (_dk_scalar, {"k": "order >= 1"}, {"n": 2, "k": 2}),
    "laplacian": (_laplacian, {}, {"n": 2}),
    "sym_grad": (_sym_grad, {}, {"n": 2}),
    "hodge": (_hodge, {"m": "form degree, 1 <= m <= n-1"}, {"n": 3, "m": 1}),
    "divergence": (_divergence, {}, {"n": 2}),
    "rot": (_rot, {}, {"n": 2}),
    "curl3": (_curl3, {}, {"n": 3}),
    "saint_venant": (_saint_venant, {}, {"n": 2}),
    "dbar_power": (_dbar_power, {"j": "power >= 1 (n=2 only)"}, {"n": 2, "j": 1}),
    "partial_slice": (_partial_slice, {}, {"n": 2}),
}


def catalog_names() -> list[str]:
    return list(CATALOG)


def catalog_get(name: str, n: int | None = None, **params) -> Operator:
    """Build a named operator.

    >>> op = catalog_get("hodge", 4, m=2)
    >>> (op.k, op.dim_v, op.dim_e)
    (1, 6, 8)
    """
    try:
        factory, schema, defaults = CATALOG[name]
    except KeyError:
        raise OperatorError(f"unknown operator {name!r}; known: {', '.join(CATALOG)}") from None
    unknown = set(params) - set(schema)
    if unknown:
        raise OperatorError(f"{name} does not take parameters {sorted(unknown)}")
    if n is None:
        n = defaults["n"]
    args = {key: params.get(key, defaults[key]) for key in schema}
    for key, val in [("n", n), *args.items()]:
        if isinstance(val, bool) or int(val) != val:
            raise OperatorError(f"parameter {key} must be an integer, got {val!r}")
    if n < 1:
        raise OperatorError(f"n must be >= 1, got {n}")
    if name == "dk_scalar" and args["k"] < 1:
        raise OperatorError("dk_scalar requires k >= 1")
    return factory(int(n), **{key: int(v) for key, v in args.items()})


def parse_params(text: str) -> dict[str, int]:
    """Parse ``"n=4,m=2"`` into ``{"n": 4, "m": 2}``."""
    out = {}
    if not text:
        return out
    for item in text.split(","):
        key, sep, val = item.partition("=")
        if not sep or not key.strip():
            raise OperatorError(f"malformed parameter {item!r}; expected key=value")
        try:
            out[key.strip()] = int(val)
        except ValueError:
            raise OperatorError(f"parameter {key.strip()} must be an integer, got {val!r}") from None
    return out


def load_operator(ref: str) -> Operator:
    """Resolve ``catalog:NAME[:k=v,...]`` or a path to an operator JSON file.

    >>> load_operator("catalog:hodge:n=4,m=2").name
    'hodge(m=2)'
    """
    if ref.startswith("catalog:"):
        _, name, params = (ref.split(":", 2) + [""])[:3]
        args = parse_params(params)
        return catalog_get(name, args.pop("n", None), **args)
    from .operators import read_operator
    return read_operator(ref)
