"""Hot loops with a numba path and a pure-numpy fallback.

``CANCELKIT_NUMBA=0`` (or ``false``/``off``/``no``) forces the numpy path;
otherwise numba is used when importable.  ``CANCELKIT_THREADS`` caps numba's
worker threads.  Both paths return per-row partial sums that are reduced
serially, so results do not depend on the thread schedule.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = [
    "NUMBA_AVAILABLE",
    "use_numba",
    "gagliardo_sum",
    "gagliardo_rows_numpy",
    "gagliardo_rows_numba",
    "splat",
    "splat_numpy",
    "splat_numba",
]


def _env_enabled() -> bool:
    return os.environ.get("CANCELKIT_NUMBA", "1").strip().lower() not in ("0", "false", "off", "no")


try:
    import numba
    from numba import njit, prange
    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - exercised only without numba
    NUMBA_AVAILABLE = False

if NUMBA_AVAILABLE:
    if "NUMBA_THREADING_LAYER" not in os.environ:
        # an outdated TBB only triggers a warning; try the others first
        numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
    _threads = os.environ.get("CANCELKIT_THREADS")
    if _threads:
        numba.set_num_threads(max(1, min(int(_threads), numba.config.NUMBA_NUM_THREADS)))


def use_numba() -> bool:
    return NUMBA_AVAILABLE and _env_enabled()


# -- Gagliardo double sum --------------------------------------------------
#
# rows[i] = sum_{j != i} |w_j - w_i|^p / dist(i, j)^s_exp with the periodic
# distance on the N^n lattice of spacing h.

def gagliardo_rows_numpy(vals, idx, size, h, p, s_exp):
    """Sum over lattice offsets: one vectorized pass per offset."""
    n = idx.shape[1]
    shape = (size,) * n
    field = vals.reshape(shape + (vals.shape[1],))
    rows = np.zeros(vals.shape[0])
    offsets = np.stack(np.meshgrid(*([np.arange(size)] * n), indexing="ij"), -1).reshape(-1, n)
    wrapped = np.where(offsets >= size // 2, offsets - size, offsets) * h
    dist = np.linalg.norm(wrapped, axis=1)
    axes = tuple(range(n))
    for off, d in zip(offsets[1:], dist[1:]):
        shifted = np.roll(field, tuple(-o for o in off), axis=axes)
        diff = np.linalg.norm(shifted - field, axis=-1).ravel()
        rows += diff ** p / d ** s_exp
    return rows


def _offset_weights(n, size, h, s_exp):
    """``|d|^{-s_exp}`` for every lattice offset ``d`` (periodic), zero at ``d = 0``."""
    k = np.arange(size)
    k = np.where(k >= size // 2, k - size, k) * h
    d2 = sum(np.meshgrid(*([k ** 2] * n), indexing="ij")).ravel()
    out = np.zeros_like(d2)
    out[1:] = d2[1:] ** (-0.5 * s_exp)
    return out


if NUMBA_AVAILABLE:
    @njit(parallel=True, cache=True)
    def _gagliardo_rows_jit(vals, idx, size, p, weights):
        m, dim = vals.shape
        n = idx.shape[1]
        rows = np.zeros(m)
        for i in prange(m):
            acc = 0.0
            for j in range(m):
                off = 0
                for a in range(n):
                    off = off * size + (idx[j, a] - idx[i, a]) % size
                wgt = weights[off]
                if wgt == 0.0:
                    continue
                diff2 = 0.0
                for c in range(dim):
                    t = vals[j, c] - vals[i, c]
                    diff2 += t * t
                if diff2 > 0.0:
                    acc += diff2 ** (0.5 * p) * wgt
            rows[i] = acc
        return rows


def gagliardo_rows_numba(vals, idx, size, h, p, s_exp):
    if not NUMBA_AVAILABLE:
        raise RuntimeError("numba is not installed")
    n = idx.shape[1]
    return _gagliardo_rows_jit(np.ascontiguousarray(vals, dtype=np.float64),
                               np.ascontiguousarray(idx, dtype=np.int64),
                               int(size), float(p), _offset_weights(n, int(size), float(h), float(s_exp)))


def gagliardo_sum(vals, idx, size, h, p, s_exp, *, jit=None) -> float:
    """``sum_{x != y} |w(y) - w(x)|^p / |y - x|^s_exp`` (without the ``h^{2n}``)."""
    jit = use_numba() if jit is None else jit
    rows = (gagliardo_rows_numba if jit else gagliardo_rows_numpy)(vals, idx, size, h, p, s_exp)
    return float(np.sum(rows))


# -- physical-space rasterization of weighted points ------------------------
#
# out[x] += w_q * eps^{-n} c rho(|x - y_q| / eps) for every point y_q, with
# rho(s) = exp(-1 / (1 - s^2)) on s < 1.

def _stencil(n, size, h, eps):
    reach = int(np.ceil(eps / h))
    ks = np.arange(-reach, reach + 1)
    return np.stack(np.meshgrid(*([ks] * n), indexing="ij"), -1).reshape(-1, n)


def splat_numpy(points, weights, size, h, eps, const):
    q, n = points.shape
    out = np.zeros((size ** n, weights.shape[1]))
    stencil = _stencil(n, size, h, eps)
    base = np.floor(points / h).astype(np.int64)
    cells = base[:, None, :] + stencil[None, :, :]              # (q, s, n)
    disp = cells * h - points[:, None, :]
    s = np.linalg.norm(disp, axis=-1) / eps
    inside = s < 1.0
    prof = np.zeros_like(s)
    prof[inside] = np.exp(-1.0 / (1.0 - s[inside] ** 2))
    prof *= const / eps ** n
    flat = np.zeros(cells.shape[:2], dtype=np.int64)
    for a in range(n):
        flat = flat * size + cells[..., a] % size
    for c in range(weights.shape[1]):
        out[:, c] = np.bincount(flat.ravel(), (prof * weights[:, c][:, None]).ravel(), minlength=size ** n)
    return out


if NUMBA_AVAILABLE:
    @njit(cache=True)
    def _splat_jit(points, weights, size, h, eps, const, stencil):
        q, n = points.shape
        dim = weights.shape[1]
        out = np.zeros((size ** n, dim))
        norm = const / eps ** n
        for i in range(q):
            for t in range(stencil.shape[0]):
                d2 = 0.0
                flat = 0
                for a in range(n):
                    cell = int(np.floor(points[i, a] / h)) + stencil[t, a]
                    d = cell * h - points[i, a]
                    d2 += d * d
                    flat = flat * size + cell % size
                s2 = d2 / (eps * eps)
                if s2 < 1.0:
                    val = norm * np.exp(-1.0 / (1.0 - s2))
                    for c in range(dim):
                        out[flat, c] += val * weights[i, c]
        return out


def splat_numba(points, weights, size, h, eps, const):
    if not NUMBA_AVAILABLE:
        raise RuntimeError("numba is not installed")
    n = points.shape[1]
    return _splat_jit(np.ascontiguousarray(points, dtype=np.float64),
                      np.ascontiguousarray(weights, dtype=np.float64),
                      int(size), float(h), float(eps), float(const),
                      _stencil(n, size, h, eps).astype(np.int64))


def splat(points, weights, size, h, eps, const, *, jit=None) -> np.ndarray:
    """Mollified weighted point cloud on the lattice, shape ``(size^n, dim)``."""
    jit = use_numba() if jit is None else jit
    return (splat_numba if jit else splat_numpy)(points, weights, size, h, eps, const)
