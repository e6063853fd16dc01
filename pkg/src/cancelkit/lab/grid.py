"""Periodic grids on the unit torus and spectral calculus on them.

Fourier convention: ``u_hat(xi) = h^n * fftn(u)`` approximates
``int e^{-2 pi i xi.x} u(x) dx`` on integer frequencies ``xi``, so that
Parseval reads ``h^n sum |u|^2 = sum |u_hat|^2`` and ``d^alpha`` becomes the
multiplier ``(2 pi i xi)^alpha``.  Nyquist frequencies are zeroed by every
derivative multiplier so that real fields stay real.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ..operators import Operator, OperatorError, symbol_batch

__all__ = [
    "TorusGrid",
    "GridField",
    "forward",
    "inverse",
    "apply_operator",
    "derivative_tensor",
    "lp_norm",
    "operator_multiplier",
]

REAL_TOL = 1e-10


@dataclass(frozen=True)
class TorusGrid:
    """``N^n`` points ``x_j = j / N`` on ``[0, 1)^n``."""

    n: int
    size: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"dimension must be positive, got {self.n}")
        if self.size < 8 or self.size % 2:
            raise ValueError(f"grid size must be even and >= 8, got {self.size}")

    @property
    def h(self) -> float:
        return 1.0 / self.size

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.size,) * self.n

    @property
    def points(self) -> int:
        return self.size ** self.n

    @property
    def cell_volume(self) -> float:
        return self.h ** self.n

    @property
    def center(self) -> np.ndarray:
        """Midpoint of the central cell, never a grid point."""
        return np.full(self.n, 0.5 + 0.5 * self.h)

    @cached_property
    def coords(self) -> np.ndarray:
        """Grid coordinates, shape ``shape + (n,)``."""
        axes = np.arange(self.size) * self.h
        return np.stack(np.meshgrid(*([axes] * self.n), indexing="ij"), axis=-1)

    @cached_property
    def freqs(self) -> np.ndarray:
        """Integer frequencies in FFT order, shape ``(points, n)``."""
        k = np.fft.fftfreq(self.size, d=1.0 / self.size)
        mesh = np.meshgrid(*([k] * self.n), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    @cached_property
    def nyquist(self) -> np.ndarray:
        return np.any(self.freqs == -self.size // 2, axis=1)

    def periodic_offset(self, center) -> np.ndarray:
        """Minimal-image displacement ``x - center`` at every grid point."""
        d = self.coords - np.asarray(center, dtype=float)
        return d - np.round(d)

    def field(self, values) -> "GridField":
        return GridField(self, values)

    def zeros(self, dim: int = 1) -> "GridField":
        return GridField(self, np.zeros(self.shape + (dim,)))


@dataclass(frozen=True, eq=False)
class GridField:
    """A ``dim``-vector field sampled on a :class:`TorusGrid`.

    ``values`` has shape ``grid.shape + (dim,)``; a scalar array of shape
    ``grid.shape`` is promoted to ``dim = 1``.
    """

    grid: TorusGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape == self.grid.shape:
            v = v[..., None]
        if v.shape[:-1] != self.grid.shape or v.ndim != self.grid.n + 1:
            raise ValueError(f"values of shape {v.shape} do not fit grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field has non-finite entries")
        object.__setattr__(self, "values", v)

    @property
    def dim(self) -> int:
        return self.values.shape[-1]

    @property
    def flat(self) -> np.ndarray:
        """Values as ``(N^n, dim)``."""
        return self.values.reshape(-1, self.dim)

    def __mul__(self, c):
        return GridField(self.grid, self.values * c)

    __rmul__ = __mul__

    def __neg__(self):
        return GridField(self.grid, -self.values)

    def __add__(self, other):
        _same_grid(self, other)
        return GridField(self.grid, self.values + other.values)

    def __sub__(self, other):
        _same_grid(self, other)
        return GridField(self.grid, self.values - other.values)

    def roll(self, shift) -> "GridField":
        """Translate by integer grid steps."""
        return GridField(self.grid, np.roll(self.values, shift, axis=tuple(range(self.grid.n))))

    def spectrum(self) -> np.ndarray:
        return forward(self)


def _same_grid(a: GridField, b: GridField):
    if a.grid != b.grid:
        raise ValueError(f"grids differ: {a.grid} vs {b.grid}")


def forward(u: GridField) -> np.ndarray:
    """Spectrum ``h^n fftn(u)`` flattened to ``(N^n, dim)`` in FFT order."""
    axes = tuple(range(u.grid.n))
    return (np.fft.fftn(u.values, axes=axes) * u.grid.cell_volume).reshape(-1, u.dim)


def inverse(grid: TorusGrid, spec: np.ndarray, *, check_real: bool = True) -> GridField:
    """Field from a flattened spectrum; asserts the result is real."""
    dim = spec.shape[-1]
    axes = tuple(range(grid.n))
    vals = np.fft.ifftn(spec.reshape(grid.shape + (dim,)), axes=axes) / grid.cell_volume
    if check_real:
        scale = max(1.0, float(np.abs(vals.real).max(initial=0.0)))
        imag = float(np.abs(vals.imag).max(initial=0.0))
        if imag > REAL_TOL * scale:
            raise ValueError(f"inverse transform not real: max imaginary part {imag:.3e}")
    return GridField(grid, vals.real)


def operator_multiplier(op: Operator, grid: TorusGrid) -> np.ndarray:
    """``(2 pi i)^k A(xi)`` at every grid frequency, Nyquist rows zeroed."""
    if op.n != grid.n:
        raise OperatorError(f"operator acts on R^{op.n}, grid is {grid.n}-dimensional")
    mult = symbol_batch(op, grid.freqs).astype(complex) * (2j * np.pi) ** op.k
    mult[grid.nyquist] = 0.0
    return mult


def apply_operator(op: Operator, u: GridField) -> GridField:
    """``A(D) u`` computed spectrally.

    >>> import numpy as np
    >>> from cancelkit.catalog import catalog_get
    >>> g = TorusGrid(2, 16)
    >>> u = g.field(np.sin(2 * np.pi * g.coords[..., 0]))
    >>> du = apply_operator(catalog_get("grad", 2), u)
    >>> bool(np.allclose(du.values[..., 0], 2 * np.pi * np.cos(2 * np.pi * g.coords[..., 0])))
    True
    """
    if u.dim != op.dim_v:
        raise OperatorError(f"field has fiber dimension {u.dim}, operator expects {op.dim_v}")
    mult = operator_multiplier(op, u.grid)
    spec = np.einsum("mev,mv->me", mult, forward(u))
    return inverse(u.grid, spec)


def _derivative_spectrum(spec: np.ndarray, grid: TorusGrid, ell: int) -> np.ndarray:
    """Multiply by ``(2 pi i xi)^{(x) ell}``: ``(M, dim) -> (M, dim * n^ell)``."""
    if ell < 0:
        raise ValueError(f"derivative order must be >= 0, got {ell}")
    if ell == 0:
        return spec
    factor = 2j * np.pi * grid.freqs
    out = spec
    for _ in range(ell):
        out = (out[:, :, None] * factor[:, None, :]).reshape(spec.shape[0], -1)
    out[grid.nyquist] = 0.0
    return out


def derivative_tensor(u: GridField, ell: int) -> GridField:
    """All ``ell``-th partial derivatives, fiber ordered as ``(component, i_1, ..., i_ell)``."""
    if ell == 0:
        return u
    return inverse(u.grid, _derivative_spectrum(forward(u), u.grid, ell))


def lp_norm(u: GridField, p: float) -> float:
    """Riemann-sum ``L^p`` norm with Euclidean fiber norm; ``p=inf`` gives the max."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    mag = np.linalg.norm(u.values, axis=-1)
    if np.isinf(p):
        return float(mag.max())
    if p == 1:
        return float(mag.sum() * u.grid.cell_volume)
    if p == 2:
        return float(np.sqrt(np.sum(mag * mag) * u.grid.cell_volume))
    return float((np.sum(mag ** p) * u.grid.cell_volume) ** (1.0 / p))
