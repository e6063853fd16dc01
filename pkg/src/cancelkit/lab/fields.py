"""Test fields: compactly supported bumps, mollifiers, band-limited noise."""

from __future__ import annotations

from functools import lru_cache
from math import gamma, pi

import numpy as np
from scipy import integrate

from .grid import GridField, TorusGrid, _derivative_spectrum, forward, inverse

__all__ = [
    "bump_profile",
    "bump",
    "mollifier",
    "mollifier_mass_constant",
    "band_limited",
    "divfree_field",
    "bump_family",
    "random_bump",
]


def bump_profile(s: np.ndarray, power: float = 1.0) -> np.ndarray:
    """``exp(-power / (1 - s^2))`` for ``s < 1``, zero outside."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = s < 1.0
    out[inside] = np.exp(-power / (1.0 - s[inside] ** 2))
    return out


@lru_cache(maxsize=None)
def mollifier_mass_constant(n: int) -> float:
    """``int_{B_1} exp(-1/(1-|y|^2)) dy`` by radial quadrature."""
    radial, _ = integrate.quad(lambda r: r ** (n - 1) * np.exp(-1.0 / (1.0 - r * r)), 0.0, 1.0,
                               epsabs=1e-14, epsrel=1e-13)
    return 2 * pi ** (n / 2) / gamma(n / 2) * radial


def mollifier(grid: TorusGrid, eps: float, center=None) -> GridField:
    """Unit-mass bump ``eps^{-n} c rho(|x - center| / eps)`` of radius ``eps``.

    The constant comes from the continuous profile, so the discrete mass is
    one only up to quadrature error (below 1% once ``eps >= 4h``).
    """
    if eps < 2 * grid.h:
        raise ValueError(f"mollification scale {eps} is below two grid cells ({2 * grid.h})")
    center = grid.center if center is None else np.asarray(center, dtype=float)
    r = np.linalg.norm(grid.periodic_offset(center), axis=-1)
    vals = bump_profile(r / eps) / (mollifier_mass_constant(grid.n) * eps ** grid.n)
    return GridField(grid, vals)


def bump(grid: TorusGrid, center, radius: float, vector=(1.0,), power: float = 1.0,
         axes=None) -> GridField:
    """Vector-valued bump ``vector * exp(-power / (1 - |A(x - c)|^2 / radius^2))``.

    ``axes`` optionally stretches the coordinates (one factor per axis) to make
    anisotropic blobs.
    """
    d = grid.periodic_offset(center)
    if axes is not None:
        d = d / np.asarray(axes, dtype=float)
    s = np.linalg.norm(d, axis=-1) / radius
    prof = bump_profile(s, power)
    vec = np.asarray(vector, dtype=float)
    return GridField(grid, prof[..., None] * vec)


def _low_band(n: int, kmax: int) -> np.ndarray:
    k = np.arange(-kmax, kmax + 1)
    mesh = np.meshgrid(*([k] * n), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def band_limited(grid: TorusGrid, dim: int, kmax: int, rng: np.random.Generator,
                 decay: float = 1.0) -> GridField:
    """Real mean-zero trigonometric polynomial with frequencies ``|xi|_inf <= kmax``.

    The coefficients depend only on ``(dim, kmax, rng)``, never on the grid, so
    the same field is reproduced exactly on every grid with ``N > 2 kmax``.
    """
    if 2 * kmax >= grid.size:
        raise ValueError(f"band {kmax} not representable on N={grid.size}")
    lattice = _low_band(grid.n, kmax)
    amp = (1.0 + np.linalg.norm(lattice, axis=1)) ** (-decay)
    coef = (rng.standard_normal((len(lattice), dim)) + 1j * rng.standard_normal((len(lattice), dim)))
    coef *= amp[:, None]
    coef[np.all(lattice == 0, axis=1)] = 0.0
    spec = np.zeros(grid.shape + (dim,), dtype=complex)
    idx = tuple(lattice[:, i] % grid.size for i in range(grid.n))
    spec[idx] = coef
    # Re(sum c e^{2 pi i xi x}) on the grid
    vals = np.fft.ifftn(spec, axes=tuple(range(grid.n))).real * grid.points
    return GridField(grid, vals)


def divfree_field(grid: TorusGrid, kmax: int, rng: np.random.Generator) -> GridField:
    """Divergence-free field in n=2: the perpendicular gradient of a
    band-limited stream function."""
    if grid.n != 2:
        raise ValueError("divfree_field is implemented for n=2")
    psi = band_limited(grid, 1, kmax, rng)
    grad = _derivative_spectrum(forward(psi), grid, 1)     # (M, 2)
    perp = np.stack([-grad[:, 1], grad[:, 0]], axis=-1)
    return inverse(grid, perp)


def random_bump(grid: TorusGrid, rng: np.random.Generator, dim: int) -> GridField:
    """Bump with random center, radius and direction inside the central half."""
    center = 0.5 + rng.uniform(-0.08, 0.08, grid.n)
    radius = rng.uniform(0.1, 0.16)
    vec = rng.standard_normal(dim)
    return bump(grid, center, radius, vec / np.linalg.norm(vec))


def bump_family(grid: TorusGrid, dim: int = 1, vector=None) -> list[tuple[str, GridField]]:
    """Ten fixed compactly supported test fields inside the central half.

    Radial bumps of several radii and steepness, anisotropic blobs, and sums
    of two bumps.
    """
    c = grid.center
    vec = np.ones(dim) / np.sqrt(dim) if vector is None else np.asarray(vector, dtype=float)
    stretch = np.ones(grid.n)
    stretch[0] = 1.5
    off = np.zeros(grid.n)
    off[0] = 0.06
    members = [
        ("bump_r0.20", bump(grid, c, 0.20, vec)),
        ("bump_r0.15", bump(grid, c, 0.15, vec)),
        ("bump_r0.24", bump(grid, c, 0.24, vec)),
        ("bump_r0.20_p2", bump(grid, c, 0.20, vec, power=2.0)),
        ("bump_r0.20_p0.5", bump(grid, c, 0.20, vec, power=0.5)),
        ("blob_stretch1.5", bump(grid, c, 0.15, vec, axes=stretch)),
        ("blob_stretch0.75", bump(grid, c, 0.20, vec, axes=stretch / 2.0)),
        ("pair_close", bump(grid, c - off, 0.12, vec) + bump(grid, c + off, 0.12, vec)),
        ("pair_uneven", bump(grid, c - off, 0.14, vec) + 0.5 * bump(grid, c + off, 0.10, vec)),
        ("pair_offset", bump(grid, c + off / 2, 0.18, vec, power=1.5)),
    ]
    return members
