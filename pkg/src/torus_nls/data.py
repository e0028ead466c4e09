"""Seeded initial data."""

from __future__ import annotations

import numpy as np
from scipy.optimize import brentq

from .diagnostics import energy, sobolev_norm
from .errors import InvalidInputError
from .spectral import Box, Grid, SpectralField, annulus_mask

SLOPE_MARGIN = 0.01


def _gaussians(rng, shape):
    # standard complex Gaussian: E|g|^2 = 1
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def random_data(grid: Grid, s: float, target_norm: float, seed: int) -> SpectralField:
    """uhat(k) = g_k <k>^(-s-3/2-0.01), rescaled to H^s norm ``target_norm``.

    The decay puts the field in H^s but in no H^(s+eps) uniformly in the grid.
    """
    if s < 0 or not target_norm > 0:
        raise InvalidInputError("need s >= 0 and target_norm > 0")
    rng = np.random.default_rng(seed)
    c = _gaussians(rng, grid.shape) * grid.japanese ** (-s - 1.5 - SLOPE_MARGIN)
    f = SpectralField(grid, c)
    return f * (target_norm / sobolev_norm(f, s))


def scale_to_energy(field: SpectralField, betas, p: float, target: float) -> SpectralField:
    """Rescale by a positive constant so that the energy equals ``target``."""
    if not target > 0:
        raise InvalidInputError("target energy must be positive")
    e = lambda lam: energy(field * lam, betas, p) - target  # noqa: E731
    hi = 1.0
    while e(hi) < 0:
        hi *= 2.0
    lam = brentq(e, 0.0, hi, xtol=1e-15, rtol=1e-15)
    return field * lam


def _phased(rng, shape, phases: str):
    g = _gaussians(rng, shape)
    if phases == "random":
        return g
    if phases == "coherent":
        # random moduli, aligned phases: the packet focuses at x = 0 at t = 0
        return np.abs(g)
    raise InvalidInputError(f"unknown phase model {phases!r}")


def annulus_data(grid: Grid, N: int, seed: int, phases: str = "coherent") -> SpectralField:
    """Unit-mass data supported on the dyadic annulus N/2 < |k| <= N."""
    mask = annulus_mask(grid, N) & ~grid.nyquist_mask
    if not mask.any():
        raise InvalidInputError(f"annulus at N={N} is empty on this grid")
    rng = np.random.default_rng(seed)
    c = np.where(mask, _phased(rng, grid.shape, phases), 0.0)
    f = SpectralField(grid, c)
    return f * (1.0 / np.sqrt(f.mass()))


def box_data(grid: Grid, box: Box, seed: int, phases: str = "coherent") -> SpectralField:
    """Unit-mass data supported on a frequency cuboid."""
    mask = box.mask(grid) & ~grid.nyquist_mask
    if not mask.any():
        raise InvalidInputError("box does not meet the grid lattice")
    rng = np.random.default_rng(seed)
    c = np.where(mask, _phased(rng, grid.shape, phases), 0.0)
    f = SpectralField(grid, c)
    return f * (1.0 / np.sqrt(f.mass()))


def plane_wave(grid: Grid, k, amplitude: complex) -> SpectralField:
    return SpectralField.single_mode(grid, k, amplitude)


def band_packet(grid: Grid, N: int, seed: int, phases: str = "coherent") -> SpectralField:
    """Unit-mass data on N < |k| <= 2N, the band where the symbol of D bends.

    With coherent phases and unit energy this is a scale-N focused packet,
    the kind of profile for which the modified energy moves the most.
    """
    ksq = grid.ksq
    mask = (ksq > N * N) & (ksq <= 4 * N * N) & ~grid.nyquist_mask
    if not mask.any():
        raise InvalidInputError(f"band N < |k| <= 2N is empty on this grid for N={N}")
    rng = np.random.default_rng(seed)
    c = np.where(mask, _phased(rng, grid.shape, phases), 0.0)
    f = SpectralField(grid, c)
    return f * (1.0 / np.sqrt(f.mass()))
