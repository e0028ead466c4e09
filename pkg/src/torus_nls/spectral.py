"""Truncated Fourier fields on the unit 3-torus.

Conventions (fixed package-wide):

* ``u(x) = sum_k uhat(k) exp(2 pi i k.x)`` on x in [0, 1)^3.
* ``analyze`` divides the FFT by M**3, so a single exponential has coefficient 1
  and Parseval reads ``sum |uhat|^2 == mean_x |u(x)|^2``.
* Coefficient arrays have shape (M, M, M) in DFT index order along every axis
  (index j holds wavenumber ``fftfreq(M, 1/M)[j]``).
* The Nyquist planes k_i = -M/2 are always zero, so the represented lattice is
  |k_i| <= M/2 - 1 = k_max.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
import scipy.fft as sfft

from .errors import InvalidInputError


def _is_pow2(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


@dataclass(frozen=True)
class Grid:
    modes_per_axis: int
    padded_factor: int = 2

    def __post_init__(self):
        M = self.modes_per_axis
        if int(M) != M or not _is_pow2(int(M)) or M < 2:
            raise InvalidInputError(f"modes_per_axis must be a power of two >= 2, got {M}")
        if int(self.padded_factor) != self.padded_factor or self.padded_factor < 1:
            raise InvalidInputError(f"padded_factor must be an integer >= 1, got {self.padded_factor}")

    @property
    def M(self) -> int:
        return self.modes_per_axis

    @property
    def k_max(self) -> int:
        return self.modes_per_axis // 2 - 1

    @property
    def shape(self) -> tuple[int, int, int]:
        M = self.modes_per_axis
        return (M, M, M)

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Integer wavenumbers along one axis, DFT order."""
        return np.fft.fftfreq(self.M, 1.0 / self.M).round().astype(np.int64)

    @cached_property
    def kvec(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Broadcastable integer wavenumber arrays (k1, k2, k3)."""
        w = self.wavenumbers
        return w[:, None, None], w[None, :, None], w[None, None, :]

    @cached_property
    def ksq(self) -> np.ndarray:
        """|k|^2 as an integer array of the full grid shape."""
        k1, k2, k3 = self.kvec
        return k1 * k1 + k2 * k2 + k3 * k3

    @cached_property
    def kabs(self) -> np.ndarray:
        return np.sqrt(self.ksq.astype(float))

    @cached_property
    def japanese(self) -> np.ndarray:
        """<k> = (1 + |k|^2)^(1/2)."""
        return np.sqrt(1.0 + self.ksq)

    @cached_property
    def nyquist_mask(self) -> np.ndarray:
        k1, k2, k3 = self.kvec
        n = -(self.M // 2)
        return (k1 == n) | (k2 == n) | (k3 == n)

    def q_symbol(self, betas) -> np.ndarray:
        """Q(k) = sum_i beta_i k_i^2 on the grid."""
        b1, b2, b3 = (float(x) for x in betas)
        k1, k2, k3 = self.kvec
        return b1 * k1 * k1 + b2 * k2 * k2 + b3 * k3 * k3

    def points(self, factor: int = 1) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Collocation points x_j = j / (factor*M), broadcastable."""
        P = self.M * factor
        x = np.arange(P) / P
        return x[:, None, None], x[None, :, None], x[None, None, :]


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Fourier coefficients of a field on the grid lattice.

    Treated as immutable: ``coeffs`` is a read-only array and every operation
    returns a new field.
    """

    grid: Grid
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=np.complex128)
        if c.shape != self.grid.shape:
            raise InvalidInputError(f"coefficient shape {c.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(c)):
            raise InvalidInputError("coefficients must be finite")
        c[self.grid.nyquist_mask] = 0.0
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, grid: Grid) -> "SpectralField":
        return cls(grid, np.zeros(grid.shape, dtype=np.complex128))

    @classmethod
    def single_mode(cls, grid: Grid, k, amplitude: complex = 1.0) -> "SpectralField":
        c = np.zeros(grid.shape, dtype=np.complex128)
        c[tuple(int(x) % grid.M for x in k)] = amplitude
        return cls(grid, c)

    def mass(self) -> float:
        return float(np.sum(np.abs(self.coeffs) ** 2))

    def inner(self, other: "SpectralField") -> complex:
        """<self, other> = sum conj(self) * other (equals the L^2(T^3) product)."""
        return complex(np.vdot(self.coeffs, other.coeffs))

    def replace(self, coeffs) -> "SpectralField":
        return SpectralField(self.grid, coeffs)

    def __add__(self, other):
        return self.replace(self.coeffs + other.coeffs)

    def __sub__(self, other):
        return self.replace(self.coeffs - other.coeffs)

    def __mul__(self, scalar):
        return self.replace(self.coeffs * scalar)

    __rmul__ = __mul__


# ---------------------------------------------------------------------------
# transforms


def analyze(samples, grid: Grid) -> SpectralField:
    samples = np.asarray(samples)
    if samples.shape != grid.shape:
        raise InvalidInputError(f"sample shape {samples.shape} does not match grid {grid.shape}")
    return SpectralField(grid, sfft.fftn(samples, workers=-1) / grid.M**3)


def synthesize(field: SpectralField) -> np.ndarray:
    return sfft.ifftn(field.coeffs, workers=-1) * field.grid.M**3


@lru_cache(maxsize=32)
def _pad_index(M: int, P: int):
    k = np.fft.fftfreq(M, 1.0 / M).round().astype(np.int64)
    return np.ix_(k % P, k % P, k % P)


def to_padded(coeffs: np.ndarray, factor: int) -> np.ndarray:
    """Values of the trigonometric polynomial on the (factor*M)^3 grid."""
    M = coeffs.shape[0]
    if factor == 1:
        return sfft.ifftn(coeffs, workers=-1) * M**3
    P = factor * M
    big = np.zeros((P, P, P), dtype=np.complex128)
    big[_pad_index(M, P)] = coeffs
    return sfft.ifftn(big, workers=-1, overwrite_x=True) * P**3


def from_padded(values: np.ndarray, M: int) -> np.ndarray:
    """Project samples on a padded grid back onto the M-lattice (Nyquist zeroed)."""
    P = values.shape[0]
    full = sfft.fftn(values, workers=-1) / P**3
    out = full if P == M else full[_pad_index(M, P)]
    n = M // 2
    out[n, :, :] = 0.0
    out[:, n, :] = 0.0
    out[:, :, n] = 0.0
    return out


# ---------------------------------------------------------------------------
# projections


def _check_dyadic(N) -> int:
    n = int(N)
    if n != N or not _is_pow2(n):
        raise InvalidInputError(f"N must be a dyadic integer (power of two), got {N}")
    return n


def annulus_mask(grid: Grid, N: int) -> np.ndarray:
    """N/2 < |k| <= N, evaluated in integers."""
    N = _check_dyadic(N)
    ksq = grid.ksq
    return (4 * ksq > N * N) & (ksq <= N * N)


def lp_project(field: SpectralField, N: int) -> SpectralField:
    """Sharp Littlewood-Paley piece P_N: keeps N/2 < |k| <= N."""
    return field.replace(np.where(annulus_mask(field.grid, N), field.coeffs, 0.0))


def lp_project_low(field: SpectralField, N: int) -> SpectralField:
    """P_{<N}: keeps |k| <= N/2 (zero mode included)."""
    N = _check_dyadic(N)
    keep = 4 * field.grid.ksq <= N * N
    return field.replace(np.where(keep, field.coeffs, 0.0))


def dyadic_scales(grid: Grid) -> list[int]:
    """Dyadic N = 1, 2, 4, ... covering every nonzero lattice point of the grid."""
    top = math.sqrt(3.0) * grid.k_max
    out, n = [], 1
    while True:
        out.append(n)
        if n >= top:
            return out
        n *= 2


@dataclass(frozen=True)
class Box:
    """Closed axis-aligned cuboid ``lo[i] <= k_i <= hi[i]`` in frequency space."""

    lo: tuple[int, int, int]
    hi: tuple[int, int, int]

    @classmethod
    def cube(cls, corner, size: int) -> "Box":
        lo = tuple(int(c) for c in corner)
        return cls(lo, tuple(c + size - 1 for c in lo))

    @classmethod
    def centered(cls, dims) -> "Box":
        """Box with integer side counts ``dims`` centred at the origin."""
        lo = tuple(-(int(d) // 2) for d in dims)
        return cls(lo, tuple(a + int(d) - 1 for a, d in zip(lo, dims)))

    def mask(self, grid: Grid) -> np.ndarray:
        m = np.ones(grid.shape, dtype=bool)
        for k, lo, hi in zip(grid.kvec, self.lo, self.hi):
            m = m & (k >= lo) & (k <= hi)
        return m


def box_project(field: SpectralField, box: Box) -> SpectralField:
    return field.replace(np.where(box.mask(field.grid), field.coeffs, 0.0))


# ---------------------------------------------------------------------------
# the multiplier D


@dataclass(frozen=True)
class MultiplierSpec:
    """Symbol m(k) = theta(|k|/N), theta = 1 below 1 and |y| above 2.

    ``blend`` names the profile on 1 <= |y| <= 2; only the C^1 cubic Hermite
    join ``"hermite3"`` (theta(1)=1, theta'(1)=0, theta(2)=2, theta'(2)=1) is
    provided.
    """

    N: float
    blend: str = "hermite3"

    def __post_init__(self):
        if not (math.isfinite(self.N) and self.N > 0):
            raise InvalidInputError(f"N must be positive, got {self.N}")
        if self.blend != "hermite3":
            raise InvalidInputError(f"unknown blend profile {self.blend!r}")


def theta_profile(r):
    """Radial profile theta(r), r = |y| >= 0. Vectorised."""
    r = np.asarray(r, dtype=float)
    s = np.clip(r - 1.0, 0.0, 1.0)
    mid = 1.0 + s * s * (2.0 - s)
    return np.where(r <= 1.0, 1.0, np.where(r >= 2.0, r, mid))


def d_symbol(k, spec: MultiplierSpec) -> float:
    r = math.sqrt(sum(float(x) ** 2 for x in k)) / spec.N
    return float(theta_profile(r))


def multiplier_symbol(grid: Grid, spec: MultiplierSpec) -> np.ndarray:
    return theta_profile(grid.kabs / spec.N)


def apply_multiplier(field: SpectralField, spec: MultiplierSpec) -> SpectralField:
    return field.replace(field.coeffs * multiplier_symbol(field.grid, spec))


def apply_inverse_multiplier(field: SpectralField, spec: MultiplierSpec) -> SpectralField:
    return field.replace(field.coeffs / multiplier_symbol(field.grid, spec))
