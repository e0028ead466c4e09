"""Norms, energies and exponent bookkeeping.

Integrals over the torus are means over grid points (the torus has unit
volume). Time integrals over a window [a, b) are left Riemann sums at the
recorded cadence.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
import scipy.fft as sfft

from .dynamics import FOUR_PI_SQ, Trajectory
from .errors import InvalidInputError
from .spectral import MultiplierSpec, SpectralField, apply_multiplier, synthesize, to_padded


# ---------------------------------------------------------------------------
# fixed-time functionals


def sobolev_norm(field: SpectralField, s: float) -> float:
    w = field.grid.japanese ** (2.0 * s)
    return float(np.sqrt(np.sum(w * np.abs(field.coeffs) ** 2)))


def mass(field: SpectralField) -> float:
    return field.mass()


def kinetic_energy(field: SpectralField, betas) -> float:
    """1/2 sum_k sum_i beta_i (2 pi k_i)^2 |uhat(k)|^2."""
    return 0.5 * FOUR_PI_SQ * float(np.sum(field.grid.q_symbol(betas) * np.abs(field.coeffs) ** 2))


def potential_energy(field: SpectralField, p: float, pad: int | None = None) -> float:
    pad = field.grid.padded_factor if pad is None else pad
    values = to_padded(field.coeffs, pad)
    return float(np.mean(np.abs(values) ** (p + 1.0))) / (p + 1.0)


def energy(field: SpectralField, betas, p: float, pad: int | None = None) -> float:
    return kinetic_energy(field, betas) + potential_energy(field, p, pad)


def modified_energy(field: SpectralField, betas, p: float, spec: MultiplierSpec) -> float:
    """Energy of D u."""
    return energy(apply_multiplier(field, spec), betas, p)


def energy_increment(trajectory: Trajectory, t1: float, t2: float, spec: MultiplierSpec) -> float:
    if t2 < t1:
        raise InvalidInputError("need t1 <= t2")
    betas, p = trajectory.torus.betas, trajectory.config.p
    f1, f2 = trajectory.at(t1), trajectory.at(t2)
    if t1 == t2:
        return 0.0
    return modified_energy(f2, betas, p, spec) - modified_energy(f1, betas, p, spec)


@dataclass(frozen=True)
class NormRecord:
    t: float
    mass: float
    energy: float
    h1: float
    h2: float
    modified_energy: float

    def as_dict(self) -> dict:
        return asdict(self)


def norm_record(t: float, field: SpectralField, betas, p: float, spec: MultiplierSpec) -> NormRecord:
    return NormRecord(
        t=t,
        mass=field.mass(),
        energy=energy(field, betas, p),
        h1=sobolev_norm(field, 1.0),
        h2=sobolev_norm(field, 2.0),
        modified_energy=modified_energy(field, betas, p, spec),
    )


# ---------------------------------------------------------------------------
# space-time norms


def _window_samples(samples: Sequence, window, min_count: int):
    a, b = (float(x) for x in window)
    if not b > a:
        raise InvalidInputError(f"empty window {window}")
    times = np.array([t for t, _ in samples], dtype=float)
    if len(times) < 2:
        raise InvalidInputError("need at least two samples to define a cadence")
    steps = np.diff(times)
    dt = float(steps[0])
    if dt <= 0 or np.max(np.abs(steps - dt)) > 1e-9 * max(1.0, dt):
        raise InvalidInputError("samples must be uniformly spaced in time")
    tol = 1e-9 * dt
    inside = [(t, f) for t, f in samples if a - tol <= t < b - tol]
    if len(inside) < min_count:
        raise InvalidInputError(
            f"window {window} holds {len(inside)} samples, need at least {min_count}"
        )
    return inside, dt


def _samples_of(trajectory):
    return trajectory.samples if isinstance(trajectory, Trajectory) else list(trajectory)


def spacetime_lq_norm(trajectory, q: float, window) -> float:
    """(sum_samples dt * mean_x |u(t, x)|^q)^(1/q) over samples with a <= t < b.

    ``trajectory`` may be a :class:`Trajectory` or a sequence of
    ``(t, SpectralField)`` pairs.
    """
    if q < 1:
        raise InvalidInputError("q must be >= 1")
    inside, dt = _window_samples(_samples_of(trajectory), window, 2)
    total = 0.0
    for _, f in inside:
        total += _abs_pow_sum(synthesize(f), q) / f.grid.M**3
    return (dt * total) ** (1.0 / q)


def _abs_pow_sum(values: np.ndarray, q: float) -> float:
    sq = values.real * values.real + values.imag * values.imag
    if q == 2:
        return float(np.sum(sq))
    if q == 4:
        return float(np.sum(sq * sq))
    return float(np.sum(sq ** (0.5 * q)))


def free_lq_norms(field: SpectralField, betas, qs, windows: Iterable, dt: float) -> dict:
    """L^q_{t,x} norms of the free flow of ``field`` for each q and window.

    Same quadrature as :func:`spacetime_lq_norm` (samples at t = j*dt with
    a <= t < b) but streamed, so fine cadences need no storage. Returns
    ``{q: [norm per window]}``.
    """
    qs = [float(q) for q in np.atleast_1d(qs)]
    if any(q < 1 for q in qs):
        raise InvalidInputError("q must be >= 1")
    grid = field.grid
    M3 = grid.M**3
    omega = FOUR_PI_SQ * grid.q_symbol(betas)
    step = np.exp(-1j * dt * omega)
    out = {q: [] for q in qs}
    for a, b in windows:
        j0 = math.ceil(a / dt - 1e-9)
        j1 = math.ceil(b / dt - 1e-9)
        if j1 - j0 < 2:
            raise InvalidInputError(f"window {(a, b)} holds fewer than 2 samples at dt={dt}")
        # restart the phase recurrence from an exact exponential each window
        cur = field.coeffs * np.exp(-1j * (j0 * dt) * omega)
        totals = dict.fromkeys(qs, 0.0)
        for _ in range(j0, j1):
            vals = sfft.ifftn(cur, workers=-1) * M3
            for q in qs:
                totals[q] += _abs_pow_sum(vals, q) / M3
            cur *= step
        for q in qs:
            out[q].append((dt * totals[q]) ** (1.0 / q))
    return out


def hann(n: int) -> np.ndarray:
    """Periodic Hann taper w_j = sin^2(pi j / n)."""
    return np.sin(np.pi * np.arange(n) / n) ** 2


def xsb_norm(trajectory, s: float, b: float, window, betas=None) -> float:
    """Windowed discrete X^{s,b} norm.

    Each coefficient series is pulled back along the free flow
    (v(k,t) = exp(+4 pi^2 i Q(k) t) uhat(k,t)), so the modulation variable
    sigma = tau + 2 pi Q(k) is read off directly from the time DFT of the
    Hann-tapered profile. Normalised so that with b = 0 the result equals
    (sum_k <k>^{2s} dt sum_j |w_j uhat(k, t_j)|^2)^{1/2}.
    """
    samples = _samples_of(trajectory)
    if betas is None:
        if not isinstance(trajectory, Trajectory):
            raise InvalidInputError("betas are required when passing raw samples")
        betas = trajectory.torus.betas
    inside, dt = _window_samples(samples, window, 8)
    n = len(inside)
    grid = inside[0][1].grid
    omega = FOUR_PI_SQ * grid.q_symbol(betas)
    w = hann(n)
    profile = np.empty((n,) + grid.shape, dtype=np.complex128)
    for j, (t, f) in enumerate(inside):
        profile[j] = w[j] * f.coeffs * np.exp(1j * omega * t)
    spec = sfft.fft(profile, axis=0, workers=-1) * dt
    sigma = np.fft.fftfreq(n, dt)
    tw = (1.0 + sigma**2) ** b
    kw = grid.japanese ** (2.0 * s)
    power = np.tensordot(tw, np.abs(spec) ** 2, axes=(0, 0))
    return float(np.sqrt(np.sum(kw * power) / (n * dt)))


# ---------------------------------------------------------------------------
# exponents


def _num(p):
    if isinstance(p, (int, Fraction)) and not isinstance(p, bool):
        return Fraction(p)
    return float(p)


def nu_of_q(q):
    """Length exponent of the long-time Strichartz window [0, N^nu(q)]."""
    q = _num(q)
    if q < Fraction(10, 3):
        raise InvalidInputError(f"nu(q) needs q >= 10/3, got {q}")
    if q >= 6:
        return 4 if isinstance(q, Fraction) else 4.0
    return 4 * (3 * q - 10) / (3 * q + 14)


def strichartz_exponent(q):
    """Unit-window loss exponent 3/2 - 5/q."""
    q = _num(q)
    return Fraction(3, 2) - 5 / q if isinstance(q, Fraction) else 1.5 - 5.0 / q


def cuboid_exponent(q):
    """Gain exponent 1/2 - 5/(3q) for N x N x M cuboids."""
    q = _num(q)
    return Fraction(1, 2) - 5 / (3 * q) if isinstance(q, Fraction) else 0.5 - 5.0 / (3.0 * q)


@dataclass(frozen=True)
class ExponentTable:
    p: float
    q0: float
    sigma: float
    theta_p: float
    gamma0: float
    gamma1: float
    growth_rational: float
    growth_irrational: float
    increment_rational: float
    increment_local: float
    theta1_terms: tuple

    @staticmethod
    def nu(q):
        return nu_of_q(q)

    def as_dict(self) -> dict:
        d = {k: float(v) for k, v in asdict(self).items() if k != "theta1_terms"}
        for i, v in enumerate(self.theta1_terms, 1):
            d[f"theta1_term{i}"] = float(v)
        return d


def exponents(p) -> ExponentTable:
    """All closed-form exponents at nonlinearity power p (exact for int/Fraction p)."""
    p = _num(p)
    if not 3 < p < 5:
        raise InvalidInputError(f"p must lie in (3, 5), got {p}")
    one = Fraction(1) if isinstance(p, Fraction) else 1.0
    theta = min(p - 3, 5 - p) / 182
    gamma0 = (p - 3) / (3 * (p + 5))
    gamma1 = 6 * gamma0
    sigma = (p - 5) / 2
    return ExponentTable(
        p=p,
        q0=10 * one / (6 - p),
        sigma=sigma,
        theta_p=theta,
        gamma0=gamma0,
        gamma1=gamma1,
        growth_rational=2 * one / (5 - p),
        growth_irrational=2 * one / (5 - p + theta),
        increment_rational=sigma,
        increment_local=max(p - 5, -one),
        theta1_terms=(
            sigma * gamma0,
            -gamma1 / 5 + (p - 2) * gamma0 / 2,
            3 * gamma0 - (p - 3) * (1 - gamma1) / 6,
        ),
    )


# ---------------------------------------------------------------------------
# fits


def fit_power_law(points) -> tuple[float, float, float]:
    """OLS line through (log scale, log value): returns (slope, intercept, rms residual)."""
    pts = [(float(x), float(y)) for x, y in points]
    if len(pts) < 3:
        raise InvalidInputError("need at least three points")
    if any(not (x > 0 and y > 0) for x, y in pts):
        raise InvalidInputError("scales and values must be positive")
    X = np.log([x for x, _ in pts])
    Y = np.log([y for _, y in pts])
    A = np.column_stack([X, np.ones_like(X)])
    (slope, intercept), *_ = np.linalg.lstsq(A, Y, rcond=None)
    resid = Y - A @ np.array([slope, intercept])
    return float(slope), float(intercept), float(np.sqrt(np.mean(resid**2)))
