"""Time stepping for the defocusing NLS  i u_t + Delta_beta u = |u|^(p-1) u.

Both halves of the Strang splitting are solved exactly: the linear flow is a
diagonal phase in Fourier space, and the pointwise flow i u_t = |u|^(p-1) u
keeps |u| fixed so it is a phase rotation in physical space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import BlowUpError, InvalidInputError
from .geometry import TorusSpec
from .spectral import SpectralField, from_padded, to_padded

FOUR_PI_SQ = 4.0 * math.pi**2


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float
    p: float
    dealias: int = 2
    sample_every: int = 1
    nonlinear: bool = True

    def __post_init__(self):
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise InvalidInputError(f"dt must be finite and positive, got {self.dt}")
        if not 3.0 < self.p < 5.0:
            raise InvalidInputError(f"p must lie in (3, 5), got {self.p}")
        if int(self.dealias) != self.dealias or self.dealias < 1:
            raise InvalidInputError(f"dealias must be an integer >= 1, got {self.dealias}")
        if int(self.sample_every) != self.sample_every or self.sample_every < 1:
            raise InvalidInputError(f"sample_every must be a positive integer, got {self.sample_every}")


@dataclass
class Trajectory:
    samples: list  # [(t, SpectralField)]
    config: IntegratorConfig
    torus: TorusSpec
    diagnostics: list = field(default_factory=list)

    @property
    def times(self) -> np.ndarray:
        return np.array([t for t, _ in self.samples])

    def at(self, t: float, tol: float = 1e-9) -> SpectralField:
        for s, f in self.samples:
            if abs(s - t) <= tol * max(1.0, abs(t)):
                return f
        raise InvalidInputError(f"time {t} is not a recorded sample")

    @property
    def final(self) -> SpectralField:
        return self.samples[-1][1]


def linear_flow(field: SpectralField, t: float, betas) -> SpectralField:
    """Exact free evolution: uhat(k) -> exp(-4 pi^2 i Q(k) t) uhat(k)."""
    phase = np.exp(-1j * FOUR_PI_SQ * t * field.grid.q_symbol(betas))
    return field.replace(field.coeffs * phase)


def _rotate(values: np.ndarray, dt: float, p: float) -> np.ndarray:
    mod = np.abs(values)
    return values * np.exp(-1j * dt * mod ** (p - 1.0))


def nonlinear_substep(field: SpectralField, dt: float, p: float, pad: Optional[int] = None) -> SpectralField:
    """Exact flow of i u_t = |u|^(p-1) u on the padded grid, then truncation."""
    pad = field.grid.padded_factor if pad is None else pad
    values = to_padded(field.coeffs, pad)
    return field.replace(from_padded(_rotate(values, dt, p), field.grid.M))


class _Stepper:
    """Strang step on raw coefficient arrays with cached phases."""

    def __init__(self, grid, config: IntegratorConfig, betas):
        self.M = grid.M
        self.config = config
        self.half = np.exp(-0.5j * FOUR_PI_SQ * config.dt * grid.q_symbol(betas))
        self.half[grid.nyquist_mask] = 0.0

    def __call__(self, c: np.ndarray) -> np.ndarray:
        c = c * self.half
        if self.config.nonlinear:
            values = to_padded(c, self.config.dealias)
            c = from_padded(_rotate(values, self.config.dt, self.config.p), self.M)
        c *= self.half
        return c


def strang_step(field: SpectralField, config: IntegratorConfig, betas) -> SpectralField:
    return field.replace(_Stepper(field.grid, config, betas)(field.coeffs))


def evolve(
    initial: SpectralField,
    T: float,
    config: IntegratorConfig,
    torus: TorusSpec,
    on_sample: Optional[Callable] = None,
    t0: float = 0.0,
    store: bool = True,
    max_steps: int = 10_000_000,
) -> Trajectory:
    """Integrate from ``t0`` to ``t0 + T`` recording every ``sample_every`` steps.

    ``on_sample(t, field)`` is called at each recorded time and its return
    value appended to ``trajectory.diagnostics``. With ``store=False`` only the
    first and the latest fields are kept, which bounds memory on long runs.
    """
    if not (math.isfinite(T) and T > 0):
        raise InvalidInputError(f"T must be positive, got {T}")
    n_steps = int(round(T / config.dt))
    if n_steps < 1 or abs(n_steps * config.dt - T) > 1e-9 * max(1.0, T):
        raise InvalidInputError(f"T={T} is not an integer multiple of dt={config.dt}")
    if n_steps > max_steps:
        raise InvalidInputError(f"{n_steps} steps exceeds the step budget {max_steps}")
    if n_steps % config.sample_every:
        raise InvalidInputError(
            f"step count {n_steps} is not a multiple of sample_every={config.sample_every}"
        )

    grid = initial.grid
    step = _Stepper(grid, config, torus.betas)
    traj = Trajectory([], config, torus)

    def record(t, c):
        f = SpectralField(grid, c)
        if store or len(traj.samples) < 2:
            traj.samples.append((t, f))
        else:
            traj.samples[-1] = (t, f)
        if on_sample is not None:
            traj.diagnostics.append(on_sample(t, f))

    c = initial.coeffs.copy()
    record(t0, c)
    for n in range(1, n_steps + 1):
        c = step(c)
        if not np.all(np.isfinite(c)):
            t = t0 + n * config.dt
            raise BlowUpError(
                f"non-finite field at step {n} (t={t:.6g})", step=n, t=t, partial=traj
            )
        if n % config.sample_every == 0:
            record(t0 + n * config.dt, c)
    return traj
