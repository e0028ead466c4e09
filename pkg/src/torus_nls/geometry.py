"""Torus shapes, the anisotropic quadratic form and near-resonance counting.

A rectangular torus with side lengths ``l`` is mapped to the unit torus with
the anisotropic Laplacian ``sum_i beta_i d_i^2`` where ``beta_i = l_i**-2``.
Everything downstream works with ``betas``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import BudgetExceededError, InvalidInputError

DEFAULT_ENUMERATION_BUDGET = 50_000_000


def betas_from_lengths(lengths) -> tuple[float, float, float]:
    lengths = tuple(float(x) for x in lengths)
    if len(lengths) != 3:
        raise InvalidInputError(f"expected three side lengths, got {len(lengths)}")
    for x in lengths:
        if not math.isfinite(x) or x <= 0.0:
            raise InvalidInputError(f"side lengths must be finite and positive, got {lengths}")
    return tuple(x**-2 for x in lengths)


@dataclass(frozen=True)
class TorusSpec:
    """Side lengths of the torus; ``betas`` is derived, never passed in."""

    lengths: tuple[float, float, float]
    betas: tuple[float, float, float] = field(init=False)

    def __post_init__(self):
        lengths = tuple(float(x) for x in self.lengths)
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "betas", betas_from_lengths(lengths))

    @classmethod
    def from_betas(cls, betas) -> "TorusSpec":
        b = tuple(float(x) for x in betas)
        if len(b) != 3 or any(not math.isfinite(x) or x <= 0 for x in b):
            raise InvalidInputError(f"betas must be three finite positive reals, got {betas}")
        return cls(tuple(x**-0.5 for x in b))

    @property
    def is_square(self) -> bool:
        return self.betas[0] == self.betas[1] == self.betas[2]


def q_form(betas, k) -> float:
    """Q(k) = sum_i beta_i k_i^2. Accepts a triple or an array with last axis 3."""
    b = np.asarray(betas, dtype=float)
    k = np.asarray(k, dtype=float)
    out = (k * k) @ b
    return float(out) if out.ndim == 0 else out


def q_bilinear(betas, l, m) -> float:
    """Polarisation of :func:`q_form`: sum_i beta_i l_i m_i."""
    b = np.asarray(betas, dtype=float)
    out = (np.asarray(l, dtype=float) * np.asarray(m, dtype=float)) @ b
    return float(out) if out.ndim == 0 else out


def _integer_box(n_max: int) -> np.ndarray:
    r = np.arange(-n_max, n_max + 1)
    g = np.stack(np.meshgrid(r, r, r, indexing="ij"), axis=-1).reshape(-1, 3)
    return g


def diophantine_margin(betas, n_max: int, exponent: float = 4.0):
    """Smallest value of |n.beta| * (|n_1|+|n_2|+|n_3|)**exponent over 0 < |n_i| <= n_max.

    Exhaustive. Returns ``(margin, witness)``; a zero margin means the betas
    are exactly linearly dependent over the integers inside the search box.
    """
    n_max = int(n_max)
    if n_max < 1:
        raise InvalidInputError("n_max must be >= 1")
    b = np.asarray(betas, dtype=float)
    n = _integer_box(n_max)
    n = n[np.any(n != 0, axis=1)]
    vals = np.abs(n @ b) * np.abs(n).sum(axis=1).astype(float) ** exponent
    i = int(np.argmin(vals))
    return float(vals[i]), tuple(int(x) for x in n[i])


@dataclass(frozen=True)
class ResonanceQuery:
    """Parameters of the near-resonant set around the frequency sphere of radius K.

    A lattice point k with |k| <= K is near-resonant when some nonzero integer
    l with |l| <= K**gamma0 has |Q(k, l)| <= c * K**gamma1.
    """

    K: int
    gamma0: float
    gamma1: float
    c: float = 1.0

    def __post_init__(self):
        if int(self.K) != self.K or self.K < 1:
            raise InvalidInputError(f"K must be a positive integer, got {self.K}")
        for name in ("gamma0", "gamma1"):
            g = getattr(self, name)
            if not 0.0 < g < 1.0:
                raise InvalidInputError(f"{name} must lie in (0, 1), got {g}")
        if self.gamma1 <= self.gamma0:
            raise InvalidInputError("gamma1 must exceed gamma0")
        if self.gamma1 <= 4 * self.gamma0:
            warnings.warn(
                f"gamma1={self.gamma1} is below 4*gamma0={4 * self.gamma0}",
                stacklevel=2,
            )
        if not (math.isfinite(self.c) and self.c >= 0.0):
            raise InvalidInputError(f"c must be finite and nonnegative, got {self.c}")

    @property
    def l_radius(self) -> float:
        return float(self.K) ** self.gamma0

    @property
    def width(self) -> float:
        return self.c * float(self.K) ** self.gamma1


def ball_points(radius: float) -> np.ndarray:
    """Integer points with Euclidean norm <= radius, shape (n, 3)."""
    r = int(math.floor(radius + 1e-12))
    g = _integer_box(r)
    return g[(g * g).sum(axis=1) <= radius * radius * (1 + 1e-12)]


def resonant_lattice_count(
    betas, query: ResonanceQuery, budget: int = DEFAULT_ENUMERATION_BUDGET, chunk: int = 65536
) -> int:
    ls = ball_points(query.l_radius)
    ls = ls[np.any(ls != 0, axis=1)]
    ks = ball_points(query.K)
    work = len(ks) * max(len(ls), 1)
    if work > budget:
        raise BudgetExceededError(
            f"enumeration needs {work} (k, l) pairs, budget is {budget}"
        )
    if len(ls) == 0:
        return 0
    # tolerance keeps exact zeros of rational forms inside a width-0 slab
    width = query.width + 1e-9
    bl = ls * np.asarray(betas, dtype=float)
    count = 0
    for start in range(0, len(ks), chunk):
        block = ks[start : start + chunk].astype(float)
        hit = np.abs(block @ bl.T) <= width
        count += int(np.count_nonzero(hit.any(axis=1)))
    return count


def sample_generic_torus(seed: int, low: float = 0.5, high: float = 2.0) -> TorusSpec:
    if not (0.0 < low < high and math.isfinite(high)):
        raise InvalidInputError(f"need 0 < low < high, got ({low}, {high})")
    rng = np.random.default_rng(seed)
    return TorusSpec(tuple(rng.uniform(low, high, size=3)))
