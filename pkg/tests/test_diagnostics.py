import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from torus_nls.data import random_data
from torus_nls.diagnostics import (
    ExponentTable,
    cuboid_exponent,
    energy,
    energy_increment,
    exponents,
    fit_power_law,
    free_lq_norms,
    hann,
    kinetic_energy,
    modified_energy,
    norm_record,
    nu_of_q,
    potential_energy,
    sobolev_norm,
    spacetime_lq_norm,
    strichartz_exponent,
    xsb_norm,
)
from torus_nls.dynamics import IntegratorConfig, evolve, linear_flow
from torus_nls.errors import InvalidInputError
from torus_nls.geometry import TorusSpec
from torus_nls.spectral import Grid, MultiplierSpec, SpectralField

TORUS = TorusSpec((1.0, 2**0.25, 3**0.25))
BETAS = TORUS.betas


def free_samples(u, dt, n, t0=0.0):
    return [(t0 + j * dt, linear_flow(u, t0 + j * dt, BETAS)) for j in range(n)]


def test_sobolev_norm_single_mode():
    g = Grid(8)
    u = SpectralField.single_mode(g, (1, 2, 2), 0.5)
    for s in (0.0, 1.0, 2.0, 2.5):
        assert sobolev_norm(u, s) == pytest.approx(0.5 * 10 ** (s / 2), rel=1e-14)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 1000), st.floats(0, 3), st.floats(0, 3))
def test_sobolev_norm_monotone_in_s(seed, s1, s2):
    u = random_data(Grid(8), 1.0, 1.0, seed)
    lo, hi = sorted((s1, s2))
    assert sobolev_norm(u, lo) <= sobolev_norm(u, hi) * (1 + 1e-14)


@pytest.mark.parametrize("p", [3.5, 4.0, 4.5])
def test_plane_wave_energy_closed_form(p):
    g = Grid(8)
    k, A = (2, 1, 0), 0.7
    u = SpectralField.single_mode(g, k, A)
    Q = sum(b * x * x for b, x in zip(BETAS, k))
    assert kinetic_energy(u, BETAS) == pytest.approx(0.5 * 4 * math.pi**2 * Q * A * A, rel=1e-14)
    assert potential_energy(u, p) == pytest.approx(A ** (p + 1) / (p + 1), rel=1e-13)
    assert energy(u, BETAS, p) == pytest.approx(
        0.5 * 4 * math.pi**2 * Q * A * A + A ** (p + 1) / (p + 1), rel=1e-13
    )


def test_modified_energy_identity_at_large_N():
    g = Grid(16)
    u = random_data(g, 2.0, 1.0, 1)
    assert modified_energy(u, BETAS, 4.0, MultiplierSpec(2 * g.k_max)) == pytest.approx(
        energy(u, BETAS, 4.0), rel=1e-12
    )
    assert modified_energy(u, BETAS, 4.0, MultiplierSpec(2)) > energy(u, BETAS, 4.0)


def test_norm_record_fields():
    g = Grid(8)
    u = random_data(g, 2.0, 1.0, 2)
    r = norm_record(0.5, u, BETAS, 4.0, MultiplierSpec(2))
    d = r.as_dict()
    assert d["t"] == 0.5 and d["h2"] == pytest.approx(1.0, rel=1e-12)
    assert d["mass"] == pytest.approx(u.mass())


def test_energy_increment_reads_samples():
    g = Grid(8)
    u = random_data(g, 2.0, 1.0, 3)
    traj = evolve(u, 0.1, IntegratorConfig(1e-2, 4.0, sample_every=5), TORUS)
    spec = MultiplierSpec(2)
    inc = energy_increment(traj, 0.0, 0.1, spec)
    direct = modified_energy(traj.final, BETAS, 4.0, spec) - modified_energy(u, BETAS, 4.0, spec)
    assert inc == direct
    assert energy_increment(traj, 0.05, 0.05, spec) == 0.0
    with pytest.raises(InvalidInputError):
        energy_increment(traj, 0.1, 0.0, spec)
    with pytest.raises(InvalidInputError):
        energy_increment(traj, 0.0, 0.03, spec)


def test_lq_norm_of_plane_wave_is_exact():
    g = Grid(8)
    u = SpectralField.single_mode(g, (1, 0, 2), 0.6)
    samples = free_samples(u, 0.01, 100)
    for q in (2.0, 3.0, 4.0, 6.5):
        assert spacetime_lq_norm(samples, q, (0.0, 1.0)) == pytest.approx(0.6, rel=1e-12)
        assert spacetime_lq_norm(samples, q, (0.25, 0.75)) == pytest.approx(0.6 * 0.5 ** (1 / q), rel=1e-12)


def test_lq_window_uses_half_open_samples():
    g = Grid(8)
    u = SpectralField.single_mode(g, (0, 0, 0), 1.0)
    samples = free_samples(u, 0.1, 11)
    # samples 0.0..0.4 lie in [0, 0.5): five of them
    assert spacetime_lq_norm(samples, 2.0, (0.0, 0.5)) ** 2 == pytest.approx(0.5, rel=1e-12)
    with pytest.raises(InvalidInputError):
        spacetime_lq_norm(samples, 2.0, (0.5, 0.5))
    with pytest.raises(InvalidInputError):
        spacetime_lq_norm(samples, 0.5, (0.0, 1.0))
    uneven = samples[:3] + samples[4:]
    with pytest.raises(InvalidInputError):
        spacetime_lq_norm(uneven, 2.0, (0.0, 1.0))


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 1000), st.floats(1.0, 4.0), st.floats(1.0, 4.0))
def test_lq_norm_monotone_in_q_on_unit_window(seed, q1, q2):
    u = random_data(Grid(8), 0.0, 1.0, seed)
    samples = free_samples(u, 0.05, 20)
    lo, hi = sorted((q1, q2))
    assert spacetime_lq_norm(samples, lo, (0, 1)) <= spacetime_lq_norm(samples, hi, (0, 1)) * (1 + 1e-12)


def test_free_lq_norms_match_sampled_trajectory():
    g = Grid(8)
    u = random_data(g, 0.0, 1.0, 4)
    dt = 1 / 64
    samples = free_samples(u, dt, 128)
    out = free_lq_norms(u, BETAS, [2.0, 4.0, 5.0], [(0.0, 1.0), (1.0, 2.0)], dt)
    for q in (2.0, 4.0, 5.0):
        for w, v in zip([(0.0, 1.0), (1.0, 2.0)], out[q]):
            assert v == pytest.approx(spacetime_lq_norm(samples, q, w), rel=1e-10)
    assert out[2.0][0] == pytest.approx(1.0, rel=1e-12)


def test_hann_taper():
    w = hann(8)
    assert w[0] == 0 and w[4] == pytest.approx(1.0)
    assert np.allclose(w[1:], w[1:][::-1])


def test_xsb_closed_forms():
    g = Grid(8)
    k, A = (1, 1, 0), 0.3
    u = SpectralField.single_mode(g, k, A)
    n, L = 64, 1.0
    samples = free_samples(u, L / n, n)
    jk = math.sqrt(1 + 2)
    # b = 0: sum of the squared taper is 3n/8
    assert xsb_norm(samples, 1.0, 0.0, (0, L), BETAS) == pytest.approx(jk * A * math.sqrt(3 * L / 8), rel=1e-12)
    # the taper spectrum sits on sigma = 0 and sigma = +-1/L with weights 1/4 and 1/16 each
    ratio = xsb_norm(samples, 1.0, 0.6, (0, L), BETAS) / xsb_norm(samples, 1.0, 0.0, (0, L), BETAS)
    assert ratio == pytest.approx(1.0825458522252684, rel=1e-12)


def test_xsb_needs_betas_and_samples():
    g = Grid(8)
    u = SpectralField.single_mode(g, (1, 0, 0), 1.0)
    with pytest.raises(InvalidInputError):
        xsb_norm(free_samples(u, 0.1, 10), 0.0, 0.0, (0, 1))
    with pytest.raises(InvalidInputError):
        xsb_norm(free_samples(u, 0.25, 4), 0.0, 0.0, (0, 1), BETAS)


def test_exponents_exact_at_p4():
    ex = exponents(4)
    assert ex.theta_p == Fraction(1, 182)
    assert ex.q0 == 5 and ex.sigma == Fraction(-1, 2)
    assert ex.gamma0 == Fraction(1, 27) and ex.gamma1 == Fraction(2, 9)
    assert ex.growth_rational == 2 and ex.growth_irrational == Fraction(364, 183)
    assert ex.increment_local == -1
    assert ex.theta1_terms == (Fraction(-1, 54), Fraction(-1, 135), Fraction(-1, 54))
    assert ExponentTable.nu(Fraction(10, 3)) == 0 and ExponentTable.nu(6) == 4
    assert ExponentTable.nu(5) == Fraction(20, 29)


def test_exponents_float_agrees_with_exact():
    exact, approx = exponents(Fraction(9, 2)).as_dict(), exponents(4.5).as_dict()
    for key in exact:
        assert approx[key] == pytest.approx(exact[key], abs=1e-15)
    assert approx["theta_p"] == pytest.approx(0.5 / 182)


@given(st.floats(3.0, 5.0, exclude_min=True, exclude_max=True))
def test_irrational_exponent_below_rational(p):
    # exact arithmetic: theta(p) underflows next to 2/(5-p) for p close to 3
    ex = exponents(Fraction(p))
    assert ex.growth_irrational < ex.growth_rational


def test_exponent_helpers():
    assert nu_of_q(4.0) == pytest.approx(4 / 13)
    assert nu_of_q(7) == 4
    assert strichartz_exponent(4) == Fraction(1, 4)
    assert strichartz_exponent(2.0) == pytest.approx(-1.0)
    assert cuboid_exponent(4) == Fraction(1, 12)
    with pytest.raises(InvalidInputError):
        nu_of_q(3)
    with pytest.raises(InvalidInputError):
        exponents(5)


def test_fit_power_law_exact_and_constant():
    pts = [(n, n**2) for n in (2, 4, 8, 16)]
    slope, icpt, res = fit_power_law(pts)
    assert slope == pytest.approx(2.0, abs=1e-12) and res < 1e-12
    slope, icpt, res = fit_power_law([(n, 3.0) for n in (2, 4, 8)])
    assert slope == pytest.approx(0.0, abs=1e-12) and icpt == pytest.approx(math.log(3.0))


def test_fit_power_law_perturbed_against_closed_form():
    rng = np.random.default_rng(0)
    xs = np.array([2.0, 4.0, 8.0, 16.0, 32.0])
    ys = 5 * xs**-0.5 * (1 + rng.uniform(-0.01, 0.01, xs.size))
    # textbook formula: slope = cov(X, Y) / var(X)
    X, Y = np.log(xs), np.log(ys)
    ref = ((X - X.mean()) * (Y - Y.mean())).sum() / ((X - X.mean()) ** 2).sum()
    slope, _, _ = fit_power_law(zip(xs, ys))
    assert slope == pytest.approx(ref, abs=1e-12)
    assert -0.52 <= slope <= -0.48


def test_fit_power_law_rejects_bad_points():
    with pytest.raises(InvalidInputError):
        fit_power_law([(1, 1), (2, 2)])
    with pytest.raises(InvalidInputError):
        fit_power_law([(1, 1), (2, 0), (4, 1)])
