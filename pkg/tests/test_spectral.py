import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from torus_nls.errors import InvalidInputError
from torus_nls.spectral import (
    Box,
    Grid,
    MultiplierSpec,
    SpectralField,
    analyze,
    annulus_mask,
    apply_inverse_multiplier,
    apply_multiplier,
    box_project,
    d_symbol,
    dyadic_scales,
    from_padded,
    lp_project,
    lp_project_low,
    multiplier_symbol,
    synthesize,
    theta_profile,
    to_padded,
)


def random_field(grid, seed=0):
    rng = np.random.default_rng(seed)
    c = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    return SpectralField(grid, c)


def test_grid_basics():
    g = Grid(16)
    assert g.k_max == 7 and g.shape == (16, 16, 16)
    assert g.wavenumbers.tolist() == [0, 1, 2, 3, 4, 5, 6, 7, -8, -7, -6, -5, -4, -3, -2, -1]
    assert g.nyquist_mask.sum() == 16**3 - 15**3
    for bad in (0, 3, 12, 2.5):
        with pytest.raises(InvalidInputError):
            Grid(bad)


def test_field_is_immutable_and_validated():
    g = Grid(8)
    f = random_field(g)
    with pytest.raises(ValueError):
        f.coeffs[0, 0, 0] = 1.0
    with pytest.raises(InvalidInputError):
        SpectralField(g, np.zeros((4, 4, 4)))
    bad = np.zeros(g.shape, complex)
    bad[1, 1, 1] = np.nan
    with pytest.raises(InvalidInputError):
        SpectralField(g, bad)
    assert np.all(f.coeffs[g.nyquist_mask] == 0)


def test_single_mode_synthesis_matches_exponential():
    g = Grid(8)
    k = (2, -1, 3)
    f = SpectralField.single_mode(g, k, 0.7 - 0.2j)
    x1, x2, x3 = g.points()
    expected = (0.7 - 0.2j) * np.exp(2j * np.pi * (k[0] * x1 + k[1] * x2 + k[2] * x3))
    assert np.allclose(synthesize(f), expected, atol=1e-13)


def test_round_trip_and_parseval():
    g = Grid(16)
    f = random_field(g, 1)
    values = synthesize(f)
    back = analyze(values, g)
    assert np.allclose(back.coeffs, f.coeffs, atol=1e-13)
    assert np.mean(np.abs(values) ** 2) == pytest.approx(f.mass(), rel=1e-12)


def test_inner_product_is_l2():
    g = Grid(8)
    a, b = random_field(g, 2), random_field(g, 3)
    direct = np.mean(np.conj(synthesize(a)) * synthesize(b))
    assert a.inner(b) == pytest.approx(direct, rel=1e-12)


@pytest.mark.parametrize("factor", [1, 2, 3])
def test_padding_is_exact_interpolation(factor):
    g = Grid(8)
    f = random_field(g, 4)
    vals = to_padded(f.coeffs, factor)
    P = 8 * factor
    x = np.arange(P) / P
    k = g.wavenumbers
    E = np.exp(2j * np.pi * np.outer(x, k))
    direct = np.einsum("ai,bj,ck,ijk->abc", E, E, E, f.coeffs)
    assert np.allclose(vals, direct, atol=1e-12)
    assert np.allclose(from_padded(vals, 8), f.coeffs, atol=1e-13)


def test_annuli_partition_the_lattice():
    g = Grid(16)
    f = random_field(g, 5)
    total = lp_project_low(f, 1).coeffs.copy()
    for N in dyadic_scales(g):
        total += lp_project(f, N).coeffs
    assert np.allclose(total, f.coeffs)
    masks = [annulus_mask(g, N) for N in dyadic_scales(g)]
    assert np.all(sum(m.astype(int) for m in masks) <= 1)


def test_annulus_boundaries_are_integer_exact():
    g = Grid(16)
    m = annulus_mask(g, 4)
    idx = lambda k: tuple(x % 16 for x in k)  # noqa: E731
    assert m[idx((4, 0, 0))] and not m[idx((2, 0, 0))] and m[idx((2, 1, 0))]
    assert not m[idx((4, 1, 0))]
    with pytest.raises(InvalidInputError):
        lp_project(random_field(g), 3)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([1, 2, 4, 8]))
def test_projection_is_idempotent(seed, N):
    g = Grid(8)
    f = random_field(g, seed)
    once = lp_project(f, N)
    assert np.array_equal(lp_project(once, N).coeffs, once.coeffs)


def test_box_counts():
    g = Grid(16)
    b = Box.centered((4, 4, 2))
    assert b.lo == (-2, -2, -1) and b.hi == (1, 1, 0)
    assert b.mask(g).sum() == 32
    f = random_field(g, 6)
    assert np.count_nonzero(box_project(f, b).coeffs) == 32
    assert Box.cube((0, 0, 0), 3).mask(g).sum() == 27


def test_hermite_blend_against_symbolic_solution():
    r = sp.symbols("r")
    a, b, c, d = sp.symbols("a b c d")
    poly = a + b * r + c * r**2 + d * r**3
    sol = sp.solve(
        [
            poly.subs(r, 1) - 1,
            sp.diff(poly, r).subs(r, 1),
            poly.subs(r, 2) - 2,
            sp.diff(poly, r).subs(r, 2) - 1,
        ],
        [a, b, c, d],
    )
    cubic = sp.lambdify(r, poly.subs(sol))
    assert poly.subs(sol).subs(r, sp.Rational(3, 2)) == sp.Rational(11, 8)
    for x in np.linspace(1, 2, 41):
        assert theta_profile(x) == pytest.approx(cubic(x), abs=1e-14)
    assert theta_profile(0.5) == 1.0 and theta_profile(3.0) == 3.0


def test_d_symbol_values():
    spec = MultiplierSpec(4)
    assert d_symbol((0, 0, 0), spec) == 1.0
    assert d_symbol((6, 0, 0), spec) == pytest.approx(1.375)
    assert d_symbol((12, 0, 0), spec) == 3.0
    with pytest.raises(InvalidInputError):
        MultiplierSpec(0)
    with pytest.raises(InvalidInputError):
        MultiplierSpec(4, blend="cosine")


def test_multiplier_monotone_and_continuous():
    r = np.linspace(0, 4, 4001)
    th = theta_profile(r)
    assert np.all(np.diff(th) >= -1e-15)
    assert np.max(np.abs(np.diff(th))) < 2e-3


def test_multiplier_identity_for_large_N():
    g = Grid(16)
    f = random_field(g, 7)
    out = apply_multiplier(f, MultiplierSpec(2 * g.k_max))
    assert np.array_equal(out.coeffs, f.coeffs)


def test_inverse_multiplier_round_trip():
    g = Grid(16)
    f = random_field(g, 8)
    spec = MultiplierSpec(2)
    back = apply_inverse_multiplier(apply_multiplier(f, spec), spec)
    assert np.allclose(back.coeffs, f.coeffs, rtol=1e-14, atol=0)
    assert multiplier_symbol(g, spec).min() == 1.0
