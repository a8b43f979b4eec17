import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nematic.spectral import (
    Grid,
    SpectralField,
    dealias,
    derivative,
    divergence_coeffs,
    galerkin_project,
    gradient_coeffs,
    laplacian_coeffs,
    leray_project,
)

import oracles
from strategies import seeds

grids = st.sampled_from([(2, 16), (2, 32), (3, 8), (3, 16)])
lambdas = st.sampled_from([0.5, 1.0, 1.7])


def band_limited(grid, channels, band, rng):
    fh = grid.forward(rng.standard_normal((channels,) + grid.shape))
    jj = sum(ja**2 for ja in grid.j)
    return grid.inverse(fh * (jj <= band**2))


@given(grids, lambdas, seeds)
def test_transform_round_trip_and_parseval(gn, Lam, seed):
    g = Grid(gn[0], gn[1], Lam)
    f = np.random.default_rng(seed).standard_normal((2,) + g.shape)
    back = g.inverse(g.forward(f))
    assert np.max(np.abs(back - f)) <= 1e-12 * np.max(np.abs(f))
    fh = g.forward(f)
    l2 = float(np.sum(f**2)) * g.spacing**g.dim
    assert g.inner(fh, fh) == pytest.approx(l2, rel=1e-12)
    assert SpectralField(g, fh).hermitian_defect() <= 1e-13


@pytest.mark.parametrize("Lam", [1.0, 0.7])
def test_second_derivative_of_mode(Lam):
    g = Grid(2, 32, Lam)
    s = np.sin(2 * g.mesh[0] / Lam)
    d2 = derivative(SpectralField.from_real(g, s), 0, 2).to_real()
    np.testing.assert_allclose(d2, -(2 / Lam) ** 2 * s, atol=1e-11)


@given(grids, st.integers(0, 2), st.sampled_from([1, 2, 3]))
def test_mode_derivative_exact(gn, axis, order):
    g = Grid(gn[0], gn[1], 1.3)
    axis = axis % g.dim
    m = g.n // 4
    phase = 2 * m * g.mesh[axis] / g.Lambda
    f = SpectralField.from_real(g, np.cos(phase))
    k = 2 * m / g.Lambda
    exact = {1: -k * np.sin(phase), 2: -k**2 * np.cos(phase), 3: k**3 * np.sin(phase)}[order]
    np.testing.assert_allclose(derivative(f, axis, order).to_real(), exact, atol=1e-12 * k**order)


def test_constant_has_no_derivative():
    g = Grid(3, 8, 1.0)
    f = SpectralField.from_real(g, np.full(g.shape, 3.5))
    for axis in range(3):
        for order in (1, 2, 3):
            assert np.max(np.abs(derivative(f, axis, order).coefficients)) == 0.0


def test_nyquist_zeroed_for_odd_orders():
    g = Grid(2, 16, 1.0)
    f = SpectralField.from_real(g, np.cos(g.n / 2 * 2 * g.mesh[0]))
    assert np.max(np.abs(derivative(f, 0, 1).coefficients)) == 0.0
    assert np.max(np.abs(derivative(f, 0, 3).coefficients)) == 0.0


def test_derivative_matches_fd8(rng):
    g = Grid(2, 128, 1.0)
    f = band_limited(g, 1, 6, rng)[0]
    exact = derivative(SpectralField.from_real(g, f), 1, 1).to_real()
    fd = oracles.fd8_derivative(f, g.spacing, axis=1)
    assert np.max(np.abs(fd - exact)) <= 1e-6 * np.max(np.abs(exact))


@given(grids, seeds)
def test_leray_divergence_free_idempotent_symmetric(gn, seed):
    g = Grid(gn[0], gn[1], 1.1)
    r = np.random.default_rng(seed)
    v = SpectralField.from_real(g, r.standard_normal((g.dim,) + g.shape))
    w = SpectralField.from_real(g, r.standard_normal((g.dim,) + g.shape))
    Pv, Pw = leray_project(v), leray_project(w)
    assert np.max(np.abs(g.inverse(divergence_coeffs(g, Pv.coefficients)))) <= 1e-12
    assert np.max(np.abs(leray_project(Pv).coefficients - Pv.coefficients)) <= 1e-13 * np.max(np.abs(Pv.coefficients))
    assert Pv.inner(w) == pytest.approx(v.inner(Pw), rel=1e-12, abs=1e-12)
    np.testing.assert_allclose(g.mean(Pv.coefficients), g.mean(v.coefficients), atol=1e-14)


def test_leray_annihilates_gradients(rng):
    g = Grid(2, 32, 1.0)
    phi = band_limited(g, 1, 8, rng)[0]
    grad = gradient_coeffs(g, g.forward(phi))
    assert np.max(np.abs(leray_project(SpectralField(g, grad)).coefficients)) <= 1e-12 * np.max(np.abs(grad))


def test_integration_by_parts(rng):
    for g in (Grid(2, 32, 1.0), Grid(3, 16, 0.8)):
        a, b = (g.forward(x) for x in band_limited(g, 2, g.n // 3, rng))
        lhs = g.inner(laplacian_coeffs(g, a), b)
        rhs = -sum(g.inner(da, db) for da, db in zip(gradient_coeffs(g, a), gradient_coeffs(g, b)))
        assert lhs == pytest.approx(rhs, rel=1e-10)


def test_dealias_examples(rng):
    g = Grid(2, 64, 1.0)
    f = band_limited(g, 1, g.n // 3, rng)
    kept = dealias(SpectralField.from_real(g, f)).to_real()
    np.testing.assert_allclose(kept, f, atol=1e-13)
    nyq = np.cos(g.n / 2 * 2 * g.mesh[0])
    assert np.max(np.abs(dealias(SpectralField.from_real(g, nyq)).coefficients)) == 0.0


def test_dealiased_product_has_no_aliasing(rng):
    g = Grid(2, 32, 1.0)
    fine = Grid(2, 64, 1.0)
    cut = g.n // 3
    keep = (np.abs(fine.j[0]) <= cut) & (np.abs(fine.j[1]) <= cut)
    a, b = (fine.inverse(fine.forward(x) * keep) for x in rng.standard_normal((2,) + fine.shape))
    # the product is resolved exactly on the fine grid
    ref = fine.inverse(fine.forward(a * b) * keep)[::2, ::2]
    got = dealias(SpectralField.from_real(g, a[::2, ::2] * b[::2, ::2])).to_real()
    np.testing.assert_allclose(got, ref, atol=1e-13 * np.max(np.abs(ref)))


@given(seeds, st.integers(1, 40))
@settings(max_examples=30)
def test_galerkin_idempotent_self_adjoint(seed, M):
    g = Grid(2, 16, 1.0)
    r = np.random.default_rng(seed)
    u = SpectralField.from_real(g, r.standard_normal((2,) + g.shape))
    v = SpectralField.from_real(g, r.standard_normal((2,) + g.shape))
    Pu = galerkin_project(u, M)
    np.testing.assert_array_equal(galerkin_project(Pu, M).coefficients, Pu.coefficients)
    assert Pu.inner(v) == pytest.approx(u.inner(galerkin_project(v, M)), rel=1e-12, abs=1e-12)


def test_galerkin_examples():
    g = Grid(2, 16, 1.0)
    x, y = g.mesh
    u = SpectralField.from_real(g, np.stack([np.sin(2 * y), np.sin(6 * y)]))
    full = galerkin_project(u, 10_000)
    np.testing.assert_allclose(full.to_real(), u.to_real(), atol=1e-14)
    low = galerkin_project(u, 1).to_real()
    np.testing.assert_allclose(low[0], np.sin(2 * y), atol=1e-13)
    np.testing.assert_allclose(low[1], 0.0, atol=1e-13)


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid(2, 12, 1.0)
    with pytest.raises(ValueError):
        Grid(4, 16, 1.0)
    with pytest.raises(ValueError):
        Grid(2, 16, 0.0)
