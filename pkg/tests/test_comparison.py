import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nematic.comparison import ScalarField, Trajectory, advect_diffuse_step, certificate, heat_decay_check
from nematic.dynamics import SimConfig, homogeneous_state, initial_state, random_state, taylor_green_state
from nematic.errors import ConfigMismatch, NonZeroMean
from nematic.spectral import Grid, leray_coeffs

from strategies import seeds


def band_field(grid, rng, band=3):
    fh = grid.forward(rng.standard_normal(grid.shape))
    mask = np.ones(grid.spectral_shape, dtype=bool)
    for ja in grid.j:
        mask &= np.abs(ja) <= band
    return grid.inverse(fh * mask)


def solenoidal(grid, rng, amplitude=1.0, band=3):
    v = np.stack([band_field(grid, rng, band) for _ in range(grid.dim)])
    v = grid.inverse(leray_coeffs(grid, grid.forward(v)))
    return v * (amplitude / np.abs(v).max())


def interpolant_max(values, factor=4):
    """Max of the trigonometric interpolant, sampled on a grid ``factor`` times finer."""
    n = values.shape[0]
    F = np.fft.fftshift(np.fft.fftn(values))
    pad = (factor - 1) * n // 2
    fine = np.fft.ifftn(np.fft.ifftshift(np.pad(F, pad))).real * factor**values.ndim
    return float(fine.max())


# --- advection-diffusion step ----------------------------------------------------------

@pytest.mark.parametrize("d, jvec", [(2, (1, 2)), (2, (3, 0)), (3, (1, 1, 2))])
def test_heat_eigenmode_decays_exactly(d, jvec):
    grid = Grid(d, 16, 1.3)
    GammaL = 0.05
    kvec = 2.0 * np.array(jvec) / grid.Lambda
    phase = sum(ka * Xa for ka, Xa in zip(kvec, grid.mesh))
    g = ScalarField(grid, np.cos(phase))
    u = np.zeros((d,) + grid.shape)
    dt, steps = 1e-2, 100
    for _ in range(steps):
        g = advect_diffuse_step(g, u, None, dt, GammaL)
    expected = np.exp(-GammaL * float(kvec @ kvec) * dt * steps)
    np.testing.assert_allclose(g.values, expected * np.cos(phase), atol=1e-8)


@pytest.mark.parametrize("d", [2, 3])
def test_constant_field_is_stationary(d, rng):
    grid = Grid(d, 16)
    u = solenoidal(grid, rng)
    g = ScalarField(grid, np.full(grid.shape, 2.5))
    for _ in range(20):
        g = advect_diffuse_step(g, u, None, 1e-2, 0.1)
    np.testing.assert_allclose(g.values, 2.5, atol=1e-13)


@settings(max_examples=10)
@given(seed=seeds)
def test_mean_preserved_without_source(seed):
    rng = np.random.default_rng(seed)
    grid = Grid(2, 16)
    u = solenoidal(grid, rng)
    g = ScalarField(grid, band_field(grid, rng))
    m0 = g.mean()
    for _ in range(1000):
        g = advect_diffuse_step(g, u, None, 1e-3, 0.05)
    assert abs(g.mean() - m0) <= 1e-10


@settings(max_examples=10)
@given(seed=seeds, smax=st.floats(0.0, 1.0))
def test_max_principle_with_bounded_source(seed, smax):
    rng = np.random.default_rng(seed)
    grid = Grid(2, 32)
    u = solenoidal(grid, rng)
    g = ScalarField(grid, band_field(grid, rng))
    src = ScalarField(grid, smax * (0.5 + 0.5 * np.cos(grid.mesh[0])))
    # grid samples can miss the peak of a band-limited field, so compare interpolant maxima
    top, dt = interpolant_max(g.values), 1e-3
    for k in range(1, 301):
        g = advect_diffuse_step(g, u, src, dt, 0.01)
        assert interpolant_max(g.values) <= top + k * dt * smax + 1e-8


# --- heat decay ------------------------------------------------------------------------

def test_decay_rejects_nonzero_mean():
    grid = Grid(2, 16)
    g0 = ScalarField(grid, 1.0 + np.cos(grid.mesh[0]))
    with pytest.raises(NonZeroMean):
        heat_decay_check(g0, np.zeros((2,) + grid.shape), 0.1, 1.0, 1e-2)


def test_decay_single_mode_tends_to_zero():
    grid = Grid(2, 16)
    g0 = ScalarField(grid, np.cos(2.0 * grid.mesh[0]))
    s = heat_decay_check(g0, np.zeros((2,) + grid.shape), 0.5, 20.0, 1e-2, sample_every=10)
    assert s.value[-1] < 1e-6 * s.sup
    assert np.all(np.diff(s.value[np.argmax(s.value):]) <= 0)


def test_decay_invariant_under_rescaling(rng):
    grid = Grid(2, 32)
    u = solenoidal(grid, rng, 0.5)
    g = band_field(grid, rng, 4)
    g -= g.mean()
    a = heat_decay_check(ScalarField(grid, g), u, 0.1, 1.0, 1e-2)
    b = heat_decay_check(ScalarField(grid, 10.0 * g), u, 0.1, 1.0, 1e-2)
    np.testing.assert_allclose(a.value, b.value, rtol=1e-12)


def test_decay_bounded_for_frozen_vortex_with_spike():
    cfg = SimConfig(n=64)
    grid = cfg.grid
    u = taylor_green_state(cfg).u()
    r2 = grid.mesh[0] ** 2 + grid.mesh[1] ** 2
    spike = np.exp(-r2 / (2 * 0.1**2))
    g0 = ScalarField(grid, spike - spike.mean())
    s = heat_decay_check(g0, u, 0.1, 10.0, 1e-2, sample_every=5)
    late = s.value[s.t >= 0.01]
    assert np.all(np.isfinite(late))
    assert late.max() < 10.0
    assert s.value[-1] < late.max()


# --- certificate -------------------------------------------------------------------------

def small_config(**kw):
    base = dict(n=16, dt=2e-3, T=0.1, record_every=10, N=16)
    base.update(kw)
    return SimConfig(**base)


def test_certificate_rejects_xi():
    cfg = small_config(xi=0.5)
    with pytest.raises(ConfigMismatch):
        certificate(Trajectory(cfg, random_state(cfg)), cfg, 16)


def test_certificate_rejects_physics_difference():
    cfg = small_config()
    with pytest.raises(ConfigMismatch, match="nu"):
        certificate(Trajectory(cfg, random_state(cfg)), cfg.with_(nu=0.2), 16)


def test_certificate_rejects_N_mismatch():
    cfg = small_config()
    with pytest.raises(ConfigMismatch, match="N=16"):
        certificate(Trajectory(cfg, random_state(cfg)), cfg, 8)


def test_certificate_rejects_foreign_initial_grid():
    cfg = small_config()
    other = cfg.with_(n=32)
    with pytest.raises(ConfigMismatch):
        certificate(Trajectory(cfg, random_state(other)), cfg, 16)


def test_certificate_rest_state():
    cfg = small_config(initial="rest")
    rep = certificate(Trajectory(cfg, initial_state(cfg)), cfg, 16)
    assert rep.max_defect <= 1e-14
    np.testing.assert_allclose(rep.G_sup, 0.0, atol=1e-14)
    assert rep.holds and rep.linf_bound_holds


@pytest.mark.parametrize("q0", [(0.2, 0.05), (-0.3, 0.1)])
def test_certificate_homogeneous(q0):
    cfg = SimConfig(n=4, dt=1e-3, T=0.5, record_every=50, N=16, kappa=2.0)
    rep = certificate(Trajectory(cfg, homogeneous_state(cfg, q0)), cfg, 16)
    assert rep.max_defect <= 1e-6
    assert rep.linf_bound_holds


def test_certificate_checkpoint_times():
    cfg = small_config()
    rep = certificate(Trajectory(cfg, random_state(cfg)), cfg, 16, every=25)
    np.testing.assert_allclose(rep.t, [0.0, 0.05, 0.1])
    assert rep.rows().shape == (3, 5)
    assert rep.defect[0] <= 1e-12


def test_certificate_defect_improves_under_refinement():
    excess = []
    for n, dt in ((16, 2e-3), (32, 1e-3), (64, 5e-4)):
        cfg = SimConfig(n=n, dt=dt, T=0.2, record_every=int(round(0.02 / dt)))
        rep = certificate(Trajectory(cfg, random_state(cfg)), cfg, 16)
        excess.append(max(rep.max_defect, 0.0))
    assert excess[1] <= excess[0] + 1e-12
    assert excess[2] <= excess[1] + 1e-12
