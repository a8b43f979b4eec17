import numpy as np
import pytest

from nematic import potential as pot
from nematic.diagnostics import (
    CSV_COLUMNS,
    EnergyRecord,
    convexity_integral,
    convexity_tolerance,
    dissipation_residual,
    energy_E,
    energy_F,
    energy_increases,
    energy_record,
    gronwall_tracker,
    strict_physicality_report,
    uniform_bounds,
)
from nematic.dynamics import SimConfig, State, homogeneous_state, initial_state, random_state, run, taylor_green_state
from nematic.errors import InsufficientRecords, PhysicalityViolated
from nematic.tensor_algebra import Sym0Matrix

import oracles


def fake_records(ts, Es=None, Fs=None, margins=None):
    n = len(ts)
    Es = np.zeros(n) if Es is None else Es
    Fs = np.zeros(n) if Fs is None else Fs
    margins = np.full(n, 0.5) if margins is None else margins
    return [EnergyRecord(t, E, F, 0.0, float("nan"), 0.0, 0.0, m, 0.0, 0.0)
            for t, E, F, m in zip(ts, Es, Fs, margins)]


def test_csv_schema_frozen():
    assert ",".join(CSV_COLUMNS) == "t,E,F,dissipation,residual,lambda_min,lambda_max,margin,psi_sup,convexity_integral"


@pytest.mark.parametrize("dim, n", [(2, 16), (3, 8)])
def test_energy_of_rest_state(dim, n):
    cfg = SimConfig(dim=dim, n=n, Lambda=1.3, theta=1.7, initial="rest")
    s = initial_state(cfg)
    p = pot.make_potential(dim, 16)
    vol = (cfg.Lambda * np.pi) ** dim
    assert energy_E(s, p, cfg) == pytest.approx(cfg.theta * vol * oracles.PSI0[dim], rel=1e-12)
    doubled = cfg.with_(theta=2 * cfg.theta)
    assert energy_E(s, p, doubled) == pytest.approx(2 * energy_E(s, p, cfg), rel=1e-14)
    assert energy_F(s, cfg) == 0.0


def test_energy_of_taylor_green():
    a = 0.8
    cfg = SimConfig(n=32, Lambda=1.2, initial="rest")
    p = pot.make_potential(2, 16)
    vol = (cfg.Lambda * np.pi) ** 2
    rest = energy_E(initial_state(cfg), p, cfg)
    tg = taylor_green_state(cfg, a)
    assert energy_E(tg, p, cfg) == pytest.approx(rest + (a**2 / 2) * vol / 2, rel=1e-12)
    k = 2 / cfg.Lambda
    assert energy_F(tg, cfg) == pytest.approx(0.5 * a**2 * k**2 * vol, rel=1e-12)


def test_F_decreases_for_taylor_green():
    cfg = SimConfig(n=16, dt=1e-3, T=0.1, record_every=10, initial="taylor-green", u_amplitude=1.0)
    _, rec = run(cfg, initial_state(cfg))
    F = np.array([r.F for r in rec])
    assert np.all(np.diff(F) < 0)
    fit = gronwall_tracker(rec)
    assert fit.holds and fit.C0 == 0.0 and fit.C1 == 0.0


def test_rest_state_records():
    cfg = SimConfig(n=16, dt=1e-3, T=0.05, record_every=5, initial="rest")
    _, rec = run(cfg, initial_state(cfg))
    assert np.all(dissipation_residual(rec) == 0.0)
    assert energy_increases(rec) == []
    fit = gronwall_tracker(rec)
    assert (fit.C0, fit.C1) == (0.0, 0.0)
    rep = strict_physicality_report(rec)
    assert rep.holds and np.all(rep.margin == 0.5)


def test_record_invariants():
    cfg = SimConfig(n=32, xi=0.4, u_amplitude=0.4)
    rec = energy_record(random_state(cfg), pot.make_potential(2, 16), cfg)
    assert rec.dissipation >= 0 and rec.margin <= 0.5
    assert len(rec.row()) == len(CSV_COLUMNS)


def test_insufficient_records():
    with pytest.raises(InsufficientRecords):
        dissipation_residual(fake_records([0.0, 0.1]))
    with pytest.raises(InsufficientRecords):
        gronwall_tracker(fake_records([0.0, 0.1]))


def test_energy_increase_detection():
    rec = fake_records([0, 1, 2, 3], Es=np.array([1.0, 0.5, 0.5 + 1e-9, 0.6]))
    assert energy_increases(rec) == [2]


def test_gronwall_fit_on_growth():
    t = np.linspace(0.0, 1.0, 21)
    F = 1.0 / (2.0 - t)  # dF/dt = F^2
    fit = gronwall_tracker(fake_records(t, Fs=F))
    assert fit.holds and np.isfinite(fit.C0) and np.isfinite(fit.C1)
    assert fit.C0 > 0 or fit.C1 > 0
    bad = gronwall_tracker(fake_records(t, Fs=F), C0=0.0, C1=0.0)
    assert not bad.holds


def test_physicality_report_violation_and_xi():
    rec = fake_records([0.0, 0.5, 1.0], margins=np.array([0.1, -1e-3, 0.2]))
    with pytest.raises(PhysicalityViolated) as exc:
        strict_physicality_report(rec)
    assert exc.value.t == 0.5
    with pytest.raises(ValueError):
        strict_physicality_report(fake_records([0.0, 1.0, 2.0]), xi=0.3)
    late = fake_records([0.0, 0.01, 0.5, 1.0], margins=np.array([1e-3, 1e-7, 1e-7, 1e-3]))
    assert not strict_physicality_report(late).holds


def test_homogeneous_margin_relaxes_monotonically():
    cfg = SimConfig(n=4, dt=1e-3, T=0.5, record_every=10)
    s = homogeneous_state(cfg, Sym0Matrix(2, [0.4, 0.1]))
    _, rec = run(cfg, s)
    m = np.array([r.margin for r in rec])
    assert np.all(np.diff(m) >= -1e-14)
    assert strict_physicality_report(rec).holds


def test_convexity_integral_examples():
    p = pot.make_potential(2, 16)
    cfg = SimConfig(n=32, Lambda=1.0)
    g = cfg.grid
    hom = homogeneous_state(cfg, Sym0Matrix(2, [0.3, -0.1]))
    assert abs(convexity_integral(g, hom.Qh, p)) <= 1e-12
    # small single mode about 0: -c |grad Q|^2 with c the curvature of psi_N at 0
    h = 1e-4
    c = p.evaluate(Sym0Matrix(2, [h, 0.0]).matrix())[1][0, 0] / h
    eps = 1e-3
    k = 2.0
    prof = np.sin(k * g.mesh[1])
    s = State.from_real(g, eps * np.stack([prof, 0.5 * prof]), np.zeros((2,) + g.shape))
    grad2 = 2 * (1 + 0.25) * eps**2 * k**2 * 0.5 * g.volume  # |Q|_F^2 = 2 (q11^2 + q12^2)
    val = convexity_integral(g, s.Qh, p)
    assert val < 0
    assert val == pytest.approx(-c * grad2, rel=1e-4)


def test_convexity_integral_random_fields():
    p = pot.make_potential(2, 16)
    for seed in range(5):
        cfg = SimConfig(n=32, seed=seed, q_margin=0.02)
        s = random_state(cfg)
        assert convexity_integral(cfg.grid, s.Qh, p) <= convexity_tolerance(cfg.grid, s.Qh, p)


@pytest.fixture(scope="module")
def bounds_by_N():
    out = {}
    for N in (8, 16, 32):
        cfg = SimConfig(n=32, dt=1e-3, T=0.2, record_every=20, N=N, seed=2)
        _, rec = run(cfg, random_state(cfg))
        out[N] = uniform_bounds(rec)
    return out


@pytest.mark.parametrize("key", ["sup_grad_Q", "sup_u", "sup_Q", "int_lap_Q2", "int_grad_u2", "int_psi_grad2"])
def test_uniform_bounds_stable_in_N(bounds_by_N, key):
    vals = np.array([bounds_by_N[N][key] for N in (8, 16, 32)])
    assert np.all(np.isfinite(vals))
    assert vals.max() <= 1.2 * vals.min(), f"{key} across N=8,16,32: {vals}"
