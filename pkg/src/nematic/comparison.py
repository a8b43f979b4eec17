"""Scalar advection-diffusion companions of the Q/u solver.

G solves  g_t + (u.grad) g - Gamma L Lap g = 0            with g(0) = psi_N(Q0) - mean
Hc solves h_t + (u.grad) h - Gamma L Lap h = c tr[Q^2]     with h(0) = mean psi_N(Q0)

where c = Gamma kappa^2 / (2 theta).  For xi = 0 the defect psi_N(Q) - G - Hc
obeys a parabolic inequality with zero data, so it should stay <= 0 up to
discretization error.  Both scalars are advanced with the same integrating-factor
RK2 stages as the simulator, using the simulator's own stage velocities.
"""
from dataclasses import dataclass

import numpy as np

from .dynamics import Dynamics, State, _matrix_field, canonical
from .errors import BlowUp, ConfigMismatch, NonZeroMean
from .potential import make_potential

BLOWUP_NORM = 1e8


@dataclass
class ScalarField:
    grid: object
    values: np.ndarray

    @property
    def spectral(self):
        return self.grid.forward(self.values)

    def mean(self):
        return float(np.mean(self.values))


def _transport(grid, gh, u):
    """Dealiased (u.grad) g in spectral form."""
    grad = [grid.inverse(grid.multiplier(a, 1) * gh) for a in range(grid.dim)]
    adv = sum(u[a] * grad[a] for a in range(grid.dim))
    return grid.forward(adv) * grid.dealias_mask


def _stage(grid, gh, u, source):
    r = -_transport(grid, gh, u)
    if source is not None:
        r = r + grid.forward(source)
    return r


def advect_diffuse_coeffs(grid, gh, u, source, dt, GammaL, u_stage=None, source_stage=None):
    """One IF-RK2 step on spectral coefficients.

    ``u``/``source`` are used for the first stage; ``u_stage``/``source_stage``
    (defaulting to the same) for the second, so the scalar can ride along the
    simulator's own stages.
    """
    E = np.exp(-GammaL * grid.k2 * dt)
    u_stage = u if u_stage is None else u_stage
    source_stage = source if source_stage is None else source_stage
    k1 = _stage(grid, gh, u, source)
    gs = E * (gh + dt * k1)
    k2 = _stage(grid, gs, u_stage, source_stage)
    out = E * (gh + 0.5 * dt * k1) + 0.5 * dt * k2
    nrm = grid.norm(out)
    if not np.isfinite(nrm) or nrm > BLOWUP_NORM:
        raise BlowUp(f"scalar field norm {nrm:.3e} exceeded {BLOWUP_NORM:g}")
    return out


def advect_diffuse_step(g, u, source, dt, GammaL):
    grid = g.grid
    src = None if source is None else np.asarray(getattr(source, "values", source), dtype=float)
    gh = advect_diffuse_coeffs(grid, g.spectral, np.asarray(u, dtype=float), src, dt, GammaL)
    return ScalarField(grid, grid.inverse(gh))


# --- comparison certificate ---------------------------------------------------------

@dataclass(frozen=True)
class Trajectory:
    """A deterministic run: config plus initial state (replayed on demand)."""

    config: object
    initial: State


@dataclass(frozen=True)
class CertificateReport:
    t: np.ndarray
    defect: np.ndarray  # sup_x (psi_N(Q) - G - Hc) per checkpoint
    psi_sup: np.ndarray
    G_sup: np.ndarray
    Hc_sup: np.ndarray
    Hc_bound: np.ndarray  # |mean psi_N(Q0)| e^t + c e^t
    N: int

    @property
    def max_defect(self):
        return float(np.max(self.defect))

    @property
    def tolerance(self):
        return 5e-3 * (1.0 + float(np.max(np.abs(self.psi_sup))))

    @property
    def holds(self):
        return self.max_defect <= self.tolerance

    @property
    def linf_bound_holds(self):
        return bool(np.all(self.Hc_sup <= self.Hc_bound + 1e-3))

    def rows(self):
        return np.column_stack([self.t, self.defect, self.psi_sup, self.G_sup, self.Hc_sup])


def certificate(trajectory, config, N, every=None):
    """Replay the trajectory and co-evolve G and Hc; checkpoints every ``every`` steps."""
    tc = trajectory.config
    if tc.physics_key() != config.physics_key():
        diff = sorted(k for k, v in tc.physics_key().items() if config.physics_key()[k] != v)
        raise ConfigMismatch(f"trajectory config differs in {', '.join(diff)}")
    if config.xi != 0.0:
        raise ConfigMismatch("the comparison certificate requires xi = 0")
    if N < 1:
        raise ValueError("certificate needs a mollified potential (N >= 1)")
    if N != tc.N:
        raise ConfigMismatch(f"trajectory was produced with N={tc.N}, certificate asked for N={N}")
    grid = tc.grid
    if trajectory.initial.grid != grid:
        raise ConfigMismatch("initial state grid differs from the config grid")

    every = config.record_every if every is None else every
    pot = make_potential(tc.dim, N)
    dyn = Dynamics(tc, pot)
    c = tc.Gamma * tc.kappa**2 / (2.0 * tc.theta)
    GammaL = tc.Gamma * tc.L
    dt = tc.dt

    state = trajectory.initial
    psi0, _ = pot.evaluate(state.Q_matrix())
    mean0 = float(np.mean(psi0))
    Gh = grid.forward(psi0 - mean0)
    Hh = grid.forward(np.full(grid.shape, mean0))

    def trQ2(Qh):
        Q = _matrix_field(grid, Qh)
        return np.einsum("...ij,...ji->...", Q, Q)

    rows = []

    def checkpoint(st):
        psi, _ = pot.evaluate(st.Q_matrix())
        G = grid.inverse(Gh)
        Hc = grid.inverse(Hh)
        rows.append((st.t, float(np.max(psi - G - Hc)), float(np.max(psi)), float(np.max(G)),
                     float(np.max(np.abs(Hc))), abs(mean0) * np.exp(st.t) + c * np.exp(st.t)))

    checkpoint(state)
    for _ in range(tc.n_steps):
        # the scalars ride along the simulator's own predictor stage
        nxt, (Qs, us) = dyn.step_with_stage(state)
        u0, u1 = grid.inverse(state.uh), grid.inverse(us)
        s0, s1 = c * trQ2(state.Qh), c * trQ2(Qs)
        Gh = advect_diffuse_coeffs(grid, Gh, u0, None, dt, GammaL, u1, None)
        Hh = advect_diffuse_coeffs(grid, Hh, u0, s0, dt, GammaL, u1, s1)
        state = nxt
        if tc.snapshot_every and state.step % tc.snapshot_every == 0:
            state = canonical(state)
        if state.step % every == 0 or state.step == tc.n_steps:
            checkpoint(state)
    arr = np.array(rows)
    return CertificateReport(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], arr[:, 4], arr[:, 5], N)


# --- heat decay ---------------------------------------------------------------------

@dataclass(frozen=True)
class DecaySeries:
    t: np.ndarray
    value: np.ndarray  # |g(t)|_inf t^(d/2 + gamma) / |g0|_1
    gamma: float

    @property
    def sup(self):
        return float(np.max(self.value))


def heat_decay_check(g0, u, GammaL, T, dt, gamma=0.5, sample_every=1):
    """Evolve g_t + (u.grad) g = Gamma L Lap g and report the weighted sup norm.

    ``u`` is a frozen velocity array or a callable t -> velocity array.
    """
    grid = g0.grid
    if abs(g0.mean()) > 1e-10:
        raise NonZeroMean(f"initial data mean {g0.mean():.3e} is not zero")
    l1 = float(np.sum(np.abs(g0.values))) * grid.spacing**grid.dim
    velocity = u if callable(u) else (lambda t: u)
    gh = g0.spectral
    ts, vals = [], []
    n_steps = int(round(T / dt))
    power = grid.dim / 2.0 + gamma
    for k in range(1, n_steps + 1):
        t0 = (k - 1) * dt
        gh = advect_diffuse_coeffs(grid, gh, velocity(t0), None, dt, GammaL, velocity(t0 + dt), None)
        if k % sample_every == 0:
            t = k * dt
            ts.append(t)
            vals.append(float(np.max(np.abs(grid.inverse(gh)))) * t**power / l1)
    return DecaySeries(np.array(ts), np.array(vals), gamma)
