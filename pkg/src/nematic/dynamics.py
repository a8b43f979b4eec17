"""Coupled Q-tensor / Navier-Stokes evolution on the periodic box.

    dQ/dt + (u.grad)Q - S(Q, grad u) = Gamma H
    du/dt + (u.grad)u + grad p       = nu Lap u + div(tau + sigma),   div u = 0

with H = L Lap Q - theta <dpsi/dQ> + kappa Q.  Gradient convention:
(grad u)_ij = d_j u_i.  Prognostic variables live in Fourier space and are
kept inside the 2/3 band, so every quadratic product is alias free before the
final truncation.
"""
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .errors import BlowUp, ValidationError
from .potential import make_potential
from .spectral import Grid, divergence_coeffs, leray_coeffs
from .tensor_algebra import components_to_matrix, matrix_to_components, margin_field, n_components

BLOWUP_NORM = 1e8


@dataclass(frozen=True)
class SimConfig:
    Gamma: float = 1.0
    L: float = 0.01
    theta: float = 1.0
    kappa: float = 1.0
    nu: float = 0.1
    xi: float = 0.0
    Lambda: float = 1.0
    n: int = 64
    dt: float = 1e-3
    T: float = 1.0
    N: int = 16
    M: int = 0
    dim: int = 2
    seed: int = 0
    record_every: int = 10
    snapshot_every: int = 0
    output_dir: str = "run"
    initial: str = "random"
    q_amplitude: float = 0.3
    q_margin: float = 0.0
    u_amplitude: float = 0.1
    band: int = 4

    def __post_init__(self):
        for name in ("Gamma", "L", "theta", "kappa", "nu", "Lambda", "dt"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValidationError(name, f"must be strictly positive, got {v}")
        if not (np.isfinite(self.T) and self.T >= 0):
            raise ValidationError("T", f"must be >= 0, got {self.T}")
        if not np.isfinite(self.xi):
            raise ValidationError("xi", "must be finite")
        if self.dim not in (2, 3):
            raise ValidationError("dim", f"must be 2 or 3, got {self.dim}")
        if self.n < 4 or self.n & (self.n - 1):
            raise ValidationError("n", f"must be a power of two >= 4, got {self.n}")
        for name in ("N", "M", "seed", "snapshot_every", "band"):
            if getattr(self, name) < 0:
                raise ValidationError(name, "must be >= 0")
        if self.record_every < 1:
            raise ValidationError("record_every", "must be >= 1")
        if self.initial not in ("random", "rest", "taylor-green", "homogeneous"):
            raise ValidationError("initial", f"unknown initial data {self.initial!r}")
        if not 0.0 <= self.q_margin < 1.0 / self.dim:
            raise ValidationError("q_margin", f"must lie in [0, 1/dim), got {self.q_margin}")
        if self.q_amplitude < 0 or self.u_amplitude < 0:
            raise ValidationError("q_amplitude" if self.q_amplitude < 0 else "u_amplitude", "must be >= 0")

    @property
    def grid(self):
        return Grid(self.dim, self.n, self.Lambda)

    @property
    def n_steps(self):
        return int(round(self.T / self.dt))

    def physics_key(self):
        """Everything that determines the trajectory besides the initial state."""
        return {f.name: getattr(self, f.name) for f in fields(self)
                if f.name in ("Gamma", "L", "theta", "kappa", "nu", "xi", "Lambda", "n", "dt", "N", "M", "dim")}

    def with_(self, **kw):
        return replace(self, **kw)


@dataclass
class State:
    """Spectral state: Qh (nc, *spectral) and uh (d, *spectral)."""

    grid: Grid
    Qh: np.ndarray = field(repr=False)
    uh: np.ndarray = field(repr=False)
    t: float = 0.0
    step: int = 0
    # real-space values this state was built from; snapshots store these so a
    # reloaded state reproduces Qh and uh bit for bit
    source: np.ndarray = field(default=None, repr=False, compare=False)

    @classmethod
    def from_real(cls, grid, Q_comps, u, t=0.0, step=0):
        Q_comps = np.asarray(Q_comps, dtype=float)
        u = np.asarray(u, dtype=float)
        Qh = grid.forward(Q_comps) * grid.dealias_mask
        uh = leray_coeffs(grid, grid.forward(u)) * grid.dealias_mask
        return cls(grid, Qh, uh, t, step, np.concatenate([Q_comps, u], axis=0))

    def Q_components(self):
        return self.grid.inverse(self.Qh)

    def Q_matrix(self):
        return components_to_matrix(self.Q_components(), self.grid.dim)

    def u(self):
        return self.grid.inverse(self.uh)

    def copy(self):
        return State(self.grid, self.Qh.copy(), self.uh.copy(), self.t, self.step,
                     None if self.source is None else self.source.copy())


# --- pointwise terms ---------------------------------------------------------------

def _eye(d):
    return np.eye(d)


def tumbling_S(Q, gradu, xi):
    """S = (D0 + xi D)(Q + I/d) - (Q + I/d)(D0 - xi D) - 2 xi (Q + I/d) tr[Q grad u].

    Works on single matrices or stacks (..., d, d).
    """
    Q = np.asarray(Q, dtype=float)
    gradu = np.asarray(gradu, dtype=float)
    d = Q.shape[-1]
    gT = np.swapaxes(gradu, -1, -2)
    D0 = 0.5 * (gradu - gT)
    D = 0.5 * (gradu + gT)
    S = D0 @ Q - Q @ D0
    if xi != 0.0:
        A = Q + _eye(d) / d
        tr = np.einsum("...ij,...ji->...", Q, gradu)
        S = S + xi * (D @ A + A @ D) - 2.0 * xi * A * tr[..., None, None]
    return S


def stress_tau(Q, H, gradQ, xi, L):
    """tau_ij = -xi (A H + H A)_ij + 2 xi A_ij tr[QH] - L tr[d_i Q d_j Q],  A = Q + I/d.

    gradQ has the derivative axis first: (d, ..., d, d).
    """
    d = Q.shape[-1]
    tau = -L * np.einsum("i...ab,j...ba->...ij", gradQ, gradQ)
    if xi != 0.0:
        A = Q + _eye(d) / d
        tr = np.einsum("...ij,...ji->...", Q, H)
        tau = tau - xi * (A @ H + H @ A) + 2.0 * xi * A * tr[..., None, None]
    return tau


def stress_sigma(Q, H):
    return Q @ H - H @ Q


# --- field assembly ------------------------------------------------------------------

def _matrix_field(grid, comps_h):
    return components_to_matrix(grid.inverse(comps_h), grid.dim)


def _to_components_h(grid, mat):
    return grid.forward(matrix_to_components(mat))


def gradient_matrices(grid, Qh):
    """(d, *shape, d, d): spatial derivatives of Q as full matrices."""
    return np.stack([_matrix_field(grid, grid.multiplier(a, 1) * Qh) for a in range(grid.dim)])


def velocity_gradient(grid, uh):
    """(*shape, d, d) with entry [i, j] = d_j u_i."""
    d = grid.dim
    return np.stack([np.stack([grid.inverse(grid.multiplier(j, 1) * uh[i]) for j in range(d)], axis=-1)
                     for i in range(d)], axis=-2)


def molecular_field_H(Qh, grid, potential, cfg, Q=None):
    """H = L Lap Q - theta <dpsi/dQ> + kappa Q as real matrices, plus the potential values."""
    if Q is None:
        Q = _matrix_field(grid, Qh)
    psi_vals, psi_grad = potential.evaluate(Q)
    lapQ = _matrix_field(grid, -grid.k2 * Qh)
    return cfg.L * lapQ - cfg.theta * psi_grad + cfg.kappa * Q, psi_vals


class Dynamics:
    """Right-hand side and integrating-factor RK2 stepper for a fixed config."""

    def __init__(self, cfg, potential=None):
        self.cfg = cfg
        self.grid = cfg.grid
        self.potential = make_potential(cfg.dim, cfg.N) if potential is None else potential
        g = self.grid
        self.mask = g.dealias_mask
        self.u_mask = self.mask & g.galerkin_mask(cfg.M) if cfg.M > 0 else self.mask
        self.decay_Q = np.exp(-cfg.Gamma * cfg.L * g.k2 * cfg.dt)
        self.decay_u = np.exp(-cfg.nu * g.k2 * cfg.dt)
        self.half_Q = np.exp(-0.5 * cfg.Gamma * cfg.L * g.k2 * cfg.dt)
        self.half_u = np.exp(-0.5 * cfg.nu * g.k2 * cfg.dt)

    def nonlinear(self, Qh, uh):
        """Everything except Gamma L Lap Q and nu Lap u, dealiased and projected."""
        cfg, g, d = self.cfg, self.grid, self.grid.dim
        Q = _matrix_field(g, Qh)
        u = g.inverse(uh)
        gradQ = gradient_matrices(g, Qh)
        gradu = velocity_gradient(g, uh)
        H, _ = molecular_field_H(Qh, g, self.potential, cfg, Q)
        # Q equation: transport, tumbling and the non-diffusive part of Gamma H
        adv_Q = np.einsum("a...,a...ij->...ij", u, gradQ)
        H_local = H - cfg.L * _matrix_field(g, -g.k2 * Qh)
        rQ = -adv_Q + tumbling_S(Q, gradu, cfg.xi) + cfg.Gamma * H_local
        rQh = _to_components_h(g, rQ) * self.mask
        # u equation: transport and stresses
        adv_u = np.einsum("j...,...ij->i...", u, gradu)
        stress = stress_tau(Q, H, gradQ, cfg.xi, cfg.L) + stress_sigma(Q, H)
        div = np.stack([sum(g.multiplier(j, 1) * g.forward(stress[..., i, j]) for j in range(d))
                        for i in range(d)])
        ruh = leray_coeffs(g, div - g.forward(adv_u)) * self.u_mask
        return rQh, ruh

    def rhs(self, state):
        """Full time derivative (including the diffusive linear parts)."""
        cfg, g = self.cfg, self.grid
        rQh, ruh = self.nonlinear(state.Qh, state.uh)
        return (rQh - cfg.Gamma * cfg.L * g.k2 * state.Qh, ruh - cfg.nu * g.k2 * state.uh)

    def step(self, state):
        return self.step_with_stage(state)[0]

    def step_with_stage(self, state):
        """One step; also returns the predictor stage (Qh*, uh*) for companions."""
        dt = self.cfg.dt
        k1Q, k1u = self.nonlinear(state.Qh, state.uh)
        Qs = self.decay_Q * (state.Qh + dt * k1Q)
        us = self.decay_u * (state.uh + dt * k1u)
        k2Q, k2u = self.nonlinear(Qs, us)
        Qn = self.decay_Q * (state.Qh + 0.5 * dt * k1Q) + 0.5 * dt * k2Q
        un = self.decay_u * (state.uh + 0.5 * dt * k1u) + 0.5 * dt * k2u
        un = leray_coeffs(self.grid, un) * self.u_mask
        Qn = Qn * self.mask
        nxt = State(self.grid, Qn, un, (state.step + 1) * dt, state.step + 1)
        self.check(nxt)
        return nxt, (Qs, us)

    def check(self, state):
        g = self.grid
        nQ, nu = g.norm(state.Qh), g.norm(state.uh)
        if not (np.isfinite(nQ) and np.isfinite(nu)) or max(nQ, nu) > BLOWUP_NORM:
            raise BlowUp(f"field norm exceeded {BLOWUP_NORM:g} at t={state.t:g} (|Q|={nQ:.3e}, |u|={nu:.3e})")


def rhs(state, cfg, potential=None):
    return Dynamics(cfg, potential).rhs(state)


def step(state, cfg, potential=None):
    return Dynamics(cfg, potential).step(state)


def divergence_sup(state):
    g = state.grid
    return float(np.max(np.abs(g.inverse(divergence_coeffs(g, state.uh)))))


def canonical(state):
    """Round-trip the state through its real-space values.

    Checkpoint steps pass through this so that a run restarted from a snapshot
    file starts from exactly the same bits as the original run did.
    """
    return State.from_real(state.grid, state.Q_components(), state.u(), state.t, state.step)


def run(cfg, state, potential=None, on_record=None, on_snapshot=None, stop_step=None):
    """Advance to T, calling on_record every record_every steps (and at both ends).

    Returns (final_state, records) with records built by diagnostics.energy_record.
    When snapshot_every > 0 the state is canonicalized at every snapshot step.
    """
    from dataclasses import replace as _replace

    from .diagnostics import energy_record, interval_residual

    dyn = Dynamics(cfg, potential)
    records = []
    n_steps = cfg.n_steps if stop_step is None else stop_step

    def record(s):
        rec = energy_record(s, dyn.potential, cfg)
        if records:
            rec = _replace(rec, residual=interval_residual(records[-1], rec))
        records.append(rec)
        if on_record is not None:
            on_record(rec, s)

    if state.step % cfg.record_every == 0 or state.step == n_steps:
        record(state)
    while state.step < n_steps:
        state = dyn.step(state)
        if cfg.snapshot_every and state.step % cfg.snapshot_every == 0:
            state = canonical(state)
            if on_snapshot is not None:
                on_snapshot(state)
        if state.step % cfg.record_every == 0 or state.step == n_steps:
            record(state)
    return state, records


# --- initial data ----------------------------------------------------------------------

def _band_noise(grid, channels, band, rng):
    white = rng.standard_normal((channels,) + grid.shape)
    fh = grid.forward(white)
    jj = sum(ja**2 for ja in grid.j)
    fh *= (jj <= band**2) & (jj > 0)
    return grid.inverse(fh)


def scale_to_margin(Q_comps, dim, margin):
    """Rescale a zero-mean-ish Q field so its minimum physicality margin equals ``margin``."""
    mat = components_to_matrix(Q_comps, dim)
    lam = np.linalg.eigvalsh(mat)
    lo, hi = lam[..., 0].min(), lam[..., -1].max()
    cand = []
    if lo < 0:
        cand.append((1.0 / dim - margin) / (-lo))
    if hi > 0:
        cand.append((1.0 - 1.0 / dim - margin) / hi)
    return Q_comps * min(cand)


def random_state(cfg, margin=None, q_amplitude=None, u_amplitude=None, band=None):
    """Random band-limited data.

    Q is scaled so that its minimum physicality margin is ``margin`` or, failing
    that, so that sup |Q|_F equals q_amplitude; u is divergence free with
    sup |u| = u_amplitude.
    """
    g = cfg.grid
    rng = np.random.default_rng(cfg.seed)
    band = cfg.band if band is None else band
    nc = n_components(cfg.dim)
    Qc = _band_noise(g, nc, band, rng)
    uc = _band_noise(g, cfg.dim, band, rng)
    uc = g.inverse(leray_coeffs(g, g.forward(uc)))
    margin = cfg.q_margin if margin is None and cfg.q_margin > 0 else margin
    if margin is not None:
        Qc = scale_to_margin(Qc, cfg.dim, margin)
    else:
        amp = cfg.q_amplitude if q_amplitude is None else q_amplitude
        frob = np.sqrt(np.sum(components_to_matrix(Qc, cfg.dim) ** 2, axis=(-1, -2)))
        Qc = Qc * (amp / frob.max())
    ua = cfg.u_amplitude if u_amplitude is None else u_amplitude
    umax = np.sqrt(np.sum(uc**2, axis=0)).max()
    uc = uc * (ua / umax) if umax > 0 else uc
    return State.from_real(g, Qc, uc)


def taylor_green_state(cfg, amplitude=1.0):
    """Q = 0 and the lowest-mode Taylor-Green vortex in the (x1, x2) plane."""
    g = cfg.grid
    k = 2.0 / cfg.Lambda
    X = g.mesh
    u = np.zeros((cfg.dim,) + g.shape)
    u[0] = amplitude * np.sin(k * X[0]) * np.cos(k * X[1])
    u[1] = -amplitude * np.cos(k * X[0]) * np.sin(k * X[1])
    return State.from_real(g, np.zeros((n_components(cfg.dim),) + g.shape), u)


def homogeneous_state(cfg, Q0):
    """Spatially constant Q0 (a Sym0Matrix or component vector) and u = 0."""
    g = cfg.grid
    comps = np.asarray(getattr(Q0, "components", Q0), dtype=float)
    Qc = comps[:, None, None] * np.ones((1,) + g.shape) if cfg.dim == 2 else \
        comps[:, None, None, None] * np.ones((1,) + g.shape)
    return State.from_real(g, Qc, np.zeros((cfg.dim,) + g.shape))


def initial_state(cfg):
    if cfg.initial == "rest":
        g = cfg.grid
        return State.from_real(g, np.zeros((n_components(cfg.dim),) + g.shape), np.zeros((cfg.dim,) + g.shape))
    if cfg.initial == "taylor-green":
        return taylor_green_state(cfg, cfg.u_amplitude)
    if cfg.initial == "homogeneous":
        comps = np.zeros(n_components(cfg.dim))
        comps[0] = cfg.q_amplitude
        return homogeneous_state(cfg, comps)
    return random_state(cfg)


def min_margin(state):
    return float(margin_field(state.Q_matrix()).min())
