"""Energy functionals, dissipation residuals and physicality monitoring.

All L^2 norms are Frobenius norms of the full matrices, computed spectrally;
the potential integral uses the grid sum (midpoint rule on the periodic box).
"""
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import linprog

from .dynamics import _matrix_field, gradient_matrices, molecular_field_H, velocity_gradient
from .errors import InsufficientRecords, PhysicalityViolated
from .tensor_algebra import components_to_matrix, eigh_field, matrix_to_components, n_components

CSV_COLUMNS = ("t", "E", "F", "dissipation", "residual", "lambda_min", "lambda_max",
               "margin", "psi_sup", "convexity_integral")


@dataclass(frozen=True)
class EnergyRecord:
    t: float
    E: float
    F: float
    dissipation: float
    residual: float
    lambda_min: float
    lambda_max: float
    margin: float
    psi_sup: float
    convexity_integral: float
    # uniform-bound proxies, not part of the CSV schema
    extras: dict = field(default_factory=dict, compare=False)

    def row(self):
        d = asdict(self)
        return [d[c] for c in CSV_COLUMNS]


def component_metric(dim):
    """G with |Q|_F^2 = c^T G c for component vectors c."""
    nc = n_components(dim)
    E = components_to_matrix(np.eye(nc), dim)  # (nc, d, d)
    return np.einsum("aij,bij->ab", E, E)


def frob_norm2_h(grid, Ah):
    """Squared L^2-Frobenius norm of a Sym0 field from its spectral components."""
    G = component_metric(grid.dim)
    total = 0.0
    for a in range(G.shape[0]):
        for b in range(G.shape[1]):
            if G[a, b] != 0.0:
                total += G[a, b] * grid.inner(Ah[a], Ah[b])
    return total


def grad_norm2_h(grid, fh, metric=None):
    """Sum over derivative axes of the squared L^2 norm; metric for Sym0 components."""
    total = 0.0
    for a in range(grid.dim):
        dh = grid.multiplier(a, 1) * fh
        total += frob_norm2_h(grid, dh) if metric == "sym0" else grid.inner(dh, dh)
    return total


def grid_integral(grid, f):
    return float(np.sum(f)) * grid.spacing**grid.dim


def energy_E(state, potential, cfg, psi_vals=None):
    g = state.grid
    if psi_vals is None:
        psi_vals, _ = potential.evaluate(state.Q_matrix())
    elastic = 0.5 * cfg.L * grad_norm2_h(g, state.Qh, "sym0")
    bulk = cfg.theta * grid_integral(g, psi_vals) - 0.5 * cfg.kappa * frob_norm2_h(g, state.Qh)
    kinetic = 0.5 * g.inner(state.uh, state.uh)
    return elastic + bulk + kinetic


def energy_F(state, cfg):
    g = state.grid
    lapQ = -g.k2 * state.Qh
    return 0.5 * grad_norm2_h(g, state.uh) + 0.5 * cfg.L * frob_norm2_h(g, lapQ)


def convexity_integral(grid, Qh, potential):
    """Integral of Lap Q : dpsi/dQ over the box."""
    _, dpsi = potential.evaluate(_matrix_field(grid, Qh))
    lap = _matrix_field(grid, -grid.k2 * Qh)
    return grid_integral(grid, np.einsum("...ij,...ij->...", lap, dpsi))


def convexity_tolerance(grid, Qh, potential):
    _, dpsi = potential.evaluate(_matrix_field(grid, Qh))
    lap_norm = math.sqrt(frob_norm2_h(grid, -grid.k2 * Qh))
    dpsi_norm = math.sqrt(grid_integral(grid, np.sum(dpsi**2, axis=(-1, -2))))
    return 1e-8 * (1.0 + lap_norm * dpsi_norm)


def energy_record(state, potential, cfg, residual=float("nan")):
    g = state.grid
    Q = state.Q_matrix()
    H, psi_vals = molecular_field_H(state.Qh, g, potential, cfg, Q)
    _, dpsi = potential.evaluate(Q)
    # H as resolved by the scheme (2/3 band)
    Hh = g.forward(matrix_to_components(H)) * g.dealias_mask
    gradu2 = grad_norm2_h(g, state.uh)
    dissipation = cfg.Gamma * frob_norm2_h(g, Hh) + cfg.nu * gradu2
    lam, _ = eigh_field(Q)
    d = g.dim
    lmin, lmax = float(lam[..., 0].min()), float(lam[..., -1].max())
    lap = _matrix_field(g, -g.k2 * state.Qh)
    conv = grid_integral(g, np.einsum("...ij,...ij->...", lap, dpsi))
    dpsi_h = g.forward(matrix_to_components(dpsi))
    extras = {
        "grad_Q_norm": math.sqrt(grad_norm2_h(g, state.Qh, "sym0")),
        "u_norm": g.norm(state.uh),
        "Q_norm": math.sqrt(frob_norm2_h(g, state.Qh)),
        "lap_Q_norm2": frob_norm2_h(g, -g.k2 * state.Qh),
        "grad_u_norm2": gradu2,
        "psi_grad_norm2": frob_norm2_h(g, dpsi_h),
        "psi_mean": float(np.mean(psi_vals)),
    }
    return EnergyRecord(
        t=state.t,
        E=energy_E(state, potential, cfg, psi_vals),
        F=energy_F(state, cfg),
        dissipation=dissipation,
        residual=residual,
        lambda_min=lmin,
        lambda_max=lmax,
        margin=min(lmin + 1.0 / d, 1.0 - 1.0 / d - lmax),
        psi_sup=float(np.max(psi_vals)),
        convexity_integral=conv,
        extras=extras,
    )


def interval_residual(prev, cur):
    dt = cur.t - prev.t
    if dt <= 0:
        return float("nan")
    avg = 0.5 * (prev.dissipation + cur.dissipation)
    return abs((cur.E - prev.E) / dt + avg) / max(1.0, avg)


def dissipation_residual(records):
    """Per-interval |dE/dt + D| relative to max(1, D), D averaged over the interval."""
    if len(records) < 3:
        raise InsufficientRecords(f"need at least 3 records, got {len(records)}")
    return np.array([interval_residual(a, b) for a, b in zip(records[:-1], records[1:])])


def energy_increases(records, rel=1e-8):
    """Indices k where E(t_{k+1}) > E(t_k) + rel max(1, |E(t_k)|)."""
    return [k for k, (a, b) in enumerate(zip(records[:-1], records[1:]))
            if b.E > a.E + rel * max(1.0, abs(a.E))]


# --- higher-order energy growth ---------------------------------------------------

@dataclass(frozen=True)
class GronwallFit:
    C0: float
    C1: float
    slack: np.ndarray
    holds: bool
    F_sup: float


def gronwall_tracker(records, C0=None, C1=None):
    """Check dF/dt <= C0 F^2 + C1 on every interval.

    With C0, C1 unset the smallest nonnegative pair (minimizing the mean bound)
    is fitted by linear programming.  F^2 is taken at the larger endpoint.
    """
    if len(records) < 3:
        raise InsufficientRecords(f"need at least 3 records, got {len(records)}")
    t = np.array([r.t for r in records])
    F = np.array([r.F for r in records])
    dF = np.diff(F) / np.diff(t)
    F2 = np.maximum(F[:-1], F[1:]) ** 2
    if C0 is None or C1 is None:
        if np.all(dF <= 0):
            C0, C1 = 0.0, 0.0
        else:
            res = linprog(c=[F2.mean(), 1.0], A_ub=np.column_stack([-F2, -np.ones_like(F2)]),
                          b_ub=-dF, bounds=[(0, None), (0, None)], method="highs")
            if not res.success:
                C0, C1 = 0.0, float(max(dF.max(), 0.0))
            else:
                C0, C1 = (float(v) for v in res.x)
    slack = C0 * F2 + C1 - dF
    scale = np.maximum(1.0, np.abs(dF))
    return GronwallFit(C0, C1, slack, bool(np.all(slack >= -1e-9 * scale)), float(F.max()))


# --- physicality --------------------------------------------------------------------

@dataclass(frozen=True)
class PhysicalityReport:
    t: np.ndarray
    margin: np.ndarray
    psi_sup: np.ndarray
    t_burn: float
    delta_floor: float
    holds: bool


def strict_physicality_report(records, T=None, t_burn=None, delta_floor=1e-6, xi=0.0):
    if xi != 0.0:
        raise ValueError("the strict-physicality report is only defined for xi = 0")
    t = np.array([r.t for r in records])
    margin = np.array([r.margin for r in records])
    psi_sup = np.array([r.psi_sup for r in records])
    T = t[-1] if T is None else T
    t_burn = 0.05 * T if t_burn is None else t_burn
    bad = np.nonzero(~(margin > 0))[0]
    if bad.size:
        k = int(bad[0])
        raise PhysicalityViolated(f"margin {margin[k]:.3e} <= 0 at t={t[k]:g}", t=float(t[k]), index=k)
    late = t >= t_burn
    holds = bool(np.all(margin[late] >= delta_floor))
    return PhysicalityReport(t, margin, psi_sup, t_burn, delta_floor, holds)


def uniform_bounds(records):
    """Sup and time-integral proxies for the uniform energy bounds."""
    t = np.array([r.t for r in records])

    def integral(key):
        v = np.array([r.extras[key] for r in records])
        return float(np.trapezoid(v, t)) if len(t) > 1 else 0.0

    return {
        "sup_grad_Q": max(r.extras["grad_Q_norm"] for r in records),
        "sup_u": max(r.extras["u_norm"] for r in records),
        "sup_Q": max(r.extras["Q_norm"] for r in records),
        "int_lap_Q2": integral("lap_Q_norm2"),
        "int_grad_u2": integral("grad_u_norm2"),
        "int_psi_grad2": integral("psi_grad_norm2"),
    }


# --- energy cancellation pairs --------------------------------------------------------

def cancellation_terms(state, potential, cfg):
    """The six signed transport/stress pairs and the two null terms of the energy identity.

    Returns {"pairs": [(Q-side, u-side) for j = 1..6], "I": float, "J": float}; each
    pair should sum to zero.  Integrals use the grid sum, which is exact for the
    polynomial terms when the fields are band limited to |j| <= n/8.
    """
    g = state.grid
    d = g.dim
    xi, L = cfg.xi, cfg.L
    Q = state.Q_matrix()
    u = state.u()
    gradQ = gradient_matrices(g, state.Qh)
    gradu = velocity_gradient(g, state.uh)
    lapQ = _matrix_field(g, -g.k2 * state.Qh)
    _, dpsi = potential.evaluate(Q)
    B = cfg.theta * dpsi - cfg.kappa * Q
    A = Q + np.eye(d) / d
    gT = np.swapaxes(gradu, -1, -2)
    w0 = 0.5 * (gradu - gT)
    w1 = 0.5 * (gradu + gT)
    trQgu = np.einsum("...ij,...ji->...", Q, gradu)[..., None, None]

    def I(f):
        return grid_integral(g, f)

    def ddot(X, Y):
        return np.einsum("...ij,...ij->...", X, Y)

    adv = np.einsum("a...,a...ij->...ij", u, gradQ)
    Tp = [
        L * I(ddot(adv, lapQ)),
        -L * I(ddot(w0 @ Q - Q @ w0, lapQ)),
        -L * xi * I(ddot(w1 @ A + A @ w1, lapQ)),
        2 * L * xi * I(ddot(trQgu * A, lapQ)),
        xi * I(ddot(w1 @ A + A @ w1, B)),
        -2 * xi * I(ddot(A, B) * trQgu[..., 0, 0]),
    ]
    # d_i Q_jl d_k Q_lj d_k u_i
    t1m = np.einsum("i...jl,k...lj,...ik->...", gradQ, gradQ, gradu)
    trQlap = np.einsum("...ij,...ji->...", Q, lapQ)[..., None, None]
    trQB = np.einsum("...ij,...ji->...", Q, B)[..., None, None]
    Tm = [
        L * I(t1m),
        -L * I(ddot(Q @ lapQ - lapQ @ Q, gradu)),
        L * xi * I(ddot(A @ lapQ + lapQ @ A, gradu)),
        -2 * L * xi * I(ddot(trQlap * (Q - np.eye(d) / d), gradu)),
        -xi * I(ddot(A @ B + B @ A, gradu)),
        2 * xi * I(ddot(trQB * A, gradu)),
    ]
    null_I = I(ddot(w0 @ Q - Q @ w0, B))
    null_J = L * I(ddot(Q @ B - B @ Q, gradu))
    return {"pairs": list(zip(Tp, Tm)), "I": null_I, "J": null_J}
