"""Fast property checks behind the ``verify`` subcommand.

Each check returns a Check(name, passed, detail).  Sample sizes are kept small
enough for an interactive run; the test suite exercises the same properties at
full size.
"""
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from . import potential as pot
from .dynamics import Dynamics, SimConfig, homogeneous_state, initial_state, taylor_green_state
from .spectral import Grid, divergence_coeffs, leray_coeffs
from .tensor_algebra import Sym0Matrix, eigh_field, spectrum


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str

    def as_dict(self):
        return {"check": self.name, "passed": bool(self.passed), "detail": self.detail}


def random_rotation(dim, rng):
    A = rng.standard_normal((dim, dim))
    Qr, R = np.linalg.qr(A)
    Qr = Qr * np.sign(np.diag(R))
    if np.linalg.det(Qr) < 0:
        Qr[:, 0] = -Qr[:, 0]
    return Qr


def random_physical(dim, rng, count, min_margin=0.05):
    """Random Sym0 matrices (count, d, d) with margin >= min_margin."""
    out = []
    while len(out) < count:
        b = rng.dirichlet(np.ones(dim), size=4 * count)
        b = b[b.min(axis=1) >= min_margin]
        lam = b - 1.0 / dim
        for row in lam:
            R = random_rotation(dim, rng)
            out.append(R @ np.diag(row) @ R.T)
            if len(out) == count:
                break
    return np.array(out)


def _eigen_batch(mats):
    lam, _ = eigh_field(mats)
    return lam - lam.mean(axis=1, keepdims=True)


def psi_values(mats):
    return pot.psi_eigen(_eigen_batch(mats))[0]


def envelope_values(mats, J):
    return pot.moreau_eigen(_eigen_batch(mats), J)[0]


def mollified_values(mats, N):
    return pot.mollified_eigen(_eigen_batch(mats), N)[0]


# --- potential -----------------------------------------------------------------------

def check_potential(samples=60, seed=0):
    rng = np.random.default_rng(seed)
    checks = []
    for d in (2, 3):
        area = pot.sphere_area(d)
        v = pot.psi(Sym0Matrix.zero(d))
        err = abs(v.psi + np.log(area))
        checks.append(Check(f"P1 psi(0)=-log|S| d={d}", err <= 1e-8, f"err={err:.2e}"))

        mats = random_physical(d, rng, samples)
        vals = psi_values(mats)
        checks.append(Check(f"P2 lower bound d={d}", bool(np.all(vals >= -np.log(area) - 1e-9)),
                            f"min={vals.min():.6f}"))

        worst = 0.0
        for M in mats[: max(4, samples // 10)]:
            worst = max(worst, pot.psi_grad_fd_check(Sym0Matrix.from_matrix(M)))
        checks.append(Check(f"P1 gradient vs finite differences d={d}", worst <= 1e-6, f"max rel dev={worst:.2e}"))

        lam_dir = np.zeros(d)
        lam_dir[-1], lam_dir[0] = 1.0, -1.0
        lam_dir /= np.linalg.norm(lam_dir)
        margins = [1e-2, 1e-4, 1e-6]
        ray = []
        for m in margins:
            # walk along the ray until the margin hits m
            tmax = min((1.0 / d - m) / (-lam_dir.min()), (1.0 - 1.0 / d - m) / lam_dir.max())
            ray.append(pot.psi_eigen((tmax * lam_dir)[None])[0][0])
        checks.append(Check(f"P3 blow-up along a ray d={d}", bool(np.all(np.diff(ray) > 0)),
                            "psi at margins 1e-2,1e-4,1e-6 = " + ", ".join(f"{x:.3f}" for x in ray)))

        A, B = mats[: samples // 2], mats[samples // 2: 2 * (samples // 2)]
        for label, f in (("psi", psi_values), ("psi_J", lambda m: envelope_values(m, 16)),
                         ("psi_N", lambda m: mollified_values(m, 16))):
            fa, fb = f(A), f(B)
            worst = -np.inf
            for t in (0.25, 0.5, 0.75):
                fm = f(t * A + (1 - t) * B)
                worst = max(worst, float(np.max(fm - t * fa - (1 - t) * fb)))
            checks.append(Check(f"P4/M1 convexity {label} d={d}", worst <= 1e-9, f"max excess={worst:.2e}"))

            R = np.array([random_rotation(d, rng) for _ in range(len(A))])
            rot = R @ A @ np.swapaxes(R, -1, -2)
            dev = float(np.max(np.abs(f(rot) - fa)))
            checks.append(Check(f"P5 isotropy {label} d={d}", dev <= 1e-9, f"max dev={dev:.2e}"))

        # M2 / M3 ladder
        sub = mats[: max(10, samples // 3)]
        ladder = [mollified_values(sub, N) for N in (4, 8, 16)] + [psi_values(sub)]
        mono = min(float(np.min(b - a)) for a, b in zip(ladder[:-1], ladder[1:]))
        checks.append(Check(f"M3 psi_4 <= psi_8 <= psi_16 <= psi d={d}", mono >= -1e-9, f"min gap={mono:.2e}"))
        low = min(float(np.min(x)) for x in ladder[:-1])
        checks.append(Check(f"M2 lower bound d={d}", low >= -np.log(area) - 1e-9, f"min={low:.6f}"))
        errs = [float(np.max(np.abs(x - ladder[-1]))) for x in ladder[:-1]]
        checks.append(Check(f"M4 convergence on margin>=0.05 d={d}", bool(np.all(np.diff(errs) < 0)),
                            "sup|psi_N - psi| = " + ", ".join(f"{e:.3e}" for e in errs)))

    # M4 divergence outside the physical set (d = 2, |Q| well outside)
    bad = np.array([[-4.0, 4.0]])
    val = float(pot.mollified_eigen(bad, 64)[0][0])
    checks.append(Check("M4 divergence at non-physical Q, N=64", val > 1e3, f"psi_64={val:.3e}"))

    # M5 gradient convergence
    Q = Sym0Matrix(2, [0.2, 0.1])
    g_exact = pot.psi(Q).grad.components
    gerr = [float(np.max(np.abs(pot.mollified(Q, N)[1].components - g_exact))) for N in (4, 8, 16)]
    checks.append(Check("M5 gradient convergence", bool(np.all(np.diff(gerr) < 0)),
                        ", ".join(f"{e:.3e}" for e in gerr)))

    # M6 linear growth of the gradient on |Q| <= 10
    s = np.linspace(0.0, 10.0, 21)
    _, dl = pot.mollified_eigen(np.column_stack([-s / np.sqrt(2), s / np.sqrt(2)]), 8)
    gnorm = np.linalg.norm(dl, axis=1)
    C1, C2 = np.polyfit(s, gnorm, 1)
    ok = bool(np.all(gnorm <= C1 * s + abs(C2) + 1e-6 + 0.05 * gnorm.max()))
    checks.append(Check("M6 gradient growth", ok and np.all(np.isfinite(gnorm)), f"C1={C1:.3f}, C2={C2:.3f}"))

    # dual stationarity round trip
    mu = np.array([[1.3, -0.4, -0.9]])
    X, w = pot.SphereQuadrature.default(3).nodes()
    _, _, m, _ = pot._dual_eval(mu, X, w, want_cov=False)
    rec = pot.solve_multipliers(m[0] - 1.0 / 3.0)
    err = float(np.max(np.abs(rec.mu - mu[0])))
    checks.append(Check("dual round trip mu -> m -> mu", err <= 1e-8, f"err={err:.2e}"))
    return checks


# --- spectral ------------------------------------------------------------------------

def check_spectral(seed=0):
    rng = np.random.default_rng(seed)
    checks = []
    for d, n in ((2, 32), (3, 16)):
        g = Grid(d, n, 1.3)
        f = rng.standard_normal((2,) + g.shape)
        back = g.inverse(g.forward(f))
        err = float(np.max(np.abs(back - f)) / np.max(np.abs(f)))
        checks.append(Check(f"round trip d={d}", err <= 1e-12, f"rel err={err:.2e}"))
        fh = g.forward(f)
        l2 = float(np.sum(f**2)) * g.spacing**d
        perr = abs(g.inner(fh, fh) - l2) / l2
        checks.append(Check(f"Parseval d={d}", perr <= 1e-12, f"rel err={perr:.2e}"))
        v = rng.standard_normal((d,) + g.shape)
        vh = leray_coeffs(g, g.forward(v))
        div = float(np.max(np.abs(g.inverse(divergence_coeffs(g, vh)))))
        checks.append(Check(f"Leray divergence d={d}", div <= 1e-12, f"sup|div|={div:.2e}"))
        idem = float(np.max(np.abs(leray_coeffs(g, vh) - vh)))
        checks.append(Check(f"Leray idempotent d={d}", idem <= 1e-13 * max(1.0, np.max(np.abs(vh))), f"{idem:.2e}"))
        # integration by parts on band-limited fields
        mask = g.dealias_mask
        a, b = g.forward(f[0]) * mask, g.forward(f[1]) * mask
        lhs = g.inner(-g.k2 * a, b)
        rhs = -sum(g.inner(g.multiplier(k, 1) * a, g.multiplier(k, 1) * b) for k in range(d))
        ierr = abs(lhs - rhs) / max(abs(lhs), 1e-300)
        checks.append(Check(f"integration by parts d={d}", ierr <= 1e-10, f"rel err={ierr:.2e}"))
    g = Grid(2, 32, 1.0)
    x = g.mesh[0]
    s = np.sin(2 * x)
    d2 = g.inverse(g.multiplier(0, 2) * g.forward(s))
    err = float(np.max(np.abs(d2 + 4 * s)))
    checks.append(Check("second derivative of a Fourier mode", err <= 1e-12, f"err={err:.2e}"))
    return checks


# --- dynamics ------------------------------------------------------------------------

def taylor_green_error(nu=0.1, T=1.0, n=64, dt=1e-3, Lambda=1.0, amplitude=1.0):
    cfg = SimConfig(nu=nu, T=T, n=n, dt=dt, Lambda=Lambda, N=16)
    g = cfg.grid
    state = taylor_green_state(cfg, amplitude)
    n0 = g.norm(state.uh)
    # Q stays exactly zero, where the exact potential has an exactly zero gradient
    dyn = Dynamics(cfg, pot.ExactPotential(cfg.dim))
    for _ in range(cfg.n_steps):
        state = dyn.step(state)
    measured = g.norm(state.uh) / n0
    analytic = np.exp(-2.0 * nu * (2.0 / Lambda) ** 2 * cfg.n_steps * dt)
    return measured, analytic, abs(measured - analytic) / analytic


def homogeneous_oracle(cfg, Q0, T, potential_eigen=None, rtol=1e-12, atol=1e-13):
    """Adaptive high-order ODE solution of dQ/dt = Gamma(-theta dpsi/dQ + kappa Q) in eigenvalues.

    Homogeneous Q keeps its eigenframe, so the flow reduces to the eigenvalues.
    ``potential_eigen(lam) -> dpsi/dlam`` defaults to the exact potential.
    """
    spec = spectrum(Q0)
    lam0 = spec.eigenvalues
    if potential_eigen is None:
        def potential_eigen(lam):
            return pot.psi_eigen(lam[None])[1][0]

    def f(_t, lam):
        lam = lam - lam.mean()
        return cfg.Gamma * (-cfg.theta * potential_eigen(lam) + cfg.kappa * lam)

    sol = solve_ivp(f, (0.0, T), lam0, method="DOP853", rtol=rtol, atol=atol)
    lamT = sol.y[:, -1]
    return Sym0Matrix.from_matrix(spec.frame @ np.diag(lamT) @ spec.frame.T)


def homogeneous_error(cfg, Q0, T, dt, reference=None):
    # the flow is spatially constant, so a tiny grid suffices
    c = cfg.with_(dt=dt, T=T, n=4)
    dyn = Dynamics(c)
    state = homogeneous_state(c, Q0)
    for _ in range(c.n_steps):
        state = dyn.step(state)
    comps = c.grid.mean(state.Qh)
    ref = reference.components if reference is not None else homogeneous_oracle(c, Q0, T).components
    return float(np.max(np.abs(comps - ref)))


def check_dynamics():
    checks = []
    meas, ana, err = taylor_green_error(T=0.25)
    checks.append(Check("Taylor-Green decay (T=0.25)", err <= 1e-6, f"measured={meas:.10f} analytic={ana:.10f} rel={err:.2e}"))
    cfg = SimConfig(N=0, n=8, dt=1e-3, T=0.25)
    Q0 = Sym0Matrix(2, [0.2, 0.05])
    ref = homogeneous_oracle(cfg, Q0, 0.25)
    err = homogeneous_error(cfg, Q0, 0.25, 1e-3, ref)
    checks.append(Check("homogeneous flow vs ODE oracle (T=0.25)", err <= 1e-6, f"err={err:.2e}"))
    rest = SimConfig(n=16, dt=1e-3, T=0.01, initial="rest")
    s = initial_state(rest)
    dyn = Dynamics(rest)
    for _ in range(10):
        s = dyn.step(s)
    mx = max(float(np.max(np.abs(s.Qh))), float(np.max(np.abs(s.uh))))
    checks.append(Check("rest state is stationary", mx == 0.0, f"max coeff={mx:.1e}"))
    return checks


SUITES = {"potential": check_potential, "spectral": check_spectral, "dynamics": check_dynamics}


def run_suite(name):
    if name == "all":
        out = []
        for key in ("spectral", "potential", "dynamics"):
            out += [Check(f"{key}: {c.name}", c.passed, c.detail) for c in SUITES[key]()]
        return out
    return SUITES[name]()
