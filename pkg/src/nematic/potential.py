"""Entropy-based singular bulk potential and its regularizations.

The potential is evaluated through its convex dual.  For eigenvalues ``lam`` of
Q write ``b = lam + 1/d`` (the target second moments).  Then

    psi(lam) = max_mu  mu . b - log Z(mu),     Z(mu) = int_S exp(sum mu_i w_i^2) dw

and the maximizer mu (gauge fixed to sum(mu) = 0) is both the Lagrange
multiplier of the entropy minimization and the gradient of psi in Q's
eigenframe.  Everything below is a damped Newton iteration on that dual, batched
over many points.

The Moreau-Yosida envelope psi_J(x) = min_a J|a - x|^2 + psi(a) is solved in
the same dual variables: the optimality condition 2J(a - x) + mu = 0 together
with a = m(mu) - 1/d gives the strongly convex problem

    min_mu  log Z(mu) - mu . (x + 1/d) + |mu|^2 / (4J),

so the prox point a = m(mu) - 1/d is automatically strictly physical and
grad psi_J = mu.
"""
import os
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .errors import NoConvergence, NonPhysicalInput, QuadratureUnderResolved
from .tensor_algebra import (
    Sym0Matrix,
    eigh_field,
    n_components,
    orthonormal_basis,
    spectrum,
)

EPS_PHYS = 1e-9
MAX_ITER = 100
DEFAULT_TOL = 1e-12

_MINIMUM = {2: (64, 0), 3: (32, 64)}
_DEFAULT = {2: (256, 0), 3: (64, 128)}
_MAX_NODES = {2: (1 << 20, 0), 3: (4096, 2048)}
_NODE_FACTOR = 12.0


def sphere_area(dim):
    return 2.0 * np.pi if dim == 2 else 4.0 * np.pi


# --- quadrature ------------------------------------------------------------------

@dataclass(frozen=True)
class SphereQuadrature:
    """Product quadrature on S^{d-1}.

    d = 2: trapezoid with ``n_theta`` nodes on [0, 2pi).
    d = 3: Gauss-Legendre in cos(theta) (``n_theta`` nodes) times trapezoid in
    phi (``n_phi`` nodes), with the polar axis along coordinate ``pole``.
    """

    dim: int
    n_theta: int
    n_phi: int = 0
    pole: int = 2

    def __post_init__(self):
        lo_t, lo_p = _MINIMUM[self.dim]
        if self.n_theta < lo_t or (self.dim == 3 and self.n_phi < lo_p):
            raise QuadratureUnderResolved(
                f"dim={self.dim} needs at least {lo_t}"
                + (f"x{lo_p}" if self.dim == 3 else "")
                + f" nodes, got {self.n_theta}" + (f"x{self.n_phi}" if self.dim == 3 else "")
            )

    @classmethod
    def default(cls, dim):
        nt, nphi = _DEFAULT[dim]
        return cls(dim, nt, nphi)

    @property
    def key(self):
        return (self.n_theta, self.n_phi, self.pole if self.dim == 3 else 0)

    def nodes(self):
        """(X, w): squared node coordinates (K, d) and weights (K,) summing to |S|."""
        return _rule(self.dim, *self.key)


def _circle_quarter(n):
    """Angles 2 pi k / n folded onto [0, pi/2] with multiplicities (cos^2 is 4-fold symmetric)."""
    if n % 4:
        return 2.0 * np.pi * np.arange(n) / n, np.ones(n)
    k = np.arange(n // 4 + 1)
    mult = np.full(k.size, 4.0)
    mult[0] = mult[-1] = 2.0
    return 2.0 * np.pi * k / n, mult


@lru_cache(maxsize=64)
def _rule(dim, n_theta, n_phi, pole):
    # only squared coordinates enter, so nodes related by coordinate reflections merge
    if dim == 2:
        th, mult = _circle_quarter(n_theta)
        X = np.column_stack([np.cos(th) ** 2, np.sin(th) ** 2])
        w = mult * (2.0 * np.pi / n_theta)
    else:
        t, wt = np.polynomial.legendre.leggauss(n_theta)
        keep = t >= 0.0
        wt = np.where(t > 0.0, 2.0 * wt, wt)[keep]
        t = t[keep]
        ph, mult = _circle_quarter(n_phi)
        T, P = np.meshgrid(t, ph, indexing="ij")
        sin2 = 1.0 - T**2
        others = [a for a in range(3) if a != pole]
        X = np.empty((T.size, 3))
        X[:, pole] = (T**2).ravel()
        X[:, others[0]] = (sin2 * np.cos(P) ** 2).ravel()
        X[:, others[1]] = (sin2 * np.sin(P) ** 2).ravel()
        w = np.outer(wt, mult * (2.0 * np.pi / n_phi)).ravel()
    X.setflags(write=False)
    w.setflags(write=False)
    return X, w


def _pow2ceil(x):
    return (2 ** np.ceil(np.log2(np.maximum(x, 1.0)))).astype(np.int64)


def _rule_keys(b, dim):
    """Resolution needed for densities with second moments b, one key per row."""
    bs = np.clip(b, 1e-300, None)
    if dim == 2:
        need = _NODE_FACTOR / np.sqrt(bs.min(axis=1))
        n = np.clip(_pow2ceil(need), _DEFAULT[2][0], _MAX_NODES[2][0])
        return np.column_stack([n, np.zeros_like(n), np.zeros_like(n)])
    order = np.argsort(bs, axis=1)
    bmin = np.take_along_axis(bs, order[:, :1], axis=1)[:, 0]
    bmid = np.take_along_axis(bs, order[:, 1:2], axis=1)[:, 0]
    nt = np.clip(_pow2ceil(_NODE_FACTOR / np.sqrt(bmin)), _DEFAULT[3][0], _MAX_NODES[3][0])
    # mass near a great circle: pole on the smallest axis, phi resolves the
    # spread along the circle.  Mass near an axis: pole on that axis, phi only
    # resolves the anisotropy of the cap.
    capped = bmid < 0.25
    pole = np.where(capped, order[:, 2], order[:, 0])
    phi_need = np.where(capped, np.sqrt(bmid / bmin), 1.0 / np.sqrt(bmid))
    nphi = np.clip(_pow2ceil(_NODE_FACTOR * phi_need), _DEFAULT[3][1], _MAX_NODES[3][1])
    return np.column_stack([nt, nphi, pole])


def _finer(need, used):
    return np.any(need[:, :2] > used[:, :2], axis=1)


# --- dual machinery --------------------------------------------------------------

def _gauge_basis(dim):
    if dim == 2:
        return np.array([[1.0], [-1.0]]) / np.sqrt(2.0)
    return np.column_stack([np.array([1.0, -1.0, 0.0]) / np.sqrt(2.0),
                            np.array([1.0, 1.0, -2.0]) / np.sqrt(6.0)])


def _dual_eval(mu, X, w, want_cov=True):
    """log Z (in the max-shifted gauge), moments and covariance, chunked."""
    B, d = mu.shape
    K = X.shape[0]
    shift = mu.max(axis=1)
    mus = mu - shift[:, None]
    logZ = np.empty(B)
    m = np.empty((B, d))
    C = np.empty((B, d, d)) if want_cov else None
    # features [x, x x^T]: first and second moments in one matmul
    F = np.concatenate([X, (X[:, :, None] * X[:, None, :]).reshape(K, d * d)], axis=1) if want_cov else X
    step = max(1, int(4_000_000 // max(K, 1)))
    for s in range(0, B, step):
        sl = slice(s, s + step)
        E = mus[sl] @ X.T
        Emax = E.max(axis=1, keepdims=True)
        np.exp(E - Emax, out=E)
        E *= w
        S = E.sum(axis=1)
        mom = (E @ F) / S[:, None]
        logZ[sl] = Emax[:, 0] + np.log(S)
        m[sl] = mom[:, :d]
        if want_cov:
            mm = m[sl]
            C[sl] = mom[:, d:].reshape(-1, d, d) - mm[:, :, None] * mm[:, None, :]
    return shift, logZ, m, C


def _objective(mu, shift, logZ, b, inv2J):
    # log Z(mu) - mu.b + |mu|^2 inv2J / 2, using the shifted gauge for mu.b
    mus = mu - shift[:, None]
    return logZ - np.einsum("bi,bi->b", mus, b) + 0.5 * inv2J * np.einsum("bi,bi->b", mu, mu)


def _newton(b, mu0, X, w, inv2J, tol, max_iter):
    """Damped Newton on the (regularized) dual for one quadrature rule."""
    B, d = b.shape
    V = _gauge_basis(d)
    mu = mu0 - mu0.mean(axis=1, keepdims=True)
    shift, logZ, m, C = _dual_eval(mu, X, w)
    f = _objective(mu, shift, logZ, b, inv2J)
    active = np.ones(B, dtype=bool)
    eye = np.eye(d - 1)
    for _ in range(max_iter):
        r = m - b + inv2J * mu
        resid = np.abs(r - r.mean(axis=1, keepdims=True)).max(axis=1)
        active = resid > tol
        if not active.any():
            return mu, shift, logZ, m
        idx = np.nonzero(active)[0]
        g = r[idx] @ V
        H = np.einsum("ia,nij,jc->nac", V, C[idx], V) + inv2J * eye
        step = -np.linalg.solve(H, g[:, :, None])[:, :, 0]
        dmu = step @ V.T
        slope = np.einsum("ba,ba->b", g, step)
        t = np.ones(idx.size)
        pending = np.ones(idx.size, dtype=bool)
        new_mu = mu[idx].copy()
        new_shift = shift[idx].copy()
        new_logZ = logZ[idx].copy()
        new_m = m[idx].copy()
        new_C = C[idx].copy()
        new_f = f[idx].copy()
        for _ls in range(60):
            p = np.nonzero(pending)[0]
            trial = mu[idx[p]] + t[p, None] * dmu[p]
            sh, lz, mm, cc = _dual_eval(trial, X, w)
            ft = _objective(trial, sh, lz, b[idx[p]], inv2J)
            # accept on Armijo, or when the decrement is at rounding level
            f0 = f[idx[p]]
            ok = (ft <= f0 + 1e-4 * t[p] * slope[p]) | (ft <= f0 + 64 * np.finfo(float).eps * (1 + np.abs(f0)))
            ok &= np.isfinite(ft)
            acc = p[ok]
            new_mu[acc], new_shift[acc], new_logZ[acc] = trial[ok], sh[ok], lz[ok]
            new_m[acc], new_C[acc], new_f[acc] = mm[ok], cc[ok], ft[ok]
            pending[acc] = False
            if not pending.any():
                break
            t[pending] *= 0.5
        mu[idx], shift[idx], logZ[idx] = new_mu, new_shift, new_logZ
        m[idx], C[idx], f[idx] = new_m, new_C, new_f
    r = m - b + inv2J * mu
    resid = np.abs(r - r.mean(axis=1, keepdims=True)).max(axis=1)
    if np.any(resid > tol):
        raise NoConvergence(
            f"dual Newton did not reach tol={tol:g} in {max_iter} iterations "
            f"(worst residual {resid.max():.3e})"
        )
    return mu, shift, logZ, m


def project_simplex(b, delta=0.0):
    """Euclidean projection of rows of b onto {x >= delta, sum x = 1}."""
    b = np.atleast_2d(np.asarray(b, dtype=float))
    B, d = b.shape
    y = b - delta
    total = 1.0 - d * delta
    u = -np.sort(-y, axis=1)
    css = np.cumsum(u, axis=1) - total
    k = np.arange(1, d + 1)
    cond = u - css / k > 0
    rho = d - 1 - np.argmax(cond[:, ::-1], axis=1)
    theta = css[np.arange(B), rho] / (rho + 1)
    return np.maximum(y - theta[:, None], 0.0) + delta


def _initial_mu(b):
    bp = project_simplex(b, 1e-3)
    mu = -0.5 / bp
    return mu - mu.mean(axis=1, keepdims=True)


def _solve(b, J=None, mu0=None, tol=DEFAULT_TOL, max_iter=MAX_ITER):
    """Batched dual solve.  Returns (mu gauge-fixed, logZ gauge-fixed, m)."""
    b = np.asarray(b, dtype=float)
    B, d = b.shape
    inv2J = 0.0 if J is None else 1.0 / (2.0 * J)
    mu = _initial_mu(b) if mu0 is None else np.array(mu0, dtype=float)
    guess = project_simplex(b, 1e-3) if J is not None else b
    keys = _rule_keys(guess, d)
    logZ = np.empty(B)
    m = np.empty((B, d))
    todo = np.arange(B)
    for _round in range(6):
        uniq, inv = np.unique(keys[todo], axis=0, return_inverse=True)
        inv = np.asarray(inv).reshape(-1)
        for g, key in enumerate(uniq):
            sel = todo[inv == g]
            X, w = _rule(d, int(key[0]), int(key[1]), int(key[2]))
            mu_g, shift, lz, mm = _newton(b[sel], mu[sel], X, w, inv2J, tol, max_iter)
            mu[sel] = mu_g
            # log Z in the sum-zero gauge: log Z(mu) = log Z(mu - c) + c
            logZ[sel] = lz + shift
            m[sel] = mm
        need = _rule_keys(m, d)
        redo = _finer(need, keys)
        if not redo.any():
            break
        keys[redo] = np.maximum(keys[redo], need[redo])
        keys[redo, 2] = need[redo, 2]
        todo = np.nonzero(redo)[0]
    return mu, logZ, m


# --- public scalar API -----------------------------------------------------------

@dataclass(frozen=True)
class Multipliers:
    mu: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mu", np.asarray(self.mu, dtype=float))


@dataclass(frozen=True)
class PotentialEval:
    psi: float
    grad: Sym0Matrix
    mu: Multipliers
    logZ: float


def partition_and_moments(mu, quad=None):
    """log Z(mu) and second moments <w_i^2> under rho* = exp(sum mu_i w_i^2) / Z."""
    mu = np.asarray(mu, dtype=float).reshape(1, -1)
    dim = mu.shape[1]
    quad = SphereQuadrature.default(dim) if quad is None else quad
    if quad.dim != dim:
        raise ValueError("quadrature dimension does not match mu")
    X, w = quad.nodes()
    shift, logZ, m, _ = _dual_eval(mu, X, w, want_cov=False)
    return float(logZ[0] + shift[0]), m[0]


def _check_physical(lam, eps=EPS_PHYS):
    lam = np.atleast_2d(lam)
    d = lam.shape[1]
    if np.any(np.abs(lam.sum(axis=1)) > 1e-10):
        raise NonPhysicalInput("eigenvalues must sum to zero")
    margin = np.minimum(lam.min(axis=1) + 1.0 / d, 1.0 - 1.0 / d - lam.max(axis=1))
    if np.any(~(margin > eps)):
        k = int(np.argmin(margin))
        raise NonPhysicalInput(
            f"eigenvalues {lam[k]} outside the physical triangle (margin {margin[k]:.3e} <= {eps:g})"
        )


def solve_multipliers(lam, tol=DEFAULT_TOL, mu0=None):
    lam = np.asarray(lam, dtype=float).reshape(1, -1)
    _check_physical(lam)
    d = lam.shape[1]
    mu, _, _ = _solve(lam + 1.0 / d, None, None if mu0 is None else np.reshape(mu0, (1, d)), tol)
    return Multipliers(mu[0])


def psi_eigen(lam, mu0=None, tol=DEFAULT_TOL):
    """Batched exact potential at eigenvalue rows lam (B, d): (psi, mu, logZ)."""
    lam = np.atleast_2d(np.asarray(lam, dtype=float))
    _check_physical(lam)
    d = lam.shape[1]
    b = lam + 1.0 / d
    mu, logZ, m = _solve(b, None, mu0, tol)
    # psi = mu.b - log Z, evaluated in the max-shifted gauge for accuracy
    shift = mu.max(axis=1)
    psi = np.einsum("bi,bi->b", mu - shift[:, None], b) - (logZ - shift)
    return psi, mu, logZ


def _grad_from_frame(frame, g):
    return np.einsum("...ik,...k,...jk->...ij", frame, g, frame)


def psi(Q):
    """Exact potential at a single Sym0Matrix."""
    spec = spectrum(Q)
    val, mu, logZ = psi_eigen(spec.eigenvalues[None])
    grad = Sym0Matrix.from_matrix(_grad_from_frame(spec.frame, mu[0]))
    return PotentialEval(float(val[0]), grad, Multipliers(mu[0]), float(logZ[0]))


def psi_grad_fd_check(Q, h=1e-5, fn=None):
    """Max deviation between the analytic gradient and central differences.

    Differences are taken along a Frobenius-orthonormal basis of Sym0(d); the
    deviation is measured relative to max(1, |grad|_inf).
    """
    if fn is None:
        def fn(X):
            ev = psi(X)
            return ev.psi, ev.grad.matrix()
    val, grad = fn(Q)
    basis = orthonormal_basis(Q.dim)
    analytic = np.einsum("kij,ij->k", basis, grad)
    fd = np.empty(len(basis))
    for k, E in enumerate(basis):
        Ek = Sym0Matrix.from_matrix(E)
        fp, _ = fn(Q + h * Ek)
        fm, _ = fn(Q - h * Ek)
        fd[k] = (fp - fm) / (2.0 * h)
    return float(np.max(np.abs(fd - analytic)) / max(1.0, np.max(np.abs(analytic))))


# --- Moreau-Yosida envelope ------------------------------------------------------

def moreau_eigen(x, J, mu0=None, tol=DEFAULT_TOL):
    """Batched envelope at eigenvalue rows x (B, d): (value, prox eigenvalues, mu).

    mu is also the gradient of the envelope in the eigenframe of x.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    d = x.shape[1]
    b = x + 1.0 / d
    mu, logZ, m = _solve(b, float(J), mu0, tol)
    a = m - 1.0 / d
    shift = mu.max(axis=1)
    psi_a = np.einsum("bi,bi->b", mu - shift[:, None], m) - (logZ - shift)
    diff = a - x
    value = J * np.einsum("bi,bi->b", diff, diff) + psi_a
    return value, a, mu


def moreau_yosida(Q, J):
    """(min_A J|A - Q|^2 + psi(A), argmin) for any Sym0Matrix Q."""
    spec = spectrum(Q)
    value, a, _ = moreau_eigen(spec.eigenvalues[None], J)
    prox = spec.frame @ np.diag(a[0]) @ spec.frame.T
    return float(value[0]), Sym0Matrix.from_matrix(prox)


def moreau_field(mat, J):
    """Envelope value and Frobenius gradient for a stack of matrices (..., d, d)."""
    mat = np.asarray(mat, dtype=float)
    shape = mat.shape[:-2]
    d = mat.shape[-1]
    lam, frame = eigh_field(mat.reshape(-1, d, d))
    value, _, mu = moreau_eigen(lam, J)
    grad = _grad_from_frame(frame, mu)
    return value.reshape(shape), grad.reshape(shape + (d, d))


# --- mollification ---------------------------------------------------------------

def _bump(rho):
    out = np.zeros_like(rho)
    inside = rho < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - rho[inside] ** 2))
    return out


@lru_cache(maxsize=32)
def kernel_rule(dim, radius, n_r=None, n_dir=12):
    """Fixed symmetric quadrature of a unit-mass C-infinity bump of the given radius.

    Nodes are Sym0 matrices R_k (K, d, d) with weights w_k; the node set is
    invariant under R -> -R and under conjugation by coordinate permutations,
    which keeps the mollified potential a symmetric function of eigenvalues.
    """
    D = n_components(dim)
    n_r = (6 if dim == 2 else 3) if n_r is None else n_r
    t, wt = np.polynomial.legendre.leggauss(n_r)
    rho = 0.5 * (t + 1.0)  # in units of the radius
    wr = 0.5 * wt * _bump(rho) * rho ** (D - 1)
    basis = orthonormal_basis(dim)
    if dim == 2:
        ang = (np.arange(n_dir) + 0.5) * 2.0 * np.pi / n_dir
        dirs = np.cos(ang)[:, None, None] * basis[0] + np.sin(ang)[:, None, None] * basis[1]
        wd = np.ones(n_dir)
    else:
        dirs, wd = [], []
        for i in range(3):
            for j in range(3):
                if i != j:
                    e = np.zeros((3, 3))
                    e[i, i], e[j, j] = 1.0, -1.0
                    dirs.append(e / np.sqrt(2.0))
                    wd.append(2.0 / 3.0)
        for E in basis[2:]:
            dirs += [E, -E]
            wd += [1.0, 1.0]
        dirs, wd = np.array(dirs), np.array(wd)
    R = (radius * rho[:, None, None, None]) * dirs[None]
    w = wr[:, None] * wd[None, :]
    R = R.reshape(-1, dim, dim)
    w = (w / w.sum()).reshape(-1)
    R.setflags(write=False)
    w.setflags(write=False)
    return R, w


@lru_cache(maxsize=32)
def _mollifier_offset(dim, N, J):
    # shift so that psi_N(0) = psi(0), the common lower bound
    R, w = kernel_rule(dim, 1.0 / N)
    v, _ = moreau_field(R, J)
    return float(w @ v + np.log(sphere_area(dim)))


def mollified_eigen(lam, N, J=None):
    """psi_N at diag(lam) for rows lam (B, d): (value, d psi_N / d lam)."""
    lam = np.atleast_2d(np.asarray(lam, dtype=float))
    B, d = lam.shape
    J = N if J is None else J
    R, w = kernel_rule(d, 1.0 / N)
    K = len(R)
    pts = np.zeros((B, K, d, d))
    pts += R[None]
    idx = np.arange(d)
    pts[:, :, idx, idx] += lam[:, None, :]
    # the nodes sit within 1/N of the centre: warm-start them from its multipliers
    _, _, mu_c = moreau_eigen(np.sort(lam, axis=1), J)
    node_lam, frame = eigh_field(pts.reshape(-1, d, d))
    v, _, mu = moreau_eigen(node_lam, J, mu0=np.repeat(mu_c, K, axis=0))
    v = v.reshape(B, K)
    gdiag = np.einsum("bkii->bki", _grad_from_frame(frame, mu).reshape(B, K, d, d))
    value = v @ w - _mollifier_offset(d, N, J)
    dlam = np.einsum("bki,k->bi", gdiag, w)
    dlam -= dlam.mean(axis=1, keepdims=True)
    return value, dlam


def mollified(Q, N, J=None):
    """Value and gradient of psi_N at a single Sym0Matrix."""
    spec = spectrum(Q)
    value, dlam = mollified_eigen(spec.eigenvalues[None], N, J)
    grad = Sym0Matrix.from_matrix(_grad_from_frame(spec.frame, dlam[0]))
    return float(value[0]), grad


@dataclass(frozen=True)
class RegularizedPotential:
    """psi_N: the mollified Moreau-Yosida envelope with J = N and kernel radius 1/N."""

    N: int
    J: int = None
    kernel_halfwidth: float = field(init=False)

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be a positive integer")
        if self.J is None:
            object.__setattr__(self, "J", self.N)
        object.__setattr__(self, "kernel_halfwidth", 1.0 / self.N)

    def __call__(self, Q):
        return mollified(Q, self.N, self.J)

    def envelope(self, Q):
        return moreau_yosida(Q, self.J)


# --- radial tables (d = 2) -------------------------------------------------------

_CACHE_DIR = os.environ.get("NEMATIC_CACHE", os.path.join(os.path.expanduser("~"), ".cache", "nematic"))


class RadialTable:
    """Piecewise-cubic Hermite table of a d = 2 isotropic potential in z = |Q|^2 / 2.

    In 2D an isotropic function of Q depends only on s = sqrt(q11^2 + q12^2),
    and its Frobenius gradient is f'(z) Q with z = s^2.  Values beyond z_max
    fall back to direct evaluation.
    """

    def __init__(self, N, J=None, z_max=1.0, size=1025, cache=True):
        self.N = N
        self.J = N if J is None else J
        self.z_max = z_max
        z = np.linspace(0.0, z_max, size)
        path = os.path.join(_CACHE_DIR, f"radial_N{N}_J{self.J}_z{z_max:g}_n{size}_v1.npz")
        data = None
        if cache and os.path.exists(path):
            try:
                data = np.load(path)
                f, fz = data["f"], data["fz"]
            except Exception:
                data = None
        if data is None:
            f, fz = self._build(z)
            if cache:
                try:
                    os.makedirs(_CACHE_DIR, exist_ok=True)
                    np.savez(path, f=f, fz=fz)
                except OSError:
                    pass
        self.z = z
        self._spline = CubicHermiteSpline(z, f, fz)
        self._dspline = self._spline.derivative()

    def _build(self, z):
        # the slope at z = 0 is read off a nearby point
        s = np.append(np.sqrt(z), 1e-5)
        f, dl = mollified_eigen(np.column_stack([-s, s]), self.N, self.J)
        # along lam = (-s, s): d psi/d lam_2 = f_z * s
        fz = dl[:-1, 1] / np.maximum(s[:-1], 1e-300)
        fz[0] = dl[-1, 1] / s[-1]
        return f[:-1], fz

    def evaluate(self, mat):
        """Values and Frobenius gradients for matrices (..., 2, 2)."""
        mat = np.asarray(mat, dtype=float)
        z = 0.25 * (mat[..., 0, 0] - mat[..., 1, 1]) ** 2 + mat[..., 0, 1] ** 2
        inside = z <= self.z_max
        val = np.empty(z.shape)
        fz = np.empty(z.shape)
        val[inside] = self._spline(z[inside])
        fz[inside] = self._dspline(z[inside])
        grad = fz[..., None, None] * mat
        if not inside.all():
            out = mat[~inside]
            lam, frame = eigh_field(out)
            v, dl = mollified_eigen(lam, self.N, self.J)
            val[~inside] = v
            grad[~inside] = _grad_from_frame(frame, dl)
        return val, grad


# --- field potentials used by the simulator --------------------------------------

class ExactPotential:
    """psi itself, evaluated pointwise with a warm-start cache of multipliers."""

    N = 0

    def __init__(self, dim, tol=DEFAULT_TOL):
        self.dim = dim
        self.tol = tol
        self._warm = None

    def evaluate(self, mat):
        mat = np.asarray(mat, dtype=float)
        shape = mat.shape[:-2]
        d = self.dim
        lam, frame = eigh_field(mat.reshape(-1, d, d))
        lam = lam - lam.mean(axis=1, keepdims=True)
        mu0 = self._warm if self._warm is not None and self._warm.shape == lam.shape else None
        val, mu, _ = psi_eigen(lam, mu0, self.tol)
        self._warm = mu
        grad = _grad_from_frame(frame, mu)
        return val.reshape(shape), grad.reshape(shape + (d, d))


class MollifiedPotential:
    """psi_N on fields; d = 2 goes through a RadialTable, d = 3 evaluates directly."""

    def __init__(self, dim, N, J=None, tabulate=True):
        self.dim = dim
        self.N = N
        self.J = N if J is None else J
        self._table = RadialTable(N, self.J) if (dim == 2 and tabulate) else None

    def evaluate(self, mat):
        mat = np.asarray(mat, dtype=float)
        if self._table is not None:
            return self._table.evaluate(mat)
        shape = mat.shape[:-2]
        d = self.dim
        lam, frame = eigh_field(mat.reshape(-1, d, d))
        v, dl = mollified_eigen(lam, self.N, self.J)
        return v.reshape(shape), _grad_from_frame(frame, dl).reshape(shape + (d, d))


def make_potential(dim, N):
    """N = 0 selects the exact potential, N >= 1 the mollified one."""
    return ExactPotential(dim) if N == 0 else MollifiedPotential(dim, N)


def potential_table(dim, resolution):
    """Rows (lam_1 .. lam_{d-1}, psi, mu_1 .. mu_d, logZ) over the physical triangle."""
    R = int(resolution)
    if dim == 2:
        lam1 = -0.5 + (np.arange(1, R + 1) / (R + 1)) * 0.5
        lam = np.column_stack([lam1, -lam1])
    else:
        rows = [(i, j, R - i - j) for i in range(1, R) for j in range(1, R - i) if R - i - j >= 1]
        b = np.array(rows, dtype=float) / R
        lam = b - 1.0 / 3.0
    val, mu, logZ = psi_eigen(lam)
    return np.column_stack([lam[:, : dim - 1], val, mu, logZ])
