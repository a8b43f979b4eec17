"""Symmetric trace-free d x d matrices (d = 2, 3).

Component layout is fixed and shared by field arrays and file formats:

    d = 2: (q11, q12)
    d = 3: (q11, q22, q12, q13, q23)

Array helpers keep components on the *leading* axis, ``(nc, *spatial)``, and
full matrices on the *trailing* two axes, ``(*spatial, d, d)``, so that numpy
matmul broadcasts over grid points.
"""
from dataclasses import dataclass

import numpy as np

_INDEX = {
    2: ((0, 0), (0, 1)),
    3: ((0, 0), (1, 1), (0, 1), (0, 2), (1, 2)),
}


def n_components(dim):
    if dim not in (2, 3):
        raise ValueError(f"dim must be 2 or 3, got {dim}")
    return dim * (dim + 1) // 2 - 1


def components_to_matrix(comps, dim):
    """(nc, *rest) component array -> (*rest, d, d) symmetric trace-free matrices."""
    comps = np.asarray(comps)
    nc = n_components(dim)
    if comps.shape[0] != nc:
        raise ValueError(f"expected {nc} components for dim={dim}, got {comps.shape[0]}")
    rest = comps.shape[1:]
    out = np.zeros(rest + (dim, dim), dtype=comps.dtype)
    for c, (i, j) in enumerate(_INDEX[dim]):
        out[..., i, j] = comps[c]
        out[..., j, i] = comps[c]
    if dim == 2:
        out[..., 1, 1] = -comps[0]
    else:
        out[..., 2, 2] = -comps[0] - comps[1]
    return out


def matrix_to_components(mat):
    """(*rest, d, d) -> (nc, *rest), applying the orthogonal projection onto Sym0."""
    mat = np.asarray(mat)
    dim = mat.shape[-1]
    sym = 0.5 * (mat + np.swapaxes(mat, -1, -2))
    tr = np.trace(sym, axis1=-2, axis2=-1) / dim
    comps = []
    for i, j in _INDEX[dim]:
        v = sym[..., i, j]
        comps.append(v - tr if i == j else v)
    return np.stack(comps)


def orthonormal_basis(dim):
    """Frobenius-orthonormal basis of Sym0(d), shape (nc, d, d)."""
    if dim == 2:
        e1 = np.diag([1.0, -1.0]) / np.sqrt(2.0)
        e2 = np.array([[0.0, 1.0], [1.0, 0.0]]) / np.sqrt(2.0)
        return np.stack([e1, e2])
    basis = [np.diag([1.0, -1.0, 0.0]) / np.sqrt(2.0), np.diag([1.0, 1.0, -2.0]) / np.sqrt(6.0)]
    for i, j in ((0, 1), (0, 2), (1, 2)):
        e = np.zeros((3, 3))
        e[i, j] = e[j, i] = 1.0 / np.sqrt(2.0)
        basis.append(e)
    return np.stack(basis)


@dataclass(frozen=True)
class Sym0Matrix:
    dim: int
    components: np.ndarray

    def __post_init__(self):
        comps = np.asarray(self.components, dtype=float).reshape(-1)
        if comps.size != n_components(self.dim):
            raise ValueError(
                f"Sym0({self.dim}) has {n_components(self.dim)} components, got {comps.size}"
            )
        object.__setattr__(self, "components", comps)

    @classmethod
    def from_matrix(cls, mat):
        mat = np.asarray(mat, dtype=float)
        return cls(mat.shape[0], matrix_to_components(mat))

    @classmethod
    def zero(cls, dim):
        return cls(dim, np.zeros(n_components(dim)))

    def matrix(self):
        return components_to_matrix(self.components, self.dim)

    def norm(self):
        return float(np.linalg.norm(self.matrix()))

    def __add__(self, other):
        return Sym0Matrix(self.dim, self.components + other.components)

    def __sub__(self, other):
        return Sym0Matrix(self.dim, self.components - other.components)

    def __mul__(self, a):
        return Sym0Matrix(self.dim, a * self.components)

    __rmul__ = __mul__


def trace_free(A):
    """Trace-free part of the symmetric part of A."""
    return Sym0Matrix.from_matrix(A)


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray  # ascending
    frame: np.ndarray  # columns are eigenvectors, det = +1

    def reconstruct(self):
        return self.frame @ np.diag(self.eigenvalues) @ self.frame.T


def _least_aligned_axis(v):
    return int(np.argmin(np.abs(v)))


def _complement_basis(v):
    # deterministic pivot: Gram-Schmidt the coordinate axis least aligned with v
    e = np.zeros(3)
    e[_least_aligned_axis(v)] = 1.0
    a = e - (e @ v) * v
    a /= np.linalg.norm(a)
    b = np.cross(v, a)
    return a, b


def _eig2(b11, b12, b22):
    """Closed-form 2x2 symmetric eigenproblem; ascending, rotation frame."""
    half_diff = 0.5 * (b11 - b22)
    r = np.hypot(half_diff, b12)
    mean = 0.5 * (b11 + b22)
    if r == 0.0:
        return np.array([mean, mean]), np.eye(2)
    phi = 0.5 * np.arctan2(b12, half_diff)
    c, s = np.cos(phi), np.sin(phi)
    # (c, s) belongs to mean + r; (s, -c) to mean - r
    frame = np.array([[s, c], [-c, s]])
    return np.array([mean - r, mean + r]), frame


def _eigvals3(A):
    p1 = A[0, 1] ** 2 + A[0, 2] ** 2 + A[1, 2] ** 2
    q = np.trace(A) / 3.0
    p2 = (A[0, 0] - q) ** 2 + (A[1, 1] - q) ** 2 + (A[2, 2] - q) ** 2 + 2.0 * p1
    if p2 == 0.0:
        return np.array([q, q, q])
    p = np.sqrt(p2 / 6.0)
    B = (A - q * np.eye(3)) / p
    r = np.clip(np.linalg.det(B) / 2.0, -1.0, 1.0)
    phi = np.arccos(r) / 3.0
    hi = q + 2.0 * p * np.cos(phi)
    lo = q + 2.0 * p * np.cos(phi + 2.0 * np.pi / 3.0)
    return np.array([lo, 3.0 * q - hi - lo, hi])


def _isolated_vector(A, lam):
    M = A - lam * np.eye(3)
    crosses = [np.cross(M[0], M[1]), np.cross(M[0], M[2]), np.cross(M[1], M[2])]
    norms = [np.linalg.norm(c) for c in crosses]
    k = int(np.argmax(norms))
    return crosses[k] / norms[k]


def spectrum(Q):
    """Closed-form spectral decomposition of a Sym0Matrix."""
    dim = Q.dim
    A = Q.matrix()
    if dim == 2:
        lam, frame = _eig2(A[0, 0], A[0, 1], A[1, 1])
        return Spectrum(lam, frame)

    lam = _eigvals3(A)
    gaps = (lam[1] - lam[0], lam[2] - lam[1])
    if max(gaps) == 0.0:
        return Spectrum(lam, np.eye(3))
    iso = 0 if gaps[0] > gaps[1] else 2
    v = _isolated_vector(A, lam[iso])
    a, b = _complement_basis(v)
    # the remaining pair lives in span(a, b)
    mu, rot = _eig2(a @ A @ a, a @ A @ b, b @ A @ b)
    w0 = rot[0, 0] * a + rot[1, 0] * b
    w1 = rot[0, 1] * a + rot[1, 1] * b
    if iso == 0:
        vals = np.array([lam[0], mu[0], mu[1]])
        frame = np.column_stack([v, w0, w1])
    else:
        vals = np.array([mu[0], mu[1], lam[2]])
        frame = np.column_stack([w0, w1, v])
    if np.linalg.det(frame) < 0:
        frame[:, 0] = -frame[:, 0]
    return Spectrum(vals, frame)


def physicality_margin(Q):
    """min(lambda_min + 1/d, 1 - 1/d - lambda_max); positive iff Q is strictly physical."""
    lam = spectrum(Q).eigenvalues
    d = Q.dim
    return float(min(lam[0] + 1.0 / d, 1.0 - 1.0 / d - lam[-1]))


# --- batched helpers over fields -------------------------------------------------

def eigh_field(mat):
    """Ascending eigenvalues and frames for a stack of symmetric matrices.

    d = 2 uses the closed form (vectorized); d = 3 defers to LAPACK.
    """
    mat = np.asarray(mat, dtype=float)
    dim = mat.shape[-1]
    if dim == 3:
        return np.linalg.eigh(mat)
    a, b, c = mat[..., 0, 0], mat[..., 0, 1], mat[..., 1, 1]
    half_diff = 0.5 * (a - c)
    r = np.hypot(half_diff, b)
    mean = 0.5 * (a + c)
    phi = 0.5 * np.arctan2(b, half_diff)
    cs, sn = np.cos(phi), np.sin(phi)
    lam = np.stack([mean - r, mean + r], axis=-1)
    frame = np.empty(mat.shape)
    frame[..., 0, 0] = sn
    frame[..., 1, 0] = -cs
    frame[..., 0, 1] = cs
    frame[..., 1, 1] = sn
    return lam, frame


def margin_field(mat):
    dim = mat.shape[-1]
    if dim == 2:
        r = np.hypot(0.5 * (mat[..., 0, 0] - mat[..., 1, 1]), mat[..., 0, 1])
        return 0.5 - r
    lam = np.linalg.eigvalsh(mat)
    return np.minimum(lam[..., 0] + 1.0 / dim, 1.0 - 1.0 / dim - lam[..., -1])


def commutator(A, B):
    return A @ B - B @ A


def frob(A, B):
    """Pointwise Frobenius product A:B over trailing matrix axes."""
    return np.einsum("...ij,...ij->...", A, B)
