"""Fourier representation on the periodic box [-Lambda pi/2, Lambda pi/2)^d.

Coefficients are stored in numpy's real-FFT layout: the transform runs over the
last ``dim`` axes and leading axes are channels.  The integer wave index j maps
to the physical wavenumber k = 2 j / Lambda.
"""
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class Grid:
    dim: int
    n: int
    Lambda: float = 1.0

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")
        if self.n < 4 or self.n & (self.n - 1):
            raise ValueError(f"n must be a power of two >= 4, got {self.n}")
        if not self.Lambda > 0:
            raise ValueError("Lambda must be positive")

    # --- geometry ---------------------------------------------------------------
    @property
    def period(self):
        return self.Lambda * np.pi

    @property
    def volume(self):
        return self.period**self.dim

    @property
    def spacing(self):
        return self.period / self.n

    @property
    def shape(self):
        return (self.n,) * self.dim

    @property
    def spectral_shape(self):
        return (self.n,) * (self.dim - 1) + (self.n // 2 + 1,)

    @cached_property
    def x(self):
        """Per-axis coordinates, shape (n,)."""
        return -0.5 * self.period + self.spacing * np.arange(self.n)

    @cached_property
    def mesh(self):
        return np.meshgrid(*([self.x] * self.dim), indexing="ij")

    # --- wave indices -------------------------------------------------------------
    @cached_property
    def j(self):
        """Integer wave index per axis, broadcastable to spectral_shape."""
        full = np.fft.fftfreq(self.n, 1.0 / self.n)
        half = np.arange(self.n // 2 + 1, dtype=float)
        out = []
        for a in range(self.dim):
            v = half if a == self.dim - 1 else full
            shape = [1] * self.dim
            shape[a] = v.size
            out.append(v.reshape(shape))
        return out

    @cached_property
    def k(self):
        return [2.0 * ja / self.Lambda for ja in self.j]

    @cached_property
    def k_odd(self):
        """Wavenumbers with the Nyquist entry zeroed, as seen by first derivatives."""
        return [ka * (np.abs(ja) != self.n // 2) for ka, ja in zip(self.k, self.j)]

    @cached_property
    def k2(self):
        return sum(ka**2 for ka in self.k) + np.zeros(self.spectral_shape)

    @cached_property
    def dealias_mask(self):
        cut = self.n // 3
        mask = np.ones(self.spectral_shape, dtype=bool)
        for ja in self.j:
            mask &= np.abs(ja) <= cut
        return mask

    @cached_property
    def parseval_weights(self):
        w = np.full(self.spectral_shape, 2.0)
        w[..., 0] = 1.0
        w[..., -1] = 1.0
        return w

    # --- transforms ------------------------------------------------------------------
    @property
    def axes(self):
        return tuple(range(-self.dim, 0))

    def forward(self, f):
        return np.fft.rfftn(f, axes=self.axes)

    def inverse(self, fh):
        return np.fft.irfftn(fh, s=self.shape, axes=self.axes)

    def multiplier(self, axis, order):
        k = self.k_odd[axis] if order % 2 else self.k[axis]
        return (1j * k) ** order

    def inner(self, fh, gh):
        """L^2 inner product of the real fields behind fh, gh (summed over channels)."""
        w = self.parseval_weights
        s = np.sum(w * (fh * np.conj(gh)).real)
        return float(s) * self.volume / float(self.n) ** (2 * self.dim)

    def norm(self, fh):
        return float(np.sqrt(max(self.inner(fh, fh), 0.0)))

    def mean(self, fh):
        """Spatial mean per channel."""
        return fh[(...,) + (0,) * self.dim].real / float(self.n) ** self.dim

    @cached_property
    def _mode_rank(self):
        # rank of each stored coefficient's +-j pair in (|j|^2, canonical j) order
        J = np.stack(np.broadcast_arrays(*self.j), axis=-1).reshape(-1, self.dim).astype(int)
        first = np.zeros(len(J), dtype=int)
        for a in reversed(range(self.dim)):
            nz = J[:, a] != 0
            first = np.where(nz, J[:, a], first)
        canon = np.where((first < 0)[:, None], -J, J)
        n2 = np.sum(canon**2, axis=1)
        keys = np.column_stack([n2, canon])
        uniq, inv = np.unique(keys, axis=0, return_inverse=True)
        # np.unique sorts rows lexicographically, i.e. by |j|^2 then j
        return np.asarray(inv).reshape(self.spectral_shape)

    def galerkin_mask(self, M):
        """Mean mode plus the M lowest +-j mode pairs (rank 0 is the mean)."""
        return self._mode_rank <= M


@dataclass
class SpectralField:
    grid: Grid
    coefficients: np.ndarray = field(repr=False)

    @classmethod
    def from_real(cls, grid, values):
        return cls(grid, grid.forward(np.asarray(values, dtype=float)))

    def to_real(self):
        return self.grid.inverse(self.coefficients)

    @property
    def channels(self):
        shp = self.coefficients.shape[: -self.grid.dim]
        return int(np.prod(shp)) if shp else 1

    def _new(self, coeffs):
        return SpectralField(self.grid, coeffs)

    def __add__(self, other):
        return self._new(self.coefficients + other.coefficients)

    def __sub__(self, other):
        return self._new(self.coefficients - other.coefficients)

    def __mul__(self, a):
        return self._new(a * self.coefficients)

    __rmul__ = __mul__

    def norm(self):
        return self.grid.norm(self.coefficients)

    def inner(self, other):
        return self.grid.inner(self.coefficients, other.coefficients)

    def hermitian_defect(self):
        """Distance from exact Hermitian symmetry, relative to the field size."""
        g = self.grid
        back = g.forward(g.inverse(self.coefficients))
        scale = max(np.max(np.abs(self.coefficients)), 1e-300)
        return float(np.max(np.abs(back - self.coefficients)) / scale)


def derivative(f, axis, order):
    if order not in (1, 2, 3):
        raise ValueError("order must be 1, 2 or 3")
    return f._new(f.grid.multiplier(axis, order) * f.coefficients)


def gradient_coeffs(grid, fh):
    """(d, *fh.shape) spectral gradient along a new leading axis."""
    return np.stack([grid.multiplier(a, 1) * fh for a in range(grid.dim)])


def laplacian_coeffs(grid, fh):
    return -grid.k2 * fh


def leray_coeffs(grid, vh):
    """Apply I - k k^T / |k|^2 per mode to a (d, *spectral) array; mean kept.

    k is the Nyquist-zeroed wavenumber so the result is exactly divergence free
    for the discrete first derivative.
    """
    k = grid.k_odd
    k2 = sum(ka**2 for ka in k) + np.zeros(grid.spectral_shape)
    k2[k2 == 0] = 1.0
    div = sum(k[a] * vh[a] for a in range(grid.dim))
    return np.stack([vh[a] - k[a] * div / k2 for a in range(grid.dim)])


def leray_project(v):
    if v.coefficients.shape[0] != v.grid.dim:
        raise ValueError("leray_project needs a d-channel vector field")
    return v._new(leray_coeffs(v.grid, v.coefficients))


def divergence_coeffs(grid, vh):
    return sum(grid.multiplier(a, 1) * vh[a] for a in range(grid.dim))


def dealias(f):
    return f._new(f.coefficients * f.grid.dealias_mask)


def galerkin_project(u, M):
    if M < 1:
        raise ValueError("M must be >= 1")
    return u._new(u.coefficients * u.grid.galerkin_mask(M))
