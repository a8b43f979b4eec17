"""Independent reference values, computed outside the package and frozen.

Each constant records how it was obtained; regenerate with ``python tests/oracles.py``.
"""
import numpy as np

# log Z and <w_1^2> for mu = (1, -1) on the circle: scipy.integrate.quad of
# exp(cos 2 theta), cross-checked against log(2 pi I0(1)) and (1 + I1(1)/I0(1))/2.
LOGZ_CIRCLE_MU_1_M1 = 2.073791424916524
M1_CIRCLE_MU_1_M1 = 0.7231949829482673

# mu = (1.5, -0.5, -1.0) on the sphere: scipy.integrate.dblquad in (theta, phi).
MU_SPHERE = (1.5, -0.5, -1.0)
LOGZ_SPHERE = 2.7821242320732997
M_SPHERE = (0.5546144399822474, 0.24115845849998538, 0.2042271015177673)

# -log|S^1|, -log|S^2|
PSI0 = {2: -1.8378770664093453, 3: -2.5310242469692907}

# envelope at the non-physical eigenvalues (0.9, -0.45, -0.45), J = 4: dense
# barycentric grid search (R = 120) over the triangle followed by Nelder-Mead.
PROX_X = (0.9, -0.45, -0.45)
PROX_J = 4.0
PROX_VALUE = -0.23892130697537906
PROX_POINT = (0.45001741463954487, -0.22500870968375306, -0.2250087049557918)


def fd8_derivative(f, h, axis):
    """Eighth-order central difference of a periodic array along ``axis``."""
    c = (4 / 5, -1 / 5, 4 / 105, -1 / 280)
    out = np.zeros_like(f)
    for k, ck in enumerate(c, start=1):
        out += ck * (np.roll(f, -k, axis=axis) - np.roll(f, k, axis=axis))
    return out / h


if __name__ == "__main__":
    from scipy import integrate, special

    Z, _ = integrate.quad(lambda th: np.exp(np.cos(2 * th)), 0, 2 * np.pi, epsabs=1e-14, epsrel=1e-14)
    print("circle logZ", np.log(Z), np.log(2 * np.pi * special.i0(1)))
    print("circle m1", (1 + special.i1(1) / special.i0(1)) / 2)
    mu = np.array(MU_SPHERE)

    def dens(ph, th, k):
        w = np.array([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)])
        e = np.exp(mu @ (w**2)) * np.sin(th)
        return e if k < 0 else e * w[k] ** 2

    Z3 = integrate.dblquad(lambda ph, th: dens(ph, th, -1), 0, np.pi, 0, 2 * np.pi, epsabs=1e-13, epsrel=1e-13)[0]
    print("sphere logZ", np.log(Z3))
    print("sphere m", [integrate.dblquad(lambda ph, th: dens(ph, th, k), 0, np.pi, 0, 2 * np.pi,
                                         epsabs=1e-13, epsrel=1e-13)[0] / Z3 for k in range(3)])
