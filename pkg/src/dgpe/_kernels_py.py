"""NumPy implementation of the fused nodewise kernels (fallback backend)."""

import numpy as np


def nonlinear_phase(u, phi, lam1, lam2, dt):
    theta = np.abs(u) ** 2
    theta *= lam1
    if lam2 != 0.0:
        theta += lam2 * phi
    theta *= -dt
    u *= np.cos(theta) + 1j * np.sin(theta)


def abs2(u, out):
    np.multiply(u.real, u.real, out=out)
    out += u.imag * u.imag


def mul_real(a, m):
    a *= m


def mul_complex(a, b):
    a *= b
