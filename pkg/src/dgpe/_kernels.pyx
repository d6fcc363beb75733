# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Fused nodewise kernels for the split-step loop.

Every routine works in place on C-contiguous 3D buffers. Each output node
depends only on the same input node, so results do not depend on how the
loops are scheduled.
"""

from libc.math cimport cos, sin


def nonlinear_phase(double complex[:, :, ::1] u, const double[:, :, ::1] phi,
                    double lam1, double lam2, double dt):
    """u <- u * exp(-i dt (lam1 |u|^2 + lam2 phi))."""
    cdef Py_ssize_t i, j, k
    cdef Py_ssize_t n0 = u.shape[0], n1 = u.shape[1], n2 = u.shape[2]
    cdef double re, im, theta, c, s
    for i in range(n0):
        for j in range(n1):
            for k in range(n2):
                re = u[i, j, k].real
                im = u[i, j, k].imag
                theta = -dt * (lam1 * (re * re + im * im) + lam2 * phi[i, j, k])
                c = cos(theta)
                s = sin(theta)
                u[i, j, k] = (re * c - im * s) + 1j * (re * s + im * c)


def abs2(const double complex[:, :, ::1] u, double[:, :, ::1] out):
    cdef Py_ssize_t i, j, k
    cdef Py_ssize_t n0 = u.shape[0], n1 = u.shape[1], n2 = u.shape[2]
    cdef double re, im
    for i in range(n0):
        for j in range(n1):
            for k in range(n2):
                re = u[i, j, k].real
                im = u[i, j, k].imag
                out[i, j, k] = re * re + im * im


def mul_real(double complex[:, :, ::1] a, const double[:, :, ::1] m):
    cdef Py_ssize_t i, j, k
    cdef Py_ssize_t n0 = a.shape[0], n1 = a.shape[1], n2 = a.shape[2]
    cdef double w
    for i in range(n0):
        for j in range(n1):
            for k in range(n2):
                w = m[i, j, k]
                a[i, j, k] = a[i, j, k].real * w + 1j * (a[i, j, k].imag * w)


def mul_complex(double complex[:, :, ::1] a, const double complex[:, :, ::1] b):
    cdef Py_ssize_t i, j, k
    cdef Py_ssize_t n0 = a.shape[0], n1 = a.shape[1], n2 = a.shape[2]
    cdef double ar, ai, br, bi
    for i in range(n0):
        for j in range(n1):
            for k in range(n2):
                ar = a[i, j, k].real
                ai = a[i, j, k].imag
                br = b[i, j, k].real
                bi = b[i, j, k].imag
                a[i, j, k] = (ar * br - ai * bi) + 1j * (ar * bi + ai * br)
