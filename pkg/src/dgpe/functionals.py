"""Scalar functionals: mass, kinetic and potential energy, Pohozaev functional, variances."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConfigurationError, NumericalHealthError
from .spectral import (
    Field,
    GridSpec,
    dipolar_multiplier,
    fftn,
    gradient,
    quadratic_pairing,
)


@dataclass(frozen=True)
class PhysParams:
    """Coefficients of the local (``lambda1``) and dipolar (``lambda2``) terms."""

    lambda1: float
    lambda2: float

    def __post_init__(self):
        l1, l2 = float(self.lambda1), float(self.lambda2)
        if not (np.isfinite(l1) and np.isfinite(l2)):
            raise ConfigurationError("lambda1 and lambda2 must be finite")
        if l1 == 0.0 and l2 == 0.0:
            raise ConfigurationError("lambda1 and lambda2 cannot both vanish")
        object.__setattr__(self, "lambda1", l1)
        object.__setattr__(self, "lambda2", l2)

    @classmethod
    def free(cls) -> "PhysParams":
        """Linear Schroedinger equation (bypasses the not-both-zero check)."""
        obj = object.__new__(cls)
        object.__setattr__(obj, "lambda1", 0.0)
        object.__setattr__(obj, "lambda2", 0.0)
        return obj

    @property
    def is_free(self) -> bool:
        return self.lambda1 == 0.0 and self.lambda2 == 0.0


@dataclass(frozen=True)
class InvariantSet:
    M: float
    H: float
    P: float
    E: float
    G: float

    def as_dict(self) -> dict:
        return asdict(self)


def _values(u) -> np.ndarray:
    if isinstance(u, Field):
        u = u.to_physical().values
    if not np.all(np.isfinite(u)):
        raise NumericalHealthError("non-finite field values")
    return u


def kinetic(u: np.ndarray, grid: GridSpec, uhat=None) -> float:
    """``int |grad u|^2`` as ``int |xi|^2 |u^|^2``, consistent with the Laplacian symbol."""
    if uhat is None:
        uhat = fftn(u)
    return float(np.sum(grid.xi2() * (uhat.real**2 + uhat.imag**2)) * grid.cell / grid.n**3)


def potential_parts(rho: np.ndarray, grid: GridSpec) -> tuple[float, float]:
    """``(int rho^2, int (K*rho) rho)`` for a real density."""
    local = grid.integrate(rho * rho)
    dip = quadratic_pairing(rho, grid, dipolar_multiplier(grid))
    return local, dip


def potential(rho: np.ndarray, grid: GridSpec, p: PhysParams) -> float:
    local, dip = potential_parts(rho, grid)
    return p.lambda1 * local + p.lambda2 * dip


def invariants(u, p: PhysParams, grid: GridSpec | None = None) -> InvariantSet:
    """Mass, kinetic, potential, energy and Pohozaev functional of ``u``."""
    if grid is None:
        grid = u.grid
    vals = _values(u)
    rho = vals.real**2 + vals.imag**2
    M = grid.integrate(rho)
    H = kinetic(vals, grid)
    P = 0.0 if p.is_free else potential(rho, grid, p)
    out = InvariantSet(M=M, H=H, P=P, E=0.5 * (H + P), G=H + 1.5 * P)
    if not all(np.isfinite(v) for v in asdict(out).values()):
        raise NumericalHealthError("non-finite invariant")
    return out


# ---------------------------------------------------------------- weights


def _ramp(t):
    """Smooth step: 0 for t <= 0, 1 for t >= 1."""
    t = np.clip(t, 0.0, 1.0)
    a = np.where(t > 0.0, np.exp(-1.0 / np.where(t > 0.0, t, 1.0)), 0.0)
    b = np.where(t < 1.0, np.exp(-1.0 / np.where(t < 1.0, 1.0 - t, 1.0)), 0.0)
    return a / (a + b)


def radial_profile(r):
    """Profile equal to ``r^2`` on ``[0, 1]``, zero on ``[2, inf)``.

    Built as ``r^2 (1 - s(r - 1))`` with a smooth step ``s``; its second
    derivative stays below 2 on ``[0, 1]`` and is bounded on ``(1, 2)``.
    """
    r = np.asarray(r, dtype=float)
    return r**2 * (1.0 - _ramp(r - 1.0))


@dataclass(frozen=True)
class VirialWeight:
    """Weight for variance functionals.

    ``kind`` is ``"full_variance"``, ``"ball_cutoff"`` (``R^2 chi(x/R)``) or
    ``"cylinder_plus_x3sq"`` (``R^2 rho(|xbar|/R) + x3^2``).
    """

    kind: str = "full_variance"
    R: float = 0.0

    def __post_init__(self):
        if self.kind not in ("full_variance", "ball_cutoff", "cylinder_plus_x3sq"):
            raise ConfigurationError(f"unknown weight kind {self.kind!r}")
        if self.kind != "full_variance" and not self.R > 0.0:
            raise ConfigurationError("localized weights need R > 0")

    def values(self, grid: GridSpec) -> np.ndarray:
        x1, x2, x3 = grid.coords()
        if self.kind == "full_variance":
            return x1**2 + x2**2 + x3**2
        if 2.0 * self.R > grid.L:
            raise ConfigurationError(f"weight radius 2R = {2 * self.R} exceeds L = {grid.L}")
        if self.kind == "ball_cutoff":
            r = np.sqrt(x1**2 + x2**2 + x3**2)
            return self.R**2 * radial_profile(r / self.R)
        rb = np.sqrt(x1**2 + x2**2)
        return self.R**2 * radial_profile(rb / self.R) + x3**2 + 0.0 * x1


def variance(u, w: VirialWeight | None = None, grid: GridSpec | None = None) -> float:
    """``int |x|^2 |u|^2`` for the full variance, ``2 int w |u|^2`` for localized weights."""
    if w is None:
        w = VirialWeight()
    if grid is None:
        grid = u.grid
    vals = _values(u)
    rho = vals.real**2 + vals.imag**2
    s = grid.integrate(w.values(grid) * rho)
    return s if w.kind == "full_variance" else 2.0 * s


def virial_rate(u, grid: GridSpec | None = None, uhat=None) -> float:
    """``2 Im int conj(u) (x . grad u)``, the time derivative of the full variance."""
    if grid is None:
        grid = u.grid
    vals = _values(u)
    d1, d2, d3 = gradient(vals, grid, uhat)
    x1, x2, x3 = grid.coords()
    s = np.conj(vals) * (x1 * d1 + x2 * d2 + x3 * d3)
    return 2.0 * grid.integrate(s.imag)


def localized_rate(u, w: VirialWeight, grid: GridSpec | None = None) -> float:
    """Time derivative of ``variance(u, w)`` along the flow, ``Im int conj(u) grad(w) . grad u``.

    Includes the factor 2 of the weighted variance for localized kinds; the
    compactly supported weights are differentiated spectrally.
    """
    if grid is None:
        grid = u.grid
    if w.kind == "full_variance":
        return virial_rate(u, grid)
    vals = _values(u)
    wv = np.ascontiguousarray(np.broadcast_to(w.values(grid), grid.shape), dtype=complex)
    gw = gradient(wv, grid)
    du = gradient(vals, grid)
    s = np.conj(vals) * sum(a.real * b for a, b in zip(gw, du))
    return 2.0 * grid.integrate(s.imag)


def outside_mass(u, radius: float, grid: GridSpec | None = None) -> float:
    """Mass carried by ``|x| >= radius``."""
    if grid is None:
        grid = u.grid
    vals = _values(u)
    rho = vals.real**2 + vals.imag**2
    return grid.integrate(np.where(grid.radius2() >= radius**2, rho, 0.0))


def tail_fraction(u, grid: GridSpec | None = None) -> float:
    """Fraction of mass outside ``|x| < L/2``."""
    if grid is None:
        grid = u.grid
    vals = _values(u)
    rho = vals.real**2 + vals.imag**2
    total = float(np.sum(rho))
    if total == 0.0:
        return 0.0
    return float(np.sum(np.where(grid.radius2() >= (0.5 * grid.L) ** 2, rho, 0.0)) / total)


def centroid(u, grid: GridSpec | None = None) -> np.ndarray:
    """Density centroid computed with periodic (circular) means per axis."""
    if grid is None:
        grid = u.grid
    vals = _values(u)
    rho = vals.real**2 + vals.imag**2
    out = np.zeros(3)
    theta = np.pi * (grid.x + grid.L) / grid.L
    for ax in range(3):
        other = tuple(a for a in range(3) if a != ax)
        z = np.sum(np.sum(rho, axis=other) * np.exp(1j * theta))
        pos = -grid.L + np.angle(z) * grid.L / np.pi
        out[ax] = (pos + grid.L) % (2.0 * grid.L) - grid.L
    return out


def recenter(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Periodic shift by whole nodes moving the density centroid next to the origin."""
    c = centroid(values, grid)
    shifts = tuple(int(-np.round(ci / grid.h)) for ci in c)
    if shifts == (0, 0, 0):
        return values
    return np.roll(values, shifts, axis=(0, 1, 2))
