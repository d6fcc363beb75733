"""Periodic grid, discrete Fourier transforms and Fourier multipliers.

The box is ``[-L, L)^3`` sampled at ``x_j = -L + j h`` with ``h = 2L/n``.
Frequencies are ``xi_k = pi k / L`` stored in FFT order. The continuous
transform uses the kernel ``exp(-i x.xi)`` and ``(2 pi)^-3`` on the inverse,
so a multiplier ``m`` acts as ``(T f)^ = m f^`` with no extra rescaling.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import cached_property, lru_cache
from pathlib import Path

import numpy as np
import scipy.fft as sfft

from .errors import ConfigurationError, InputError, NumericalHealthError, ShapeError

_FFT_WORKERS = 1

CHECKPOINT_MAGIC = b"DGPE"
CHECKPOINT_VERSION = 1
_HEADER = struct.Struct("<4sIIdd")


def set_fft_workers(workers: int) -> None:
    """Set the thread count used by every transform in the package."""
    global _FFT_WORKERS
    if int(workers) < 1:
        raise ConfigurationError("fft workers must be >= 1")
    _FFT_WORKERS = int(workers)


def fft_workers() -> int:
    return _FFT_WORKERS


def fftn(a):
    return sfft.fftn(a, workers=_FFT_WORKERS)


def ifftn(a):
    return sfft.ifftn(a, workers=_FFT_WORKERS)


def rfftn(a):
    return sfft.rfftn(a, workers=_FFT_WORKERS)


def irfftn(a, n):
    return sfft.irfftn(a, s=(n, n, n), workers=_FFT_WORKERS)


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic cubic grid on ``[-L, L)^3`` with ``n`` nodes per axis."""

    n: int
    L: float

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.n

    @property
    def cell(self) -> float:
        return self.h**3

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n)

    @property
    def xi_max(self) -> float:
        return np.pi / self.h

    @cached_property
    def x(self) -> np.ndarray:
        return -self.L + self.h * np.arange(self.n)

    @cached_property
    def xi(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.h)

    @cached_property
    def xi_deriv(self) -> np.ndarray:
        # first-derivative symbol: the unpaired Nyquist mode is dropped
        k = self.xi.copy()
        k[self.n // 2] = 0.0
        return k

    def coords(self):
        """Broadcastable coordinate arrays ``(x1, x2, x3)``."""
        x = self.x
        return x[:, None, None], x[None, :, None], x[None, None, :]

    def freqs(self, half: bool = False):
        """Broadcastable frequency arrays; ``half`` gives the rfft layout."""
        xi = self.xi
        x3 = np.abs(xi[: self.n // 2 + 1]) if half else xi
        return xi[:, None, None], xi[None, :, None], x3[None, None, :]

    def radius2(self) -> np.ndarray:
        x1, x2, x3 = self.coords()
        return x1**2 + x2**2 + x3**2

    def xi2(self, half: bool = False) -> np.ndarray:
        """``|xi|^2`` on the full or half (rfft) frequency grid; cached, read-only."""
        return self._xi2_half if half else self._xi2_full

    @cached_property
    def _xi2_full(self) -> np.ndarray:
        k1, k2, k3 = self.freqs()
        out = k1**2 + k2**2 + k3**2
        out.setflags(write=False)
        return out

    @cached_property
    def _xi2_half(self) -> np.ndarray:
        k1, k2, k3 = self.freqs(True)
        out = k1**2 + k2**2 + k3**2
        out.setflags(write=False)
        return out

    def integrate(self, values) -> float:
        return float(np.sum(values) * self.cell)


def make_grid(n: int, L: float) -> GridSpec:
    """Validated grid constructor."""
    if isinstance(n, bool) or int(n) != n:
        raise ConfigurationError(f"n must be an integer, got {n!r}")
    n = int(n)
    if n % 2 or n < 8:
        raise ConfigurationError(f"n must be even and >= 8, got {n}")
    L = float(L)
    if not np.isfinite(L) or L <= 0.0:
        raise ConfigurationError(f"L must be positive, got {L}")
    return GridSpec(n, L)


def _sign_pattern(n: int) -> np.ndarray:
    s = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    return s[:, None, None] * s[None, :, None] * s[None, None, :]


@dataclass(frozen=True, eq=False)
class Field:
    """Complex samples of a function on a grid, in physical or frequency space.

    Frequency-space values approximate the continuous transform
    ``f^(xi) = int f(x) exp(-i x.xi) dx``. Values are copied on construction
    and published read-only.
    """

    grid: GridSpec
    values: np.ndarray
    space: str = "physical"

    def __post_init__(self):
        if self.space not in ("physical", "frequency"):
            raise ShapeError(f"unknown space {self.space!r}")
        arr = np.array(self.values, dtype=np.complex128, order="C", copy=True)
        if arr.shape != self.grid.shape:
            raise ShapeError(f"values shape {arr.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(arr)):
            raise NumericalHealthError("field contains NaN or Inf")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @classmethod
    def from_function(cls, grid: GridSpec, fn) -> "Field":
        x1, x2, x3 = grid.coords()
        return cls(grid, np.broadcast_to(fn(x1, x2, x3), grid.shape))

    def to_frequency(self) -> "Field":
        if self.space == "frequency":
            return self
        vals = fftn(self.values) * (self.grid.cell * _sign_pattern(self.grid.n))
        return Field(self.grid, vals, "frequency")

    def to_physical(self) -> "Field":
        if self.space == "physical":
            return self
        vals = ifftn(self.values * (_sign_pattern(self.grid.n) / self.grid.cell))
        return Field(self.grid, vals, "physical")

    def norm_l2(self) -> float:
        if self.space == "physical":
            return float(np.sqrt(self.grid.integrate(np.abs(self.values) ** 2)))
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) / (8.0 * self.grid.L**3)))

    @property
    def real(self) -> np.ndarray:
        return self.values.real

    def _check(self, other: "Field"):
        if other.grid != self.grid or other.space != self.space:
            raise ShapeError("fields live on different grids or spaces")

    def __add__(self, other: "Field") -> "Field":
        self._check(other)
        return Field(self.grid, self.values + other.values, self.space)

    def __sub__(self, other: "Field") -> "Field":
        self._check(other)
        return Field(self.grid, self.values - other.values, self.space)

    def __mul__(self, a) -> "Field":
        return Field(self.grid, self.values * a, self.space)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class MultiplierField:
    """Real Fourier symbol sampled at every frequency node (FFT order)."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float64, order="C", copy=True)
        if arr.shape != self.grid.shape:
            raise ShapeError("multiplier shape does not match grid")
        if not np.all(np.isfinite(arr)):
            raise NumericalHealthError("multiplier contains NaN or Inf")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    @property
    def half(self) -> np.ndarray:
        """Slice matching the rfftn layout."""
        return self.values[:, :, : self.grid.n // 2 + 1]

    def __add__(self, other: "MultiplierField") -> "MultiplierField":
        if other.grid != self.grid:
            raise ShapeError("multipliers live on different grids")
        return MultiplierField(self.grid, self.values + other.values)

    def __mul__(self, a: float) -> "MultiplierField":
        return MultiplierField(self.grid, self.values * float(a))

    __rmul__ = __mul__


def _ratio(num, den):
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(den > 0.0, num / np.where(den > 0.0, den, 1.0), 0.0)
    return out


@lru_cache(maxsize=16)
def _dipolar_values(grid: GridSpec) -> np.ndarray:
    k1, k2, k3 = grid.freqs()
    k2sum = k1**2 + k2**2 + k3**2
    vals = (4.0 * np.pi / 3.0) * _ratio(2.0 * k3**2 - k1**2 - k2**2, k2sum)
    vals.setflags(write=False)
    return vals


def dipolar_multiplier(grid: GridSpec) -> MultiplierField:
    """Symbol of the dipolar kernel, ``(4 pi/3)(2 xi3^2 - xi1^2 - xi2^2)/|xi|^2``.

    Bounded in ``[-4 pi/3, 8 pi/3]``; the zero mode is set to 0.
    """
    return MultiplierField(grid, _dipolar_values(grid))


def square(j: int):
    return ("square", j)


def fourth(j: int):
    return ("fourth", j)


def cross(k: int, h: int):
    return ("cross", k, h)


def riesz_multiplier(grid: GridSpec, spec) -> MultiplierField:
    """Powers of Riesz transforms: ``square(j)``, ``fourth(j)`` or ``cross(k, h)``.

    ``square(j)`` is ``xi_j^2/|xi|^2``, ``fourth(j)`` is ``xi_j^4/|xi|^4`` and
    ``cross(k, h)`` is ``xi_k^2 xi_h^2/|xi|^4``. All lie in ``[0, 1]`` and vanish
    at the zero mode.
    """
    kind, *axes = spec
    if any(a not in (1, 2, 3) for a in axes):
        raise ConfigurationError(f"axis index must be 1, 2 or 3: {spec!r}")
    ks = grid.freqs()
    k2sum = ks[0] ** 2 + ks[1] ** 2 + ks[2] ** 2
    if kind == "square" and len(axes) == 1:
        vals = _ratio(ks[axes[0] - 1] ** 2 + 0.0 * k2sum, k2sum)
    elif kind == "fourth" and len(axes) == 1:
        vals = _ratio(ks[axes[0] - 1] ** 4 + 0.0 * k2sum, k2sum**2)
    elif kind == "cross" and len(axes) == 2:
        if axes[0] == axes[1]:
            raise ConfigurationError("cross(k, h) needs k != h")
        vals = _ratio(ks[axes[0] - 1] ** 2 * ks[axes[1] - 1] ** 2 + 0.0 * k2sum, k2sum**2)
    else:
        raise ConfigurationError(f"unknown multiplier spec {spec!r}")
    return MultiplierField(grid, vals)


def as_multiplier(grid: GridSpec, m) -> MultiplierField:
    """Accept a MultiplierField, a spec tuple or the string ``'dipolar'``."""
    if isinstance(m, MultiplierField):
        if m.grid != grid:
            raise ShapeError("multiplier grid mismatch")
        return m
    if isinstance(m, str) and m == "dipolar":
        return dipolar_multiplier(grid)
    return riesz_multiplier(grid, m)


def apply_multiplier(f: Field, m: MultiplierField) -> Field:
    """Physical-space field whose transform is ``m * f^``."""
    if f.grid != m.grid:
        raise ShapeError("field and multiplier live on different grids")
    f = f.to_physical()
    return Field(f.grid, ifftn(fftn(f.values) * m.values))


def convolve_real(rho: np.ndarray, grid: GridSpec, m: MultiplierField) -> np.ndarray:
    """Apply a real even multiplier to a real array via the half-spectrum."""
    return irfftn(rfftn(rho) * m.half, grid.n)


def dipolar_potential(rho: Field) -> Field:
    """``K * rho`` for real ``rho`` (zero-mode convention ``K^(0) = 0``)."""
    rho = rho.to_physical()
    vals = rho.values
    scale = np.max(np.abs(vals)) if vals.size else 0.0
    if np.max(np.abs(vals.imag)) > 1e-12 * max(scale, 1e-300):
        raise InputError("dipolar_potential expects a real-valued density")
    grid = rho.grid
    return Field(grid, convolve_real(np.ascontiguousarray(vals.real), grid, dipolar_multiplier(grid)))


def quadratic_pairing(rho: np.ndarray, grid: GridSpec, m: MultiplierField) -> float:
    """``int (T rho) rho dx`` for real ``rho``, evaluated in frequency space."""
    r = rfftn(rho)
    w = np.full(r.shape[-1], 2.0)
    w[0] = 1.0
    if grid.n % 2 == 0:
        w[-1] = 1.0
    return float(np.sum((np.abs(r) ** 2 * m.half) * w) * grid.cell / grid.n**3)


def gradient(u: np.ndarray, grid: GridSpec, uhat=None):
    """Spectral gradient of a complex array; returns three arrays."""
    if uhat is None:
        uhat = fftn(u)
    k = grid.xi_deriv
    return (
        ifftn(1j * k[:, None, None] * uhat),
        ifftn(1j * k[None, :, None] * uhat),
        ifftn(1j * k[None, None, :] * uhat),
    )


def laplacian(u: np.ndarray, grid: GridSpec) -> np.ndarray:
    return ifftn(-grid.xi2() * fftn(u))


def two_thirds_mask(grid: GridSpec) -> np.ndarray:
    """Boolean mask of the modes kept by the 2/3 dealiasing rule."""
    cut = (2.0 / 3.0) * grid.xi_max
    k1, k2, k3 = grid.freqs()
    return (np.abs(k1) <= cut) & (np.abs(k2) <= cut) & (np.abs(k3) <= cut)


def spectral_tail_fraction(uhat: np.ndarray, grid: GridSpec) -> float:
    """Fraction of ``sum |u^|^2`` carried by modes outside the 2/3 cube."""
    p = np.abs(uhat) ** 2
    total = float(np.sum(p))
    if total == 0.0:
        return 0.0
    return float(np.sum(np.where(two_thirds_mask(grid), 0.0, p)) / total)


def resample(values: np.ndarray, grid: GridSpec, scales) -> np.ndarray:
    """Evaluate the trigonometric interpolant of ``values`` at ``(s1 x1, s2 x2, s3 x3)``.

    Separable, exact for band-limited data. The Nyquist mode is interpolated
    with its real cosine form.
    """
    n = grid.n
    xi = grid.xi
    out = fftn(values) / n**3
    for axis, s in enumerate(scales):
        y = s * grid.x + grid.L
        E = np.exp(1j * np.outer(y, xi))
        E[:, n // 2] = np.cos(xi[n // 2] * y)
        out = np.moveaxis(np.tensordot(E, out, axes=([1], [axis])), 0, axis)
    return out


def write_checkpoint(path, field: Field, t: float = 0.0) -> Path:
    """Binary checkpoint: little-endian header then interleaved (re, im) float64."""
    path = Path(path)
    f = field.to_physical()
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, f.grid.n, f.grid.L, float(t)))
        fh.write(np.ascontiguousarray(f.values, dtype="<c16").tobytes(order="C"))
    return path


def read_checkpoint(path) -> tuple[Field, float]:
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"checkpoint not found: {path}")
    data = path.read_bytes()
    if len(data) < _HEADER.size:
        raise InputError(f"truncated checkpoint: {path}")
    magic, version, n, L, t = _HEADER.unpack_from(data)
    if magic != CHECKPOINT_MAGIC:
        raise InputError(f"bad checkpoint magic in {path}")
    if version != CHECKPOINT_VERSION:
        raise InputError(f"unsupported checkpoint version {version}")
    grid = make_grid(n, L)
    body = np.frombuffer(data, dtype="<c16", offset=_HEADER.size)
    if body.size != n**3:
        raise InputError(f"checkpoint body has {body.size} values, expected {n**3}")
    return Field(grid, body.reshape(grid.shape)), t
