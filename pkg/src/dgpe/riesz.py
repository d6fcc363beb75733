"""Numerical checks of Riesz-transform decay bounds, the biharmonic heat kernel and related identities.

Decay statements are tested as bounded ratios across doubling radii, never
as asymptotic equalities: test functions are L1-normalized and scale with
the radius, so a multiplier homogeneous of degree zero yields pairings that
decay like ``R^-3``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy import integrate, special

from .errors import ConfigurationError, InputError, ShapeError
from .functionals import _ramp
from .spectral import (
    Field,
    GridSpec,
    MultiplierField,
    as_multiplier,
    cross,
    dipolar_multiplier,
    fftn,
    fourth,
    gradient,
    ifftn,
    make_grid,
    riesz_multiplier,
    square,
)

FOUR_PI_3 = 4.0 * np.pi / 3.0


def default_grid() -> GridSpec:
    """128 nodes on [-64, 64): unit spacing, so radii are in grid units."""
    return make_grid(128, 64.0)


# ---------------------------------------------------------------- pairings


def _symbol(grid: GridSpec, spec) -> np.ndarray:
    """Nodewise symbol for a spec, a MultiplierField, ``'dipolar'`` or a list of (coef, spec)."""
    if isinstance(spec, list):
        out = np.zeros(grid.shape)
        for coef, s in spec:
            out = out + coef * as_multiplier(grid, s).values
        return out
    return as_multiplier(grid, spec).values


def riesz_pairing(f: Field, g: Field, spec) -> complex:
    """``int (T f) conj(g) dx`` for the Fourier multiplier ``T`` named by ``spec``.

    ``spec`` is a Riesz spec (``square(j)``, ``fourth(j)``, ``cross(k, h)``),
    a :class:`MultiplierField`, ``'dipolar'``, or a list of ``(coef, spec)``
    pairs whose symbols are summed.
    """
    if f.grid != g.grid:
        raise ShapeError("f and g live on different grids")
    grid = f.grid
    m = _symbol(grid, spec)
    F = fftn(f.to_physical().values)
    G = fftn(g.to_physical().values)
    s = np.sum(m * F * np.conj(G))
    return complex(s * grid.cell / grid.n**3)


def l1_norm(f: Field) -> float:
    return f.grid.integrate(np.abs(f.to_physical().values))


@dataclass(frozen=True)
class CylinderCutoff:
    """Smooth indicator of ``|xbar| <= gamma R`` (``side='inside'``) or its complement.

    The ramp runs over ``gamma R <= |xbar| <= (1 + width) gamma R``.
    """

    gamma: float
    R: float
    side: str = "inside"
    width: float = 0.1

    def __post_init__(self):
        if not (self.gamma > 0.0 and self.R > 0.0 and self.width > 0.0):
            raise ConfigurationError("gamma, R and width must be positive")
        if self.side not in ("inside", "outside"):
            raise ConfigurationError("side must be 'inside' or 'outside'")

    def values(self, grid: GridSpec) -> np.ndarray:
        x1, x2, _ = grid.coords()
        rb = np.sqrt(x1**2 + x2**2)
        r0 = self.gamma * self.R
        inner = 1.0 - _ramp((rb - r0) / (self.width * r0))
        chi = inner if self.side == "inside" else 1.0 - inner
        return np.broadcast_to(chi, grid.shape)


def _bump1d(s):
    """Smooth bump equal to 1 at 0 and supported in ``|s| < 1``."""
    s = np.asarray(s, dtype=float)
    inside = np.abs(s) < 1.0
    out = np.zeros_like(s)
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - s[inside] ** 2))
    return out


def _normalized(grid: GridSpec, vals) -> Field:
    vals = np.broadcast_to(vals, grid.shape)
    return Field(grid, vals / grid.integrate(np.abs(vals)))


def cylinder_core(grid: GridSpec, radius: float, height: float) -> Field:
    """L1-normalized smooth bump supported in ``|xbar| <= radius``, ``|x3| <= height``."""
    x1, x2, x3 = grid.coords()
    rb = np.sqrt(x1**2 + x2**2)
    return _normalized(grid, _bump1d(rb / radius) * _bump1d(x3 / height))


def cylinder_shell(grid: GridSpec, r_in: float, width: float, height: float) -> Field:
    """L1-normalized smooth annulus supported in ``r_in <= |xbar| <= r_in + width``."""
    x1, x2, x3 = grid.coords()
    rb = np.sqrt(x1**2 + x2**2)
    mid = r_in + 0.5 * width
    return _normalized(grid, _bump1d((rb - mid) / (0.5 * width)) * _bump1d(x3 / height))


def ball_bump(grid: GridSpec, center, radius: float) -> Field:
    x1, x2, x3 = grid.coords()
    c = [float(v) for v in center]
    r = np.sqrt((x1 - c[0]) ** 2 + (x2 - c[1]) ** 2 + (x3 - c[2]) ** 2)
    return _normalized(grid, _bump1d(r / radius))


@dataclass
class DecaySweepReport:
    kind: str
    exponent: int
    radii: list
    pairings: list
    norm_f1: list
    norm_g1: list
    ratios: list
    slope: float
    first_resolved: int
    slack: float
    notes: dict = field(default_factory=dict)

    @property
    def max_growth(self) -> float:
        """Largest ratio beyond the first resolved radius relative to that entry."""
        ref = self.ratios[self.first_resolved]
        return float(max(r / ref for r in self.ratios[self.first_resolved:]))

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.max_growth) and self.max_growth <= self.slack)

    def rows(self):
        for R, pa, nf, ng, br in zip(self.radii, self.pairings, self.norm_f1, self.norm_g1, self.ratios):
            yield {"R": R, "pairing_abs": pa, "norm_f1": nf, "norm_g1": ng, "bound_ratio": br}

    def write_csv(self, path) -> Path:
        path = Path(path)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["R", "pairing_abs", "norm_f1", "norm_g1", "bound_ratio"])
            for row in self.rows():
                w.writerow([repr(float(row[k])) for k in ("R", "pairing_abs", "norm_f1", "norm_g1", "bound_ratio")])
        return path


def _sweep_symbol(kind: str, axes):
    if kind == "r4":
        return fourth(axes[0] if axes else 3)
    if kind == "r2r2":
        k, h = axes if axes else (1, 3)
        return cross(k, h)
    if kind == "zero_degree":
        return "dipolar"
    raise ConfigurationError(f"unknown sweep kind {kind!r}")


def decay_sweep_pairing(kind: str, gamma1: float, gamma2: float, radii, *,
                        grid: GridSpec | None = None, slack: float = 1.3,
                        axes=None, symbol=None, min_resolved: float = 2.0) -> DecaySweepReport:
    """Pairing magnitudes across radii with the bound ratio ``|pairing| R^q / (|f|_1 |g|_1)``.

    Cylinder kinds (``r4``, ``r2r2``) use ``g`` in ``|xbar| <= gamma1 R`` and
    ``f`` in ``|xbar| >= gamma2 R`` with exponent ``q = 1``. ``zero_degree``
    treats each radius as the distance ``D`` between two balls on the x3 axis,
    of radii ``gamma1 D / 4`` and ``gamma2 D / 4``, with exponent ``q = 3``.

    A radius counts as resolved once ``gamma1 R >= min_resolved * h``.
    """
    if grid is None:
        grid = default_grid()
    radii = [float(r) for r in radii]
    if any(r <= 0 for r in radii) or any(b <= a for a, b in zip(radii, radii[1:])):
        raise ConfigurationError("radii must be positive and strictly increasing")
    if not radii:
        raise ConfigurationError("radii must not be empty")
    if not (gamma1 > 0.0 and gamma2 > 0.0):
        raise ConfigurationError("gamma1 and gamma2 must be positive")
    spec = symbol if symbol is not None else _sweep_symbol(kind, axes)
    m = _symbol(grid, spec)
    pairs, nf, ng, ratios = [], [], [], []
    if kind == "zero_degree":
        exponent = 3
        for D in radii:
            a, b = 0.25 * gamma1 * D, 0.25 * gamma2 * D
            far = D + a + b
            if 1.1 * far >= grid.L:
                raise ConfigurationError(f"distance {D} does not fit in the box")
            g = ball_bump(grid, (0.0, 0.0, 0.0), a)
            f = ball_bump(grid, (0.0, 0.0, D + a + b), b)
            pairs.append(abs(riesz_pairing(f, g, MultiplierField(grid, m))))
            nf.append(l1_norm(f))
            ng.append(l1_norm(g))
        resolved_scale = [0.25 * gamma1 * D for D in radii]
    else:
        if not gamma2 - gamma1 > 0.0:
            raise ConfigurationError("cylinder sweeps need gamma2 - gamma1 > 0")
        exponent = 1
        for R in radii:
            width = max(0.1 * gamma2 * R, 3.0 * grid.h)
            if 1.1 * (gamma2 * R + width) >= grid.L or R >= grid.L:
                raise ConfigurationError(f"radius {R} does not fit in the box")
            g = cylinder_core(grid, gamma1 * R, R)
            f = cylinder_shell(grid, gamma2 * R, width, R)
            pairs.append(abs(riesz_pairing(f, g, MultiplierField(grid, m))))
            nf.append(l1_norm(f))
            ng.append(l1_norm(g))
        resolved_scale = [gamma1 * R for R in radii]
    for R, pa, a, b in zip(radii, pairs, nf, ng):
        ratios.append(pa * R**exponent / (a * b))
    first = next((i for i, s in enumerate(resolved_scale) if s >= min_resolved * grid.h), 0)
    if len(radii) > 1 and all(p > 0 for p in pairs):
        slope = float(np.polyfit(np.log(radii), np.log(pairs), 1)[0])
    else:
        slope = float("nan")
    return DecaySweepReport(kind, exponent, radii, pairs, nf, ng, ratios, slope, first, slack,
                            notes={"gamma1": gamma1, "gamma2": gamma2, "n": grid.n, "L": grid.L})


# ---------------------------------------------------------------- pointwise


def gaussian_ring(grid: GridSpec, radius: float, width: float, height: float) -> Field:
    """L1-normalized Gaussian ring around the x3 axis."""
    x1, x2, x3 = grid.coords()
    rb = np.sqrt(x1**2 + x2**2)
    vals = np.exp(-((rb - radius) ** 2) / (2 * width**2) - x3**2 / (2 * height**2))
    return _normalized(grid, vals)


def gaussian_core(grid: GridSpec, width: float, height: float) -> Field:
    x1, x2, x3 = grid.coords()
    vals = np.exp(-(x1**2 + x2**2) / (2 * width**2) - x3**2 / (2 * height**2))
    return _normalized(grid, vals)


def pointwise_cutoff_check(f: Field, gamma1: float, gamma2: float, R: float, direction: str,
                           spec=None) -> dict:
    """Sup norm of a localized Riesz composite and its ratio ``sup R^3 / |f|_1``.

    ``in_out``: ``chi_{<= gamma1 R} T[(1 - chi_{<= gamma2 R}) f]`` with ``gamma2 > gamma1``.
    ``out_in``: ``(1 - chi_{<= gamma1 R}) T[chi_{<= gamma2 R} f]`` with ``gamma1 > gamma2``.
    ``T`` defaults to ``R_3^2``.
    """
    if direction not in ("in_out", "out_in"):
        raise ConfigurationError("direction must be 'in_out' or 'out_in'")
    d = gamma2 - gamma1 if direction == "in_out" else gamma1 - gamma2
    if not d > 0.0:
        raise ConfigurationError(f"{direction} needs a positive gap, got {d}")
    grid = f.grid
    if spec is None:
        spec = square(3)
    m = _symbol(grid, spec)
    vals = f.to_physical().values
    if direction == "in_out":
        src = (1.0 - CylinderCutoff(gamma2, R).values(grid)) * vals
        obs = CylinderCutoff(gamma1, R).values(grid)
    else:
        src = CylinderCutoff(gamma2, R).values(grid) * vals
        obs = CylinderCutoff(gamma1, R, "outside").values(grid)
    Tf = ifftn(m * fftn(src))
    comp = obs * Tf
    sup = float(np.max(np.abs(comp)))
    norm = grid.integrate(np.abs(src))
    ratio = sup * R**3 / norm if norm > 0 else 0.0
    return {"direction": direction, "R": R, "gamma1": gamma1, "gamma2": gamma2,
            "sup": sup, "norm_f1": norm, "ratio": ratio}


# ---------------------------------------------------------------- biharmonic kernel

_KERNEL_PREFACTOR = math.sqrt(2.0 / math.pi)
_S_MAX = 8.0  # exp(-8^4) underflows; the integrand vanishes beyond


def biharmonic_kernel(mu: float) -> float:
    """Radial profile ``k(mu) = sqrt(2/pi) mu^-1 int_0^inf exp(-s^4) s sin(mu s) ds``.

    The heat kernel of ``w_t + Lap^2 w = 0`` is ``alpha t^{-3/4} k(|x| t^{-1/4})``
    with ``alpha = (2 pi)^{-3/2}``. For ``mu < 1`` the integrand is written with
    ``sinc`` (so ``mu = 0`` is regular); otherwise an oscillatory sine-weighted
    quadrature is used.
    """
    mu = float(mu)
    if not np.isfinite(mu) or mu < 0.0:
        raise InputError("mu must be a finite non-negative number")
    if mu < 1.0:
        val, _ = integrate.quad(lambda s: np.exp(-s**4) * s * s * np.sinc(mu * s / np.pi),
                                0.0, _S_MAX, epsabs=1e-14, epsrel=1e-13, limit=200)
    else:
        val, _ = integrate.quad(lambda s: np.exp(-s**4) * s, 0.0, _S_MAX, weight="sin", wvar=mu,
                                epsabs=1e-14, epsrel=1e-13, limit=400)
        val /= mu
    return _KERNEL_PREFACTOR * val


def kernel_at_zero() -> float:
    """Closed form ``sqrt(2/pi) Gamma(3/4) / 4``."""
    return _KERNEL_PREFACTOR * special.gamma(0.75) / 4.0


@lru_cache(maxsize=1)
def kernel_normalization() -> float:
    """``alpha`` with ``alpha^-1 = 4 pi int_0^inf s^2 k(s) ds``; equals ``(2 pi)^{-3/2}``."""
    # k decays with oscillation; integrate on panels up to where |k| is negligible
    edges = np.linspace(0.0, 60.0, 121)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        v, _ = integrate.quad(lambda s: s * s * biharmonic_kernel(s), a, b, epsabs=1e-13, epsrel=1e-12)
        total += v
    return 1.0 / (4.0 * math.pi * total)


def biharmonic_multiplier(grid: GridSpec, t: float) -> MultiplierField:
    """``exp(-t |xi|^4)``, the symbol of the biharmonic heat semigroup."""
    if not t >= 0.0:
        raise ConfigurationError("t must be non-negative")
    return MultiplierField(grid, np.exp(-t * grid.xi2() ** 2))


def heat_kernel_gaussian_radial(r: float, t: float, sigma: float = 1.0, n_nodes: int = 400,
                                s_max: float | None = None) -> float:
    """``(p_t * f)(x)`` at ``|x| = r`` for ``f = exp(-|x|^2 / (2 sigma^2))`` by radial quadrature.

    Uses the closed-form spherical mean of the Gaussian and Gauss-Legendre
    nodes in ``s``; the kernel is evaluated with :func:`biharmonic_kernel`.
    """
    alpha = (2.0 * math.pi) ** -1.5
    if s_max is None:
        s_max = r + 12.0 * sigma
    nodes, weights = np.polynomial.legendre.leggauss(n_nodes)
    s = 0.5 * s_max * (nodes + 1.0)
    w = 0.5 * s_max * weights
    q = t**0.25
    kv = np.array([biharmonic_kernel(si / q) for si in s])
    pt = alpha * t**-0.75 * kv
    a = 1.0 / (2.0 * sigma**2)
    if r == 0.0:
        sph = 4.0 * math.pi * np.exp(-a * s * s)
    else:
        z = 2.0 * a * r * s
        # 4 pi exp(-a (r^2 + s^2)) sinh(z)/z, written to avoid overflow
        sph = 4.0 * math.pi * np.exp(-a * (r - s) ** 2) * (-np.expm1(-2.0 * z)) / (2.0 * np.where(z > 0, z, 1.0))
        sph = np.where(z > 0, sph, 4.0 * math.pi * np.exp(-a * s * s))
    return float(np.sum(w * pt * s * s * sph))


def kernel_two_path_check(t: float = 1.0, sigma: float = 1.0, radii=(0.0, 0.5, 1.0, 2.0),
                          grid: GridSpec | None = None) -> dict:
    """Compare kernel quadrature of ``p_t * f`` with the Fourier multiplier route on a grid."""
    if grid is None:
        grid = make_grid(64, 10.0)
    x1, x2, x3 = grid.coords()
    f = np.exp(-(x1**2 + x2**2 + x3**2) / (2 * sigma**2))
    out = np.real(ifftn(biharmonic_multiplier(grid, t).values * fftn(np.broadcast_to(f, grid.shape))))
    rows = []
    for r in radii:
        j = int(round((r + grid.L) / grid.h))
        xr = grid.x[j]
        grid_val = float(out[grid.n // 2, grid.n // 2, j])
        quad_val = heat_kernel_gaussian_radial(abs(xr), t, sigma)
        rows.append({"r": abs(xr), "fourier": grid_val, "kernel": quad_val,
                     "rel_error": abs(quad_val - grid_val) / abs(grid_val)})
    alpha = kernel_normalization()
    return {"rows": rows, "max_rel_error": max(r["rel_error"] for r in rows),
            "alpha": alpha, "alpha_expected": (2 * math.pi) ** -1.5}


# ---------------------------------------------------------------- R_i^4 through the semigroup


def _log_t_rule(a_max: float, t_max: float, n_quad: int, t_floor: float = 1e-8):
    """Composite Gauss-Legendre nodes in ``sigma = ln t`` over ``[t_floor / a_max, t_max]``."""
    lo = math.log(t_floor / a_max)
    hi = math.log(t_max)
    panels = max(1, int(math.ceil(hi - lo)))
    per = max(8, n_quad // panels)
    x, w = np.polynomial.legendre.leggauss(per)
    edges = np.linspace(lo, hi, panels + 1)
    sig = np.concatenate([0.5 * (b - a) * (x + 1.0) + a for a, b in zip(edges[:-1], edges[1:])])
    wt = np.concatenate([0.5 * (b - a) * w for a, b in zip(edges[:-1], edges[1:])])
    t = np.exp(sig)
    return t, wt * t  # dt = t dsigma


def _tail(a, T):
    return np.exp(-a * T) * (1.0 + a * T)


def r4_scalar_check(xis, axis: int, t_max: float, n_quad: int = 2000) -> dict:
    """``xi_i^4 |xi|^4 int_0^T exp(-t |xi|^4) t dt`` against ``xi_i^4/|xi|^4 (1 - tail)``."""
    xis = np.atleast_2d(np.asarray(xis, dtype=float))
    k2 = np.sum(xis**2, axis=1)
    if np.any(k2 == 0):
        raise InputError("zero frequency excluded")
    a = k2**2
    xi4 = xis[:, axis - 1] ** 4
    t, w = _log_t_rule(float(np.max(a)), t_max, n_quad)
    quad = np.array([np.sum(w * np.exp(-ai * t) * t) for ai in a])
    lhs = xi4 * a * quad
    sym = xi4 / a
    tail = _tail(a, t_max)
    rhs = sym * (1.0 - tail)
    err = np.abs(lhs - rhs)
    return {"max_abs_error": float(np.max(err)), "max_tail": float(np.max(sym * tail)),
            "min_aT": float(np.min(a) * t_max)}


def project_zero_mode(f: Field) -> Field:
    vals = f.to_physical().values
    return Field(f.grid, vals - np.mean(vals))


def r4_representation_check(f: Field, g: Field, t_max: float, n_quad: int = 2000,
                            axis: int = 3) -> dict:
    """Integral representation of ``R_i^4`` through the biharmonic semigroup.

    Scalar route: the identity at every non-zero grid frequency. Operator
    route: ``-int_0^T <d_i^4 (d/dt) P_t f, g> t dt`` by quadrature, compared
    with ``<R_i^4 f, g>`` minus the analytic tail contribution.
    """
    if f.grid != g.grid:
        raise ShapeError("f and g live on different grids")
    grid = f.grid
    fv = f.to_physical().values
    if abs(np.sum(fv)) * grid.cell > 1e-12 * max(grid.integrate(np.abs(fv)), 1e-300):
        raise InputError("f carries zero-mode mass; project it out first")
    F = fftn(fv)
    G = fftn(g.to_physical().values)
    k1, k2, k3 = grid.freqs()
    ks = (k1, k2, k3)
    xi_i = np.broadcast_to(ks[axis - 1], grid.shape)
    a = grid.xi2() ** 2
    nz = a > 0
    weight = (F * np.conj(G))[nz]
    xi4 = (xi_i**4)[nz]
    an = a[nz]
    amp_nz = np.abs(weight) > 0
    a_max = float(np.max(an))
    t, w = _log_t_rule(a_max, t_max, n_quad)
    # operator route: pairing at each t node of d_i^4 (d/dt) P_t f with g
    scale = grid.cell / grid.n**3
    op = 0.0 + 0.0j
    for tj, wj in zip(t, w):
        pair_t = np.sum(xi4 * (-an) * np.exp(-tj * an) * weight) * scale
        op += -wj * tj * pair_t
    sym = xi4 / an
    full = complex(np.sum(sym * weight) * scale)
    tail = complex(np.sum(sym * _tail(an, t_max) * weight) * scale)
    ref = full - tail
    rel = abs(op - ref) / abs(ref) if ref != 0 else abs(op - ref)
    # scalar route on every resolved frequency
    xis = np.stack([np.broadcast_to(k, grid.shape)[nz] for k in ks], axis=1)
    a_min_supported = float(np.min(an[amp_nz])) if amp_nz.any() else float(np.min(an))
    scalar = r4_scalar_check(xis[amp_nz] if amp_nz.any() else xis, axis, t_max, n_quad)
    return {
        "operator": op, "pairing": full, "tail": tail, "operator_rel_error": float(rel),
        "untreated_rel_error": float(abs(op - full) / abs(full)) if full != 0 else float("nan"),
        "tail_bound": float(math.exp(-a_min_supported * t_max) * (1 + a_min_supported * t_max)),
        "scalar_max_abs_error": scalar["max_abs_error"], "t_max": t_max, "n_quad": int(len(t)),
    }


# ---------------------------------------------------------------- Faa di Bruno


def _f_derivs(c, r):
    s, co = np.sin(c * r), np.cos(c * r)
    f1 = c * co / r - s / r**2
    f2 = -c * c * s / r - 2 * c * co / r**2 + 2 * s / r**3
    f3 = -(c**3) * co / r + 3 * c * c * s / r**2 + 6 * c * co / r**3 - 6 * s / r**4
    f4 = c**4 * s / r + 4 * c**3 * co / r**2 - 12 * c * c * s / r**3 - 24 * c * co / r**4 + 24 * s / r**5
    return f1, f2, f3, f4


def _g_derivs(x3, r):
    rho2 = r * r - x3 * x3
    g1 = x3 / r
    g2 = rho2 / r**3
    g3 = -3.0 * x3 * rho2 / r**5
    g4 = 3.0 * (-5.0 * x3**4 + 6.0 * x3 * x3 * r * r - r**4) / r**7
    return g1, g2, g3, g4


def faa_di_bruno_terms(c: float, x) -> list:
    """The five terms of the fourth ``x3``-derivative of ``sin(c|x|)/|x|``."""
    x = np.asarray(x, dtype=float)
    r = float(np.sqrt(np.sum(x * x)))
    f1, f2, f3, f4 = _f_derivs(c, r)
    g1, g2, g3, g4 = _g_derivs(x[2], r)
    return [f4 * g1**4, 6 * f3 * g2 * g1**2, 3 * f2 * g2**2, 4 * f2 * g3 * g1, f1 * g4]


def _radial(c, x, x3):
    r = np.sqrt(x[0] ** 2 + x[1] ** 2 + x3 * x3)
    return np.sin(c * r) / r


_FD9 = np.array([7.0, -96.0, 676.0, -1952.0, 2730.0, -1952.0, 676.0, -96.0, 7.0]) / 240.0


def fourth_derivative_fd(c: float, x, step: float | None = None) -> float:
    """Nine-point central difference for the fourth ``x3``-derivative, sixth order in the step."""
    x = np.asarray(x, dtype=float)
    r = float(np.sqrt(np.sum(x * x)))
    if step is None:
        step = 0.06 * min(r, 1.0 / max(abs(c), 1e-300)) if c != 0 else 0.06 * r
    offs = np.arange(-4, 5) * step
    vals = np.array([_radial(c, x, x[2] + o) for o in offs])
    return float(np.dot(_FD9, vals) / step**4)


# bound of |f^(k)| by sum_j coef |c|^j / r^(k+1-j) style monomials, and of |g^(k)| by coef / r^(k-1)
_F_BOUNDS = {
    1: {(1, 1): 1, (0, 2): 1},
    2: {(2, 1): 1, (1, 2): 2, (0, 3): 2},
    3: {(3, 1): 1, (2, 2): 3, (1, 3): 6, (0, 4): 6},
    4: {(4, 1): 1, (3, 2): 4, (2, 3): 12, (1, 4): 24, (0, 5): 24},
}
_G_BOUNDS = {1: (1, 0), 2: (1, 1), 3: (3, 2), 4: (36, 3)}  # |g^(k)| <= coef / r^power


def claim_polynomial_pairs() -> dict:
    """Monomial bound ``sum coef |c|^j / r^k`` collected from the five terms.

    Returns a dict mapping ``(j, k)`` to the coefficient; each entry is one
    pair ``(q~_k(c), q_k(r)) = (coef |c|^j, r^k)``.
    """
    terms = [(4, {1: 4}, 1), (3, {1: 2, 2: 1}, 6), (2, {2: 2}, 3), (2, {3: 1, 1: 1}, 4), (1, {4: 1}, 1)]
    out: dict = {}
    for fk, gpow, mult in terms:
        gcoef, gr = 1.0, 0
        for gk, e in gpow.items():
            cg, pw = _G_BOUNDS[gk]
            gcoef *= cg**e
            gr += pw * e
        for (j, k), cf in _F_BOUNDS[fk].items():
            key = (j, k + gr)
            out[key] = out.get(key, 0) + mult * gcoef * cf
    return dict(sorted(out.items()))


def faa_di_bruno_check(c: float, points, tol: float = 1e-6) -> dict:
    """Composed fourth derivative versus finite differences, plus the monomial bound.

    The relative error is measured against the sum of absolute term values,
    which stays meaningful where the derivative itself crosses zero.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    pairs = claim_polynomial_pairs()
    rows = []
    for x in pts:
        r = float(np.sqrt(np.sum(x * x)))
        if r < 0.5:
            raise InputError(f"point {x.tolist()} lies closer than 0.5 to the origin")
        terms = faa_di_bruno_terms(c, x)
        val = float(sum(terms))
        fd = fourth_derivative_fd(c, x)
        scale = float(sum(abs(v) for v in terms))
        rel = abs(val - fd) / scale if scale > 0 else abs(val - fd)
        bound = sum(cf * abs(c) ** j / r**k for (j, k), cf in pairs.items())
        rows.append({"x": x.tolist(), "formula": val, "finite_difference": fd, "rel_error": rel,
                     "bound": bound, "bound_ok": bool(abs(val) <= bound * (1 + 1e-12))})
    max_rel = max(r["rel_error"] for r in rows)
    return {"c": c, "rows": rows, "max_rel_error": max_rel,
            "pairs": {f"|c|^{j}/r^{k}": cf for (j, k), cf in pairs.items()},
            "passed": bool(max_rel <= tol and all(r["bound_ok"] for r in rows))}


# ---------------------------------------------------------------- dipolar symbol


def dipolar_symbol(xi) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    k2 = np.sum(xi**2, axis=-1)
    return FOUR_PI_3 * (2 * xi[..., 2] ** 2 - xi[..., 0] ** 2 - xi[..., 1] ** 2) / k2


def dipolar_symbol_gradient(xi) -> np.ndarray:
    """Analytic gradient of the dipolar symbol ``4 pi (xi3^2/|xi|^2 - 1/3)``."""
    xi = np.asarray(xi, dtype=float)
    k2 = np.sum(xi**2, axis=-1)[..., None]
    x3 = xi[..., 2:3]
    grad = -2.0 * x3**2 * xi / k2**2
    grad[..., 2:3] += 2.0 * x3 / k2
    return 4.0 * np.pi * grad


def pairing_identity_residual(f: np.ndarray, grid: GridSpec) -> dict:
    """``2 int x . grad(K*f) f + 3 int (K*f) f`` for a real, localized ``f``."""
    fv = np.asarray(f, dtype=float)
    phi = np.real(ifftn(dipolar_multiplier(grid).values * fftn(fv)))
    d1, d2, d3 = gradient(phi.astype(complex), grid)
    x1, x2, x3 = grid.coords()
    lhs = 2.0 * grid.integrate((x1 * d1.real + x2 * d2.real + x3 * d3.real) * fv)
    rhs = grid.integrate(phi * fv)
    return {"virial_term": lhs, "pairing": rhs, "residual": lhs + 3.0 * rhs,
            "rel_residual": abs(lhs + 3.0 * rhs) / abs(3.0 * rhs)}


def dipolar_symbol_identities(grid: GridSpec | None = None, n_samples: int = 512, seed: int = 0,
                              f: np.ndarray | None = None) -> dict:
    """Radial invariance, the ``xi3 d/dxi3`` identity and the dipolar pairing identity."""
    rng = np.random.default_rng(seed)
    dirs = rng.normal(size=(n_samples, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    rad = np.exp(rng.uniform(np.log(1e-3), np.log(1e3), size=(n_samples, 1)))
    xi = dirs * rad
    radial = np.abs(np.sum(xi * dipolar_symbol_gradient(xi), axis=1))
    homog = np.abs(dipolar_symbol(2.0 * xi) - dipolar_symbol(xi))
    if grid is None:
        grid = make_grid(96, 24.0)  # periodic images bias the identity by about (width/L)^3
    k1, k2, k3 = grid.freqs()
    xs = np.stack(np.broadcast_arrays(k1, k2, k3), axis=-1)
    nz = grid.xi2() > 0
    lhs = np.zeros(grid.shape)
    lhs[nz] = xs[nz][:, 2] * dipolar_symbol_gradient(xs[nz])[:, 2]
    rhs = 8.0 * np.pi * (riesz_multiplier(grid, square(3)).values - riesz_multiplier(grid, fourth(3)).values)
    nodewise = float(np.max(np.abs(lhs - rhs)))
    if f is None:
        x1, x2, x3 = grid.coords()
        f = np.broadcast_to(np.exp(-(x1**2 + x2**2) / 2.0 - x3**2 / (2 * 1.5**2)), grid.shape)
    pid = pairing_identity_residual(f, grid)
    return {
        "radial_derivative_max": float(np.max(radial)),
        "homogeneity_max": float(np.max(homog)),
        "xi3_identity_max": nodewise,
        "pairing_identity": pid,
    }
