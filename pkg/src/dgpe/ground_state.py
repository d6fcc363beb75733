"""Ground states of the stationary equation and the threshold quantities they define.

The stationary equation is

    -1/2 Lap Q + mu Q + lambda1 Q^3 + lambda2 (K * Q^2) Q = 0,

whose pairing with ``Q`` gives ``mu M = -H/2 - P``. Solutions are computed by
Petviashvili's stabilized fixed-point iteration on real, even profiles, with
an outer update of ``mu`` that matches a prescribed mass.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import (
    ConfigurationError,
    ConvergenceError,
    InputError,
    RegimeError,
    ResolutionError,
    VerificationError,
)
from .functionals import InvariantSet, PhysParams, invariants
from .regimes import classify_regime
from .spectral import (
    Field,
    GridSpec,
    dipolar_multiplier,
    fftn,
    irfftn,
    make_grid,
    read_checkpoint,
    resample,
    rfftn,
    write_checkpoint,
)


@dataclass(frozen=True)
class ThresholdQuantities:
    """Scale-invariant products ``E(Q)M(Q)``, ``H(Q)M(Q)``, ``P(Q)M(Q)``."""

    em: float
    hm: float
    pm: float
    cgn: float = float("nan")

    def chain(self) -> tuple[float, float, float, float]:
        """Four expressions that coincide for an exact ground state."""
        return (self.em, self.hm / 6.0, -self.pm / 4.0, (2.0 / 27.0) / self.cgn**2)


@dataclass(frozen=True, eq=False)
class GroundState:
    profile: Field
    mu: float
    invariants: InvariantSet
    cgn: float
    residual: float
    params: PhysParams
    iterations: int = 0
    restart_em: tuple = ()
    history: tuple = field(default=(), repr=False)

    @property
    def grid(self) -> GridSpec:
        return self.profile.grid

    def threshold(self) -> ThresholdQuantities:
        inv = self.invariants
        return ThresholdQuantities(inv.E * inv.M, inv.H * inv.M, inv.P * inv.M, self.cgn)


# ---------------------------------------------------------------- residual


def _nonlinear(q: np.ndarray, p: PhysParams, grid: GridSpec) -> np.ndarray:
    """``-(lambda1 q^2 + lambda2 K*q^2) q`` for real ``q``."""
    rho = q * q
    pot = p.lambda1 * rho
    if p.lambda2 != 0.0:
        pot = pot + p.lambda2 * irfftn(rfftn(rho) * dipolar_multiplier(grid).half, grid.n)
    return -pot * q


def stationary_residual(q, mu: float, p: PhysParams, grid: GridSpec | None = None) -> float:
    """Sup norm of ``-1/2 Lap q + mu q + lambda1 q^3 + lambda2 (K*q^2) q``."""
    if isinstance(q, Field):
        grid = q.grid
        q = q.values
    if np.iscomplexobj(q):
        if np.max(np.abs(q.imag)) > 1e-12 * max(np.max(np.abs(q.real)), 1e-300):
            raise InputError("ground-state residual expects a real profile")
        q = np.ascontiguousarray(q.real)
    lin = irfftn((0.5 * grid.xi2(half=True) + mu) * rfftn(q), grid.n)
    return float(np.max(np.abs(lin - _nonlinear(q, p, grid))))


# ---------------------------------------------------------------- solver


def _symmetrize(q: np.ndarray) -> np.ndarray:
    """Average over reflections of every axis and the swap x1 <-> x2."""
    for ax in range(3):
        q = 0.5 * (q + np.roll(np.flip(q, axis=ax), 1, axis=ax))
    return 0.5 * (q + q.transpose(1, 0, 2))


def _initial_profile(grid: GridSpec, p: PhysParams, mu: float, aspect: float) -> np.ndarray:
    """Gaussian elongated along x3 by ``aspect`` (compressed when ``aspect < 1``)."""
    x1, x2, x3 = grid.coords()
    w = 1.0 / math.sqrt(2.0 * mu)
    q = np.exp(-(x1**2 + x2**2) / (2.0 * w**2) - x3**2 / (2.0 * (aspect * w) ** 2))
    return _symmetrize(np.ascontiguousarray(q))


def _aspects(p: PhysParams, restarts: int) -> list[float]:
    # dipoles along x3 favour cigar shapes for lambda2 > 0 and pancakes for lambda2 < 0
    base = [1.0, 1.6, 2.5, 1.25, 2.0, 3.0]
    out = base[:restarts] + [1.0 + 0.3 * k for k in range(max(0, restarts - len(base)))]
    if p.lambda2 < 0.0:
        out = [1.0 / a for a in out]
    return out


def _petviashvili(q, mu, p, grid, tol, max_iter, history):
    Lhat = 0.5 * grid.xi2(half=True) + mu
    cell = grid.cell
    res = math.inf
    for it in range(1, max_iter + 1):
        qhat = rfftn(q)
        Nq = _nonlinear(q, p, grid)
        Nhat = rfftn(Nq)
        num = cell * float(np.sum(q * irfftn(Lhat * qhat, grid.n)))
        den = cell * float(np.sum(q * Nq))
        if not den > 0.0:
            raise ConvergenceError("nonlinear pairing lost its sign; no ground state reachable", res)
        S = num / den
        res = float(np.max(np.abs(irfftn(Lhat * qhat - Nhat, grid.n))))
        history.append(res)
        if not np.isfinite(res):
            raise ConvergenceError("iteration produced non-finite values", res)
        if res <= tol:
            return q, res, it
        q = irfftn(S**1.5 * Nhat / Lhat, grid.n)
        q = _symmetrize(q)
    return q, res, max_iter


def _single_solve(p, target_mass, grid, tol, max_iter, mu0, aspect, mass_rtol):
    mu = mu0
    q = _initial_profile(grid, p, mu, aspect)
    history: list[float] = []
    total = 0
    for _ in range(60):
        q, res, its = _petviashvili(q, mu, p, grid, tol, max_iter - total, history)
        total += its
        if res > tol:
            raise ConvergenceError(
                f"no convergence after {total} iterations (residual {res:.3e})", res
            )
        M = grid.integrate(q * q)
        if target_mass is None or abs(M / target_mass - 1.0) <= mass_rtol:
            return q, mu, res, total, history
        # mass of the continuum family scales as mu^(-1/2)
        scale = (M / target_mass) ** 2
        mu *= scale
        q = q * scale**0.5
        if total >= max_iter:
            break
    raise ConvergenceError("mass matching did not converge", res)


def solve_ground_state(
    p: PhysParams,
    target_mass: float | None,
    grid: GridSpec,
    tol: float = 1e-6,
    max_iter: int = 2000,
    *,
    restarts: int = 3,
    mu_guess: float = 0.5,
    mass_rtol: float = 1e-11,
) -> GroundState:
    """Compute a ground state ``Q`` with ``M(Q) = target_mass``.

    Parameters
    ----------
    p : PhysParams
        Must lie in the unstable regime.
    target_mass : float or None
        Prescribed mass. ``None`` keeps ``mu = mu_guess`` fixed instead.
    grid : GridSpec
    tol : float
        Sup-norm tolerance on the stationary residual.
    max_iter : int
        Iteration budget per restart, shared across the mass-matching loop.
    restarts : int
        Number of initial aspect ratios tried; the restart with the smallest
        ``E(Q)M(Q)`` is returned (ties go to the lower index).

    Raises
    ------
    RegimeError
        Parameters in the stable regime.
    ConvergenceError
        Residual above ``tol`` after ``max_iter`` iterations.
    """
    if not classify_regime(p).unstable:
        raise RegimeError(f"no ground state in the stable regime for {p}")
    if target_mass is not None and not target_mass > 0.0:
        raise ConfigurationError("target_mass must be positive")
    if not tol > 0.0 or int(max_iter) < 1 or int(restarts) < 1:
        raise ConfigurationError("tol, max_iter and restarts must be positive")
    if not mu_guess > 0.0:
        raise ConfigurationError("mu_guess must be positive")
    best = None
    ems = []
    last_err = None
    for k, aspect in enumerate(_aspects(p, int(restarts))):
        try:
            q, mu, res, its, hist = _single_solve(
                p, target_mass, grid, tol, int(max_iter), mu_guess, aspect, mass_rtol
            )
        except ConvergenceError as err:
            last_err = err
            ems.append(float("nan"))
            continue
        inv = invariants(Field(grid, q), p)
        em = inv.E * inv.M
        ems.append(em)
        if best is None or em < best[0]:
            best = (em, q, mu, res, its, hist, inv)
    if best is None:
        raise last_err
    em, q, mu, res, its, hist, inv = best
    return GroundState(
        profile=Field(grid, q),
        mu=mu,
        invariants=inv,
        cgn=_cgn(inv),
        residual=res,
        params=p,
        iterations=its,
        restart_em=tuple(ems),
        history=tuple(hist),
    )


def _cgn(inv: InvariantSet) -> float:
    if not inv.P < 0.0:
        return float("nan")
    return -inv.P / (inv.H**1.5 * inv.M**0.5)


def compute_cgn(q: GroundState) -> float:
    """Sharp Gagliardo-Nirenberg constant ``-P(Q) / (H(Q)^{3/2} M(Q)^{1/2})``."""
    inv = q.invariants
    if not inv.P < 0.0:
        raise VerificationError("P(Q) must be negative for a ground state")
    return _cgn(inv)


# ---------------------------------------------------------------- scaling


def rescale_ground_state(q: GroundState, mu_target: float, *, resample_grid: bool = False,
                         band_tol: float = 1e-10) -> GroundState:
    """Member of the scaling family ``beta Q(beta x)`` with chemical potential ``mu_target``.

    By default the grid is rescaled with the profile (``L -> L / beta``),
    which is exact. With ``resample_grid=True`` the profile is re-evaluated on
    the original grid by trigonometric interpolation; this raises
    :class:`ResolutionError` when the compressed profile would exceed the
    resolvable band or the dilated one would leave the box.
    """
    if not mu_target > 0.0:
        raise ConfigurationError("mu_target must be positive")
    beta = math.sqrt(mu_target / q.mu)
    p = q.params
    if mu_target == q.mu:
        return q
    if not resample_grid:
        grid = make_grid(q.grid.n, q.grid.L / beta)
        vals = beta * q.profile.values.real
        inv = q.invariants
        new_inv = InvariantSet(
            M=inv.M / beta, H=inv.H * beta, P=inv.P * beta, E=inv.E * beta, G=inv.G * beta
        )
        return replace(
            q,
            profile=Field(grid, vals),
            mu=mu_target,
            invariants=new_inv,
            residual=q.residual * beta**3,
        )
    grid = q.grid
    vals = q.profile.values.real
    spec = np.abs(fftn(vals)) ** 2
    total = float(np.sum(spec))
    if beta > 1.0:
        cut = grid.xi_max / beta
        k1, k2, k3 = grid.freqs()
        outside = (np.abs(k1) > cut) | (np.abs(k2) > cut) | (np.abs(k3) > cut)
        if float(np.sum(np.where(outside, spec, 0.0))) > band_tol * total:
            raise ResolutionError(f"rescaling by beta = {beta:.3g} exceeds the grid bandwidth")
    else:
        x1, x2, x3 = grid.coords()
        lim = beta * grid.L
        outside = (np.abs(x1) > lim) | (np.abs(x2) > lim) | (np.abs(x3) > lim)
        rho = vals * vals
        if float(np.sum(np.where(outside, rho, 0.0))) > band_tol * float(np.sum(rho)):
            raise ResolutionError(f"rescaling by beta = {beta:.3g} pushes mass out of the box")
    new = beta * resample(vals, grid, (beta, beta, beta)).real
    new = _symmetrize(np.ascontiguousarray(new))
    inv = invariants(Field(grid, new), p)
    return replace(
        q,
        profile=Field(grid, new),
        mu=mu_target,
        invariants=inv,
        cgn=_cgn(inv),
        residual=stationary_residual(new, mu_target, p, grid),
    )


def verify_identities(q: GroundState, tol: float = 1e-3) -> ThresholdQuantities:
    """Check the Pohozaev relations at ``mu = 1`` and return the threshold products.

    Raises
    ------
    VerificationError
        If ``H = 6M``, ``H = -3P/2`` or the four-member chain
        ``EM = HM/6 = -PM/4 = (2/27) C_GN^-2`` fails at relative tolerance ``tol``.
    """
    q1 = rescale_ground_state(q, 1.0)
    inv = q1.invariants
    H, M, P = inv.H, inv.M, inv.P
    if not (H > 0.0 and M > 0.0 and P < 0.0):
        raise VerificationError(f"invalid ground-state invariants H={H}, M={M}, P={P}")
    if abs(H - 6.0 * M) > tol * H:
        raise VerificationError(f"|H - 6M|/H = {abs(H - 6 * M) / H:.3e} exceeds {tol}")
    if abs(-1.5 * P - H) > tol * H:
        raise VerificationError(f"|H + 3P/2|/H = {abs(1.5 * P + H) / H:.3e} exceeds {tol}")
    tq = q1.threshold()
    chain = tq.chain()
    ref = chain[0]
    spread = max(abs(c - ref) for c in chain) / abs(ref)
    if not spread <= tol:
        raise VerificationError(f"threshold chain spread {spread:.3e} exceeds {tol}")
    return tq


# ---------------------------------------------------------------- cache


def cache_key(p: PhysParams, grid: GridSpec) -> str:
    raw = f"gs_{p.lambda1!r}_{p.lambda2!r}_{grid.n}_{grid.L!r}"
    return re.sub(r"[^A-Za-z0-9_.+-]", "_", raw)


def save_ground_state(q: GroundState, directory) -> tuple[Path, Path]:
    """Write the profile checkpoint and a key-value summary next to it."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    key = cache_key(q.params, q.grid)
    fpath = write_checkpoint(directory / f"{key}.dgpe", q.profile)
    inv = q.invariants
    rows = {
        "lambda1": q.params.lambda1,
        "lambda2": q.params.lambda2,
        "mu": q.mu,
        "M": inv.M,
        "H": inv.H,
        "P": inv.P,
        "E": inv.E,
        "C_GN": q.cgn,
        "residual": q.residual,
        "n": q.grid.n,
        "L": q.grid.L,
    }
    tpath = directory / f"{key}.txt"
    tpath.write_text("".join(f"{k} = {v!r}\n" for k, v in rows.items()))
    return fpath, tpath


def load_ground_state(directory, p: PhysParams, grid: GridSpec,
                      target_mass: float | None = None, rtol: float = 1e-9) -> GroundState | None:
    """Return a cached ground state for ``(p, grid)``, or ``None`` on a miss."""
    directory = Path(directory)
    key = cache_key(p, grid)
    fpath, tpath = directory / f"{key}.dgpe", directory / f"{key}.txt"
    if not (fpath.exists() and tpath.exists()):
        return None
    rows = {}
    for line in tpath.read_text().splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            rows[k.strip()] = float(v)
    if target_mass is not None and abs(rows["M"] / target_mass - 1.0) > rtol:
        return None
    prof, _ = read_checkpoint(fpath)
    if prof.grid != grid:
        return None
    inv = InvariantSet(M=rows["M"], H=rows["H"], P=rows["P"], E=rows["E"],
                       G=rows["H"] + 1.5 * rows["P"])
    return GroundState(profile=prof, mu=rows["mu"], invariants=inv, cgn=rows["C_GN"],
                       residual=rows["residual"], params=p)
