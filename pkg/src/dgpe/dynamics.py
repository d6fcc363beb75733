"""Strang split-step integration with conservation, virial and blow-up monitoring.

The equation is ``i u_t + 1/2 Lap u = lambda1 |u|^2 u + lambda2 (K*|u|^2) u``.
The kinetic substep is the exact Fourier phase ``exp(-i dt |xi|^2 / 2)``; the
nonlinear substep is the exact pointwise rotation
``u <- u exp(-i dt (lambda1 |u|^2 + lambda2 K*|u|^2))``, which is exact
because both ``|u|`` and ``K*|u|^2`` are invariant under it.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .errors import ConfigurationError, InputError, NumericalHealthError, ResolutionError
from .functionals import (
    InvariantSet,
    PhysParams,
    VirialWeight,
    _ramp,
    kinetic,
    potential,
    recenter,
    variance,
    virial_rate,
)
from .spectral import (
    Field,
    GridSpec,
    dipolar_multiplier,
    fftn,
    ifftn,
    irfftn,
    rfftn,
    spectral_tail_fraction,
    two_thirds_mask,
    write_checkpoint,
)

CSV_COLUMNS = ("t", "M", "E", "H", "P", "G", "V", "Vdot", "L4norm4", "supu", "outmass")
COMPLETED = "completed"
BLOWUP = "blowup_detected"
RESOLUTION_LOST = "resolution_lost"


@dataclass(frozen=True)
class EvolveControls:
    """Integration and monitoring settings.

    ``outside_radius`` defaults to ``L/2``; ``monitor_radii`` lists extra
    radii for the smooth outside-mass monitor and ``localized_radii`` the
    ball-cutoff radii tracked for localized virial checks.
    """

    dt_init: float = 1e-3
    t_end: float = 1.0
    blowup_kinetic_factor: float = 100.0
    spectral_tail_cap: float = 1e-6
    sample_every: int = 10
    recenters: bool = False
    filter_two_thirds: bool = False
    adaptive: bool = False
    dt_min: float = 1e-7
    outside_radius: float | None = None
    monitor_radii: tuple = ()
    localized_radii: tuple = ()
    keep_fields: int = 4
    checkpoint_every: int = 0
    checkpoint_dir: str | None = None

    def __post_init__(self):
        for name in ("dt_init", "t_end", "blowup_kinetic_factor", "spectral_tail_cap", "dt_min"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0.0):
                raise ConfigurationError(f"{name} must be positive, got {v!r}")
        if int(self.sample_every) < 1 or int(self.sample_every) != self.sample_every:
            raise ConfigurationError("sample_every must be an integer >= 1")
        if self.keep_fields < 0 or self.checkpoint_every < 0:
            raise ConfigurationError("keep_fields and checkpoint_every must be >= 0")
        object.__setattr__(self, "monitor_radii", tuple(float(r) for r in self.monitor_radii))
        object.__setattr__(self, "localized_radii", tuple(float(r) for r in self.localized_radii))


@dataclass
class TrajectoryRecord:
    """Samples of one evolution. ``samples`` maps each CSV column to a list."""

    params: PhysParams
    grid: GridSpec
    controls: EvolveControls
    samples: dict = field(default_factory=lambda: {k: [] for k in CSV_COLUMNS})
    verdict: str = COMPLETED
    reason: str = ""
    l8l4_accumulator: float = 0.0
    l8l4_running: list = field(default_factory=list)
    steps: int = 0
    monitor: dict = field(default_factory=dict)
    localized: dict = field(default_factory=dict)
    recent_fields: list = field(default_factory=list)
    u_final: Field | None = None

    @property
    def times(self) -> list:
        return self.samples["t"]

    def series(self, name: str) -> np.ndarray:
        return np.asarray(self.samples[name], dtype=float)

    def initial(self) -> InvariantSet:
        s = self.samples
        return InvariantSet(M=s["M"][0], H=s["H"][0], P=s["P"][0], E=s["E"][0], G=s["G"][0])

    def final(self) -> InvariantSet:
        s = self.samples
        return InvariantSet(M=s["M"][-1], H=s["H"][-1], P=s["P"][-1], E=s["E"][-1], G=s["G"][-1])

    def drift(self, name: str) -> float:
        """Max relative deviation of a conserved series from its initial value."""
        v = self.series(name)
        return float(np.max(np.abs(v - v[0])) / abs(v[0]))


# ---------------------------------------------------------------- stepping


def _potential(rho: np.ndarray, p: PhysParams, grid: GridSpec) -> np.ndarray:
    if p.lambda2 == 0.0:
        return np.zeros_like(rho)
    return np.ascontiguousarray(irfftn(rfftn(rho) * dipolar_multiplier(grid).half, grid.n))


def _nonlinear_substep(v: np.ndarray, p: PhysParams, grid: GridSpec, dt: float) -> None:
    rho = np.empty(grid.shape)
    kernels.abs2(v, rho)
    phi = _potential(rho, p, grid)
    kernels.nonlinear_phase(v, phi, p.lambda1, p.lambda2, dt)


def _kinetic_multiplier(grid: GridSpec, tau: float, mask=None) -> np.ndarray:
    m = np.exp(-0.5j * tau * grid.xi2())
    if mask is not None:
        m = np.where(mask, m, 0.0)
    return np.ascontiguousarray(m)


def _kinetic(v: np.ndarray, mult: np.ndarray) -> np.ndarray:
    vh = fftn(v)
    kernels.mul_complex(vh, mult)
    return np.ascontiguousarray(ifftn(vh))


def strang_step(u: Field, p: PhysParams, dt: float) -> Field:
    """One Strang step: half kinetic, full nonlinear, half kinetic."""
    if not dt > 0.0:
        raise ConfigurationError("dt must be positive")
    grid = u.grid
    half = _kinetic_multiplier(grid, 0.5 * dt)
    v = _kinetic(np.array(u.to_physical().values), half)
    if not p.is_free:
        _nonlinear_substep(v, p, grid, dt)
    v = _kinetic(v, half)
    if not np.all(np.isfinite(v)):
        raise NumericalHealthError("non-finite values after split step")
    return Field(grid, v)


def free_propagate(u: Field, t: float) -> Field:
    """Exact linear flow ``exp(i t Lap / 2)`` for any real ``t``."""
    grid = u.grid
    return Field(grid, ifftn(np.exp(-0.5j * t * grid.xi2()) * fftn(u.to_physical().values)))


# ---------------------------------------------------------------- evolve


def _outside_weight(grid: GridSpec, R: float) -> np.ndarray:
    """Smooth weight: 0 on ``|x| <= R``, 1 on ``|x| >= 2R``."""
    r = np.sqrt(grid.radius2())
    return _ramp(r / R - 1.0)


def _sample(rec, v, vhat, t, p, grid, ctx):
    rho = v.real**2 + v.imag**2
    M = grid.integrate(rho)
    H = kinetic(v, grid, vhat)
    P = 0.0 if p.is_free else potential(rho, grid, p)
    l4 = grid.integrate(rho * rho)
    vv = recenter(v, grid) if rec.controls.recenters else v
    vvhat = vhat if vv is v else None
    V = variance(vv, grid=grid)
    Vd = virial_rate(vv, grid, vvhat)
    out = grid.integrate(ctx["out_mask"] * rho)
    row = {
        "t": t, "M": M, "E": 0.5 * (H + P), "H": H, "P": P, "G": H + 1.5 * P,
        "V": V, "Vdot": Vd, "L4norm4": l4, "supu": float(np.sqrt(np.max(rho))), "outmass": out,
    }
    for k in CSV_COLUMNS:
        rec.samples[k].append(float(row[k]))
    for R, w in ctx["monitors"]:
        rec.monitor[R].append(grid.integrate(w * rho))
    for R, w in ctx["localized"]:
        rec.localized[R].append(2.0 * grid.integrate(w * rho))
    # trapezoid rule for int ||u||_4^8 dt
    if len(rec.samples["t"]) > 1:
        t0, t1 = rec.samples["t"][-2], t
        a, b = rec.samples["L4norm4"][-2] ** 2, l4**2
        rec.l8l4_accumulator += 0.5 * (t1 - t0) * (a + b)
    rec.l8l4_running.append(rec.l8l4_accumulator)
    if rec.controls.keep_fields:
        rec.recent_fields.append((t, v.copy()))
        del rec.recent_fields[: -rec.controls.keep_fields]
    return row


def evolve(u0: Field, p: PhysParams, c: EvolveControls, *, tail_warn: float = 1e-8) -> TrajectoryRecord:
    """Integrate from ``u0`` to ``c.t_end`` or until a blow-up/health verdict.

    Blow-up is declared when ``H(u(t)) > blowup_kinetic_factor * H(u0)`` or
    when the fraction of spectral mass outside the 2/3 cube exceeds
    ``spectral_tail_cap``. Non-finite values end the run with
    ``resolution_lost``. Checks run at sample times.
    """
    grid = u0.grid
    v = np.array(u0.to_physical().values, dtype=np.complex128, order="C")
    vhat = fftn(v)
    if spectral_tail_fraction(vhat, grid) > c.spectral_tail_cap:
        raise ResolutionError("initial datum is not resolved: spectral tail above the cap")
    rho = np.abs(v) ** 2
    total = float(np.sum(rho))
    if total == 0.0:
        raise InputError("initial datum is identically zero")
    rec = TrajectoryRecord(params=p, grid=grid, controls=c)
    outside = (grid.radius2() >= (0.5 * grid.L) ** 2)
    if float(np.sum(np.where(outside, rho, 0.0))) > tail_warn * total:
        rec.reason = "warning: datum mass outside |x| < L/2 above tolerance; "
    R0 = c.outside_radius if c.outside_radius is not None else 0.5 * grid.L
    ctx = {
        "out_mask": np.where(grid.radius2() >= R0**2, 1.0, 0.0),
        "monitors": [(R, _outside_weight(grid, R)) for R in c.monitor_radii],
        "localized": [
            (R, np.broadcast_to(VirialWeight("ball_cutoff", R).values(grid), grid.shape))
            for R in c.localized_radii
        ],
    }
    rec.monitor = {R: [] for R in c.monitor_radii}
    rec.localized = {R: [] for R in c.localized_radii}
    mask = two_thirds_mask(grid) if c.filter_two_thirds else None
    _sample(rec, v, vhat, 0.0, p, grid, ctx)
    H0 = rec.samples["H"][0]
    ckpt_dir = Path(c.checkpoint_dir) if (c.checkpoint_every and c.checkpoint_dir) else None
    if ckpt_dir is not None:
        ckpt_dir.mkdir(parents=True, exist_ok=True)

    dt = c.dt_init
    nsteps_fixed = int(round(c.t_end / dt))
    if not c.adaptive and abs(nsteps_fixed * dt - c.t_end) > 1e-9 * c.t_end:
        raise ConfigurationError("t_end must be an integer multiple of dt_init for fixed steps")
    t = 0.0
    step = 0
    nsample = 0
    while True:
        if c.adaptive:
            remaining = c.t_end - t
            if remaining <= 1e-12 * c.t_end:
                break
            nseg = c.sample_every
            seg_dt = min(dt, remaining / nseg) if remaining < dt * nseg else dt
        else:
            if step >= nsteps_fixed:
                break
            nseg = min(c.sample_every, nsteps_fixed - step)
            seg_dt = dt
        half = _kinetic_multiplier(grid, 0.5 * seg_dt, mask)
        full = _kinetic_multiplier(grid, seg_dt, mask)
        v = _kinetic(v, half)
        for k in range(nseg):
            if not p.is_free:
                _nonlinear_substep(v, p, grid, seg_dt)
            if k < nseg - 1:
                v = _kinetic(v, full)
        vhat = fftn(v)
        kernels.mul_complex(vhat, half)
        v = np.ascontiguousarray(ifftn(vhat))
        step += nseg
        t = step * dt if not c.adaptive else t + nseg * seg_dt
        rec.steps = step
        if not np.all(np.isfinite(v)):
            rec.verdict = RESOLUTION_LOST
            rec.reason += f"non-finite values at t = {t:.6g}"
            break
        vhat = fftn(v)
        _sample(rec, v, vhat, t, p, grid, ctx)
        nsample += 1
        if ckpt_dir is not None and nsample % c.checkpoint_every == 0:
            write_checkpoint(ckpt_dir / f"ckpt_{nsample:06d}.dgpe", Field(grid, v), t)
        H = rec.samples["H"][-1]
        tail = spectral_tail_fraction(vhat, grid)
        if H > c.blowup_kinetic_factor * H0:
            rec.verdict = BLOWUP
            rec.reason += f"kinetic energy exceeded {c.blowup_kinetic_factor:g} H(u0) at t = {t:.6g}"
            break
        if tail > c.spectral_tail_cap:
            rec.verdict = BLOWUP
            rec.reason += f"spectral tail {tail:.3e} exceeded cap at t = {t:.6g}"
            break
        if c.adaptive:
            dt = max(c.dt_min, c.dt_init * min(1.0, H0 / H))
    rec.u_final = Field(grid, np.nan_to_num(v)) if rec.verdict == RESOLUTION_LOST else Field(grid, v)
    return rec


# ---------------------------------------------------------------- diagnostics


def _uniform_spacing(times: np.ndarray) -> float:
    d = np.diff(times)
    if d.size == 0 or np.max(np.abs(d - d[0])) > 1e-9 * d[0]:
        raise InputError("virial check needs uniformly spaced samples")
    return float(d[0])


def virial_consistency(rec: TrajectoryRecord) -> dict:
    """Compare the second time difference of the variance with ``G``.

    With ``V = int |x|^2 |u|^2`` the identity reads ``V'' = 2 G``; the
    report gives ``max |V''/2 - G| / |G|`` over interior samples. Localized
    radii tracked in the record report their residual ``V_R''/4 - G`` where
    ``V_R = 2 int chi_R |u|^2``.
    """
    return virial_consistency_series(rec.series("t"), rec.series("V"), rec.series("G"), rec.localized)


def virial_consistency_series(times, V, G, localized: dict | None = None) -> dict:
    """Series form of :func:`virial_consistency`, e.g. for a time-series CSV."""
    times = np.asarray(times, dtype=float)
    if times.size < 5:
        raise InputError("virial check needs at least 5 samples")
    dt = _uniform_spacing(times)
    V = np.asarray(V, dtype=float)
    G = np.asarray(G, dtype=float)
    Vpp = (V[2:] - 2.0 * V[1:-1] + V[:-2]) / dt**2
    Gi = G[1:-1]
    floor = 1e-12 * max(np.max(np.abs(G)), 1e-300)
    dev = np.abs(0.5 * Vpp - Gi) / np.maximum(np.abs(Gi), floor)
    report = {
        "samples": int(times.size),
        "spacing": dt,
        "max_rel_deviation": float(np.max(dev)),
        "mean_rel_deviation": float(np.mean(dev)),
        "localized": {},
    }
    for R, series in sorted((localized or {}).items()):
        VR = np.asarray(series)
        VRpp = (VR[2:] - 2.0 * VR[1:-1] + VR[:-2]) / dt**2
        eps = 0.25 * VRpp - Gi
        report["localized"][float(R)] = {
            "max_abs_residual": float(np.max(np.abs(eps))),
            "max_rel_residual": float(np.max(np.abs(eps) / np.maximum(np.abs(Gi), floor))),
        }
    radii = sorted(report["localized"])
    res = [report["localized"][R]["max_abs_residual"] for R in radii]
    report["localized_shrinks"] = bool(all(b <= a * (1 + 1e-9) for a, b in zip(res, res[1:])))
    return report


def h1_norm(values: np.ndarray, grid: GridSpec) -> float:
    vh = fftn(values)
    w = 1.0 + grid.xi2()
    return float(np.sqrt(np.sum(w * (vh.real**2 + vh.imag**2)) * grid.cell / grid.n**3))


def scattering_diagnostic(rec: TrajectoryRecord, u_final: Field | None = None) -> dict:
    """Finite-horizon scattering proxy.

    Reports the trapezoid accumulator of ``int ||u||_4^8 dt``, its
    saturation (share of the total already reached at 3/4 of the horizon)
    and the drifts of the backward-free-propagated profile
    ``exp(-i t Lap / 2) u(t)`` in ``H^1`` between consecutive retained samples.
    Decreasing drifts together with a saturated accumulator indicate
    scattering-like behavior; this is a heuristic, never a certificate.
    """
    times = rec.series("t")
    run = np.asarray(rec.l8l4_running)
    total = float(run[-1]) if run.size else 0.0
    if total > 0.0:
        t_q = times[0] + 0.75 * (times[-1] - times[0])
        at_q = float(np.interp(t_q, times, run))
        saturation = at_q / total
    else:
        saturation = 1.0
    grid = rec.grid
    fields = list(rec.recent_fields)
    if u_final is not None and (not fields or fields[-1][0] != times[-1]):
        fields.append((float(times[-1]), np.asarray(u_final.to_physical().values)))
    profiles = []
    for t, vals in fields:
        profiles.append(np.exp(0.5j * t * grid.xi2()) * fftn(vals))
    drifts = []
    norm0 = h1_norm(fields[-1][1], grid) if fields else 1.0
    for a, b in zip(profiles, profiles[1:]):
        d = b - a
        drifts.append(float(np.sqrt(np.sum((1.0 + grid.xi2()) * np.abs(d) ** 2) * grid.cell / grid.n**3)))
    decreasing = len(drifts) >= 2 and all(
        d1 < d0 * (1.0 - 1e-6) for d0, d1 in zip(drifts, drifts[1:])
    )
    return {
        "l8l4_accumulator": rec.l8l4_accumulator,
        "saturation": float(saturation),
        "drifts": drifts,
        "relative_drifts": [d / norm0 for d in drifts] if norm0 > 0 else drifts,
        "drift_decreasing": bool(decreasing),
        "scattering_proxy": bool(decreasing and saturation >= 0.9),
        "verdict": rec.verdict,
    }


def growup_monitor(rec: TrajectoryRecord) -> dict:
    """Fit ``C`` in ``out_R(t) <= out_R(0) + C t / R`` for each monitored radius.

    ``out_R`` uses the smooth weight vanishing on ``|x| <= R`` and equal to 1
    on ``|x| >= 2R``. Also returns the a priori constant
    ``sup|theta'| sqrt(M sup_t H)`` which bounds every fitted ``C``.
    """
    times = rec.series("t")
    M = rec.series("M")[0]
    Hmax = float(np.max(rec.series("H")))
    s = np.linspace(0.0, 1.0, 20001)[1:-1]
    slope = float(np.max(np.gradient(_ramp(s), s)))
    bound = slope * math.sqrt(M * Hmax)
    fits = {}
    for R, series in sorted(rec.monitor.items()):
        out = np.asarray(series)
        mask = times > 0
        C = float(np.max((out[mask] - out[0]) * R / times[mask])) if mask.any() else 0.0
        fits[float(R)] = {"C": max(C, 0.0), "out0": float(out[0]), "out_final": float(out[-1])}
    radii = sorted(fits)
    ratios = [fits[b]["C"] / fits[a]["C"] if fits[a]["C"] > 0 else float("nan")
              for a, b in zip(radii, radii[1:])]
    return {"fits": fits, "bound_C": bound, "doubling_ratios": ratios,
            "within_bound": bool(all(f["C"] <= bound * (1 + 1e-9) for f in fits.values()))}


# ---------------------------------------------------------------- output


def _fmt(x) -> str:
    return repr(float(x))


def write_timeseries_csv(rec: TrajectoryRecord, path) -> Path:
    """Fixed columns, then ``VR_<R>`` (localized variances) and ``out_<R>`` (monitors)."""
    path = Path(path)
    extra = [(f"VR_{R!r}", rec.localized[R]) for R in sorted(rec.localized)]
    extra += [(f"out_{R!r}", rec.monitor[R]) for R in sorted(rec.monitor)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(CSV_COLUMNS) + [name for name, _ in extra])
        for i in range(len(rec.samples["t"])):
            w.writerow([_fmt(rec.samples[k][i]) for k in CSV_COLUMNS] + [_fmt(v[i]) for _, v in extra])
    return path


def read_timeseries_csv(path) -> dict:
    """Columns of a time-series CSV as float arrays."""
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"time series not found: {path}")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0][: len(CSV_COLUMNS)]) != CSV_COLUMNS:
        raise InputError(f"{path}: unexpected header")
    header = rows[0]
    try:
        data = np.array([[float(x) for x in r] for r in rows[1:]], dtype=float)
    except ValueError as err:
        raise InputError(f"{path}: {err}") from None
    if data.size == 0:
        data = data.reshape(0, len(header))
    return {k: data[:, i] for i, k in enumerate(header)}


def record_summary(rec: TrajectoryRecord) -> dict:
    return {
        "verdict": rec.verdict,
        "reason": rec.reason,
        "steps": rec.steps,
        "t_final": rec.samples["t"][-1],
        "params": asdict(rec.params),
        "grid": {"n": rec.grid.n, "L": rec.grid.L},
        "initial": rec.initial().as_dict(),
        "final": rec.final().as_dict(),
        "mass_drift": rec.drift("M"),
        "energy_drift": rec.drift("E"),
        "min_G": float(np.min(rec.series("G"))),
        "max_P": float(np.max(rec.series("P"))),
        "l8l4_accumulator": rec.l8l4_accumulator,
    }


def write_json(data: dict, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(data, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o).__name__}")
