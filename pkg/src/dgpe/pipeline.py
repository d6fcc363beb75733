"""End-to-end scenario runs, the Riesz verification suite and phase tables.

Every run writes into its own directory. A ``.partial`` marker is created
first and removed only after the summary is written, so interrupted or
failed runs are recognizable.
"""

from __future__ import annotations

import configparser
import csv
import math
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import riesz
from .classifier import ThresholdVerdict, classify
from .config import OUTPUT_ENV, ScenarioConfig, build_datum, load_config
from .dynamics import (
    BLOWUP,
    COMPLETED,
    EvolveControls,
    evolve,
    growup_monitor,
    record_summary,
    scattering_diagnostic,
    virial_consistency,
    write_json,
    write_timeseries_csv,
)
from .errors import ConfigurationError, DGPEError, SuiteFailure
from .functionals import PhysParams
from .ground_state import (
    GroundState,
    load_ground_state,
    save_ground_state,
    solve_ground_state,
)
from .regimes import classify_regime
from .spectral import Field, make_grid, write_checkpoint

PARTIAL = ".partial"


@dataclass
class RunSummary:
    name: str
    regime: str
    verdict: dict | None
    trajectory: dict | None
    concordant: bool | None
    manifest: list = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------- concordance


def concordance(cls: str, rec_verdict: str, checks: dict) -> bool | None:
    """Whether an observed trajectory agrees with the predicted behavior.

    ==========  ===========================================================
    SC, SC'     run completed
    BC, BC'     blow-up detected
    AT_i        run completed and ``H M < hm`` at every sample
    AT_ii       run completed and ``|| |u(t)| - |u0| ||_2 / ||u0||_2`` within tolerance
    AT_iii      ``H M > hm`` at every sample (blow-up detected or not)
    other       not applicable (``None``)
    ==========  ===========================================================
    """
    if cls in ("SC", "SC_prime"):
        return rec_verdict == COMPLETED
    if cls in ("BC", "BC_prime"):
        return rec_verdict == BLOWUP
    if cls == "AT_i":
        return rec_verdict == COMPLETED and bool(checks.get("hm_below_all"))
    if cls == "AT_ii":
        return rec_verdict == COMPLETED and bool(checks.get("standing_wave_ok"))
    if cls == "AT_iii":
        return bool(checks.get("hm_above_all"))
    return None


# ---------------------------------------------------------------- scenario


def _ground_state(cfg: ScenarioConfig) -> GroundState:
    s = cfg.ground_state
    if s.mu is None and s.target_mass is None:
        raise ConfigurationError("[ground_state] needs mu or target_mass")
    cache = None
    if s.cache_dir:
        tag = f"mass_{s.target_mass!r}" if s.target_mass is not None else f"mu_{s.mu!r}"
        cache = Path(s.cache_dir) / tag
        hit = load_ground_state(cache, cfg.params, cfg.grid, target_mass=s.target_mass)
        if hit is not None:
            return hit
    q = solve_ground_state(cfg.params, s.target_mass, cfg.grid, tol=s.tol, max_iter=s.max_iter,
                           restarts=s.restarts, mu_guess=s.mu if s.mu is not None else 0.5)
    if cache is not None:
        save_ground_state(q, cache)
    return q


def _gs_report(q: GroundState) -> dict:
    tq = q.threshold()
    return {
        "mu": q.mu, "residual": q.residual, "iterations": q.iterations,
        "invariants": q.invariants.as_dict(), "C_GN": q.cgn,
        "em": tq.em, "hm": tq.hm, "pm": tq.pm, "chain": list(tq.chain()),
        "restart_em": list(q.restart_em), "grid": {"n": q.grid.n, "L": q.grid.L},
    }


def run_scenario(cfg: ScenarioConfig) -> RunSummary:
    """Ground state, classification, evolution and report for one scenario.

    Files written to ``cfg.output_dir``: ``ground_state.json`` and
    ``ground_state.dgpe`` (when a ground state is needed), ``verdict.json``,
    ``timeseries.csv``, ``trajectory.json``, ``final.dgpe`` and
    ``summary.json``. Errors propagate after leaving the ``.partial`` marker.
    """
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    marker = out / PARTIAL
    marker.write_text("incomplete run\n")
    manifest: list = []
    reg = classify_regime(cfg.params)
    notes: dict = {"pipeline": cfg.pipeline, "seed": cfg.seed}

    q = None
    needs_gs = cfg.datum.recipe == "scaled_ground_state" or (
        reg.unstable and cfg.pipeline in ("full", "classify_only", "ground_state_only"))
    if needs_gs:
        q = _ground_state(cfg)
        write_json(_gs_report(q), out / "ground_state.json")
        write_checkpoint(out / "ground_state.dgpe", q.profile)
        manifest += ["ground_state.json", "ground_state.dgpe"]
    if cfg.pipeline == "ground_state_only":
        return _finish(cfg, out, marker, manifest, str(reg), None, None, None, notes)

    tq = q.threshold() if q is not None else None
    u0, info = build_datum(cfg.datum, cfg.grid, cfg.params, q, tq.em if tq else None, seed=cfg.seed)
    notes["datum"] = info

    verdict: ThresholdVerdict | None = None
    if reg.unstable and tq is not None and cfg.pipeline in ("full", "classify_only"):
        c = cfg.classifier
        verdict = classify(u0, cfg.params, tq, tol_at=c.tol_at, rtol=c.rtol)
        write_json(verdict.to_json(), out / "verdict.json")
        manifest.append("verdict.json")
    elif not reg.unstable:
        notes["classifier"] = "skipped: stable regime"
    if cfg.pipeline == "classify_only":
        return _finish(cfg, out, marker, manifest, str(reg),
                       verdict.to_json() if verdict else None, None, None, notes)

    rec = evolve(u0, cfg.params, cfg.evolve)
    write_timeseries_csv(rec, out / "timeseries.csv")
    write_checkpoint(out / "final.dgpe", rec.u_final, float(rec.times[-1]))
    manifest += ["timeseries.csv", "final.dgpe"]
    traj = record_summary(rec)
    if len(rec.times) >= 5:
        try:
            traj["virial"] = virial_consistency(rec)
        except DGPEError as err:
            traj["virial"] = {"error": str(err)}
    traj["scattering"] = scattering_diagnostic(rec)
    if rec.monitor:
        traj["growup"] = growup_monitor(rec)
    checks: dict = {}
    if tq is not None:
        HM = rec.series("H") * rec.series("M")
        checks["hm_below_all"] = bool(np.all(HM < tq.hm))
        checks["hm_above_all"] = bool(np.all(HM > tq.hm))
    a0 = np.abs(u0.values)
    dev = float(np.sqrt(np.sum((np.abs(rec.u_final.values) - a0) ** 2) / np.sum(a0 * a0)))
    checks["profile_deviation"] = dev
    checks["standing_wave_ok"] = bool(dev <= cfg.classifier.standing_wave_tol)
    checks["P_negative_all"] = bool(np.all(rec.series("P") < 0.0))
    traj["checks"] = checks
    write_json(traj, out / "trajectory.json")
    manifest.append("trajectory.json")
    conc = concordance(verdict.cls, rec.verdict, checks) if verdict is not None else None
    return _finish(cfg, out, marker, manifest, str(reg),
                   verdict.to_json() if verdict else None, traj, conc, notes)


def _finish(cfg, out, marker, manifest, regime, verdict, traj, conc, notes) -> RunSummary:
    summary = RunSummary(
        name=cfg.name, regime=regime, verdict=verdict,
        trajectory=None if traj is None else {
            "verdict": traj["verdict"], "reason": traj["reason"], "t_final": traj["t_final"],
            "mass_drift": traj["mass_drift"], "energy_drift": traj["energy_drift"],
            "min_G": traj["min_G"], "max_P": traj["max_P"],
        },
        concordant=conc, manifest=sorted(manifest + ["summary.json"]), notes=notes,
    )
    write_json(summary.to_json(), out / "summary.json")
    marker.unlink()
    return summary


def run_scenario_file(path) -> RunSummary:
    return run_scenario(load_config(path))


# ---------------------------------------------------------------- riesz suite


def _floats(raw: str) -> list:
    try:
        return [float(v) for v in raw.replace(",", " ").split()]
    except ValueError:
        raise ConfigurationError(f"expected a list of numbers, got {raw!r}") from None


@dataclass(frozen=True)
class RieszSuiteConfig:
    n: int = 128
    L: float = 64.0
    slack: float = 1.3
    kinds: tuple = ("r4", "r2r2")
    radii: tuple = (2.0, 4.0, 8.0, 16.0)
    gamma1: float = 1.0
    gamma2: float = 2.0
    zero_degree_distances: tuple = (4.0, 8.0, 16.0, 32.0)
    pointwise_radii: tuple = (4.0, 8.0)
    faa_points: int = 20
    faa_c: float = 1.0
    seed: int = 0
    output_dir: str = "dgpe_output/riesz"


def load_riesz_config(path) -> RieszSuiteConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read(path)
    except configparser.Error as err:
        raise ConfigurationError(f"cannot parse {path}: {err}") from None
    raw = dict(cp.items("suite")) if cp.has_section("suite") else {}
    kw: dict = {}
    defaults = RieszSuiteConfig()
    for key, val in raw.items():
        name = "L" if key == "l" else key
        if not hasattr(defaults, name):
            raise ConfigurationError(f"[suite] unknown key {key!r}")
        d = getattr(defaults, name)
        if isinstance(d, tuple):
            kw[name] = tuple(val.split()) if name == "kinds" else tuple(_floats(val))
        elif isinstance(d, int):
            kw[name] = int(float(val))
        elif isinstance(d, float):
            kw[name] = float(val)
        else:
            kw[name] = val.strip()
    env = os.environ.get(OUTPUT_ENV)
    if cp.has_section("output") and cp.has_option("output", "dir"):
        kw["output_dir"] = cp.get("output", "dir")
    if env:
        kw["output_dir"] = str(Path(env) / "riesz")
    return RieszSuiteConfig(**kw)


def _assert(rows: list, name: str, value: float, tol: float, kind: str = "le") -> None:
    ok = bool(np.isfinite(value) and (value <= tol if kind == "le" else value >= tol))
    rows.append({"name": name, "value": float(value), "tolerance": float(tol), "passed": ok})


def run_riesz_suite(cfg) -> dict:
    """Run every Riesz-lab check, write CSV/JSON artifacts and fail loudly.

    Raises
    ------
    ConfigurationError
        Radii that do not fit in the box, unknown kinds.
    SuiteFailure
        Any bounded-ratio or identity assertion failed; the message names
        the failing assertions. Artifacts are written first.
    """
    if not isinstance(cfg, RieszSuiteConfig):
        cfg = load_riesz_config(cfg)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    marker = out / PARTIAL
    marker.write_text("incomplete run\n")
    grid = make_grid(cfg.n, cfg.L)
    checks: list = []
    files: list = []
    for kind in cfg.kinds:
        if kind not in ("r4", "r2r2"):
            raise ConfigurationError(f"unknown cylinder sweep kind {kind!r}")
        rep = riesz.decay_sweep_pairing(kind, cfg.gamma1, cfg.gamma2, cfg.radii, grid=grid, slack=cfg.slack)
        rep.write_csv(out / f"sweep_{kind}.csv")
        files.append(f"sweep_{kind}.csv")
        _assert(checks, f"sweep_{kind}_ratio_growth", rep.max_growth, cfg.slack)
    if cfg.zero_degree_distances:
        rep = riesz.decay_sweep_pairing("zero_degree", 1.0, 1.0, cfg.zero_degree_distances,
                                        grid=grid, slack=cfg.slack)
        rep.write_csv(out / "sweep_zero_degree.csv")
        files.append("sweep_zero_degree.csv")
        _assert(checks, "sweep_zero_degree_ratio_growth", rep.max_growth, cfg.slack)
    pointwise = {}
    for direction, (g1, g2) in (("in_out", (1.0, 2.0)), ("out_in", (2.0, 1.0))):
        ratios = []
        for R in cfg.pointwise_radii:
            if direction == "in_out":
                f = riesz.gaussian_ring(grid, 2.5 * R, 0.2 * R, 0.5 * R)
            else:
                f = riesz.gaussian_core(grid, 0.3 * R, 0.5 * R)
            ratios.append(riesz.pointwise_cutoff_check(f, g1, g2, R, direction))
        pointwise[direction] = ratios
        r = [x["ratio"] for x in ratios]
        _assert(checks, f"pointwise_{direction}_ratio_growth", max(v / r[0] for v in r), cfg.slack)

    k0 = riesz.biharmonic_kernel(0.0)
    _assert(checks, "kernel_at_zero", abs(k0 - riesz.kernel_at_zero()), 1e-10)
    two = riesz.kernel_two_path_check()
    _assert(checks, "kernel_two_path", two["max_rel_error"], 1e-5)
    small = make_grid(32, 8.0)
    x1, x2, x3 = small.coords()
    f = riesz.project_zero_mode(Field(small, np.broadcast_to(np.exp(-(x1**2 + x2**2 + x3**2) / 2), small.shape)))
    g = Field(small, np.broadcast_to(np.exp(-((x1 - 1) ** 2 + x2**2 + (x3 - 0.5) ** 2) / 3), small.shape))
    r4 = riesz.r4_representation_check(f, g, t_max=2000.0, n_quad=2000)
    _assert(checks, "r4_scalar", r4["scalar_max_abs_error"], 1e-10)
    _assert(checks, "r4_operator", r4["operator_rel_error"], 1e-6)
    rng = np.random.default_rng(cfg.seed)
    pts = []
    while len(pts) < cfg.faa_points:
        x = rng.uniform(-4.0, 4.0, size=3)
        if np.linalg.norm(x) >= 0.5:
            pts.append(x)
    faa = riesz.faa_di_bruno_check(cfg.faa_c, pts)
    _assert(checks, "faa_di_bruno_fd", faa["max_rel_error"], 1e-6)
    _assert(checks, "faa_di_bruno_bound", 0.0 if all(r["bound_ok"] for r in faa["rows"]) else 1.0, 0.0)
    sym = riesz.dipolar_symbol_identities(seed=cfg.seed)
    _assert(checks, "symbol_radial_derivative", sym["radial_derivative_max"], 1e-10)
    _assert(checks, "symbol_xi3_identity", sym["xi3_identity_max"], 1e-12)
    _assert(checks, "symbol_pairing_identity", sym["pairing_identity"]["rel_residual"], 1e-4)

    ident = {
        "kernel": {"k0": k0, "closed_form": riesz.kernel_at_zero(), "two_path": two},
        "r4": {k: (abs(v) if isinstance(v, complex) else v) for k, v in r4.items()},
        "faa_di_bruno": faa, "symbols": sym, "pointwise": pointwise,
    }
    write_json(ident, out / "identities.json")
    files.append("identities.json")
    summary = {"grid": {"n": cfg.n, "L": cfg.L}, "slack": cfg.slack, "assertions": checks,
               "passed": all(c["passed"] for c in checks), "files": sorted(files + ["summary.json"])}
    write_json(summary, out / "summary.json")
    marker.unlink()
    failed = [c["name"] for c in checks if not c["passed"]]
    if failed:
        raise SuiteFailure("failing assertions: " + ", ".join(failed))
    return summary


# ---------------------------------------------------------------- phase table

PHASE_COLUMNS = ("lambda1", "lambda2", "amplitude", "regime", "verdict", "trajectory",
                 "EM_over_em", "HM_over_hm", "error")


@dataclass(frozen=True)
class PhaseTableConfig:
    lambda1: tuple = ()
    lambda2: tuple = ()
    amplitudes: tuple = (1.0,)
    n: int = 32
    L: float = 8.0
    mu: float = 0.5
    tol: float = 1e-9
    max_iter: int = 3000
    restarts: int = 1
    evolve: bool = False
    dt: float = 1e-2
    t_end: float = 1.0
    output: str = "dgpe_output/phase_table.csv"


def load_phase_config(path) -> PhaseTableConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read(path)
    except configparser.Error as err:
        raise ConfigurationError(f"cannot parse {path}: {err}") from None
    raw = dict(cp.items("phase_table")) if cp.has_section("phase_table") else {}
    d = PhaseTableConfig()
    kw: dict = {}
    for key, val in raw.items():
        name = "L" if key == "l" else key
        if not hasattr(d, name):
            raise ConfigurationError(f"[phase_table] unknown key {key!r}")
        ref = getattr(d, name)
        if isinstance(ref, tuple):
            kw[name] = tuple(_floats(val))
        elif isinstance(ref, bool):
            kw[name] = val.strip().lower() in ("1", "true", "yes", "on")
        elif isinstance(ref, int):
            kw[name] = int(float(val))
        elif isinstance(ref, float):
            kw[name] = float(val)
        else:
            kw[name] = val.strip()
    return PhaseTableConfig(**kw)


def emit_phase_table(cfg) -> list:
    """One row per ``(lambda1, lambda2, amplitude)``, in that nesting order.

    Each cell classifies ``A Q`` against its own ground state. Cell failures
    are recorded in the ``error`` column and the sweep continues.
    """
    if not isinstance(cfg, PhaseTableConfig):
        cfg = load_phase_config(cfg)
    grid = make_grid(cfg.n, cfg.L)
    rows = []
    for l1 in cfg.lambda1:
        for l2 in cfg.lambda2:
            reg, q, err = None, None, ""
            try:
                p = PhysParams(l1, l2)
                reg = classify_regime(p)
                if reg.unstable:
                    q = solve_ground_state(p, None, grid, tol=cfg.tol, max_iter=cfg.max_iter,
                                           restarts=cfg.restarts, mu_guess=cfg.mu)
            except DGPEError as e:
                q, err = None, f"{type(e).__name__}: {e}"
            for A in cfg.amplitudes:
                row = {"lambda1": l1, "lambda2": l2, "amplitude": A,
                       "regime": str(reg) if reg else "", "verdict": "", "trajectory": "not_run",
                       "EM_over_em": math.nan, "HM_over_hm": math.nan, "error": err}
                if reg is not None and not err:
                    try:
                        if q is not None:
                            tq = q.threshold()
                            u0 = q.profile * A
                            v = classify(u0, p, tq)
                            row.update(verdict=v.cls, EM_over_em=v.witnesses["EM"] / tq.em,
                                       HM_over_hm=v.witnesses["HM"] / tq.hm)
                        else:
                            row["verdict"] = "unclassified"
                            x2 = grid.radius2()
                            u0 = Field(grid, A * np.exp(-x2 / 2.0))
                        if cfg.evolve:
                            rec = evolve(u0, p, EvolveControls(dt_init=cfg.dt, t_end=cfg.t_end))
                            row["trajectory"] = rec.verdict
                    except DGPEError as e:
                        row["error"] = f"{type(e).__name__}: {e}"
                rows.append(row)
    path = Path(cfg.output)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PHASE_COLUMNS)
        for r in rows:
            w.writerow([repr(float(r[k])) if isinstance(r[k], float) else r[k] for k in PHASE_COLUMNS])
    return rows


__all__ = [
    "PhaseTableConfig",
    "RieszSuiteConfig",
    "RunSummary",
    "concordance",
    "emit_phase_table",
    "load_phase_config",
    "load_riesz_config",
    "run_riesz_suite",
    "run_scenario",
    "run_scenario_file",
]
