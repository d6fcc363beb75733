"""Scenario configuration files and initial-datum recipes.

A scenario is an INI file with the sections ``[scenario]``, ``[params]``,
``[grid]``, ``[ground_state]``, ``[datum]``, ``[evolve]``, ``[classifier]``
and ``[output]``. Only ``[params]`` and ``[grid]`` are mandatory. The output
directory may be overridden with the ``DGPE_OUTPUT_DIR`` environment
variable; no other setting is read from the environment.
"""

from __future__ import annotations

import configparser
import math
import os
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from .dynamics import EvolveControls
from .errors import ConfigurationError, InputError
from .functionals import PhysParams, invariants, radial_profile
from .ground_state import GroundState, rescale_ground_state
from .spectral import Field, GridSpec, fftn, ifftn, make_grid, read_checkpoint, resample

OUTPUT_ENV = "DGPE_OUTPUT_DIR"
RECIPES = ("scaled_ground_state", "gaussian", "from_checkpoint")
PIPELINES = ("full", "evolve_only", "classify_only", "ground_state_only")


@dataclass(frozen=True)
class GroundStateSettings:
    """``mu`` fixes the chemical potential; otherwise ``target_mass`` is matched."""

    mu: float | None = 0.045
    target_mass: float | None = None
    tol: float = 1e-10
    max_iter: int = 4000
    restarts: int = 3
    cache_dir: str | None = None


@dataclass(frozen=True)
class DatumRecipe:
    """Initial-datum construction.

    ``scaled_ground_state``: ``A Q(x1, x2, x3 / anisotropy) exp(i b phi)``
    where ``phi`` equals ``|x|^2 / 2`` inside ``|x| <= L/2`` and is cut off
    smoothly to zero before the box edge. ``em_ratio`` (if set) replaces
    ``b`` by the value of sign ``phase_sign`` giving ``E M = em_ratio * em``.
    ``evolve_mu`` rescales the ground state exactly (grid included) before
    the datum is built.

    ``gaussian``: ``A exp(-|x|^2 / (2 sigma^2)) exp(i phase phi)``.

    ``from_checkpoint``: the field stored at ``path``.

    ``perturbation`` adds a smooth random field of that L2 norm, drawn from
    the scenario seed.
    """

    recipe: str = "scaled_ground_state"
    amplitude: float = 1.0
    quadratic_phase_b: float = 0.0
    em_ratio: float | None = None
    phase_sign: float = 1.0
    anisotropy: float = 1.0
    evolve_mu: float | None = None
    sigma: float = 1.0
    phase: float = 0.0
    path: str | None = None
    perturbation: float = 0.0

    def __post_init__(self):
        if self.recipe not in RECIPES:
            raise ConfigurationError(f"unknown datum recipe {self.recipe!r}; expected one of {RECIPES}")
        if not (np.isfinite(self.amplitude) and 0.0 < self.amplitude <= 10.0):
            raise ConfigurationError("amplitude must lie in (0, 10]")
        if not (0.25 <= self.anisotropy <= 4.0):
            raise ConfigurationError("anisotropy must lie in [0.25, 4]")
        if self.em_ratio is not None and not self.em_ratio > 0.0:
            raise ConfigurationError("em_ratio must be positive")
        if self.phase_sign not in (1.0, -1.0):
            raise ConfigurationError("phase_sign must be +1 or -1")
        if self.evolve_mu is not None and not self.evolve_mu > 0.0:
            raise ConfigurationError("evolve_mu must be positive")
        if not self.sigma > 0.0:
            raise ConfigurationError("sigma must be positive")
        if not (0.0 <= self.perturbation <= 1.0):
            raise ConfigurationError("perturbation must lie in [0, 1]")
        if self.recipe == "from_checkpoint" and not self.path:
            raise ConfigurationError("from_checkpoint needs a path")


@dataclass(frozen=True)
class ClassifierSettings:
    tol_at: float = 1e-6
    rtol: float = 1e-6
    standing_wave_tol: float = 1e-4


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    params: PhysParams
    grid: GridSpec
    datum: DatumRecipe = field(default_factory=DatumRecipe)
    ground_state: GroundStateSettings = field(default_factory=GroundStateSettings)
    evolve: EvolveControls = field(default_factory=EvolveControls)
    classifier: ClassifierSettings = field(default_factory=ClassifierSettings)
    output_dir: str = "dgpe_output"
    seed: int = 0
    pipeline: str = "full"
    source: str | None = None


# ---------------------------------------------------------------- parsing


def _num(raw: str, key: str):
    s = raw.strip()
    if s.lower() in ("none", ""):
        return None
    try:
        return float(s)
    except ValueError:
        raise ConfigurationError(f"{key}: expected a number, got {raw!r}") from None


def _bool(raw: str, key: str) -> bool:
    s = raw.strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ConfigurationError(f"{key}: expected a boolean, got {raw!r}")


def _tuple(raw: str, key: str) -> tuple:
    parts = [p for p in raw.replace(",", " ").split() if p]
    return tuple(_num(p, key) for p in parts)


def _coerce(section: str, cls, items: dict) -> dict:
    """Convert raw strings to the dataclass field types of ``cls``."""
    known = {f.name: f for f in fields(cls)}
    out = {}
    for key, raw in items.items():
        if key not in known:
            raise ConfigurationError(f"[{section}] unknown key {key!r}")
        default = known[key].default
        label = f"[{section}] {key}"
        if isinstance(default, bool):
            out[key] = _bool(raw, label)
        elif isinstance(default, tuple):
            out[key] = _tuple(raw, label)
        elif isinstance(default, int):
            v = _num(raw, label)
            if v is None or v != int(v):
                raise ConfigurationError(f"{label}: expected an integer, got {raw!r}")
            out[key] = int(v)
        elif isinstance(default, float) or (default is None and key not in ("path", "cache_dir", "checkpoint_dir")):
            out[key] = _num(raw, label)
        else:
            v = raw.strip()
            out[key] = None if v.lower() == "none" else v
    return out


def _section(cp: configparser.ConfigParser, name: str) -> dict:
    return dict(cp.items(name)) if cp.has_section(name) else {}


def load_config(path) -> ScenarioConfig:
    """Parse a scenario file.

    Raises
    ------
    ConfigurationError
        Missing file, syntax error, unknown key, bad value or a referenced
        checkpoint that does not exist.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read(path)
    except configparser.Error as err:
        raise ConfigurationError(f"cannot parse {path}: {err}") from None
    for req in ("params", "grid"):
        if not cp.has_section(req):
            raise ConfigurationError(f"{path}: missing section [{req}]")
    known = {"scenario", "params", "grid", "ground_state", "datum", "evolve", "classifier", "output"}
    extra = set(cp.sections()) - known
    if extra:
        raise ConfigurationError(f"{path}: unknown sections {sorted(extra)}")
    try:
        pr = _section(cp, "params")
        p = PhysParams(float(pr["lambda1"]), float(pr["lambda2"]))
        gr = _section(cp, "grid")
        grid = make_grid(int(gr["n"]), float(gr["l"]))
    except KeyError as err:
        raise ConfigurationError(f"{path}: missing key {err}") from None
    except ValueError as err:
        raise ConfigurationError(f"{path}: {err}") from None

    sc = _section(cp, "scenario")
    datum_items = _coerce("datum", DatumRecipe, _section(cp, "datum"))
    if datum_items.get("path"):
        ck = Path(datum_items["path"])
        if not ck.is_absolute():
            ck = path.parent / ck
        if not ck.is_file():
            raise ConfigurationError(f"checkpoint not found: {ck}")
        datum_items["path"] = str(ck)
    datum = DatumRecipe(**datum_items)
    gs_items = _coerce("ground_state", GroundStateSettings, _section(cp, "ground_state"))
    gs = GroundStateSettings(**gs_items)
    ev_raw = _section(cp, "evolve")
    if "dt" in ev_raw:
        ev_raw["dt_init"] = ev_raw.pop("dt")
    evolve = EvolveControls(**_coerce("evolve", EvolveControls, ev_raw))
    clf = ClassifierSettings(**_coerce("classifier", ClassifierSettings, _section(cp, "classifier")))
    out = _section(cp, "output").get("dir", f"dgpe_output/{sc.get('name', path.stem)}")
    env = os.environ.get(OUTPUT_ENV)
    if env:
        out = str(Path(env) / sc.get("name", path.stem))
    pipeline = sc.get("pipeline", "full").strip()
    if pipeline not in PIPELINES:
        raise ConfigurationError(f"unknown pipeline {pipeline!r}; expected one of {PIPELINES}")
    seed = sc.get("seed", "0")
    try:
        seed = int(seed)
    except ValueError:
        raise ConfigurationError(f"seed must be an integer, got {seed!r}") from None
    return ScenarioConfig(
        name=sc.get("name", path.stem), params=p, grid=grid, datum=datum, ground_state=gs,
        evolve=evolve, classifier=clf, output_dir=out, seed=seed, pipeline=pipeline,
        source=str(path),
    )


# ---------------------------------------------------------------- data


def smooth_quadratic_phase(grid: GridSpec) -> np.ndarray:
    """``|x|^2 / 2`` for ``|x| <= L/2``, tapering to zero by ``|x| = L``."""
    R = 0.5 * grid.L
    r = np.sqrt(grid.radius2())
    return 0.5 * R * R * radial_profile(r / R)


def _stretch(vals: np.ndarray, grid: GridSpec, anisotropy: float) -> np.ndarray:
    if anisotropy == 1.0:
        return vals
    return resample(vals, grid, (1.0, 1.0, 1.0 / anisotropy)).real


def _phase_for_em(base: np.ndarray, phi: np.ndarray, grid: GridSpec, p: PhysParams,
                  em_target: float, sign: float) -> float:
    """Phase strength ``b`` (with the given sign) so that ``E M`` hits ``em_target``."""

    def gap(b):
        inv = invariants(Field(grid, base * np.exp(1j * sign * b * phi)), p)
        return inv.E * inv.M - em_target

    g0 = gap(0.0)
    if g0 > 0.0:
        raise InputError(f"E M already exceeds the target at b = 0 (gap {g0:.3e})")
    if g0 == 0.0:
        return 0.0
    hi = 1e-3
    while gap(hi) < 0.0:
        hi *= 2.0
        if hi > 1e3:
            raise InputError("no phase strength reaches the requested E M")
    b = brentq(gap, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    return sign * b


def build_datum(recipe: DatumRecipe, grid: GridSpec, p: PhysParams,
                q: GroundState | None = None, em: float | None = None,
                seed: int = 0) -> tuple[Field, dict]:
    u, info = _build(recipe, grid, p, q, em)
    if recipe.perturbation > 0.0:
        vals = u.values + perturbation(u.grid, seed, recipe.perturbation)
        u = Field(u.grid, vals)
        info["perturbation"] = {"size": recipe.perturbation, "seed": seed}
    return u, info


def _build(recipe, grid, p, q, em):
    """Initial datum and a record of the construction.

    For ``scaled_ground_state`` the datum lives on ``q``'s grid (after the
    optional ``evolve_mu`` rescale), which may differ from ``grid``.
    """
    info: dict = {"recipe": recipe.recipe}
    if recipe.recipe == "from_checkpoint":
        u, t = read_checkpoint(recipe.path)
        info["checkpoint_time"] = t
        return u, info
    if recipe.recipe == "gaussian":
        r2 = grid.radius2()
        base = recipe.amplitude * np.exp(-r2 / (2.0 * recipe.sigma**2))
        base = _stretch(np.broadcast_to(base, grid.shape), grid, recipe.anisotropy)
        phi = smooth_quadratic_phase(grid)
        info["b"] = recipe.phase
        return Field(grid, base * np.exp(1j * recipe.phase * phi)), info
    if q is None:
        raise ConfigurationError("scaled_ground_state needs a ground state")
    if recipe.evolve_mu is not None:
        q = rescale_ground_state(q, recipe.evolve_mu)
        info["evolve_mu"] = recipe.evolve_mu
    g = q.grid
    base = recipe.amplitude * _stretch(q.profile.values.real, g, recipe.anisotropy)
    phi = smooth_quadratic_phase(g)
    if recipe.em_ratio is not None:
        if em is None:
            raise ConfigurationError("em_ratio needs the threshold value em")
        b = _phase_for_em(base, phi, g, p, recipe.em_ratio * em, recipe.phase_sign)
    else:
        b = recipe.quadratic_phase_b
    info.update({"b": b, "amplitude": recipe.amplitude, "anisotropy": recipe.anisotropy,
                 "grid": {"n": g.n, "L": g.L}})
    vals = base * np.exp(1j * b * phi) if b != 0.0 else base.astype(complex)
    return Field(g, vals), info


def perturbation(grid: GridSpec, seed: int, size: float) -> np.ndarray:
    """Random field of L2 norm ``size``, fixed by ``seed``, band-limited and localized."""
    rng = np.random.default_rng(seed)
    noise = rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape)
    cut = (0.25 * grid.xi_max) ** 2
    smooth = ifftn(fftn(noise) * np.exp(-grid.xi2() / cut * 8.0))
    R = 0.25 * grid.L
    vals = smooth * np.exp(-grid.radius2() / (2.0 * R * R))
    nrm = math.sqrt(grid.integrate(np.abs(vals) ** 2))
    return size * vals / nrm
