"""Classification of initial data against the mass-energy threshold of the ground state."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import InputError, RegimeError
from .functionals import PhysParams, invariants, variance, virial_rate
from .ground_state import ThresholdQuantities
from .regimes import RegimeLabel, classify_regime

CLASSES = ("SC", "BC", "SC_prime", "BC_prime", "AT_i", "AT_ii", "AT_iii", "unclassified")

PREDICTIONS = {
    "SC": "global",
    "BC": "blowup",
    "SC_prime": "global",
    "BC_prime": "blowup",
    "AT_i": "global",
    "AT_ii": "standing_wave",
    "AT_iii": "above_threshold_kinetic",
    "unclassified": "none",
}


@dataclass
class ThresholdVerdict:
    cls: str
    witnesses: dict
    regime: str
    tolerances: dict = field(default_factory=dict)

    @property
    def prediction(self) -> str:
        return PREDICTIONS[self.cls]

    def to_json(self) -> dict:
        return {"class": self.cls, "witnesses": dict(self.witnesses), "regime": self.regime,
                "tolerances": dict(self.tolerances), "prediction": self.prediction}


@dataclass(frozen=True)
class Zeta0Data:
    zeta0: float
    h_at_zeta0: float
    z0: float
    zprime0: float
    zeta0_root: float
    iden_residual: float
    cgn: float

    def as_dict(self) -> dict:
        return asdict(self)


def harmonized(tq: ThresholdQuantities) -> ThresholdQuantities:
    """Copy of ``tq`` whose constant satisfies ``em = (2/27) C^-2`` exactly."""
    return ThresholdQuantities(tq.em, tq.hm, tq.pm, math.sqrt(2.0 / (27.0 * tq.em)))


def _witnesses(u0, p: PhysParams, tq: ThresholdQuantities) -> dict:
    inv = invariants(u0, p)
    V = variance(u0)
    Vd = virial_rate(u0)
    return {
        "em": tq.em, "hm": tq.hm, "pm": tq.pm,
        "EM": inv.E * inv.M, "HM": inv.H * inv.M, "PM": inv.P * inv.M,
        "M": inv.M, "E": inv.E, "H": inv.H, "P": inv.P,
        "V0": V, "Vdot0": Vd, "zeta0": None,
    }


def classify_below(u0, p: PhysParams, tq: ThresholdQuantities, rtol: float = 1e-6) -> ThresholdVerdict:
    """SC when ``EM < em`` and ``HM < hm``; BC when ``EM < em`` and ``HM > hm``."""
    reg = classify_regime(p)
    if not reg.unstable:
        raise RegimeError("below-threshold classification needs the unstable regime")
    w = _witnesses(u0, p, tq)
    below = w["EM"] < tq.em * (1.0 - rtol)
    cls = "unclassified"
    if below and w["HM"] < tq.hm * (1.0 - rtol):
        cls = "SC"
    elif below and w["HM"] > tq.hm * (1.0 + rtol):
        cls = "BC"
    return ThresholdVerdict(cls, w, str(reg), {"rtol": rtol})


def zeta0(u0, p: PhysParams, tq: ThresholdQuantities, cgn: float | None = None,
          w: dict | None = None) -> Zeta0Data:
    """Minimizer ``zeta0 = 4E - 8/(27 C^2 M)`` of the auxiliary function ``h``.

    ``cgn`` defaults to the constant consistent with ``tq.em``. Also solves
    ``h'(zeta) = 0`` by bracketing as an independent check and returns the
    residual of ``(EM/em)(1 - zeta0/(4E)) = 1``.
    """
    if w is None:
        w = _witnesses(u0, p, tq)
    E, M, V, Vd = w["E"], w["M"], w["V0"], w["Vdot0"]
    if not E > 0.0:
        raise InputError("above-threshold analysis needs E(u0) > 0")
    L = u0.grid.L
    if not V > 1e-12 * M * L * L:
        raise InputError("degenerate variance V(0)")
    C = math.sqrt(2.0 / (27.0 * tq.em)) if cgn is None else float(cgn)
    k = C ** (2.0 / 3.0) * M ** (1.0 / 3.0)
    z0 = 4.0 * E - 8.0 / (27.0 * C * C * M)

    def h(zeta):
        return 6.0 * E - zeta - (4.0 * E - zeta) ** (2.0 / 3.0) / k

    def dh(zeta):
        return -1.0 + (2.0 / 3.0) * (4.0 * E - zeta) ** (-1.0 / 3.0) / k

    # dh increases to +inf as zeta -> 4E and tends to -1 as zeta -> -inf
    span = max(abs(z0), 4.0 * E, 1.0)
    lo = 4.0 * E - span
    while dh(lo) > 0.0:
        lo -= 2.0 * span
        span *= 2.0
    hi = 4.0 * E - (4.0 * E - z0) * 1e-3
    while dh(hi) < 0.0:
        hi = 4.0 * E - (4.0 * E - hi) * 1e-3
    root = brentq(dh, lo, hi, xtol=1e-15 * span, rtol=4 * np.finfo(float).eps, maxiter=500)
    iden = (w["EM"] / tq.em) * (1.0 - z0 / (4.0 * E)) - 1.0
    return Zeta0Data(
        zeta0=z0,
        h_at_zeta0=h(z0),
        z0=math.sqrt(V),
        zprime0=Vd / (2.0 * math.sqrt(V)),
        zeta0_root=root,
        iden_residual=iden,
        cgn=C,
    )


def classify_above(u0, p: PhysParams, tq: ThresholdQuantities, z: Zeta0Data | None = None,
                   rtol: float = 1e-6) -> ThresholdVerdict:
    """Above-threshold scattering (SC') and blow-up (BC') conditions, restricted regime only."""
    reg = classify_regime(p)
    if not reg.rur:
        raise RegimeError("above-threshold classification needs the restricted unstable regime")
    w = _witnesses(u0, p, tq)
    EM, E, V, Vd = w["EM"], w["E"], w["V0"], w["Vdot0"]
    c1 = EM >= tq.em * (1.0 - rtol)
    if E > 0.0:
        lhs2 = (EM / tq.em) * (1.0 - Vd * Vd / (8.0 * E * V))
        if z is None:
            z = zeta0(u0, p, tq, w=w)
        w["zeta0"] = z.zeta0
        w["zprime0_sq"] = z.zprime0**2
    else:
        lhs2 = math.inf
    c2 = lhs2 <= 1.0 + rtol
    w["cond2_lhs"] = lhs2
    if z is not None:
        alt = z.zprime0**2 >= 0.5 * z.zeta0 - rtol * abs(z.zeta0)
        w["cond2_equivalent"] = bool(alt == c2) or abs(lhs2 - 1.0) <= 10 * rtol
    c3_sc = -w["PM"] < -tq.pm * (1.0 - rtol)
    c3_bc = -w["PM"] > -tq.pm * (1.0 + rtol)
    c4_sc = Vd >= 0.0
    c4_bc = Vd <= 0.0
    w["conditions_SC_prime"] = [bool(c1), bool(c2), bool(c3_sc), bool(c4_sc)]
    w["conditions_BC_prime"] = [bool(c1), bool(c2), bool(c3_bc), bool(c4_bc)]
    cls = "unclassified"
    if c1 and c2 and c3_sc and c4_sc:
        cls = "SC_prime"
    elif c1 and c2 and c3_bc and c4_bc:
        cls = "BC_prime"
    return ThresholdVerdict(cls, w, str(reg), {"rtol": rtol})


def classify_at_threshold(u0, tq: ThresholdQuantities, p: PhysParams,
                          tol_at: float = 1e-6, rtol: float = 1e-6) -> ThresholdVerdict:
    """At-threshold trichotomy on ``HM`` versus ``hm`` when ``EM`` equals ``em``.

    Data outside the band ``|EM - em| <= tol_at em`` are routed to the below
    or above classifier.
    """
    reg = classify_regime(p)
    w = _witnesses(u0, p, tq)
    if abs(w["EM"] - tq.em) > tol_at * tq.em:
        return classify(u0, p, tq, tol_at=tol_at, rtol=rtol)
    if w["HM"] < tq.hm * (1.0 - tol_at):
        cls = "AT_i"
    elif w["HM"] > tq.hm * (1.0 + tol_at):
        cls = "AT_iii"
    else:
        cls = "AT_ii"
    return ThresholdVerdict(cls, w, str(reg), {"tol_at": tol_at, "rtol": rtol})


def classify(u0, p: PhysParams, tq: ThresholdQuantities, tol_at: float = 1e-6,
             rtol: float = 1e-6) -> ThresholdVerdict:
    """Route ``u0`` to the at-threshold, below or above classifier.

    Stable-regime data are returned ``unclassified``; above-threshold data
    outside the restricted regime are ``unclassified`` as well.
    """
    reg = classify_regime(p)
    if not reg.unstable:
        w = _witnesses(u0, p, tq)
        return ThresholdVerdict("unclassified", w, str(reg), {"tol_at": tol_at, "rtol": rtol})
    w = _witnesses(u0, p, tq)
    if abs(w["EM"] - tq.em) <= tol_at * tq.em:
        return classify_at_threshold(u0, tq, p, tol_at=tol_at, rtol=rtol)
    if w["EM"] < tq.em:
        return classify_below(u0, p, tq, rtol=rtol)
    if reg.rur and w["E"] > 0.0:
        return classify_above(u0, p, tq, rtol=rtol)
    return ThresholdVerdict("unclassified", w, str(reg), {"tol_at": tol_at, "rtol": rtol})


__all__ = [
    "RegimeLabel",
    "ThresholdVerdict",
    "Zeta0Data",
    "classify",
    "classify_above",
    "classify_at_threshold",
    "classify_below",
    "classify_regime",
    "harmonized",
    "zeta0",
]
