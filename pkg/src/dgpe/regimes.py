"""Parameter regimes of the dipolar cubic nonlinearity."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .functionals import PhysParams

FOUR_PI_3 = 4.0 * np.pi / 3.0
EIGHT_PI_3 = 8.0 * np.pi / 3.0


@dataclass(frozen=True)
class RegimeLabel:
    """``regime`` is ``"UR"`` or ``"SR"``; ``rur`` flags the restricted unstable subset."""

    regime: str
    rur: bool

    @property
    def unstable(self) -> bool:
        return self.regime == "UR"

    def __str__(self) -> str:
        return "UR+RUR" if self.rur else self.regime


def _is_unstable(l1: float, l2: float) -> bool:
    if l2 > 0.0:
        return l1 - FOUR_PI_3 * l2 < 0.0
    if l2 < 0.0:
        return l1 + EIGHT_PI_3 * l2 < 0.0
    return l1 < 0.0


def _is_restricted(l1: float, l2: float) -> bool:
    # the quartic form lambda1 + lambda2 K^ is negative at every frequency
    if l2 > 0.0:
        return l1 + EIGHT_PI_3 * l2 < 0.0
    if l2 < 0.0:
        return l1 - FOUR_PI_3 * l2 < 0.0
    return l1 < 0.0


def classify_regime(p: PhysParams) -> RegimeLabel:
    """Unstable/stable regime and the restricted-unstable flag for ``(lambda1, lambda2)``.

    The unstable set is where ``lambda1 + lambda2 K^`` takes a negative value
    somewhere on the sphere; the restricted set is where it is negative
    everywhere. For ``lambda2 = 0`` both reduce to ``lambda1 < 0``.
    """
    l1, l2 = p.lambda1, p.lambda2
    ur = _is_unstable(l1, l2)
    rur = _is_restricted(l1, l2)
    if rur and not ur:
        raise AssertionError("restricted regime must lie inside the unstable regime")
    return RegimeLabel("UR" if ur else "SR", rur)
