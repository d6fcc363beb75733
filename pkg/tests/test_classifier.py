import math

import numpy as np
import pytest

from dgpe.classifier import (
    CLASSES,
    PREDICTIONS,
    classify,
    classify_above,
    classify_at_threshold,
    classify_below,
    harmonized,
    zeta0,
)
from dgpe.config import DatumRecipe, build_datum
from dgpe.errors import InputError, RegimeError
from dgpe.functionals import PhysParams, invariants
from dgpe.spectral import Field

from conftest import DIPOLAR


@pytest.fixture(scope="module")
def tq(q_small):
    return harmonized(q_small.threshold())


def _datum(q, tq, **kw):
    u, _ = build_datum(DatumRecipe(**kw), q.grid, DIPOLAR, q=q, em=tq.em)
    return u


def random_admissible(q, rng):
    """Smooth data with E > 0: ground-state profile with random amplitude, stretch and phase."""
    recipe = DatumRecipe(amplitude=rng.uniform(0.3, 1.05), anisotropy=rng.uniform(0.8, 1.25),
                         quadratic_phase_b=rng.uniform(-0.3, 0.3))
    u, _ = build_datum(recipe, q.grid, DIPOLAR, q=q)
    return u


class TestZeta0:
    def test_identities_on_random_data(self, q_small, tq):
        rng = np.random.default_rng(2024)
        done = 0
        while done < 20:
            u = random_admissible(q_small, rng)
            if not invariants(u, DIPOLAR).E > 0:
                continue
            z = zeta0(u, DIPOLAR, tq)
            scale = max(abs(z.zeta0), 1e-300)
            assert abs(z.zeta0 - z.zeta0_root) <= 1e-10 * scale
            assert abs(z.h_at_zeta0 - 0.5 * z.zeta0) <= 1e-10 * scale
            assert abs(z.iden_residual) <= 1e-8
            done += 1

    def test_closed_form(self, q_small, tq):
        u = _datum(q_small, tq, amplitude=0.8)
        z = zeta0(u, DIPOLAR, tq)
        inv = invariants(u, DIPOLAR)
        C = math.sqrt(2 / (27 * tq.em))
        assert z.zeta0 == pytest.approx(4 * inv.E - 8 / (27 * C * C * inv.M), rel=1e-14)
        assert z.cgn == pytest.approx(C, rel=1e-15)

    def test_needs_positive_energy(self, q_small, tq):
        u = _datum(q_small, tq, amplitude=1.5)
        assert invariants(u, DIPOLAR).E < 0
        with pytest.raises(InputError):
            zeta0(u, DIPOLAR, tq)

    def test_harmonized_chain(self, tq):
        c = tq.chain()
        assert c[3] == pytest.approx(c[0], rel=1e-14)


class TestRouting:
    def test_ground_state_is_at_threshold(self, q_small, tq):
        v = classify(q_small.profile, DIPOLAR, tq)
        assert v.cls == "AT_ii" and v.prediction == "standing_wave"

    @pytest.mark.parametrize("A, cls", [(0.5, "SC"), (0.9, "SC"), (1.2, "BC")])
    def test_below(self, q_small, tq, A, cls):
        u = _datum(q_small, tq, amplitude=A)
        v = classify(u, DIPOLAR, tq)
        assert v.cls == cls
        assert v.witnesses["EM"] < tq.em

    @pytest.mark.parametrize("A, sign, cls", [(0.9, 1.0, "AT_i"), (1.1, -1.0, "AT_iii")])
    def test_at_threshold(self, q_small, tq, A, sign, cls):
        u = _datum(q_small, tq, amplitude=A, em_ratio=1.0, phase_sign=sign)
        v = classify(u, DIPOLAR, tq)
        assert v.cls == cls
        assert abs(v.witnesses["EM"] / tq.em - 1.0) <= 1e-6

    @pytest.mark.parametrize("A, sign, cls", [(0.9, 1.0, "SC_prime"), (1.1, -1.0, "BC_prime")])
    def test_above(self, q_small, tq, A, sign, cls):
        u = _datum(q_small, tq, amplitude=A, em_ratio=1.3, phase_sign=sign)
        v = classify(u, DIPOLAR, tq)
        assert v.cls == cls, v.witnesses
        key = "conditions_SC_prime" if cls == "SC_prime" else "conditions_BC_prime"
        assert all(v.witnesses[key])
        assert v.witnesses["cond2_equivalent"]

    def test_at_threshold_routes_away(self, q_small, tq):
        u = _datum(q_small, tq, amplitude=0.5)
        assert classify_at_threshold(u, tq, DIPOLAR).cls == "SC"

    def test_stable_regime_unclassified(self, q_small, tq):
        v = classify(q_small.profile, PhysParams(1.0, 0.0), tq)
        assert v.cls == "unclassified" and v.regime == "SR"

    def test_above_outside_restricted_unclassified(self, q_small, tq):
        p = PhysParams(0.1, 0.1)
        u = Field(q_small.grid, q_small.profile.values)
        inv = invariants(u, p)
        assert inv.E * inv.M > tq.em and inv.E > 0
        assert classify(u, p, tq).cls == "unclassified"

    def test_regime_errors(self, q_small, tq):
        with pytest.raises(RegimeError):
            classify_below(q_small.profile, PhysParams(1.0, 0.0), tq)
        with pytest.raises(RegimeError):
            classify_above(q_small.profile, PhysParams(0.1, 0.1), tq)

    def test_json(self, q_small, tq):
        d = classify(q_small.profile, DIPOLAR, tq).to_json()
        assert d["class"] in CLASSES and d["prediction"] == PREDICTIONS[d["class"]]
        assert d["regime"] == "UR+RUR"
