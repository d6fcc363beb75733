import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from dgpe.errors import ConfigurationError, NumericalHealthError
from dgpe.functionals import (
    PhysParams,
    VirialWeight,
    centroid,
    invariants,
    localized_rate,
    outside_mass,
    potential_parts,
    radial_profile,
    recenter,
    tail_fraction,
    variance,
    virial_rate,
)
from dgpe.regimes import classify_regime
from dgpe.spectral import Field, make_grid

from conftest import DIPOLAR, gaussian
from test_spectral import dipolar_pairing_oracle

PI15 = np.pi**1.5


def _flip_all(v):
    for ax in range(3):
        v = np.roll(np.flip(v, axis=ax), 1, axis=ax)
    return v


class TestPhysParams:
    def test_both_zero_rejected(self):
        with pytest.raises(ConfigurationError):
            PhysParams(0.0, 0.0)

    def test_non_finite_rejected(self):
        with pytest.raises(ConfigurationError):
            PhysParams(float("inf"), 1.0)

    def test_free(self):
        assert PhysParams.free().is_free
        assert not DIPOLAR.is_free


class TestGaussianValues:
    def test_mass_kinetic_variance(self, grid64):
        u = Field(grid64, gaussian(grid64))
        inv = invariants(u, DIPOLAR)
        assert abs(inv.M / PI15 - 1.0) < 1e-12
        assert abs(inv.H / (1.5 * PI15) - 1.0) < 1e-12
        assert abs(variance(u) / inv.M - 1.5) < 1e-12

    def test_isotropic_potential(self):
        g = make_grid(64, 8.0)
        rho = np.exp(-g.radius2())
        local, dip = potential_parts(rho, g)
        assert abs(local / (np.pi / 2) ** 1.5 - 1.0) < 1e-12
        # the dipolar kernel averages to zero over spheres
        assert abs(dip) < 1e-10 * local

    def test_anisotropic_potential(self):
        g = make_grid(64, 8.0)
        x1, x2, x3 = g.coords()
        sr, sz = 1.0, 0.5
        u = np.broadcast_to(np.exp(-(x1**2 + x2**2) / (2 * sr**2) - x3**2 / (2 * sz**2)), g.shape)
        p = PhysParams(1.0, 0.3)
        inv = invariants(Field(g, u), p)
        local = (np.pi / 2) ** 1.5 * sr * sr * sz
        exact = local + 0.3 * dipolar_pairing_oracle(sr, sz)
        assert abs(inv.P / exact - 1.0) < 1e-4

    def test_quadratic_phase_rate(self, grid64):
        beta = 0.3
        u = Field(grid64, gaussian(grid64, phase=beta))
        assert abs(virial_rate(u) / (2 * beta * variance(u)) - 1.0) < 1e-10
        assert abs(virial_rate(Field(grid64, gaussian(grid64)))) < 1e-12


class TestAlgebra:
    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**16), l1=st.floats(-3, 3), l2=st.floats(-3, 3))
    def test_energy_and_pohozaev_combinations(self, seed, l1, l2):
        assume(abs(l1) + abs(l2) > 1e-3)
        g = make_grid(16, 4.0)
        rng = np.random.default_rng(seed)
        v = (rng.normal(size=g.shape) + 1j * rng.normal(size=g.shape)) * np.exp(-g.radius2() / 4)
        inv = invariants(Field(g, v), PhysParams(l1, l2))
        scale = abs(inv.H) + abs(inv.P)
        assert abs(inv.E - 0.5 * (inv.H + inv.P)) <= 1e-14 * scale
        assert abs(inv.G - (inv.H + 1.5 * inv.P)) <= 1e-14 * scale

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 2**16))
    def test_parity_and_conjugation(self, seed):
        g = make_grid(16, 4.0)
        rng = np.random.default_rng(seed)
        v = (rng.normal(size=g.shape) + 1j * rng.normal(size=g.shape)) * np.exp(-g.radius2() / 4)
        a = invariants(Field(g, v), DIPOLAR).as_dict()
        for w in (_flip_all(v), np.conj(v)):
            b = invariants(Field(g, w), DIPOLAR).as_dict()
            for k in a:
                assert abs(a[k] - b[k]) <= 1e-10 * (abs(a[k]) + 1e-12)

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 2**16), l1=st.floats(0.1, 5), l2=st.floats(-0.2, 0.2))
    def test_stable_regime_positive_potential(self, seed, l1, l2):
        p = PhysParams(l1, l2)
        assume(not classify_regime(p).unstable)
        g = make_grid(16, 4.0)
        rng = np.random.default_rng(seed)
        v = rng.normal(size=g.shape) * np.exp(-g.radius2() / 4)
        assert invariants(Field(g, v), p).P >= 0.0

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 2**16))
    def test_restricted_regime_negative_potential(self, seed):
        g = make_grid(16, 4.0)
        rng = np.random.default_rng(seed)
        v = rng.normal(size=g.shape) * np.exp(-g.radius2() / 4)
        assert invariants(Field(g, v), DIPOLAR).P < 0.0

    @pytest.mark.parametrize("s", [0.8, 1.25])
    def test_scaling_law(self, s):
        # u_s(x) = s^{3/2} u(s x) keeps M and scales H by s^2 and P by s^3
        g = make_grid(64, 8.0)
        x1, x2, x3 = g.coords()
        prof = lambda a, b, c: np.exp(-0.5 * (a**2 + b**2 + 2 * c**2))
        u = np.broadcast_to(prof(x1, x2, x3), g.shape)
        us = np.broadcast_to(s**1.5 * prof(s * x1, s * x2, s * x3), g.shape)
        a = invariants(Field(g, u), DIPOLAR)
        b = invariants(Field(g, us), DIPOLAR)
        assert abs(b.M / a.M - 1.0) < 1e-10
        assert abs(b.H / a.H - s**2) < 1e-8
        # periodic images of the r^-3 dipolar kernel break exact scaling at O((width/L)^3)
        assert abs(b.P / a.P - s**3) < 1e-4

    def test_non_finite(self, grid32):
        with pytest.raises(NumericalHealthError):
            invariants(np.full(grid32.shape, np.nan), DIPOLAR, grid32)


class TestWeights:
    def test_profile(self):
        r = np.linspace(0, 1, 11)
        assert np.allclose(radial_profile(r), r**2, atol=1e-15)
        assert np.all(radial_profile(np.array([2.0, 3.0, 10.0])) == 0.0)
        assert np.all(np.diff(radial_profile(np.linspace(0, 1.2, 50))) >= 0.0)

    @pytest.mark.parametrize("kind, R", [("nope", 1.0), ("ball_cutoff", 0.0), ("cylinder_plus_x3sq", -1.0)])
    def test_bad_weights(self, kind, R):
        with pytest.raises(ConfigurationError):
            VirialWeight(kind, R)

    def test_weight_too_large_for_box(self, grid32):
        with pytest.raises(ConfigurationError):
            VirialWeight("ball_cutoff", 5.0).values(grid32)

    def test_localized_matches_full_inside(self, grid64):
        beta = 0.2
        u = Field(grid64, gaussian(grid64, phase=beta))
        w = VirialWeight("ball_cutoff", 7.0)
        assert abs(variance(u, w) / (2 * variance(u)) - 1.0) < 1e-10
        # the spectral gradient of the cutoff weight carries a small global error
        assert abs(localized_rate(u, w) / (2 * virial_rate(u)) - 1.0) < 1e-5
        wc = VirialWeight("cylinder_plus_x3sq", 7.0)
        assert abs(variance(u, wc) / (2 * variance(u)) - 1.0) < 1e-10

    def test_full_weight_rate(self, grid64):
        u = Field(grid64, gaussian(grid64, phase=0.1))
        assert localized_rate(u, VirialWeight()) == virial_rate(u)


class TestLocation:
    def test_tail_and_outside(self, grid64):
        u = Field(grid64, gaussian(grid64))
        assert tail_fraction(u) < 1e-20
        M = invariants(u, DIPOLAR).M
        assert outside_mass(u, 0.0) == pytest.approx(M, rel=1e-14)
        assert outside_mass(u, 100.0) == 0.0
        vals = [outside_mass(u, r) for r in (0.5, 1.0, 2.0, 4.0)]
        assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_centroid_and_recenter(self, grid64):
        c = (3.0, -2.5, 6.0)
        u = gaussian(grid64, center=c)
        assert np.allclose(centroid(u, grid64), c, atol=1e-8)
        back = recenter(np.asarray(u), grid64)
        assert np.max(np.abs(centroid(back, grid64))) <= grid64.h
