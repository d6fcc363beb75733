import csv
import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dgpe import riesz
from dgpe.errors import ConfigurationError, InputError, ShapeError
from dgpe.spectral import Field, cross, fourth, make_grid, square

mp.mp.dps = 30


def kernel_oracle(mu):
    """Radial biharmonic heat-kernel profile by high-precision quadrature."""
    mu = mp.mpf(mu)
    if mu == 0:
        val = mp.quad(lambda s: mp.exp(-s**4) * s * s, [0, 2, 4, 8])
    else:
        pts = mp.linspace(0, 8, 65)
        val = mp.quad(lambda s: mp.exp(-s**4) * s * mp.sin(mu * s), pts) / mu
    return float(mp.sqrt(2 / mp.pi) * val)


def faa_oracle(c, x):
    """Fourth x3-derivative of sin(c r)/r by mpmath differentiation."""
    a = mp.mpf(x[0]) ** 2 + mp.mpf(x[1]) ** 2

    def fn(z):
        r = mp.sqrt(a + z * z)
        return mp.sin(c * r) / r

    return float(mp.diff(fn, mp.mpf(x[2]), 4))


@pytest.fixture(scope="module")
def sweep_grid():
    return make_grid(64, 32.0)


class TestKernel:
    @pytest.mark.parametrize("mu", [0.0, 0.3, 0.99, 1.0, 2.5, 6.0, 12.0])
    def test_against_high_precision_quadrature(self, mu):
        assert riesz.biharmonic_kernel(mu) == pytest.approx(kernel_oracle(mu), rel=1e-9, abs=1e-13)

    def test_value_at_zero(self):
        assert abs(riesz.biharmonic_kernel(0.0) - riesz.kernel_at_zero()) <= 1e-10
        assert riesz.kernel_at_zero() == pytest.approx(math.sqrt(2 / math.pi) * math.gamma(0.75) / 4, rel=1e-15)

    def test_continuity_across_branch(self):
        a = riesz.biharmonic_kernel(1.0 - 1e-9)
        b = riesz.biharmonic_kernel(1.0)
        assert abs(a - b) <= 1e-8

    def test_normalization(self):
        assert riesz.kernel_normalization() == pytest.approx((2 * math.pi) ** -1.5, rel=1e-8)

    def test_two_paths_agree(self):
        rep = riesz.kernel_two_path_check()
        assert rep["max_rel_error"] <= 1e-5
        assert rep["alpha"] == pytest.approx(rep["alpha_expected"], rel=1e-8)

    @pytest.mark.parametrize("mu", [-1.0, float("nan"), float("inf")])
    def test_bad_argument(self, mu):
        with pytest.raises(InputError):
            riesz.biharmonic_kernel(mu)

    def test_semigroup_symbol(self, grid32):
        m = riesz.biharmonic_multiplier(grid32, 0.0).values
        assert np.all(m == 1.0)
        with pytest.raises(ConfigurationError):
            riesz.biharmonic_multiplier(grid32, -1.0)


class TestR4Representation:
    def test_scalar_identity(self):
        rng = np.random.default_rng(3)
        xis = rng.normal(size=(200, 3)) * rng.uniform(0.2, 3.0, size=(200, 1))
        for axis in (1, 2, 3):
            rep = riesz.r4_scalar_check(xis, axis, t_max=2000.0)
            assert rep["max_abs_error"] <= 1e-10

    def test_scalar_rejects_zero_frequency(self):
        with pytest.raises(InputError):
            riesz.r4_scalar_check([[0.0, 0.0, 0.0]], 3, t_max=10.0)

    def test_operator_route(self, grid32):
        x1, x2, x3 = grid32.coords()
        f = riesz.project_zero_mode(Field(grid32, np.broadcast_to(np.exp(-(x1**2 + x2**2 + x3**2) / 2), grid32.shape)))
        g = Field(grid32, np.broadcast_to(np.exp(-((x1 - 1) ** 2 + x2**2 + (x3 - 0.5) ** 2) / 3), grid32.shape))
        rep = riesz.r4_representation_check(f, g, t_max=2000.0, n_quad=2000)
        assert rep["scalar_max_abs_error"] <= 1e-10
        assert rep["operator_rel_error"] <= 1e-6
        direct = riesz.riesz_pairing(f, g, fourth(3))
        assert abs(rep["pairing"] - direct) <= 1e-12 * abs(direct)

    def test_zero_mode_rejected(self, grid32):
        f = Field(grid32, np.broadcast_to(np.exp(-grid32.radius2()), grid32.shape))
        with pytest.raises(InputError):
            riesz.r4_representation_check(f, f, t_max=10.0)

    def test_grid_mismatch(self, grid32):
        g16 = make_grid(16, 8.0)
        f = riesz.project_zero_mode(Field(grid32, np.exp(-grid32.radius2())))
        with pytest.raises(ShapeError):
            riesz.r4_representation_check(f, Field(g16, np.ones(g16.shape)), t_max=10.0)

    def test_projection_removes_mean(self, grid32):
        f = riesz.project_zero_mode(Field(grid32, np.exp(-grid32.radius2())))
        assert abs(np.mean(f.values)) <= 1e-16


class TestFaaDiBruno:
    @pytest.mark.parametrize("c", [0.5, 1.0, 3.0])
    def test_terms_against_mpmath(self, c):
        rng = np.random.default_rng(11)
        for _ in range(8):
            x = rng.uniform(-3, 3, size=3)
            if np.linalg.norm(x) < 0.5:
                continue
            terms = riesz.faa_di_bruno_terms(c, x)
            scale = sum(abs(t) for t in terms)
            assert abs(sum(terms) - faa_oracle(c, x)) <= 1e-11 * scale

    def test_finite_difference_check(self):
        rng = np.random.default_rng(0)
        pts = []
        while len(pts) < 20:
            x = rng.uniform(-4.0, 4.0, size=3)
            if np.linalg.norm(x) >= 0.5:
                pts.append(x)
        rep = riesz.faa_di_bruno_check(1.0, pts)
        assert rep["max_rel_error"] <= 1e-6
        assert rep["passed"]
        assert all(r["bound_ok"] for r in rep["rows"])

    def test_near_origin_rejected(self):
        with pytest.raises(InputError):
            riesz.faa_di_bruno_check(1.0, [[0.1, 0.2, 0.1]])

    def test_polynomial_pairs(self):
        pairs = riesz.claim_polynomial_pairs()
        assert all(cf > 0 for cf in pairs.values())
        # highest power of c comes only from f'''' g'^4
        assert pairs[(4, 1)] == 1
        assert max(j for j, _ in pairs) == 4
        assert all(k >= 1 for _, k in pairs)

    @settings(max_examples=40, deadline=None)
    @given(x=st.tuples(*[st.floats(-5, 5)] * 3), c=st.floats(-4, 4))
    def test_bound_holds(self, x, c):
        x = np.asarray(x)
        r = float(np.linalg.norm(x))
        if r < 0.5:
            return
        val = sum(riesz.faa_di_bruno_terms(c, x))
        bound = sum(cf * abs(c) ** j / r**k for (j, k), cf in riesz.claim_polynomial_pairs().items())
        assert abs(val) <= bound * (1 + 1e-12)


class TestDipolarSymbol:
    def test_identities(self):
        rep = riesz.dipolar_symbol_identities(seed=0)
        assert rep["radial_derivative_max"] <= 1e-10
        assert rep["homogeneity_max"] <= 1e-12
        assert rep["xi3_identity_max"] <= 1e-12
        assert rep["pairing_identity"]["rel_residual"] <= 1e-4

    def test_gradient_against_difference(self):
        rng = np.random.default_rng(5)
        xi = rng.normal(size=(50, 3))
        h = 1e-6
        for ax in range(3):
            e = np.zeros(3)
            e[ax] = h
            fd = (riesz.dipolar_symbol(xi + e) - riesz.dipolar_symbol(xi - e)) / (2 * h)
            assert np.max(np.abs(fd - riesz.dipolar_symbol_gradient(xi)[:, ax])) <= 1e-6

    def test_axis_values(self):
        assert riesz.dipolar_symbol([0, 0, 1.0]) == pytest.approx(8 * np.pi / 3)
        assert riesz.dipolar_symbol([1.0, 0, 0]) == pytest.approx(-4 * np.pi / 3)


class TestPairings:
    def test_multiplier_sum(self, grid32):
        f = Field(grid32, np.exp(-grid32.radius2()))
        g = Field(grid32, np.exp(-grid32.radius2() / 2))
        a = riesz.riesz_pairing(f, g, [(1.0, square(1)), (1.0, square(2)), (1.0, square(3))])
        fv, gv = f.values.real, g.values.real
        # the squares sum to the identity away from the zero mode
        vol = (2 * grid32.L) ** 3
        exact = grid32.integrate(fv * gv) - grid32.integrate(fv) * grid32.integrate(gv) / vol
        assert abs(a - exact) <= 1e-12 * abs(exact)

    def test_grid_mismatch(self, grid32):
        g16 = make_grid(16, 8.0)
        with pytest.raises(ShapeError):
            riesz.riesz_pairing(Field(grid32, np.ones(grid32.shape)), Field(g16, np.ones(g16.shape)), square(3))

    def test_hermitian(self, grid32):
        rng = np.random.default_rng(1)
        w = np.exp(-grid32.radius2() / 4)
        f = Field(grid32, rng.normal(size=grid32.shape) * w)
        g = Field(grid32, rng.normal(size=grid32.shape) * w)
        for spec in (square(3), fourth(1), cross(1, 3), "dipolar"):
            a = riesz.riesz_pairing(f, g, spec)
            b = riesz.riesz_pairing(g, f, spec)
            assert abs(a - np.conj(b)) <= 1e-12 * (abs(a) + 1e-300)


class TestCutoffsAndBumps:
    def test_cylinder_cutoff(self, grid32):
        chi = riesz.CylinderCutoff(1.0, 3.0)
        v = chi.values(grid32)
        x1, x2, _ = grid32.coords()
        rb = np.broadcast_to(np.sqrt(x1**2 + x2**2), grid32.shape)
        assert np.all(v[rb <= 3.0] == 1.0)
        assert np.all(v[rb >= 3.3] == 0.0)
        out = riesz.CylinderCutoff(1.0, 3.0, "outside").values(grid32)
        assert np.allclose(v + out, 1.0, atol=1e-15)

    @pytest.mark.parametrize("kw", [dict(gamma=0.0, R=1.0), dict(gamma=1.0, R=-1.0),
                                    dict(gamma=1.0, R=1.0, side="left"), dict(gamma=1.0, R=1.0, width=0.0)])
    def test_bad_cutoff(self, kw):
        with pytest.raises(ConfigurationError):
            riesz.CylinderCutoff(**kw)

    def test_bumps_normalized_and_supported(self, grid32):
        x1, x2, x3 = grid32.coords()
        rb = np.broadcast_to(np.sqrt(x1**2 + x2**2), grid32.shape)
        z = np.broadcast_to(x3, grid32.shape)
        core = riesz.cylinder_core(grid32, 2.0, 3.0)
        assert riesz.l1_norm(core) == pytest.approx(1.0, rel=1e-14)
        assert np.all(core.values[(rb >= 2.0) | (np.abs(z) >= 3.0)] == 0.0)
        shell = riesz.cylinder_shell(grid32, 3.0, 1.5, 2.0)
        assert riesz.l1_norm(shell) == pytest.approx(1.0, rel=1e-14)
        assert np.all(shell.values[(rb <= 3.0) | (rb >= 4.5)] == 0.0)
        ball = riesz.ball_bump(grid32, (0, 0, 2.0), 1.5)
        r = np.sqrt(grid32.radius2() - 4 * z + 4)
        assert np.all(ball.values[r >= 1.5] == 0.0)


class TestSweeps:
    @pytest.mark.parametrize("kind", ["r4", "r2r2"])
    def test_cylinder_bounded_ratio(self, sweep_grid, kind):
        rep = riesz.decay_sweep_pairing(kind, 1.0, 2.0, (2.0, 4.0, 8.0), grid=sweep_grid)
        assert rep.exponent == 1
        assert rep.passed, rep.ratios
        assert all(p > 0 for p in rep.pairings)
        assert rep.slope < 0

    def test_zero_degree_bounded_ratio(self, sweep_grid):
        rep = riesz.decay_sweep_pairing("zero_degree", 1.0, 1.0, (4.0, 8.0, 16.0), grid=sweep_grid)
        assert rep.exponent == 3
        assert rep.passed, rep.ratios
        # cube-law decay between resolved distances; periodic images flatten it slightly
        p = rep.pairings
        assert abs(math.log2(p[1] / p[2]) - 3.0) <= 0.3

    def test_csv(self, sweep_grid, tmp_path):
        rep = riesz.decay_sweep_pairing("r4", 1.0, 2.0, (2.0, 4.0), grid=sweep_grid)
        p = rep.write_csv(tmp_path / "s.csv")
        rows = list(csv.DictReader(open(p)))
        assert [float(r["R"]) for r in rows] == [2.0, 4.0]
        assert float(rows[1]["bound_ratio"]) == rep.ratios[1]

    @pytest.mark.parametrize("args", [("r4", 1.0, 2.0, ()), ("r4", 1.0, 2.0, (4.0, 2.0)),
                                      ("r4", 2.0, 1.0, (2.0,)), ("r4", 0.0, 2.0, (2.0,)),
                                      ("r4", 1.0, 2.0, (30.0,)), ("nope", 1.0, 2.0, (2.0,)),
                                      ("zero_degree", 1.0, 1.0, (40.0,))])
    def test_configuration_errors(self, sweep_grid, args):
        with pytest.raises(ConfigurationError):
            riesz.decay_sweep_pairing(*args[:3], args[3], grid=sweep_grid)


class TestPointwise:
    @pytest.mark.parametrize("direction", ["in_out", "out_in"])
    def test_ratio_bounded(self, sweep_grid, direction):
        ratios = []
        for R in (4.0, 8.0):
            if direction == "in_out":
                f = riesz.gaussian_ring(sweep_grid, 2.5 * R, 0.2 * R, 0.5 * R)
                g1, g2 = 1.0, 2.0
            else:
                f = riesz.gaussian_core(sweep_grid, 0.3 * R, 0.5 * R)
                g1, g2 = 2.0, 1.0
            ratios.append(riesz.pointwise_cutoff_check(f, g1, g2, R, direction)["ratio"])
        assert ratios[1] <= 1.3 * ratios[0]

    @pytest.mark.parametrize("direction, g1, g2", [("sideways", 1.0, 2.0), ("in_out", 2.0, 1.0),
                                                   ("out_in", 1.0, 2.0)])
    def test_bad_configuration(self, grid32, direction, g1, g2):
        f = riesz.gaussian_core(grid32, 1.0, 1.0)
        with pytest.raises(ConfigurationError):
            riesz.pointwise_cutoff_check(f, g1, g2, 2.0, direction)
