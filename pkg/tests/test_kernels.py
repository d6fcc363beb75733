import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dgpe import kernels
from dgpe.dynamics import strang_step
from dgpe.spectral import Field, make_grid

from conftest import DIPOLAR, gaussian

BACKENDS = kernels.backends()
needs_ext = pytest.mark.skipif("cython" not in BACKENDS, reason="compiled kernels not built")


def _fields(seed, shape=(8, 6, 10)):
    rng = np.random.default_rng(seed)
    u = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    phi = rng.normal(size=shape)
    m = rng.normal(size=shape)
    return u, phi, m


def _use(monkeypatch, mod):
    for name in ("nonlinear_phase", "abs2", "mul_real", "mul_complex"):
        monkeypatch.setattr(kernels, name, getattr(mod, name))


class TestReference:
    @pytest.mark.parametrize("name", sorted(BACKENDS))
    def test_nonlinear_phase_matches_exponential(self, name):
        mod = BACKENDS[name]
        u, phi, _ = _fields(0)
        ref = u * np.exp(-1j * 0.3 * (-1.0 * np.abs(u) ** 2 + 0.1 * phi))
        mod.nonlinear_phase(u, phi, -1.0, 0.1, 0.3)
        assert np.max(np.abs(u - ref)) <= 1e-13

    @pytest.mark.parametrize("name", sorted(BACKENDS))
    def test_products(self, name):
        mod = BACKENDS[name]
        u, _, m = _fields(1)
        out = np.empty(u.shape)
        mod.abs2(u, out)
        assert np.array_equal(out, u.real**2 + u.imag**2)
        a = u.copy()
        mod.mul_real(a, m)
        assert np.array_equal(a, u * m)
        b = u.copy()
        mod.mul_complex(b, u)
        assert np.max(np.abs(b - u * u)) <= 1e-15 * np.max(np.abs(u * u))

    @pytest.mark.parametrize("name", sorted(BACKENDS))
    def test_phase_preserves_modulus(self, name):
        u, phi, _ = _fields(2)
        before = np.abs(u)
        BACKENDS[name].nonlinear_phase(u, phi, 2.0, -0.5, 0.7)
        assert np.max(np.abs(np.abs(u) - before)) <= 1e-14


@needs_ext
class TestAgreement:
    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**16), l1=st.floats(-3, 3), l2=st.floats(-3, 3), dt=st.floats(1e-4, 0.5))
    def test_backends_agree(self, seed, l1, l2, dt):
        py, cy = BACKENDS["python"], BACKENDS["cython"]
        u, phi, m = _fields(seed)
        a, b = u.copy(), u.copy()
        py.nonlinear_phase(a, phi, l1, l2, dt)
        cy.nonlinear_phase(b, phi, l1, l2, dt)
        assert np.max(np.abs(a - b)) <= 1e-13 * np.max(np.abs(u))
        oa, ob = np.empty(u.shape), np.empty(u.shape)
        py.abs2(u, oa)
        cy.abs2(u, ob)
        assert np.array_equal(oa, ob)
        a, b = u.copy(), u.copy()
        py.mul_real(a, m)
        cy.mul_real(b, m)
        assert np.array_equal(a, b)

    def test_strang_step_agrees(self, grid32, monkeypatch):
        u0 = Field(grid32, gaussian(grid32, (1.0, 1.2, 0.8), phase=0.2) * 1.3)
        out = {}
        for name in ("python", "cython"):
            _use(monkeypatch, BACKENDS[name])
            u = u0
            for _ in range(10):
                u = strang_step(u, DIPOLAR, 1e-2)
            out[name] = u.values
        assert np.max(np.abs(out["python"] - out["cython"])) <= 1e-12

    def test_rejects_non_contiguous(self):
        u, phi, _ = _fields(3)
        with pytest.raises(ValueError):
            BACKENDS["cython"].nonlinear_phase(u[:, :, ::2], phi[:, :, ::2], 1.0, 0.0, 0.1)


class TestSelection:
    def test_active_backend_named(self):
        assert kernels.BACKEND in BACKENDS
        if "cython" in BACKENDS:
            assert kernels.BACKEND == "cython"

    def test_environment_forces_fallback(self):
        env = dict(os.environ, DGPE_PURE_PYTHON="1")
        out = subprocess.run([sys.executable, "-c", "import dgpe; print(dgpe.BACKEND)"],
                             env=env, capture_output=True, text=True, check=True)
        assert out.stdout.strip() == "python"


def test_benchmark_script_runs(tmp_path):
    root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    script = os.path.join(root, "benchmarks", "bench_kernels.py")
    out = subprocess.run([sys.executable, script, "--n", "16", "--repeat", "2"],
                         capture_output=True, text=True, timeout=300)
    assert out.returncode == 0, out.stderr
