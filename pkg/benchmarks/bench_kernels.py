"""Compare the compiled and NumPy split-step kernels.

Run with ``python benchmarks/bench_kernels.py [--n 64] [--repeat 20]``.
Times each nodewise kernel and one full Strang step per backend and checks
that both backends give the same step to rounding.
"""

import argparse
import json
import time

import numpy as np

from dgpe import kernels
from dgpe.dynamics import strang_step
from dgpe.functionals import PhysParams
from dgpe.spectral import Field, make_grid


def _time(fn, repeat):
    fn()
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _use(mod):
    kernels.nonlinear_phase = mod.nonlinear_phase
    kernels.abs2 = mod.abs2
    kernels.mul_real = mod.mul_real
    kernels.mul_complex = mod.mul_complex


def run(n=64, repeat=20, seed=0):
    rng = np.random.default_rng(seed)
    shape = (n, n, n)
    u0 = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    phi = rng.normal(size=shape)
    m = rng.uniform(size=shape)
    b = np.exp(1j * rng.uniform(size=shape))
    out = np.empty(shape)
    grid = make_grid(n, 8.0)
    x2 = grid.radius2()
    field = Field(grid, np.exp(-x2) * (1 + 0.1j))
    p = PhysParams(-1.0, 0.1)
    saved = (kernels.nonlinear_phase, kernels.abs2, kernels.mul_real, kernels.mul_complex)
    results = {}
    steps = {}
    try:
        for name, mod in kernels.backends().items():
            _use(mod)
            u = u0.copy()
            a = u0.copy()
            results[name] = {
                "nonlinear_phase": _time(lambda: mod.nonlinear_phase(u, phi, -1.0, 0.1, 1e-3), repeat),
                "abs2": _time(lambda: mod.abs2(u0, out), repeat),
                "mul_real": _time(lambda: mod.mul_real(a, m), repeat),
                "mul_complex": _time(lambda: mod.mul_complex(a, b), repeat),
                "strang_step": _time(lambda: strang_step(field, p, 1e-3), max(3, repeat // 4)),
            }
            steps[name] = strang_step(field, p, 1e-3).values
    finally:
        (kernels.nonlinear_phase, kernels.abs2, kernels.mul_real, kernels.mul_complex) = saved
    report = {"n": n, "seconds": results}
    if len(steps) == 2:
        report["step_max_abs_diff"] = float(np.max(np.abs(steps["cython"] - steps["python"])))
        report["speedup"] = {k: results["python"][k] / results["cython"][k] for k in results["python"]}
    return report


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=64)
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--json", action="store_true", help="print the raw report as JSON")
    args = ap.parse_args()
    rep = run(args.n, args.repeat)
    if args.json:
        print(json.dumps(rep, indent=2, sort_keys=True))
        return
    names = sorted(rep["seconds"])
    print(f"grid {args.n}^3, best of {args.repeat}")
    print(f"{'kernel':<16}" + "".join(f"{nm:>12}" for nm in names) + ("     speedup" if "speedup" in rep else ""))
    for k in rep["seconds"][names[0]]:
        row = f"{k:<16}" + "".join(f"{rep['seconds'][nm][k] * 1e3:>10.2f}ms" for nm in names)
        if "speedup" in rep:
            row += f"{rep['speedup'][k]:>11.2f}x"
        print(row)
    if "step_max_abs_diff" in rep:
        print(f"max |step(cython) - step(python)| = {rep['step_max_abs_diff']:.2e}")


if __name__ == "__main__":
    main()
