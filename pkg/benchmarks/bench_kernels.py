"""Compare the numba kernels against the numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--repeat N] [--scenario PATH]

Part 1 times each kernel in-process (``*_nb`` vs ``*_py``) after a warm-up
call, so numba compilation is excluded. Part 2 runs ``reljacobi check`` end to
end in a fresh interpreter per backend, since the backend is fixed at import.
"""

import argparse
import os
import subprocess
import sys
import tempfile
import timeit
from pathlib import Path

import numpy as np

from reljacobi import _kernels as K

ROOT = Path(__file__).resolve().parents[1]


def _inputs(rng):
    n = 16  # two particles
    J = rng.normal(size=(n, n))
    J = J - J.T
    dJ = rng.normal(size=(n, n, n))
    dJ = dJ - dJ.transpose(1, 0, 2)
    idx = np.arange(4, dtype=np.int64)
    # metric data must respect the symmetries of a metric jet
    g_inv = rng.normal(size=(4, 4))
    g_inv = g_inv + g_inv.T
    dg = rng.normal(size=(4, 4, 4))
    dg = dg + dg.transpose(1, 0, 2)
    dg_inv = rng.normal(size=(4, 4, 4))
    dg_inv = dg_inv + dg_inv.transpose(1, 0, 2)
    d2g = rng.normal(size=(4, 4, 4, 4))
    d2g = d2g + d2g.transpose(1, 0, 2, 3)
    d2g = d2g + d2g.transpose(0, 1, 3, 2)
    gamma = rng.normal(size=(4, 4, 4))
    gamma = gamma + gamma.transpose(0, 2, 1)
    dgamma = rng.normal(size=(4, 4, 4, 4))
    dgamma = dgamma + dgamma.transpose(0, 2, 1, 3)
    A = rng.normal(size=(8, 8)) * 0.1
    z0 = rng.normal(size=8)
    return {
        "nested_cyclic": (J, dJ, idx, idx + 4, idx + 8),
        "christoffel": (g_inv, dg),
        "christoffel_grad": (g_inv, dg_inv, dg, d2g),
        "riemann": (gamma, dgamma),
        "rk4_linear": (A, z0, 1e-3, 1000),
    }


def bench_kernels(repeat):
    if not K.NUMBA_AVAILABLE:
        print("numba unavailable or disabled; kernel comparison skipped")
        return
    args = _inputs(np.random.default_rng(0))
    print(f"{'kernel':<18}{'numpy (us)':>14}{'numba (us)':>14}{'speedup':>10}")
    for name, a in args.items():
        py, nb = getattr(K, name + "_py"), getattr(K, name + "_nb")
        np.testing.assert_allclose(nb(*a), py(*a), rtol=1e-10, atol=1e-12)
        n = 200 if name != "rk4_linear" else 5
        t_py = min(timeit.repeat(lambda: py(*a), number=n, repeat=repeat)) / n * 1e6
        t_nb = min(timeit.repeat(lambda: nb(*a), number=n, repeat=repeat)) / n * 1e6
        print(f"{name:<18}{t_py:>14.2f}{t_nb:>14.2f}{t_py / t_nb:>9.1f}x")


def bench_end_to_end(scenario, repeat):
    print(f"\nend to end: reljacobi check {Path(scenario).name} (best of {repeat}, includes interpreter start)")
    with tempfile.TemporaryDirectory() as tmp:
        for label, flag in (("numpy", "1"), ("numba", "0")):
            env = dict(os.environ, RELJACOBI_DISABLE_NUMBA=flag)
            cmd = [sys.executable, "-m", "reljacobi.cli", "check", str(scenario),
                   "--out", str(Path(tmp) / "r.json"), "--quiet"]
            subprocess.run(cmd, env=env, check=True)  # warm the numba cache
            best = min(timeit.repeat(lambda: subprocess.run(cmd, env=env, check=True), number=1, repeat=repeat))
            print(f"  {label:<6} {best:8.3f} s")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--scenario", default=str(ROOT / "scenarios" / "curved_potential.json"))
    ns = ap.parse_args(argv)
    print(f"active backend: {K.BACKEND}")
    bench_kernels(ns.repeat)
    bench_end_to_end(ns.scenario, max(1, ns.repeat // 2))


if __name__ == "__main__":
    main()
