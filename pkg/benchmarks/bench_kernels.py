"""Compare the compiled kernels with the NumPy fallback.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 5]

Times the three hot kernels directly, then a full GP fit on the 30 x 15 beam
dataset in a subprocess for each backend (the backend is fixed at import).
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from ptmoo._core import _pure

try:
    from ptmoo._core import _ckernels
except ImportError:
    _ckernels = None

FIT_SNIPPET = """
import time
from ptmoo import gp, BACKEND
from ptmoo.problems import beam_field_problem
from ptmoo.sampling import lhs_uniform
p = beam_field_problem()
X = lhs_uniform(p.space, 30, 0)
y = p.evaluate(X)[0][:, 1]
best = min(_time(lambda: gp.fit(X, y, gp.FitConfig(h={h}), bounds=p.space)) for _ in range({repeat}))
print(BACKEND, best)
"""

TIMER = """
def _time(f):
    t0 = time.perf_counter()
    f()
    return time.perf_counter() - t0
"""


def bench(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def kernel_cases(rng):
    X, Xq = rng.random((80, 15)), rng.random((200, 15))
    C1 = rng.uniform(0.1, 5.0, (1, 15))
    C3 = rng.uniform(0.1, 5.0, (3, 15))
    M = rng.standard_normal((80, 80))
    M = M + M.T
    F = rng.random((400, 2))
    return [
        ("cross_cov 200x80 d=15 gpr", lambda k: k.cross_cov(Xq, X, C1)),
        ("cross_cov 200x80 d=15 kpls_3", lambda k: k.cross_cov(Xq, X, C3)),
        ("lml_grad_terms 80 d=15 gpr", lambda k: k.lml_grad_terms(X, C1, M, False)),
        ("lml_grad_terms 80 d=15 kpls_3", lambda k: k.lml_grad_terms(X, C3, M, True)),
        ("nondominated_ranks 400x2", lambda k: k.nondominated_ranks(F)),
    ]


def fit_time(pure, h, repeat):
    env = dict(os.environ, PTMOO_PURE="1" if pure else "0")
    code = "import time\n" + TIMER + FIT_SNIPPET.format(h=h, repeat=repeat)
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True,
                         check=True).stdout.split()
    return out[0], float(out[1])


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    rng = np.random.default_rng(0)
    print(f"{'kernel':34s} {'numpy ms':>10s} {'cython ms':>10s} {'speedup':>8s}")
    for name, call in kernel_cases(rng):
        t_py = bench(lambda: call(_pure), args.repeat) * 1e3
        if _ckernels is None:
            print(f"{name:34s} {t_py:10.3f} {'n/a':>10s}")
            continue
        t_cy = bench(lambda: call(_ckernels), args.repeat) * 1e3
        print(f"{name:34s} {t_py:10.3f} {t_cy:10.3f} {t_py / t_cy:7.1f}x")
    print()
    for h in ("None", "3"):
        label = "gpr" if h == "None" else f"kpls_{h}"
        _, t_py = fit_time(True, h, max(1, args.repeat // 2))
        backend, t_cy = fit_time(False, h, max(1, args.repeat // 2))
        suffix = f"{t_py / t_cy:7.1f}x" if backend == "cython" else "(extension not built)"
        print(f"GP fit 30x15 beam {label:8s} numpy {t_py:7.3f}s  {backend} {t_cy:7.3f}s  {suffix}")


if __name__ == "__main__":
    main()
