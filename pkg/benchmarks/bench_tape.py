"""Compiled tape versus the pure-Python fallback.

Each backend runs in its own interpreter because the choice is made at
import time (``DRHMC_PURE_PYTHON=1`` forces the fallback).

    python benchmarks/bench_tape.py [--repeat 200]
"""
import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from drhmc import autodiff as ad
from drhmc import linalg as la
from drhmc.models import dataset, funnel_model, lgssm_model
from drhmc.models.base import make_target

repeat = int(sys.argv[1])
rng = np.random.default_rng(0)


def clock(fn):
    fn()
    t = time.perf_counter()
    for _ in range(repeat):
        fn()
    return (time.perf_counter() - t) / repeat * 1e6


def scalar_chain():
    # many tiny nodes: per-node overhead dominates
    def f(x):
        y = x[0]
        for _ in range(200):
            y = ad.tanh(y * x[1] + 0.1)
        return y
    ad.value_and_grad(f, np.array([0.3, 0.9]))


v = np.full(1000, 4.0)
c = rng.normal(size=999) * 0.5


def tridiag():
    def f(x):
        fac = la.tridiag_chol(la.TriDiagSym(x, c))
        return fac.log_det + ad.sum(la.solve_LLT(fac, np.ones(1000)))
    ad.value_and_grad(f, v)


funnel = make_target(funnel_model(0.5), "drhmc")
lgssm = make_target(lgssm_model(3, dataset(1)), "drhmc")
zf = rng.normal(size=2)
zl = 0.3 * rng.normal(size=lgssm.dim)


def grad(t, z):
    def run():
        t.value_and_grad(z + 1e-12 * rng.normal())  # defeat the one-point cache
    return run


res = {
    "backend": ad.BACKEND,
    "scalar chain (400 nodes)": clock(scalar_chain),
    "tridiagonal Cholesky + solve, n=1000": clock(tridiag),
    "funnel gradient": clock(grad(funnel, zf)),
    "lgssm3 T=100 gradient": clock(grad(lgssm, zl)),
}
print(json.dumps(res))
"""


def run(pure, repeat):
    env = dict(os.environ)
    env.pop("DRHMC_PURE_PYTHON", None)
    if pure:
        env["DRHMC_PURE_PYTHON"] = "1"
    out = subprocess.run([sys.executable, "-c", WORKER, str(repeat)], env=env, check=True, capture_output=True, text=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=200)
    args = p.parse_args(argv)
    fast = run(False, args.repeat)
    slow = run(True, args.repeat)
    if fast["backend"] != "cython":
        print("compiled tape not built; both columns use the pure-Python backend")
    print(f"{'case':40s} {fast['backend']:>12s} {slow['backend']:>12s} {'speedup':>8s}")
    for key in fast:
        if key == "backend":
            continue
        print(f"{key:40s} {fast[key]:10.1f}us {slow[key]:10.1f}us {slow[key] / fast[key]:7.2f}x")


if __name__ == "__main__":
    main()
