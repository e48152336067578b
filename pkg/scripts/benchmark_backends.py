#!/usr/bin/env python3
"""Benchmark the subproblem backends on representative scenario structures.

Measures build+solve wall time per convexified iterate for the direct
Clarabel lowering vs the cvxpy reference adapter (parameterized and plain),
and checks that optimal objectives agree.
"""

import argparse
import time

import numpy as np

from cranpool.conic import ClarabelBackend
from cranpool.dcp import build_subproblem, expansion_from_assignment
from cranpool.metrics import MODE_MULTIVARIATE, MODE_P2P
from cranpool.model import NetworkConfig, sample_channels
from cranpool.solver import CvxpyBackend, initialize_feasible


def bench(backend, sub_stream, n):
    times, objs = [], []
    for sub in sub_stream[:n]:
        t0 = time.perf_counter()
        asg = backend.solve(sub, 1e-8)
        times.append(time.perf_counter() - t0)
        objs.append(sub.objective.value(asg))
    return np.median(times), objs


def subproblem_stream(cfg, mode, n):
    """A realistic iterate sequence: successive expansions of one CCCP run."""
    ch = sample_channels(cfg, 11)
    exp = initialize_feasible(ch, cfg, mode=mode, seed=5)
    subs = []
    backend = ClarabelBackend()
    for _ in range(n):
        sub = build_subproblem(exp, ch, cfg, mode)
        subs.append(sub)
        asg = backend.solve(sub, 1e-8)
        exp = expansion_from_assignment(asg, cfg, mode, "optimized")
    return subs


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--iters", type=int, default=8)
    args = parser.parse_args()

    cases = [
        ("siso p2p", NetworkConfig.symmetric(snr_db=10.0).rescaled(1e6), MODE_P2P),
        ("siso multivariate", NetworkConfig.symmetric(snr_db=10.0).rescaled(1e6),
         MODE_MULTIVARIATE),
        ("2x2-antenna p2p",
         NetworkConfig.symmetric(n_ant_ru=2, n_ant_ue=2, snr_db=10.0).rescaled(1e6),
         MODE_P2P),
    ]
    backends = [
        ("clarabel-direct", lambda: ClarabelBackend()),
        ("cvxpy-parameterized", lambda: CvxpyBackend(parameterize=True)),
        ("cvxpy-plain", lambda: CvxpyBackend(parameterize=False)),
    ]
    for label, cfg, mode in cases:
        subs = subproblem_stream(cfg, mode, args.iters)
        print(f"\n{label} ({args.iters} iterates)")
        ref_objs = None
        for name, make in backends:
            med, objs = bench(make(), subs, args.iters)
            if ref_objs is None:
                ref_objs = objs
                drift = 0.0
            else:
                drift = max(abs(a - b) / max(abs(a), 1e-12)
                            for a, b in zip(ref_objs, objs))
            print(f"  {name:22s} median {med * 1e3:8.1f} ms/solve   "
                  f"max objective drift {drift:.1e}")


if __name__ == "__main__":
    main()
