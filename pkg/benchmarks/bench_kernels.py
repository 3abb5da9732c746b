#!/usr/bin/env python3
"""Compare the compiled and pure-Python solver inner loops.

Builds a few cone programs of increasing size, solves each with both
implementations, checks that they agree on status and optimal value, and
reports wall time and iteration throughput.  The compiled loop and the
fallback walk the same iteration, so agreement is expected to be tight;
timing is where they differ.

Usage::

    python3 benchmarks/bench_kernels.py [--sizes 30,120] [--repeats 3]
"""

import argparse
import dataclasses
import sys
import time

import numpy as np

from coneprog import atoms
from coneprog._kernels import HAVE_COMPILED
from coneprog.canon import canonicalize
from coneprog.expressions import Constant, Variable
from coneprog.problem import Minimize, Problem
from coneprog.solver import SolverSettings, solve_cone


def build_cases(sizes, rng):
    """(name, ConeProgram) pairs; data is seeded so runs are repeatable."""
    cases = []
    for k in sizes:
        m = 2 * k

        A = Constant(rng.normal(size=(m, k)) / np.sqrt(m))
        b = Constant(rng.normal(size=m))
        x = Variable(k, name="x")
        obj = atoms.sum_squares(A * x - b) + 0.5 * atoms.norm1(x)
        cases.append((f"lasso[{k}]", Problem(Minimize(obj))))

        target = Constant(rng.uniform(-0.5, 1.5, size=k))
        x = Variable(k, name="x")
        prob = Problem(
            Minimize(atoms.sum_squares(x - target)), [x >= 0, x <= 1]
        )
        cases.append((f"box_qp[{k}]", prob))

        A = Constant(rng.normal(size=(m, k)) / np.sqrt(m))
        b = Constant(rng.normal(size=m))
        x = Variable(k, name="x")
        prob = Problem(Minimize(atoms.norm_inf(A * x - b)))
        cases.append((f"chebyshev[{k}]", prob))

        A = Constant(rng.normal(size=(m, k)) / np.sqrt(m))
        b = Constant(rng.normal(size=m))
        x = Variable(k, name="x")
        prob = Problem(Minimize(atoms.norm2(A * x - b)), [atoms.sum_(x) == 1])
        cases.append((f"least_norm[{k}]", prob))
    return [(name, canonicalize(prob).stuff({})) for name, prob in cases]


def run_case(prog, kernel, settings, repeats):
    best = float("inf")
    sol = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        sol = solve_cone(prog, dataclasses.replace(settings, kernel=kernel))
        best = min(best, time.perf_counter() - t0)
    return sol, best


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", default="30,120", help="comma list of variable counts")
    parser.add_argument("--repeats", type=int, default=3, help="timing repeats (best kept)")
    parser.add_argument("--max-iter", type=int, default=20000)
    parser.add_argument("--tol", type=float, default=1e-7)
    args = parser.parse_args(argv)

    kernels = ["python"] + (["compiled"] if HAVE_COMPILED else [])
    if not HAVE_COMPILED:
        print("note: compiled extension not present; timing the fallback only\n")

    settings = SolverSettings(
        eps_primal=args.tol, eps_dual=args.tol, eps_gap=args.tol,
        max_iters=args.max_iter,
    )
    sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    cases = build_cases(sizes, np.random.default_rng(0))

    header = f"{'case':<16}{'rows x cols':<14}{'kernel':<10}{'status':<11}" \
             f"{'value':>12}{'iters':>8}{'best ms':>10}{'kiter/s':>9}"
    print(header)
    print("-" * len(header))
    disagreements = 0
    speedups = []
    for name, prog in cases:
        shape = f"{prog.b.size} x {prog.c.size}"
        results = {}
        for kernel in kernels:
            sol, secs = run_case(prog, kernel, settings, args.repeats)
            results[kernel] = (sol, secs)
            rate = sol.iterations / secs / 1e3 if secs > 0 else float("inf")
            value = "-" if sol.value is None else f"{sol.value:12.5f}"
            print(
                f"{name:<16}{shape:<14}{kernel:<10}{sol.status:<11}"
                f"{value:>12}{sol.iterations:>8}{secs * 1e3:>10.2f}{rate:>9.1f}"
            )
        if len(results) == 2:
            a, ta = results["python"]
            b, tb = results["compiled"]
            same_status = a.status == b.status
            same_value = (
                a.value is None
                and b.value is None
                or a.value is not None
                and b.value is not None
                and np.isclose(a.value, b.value, rtol=1e-6, atol=1e-8)
            )
            if not (same_status and same_value):
                disagreements += 1
                print(f"  !! kernels disagree on {name}")
            if tb > 0:
                speedups.append(ta / tb)
    if speedups:
        print(
            f"\ncompiled speedup over python: min {min(speedups):.1f}x, "
            f"median {np.median(speedups):.1f}x, max {max(speedups):.1f}x "
            f"(best-of-{args.repeats} wall time)"
        )
    if disagreements:
        print(f"\n{disagreements} case(s) disagreed between kernels")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
