"""Reference solver for small cone programs, used to cross-check the main one.

Deliberately a different algorithm family: pure LPs are solved by vertex
enumeration over the constraint rows plus a large bounding box, programs with
second-order blocks by a sequential quadratic programming method from scipy
with analytic jacobians.  Accuracy target is 1e-5; programs with more than
``MAX_DIM`` columns are refused.
"""

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from .errors import OracleInconclusive, OracleSizeError

__all__ = ["OracleResult", "oracle_solve", "MAX_DIM"]

MAX_DIM = 50
BOX = 1e6
_MAX_BASES = 200000


@dataclass
class OracleResult:
    status: str  # "optimal", "infeasible", "unbounded"
    value: Optional[float]
    x: Optional[np.ndarray]


def _split_rows(prog):
    A = prog.dense_A()
    z = prog.cones.zero
    nn = z + prog.cones.nonneg
    eq = (A[:z], prog.b[:z])
    ineq = (A[z:nn], prog.b[z:nn])
    soc = []
    off = nn
    for d in prog.cones.soc:
        soc.append((A[off : off + d], prog.b[off : off + d]))
        off += d
    return eq, ineq, soc


def _solve_lp(c, A_eq, b_eq, A_in, b_in):
    """Enumerate vertices of the boxed feasible polytope, keep the best."""
    n = c.shape[0]
    if A_eq.shape[0] > n:
        # overdetermined equalities: consistent systems collapse to a point
        x, res, rank, _ = np.linalg.lstsq(A_eq, b_eq, rcond=None)
        if np.linalg.norm(A_eq @ x - b_eq) > 1e-7 * (1.0 + np.linalg.norm(b_eq)):
            return OracleResult("infeasible", None, None)
        if rank < n:
            raise OracleInconclusive(
                "overdetermined but rank-deficient equality system"
            )
        if np.all(A_in @ x <= b_in + 1e-7 * (1.0 + np.abs(b_in))):
            return OracleResult("optimal", float(c @ x), x)
        return OracleResult("infeasible", None, None)

    box_rows = np.vstack([np.eye(n), -np.eye(n)])
    box_rhs = np.full(2 * n, BOX)
    G = np.vstack([A_in, box_rows])
    h = np.concatenate([b_in, box_rhs])
    k = n - A_eq.shape[0]
    if math.comb(G.shape[0], k) > _MAX_BASES:
        raise OracleSizeError(
            f"vertex enumeration over {G.shape[0]} rows choose {k} is too large"
        )
    feas_tol = 1e-9 * (1.0 + np.abs(h))
    eq_tol = 1e-9 * (1.0 + np.abs(b_eq)) if b_eq.size else None
    best_val = None
    best_x = None
    best_on_box = False
    for subset in itertools.combinations(range(G.shape[0]), k):
        rows = np.vstack([A_eq, G[list(subset)]]) if k else A_eq
        rhs = np.concatenate([b_eq, h[list(subset)]]) if k else b_eq
        try:
            x = np.linalg.solve(rows, rhs)
        except np.linalg.LinAlgError:
            continue
        if not np.all(np.isfinite(x)):
            continue
        if eq_tol is not None and np.any(np.abs(A_eq @ x - b_eq) > eq_tol):
            continue
        if np.any(G @ x - h > feas_tol):
            continue
        val = float(c @ x)
        if best_val is None or val < best_val - 1e-12:
            best_val = val
            best_x = x
            best_on_box = bool(np.any(np.abs(x) >= BOX * (1.0 - 1e-9)))
    if best_val is None:
        return OracleResult("infeasible", None, None)
    if best_on_box:
        return OracleResult("unbounded", None, None)
    return OracleResult("optimal", best_val, best_x)


def _solve_soc(c, A_eq, b_eq, A_in, b_in, soc_blocks, rng):
    """Sequential quadratic programming over the smooth reformulation."""
    n = c.shape[0]
    cons = []
    if A_eq.shape[0]:
        cons.append(
            dict(type="eq", fun=lambda x: b_eq - A_eq @ x, jac=lambda x: -A_eq)
        )
    if A_in.shape[0]:
        cons.append(
            dict(type="ineq", fun=lambda x: b_in - A_in @ x, jac=lambda x: -A_in)
        )
    for A_s, b_s in soc_blocks:
        def make(A_s=A_s, b_s=b_s):
            At, Av = A_s[0], A_s[1:]
            bt, bv = b_s[0], b_s[1:]

            def fun(x):
                v = bv - Av @ x
                return np.array([bt - At @ x - np.linalg.norm(v)])

            def jac(x):
                v = bv - Av @ x
                nv = max(np.linalg.norm(v), 1e-12)
                return (-At + Av.T @ (v / nv)).reshape(1, n)

            return dict(type="ineq", fun=fun, jac=jac)

        cons.append(make())

    def violation(x):
        worst = 0.0
        if A_eq.shape[0]:
            worst = max(worst, float(np.max(np.abs(A_eq @ x - b_eq))))
        if A_in.shape[0]:
            worst = max(worst, float(np.max(A_in @ x - b_in)))
        for A_s, b_s in soc_blocks:
            s = b_s - A_s @ x
            worst = max(worst, float(np.linalg.norm(s[1:]) - s[0]))
        return worst

    starts = [np.zeros(n)]
    if A_eq.shape[0]:
        x0, *_ = np.linalg.lstsq(A_eq, b_eq, rcond=None)
        starts.append(x0)
    starts.append(rng.standard_normal(n))
    best = None
    for x0 in starts:
        res = minimize(
            lambda x: float(c @ x),
            x0,
            jac=lambda x: c,
            method="SLSQP",
            constraints=cons,
            options=dict(maxiter=1000, ftol=1e-12),
        )
        if not np.all(np.isfinite(res.x)):
            continue
        if violation(res.x) > 1e-6:
            continue
        val = float(c @ res.x)
        if best is None or val < best[0]:
            best = (val, res.x.copy())
    if best is None:
        raise OracleInconclusive("no start converged to a feasible point")
    return OracleResult("optimal", best[0], best[1])


def oracle_solve(prog):
    """Solve a small cone program by an independent method.

    :raises OracleSizeError: more than ``MAX_DIM`` columns, or an LP whose
        vertex enumeration would be too combinatorial.
    :raises OracleInconclusive: the method could not certify an answer.
    """
    n = prog.n
    if n > MAX_DIM:
        raise OracleSizeError(f"{n} columns exceeds the oracle cap of {MAX_DIM}")
    if n == 0:
        return OracleResult("optimal", 0.0, np.zeros(0))
    (A_eq, b_eq), (A_in, b_in), soc_blocks = _split_rows(prog)
    if not soc_blocks:
        return _solve_lp(prog.c, A_eq, b_eq, A_in, b_in)
    rng = np.random.default_rng(0)
    return _solve_soc(prog.c, A_eq, b_eq, A_in, b_in, soc_blocks, rng)
