"""First-order cone solver with infeasibility and unboundedness certificates.

Operator splitting on ``min c^T x + I_C(z)  s.t.  A x = z`` with
``C = b - K``: a once-factored regularized normal system drives the x-update,
the z-update is a Euclidean cone projection, and scaled dual iterates stay in
the dual cone by construction.  Residuals and certificates are inspected
every ``CHECK_INTERVAL`` iterations (the hot span in between runs inside a
kernel with no Python-level work).

Statuses: ``optimal``, ``infeasible``, ``unbounded``, and ``inaccurate``
when the iteration cap is hit first.  Certificates are normalized delta
iterates: for infeasibility a dual-cone direction ``yhat`` with
``A^T yhat ~ 0`` and ``b^T yhat < 0``; for unboundedness a primal direction
``xhat`` with ``-A xhat`` in the cone and ``c^T xhat < 0``; both must pass
their residual tests at ``CERT_EPS`` relative scale.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._kernels import get_kernel
from .errors import SolverError
from .projections import project_cone

__all__ = [
    "SolverSettings",
    "ConeSolution",
    "OPTIMAL",
    "INFEASIBLE",
    "UNBOUNDED",
    "INACCURATE",
    "residuals",
    "solve_cone",
]

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
INACCURATE = "inaccurate"

# x-update regularization, inspection cadence, certificate tolerance
SIGMA = 1e-6
CHECK_INTERVAL = 25
CERT_EPS = 1e-7


@dataclass
class SolverSettings:
    """Tolerances and iteration controls.

    ``eps_primal``, ``eps_dual`` and ``eps_gap`` bound the normalized
    residuals; ``alpha`` is the over-relaxation weight (0 < alpha < 2);
    ``rho`` the dual step size; ``kernel`` picks the inner-loop
    implementation ("auto", "compiled" or "python").
    """

    eps_primal: float = 1e-6
    eps_dual: float = 1e-6
    eps_gap: float = 1e-6
    max_iters: int = 100000
    alpha: float = 1.5
    rho: float = 1.0
    kernel: str = "auto"

    def __post_init__(self):
        if not (self.eps_primal > 0 and self.eps_dual > 0 and self.eps_gap > 0):
            raise ValueError("tolerances must be positive")
        if not (0.0 < self.alpha < 2.0):
            raise ValueError("alpha must lie strictly between 0 and 2")
        if not (isinstance(self.max_iters, int) and self.max_iters >= 1):
            raise ValueError("max_iters must be a positive integer")
        if not self.rho > 0:
            raise ValueError("rho must be positive")


@dataclass
class ConeSolution:
    """Solver outcome at the cone-program level."""

    status: str
    x: Optional[np.ndarray]
    s: Optional[np.ndarray]
    y: Optional[np.ndarray]
    value: Optional[float]
    iterations: int
    res_primal: float
    res_dual: float
    res_gap: float
    certificate: Optional[np.ndarray] = None
    kernel: str = ""


def residuals(prog, x, s, y):
    """Normalized primal, dual, and gap residuals at a candidate point."""
    A = prog.dense_A() if not isinstance(prog, _Workspace) else prog.A
    return _residuals(A, prog.c, prog.b, x, s, y)


def _residuals(A, c, b, x, s, y):
    pr = np.linalg.norm(A @ x + s - b) / (1.0 + np.linalg.norm(b))
    du = np.linalg.norm(A.T @ y + c) / (1.0 + np.linalg.norm(c))
    cx = float(c @ x)
    by = float(b @ y)
    gap = abs(cx + by) / (1.0 + abs(cx) + abs(by))
    return pr, du, gap


class _Workspace:
    __slots__ = ("A", "c", "b")

    def __init__(self, A, c, b):
        self.A, self.c, self.b = A, c, b


def _check_infeasible(A, b, cones, dy, scale_A, scale_b):
    ndy = np.linalg.norm(dy)
    if ndy <= 1e-12:
        return None
    yhat = dy / ndy
    if float(b @ yhat) > -CERT_EPS * scale_b:
        return None
    if np.linalg.norm(A.T @ yhat) > CERT_EPS * scale_A:
        return None
    if np.linalg.norm(yhat - project_cone(yhat, cones, dual=True)) > CERT_EPS:
        return None
    return yhat


def _check_unbounded(A, c, cones, dx, scale_A, scale_c):
    ndx = np.linalg.norm(dx)
    if ndx <= 1e-12:
        return None
    xhat = dx / ndx
    if float(c @ xhat) > -CERT_EPS * scale_c:
        return None
    minus_ax = -(A @ xhat)
    if np.linalg.norm(minus_ax - project_cone(minus_ax, cones)) > CERT_EPS * scale_A:
        return None
    return xhat


def solve_cone(prog, settings=None):
    """Solve a cone program.

    :param prog: a :class:`coneprog.canon.ConeProgram`.
    :param settings: a :class:`SolverSettings`; defaults apply when omitted.
    :returns: a :class:`ConeSolution`; never raises for infeasible or
        unbounded inputs, those are reported as statuses with certificates.
    """
    settings = settings or SolverSettings()
    kernel, kernel_name = get_kernel(settings.kernel)
    n = prog.n
    m = prog.m
    c = np.asarray(prog.c, dtype=float).copy()
    b = np.asarray(prog.b, dtype=float).copy()
    if c.shape != (n,) or b.shape != (m,):
        raise SolverError("program dimensions do not match c/b lengths")

    if n == 0:
        # nothing to decide; by convention the empty program is optimal at 0
        return ConeSolution(
            status=OPTIMAL,
            x=np.zeros(0),
            s=b.copy(),
            y=np.zeros(m),
            value=0.0,
            iterations=0,
            res_primal=0.0,
            res_dual=0.0,
            res_gap=0.0,
            kernel=kernel_name,
        )

    A = prog.dense_A()
    AT = np.ascontiguousarray(A.T)
    rho = settings.rho
    M = SIGMA * np.eye(n) + rho * (AT @ A)
    try:
        L = np.linalg.cholesky(M)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - M is PD by design
        raise SolverError(f"could not factor the x-update system: {exc}") from None

    soc_dims = np.asarray(prog.cones.soc, dtype=np.int64)
    zero_dim = prog.cones.zero
    nonneg_dim = prog.cones.nonneg
    scale_A = 1.0 + np.linalg.norm(A)
    scale_b = 1.0 + np.linalg.norm(b)
    scale_c = 1.0 + np.linalg.norm(c)

    x = np.zeros(n)
    z = np.zeros(m)
    y = np.zeros(m)
    x_mark = x.copy()
    y_mark = y.copy()

    iters = 0
    pr = du = gap = np.inf
    while iters < settings.max_iters:
        span = min(CHECK_INTERVAL, settings.max_iters - iters)
        kernel(
            L, A, AT, c, b, zero_dim, nonneg_dim, soc_dims,
            rho, SIGMA, settings.alpha, x, z, y, span,
        )
        iters += span
        if not np.all(np.isfinite(x)) or not np.all(np.isfinite(y)):
            raise SolverError("iterates diverged to non-finite values")
        s = b - z
        pr, du, gap = _residuals(A, c, b, x, s, y)
        if pr <= settings.eps_primal and du <= settings.eps_dual and gap <= settings.eps_gap:
            return ConeSolution(
                status=OPTIMAL, x=x, s=s, y=y, value=float(c @ x),
                iterations=iters, res_primal=pr, res_dual=du, res_gap=gap,
                kernel=kernel_name,
            )
        yhat = _check_infeasible(A, b, prog.cones, y - y_mark, scale_A, scale_b)
        if yhat is not None:
            return ConeSolution(
                status=INFEASIBLE, x=None, s=None, y=None, value=None,
                iterations=iters, res_primal=pr, res_dual=du, res_gap=gap,
                certificate=yhat, kernel=kernel_name,
            )
        xhat = _check_unbounded(A, c, prog.cones, x - x_mark, scale_A, scale_c)
        if xhat is not None:
            return ConeSolution(
                status=UNBOUNDED, x=None, s=None, y=None, value=None,
                iterations=iters, res_primal=pr, res_dual=du, res_gap=gap,
                certificate=xhat, kernel=kernel_name,
            )
        x_mark[:] = x
        y_mark[:] = y

    s = b - z
    return ConeSolution(
        status=INACCURATE, x=x, s=s, y=y, value=float(c @ x),
        iterations=iters, res_primal=pr, res_dual=du, res_gap=gap,
        kernel=kernel_name,
    )
