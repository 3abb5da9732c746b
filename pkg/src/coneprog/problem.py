"""Problems: an objective with a sense, constraints, solve and sweep entry points.

A :class:`Problem` is immutable once built.  Its canonical template is
constructed lazily on first solve and cached; every later solve (including
every point of a parameter sweep) reuses the template and only re-stuffs
numeric values.  ``canon_count`` says how many times canonicalization
actually ran for this problem; it stays at one across a sweep.

Problems with the same sense support ``+``: objectives add, constraint lists
concatenate.  This is what makes composite models convenient to assemble
from per-component sub-problems, e.g. summing a cost term per device with
the coupling constraints declared alongside each device.
"""

import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

from .canon import canonicalize, recover_solution
from .errors import ConeprogError, MissingBinding, MixedSense, ShapeMismatch
from .expressions import (
    Constraint,
    Parameter,
    Variable,
    as_expression,
    check_value,
    parameters_of,
    variables_of,
)
from .solver import INACCURATE, OPTIMAL, SolverSettings, solve_cone

__all__ = [
    "Minimize",
    "Maximize",
    "Problem",
    "Solution",
    "SweepSpec",
    "build_problem",
    "add_problems",
    "sweep",
]


class Minimize:
    """Objective wrapper marking minimization."""

    sense = "minimize"

    def __init__(self, expr):
        self.expr = as_expression(expr)

    def __repr__(self):
        return f"Minimize({self.expr})"


class Maximize:
    """Objective wrapper marking maximization."""

    sense = "maximize"

    def __init__(self, expr):
        self.expr = as_expression(expr)

    def __repr__(self):
        return f"Maximize({self.expr})"


@dataclass
class Solution:
    """Outcome of one solve.

    ``status`` is one of ``optimal``, ``inaccurate``, ``infeasible``,
    ``unbounded`` or ``error``; ``value`` is the objective re-evaluated at
    the recovered variable values (None without a primal point); ``primal``
    maps variable ids to value arrays; ``duals`` holds one multiplier block
    per constraint in declaration order.
    """

    status: str
    value: Optional[float]
    primal: dict = field(default_factory=dict)
    duals: list = field(default_factory=list)
    iterations: int = 0
    res_primal: float = float("nan")
    res_dual: float = float("nan")
    res_gap: float = float("nan")
    binding: dict = field(default_factory=dict)
    error: Optional[str] = None

    def value_of(self, var):
        """Value array for a variable (or its id)."""
        vid = var.id if isinstance(var, Variable) else int(var)
        return self.primal[vid]


class Problem:
    """An objective plus constraints; supports ``+`` and caches its template."""

    def __init__(self, objective, constraints=()):
        if not isinstance(objective, (Minimize, Maximize)):
            raise TypeError("objective must be wrapped in Minimize or Maximize")
        if not objective.expr.is_scalar:
            raise ShapeMismatch(
                f"objective must be scalar, got shape {objective.expr.shape}"
            )
        cons = []
        for con in constraints:
            if not isinstance(con, Constraint):
                raise TypeError(
                    "constraints must be comparison results (==, <=, >=), "
                    f"got {type(con).__name__}"
                )
            cons.append(con)
        self.sense = objective.sense
        self.objective = objective.expr
        self.constraints = tuple(cons)
        self._template = None
        self._canon_count = 0
        self._lock = threading.Lock()

    # -- structure ---------------------------------------------------------

    def variables(self):
        """All variables reachable from the objective or constraints, by id."""
        seen = {}
        for v in variables_of(self.objective):
            seen[v.id] = v
        for con in self.constraints:
            for side in (con.lhs, con.rhs):
                for v in variables_of(side):
                    seen[v.id] = v
        return [seen[k] for k in sorted(seen)]

    def parameters(self):
        """All parameters reachable from the objective or constraints, by id."""
        seen = {}
        for p in parameters_of(self.objective):
            seen[p.id] = p
        for con in self.constraints:
            for side in (con.lhs, con.rhs):
                for p in parameters_of(side):
                    seen[p.id] = p
        return [seen[k] for k in sorted(seen)]

    # -- composition ---------------------------------------------------------

    def __add__(self, other):
        if not isinstance(other, Problem):
            return NotImplemented
        return add_problems(self, other)

    def __radd__(self, other):
        if other == 0:
            # lets builtin sum() fold a list of problems
            return self
        return NotImplemented

    # -- canonicalization ---------------------------------------------------

    def template(self):
        """The cached canonical template, building it on first use."""
        if self._template is None:
            with self._lock:
                if self._template is None:
                    built = canonicalize(self)
                    self._canon_count += 1
                    self._template = built
        return self._template

    @property
    def canon_count(self):
        """How many times canonicalization ran for this problem."""
        return self._canon_count

    @property
    def stuff_count(self):
        """How many cone programs were stuffed from the cached template."""
        return self._template.stuff_count if self._template is not None else 0

    # -- solving ------------------------------------------------------------

    def solve(self, binding=None, settings=None):
        """Canonicalize (cached), stuff the binding, run the solver, recover.

        :returns: a :class:`Solution`; infeasible and unbounded outcomes are
            statuses, not exceptions.
        """
        template = self.template()
        prog = template.stuff(binding)
        cone_sol = solve_cone(prog, settings)
        if cone_sol.status in (OPTIMAL, INACCURATE):
            rec = recover_solution(cone_sol, template, binding)
            return Solution(
                status=cone_sol.status,
                value=rec.objective,
                primal=rec.values,
                duals=rec.duals,
                iterations=cone_sol.iterations,
                res_primal=cone_sol.res_primal,
                res_dual=cone_sol.res_dual,
                res_gap=cone_sol.res_gap,
                binding=dict(binding or {}),
            )
        return Solution(
            status=cone_sol.status,
            value=None,
            iterations=cone_sol.iterations,
            res_primal=cone_sol.res_primal,
            res_dual=cone_sol.res_dual,
            res_gap=cone_sol.res_gap,
            binding=dict(binding or {}),
        )

    def sweep(self, spec, binding=None, settings=None):
        """Solve once per value of one parameter; see :func:`sweep`."""
        return sweep(self, spec, binding=binding, settings=settings)

    def __repr__(self):
        head = "Minimize" if self.sense == "minimize" else "Maximize"
        return f"<Problem {head}({self.objective}) with {len(self.constraints)} constraint(s)>"


def build_problem(objective, constraints=()):
    """Construct a problem; alias of the :class:`Problem` constructor."""
    return Problem(objective, constraints)


def add_problems(p, q):
    """Sum two problems: objectives add, constraints concatenate.

    Both must share the same sense; mixing raises :class:`MixedSense`.
    """
    if p.sense != q.sense:
        raise MixedSense(
            f"cannot add a {p.sense} problem and a {q.sense} problem"
        )
    wrapper = Minimize if p.sense == "minimize" else Maximize
    return Problem(
        wrapper(p.objective + q.objective),
        list(p.constraints) + list(q.constraints),
    )


@dataclass
class SweepSpec:
    """One-parameter sweep: the parameter, its values, and a worker count."""

    param: Parameter
    values: tuple
    workers: int = 1

    def __post_init__(self):
        if not isinstance(self.param, Parameter):
            raise TypeError("sweep target must be a Parameter")
        if not self.param.is_scalar:
            raise ShapeMismatch("sweeps run over scalar parameters only")
        self.values = tuple(float(v) for v in self.values)
        if not self.values:
            raise ValueError("sweep needs at least one value")
        if not (isinstance(self.workers, int) and self.workers >= 1):
            raise ValueError("workers must be a positive integer")


def sweep(problem, spec, binding=None, settings=None):
    """Solve a problem once per parameter value, reusing one template.

    Values are validated against the parameter's declared sign up front;
    solver failures at individual points are recorded in the corresponding
    :class:`Solution` (status ``error``) without aborting the rest.  Results
    come back in the order the values were given, whatever the worker count.
    """
    for v in spec.values:
        check_value(spec.param, v)
    base = dict(binding or {})
    needed = {p.id: p for p in problem.parameters()}
    needed.pop(spec.param.id, None)
    have = set()
    for key in base:
        have.add(key.id if isinstance(key, (Parameter, Variable)) else int(key))
    for pid, leaf in sorted(needed.items()):
        if pid not in have:
            name = leaf.name or f"id {pid}"
            raise MissingBinding(
                f"sweep binding is missing parameter {name}"
            )
    problem.template()  # build once, before workers fan out

    def run_one(value):
        point = dict(base)
        point[spec.param] = value
        try:
            return problem.solve(point, settings)
        except ConeprogError as exc:
            return Solution(
                status="error",
                value=None,
                binding=point,
                error=f"{type(exc).__name__}: {exc}",
            )

    if spec.workers == 1:
        return [run_one(v) for v in spec.values]
    with ThreadPoolExecutor(max_workers=spec.workers) as pool:
        futures = [pool.submit(run_one, v) for v in spec.values]
        return [f.result() for f in futures]
