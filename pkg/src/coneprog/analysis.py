"""Convexity verification over expression DAGs.

Curvature propagates through the standard composition rule: an atom's result
is the join of its own curvature class with each argument's curvature as
transformed by the atom's per-argument monotonicity.  Monotonicities may
depend on argument signs (``square`` is nondecreasing only where its argument
is nonnegative), which is what lets sign information certify compositions
like ``square(square(x))`` that the sign-blind rules cannot.

``use_signs=False`` drops inferred sign information: numeric constants keep
their computed signs (they are plain data), while variables, parameters and
atom results are treated as sign-unknown.  Any expression verified without
signs also verifies with them.
"""

from dataclasses import dataclass, field
from typing import Optional

from .expressions import (
    ATOMS,
    AtomExpr,
    Constant,
    Expression,
    Parameter,
    Variable,
    format_expression,
)
from .lattice import (
    Curvature,
    Monotonicity,
    Sign,
    curvature_at_most,
    curvature_join,
    curvature_neg,
    sign_add,
    sign_join_max,
    sign_join_min,
    sign_mul,
    sign_neg,
)

__all__ = [
    "Sign",
    "Curvature",
    "Monotonicity",
    "sign",
    "curvature",
    "monotonicity",
    "is_dcp",
    "DcpVerdict",
    "Offence",
]


# -- sign propagation --------------------------------------------------------


def _atom_sign(kind, arg_signs):
    if kind in ("abs", "square", "sum_squares", "norm1", "norm2", "norm_inf", "pos"):
        return Sign.NONNEG
    if kind == "negate":
        return sign_neg(arg_signs[0])
    if kind in ("sum", "index"):
        return arg_signs[0]
    if kind == "scale":
        return sign_mul(arg_signs[0], arg_signs[1])
    if kind == "add":
        out = arg_signs[0]
        for s in arg_signs[1:]:
            out = sign_add(out, s)
        return out
    if kind == "maximum":
        out = arg_signs[0]
        for s in arg_signs[1:]:
            out = sign_join_max(out, s)
        return out
    if kind == "minimum":
        out = arg_signs[0]
        for s in arg_signs[1:]:
            out = sign_join_min(out, s)
        return out
    raise ValueError(f"unknown atom {kind!r}")


def _sign_memo(expr, signed, memo):
    key = id(expr)
    if key in memo:
        return memo[key]
    if isinstance(expr, Constant):
        out = expr.sign
    elif isinstance(expr, Parameter):
        out = expr.sign if signed else Sign.UNKNOWN
    elif isinstance(expr, Variable):
        out = Sign.UNKNOWN
    else:
        arg_signs = [_sign_memo(a, signed, memo) for a in expr.args]
        out = _atom_sign(expr.kind, arg_signs) if signed else Sign.UNKNOWN
    memo[key] = out
    return out


def sign(expr, use_signs=True):
    """Best sign derivable for an expression.

    With ``use_signs=False`` only numeric constants contribute sign
    information; everything else reports UNKNOWN.
    """
    return _sign_memo(expr, use_signs, {})


# -- monotonicity ------------------------------------------------------------

_SIGN_SENSITIVE = ("abs", "square", "sum_squares", "norm1", "norm2", "norm_inf")


def _atom_monotonicity(kind, arg_index, arg_signs):
    """Monotonicity of one argument slot given all argument signs."""
    if kind in ("add", "sum", "index", "pos", "maximum", "minimum"):
        return Monotonicity.NONDECREASING
    if kind == "negate":
        return Monotonicity.NONINCREASING
    if kind in _SIGN_SENSITIVE:
        s = arg_signs[arg_index]
        if s in (Sign.NONNEG, Sign.ZERO):
            return Monotonicity.NONDECREASING
        if s is Sign.NONPOS:
            return Monotonicity.NONINCREASING
        return Monotonicity.NONMONOTONIC
    if kind == "scale":
        # a product is monotone in one factor according to the other's sign
        other = arg_signs[1 - arg_index]
        if other in (Sign.NONNEG, Sign.ZERO):
            return Monotonicity.NONDECREASING
        if other is Sign.NONPOS:
            return Monotonicity.NONINCREASING
        return Monotonicity.NONMONOTONIC
    raise ValueError(f"unknown atom {kind!r}")


def monotonicity(kind, arg_index, arg_sign):
    """Monotonicity of atom ``kind`` in argument ``arg_index``.

    ``arg_sign`` is the sign that drives the answer for that slot: the
    argument's own sign for the sign-sensitive elementwise atoms, and the
    scaling factor's sign when asking about ``scale``'s operand slot.
    """
    meta = ATOMS[kind]  # KeyError for unknown kinds
    n = meta.min_args if meta.max_args is None else meta.max_args
    if arg_index < 0 or (meta.max_args is not None and arg_index >= n):
        raise IndexError(f"{kind} has no argument {arg_index}")
    if kind == "scale":
        signs = [arg_sign, arg_sign]
    else:
        signs = [arg_sign] * max(arg_index + 1, meta.min_args)
    return _atom_monotonicity(kind, arg_index, signs)


# -- curvature ---------------------------------------------------------------

_CLASS_CURV = {
    "affine": Curvature.AFFINE,
    "convex": Curvature.CONVEX,
    "concave": Curvature.CONCAVE,
}


def _curvature_memo(expr, signed, sign_memo, memo):
    key = id(expr)
    if key in memo:
        return memo[key]
    if isinstance(expr, (Constant, Parameter)):
        out = Curvature.CONSTANT
    elif isinstance(expr, Variable):
        out = Curvature.AFFINE
    elif expr.kind == "scale" and (
        _sign_memo(expr.args[0], signed, sign_memo) is Sign.ZERO
    ):
        # a zero factor makes the whole product the zero constant
        out = Curvature.CONSTANT
    else:
        arg_curvs = [_curvature_memo(a, signed, sign_memo, memo) for a in expr.args]
        if all(c is Curvature.CONSTANT for c in arg_curvs):
            out = Curvature.CONSTANT
        else:
            arg_signs = [_sign_memo(a, signed, sign_memo) for a in expr.args]
            out = _CLASS_CURV[ATOMS[expr.kind].curvature_class]
            for i, ci in enumerate(arg_curvs):
                if ci is Curvature.CONSTANT:
                    continue
                mono = _atom_monotonicity(expr.kind, i, arg_signs)
                if mono is Monotonicity.NONDECREASING:
                    induced = ci
                elif mono is Monotonicity.NONINCREASING:
                    induced = curvature_neg(ci)
                else:
                    induced = (
                        Curvature.AFFINE
                        if ci is Curvature.AFFINE
                        else Curvature.UNKNOWN
                    )
                out = curvature_join(out, induced)
    memo[key] = out
    return out


def curvature(expr, use_signs=True):
    """Curvature of an expression under the composition rule.

    ``use_signs=False`` applies the sign-blind rules (see the module
    docstring); the signed verdict is always at least as precise.
    """
    return _curvature_memo(expr, use_signs, {}, {})


# -- problem verdicts ----------------------------------------------------------


@dataclass(frozen=True)
class Offence:
    """Location of the subexpression that breaks a curvature requirement.

    ``where`` names the containing slot (``"objective"`` or
    ``"constraint 2, left side"``); ``path`` is the child-index route from
    that slot's root expression down to the offending node.
    """

    where: str
    path: tuple
    node: Expression
    required: Curvature
    found: Curvature

    def __str__(self):
        route = "".join(f".args[{i}]" for i in self.path)
        return (
            f"{self.where}: needs {self.found.value} expression "
            f"'{format_expression(self.node)}' (at root{route}) to be "
            f"{self.required.value} or better"
        )


@dataclass(frozen=True)
class DcpVerdict:
    """Outcome of problem-level convexity verification."""

    compliant: bool
    use_signs: bool
    objective_curvature: Curvature
    constraint_curvatures: list = field(default_factory=list)
    offence: Optional[Offence] = None

    def __str__(self):
        mode = "signed" if self.use_signs else "sign-blind"
        if self.compliant:
            return f"problem follows the {mode} composition rules"
        return f"problem breaks the {mode} composition rules; {self.offence}"


def _deepest_unknown(root, signed):
    """Deepest node with UNKNOWN curvature, ties broken first-in-DFS-order.

    Returns ``(path, node)`` or ``None`` when the root itself is the only
    explanation (requirement violated without any UNKNOWN inside).
    """
    sign_memo, curv_memo = {}, {}
    _curvature_memo(root, signed, sign_memo, curv_memo)
    best = None  # (depth, order, path, node)
    order = 0
    stack = [(root, ())]
    while stack:
        node, path = stack.pop()
        if curv_memo.get(id(node)) is Curvature.UNKNOWN:
            cand = (len(path), -order, path, node)
            if best is None or (cand[0], cand[1]) > (best[0], best[1]):
                best = cand
        order += 1
        if isinstance(node, AtomExpr):
            for i in range(len(node.args) - 1, -1, -1):
                stack.append((node.args[i], path + (i,)))
    if best is None:
        return None
    return best[2], best[3]


def _check_slot(where, expr, required, signed, failures):
    curv = curvature(expr, signed)
    if curvature_at_most(curv, required):
        return curv
    found = _deepest_unknown(expr, signed)
    if found is None:
        offence = Offence(where, (), expr, required, curv)
    else:
        path, node = found
        offence = Offence(where, path, node, required, Curvature.UNKNOWN)
    failures.append(offence)
    return curv


def is_dcp(problem, use_signs=True):
    """Verify a problem against the composition rules.

    ``problem`` needs ``sense`` (``"minimize"``/``"maximize"``), a scalar
    ``objective`` expression, and ``constraints`` whose relations are
    normalized to ``==`` and ``<=``.  A minimized objective must be convex or
    better, a maximized one concave or better; both sides of an equality must
    be affine; for ``lhs <= rhs``, lhs must be convex and rhs concave (or
    better).  The verdict carries the first offending location in declaration
    order: objective first, then constraints left side before right.
    """
    failures = []
    obj_req = Curvature.CONVEX if problem.sense == "minimize" else Curvature.CONCAVE
    obj_curv = _check_slot("objective", problem.objective, obj_req, use_signs, failures)
    pairs = []
    for i, con in enumerate(problem.constraints):
        if con.rel == "==":
            lreq = rreq = Curvature.AFFINE
        else:
            lreq, rreq = Curvature.CONVEX, Curvature.CONCAVE
        lcurv = _check_slot(
            f"constraint {i}, left side", con.lhs, lreq, use_signs, failures
        )
        rcurv = _check_slot(
            f"constraint {i}, right side", con.rhs, rreq, use_signs, failures
        )
        pairs.append((lcurv, rcurv))
    return DcpVerdict(
        compliant=not failures,
        use_signs=use_signs,
        objective_curvature=obj_curv,
        constraint_curvatures=pairs,
        offence=failures[0] if failures else None,
    )
