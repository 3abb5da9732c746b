"""Expression DAGs over variables, signed parameters, and constants.

Expressions are immutable nodes: three leaf kinds (:class:`Variable`,
:class:`Parameter`, :class:`Constant`) and :class:`AtomExpr` nodes drawn from
a closed atom set.  Every node carries a shape ``(rows, cols)`` with
``rows >= 1`` and ``cols >= 1``; scalars are ``(1, 1)`` and vectors are
column-shaped ``(n, 1)``.  Variables and parameters are restricted to scalars
and column vectors.  Constants may be matrices, which exist only as scale
factors or inside constant-only subtrees; every atom result is scalar or
column shaped.

Nodes are built through :func:`apply_atom`, which validates arity and shapes
eagerly so malformed trees cannot be constructed.  Operator sugar (``+``,
``-``, ``*``, unary ``-``, ``abs()``, indexing, and comparisons) lowers to the
same constructors.  ``==``, ``<=`` and ``>=`` produce :class:`Constraint`
records, so expression equality is intentionally identity-based.
"""

import itertools
import numbers

import numpy as np

from .errors import (
    ArityError,
    MissingBinding,
    NonAffineProduct,
    ShapeMismatch,
    SignViolation,
    UnsupportedShape,
)
from .lattice import Sign

__all__ = [
    "Expression",
    "Variable",
    "Parameter",
    "Constant",
    "AtomExpr",
    "Constraint",
    "ATOMS",
    "apply_atom",
    "as_expression",
    "evaluate",
    "substitute_parameters",
    "iter_nodes",
    "variables_of",
    "parameters_of",
    "format_expression",
]

# Shared counter so variable and parameter ids never collide.  CPython's
# itertools.count.__next__ is atomic under the GIL, which is the only
# concurrency this module needs.
_leaf_ids = itertools.count()


def _check_vector_shape(shape, what):
    rows, cols = shape
    if not (isinstance(rows, int) and isinstance(cols, int)):
        raise UnsupportedShape(f"{what} shape must be integer, got {shape!r}")
    if rows < 1 or cols < 1:
        raise UnsupportedShape(f"{what} shape must be at least (1, 1), got {shape!r}")
    if cols != 1:
        raise UnsupportedShape(
            f"{what} must be a scalar or column vector, got shape {shape!r}"
        )
    return rows, cols


def _as_shape(arg):
    """Accept an int n (meaning (n, 1)), None (scalar), or a (rows, cols) pair."""
    if arg is None:
        return (1, 1)
    if isinstance(arg, (int, np.integer)):
        return (int(arg), 1)
    rows, cols = arg
    return (int(rows), int(cols))


class Expression:
    """Base class for all expression nodes."""

    __slots__ = ("shape",)

    @property
    def rows(self):
        return self.shape[0]

    @property
    def cols(self):
        return self.shape[1]

    @property
    def size(self):
        return self.shape[0] * self.shape[1]

    @property
    def is_scalar(self):
        return self.shape == (1, 1)

    # -- operator sugar ----------------------------------------------------

    def __add__(self, other):
        return apply_atom("add", (self, other))

    def __radd__(self, other):
        return apply_atom("add", (other, self))

    def __sub__(self, other):
        return apply_atom("add", (self, apply_atom("negate", (other,))))

    def __rsub__(self, other):
        return apply_atom("add", (other, apply_atom("negate", (self,))))

    def __neg__(self):
        return apply_atom("negate", (self,))

    def __mul__(self, other):
        return _make_scale(self, other)

    def __rmul__(self, other):
        return _make_scale(other, self)

    def __abs__(self):
        return apply_atom("abs", (self,))

    def __getitem__(self, i):
        if not isinstance(i, (int, np.integer)):
            raise UnsupportedShape("only single integer indexing is supported")
        return apply_atom("index", (self,), data=int(i))

    # Comparisons build constraints, so hashing is identity-based.

    def __eq__(self, other):
        return Constraint(self, "==", other)

    def __le__(self, other):
        return Constraint(self, "<=", other)

    def __ge__(self, other):
        return Constraint(as_expression(other), "<=", self)

    def __lt__(self, other):
        raise TypeError("strict inequalities are not supported; use <= or >=")

    __gt__ = __lt__

    def __hash__(self):
        return id(self)

    def __repr__(self):
        return f"<{type(self).__name__} {format_expression(self)} shape={self.shape}>"

    def __str__(self):
        return format_expression(self)


class Variable(Expression):
    """Optimization variable, scalar or column vector.

    :param shape: ``None`` for a scalar, an int ``n`` for an ``(n, 1)``
        vector, or an explicit ``(rows, 1)`` pair.
    :param name: Optional display name used by printers and reports.
    """

    __slots__ = ("id", "name", "__weakref__")

    def __init__(self, shape=None, name=None):
        self.shape = _check_vector_shape(_as_shape(shape), "variable")
        self.id = next(_leaf_ids)
        self.name = name

    def __hash__(self):
        return id(self)


_PARAM_SIGNS = {
    "unknown": Sign.UNKNOWN,
    "nonneg": Sign.NONNEG,
    "positive": Sign.NONNEG,
    "nonpos": Sign.NONPOS,
    "negative": Sign.NONPOS,
    "zero": Sign.ZERO,
}


class Parameter(Expression):
    """Named constant whose value is supplied at solve time.

    The declared sign (``"nonneg"``, ``"nonpos"``, ``"zero"`` or
    ``"unknown"``; ``"positive"``/``"negative"`` are accepted aliases for the
    weak versions) participates in convexity analysis, and bound values are
    checked against it.
    """

    __slots__ = ("id", "name", "sign", "__weakref__")

    def __init__(self, shape=None, sign="unknown", name=None):
        self.shape = _check_vector_shape(_as_shape(shape), "parameter")
        if isinstance(sign, Sign):
            self.sign = sign
        else:
            try:
                self.sign = _PARAM_SIGNS[sign]
            except KeyError:
                raise ValueError(f"unknown parameter sign {sign!r}") from None
        self.id = next(_leaf_ids)
        self.name = name

    def __hash__(self):
        return id(self)


def _constant_sign(value):
    if np.all(value == 0.0):
        return Sign.ZERO
    if np.all(value >= 0.0):
        return Sign.NONNEG
    if np.all(value <= 0.0):
        return Sign.NONPOS
    return Sign.UNKNOWN


class Constant(Expression):
    """Numeric leaf; the only node kind that may be matrix shaped.

    Values are normalized to float64 arrays: scalars become ``(1, 1)``,
    one-dimensional sequences become column vectors, and nested sequences or
    2-D arrays keep their matrix shape.
    """

    __slots__ = ("value", "sign", "name", "__weakref__")

    def __init__(self, value, name=None):
        arr = np.asarray(value, dtype=float)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        elif arr.ndim != 2:
            raise UnsupportedShape(
                f"constants must be at most 2-D, got {arr.ndim}-D data"
            )
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise UnsupportedShape(f"empty constant of shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("constant values must be finite")
        self.value = np.ascontiguousarray(arr)
        self.value.flags.writeable = False
        self.shape = self.value.shape
        self.sign = _constant_sign(self.value)
        self.name = name

    def __hash__(self):
        return id(self)


class AtomExpr(Expression):
    """Interior node: an atom applied to argument expressions.

    ``data`` carries the extra non-expression argument of an atom (the
    position for ``index``); it is ``None`` for every other kind.
    """

    __slots__ = ("kind", "args", "data", "__weakref__")

    def __init__(self, kind, args, shape, data=None):
        self.kind = kind
        self.args = tuple(args)
        self.data = data
        self.shape = shape

    def __hash__(self):
        return id(self)


class Constraint:
    """Relation between two expressions, normalized to ``==`` or ``<=``.

    ``lhs >= rhs`` is stored as ``rhs <= lhs`` at construction.  Shapes must
    match exactly or one side must be scalar.  Constraints have no truth
    value; chained comparisons like ``0 <= x <= 1`` raise instead of silently
    misbehaving.
    """

    __slots__ = ("lhs", "rel", "rhs")

    def __init__(self, lhs, rel, rhs):
        lhs = as_expression(lhs)
        rhs = as_expression(rhs)
        if rel not in ("==", "<="):
            raise ValueError(f"unknown constraint relation {rel!r}")
        if lhs.shape != rhs.shape and not (lhs.is_scalar or rhs.is_scalar):
            raise ShapeMismatch(
                f"constraint sides have shapes {lhs.shape} and {rhs.shape}"
            )
        if lhs.cols != 1 or rhs.cols != 1:
            raise UnsupportedShape("constraint sides must be scalars or vectors")
        self.lhs = lhs
        self.rel = rel
        self.rhs = rhs

    @property
    def rows(self):
        return max(self.lhs.rows, self.rhs.rows)

    def __bool__(self):
        raise TypeError(
            "a constraint has no truth value; build constraints one relation "
            "at a time (chained comparisons like 0 <= x <= 1 are ambiguous)"
        )

    def __repr__(self):
        return f"<Constraint {self}>"

    def __str__(self):
        return f"{format_expression(self.lhs)} {self.rel} {format_expression(self.rhs)}"


def as_expression(obj):
    """Wrap numbers and array-likes as :class:`Constant`; pass expressions through."""
    if isinstance(obj, Expression):
        return obj
    if isinstance(obj, Constraint):
        raise TypeError("cannot use a constraint where an expression is expected")
    if isinstance(obj, (numbers.Number, list, tuple, np.ndarray)):
        return Constant(obj)
    raise TypeError(f"cannot interpret {type(obj).__name__} as an expression")


# ---------------------------------------------------------------------------
# Atom metadata
# ---------------------------------------------------------------------------


class AtomMeta:
    """Static description of one atom kind.

    :param curvature_class: ``"affine"``, ``"convex"`` or ``"concave"``.
    :param min_args / max_args: arity bounds (``max_args=None`` is unbounded).
    :param shape_rule: callable ``(args, data) -> (rows, cols)``.
    :param eval_rule: callable ``(values, data) -> ndarray`` implementing the
        atom on numeric arguments.
    """

    __slots__ = ("name", "curvature_class", "min_args", "max_args", "shape_rule", "eval_rule")

    def __init__(self, name, curvature_class, min_args, max_args, shape_rule, eval_rule):
        self.name = name
        self.curvature_class = curvature_class
        self.min_args = min_args
        self.max_args = max_args
        self.shape_rule = shape_rule
        self.eval_rule = eval_rule


def _is_constant_only(expr):
    """True if no variable or parameter is reachable from expr."""
    return not any(
        isinstance(node, (Variable, Parameter)) for node in iter_nodes(expr)
    )


def _broadcast_shape(args, what):
    """Common shape for elementwise n-ary atoms: scalars broadcast, vectors must agree."""
    rows = 1
    for a in args:
        if a.cols != 1:
            raise UnsupportedShape(f"{what} arguments must be scalars or vectors")
        if a.rows != 1:
            if rows != 1 and a.rows != rows:
                raise ShapeMismatch(
                    f"{what} arguments have incompatible lengths {rows} and {a.rows}"
                )
            rows = a.rows
    return (rows, 1)


def _shape_elementwise(args, data):
    return _broadcast_shape(args, "elementwise")


def _shape_same(args, data):
    a = args[0]
    if a.cols != 1:
        raise UnsupportedShape("argument must be a scalar or column vector")
    return a.shape


def _shape_scalar(args, data):
    return (1, 1)


def _shape_index(args, data):
    (a,) = args
    if a.cols != 1:
        raise UnsupportedShape("indexing applies to scalars and column vectors only")
    if not isinstance(data, int):
        raise TypeError("index position must be an int")
    if not (0 <= data < a.rows):
        raise IndexError(f"index {data} out of range for length {a.rows}")
    return (1, 1)


def _shape_scale(args, data):
    factor, operand = args
    if not isinstance(factor, (Constant, Parameter)):
        raise NonAffineProduct(
            "the scaling factor must be a constant or parameter leaf"
        )
    if isinstance(factor, Parameter) and any(
        isinstance(node, Parameter) for node in iter_nodes(operand)
    ):
        raise NonAffineProduct(
            "parameter-by-parameter products are not affine in the parameters"
        )
    if operand.cols != 1:
        raise UnsupportedShape("the scaled operand must be a scalar or column vector")
    p, q = factor.shape
    if factor.is_scalar:
        return operand.shape
    if operand.is_scalar:
        # column (or matrix) factor times scalar operand scales every entry
        return (p, q) if q == 1 else (p, q)
    if q != operand.rows:
        raise ShapeMismatch(
            f"cannot multiply factor of shape {factor.shape} with operand of "
            f"shape {operand.shape}"
        )
    return (p, 1)


def _eval_add(values, data):
    out = values[0]
    for v in values[1:]:
        out = out + v
    return out


def _eval_scale(values, data):
    f, x = values
    if f.shape == (1, 1):
        return f[0, 0] * x
    if x.shape == (1, 1):
        return f * x[0, 0]
    return f @ x


def _eval_maximum(values, data):
    out = values[0]
    for v in values[1:]:
        out = np.maximum(out, v)
    return out


def _eval_minimum(values, data):
    out = values[0]
    for v in values[1:]:
        out = np.minimum(out, v)
    return out


ATOMS = {
    "add": AtomMeta("add", "affine", 2, None, _shape_elementwise, _eval_add),
    "negate": AtomMeta("negate", "affine", 1, 1, _shape_same, lambda v, d: -v[0]),
    "scale": AtomMeta("scale", "affine", 2, 2, _shape_scale, _eval_scale),
    "sum": AtomMeta("sum", "affine", 1, 1, _shape_scalar,
                    lambda v, d: np.sum(v[0]).reshape(1, 1)),
    "index": AtomMeta("index", "affine", 1, 1, _shape_index,
                      lambda v, d: v[0][d].reshape(1, 1)),
    "abs": AtomMeta("abs", "convex", 1, 1, _shape_same, lambda v, d: np.abs(v[0])),
    "square": AtomMeta("square", "convex", 1, 1, _shape_same,
                       lambda v, d: v[0] * v[0]),
    "sum_squares": AtomMeta("sum_squares", "convex", 1, 1, _shape_scalar,
                            lambda v, d: np.sum(v[0] * v[0]).reshape(1, 1)),
    "norm1": AtomMeta("norm1", "convex", 1, 1, _shape_scalar,
                      lambda v, d: np.sum(np.abs(v[0])).reshape(1, 1)),
    "norm2": AtomMeta("norm2", "convex", 1, 1, _shape_scalar,
                      lambda v, d: np.linalg.norm(v[0].ravel()).reshape(1, 1)),
    "norm_inf": AtomMeta("norm_inf", "convex", 1, 1, _shape_scalar,
                         lambda v, d: np.max(np.abs(v[0])).reshape(1, 1)),
    "pos": AtomMeta("pos", "convex", 1, 1, _shape_same,
                    lambda v, d: np.maximum(v[0], 0.0)),
    "maximum": AtomMeta("maximum", "convex", 2, None, _shape_elementwise,
                        _eval_maximum),
    "minimum": AtomMeta("minimum", "concave", 2, None, _shape_elementwise,
                        _eval_minimum),
}


def apply_atom(kind, args, data=None):
    """Build an atom node, validating arity and shapes.

    Nested ``add`` arguments are spliced into a single n-ary ``add`` so that
    different grouping of the same sum yields the identical tree.

    :raises ArityError: wrong argument count.
    :raises ShapeMismatch / UnsupportedShape: incompatible operand shapes.
    :raises NonAffineProduct: product without a constant or parameter factor.
    """
    try:
        meta = ATOMS[kind]
    except KeyError:
        raise ValueError(f"unknown atom {kind!r}") from None
    args = tuple(as_expression(a) for a in args)
    if kind == "add":
        flat = []
        for a in args:
            if isinstance(a, AtomExpr) and a.kind == "add":
                flat.extend(a.args)
            else:
                flat.append(a)
        args = tuple(flat)
    n = len(args)
    if n < meta.min_args or (meta.max_args is not None and n > meta.max_args):
        if meta.max_args is None:
            expect = f"at least {meta.min_args}"
        elif meta.min_args == meta.max_args:
            expect = str(meta.min_args)
        else:
            expect = f"{meta.min_args}..{meta.max_args}"
        raise ArityError(f"{kind} expects {expect} argument(s), got {n}")
    if kind != "index" and data is not None:
        raise TypeError(f"{kind} takes no extra data")
    shape = meta.shape_rule(args, data)
    if shape[1] != 1 and not all(_is_constant_only(a) for a in args):
        raise UnsupportedShape(
            f"{kind} would produce a matrix-shaped result {shape}; matrix "
            "values are only supported in constant subtrees"
        )
    return AtomExpr(kind, args, shape, data)


def _make_scale(a, b):
    ea = as_expression(a)
    eb = as_expression(b)
    a_leaf = isinstance(ea, (Constant, Parameter))
    b_leaf = isinstance(eb, (Constant, Parameter))
    if a_leaf:
        return apply_atom("scale", (ea, eb))
    if b_leaf:
        if not (eb.is_scalar or ea.is_scalar):
            raise ShapeMismatch(
                "a non-scalar factor must be written on the left of *"
            )
        return apply_atom("scale", (eb, ea))
    raise NonAffineProduct(
        "products need a constant or parameter factor; variable-by-variable "
        "products are not supported"
    )


# ---------------------------------------------------------------------------
# Traversal and evaluation
# ---------------------------------------------------------------------------


def iter_nodes(expr):
    """Yield each node of the DAG exactly once, children before parents."""
    seen = set()
    stack = [(expr, False)]
    while stack:
        node, expanded = stack.pop()
        if id(node) in seen:
            continue
        if expanded or not isinstance(node, AtomExpr):
            seen.add(id(node))
            yield node
        else:
            stack.append((node, True))
            for child in reversed(node.args):
                stack.append((child, False))


def variables_of(expr):
    """Unique variables reachable from expr, ordered by creation id."""
    out = [n for n in iter_nodes(expr) if isinstance(n, Variable)]
    return sorted(out, key=lambda v: v.id)


def parameters_of(expr):
    """Unique parameters reachable from expr, ordered by creation id."""
    out = [n for n in iter_nodes(expr) if isinstance(n, Parameter)]
    return sorted(out, key=lambda p: p.id)


def check_value(leaf, value):
    """Normalize a bound value to the leaf's shape and check its sign tag.

    :raises ShapeMismatch: value does not fit the declared shape.
    :raises SignViolation: parameter value contradicts its declared sign.
    """
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.shape != leaf.shape:
        name = leaf.name or f"leaf {leaf.id}"
        raise ShapeMismatch(
            f"value of shape {arr.shape} bound to {name} of shape {leaf.shape}"
        )
    if not np.all(np.isfinite(arr)):
        raise ValueError("bound values must be finite")
    if isinstance(leaf, Parameter):
        bad = (
            (leaf.sign is Sign.NONNEG and np.any(arr < 0.0))
            or (leaf.sign is Sign.NONPOS and np.any(arr > 0.0))
            or (leaf.sign is Sign.ZERO and np.any(arr != 0.0))
        )
        if bad:
            name = leaf.name or f"parameter {leaf.id}"
            raise SignViolation(
                f"value bound to {name} violates its declared sign "
                f"{leaf.sign.value}"
            )
    return arr


def normalize_binding(binding):
    """Turn a {leaf: value} or {leaf_id: value} mapping into {leaf_id: ndarray}.

    Shape and sign checks need the leaf itself, so id keys are only validated
    when the leaf appears in the expression being evaluated.
    """
    out = {}
    for key, value in (binding or {}).items():
        if isinstance(key, (Variable, Parameter)):
            out[key.id] = check_value(key, value)
        elif isinstance(key, (int, np.integer)):
            out[int(key)] = value
        else:
            raise TypeError(f"binding keys must be leaves or ids, got {type(key)!r}")
    return out


def evaluate(expr, binding=None):
    """Numerically evaluate an expression.

    :param binding: mapping from :class:`Variable`/:class:`Parameter` (or
        their ids) to values; every reachable variable and parameter must be
        bound.
    :returns: float64 array of the expression's shape.
    :raises MissingBinding: a reachable leaf has no value.
    """
    values = normalize_binding(binding)
    memo = {}
    for node in iter_nodes(expr):
        if isinstance(node, Constant):
            memo[id(node)] = node.value
        elif isinstance(node, (Variable, Parameter)):
            try:
                raw = values[node.id]
            except KeyError:
                name = node.name or f"id {node.id}"
                kind = "parameter" if isinstance(node, Parameter) else "variable"
                raise MissingBinding(f"no value bound for {kind} {name}") from None
            memo[id(node)] = check_value(node, raw)
        else:
            args = [memo[id(a)] for a in node.args]
            memo[id(node)] = np.asarray(
                ATOMS[node.kind].eval_rule(args, node.data), dtype=float
            )
    result = memo[id(expr)]
    return np.broadcast_to(result, expr.shape).astype(float, copy=True) \
        if result.shape != expr.shape else result


def substitute_parameters(expr, binding):
    """Replace parameter leaves with constants holding their bound values.

    Used to freeze a parametrized expression at a specific binding.  Shared
    structure is preserved; untouched subtrees are reused as-is.
    """
    values = normalize_binding(binding)
    memo = {}

    def rebuild(node):
        key = id(node)
        if key in memo:
            return memo[key]
        if isinstance(node, Parameter):
            try:
                raw = values[node.id]
            except KeyError:
                name = node.name or f"id {node.id}"
                raise MissingBinding(f"no value bound for parameter {name}") from None
            out = Constant(check_value(node, raw), name=node.name)
        elif isinstance(node, AtomExpr):
            new_args = [rebuild(a) for a in node.args]
            if all(na is a for na, a in zip(new_args, node.args)):
                out = node
            else:
                out = apply_atom(node.kind, new_args, data=node.data)
        else:
            out = node
        memo[key] = out
        return out

    return rebuild(expr)


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------


def _leaf_label(node):
    if node.name:
        return node.name
    if isinstance(node, Variable):
        return f"v{node.id}"
    if isinstance(node, Parameter):
        return f"p{node.id}"
    if node.is_scalar:
        return format(node.value[0, 0], "g")
    if node.cols == 1 and node.rows <= 4:
        body = ", ".join(format(v, "g") for v in node.value.ravel())
        return f"[{body}]"
    return f"const({node.rows}x{node.cols})"


# Operator precedence for parenthesization: addition binds loosest.
_PREC_ADD, _PREC_NEG, _PREC_MUL, _PREC_ATOM = 1, 2, 3, 4


def _fmt(node, parent_prec):
    if not isinstance(node, AtomExpr):
        return _leaf_label(node)
    kind = node.kind
    if kind == "add":
        parts = [_fmt(node.args[0], _PREC_ADD)]
        for a in node.args[1:]:
            if isinstance(a, AtomExpr) and a.kind == "negate":
                parts.append(" - " + _fmt(a.args[0], _PREC_NEG))
            else:
                parts.append(" + " + _fmt(a, _PREC_ADD))
        text = "".join(parts)
        return f"({text})" if parent_prec > _PREC_ADD else text
    if kind == "negate":
        text = "-" + _fmt(node.args[0], _PREC_NEG)
        return f"({text})" if parent_prec > _PREC_NEG else text
    if kind == "scale":
        text = _fmt(node.args[0], _PREC_MUL) + " * " + _fmt(node.args[1], _PREC_MUL)
        return f"({text})" if parent_prec > _PREC_MUL else text
    if kind == "index":
        return f"{_fmt(node.args[0], _PREC_ATOM)}[{node.data}]"
    inner = ", ".join(_fmt(a, _PREC_ADD) for a in node.args)
    return f"{kind}({inner})"


def format_expression(expr):
    """Render an expression as compact text (used by reports and reprs)."""
    if isinstance(expr, Constraint):
        return str(expr)
    return _fmt(as_expression(expr), _PREC_ADD)
