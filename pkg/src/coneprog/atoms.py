"""Named constructors for the atom set.

Thin wrappers over :func:`coneprog.expressions.apply_atom`; the builtins
``abs(expr)`` and ``sum(list_of_exprs)`` also work through operator hooks.
"""

from .expressions import apply_atom

__all__ = [
    "abs_",
    "square",
    "sum_squares",
    "norm1",
    "norm2",
    "norm_inf",
    "pos",
    "maximum",
    "minimum",
    "sum_",
    "index",
    "negate",
    "scale",
]


def abs_(x):
    """Elementwise absolute value."""
    return apply_atom("abs", (x,))


def square(x):
    """Elementwise square."""
    return apply_atom("square", (x,))


def sum_squares(x):
    """Sum of squared entries."""
    return apply_atom("sum_squares", (x,))


def norm1(x):
    """Sum of absolute entries."""
    return apply_atom("norm1", (x,))


def norm2(x):
    """Euclidean norm of the entries."""
    return apply_atom("norm2", (x,))


def norm_inf(x):
    """Largest absolute entry."""
    return apply_atom("norm_inf", (x,))


def pos(x):
    """Elementwise positive part, max(x, 0)."""
    return apply_atom("pos", (x,))


def maximum(*args):
    """Elementwise maximum of two or more expressions."""
    return apply_atom("maximum", args)


def minimum(*args):
    """Elementwise minimum of two or more expressions."""
    return apply_atom("minimum", args)


def sum_(x):
    """Sum of all entries of a single expression."""
    return apply_atom("sum", (x,))


def index(x, i):
    """Single entry ``x[i]`` (zero-based)."""
    return apply_atom("index", (x,), data=int(i))


def negate(x):
    """Elementwise negation."""
    return apply_atom("negate", (x,))


def scale(factor, operand):
    """Product with a constant or parameter factor."""
    return apply_atom("scale", (factor, operand))
