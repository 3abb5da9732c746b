"""Shared helpers for the test suite.

``ref_eval`` is an independent reference evaluator: plain recursion over the
tree with numpy formulas, no memoization and no shared code with the
library's evaluator beyond the node classes themselves.  Property tests
compare the two on random trees.

The random generators build expression trees that are valid by
construction.  They track which subtrees carry parameters so that products
stay affine in the parameters, mirroring what the modeling layer enforces.
"""

import numpy as np

from coneprog.expressions import (
    AtomExpr,
    Constant,
    Parameter,
    Variable,
    apply_atom,
)


def ref_eval(node, values):
    """Independent recursive evaluation; values maps leaf id to ndarray."""
    if isinstance(node, Constant):
        return node.value
    if isinstance(node, (Variable, Parameter)):
        out = np.asarray(values[node.id], dtype=float)
        if out.ndim == 0:
            out = out.reshape(1, 1)
        elif out.ndim == 1:
            out = out.reshape(-1, 1)
        return out
    assert isinstance(node, AtomExpr)
    args = [ref_eval(a, values) for a in node.args]
    kind = node.kind
    rows = max(a.shape[0] for a in args) if args else 1

    def up(a):
        return np.broadcast_to(a, (rows, 1)) if a.shape[0] != rows else a

    if kind == "add":
        return np.sum([up(a) for a in args], axis=0)
    if kind == "negate":
        return -args[0]
    if kind == "scale":
        lhs, rhs = args
        if lhs.shape == (1, 1) or rhs.shape == (1, 1):
            return lhs * rhs
        return lhs @ rhs
    if kind == "sum":
        return np.array([[args[0].sum()]])
    if kind == "index":
        return args[0][node.data : node.data + 1]
    if kind == "abs":
        return np.abs(args[0])
    if kind == "square":
        return args[0] ** 2
    if kind == "sum_squares":
        return np.array([[float((args[0] ** 2).sum())]])
    if kind == "norm1":
        return np.array([[float(np.abs(args[0]).sum())]])
    if kind == "norm2":
        return np.array([[float(np.sqrt((args[0] ** 2).sum()))]])
    if kind == "norm_inf":
        return np.array([[float(np.abs(args[0]).max())]])
    if kind == "pos":
        return np.maximum(args[0], 0.0)
    if kind == "maximum":
        return np.max(np.hstack([up(a) for a in args]), axis=1, keepdims=True)
    if kind == "minimum":
        return np.min(np.hstack([up(a) for a in args]), axis=1, keepdims=True)
    raise AssertionError(f"unhandled atom {kind}")


_PARAM_SIGNS = ("nonneg", "nonpos", "zero", "unknown")


def make_leaves(rng, n_vec=4):
    """A mixed bag of leaves: scalar/vector variables, signed parameters."""
    leaves = [
        Variable(name="s"),
        Variable(n_vec, name="v"),
        Parameter(sign=str(rng.choice(_PARAM_SIGNS)), name="p"),
        Parameter(n_vec, sign=str(rng.choice(_PARAM_SIGNS)), name="q"),
    ]
    return leaves


def _has_param(expr):
    from coneprog.expressions import parameters_of

    return bool(parameters_of(expr))


def random_affine(rng, leaves, depth, rows):
    """Random affine expression with the given row count (1 or vector)."""
    if depth <= 0 or rng.random() < 0.3:
        pool = [lf for lf in leaves if lf.rows in (1, rows)]
        pick = pool[rng.integers(len(pool))]
        if rng.random() < 0.25:
            return Constant(np.round(rng.normal(size=(rows, 1)), 3))
        return pick
    roll = rng.random()
    if roll < 0.35:
        k = int(rng.integers(2, 4))
        return apply_atom(
            "add", [random_affine(rng, leaves, depth - 1, rows) for _ in range(k)]
        )
    if roll < 0.5:
        return -random_affine(rng, leaves, depth - 1, rows)
    if roll < 0.7:
        coef = float(np.round(rng.normal() + 0.1, 3))
        return Constant(coef) * random_affine(rng, leaves, depth - 1, rows)
    if roll < 0.8 and rows == 1:
        return apply_atom("sum", [random_affine(rng, leaves, depth - 1, 4)])
    if roll < 0.9 and rows == 1:
        inner = random_affine(rng, leaves, depth - 1, 4)
        return inner[int(rng.integers(inner.rows))]
    # parameter times a parameter-free affine subtree
    base = random_affine(rng, leaves, depth - 1, rows)
    if _has_param(base):
        return -base
    scalar_params = [
        lf for lf in leaves if isinstance(lf, Parameter) and lf.is_scalar
    ]
    return scalar_params[rng.integers(len(scalar_params))] * base


_ELEM = ("abs", "square", "pos", "negate")
_SCALARIZE = ("sum", "norm1", "norm2", "norm_inf", "sum_squares")


def random_tree(rng, leaves, depth, rows=1):
    """Random expression tree (any curvature) with the given row count."""
    if depth <= 0:
        return random_affine(rng, leaves, 1, rows)
    roll = rng.random()
    if roll < 0.25:
        return random_affine(rng, leaves, depth, rows)
    if roll < 0.45:
        kind = _ELEM[rng.integers(len(_ELEM))]
        arg = random_tree(rng, leaves, depth - 1, rows)
        return apply_atom(kind, [arg]) if kind != "negate" else -arg
    if roll < 0.6 and rows == 1:
        kind = _SCALARIZE[rng.integers(len(_SCALARIZE))]
        return apply_atom(kind, [random_tree(rng, leaves, depth - 1, 4)])
    if roll < 0.75:
        kind = "maximum" if rng.random() < 0.5 else "minimum"
        k = int(rng.integers(2, 4))
        return apply_atom(
            kind, [random_tree(rng, leaves, depth - 1, rows) for _ in range(k)]
        )
    if roll < 0.9:
        k = int(rng.integers(2, 4))
        return apply_atom(
            "add", [random_tree(rng, leaves, depth - 1, rows) for _ in range(k)]
        )
    coef = float(np.round(rng.normal() + 0.1, 3))
    return Constant(coef) * random_tree(rng, leaves, depth - 1, rows)


def signed_values(rng, leaf, scale=2.0):
    """Random values for one leaf, honoring a parameter's declared sign."""
    raw = rng.normal(scale=scale, size=(leaf.rows, 1))
    if isinstance(leaf, Parameter):
        if leaf.sign.value == "nonneg":
            raw = np.abs(raw)
        elif leaf.sign.value == "nonpos":
            raw = -np.abs(raw)
        elif leaf.sign.value == "zero":
            raw = np.zeros_like(raw)
    return raw


def random_binding(rng, expr, scale=2.0):
    """Bind every variable and parameter under expr to sign-valid values."""
    from coneprog.expressions import parameters_of, variables_of

    binding = {}
    for leaf in variables_of(expr):
        binding[leaf.id] = rng.normal(scale=scale, size=(leaf.rows, 1))
    for leaf in parameters_of(expr):
        binding[leaf.id] = signed_values(rng, leaf, scale)
    return binding
