"""Convexity and sign analysis: table cases, properties, localization.

The numeric properties tie the symbolic verdicts to actual function values:
an expression reported nonnegative must never evaluate negative, and an
expression reported convex must satisfy midpoint convexity on random pairs
of variable assignments.
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from coneprog import atoms
from coneprog.analysis import curvature, is_dcp, monotonicity, sign
from coneprog.expressions import Constant, Parameter, Variable, evaluate
from coneprog.lattice import Curvature, Monotonicity, Sign
from coneprog.problem import Maximize, Minimize, Problem
from helpers import make_leaves, random_binding, random_tree, signed_values


# -- table cases ---------------------------------------------------------------


def test_leaf_classes():
    x = Variable(3)
    p = Parameter(sign="nonneg")
    c = Constant([-1.0, -2.0])
    assert curvature(x) is Curvature.AFFINE
    assert curvature(p) is Curvature.CONSTANT
    assert curvature(c) is Curvature.CONSTANT
    assert sign(x) is Sign.UNKNOWN
    assert sign(p) is Sign.NONNEG
    assert sign(c) is Sign.NONPOS
    assert sign(Constant([1.0, -1.0])) is Sign.UNKNOWN
    assert sign(Constant([0.0, 0.0])) is Sign.ZERO


def test_convex_atoms_on_affine_args():
    x = Variable(3)
    for expr in (
        atoms.abs_(x),
        atoms.square(x),
        atoms.sum_squares(x),
        atoms.norm1(x),
        atoms.norm2(x),
        atoms.norm_inf(x),
        atoms.pos(x),
        atoms.maximum(x, 0),
    ):
        assert curvature(expr) is Curvature.CONVEX
        assert sign(expr) in (Sign.NONNEG, Sign.ZERO)
    assert curvature(atoms.minimum(x, 0)) is Curvature.CONCAVE


def test_negation_flips_curvature():
    x = Variable(2)
    assert curvature(-atoms.square(x)) is Curvature.CONCAVE
    assert curvature(-atoms.minimum(x, 0)) is Curvature.CONVEX
    assert curvature(-(x + 1)) is Curvature.AFFINE


def test_square_of_square_needs_signs():
    x = Variable()
    nested = atoms.square(atoms.square(x))
    assert curvature(nested, use_signs=True) is Curvature.CONVEX
    assert curvature(nested, use_signs=False) is Curvature.UNKNOWN


def test_abs_of_concave_nonpos_is_convex():
    x = Variable(2)
    inner = atoms.minimum(x, 0)  # concave, nonpos
    assert sign(inner) is Sign.NONPOS
    assert curvature(atoms.abs_(inner)) is Curvature.CONVEX
    assert curvature(atoms.abs_(inner), use_signs=False) is Curvature.UNKNOWN


def test_norm_of_affine_vector_signed_vs_unsigned():
    x = Variable(3)
    e = atoms.norm2(atoms.abs_(x))  # norm of a nonneg convex argument
    assert curvature(e) is Curvature.CONVEX
    assert curvature(e, use_signs=False) is Curvature.UNKNOWN


def test_unsigned_mode_keeps_constant_signs():
    x = Variable()
    e = Constant(2.0) * atoms.square(x)
    assert curvature(e, use_signs=False) is Curvature.CONVEX
    e2 = Constant(-2.0) * atoms.square(x)
    assert curvature(e2, use_signs=False) is Curvature.CONCAVE


def test_parameter_sign_drives_scale_curvature():
    x = Variable()
    g_pos = Parameter(sign="nonneg")
    g_any = Parameter()
    assert curvature(g_pos * atoms.square(x)) is Curvature.CONVEX
    assert curvature(g_any * atoms.square(x)) is Curvature.UNKNOWN
    assert curvature(g_any * x) is Curvature.AFFINE
    # unsigned mode discards the declared parameter sign
    assert curvature(g_pos * atoms.square(x), use_signs=False) is Curvature.UNKNOWN


def test_zero_factor_collapses_to_constant():
    x = Variable()
    z = Parameter(sign="zero")
    assert curvature(z * atoms.square(x)) is Curvature.CONSTANT
    assert curvature(Constant(0.0) * atoms.norm2(Variable(2))) is Curvature.CONSTANT


def test_monotonicity_tables():
    assert monotonicity("add", 0, Sign.UNKNOWN) is Monotonicity.NONDECREASING
    assert monotonicity("negate", 0, Sign.UNKNOWN) is Monotonicity.NONINCREASING
    assert monotonicity("abs", 0, Sign.NONNEG) is Monotonicity.NONDECREASING
    assert monotonicity("abs", 0, Sign.NONPOS) is Monotonicity.NONINCREASING
    assert monotonicity("abs", 0, Sign.UNKNOWN) is Monotonicity.NONMONOTONIC
    assert monotonicity("pos", 0, Sign.UNKNOWN) is Monotonicity.NONDECREASING
    assert monotonicity("maximum", 1, Sign.UNKNOWN) is Monotonicity.NONDECREASING


# -- soundness properties --------------------------------------------------------


def test_sign_analysis_sound_on_random_trees():
    rng = np.random.default_rng(21)
    checked = 0
    for _ in range(250):
        leaves = make_leaves(rng)
        expr = random_tree(rng, leaves, depth=int(rng.integers(1, 5)))
        s = sign(expr)
        if s is Sign.UNKNOWN:
            continue
        checked += 1
        for _ in range(5):
            vals = evaluate(expr, random_binding(rng, expr))
            if s is Sign.NONNEG:
                assert vals.min() >= -1e-9
            elif s is Sign.NONPOS:
                assert vals.max() <= 1e-9
            else:
                assert_allclose(vals, 0.0, atol=1e-9)
    assert checked > 40


def test_midpoint_convexity_on_random_trees():
    rng = np.random.default_rng(22)
    convex_seen = 0
    concave_seen = 0
    for _ in range(400):
        leaves = make_leaves(rng)
        expr = random_tree(rng, leaves, depth=int(rng.integers(1, 4)))
        if not expr.is_scalar:
            expr = atoms.sum_(expr)
        curv = curvature(expr)
        if curv not in (Curvature.CONVEX, Curvature.CONCAVE):
            continue
        from coneprog.expressions import parameters_of, variables_of

        variables = variables_of(expr)
        if not variables:
            continue
        theta = {p.id: signed_values(rng, p) for p in parameters_of(expr)}
        for _ in range(4):
            u = {v.id: rng.normal(scale=3.0, size=(v.rows, 1)) for v in variables}
            w = {v.id: rng.normal(scale=3.0, size=(v.rows, 1)) for v in variables}
            mid = {k: 0.5 * (u[k] + w[k]) for k in u}
            fu = evaluate(expr, {**theta, **u})[0, 0]
            fw = evaluate(expr, {**theta, **w})[0, 0]
            fm = evaluate(expr, {**theta, **mid})[0, 0]
            slack = 1e-8 * (1 + abs(fu) + abs(fw))
            if curv is Curvature.CONVEX:
                convex_seen += 1
                assert fm <= 0.5 * (fu + fw) + slack
            else:
                concave_seen += 1
                assert fm >= 0.5 * (fu + fw) - slack
    assert convex_seen > 100 and concave_seen > 30


def test_signed_analysis_is_at_least_as_sharp():
    # whatever the unsigned pass can certify, the signed pass certifies too
    rng = np.random.default_rng(23)
    sharper = 0
    for _ in range(300):
        leaves = make_leaves(rng)
        expr = random_tree(rng, leaves, depth=int(rng.integers(1, 5)))
        unsigned = curvature(expr, use_signs=False)
        signed = curvature(expr, use_signs=True)
        if unsigned is not Curvature.UNKNOWN:
            assert signed in (unsigned, Curvature.AFFINE, Curvature.CONSTANT)
        if signed is not unsigned:
            sharper += 1
    assert sharper > 10  # sign information actually does something


# -- whole-problem verdicts -----------------------------------------------------


def test_is_dcp_minimize_convex():
    x = Variable(3)
    prob = Problem(Minimize(atoms.norm2(x)), [x >= 0])
    verdict = is_dcp(prob)
    assert verdict.compliant
    assert verdict.objective_curvature is Curvature.CONVEX
    assert verdict.offence is None


def test_is_dcp_maximize_requires_concave():
    x = Variable()
    good = Problem(Maximize(atoms.minimum(x, 4 - x)))
    assert is_dcp(good).compliant
    bad = Problem(Maximize(atoms.square(x)))
    verdict = is_dcp(bad)
    assert not verdict.compliant
    assert "objective" in str(verdict.offence)


def test_is_dcp_equality_needs_affine():
    x = Variable()
    bad = Problem(Minimize(x), [atoms.square(x) == 1])
    verdict = is_dcp(bad)
    assert not verdict.compliant
    text = str(verdict.offence)
    assert "constraint 0" in text and "left" in text


def test_is_dcp_inequality_sides():
    x = Variable()
    good = Problem(Minimize(x), [atoms.square(x) <= 1 + atoms.minimum(x, 0)])
    assert is_dcp(good).compliant
    bad = Problem(Minimize(x), [atoms.square(x) <= atoms.norm2(Variable(2))])
    verdict = is_dcp(bad)
    assert not verdict.compliant
    assert "right" in str(verdict.offence)


def test_offence_reports_deepest_unknown_node():
    x = Variable()
    # the square of an unknown-curvature argument is the deepest failure
    expr = atoms.sum_(atoms.square(atoms.square(atoms.norm2(Variable(2)) - x)))
    prob = Problem(Minimize(expr))
    verdict = is_dcp(prob, use_signs=True)
    assert not verdict.compliant
    assert "args[0]" in str(verdict.offence)


def test_first_offence_in_declaration_order():
    x = Variable()
    bad1 = atoms.square(x) == 1
    bad2 = atoms.norm1(Variable(2)) == 0
    verdict = is_dcp(Problem(Minimize(x), [x <= 1, bad1, bad2]))
    assert not verdict.compliant
    assert "constraint 1" in str(verdict.offence)


def test_dcp_verdict_unsigned_toggle():
    x = Variable()
    prob = Problem(Minimize(atoms.square(atoms.square(x))))
    assert is_dcp(prob, use_signs=True).compliant
    assert not is_dcp(prob, use_signs=False).compliant
