"""Sign and curvature lattices used by convexity analysis.

Signs order information content: ZERO is the most precise, NONNEG and NONPOS
are incomparable refinements, and UNKNOWN is the top.  Curvatures order the
same way with CONSTANT at the bottom, AFFINE above it, CONVEX and CONCAVE
incomparable, and UNKNOWN on top.  All table functions here are total over
their enum domains.
"""

import enum

__all__ = [
    "Sign",
    "Curvature",
    "Monotonicity",
    "sign_add",
    "sign_neg",
    "sign_mul",
    "sign_join_max",
    "sign_join_min",
    "curvature_join",
    "curvature_neg",
    "curvature_at_most",
]


class Sign(enum.Enum):
    ZERO = "zero"
    NONNEG = "nonneg"
    NONPOS = "nonpos"
    UNKNOWN = "unknown"

    def __str__(self):
        return self.value


class Curvature(enum.Enum):
    CONSTANT = "constant"
    AFFINE = "affine"
    CONVEX = "convex"
    CONCAVE = "concave"
    UNKNOWN = "unknown"

    def __str__(self):
        return self.value


class Monotonicity(enum.Enum):
    NONDECREASING = "nondecreasing"
    NONINCREASING = "nonincreasing"
    NONMONOTONIC = "nonmonotonic"

    def __str__(self):
        return self.value


def sign_add(a, b):
    """Sign of a sum."""
    if a is Sign.ZERO:
        return b
    if b is Sign.ZERO:
        return a
    if a is b:
        return a
    return Sign.UNKNOWN


def sign_neg(a):
    """Sign of a negation."""
    if a is Sign.NONNEG:
        return Sign.NONPOS
    if a is Sign.NONPOS:
        return Sign.NONNEG
    return a


def sign_mul(a, b):
    """Sign of a product."""
    if a is Sign.ZERO or b is Sign.ZERO:
        return Sign.ZERO
    if a is Sign.UNKNOWN or b is Sign.UNKNOWN:
        return Sign.UNKNOWN
    return Sign.NONNEG if a is b else Sign.NONPOS


def sign_join_max(a, b):
    """Sign of an elementwise maximum."""
    if a is Sign.NONNEG or b is Sign.NONNEG:
        return Sign.NONNEG
    if a is Sign.ZERO:
        # max(0, nonpos) is exactly zero; max(0, unknown) is nonnegative
        return Sign.ZERO if b is Sign.NONPOS else Sign.NONNEG
    if b is Sign.ZERO:
        return Sign.ZERO if a is Sign.NONPOS else Sign.NONNEG
    if a is Sign.NONPOS and b is Sign.NONPOS:
        return Sign.NONPOS
    return Sign.UNKNOWN


def sign_join_min(a, b):
    """Sign of an elementwise minimum (mirror of the maximum join)."""
    return sign_neg(sign_join_max(sign_neg(a), sign_neg(b)))


_CURV_ORDER = {
    Curvature.CONSTANT: 0,
    Curvature.AFFINE: 1,
    Curvature.CONVEX: 2,
    Curvature.CONCAVE: 2,
    Curvature.UNKNOWN: 3,
}


def curvature_join(a, b):
    """Least upper bound in the curvature lattice."""
    if a is b:
        return a
    if _CURV_ORDER[a] > _CURV_ORDER[b]:
        a, b = b, a
    if b is Curvature.UNKNOWN:
        return Curvature.UNKNOWN
    if _CURV_ORDER[a] == _CURV_ORDER[b] == 2:
        # convex join concave
        return Curvature.UNKNOWN
    return b


def curvature_neg(a):
    """Curvature of a negation."""
    if a is Curvature.CONVEX:
        return Curvature.CONCAVE
    if a is Curvature.CONCAVE:
        return Curvature.CONVEX
    return a


def curvature_at_most(a, bound):
    """True if curvature ``a`` is ``bound`` or more precise.

    ``bound`` is one of AFFINE, CONVEX, CONCAVE; CONSTANT and AFFINE satisfy
    every bound.
    """
    if a in (Curvature.CONSTANT, Curvature.AFFINE):
        return True
    return a is bound
