"""Convex modeling with verified canonicalization to cone programs.

Build expressions over variables and signed parameters from a closed atom
set, verify convexity by sign-aware composition rules, canonicalize once
into a parameter-affine cone-program template, and solve with a first-order
operator-splitting method that also certifies infeasibility and
unboundedness.  A problem-file front end lives in :mod:`coneprog.cli`.
"""

from .analysis import (
    Curvature,
    DcpVerdict,
    Monotonicity,
    Sign,
    curvature,
    is_dcp,
    monotonicity,
    sign,
)
from .atoms import (
    abs_,
    maximum,
    minimum,
    norm1,
    norm2,
    norm_inf,
    pos,
    scale,
    square,
    sum_,
    sum_squares,
)
from .canon import (
    CanonTemplate,
    ConeProgram,
    ConeSpec,
    canonicalize,
    dump_cone_program,
    parse_cone_program,
    recover_solution,
)
from .errors import (
    ArityError,
    ConeprogError,
    DslError,
    MissingBinding,
    MixedSense,
    NonAffineProduct,
    NotDcp,
    OracleInconclusive,
    OracleSizeError,
    ShapeMismatch,
    SignViolation,
    SolverError,
    StatusMismatch,
    TemplateError,
    UnsupportedShape,
)
from .expressions import (
    Constant,
    Constraint,
    Expression,
    Parameter,
    Variable,
    apply_atom,
    evaluate,
    format_expression,
    substitute_parameters,
)
from .oracle import OracleResult, oracle_solve
from .problem import (
    Maximize,
    Minimize,
    Problem,
    Solution,
    SweepSpec,
    add_problems,
    build_problem,
    sweep,
)
from .projections import project_cone, project_soc
from .solver import ConeSolution, SolverSettings, residuals, solve_cone

__version__ = "0.1.0"
