"""Canonicalization of verified problems to cone programs.

The target form is ``minimize c^T x  subject to  A x + s = b,  s in K`` with
``K`` a product of a zero cone, a nonnegative orthant, and second-order
cones.  Non-affine atoms are replaced by their relaxed graph implementations
(epigraph or hypograph constraints over fresh auxiliary variables); for
verified problems the relaxations are tight at optimality.

Canonicalization runs once per problem structure and produces a
:class:`CanonTemplate` whose every coefficient is affine in the parameter
entries.  Re-binding parameters is a cheap re-stuffing: the sparsity pattern,
cone sizes, and column layout never change, only the numbers do.

Row order is fixed: zero-cone rows, then nonnegative rows, then second-order
blocks, each bucket in emission order (objective lowering first, then
constraints in declaration order).  Columns are user variables by creation
id, then auxiliaries in allocation order.
"""

import threading
from dataclasses import dataclass, field

import numpy as np

from .affine import AffVec
from .analysis import _curvature_memo, _sign_memo, is_dcp
from .errors import (
    DslError,
    MissingBinding,
    NotDcp,
    StatusMismatch,
    TemplateError,
)
from .expressions import (
    Constant,
    Parameter,
    Variable,
    check_value,
    evaluate,
    iter_nodes,
    normalize_binding,
)
from .lattice import Curvature, Sign

__all__ = [
    "ConeSpec",
    "ConeProgram",
    "CanonTemplate",
    "RecoveredSolution",
    "canonicalize",
    "recover_solution",
    "dump_cone_program",
    "parse_cone_program",
]


@dataclass(frozen=True)
class ConeSpec:
    """Dimensions of the cone product: zero rows, nonneg rows, SOC block sizes."""

    zero: int
    nonneg: int
    soc: tuple = ()

    @property
    def total(self):
        return self.zero + self.nonneg + sum(self.soc)


@dataclass
class ConeProgram:
    """A stuffed cone program ``min c^T x  s.t.  A x + s = b, s in K``.

    ``triplets`` hold the nonzeros of A as ``(row, col, value)`` sorted by
    row then column.  ``var_index`` maps user variable ids to ``(start,
    size)`` column slices; standalone programs read from a dump have none.
    """

    c: np.ndarray
    b: np.ndarray
    triplets: list
    cones: ConeSpec
    n: int
    var_index: dict = field(default_factory=dict)

    @property
    def m(self):
        return self.cones.total

    def dense_A(self):
        A = np.zeros((self.m, self.n))
        for r, c, v in self.triplets:
            A[r, c] = v
        return A


# ---------------------------------------------------------------------------
# Lowering
# ---------------------------------------------------------------------------

_USER = 0
_AUX = 1


class _Lowerer:
    """Single-use canonicalization pass over one problem."""

    def __init__(self):
        self.sign_memo = {}
        self.curv_memo = {}
        self.memo = {}
        self.aux_sizes = []
        self.zero_rows = []
        self.nonneg_rows = []
        self.soc_blocks = []
        self.params = {}
        self.const_only = {}

    # -- helpers -------------------------------------------------------------

    def new_aux(self, size):
        key = (_AUX, len(self.aux_sizes))
        self.aux_sizes.append(size)
        return AffVec.variable(key, size)

    def emit_nonneg(self, av):
        self.nonneg_rows.append(av)

    def emit_soc(self, av):
        self.soc_blocks.append(av)

    def _sign(self, expr):
        return _sign_memo(expr, True, self.sign_memo)

    def _curv(self, expr):
        return _curvature_memo(expr, True, self.sign_memo, self.curv_memo)

    def _is_const_only(self, expr):
        key = id(expr)
        if key not in self.const_only:
            self.const_only[key] = not any(
                isinstance(n, (Variable, Parameter)) for n in iter_nodes(expr)
            )
        return self.const_only[key]

    def _child_ctx(self, ctx, child_sign):
        """Context for a sign-sensitive argument slot."""
        if child_sign in (Sign.NONNEG, Sign.ZERO):
            return ctx
        if child_sign is Sign.NONPOS:
            return _flip(ctx)
        return Curvature.AFFINE

    # -- main dispatch ---------------------------------------------------------

    def lower(self, expr, ctx):
        key = (id(expr), ctx)
        if key in self.memo:
            return self.memo[key]
        out = self._lower(expr, ctx)
        self.memo[key] = out
        return out

    def _lower(self, expr, ctx):
        if isinstance(expr, Constant):
            return AffVec.constant(expr.value.ravel())
        if isinstance(expr, Variable):
            return AffVec.variable((_USER, expr.id), expr.size)
        if isinstance(expr, Parameter):
            self.params[expr.id] = expr
            return AffVec.parameter(expr.id, expr.size)
        if self._is_const_only(expr):
            return AffVec.constant(evaluate(expr, {}).ravel())

        kind = expr.kind
        if kind == "add":
            out = self.lower(expr.args[0], ctx)
            for a in expr.args[1:]:
                out = out + self.lower(a, ctx)
            return out.broadcast_to(expr.rows)
        if kind == "negate":
            return -self.lower(expr.args[0], _flip(ctx))
        if kind == "sum":
            return self.lower(expr.args[0], ctx).sum_rows()
        if kind == "index":
            return self.lower(expr.args[0], ctx).index(expr.data)
        if kind == "scale":
            return self._lower_scale(expr, ctx)
        return self._lower_graph(expr, ctx)

    def _lower_scale(self, expr, ctx):
        factor, operand = expr.args
        fsign = self._sign(factor)
        if fsign is Sign.ZERO:
            # zero factor wipes the operand; nothing to lower
            return AffVec.constant(np.zeros(expr.size))
        if self._curv(operand) in (Curvature.CONSTANT, Curvature.AFFINE):
            op_ctx = Curvature.AFFINE
        elif fsign is Sign.NONNEG:
            op_ctx = ctx
        elif fsign is Sign.NONPOS:
            op_ctx = _flip(ctx)
        else:  # pragma: no cover - verification rejects this earlier
            raise TemplateError("sign-unknown factor over a non-affine operand")
        av = self.lower(operand, op_ctx)
        if isinstance(factor, Parameter):
            self.params[factor.id] = factor
            if factor.is_scalar:
                return av.scale_param_scalar(factor.id)
            return av.scale_param_column(factor.id, factor.rows)
        value = factor.value
        if factor.is_scalar:
            return av.scale_scalar(value[0, 0])
        return av.matmul(value)

    def _lower_graph(self, expr, ctx):
        """Replace a non-affine atom by its graph implementation."""
        kind = expr.kind
        cls = {"convex": Curvature.CONVEX, "concave": Curvature.CONCAVE}[
            _ATOM_CLASS[kind]
        ]
        if ctx is not cls:  # pragma: no cover - verification rejects this earlier
            raise TemplateError(
                f"{kind} appears where a {ctx.value} expression is required"
            )
        if not any(isinstance(n, Variable) for n in iter_nodes(expr)):
            raise TemplateError(
                f"{kind} over parameters cannot be reduced to parameter-affine "
                "coefficients; bind the parameters first"
            )
        args = [
            self.lower(a, self._child_ctx(ctx, self._sign(a)))
            if kind in _SIGN_CTX_ATOMS
            else self.lower(a, ctx)
            for a in expr.args
        ]
        m = expr.rows

        if kind in ("abs", "norm1"):
            (x,) = args
            u = self.new_aux(x.m)
            self.emit_nonneg(u - x)
            self.emit_nonneg(u + x)
            return u.sum_rows() if kind == "norm1" else u
        if kind == "pos":
            (x,) = args
            u = self.new_aux(x.m)
            self.emit_nonneg(u - x)
            self.emit_nonneg(u)
            return u
        if kind == "norm_inf":
            (x,) = args
            t = self.new_aux(1)
            tb = t.broadcast_to(x.m)
            self.emit_nonneg(tb - x)
            self.emit_nonneg(tb + x)
            return t
        if kind == "norm2":
            (x,) = args
            t = self.new_aux(1)
            self.emit_soc(AffVec.concat([t, x]))
            return t
        if kind == "square":
            (x,) = args
            t = self.new_aux(x.m)
            one = AffVec.constant([1.0])
            for i in range(x.m):
                ti = t.index(i)
                self.emit_soc(
                    AffVec.concat([one + ti, x.index(i).scale_scalar(2.0), one - ti])
                )
            return t
        if kind == "sum_squares":
            (x,) = args
            t = self.new_aux(1)
            one = AffVec.constant([1.0])
            self.emit_soc(AffVec.concat([one + t, x.scale_scalar(2.0), one - t]))
            return t
        if kind == "maximum":
            t = self.new_aux(m)
            for a in args:
                self.emit_nonneg(t - a.broadcast_to(m))
            return t
        if kind == "minimum":
            t = self.new_aux(m)
            for a in args:
                self.emit_nonneg(a.broadcast_to(m) - t)
            return t
        raise TemplateError(f"no graph implementation for atom {kind!r}")


def _flip(ctx):
    if ctx is Curvature.CONVEX:
        return Curvature.CONCAVE
    if ctx is Curvature.CONCAVE:
        return Curvature.CONVEX
    return ctx


_ATOM_CLASS = {
    "abs": "convex",
    "square": "convex",
    "sum_squares": "convex",
    "norm1": "convex",
    "norm2": "convex",
    "norm_inf": "convex",
    "pos": "convex",
    "maximum": "convex",
    "minimum": "concave",
}

# atoms whose argument context depends on the argument's sign
_SIGN_CTX_ATOMS = ("abs", "square", "sum_squares", "norm1", "norm2", "norm_inf")


# ---------------------------------------------------------------------------
# Templates
# ---------------------------------------------------------------------------


@dataclass
class _FormVec:
    """Dense vector whose entries are affine in parameter entries."""

    const: np.ndarray
    coeffs: dict  # basis -> ndarray aligned with const

    def value(self, theta):
        out = self.const.copy()
        for basis in sorted(self.coeffs):
            out += self.coeffs[basis] * theta[basis]
        return out


class CanonTemplate:
    """Cached canonical form of one problem, affine in its parameters.

    Holds the fixed structure (columns, cones, sparsity pattern) plus
    parameter-affine coefficient forms for ``c``, ``A`` and ``b``.
    :meth:`stuff` produces a numeric :class:`ConeProgram` for a binding;
    ``stuff_count`` tracks how many times that happened.
    """

    def __init__(
        self,
        sense,
        objective,
        n_cols,
        cones,
        var_index,
        var_leaves,
        params,
        c_form,
        b_form,
        a_rows,
        a_cols,
        a_form,
        constraint_rows,
        verdict,
    ):
        self.sense = sense
        self.objective = objective
        self.n_cols = n_cols
        self.cones = cones
        self.var_index = var_index
        self.var_leaves = var_leaves
        self.params = params
        self.c_form = c_form
        self.b_form = b_form
        self.a_rows = a_rows
        self.a_cols = a_cols
        self.a_form = a_form
        self.constraint_rows = constraint_rows
        self.verdict = verdict
        self.stuff_count = 0
        self._lock = threading.Lock()

    @property
    def m(self):
        return self.cones.total

    def stuff(self, binding=None):
        """Produce the numeric cone program for one parameter binding.

        Values are checked against declared parameter shapes and signs.  The
        triplet positions are independent of the binding; only values change.
        """
        values = normalize_binding(binding)
        theta = {}
        for pid, leaf in sorted(self.params.items()):
            if pid not in values:
                name = leaf.name or f"id {pid}"
                raise MissingBinding(f"no value bound for parameter {name}")
            flat = check_value(leaf, values[pid]).ravel()
            for j in range(leaf.size):
                theta[(pid, j)] = flat[j]
        c = self.c_form.value(theta)
        b = self.b_form.value(theta)
        a_vals = self.a_form.value(theta)
        triplets = [
            (int(r), int(col), float(v))
            for r, col, v in zip(self.a_rows, self.a_cols, a_vals)
        ]
        with self._lock:
            self.stuff_count += 1
        return ConeProgram(
            c=c,
            b=b,
            triplets=triplets,
            cones=self.cones,
            n=self.n_cols,
            var_index=dict(self.var_index),
        )


def _collect_entries(blocks, col_offsets, col_sizes, row_offset):
    """Yield (row, col, {basis: value}) for structurally nonzero A entries."""
    entries = []
    r0 = row_offset
    for av in blocks:
        for ck, forms in av.lin.items():
            start = col_offsets[ck]
            size = col_sizes[ck]
            for j in range(size):
                for i in range(av.m):
                    form = {}
                    for basis, arr in forms.items():
                        v = arr[i, j]
                        if v != 0.0:
                            form[basis] = v
                    if form:
                        entries.append((r0 + i, start + j, form))
        r0 += av.m
    return entries


def _collect_const(blocks, row_offset, out_const, out_coeffs, m_total):
    r0 = row_offset
    for av in blocks:
        for basis, arr in av.const.items():
            if basis is None:
                out_const[r0 : r0 + av.m] += arr
            else:
                dest = out_coeffs.get(basis)
                if dest is None:
                    dest = np.zeros(m_total)
                    out_coeffs[basis] = dest
                dest[r0 : r0 + av.m] += arr
        r0 += av.m
    return r0


def canonicalize(problem):
    """Verify and canonicalize a problem into a :class:`CanonTemplate`.

    :raises NotDcp: the problem fails signed convexity verification.
    :raises TemplateError: coefficients are not affine in the parameters.
    """
    verdict = is_dcp(problem, use_signs=True)
    if not verdict.compliant:
        raise NotDcp(verdict)

    low = _Lowerer()

    # register every reachable user variable so all-zero columns keep a slot
    user_vars = {}
    for v in problem.variables():
        user_vars[v.id] = v
    for p in problem.parameters():
        low.params[p.id] = p

    obj_ctx = Curvature.CONVEX if problem.sense == "minimize" else Curvature.CONCAVE
    obj_av = low.lower(problem.objective, obj_ctx)
    if problem.sense == "maximize":
        obj_av = -obj_av

    con_spans = []
    for con in problem.constraints:
        rows = con.rows
        if con.rel == "==":
            av = low.lower(con.lhs, Curvature.AFFINE) - low.lower(
                con.rhs, Curvature.AFFINE
            )
            bucket, block_list = "zero", low.zero_rows
        else:
            av = low.lower(con.rhs, Curvature.CONCAVE) - low.lower(
                con.lhs, Curvature.CONVEX
            )
            bucket, block_list = "nonneg", low.nonneg_rows
        av = av.broadcast_to(rows)
        local = sum(blk.m for blk in block_list)
        block_list.append(av)
        con_spans.append((bucket, local, rows))

    # -- column layout ---------------------------------------------------------
    col_keys = [(_USER, vid) for vid in sorted(user_vars)]
    col_sizes = {(_USER, vid): user_vars[vid].size for vid in user_vars}
    for k, size in enumerate(low.aux_sizes):
        col_keys.append((_AUX, k))
        col_sizes[(_AUX, k)] = size
    col_offsets = {}
    n_cols = 0
    for ck in col_keys:
        col_offsets[ck] = n_cols
        n_cols += col_sizes[ck]
    var_index = {
        vid: (col_offsets[(_USER, vid)], user_vars[vid].size)
        for vid in sorted(user_vars)
    }

    # -- row layout --------------------------------------------------------------
    zero_m = sum(av.m for av in low.zero_rows)
    nonneg_m = sum(av.m for av in low.nonneg_rows)
    soc_dims = tuple(av.m for av in low.soc_blocks)
    cones = ConeSpec(zero=zero_m, nonneg=nonneg_m, soc=soc_dims)
    m_total = cones.total

    constraint_rows = []
    for (bucket, local, rows), con in zip(con_spans, problem.constraints):
        start = local if bucket == "zero" else zero_m + local
        constraint_rows.append((con.rel, start, rows))

    # -- objective row -----------------------------------------------------------
    c_const = np.zeros(n_cols)
    c_coeffs = {}
    for ck, forms in obj_av.lin.items():
        start = col_offsets[ck]
        size = col_sizes[ck]
        for basis, arr in forms.items():
            if basis is None:
                c_const[start : start + size] += arr[0, :]
            else:
                dest = c_coeffs.setdefault(basis, np.zeros(n_cols))
                dest[start : start + size] += arr[0, :]

    # -- constraint rows: A entries hold +L for zero rows and -L otherwise ------
    zero_entries = _collect_entries(low.zero_rows, col_offsets, col_sizes, 0)
    rest_entries = _collect_entries(
        low.nonneg_rows + low.soc_blocks, col_offsets, col_sizes, zero_m
    )
    entry_map = {}
    for r, ccol, form in zero_entries:
        entry_map[(r, ccol)] = form
    for r, ccol, form in rest_entries:
        entry_map[(r, ccol)] = {basis: -v for basis, v in form.items()}

    positions = sorted(entry_map)
    a_rows = np.array([p[0] for p in positions], dtype=np.int64)
    a_cols = np.array([p[1] for p in positions], dtype=np.int64)
    a_const = np.zeros(len(positions))
    a_coeffs = {}
    for idx, p in enumerate(positions):
        for basis, v in entry_map[p].items():
            if basis is None:
                a_const[idx] = v
            else:
                a_coeffs.setdefault(basis, np.zeros(len(positions)))[idx] = v

    # -- right-hand side: b = -k on zero rows, +k elsewhere -----------------------
    b_const = np.zeros(m_total)
    b_coeffs = {}
    _collect_const(low.zero_rows, 0, b_const, b_coeffs, m_total)
    b_const[:zero_m] *= -1.0
    for arr in b_coeffs.values():
        arr[:zero_m] *= -1.0
    _collect_const(low.nonneg_rows + low.soc_blocks, zero_m, b_const, b_coeffs, m_total)

    return CanonTemplate(
        sense=problem.sense,
        objective=problem.objective,
        n_cols=n_cols,
        cones=cones,
        var_index=var_index,
        var_leaves=dict(user_vars),
        params=dict(low.params),
        c_form=_FormVec(c_const, c_coeffs),
        b_form=_FormVec(b_const, b_coeffs),
        a_rows=a_rows,
        a_cols=a_cols,
        a_form=_FormVec(a_const, a_coeffs),
        constraint_rows=constraint_rows,
        verdict=verdict,
    )


# ---------------------------------------------------------------------------
# Solution recovery
# ---------------------------------------------------------------------------


@dataclass
class RecoveredSolution:
    """User-level view of a cone solution: variable values, objective, duals."""

    values: dict
    objective: float
    duals: list


def recover_solution(cone_solution, template, binding=None):
    """Map a cone solution back to user variables and re-evaluate the objective.

    Requires a solution with a usable primal point (``optimal`` or
    ``inaccurate``); certificates of infeasibility or unboundedness carry no
    primal values and raise :class:`StatusMismatch`.
    """
    if cone_solution.status not in ("optimal", "inaccurate"):
        raise StatusMismatch(
            f"cannot recover variable values from a {cone_solution.status!r} result"
        )
    values = {}
    for vid, (start, size) in template.var_index.items():
        leaf = template.var_leaves[vid]
        values[vid] = cone_solution.x[start : start + size].reshape(leaf.shape).copy()
    full = dict(normalize_binding(binding))
    full.update(values)
    objective = float(evaluate(template.objective, full)[0, 0])
    duals = []
    for rel, start, size in template.constraint_rows:
        duals.append(cone_solution.y[start : start + size].copy())
    return RecoveredSolution(values=values, objective=objective, duals=duals)


# ---------------------------------------------------------------------------
# Text dump of cone programs
# ---------------------------------------------------------------------------


def _g17(v):
    return format(float(v), ".17g")


def dump_cone_program(prog):
    """Serialize a cone program to the versioned text format.

    Deterministic: same program, same bytes.  Values carry 17 significant
    digits so parsing the dump reproduces the numbers exactly.
    """
    lines = ["cone-program v1", f"vars {prog.n}"]
    lines.append(("c " + " ".join(_g17(v) for v in prog.c)).rstrip())
    lines.append(("b " + " ".join(_g17(v) for v in prog.b)).rstrip())
    cone_parts = [f"zero:{prog.cones.zero}", f"nonneg:{prog.cones.nonneg}"]
    if prog.cones.soc:
        cone_parts.append("soc:" + ",".join(str(d) for d in prog.cones.soc))
    lines.append("cones " + " ".join(cone_parts))
    for r, c, v in sorted(prog.triplets):
        lines.append(f"A {r} {c} {_g17(v)}")
    return "\n".join(lines) + "\n"


def parse_cone_program(text):
    """Parse the text dump format back into a :class:`ConeProgram`."""

    def fail(lineno, msg):
        raise DslError(msg, line=lineno, col=1)

    lines = [ln for ln in text.splitlines()]
    body = [(i + 1, ln.strip()) for i, ln in enumerate(lines) if ln.strip()]
    if not body or body[0][1] != "cone-program v1":
        fail(1, "expected header 'cone-program v1'")
    fields = {}
    triplets = []
    for lineno, ln in body[1:]:
        parts = ln.split()
        tag = parts[0]
        if tag == "A":
            if len(parts) != 4:
                fail(lineno, "A lines need: A row col value")
            try:
                triplets.append((int(parts[1]), int(parts[2]), float(parts[3])))
            except ValueError:
                fail(lineno, "malformed A entry")
        elif tag in ("vars", "c", "b", "cones"):
            if tag in fields:
                fail(lineno, f"duplicate {tag} line")
            fields[tag] = (lineno, parts[1:])
        else:
            fail(lineno, f"unknown line tag {tag!r}")
    for need in ("vars", "c", "b", "cones"):
        if need not in fields:
            fail(len(lines) + 1, f"missing {need} line")
    lineno, toks = fields["vars"]
    if len(toks) != 1 or not toks[0].isdigit():
        fail(lineno, "vars line needs a single count")
    n = int(toks[0])
    try:
        c = np.array([float(t) for t in fields["c"][1]])
        b = np.array([float(t) for t in fields["b"][1]])
    except ValueError:
        fail(fields["c"][0], "malformed numeric entry")
    if c.shape[0] != n:
        fail(fields["c"][0], f"c has {c.shape[0]} entries, expected {n}")
    lineno, toks = fields["cones"]
    zero = nonneg = 0
    soc = ()
    seen = set()
    for tok in toks:
        name, _, rest = tok.partition(":")
        if name in seen:
            fail(lineno, f"duplicate cone segment {name!r}")
        seen.add(name)
        try:
            if name == "zero":
                zero = int(rest)
            elif name == "nonneg":
                nonneg = int(rest)
            elif name == "soc":
                soc = tuple(int(d) for d in rest.split(","))
            else:
                fail(lineno, f"unknown cone segment {name!r}")
        except ValueError:
            fail(lineno, f"malformed cone segment {tok!r}")
    if any(d < 1 for d in soc) or zero < 0 or nonneg < 0:
        fail(lineno, "cone dimensions must be nonnegative (soc blocks >= 1)")
    cones = ConeSpec(zero=zero, nonneg=nonneg, soc=soc)
    if b.shape[0] != cones.total:
        fail(fields["b"][0], f"b has {b.shape[0]} entries, cones need {cones.total}")
    seen_rc = set()
    for r, ccol, v in triplets:
        if not (0 <= r < cones.total and 0 <= ccol < n):
            raise DslError(f"A entry ({r}, {ccol}) out of range", line=1, col=1)
        if (r, ccol) in seen_rc:
            raise DslError(f"duplicate A entry ({r}, {ccol})", line=1, col=1)
        seen_rc.add((r, ccol))
    return ConeProgram(
        c=c, b=b, triplets=sorted(triplets), cones=cones, n=n, var_index={}
    )
