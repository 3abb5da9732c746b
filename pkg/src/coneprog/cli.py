"""Command-line front end for problem files.

Subcommands:

* ``parse``      reprint a problem file in canonical layout
* ``check``      convexity report with a per-node curvature/sign breakdown
* ``canon``      canonicalize and print the cone program in dump format
* ``solve``      solve and report status, optimum, and variable values
* ``sweep``      re-solve across a range of values for one parameter
* ``solve-cone`` solve a cone program given directly in dump format

Exit codes: 0 for conclusive outcomes (a compliant check, an optimal,
infeasible, or unbounded solve), 2 for usage, parse, shape, sign, or
convexity errors, 3 when the solver stopped at its iteration cap.

Text reports print values with four decimal places; ``--format machine``
emits JSON with 17 significant digits.
"""

import argparse
import sys

import numpy as np

from . import analysis
from .canon import dump_cone_program, parse_cone_program
from .dsl import build_model, parse_expression_in, parse_problem_file, print_problem_file
from .errors import ConeprogError, DslError
from .expressions import Parameter, Variable, evaluate, format_expression
from .problem import SweepSpec, sweep as run_sweep
from .solver import SolverSettings, solve_cone

__all__ = ["main"]

_CONCLUSIVE = ("optimal", "infeasible", "unbounded")


# ---------------------------------------------------------------------------
# Small formatting helpers
# ---------------------------------------------------------------------------


def _f4(v):
    return f"{float(v):.4f}"


def _f17(v):
    v = float(v)
    if v != v:
        return "null"
    return format(v, ".17g")


def _json_str(s):
    out = ['"']
    for ch in s:
        if ch in ('"', "\\"):
            out.append("\\" + ch)
        elif ch == "\n":
            out.append("\\n")
        elif ord(ch) < 0x20:
            out.append(f"\\u{ord(ch):04x}")
        else:
            out.append(ch)
    out.append('"')
    return "".join(out)


def _vec_text(arr):
    return " ".join(_f4(v) for v in np.asarray(arr).ravel())


def _vec_json(arr):
    return "[" + ", ".join(_f17(v) for v in np.asarray(arr).ravel()) + "]"


def _read_file(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise _CliError(f"cannot read {path}: {exc.strerror}") from None


class _CliError(Exception):
    """Usage-level failure; message goes to stderr, exit code 2."""


def _load_model(path):
    return build_model(parse_problem_file(_read_file(path)))


def _parse_value_list(text):
    body = text.strip()
    if body.startswith("[") and body.endswith("]"):
        body = body[1:-1]
    parts = [p for p in (piece.strip() for piece in body.split(",")) if p]
    if not parts:
        raise _CliError(f"empty value in {text!r}")
    try:
        values = [float(p) for p in parts]
    except ValueError:
        raise _CliError(f"bad numeric value in {text!r}") from None
    return values[0] if len(values) == 1 else values


def _apply_param_overrides(model, pairs):
    binding = dict(model.default_binding)
    for pair in pairs or ():
        if "=" not in pair:
            raise _CliError(f"--param expects name=value, got {pair!r}")
        name, _, raw = pair.partition("=")
        name = name.strip()
        leaf = model.leaves.get(name)
        if not isinstance(leaf, Parameter):
            raise _CliError(f"{name!r} is not a declared parameter")
        binding[leaf] = _parse_value_list(raw)
    return binding


def _settings(args):
    kwargs = {}
    if getattr(args, "tol", None) is not None:
        if args.tol <= 0:
            raise _CliError("--tol must be positive")
        kwargs.update(eps_primal=args.tol, eps_dual=args.tol, eps_gap=args.tol)
    if getattr(args, "max_iter", None) is not None:
        if args.max_iter < 1:
            raise _CliError("--max-iter must be at least 1")
        kwargs.update(max_iters=args.max_iter)
    if getattr(args, "kernel", None):
        kwargs.update(kernel=args.kernel)
    return SolverSettings(**kwargs)


def _model_variables(model):
    """Declared variables in declaration order."""
    return [
        (name, leaf)
        for name, leaf in model.leaves.items()
        if isinstance(leaf, Variable)
    ]


# ---------------------------------------------------------------------------
# parse
# ---------------------------------------------------------------------------


def _cmd_parse(args):
    pf = parse_problem_file(_read_file(args.file))
    build_model(pf)  # surface structural errors even though output is textual
    sys.stdout.write(print_problem_file(pf))
    return 0


# ---------------------------------------------------------------------------
# check
# ---------------------------------------------------------------------------


def _print_node_tree(expr, sign_memo, curv_memo, use_signs, indent, lines):
    curv = analysis._curvature_memo(expr, use_signs, sign_memo, curv_memo)
    sgn = analysis._sign_memo(expr, use_signs, sign_memo)
    label = format_expression(expr)
    lines.append(f"{'  ' * indent}{label} :: {curv.value} {sgn.value}")
    for arg in getattr(expr, "args", ()):
        _print_node_tree(arg, sign_memo, curv_memo, use_signs, indent + 1, lines)


def _cmd_check(args):
    model = _load_model(args.file)
    problem = model.problem
    use_signs = not args.no_signs
    verdict = analysis.is_dcp(problem, use_signs=use_signs)
    sign_memo = {}
    curv_memo = {}
    lines = [f"mode: {'signed' if use_signs else 'unsigned'}"]
    lines.append(f"objective: {problem.sense}")
    _print_node_tree(problem.objective, sign_memo, curv_memo, use_signs, 1, lines)
    for i, con in enumerate(problem.constraints):
        lines.append(
            f"constraint {i}: "
            f"{format_expression(con.lhs)} {con.rel} {format_expression(con.rhs)}"
        )
        lines.append("  left:")
        _print_node_tree(con.lhs, sign_memo, curv_memo, use_signs, 2, lines)
        lines.append("  right:")
        _print_node_tree(con.rhs, sign_memo, curv_memo, use_signs, 2, lines)
    if verdict.compliant:
        lines.append("verdict: compliant")
    else:
        lines.append("verdict: not compliant")
        lines.append(f"offence: {verdict.offence}")
    print("\n".join(lines))
    return 0 if verdict.compliant else 2


# ---------------------------------------------------------------------------
# canon
# ---------------------------------------------------------------------------


def _cmd_canon(args):
    model = _load_model(args.file)
    binding = _apply_param_overrides(model, args.param)
    template = model.problem.template()
    prog = template.stuff(binding)
    sys.stdout.write(dump_cone_program(prog))
    return 0


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------


def _solution_report_text(model, sol):
    lines = [f"status: {sol.status}"]
    if sol.value is not None:
        lines.append(f"optval: {_f4(sol.value)}")
        for name, leaf in _model_variables(model):
            lines.append(f"{name}: {_vec_text(sol.primal[leaf.id])}")
    lines.append(f"iterations: {sol.iterations}")
    lines.append(
        "residuals: primal={:.4e} dual={:.4e} gap={:.4e}".format(
            sol.res_primal, sol.res_dual, sol.res_gap
        )
    )
    return "\n".join(lines) + "\n"


def _solution_report_json(model, sol):
    parts = [f'"status": {_json_str(sol.status)}']
    parts.append(
        f'"optval": {_f17(sol.value)}' if sol.value is not None else '"optval": null'
    )
    var_parts = []
    if sol.value is not None:
        for name, leaf in _model_variables(model):
            var_parts.append(f"{_json_str(name)}: {_vec_json(sol.primal[leaf.id])}")
    parts.append('"variables": {' + ", ".join(var_parts) + "}")
    parts.append(f'"iterations": {sol.iterations}')
    parts.append(
        '"residuals": {"primal": %s, "dual": %s, "gap": %s}'
        % (_f17(sol.res_primal), _f17(sol.res_dual), _f17(sol.res_gap))
    )
    return "{" + ", ".join(parts) + "}\n"


def _cmd_solve(args):
    model = _load_model(args.file)
    binding = _apply_param_overrides(model, args.param)
    settings = _settings(args)
    sol = model.problem.solve(binding, settings)
    if args.format == "machine":
        sys.stdout.write(_solution_report_json(model, sol))
    else:
        sys.stdout.write(_solution_report_text(model, sol))
    if sol.status in _CONCLUSIVE:
        return 0
    return 3


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------


def _sweep_values(args):
    chosen = [args.values is not None, args.logspace is not None]
    if sum(chosen) != 1:
        raise _CliError("provide exactly one of --values or --logspace")
    if args.values is not None:
        vals = _parse_value_list(args.values)
        if isinstance(vals, float):
            vals = [vals]
        return vals
    lo, hi, count = args.logspace
    n = int(count)
    if n < 1 or n != count:
        raise _CliError("--logspace count must be a positive integer")
    return [float(v) for v in np.logspace(lo, hi, n)]


def _cmd_sweep(args):
    model = _load_model(args.file)
    leaf = model.leaves.get(args.param)
    if not isinstance(leaf, Parameter):
        raise _CliError(f"{args.param!r} is not a declared parameter")
    values = _sweep_values(args)
    binding = dict(model.default_binding)
    binding.pop(leaf, None)
    settings = _settings(args)
    columns = []
    for text in args.column or ():
        expr = parse_expression_in(text, model)
        if expr.size != 1:
            raise _CliError(f"report column {text!r} is not scalar")
        columns.append((text, expr))
    spec = SweepSpec(leaf, values, workers=args.jobs)
    solutions = run_sweep(model.problem, spec, binding, settings)

    def column_value(sol, expr):
        if sol.value is None:
            return None
        values_by_id = {vid: arr for vid, arr in sol.primal.items()}
        return float(evaluate(expr, {**sol.binding, **values_by_id})[0, 0])

    rows = []
    for value, sol in zip(values, solutions):
        cells = [value, sol.status, sol.value]
        cells.extend(column_value(sol, expr) for _, expr in columns)
        rows.append(cells)

    statuses = {sol.status for sol in solutions}
    if "error" in statuses:
        worst = 2
    elif "inaccurate" in statuses:
        worst = 3
    else:
        worst = 0
    if args.format == "machine":
        row_objs = []
        for cells in rows:
            fields = [
                f'"value": {_f17(cells[0])}',
                f'"status": {_json_str(cells[1])}',
                f'"optval": {_f17(cells[2]) if cells[2] is not None else "null"}',
            ]
            col_parts = [
                f"{_json_str(name)}: "
                + (_f17(cell) if cell is not None else "null")
                for (name, _), cell in zip(columns, cells[3:])
            ]
            fields.append('"columns": {' + ", ".join(col_parts) + "}")
            row_objs.append("{" + ", ".join(fields) + "}")
        sys.stdout.write(
            "{"
            + f'"param": {_json_str(args.param)}, "rows": ['
            + ", ".join(row_objs)
            + "]}\n"
        )
    else:
        header = [args.param, "status", "optval"] + [name for name, _ in columns]
        text_rows = [header]
        for cells in rows:
            text_rows.append(
                [_f4(cells[0]), cells[1]]
                + [("-" if c is None else _f4(c)) for c in cells[2:]]
            )
        widths = [
            max(len(row[j]) for row in text_rows) for j in range(len(header))
        ]
        for row in text_rows:
            line = "  ".join(cell.ljust(w) for cell, w in zip(row, widths))
            sys.stdout.write(line.rstrip() + "\n")
    return worst


# ---------------------------------------------------------------------------
# solve-cone
# ---------------------------------------------------------------------------


def _cmd_solve_cone(args):
    prog = parse_cone_program(_read_file(args.file))
    settings = _settings(args)
    sol = solve_cone(prog, settings)
    if args.format == "machine":
        parts = [f'"status": {_json_str(sol.status)}']
        parts.append(
            f'"optval": {_f17(sol.value)}' if sol.value is not None else '"optval": null'
        )
        if sol.x is not None and sol.status in ("optimal", "inaccurate"):
            parts.append(f'"x": {_vec_json(sol.x)}')
        else:
            parts.append('"x": null')
        parts.append(f'"iterations": {sol.iterations}')
        parts.append(
            '"residuals": {"primal": %s, "dual": %s, "gap": %s}'
            % (_f17(sol.res_primal), _f17(sol.res_dual), _f17(sol.res_gap))
        )
        sys.stdout.write("{" + ", ".join(parts) + "}\n")
    else:
        lines = [f"status: {sol.status}"]
        if sol.value is not None and sol.status in ("optimal", "inaccurate"):
            lines.append(f"optval: {_f4(sol.value)}")
            lines.append(f"x: {_vec_text(sol.x)}")
        lines.append(f"iterations: {sol.iterations}")
        lines.append(
            "residuals: primal={:.4e} dual={:.4e} gap={:.4e}".format(
                sol.res_primal, sol.res_dual, sol.res_gap
            )
        )
        sys.stdout.write("\n".join(lines) + "\n")
    if sol.status in _CONCLUSIVE:
        return 0
    return 3


# ---------------------------------------------------------------------------
# Argument wiring
# ---------------------------------------------------------------------------


def _add_solver_flags(sub):
    sub.add_argument("--tol", type=float, default=None,
                     help="stopping tolerance for all three residuals")
    sub.add_argument("--max-iter", type=int, default=None,
                     help="iteration cap")
    sub.add_argument("--kernel", choices=("auto", "compiled", "python"),
                     default=None, help="inner-loop implementation")
    sub.add_argument("--format", choices=("text", "machine"), default="text",
                     help="report style (text: 4 decimals, machine: JSON)")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="coneprog",
        description="Model, verify, canonicalize, and solve convex problems "
        "written as problem files.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("parse", help="reprint a problem file in canonical form")
    p.add_argument("file")
    p.set_defaults(func=_cmd_parse)

    p = subs.add_parser("check", help="report convexity of every subexpression")
    p.add_argument("file")
    p.add_argument("--no-signs", action="store_true",
                   help="analyze without sign information")
    p.set_defaults(func=_cmd_check)

    p = subs.add_parser("canon", help="print the canonical cone program")
    p.add_argument("file")
    p.add_argument("--param", action="append", metavar="NAME=VALUE",
                   help="bind a parameter (repeatable)")
    p.set_defaults(func=_cmd_canon)

    p = subs.add_parser("solve", help="solve a problem file")
    p.add_argument("file")
    p.add_argument("--param", action="append", metavar="NAME=VALUE",
                   help="bind a parameter (repeatable)")
    _add_solver_flags(p)
    p.set_defaults(func=_cmd_solve)

    p = subs.add_parser("sweep", help="solve repeatedly over parameter values")
    p.add_argument("file")
    p.add_argument("--param", required=True, metavar="NAME",
                   help="name of the parameter to sweep")
    p.add_argument("--values", default=None, metavar="V1,V2,...",
                   help="explicit list of values")
    p.add_argument("--logspace", nargs=3, type=float, default=None,
                   metavar=("LO", "HI", "N"),
                   help="N points from 10^LO to 10^HI")
    p.add_argument("--jobs", type=int, default=1, help="worker threads")
    p.add_argument("--column", action="append", metavar="EXPR",
                   help="extra report column (an expression; repeatable)")
    _add_solver_flags(p)
    p.set_defaults(func=_cmd_sweep)

    p = subs.add_parser("solve-cone", help="solve a cone program in dump format")
    p.add_argument("file")
    _add_solver_flags(p)
    p.set_defaults(func=_cmd_solve_cone)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DslError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except _CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ConeprogError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
