"""Textual problem files: tokenizer, parser, printer, and model builder.

The format declares leaves, one objective, optional constraints, and an
optional data section::

    var x[5]
    param gamma nonneg
    const A
    minimize sum_squares(A * x - b) + gamma * norm1(x)
    subject to
      x >= 0
    data
      A = [1, 0; 0, 1]
      b = [3, -2]
      gamma = 1

Grammar (one optional product per term, call arguments are full
expressions)::

    problem    := decl* sense expr ("subject" "to" constraint+)? ("data" binding+)?
    sense      := "minimize" | "maximize"
    decl       := "var" IDENT ("[" INT "]")?
                | "param" IDENT ("[" INT "]")? ("nonneg" | "nonpos" | "zero")?
                | "const" IDENT
    constraint := expr ("<=" | ">=" | "==") expr
    expr       := term (("+" | "-") term)*
    term       := factor ("*" factor)?
    factor     := NUMBER | IDENT | IDENT "[" INT "]"
                | FUNC "(" expr ("," expr)* ")" | "-" factor | "(" expr ")"
    binding    := IDENT "=" (number | "[" number ("," number)* "]"
                | "[" row (";" row)* "]")

``#`` starts a comment to end of line.  Binding numbers may carry a leading
minus.  Every parse-tree node keeps its line and column, and build errors
point back at them.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConeprogError, DslError
from .expressions import (
    Constant,
    Constraint,
    Parameter,
    Variable,
    apply_atom,
    check_value,
)
from .problem import Maximize, Minimize, Problem

__all__ = [
    "parse_problem_file",
    "print_problem_file",
    "build_model",
    "parse_expression_in",
    "FileNode",
    "BuiltModel",
]

KEYWORDS = {
    "var", "param", "const", "minimize", "maximize",
    "subject", "to", "data", "nonneg", "nonpos", "zero",
}

FUNCS = (
    "abs", "square", "sum_squares", "norm1", "norm2", "norm_inf",
    "pos", "maximum", "minimum", "sum",
)

_PUNCT = ("<=", ">=", "==", "+", "-", "*", "(", ")", "[", "]", ",", ";", "=")


# ---------------------------------------------------------------------------
# Tokens
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Token:
    kind: str  # IDENT, NUMBER, PUNCT, EOF
    text: str
    line: int
    col: int


def tokenize(text):
    tokens = []
    line = 1
    col = 1
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        start_col = col
        if ch.isdigit() or (ch == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            while j < n and text[j].isdigit():
                j += 1
            if j < n and text[j] == ".":
                j += 1
                while j < n and text[j].isdigit():
                    j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    j = k
                    while j < n and text[j].isdigit():
                        j += 1
                else:
                    raise DslError("malformed exponent in number", line, start_col)
            tokens.append(Token("NUMBER", text[i:j], line, start_col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(Token("IDENT", text[i:j], line, start_col))
            col += j - i
            i = j
            continue
        two = text[i : i + 2]
        if two in ("<=", ">=", "=="):
            tokens.append(Token("PUNCT", two, line, start_col))
            i += 2
            col += 2
            continue
        if ch in "+-*()[],;=":
            tokens.append(Token("PUNCT", ch, line, start_col))
            i += 1
            col += 1
            continue
        if ch in "<>":
            raise DslError("strict inequalities are not supported", line, start_col)
        raise DslError(f"unexpected character {ch!r}", line, start_col)
    tokens.append(Token("EOF", "", line, col))
    return tokens


# ---------------------------------------------------------------------------
# Parse tree (positions excluded from equality so round-trips compare clean)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float
    line: int = field(compare=False, default=0)
    col: int = field(compare=False, default=0)


@dataclass(frozen=True)
class Ref:
    name: str
    line: int = field(compare=False, default=0)
    col: int = field(compare=False, default=0)


@dataclass(frozen=True)
class IndexRef:
    name: str
    idx: int
    line: int = field(compare=False, default=0)
    col: int = field(compare=False, default=0)


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple
    line: int = field(compare=False, default=0)
    col: int = field(compare=False, default=0)


@dataclass(frozen=True)
class Neg:
    arg: object
    line: int = field(compare=False, default=0)
    col: int = field(compare=False, default=0)


@dataclass(frozen=True)
class Bin:
    op: str  # "+", "-", "*"
    lhs: object
    rhs: object
    line: int = field(compare=False, default=0)
    col: int = field(compare=False, default=0)


@dataclass(frozen=True)
class DeclNode:
    kind: str  # "var", "param", "const"
    name: str
    size: Optional[int] = None
    sign: Optional[str] = None
    line: int = field(compare=False, default=0)
    col: int = field(compare=False, default=0)


@dataclass(frozen=True)
class ConNode:
    lhs: object
    op: str  # "<=", ">=", "=="
    rhs: object
    line: int = field(compare=False, default=0)
    col: int = field(compare=False, default=0)


@dataclass(frozen=True)
class BindNode:
    name: str
    value: object  # float, list of floats, or list of rows
    line: int = field(compare=False, default=0)
    col: int = field(compare=False, default=0)


@dataclass(frozen=True)
class FileNode:
    decls: tuple
    sense: str
    objective: object
    constraints: tuple
    bindings: tuple


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def next(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def fail(self, msg, tok=None):
        tok = tok or self.peek()
        raise DslError(msg, tok.line, tok.col)

    def expect_punct(self, text):
        tok = self.next()
        if tok.kind != "PUNCT" or tok.text != text:
            self.fail(f"expected {text!r}, got {tok.text!r}", tok)
        return tok

    def expect_ident(self, what="identifier"):
        tok = self.next()
        if tok.kind != "IDENT":
            self.fail(f"expected {what}, got {tok.text!r}", tok)
        if tok.text in KEYWORDS or tok.text in FUNCS:
            self.fail(f"{tok.text!r} is reserved and cannot be {what}", tok)
        return tok

    def at_keyword(self, word):
        tok = self.peek()
        return tok.kind == "IDENT" and tok.text == word

    # -- grammar -------------------------------------------------------------

    def parse_file(self):
        decls = []
        while self.peek().kind == "IDENT" and self.peek().text in (
            "var", "param", "const",
        ):
            decls.append(self.parse_decl())
        tok = self.next()
        if tok.kind != "IDENT" or tok.text not in ("minimize", "maximize"):
            self.fail("expected 'minimize' or 'maximize'", tok)
        sense = tok.text
        objective = self.parse_expr()
        constraints = []
        if self.at_keyword("subject"):
            self.next()
            tok = self.next()
            if tok.kind != "IDENT" or tok.text != "to":
                self.fail("expected 'to' after 'subject'", tok)
            constraints.append(self.parse_constraint())
            while not self.at_keyword("data") and self.peek().kind != "EOF":
                constraints.append(self.parse_constraint())
        bindings = []
        if self.at_keyword("data"):
            self.next()
            if self.peek().kind == "EOF":
                self.fail("data section needs at least one binding")
            while self.peek().kind != "EOF":
                bindings.append(self.parse_binding())
        tok = self.peek()
        if tok.kind != "EOF":
            self.fail(f"unexpected trailing input {tok.text!r}", tok)
        return FileNode(
            decls=tuple(decls),
            sense=sense,
            objective=objective,
            constraints=tuple(constraints),
            bindings=tuple(bindings),
        )

    def parse_decl(self):
        head = self.next()
        name = self.expect_ident(f"{head.text} name")
        size = None
        if self.peek().kind == "PUNCT" and self.peek().text == "[":
            if head.text == "const":
                self.fail("const declarations take no size; shape comes from data")
            self.next()
            tok = self.next()
            if tok.kind != "NUMBER" or not tok.text.isdigit():
                self.fail("expected an integer length", tok)
            size = int(tok.text)
            if size < 1:
                self.fail("length must be at least 1", tok)
            self.expect_punct("]")
        sign = None
        if head.text == "param" and self.peek().kind == "IDENT" and self.peek().text in (
            "nonneg", "nonpos", "zero",
        ):
            sign = self.next().text
        return DeclNode(
            kind=head.text, name=name.text, size=size, sign=sign,
            line=head.line, col=head.col,
        )

    def parse_constraint(self):
        lhs = self.parse_expr()
        tok = self.next()
        if tok.kind != "PUNCT" or tok.text not in ("<=", ">=", "=="):
            self.fail("expected a constraint relation (<=, >=, ==)", tok)
        rhs = self.parse_expr()
        return ConNode(lhs=lhs, op=tok.text, rhs=rhs, line=tok.line, col=tok.col)

    def parse_expr(self):
        node = self.parse_term()
        while self.peek().kind == "PUNCT" and self.peek().text in ("+", "-"):
            op = self.next()
            rhs = self.parse_term()
            node = Bin(op.text, node, rhs, line=op.line, col=op.col)
        return node

    def parse_term(self):
        node = self.parse_factor()
        if self.peek().kind == "PUNCT" and self.peek().text == "*":
            op = self.next()
            rhs = self.parse_factor()
            node = Bin("*", node, rhs, line=op.line, col=op.col)
        return node

    def parse_factor(self):
        tok = self.peek()
        if tok.kind == "PUNCT" and tok.text == "-":
            self.next()
            return Neg(self.parse_factor(), line=tok.line, col=tok.col)
        if tok.kind == "PUNCT" and tok.text == "(":
            self.next()
            node = self.parse_expr()
            self.expect_punct(")")
            return node
        if tok.kind == "NUMBER":
            self.next()
            return Num(float(tok.text), line=tok.line, col=tok.col)
        if tok.kind == "IDENT":
            if tok.text in FUNCS:
                self.next()
                self.expect_punct("(")
                args = [self.parse_expr()]
                while self.peek().kind == "PUNCT" and self.peek().text == ",":
                    self.next()
                    args.append(self.parse_expr())
                self.expect_punct(")")
                return Call(tok.text, tuple(args), line=tok.line, col=tok.col)
            if tok.text in KEYWORDS:
                self.fail(f"unexpected keyword {tok.text!r} in expression", tok)
            self.next()
            if self.peek().kind == "PUNCT" and self.peek().text == "[":
                self.next()
                itok = self.next()
                if itok.kind != "NUMBER" or not itok.text.isdigit():
                    self.fail("expected an integer index", itok)
                self.expect_punct("]")
                return IndexRef(tok.text, int(itok.text), line=tok.line, col=tok.col)
            return Ref(tok.text, line=tok.line, col=tok.col)
        if tok.kind == "EOF":
            self.fail("unexpected end of input in expression", tok)
        self.fail(f"unexpected token {tok.text!r} in expression", tok)

    def parse_number_signed(self):
        neg = False
        tok = self.peek()
        if tok.kind == "PUNCT" and tok.text == "-":
            self.next()
            neg = True
        tok = self.next()
        if tok.kind != "NUMBER":
            self.fail("expected a number", tok)
        v = float(tok.text)
        return -v if neg else v

    def parse_binding(self):
        name = self.expect_ident("data name")
        self.expect_punct("=")
        tok = self.peek()
        if tok.kind == "PUNCT" and tok.text == "[":
            self.next()
            rows = [[self.parse_number_signed()]]
            while True:
                tok = self.next()
                if tok.kind != "PUNCT":
                    self.fail("expected ',', ';' or ']' in literal", tok)
                if tok.text == ",":
                    rows[-1].append(self.parse_number_signed())
                elif tok.text == ";":
                    rows.append([self.parse_number_signed()])
                elif tok.text == "]":
                    break
                else:
                    self.fail("expected ',', ';' or ']' in literal", tok)
            if len(rows) == 1:
                value = rows[0]
            else:
                width = len(rows[0])
                for r in rows:
                    if len(r) != width:
                        self.fail("matrix rows have unequal lengths", name)
                value = rows
            return BindNode(name=name.text, value=value, line=name.line, col=name.col)
        value = self.parse_number_signed()
        return BindNode(name=name.text, value=value, line=name.line, col=name.col)


def parse_problem_file(text):
    """Parse problem-file text into a :class:`FileNode` parse tree."""
    return _Parser(tokenize(text)).parse_file()


# ---------------------------------------------------------------------------
# Printing (canonical layout; parse(print(parse(t))) == parse(t))
# ---------------------------------------------------------------------------


def _fmt_num(v):
    return repr(float(v))


_P_ADD, _P_NEG, _P_MUL, _P_UNIT = 1, 2, 3, 4


def _print_expr(node, prec=_P_ADD):
    if isinstance(node, Num):
        return _fmt_num(node.value)
    if isinstance(node, Ref):
        return node.name
    if isinstance(node, IndexRef):
        return f"{node.name}[{node.idx}]"
    if isinstance(node, Call):
        args = ", ".join(_print_expr(a, _P_ADD) for a in node.args)
        return f"{node.func}({args})"
    if isinstance(node, Neg):
        text = "-" + _print_expr(node.arg, _P_UNIT)
        return f"({text})" if prec > _P_NEG else text
    if isinstance(node, Bin):
        if node.op == "*":
            text = (
                _print_expr(node.lhs, _P_MUL) + " * " + _print_expr(node.rhs, _P_MUL)
            )
            return f"({text})" if prec > _P_MUL else text
        text = (
            _print_expr(node.lhs, _P_ADD)
            + f" {node.op} "
            + _print_expr(node.rhs, _P_NEG)
        )
        return f"({text})" if prec > _P_ADD else text
    raise TypeError(f"not an expression node: {node!r}")


def _print_binding_value(value):
    if isinstance(value, float):
        return _fmt_num(value)
    if value and isinstance(value[0], list):
        return "[" + "; ".join(", ".join(_fmt_num(v) for v in row) for row in value) + "]"
    return "[" + ", ".join(_fmt_num(v) for v in value) + "]"


def print_problem_file(pf):
    """Render a parse tree back to canonical problem-file text."""
    lines = []
    for d in pf.decls:
        head = f"{d.kind} {d.name}"
        if d.size is not None:
            head += f"[{d.size}]"
        if d.sign is not None:
            head += f" {d.sign}"
        lines.append(head)
    lines.append(f"{pf.sense} {_print_expr(pf.objective)}")
    if pf.constraints:
        lines.append("subject to")
        for con in pf.constraints:
            lines.append(
                f"  {_print_expr(con.lhs)} {con.op} {_print_expr(con.rhs)}"
            )
    if pf.bindings:
        lines.append("data")
        for b in pf.bindings:
            lines.append(f"  {b.name} = {_print_binding_value(b.value)}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Building models from parse trees
# ---------------------------------------------------------------------------


@dataclass
class BuiltModel:
    """A problem plus its file-level namespace and default parameter values."""

    problem: Problem
    leaves: dict  # name -> Variable | Parameter | Constant
    default_binding: dict  # Parameter -> ndarray-ready value
    file: FileNode


def _build_expr(node, leaves):
    try:
        if isinstance(node, Num):
            return Constant(node.value)
        if isinstance(node, Ref):
            if node.name not in leaves:
                raise DslError(f"unknown name {node.name!r}", node.line, node.col)
            return leaves[node.name]
        if isinstance(node, IndexRef):
            if node.name not in leaves:
                raise DslError(f"unknown name {node.name!r}", node.line, node.col)
            return leaves[node.name][node.idx]
        if isinstance(node, Call):
            args = [_build_expr(a, leaves) for a in node.args]
            kind = "sum" if node.func == "sum" else node.func
            return apply_atom(kind, args)
        if isinstance(node, Neg):
            return -_build_expr(node.arg, leaves)
        if isinstance(node, Bin):
            lhs = _build_expr(node.lhs, leaves)
            rhs = _build_expr(node.rhs, leaves)
            if node.op == "+":
                return lhs + rhs
            if node.op == "-":
                return lhs - rhs
            return lhs * rhs
    except DslError:
        raise
    except (ConeprogError, IndexError, TypeError) as exc:
        raise DslError(str(exc), node.line, node.col) from None
    raise TypeError(f"not an expression node: {node!r}")


def _binding_array(value):
    return np.asarray(value, dtype=float)


def build_model(pf):
    """Turn a parse tree into a verified-shape model.

    Declarations bind names in order; constants take their values (and
    shapes) from the data section, parameters may take default values there.
    All structural errors carry source positions.
    """
    bindings_by_name = {}
    for b in pf.bindings:
        if b.name in bindings_by_name:
            raise DslError(f"duplicate data binding for {b.name!r}", b.line, b.col)
        bindings_by_name[b.name] = b

    leaves = {}
    default_binding = {}
    for d in pf.decls:
        if d.name in leaves:
            raise DslError(f"{d.name!r} is declared twice", d.line, d.col)
        if d.kind == "var":
            leaves[d.name] = Variable(d.size, name=d.name)
            if d.name in bindings_by_name:
                b = bindings_by_name[d.name]
                raise DslError(
                    f"variable {d.name!r} cannot take a data value", b.line, b.col
                )
        elif d.kind == "param":
            leaf = Parameter(d.size, sign=d.sign or "unknown", name=d.name)
            leaves[d.name] = leaf
            if d.name in bindings_by_name:
                b = bindings_by_name[d.name]
                try:
                    default_binding[leaf] = check_value(
                        leaf, _binding_array(b.value)
                    )
                except ConeprogError as exc:
                    raise DslError(str(exc), b.line, b.col) from None
        else:  # const
            if d.name not in bindings_by_name:
                raise DslError(
                    f"const {d.name!r} needs a value in the data section",
                    d.line, d.col,
                )
            b = bindings_by_name[d.name]
            try:
                leaves[d.name] = Constant(_binding_array(b.value), name=d.name)
            except ConeprogError as exc:
                raise DslError(str(exc), b.line, b.col) from None
    for b in pf.bindings:
        if b.name not in leaves:
            raise DslError(f"data for undeclared name {b.name!r}", b.line, b.col)

    objective = _build_expr(pf.objective, leaves)
    wrapper = Minimize if pf.sense == "minimize" else Maximize
    constraints = []
    for con in pf.constraints:
        lhs = _build_expr(con.lhs, leaves)
        rhs = _build_expr(con.rhs, leaves)
        try:
            if con.op == "==":
                constraints.append(Constraint(lhs, "==", rhs))
            elif con.op == "<=":
                constraints.append(Constraint(lhs, "<=", rhs))
            else:
                constraints.append(Constraint(rhs, "<=", lhs))
        except ConeprogError as exc:
            raise DslError(str(exc), con.line, con.col) from None
    try:
        problem = Problem(wrapper(objective), constraints)
    except ConeprogError as exc:
        raise DslError(str(exc), 1, 1) from None
    return BuiltModel(
        problem=problem, leaves=leaves, default_binding=default_binding, file=pf
    )


def parse_expression_in(text, model):
    """Parse one expression against a built model's namespace.

    Used for report columns in sweeps: the expression may reference any
    declared name.
    """
    tokens = tokenize(text)
    parser = _Parser(tokens)
    node = parser.parse_expr()
    tok = parser.peek()
    if tok.kind != "EOF":
        raise DslError(f"unexpected trailing input {tok.text!r}", tok.line, tok.col)
    return _build_expr(node, model.leaves)
