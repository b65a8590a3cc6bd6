"""Lexer/parser/printer for the restricted C-like input language.

The language covers SCoP-shaped kernels: scalar ``int`` declarations act as
size parameters, arrays are 1-D/2-D/3-D ``int``/``float``, loops are
``for (i = e; i < e; i++)`` with unit step, and assignments write one array
element from an expression over array reads, loop variables and constants.
``#pragma scop`` / ``#pragma endscop`` delimit the regions handed to the
polyhedral model.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ParseError, UnsupportedConstructError

INT64 = "int64"
FLOAT64 = "float64"


# -- expressions ------------------------------------------------------------


class Expr:
    pass


@dataclass(frozen=True)
class Name(Expr):
    ident: str


@dataclass(frozen=True)
class IntLit(Expr):
    value: int


@dataclass(frozen=True)
class FloatLit(Expr):
    value: float


@dataclass(frozen=True)
class BinOp(Expr):
    op: str  # + - *
    lhs: Expr
    rhs: Expr


@dataclass(frozen=True)
class ArrayRef(Expr):
    array: str
    subs: tuple


# -- statements -------------------------------------------------------------


@dataclass(frozen=True)
class For:
    var: str
    lower: Expr
    upper: Expr  # exclusive; `i <= e` is normalized to `i < e + 1`
    body: tuple
    pos: tuple = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class If:
    op: str  # < <= > >= ==
    lhs: Expr
    rhs: Expr
    then: tuple
    els: tuple = ()
    pos: tuple = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Assign:
    label: str  # "" when auto-named
    ref: ArrayRef
    rhs: Expr
    pos: tuple = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class ScopBegin:
    pos: tuple = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class ScopEnd:
    pos: tuple = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class ArrayDecl:
    name: str
    elem: str  # INT64 / FLOAT64
    extents: tuple  # of str (symbol) or int


@dataclass(frozen=True)
class Program:
    symbols: tuple  # size-parameter names
    arrays: tuple  # of ArrayDecl
    body: tuple  # of statements

    def array(self, name):
        for a in self.arrays:
            if a.name == name:
                return a
        raise KeyError(name)


# -- lexer ------------------------------------------------------------------

_PUNCT2 = ("<=", ">=", "==", "++", "+=", "-=", "*=", "/=", "--")
_PUNCT1 = "()[]{};:=<>+-*/,#"
_KEYWORDS = {"int", "float", "for", "if", "else", "pragma", "while", "do", "return"}


def _tokenize(source):
    toks = []
    i, line, col = 0, 1, 1
    n = len(source)
    while i < n:
        c = source[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if source.startswith("//", i):
            while i < n and source[i] != "\n":
                i += 1
            continue
        start = (line, col)
        if c.isdigit() or (c == "." and i + 1 < n and source[i + 1].isdigit()):
            j = i
            isfloat = False
            while j < n and (source[j].isdigit() or source[j] == "."):
                if source[j] == ".":
                    isfloat = True
                j += 1
            text = source[i:j]
            if isfloat:
                toks.append(("float", float(text), start))
            else:
                toks.append(("int", int(text), start))
            col += j - i
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            word = source[i:j]
            toks.append(("kw" if word in _KEYWORDS else "id", word, start))
            col += j - i
            i = j
            continue
        two = source[i:i + 2]
        if two in _PUNCT2:
            toks.append(("op", two, start))
            i += 2
            col += 2
            continue
        if c in _PUNCT1:
            toks.append(("op", c, start))
            i += 1
            col += 1
            continue
        raise ParseError("unexpected character %r" % c, line, col)
    toks.append(("eof", "", (line, col)))
    return toks


class _Parser:
    def __init__(self, source):
        self.toks = _tokenize(source)
        self.idx = 0

    def peek(self, ahead=0):
        return self.toks[min(self.idx + ahead, len(self.toks) - 1)]

    def next(self):
        t = self.toks[self.idx]
        self.idx += 1
        return t

    def expect(self, value):
        kind, v, pos = self.next()
        if v != value:
            raise ParseError("expected %r, found %r" % (value, v), *pos)
        return pos

    def error(self, msg):
        _, _, pos = self.peek()
        raise ParseError(msg, *pos)

    # -- declarations --

    def program(self):
        symbols, arrays = [], []
        while self.peek()[1] in ("int", "float"):
            elem = INT64 if self.next()[1] == "int" else FLOAT64
            kind, name, pos = self.next()
            if kind != "id":
                raise ParseError("expected name in declaration", *pos)
            extents = []
            while self.peek()[1] == "[":
                self.next()
                k, v, p = self.next()
                if k == "int":
                    extents.append(v)
                elif k == "id":
                    extents.append(v)
                else:
                    raise ParseError("array extent must be a size parameter or constant", *p)
                self.expect("]")
            self.expect(";")
            if extents:
                arrays.append(ArrayDecl(name, elem, tuple(extents)))
            else:
                if elem != INT64:
                    raise UnsupportedConstructError("size parameters must be int", *pos)
                symbols.append(name)
        body = []
        while self.peek()[0] != "eof":
            body.append(self.stmt())
        for a in arrays:
            for e in a.extents:
                if isinstance(e, str) and e not in symbols:
                    raise ParseError("array %s uses undeclared size parameter %s" % (a.name, e))
        names = [a.name for a in arrays]
        if len(set(names)) != len(names):
            raise ParseError("duplicate array declaration")
        return Program(tuple(symbols), tuple(arrays), tuple(body))

    # -- statements --

    def stmt(self):
        kind, v, pos = self.peek()
        if v == "#":
            return self.pragma()
        if v == "for":
            return self.for_stmt()
        if v == "if":
            return self.if_stmt()
        if v == "while" or v == "do":
            raise UnsupportedConstructError("'%s' loops are not supported" % v, *pos)
        if v == "{":
            self.error("blocks are only allowed as loop/if bodies")
        return self.assign()

    def block_or_stmt(self):
        if self.peek()[1] == "{":
            self.next()
            body = []
            while self.peek()[1] != "}":
                if self.peek()[0] == "eof":
                    self.error("unterminated block")
                body.append(self.stmt())
            self.next()
            return tuple(body)
        return (self.stmt(),)

    def pragma(self):
        pos = self.expect("#")
        kind, v, p = self.next()
        if v != "pragma":
            raise ParseError("expected 'pragma'", *p)
        kind, which, p = self.next()
        if which == "scop":
            return ScopBegin(pos)
        if which == "endscop":
            return ScopEnd(pos)
        raise UnsupportedConstructError("unknown pragma %r" % which, *p)

    def for_stmt(self):
        kind, _, pos = self.next()
        self.expect("(")
        k, var, p = self.next()
        if k != "id":
            raise ParseError("expected loop variable", *p)
        self.expect("=")
        lower = self.expr()
        self.expect(";")
        k, v2, p = self.next()
        if v2 != var:
            raise ParseError("loop condition must test %r" % var, *p)
        k, cmp_op, p = self.next()
        if cmp_op not in ("<", "<="):
            raise UnsupportedConstructError("loop condition must use < or <=", *p)
        bound = self.expr()
        upper = bound if cmp_op == "<" else BinOp("+", bound, IntLit(1))
        self.expect(";")
        k, v3, p = self.next()
        if v3 != var:
            raise ParseError("loop increment must update %r" % var, *p)
        k, inc, p = self.next()
        if inc == "++":
            pass
        elif inc == "+=":
            k2, step, p2 = self.next()
            if k2 != "int" or step != 1:
                raise UnsupportedConstructError("only unit loop steps are supported", *p2)
        else:
            raise UnsupportedConstructError("only incrementing unit-step loops are supported", *p)
        self.expect(")")
        body = self.block_or_stmt()
        return For(var, lower, upper, body, pos)

    def if_stmt(self):
        kind, _, pos = self.next()
        self.expect("(")
        lhs = self.expr()
        k, op, p = self.next()
        if op not in ("<", "<=", ">", ">=", "=="):
            raise UnsupportedConstructError("unsupported comparison %r" % op, *p)
        rhs = self.expr()
        self.expect(")")
        then = self.block_or_stmt()
        els = ()
        if self.peek()[1] == "else":
            self.next()
            els = self.block_or_stmt()
        return If(op, lhs, rhs, then, els, pos)

    def assign(self):
        label = ""
        if self.peek()[0] == "id" and self.peek(1)[1] == ":":
            label = self.next()[1]
            self.next()
        kind, name, pos = self.next()
        if kind != "id":
            raise ParseError("expected an assignment", *pos)
        if self.peek()[1] != "[":
            raise UnsupportedConstructError("scalar assignment is not supported", *pos)
        subs = []
        while self.peek()[1] == "[":
            self.next()
            subs.append(self.expr())
            self.expect("]")
        k, op, p = self.next()
        if op in ("+=", "-=", "*=", "/="):
            raise UnsupportedConstructError("compound assignment %r is not supported" % op, *p)
        if op != "=":
            raise ParseError("expected '='", *p)
        rhs = self.expr()
        self.expect(";")
        return Assign(label, ArrayRef(name, tuple(subs)), rhs, pos)

    # -- expressions --

    def expr(self):
        e = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.next()[1]
            e = BinOp(op, e, self.term())
        return e

    def term(self):
        e = self.unary()
        while self.peek()[1] in ("*", "/"):
            k, op, p = self.next()
            if op == "/":
                raise UnsupportedConstructError("division is not supported in the input language", *p)
            e = BinOp("*", e, self.unary())
        return e

    def unary(self):
        if self.peek()[1] == "-":
            self.next()
            return BinOp("-", IntLit(0), self.unary())
        return self.primary()

    def primary(self):
        kind, v, pos = self.next()
        if kind == "int":
            return IntLit(v)
        if kind == "float":
            return FloatLit(v)
        if kind == "id":
            if self.peek()[1] == "[":
                subs = []
                while self.peek()[1] == "[":
                    self.next()
                    subs.append(self.expr())
                    self.expect("]")
                return ArrayRef(v, tuple(subs))
            return Name(v)
        if v == "(":
            e = self.expr()
            self.expect(")")
            return e
        raise ParseError("unexpected token %r" % (v,), *pos)


def parse_program(source):
    """Parse `.pc` source into a :class:`Program`."""
    p = _Parser(source)
    prog = p.program()
    _check_scop_pairing(prog.body)
    return prog


def _check_scop_pairing(body, depth=0, top=True):
    for s in body:
        if isinstance(s, ScopBegin):
            if not top:
                raise ParseError("#pragma scop must appear at top level", *s.pos)
            if depth:
                raise ParseError("nested #pragma scop", *s.pos)
            depth += 1
        elif isinstance(s, ScopEnd):
            if not top or depth != 1:
                raise ParseError("unmatched #pragma endscop", *s.pos)
            depth -= 1
        elif isinstance(s, For):
            _check_scop_pairing(s.body, depth, top=False)
        elif isinstance(s, If):
            _check_scop_pairing(s.then, depth, top=False)
            _check_scop_pairing(s.els, depth, top=False)
    if top and depth:
        raise ParseError("missing #pragma endscop")
    return depth


# -- printer ----------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2}


def format_expr(e, parent_prec=0):
    if isinstance(e, Name):
        return e.ident
    if isinstance(e, IntLit):
        return str(e.value)
    if isinstance(e, FloatLit):
        return repr(e.value)
    if isinstance(e, ArrayRef):
        return e.array + "".join("[%s]" % format_expr(s) for s in e.subs)
    if isinstance(e, BinOp):
        prec = _PREC[e.op]
        s = "%s %s %s" % (format_expr(e.lhs, prec), e.op, format_expr(e.rhs, prec + 1))
        return "(%s)" % s if prec < parent_prec else s
    raise TypeError(e)


def _fmt_stmt(s, indent, out):
    pad = "  " * indent
    if isinstance(s, ScopBegin):
        out.append("#pragma scop")
    elif isinstance(s, ScopEnd):
        out.append("#pragma endscop")
    elif isinstance(s, For):
        out.append("%sfor (%s = %s; %s < %s; %s++) {"
                   % (pad, s.var, format_expr(s.lower), s.var, format_expr(s.upper), s.var))
        for c in s.body:
            _fmt_stmt(c, indent + 1, out)
        out.append("%s}" % pad)
    elif isinstance(s, If):
        out.append("%sif (%s %s %s) {" % (pad, format_expr(s.lhs), s.op, format_expr(s.rhs)))
        for c in s.then:
            _fmt_stmt(c, indent + 1, out)
        if s.els:
            out.append("%s} else {" % pad)
            for c in s.els:
                _fmt_stmt(c, indent + 1, out)
        out.append("%s}" % pad)
    elif isinstance(s, Assign):
        label = "%s: " % s.label if s.label else ""
        out.append("%s%s%s = %s;" % (pad, label, format_expr(s.ref), format_expr(s.rhs)))
    else:
        raise TypeError(s)


def print_program(p):
    """Canonical text; ``parse_program(print_program(p))`` equals ``p``."""
    out = []
    for name in p.symbols:
        out.append("int %s;" % name)
    for a in p.arrays:
        kw = "int" if a.elem == INT64 else "float"
        out.append("%s %s%s;" % (kw, a.name, "".join("[%s]" % e for e in a.extents)))
    for s in p.body:
        _fmt_stmt(s, 0, out)
    return "\n".join(out) + "\n"
