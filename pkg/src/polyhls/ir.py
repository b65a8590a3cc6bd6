"""The mid-level Affine IR: loops bounded by max/min of affine maps,
affine guards, and opaque statement calls, with a lossless textual format.

Internally both loop ends are inclusive: ``var`` runs over
``[max(lb results), min(ub results)]``.  The printer follows the MLIR-style
exclusive-upper convention, adding 1 to every upper-bound map result (the
``+ 1`` visible in printed maps is exactly that shift); the parser undoes
it, so print/parse round-trips are the identity.

File extension: ``.air``.

Grammar sketch::

    module    := mapdef* "module" "{" decl* op* "}"
    mapdef    := "#" NAME "=" affine_map | "#" NAME "=" integer_set
    decl      := "symbol" NAME
               | "array" NAME ":" ("int64"|"float64") ("[" extent "]")+
               | "stmt" NAME "(" params ")" "{" assignment "}"
    op        := ("affine.for" | "affine.parallel_for") NAME "="
                   "max" mapref "to" "min" mapref "{" op* "}"
               | "affine.if" setref "{" op* "}" ("else" "{" op* "}")?
               | "call" "@" NAME "(" args ")"
    mapref    := "#" NAME "(" args ")" ("[" args "]")?
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from . import frontend as fe
from .affine import (
    AffineMap,
    Add,
    Const,
    IntegerSet,
    _Lexer,
    canon,
    format_expr,
    format_map,
    format_set,
    parse_map_at,
    parse_set_at,
)
from .errors import ParseError


@dataclass(frozen=True)
class MapRef:
    map: AffineMap
    dims: tuple  # operand names for the map dims
    syms: tuple  # operand names for the map symbols


@dataclass(frozen=True)
class SetRef:
    set: IntegerSet
    dims: tuple
    syms: tuple


@dataclass(frozen=True)
class For:
    var: str
    lb: MapRef  # lower bound = max over results
    ub: MapRef  # upper bound = min over results (inclusive)
    parallel: bool
    body: tuple


@dataclass(frozen=True)
class If:
    cond: SetRef
    then: tuple
    els: tuple = ()


@dataclass(frozen=True)
class Call:
    stmt: str
    args: tuple  # loop-var names


@dataclass(frozen=True)
class StmtDef:
    name: str
    params: tuple  # loop-var parameter names, outermost first
    body: fe.Assign  # assignment template over the params


@dataclass(frozen=True)
class AffineIrModule:
    symbols: tuple
    arrays: tuple  # of fe.ArrayDecl
    stmts: tuple  # of StmtDef
    body: tuple  # of ops

    def stmt(self, name):
        for s in self.stmts:
            if s.name == name:
                return s
        raise KeyError(name)


# -- printing ---------------------------------------------------------------


class _MapTable:
    """Interns maps/sets in first-use order for deterministic numbering."""

    def __init__(self):
        self.maps = []
        self.sets = []

    def map_name(self, m):
        for i, prev in enumerate(self.maps):
            if prev == m:
                return "#map%d" % i
        self.maps.append(m)
        return "#map%d" % (len(self.maps) - 1)

    def set_name(self, s):
        for i, prev in enumerate(self.sets):
            if prev == s:
                return "#set%d" % i
        self.sets.append(s)
        return "#set%d" % (len(self.sets) - 1)


def _shift_ub(m):
    """Inclusive -> exclusive upper bound map (+1 on every result)."""
    return AffineMap(m.num_dims, m.num_syms,
                     tuple(canon(Add(r, Const(1))) for r in m.results))


def _unshift_ub(m):
    return AffineMap(m.num_dims, m.num_syms,
                     tuple(canon(Add(r, Const(-1))) for r in m.results))


def _ref_str(name, dims, syms):
    s = "%s(%s)" % (name, ", ".join(dims))
    if syms:
        s += "[%s]" % ", ".join(syms)
    return s


def _print_op(op, table, indent, out):
    pad = "  " * indent
    if isinstance(op, For):
        lb = table.map_name(op.lb.map)
        ub = table.map_name(_shift_ub(op.ub.map))
        kw = "affine.parallel_for" if op.parallel else "affine.for"
        out.append("%s%s %s = max %s to min %s {" % (
            pad, kw, op.var,
            _ref_str(lb, op.lb.dims, op.lb.syms),
            _ref_str(ub, op.ub.dims, op.ub.syms)))
        for c in op.body:
            _print_op(c, table, indent + 1, out)
        out.append("%s}" % pad)
    elif isinstance(op, If):
        s = table.set_name(op.cond.set)
        out.append("%saffine.if %s {" % (pad, _ref_str(s, op.cond.dims, op.cond.syms)))
        for c in op.then:
            _print_op(c, table, indent + 1, out)
        if op.els:
            out.append("%s} else {" % pad)
            for c in op.els:
                _print_op(c, table, indent + 1, out)
        out.append("%s}" % pad)
    elif isinstance(op, Call):
        out.append("%scall @%s(%s)" % (pad, op.stmt, ", ".join(op.args)))
    else:
        raise TypeError(op)


def print_ir(module):
    """Canonical text with maps numbered in first-use order."""
    table = _MapTable()
    body_lines = []
    for op in module.body:
        _print_op(op, table, 1, body_lines)
    decls = []
    for s in module.symbols:
        decls.append("  symbol %s" % s)
    for a in module.arrays:
        decls.append("  array %s : %s %s" % (
            a.name, a.elem, "".join("[%s]" % e for e in a.extents)))
    for s in module.stmts:
        decls.append("  stmt %s(%s) { %s = %s; }" % (
            s.name, ", ".join(s.params),
            fe.format_expr(s.body.ref), fe.format_expr(s.body.rhs)))
    header = []
    for i, m in enumerate(table.maps):
        header.append("#map%d = %s" % (i, format_map(m)))
    for i, s in enumerate(table.sets):
        header.append("#set%d = %s" % (i, format_set(s)))
    lines = header + ["module {"] + decls + body_lines + ["}"]
    return "\n".join(lines) + "\n"


# -- parsing ----------------------------------------------------------------


class _IrParser:
    def __init__(self, text):
        self.lx = _Lexer(text)
        self.maps = {}
        self.sets = {}

    def parse(self):
        lx = self.lx
        while lx.peek()[1] == "#":
            lx.next()
            kind, name, pos = lx.next()
            if kind != "id":
                raise ParseError("expected map/set name after '#'", *pos)
            lx.expect("=")
            k, v, p = lx.peek()
            if v == "affine_map":
                self.maps[name] = parse_map_at(lx)
            elif v == "integer_set":
                self.sets[name] = parse_set_at(lx)
            else:
                raise ParseError("expected affine_map or integer_set", *p)
        lx.expect("module")
        lx.expect("{")
        symbols, arrays, stmts = [], [], []
        while lx.peek()[1] in ("symbol", "array", "stmt"):
            which = lx.next()[1]
            if which == "symbol":
                symbols.append(self._ident())
            elif which == "array":
                arrays.append(self._array())
            else:
                stmts.append(self._stmtdef())
        body = []
        while lx.peek()[1] != "}":
            if lx.peek()[0] == "eof":
                raise ParseError("unterminated module")
            body.append(self._op())
        lx.next()
        return AffineIrModule(tuple(symbols), tuple(arrays), tuple(stmts), tuple(body))

    def _ident(self):
        kind, v, pos = self.lx.next()
        if kind not in ("id", "kw"):
            raise ParseError("expected identifier, found %r" % v, *pos)
        return v

    def _array(self):
        name = self._ident()
        self.lx.expect(":")
        kind, elem, pos = self.lx.next()
        if elem not in (fe.INT64, fe.FLOAT64):
            raise ParseError("element type must be int64 or float64", *pos)
        extents = []
        while self.lx.peek()[1] == "[":
            self.lx.next()
            k, v, p = self.lx.next()
            if k not in ("id", "int"):
                raise ParseError("bad array extent", *p)
            extents.append(v)
            self.lx.expect("]")
        if not extents:
            raise ParseError("array %s needs at least one extent" % name)
        return fe.ArrayDecl(name, elem, tuple(extents))

    def _stmtdef(self):
        name = self._ident()
        self.lx.expect("(")
        params = []
        while self.lx.peek()[1] != ")":
            params.append(self._ident())
            if self.lx.peek()[1] == ",":
                self.lx.next()
        self.lx.next()
        self.lx.expect("{")
        # reuse the frontend expression grammar for the assignment template
        text_toks = []
        depth = 1
        while True:
            kind, v, pos = self.lx.next()
            if kind == "eof":
                raise ParseError("unterminated stmt body", *pos)
            if v == "{":
                depth += 1
            elif v == "}":
                depth -= 1
                if depth == 0:
                    break
            text_toks.append((kind, v))
        src = " ".join(str(v) for _, v in text_toks)
        try:
            stmt = _parse_assignment(src)
        except ParseError as e:
            raise ParseError("in stmt %s: %s" % (name, e))
        return StmtDef(name, tuple(params), stmt)

    def _op(self):
        lx = self.lx
        kind, v, pos = lx.peek()
        if v == "affine":
            lx.next()
            lx.expect(".")
            k2, which, p2 = lx.next()
            if which in ("for", "parallel_for"):
                var = self._ident()
                lx.expect("=")
                kw = lx.next()
                if kw[1] != "max":
                    raise ParseError("expected 'max'", *kw[2])
                lb = self._mapref()
                to = lx.next()
                if to[1] != "to":
                    raise ParseError("expected 'to'", *to[2])
                kw = lx.next()
                if kw[1] != "min":
                    raise ParseError("expected 'min'", *kw[2])
                ub = self._mapref()
                body = self._block()
                return For(var, lb, replace(ub, map=_unshift_ub(ub.map)),
                           which == "parallel_for", body)
            if which == "if":
                cond = self._setref()
                then = self._block()
                els = ()
                if lx.peek()[1] == "else":
                    lx.next()
                    els = self._block()
                return If(cond, then, els)
            raise ParseError("unknown affine op %r" % which, *p2)
        if v == "call":
            lx.next()
            lx.expect("@")
            name = self._ident()
            lx.expect("(")
            args = []
            while lx.peek()[1] != ")":
                args.append(self._ident())
                if lx.peek()[1] == ",":
                    lx.next()
            lx.next()
            return Call(name, tuple(args))
        raise ParseError("expected an op, found %r" % v, *pos)

    def _block(self):
        self.lx.expect("{")
        body = []
        while self.lx.peek()[1] != "}":
            if self.lx.peek()[0] == "eof":
                raise ParseError("unterminated block")
            body.append(self._op())
        self.lx.next()
        return tuple(body)

    def _operands(self):
        dims, syms = [], []
        self.lx.expect("(")
        while self.lx.peek()[1] != ")":
            dims.append(self._ident())
            if self.lx.peek()[1] == ",":
                self.lx.next()
        self.lx.next()
        if self.lx.peek()[1] == "[":
            self.lx.next()
            while self.lx.peek()[1] != "]":
                syms.append(self._ident())
                if self.lx.peek()[1] == ",":
                    self.lx.next()
            self.lx.next()
        return tuple(dims), tuple(syms)

    def _mapref(self):
        self.lx.expect("#")
        kind, name, pos = self.lx.next()
        if name not in self.maps:
            raise ParseError("unknown map reference #%s" % name, *pos)
        m = self.maps[name]
        dims, syms = self._operands()
        if len(dims) != m.num_dims or len(syms) != m.num_syms:
            raise ParseError("map #%s applied with wrong operand counts" % name, *pos)
        return MapRef(m, dims, syms)

    def _setref(self):
        self.lx.expect("#")
        kind, name, pos = self.lx.next()
        if name not in self.sets:
            raise ParseError("unknown set reference #%s" % name, *pos)
        s = self.sets[name]
        dims, syms = self._operands()
        if len(dims) != s.num_dims or len(syms) != s.num_syms:
            raise ParseError("set #%s applied with wrong operand counts" % name, *pos)
        return SetRef(s, dims, syms)


def _parse_assignment(src):
    if not src.rstrip().endswith(";"):
        src = src + " ;"
    p = fe._Parser(src)
    stmt = p.assign()
    if p.peek()[0] != "eof":
        raise ParseError("trailing tokens in assignment")
    return stmt


def parse_ir(text):
    """Parse `.air` text; inverse of :func:`print_ir`."""
    return _IrParser(text).parse()


# -- verification -----------------------------------------------------------


def verify_ir(module):
    """Structural diagnostics; an empty list means the module is valid."""
    diags = []
    arrays = {a.name for a in module.arrays}
    symbols = set(module.symbols)
    stmt_arity = {s.name: len(s.params) for s in module.stmts}

    for s in module.stmts:
        used = _assign_names(s.body)
        for n in used - set(s.params) - symbols - arrays:
            diags.append("stmt %s: unknown name %r in body" % (s.name, n))
        if s.body.ref.array not in arrays:
            diags.append("stmt %s: writes undeclared array %r" % (s.name, s.body.ref.array))

    def check_ref(ref, in_scope, what):
        for d in ref.dims:
            if d not in in_scope:
                diags.append("%s: operand %r is not a loop var in scope" % (what, d))
        for sy in ref.syms:
            if sy not in symbols:
                diags.append("%s: symbol operand %r is not declared" % (what, sy))

    def walk(ops, in_scope):
        for op in ops:
            if isinstance(op, For):
                if op.var in in_scope:
                    diags.append("loop var %r shadows an enclosing loop" % op.var)
                if not op.lb.map.results or not op.ub.map.results:
                    diags.append("loop %r has an empty bound map" % op.var)
                check_ref(op.lb, in_scope, "loop %s lb" % op.var)
                check_ref(op.ub, in_scope, "loop %s ub" % op.var)
                walk(op.body, in_scope | {op.var})
            elif isinstance(op, If):
                check_ref(op.cond, in_scope, "affine.if")
                walk(op.then, in_scope)
                walk(op.els, in_scope)
            elif isinstance(op, Call):
                if op.stmt not in stmt_arity:
                    diags.append("call to unknown stmt @%s" % op.stmt)
                elif len(op.args) != stmt_arity[op.stmt]:
                    diags.append("call @%s expects %d operands, got %d"
                                 % (op.stmt, stmt_arity[op.stmt], len(op.args)))
                else:
                    for a in op.args:
                        if a not in in_scope:
                            diags.append("call @%s: operand %r not in scope" % (op.stmt, a))
            else:
                diags.append("unknown op %r" % (op,))

    walk(module.body, set())
    return diags


def _assign_names(assign):
    names = set()

    def visit(e):
        if isinstance(e, fe.Name):
            names.add(e.ident)
        elif isinstance(e, fe.ArrayRef):
            names.add(e.array)
            for s in e.subs:
                visit(s)
        elif isinstance(e, fe.BinOp):
            visit(e.lhs)
            visit(e.rhs)

    visit(assign.ref)
    visit(assign.rhs)
    return names
