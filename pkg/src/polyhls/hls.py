"""HLS lowering: expand Affine IR into a standard-level loop AST with
explicit floord/ceild/min/max arithmetic, split kernel from host with
per-array transfer classification, insert HLS directives, and emit C99.

The emitted file is self-contained: the host main() reads symbol values
from argv and array contents from stdin, calls the kernel, and prints the
output arrays — no vendor runtime.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from . import frontend as fe
from .affine import Add, CeilDiv, Const, DimRef, FloorDiv, Mod, Mul, SymRef
from .errors import CodegenError
from .ir import AffineIrModule, Call, For, If, StmtDef


# ---------------------------------------------------------------------------
# standard-level expression and op ASTs


@dataclass(frozen=True)
class CVar:
    name: str


@dataclass(frozen=True)
class CInt:
    value: int


@dataclass(frozen=True)
class CBin:
    op: str  # + - *
    lhs: object
    rhs: object


@dataclass(frozen=True)
class CFn:
    """Helper-function call: floord, ceild, min, max (all binary)."""

    fn: str
    args: tuple


@dataclass(frozen=True)
class CFor:
    var: str
    lower: object  # CExpr
    upper: object  # CExpr, inclusive
    parallel: bool
    body: tuple
    pipeline: bool = False
    unroll: int = None


@dataclass(frozen=True)
class CGuard:
    cond: tuple  # of (CExpr, "eq"/"ineq") meaning expr == 0 / expr >= 0
    then: tuple
    els: tuple = ()


@dataclass(frozen=True)
class CCallStmt:
    name: str
    args: tuple  # of variable names


@dataclass(frozen=True)
class LoopAst:
    """Standard level: no affine-map table, bounds are plain expressions."""

    symbols: tuple
    arrays: tuple  # of frontend.ArrayDecl
    stmts: tuple  # of ir.StmtDef
    body: tuple


@dataclass(frozen=True)
class HlsProgram:
    name: str  # kernel is <name>_kernel
    symbols: tuple
    arrays: tuple  # declared arrays actually referenced by the kernel
    stmts: tuple
    kernel: tuple  # LoopAst-level ops
    transfers: tuple  # of (array name, "in"/"out"/"inout"), declaration order


# ---------------------------------------------------------------------------
# affine -> standard expression conversion


def _fold(fn, exprs):
    out = exprs[0]
    for e in exprs[1:]:
        out = CFn(fn, (out, e))
    return out


def _cexpr(e, dims, syms):
    if isinstance(e, Const):
        return CInt(e.value)
    if isinstance(e, DimRef):
        return CVar(dims[e.index])
    if isinstance(e, SymRef):
        return CVar(syms[e.index])
    if isinstance(e, Add):
        lhs, rhs = _cexpr(e.lhs, dims, syms), _cexpr(e.rhs, dims, syms)
        if isinstance(rhs, CInt) and rhs.value < 0:
            return CBin("-", lhs, CInt(-rhs.value))
        if isinstance(rhs, CBin) and rhs.op == "*" and isinstance(rhs.rhs, CInt) \
                and rhs.rhs.value < 0:
            neg = rhs.lhs if rhs.rhs.value == -1 else CBin("*", rhs.lhs, CInt(-rhs.rhs.value))
            return CBin("-", lhs, neg)
        return CBin("+", lhs, rhs)
    if isinstance(e, Mul):
        if e.coef == 1:
            return _cexpr(e.operand, dims, syms)
        return CBin("*", _cexpr(e.operand, dims, syms), CInt(e.coef))
    if isinstance(e, FloorDiv):
        return CFn("floord", (_cexpr(e.operand, dims, syms), CInt(e.divisor)))
    if isinstance(e, CeilDiv):
        return CFn("ceild", (_cexpr(e.operand, dims, syms), CInt(e.divisor)))
    if isinstance(e, Mod):
        x = _cexpr(e.operand, dims, syms)
        return CBin("-", x, CBin("*", CFn("floord", (x, CInt(e.divisor))), CInt(e.divisor)))
    raise CodegenError("cannot lower affine expression %r" % (e,))


def _cond_from_setref(sr):
    if sr.set.num_exists:
        raise CodegenError("guard sets with existentials cannot be lowered")
    parts = []
    for expr, kind in sr.set.constraints:
        parts.append((_cexpr(expr, list(sr.dims), list(sr.syms)), kind))
    return tuple(parts)


def lower_to_standard(m: AffineIrModule) -> LoopAst:
    """Expand every map into explicit min/max/floord/ceild arithmetic;
    `parallel_for` becomes an annotated sequential loop."""

    def conv(ops):
        out = []
        for op in ops:
            if isinstance(op, For):
                lo = _fold("max", [_cexpr(r, list(op.lb.dims), list(op.lb.syms))
                                   for r in op.lb.map.results])
                up = _fold("min", [_cexpr(r, list(op.ub.dims), list(op.ub.syms))
                                   for r in op.ub.map.results])
                out.append(CFor(op.var, lo, up, op.parallel, conv(op.body)))
            elif isinstance(op, If):
                out.append(CGuard(_cond_from_setref(op.cond), conv(op.then), conv(op.els)))
            elif isinstance(op, Call):
                out.append(CCallStmt(op.stmt, op.args))
            else:
                raise CodegenError("unknown op %r" % (op,))
        return tuple(out)

    return LoopAst(m.symbols, m.arrays, m.stmts, conv(m.body))


# ---------------------------------------------------------------------------
# host/kernel partition


def _access_sets(stmts):
    reads, writes = set(), set()

    def scan(e):
        if isinstance(e, fe.ArrayRef):
            reads.add(e.array)
            for s in e.subs:
                scan(s)
        elif isinstance(e, fe.BinOp):
            scan(e.lhs)
            scan(e.rhs)

    for sd in stmts:
        writes.add(sd.body.ref.array)
        for s in sd.body.ref.subs:
            scan(s)
        scan(sd.body.rhs)
    return reads, writes


def partition(m: AffineIrModule, name="scop0") -> HlsProgram:
    """One kernel per module; transfers classified from the statement
    templates' read/write sets (read-only -> in, write-only -> out,
    both -> inout)."""
    ast = lower_to_standard(m)
    reads, writes = _access_sets(m.stmts)
    arrays = tuple(a for a in m.arrays if a.name in reads | writes)
    transfers = []
    for a in arrays:
        if a.name in reads and a.name in writes:
            transfers.append((a.name, "inout"))
        elif a.name in reads:
            transfers.append((a.name, "in"))
        else:
            transfers.append((a.name, "out"))
    return HlsProgram(name, m.symbols, arrays, m.stmts, ast.body, tuple(transfers))


# ---------------------------------------------------------------------------
# directive insertion


@dataclass(frozen=True)
class DirectivePolicy:
    unroll_limit: int = 16


def _const_val(e):
    if isinstance(e, CInt):
        return e.value
    if isinstance(e, CBin):
        a, b = _const_val(e.lhs), _const_val(e.rhs)
        if a is None or b is None:
            return None
        return {"+": a + b, "-": a - b, "*": a * b}[e.op]
    if isinstance(e, CFn):
        vals = [_const_val(x) for x in e.args]
        if any(v is None for v in vals):
            return None
        a, b = vals
        if e.fn == "floord":
            return a // b
        if e.fn == "ceild":
            return -((-a) // b)
        return {"min": min, "max": max}[e.fn](a, b)
    return None


def _trip_count(loop):
    lo, up = _const_val(loop.lower), _const_val(loop.upper)
    if lo is None or up is None:
        return None
    return max(0, up - lo + 1)


def insert_directives(p: HlsProgram, policy: DirectivePolicy = DirectivePolicy()) -> HlsProgram:
    """Innermost loops get `pipeline II=1`; parallel loops with a constant
    trip count within the policy limit get `unroll factor=<trip>`; parallel
    loops with symbolic bounds get nothing."""

    def has_loop(ops):
        for op in ops:
            if isinstance(op, CFor):
                return True
            if isinstance(op, CGuard) and (has_loop(op.then) or has_loop(op.els)):
                return True
        return False

    def mark(ops):
        out = []
        for op in ops:
            if isinstance(op, CFor):
                body = mark(op.body)
                pipe = not has_loop(op.body)
                unroll = None
                if op.parallel:
                    trip = _trip_count(op)
                    if trip is not None and 1 <= trip <= policy.unroll_limit:
                        unroll = trip
                out.append(replace(op, body=body, pipeline=pipe, unroll=unroll))
            elif isinstance(op, CGuard):
                out.append(replace(op, then=mark(op.then), els=mark(op.els)))
            else:
                out.append(op)
        return tuple(out)

    return replace(p, kernel=mark(p.kernel))


# ---------------------------------------------------------------------------
# C emission

_HELPERS = """\
static long long floord(long long a, long long b) {
  return (a >= 0) ? a / b : -((-a + b - 1) / b);
}
static long long ceild(long long a, long long b) {
  return floord(a + b - 1, b);
}
static long long maxll(long long a, long long b) { return a > b ? a : b; }
static long long minll(long long a, long long b) { return a < b ? a : b; }
"""

_PREC = {"+": 1, "-": 1, "*": 2}


def _c_of(e, prec=0):
    if isinstance(e, CVar):
        return e.name
    if isinstance(e, CInt):
        return str(e.value) if e.value >= 0 else "(%d)" % e.value
    if isinstance(e, CBin):
        p = _PREC[e.op]
        # '-' is left-associative; parenthesize a right operand of equal prec
        s = "%s %s %s" % (_c_of(e.lhs, p), e.op, _c_of(e.rhs, p + (e.op in "-")))
        return "(%s)" % s if p < prec else s
    if isinstance(e, CFn):
        fn = {"min": "minll", "max": "maxll"}.get(e.fn, e.fn)
        return "%s(%s)" % (fn, ", ".join(_c_of(a) for a in e.args))
    raise CodegenError("cannot emit %r" % (e,))


def _c_elem(kind):
    return "long long" if kind == fe.INT64 else "double"


def _c_float_lit(v):
    return float(v).hex()


def _c_body_expr(e, prec=0):
    if isinstance(e, fe.Name):
        return e.ident
    if isinstance(e, fe.IntLit):
        return str(e.value) if e.value >= 0 else "(%d)" % e.value
    if isinstance(e, fe.FloatLit):
        return _c_float_lit(e.value)
    if isinstance(e, fe.ArrayRef):
        return e.array + "".join("[%s]" % _c_body_expr(s) for s in e.subs)
    if isinstance(e, fe.BinOp):
        p = _PREC[e.op]
        s = "%s %s %s" % (_c_body_expr(e.lhs, p), e.op,
                          _c_body_expr(e.rhs, p + (e.op in "-")))
        return "(%s)" % s if p < prec else s
    raise CodegenError("cannot emit statement expression %r" % (e,))


def _subst_names(e, mapping):
    if isinstance(e, fe.Name):
        return fe.Name(mapping.get(e.ident, e.ident))
    if isinstance(e, fe.ArrayRef):
        return fe.ArrayRef(e.array, tuple(_subst_names(s, mapping) for s in e.subs))
    if isinstance(e, fe.BinOp):
        return fe.BinOp(e.op, _subst_names(e.lhs, mapping), _subst_names(e.rhs, mapping))
    return e


def _nontrivial_bound(e):
    return isinstance(e, CFn) and e.fn in ("min", "max")


def emit_c(p: HlsProgram) -> str:
    """Self-contained C99: helpers, `<name>_kernel` with pragmas, and a
    host main() (argv symbols, stdin array data, stdout results)."""
    out = []
    w = out.append
    w("#include <stdio.h>")
    w("#include <stdlib.h>")
    w("")
    w(_HELPERS)
    stmt_by_name = {s.name: s for s in p.stmts}
    sym_params = ["long long %s" % s for s in p.symbols]
    arr_params = ["%s %s%s" % (_c_elem(a.elem), a.name,
                               "".join("[%s]" % e for e in a.extents))
                  for a in p.arrays]
    sig = "void %s_kernel(%s)" % (p.name, ", ".join(sym_params + arr_params))
    w(sig + " {")
    counter = [0]

    def emit_ops(ops, ind):
        pad = "  " * ind
        for op in ops:
            if isinstance(op, CFor):
                lo, up = _c_of(op.lower), _c_of(op.upper)
                if _nontrivial_bound(op.lower):
                    k = counter[0]
                    counter[0] += 1
                    w("%slong long lb%d = %s;" % (pad, k, lo))
                    lo = "lb%d" % k
                if _nontrivial_bound(op.upper):
                    k = counter[0]
                    counter[0] += 1
                    w("%slong long ub%d = %s;" % (pad, k, up))
                    up = "ub%d" % k
                w("%sfor (long long %s = %s; %s <= %s; %s++) {%s"
                  % (pad, op.var, lo, op.var, up, op.var,
                     "  /* parallel */" if op.parallel else ""))
                if op.pipeline:
                    w("#pragma HLS pipeline II=1")
                if op.unroll is not None:
                    w("#pragma HLS unroll factor=%d" % op.unroll)
                emit_ops(op.body, ind + 1)
                w(pad + "}")
            elif isinstance(op, CGuard):
                conds = []
                for e, kind in op.cond:
                    conds.append("%s %s 0" % (_c_of(e, 1), "==" if kind == "eq" else ">="))
                w("%sif (%s) {" % (pad, " && ".join(conds) if conds else "1"))
                emit_ops(op.then, ind + 1)
                if op.els:
                    w(pad + "} else {")
                    emit_ops(op.els, ind + 1)
                w(pad + "}")
            elif isinstance(op, CCallStmt):
                sd = stmt_by_name[op.name]
                mapping = dict(zip(sd.params, op.args))
                a = _subst_names(sd.body.ref, mapping)
                rhs = _subst_names(sd.body.rhs, mapping)
                w("%s%s = %s;  /* %s */" % (pad, _c_body_expr(a), _c_body_expr(rhs), op.name))
            else:
                raise CodegenError("cannot emit op %r" % (op,))

    emit_ops(p.kernel, 1)
    w("}")
    w("")
    # host: argv symbols, stdin for in/inout arrays, calloc-zero for out,
    # kernel call, out/inout arrays printed (%a keeps doubles bit-exact)
    w("int main(int argc, char **argv) {")
    w("  if (argc != %d) {" % (1 + len(p.symbols)))
    w('    fprintf(stderr, "usage: %%s %s\\n", argv[0]);' % " ".join(p.symbols))
    w("    return 1;")
    w("  }")
    for i, s in enumerate(p.symbols):
        w("  long long %s = atoll(argv[%d]);" % (s, i + 1))
    kinds = dict(p.transfers)
    for a in p.arrays:
        size = " * ".join(str(e) for e in a.extents)
        et = _c_elem(a.elem)
        w("  %s *%s_buf = calloc(%s, sizeof(%s));" % (et, a.name, size, et))
    for a in p.arrays:
        if kinds[a.name] in ("in", "inout"):
            size = " * ".join(str(e) for e in a.extents)
            fmt = "%lld" if a.elem == fe.INT64 else "%lf"
            w("  for (long long k = 0; k < %s; k++) {" % size)
            w('    if (scanf("%s", &%s_buf[k]) != 1) {' % (fmt, a.name))
            w('      fprintf(stderr, "bad input for %s\\n");' % a.name)
            w("      return 1;")
            w("    }")
            w("  }")
    args = list(p.symbols) + [
        "(%s (*)%s)%s_buf" % (_c_elem(a.elem),
                              "".join("[%s]" % e for e in a.extents[1:]), a.name)
        if len(a.extents) > 1 else "%s_buf" % a.name
        for a in p.arrays]
    w("  %s_kernel(%s);" % (p.name, ", ".join(args)))
    for a in p.arrays:
        if kinds[a.name] in ("out", "inout"):
            size = " * ".join(str(e) for e in a.extents)
            fmt = "%lld" if a.elem == fe.INT64 else "%a"
            w("  for (long long k = 0; k < %s; k++) {" % size)
            w('    printf("%s\\n", %s_buf[k]);' % (fmt, a.name))
            w("  }")
    w("  return 0;")
    w("}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# textual dump of the standard level (`--emit=std`)


def print_std(ast) -> str:
    body = ast.kernel if isinstance(ast, HlsProgram) else ast.body
    stmts = ast.stmts
    out = []
    for s in ast.symbols:
        out.append("symbol %s" % s)
    for a in ast.arrays:
        out.append("array %s : %s %s" % (
            a.name, "int64" if a.elem == fe.INT64 else "float64",
            "".join("[%s]" % e for e in a.extents)))
    for sd in stmts:
        out.append("stmt %s(%s) { %s = %s; }" % (
            sd.name, ", ".join(sd.params),
            fe.format_expr(sd.body.ref), fe.format_expr(sd.body.rhs)))
    if isinstance(ast, HlsProgram):
        for name, kind in ast.transfers:
            out.append("transfer %s %s" % (kind, name))

    def walk(ops, ind):
        pad = "  " * ind
        for op in ops:
            if isinstance(op, CFor):
                flags = []
                if op.parallel:
                    flags.append("parallel")
                if op.pipeline:
                    flags.append("pipeline")
                if op.unroll is not None:
                    flags.append("unroll=%d" % op.unroll)
                tag = (" " + " ".join(flags)) if flags else ""
                out.append("%sfor%s %s = %s to %s {" % (
                    pad, tag, op.var, _c_of(op.lower), _c_of(op.upper)))
                walk(op.body, ind + 1)
                out.append(pad + "}")
            elif isinstance(op, CGuard):
                conds = " && ".join("%s %s 0" % (_c_of(e, 1), "==" if k == "eq" else ">=")
                                    for e, k in op.cond)
                out.append("%sif %s {" % (pad, conds))
                walk(op.then, ind + 1)
                if op.els:
                    out.append(pad + "} else {")
                    walk(op.els, ind + 1)
                out.append(pad + "}")
            elif isinstance(op, CCallStmt):
                out.append("%scall %s(%s)" % (pad, op.name, ", ".join(op.args)))

    walk(body, 0)
    return "\n".join(out) + "\n"
