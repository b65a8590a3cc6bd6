"""Polyhedra-to-loops scanning: turn a scheduled Scop into Affine IR.

Schedule time levels are scanned outer-to-inner.  Constant levels become
sequencing, loop levels become ``affine.for`` ops whose bounds come from
Fourier-Motzkin elimination of the inner dims (max-of-lowers /
min-of-uppers, with floordiv/ceildiv where coefficients demand it).
Statements sharing a loop level must agree on its bounds; no CLooG-style
domain separation is attempted.
"""

from __future__ import annotations

from .affine import (
    EQ,
    INEQ,
    Add,
    AffineMap,
    Const,
    DimRef,
    IntegerSet,
    Mul,
    SymRef,
    shift_dims,
)
from .errors import CodegenError
from .ir import AffineIrModule, Call, For, If, MapRef, SetRef, StmtDef


def _scan_set(scop, stmt):
    """Set over (time loop dims ++ domain dims): domain constraints plus
    one equality per loop level tying the time dim to the schedule."""
    levels = scop.loop_levels()
    L = len(levels)
    nd = stmt.domain.num_dims
    base = stmt.domain.insert_dims(0, L)
    cons = []
    for i, lvl in enumerate(levels):
        res = shift_dims(stmt.schedule.results[lvl], L)
        cons.append((Add(DimRef(i), Mul(res, -1)), EQ))
    ties = IntegerSet.from_constraints(L + nd, len(scop.symbols), cons)
    return base.intersect(ties)


def _stmt_is_empty(scop, stmt):
    ctx = scop.context.insert_dims(0, stmt.domain.num_dims)
    return stmt.domain.intersect(ctx).is_empty()


def _level_var_name(scop, group, level, loop_index, taken):
    name = None
    for s in group:
        r = s.schedule.results[level]
        if isinstance(r, DimRef):
            n = s.dim_names[r.index]
            if name in (None, n):
                name = n
                continue
        name = None
        break
    if name is None:
        name = "t%d" % (loop_index + 1)
    while name in taken:
        name += "_"
    return name


def _guard_setref(scop, stmt, var_names, dim_level):
    """Rewrite the statement guard (over domain dims) onto the scan dims."""
    g = stmt.guard
    L = len(var_names)
    nd, ne, ns = g.num_dims, g.num_exists, g.num_syms
    rows = []
    for coeffs, is_eq in g.rows:
        new = [0] * (L + ne + ns + 1)
        for d in range(nd):
            if coeffs[d] == 0:
                continue
            lvl = dim_level.get(d)
            if lvl is None:
                raise CodegenError(
                    "guard of %s uses dim %s which is not directly scheduled"
                    % (stmt.name, stmt.dim_names[d]))
            new[lvl] += coeffs[d]
        for k in range(ne + ns + 1):
            new[L + k] += coeffs[nd + k]
        rows.append((tuple(new), is_eq))
    gset = IntegerSet(L, ne, ns, tuple(rows))
    return SetRef(gset, tuple(var_names), tuple(scop.symbols))


def generate_loops(scop):
    """Affine IR executing exactly the Scop's instances in
    schedule-lexicographic order (parallel levels excepted)."""
    if not scop.statements:
        return AffineIrModule(tuple(scop.symbols), tuple(scop.arrays), (), ())
    stmts = [s for s in scop.statements if not _stmt_is_empty(scop, s)]
    levels = scop.loop_levels()
    level_loop_index = {lvl: i for i, lvl in enumerate(levels)}
    depth = scop.time_depth
    syms = tuple(scop.symbols)
    scan_sets = {s.name: _scan_set(scop, s) for s in stmts}

    # domain dim -> loop level (for call operands and guards)
    dim_level = {}
    for s in stmts:
        mapping = {}
        for lvl in levels:
            r = s.schedule.results[lvl]
            if isinstance(r, DimRef):
                mapping[r.index] = level_loop_index[lvl]
        dim_level[s.name] = mapping

    def leaf(stmt, var_names):
        args = []
        for d in stmt.body_dims:
            lvl = dim_level[stmt.name].get(d)
            if lvl is None:
                raise CodegenError(
                    "statement %s: loop var %s is not directly scheduled"
                    % (stmt.name, stmt.dim_names[d]))
            args.append(var_names[lvl])
        op = Call(stmt.name, tuple(args))
        if stmt.guard is not None:
            op = If(_guard_setref(scop, stmt, var_names, dim_level[stmt.name]), (op,))
        return op

    def gen(group, level, var_names):
        if level == depth:
            return tuple(leaf(s, var_names) for s in group)
        consts = [s.schedule.results[level] for s in group]
        if all(isinstance(c, Const) for c in consts):
            order = sorted(set(c.value for c in consts))
            out = []
            for v in order:
                sub = [s for s, c in zip(group, consts) if c.value == v]
                out.extend(gen(sub, level + 1, var_names))
            return tuple(out)
        if any(isinstance(c, Const) for c in consts):
            raise CodegenError(
                "mixed constant/loop schedule results at time level %d" % level)
        li = level_loop_index[level]
        bounds = None
        for s in group:
            lo, up = scan_sets[s.name].bounds_for_dim(li)
            key = ([repr(e) for e in lo], [repr(e) for e in up])
            if bounds is None:
                bounds = (lo, up, key)
            elif bounds[2] != key:
                raise CodegenError(
                    "statements %s share a loop level with differing bounds"
                    % [s.name for s in group])
        lo, up, _ = bounds
        var = _level_var_name(scop, group, level, li, set(var_names))
        operands = tuple(var_names[:li])
        lb = MapRef(AffineMap(li, len(syms), tuple(lo)), operands, syms)
        ub = MapRef(AffineMap(li, len(syms), tuple(up)), operands, syms)
        body = gen(group, level + 1, var_names + [var])
        return (For(var, lb, ub, level in scop.parallel_levels, body),)

    body = gen(stmts, 0, []) if stmts else ()
    from dataclasses import replace as _dc_replace
    defs = tuple(StmtDef(s.name, tuple(s.dim_names[d] for d in s.body_dims),
                         _dc_replace(s.body, label=""))
                 for s in stmts)
    return AffineIrModule(syms, tuple(scop.arrays), defs, body)


def dump_bounds(module):
    """`--dump=bounds`: per-loop lower/upper map results."""
    lines = []

    def walk(ops, depth):
        for op in ops:
            if isinstance(op, For):
                lines.append("%s%s: lb max%s  ub min%s" % (
                    "  " * depth, op.var,
                    [str(r) for r in op.lb.map.results],
                    [str(r) for r in op.ub.map.results]))
                walk(op.body, depth + 1)
            elif isinstance(op, If):
                walk(op.then, depth)
                walk(op.els, depth)

    walk(module.body, 0)
    return "\n".join(lines) + "\n"


def simplify_bounds(module, context=None):
    """Drop bound-map results provably dominated by another result in their
    enclosing context; the scanned iteration sets are unchanged.

    `context` is an IntegerSet over the module symbols (defaults to every
    symbol >= 1).
    """
    ns = len(module.symbols)
    if context is None:
        context = IntegerSet.from_constraints(
            0, ns, [(Add(SymRef(i), Const(-1)), INEQ) for i in range(ns)])

    def dominated(e1, e2, rows, nouter, drop_if):
        # drop_if "ge": drop e1 when e1 >= e2 always; "le": when e1 <= e2
        diff = Add(e1, Mul(e2, -1))
        test = Add(Mul(diff, -1), Const(-1)) if drop_if == "ge" else Add(diff, Const(-1))
        cons = list(rows) + [(test, INEQ)]
        s = IntegerSet.from_constraints(nouter, ns, cons)
        return s.is_empty()

    def prune(results, rows, nouter, drop_if):
        keep = list(results)
        i = 0
        while i < len(keep):
            removed = False
            for j, other in enumerate(keep):
                if i == j:
                    continue
                if dominated(keep[i], other, rows, nouter, drop_if):
                    keep.pop(i)
                    removed = True
                    break
            if not removed:
                i += 1
        return tuple(keep)

    ctx_rows = [(e, k) for e, k in context.constraints]

    def walk(ops, rows, nouter):
        out = []
        for op in ops:
            if isinstance(op, For):
                lo = prune(op.lb.map.results, rows, nouter, "le")
                up = prune(op.ub.map.results, rows, nouter, "ge")
                var = DimRef(nouter)
                inner = list(rows)
                for e in lo:
                    inner.append((Add(var, Mul(e, -1)), INEQ))
                for e in up:
                    inner.append((Add(e, Mul(var, -1)), INEQ))
                body = walk(op.body, inner, nouter + 1)
                out.append(For(op.var,
                               MapRef(AffineMap(nouter, ns, lo), op.lb.dims, op.lb.syms),
                               MapRef(AffineMap(nouter, ns, up), op.ub.dims, op.ub.syms),
                               op.parallel, body))
            elif isinstance(op, If):
                out.append(If(op.cond, walk(op.then, rows, nouter), walk(op.els, rows, nouter)))
            else:
                out.append(op)
        return tuple(out)

    body = walk(module.body, ctx_rows, 0)
    return AffineIrModule(module.symbols, module.arrays, module.stmts, body)
