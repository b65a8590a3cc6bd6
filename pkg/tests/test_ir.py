"""Affine IR printer/parser/verifier tests."""

import random

import pytest

from polyhls import frontend as fe
from polyhls.affine import (Add, AffineMap, Const, DimRef, FloorDiv, IntegerSet,
                            INEQ, Mul, SymRef)
from polyhls.codegen import generate_loops, simplify_bounds
from polyhls.errors import ParseError
from polyhls.ir import (AffineIrModule, Call, For, If, MapRef, SetRef, StmtDef,
                        parse_ir, print_ir, verify_ir)
from polyhls.scop import build_scop
from polyhls.transforms import TilingSpec, tile, wavefront_parallelize

import corpus


def wavefront_module():
    scop = build_scop(fe.parse_program(corpus.STENCIL2D.source))[0]
    scop = wavefront_parallelize(tile(scop, TilingSpec((32, 32))))
    return simplify_bounds(generate_loops(scop))


def random_module(rng):
    """Small random module: a loop nest with random affine bounds, an
    optional guard, and a call."""
    nsyms = rng.randrange(1, 3)
    symbols = tuple("NM"[:nsyms])
    depth = rng.randrange(1, 4)
    params = tuple("ijk"[:depth])
    arr = fe.ArrayDecl("A", fe.FLOAT64, (symbols[0],) * 1)
    body_expr = fe.BinOp("+", fe.ArrayRef("A", (fe.Name(params[-1]),)),
                         fe.FloatLit(1.5))
    sd = StmtDef("S1", params, fe.Assign("", fe.ArrayRef("A", (fe.Name(params[-1]),)),
                                         body_expr))

    def rand_expr(ndims):
        e = Const(rng.randrange(-3, 4))
        for d in range(ndims):
            if rng.random() < 0.5:
                e = Add(e, Mul(DimRef(d), rng.randrange(-2, 3)))
        if rng.random() < 0.5:
            e = Add(e, Mul(SymRef(rng.randrange(nsyms)), rng.choice((1, 2))))
        if rng.random() < 0.3:
            e = FloorDiv(e, rng.choice((2, 4, 16)))
        return e

    def mapref(ndims, vars_):
        n = rng.randrange(1, 3)
        m = AffineMap(ndims, nsyms, tuple(rand_expr(ndims) for _ in range(n)))
        return MapRef(m, tuple(vars_), symbols)

    def build(level, vars_):
        if level == depth:
            ops = [Call("S1", params)]
            if rng.random() < 0.4:
                cons = [(Add(DimRef(0), Const(rng.randrange(0, 3))), INEQ)]
                s = IntegerSet.from_constraints(1, nsyms, cons)
                ops = [If(SetRef(s, (vars_[0],), symbols), tuple(ops))]
            return tuple(ops)
        v = params[level]
        return (For(v, mapref(level, vars_), mapref(level, vars_),
                    rng.random() < 0.3, build(level + 1, vars_ + [v])),)

    return AffineIrModule(symbols, (arr,), (sd,), build(0, []))


class TestPrint:
    def test_wavefront_maps_present(self):
        text = print_ir(wavefront_module())
        assert "#map1 = affine_map<()[s0] -> ((s0 - 1) floordiv 16 + 1)>" in text
        assert "affine.parallel_for tj" in text
        assert "call @S1(i, j)" in text

    def test_empty_module(self):
        text = print_ir(AffineIrModule((), (), (), ()))
        assert text == "module {\n}\n"

    def test_print_parse_print_fixed_point(self):
        rng = random.Random(99)
        for _ in range(50):
            m = random_module(rng)
            text = print_ir(m)
            assert print_ir(parse_ir(text)) == text

    def test_map_numbering_first_use_order(self):
        text = print_ir(wavefront_module())
        header = [l for l in text.splitlines() if l.startswith("#map")]
        assert [l.split(" ")[0] for l in header] == \
            ["#map%d" % i for i in range(len(header))]


class TestParse:
    def test_round_trip_wavefront(self):
        m = wavefront_module()
        assert parse_ir(print_ir(m)) == m

    def test_round_trip_corpus_untransformed(self):
        for entry in corpus.ALL:
            scop = build_scop(fe.parse_program(entry.source))[0]
            m = simplify_bounds(generate_loops(scop))
            assert parse_ir(print_ir(m)) == m, entry.name

    def test_depth_four_nest(self):
        text = print_ir(wavefront_module())
        m = parse_ir(text)
        depth = 0
        op = m.body[0]
        while isinstance(op, For):
            depth += 1
            op = op.body[0]
        assert depth == 4 and isinstance(op, Call)

    def test_unknown_map_reference(self):
        bad = ("#map0 = affine_map<()[s0] -> (0)>\n"
               "module {\n  symbol N\n"
               "  affine.for i = max #map0()[N] to min #map9()[N] {\n  }\n}\n")
        with pytest.raises(ParseError, match="map9"):
            parse_ir(bad)

    def test_wrong_operand_count(self):
        bad = ("#map0 = affine_map<(d0)[s0] -> (d0)>\n"
               "module {\n  symbol N\n"
               "  affine.for i = max #map0()[N] to min #map0()[N] {\n  }\n}\n")
        with pytest.raises(ParseError, match="operand"):
            parse_ir(bad)

    def test_syntax_error_has_location(self):
        with pytest.raises(ParseError):
            parse_ir("module {\n  affine.while i {\n}\n")


class TestVerify:
    def test_valid_module_clean(self):
        assert verify_ir(wavefront_module()) == []

    def test_random_modules_clean(self):
        rng = random.Random(5)
        for _ in range(20):
            assert verify_ir(random_module(rng)) == []

    def test_call_arity_diagnostic(self):
        m = wavefront_module()

        def rewrite(ops):
            out = []
            for op in ops:
                if isinstance(op, For):
                    out.append(For(op.var, op.lb, op.ub, op.parallel,
                                   rewrite(op.body)))
                elif isinstance(op, Call):
                    out.append(Call(op.stmt, op.args[:1]))
                else:
                    out.append(op)
            return tuple(out)

        bad = AffineIrModule(m.symbols, m.arrays, m.stmts, rewrite(m.body))
        diags = verify_ir(bad)
        assert len(diags) == 1 and "S1" in diags[0]

    def test_shadowed_loop_var_diagnostic(self):
        m0 = AffineMap(0, 0, (Const(0),))
        inner = For("i", MapRef(m0, (), ()), MapRef(m0, (), ()), False, ())
        outer = For("i", MapRef(m0, (), ()), MapRef(m0, (), ()), False, (inner,))
        diags = verify_ir(AffineIrModule((), (), (), (outer,)))
        assert any("shadow" in d for d in diags)

    def test_out_of_scope_operand_diagnostic(self):
        m0 = AffineMap(0, 0, (Const(0),))
        m1 = AffineMap(1, 0, (DimRef(0),))
        loop = For("i", MapRef(m1, ("q",), ()), MapRef(m0, (), ()), False, ())
        diags = verify_ir(AffineIrModule((), (), (), (loop,)))
        assert any("q" in d for d in diags)


class TestUbShift:
    def test_printed_upper_is_exclusive(self):
        # internal inclusive ub N-1 prints as the exclusive map result s0
        scop = build_scop(fe.parse_program(corpus.COPY.source))[0]
        m = simplify_bounds(generate_loops(scop))
        text = print_ir(m)
        assert "affine_map<()[s0] -> (s0)>" in text
