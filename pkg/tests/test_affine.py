"""Tests for the integer affine algebra core."""

import pytest
from hypothesis import given, settings, strategies as st

from polyhls.affine import (
    EQ,
    INEQ,
    Add,
    AffineMap,
    CeilDiv,
    Const,
    DimRef,
    FloorDiv,
    IntegerSet,
    Mod,
    Mul,
    SymRef,
    apply_unimodular,
    bounds_for_dim,
    canon,
    ceildiv,
    compose,
    eval_expr,
    floordiv,
    fm_project,
    format_expr,
    format_map,
    format_set,
    is_empty,
    parse_map,
    parse_set,
)
from polyhls.errors import (
    ArityMismatchError,
    MalformedExpressionError,
    NonUnimodularMatrixError,
    UnboundedDimensionError,
)


def box(bounds, num_syms=0):
    """IntegerSet {lo_k <= d_k <= hi_k} from [(lo, hi), ...] of ints."""
    cons = []
    for k, (lo, hi) in enumerate(bounds):
        cons.append((Add(DimRef(k), Const(-lo)), INEQ))
        cons.append((Add(Const(hi), Mul(DimRef(k), -1)), INEQ))
    return IntegerSet.from_constraints(len(bounds), num_syms, cons)


class TestEvalExpr:
    def test_tile_ub_map_at_32(self):
        # ((s0 - 1) floordiv 16 + 1) at s0 = 32
        e = Add(FloorDiv(Add(SymRef(0), Const(-1)), 16), Const(1))
        assert eval_expr(e, (), (32,)) == 2

    def test_identity_dim(self):
        assert eval_expr(DimRef(0), (0,), ()) == 0

    def test_ceild_lbp_formula(self):
        # ceild(32*d0 - s0 + 1, 32) at d0=1, s0=40 -> ceil(-7/32) = 0
        e = CeilDiv(Add(Mul(DimRef(0), 32), Add(Mul(SymRef(0), -1), Const(1))), 32)
        assert eval_expr(e, (1,), (40,)) == 0

    def test_index_out_of_range(self):
        with pytest.raises(MalformedExpressionError):
            eval_expr(DimRef(2), (0,), ())

    def test_mod(self):
        assert eval_expr(Mod(Const(-7), 3), (), ()) == 2

    @given(st.integers(-100, 100), st.integers(1, 16))
    def test_floordiv_ceildiv_round_correctly(self, a, b):
        import math
        assert eval_expr(FloorDiv(Const(a), b)) == math.floor(a / b)
        assert eval_expr(CeilDiv(Const(a), b)) == math.ceil(a / b)


class TestCanonAndFormat:
    def test_sum_collapses(self):
        e = Add(Add(DimRef(0), Const(2)), Add(Mul(DimRef(0), 2), Const(-2)))
        assert canon(e) == canon(Mul(DimRef(0), 3))

    def test_format_parse_round_trip(self):
        m = AffineMap(2, 1, (Add(Mul(DimRef(0), 32), Mul(DimRef(1), -32)),
                             Add(FloorDiv(SymRef(0), 4), Const(1))))
        assert parse_map(format_map(m)) == m

    def test_tile_ub_map_text(self):
        m = parse_map("affine_map<()[s0] -> ((s0 - 1) floordiv 16 + 1)>")
        assert m.eval((), (32,)) == (2,)
        assert m.eval((), (33,)) == (3,)


class TestProject:
    def test_box_projection(self):
        s = box([(1, 3), (1, 3)])
        p = fm_project(s, 1)
        assert p.points() == {(i,) for i in range(1, 4)}

    def test_diagonal_slice(self):
        # {(i,j): i+j=4, 1<=j<=3} project j -> {i: 1<=i<=3}
        cons = [(Add(Add(DimRef(0), DimRef(1)), Const(-4)), EQ),
                (Add(DimRef(1), Const(-1)), INEQ),
                (Add(Const(3), Mul(DimRef(1), -1)), INEQ)]
        s = IntegerSet.from_constraints(2, 0, cons)
        assert fm_project(s, 1).points() == {(1,), (2,), (3,)}

    def test_stencil_domain_projection(self):
        # {1 <= i,j <= N-1} project j -> {1 <= i <= N-1}
        cons = []
        for d in range(2):
            cons.append((Add(DimRef(d), Const(-1)), INEQ))
            cons.append((Add(SymRef(0), Add(Mul(DimRef(d), -1), Const(-1))), INEQ))
        s = IntegerSet.from_constraints(2, 1, cons)
        p = fm_project(s, 1)
        for n in (2, 5, 9):
            assert p.points((n,)) == {(i,) for i in range(1, n)}

    @given(st.lists(st.tuples(st.integers(-6, 6), st.integers(-6, 6)),
                    min_size=2, max_size=2))
    def test_project_commutes_with_enumeration_on_boxes(self, bs):
        bounds = [(min(a, b), max(a, b)) for a, b in bs]
        s = box(bounds)
        projected = fm_project(s, 1).points()
        direct = {(p[0],) for p in s.points()}
        assert projected == direct


class TestIsEmpty:
    def test_contradictory_bounds(self):
        assert is_empty(box([(1, 0)]))

    def test_diagonal_nonempty(self):
        cons = [(Add(DimRef(0), Mul(DimRef(1), -1)), EQ),
                (Add(DimRef(0), Const(-1)), INEQ),
                (Add(Const(3), Mul(DimRef(1), -1)), INEQ)]
        s = IntegerSet.from_constraints(2, 0, cons)
        assert not is_empty(s)

    def test_exact_when_symbols_fixed(self):
        # 2i = 2j + 1 has no integer solutions, though rationally feasible
        cons = [(Add(Mul(DimRef(0), 2), Add(Mul(DimRef(1), -2), Const(-1))), EQ),
                (DimRef(0), INEQ), (Add(Const(4), Mul(DimRef(0), -1)), INEQ),
                (DimRef(1), INEQ), (Add(Const(4), Mul(DimRef(1), -1)), INEQ)]
        s = IntegerSet.from_constraints(2, 0, cons)
        assert is_empty(s)


class TestBoundsForDim:
    def test_symbolic_box(self):
        cons = [(Add(DimRef(0), Const(-1)), INEQ),
                (Add(SymRef(0), Add(Mul(DimRef(0), -1), Const(-1))), INEQ)]
        s = IntegerSet.from_constraints(1, 1, cons)
        lo, up = bounds_for_dim(s, 0)
        assert [format_expr(e) for e in lo] == ["1"]
        assert [format_expr(e) for e in up] == ["s0 - 1"]

    def test_division_bound(self):
        # {i : 2i <= 7, i >= 0} -> upper floordiv(7, 2)
        cons = [(DimRef(0), INEQ),
                (Add(Const(7), Mul(DimRef(0), -2)), INEQ)]
        s = IntegerSet.from_constraints(1, 0, cons)
        lo, up = bounds_for_dim(s, 0)
        assert [eval_expr(e) for e in lo] == [0]
        assert [eval_expr(e) for e in up] == [3]

    def test_unbounded_raises(self):
        cons = [(DimRef(0), INEQ)]
        s = IntegerSet.from_constraints(1, 0, cons)
        with pytest.raises(UnboundedDimensionError):
            bounds_for_dim(s, 0)

    @given(st.lists(st.tuples(st.integers(-5, 5), st.integers(0, 5)),
                    min_size=2, max_size=3))
    @settings(max_examples=40, deadline=None)
    def test_scan_reconstruction_on_boxes(self, bs):
        bounds = [(a, a + w) for a, w in bs]
        s = box(bounds)

        def scan(k, outer):
            if k == len(bounds):
                yield tuple(outer)
                return
            lo, up = bounds_for_dim(s, k)
            a = max(eval_expr(e, outer) for e in lo)
            b = min(eval_expr(e, outer) for e in up)
            for v in range(a, b + 1):
                yield from scan(k + 1, outer + [v])

        assert set(scan(0, [])) == s.points()


class TestCompose:
    def test_identity(self):
        m = parse_map("affine_map<(d0, d1) -> (d0 + d1, d1)>")
        assert compose(AffineMap.identity(2), m) == m

    def test_tileindex_of_sum(self):
        outer = parse_map("affine_map<(d0) -> (d0 floordiv 32)>")
        inner = parse_map("affine_map<(d0, d1) -> (d0 + d1)>")
        c = compose(outer, inner)
        import random
        rng = random.Random(5)
        for _ in range(20):
            i, j = rng.randrange(-99, 100), rng.randrange(-99, 100)
            assert c.eval((i, j)) == ((i + j) // 32,)

    def test_arity_mismatch(self):
        with pytest.raises(ArityMismatchError):
            compose(AffineMap.identity(2), AffineMap.identity(1))


class TestApplyUnimodular:
    def test_identity_matrix(self):
        s = box([(1, 2), (1, 2)])
        assert apply_unimodular(s, [[1, 0], [0, 1]]).points() == s.points()

    def test_skew(self):
        s = box([(1, 2), (1, 2)])
        t = apply_unimodular(s, [[1, 1], [0, 1]])
        assert t.points() == {(i + j, j) for i in (1, 2) for j in (1, 2)}

    def test_non_unimodular_rejected(self):
        with pytest.raises(NonUnimodularMatrixError):
            apply_unimodular(box([(0, 1)]), [[2]])

    @given(st.lists(st.tuples(st.integers(-4, 4), st.integers(0, 4)),
                    min_size=2, max_size=2))
    def test_preserves_point_count(self, bs):
        s = box([(a, a + w) for a, w in bs])
        t = apply_unimodular(s, [[1, 3], [0, 1]])
        assert len(t.points()) == len(s.points())


class TestEnumerationAgreesWithMembership:
    @given(st.lists(st.tuples(st.integers(-4, 4), st.integers(-4, 4),
                              st.integers(-4, 4)),
                    min_size=2, max_size=4))
    @settings(max_examples=40, deadline=None)
    def test_random_constraints(self, rows):
        # dims in a small window plus random inequality rows
        cons = [(Add(DimRef(0), Const(4)), INEQ),
                (Add(Const(4), Mul(DimRef(0), -1)), INEQ),
                (Add(DimRef(1), Const(4)), INEQ),
                (Add(Const(4), Mul(DimRef(1), -1)), INEQ)]
        for a, b, c in rows:
            cons.append((Add(Mul(DimRef(0), a), Add(Mul(DimRef(1), b), Const(c))), INEQ))
        s = IntegerSet.from_constraints(2, 0, cons)
        pts = s.points()
        for i in range(-5, 6):
            for j in range(-5, 6):
                assert ((i, j) in pts) == s.contains((i, j))


class TestSetSyntax:
    def test_set_round_trip(self):
        s = box([(0, 5), (1, 7)], num_syms=1)
        assert parse_set(format_set(s)) == s

    def test_exists_round_trip(self):
        # i even, 0 <= i <= 10 (existential from the floordiv lowering)
        cons = [(Add(DimRef(0), Mul(FloorDiv(DimRef(0), 2), -2)), EQ),
                (DimRef(0), INEQ),
                (Add(Const(10), Mul(DimRef(0), -1)), INEQ)]
        s = IntegerSet.from_constraints(1, 0, cons)
        assert s.num_exists == 1
        assert parse_set(format_set(s)) == s
        assert s.points() == {(i,) for i in range(0, 11, 2)}
