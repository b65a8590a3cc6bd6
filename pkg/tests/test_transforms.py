"""Tiling / skewing / wavefront / sub-bounding-box transform tests."""

import pytest

from polyhls import frontend as fe, interp
from polyhls.affine import eval_expr
from polyhls.dependence import compute_dependences
from polyhls.errors import IllegalTilingError
from polyhls.scop import build_scop
from polyhls.transforms import (TilingSpec, skew, sub_bounding_box_tile, tile,
                                wavefront_parallelize)

import corpus


def stencil():
    return build_scop(fe.parse_program(corpus.STENCIL2D.source))[0]


def scheduled_points(scop, n):
    """Domain points in schedule order, projected to the original dims."""
    syms = (n,) * len(scop.symbols)
    out = []
    for s in scop.statements:
        for p in s.domain.points(syms):
            time = tuple(eval_expr(r, p, syms) for r in s.schedule.results)
            out.append((time, s.name, tuple(p[d] for d in s.body_dims)))
    out.sort(key=lambda t: t[0])
    return [(name, pt) for _, name, pt in out]


class TestTile:
    def test_tile_constraints(self):
        scop = tile(stencil(), TilingSpec((32, 32)))
        s = scop.statements[0]
        assert s.dim_names == ("ti", "tj", "i", "j")
        # 32*ti <= i <= 32*ti + 31 etc.
        assert s.domain.contains((1, 0, 33, 4), (64,))
        assert not s.domain.contains((0, 0, 33, 4), (64,))
        assert not s.domain.contains((1, 0, 33, 33), (64,))

    def test_point_semantics_unchanged(self):
        scop = tile(stencil(), TilingSpec((4, 4)))
        s = scop.statements[0]
        for n in (5, 10):
            pts = {p[2:] for p in s.domain.points((n,))}
            assert pts == {(i, j) for i in range(1, n) for j in range(1, n)}
            # each point appears under exactly one tile
            assert len(s.domain.points((n,))) == (n - 1) ** 2

    def test_tile_count_at_n10_size4(self):
        scop = tile(stencil(), TilingSpec((4, 4)))
        s = scop.statements[0]
        pts = s.domain.points((10,))
        assert len(pts) == 81
        assert len({p[:2] for p in pts}) == 9  # 3 tiles per dim

    def test_unit_tiling_is_identity_semantics(self):
        prog = fe.parse_program(corpus.STENCIL2D.source)
        scop = tile(build_scop(prog)[0], TilingSpec((1, 1)))
        init = corpus.init_arrays(prog, {"N": 7}, seed=3)
        a = interp.run(prog, {"N": 7}, init).arrays["A"].data
        b = interp.run(scop, {"N": 7}, init).arrays["A"].data
        assert a == b

    def test_unit_tiling_trace_matches_original(self):
        prog = fe.parse_program(corpus.STENCIL2D.source)
        orig = build_scop(prog)[0]
        tiled = tile(build_scop(prog)[0], TilingSpec((1, 1)))
        assert scheduled_points(tiled, 6) == scheduled_points(orig, 6)

    def test_illegal_band_rejected(self):
        # reversal-style dependence: distance (1, -1) is negative in j
        src = ("int N;\nint A[N][N];\n#pragma scop\n"
               "for (i = 1; i < N; i++) {\n  for (j = 0; j < N - 1; j++) {\n"
               "    A[i][j] = A[i-1][j+1] + 1;\n  }\n}\n#pragma endscop\n")
        scop = build_scop(fe.parse_program(src))[0]
        with pytest.raises(IllegalTilingError):
            tile(scop, TilingSpec((4, 4)))

    def test_bad_sizes_rejected(self):
        with pytest.raises(IllegalTilingError):
            TilingSpec((0, 4))


class TestSkew:
    def test_factor_zero_is_identity(self):
        scop = stencil()
        assert skew(scop, (0, 1), 0) is scop

    def test_skewed_distances(self):
        scop = skew(stencil(), (0, 1), 1)
        deps = compute_dependences(scop)
        assert sorted(d.distance for d in deps) == [(1, 0), (1, 1)]

    def test_tile_dim_skew_gives_wavefront_schedule(self):
        scop = skew(tile(stencil(), TilingSpec((32, 32))), (0, 1), 1)
        s = scop.statements[0]
        # time level 1 is now ti + tj
        assert eval_expr(s.schedule.results[1], (2, 3, 70, 100), (200,)) == 5

    def test_semantics_preserved(self):
        prog = fe.parse_program(corpus.STENCIL2D.source)
        scop = skew(build_scop(prog)[0], (0, 1), 1)
        init = corpus.init_arrays(prog, {"N": 8}, seed=1)
        assert interp.run(prog, {"N": 8}, init).arrays["A"].data == \
            interp.run(scop, {"N": 8}, init).arrays["A"].data


class TestWavefront:
    def test_marks_inner_tile_loop_parallel(self):
        scop = wavefront_parallelize(tile(stencil(), TilingSpec((32, 32))))
        assert scop.parallel_levels == {scop.loop_levels()[1]}

    def test_requires_tiled_2band(self):
        with pytest.raises(IllegalTilingError):
            wavefront_parallelize(stencil())

    def test_independent_kernel_still_legal(self):
        prog = fe.parse_program(corpus.PASCAL.source)
        scop = wavefront_parallelize(tile(build_scop(prog)[0], TilingSpec((4, 4))))
        assert scop.parallel_levels
        init = corpus.init_arrays(prog, {"N": 13}, seed=2)
        assert interp.run(prog, {"N": 13}, init).arrays["H"].data == \
            interp.run(scop, {"N": 13}, init).arrays["H"].data

    def test_wavefront_sizes_at_n40(self):
        scop = wavefront_parallelize(tile(stencil(), TilingSpec((32, 32))))
        s = scop.statements[0]
        waves = {}
        for p in s.domain.points((40,)):
            t1 = eval_expr(s.schedule.results[1], p, (40,))
            waves.setdefault(t1, set()).add((p[0], p[1]))
        assert sorted(waves) == [0, 1, 2]
        assert [len(waves[k]) for k in sorted(waves)] == [1, 2, 1]

    def test_no_dependence_reversed_after_transforms(self):
        scop = wavefront_parallelize(tile(stencil(), TilingSpec((8, 8))))
        syms = (13,)
        for d in compute_dependences(scop):
            sp = next(s for s in scop.statements if s.name == d.source)
            sq = next(s for s in scop.statements if s.name == d.target)
            for p in d.relation.points(syms):
                ts = sp.schedule.eval(p[:d.src_dims], syms)
                tt = sq.schedule.eval(p[d.src_dims:], syms)
                assert ts < tt


class TestSubBoundingBox:
    def test_uniform_trip_counts(self):
        scop = sub_bounding_box_tile(stencil(), TilingSpec((8, 8)))
        s = scop.statements[0]
        n = 20
        per_tile = {}
        for p in s.domain.points((n,)):
            per_tile.setdefault(p[:2], []).append(p[2:])
        assert per_tile and all(len(v) == 64 for v in per_tile.values())

    def test_guard_matches_original_domain(self):
        orig = stencil()
        scop = sub_bounding_box_tile(stencil(), TilingSpec((8, 8)))
        s = scop.statements[0]
        n = 20
        dom = orig.statements[0].domain.points((n,))
        guarded = {p[2:] for p in s.domain.points((n,))
                   if s.guard.contains(p, (n,))}
        assert guarded == dom

    def test_exact_tiling_guards_vacuous(self):
        # aligned domain (0..N-1) with N divisible by the tile size:
        # every box point is in-domain, so every guard holds
        scop = build_scop(fe.parse_program(corpus.COPY.source))[0]
        scop = sub_bounding_box_tile(scop, TilingSpec((4,)))
        s = scop.statements[0]
        n = 8
        assert len(s.domain.points((n,))) == n
        for p in s.domain.points((n,)):
            assert s.guard.contains(p, (n,))

    def test_semantics_equal_plain_tiling(self):
        prog = fe.parse_program(corpus.STENCIL2D.source)
        for n in (5, 13, 33):
            init = corpus.init_arrays(prog, {"N": n}, seed=4)
            plain = interp.run(tile(build_scop(prog)[0], TilingSpec((8, 8))),
                               {"N": n}, init).arrays["A"].data
            subbb = interp.run(sub_bounding_box_tile(build_scop(prog)[0],
                                                     TilingSpec((8, 8))),
                               {"N": n}, init).arrays["A"].data
            assert plain == subbb
