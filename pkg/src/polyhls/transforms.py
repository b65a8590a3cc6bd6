"""Schedule/domain transformations: rectangular tiling, skewing, tile-band
wavefront parallelization, and sub-bounding-box tiling.

Tiling is encoded polyhedrally: tile indices become real domain dims with
``s*T <= d <= s*T + s - 1`` constraints and the schedule grows matching
outer time levels, so code generation derives the tiled bounds mechanically
from the same representation.
"""

from __future__ import annotations

from dataclasses import replace

from .affine import (
    EQ,
    INEQ,
    Add,
    AffineMap,
    Const,
    DimRef,
    IntegerSet,
    Mul,
    shift_dims,
)
from .dependence import compute_dependences, is_loop_parallel
from .errors import IllegalTilingError, ArityMismatchError
from .scop import PolyStmt, Scop, TilingInfo


class TilingSpec:
    """Tile sizes for an innermost-aligned band of loop dims."""

    def __init__(self, sizes):
        sizes = tuple(int(s) for s in sizes)
        if not sizes or any(s < 1 for s in sizes):
            raise IllegalTilingError("tile sizes must be >= 1")
        self.sizes = sizes


def _check_band_permutable(scop, band_levels):
    """Every dependence not carried before the band must have provably
    non-negative time difference at each band level."""
    deps = compute_dependences(scop)
    first = min(band_levels)
    for dep in deps:
        if dep.level < first:
            continue
        sp = next(s for s in scop.statements if s.name == dep.source)
        sq = next(s for s in scop.statements if s.name == dep.target)
        dpd = dep.src_dims
        for lvl in band_levels:
            tp = sp.schedule.results[lvl]
            tq = shift_dims(sq.schedule.results[lvl], dpd)
            # infeasibility of diff <= -1 proves diff >= 0 everywhere
            neg = Add(Mul(Add(tq, Mul(tp, -1)), -1), Const(-1))
            test = dep.relation.intersect(IntegerSet.from_constraints(
                dep.relation.num_dims, dep.relation.num_syms, [(neg, INEQ)]))
            if not test.is_empty():
                raise IllegalTilingError(
                    "band is not permutable: dependence %s -> %s may be negative "
                    "at time level %d" % (dep.source, dep.target, lvl))


def tile(scop, spec):
    """Rectangular tiling of the innermost band of len(spec.sizes) loops.

    Adds one tile dim per tiled loop dim (outermost in the schedule);
    point semantics of each domain are unchanged.
    """
    if not scop.statements:
        return scop
    depths = {len(s.body_dims) for s in scop.statements}
    if len(depths) != 1:
        raise IllegalTilingError("tiling requires a uniform loop depth across statements")
    depth = depths.pop()
    sizes = spec.sizes[-depth:] if len(spec.sizes) > depth else spec.sizes
    m = len(sizes)
    loop_levels = scop.loop_levels()
    band_levels = loop_levels[-m:]
    _check_band_permutable(scop, band_levels)

    ns = len(scop.symbols)
    new_stmts = []
    orig_domains = []
    band_dims = None
    for s in scop.statements:
        band = tuple(s.body_dims[-m:])  # innermost-aligned
        if band_dims is None:
            band_dims = tuple(b + m for b in band)
        dom = s.domain.insert_dims(0, m)
        orig_domains.append(dom)
        cons = []
        for k, (d, size) in enumerate(zip(band, sizes)):
            pt = DimRef(d + m)
            t = DimRef(k)
            cons.append((Add(pt, Mul(t, -size)), INEQ))  # d - s*T >= 0
            cons.append((Add(Mul(t, size), Add(Const(size - 1), Mul(pt, -1))), INEQ))
        tile_cons = IntegerSet.from_constraints(dom.num_dims, ns, cons)
        dom = dom.intersect(tile_cons)
        sched = s.schedule.insert_dims(0, m)
        prefix = []
        for k in range(m):
            prefix += [Const(0), DimRef(k)]
        sched = AffineMap(sched.num_dims, ns, tuple(prefix) + sched.results)
        new_stmts.append(replace(
            s,
            domain=dom,
            dim_names=tuple("t" + s.dim_names[d] for d in band) + s.dim_names,
            schedule=sched,
            writes=tuple((a, mp.insert_dims(0, m)) for a, mp in s.writes),
            reads=tuple((a, mp.insert_dims(0, m)) for a, mp in s.reads),
            body_dims=tuple(d + m for d in s.body_dims),
            guard=s.guard.insert_dims(0, m) if s.guard is not None else None,
        ))
    info = TilingInfo(
        sizes=sizes,
        tile_dims=tuple(range(m)),
        point_dims=band_dims,
        tile_time_levels=tuple(2 * k + 1 for k in range(m)),
        orig_domains=tuple(orig_domains),
    )
    return replace(scop, statements=tuple(new_stmts), tiling=info,
                   parallel_levels=frozenset())


def skew(scop, dims, factor):
    """Schedule-level skew: time dim a becomes a + factor*b.  ``dims`` are
    indices into the schedule's loop-dim list."""
    a, b = dims
    loop_levels = scop.loop_levels()
    if not (0 <= a < len(loop_levels) and 0 <= b < len(loop_levels)) or a == b:
        raise ArityMismatchError("invalid skew dims (%r, %r)" % (a, b))
    if factor == 0:
        return scop
    la, lb = loop_levels[a], loop_levels[b]
    new_stmts = []
    for s in scop.statements:
        res = list(s.schedule.results)
        res[la] = Add(res[la], Mul(res[lb], factor))
        new_stmts.append(replace(s, schedule=AffineMap(s.schedule.num_dims,
                                                       s.schedule.num_syms, tuple(res))))
    return replace(scop, statements=tuple(new_stmts), parallel_levels=frozenset())


def wavefront_parallelize(scop, band=(0, 1)):
    """Skew the two tile dims into a wavefront (t1 = ti + tj, t2 = tj) and
    mark the inner tile loop parallel when the dependence check confirms."""
    if scop.tiling is None or len(scop.tiling.tile_dims) < 2:
        raise IllegalTilingError("wavefront needs a tiled 2-band; run tile first")
    a, b = band
    skewed = skew(scop, (a, b), 1)
    deps = compute_dependences(skewed)
    parallel = frozenset()
    if is_loop_parallel(skewed, deps, b):
        parallel = frozenset({skewed.loop_levels()[b]})
    return replace(skewed, parallel_levels=parallel)


def sub_bounding_box_tile(scop, spec):
    """Uniform per-tile bounds: every tile iterates the full rectangular
    size-s box per tiled dim, with a guard masking points outside the
    original domain.  Applies `tile` first when the scop is untiled."""
    if scop.tiling is None:
        scop = tile(scop, spec)
    info = scop.tiling
    new_stmts = []
    ns = len(scop.symbols)
    for s, orig in zip(scop.statements, info.orig_domains):
        proj = s.domain
        for d in sorted(info.point_dims, reverse=True):
            proj = proj.project(d)
        # re-embed the tile/outer-dim constraints into the full dim space
        emb = proj
        for d in sorted(info.point_dims):
            emb = emb.insert_dims(d, 1)
        cons = []
        for t, d, size in zip(info.tile_dims, info.point_dims, info.sizes):
            pt, tl = DimRef(d), DimRef(t)
            cons.append((Add(pt, Mul(tl, -size)), INEQ))
            cons.append((Add(Mul(tl, size), Add(Const(size - 1), Mul(pt, -1))), INEQ))
        box = IntegerSet.from_constraints(s.domain.num_dims, ns, cons)
        guard = orig if s.guard is None else orig.intersect(s.guard)
        new_stmts.append(replace(s, domain=emb.intersect(box), guard=guard))
    return replace(scop, statements=tuple(new_stmts))
