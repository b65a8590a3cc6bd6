"""Frontend lexer/parser/printer tests."""

import random

import pytest

from polyhls import frontend as fe
from polyhls.errors import ParseError, UnsupportedConstructError

import corpus

STENCIL_SRC = corpus.STENCIL2D.source


class TestParse:
    def test_stencil_shape(self):
        p = fe.parse_program(STENCIL_SRC)
        assert p.symbols == ("N",)
        assert [a.name for a in p.arrays] == ["A"]
        assert p.arrays[0].elem == fe.FLOAT64
        assert p.arrays[0].extents == ("N", "N")
        body = [s for s in p.body if not isinstance(s, (fe.ScopBegin, fe.ScopEnd))]
        assert len(body) == 1
        outer = body[0]
        assert isinstance(outer, fe.For) and outer.var == "i"
        inner = outer.body[0]
        assert isinstance(inner, fe.For) and inner.var == "j"
        assign = inner.body[0]
        assert isinstance(assign, fe.Assign)
        assert assign.label == "S1"
        assert assign.ref == fe.ArrayRef("A", (fe.Name("i"), fe.Name("j")))

    def test_empty_scop(self):
        p = fe.parse_program("int N;\n#pragma scop\n#pragma endscop\n")
        kinds = [type(s) for s in p.body]
        assert kinds == [fe.ScopBegin, fe.ScopEnd]

    def test_le_bound_normalized_to_exclusive(self):
        p = fe.parse_program(
            "int N;\nint A[N];\n#pragma scop\n"
            "for (i = 0; i <= N - 1; i++) { A[i] = 1; }\n#pragma endscop\n")
        loop = p.body[1]
        # i <= N-1 becomes i < (N-1)+1
        assert loop.upper == fe.BinOp("+", fe.BinOp("-", fe.Name("N"), fe.IntLit(1)),
                                      fe.IntLit(1))

    def test_positions_reported(self):
        with pytest.raises(ParseError) as err:
            fe.parse_program("int N;\nfloat A[N];\nfor (i = 0; i < N; i++) {\n  A[i] = ;\n}\n")
        assert err.value.line == 4

    def test_non_unit_step_rejected(self):
        with pytest.raises(UnsupportedConstructError):
            fe.parse_program("int N;\nint A[N];\nfor (i = 0; i < N; i += 2) { A[i] = 0; }\n")

    def test_while_rejected(self):
        with pytest.raises(UnsupportedConstructError):
            fe.parse_program("int N;\nwhile (1) { }\n")

    def test_unpaired_scop_rejected(self):
        with pytest.raises(ParseError):
            fe.parse_program("int N;\n#pragma scop\n")

    def test_scop_pragma_must_be_top_level(self):
        src = ("int N;\nint A[N];\nfor (i = 0; i < N; i++) {\n"
               "#pragma scop\nA[i] = 0;\n#pragma endscop\n}\n")
        with pytest.raises(ParseError):
            fe.parse_program(src)


class TestPrintRoundTrip:
    def test_stencil_fixed_point(self):
        p = fe.parse_program(STENCIL_SRC)
        text = fe.print_program(p)
        assert fe.parse_program(text) == p
        assert fe.print_program(fe.parse_program(text)) == text

    def test_corpus_round_trips(self):
        for entry in corpus.ALL:
            p = fe.parse_program(entry.source)
            assert fe.parse_program(fe.print_program(p)) == p, entry.name

    def test_empty_program(self):
        p = fe.parse_program("int N;\n")
        assert fe.parse_program(fe.print_program(p)) == p


def _random_program(rng):
    """Small random program generator for the round-trip property."""
    lines = ["int N;", "float A[N];", "int B[N][N];"]
    lines.append("#pragma scop")
    depth = 0
    vars_ = []
    for _ in range(rng.randrange(1, 4)):
        v = "ijk"[depth]
        lo = rng.randrange(0, 3)
        lines.append("for (%s = %d; %s < N; %s++) {" % (v, lo, v, v))
        vars_.append(v)
        depth += 1
    v = rng.choice(vars_)
    rhs = rng.choice(["A[%s] + 1.5" % v, "A[%s] * 2.0 - A[0]" % v, "0.0"])
    lines.append("A[%s] = %s;" % (v, rhs))
    if rng.random() < 0.5:
        a, b = rng.sample(vars_, 1) * 2 if len(vars_) == 1 else rng.sample(vars_, 2)
        lines.append("B[%s][%s] = B[%s][%s] + %d;" % (a, b, a, b, rng.randrange(1, 9)))
    lines.extend("}" * depth)
    lines.append("#pragma endscop")
    return "\n".join(lines) + "\n"


def test_random_programs_round_trip():
    rng = random.Random(1234)
    for _ in range(100):
        src = _random_program(rng)
        p = fe.parse_program(src)
        assert fe.parse_program(fe.print_program(p)) == p
