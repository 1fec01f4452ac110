"""Lexer and parser behavior: grammar coverage, error positions, and the
parse/print round trip over the whole corpus plus generated inputs."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import load_scenario, scenario_names
from ddsim import ast_nodes as A
from ddsim.errors import DuplicateName, ScenarioParseError
from ddsim.lexer import tokenize
from ddsim.parser import parse_scenario, parse_shape_expr


def test_tokenize_basics():
    toks = tokenize("type t { n: int; }  # comment\n")
    values = [t.value for t in toks[:-1]]
    assert values == ["type", "t", "{", "n", ":", "int", ";", "}"]
    assert toks[-1].type == "EOF"


def test_tokenize_numbers():
    toks = tokenize("3 3.5 1.0e16 2e-3")
    kinds = [(t.type, t.value) for t in toks[:-1]]
    assert kinds == [("INT", "3"), ("REAL", "3.5"), ("REAL", "1.0e16"),
                     ("REAL", "2e-3")]


def test_typedecl_members():
    sc = parse_scenario(
        "type g { n: int; xs: ptr real[n * 2]; v: ptr real @ xs; "
        "row: int[4]; sub: other; link: ptr other; }\n"
        "type other { m: int; }")
    td = sc.statements[0]
    kinds = [type(m.kind).__name__ for m in td.members]
    assert kinds == ["ScalarK", "ShapedPtrK", "AliasPtrK", "InlineArrayK",
                     "RecordK", "RecordPtrK"]


def test_shape_expr_precedence():
    expr = parse_shape_expr("a + b * 2")
    assert isinstance(expr, A.BinOp) and expr.op == "+"
    assert isinstance(expr.right, A.BinOp) and expr.right.op == "*"
    expr2 = parse_shape_expr("(a + b) * 2")
    assert isinstance(expr2, A.BinOp) and expr2.op == "*"


def test_parse_error_position():
    with pytest.raises(ScenarioParseError) as exc:
        parse_scenario("type g { n int; }")
    assert exc.value.line == 1
    assert exc.value.column == 12


def test_duplicate_member_rejected():
    with pytest.raises(DuplicateName):
        parse_scenario("type g { n: int; n: real; }")


def test_duplicate_type_rejected():
    with pytest.raises(DuplicateName):
        parse_scenario("type g { n: int; }\ntype g { m: int; }")


def test_malformed_number():
    with pytest.raises(ScenarioParseError):
        parse_scenario("type t { a: real; }\nvar x: t;\nx.a = 1.2.3;")


def test_path_str_round_trip():
    sc = parse_scenario("type t { a: int; }\nvar v: t;\nv.a = 1;")
    assign = sc.statements[2]
    assert str(assign.target) == "v.a"


def test_spans_point_into_source():
    src = load_scenario("geometry_default")
    sc = parse_scenario(src)
    lines = src.splitlines()
    for stmt in sc.statements:
        span = stmt.span
        assert 1 <= span.line <= len(lines)
        assert span.column >= 1


@pytest.mark.parametrize("name", scenario_names())
def test_print_parse_round_trip(name):
    """Printing the AST and reparsing it yields the same AST (spans aside)."""
    first = parse_scenario(load_scenario(name))
    printed = A.to_source(first)
    second = parse_scenario(printed)
    assert first == second
    assert A.to_source(second) == printed


_ident = st.from_regex(r"[a-z][a-z0-9_]{0,6}", fullmatch=True)
_junk = st.text(
    alphabet=st.sampled_from(
        list("abcxyz0123456789 \n\t{}()[];:.,@*+-/=#_")),
    max_size=120)


@given(_junk)
@settings(max_examples=200, deadline=None)
def test_parser_totality_on_junk(text):
    """Arbitrary input either parses or raises a positioned parse error;
    the parser never crashes with anything else."""
    try:
        parse_scenario(text)
    except ScenarioParseError as exc:
        assert exc.line >= 1 and exc.column >= 1
    except DuplicateName:
        pass


@given(names=st.lists(_ident, min_size=1, max_size=5, unique=True),
       shape=st.integers(min_value=1, max_value=64))
def test_generated_typedecl_round_trip(names, shape):
    members = "".join(f"  {n}: int;\n" for n in names)
    src = f"type t {{\n{members}  buf: ptr real[{shape}];\n}}\n"
    sc = parse_scenario(src)
    assert parse_scenario(A.to_source(sc)) == sc
