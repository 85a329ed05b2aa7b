import pytest
from hypothesis import given, settings, strategies as st

from skn import (
    Conj, Disj, Factor, Fresh, Left, Pair, ParseError, Prod, Right, SOLE,
    Sum, TyVar, UNIT, Unify, Var, enumerate_type, free_type_vars,
    parse_program, render_program, render_value, type_size,
)

from helpers import CORPUS, load


def test_coin_flip_shape():
    p = parse_program(load("coin-flip.skn"))
    assert p.names() == ["coin-flip"]
    rel = p.relations[0]
    assert rel.tyvars == ()
    assert rel.params == (("coin", Sum(UNIT, UNIT)),)
    assert rel.body == Disj(
        Unify(Var("coin"), Left(SOLE)),
        Unify(Var("coin"), Right(SOLE)),
    )


def test_empty_program():
    assert parse_program("").relations == ()


def test_comments_and_whitespace():
    p = parse_program("; nothing here\n   ; still nothing\n")
    assert p.relations == ()


def test_conj_arity_error():
    with pytest.raises(ParseError):
        parse_program("(defrel (r (x : Unit)) (conj))")
    with pytest.raises(ParseError):
        parse_program("(defrel (r (x : Unit)) (conj (== x x)))")


def test_nary_conj_right_nests():
    p = parse_program("(defrel (r (x : Unit)) (conj (== x x) (== x x) (== x x)))")
    body = p.relations[0].body
    assert isinstance(body, Conj) and isinstance(body.g2, Conj)


def test_multi_binder_fresh_nests():
    p = parse_program(
        "(defrel (r (x : Unit)) (fresh ((y : Unit) (z : Unit)) (== y z)))")
    body = p.relations[0].body
    assert isinstance(body, Fresh) and body.var == "y"
    assert isinstance(body.body, Fresh) and body.body.var == "z"


def test_wrapped_param_list():
    flat = parse_program("(defrel (r (x : Unit) (y : Unit)) (== x y))")
    wrapped = parse_program("(defrel (r ((x : Unit) (y : Unit))) (== x y))")
    assert flat == wrapped


def test_forall_and_inferred_tyvars():
    explicit = parse_program("(defrel (r (forall a b) (x : (Sum a b))) (== x x))")
    inferred = parse_program("(defrel (r (x : (Sum a b))) (== x x))")
    assert explicit.relations[0].tyvars == ("a", "b")
    assert explicit == inferred


def test_pair_type_head_is_prod_alias():
    a = parse_program("(defrel (r (x : (Pair Unit Unit))) (== x x))")
    b = parse_program("(defrel (r (x : (Prod Unit Unit))) (== x x))")
    assert a == b


def test_duplicate_names_rejected():
    with pytest.raises(ParseError):
        parse_program("(defrel (r (x : Unit) (x : Unit)) (== x x))")
    with pytest.raises(ParseError):
        parse_program("(defrel (r (x : Unit)) (== x x))\n"
                      "(defrel (r (y : Unit)) (== y y))")


def test_annotation_braces():
    p = parse_program("(defrel (r (x : (Sum Unit Unit)))"
                      " (== x (left {(Sum Unit Unit)} sole)))")
    body = p.relations[0].body
    assert body.v2 == Left(SOLE, Sum(UNIT, UNIT))


def test_factor_keeps_raw_literal():
    p = parse_program("(defrel (r (x : Unit)) (factor 0.75))")
    assert p.relations[0].body == Factor("0.75")


def test_shadowed_fresh_binder_renamed():
    p = parse_program(
        "(defrel (r (x : Unit))"
        " (fresh ((x : Unit)) (fresh ((x : Unit)) (== x x))))")
    body = p.relations[0].body
    assert body.var != "x"
    assert body.body.var not in ("x", body.var)
    inner = body.body.body
    assert inner.v1 == Var(body.body.var)


def test_parse_errors_carry_location():
    with pytest.raises(ParseError) as e:
        parse_program("(defrel (r (x : Unit))\n  (== x (badctor y)))")
    assert e.value.line == 2


def test_render_value_examples():
    assert render_value(SOLE) == "sole"
    assert render_value(Left(SOLE)) == "(left sole)"
    assert render_value(Pair(Left(SOLE), SOLE)) == "(pair (left sole) sole)"
    # annotations are dropped in canonical value output
    assert render_value(Left(SOLE, Sum(UNIT, UNIT))) == "(left sole)"


def test_render_value_rejects_variables():
    with pytest.raises(ValueError):
        render_value(Pair(Var("x"), SOLE))


def test_free_type_vars():
    assert free_type_vars(UNIT) == []
    assert free_type_vars(Sum(TyVar("a"), TyVar("b"))) == ["a", "b"]
    assert free_type_vars(Prod(TyVar("a"), TyVar("a"))) == ["a"]


def test_corpus_parses_and_round_trips():
    for name in CORPUS:
        program = parse_program(load(name))
        assert parse_program(render_program(program)) == program


@st.composite
def concrete_types(draw, max_size=64):
    t = draw(st.recursive(
        st.just(UNIT),
        lambda kids: st.builds(Sum, kids, kids) | st.builds(Prod, kids, kids),
        max_leaves=8,
    ))
    if type_size(t) > max_size:
        t = UNIT
    return t


@given(concrete_types())
@settings(max_examples=200, deadline=None)
def test_value_parse_render_round_trip(t):
    for v in enumerate_type(t):
        text = render_value(v)
        parsed = parse_program(f"(defrel (r (x : Unit)) (== x {text}))")
        got = parsed.relations[0].body.v2
        assert _strip(got) == _strip(v)


def _strip(v):
    if isinstance(v, Left):
        return Left(_strip(v.inner), None)
    if isinstance(v, Right):
        return Right(_strip(v.inner), None)
    if isinstance(v, Pair):
        return Pair(_strip(v.first), _strip(v.second))
    return v
