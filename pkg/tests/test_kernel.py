import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from helpers import rand_series
from microformal.expr import ExpressionError, from_json, parse, render, to_json
from microformal.kernel import ParityError, Series, TableMismatch, VariableTable, normalize

seeds = st.integers(min_value=0, max_value=2 ** 32)


@pytest.fixture
def T():
    t = VariableTable()
    for n, p in [("x", 0), ("y", 0), ("a", 1), ("b", 1), ("c", 1)]:
        t.add(n, p)
    return t


def _vars(T):
    return [T[n] for n in ("x", "y", "a", "b", "c")]


# brute-force oracle: expand monomials into letter sequences and bubble-sort
def _letters(T, m):
    return [vid for vid, e in m for _ in range(e)]


def _bubble(T, seq):
    seq = list(seq)
    sign = 1
    for i in range(len(seq)):
        for j in range(len(seq) - 1 - i):
            if seq[j] > seq[j + 1]:
                if T[seq[j]].parity and T[seq[j + 1]].parity:
                    sign = -sign
                seq[j], seq[j + 1] = seq[j + 1], seq[j]
    for a, b in zip(seq, seq[1:]):
        if a == b and T[a].parity:
            return 0, ()
    out = []
    for v in seq:
        if out and out[-1][0] == v:
            out[-1] = (v, out[-1][1] + 1)
        else:
            out.append((v, 1))
    return sign, tuple(out)


def _oracle_mul(f, g):
    T = f.table
    terms = {}
    for m1, c1 in f.terms.items():
        for m2, c2 in g.terms.items():
            s, m = _bubble(T, _letters(T, m1) + _letters(T, m2))
            if s:
                terms[m] = terms.get(m, 0) + s * c1 * c2
    return Series(T, terms)


@settings(max_examples=60, deadline=None)
@given(seeds)
def test_product_matches_bruteforce_oracle(seed):
    T = VariableTable()
    vs = [T.add(n, p) for n, p in [("x", 0), ("a", 1), ("b", 1), ("y", 0)]]
    rng = random.Random(seed)
    f = rand_series(rng, T, vs, 3, 4)
    g = rand_series(rng, T, vs, 3, 4)
    assert f * g == _oracle_mul(f, g)


@settings(max_examples=60, deadline=None)
@given(seeds)
def test_associativity_and_distributivity(seed):
    T = VariableTable()
    vs = [T.add(n, p) for n, p in [("x", 0), ("a", 1), ("b", 1)]]
    rng = random.Random(seed)
    f, g, h = (rand_series(rng, T, vs, 3, 3) for _ in range(3))
    assert (f * g) * h == f * (g * h)
    assert f * (g + h) == f * g + f * h


def test_normalize_signs(T):
    a, b, c = T["a"], T["b"], T["c"]
    assert normalize(T, [(b, 1), (a, 1)]) == (-1, ((a.id, 1), (b.id, 1)))
    assert normalize(T, [(c, 1), (b, 1), (a, 1)])[0] == -1
    assert normalize(T, [(a, 1), (a, 1)])[0] == 0
    assert normalize(T, [(a, 2)])[0] == 0


def test_odd_square_and_commutation(T):
    a, b, x = T.var("a"), T.var("b"), T.var("x")
    assert (a * a).is_zero()
    assert a * b == -(b * a)
    assert a * x == x * a
    assert ((a + b * x) ** 2).is_zero()


def test_parity_queries(T):
    assert parse("x*a + b", T).parity() == 1
    assert parse("x + a*b", T).parity() == 0
    assert parse("x + a", T).parity() == "mixed"
    assert Series.zero(T).parity() is None
    with pytest.raises(ParityError):
        parse("x + a", T).require_parity()


def test_left_derivative_signs(T):
    a, b = T["a"], T["b"]
    f = parse("a*b", T)
    assert f.left_derivative(a) == T.var("b")
    assert f.left_derivative(b) == -T.var("a")
    g = parse("x^3*y", T)
    assert g.left_derivative(T["x"]) == parse("3*x^2*y", T)


def test_truncation_drops_and_merges(T):
    T.add("p", 0, "momentum")
    f = parse("1 + p + p^2 + p^3", T).truncate("momentum", 2)
    assert f == parse("1 + p + p^2", T)
    g = parse("p", T).truncate("momentum", 1)
    assert (f * g).truncation == {"momentum": 1}
    assert f * g == parse("p", T)
    assert f.degree("momentum") == 2


def test_substitution_is_simultaneous(T):
    f = parse("x*y", T)
    assert f.substitute({T["x"]: T.var("y"), T["y"]: T.var("x")}) == f
    with pytest.raises(ParityError):
        f.substitute({T["x"]: T.var("a")})


def test_coefficient_and_drop(T):
    f = parse("x^2*a + 3*x*a*b + y", T)
    assert f.coefficient([(T["x"], 2)]) == T.var("a")
    assert f.drop([T["a"]]) == T.var("y")


def test_table_identity(T):
    other = VariableTable()
    other.add("x", 0)
    with pytest.raises(TableMismatch):
        T.var("x") + other.var("x")
    with pytest.raises(ParityError):
        T.add("x", 1)


# expressions

def test_render_examples(T):
    assert render(parse("1/2*x^2*a - x + 3", T)) == "1/2*x^2*a - x + 3"
    assert render(Series.zero(T)) == "0"
    assert render(parse("b*a", T)) == "-a*b"
    assert render(parse("(x + 1)^2/4", T)) == "1/4*x^2 + 1/2*x + 1/4"


@settings(max_examples=80, deadline=None)
@given(seeds)
def test_print_parse_print_fixed_point(seed):
    T = VariableTable()
    vs = [T.add(n, p) for n, p in [("x", 0), ("y", 0), ("a", 1), ("b", 1)]]
    f = rand_series(random.Random(seed), T, vs, 4, 5)
    text = render(f)
    assert parse(text, T) == f
    assert render(parse(text, T)) == text
    assert from_json(to_json(f), T) == f


@pytest.mark.parametrize("text, col", [("x +", None), ("x + q", 4), ("x / y", 0),
                                       ("x ^ -1", 0), ("1.5*x", 0), ("f(x)", 0)])
def test_parse_errors(T, text, col):
    with pytest.raises(ExpressionError) as info:
        parse(text, T)
    if col is not None:
        assert info.value.col == col


def test_rational_literals(T):
    assert parse("2/3*x", T).terms[((T["x"].id, 1),)] == Fraction(2, 3)
    assert parse("-x/2", T) == T.var("x").scale(Fraction(-1, 2))
