import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from erosion_ca.lattice import (
    AlphabetMismatch,
    Configuration,
    ParseError,
    Rect,
    agreement_radius,
    cantor_distance,
    extract_window,
    f_alphabet,
    format_config,
    g_tau_alphabet,
    get,
    norm,
    parse_config,
    render,
    symbolic_alphabet,
)

A = f_alphabet()


def brute_agreement(x, y, bound=40):
    """Scan every position of a large box in order of norm."""
    best = math.inf
    for r in range(bound + 1):
        for dx in range(-r, r + 1):
            for dy in range(-r, r + 1):
                if max(abs(dx), abs(dy)) == r and x.get((dx, dy)) != y.get((dx, dy)):
                    return r
    return best


cells_st = st.dictionaries(
    st.tuples(st.integers(-6, 6), st.integers(-6, 6)),
    st.sampled_from(A.names),
    max_size=12,
)


def test_alphabet_layout():
    assert A.names[:3] == ("0", "U", "D")
    assert A.id("1") == 3
    assert not A[A.id("U")].solid
    assert A[A.id("dl")].solid
    with pytest.raises(ParseError):
        A.id("nope")


def test_get_default_and_override():
    x = Configuration.from_names(A, {(2, -1): "1"})
    assert get(x, (2, -1)).name == "1"
    assert get(x, (0, 0)).name == "0"
    assert x.name_at((5, 5)) == "0"


def test_background_cells_are_dropped():
    x = Configuration.from_names(A, {(0, 0): "0", (1, 0): "U"})
    assert x.cells == {(1, 0): A.id("U")}
    assert x == Configuration.from_names(A, {(1, 0): "U"})


def test_extract_window_orientation():
    x = Configuration.from_names(A, {(0, 1): "U", (0, 0): "D"})
    w = extract_window(x, Rect.centered((0, 0), 1))
    arr = w.as_array()
    assert arr[2, 1] == A.id("U")  # row 2 is the northern row
    assert w.at(1, 2) == A.id("U")
    assert w.at(1, 1) == A.id("D")


def test_agreement_examples():
    x = Configuration.empty(A)
    assert agreement_radius(x, x) == math.inf
    assert cantor_distance(x, x) == 0.0
    y = x.with_names({(3, -1): "1"})
    assert agreement_radius(x, y) == 3
    assert cantor_distance(x, y) == 2.0 ** -3
    assert agreement_radius(x, x.with_names({(0, 0): "U"})) == 0


def test_agreement_different_backgrounds():
    s = symbolic_alphabet("ab", ["a", "b"])
    x = Configuration(s, 0, {(1, 1): 1, (0, 0): 1})
    y = Configuration(s, 1, {})
    # x has b at norms 0 and 1 but a at other norm-1 cells
    assert agreement_radius(x, y) == 1


def test_alphabet_mismatch():
    x = Configuration.empty(A)
    y = Configuration.empty(g_tau_alphabet(1))
    with pytest.raises(AlphabetMismatch):
        agreement_radius(x, y)


@given(cells_st, cells_st)
@settings(max_examples=80, deadline=None)
def test_agreement_matches_brute_force(a, b):
    x = Configuration.from_names(A, a)
    y = Configuration.from_names(A, b)
    assert agreement_radius(x, y) == brute_agreement(x, y)
    assert agreement_radius(x, y) == agreement_radius(y, x)


@given(cells_st, cells_st, cells_st)
@settings(max_examples=60, deadline=None)
def test_ultrametric(a, b, c):
    x, y, z = (Configuration.from_names(A, v) for v in (a, b, c))
    assert cantor_distance(x, z) <= max(cantor_distance(x, y), cantor_distance(y, z))


@given(cells_st)
@settings(max_examples=60, deadline=None)
def test_format_parse_roundtrip(a):
    x = Configuration.from_names(A, a)
    assert parse_config(format_config(x), A) == x


def test_parse_errors():
    with pytest.raises(ParseError):
        parse_config("0 0 U\n", A)
    with pytest.raises(ParseError):
        parse_config("background 0\n0 zero U\n", A)
    with pytest.raises(ParseError):
        parse_config("background 0\n0 0 Q\n", A)


def test_translate_and_restrict():
    x = Configuration.from_names(A, {(0, 0): "1", (5, 5): "U"})
    t = x.translate(2, -1)
    assert t.name_at((2, -1)) == "1"
    r = x.restrict(Rect.centered((0, 0), 2))
    assert r.cells == {(0, 0): A.id("1")}


def test_to_array_and_back():
    rng = np.random.default_rng(0)
    arr = rng.integers(0, len(A), size=(6, 9)).astype(np.int32)
    x = Configuration.from_array(A, arr, (-3, 4))
    assert np.array_equal(x.to_array(Rect(-3, 4, 9, 6)), arr)


def test_render_north_first():
    x = Configuration.from_names(A, {(0, 1): "U", (0, 0): "D", (1, 0): "1"})
    assert render(x, Rect(0, 0, 2, 2)) == "u.\nd#"


def test_rect_helpers():
    r = Rect.spanning(0, 0, 4, 2)
    assert (r.width, r.height, r.x1, r.y1) == (5, 3, 4, 2)
    assert list(r.positions())[:2] == [(0, 0), (1, 0)]
    assert Rect(0, 0, 2, 2).chebyshev_gap(Rect(3, 0, 1, 1)) == 2
    assert norm((-3, 2)) == 3
    with pytest.raises(ValueError):
        Rect(0, 0, 0, 1)
