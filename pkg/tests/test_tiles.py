from itertools import product

import pytest
from hypothesis import given, settings, strategies as st

from erosion_ca.lattice import ParseError
from erosion_ca.tiles import (
    BUDGET,
    NO,
    YES,
    EmptyTileSet,
    TileNotInSet,
    TileSet,
    TuringMachine,
    can_tile_rect,
    can_tile_square,
    check_tiling,
    checkerboard_tileset,
    format_tileset,
    format_tm,
    free_tileset,
    max_square_tiling,
    parse_tileset,
    parse_tm,
    tm_strip_tileable,
    tm_to_tileset,
)

HALT_NOW = "states a h\nsymbols _\nblank _\nstart a\nhalt h\nd a _ h _ S\n"
LOOP = "states a\nsymbols _\nblank _\nstart a\nd a _ a _ S\n"
WALKER = "states a\nsymbols _ 1\nblank _\nstart a\nd a _ a 1 R\n"
FOUR = """states a b c h
symbols _ 1
blank _
start a
halt h
d a _ b 1 R
d b _ c 1 R
d c _ a 1 L
d a 1 h 1 S
"""
BOUNCE = """states a b
symbols _ 1
blank _
start a
d a _ b 1 L
d b _ a 1 R
d a 1 b _ L
d b 1 a _ R
"""


def brute_tileable(ts, n):
    for flat in product(range(ts.n), repeat=n * n):
        grid = [flat[r * n:(r + 1) * n] for r in range(n)]
        if check_tiling(ts, grid):
            return True
    return False


def stack_tileset():
    """Columns can be at most three tiles tall."""
    return TileSet.from_pairs(3, [(0, 0), (1, 1), (2, 2)], [(1, 0), (2, 1)])


pairs = st.sets(st.tuples(st.integers(0, 2), st.integers(0, 2)))


@given(st.integers(1, 3), pairs, pairs, st.integers(1, 3))
@settings(max_examples=60, deadline=None)
def test_search_matches_brute_force(k, h, v, n):
    h = {p for p in h if max(p) < k}
    v = {p for p in v if max(p) < k}
    ts = TileSet.from_pairs(k, h, v)
    res = can_tile_square(ts, n)
    assert (res.status == YES) == brute_tileable(ts, n)
    if res:
        assert check_tiling(ts, res.grid)


def test_free_and_checkerboard():
    assert max_square_tiling(free_tileset(1), 6).n_star == 6
    res = can_tile_square(checkerboard_tileset(), 5)
    assert res and check_tiling(checkerboard_tileset(), res.grid)


def test_stack_threshold():
    rep = max_square_tiling(stack_tileset(), 8)
    assert rep.n_star == 3 and rep.bounded
    assert rep.outcomes[-1] == (4, NO)


def test_budget_exceeded():
    res = can_tile_square(stack_tileset(), 6, budget=5)
    assert res.status == BUDGET
    rep = max_square_tiling(stack_tileset(), 6, budget=5)
    assert not rep.bounded


def test_fixed_cells_respected():
    ts = checkerboard_tileset()
    res = can_tile_rect(ts, 3, 3, fixed={(0, 0): 1})
    assert res.grid[0][0] == 1
    assert can_tile_rect(ts, 2, 1, fixed={(0, 0): 1, (0, 1): 1}).status == NO


def test_tileset_validation():
    with pytest.raises(TileNotInSet):
        TileSet.from_pairs(2, [(0, 5)], [])
    with pytest.raises(TileNotInSet):
        TileSet.from_pairs(2, [], [], alpha=4)
    with pytest.raises(ValueError):
        TileSet.from_pairs(2, [], [], alpha=1, beta=1)


def test_tileset_roundtrip_and_errors():
    ts = checkerboard_tileset().with_designated(0, 1)
    back = parse_tileset(format_tileset(ts))
    assert back == ts
    with pytest.raises(EmptyTileSet):
        parse_tileset("tiles 0\n")
    with pytest.raises(ParseError):
        parse_tileset("h 0 0\n")
    with pytest.raises(ParseError):
        parse_tileset("tiles 1\nh 0 x\n")
    with pytest.raises(ParseError):
        parse_tileset("tiles 1\nh 0 3\n")


def test_tm_parse_and_format():
    m = parse_tm(FOUR)
    assert parse_tm(format_tm(m)) == m
    with pytest.raises(ParseError):
        parse_tm("states a\nsymbols _\nblank _\n")
    with pytest.raises(ParseError):
        parse_tm(LOOP + "d a _ a _ S\n")
    with pytest.raises(ParseError):
        parse_tm("states a\nsymbols _\nblank _\nstart a\nd a _ a _ X\n")
    with pytest.raises(ParseError):
        parse_tm("states a h\nsymbols _\nblank _\nstart a\nhalt h\nd h _ a _ S\n")


def test_tm_run():
    assert parse_tm(HALT_NOW).run(10) == (True, 1)
    assert parse_tm(FOUR).run(10) == (True, 4)
    assert parse_tm(LOOP).run(10) == (False, 10)
    assert parse_tm(BOUNCE).run(10) == (False, 10)


def test_tm_tileset_designated_tiles():
    m = parse_tm(FOUR)
    ts = tm_to_tileset(m)
    assert ts.alpha is not None and ts.beta is not None
    # nothing may sit south of alpha, so rows holding alpha never stack
    assert not any(north == ts.alpha for (north, _) in ts.v_allowed)
    assert (ts.alpha, ts.alpha) not in ts.h_allowed
    # the halting state h never appears in a tile label
    assert not any("h" in t.label.split(":")[1:] for t in ts.tiles if not t.label.startswith("plain"))


@pytest.mark.parametrize("src", [HALT_NOW, LOOP, WALKER, FOUR, BOUNCE],
                         ids=["halt_now", "loop", "walker", "four", "bounce"])
@pytest.mark.parametrize("t", range(0, 6))
def test_strip_agrees_with_direct_run(src, t):
    m = parse_tm(src)
    halted, _ = m.run(t)
    assert bool(tm_strip_tileable(m, t)) == (not halted)


def test_loop_machine_tiles_squares():
    ts = tm_to_tileset(parse_tm(LOOP))
    assert max_square_tiling(ts, 10).n_star == 10


def test_halting_machine_still_tiles_blank_squares():
    # the plain blank tile stacks freely, so square tileability cannot see halting
    ts = tm_to_tileset(parse_tm(HALT_NOW))
    assert can_tile_square(ts, 8).status == YES


def test_tm_validation():
    with pytest.raises(ValueError):
        TuringMachine(("a",), ("_",), "x", "a", frozenset(), {})
    with pytest.raises(ValueError):
        TuringMachine(("a",), ("_",), "_", "b", frozenset(), {})
