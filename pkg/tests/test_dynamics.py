from itertools import product

import numpy as np
import pytest

from erosion_ca.dynamics import (
    CERTIFICATE,
    NO_WITNESS,
    WITNESS,
    BadStart,
    ShapeViolation,
    SizeGuard,
    blocking_check_1d,
    blocking_search_1d,
    equicontinuity_probe,
    erode,
    extract_obstacles,
    format_frame,
    infiltration_path,
    is_eroded,
    onion_obstacle,
    plain_obstacle,
    read_pgm,
    sensitivity_probe,
    verify_infiltration,
    with_particle,
    write_pgm,
)
from erosion_ca.lattice import Configuration, Rect, agreement_radius, norm
from erosion_ca.rules import (
    identity_1d,
    left_shift_1d,
    rule_F,
    rule_F_tau,
    rule_G_tau,
    step,
    wall_rule_1d,
)
from erosion_ca.tiles import TileSet, free_tileset

F = rule_F()
A = F.alphabet


def stack_tileset():
    return TileSet.from_pairs(3, [(0, 0), (1, 1), (2, 2)], [(1, 0), (2, 1)])


def diverges_by_hand(rule, x, y, m, t):
    """Iterate both orbits and look for a differing cell in the ball of radius m."""
    for _ in range(t):
        x, y = step(rule, x), step(rule, y)
    ball = Rect.centered((0, 0), m)
    return any(x.get(z) != y.get(z) for z in ball.positions())


# erosion -------------------------------------------------------------------

def test_erode_examples():
    assert erode(F, Configuration.empty(A), 5).t0 == 0
    cells = plain_obstacle(3, 3)
    cells.update({(-4, 1): "U", (-4, 0): "D"})
    rep = erode(F, Configuration.from_names(A, cells), 5)
    assert rep.t0 == 0 and len(rep.particles) == 2
    assert rep.solid_bbox == Rect(0, 0, 5, 5)
    assert erode(F, Configuration.from_names(A, {(0, 0): "1"}), 5).t0 == 1


def test_particle_east_of_obstacle_passes_over():
    cells = plain_obstacle(3, 3)
    cells.update({(7, 1): "U", (7, 0): "D"})
    x = Configuration.from_names(A, cells)
    assert not is_eroded(F, x)
    rep = erode(F, x, 100)
    assert rep.t0 is not None and rep.t0 > 0
    assert is_eroded(F, rep.final)


def test_erode_timeout_serialized():
    cells = plain_obstacle(3, 3)
    cells.update({(30, 1): "U", (30, 0): "D"})
    rep = erode(F, Configuration.from_names(A, cells), 3)
    assert rep.timed_out and rep.t0 is None
    assert rep.serialize().splitlines()[:2] == ["t0=", "timeout=1"]


@pytest.mark.parametrize("seed", range(6))
def test_structured_erosion(seed):
    rng = np.random.default_rng(seed)
    cells, rects = {}, []
    while len(rects) < 2:
        iw, ih = (int(v) for v in rng.integers(3, 6, size=2))
        r = Rect(int(rng.integers(-10, 10)), int(rng.integers(-10, 10)), iw + 2, ih + 2)
        if all(r.chebyshev_gap(o) >= 3 for o in rects):
            rects.append(r)
            cells.update(plain_obstacle(iw, ih, r.x0, r.y0))
    for _ in range(int(rng.integers(0, 25))):
        cells[(int(rng.integers(-14, 14)), int(rng.integers(-14, 14)))] = str(rng.choice(["U", "D", "1"]))
    rep = erode(F, Configuration.from_names(A, cells), 2000)
    assert rep.t0 is not None
    assert is_eroded(F, rep.final)


# obstacles -----------------------------------------------------------------

def test_extract_obstacles():
    assert extract_obstacles(Configuration.empty(A)) == []
    obs = extract_obstacles(Configuration.from_names(A, plain_obstacle(3, 3, 1, 2)))
    assert [(o.rect, o.kind) for o in obs] == [(Rect(1, 2, 5, 5), "plain")]
    assert obs[0].half_perimeter == 10
    assert obs[0].upper_left == (0, 7) and obs[0].upper_right == (6, 7)


def test_onion_extracted():
    G = rule_G_tau(free_tileset(1))
    obs = extract_obstacles(Configuration.from_names(G.alphabet, onion_obstacle(9, (2, 1))))
    assert obs[0].kind == "onion" and obs[0].rect == Rect.centered((2, 1), 4)


def test_close_obstacles_rejected():
    cells = plain_obstacle(3, 3)
    cells.update(plain_obstacle(3, 3, 6, 0))  # one liquid column between
    with pytest.raises(ShapeViolation):
        extract_obstacles(Configuration.from_names(A, cells))


def test_non_rectangular_component_rejected():
    cells = plain_obstacle(3, 3)
    cells[(5, 2)] = "1"
    with pytest.raises(ShapeViolation):
        extract_obstacles(Configuration.from_names(A, cells))


# infiltration --------------------------------------------------------------

def test_path_without_obstacles_is_straight():
    path = infiltration_path(Configuration.empty(A), (2, 3), length=20)
    assert list(path.points) == [(2 + n, 3) for n in range(20)]
    assert path.detours == ()


def _is_connected(points):
    return all(abs(a[0] - b[0]) + abs(a[1] - b[1]) == 1 for a, b in zip(points, points[1:]))


@pytest.mark.parametrize("iw,ih,dy", [(3, 3, 0), (4, 6, 2), (5, 3, -1), (3, 5, 4)])
def test_detour_length(iw, ih, dy):
    x = Configuration.from_names(A, plain_obstacle(iw, ih, 4, -2))
    path = infiltration_path(x, (0, dy), length=60)
    assert _is_connected(path.points)
    (i0, i1, ob), = path.detours
    assert i1 - i0 == ob.half_perimeter + 1
    assert path.n0 == i1 and i1 in path.milestones
    assert not any(x.state_at(z).solid for z in path.points)
    # outside detours the lower half is free too
    assert not any(x.state_at((z[0], z[1] - 1)).solid for i, z in enumerate(path.points) if not i0 < i < i1)


@pytest.mark.parametrize("n_idx", range(0, 6))
def test_verify_infiltration_at_milestones(n_idx):
    cells = plain_obstacle(3, 4, 3, -2)
    cells.update(plain_obstacle(4, 3, 13, 1))
    x = Configuration.from_names(A, cells)
    z0 = (0, 0)
    path = infiltration_path(x, z0, length=40)
    n = path.milestones[n_idx * 3]
    assert verify_infiltration(F, x, z0, path, n)
    # the particle really does walk back along the path
    y = with_particle(x, path[n])
    for _ in range(n):
        y = step(F, y)
    assert y.name_at(z0) == "U"


def test_verify_infiltration_false_start():
    path = infiltration_path(Configuration.empty(A), (0, 0), length=5)
    assert verify_infiltration(F, Configuration.empty(A), (0, 0), path, 0)
    assert not verify_infiltration(F, Configuration.empty(A), (1, 0), path, 0)
    with pytest.raises(IndexError):
        verify_infiltration(F, Configuration.empty(A), (0, 0), path, 5)


def test_bad_start():
    x = Configuration.from_names(A, plain_obstacle(3, 3))
    with pytest.raises(BadStart):
        infiltration_path(x, (1, 1))


def test_mirrored_start_lands_lower_half():
    x = Configuration.from_names(A, plain_obstacle(3, 3, -2, -5))
    z0 = (0, 0)  # the obstacle's top border sits directly south
    path = infiltration_path(x, z0, length=12)
    assert path[0] == (0, 1)
    y = with_particle(x, path[8])
    for _ in range(8):
        y = step(F, y)
    assert y.name_at(z0) == "D"


# probes --------------------------------------------------------------------

def _check_witness(rule, x, rep):
    assert rep.outcome == WITNESS
    assert agreement_radius(x, rep.witness) > rep.k
    assert norm(rep.witness_at) <= rep.m
    assert diverges_by_hand(rule, x, rep.witness, rep.m, rep.witness_time)


def test_F_probe_finds_witness_on_liquid():
    x = Configuration.empty(A)
    rep = sensitivity_probe(F, x, 2, 5, 100)
    _check_witness(F, x, rep)


def test_F_stable_obstacle_gives_no_witness():
    x = Configuration.from_names(A, plain_obstacle(5, 5, -3, -3))
    rep = sensitivity_probe(F, x, 2, 6, 100)
    assert rep.outcome == NO_WITNESS


def test_random_strategy_is_seeded():
    x = Configuration.empty(A)
    a = sensitivity_probe(F, x, 1, 3, 30, strategy="random", seed=4, trials=10)
    b = sensitivity_probe(F, x, 1, 3, 30, strategy="random", seed=4, trials=10)
    assert a.serialize() == b.serialize()


def test_identity_like_rule_never_diverges():
    from erosion_ca.rules import lift_1d_to_2d
    L = lift_1d_to_2d(identity_1d())
    x = Configuration.empty(L.alphabet)
    rep = sensitivity_probe(L, x, 1, 3, 10, strategy="random", seed=0, trials=10)
    assert rep.outcome == NO_WITNESS


@pytest.mark.parametrize("seed", range(20))
def test_F_tau_sensitive_within_n_star(seed):
    # the stack tiles fill squares of side at most 3
    R = rule_F_tau(stack_tileset())
    rng = np.random.default_rng(seed)
    arr = rng.integers(0, len(R.alphabet), size=(9, 9)).astype(np.int32)
    x = Configuration.from_array(R.alphabet, arr, (-4, -4))
    rep = sensitivity_probe(R, x, 3, 6, 200)
    _check_witness(R, x, rep)


def test_onion_certificate_and_probe_agree():
    G = rule_G_tau(free_tileset(1))
    x = Configuration.from_names(G.alphabet, onion_obstacle(11))
    cert = equicontinuity_probe(G, x, 3, 5, 50)
    assert cert.outcome == CERTIFICATE
    rnd = equicontinuity_probe(G, x, 3, 5, 30, strategy="random", seed=1, trials=30)
    assert rnd.outcome == NO_WITNESS
    # no certificate without the onion
    assert equicontinuity_probe(G, Configuration.empty(G.alphabet), 3, 5, 30).outcome != CERTIFICATE


def test_probe_argument_checks():
    x = Configuration.empty(A)
    with pytest.raises(ValueError):
        sensitivity_probe(F, x, 4, 3, 10)
    with pytest.raises(ValueError):
        sensitivity_probe(F, x, 1, 3, 10, strategy="nope")


# blocking words ------------------------------------------------------------

def blocking_by_simulation(rule, u, t, pad):
    """Fill ``pad`` free cells on both sides of ``u`` in every way and run
    the rule directly on the finite strip."""
    names = rule.alphabet.names
    r = rule.radius
    left = len(u) // 2
    seen = None
    for fill in product(names, repeat=2 * pad):
        row = list(fill[:pad]) + list(u) + list(fill[pad:])
        centre = pad + left
        hist = []
        for _ in range(t + 1):
            hist.append(tuple(row[centre - r:centre + r + 1]))
            row = [rule.local(row[i - r:i + r + 1]) for i in range(r, len(row) - r)]
            centre -= r
        if seen is None:
            seen = hist
        elif hist != seen:
            return False
    return True


@pytest.mark.parametrize("make,u", [(identity_1d, "a"), (left_shift_1d, "ab"), (left_shift_1d, "aaaa"),
                                    (wall_rule_1d, "aw"), (wall_rule_1d, "aaw"), (wall_rule_1d, "ab")])
@pytest.mark.parametrize("t", [0, 1, 2])
def test_blocking_matches_simulation(make, u, t):
    rule = make()
    pad = rule.radius * (t + 1) + 1
    assert blocking_check_1d(rule, tuple(u), t) == blocking_by_simulation(rule, tuple(u), t, pad)


def test_blocking_examples():
    assert blocking_check_1d(identity_1d(), ("a", "a", "a"), 3)
    assert not blocking_check_1d(identity_1d(), ("a",), 3)
    assert not blocking_check_1d(left_shift_1d(), ("a", "b", "a"), 1)
    assert blocking_search_1d(left_shift_1d(), 3, 4) is None
    assert blocking_search_1d(wall_rule_1d(), 3, 4) == ("a", "a", "w")
    with pytest.raises(SizeGuard):
        blocking_check_1d(wall_rule_1d(), ("w",), 12, size_guard=1000)
    with pytest.raises(ValueError):
        blocking_check_1d(identity_1d(), (), 1)


# frames --------------------------------------------------------------------

def test_pgm_roundtrip(tmp_path):
    x = Configuration.from_names(A, {(0, 1): "U", (0, 0): "D", (2, 0): "1"})
    rect = Rect(-1, -1, 5, 4)
    write_pgm(tmp_path / "f.pgm", x, rect)
    assert np.array_equal(read_pgm(tmp_path / "f.pgm"), x.to_array(rect))
    text = format_frame(x, rect, 7)
    assert text.startswith("t=7")
