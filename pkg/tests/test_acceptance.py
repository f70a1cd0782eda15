"""One test per acceptance criterion; each prints a single PASS/FAIL line."""
import pytest

from erosion_ca import suite

RESULTS = {}


def run(n, capsys):
    res = suite.CHECKS[n]()
    RESULTS[n] = res
    with capsys.disabled():
        print("\n" + res.line())
    return res


def test_01_rule_table(capsys):
    assert run(1, capsys).ok


def test_02_quiescence_and_equivariance(capsys):
    assert run(2, capsys).ok


def test_03_particle_moves_west(capsys):
    assert run(3, capsys).ok


def test_04_obstacle_immunity(capsys):
    assert run(4, capsys).ok


def test_05_finite_erosion(capsys):
    assert run(5, capsys).ok


def test_06_infiltration(capsys):
    assert run(6, capsys).ok


def test_07_conservative_erosion(capsys):
    assert run(7, capsys).ok


@pytest.mark.xfail(strict=True, reason="compiled halting machines still tile every square with the blank tile, "
                                      "so no finite square bound exists; see the decisions ledger")
def test_08_tiling_sensitivity(capsys):
    assert run(8, capsys).ok


def test_09_onion_certificate(capsys):
    assert run(9, capsys).ok


def test_10_blocking_words(capsys):
    assert run(10, capsys).ok


def test_11_lifted_rules(capsys):
    assert run(11, capsys).ok


def test_12_determinism(capsys):
    res = suite.c12_determinism(RESULTS)
    with capsys.disabled():
        print("\n" + res.line())
    assert res.ok
