"""Acceptance criteria as runnable checks.

Each check returns a ``CheckResult`` whose ``report`` is a deterministic
text record (no timings) so that reruns can be compared byte for byte.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .dynamics import (
    CERTIFICATE,
    NO_WITNESS,
    WITNESS,
    ObstacleError,
    blocking_check_1d,
    blocking_search_1d,
    equicontinuity_probe,
    erode,
    extract_obstacles,
    infiltration_path,
    onion_obstacle,
    plain_obstacle,
    sensitivity_probe,
    verify_infiltration,
)
from .lattice import Configuration, Rect
from .rules import (
    PARTICLE_TRANSITIONS,
    identity_1d,
    iterate,
    left_shift_1d,
    lift_1d_to_2d,
    rule_F,
    rule_F_tau,
    rule_G_tau,
    rule_H_tau,
    step,
    verify_rule_table,
    wall_rule_1d,
)
from .sft import generate_sigma_S
from .tiles import free_tileset, max_square_tiling, parse_tm, tm_to_tileset


@dataclass(frozen=True)
class CheckResult:
    number: int
    name: str
    ok: bool
    report: str
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        extra = f" ({self.detail})" if self.detail else ""
        return f"[{status}] {self.number:2d} {self.name}{extra}"


# fixtures ------------------------------------------------------------------

HALTING_TM = """\
states a b c h
symbols _ 1
blank _
start a
halt h
d a _ b 1 R
d b _ c 1 R
d c _ a 1 L
d a 1 h 1 S
"""

LOOP_TM = """\
states a
symbols _
blank _
start a
d a _ a _ S
"""


def random_config(rule, rng: np.random.Generator, size: int = 30, x0: int = 0, y0: int = 0) -> Configuration:
    """Uniform random states on a ``size`` x ``size`` square, liquid 0 outside."""
    arr = rng.integers(0, len(rule.alphabet), size=(size, size)).astype(np.int32)
    return Configuration.from_array(rule.alphabet, arr, (x0, y0), rule.alphabet.id("0"))


def random_field(rng: np.random.Generator, count: int, xmin: int = 2, xmax: int = 40,
                 ymin: int = -10, ymax: int = 10, gap: int = 3) -> dict:
    """Cells of ``count`` plain obstacles placed at Chebyshev gap >= ``gap``."""
    rects: list[Rect] = []
    cells = {}
    while len(rects) < count:
        iw, ih = (int(v) for v in rng.integers(3, 7, size=2))
        x0 = int(rng.integers(xmin, xmax))
        y0 = int(rng.integers(ymin, ymax))
        r = Rect(x0, y0, iw + 2, ih + 2)
        if any(r.chebyshev_gap(o) < gap for o in rects):
            continue
        rects.append(r)
        cells.update(plain_obstacle(iw, ih, x0, y0))
    return cells


def _particle_config(rule, x: int = 0, y: int = 0) -> Configuration:
    return Configuration.from_names(rule.alphabet, {(x, y + 1): "U", (x, y): "D"})


def _kinds():
    ts = free_tileset(1)
    return [("F", rule_F()), ("Ftau", rule_F_tau(ts)), ("Gtau", rule_G_tau(ts)), ("Htau", rule_H_tau(ts))]


# criteria ------------------------------------------------------------------

def c1_rule_table() -> CheckResult:
    t = time.perf_counter()
    rep = verify_rule_table(PARTICLE_TRANSITIONS)  # built from scratch, not the cached table
    dt = time.perf_counter() - t
    rep = rep if rep == verify_rule_table(rule_F()) else None
    if rep is None:
        return CheckResult(1, "rule-table coherence", False, "mismatch\n", "rule table differs from its transitions")
    ok = rep.n_windows == 4 ** 9 and not rep.conflicts and dt < 10.0
    report = (f"windows={rep.n_windows}\nentries={rep.n_entries}\nvariants={rep.n_variants}\n"
              f"conflicts={len(rep.conflicts)}\nmulti={rep.multiply_matched}\n")
    return CheckResult(1, "rule-table coherence", ok, report,
                       f"{rep.n_windows} windows, {len(rep.conflicts)} conflicts, {dt:.2f}s")


def c2_quiescence_equivariance(seed: int = 2) -> CheckResult:
    rng = np.random.default_rng(seed)
    lines = []
    ok = True
    for name, rule in _kinds():
        zero = rule.alphabet.id("0")
        fixed = np.array_equal(rule.step_array(np.full((9, 9), zero, dtype=np.int32)), np.full((9, 9), zero))
        fixed = fixed and step(rule, Configuration.empty(rule.alphabet, zero)).cells == {}
        x = random_config(rule, rng, size=10)
        fx = step(rule, x)
        bad = 0
        for _ in range(20):
            dx, dy = (int(v) for v in rng.integers(-25, 26, size=2))
            if step(rule, x.translate(dx, dy)) != fx.translate(dx, dy):
                bad += 1
        ok = ok and fixed and bad == 0
        lines.append(f"{name} fixed={int(fixed)} bad_translations={bad}")
    return CheckResult(2, "quiescence and equivariance", ok, "\n".join(lines) + "\n")


def c3_particle() -> CheckResult:
    F = rule_F()
    x0 = _particle_config(F)
    x = x0
    bad = []
    for t in range(1, 51):
        x = step(F, x)
        if x != x0.translate(-t, 0):
            bad.append(t)
    ok = not bad
    return CheckResult(3, "particle transport", ok, f"steps=50\nbad={bad}\n",
                       "moved 1 cell west per step" if ok else f"wrong at t={bad[:5]}")


def c4_obstacle_immunity() -> CheckResult:
    F = rule_F()
    lines, ok = [], True
    for iw in range(3, 7):
        for ih in range(3, 7):
            x = Configuration.from_names(F.alphabet, plain_obstacle(iw, ih, -2, -2))
            same = iterate(F, x, 100) == x
            ok = ok and same
            lines.append(f"{iw}x{ih} fixed={int(same)}")
    return CheckResult(4, "obstacle immunity", ok, "\n".join(lines) + "\n", "16 fixtures x 100 steps")


def c5_erosion(seed: int = 5, count: int = 100) -> CheckResult:
    F = rule_F()
    lang = generate_sigma_S()
    rng = np.random.default_rng(seed)
    t = time.perf_counter()
    lines, ok = [], True
    for i in range(count):
        x = random_config(F, rng, size=30, x0=-15, y0=-15)
        rep = erode(F, x, 4 * 900)
        if rep.timed_out:
            ok = False
            lines.append(f"{i} timeout")
            continue
        try:
            obs = extract_obstacles(rep.final, lang)
        except ObstacleError as exc:
            ok = False
            lines.append(f"{i} t0={rep.t0} error={exc}")
            continue
        gaps = [a.rect.chebyshev_gap(b.rect) for j, a in enumerate(obs) for b in obs[j + 1:]]
        if any(g < 2 for g in gaps):
            ok = False
        lines.append(f"{i} t0={rep.t0} obstacles={len(obs)} min_gap={min(gaps) if gaps else ''}")
    dt = time.perf_counter() - t
    ok = ok and dt < 60.0
    return CheckResult(5, "erosion", ok, "\n".join(lines) + "\n", f"{count} configs in {dt:.1f}s")


def _field_checks(rng, F, lang, count):
    cells = random_field(rng, count)
    x = Configuration.from_names(F.alphabet, cells)
    z0 = (0, int(rng.integers(-4, 5)))
    path = infiltration_path(x, z0, length=160, lang=lang)
    ms = list(path.milestones)
    picks = [ms[int(j)] for j in np.linspace(0, len(ms) - 1, 10).round()]
    verified = [verify_infiltration(F, x, z0, path, n) for n in picks]
    detours = [(end - start, ob.half_perimeter + 1) for start, end, ob in path.detours]
    increasing = all(path[b][0] > path[a][0] for a, b in zip(ms, ms[1:]))
    return z0, picks, verified, detours, increasing


def c6_infiltration(seed: int = 6, fields: int = 9) -> CheckResult:
    F = rule_F()
    lang = generate_sigma_S()
    rng = np.random.default_rng(seed)
    lines, ok, n_detours = [], True, 0
    for i in range(fields):
        count = 1 + i % 3
        z0, picks, verified, detours, increasing = _field_checks(rng, F, lang, count)
        good = all(verified) and all(a == b for a, b in detours) and increasing
        ok = ok and good
        n_detours += len(detours)
        lines.append(f"field={i} obstacles={count} z0={z0[0]},{z0[1]} milestones={picks} "
                     f"verified={sum(verified)} detours={detours} increasing={int(increasing)}")
    ok = ok and n_detours > 0
    return CheckResult(6, "infiltration", ok, "\n".join(lines) + "\n", f"{fields} fields, {n_detours} detours")


def c7_conservative_erosion(seed: int = 7) -> CheckResult:
    ts = free_tileset(1)
    G = rule_G_tau(ts)
    rng = np.random.default_rng(seed)
    lines, ok = [], True
    liquids = ["0", "U", "D"]
    for n in (7, 9, 11):
        h = n // 2
        cells = onion_obstacle(n)
        box = Rect.centered((0, 0), h + 4)
        for z in box.positions():
            if max(abs(z[0]), abs(z[1])) > h and rng.random() < 0.5:
                cells[z] = liquids[int(rng.integers(0, 3))]
        x = Configuration.from_names(G.alphabet, cells)
        core = Rect.centered((0, 0), h - 2)
        ref = x.to_array(core)
        same = True
        y = x
        for _ in range(100):
            y = step(G, y)
            if not np.array_equal(y.to_array(core), ref):
                same = False
                break
        ok = ok and same
        lines.append(f"side={n} core={n - 4} unchanged={int(same)}")
    return CheckResult(7, "conservative erosion", ok, "\n".join(lines) + "\n")


def c8_tiling_sensitivity(seed: int = 8, configs: int = 20, t_max: int = 500,
                          n_max: int = 12) -> CheckResult:
    tm = parse_tm(HALTING_TM)
    halted, steps = tm.run(10)
    ts = tm_to_tileset(tm)
    sq = max_square_tiling(ts, n_max, budget=200_000)
    lines = [f"tm_halted={int(halted)} tm_steps={steps}", f"tiles={ts.n}",
             f"squares={' '.join(f'{n}:{s}' for n, s in sq.outcomes)}",
             f"n_star={sq.n_star} bounded={int(sq.bounded)}"]
    if not (halted and steps <= 5):
        return CheckResult(8, "tiling-controlled sensitivity", False, "\n".join(lines) + "\n", "machine does not halt")
    if not sq.bounded:
        return CheckResult(8, "tiling-controlled sensitivity", False, "\n".join(lines) + "\n",
                           f"compiled tile set tiles every square up to {n_max}; no finite n*")
    n = sq.n_star
    Ft = rule_F_tau(ts)
    rng = np.random.default_rng(seed)
    found = 0
    for i in range(configs):
        x = random_config(Ft, rng, size=2 * n + 3, x0=-n - 1, y0=-n - 1)
        rep = sensitivity_probe(Ft, x, n, n, t_max)
        found += rep.outcome == WITNESS
        lines.append(f"config={i} outcome={rep.outcome} t={rep.witness_time}")
    ok = found == configs
    return CheckResult(8, "tiling-controlled sensitivity", ok, "\n".join(lines) + "\n", f"{found}/{configs} witnesses")


def c9_certificate(seed: int = 9, trials: int = 200, t_max: int = 40) -> CheckResult:
    G = rule_G_tau(free_tileset(1))
    lines, ok = [], True
    for m, k in ((3, 5), (5, 7)):
        x = Configuration.from_names(G.alphabet, onion_obstacle(2 * k + 1))
        cert = equicontinuity_probe(G, x, m, k, t_max)
        rnd = equicontinuity_probe(G, x, m, k, t_max, strategy="random", seed=seed, trials=trials, workers=4)
        ok = ok and cert.outcome == CERTIFICATE and rnd.outcome == NO_WITNESS
        lines.append(f"m={m} k={k} certificate={cert.outcome} random={rnd.outcome} trials={trials}")
    return CheckResult(9, "equicontinuity certificate", ok, "\n".join(lines) + "\n")


def c10_blocking_words() -> CheckResult:
    ident = blocking_search_1d(identity_1d(), 3, 4)
    wall = blocking_search_1d(wall_rule_1d(), 3, 4)
    shift = blocking_search_1d(left_shift_1d(), 3, 4)
    ok = (ident is not None and wall is not None and shift is None
          and blocking_check_1d(wall_rule_1d(), wall, 4))
    report = (f"identity={''.join(ident or ())}\nwall={''.join(wall or ())}\n"
              f"shift={'None' if shift is None else ''.join(shift)}\n")
    return CheckResult(10, "blocking words", ok, report)


def _band_pair(rule, rng, u, rows=11, half=12):
    names = rule.alphabet.names
    free = [s for s in names if s != "w"]
    r0 = -(rows // 2)
    left = len(u) // 2

    def one():
        cells = {}
        for y in range(r0, r0 + rows):
            for x in range(-half, half + 1):
                cells[(x, y)] = free[int(rng.integers(0, len(free)))]
            for j, s in enumerate(u):
                cells[(j - left, y)] = s
        return Configuration.from_names(rule.alphabet, cells, background="a")

    return one(), one()


def c11_lift(seed: int = 11) -> CheckResult:
    rule1d = wall_rule_1d()
    u = blocking_search_1d(rule1d, 3, 4)
    L = lift_1d_to_2d(rule1d)
    rng = np.random.default_rng(seed)
    lines, ok = [], u is not None
    r = rule1d.radius
    band = Rect(-r, -5, 2 * r + 1, 11)
    for i in range(10):
        x, y = _band_pair(L, rng, u)
        agree = True
        for _ in range(20):
            x, y = step(L, x), step(L, y)
            if not np.array_equal(x.to_array(band), y.to_array(band)):
                agree = False
                break
        ok = ok and agree
        lines.append(f"pair={i} band_agrees={int(agree)}")
    S = lift_1d_to_2d(left_shift_1d())
    xs = Configuration.from_array(S.alphabet, rng.integers(0, 2, size=(7, 7)).astype(np.int32), (-3, -3))
    rep = sensitivity_probe(S, xs, 1, 3, 20, strategy="random", seed=seed, trials=50)
    ok = ok and rep.outcome == WITNESS
    lines.append(f"shift_lift={rep.outcome} t={rep.witness_time} at={rep.witness_at}")
    return CheckResult(11, "lift", ok, "\n".join(lines) + "\n")


CHECKS: dict[int, Callable[[], CheckResult]] = {
    1: c1_rule_table,
    2: c2_quiescence_equivariance,
    3: c3_particle,
    4: c4_obstacle_immunity,
    5: c5_erosion,
    6: c6_infiltration,
    7: c7_conservative_erosion,
    8: c8_tiling_sensitivity,
    9: c9_certificate,
    10: c10_blocking_words,
    11: c11_lift,
}


def c12_determinism(first: dict[int, CheckResult] | None = None) -> CheckResult:
    """Rerun criteria 3..11 and compare their reports byte for byte."""
    first = first or {}
    diffs = []
    for n in range(3, 12):
        a = first[n] if n in first else CHECKS[n]()
        b = CHECKS[n]()
        if a.report.encode() != b.report.encode():
            diffs.append(n)
    return CheckResult(12, "determinism", not diffs, f"differs={diffs}\n",
                       "reports of 3-11 byte-identical" if not diffs else f"criteria {diffs} differ")


GROUPS = {
    "all": list(range(1, 13)),
    "rules": [1, 2, 3],
    "erosion": [4, 5, 6, 7],
    "tiling": [8],
    "probes": [8, 9],
    "1d": [10, 11],
    "determinism": [12],
}


def run_suite(name: str = "all", emit: Callable[[str], None] = print) -> list[CheckResult]:
    if name in GROUPS:
        numbers = GROUPS[name]
    else:
        try:
            numbers = [int(v) for v in name.split(",")]
        except ValueError:
            raise KeyError(f"unknown suite {name!r}") from None
        if any(n not in range(1, 13) for n in numbers):
            raise KeyError(f"unknown criterion in {name!r}")
    results: dict[int, CheckResult] = {}
    out = []
    for n in numbers:
        res = c12_determinism(results) if n == 12 else CHECKS[n]()
        results[n] = res
        out.append(res)
        emit(res.line())
    return out
