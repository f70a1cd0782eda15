"""Erosion, obstacle extraction, infiltration paths and dynamical probes.

Probes are bounded-horizon experiments: a found witness is conclusive,
an absent one is only evidence.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from typing import Sequence

import numpy as np

from .lattice import (
    Configuration,
    Pos,
    Rect,
    agreement_radius,
    norm,
    render,
)
from .rules import CARule, Rule1D, step
from .sft import LocalLanguage, onion_xparts, plain_obstacle_names, scan_violations


class ObstacleError(ValueError):
    pass


class NotInLanguage(ObstacleError):
    pass


class ShapeViolation(ObstacleError):
    pass


class BadStart(ValueError):
    pass


class NotEroded(ValueError):
    pass


class SizeGuard(RuntimeError):
    pass


def _target_language(rule: CARule) -> LocalLanguage:
    langs = rule.languages()
    if len(langs) != 1:
        raise ValueError(f"{rule.kind} has no single target language")
    return langs[0]


def _in_languages(rule: CARule, config: Configuration) -> bool:
    return all(not scan_violations(lang, config) for lang in rule.languages())


# erosion -------------------------------------------------------------------

@dataclass(frozen=True)
class ErosionReport:
    t0: int | None
    final: Configuration
    particles: tuple[Pos, ...]
    solid_bbox: Rect | None
    timed_out: bool = False

    def serialize(self) -> str:
        box = "" if self.solid_bbox is None else "%d,%d,%d,%d" % (
            self.solid_bbox.x0, self.solid_bbox.y0, self.solid_bbox.width, self.solid_bbox.height)
        return (f"t0={'' if self.t0 is None else self.t0}\ntimeout={int(self.timed_out)}\n"
                f"particles={len(self.particles)}\nsolid_bbox={box}\n")


def _particles(config: Configuration) -> list[Pos]:
    return config.positions_where(lambda s: s.name in ("U", "D"))


def _solids(config: Configuration) -> list[Pos]:
    return config.positions_where(lambda s: s.solid)


def is_eroded(rule: CARule, config: Configuration) -> bool:
    """In the rule's obstacle language(s), with every particle strictly
    west of every solid cell."""
    if not _in_languages(rule, config):
        return False
    solids, parts = _solids(config), _particles(config)
    if solids and parts and max(x for x, _ in parts) >= min(x for x, _ in solids):
        return False
    return True


def erode(rule: CARule, config: Configuration, t_max: int) -> ErosionReport:
    """Iterate until the configuration is eroded; report the first such time."""
    if not config.is_finite:
        raise ValueError("erosion needs a finite configuration")
    x = config
    for t in range(t_max + 1):
        if is_eroded(rule, x):
            solids = _solids(x)
            box = None if not solids else Rect.spanning(
                min(p[0] for p in solids), min(p[1] for p in solids),
                max(p[0] for p in solids), max(p[1] for p in solids))
            return ErosionReport(t, x, tuple(_particles(x)), box)
        if t < t_max:
            x = step(rule, x)
    return ErosionReport(None, x, tuple(_particles(x)), None, timed_out=True)


# obstacles -----------------------------------------------------------------

@dataclass(frozen=True)
class Obstacle:
    rect: Rect
    kind: str  # "plain" or "onion"

    @property
    def half_perimeter(self) -> int:
        return self.rect.width + self.rect.height

    @property
    def upper_left(self) -> Pos:
        return (self.rect.x0 - 1, self.rect.y1 + 1)

    @property
    def upper_right(self) -> Pos:
        return (self.rect.x1 + 1, self.rect.y1 + 1)

    @property
    def lower_right(self) -> Pos:
        return (self.rect.x1 + 1, self.rect.y0 - 1)

    @property
    def center(self) -> Pos:
        return (self.rect.x0 + self.rect.width // 2, self.rect.y0 + self.rect.height // 2)


def _components(cells: set[Pos]) -> list[set[Pos]]:
    seen: set[Pos] = set()
    out = []
    for start in sorted(cells, key=lambda z: (z[1], z[0])):
        if start in seen:
            continue
        comp, stack = set(), [start]
        seen.add(start)
        while stack:
            x, y = stack.pop()
            comp.add((x, y))
            for dx, dy in product((-1, 0, 1), repeat=2):
                n = (x + dx, y + dy)
                if n in cells and n not in seen:
                    seen.add(n)
                    stack.append(n)
        out.append(comp)
    return out


def _check_plain(config: Configuration, rect: Rect):
    if rect.width < 4 or rect.height < 4:
        raise ShapeViolation(f"obstacle {rect} has an interior thinner than 2")
    names = plain_obstacle_names(rect.width - 2, rect.height - 2)
    for r, row in enumerate(names):
        for c, expected in enumerate(row):
            s = config.state_at((rect.x0 + c, rect.y0 + r))
            got = s.xpart if s.xpart is not None else "1"
            if (expected == "1") != (got == "1") or (expected != "1" and got != expected):
                raise ShapeViolation(f"bad border state {s.name} at {(rect.x0 + c, rect.y0 + r)}")


def _check_onion(config: Configuration, rect: Rect):
    if rect.width != rect.height or rect.width % 2 == 0:
        raise ShapeViolation(f"onion obstacle {rect} is not an odd square")
    xs = onion_xparts(rect.width)
    for r, row in enumerate(xs):
        for c, expected in enumerate(row):
            s = config.state_at((rect.x0 + c, rect.y0 + r))
            if s.xpart != expected:
                raise ShapeViolation(f"bad X part {s.xpart} at {(rect.x0 + c, rect.y0 + r)}")


def extract_obstacles(config: Configuration, lang: LocalLanguage | None = None,
                      min_gap: int = 3) -> list[Obstacle]:
    """Split the solid cells into rectangular obstacles.

    Checks that each component fills its bounding rectangle, has the
    expected border or onion layout, and that distinct obstacles are at
    Chebyshev distance at least ``min_gap`` (two liquid cells between).
    """
    if lang is not None and scan_violations(lang, config):
        raise NotInLanguage("configuration has local violations")
    solids = set(_solids(config))
    obstacles = []
    for comp in _components(solids):
        xs = [z[0] for z in comp]
        ys = [z[1] for z in comp]
        rect = Rect.spanning(min(xs), min(ys), max(xs), max(ys))
        if len(comp) != rect.width * rect.height:
            raise ShapeViolation(f"solid component at {rect} is not a rectangle")
        onion = any(config.state_at(z).tile is not None and config.state_at(z).xpart is not None for z in comp)
        if onion:
            _check_onion(config, rect)
        else:
            _check_plain(config, rect)
        obstacles.append(Obstacle(rect, "onion" if onion else "plain"))
    for i, a in enumerate(obstacles):
        for b in obstacles[i + 1:]:
            if a.rect.chebyshev_gap(b.rect) < min_gap:
                raise ShapeViolation(f"obstacles {a.rect} and {b.rect} are too close")
    return obstacles


def plain_obstacle(iw: int, ih: int, x0: int = 0, y0: int = 0, interior: str = "1") -> dict[Pos, str]:
    """Cell names of a plain obstacle whose south-west corner is (x0, y0)."""
    names = plain_obstacle_names(iw, ih, interior)
    return {(x0 + c, y0 + r): n for r, row in enumerate(names) for c, n in enumerate(row)}


def onion_obstacle(n: int, center: Pos = (0, 0), tiles=None) -> dict[Pos, str]:
    """Cell names of an onion square of side ``n``; ``tiles(x, y)`` gives the
    tile id at each cell (tile 0 by default)."""
    xs = onion_xparts(n)
    h = n // 2
    out = {}
    for r, row in enumerate(xs):
        for c, xp in enumerate(row):
            z = (center[0] - h + c, center[1] - h + r)
            k = 0 if tiles is None else tiles(*z)
            out[z] = f"t{k}.{xp}"
    return out


# infiltration --------------------------------------------------------------

@dataclass(frozen=True)
class Path:
    """Positions of the particle's upper half, and the milestone indices
    where each construction step ends."""

    points: tuple[Pos, ...]
    milestones: tuple[int, ...]
    target: Pos
    detours: tuple[tuple[int, int, Obstacle], ...] = ()
    n0: int = 0

    def __len__(self) -> int:
        return len(self.points)

    def __getitem__(self, i: int) -> Pos:
        return self.points[i]


def _south(z: Pos) -> Pos:
    return (z[0], z[1] - 1)


def _north(z: Pos) -> Pos:
    return (z[0], z[1] + 1)


def infiltration_path(config: Configuration, z0: Pos, length: int = 64,
                      lang: LocalLanguage | None = None) -> Path:
    """Route for a particle that ends with its upper half on ``z0``.

    Free cells step east; an obstacle in the way is bypassed over its top
    and the route comes back down its east side, which adds exactly
    ``p + 1`` positions for half perimeter ``p``.  When the cell south of
    ``z0`` is solid, the route targets the cell north of ``z0`` so the
    lower half lands on ``z0``.
    """
    if config.state_at(z0).solid:
        raise BadStart(f"{z0} is solid")
    if lang is not None and scan_violations(lang, config):
        raise NotEroded("configuration is not in the obstacle language")
    # liquid states play no part in the construction
    base = config.map_states(lambda s: s if config.alphabet[s].solid else config.alphabet.id("0"))
    start = z0
    if base.state_at(_south(z0)).solid:
        start = _north(z0)
        if base.state_at(start).solid:
            raise BadStart(f"{z0} has solid cells both north and south")
    obstacles = extract_obstacles(base)
    owner: dict[Pos, Obstacle] = {}
    for ob in obstacles:
        for z in ob.rect.positions():
            owner[z] = ob

    points = [start]
    milestones = [0]
    detours = []
    z = start
    while len(points) < length:
        e, se = (z[0] + 1, z[1]), (z[0] + 1, z[1] - 1)
        ob = owner.get(e) or owner.get(se)
        if ob is None:
            z = e
            points.append(z)
        else:
            a, b = ob.upper_left, ob.upper_right
            k = a[1] - z[1]
            i0 = len(points) - 1
            seg = [(a[0], y) for y in range(z[1] + 1, a[1] + 1)]
            seg += [(x, a[1]) for x in range(a[0] + 1, b[0] + 1)]
            drop = ob.rect.height - k
            seg += [(b[0], b[1] - j) for j in range(1, drop + 1)]
            assert len(seg) == ob.half_perimeter + 1
            points.extend(seg)
            z = points[-1]
            detours.append((i0, len(points) - 1, ob))
        milestones.append(len(points) - 1)
    n0 = detours[-1][1] if detours else 0  # first milestone clear of every obstacle
    return Path(tuple(points[:length]), tuple(m for m in milestones if m < length), z0, tuple(detours), n0)


def with_particle(config: Configuration, z: Pos) -> Configuration:
    """Add a particle: upper half at ``z``, lower half directly south."""
    return config.with_names({z: "U", _south(z): "D"})


def verify_infiltration(rule: CARule, config: Configuration, z0: Pos, path: Path, n: int) -> bool:
    """Place a particle at ``path[n]`` and check that ``z0`` holds U or D
    after ``n`` steps."""
    if n >= len(path):
        raise IndexError("n beyond the constructed path")
    x = with_particle(config, path[n])
    for _ in range(n):
        x = step(rule, x)
    return x.name_at(z0) in ("U", "D")


# probes --------------------------------------------------------------------

WITNESS = "WitnessFound"
NO_WITNESS = "NoWitness"
CERTIFICATE = "CertificateHolds"


@dataclass(frozen=True)
class ProbeReport:
    mode: str
    m: int
    k: int
    t_max: int
    outcome: str
    strategy: str
    seed: int | None = None
    witness: Configuration | None = None
    witness_time: int | None = None
    witness_at: Pos | None = None
    t0: int | None = None
    note: str = ""

    def serialize(self) -> str:
        fields = [
            f"mode={self.mode}", f"strategy={self.strategy}", f"m={self.m}", f"k={self.k}",
            f"t_max={self.t_max}", f"outcome={self.outcome}",
            f"seed={'' if self.seed is None else self.seed}",
            f"t0={'' if self.t0 is None else self.t0}",
            f"t={'' if self.witness_time is None else self.witness_time}",
            f"witness_at={'' if self.witness_at is None else '%d,%d' % self.witness_at}",
        ]
        if self.witness is not None:
            fields.append("witness_cells=" + ";".join(
                f"{x},{y},{self.witness.alphabet.name(s)}"
                for (x, y), s in sorted(self.witness.cells.items(), key=lambda i: (i[0][1], i[0][0]))))
        if self.note:
            fields.append(f"note={self.note}")
        return "\n".join(fields) + "\n"


def _first_difference(a: Configuration, b: Configuration, m: int) -> Pos | None:
    box = Rect.centered((0, 0), m)
    for z in sorted(box.positions(), key=lambda z: (norm(z), z[1], z[0])):
        if a.get(z) != b.get(z):
            return z
    return None


def _diverges(rule: CARule, x: Configuration, y: Configuration, m: int, t_max: int,
              x_orbit: list[Configuration] | None = None) -> tuple[int, Pos] | None:
    """First time ``t <= t_max`` at which the orbits differ within radius ``m``."""
    a, b = x, y
    for t in range(t_max + 1):
        if x_orbit is not None:
            a = x_orbit[t]
        if agreement_radius(a, b) <= m:
            return t, _first_difference(a, b, m)
        if a == b:
            return None  # identical orbits from here on
        if t < t_max:
            if x_orbit is None:
                a = step(rule, a)
            b = step(rule, b)
    return None


def _orbit(rule: CARule, x: Configuration, t_max: int) -> list[Configuration]:
    out = [x]
    for _ in range(t_max):
        out.append(step(rule, out[-1]))
    return out


def _random_perturbation(x: Configuration, k: int, rng: np.random.Generator, spread: int) -> Configuration:
    """Change a few cells at Chebyshev norm in ``[k + 1, k + spread]``."""
    a = x.alphabet
    updates = {}
    for _ in range(int(rng.integers(1, 6))):
        r = int(rng.integers(k + 1, k + spread + 1))
        side = int(rng.integers(0, 4))
        t = int(rng.integers(-r, r + 1))
        z = [(t, r), (t, -r), (r, t), (-r, t)][side]
        updates[z] = int(rng.integers(0, len(a)))
    y = x.with_cells(updates)
    if agreement_radius(x, y) == math.inf:
        return _random_perturbation(x, k, rng, spread)
    return y


def _random_probe(rule, x, m, k, t_max, seed, trials, mode, spread, workers=1):
    """Each trial draws from its own generator seeded by (seed, index), so
    the outcome does not depend on scheduling; the lowest index wins."""
    orbit = _orbit(rule, x, t_max)

    def trial(i):
        rng = np.random.default_rng([seed, i])
        y = _random_perturbation(x, k, rng, spread)
        return y, _diverges(rule, x, y, m, t_max, orbit)

    if workers <= 1:
        results = (trial(i) for i in range(trials))
    else:
        pool = ThreadPoolExecutor(workers)
        results = pool.map(trial, range(trials))
    try:
        for i, (y, hit) in enumerate(results):
            if hit is not None:
                return ProbeReport(mode, m, k, t_max, WITNESS, "random", seed, y, hit[0], hit[1],
                                   note=f"trial {i}")
    finally:
        if workers > 1:
            pool.shutdown(cancel_futures=True)
    return ProbeReport(mode, m, k, t_max, NO_WITNESS, "random", seed, note=f"{trials} trials")


def _constructive_probe(rule, x, m, k, t_max, mode):
    """Truncate, erode, pick a liquid target near the origin and route a
    particle to it from outside radius ``k``."""
    if not x.is_finite:
        return ProbeReport(mode, m, k, t_max, NO_WITNESS, "constructive", note="x is not finite")
    lang = rule.languages()
    lang = lang[0] if len(lang) == 1 else None
    y = x.restrict(Rect.centered((0, 0), k))
    rep = erode(rule, y, t_max)
    if rep.timed_out:
        return ProbeReport(mode, m, k, t_max, NO_WITNESS, "constructive", note="erosion timed out")
    t0, eroded = rep.t0, rep.final
    targets = [z for z in sorted(Rect.centered((0, 0), m).positions(), key=lambda z: (norm(z), z[1], z[0]))
               if not eroded.state_at(z).solid]
    if not targets:
        return ProbeReport(mode, m, k, t_max, NO_WITNESS, "constructive", note="no liquid cell within radius m")
    x_orbit = _orbit(rule, x, t_max)
    y_orbit = None
    box = eroded.bbox() or Rect(0, 0, 1, 1)
    reach = max(abs(box.x0), abs(box.x1), abs(box.y0), abs(box.y1), k) + 4
    for z0 in targets:
        try:
            path = infiltration_path(eroded, z0, length=4 * reach + 8 * (box.width + box.height) + 16)
        except (BadStart, ObstacleError):
            continue
        # first index past every obstacle and outside radius k, then shift by t0
        n = next((i for i in range(path.n0, len(path) - t0)
                  if norm(path[i + t0]) > reach and norm(_south(path[i + t0])) > reach), None)
        if n is None:
            continue
        z_start = path[n + t0]
        candidate = with_particle(y, z_start)
        if candidate.get(z_start) != candidate.alphabet.id("U"):
            continue
        for cand in (candidate, y):
            hit = _diverges(rule, x, cand, m, t_max, x_orbit)
            if hit is not None:
                return ProbeReport(mode, m, k, t_max, WITNESS, "constructive", None, cand, hit[0], hit[1],
                                   t0=t0, note=f"target={z0[0]},{z0[1]}")
    return ProbeReport(mode, m, k, t_max, NO_WITNESS, "constructive", t0=t0, note="no route produced a divergence")


def sensitivity_probe(rule: CARule, x: Configuration, m: int, k: int, t_max: int,
                      strategy: str = "constructive", seed: int = 0, trials: int = 50,
                      spread: int = 6, workers: int = 1) -> ProbeReport:
    """Look for ``y`` agreeing with ``x`` on the ball of radius ``k`` whose
    orbit differs from that of ``x`` within radius ``m`` by time ``t_max``."""
    if m > k:
        raise ValueError("need m <= k")
    if strategy == "constructive":
        return _constructive_probe(rule, x, m, k, t_max, "sensitivity")
    if strategy == "random":
        return _random_probe(rule, x, m, k, t_max, seed, trials, "sensitivity", spread, workers)
    raise ValueError(f"unknown strategy {strategy!r}")


def onion_certificate(rule: CARule, x: Configuration, k: int) -> bool:
    """``x`` holds a valid onion square of side ``2k + 1`` centred on the origin."""
    if rule.kind not in ("Gtau", "Ghat", "Htau"):
        return False
    lang = [l for l in rule.languages() if l.onion][0]
    n = 2 * k + 1
    if n < 7:
        return False
    square = Rect.centered((0, 0), k)
    trunc = x.restrict(square, outside=x.alphabet.id("0"))
    if scan_violations(lang, trunc):
        return False
    try:
        obs = extract_obstacles(trunc)
    except ObstacleError:
        return False
    return len(obs) == 1 and obs[0].rect == square and obs[0].kind == "onion"


def equicontinuity_probe(rule: CARule, x: Configuration, m: int, k: int, t_max: int,
                         strategy: str = "certificate", seed: int = 0, trials: int = 50,
                         spread: int = 6, workers: int = 1) -> ProbeReport:
    """Certificate: a valid onion square of side ``2k + 1`` at the origin
    pins the central square of side ``2k - 3`` forever, so radius
    ``m <= k - 2`` is stable.  Otherwise try to falsify."""
    if m > k:
        raise ValueError("need m <= k")
    if strategy == "certificate":
        if m <= k - 2 and onion_certificate(rule, x, k):
            return ProbeReport("equicontinuity", m, k, t_max, CERTIFICATE, "certificate",
                               note=f"onion side {2 * k + 1} pins radius {k - 2}")
        rep = _constructive_probe(rule, x, m, k, t_max, "equicontinuity")
        return rep
    if strategy == "random":
        return _random_probe(rule, x, m, k, t_max, seed, trials, "equicontinuity", spread, workers)
    raise ValueError(f"unknown strategy {strategy!r}")


# blocking words ------------------------------------------------------------

def blocking_check_1d(rule: Rule1D, u: Sequence[str], t: int, size_guard: int = 2_000_000) -> bool:
    """R(u, t): every configuration with ``u`` centred on cell 0 has the
    same states on the ``2r + 1`` central cells up to time ``t``.

    Only cells within ``r (t + 1)`` of the centre can influence the central
    cells by time ``t``, so the free cells around ``u`` are enumerated
    exhaustively.
    """
    if not u:
        raise ValueError("u must be non-empty")
    r = rule.radius
    k = len(rule.alphabet)
    L = len(u)
    left = L // 2  # u occupies [-left, L - left - 1]
    reach = r * (t + 1)
    lo, hi = -reach, reach
    free_left = max(0, -left - lo)
    free_right = max(0, hi - (L - left - 1))
    n_free = free_left + free_right
    if k ** n_free > size_guard:
        raise SizeGuard(f"{k}**{n_free} fillings exceed the guard {size_guard}")
    ids = np.array([rule.alphabet.id(s) for s in u], dtype=np.int64)
    fills = np.array(list(product(range(k), repeat=n_free)), dtype=np.int64).reshape(k ** n_free, n_free)
    # keep only the part of u that lies within the light cone
    u_lo = max(-left, lo)
    u_hi = min(L - left - 1, hi)
    core = ids[u_lo + left:u_hi + left + 1]
    rows = np.concatenate([
        fills[:, :free_left],
        np.broadcast_to(core, (len(fills), len(core))),
        fills[:, free_left:],
    ], axis=1)
    centre = reach  # index of cell 0 in rows
    for step_no in range(t + 1):
        width = rows.shape[1]
        c = centre
        central = rows[:, c - r:c + r + 1]
        if central.shape[1] != 2 * r + 1:
            raise AssertionError("light cone too narrow")
        if not (central == central[0]).all():
            return False
        if step_no == t:
            break
        rows = rule.apply_rows(rows)
        centre -= r
    return True


def blocking_search_1d(rule: Rule1D, max_len: int, t: int, size_guard: int = 2_000_000) -> tuple[str, ...] | None:
    """First word in length-then-lexicographic order satisfying R(u, t)."""
    names = rule.alphabet.names
    for n in range(1, max_len + 1):
        for u in product(names, repeat=n):
            if blocking_check_1d(rule, u, t, size_guard):
                return u
    return None


# frames ---------------------------------------------------------------------

def format_frame(config: Configuration, rect: Rect, t: int) -> str:
    return f"t={t}\n" + render(config, rect) + "\n"


def write_pgm(path, config: Configuration, rect: Rect) -> None:
    """Binary PGM, one byte per cell holding the state id, north row first."""
    arr = config.to_array(rect)[::-1]
    if len(config.alphabet) > 256:
        raise ValueError("alphabet too large for one byte per cell")
    header = f"P5\n{rect.width} {rect.height}\n255\n".encode()
    with open(path, "wb") as fh:
        fh.write(header + arr.astype(np.uint8).tobytes())


def read_pgm(path) -> np.ndarray:
    """Inverse of ``write_pgm``: array indexed [y, x] with row 0 southernmost."""
    with open(path, "rb") as fh:
        data = fh.read()
    parts = data.split(maxsplit=3)
    if parts[0] != b"P5":
        raise ValueError("not a binary PGM")
    w, h = int(parts[1]), int(parts[2])
    body = data[len(data) - w * h:]
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w)[::-1].astype(np.int32)
