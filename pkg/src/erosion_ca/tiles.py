"""Wang tile sets, square tileability search and a Turing machine compiler."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from .lattice import ParseError


class EmptyTileSet(ValueError):
    pass


class TileNotInSet(ValueError):
    pass


@dataclass(frozen=True)
class Tile:
    id: int
    label: str = ""


@dataclass(frozen=True)
class TileSet:
    """Tiles plus allowed adjacencies.

    ``h_allowed`` holds ``(a, b)`` when ``a`` may sit directly west of ``b``;
    ``v_allowed`` holds ``(a, b)`` when ``a`` may sit directly north of ``b``.
    """

    tiles: tuple[Tile, ...]
    h_allowed: frozenset[tuple[int, int]]
    v_allowed: frozenset[tuple[int, int]]
    alpha: int | None = None
    beta: int | None = None

    def __post_init__(self):
        ids = [t.id for t in self.tiles]
        if ids != list(range(len(ids))):
            raise ValueError("tile ids must be 0..n-1 in order")
        n = len(ids)
        for a, b in self.h_allowed | self.v_allowed:
            if not (0 <= a < n and 0 <= b < n):
                raise TileNotInSet(f"pair ({a}, {b}) references a missing tile")
        for t in (self.alpha, self.beta):
            if t is not None and not 0 <= t < n:
                raise TileNotInSet(f"designated tile {t} not in set")
        if self.alpha is not None and self.alpha == self.beta:
            raise ValueError("alpha and beta must differ")

    @property
    def n(self) -> int:
        return len(self.tiles)

    @classmethod
    def from_pairs(cls, n: int, h: Iterable[tuple[int, int]], v: Iterable[tuple[int, int]],
                   alpha: int | None = None, beta: int | None = None,
                   labels: Iterable[str] | None = None) -> "TileSet":
        labels = list(labels) if labels is not None else [""] * n
        return cls(tuple(Tile(i, labels[i]) for i in range(n)), frozenset(h), frozenset(v), alpha, beta)

    def h_ok(self, a: int, b: int) -> bool:
        return (a, b) in self.h_allowed

    def v_ok(self, a: int, b: int) -> bool:
        return (a, b) in self.v_allowed

    def with_designated(self, alpha: int, beta: int) -> "TileSet":
        return TileSet(self.tiles, self.h_allowed, self.v_allowed, alpha, beta)


def free_tileset(n: int = 1) -> TileSet:
    """``n`` tiles and no constraint at all."""
    pairs = [(a, b) for a in range(n) for b in range(n)]
    return TileSet.from_pairs(n, pairs, pairs)


def checkerboard_tileset() -> TileSet:
    """Two tiles that must alternate in both directions."""
    alt = [(0, 1), (1, 0)]
    return TileSet.from_pairs(2, alt, alt)


def format_tileset(ts: TileSet) -> str:
    lines = [f"tiles {ts.n}"]
    lines += [f"h {a} {b}" for a, b in sorted(ts.h_allowed)]
    lines += [f"v {a} {b}" for a, b in sorted(ts.v_allowed)]
    if ts.alpha is not None:
        lines.append(f"alpha {ts.alpha}")
    if ts.beta is not None:
        lines.append(f"beta {ts.beta}")
    return "\n".join(lines) + "\n"


def parse_tileset(text: str) -> TileSet:
    n = None
    h, v = set(), set()
    alpha = beta = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "tiles" and len(parts) == 2:
                n = int(parts[1])
            elif parts[0] in ("h", "v") and len(parts) == 3:
                (h if parts[0] == "h" else v).add((int(parts[1]), int(parts[2])))
            elif parts[0] == "alpha" and len(parts) == 2:
                alpha = int(parts[1])
            elif parts[0] == "beta" and len(parts) == 2:
                beta = int(parts[1])
            else:
                raise ParseError(f"line {lineno}: cannot parse {line!r}")
        except ValueError as exc:
            if isinstance(exc, ParseError):
                raise
            raise ParseError(f"line {lineno}: bad integer") from None
    if n is None:
        raise ParseError("missing 'tiles <n>' header")
    if n < 1:
        raise EmptyTileSet("tile set has no tiles")
    try:
        return TileSet.from_pairs(n, h, v, alpha, beta)
    except ValueError as exc:
        raise ParseError(str(exc)) from None


# square tileability -------------------------------------------------------

YES, NO, BUDGET = "Yes", "No", "BudgetExceeded"


@dataclass(frozen=True)
class TilingResult:
    status: str
    grid: tuple[tuple[int, ...], ...] | None = None  # rows, southernmost first
    nodes: int = 0

    def __bool__(self) -> bool:
        return self.status == YES


def _candidates(ts: TileSet):
    """Tiles compatible with a given west neighbour and south neighbour."""
    after_w = {a: {b for (x, b) in ts.h_allowed if x == a} for a in range(ts.n)}
    over_s = {a: {b for (b, x) in ts.v_allowed if x == a} for a in range(ts.n)}
    return after_w, over_s


def can_tile_rect(ts: TileSet, width: int, height: int, budget: int = 1_000_000,
                  fixed: dict[tuple[int, int], int] | None = None) -> TilingResult:
    """Deterministic row-major backtracking, southern row first.

    ``fixed`` pins ``(row, col)`` cells to tiles; ``budget`` caps the number
    of search nodes.
    """
    if width <= 0 or height <= 0:
        return TilingResult(YES, tuple(), 0)
    fixed = fixed or {}
    after_w, over_s = _candidates(ts)
    every = set(range(ts.n))
    grid = [[-1] * width for _ in range(height)]
    cells = [(r, c) for r in range(height) for c in range(width)]
    options: list[list[int]] = [[] for _ in cells]
    nodes = 0
    i = 0

    def domain(r, c):
        s = every
        if c > 0:
            s = s & after_w[grid[r][c - 1]]
        if r > 0:
            s = s & over_s[grid[r - 1][c]]
        if (r, c) in fixed:
            s = s & {fixed[(r, c)]}
        return sorted(s, reverse=True)

    options[0] = domain(0, 0)
    while True:
        if i == len(cells):
            return TilingResult(YES, tuple(tuple(row) for row in grid), nodes)
        if not options[i]:
            grid[cells[i][0]][cells[i][1]] = -1
            i -= 1
            if i < 0:
                return TilingResult(NO, None, nodes)
            continue
        nodes += 1
        if nodes > budget:
            return TilingResult(BUDGET, None, nodes)
        r, c = cells[i]
        grid[r][c] = options[i].pop()
        i += 1
        if i < len(cells):
            options[i] = domain(*cells[i])


def can_tile_square(ts: TileSet, n: int, budget: int = 1_000_000) -> TilingResult:
    return can_tile_rect(ts, n, n, budget)


def check_tiling(ts: TileSet, grid) -> bool:
    """Every adjacent pair of ``grid`` (rows, southernmost first) is allowed."""
    for r, row in enumerate(grid):
        for c, t in enumerate(row):
            if c > 0 and not ts.h_ok(row[c - 1], t):
                return False
            if r > 0 and not ts.v_ok(t, grid[r - 1][c]):
                return False
    return True


@dataclass(frozen=True)
class SquareReport:
    n_star: int
    bounded: bool
    outcomes: tuple[tuple[int, str], ...]


def max_square_tiling(ts: TileSet, n_max: int, budget: int = 1_000_000) -> SquareReport:
    """Largest ``n <= n_max`` with an ``n`` x ``n`` tiling.

    Tileability is monotone in ``n`` so the scan stops at the first failure.
    ``bounded`` is true only when some size was proved impossible.
    """
    outcomes = []
    best = 0
    for n in range(1, n_max + 1):
        res = can_tile_square(ts, n, budget)
        outcomes.append((n, res.status))
        if res.status == YES:
            best = n
            continue
        return SquareReport(best, res.status == NO, tuple(outcomes))
    return SquareReport(best, False, tuple(outcomes))


# Turing machines ------------------------------------------------------------

MOVES = {"L": -1, "R": 1, "S": 0}


@dataclass(frozen=True)
class TuringMachine:
    states: tuple[str, ...]
    symbols: tuple[str, ...]
    blank: str
    start: str
    halting: frozenset[str]
    delta: dict = field(hash=False, compare=True)  # (q, a) -> (q', a', move)

    def __post_init__(self):
        if self.blank not in self.symbols:
            raise ValueError("blank is not a tape symbol")
        if self.start not in self.states:
            raise ValueError("start is not a state")
        for (q, a), (q2, a2, mv) in self.delta.items():
            if q not in self.states or q2 not in self.states:
                raise ValueError(f"unknown state in transition {(q, a)}")
            if a not in self.symbols or a2 not in self.symbols:
                raise ValueError(f"unknown symbol in transition {(q, a)}")
            if mv not in MOVES:
                raise ValueError(f"bad move {mv!r}")
            if q in self.halting:
                raise ValueError(f"halting state {q} has a transition")

    def run(self, t_max: int) -> tuple[bool, int]:
        """Run on a blank tape; return (halted, steps taken).  A step into a
        halting state counts, and a missing transition halts at once."""
        tape: dict[int, str] = {}
        q, pos = self.start, 0
        for t in range(t_max):
            a = tape.get(pos, self.blank)
            if (q, a) not in self.delta:
                return True, t
            q, a2, mv = self.delta[(q, a)]
            tape[pos] = a2
            pos += MOVES[mv]
            if q in self.halting:
                return True, t + 1
        return False, t_max


def parse_tm(text: str) -> TuringMachine:
    """Lines: ``states q..``, ``symbols a..``, ``blank a``, ``start q``,
    ``halt q..`` and transitions ``d q a q' a' L|R|S``."""
    info: dict[str, list[str]] = {}
    delta = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        head = parts[0]
        if head == "d":
            if len(parts) != 6:
                raise ParseError(f"line {lineno}: transition needs 5 fields")
            key = (parts[1], parts[2])
            if key in delta:
                raise ParseError(f"line {lineno}: duplicate transition for {key}")
            delta[key] = (parts[3], parts[4], parts[5])
        elif head in ("states", "symbols", "blank", "start", "halt"):
            info[head] = parts[1:]
        else:
            raise ParseError(f"line {lineno}: cannot parse {line!r}")
    for key in ("states", "symbols", "blank", "start"):
        if not info.get(key):
            raise ParseError(f"missing '{key}' line")
    if len(info["blank"]) != 1 or len(info["start"]) != 1:
        raise ParseError("blank and start take one value")
    try:
        return TuringMachine(tuple(info["states"]), tuple(info["symbols"]), info["blank"][0],
                             info["start"][0], frozenset(info.get("halt", [])), delta)
    except ValueError as exc:
        raise ParseError(str(exc)) from None


def format_tm(m: TuringMachine) -> str:
    lines = [
        "states " + " ".join(m.states),
        "symbols " + " ".join(m.symbols),
        f"blank {m.blank}",
        f"start {m.start}",
    ]
    if m.halting:
        lines.append("halt " + " ".join(sorted(m.halting)))
    lines += [f"d {q} {a} {q2} {a2} {mv}" for (q, a), (q2, a2, mv) in sorted(m.delta.items())]
    return "\n".join(lines) + "\n"


def tm_to_tileset(m: TuringMachine) -> TileSet:
    """Space-time tiles of ``m`` with time running north.

    Each transition takes two rows: the head cell writes and emits a
    ``gone`` tile while the target cell turns into an ``arrive`` tile, and
    one row later the arrival becomes an active head.  ``beta`` is the
    plain blank and ``alpha`` the starting head, which has nothing south of
    it, so rows holding alpha never stack.  Halting states get no tiles,
    so a halting computation cannot be continued.
    """
    labels: list[str] = []
    index: dict[tuple, int] = {}

    def add(key):
        if key not in index:
            index[key] = len(labels)
            labels.append(":".join(map(str, key)))
        return index[key]

    live = [q for q in m.states if q not in m.halting]
    for a in m.symbols:
        add(("plain", a))
    add(("alpha",))
    for q in live:
        for a in m.symbols:
            add(("head", q, a))
    h, v = set(), set()

    def head_tiles(q, a):
        out = [index[("head", q, a)]]
        if q == m.start and a == m.blank:
            out.append(index[("alpha",)])
        return out

    # transitions: gone/arrive pairs and in-place arrivals
    for (q, a), (q2, a2, mv) in m.delta.items():
        if q2 in m.halting:
            continue
        for below in head_tiles(q, a):
            if mv == "S":
                arr = add(("arrive", q2, a2, "here"))
                v.add((arr, below))
            else:
                g = add(("gone", a2, mv, q2))
                v.add((g, below))
    gones = [k for k in index if k[0] == "gone"]
    for _, a2, mv, q2 in gones:
        g = index[("gone", a2, mv, q2)]
        side = "W" if mv == "R" else "E"
        for b in m.symbols:
            arr = add(("arrive", q2, b, side))
            v.add((arr, index[("plain", b)]))
            h.add((g, arr) if mv == "R" else (arr, g))
        v.add((index[("plain", a2)], g))
    for key, t in list(index.items()):
        if key[0] == "arrive":
            v.add((index[("head", key[1], key[2])], t))
    for a in m.symbols:
        p = index[("plain", a)]
        v.add((p, p))

    # horizontal freedom except around gone/arrive pairs and between starts
    kinds = {t: k[0] for k, t in index.items()}
    keys = {t: k for k, t in index.items()}
    n = len(labels)
    for a in range(n):
        for b in range(n):
            ka, kb = keys[a], keys[b]
            if ka[0] == "gone" and ka[2] == "R":
                continue  # its east neighbour was fixed above
            if kb[0] == "gone" and kb[2] == "L":
                continue
            if kb[0] == "arrive" and kb[3] == "W":
                continue
            if ka[0] == "arrive" and ka[3] == "E":
                continue
            if kinds[a] == "alpha" and kinds[b] == "alpha":
                continue
            h.add((a, b))
    return TileSet.from_pairs(n, h, v, alpha=index[("alpha",)], beta=index[("plain", m.blank)], labels=labels)


def tm_strip_tileable(m: TuringMachine, t: int, budget: int = 1_000_000) -> TilingResult:
    """Tile the ``2t + 1`` rows above a bottom row holding alpha in a sea of
    beta; possible exactly when ``m`` survives ``t`` steps from blank."""
    ts = tm_to_tileset(m)
    width = 2 * t + 3
    fixed = {(0, c): ts.beta for c in range(width)}
    fixed[(0, t + 1)] = ts.alpha
    return can_tile_rect(ts, width, 2 * t + 1, budget, fixed)
