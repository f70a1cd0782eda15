"""Sparse 2D configurations over finite alphabets.

A configuration is a uniform background state plus a finite map of
overrides, which represents every finite configuration exactly.  The
y axis points north: ``(x, y + 1)`` is the northern neighbour of
``(x, y)``.  Dense arrays produced here are indexed ``arr[y - y0, x - x0]``,
so array row 0 is the southernmost row.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

import numpy as np

LIQUID_NAMES = ("0", "U", "D")
ARROWS = ("dn", "up", "lf", "rt", "dl", "dr", "ul", "ur")
XPARTS = ARROWS + ("bt",)

INF = math.inf

Pos = tuple[int, int]


class AlphabetMismatch(ValueError):
    pass


class ParseError(ValueError):
    pass


@dataclass(frozen=True)
class CellState:
    name: str
    solid: bool
    tile: int | None = None
    xpart: str | None = None

    @property
    def liquid(self) -> bool:
        return not self.solid


class Alphabet:
    """An ordered list of states; a state's index is its symbol id.

    Every alphabet built here puts ``0`` (the quiescent liquid state) at
    id 0 when it is present, so ``np.zeros`` is the all-quiescent array.
    """

    def __init__(self, tag: str, states: Iterable[CellState]):
        self.tag = tag
        self.states = tuple(states)
        self._ids = {s.name: i for i, s in enumerate(self.states)}
        if len(self._ids) != len(self.states):
            raise ValueError("duplicate state names")
        self.solid_mask = np.array([s.solid for s in self.states], dtype=bool)

    def __len__(self) -> int:
        return len(self.states)

    def __getitem__(self, i: int) -> CellState:
        return self.states[i]

    def __contains__(self, name: str) -> bool:
        return name in self._ids

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Alphabet) and self.tag == other.tag and self.states == other.states

    def __hash__(self) -> int:
        return hash((self.tag, self.states))

    def __repr__(self) -> str:
        return f"Alphabet({self.tag!r}, {len(self)} states)"

    def id(self, name: str) -> int:
        try:
            return self._ids[name]
        except KeyError:
            raise ParseError(f"unknown symbol {name!r} for alphabet {self.tag}") from None

    def name(self, i: int) -> str:
        return self.states[i].name

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.states)

    def ids_where(self, pred) -> list[int]:
        return [i for i, s in enumerate(self.states) if pred(s)]


def _liquids() -> list[CellState]:
    return [CellState(n, False) for n in LIQUID_NAMES]


def f_alphabet() -> Alphabet:
    """The 12 states of F: three liquids, the interior state 1 and 8 arrows."""
    solids = [CellState("1", True)] + [CellState(a, True, xpart=a) for a in ARROWS]
    return Alphabet("F", _liquids() + solids)


def f_tau_alphabet(n_tiles: int) -> Alphabet:
    solids = [CellState(a, True, xpart=a) for a in ARROWS]
    solids += [CellState(f"t{k}", True, tile=k) for k in range(n_tiles)]
    return Alphabet(f"Ftau{n_tiles}", _liquids() + solids)


def product_states(n_tiles: int) -> list[CellState]:
    return [CellState(f"t{k}.{x}", True, tile=k, xpart=x) for k in range(n_tiles) for x in XPARTS]


def g_tau_alphabet(n_tiles: int) -> Alphabet:
    return Alphabet(f"Gtau{n_tiles}", _liquids() + product_states(n_tiles))


def h_tau_alphabet(n_tiles: int) -> Alphabet:
    f = f_alphabet()
    return Alphabet(f"Htau{n_tiles}", list(f.states) + product_states(n_tiles))


def symbolic_alphabet(tag: str, names: Iterable[str]) -> Alphabet:
    """Alphabet for 1D rules; names outside {U, D, 0} count as solid."""
    return Alphabet(tag, [CellState(n, n not in LIQUID_NAMES) for n in names])


def norm(z: Pos) -> int:
    return max(abs(z[0]), abs(z[1]))


@dataclass(frozen=True)
class Rect:
    x0: int
    y0: int
    width: int
    height: int

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"degenerate rectangle {self}")

    @classmethod
    def centered(cls, center: Pos, radius: int) -> "Rect":
        return cls(center[0] - radius, center[1] - radius, 2 * radius + 1, 2 * radius + 1)

    @classmethod
    def spanning(cls, xmin: int, ymin: int, xmax: int, ymax: int) -> "Rect":
        return cls(xmin, ymin, xmax - xmin + 1, ymax - ymin + 1)

    @property
    def x1(self) -> int:
        return self.x0 + self.width - 1

    @property
    def y1(self) -> int:
        return self.y0 + self.height - 1

    def expand(self, m: int) -> "Rect":
        return Rect(self.x0 - m, self.y0 - m, self.width + 2 * m, self.height + 2 * m)

    def __contains__(self, z: Pos) -> bool:
        return self.x0 <= z[0] <= self.x1 and self.y0 <= z[1] <= self.y1

    def positions(self) -> Iterator[Pos]:
        """Row-major, south row first."""
        for y in range(self.y0, self.y1 + 1):
            for x in range(self.x0, self.x1 + 1):
                yield (x, y)

    def chebyshev_gap(self, other: "Rect") -> int:
        """Chebyshev distance between the closest cells of two rectangles."""
        dx = max(other.x0 - self.x1, self.x0 - other.x1, 0)
        dy = max(other.y0 - self.y1, self.y0 - other.y1, 0)
        return max(dx, dy)


@dataclass(frozen=True)
class Window:
    origin: Pos
    width: int
    height: int
    contents: tuple[int, ...]

    def __post_init__(self):
        if len(self.contents) != self.width * self.height:
            raise ValueError("window contents do not match its shape")

    def at(self, dx: int, dy: int) -> int:
        """State at offset ``(dx, dy)`` from the south-west origin."""
        return self.contents[dy * self.width + dx]

    def as_array(self) -> np.ndarray:
        return np.array(self.contents, dtype=np.int32).reshape(self.height, self.width)


@dataclass(frozen=True, eq=False)
class Configuration:
    """Background state plus a finite map of positions holding other states.

    Treat instances as immutable; every operation returns a new value.
    """

    alphabet: Alphabet
    background: int = 0
    cells: Mapping[Pos, int] = field(default_factory=dict)

    def __post_init__(self):
        bg = self.background
        canon = {z: s for z, s in self.cells.items() if s != bg}
        object.__setattr__(self, "cells", canon)

    @classmethod
    def empty(cls, alphabet: Alphabet, background: int = 0) -> "Configuration":
        return cls(alphabet, background, {})

    @classmethod
    def from_names(cls, alphabet: Alphabet, cells: Mapping[Pos, str], background: str = "0") -> "Configuration":
        return cls(alphabet, alphabet.id(background), {z: alphabet.id(n) for z, n in cells.items()})

    @classmethod
    def from_array(cls, alphabet: Alphabet, arr: np.ndarray, origin: Pos, background: int = 0) -> "Configuration":
        ys, xs = np.nonzero(arr != background)
        x0, y0 = origin
        cells = {(int(x) + x0, int(y) + y0): int(arr[y, x]) for y, x in zip(ys, xs)}
        return cls(alphabet, background, cells)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Configuration):
            return NotImplemented
        return (
            self.alphabet == other.alphabet
            and self.background == other.background
            and self.cells == other.cells
        )

    def __hash__(self) -> int:
        return hash((self.alphabet, self.background, frozenset(self.cells.items())))

    def __repr__(self) -> str:
        return f"Configuration({self.alphabet.tag}, bg={self.alphabet.name(self.background)}, {len(self.cells)} cells)"

    def get(self, z: Pos) -> int:
        return self.cells.get(z, self.background)

    def state_at(self, z: Pos) -> CellState:
        return self.alphabet[self.get(z)]

    def name_at(self, z: Pos) -> str:
        return self.alphabet.name(self.get(z))

    def with_cells(self, updates: Mapping[Pos, int]) -> "Configuration":
        cells = dict(self.cells)
        cells.update(updates)
        return Configuration(self.alphabet, self.background, cells)

    def with_names(self, updates: Mapping[Pos, str]) -> "Configuration":
        return self.with_cells({z: self.alphabet.id(n) for z, n in updates.items()})

    def translate(self, dx: int, dy: int) -> "Configuration":
        return Configuration(
            self.alphabet, self.background, {(x + dx, y + dy): s for (x, y), s in self.cells.items()}
        )

    def restrict(self, rect: Rect, outside: int | None = None) -> "Configuration":
        """Keep the cells inside ``rect``; everything else becomes ``outside``."""
        bg = self.background if outside is None else outside
        cells = {z: self.get(z) for z in rect.positions()}
        return Configuration(self.alphabet, bg, cells)

    def map_states(self, fn) -> "Configuration":
        return Configuration(self.alphabet, fn(self.background), {z: fn(s) for z, s in self.cells.items()})

    @property
    def is_finite(self) -> bool:
        return self.alphabet.states[self.background].name == "0"

    def bbox(self) -> Rect | None:
        if not self.cells:
            return None
        xs = [x for x, _ in self.cells]
        ys = [y for _, y in self.cells]
        return Rect.spanning(min(xs), min(ys), max(xs), max(ys))

    def support_radius(self) -> int:
        """Largest Chebyshev norm over stored cells (-1 when empty)."""
        return max((norm(z) for z in self.cells), default=-1)

    def positions_where(self, pred) -> list[Pos]:
        """Stored positions whose state satisfies ``pred`` (background excluded)."""
        return sorted((z for z, s in self.cells.items() if pred(self.alphabet[s])), key=lambda z: (z[1], z[0]))

    def to_array(self, rect: Rect) -> np.ndarray:
        arr = np.full((rect.height, rect.width), self.background, dtype=np.int32)
        for (x, y), s in self.cells.items():
            if (x, y) in rect:
                arr[y - rect.y0, x - rect.x0] = s
        return arr


def get(config: Configuration, z: Pos) -> CellState:
    return config.state_at(z)


def extract_window(config: Configuration, rect: Rect) -> Window:
    arr = config.to_array(rect)
    return Window((rect.x0, rect.y0), rect.width, rect.height, tuple(int(v) for v in arr.ravel()))


def _shell(r: int) -> Iterator[Pos]:
    if r == 0:
        yield (0, 0)
        return
    for x in range(-r, r + 1):
        yield (x, -r)
        yield (x, r)
    for y in range(-r + 1, r):
        yield (-r, y)
        yield (r, y)


def agreement_radius(x: Configuration, y: Configuration) -> float:
    """Smallest Chebyshev norm of a position where ``x`` and ``y`` differ.

    Returns ``math.inf`` when the configurations are equal, so the Cantor
    distance is ``2 ** -agreement_radius(x, y)``.
    """
    if x.alphabet != y.alphabet:
        raise AlphabetMismatch(f"{x.alphabet.tag} vs {y.alphabet.tag}")
    best = INF
    for z in set(x.cells) | set(y.cells):
        if x.get(z) != y.get(z):
            best = min(best, norm(z))
    if x.background != y.background:
        occupied = set(x.cells) | set(y.cells)
        bound = max(x.support_radius(), y.support_radius()) + 1
        for r in range(0, bound + 1):
            if r >= best:
                break
            if any(z not in occupied for z in _shell(r)):
                best = min(best, r)
                break
    return best


def cantor_distance(x: Configuration, y: Configuration) -> float:
    r = agreement_radius(x, y)
    return 0.0 if r == INF else 2.0 ** (-r)


# text format ---------------------------------------------------------------

def format_config(config: Configuration) -> str:
    a = config.alphabet
    lines = [f"background {a.name(config.background)}"]
    for (x, y) in sorted(config.cells, key=lambda z: (z[1], z[0])):
        lines.append(f"{x} {y} {a.name(config.cells[(x, y)])}")
    return "\n".join(lines) + "\n"


def parse_config(text: str, alphabet: Alphabet) -> Configuration:
    background = None
    cells: dict[Pos, int] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "background":
            if len(parts) != 2 or background is not None:
                raise ParseError(f"line {lineno}: bad background line")
            background = alphabet.id(parts[1])
            continue
        if len(parts) != 3:
            raise ParseError(f"line {lineno}: expected '<x> <y> <symbol>'")
        try:
            z = (int(parts[0]), int(parts[1]))
        except ValueError:
            raise ParseError(f"line {lineno}: bad coordinates") from None
        cells[z] = alphabet.id(parts[2])
    if background is None:
        raise ParseError("missing 'background' header")
    return Configuration(alphabet, background, cells)


_GLYPHS = {
    "0": ".", "U": "u", "D": "d", "1": "#",
    "dn": "v", "up": "^", "lf": "<", "rt": ">",
    "dl": "/", "dr": "\\", "ul": "`", "ur": "'", "bt": "+",
}


def glyph(state: CellState) -> str:
    if state.xpart is not None:
        return _GLYPHS[state.xpart]
    if state.tile is not None:
        return "#"
    return _GLYPHS.get(state.name, state.name[0])


def render(config: Configuration, rect: Rect) -> str:
    """One character per cell, north row first."""
    a = config.alphabet
    rows = []
    for y in range(rect.y1, rect.y0 - 1, -1):
        rows.append("".join(glyph(a[config.get((x, y))]) for x in range(rect.x0, rect.x1 + 1)))
    return "\n".join(rows)
