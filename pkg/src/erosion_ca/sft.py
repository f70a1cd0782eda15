"""Finite-type obstacle languages and local violation scanning.

Each language is compiled into integer keys: a 3x3 window of per-state
class codes becomes one base-``b`` integer, so membership of every window
of a dense array is a single vectorised ``np.isin``.  Windows are read
north row first, west to east.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .lattice import (
    ARROWS,
    XPARTS,
    Alphabet,
    Configuration,
    Rect,
    f_alphabet,
    f_tau_alphabet,
    g_tau_alphabet,
)
from .tiles import EmptyTileSet, TileNotInSet, TileSet

OFFSETS3 = [(dx, dy) for dy in (1, 0, -1) for dx in (-1, 0, 1)]
OFFSETS5 = [(dx, dy) for dy in (2, 1, 0, -1, -2) for dx in (-2, -1, 0, 1, 2) if (dx, dy) != (0, 0)]

# window class codes for the F family (Sigma_S and Sigma_S_tau)
LIQ = 0
INTERIOR = 1
ARROW_CODE = {a: 2 + i for i, a in enumerate(ARROWS)}
F_FOREIGN = 10
F_BASE = 11

# geometry codes for the onion family
G_SOLID = 1
G_FOREIGN = 2
G_BASE = 3

# X-part codes: 0 liquid, 1..9 the X symbols, 10 foreign, 11 masked out
X_CODE = {x: 1 + i for i, x in enumerate(XPARTS)}
X_FOREIGN = 10
X_BASE = 11
X_MASKED = 11
XM_BASE = 12

# outside neighbours of each X symbol; arrows point to the inside
_TOP = [(-1, 1), (0, 1), (1, 1)]
_BOTTOM = [(-1, -1), (0, -1), (1, -1)]
_LEFT = [(-1, 1), (-1, 0), (-1, -1)]
_RIGHT = [(1, 1), (1, 0), (1, -1)]
OUTSIDE = {
    "dn": set(_TOP),
    "up": set(_BOTTOM),
    "rt": set(_LEFT),
    "lf": set(_RIGHT),
    "dr": set(_TOP) | set(_LEFT),
    "dl": set(_TOP) | set(_RIGHT),
    "ul": set(_BOTTOM) | set(_RIGHT),
    "ur": set(_BOTTOM) | set(_LEFT),
    "bt": set(),
}

BAD_WINDOW = "BadWindow"
BAD_PAIR = "BadPair"
BAD_INSIDE = "BadInside"


def rotate_offset(d: tuple[int, int]) -> tuple[int, int]:
    """Quarter turn counter-clockwise."""
    return (-d[1], d[0])


_ROT_X = {"dn": "rt", "rt": "up", "up": "lf", "lf": "dn",
          "dr": "ur", "ur": "ul", "ul": "dl", "dl": "dr", "bt": "bt"}


def inside_mask(xpart: str) -> list[tuple[int, int]]:
    return [d for d in OFFSETS3 if d not in OUTSIDE[xpart]]


# array helpers -------------------------------------------------------------

def shift(arr: np.ndarray, dx: int, dy: int, fill=0) -> np.ndarray:
    """``out[r, c] = arr[r + dy, c + dx]``, filled outside the array."""
    h, w = arr.shape
    out = np.full_like(arr, fill)
    rs, re = max(0, -dy), min(h, h - dy)
    cs, ce = max(0, -dx), min(w, w - dx)
    if rs < re and cs < ce:
        out[rs:re, cs:ce] = arr[rs + dy:re + dy, cs + dx:ce + dx]
    return out


def dilate3(mask: np.ndarray) -> np.ndarray:
    out = mask.copy()
    for dx, dy in OFFSETS3:
        if (dx, dy) != (0, 0):
            out |= shift(mask, dx, dy, False)
    return out


def window_keys(codes: np.ndarray, base: int, mask_offsets=None) -> np.ndarray:
    """Integer key of the 3x3 window centred on every cell (edges read 0)."""
    codes = codes.astype(np.int64)
    keys = np.zeros(codes.shape, dtype=np.int64)
    for d in OFFSETS3:
        if mask_offsets is not None and d not in mask_offsets:
            keys = keys * base + X_MASKED
        else:
            keys = keys * base + shift(codes, d[0], d[1], 0)
    return keys


def key_of(cells: list[int], base: int) -> int:
    k = 0
    for c in cells:
        k = k * base + c
    return k


def _spread(anchor_bad: np.ndarray, cells: list[tuple[int, int]]) -> np.ndarray:
    """Mark every window centre whose 3x3 window contains all ``cells``
    (offsets from the anchor) of a violated constraint."""
    out = np.zeros_like(anchor_bad)
    for e in product((-1, 0, 1), repeat=2):
        if all(max(abs(e[0] - c[0]), abs(e[1] - c[1])) <= 1 for c in cells):
            # window centre = anchor + e
            out |= shift(anchor_bad, -e[0], -e[1], False)
    return out


# templates -----------------------------------------------------------------

def border_arrow(col: int, row: int, width: int, height: int) -> str | None:
    """Arrow at (col, row) of a width x height ring (row 0 south), or None inside."""
    top, bottom = row == height - 1, row == 0
    left, right = col == 0, col == width - 1
    if top:
        return "dr" if left else "dl" if right else "dn"
    if bottom:
        return "ur" if left else "ul" if right else "up"
    if left:
        return "rt"
    if right:
        return "lf"
    return None


def plain_obstacle_names(iw: int, ih: int, interior: str = "1") -> list[list[str]]:
    """Rows (south first) of an obstacle with an ``iw`` x ``ih`` interior."""
    w, h = iw + 2, ih + 2
    return [[border_arrow(c, r, w, h) or interior for c in range(w)] for r in range(h)]


def onion_xparts(n: int) -> list[list[str]]:
    """Rows (south first) of the X component of an ``n`` x ``n`` onion square."""
    if n < 1 or n % 2 == 0:
        raise ValueError("onion side must be odd")
    rows = []
    for r in range(n):
        row = []
        for c in range(n):
            k = min(r, c, n - 1 - r, n - 1 - c)
            if 2 * k == n - 1:
                row.append("bt")
            else:
                row.append(border_arrow(c - k, r - k, n - 2 * k, n - 2 * k))
        rows.append(row)
    return rows


def _embed(rows: list[list[int]], margin: int) -> np.ndarray:
    arr = np.array(rows, dtype=np.int64)
    return np.pad(arr, margin, constant_values=LIQ)


def _all_window_keys(arr: np.ndarray, base: int, mask_offsets=None) -> np.ndarray:
    return window_keys(arr, base, mask_offsets)[1:-1, 1:-1].ravel()


SIGMA_S_SIZES = [(3, 3), (3, 4), (4, 3), (4, 4)]
ONION_SIDES = range(3, 12, 2)


def _sigma_s_keys() -> np.ndarray:
    keys = {key_of([LIQ] * 9, F_BASE)}
    for iw, ih in SIGMA_S_SIZES:
        names = plain_obstacle_names(iw, ih)
        rows = [[ARROW_CODE.get(n, INTERIOR) for n in row] for row in names]
        keys.update(int(k) for k in _all_window_keys(_embed(rows, 3), F_BASE))
    return np.array(sorted(keys), dtype=np.int64)


def _obst_geometry_keys() -> np.ndarray:
    keys = {key_of([LIQ] * 9, G_BASE)}
    for w, h in SIGMA_S_SIZES:
        rows = [[G_SOLID] * w for _ in range(h)]
        keys.update(int(k) for k in _all_window_keys(_embed(rows, 3), G_BASE))
    return np.array(sorted(keys), dtype=np.int64)


def _onion_arrays(sides=ONION_SIDES) -> list[np.ndarray]:
    return [_embed([[X_CODE[x] for x in row] for row in onion_xparts(n)], 3) for n in sides]


def onion_quads(sides=ONION_SIDES) -> set[int]:
    """Keys (NW, NE, SW, SE) of 2x2 X windows occurring around onion squares."""
    quads = set()
    for arr in _onion_arrays(sides):
        h, w = arr.shape
        for r in range(h - 1):
            for c in range(w - 1):
                sw, se, nw, ne = arr[r, c], arr[r, c + 1], arr[r + 1, c], arr[r + 1, c + 1]
                quads.add(key_of([int(nw), int(ne), int(sw), int(se)], X_BASE))
    return quads


def _onion_pairs() -> np.ndarray:
    table = np.zeros((len(OFFSETS5), X_BASE, X_BASE), dtype=bool)
    for arr in _onion_arrays():
        h, w = arr.shape
        for r in range(h):
            for c in range(w):
                a = arr[r, c]
                if a == LIQ:
                    continue
                for i, (dx, dy) in enumerate(OFFSETS5):
                    rr, cc = r + dy, c + dx
                    if 0 <= rr < h and 0 <= cc < w and arr[rr, cc] != LIQ:
                        table[i, a, arr[rr, cc]] = True
    return table


def _onion_inside_keys() -> dict[int, np.ndarray]:
    found: dict[int, set[int]] = {X_CODE[x]: set() for x in XPARTS}
    for arr in _onion_arrays():
        for x in XPARTS:
            code = X_CODE[x]
            keys = window_keys(arr, XM_BASE, set(inside_mask(x)))
            found[code].update(int(k) for k in keys[arr == code])
    return {code: np.array(sorted(ks), dtype=np.int64) for code, ks in found.items()}


# patterns ------------------------------------------------------------------

@dataclass(frozen=True)
class ClassPattern:
    """A 3x3 pattern of cell matchers, north row first.

    Matchers: ``"L"`` any liquid, ``"S"`` any solid of the language,
    ``"T"`` any tile state, or an exact symbol name (``"1"``, arrow names).
    """

    width: int
    height: int
    cells: tuple[str, ...]

    def __str__(self) -> str:
        rows = [self.cells[i * self.width:(i + 1) * self.width] for i in range(self.height)]
        return "\n".join(" ".join(f"{c:>2}" for c in row) for row in rows)


@dataclass(frozen=True)
class ViolationReport:
    violations: tuple[tuple[tuple[int, int], str], ...]

    def __bool__(self) -> bool:
        return bool(self.violations)

    def __len__(self) -> int:
        return len(self.violations)

    @property
    def positions(self) -> list[tuple[int, int]]:
        seen = []
        for z, _ in self.violations:
            if not seen or seen[-1] != z:
                seen.append(z)
        return seen

    def reasons_at(self, z) -> set[str]:
        return {r for p, r in self.violations if p == z}


@dataclass(eq=False)
class LocalLanguage:
    """A compiled obstacle language over a given alphabet.

    Membership of a configuration: every 3x3 window of window-class codes
    is allowed, and every pair constraint (tile adjacency, 2x2 X windows
    for onion languages, designated-tile rules) holds.
    """

    kind: str
    alphabet: Alphabet
    win_code: np.ndarray
    win_base: int
    win_labels: tuple[str, ...]
    allowed: np.ndarray
    tileset: TileSet | None = None
    tile_of: np.ndarray | None = None
    x_code: np.ndarray | None = None
    quads: np.ndarray | None = None
    xpairs: np.ndarray | None = None
    inside_allowed: dict[int, np.ndarray] = field(default_factory=dict)
    alpha: int | None = None
    beta: int | None = None

    @property
    def onion(self) -> bool:
        return self.x_code is not None

    @property
    def n_patterns(self) -> int:
        return len(self.allowed)

    def patterns(self) -> list[ClassPattern]:
        out = []
        for k in self.allowed:
            k = int(k)
            digits = []
            for _ in range(9):
                digits.append(self.win_labels[k % self.win_base])
                k //= self.win_base
            out.append(ClassPattern(3, 3, tuple(reversed(digits))))
        return out

    # per-position maps over a dense symbol array ------------------------

    def window_bad(self, A: np.ndarray) -> np.ndarray:
        """True at every centre whose 3x3 window is not an allowed pattern.

        Only meaningful one cell or more away from the array edge.
        """
        keys = window_keys(self.win_code[A], self.win_base)
        return ~np.isin(keys, self.allowed)

    def _tile_pair_bad(self, A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Anchored at the west cell (horizontal) and south cell (vertical)."""
        T = self.tile_of[A]
        H = np.zeros((self.tileset.n, self.tileset.n), dtype=bool)
        V = np.zeros_like(H)
        for a, b in self.tileset.h_allowed:
            H[a, b] = True
        for a, b in self.tileset.v_allowed:
            V[a, b] = True
        east = shift(T, 1, 0, -1)
        north = shift(T, 0, 1, -1)
        both_h = (T >= 0) & (east >= 0)
        both_v = (T >= 0) & (north >= 0)
        hbad = both_h & ~H[np.where(both_h, T, 0), np.where(both_h, east, 0)]
        vbad = both_v & ~V[np.where(both_v, north, 0), np.where(both_v, T, 0)]
        return hbad, vbad

    def _quad_bad(self, A: np.ndarray) -> np.ndarray:
        """Anchored at the south-west cell of each 2x2 block."""
        X = self.x_code[A].astype(np.int64)
        nw, ne, se = shift(X, 0, 1), shift(X, 1, 1), shift(X, 1, 0)
        keys = ((nw * X_BASE + ne) * X_BASE + X) * X_BASE + se
        return ~np.isin(keys, self.quads)

    def single_bad(self, A: np.ndarray) -> np.ndarray:
        """Designated-tile rule: a bottom (X = bt) cell must carry alpha."""
        if self.alpha is None:
            return np.zeros(A.shape, dtype=bool)
        return (self.x_code[A] == X_CODE["bt"]) & (self.tile_of[A] != self.alpha)

    def _blank_edge_bad(self, A: np.ndarray) -> np.ndarray:
        """A solid non-beta cell directly west of a liquid cell (anchored west)."""
        if self.beta is None:
            return np.zeros(A.shape, dtype=bool)
        solid = self.alphabet.solid_mask[A]
        east_liquid = ~shift(solid, 1, 0, False)
        return solid & (self.tile_of[A] != self.beta) & east_liquid

    def constraint_bad(self, A: np.ndarray) -> np.ndarray:
        """True at every window centre whose 3x3 window contains a violated
        pair or 2x2 constraint."""
        out = np.zeros(A.shape, dtype=bool)
        if self.tileset is not None:
            hbad, vbad = self._tile_pair_bad(A)
            out |= _spread(hbad, [(0, 0), (1, 0)])
            out |= _spread(vbad, [(0, 0), (0, 1)])
        if self.onion:
            out |= _spread(self._quad_bad(A), [(0, 0), (1, 0), (0, 1), (1, 1)])
            out |= _spread(self._blank_edge_bad(A), [(0, 0), (1, 0)])
        return out

    def forbidden_5x5(self, A: np.ndarray) -> np.ndarray:
        """True at cells whose 5x5 neighbourhood contains a violation.

        Valid for cells at least two away from the array edge.
        """
        return dilate3(self.window_bad(A) | self.single_bad(A) | self.constraint_bad(A))

    # onion-only per-cell checks ---------------------------------------

    def inside_bad(self, A: np.ndarray) -> np.ndarray:
        """Solid cells whose inside region is not part of any allowed pattern."""
        X = self.x_code[A]
        out = np.zeros(A.shape, dtype=bool)
        if self.tileset is not None:
            hbad, vbad = self._tile_pair_bad(A)
        single = self.single_bad(A)
        for x in XPARTS:
            code = X_CODE[x]
            here = X == code
            if not here.any():
                continue
            mask = set(inside_mask(x))
            keys = window_keys(X, XM_BASE, mask)
            bad = here & ~np.isin(keys, self.inside_allowed[code])
            if self.tileset is not None:
                for d in mask:
                    east = (d[0] + 1, d[1])
                    north = (d[0], d[1] + 1)
                    if east in mask:
                        bad |= here & shift(hbad, d[0], d[1], False)
                    if north in mask:
                        bad |= here & shift(vbad, d[0], d[1], False)
            out |= bad
        return out | single

    def pair_bad(self, A: np.ndarray) -> np.ndarray:
        """Solid cells forming a forbidden pair with a solid cell within
        Chebyshev distance 2, or violating an adjacency rule."""
        X = self.x_code[A].astype(np.int64)
        solid = (X >= 1) & (X <= 9)
        out = np.zeros(A.shape, dtype=bool)
        for i, (dx, dy) in enumerate(OFFSETS5):
            other = shift(X, dx, dy, 0)
            both = solid & (other >= 1) & (other <= 9)
            ok = self.xpairs[i][np.where(both, X, 0), np.where(both, other, 0)]
            out |= both & ~ok
        if self.tileset is not None:
            hbad, vbad = self._tile_pair_bad(A)
            out |= hbad | shift(hbad, -1, 0, False) | vbad | shift(vbad, 0, -1, False)
        out |= self._blank_edge_bad(A)
        return out


# generators ----------------------------------------------------------------

def _f_codes(alphabet: Alphabet, interior_pred) -> tuple[np.ndarray, np.ndarray]:
    codes = np.full(len(alphabet), F_FOREIGN, dtype=np.int64)
    tiles = np.full(len(alphabet), -1, dtype=np.int64)
    for i, s in enumerate(alphabet.states):
        if not s.solid:
            codes[i] = LIQ
        elif s.xpart in ARROW_CODE and s.tile is None:
            codes[i] = ARROW_CODE[s.xpart]
        elif interior_pred(s):
            codes[i] = INTERIOR
            if s.tile is not None:
                tiles[i] = s.tile
    return codes, tiles


_F_LABELS = ("L", "1") + ARROWS + ("?",)


def generate_sigma_S(alphabet: Alphabet | None = None) -> LocalLanguage:
    alphabet = alphabet or f_alphabet()
    codes, _ = _f_codes(alphabet, lambda s: s.name == "1")
    return LocalLanguage("SigmaS", alphabet, codes, F_BASE, _F_LABELS, _sigma_s_keys())


def generate_sigma_S_tau(tileset: TileSet, alphabet: Alphabet | None = None) -> LocalLanguage:
    if tileset.n == 0:
        raise EmptyTileSet("empty tile set")
    alphabet = alphabet or f_tau_alphabet(tileset.n)
    codes, tiles = _f_codes(alphabet, lambda s: s.tile is not None and s.xpart is None)
    labels = ("L", "T") + ARROWS + ("?",)
    return LocalLanguage("SigmaS_tau", alphabet, codes, F_BASE, labels, _sigma_s_keys(),
                         tileset=tileset, tile_of=tiles)


def generate_sigma_obst(tileset: TileSet, alphabet: Alphabet | None = None) -> LocalLanguage:
    if tileset.n == 0:
        raise EmptyTileSet("empty tile set")
    alphabet = alphabet or g_tau_alphabet(tileset.n)
    n = len(alphabet)
    geo = np.full(n, G_FOREIGN, dtype=np.int64)
    xc = np.full(n, X_FOREIGN, dtype=np.int64)
    tiles = np.full(n, -1, dtype=np.int64)
    for i, s in enumerate(alphabet.states):
        if not s.solid:
            geo[i], xc[i] = LIQ, LIQ
        elif s.tile is not None and s.xpart is not None:
            geo[i], xc[i], tiles[i] = G_SOLID, X_CODE[s.xpart], s.tile
    return LocalLanguage(
        "SigmaObst_tau", alphabet, geo, G_BASE, ("L", "S", "?"), _obst_geometry_keys(),
        tileset=tileset, tile_of=tiles, x_code=xc,
        quads=np.array(sorted(onion_quads()), dtype=np.int64),
        xpairs=_onion_pairs(), inside_allowed=_onion_inside_keys(),
    )


def generate_sigma_prime(tileset: TileSet, alpha: int | None = None, beta: int | None = None,
                         alphabet: Alphabet | None = None) -> LocalLanguage:
    alpha = tileset.alpha if alpha is None else alpha
    beta = tileset.beta if beta is None else beta
    if alpha is None or beta is None:
        raise TileNotInSet("alpha and beta must be designated")
    for t in (alpha, beta):
        if not 0 <= t < tileset.n:
            raise TileNotInSet(f"tile {t} not in set")
    lang = generate_sigma_obst(tileset, alphabet)
    lang.kind = "SigmaPrime"
    lang.alpha, lang.beta = alpha, beta
    return lang


# scanning ------------------------------------------------------------------

def scan_violations(lang: LocalLanguage, config: Configuration, region: Rect | None = None,
                    margin: int = 3) -> ViolationReport:
    """Positions of ``region`` whose 5x5 neighbourhood witnesses a violation.

    ``region`` defaults to the support's bounding box grown by ``margin``.
    Output is ordered south row first, then west to east.
    """
    if region is None:
        box = config.bbox()
        if box is None:
            return ViolationReport(())
        region = box.expand(margin)
    pad = 3
    big = region.expand(pad)
    A = config.to_array(big)
    win = dilate3(lang.window_bad(A) | lang.single_bad(A))
    pair = dilate3(lang.constraint_bad(A))
    inside = lang.inside_bad(A) if lang.onion else None
    out = []
    for (x, y) in region.positions():
        r, c = y - big.y0, x - big.x0
        if win[r, c]:
            out.append(((x, y), BAD_WINDOW))
        if pair[r, c]:
            out.append(((x, y), BAD_PAIR))
        if inside is not None and inside[r, c]:
            out.append(((x, y), BAD_INSIDE))
    return ViolationReport(tuple(out))


def in_language(lang: LocalLanguage, config: Configuration, margin: int = 3) -> bool:
    return not scan_violations(lang, config, margin=margin)
