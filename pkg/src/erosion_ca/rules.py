"""Cellular automaton engine and the obstacle/particle rules.

All rules are evaluated on dense numpy arrays: ``step_array`` maps an
array to the next-state array and is exact for every cell at least
``radius`` away from the array edge.  ``step`` wraps this for sparse
configurations.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Sequence

import numpy as np

from .lattice import (
    Alphabet,
    Configuration,
    ParseError,
    Rect,
    Window,
    f_alphabet,
    f_tau_alphabet,
    g_tau_alphabet,
    h_tau_alphabet,
    symbolic_alphabet,
)
from .sft import (
    OFFSETS3,
    LocalLanguage,
    dilate3,
    generate_sigma_obst,
    generate_sigma_prime,
    generate_sigma_S,
    generate_sigma_S_tau,
    rotate_offset,
    window_keys,
)
from .tiles import TileSet


class NonQuiescentBackground(ValueError):
    pass


# collapsed classes for the particle table
C0, CU, CD, CS = 0, 1, 2, 3
CLASS_NAMES = ("0", "U", "D", "S")
TOKENS = {
    "0": {C0}, "U": {CU}, "D": {CD}, "S": {CS},
    "L": {C0, CU, CD}, "0S": {C0, CS}, "DS": {CD, CS}, "US": {CU, CS},
    "0DS": {C0, CD, CS}, "0US": {C0, CU, CS},
}
KEEP, OUT_U, OUT_D = 1, 2, 3
OUTPUT_CODE = {"x": KEEP, "U": OUT_U, "D": OUT_D}


@dataclass(frozen=True)
class Transition:
    """A 3x3 pattern of tokens (north row first) and its output.

    Output ``"x"`` keeps the centre state.  With ``rotate`` the entry
    stands for its four quarter-turn rotations.
    """

    pattern: tuple[str, ...]
    output: str
    rotate: bool = False

    def variants(self) -> list[tuple[str, ...]]:
        if not self.rotate:
            return [self.pattern]
        out = []
        cur = dict(zip(OFFSETS3, self.pattern))
        for _ in range(4):
            pat = tuple(cur[d] for d in OFFSETS3)
            if pat not in out:
                out.append(pat)
            cur = {rotate_offset(d): t for d, t in cur.items()}
        return out


# The transition list: solid keepers first, then particle moves.
PARTICLE_TRANSITIONS = (
    Transition(("L", "L", "L", "S", "S", "L", "S", "S", "L"), "x", True),
    Transition(("S", "S", "L", "S", "S", "L", "S", "S", "L"), "x", True),
    Transition(("S",) * 9, "x"),
    Transition(("0S", "0", "0", "S", "0", "0", "S", "U", "0"), "U"),
    Transition(("0", "0", "0", "0", "0", "0", "S", "U", "0"), "U"),
    Transition(("0", "0", "0", "0", "0", "U", "S", "S", "0DS"), "U"),
    Transition(("0", "0", "0", "0", "0", "U", "0", "0S", "S"), "U"),
    Transition(("0", "U", "0S", "0", "0", "S", "0", "0", "S"), "U"),
    Transition(("0", "U", "S", "0", "0", "S", "0", "0", "D"), "U"),
    Transition(("S", "D", "0", "S", "0", "0", "0S", "0", "0"), "D"),
    Transition(("S", "D", "0", "0", "0", "0", "0", "0", "0"), "D"),
    Transition(("S", "S", "0US", "0", "0", "D", "0", "0", "0"), "D"),
    Transition(("0", "0S", "S", "0", "0", "D", "0", "0", "0"), "D"),
    Transition(("0", "0", "S", "0", "0", "S", "0", "D", "0S"), "D"),
    Transition(("0", "0", "U", "0", "0", "S", "0", "D", "S"), "D"),
    Transition(("0S", "0S", "U", "0S", "0", "D", "0S", "0S", "0S"), "D"),
    Transition(("0S", "0S", "0S", "0S", "0", "U", "0S", "0S", "D"), "U"),
)


def _all_class_windows() -> np.ndarray:
    """Every 3x3 window over the 4 collapsed classes, indexed by its key."""
    idx = np.arange(4 ** 9, dtype=np.int64)
    digits = np.empty((4 ** 9, 9), dtype=np.int8)
    for i in range(9):
        digits[:, 8 - i] = idx % 4
        idx //= 4
    return digits


_WINDOWS: np.ndarray | None = None


def _class_windows() -> np.ndarray:
    global _WINDOWS
    if _WINDOWS is None:
        _WINDOWS = _all_class_windows()
    return _WINDOWS


@dataclass(frozen=True)
class TableReport:
    n_windows: int
    n_entries: int
    n_variants: int
    variants_per_entry: tuple[int, ...]
    conflicts: tuple[tuple[int, tuple[str, ...]], ...]
    multiply_matched: int

    @property
    def ok(self) -> bool:
        return not self.conflicts


class TransitionTable:
    """First-match lookup of a transition list over all 4**9 windows."""

    def __init__(self, transitions: Sequence[Transition]):
        self.transitions = tuple(transitions)
        W = _class_windows()
        self.lookup = np.zeros(len(W), dtype=np.int8)
        self._outputs = np.zeros(len(W), dtype=np.int8)
        self._conflict = np.zeros(len(W), dtype=bool)
        self._matches = np.zeros(len(W), dtype=np.int16)
        for t in self.transitions:
            code = OUTPUT_CODE[t.output]
            for pat in t.variants():
                m = np.ones(len(W), dtype=bool)
                for i, tok in enumerate(pat):
                    m &= np.isin(W[:, i], list(TOKENS[tok]))
                fresh = m & (self.lookup == 0)
                self._conflict |= m & (self.lookup != 0) & (self.lookup != code)
                self._matches += m
                self.lookup[fresh] = code

    def report(self) -> TableReport:
        W = _class_windows()
        idx = np.nonzero(self._conflict)[0]
        conflicts = tuple(
            (int(k), tuple(CLASS_NAMES[c] for c in W[k])) for k in idx
        )
        per = tuple(len(t.variants()) for t in self.transitions)
        return TableReport(len(W), len(self.transitions), sum(per), per, conflicts,
                           int((self._matches > 1).sum()))


_PARTICLE_TABLE: TransitionTable | None = None


def particle_table() -> TransitionTable:
    global _PARTICLE_TABLE
    if _PARTICLE_TABLE is None:
        _PARTICLE_TABLE = TransitionTable(PARTICLE_TRANSITIONS)
    return _PARTICLE_TABLE


# rules ---------------------------------------------------------------------

def _collapse(alphabet: Alphabet) -> np.ndarray:
    out = np.empty(len(alphabet), dtype=np.int64)
    for i, s in enumerate(alphabet.states):
        out[i] = CS if s.solid else {"0": C0, "U": CU, "D": CD}[s.name]
    return out


class CARule:
    """A 2D cellular automaton given by a vectorised local function."""

    kind = "abstract"
    radius = 2

    def __init__(self, alphabet: Alphabet):
        self.alphabet = alphabet

    def step_array(self, A: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def languages(self) -> list[LocalLanguage]:
        return []

    def apply_local(self, window: Window | np.ndarray) -> int:
        arr = window.as_array() if isinstance(window, Window) else np.asarray(window)
        side = 2 * self.radius + 1
        if arr.shape != (side, side):
            raise ValueError(f"expected a {side}x{side} window")
        return int(self.step_array(arr.astype(np.int32))[self.radius, self.radius])

    def is_quiescent(self, state: int) -> bool:
        cache = self.__dict__.setdefault("_quiescent", {})
        if state not in cache:
            side = 2 * self.radius + 1
            cache[state] = self.apply_local(np.full((side, side), state, dtype=np.int32)) == state
        return cache[state]

    def __repr__(self) -> str:
        return f"<{self.kind} rule over {self.alphabet.tag}>"


class _ParticleRule(CARule):
    def __init__(self, alphabet: Alphabet):
        super().__init__(alphabet)
        self._classes = _collapse(alphabet)
        self._zero = alphabet.id("0")
        self._u = alphabet.id("U")
        self._d = alphabet.id("D")

    def _particle_case(self, A: np.ndarray, otherwise: np.ndarray) -> np.ndarray:
        t = particle_table().lookup[window_keys(self._classes[A], 4)]
        out = np.where(t == KEEP, A, otherwise)
        out = np.where(t == OUT_U, self._u, out)
        return np.where(t == OUT_D, self._d, out).astype(A.dtype)


class ErosionRule(_ParticleRule):
    """F and F_tau: invalid solids dissolve, particles follow the table,
    everything else becomes 0."""

    def __init__(self, lang: LocalLanguage, kind: str):
        super().__init__(lang.alphabet)
        self.lang = lang
        self.kind = kind

    def languages(self):
        return [self.lang]

    def step_array(self, A):
        out = self._particle_case(A, np.full_like(A, self._zero))
        out[self.lang.forbidden_5x5(A)] = self._zero
        return out


class OnionRule(_ParticleRule):
    """G_tau and its variant with designated tiles: only locally broken
    solids dissolve, and solids never dissolve by default."""

    def __init__(self, lang: LocalLanguage, kind: str):
        super().__init__(lang.alphabet)
        self.lang = lang
        self.kind = kind

    def languages(self):
        return [self.lang]

    def step_array(self, A):
        solid = self.alphabet.solid_mask[A]
        keep_solid = np.where(solid, A, self._zero)
        regular = self._particle_case(A, keep_solid)
        forb = self.lang.forbidden_5x5(A)
        kill = ~solid | self.lang.inside_bad(A) | self.lang.pair_bad(A)
        broken = np.where(kill, self._zero, A)
        return np.where(forb, broken, regular).astype(A.dtype)


class CombinedRule(CARule):
    """H_tau: F where only plain solids are near, G_tau where only onion
    solids are near, 0 where both kinds meet."""

    kind = "Htau"

    def __init__(self, tileset: TileSet):
        alphabet = h_tau_alphabet(tileset.n)
        super().__init__(alphabet)
        self.tileset = tileset
        self.f = ErosionRule(generate_sigma_S(alphabet), "F")
        self.g = OnionRule(generate_sigma_obst(tileset, alphabet), "Gtau")
        self._plain = np.array([s.solid and s.tile is None for s in alphabet.states])
        self._onion = np.array([s.solid and s.tile is not None for s in alphabet.states])

    def languages(self):
        return [self.f.lang, self.g.lang]

    def step_array(self, A):
        near_plain = dilate3(dilate3(self._plain[A]))
        near_onion = dilate3(dilate3(self._onion[A]))
        out = np.where(near_onion, self.g.step_array(A), self.f.step_array(A))
        out[near_plain & near_onion] = self.alphabet.id("0")
        return out.astype(A.dtype)


class TableRule(_ParticleRule):
    """Apply a transition list directly; unmatched cells become 0."""

    kind = "Custom"

    def __init__(self, transitions: Sequence[Transition], alphabet: Alphabet | None = None):
        super().__init__(alphabet or f_alphabet())
        self.table = TransitionTable(transitions)

    def step_array(self, A):
        t = self.table.lookup[window_keys(self._classes[A], 4)]
        out = np.where(t == KEEP, A, self._zero)
        out = np.where(t == OUT_U, self._u, out)
        return np.where(t == OUT_D, self._d, out).astype(A.dtype)


def rule_F() -> ErosionRule:
    return ErosionRule(generate_sigma_S(), "F")


def rule_F_tau(tileset: TileSet) -> ErosionRule:
    return ErosionRule(generate_sigma_S_tau(tileset), "Ftau")


def rule_G_tau(tileset: TileSet) -> OnionRule:
    return OnionRule(generate_sigma_obst(tileset), "Gtau")


def rule_G_hat(tileset: TileSet, alpha: int | None = None, beta: int | None = None) -> OnionRule:
    return OnionRule(generate_sigma_prime(tileset, alpha, beta), "Ghat")


def rule_H_tau(tileset: TileSet) -> CombinedRule:
    return CombinedRule(tileset)


# 1D rules and the canonical lift --------------------------------------------

@dataclass
class Rule1D:
    """A 1D rule of radius ``radius`` given by a dense lookup table."""

    alphabet: Alphabet
    radius: int
    table: np.ndarray = field(repr=False)

    def __post_init__(self):
        k = len(self.alphabet)
        if self.table.shape != (k ** (2 * self.radius + 1),):
            raise ValueError("table size does not match alphabet and radius")

    @classmethod
    def from_function(cls, symbols: Sequence[str], radius: int,
                      fn: Callable[[tuple[str, ...]], str], tag: str = "1D") -> "Rule1D":
        alphabet = symbolic_alphabet(tag, symbols)
        table = np.empty(len(symbols) ** (2 * radius + 1), dtype=np.int32)
        for i, w in enumerate(product(symbols, repeat=2 * radius + 1)):
            table[i] = alphabet.id(fn(w))
        return cls(alphabet, radius, table)

    def keys(self, rows: np.ndarray) -> np.ndarray:
        """Neighbourhood keys along the last axis (length shrinks by 2r)."""
        k = len(self.alphabet)
        n = rows.shape[-1] - 2 * self.radius
        key = np.zeros(rows.shape[:-1] + (n,), dtype=np.int64)
        for j in range(2 * self.radius + 1):
            key = key * k + rows[..., j:j + n]
        return key

    def apply_rows(self, rows: np.ndarray) -> np.ndarray:
        return self.table[self.keys(rows)]

    def local(self, word: Sequence[str]) -> str:
        ids = np.array([self.alphabet.id(s) for s in word])
        return self.alphabet.name(int(self.apply_rows(ids)[0]))


def identity_1d(symbols=("a", "b"), radius: int = 1) -> Rule1D:
    return Rule1D.from_function(symbols, radius, lambda w: w[radius], "id")


def left_shift_1d(symbols=("a", "b")) -> Rule1D:
    """Every cell copies its east neighbour, so patterns travel west."""
    return Rule1D.from_function(symbols, 1, lambda w: w[2], "shift")


def wall_rule_1d() -> Rule1D:
    """Radius-1 rule on {a, b, w}: ``w`` never changes, other cells copy
    their east neighbour."""
    return Rule1D.from_function(("a", "b", "w"), 1, lambda w: "w" if w[1] == "w" else w[2], "wall")


def format_rule1d(rule: Rule1D) -> str:
    a = rule.alphabet
    lines = ["symbols " + " ".join(a.names), f"radius {rule.radius}"]
    for i, w in enumerate(product(a.names, repeat=2 * rule.radius + 1)):
        lines.append(" ".join(w) + " : " + a.name(int(rule.table[i])))
    return "\n".join(lines) + "\n"


def parse_rule1d(text: str) -> Rule1D:
    symbols = None
    radius = None
    entries: dict[tuple[str, ...], str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("symbols "):
            symbols = line.split()[1:]
        elif line.startswith("radius "):
            radius = int(line.split()[1])
        elif ":" in line:
            lhs, rhs = line.split(":", 1)
            entries[tuple(lhs.split())] = rhs.strip()
        else:
            raise ParseError(f"line {lineno}: cannot parse {line!r}")
    if symbols is None or radius is None:
        raise ParseError("rule needs 'symbols' and 'radius' lines")
    missing = [w for w in product(symbols, repeat=2 * radius + 1) if w not in entries]
    if missing:
        raise ParseError(f"table incomplete, e.g. {' '.join(missing[0])}")
    return Rule1D.from_function(symbols, radius, lambda w: entries[w])


class LiftedRule(CARule):
    """Canonical lift: each row evolves under the 1D rule independently."""

    kind = "Lifted1D"

    def __init__(self, rule1d: Rule1D):
        super().__init__(rule1d.alphabet)
        self.rule1d = rule1d
        self.radius = rule1d.radius

    def step_array(self, A):
        r = self.radius
        out = A.copy()
        out[:, r:A.shape[1] - r] = self.rule1d.apply_rows(A)
        return out


def lift_1d_to_2d(rule1d: Rule1D) -> LiftedRule:
    return LiftedRule(rule1d)


# stepping ------------------------------------------------------------------

def _step_region(rule: CARule, config: Configuration, region: Rect) -> np.ndarray:
    r = rule.radius
    A = config.to_array(region.expand(r))
    return rule.step_array(A)[r:-r, r:-r]


def step(rule: CARule, config: Configuration, workers: int = 1) -> Configuration:
    """One synchronous update of the whole lattice.

    ``workers > 1`` splits the affected rows into bands evaluated on a
    thread pool; the result is identical to the sequential one.
    """
    if config.alphabet != rule.alphabet:
        raise ValueError(f"configuration alphabet {config.alphabet.tag} does not match rule {rule.alphabet.tag}")
    if not rule.is_quiescent(config.background):
        raise NonQuiescentBackground(f"background {config.alphabet.name(config.background)} is not quiescent")
    box = config.bbox()
    if box is None:
        return config
    region = box.expand(rule.radius)
    if workers <= 1 or region.height < 2 * workers:
        out = _step_region(rule, config, region)
    else:
        cuts = np.linspace(0, region.height, workers + 1).astype(int)
        bands = [Rect(region.x0, region.y0 + a, region.width, b - a) for a, b in zip(cuts, cuts[1:]) if b > a]
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda band: _step_region(rule, config, band), bands))
        out = np.vstack(parts)
    return Configuration.from_array(config.alphabet, out, (region.x0, region.y0), config.background)


def iterate(rule: CARule, config: Configuration, t: int, trace: bool = False):
    """``t`` steps; with ``trace`` also return the frames, starting with ``config``."""
    if t < 0:
        raise ValueError("t must be non-negative")
    frames = [config] if trace else None
    for _ in range(t):
        config = step(rule, config)
        if trace:
            frames.append(config)
    return (config, frames) if trace else config


def verify_rule_table(rule: CARule | TransitionTable | Sequence[Transition]) -> TableReport:
    """Enumerate all 4**9 class windows and report windows matched by two
    transitions with different outputs."""
    if isinstance(rule, TransitionTable):
        return rule.report()
    if isinstance(rule, TableRule):
        return rule.table.report()
    if isinstance(rule, CARule):
        return particle_table().report()
    return TransitionTable(rule).report()


def rule_alphabet(kind: str, tileset: TileSet | None = None) -> Alphabet:
    if kind == "F":
        return f_alphabet()
    n = tileset.n
    return {"Ftau": f_tau_alphabet, "Gtau": g_tau_alphabet, "Ghat": g_tau_alphabet,
            "Htau": h_tau_alphabet}[kind](n)
