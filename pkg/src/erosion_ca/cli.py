"""Command-line entry point: ``erosion-ca <command> [options]``.

Exit codes: 0 success, 1 operation failure, 2 usage or parse error.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .dynamics import (
    equicontinuity_probe,
    format_frame,
    sensitivity_probe,
    write_pgm,
)
from .lattice import Configuration, ParseError, Rect, format_config, parse_config
from .rules import (
    NonQuiescentBackground,
    identity_1d,
    left_shift_1d,
    lift_1d_to_2d,
    parse_rule1d,
    rule_F,
    rule_F_tau,
    rule_G_hat,
    rule_G_tau,
    rule_H_tau,
    step,
    wall_rule_1d,
)
from .suite import run_suite
from .tiles import (
    checkerboard_tileset,
    format_tileset,
    free_tileset,
    max_square_tiling,
    parse_tileset,
    parse_tm,
    tm_to_tileset,
)


class UsageError(Exception):
    pass


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def load_tileset(ref: str):
    if ref in ("trivial", "free"):
        return free_tileset(1)
    if ref == "checkerboard":
        return checkerboard_tileset()
    if ref.startswith("tm="):
        return tm_to_tileset(parse_tm(_read(ref[3:])))
    return parse_tileset(_read(ref))


def resolve_rule(ident: str):
    """``F``, ``Ftau:<ts>``, ``Gtau:<ts>``, ``Ghat:<ts>``, ``Htau:<ts>`` or
    ``lift:<identity|shift|wall|path>``; ``<ts>`` is ``trivial``,
    ``checkerboard``, ``tm=<path>`` or a tile set file."""
    if ident == "F":
        return rule_F()
    kind, sep, arg = ident.partition(":")
    if not sep or not arg:
        raise UsageError(f"unknown rule id {ident!r}")
    if kind == "lift":
        builtins = {"identity": identity_1d, "shift": left_shift_1d, "wall": wall_rule_1d}
        r1 = builtins[arg]() if arg in builtins else parse_rule1d(_read(arg))
        return lift_1d_to_2d(r1)
    factories = {"Ftau": rule_F_tau, "Gtau": rule_G_tau, "Ghat": rule_G_hat, "Htau": rule_H_tau}
    if kind not in factories:
        raise UsageError(f"unknown rule id {ident!r}")
    return factories[kind](load_tileset(arg))


def _load_config(rule, path: str) -> Configuration:
    return parse_config(_read(path), rule.alphabet)


def cmd_simulate(args) -> int:
    if args.steps < 0 or args.trace_every < 1:
        raise UsageError("need --steps >= 0 and --trace-every >= 1")
    rule = resolve_rule(args.rule)
    x = _load_config(rule, args.input)
    frames = []
    for t in range(1, args.steps + 1):
        x = step(rule, x)
        if t % args.trace_every == 0:
            frames.append((t, x))
    out = Path(args.out) if args.out else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        boxes = [f.bbox() for _, f in frames if f.bbox() is not None]
        if boxes:
            rect = Rect.spanning(min(b.x0 for b in boxes), min(b.y0 for b in boxes),
                                 max(b.x1 for b in boxes), max(b.y1 for b in boxes))
        else:
            rect = Rect(0, 0, 1, 1)
        for t, f in frames:
            (out / f"frame_{t:05d}.txt").write_text(format_frame(f, rect, t))
            write_pgm(out / f"frame_{t:05d}.pgm", f, rect)
        (out / "final.cfg").write_text(format_config(x))
    print(f"steps={args.steps} frames={len(frames)} cells={len(x.cells)}")
    return 0


def cmd_tile_search(args) -> int:
    ts = parse_tileset(_read(args.input))
    rep = max_square_tiling(ts, args.nmax, args.budget)
    for n, status in rep.outcomes:
        print(f"n={n} {status}")
    print(f"max={rep.n_star}")
    print(f"bounded={int(rep.bounded)}")
    return 0


def cmd_tm_compile(args) -> int:
    ts = tm_to_tileset(parse_tm(_read(args.input)))
    text = format_tileset(ts)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    print(f"tiles={ts.n} alpha={ts.alpha} beta={ts.beta}", file=sys.stderr)
    return 0


def cmd_probe(args) -> int:
    if args.m > args.k:
        raise UsageError("need --m <= --k")
    rule = resolve_rule(args.rule)
    x = _load_config(rule, args.input)
    if args.mode == "sens":
        strategy = args.strategy or "constructive"
        rep = sensitivity_probe(rule, x, args.m, args.k, args.tmax, strategy, args.seed, args.trials)
    else:
        strategy = args.strategy or "certificate"
        rep = equicontinuity_probe(rule, x, args.m, args.k, args.tmax, strategy, args.seed, args.trials)
    sys.stdout.write(rep.serialize())
    return 0


def cmd_suite(args) -> int:
    try:
        results = run_suite(args.name)
    except KeyError as exc:
        raise UsageError(str(exc.args[0])) from None
    return 0 if all(r.ok for r in results) else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="erosion-ca", description="Erosion cellular automata toolkit.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run a rule and dump frames")
    s.add_argument("--rule", required=True)
    s.add_argument("--input", required=True)
    s.add_argument("--steps", type=int, default=10)
    s.add_argument("--trace-every", type=int, default=1)
    s.add_argument("--out")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(fn=cmd_simulate)

    s = sub.add_parser("tile-search", help="largest tileable square")
    s.add_argument("--input", required=True)
    s.add_argument("--nmax", type=int, default=8)
    s.add_argument("--budget", type=int, default=1_000_000)
    s.set_defaults(fn=cmd_tile_search)

    s = sub.add_parser("tm-compile", help="compile a Turing machine to a tile set")
    s.add_argument("--input", required=True)
    s.add_argument("--out")
    s.set_defaults(fn=cmd_tm_compile)

    s = sub.add_parser("probe", help="bounded sensitivity or equicontinuity probe")
    s.add_argument("--mode", choices=("sens", "equ"), required=True)
    s.add_argument("--rule", required=True)
    s.add_argument("--input", required=True)
    s.add_argument("--m", type=int, required=True)
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--tmax", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--trials", type=int, default=50)
    s.add_argument("--strategy", choices=("constructive", "random", "certificate"))
    s.set_defaults(fn=cmd_probe)

    s = sub.add_parser("suite", help="run acceptance criteria")
    s.add_argument("name", nargs="?", default="all")
    s.set_defaults(fn=cmd_suite)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    try:
        return args.fn(args)
    except (UsageError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, NonQuiescentBackground, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
