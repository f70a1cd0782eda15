"""Erosion cellular automata: obstacle languages, particle rules and probes."""
from .dynamics import (
    ErosionReport,
    Obstacle,
    Path,
    ProbeReport,
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
from .lattice import (
    Alphabet,
    CellState,
    Configuration,
    Rect,
    agreement_radius,
    cantor_distance,
    format_config,
    parse_config,
    render,
)
from .rules import (
    iterate,
    lift_1d_to_2d,
    rule_F,
    rule_F_tau,
    rule_G_hat,
    rule_G_tau,
    rule_H_tau,
    step,
    verify_rule_table,
)
from .sft import (
    generate_sigma_obst,
    generate_sigma_prime,
    generate_sigma_S,
    generate_sigma_S_tau,
    in_language,
    scan_violations,
)
from .tiles import TileSet, TuringMachine, can_tile_square, max_square_tiling, tm_to_tileset

__version__ = "0.1.0"
