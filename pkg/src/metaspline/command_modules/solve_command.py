# ADC-IMPLEMENTS: <metaspline-pipeline-feature-03>
"""
metaspline solve - interpolate key frames and write frames, diagnostics and CSVs.

Output layout under --out:
    frame_%03d.png          interpolated images u_0 .. u_K
    flow/flow_%03d.png      displacements phi_k - 1, k = 1..K
    accel/accel_%03d.png    accelerations a_k on the spline indices
    wdot/wdot_%03d.png      |second material derivative|, k = 1..K-1
    slack/slack_%03d.png    |z_k|, k = 1..K
    energy.csv              per-k energy breakdown plus total row
    iterations.csv          iteration log of every level
    levels/level_%d/        per-level frames and energy (--dump-levels)
"""

from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from ..algorithms.energy import (
    KeyFrameSet,
    SplineState,
    discrete_acceleration,
    second_material_derivative,
    spline_indices,
    successor,
    total_energy,
)
from ..algorithms.multilevel import HermiteData, LevelResult, prepare_keyframes, solve_multilevel
from ..algorithms.optimize import IterationRecord, SolverDivergenceError
from ..config import ConfigError, KeyFrameEntry, RunConfig, SolverConfig
from ..image_core import (
    channel_magnitude,
    identity_map,
    load_image,
    render_flow,
    render_scalar,
    save_image,
)
from ..logging_config import logger
from ..output_formatter import OutputFormatter, write_text

# argparse dest -> SolverConfig field
SOLVER_FLAGS = {
    "K": "time_steps",
    "delta": "delta",
    "sigma": "sigma",
    "theta": "theta",
    "levels": "levels",
    "iters": "iterations",
    "beta": "beta",
    "mode": "mode",
    "bc": "boundary",
}


def add_solve_parser(subparsers):
    """Add solve command parser."""
    solve_parser = subparsers.add_parser(
        "solve", help="Compute a spline or piecewise-geodesic interpolation of key frames"
    )
    solve_parser.add_argument("--config", help="JSON or YAML run configuration")
    solve_parser.add_argument(
        "--keyframe",
        action="append",
        default=[],
        metavar="IDX:PATH",
        help="Key frame image at time index IDX (repeatable)",
    )
    solve_parser.add_argument("--preset", help="Named experiment parameter set")
    solve_parser.add_argument("--K", type=int, dest="K", help="Number of time steps")
    solve_parser.add_argument("--delta", type=float, help="Intensity-variation weight")
    solve_parser.add_argument("--sigma", type=float, help="Geodesic regularization weight")
    solve_parser.add_argument("--theta", type=float, help="Slack misfit weight")
    solve_parser.add_argument("--levels", type=int, help="Number of multilevel grids")
    solve_parser.add_argument("--iters", type=int, help="iPALM iterations per level")
    solve_parser.add_argument("--beta", type=float, help="Inertial extrapolation parameter")
    solve_parser.add_argument("--mode", choices=["spline", "geodesic"], help="Energy variant")
    solve_parser.add_argument(
        "--bc", choices=["natural", "periodic", "hermite"], help="Temporal boundary condition"
    )
    solve_parser.add_argument("--hermite", help="NPZ with phi_first, phi_last, z_first, z_last")
    solve_parser.add_argument("--out", help="Output directory (default: metaspline_out)")
    solve_parser.add_argument(
        "--dump-levels", action="store_true", help="Write frames and energies of every level"
    )


def build_run_config(
    config_path: Optional[str] = None,
    keyframes: Sequence[str] = (),
    preset: Optional[str] = None,
    out_dir: Optional[str] = None,
    dump_levels: bool = False,
    hermite_path: Optional[str] = None,
    overrides: Optional[Dict[str, object]] = None,
) -> RunConfig:
    """Layer preset, config file and CLI flags, in increasing precedence."""
    if config_path:
        run = RunConfig.from_file(Path(config_path), preset=preset or "")
    else:
        run = RunConfig.from_dict({"preset": preset} if preset else {})

    changes: Dict[str, object] = {
        SOLVER_FLAGS[name]: value
        for name, value in (overrides or {}).items()
        if value is not None and name in SOLVER_FLAGS
    }
    if keyframes:
        changes["keyframes"] = tuple(KeyFrameEntry.parse(text) for text in keyframes)
    if out_dir:
        changes["out_dir"] = out_dir
    if dump_levels:
        changes["dump_levels"] = True
    if hermite_path:
        changes["hermite_path"] = hermite_path
    run = run.with_updates(**changes)

    if run.solver.geodesic and run.solver.sigma != 1.0:
        logger.warning(f"Geodesic mode uses sigma = 1 (requested {run.solver.sigma})")
        run = run.with_updates(sigma=1.0)
    return run


def load_keyframes(entries: Sequence[KeyFrameEntry]) -> KeyFrameSet:
    entries = sorted(entries, key=lambda entry: entry.index)
    return KeyFrameSet(tuple((entry.index, load_image(entry.path)) for entry in entries))


def _flow_scale(fields: List[np.ndarray]) -> float:
    largest = max((float(channel_magnitude(f).max()) for f in fields), default=0.0)
    return largest if largest > 0 else 1.0


def write_state_images(state: SplineState, cfg: SolverConfig, out_dir: Path) -> None:
    """Frames plus flow, acceleration, second material derivative and slack renderings."""
    K = state.K
    identity = identity_map(*state.shape)
    for k in range(K + 1):
        save_image(state.image(k), out_dir / f"frame_{k:03d}.png")

    displacements = [state.deformation(k) - identity for k in range(1, K + 1)]
    scale = _flow_scale(displacements)
    for k, displacement in enumerate(displacements, start=1):
        save_image(render_flow(displacement, scale), out_dir / "flow" / f"flow_{k:03d}.png")

    periodic = cfg.boundary == "periodic"
    accelerations = {
        k: discrete_acceleration(
            state.deformation(k), state.deformation(successor(k, K, periodic)), K
        )
        for k in spline_indices(cfg, K)
    }
    scale = _flow_scale(list(accelerations.values()))
    for k, a_k in accelerations.items():
        save_image(render_flow(a_k, scale), out_dir / "accel" / f"accel_{k:03d}.png")

    for k in range(1, K):
        w_k = second_material_derivative(
            state.image(k - 1),
            state.image(k),
            state.image(k + 1),
            state.deformation(k),
            state.deformation(k + 1),
            K,
        )
        save_image(render_scalar(channel_magnitude(w_k)), out_dir / "wdot" / f"wdot_{k:03d}.png")
    for k in range(1, K + 1):
        save_image(
            render_scalar(channel_magnitude(state.slack(k))), out_dir / "slack" / f"slack_{k:03d}.png"
        )


def dump_state(state: SplineState, path: Path) -> Path:
    """Save every block of a state to one NPZ for post-mortem inspection."""
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez(
        path,
        images=np.stack(state.images),
        slacks=np.stack(state.slacks),
        deformations=np.stack(state.deformations),
    )
    return path


def solve_command(run: RunConfig) -> bool:
    """
    Run the multilevel solver for a complete run configuration.

    Raises:
        FileNotFoundError, ConfigError, ImageFormatError, GridError for bad inputs

    Returns:
        True on success, False if the solver aborted
    """
    if len(run.keyframes) < 2:
        raise ConfigError("At least two key frames are required (--keyframe IDX:PATH)")
    keyframes = load_keyframes(run.keyframes)
    _, cfg = prepare_keyframes(keyframes, run.solver)
    hermite = HermiteData.from_npz(run.hermite_path) if run.hermite_path else None
    out_dir = Path(run.out_dir)
    parameters = {**cfg.to_dict(), "experiment": run.experiment}

    def on_level(result: LevelResult) -> None:
        if not run.dump_levels:
            return
        level_dir = out_dir / "levels" / f"level_{result.level}"
        for k in range(result.state.K + 1):
            save_image(result.state.image(k), level_dir / f"frame_{k:03d}.png")
        write_text(
            level_dir / "energy.csv",
            OutputFormatter.format_energy_csv(total_energy(result.state, cfg), parameters),
        )

    records: List[IterationRecord] = []
    logger.info(
        f"Solving {cfg.mode} interpolation, K={cfg.time_steps}, key frames {list(cfg.fixed_indices)}"
    )
    try:
        state = solve_multilevel(
            keyframes, run.solver, hermite=hermite, on_level=on_level, iteration_log=records
        )
    except SolverDivergenceError as e:
        dump_path = out_dir / "diagnostic" / "state.npz"
        if e.state is not None:
            dump_state(e.state, dump_path)
        logger.error(f"Solver aborted: {e}; diagnostic dump at {dump_path}")
        return False

    breakdown = total_energy(state, cfg)
    write_state_images(state, cfg, out_dir)
    write_text(out_dir / "energy.csv", OutputFormatter.format_energy_csv(breakdown, parameters))
    write_text(
        out_dir / "iterations.csv", OutputFormatter.format_iteration_csv(records, parameters)
    )
    print(OutputFormatter.format_summary(breakdown))
    logger.info(f"Wrote {state.K + 1} frames and diagnostics to {out_dir}")
    return True
