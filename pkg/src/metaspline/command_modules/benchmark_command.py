# ADC-IMPLEMENTS: <metaspline-pipeline-feature-02>
"""metaspline benchmark - solve a synthetic benchmark in spline and geodesic mode."""

from pathlib import Path
from typing import Dict, Optional, Sequence

from ..config import SolverConfig
from ..experiments import BenchmarkRun, run_benchmark, trajectory_deviation
from ..image_core import render_difference, save_image
from ..logging_config import logger
from ..output_formatter import OutputFormatter, write_text
from .synth_command import BENCHMARKS


def add_benchmark_parser(subparsers):
    """Add benchmark command parser."""
    benchmark_parser = subparsers.add_parser(
        "benchmark", help="Compare spline and geodesic interpolation on a synthetic benchmark"
    )
    benchmark_parser.add_argument("benchmark", choices=sorted(BENCHMARKS), help="Benchmark name")
    benchmark_parser.add_argument("--size", type=int, help="Image width and height")
    benchmark_parser.add_argument("--levels", type=int, help="Number of multilevel grids")
    benchmark_parser.add_argument("--iters", type=int, help="iPALM iterations per level")
    benchmark_parser.add_argument(
        "--out", default="benchmark_out", help="Output directory (default: benchmark_out)"
    )


def _report(benchmark: str, run: BenchmarkRun, size: int) -> None:
    if benchmark == "gaussians":
        rms, mass = trajectory_deviation(run.rows, size, size)
        logger.info(f"[{run.mode}] centroid RMS {rms:.3f} px, relative mass RMS {mass:.4f}")
    else:
        widths = [row["width"] for row in run.rows]
        logger.info(f"[{run.mode}] central-row widths {widths}")


def benchmark_command(
    benchmark: str,
    out_dir: str = "benchmark_out",
    size: Optional[int] = None,
    levels: Optional[int] = None,
    iterations: Optional[int] = None,
    modes: Sequence[str] = ("spline", "geodesic"),
) -> bool:
    """
    Solve the benchmark and write metrics.csv, frames and spline-minus-geodesic differences.

    Returns:
        True on success
    """
    preset = BENCHMARKS[benchmark]
    cfg = SolverConfig.from_preset(preset)
    overrides = {"levels": levels, "iterations": iterations}
    cfg = cfg.with_updates(**{k: v for k, v in overrides.items() if v is not None})
    size = size or 64

    runs: Dict[str, BenchmarkRun] = run_benchmark(benchmark, cfg=cfg, size=size, modes=modes)
    target = Path(out_dir)

    rows = []
    for mode, run in runs.items():
        _report(benchmark, run, size)
        for k in range(run.state.K + 1):
            save_image(run.state.image(k), target / mode / f"frame_{k:03d}.png")
        rows.extend({"mode": mode, **row} for row in run.rows)

    if "spline" in runs and "geodesic" in runs:
        spline, geodesic = runs["spline"].state, runs["geodesic"].state
        for k in range(spline.K + 1):
            save_image(
                render_difference(spline.image(k), geodesic.image(k)),
                target / "diff" / f"diff_{k:03d}.png",
            )

    parameters = {**cfg.to_dict(), "experiment": preset, "size": size}
    write_text(target / "metrics.csv", OutputFormatter.format_table_csv(rows, parameters))
    logger.info(f"Benchmark {benchmark} written to {target}")
    return True
