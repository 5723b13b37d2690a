# ADC-IMPLEMENTS: <metaspline-pipeline-feature-04>
"""metaspline synth - write benchmark key frames and a matching run configuration."""

from pathlib import Path

from ..config import EXPERIMENT_PRESETS, KeyFrameEntry, RunConfig, SolverConfig
from ..experiments import circle_square_keyframes, gaussian_keyframes
from ..image_core import save_image
from ..logging_config import logger

BENCHMARKS = {"gaussians": "gaussians", "circle-square": "circle_square"}


def add_synth_parser(subparsers):
    """Add synth command parser."""
    synth_parser = subparsers.add_parser(
        "synth", help="Generate the key frames of a synthetic benchmark"
    )
    synth_parser.add_argument("benchmark", choices=sorted(BENCHMARKS), help="Benchmark name")
    synth_parser.add_argument(
        "--size", type=int, help="Image width and height (default: preset size)"
    )
    synth_parser.add_argument(
        "--out", default="keyframes", help="Output directory (default: keyframes)"
    )


def synth_command(benchmark: str, out_dir: str = "keyframes", size: int = 0) -> bool:
    """
    Write key_%03d.png per key frame and a run.json that solves them.

    Args:
        benchmark: "gaussians" or "circle-square"
        out_dir: Target directory, created if missing
        size: Grid size, 0 for the preset size

    Returns:
        True if all files were written
    """
    preset = BENCHMARKS[benchmark]
    size = size or EXPERIMENT_PRESETS[preset]["size"]
    keyframes = gaussian_keyframes(size) if preset == "gaussians" else circle_square_keyframes(size)

    target = Path(out_dir)
    entries = []
    for index, image in keyframes.frames:
        path = target / f"key_{index:03d}.png"
        save_image(image, path)
        entries.append(KeyFrameEntry(index=index, path=str(path)))

    run = RunConfig(
        solver=SolverConfig.from_preset(preset),
        keyframes=tuple(entries),
        out_dir=str(target / "solution"),
        experiment=preset,
    )
    if not run.save_to_file(target / "run.json"):
        return False
    logger.info(f"Wrote {len(entries)} key frames ({size}x{size}) to {target}")
    return True
