# ADC-IMPLEMENTS: <metaspline-pipeline-feature-01>
"""
Synthetic key frames, image analysis and the two reproducible benchmarks.

The Gaussian benchmark tracks centroid and mass of a moving blob against
the natural Euclidean cubic spline through the key-frame parameters; the
circle-square benchmark measures the width of the shape along its
horizontal symmetry axis.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import CubicSpline

from .algorithms.energy import KeyFrameSet, SplineState, frame_metrics
from .algorithms.multilevel import LevelResult, solve_multilevel
from .config import SolverConfig
from .image_core import GridLike, ImageGrid, as_array, identity_map
from .logging_config import logger

SHAPE_KINDS = ("circle", "square")

# Documented key-frame parameters (x, y, peak) of the Gaussian benchmark
GAUSSIAN_KEYFRAMES: Tuple[Tuple[int, Tuple[float, float, float]], ...] = (
    (0, (0.30, 0.35, 0.60)),
    (4, (0.50, 0.65, 1.00)),
    (8, (0.70, 0.40, 0.75)),
)
GAUSSIAN_STDDEV = 0.1
# Circle diameter and square side in pixels at 64x64
CIRCLE_DIAMETER = 48.0
SQUARE_SIDE = 20.0


# ADC-IMPLEMENTS: <metaspline-pipeline-feature-01>
def synth_gaussian(
    width: int,
    height: int,
    center: Tuple[float, float],
    mass: float,
    stddev: float,
) -> ImageGrid:
    """m exp(-|x - c|^2 / (2 s^2)) sampled at the nodes, normalized coordinates."""
    if stddev <= 0:
        raise ValueError(f"stddev must be positive, got {stddev}")
    grid = identity_map(height, width)
    squared = (grid[..., 0] - center[0]) ** 2 + (grid[..., 1] - center[1]) ** 2
    return ImageGrid(mass * np.exp(-squared / (2.0 * stddev * stddev)))


def synth_shapes(
    kind: str,
    width: int,
    height: int,
    center: Tuple[float, float],
    size: float,
) -> ImageGrid:
    """Binary circle (size = diameter) or square (size = side) in pixels.

    The edge is a 1-pixel linear ramp of the signed pixel distance, so a
    pixel is above 0.5 exactly when it lies strictly inside the shape.
    """
    if kind not in SHAPE_KINDS:
        raise ValueError(f"Unknown shape '{kind}'; choose from {SHAPE_KINDS}")
    if size < 0:
        raise ValueError(f"Shape size must be nonnegative, got {size}")
    if size == 0:
        return ImageGrid(np.zeros((height, width)))

    cx, cy = center[0] * (width - 1), center[1] * (height - 1)
    half = size / 2.0
    if cx - half < 0 or cy - half < 0 or cx + half > width - 1 or cy + half > height - 1:
        raise ValueError(f"{kind} of size {size} at {center} leaves the {width}x{height} grid")

    rows, cols = np.mgrid[0:height, 0:width].astype(np.float64)
    if kind == "circle":
        distance = np.hypot(cols - cx, rows - cy) - half
    else:
        distance = np.maximum(np.abs(cols - cx), np.abs(rows - cy)) - half
    return ImageGrid(np.clip(0.5 - distance, 0.0, 1.0))


def extract_gaussian_params(u: GridLike) -> Tuple[float, float, float]:
    """Centroid (x, y) in normalized coordinates and mass (1/MN) sum u."""
    values = as_array(u)
    if values.shape[2] != 1:
        raise ValueError(f"extract_gaussian_params needs 1 channel, got {values.shape[2]}")
    intensity = values[..., 0]
    total = float(intensity.sum())
    if total <= 0:
        raise ValueError("Image has no positive mass")
    grid = identity_map(*intensity.shape)
    x = float(np.sum(grid[..., 0] * intensity) / total)
    y = float(np.sum(grid[..., 1] * intensity) / total)
    return x, y, total / intensity.size


def euclidean_cubic_spline(
    times: Sequence[float], points: Sequence[Sequence[float]], eval_times: Sequence[float]
) -> np.ndarray:
    """Natural cubic spline through (times, points), one coordinate per column."""
    times = np.asarray(times, dtype=np.float64)
    points = np.asarray(points, dtype=np.float64)
    if len(times) < 3:
        raise ValueError("A natural cubic spline needs at least 3 points")
    if np.any(np.diff(times) <= 0):
        raise ValueError(f"Spline times must be strictly increasing: {times.tolist()}")
    spline = CubicSpline(times, points, bc_type="natural", axis=0)
    return spline(np.asarray(eval_times, dtype=np.float64))


def width_profile(u: GridLike, threshold: float = 0.5) -> int:
    """Number of pixels above threshold along the central row."""
    if not 0 < threshold < 1:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    values = as_array(u)
    row = values[values.shape[0] // 2, :, 0]
    return int(np.count_nonzero(row > threshold))


# ADC-IMPLEMENTS: <metaspline-pipeline-feature-02>
@dataclass(frozen=True)
class BenchmarkRun:
    """One solved benchmark configuration and its per-frame analysis.

    Energies are those of the finest level, before and after its iPALM run.
    """

    mode: str
    state: SplineState
    initial_energy: float
    final_energy: float
    rows: Tuple[Dict[str, float], ...] = field(default=())


def gaussian_keyframes(size: int = 64) -> KeyFrameSet:
    return KeyFrameSet(
        tuple(
            (index, synth_gaussian(size, size, (x, y), peak, GAUSSIAN_STDDEV))
            for index, (x, y, peak) in GAUSSIAN_KEYFRAMES
        )
    )


def circle_square_keyframes(size: int = 64) -> KeyFrameSet:
    """Circle at 0, a smaller square at 4 and 8, centered between pixels.

    The edge midpoints move inward by (CIRCLE_DIAMETER - SQUARE_SIDE) / 2 pixels
    between k = 0 and 4, so the spline carries a visible overshoot into the
    second interval. Both sizes are given at 64x64 and scale with ``size``.
    """
    center = (0.5, 0.5)
    side = SQUARE_SIDE * size / 64.0
    diameter = CIRCLE_DIAMETER * size / 64.0
    circle = synth_shapes("circle", size, size, center, diameter)
    square = synth_shapes("square", size, size, center, side)
    return KeyFrameSet(((0, circle), (4, square), (8, square)))


def gaussian_trajectory(state: SplineState, keyframes: KeyFrameSet) -> List[Dict[str, float]]:
    """Per-frame (x, y, m) next to the Euclidean spline through the key-frame values."""
    key_params = [extract_gaussian_params(image) for _, image in keyframes.frames]
    frames = np.arange(state.K + 1)
    reference = euclidean_cubic_spline(keyframes.indices, key_params, frames)
    rows = []
    for k in frames:
        x, y, m = extract_gaussian_params(state.image(int(k)))
        rows.append(
            {
                "k": int(k),
                "x": x,
                "y": y,
                "m": m,
                "x_ref": float(reference[k, 0]),
                "y_ref": float(reference[k, 1]),
                "m_ref": float(reference[k, 2]),
            }
        )
    return rows


def trajectory_deviation(rows: Sequence[Dict[str, float]], width: int, height: int) -> Tuple[float, float]:
    """RMS centroid deviation in pixels and relative RMS mass deviation."""
    dx = np.array([(r["x"] - r["x_ref"]) * (width - 1) for r in rows])
    dy = np.array([(r["y"] - r["y_ref"]) * (height - 1) for r in rows])
    dm = np.array([(r["m"] - r["m_ref"]) / r["m_ref"] for r in rows])
    return float(np.sqrt(np.mean(dx * dx + dy * dy))), float(np.sqrt(np.mean(dm * dm)))


def _analysis_rows(benchmark: str, state: SplineState, keyframes: KeyFrameSet) -> List[Dict[str, float]]:
    metrics = {row["k"]: row for row in frame_metrics(state).as_rows()}
    if benchmark == "gaussians":
        rows = gaussian_trajectory(state, keyframes)
    else:
        rows = [{"k": k} for k in range(state.K + 1)]
    for row in rows:
        k = row["k"]
        row["width"] = width_profile(state.image(k))
        row["wdot_l2"] = metrics[k]["wdot_l2"] if k in metrics else 0.0
        row["accel_l1"] = metrics[k]["accel_l1"] if k in metrics else 0.0
    return rows


def run_benchmark(
    benchmark: str,
    cfg: Optional[SolverConfig] = None,
    size: Optional[int] = None,
    modes: Sequence[str] = ("spline", "geodesic"),
) -> Dict[str, BenchmarkRun]:
    """Solve a synthetic benchmark in each mode with otherwise identical settings."""
    preset = {"gaussians": "gaussians", "circle-square": "circle_square"}.get(benchmark)
    if preset is None:
        raise ValueError(f"Unknown benchmark '{benchmark}'")
    cfg = cfg or SolverConfig.from_preset(preset)
    size = size or 64
    keyframes = gaussian_keyframes(size) if benchmark == "gaussians" else circle_square_keyframes(size)

    runs = {}
    for mode in modes:
        mode_cfg = cfg.with_updates(mode=mode)
        levels: List[LevelResult] = []
        state = solve_multilevel(keyframes, mode_cfg, on_level=levels.append)
        initial, final = levels[-1].initial_energy, levels[-1].final_energy
        logger.info(f"{benchmark} [{mode}]: energy {initial:.6e} -> {final:.6e}")
        runs[mode] = BenchmarkRun(
            mode=mode,
            state=state,
            initial_energy=initial,
            final_energy=final,
            rows=tuple(_analysis_rows(benchmark, state, keyframes)),
        )
    return runs
