# ADC-IMPLEMENTS: <metaspline-multilevel-algorithm-01>
"""
Coarse-to-fine orchestration: key-frame restriction, state prolongation and
the per-level iPALM schedule.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np
from scipy import ndimage

from ..config import SolverConfig
from ..image_core import (
    GridError,
    GridLike,
    ImageGrid,
    as_array,
    identity_map,
    require_same_shape,
    reset_boundary,
)
from ..logging_config import logger
from .energy import KeyFrameSet, SplineState, total_energy
from .optimize import IterationRecord, default_frozen_blocks, ipalm_solve

MIN_RESTRICT_SIZE = 6


@dataclass(frozen=True)
class LevelResult:
    """Solution of one level of the schedule."""

    level: int
    initial_energy: float
    final_energy: float
    state: SplineState


LevelCallback = Callable[[LevelResult], None]


# ADC-IMPLEMENTS: <metaspline-multilevel-algorithm-02>
def restrict_image(u: GridLike) -> ImageGrid:
    """Halve both dimensions (ceil) by 2x2 box averaging; odd edges are mirrored."""
    values = as_array(u)
    height, width = values.shape[:2]
    if height < MIN_RESTRICT_SIZE or width < MIN_RESTRICT_SIZE:
        raise GridError(
            f"Restriction needs at least {MIN_RESTRICT_SIZE}x{MIN_RESTRICT_SIZE}, "
            f"got {width}x{height}"
        )
    padded = np.pad(values, ((0, height % 2), (0, width % 2), (0, 0)), mode="symmetric")
    rows, cols = padded.shape[0] // 2, padded.shape[1] // 2
    blocks = padded.reshape(rows, 2, cols, 2, values.shape[2])
    return ImageGrid(blocks.mean(axis=(1, 3)))


def restrict_deformation(phi: GridLike) -> np.ndarray:
    """Restrict a deformation through its displacement; boundary stays identity."""
    phi = as_array(phi)
    displacement = restrict_image(phi - identity_map(*phi.shape[:2])).values
    return reset_boundary(displacement + identity_map(*displacement.shape[:2]))


def _bilinear(u: np.ndarray, height: int, width: int) -> np.ndarray:
    """Resample u to (height, width) nodes over the same [0, 1]^2 domain."""
    coarse_height, coarse_width = u.shape[:2]
    rows = np.linspace(0.0, coarse_height - 1.0, height)
    cols = np.linspace(0.0, coarse_width - 1.0, width)
    grid = np.meshgrid(rows, cols, indexing="ij")
    return np.stack(
        [
            ndimage.map_coordinates(u[..., channel], grid, order=1, mode="nearest")
            for channel in range(u.shape[2])
        ],
        axis=-1,
    )


# ADC-IMPLEMENTS: <metaspline-multilevel-algorithm-03>
def prolong_state(state: SplineState, target_height: int, target_width: int) -> SplineState:
    """Bilinear prolongation of images, slacks and deformation displacements."""
    height, width = state.shape
    if target_height < height or target_width < width:
        raise GridError(
            f"Prolongation target {target_width}x{target_height} is coarser than "
            f"{width}x{height}"
        )
    coarse_identity = identity_map(height, width)
    fine_identity = identity_map(target_height, target_width)
    return SplineState(
        images=[_bilinear(u, target_height, target_width) for u in state.images],
        slacks=[_bilinear(z, target_height, target_width) for z in state.slacks],
        deformations=[
            reset_boundary(
                fine_identity + _bilinear(phi - coarse_identity, target_height, target_width)
            )
            for phi in state.deformations
        ],
    )


# ADC-IMPLEMENTS: <metaspline-multilevel-datamodel-01>
@dataclass(frozen=True)
class HermiteData:
    """Prescribed phi_1, phi_K, z_1 and z_K for Hermite boundary conditions."""

    phi_first: np.ndarray
    phi_last: np.ndarray
    z_first: np.ndarray
    z_last: np.ndarray

    def __post_init__(self):
        require_same_shape(self.phi_first, self.phi_last, self.z_first, self.z_last, channels=False)
        require_same_shape(self.z_first, self.z_last)

    @classmethod
    def default(cls, height: int, width: int, channels: int) -> "HermiteData":
        """Identity deformations and vanishing material derivatives."""
        zero = np.zeros((height, width, channels))
        identity = identity_map(height, width)
        return cls(phi_first=identity, phi_last=identity, z_first=zero, z_last=zero)

    @classmethod
    def from_npz(cls, path: Union[str, Path]) -> "HermiteData":
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"Hermite data file not found: {path}")
        with np.load(path) as data:
            missing = {"phi_first", "phi_last", "z_first", "z_last"} - set(data.files)
            if missing:
                raise GridError(f"Hermite data {path} lacks {', '.join(sorted(missing))}")
            return cls(
                phi_first=as_array(data["phi_first"]),
                phi_last=as_array(data["phi_last"]),
                z_first=as_array(data["z_first"]),
                z_last=as_array(data["z_last"]),
            )

    @property
    def shape(self) -> Tuple[int, int]:
        return self.phi_first.shape[:2]

    def restrict(self) -> "HermiteData":
        return HermiteData(
            phi_first=restrict_deformation(self.phi_first),
            phi_last=restrict_deformation(self.phi_last),
            z_first=restrict_image(self.z_first).values,
            z_last=restrict_image(self.z_last).values,
        )

    def impose(self, state: SplineState) -> None:
        require_same_shape(state.images[0], self.z_first)
        state.deformations[0] = reset_boundary(self.phi_first)
        state.deformations[-1] = reset_boundary(self.phi_last)
        state.slacks[0] = np.array(self.z_first)
        state.slacks[-1] = np.array(self.z_last)


def impose_keyframes(state: SplineState, keyframes: KeyFrameSet) -> None:
    """Overwrite constrained images with exact copies of their key frames."""
    for index, image in keyframes.frames:
        state.images[index] = np.array(image.values)


def _piecewise_linear(values: Dict[int, np.ndarray], K: int) -> List[np.ndarray]:
    """Linear interpolation in time between the given indices, constant beyond them."""
    indices = sorted(values)
    result = []
    for k in range(K + 1):
        if k <= indices[0]:
            result.append(np.array(values[indices[0]]))
        elif k >= indices[-1]:
            result.append(np.array(values[indices[-1]]))
        else:
            right = next(i for i in indices if i >= k)
            left = max(i for i in indices if i <= k)
            if left == right:
                result.append(np.array(values[left]))
                continue
            t = (k - left) / (right - left)
            result.append((1.0 - t) * values[left] + t * values[right])
    return result


def correct_keyframes(state: SplineState, keyframes: KeyFrameSet) -> None:
    """Re-impose key frames after prolongation, spreading the correction over free frames.

    The difference between each fine key frame and its prolonged value is
    interpolated linearly in time and added to every image; slacks receive
    the matching K (c_k - c_{k-1}). Constant paths therefore stay constant.
    """
    K = state.K
    residuals = {index: image.values - state.image(index) for index, image in keyframes.frames}
    corrections = _piecewise_linear(residuals, K)
    for k in range(K + 1):
        state.images[k] = state.images[k] + corrections[k]
    for k in range(1, K + 1):
        state.slacks[k - 1] = state.slacks[k - 1] + K * (corrections[k] - corrections[k - 1])
    impose_keyframes(state, keyframes)


# ADC-IMPLEMENTS: <metaspline-multilevel-algorithm-04>
def initialize_state(keyframes: KeyFrameSet, K: int) -> SplineState:
    """Piecewise linear images, consecutive-difference slacks, identity deformations."""
    if keyframes.indices[-1] > K:
        raise GridError(f"Key frame index {keyframes.indices[-1]} exceeds K={K}")
    images = _piecewise_linear(keyframes.as_dict(), K)
    height, width = images[0].shape[:2]
    return SplineState(
        images=images,
        slacks=[K * (images[k] - images[k - 1]) for k in range(1, K + 1)],
        deformations=[identity_map(height, width) for _ in range(K)],
    )


def _pyramid(keyframes: KeyFrameSet, levels: int) -> List[KeyFrameSet]:
    """Key frames per level, finest first."""
    pyramid = [keyframes]
    for _ in range(levels - 1):
        coarser = pyramid[-1]
        pyramid.append(
            KeyFrameSet(tuple((index, restrict_image(image)) for index, image in coarser.frames))
        )
    return pyramid


def prepare_keyframes(keyframes: KeyFrameSet, cfg: SolverConfig) -> Tuple[KeyFrameSet, SolverConfig]:
    """Apply the periodic closure and record the key-frame indices in the config."""
    if cfg.boundary == "periodic":
        keyframes = keyframes.with_periodic_closure(cfg.time_steps)
    cfg = cfg.with_updates(fixed_indices=keyframes.indices).validate()
    return keyframes, cfg


# ADC-IMPLEMENTS: <metaspline-multilevel-algorithm-05>
def solve_multilevel(
    keyframes: KeyFrameSet,
    cfg: SolverConfig,
    hermite: Optional[HermiteData] = None,
    on_level: Optional[LevelCallback] = None,
    iteration_log: Optional[List[IterationRecord]] = None,
) -> SplineState:
    """Solve on cfg.levels grids, coarsest first, and return the finest state.

    Level numbers run from 1 (coarsest) to cfg.levels (finest); ``on_level``
    is called with a LevelResult per level.
    """
    keyframes, cfg = prepare_keyframes(keyframes, cfg)
    pyramid = _pyramid(keyframes, cfg.levels)

    hermite_levels: List[Optional[HermiteData]] = [None] * cfg.levels
    if cfg.boundary == "hermite":
        height, width, channels = keyframes.shape
        hermite = hermite or HermiteData.default(height, width, channels)
        if hermite.shape != (height, width):
            raise GridError(f"Hermite data grid {hermite.shape} differs from {(height, width)}")
        hermite_levels[0] = hermite
        for level in range(1, cfg.levels):
            hermite_levels[level] = hermite_levels[level - 1].restrict()
    frozen = default_frozen_blocks(cfg)

    state: Optional[SplineState] = None
    for depth in reversed(range(cfg.levels)):
        level = cfg.levels - depth
        level_keyframes = pyramid[depth]
        height, width = level_keyframes.shape[:2]
        if state is None:
            state = initialize_state(level_keyframes, cfg.time_steps)
        else:
            state = prolong_state(state, height, width)
            correct_keyframes(state, level_keyframes)
        if hermite_levels[depth] is not None:
            hermite_levels[depth].impose(state)

        initial_energy = total_energy(state, cfg).total
        logger.info(
            f"level {level}/{cfg.levels} ({width}x{height}): start energy {initial_energy:.6e}"
        )
        state = ipalm_solve(state, cfg, level=level, frozen=frozen, iteration_log=iteration_log)
        final_energy = total_energy(state, cfg).total
        logger.info(f"level {level}/{cfg.levels}: final energy {final_energy:.6e}")
        if on_level is not None:
            on_level(LevelResult(level, initial_energy, final_energy, state))

    return state
