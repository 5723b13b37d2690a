# ADC-IMPLEMENTS: <metaspline-energy-algorithm-01>
"""
Fully discrete regularized spline energy and its building blocks.

Indexing follows the time-discrete model: images ``u_0 .. u_K``, slack
derivatives ``z_1 .. z_K`` and deformations ``phi_1 .. phi_K``, where
``phi_k`` maps frame ``k - 1`` onto frame ``k``. SplineState stores the
slacks and deformations 0-based, use the accessors for 1-based access.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..config import SolverConfig
from ..image_core import (
    GridError,
    GridLike,
    ImageGrid,
    as_array,
    identity_map,
    lp_norm,
    require_same_shape,
    squared_l2,
)
from .diffops import deformation_jacobian, jacobian
from .warp import warp

TERM_NAMES = (
    "elastic_reg",
    "accel_reg",
    "slack_transport",
    "slack_norm",
    "intensity_misfit",
)


# ADC-IMPLEMENTS: <metaspline-energy-datamodel-01>
@dataclass
class SplineState:
    """All unknowns of one interpolation problem, owned by the solver while it runs."""

    images: List[np.ndarray]
    slacks: List[np.ndarray]
    deformations: List[np.ndarray]

    def __post_init__(self):
        self.images = [np.array(as_array(u)) for u in self.images]
        self.slacks = [np.array(as_array(z)) for z in self.slacks]
        self.deformations = [np.array(as_array(phi)) for phi in self.deformations]
        self.validate()

    @property
    def K(self) -> int:
        return len(self.deformations)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.images[0].shape[:2]

    @property
    def channels(self) -> int:
        return self.images[0].shape[2]

    def image(self, k: int) -> np.ndarray:
        return self.images[k]

    def slack(self, k: int) -> np.ndarray:
        """z_k for 1 <= k <= K."""
        return self.slacks[k - 1]

    def deformation(self, k: int) -> np.ndarray:
        """phi_k for 1 <= k <= K."""
        return self.deformations[k - 1]

    def validate(self) -> None:
        K = len(self.deformations)
        if len(self.images) != K + 1 or len(self.slacks) != K:
            raise GridError(
                f"Expected K+1 images and K slacks for K={K}, got "
                f"{len(self.images)} images and {len(self.slacks)} slacks"
            )
        if K < 1:
            raise GridError("A spline state needs at least one deformation")
        require_same_shape(*self.images, *self.slacks)
        require_same_shape(self.images[0], *self.deformations, channels=False)
        for phi in self.deformations:
            if phi.shape[2] != 2:
                raise GridError(f"A deformation needs 2 channels, got {phi.shape[2]}")

    def copy(self) -> "SplineState":
        return SplineState(
            images=[u.copy() for u in self.images],
            slacks=[z.copy() for z in self.slacks],
            deformations=[phi.copy() for phi in self.deformations],
        )

    def transpose(self) -> "SplineState":
        """Reflect every field at the diagonal x = y (swaps the deformation components)."""

        def swap(u):
            return np.swapaxes(u, 0, 1)

        return SplineState(
            images=[swap(u) for u in self.images],
            slacks=[swap(z) for z in self.slacks],
            deformations=[swap(phi)[..., ::-1] for phi in self.deformations],
        )

    @classmethod
    def identity(cls, images: Sequence[GridLike]) -> "SplineState":
        """Identity deformations and zero slacks for the given images."""
        images = [as_array(u) for u in images]
        height, width, channels = images[0].shape
        K = len(images) - 1
        return cls(
            images=list(images),
            slacks=[np.zeros((height, width, channels)) for _ in range(K)],
            deformations=[identity_map(height, width) for _ in range(K)],
        )


# ADC-IMPLEMENTS: <metaspline-energy-datamodel-02>
@dataclass(frozen=True)
class KeyFrameSet:
    """Images constrained at strictly increasing time indices."""

    frames: Tuple[Tuple[int, ImageGrid], ...]

    def __post_init__(self):
        frames = tuple(
            (int(index), image if isinstance(image, ImageGrid) else ImageGrid(image))
            for index, image in self.frames
        )
        indices = [index for index, _ in frames]
        if len(frames) < 2:
            raise GridError("At least two key frames are required")
        if indices != sorted(set(indices)) or indices[0] < 0:
            raise GridError(f"Key-frame indices must be strictly increasing: {indices}")
        require_same_shape(*(image.values for _, image in frames))
        object.__setattr__(self, "frames", frames)

    @property
    def indices(self) -> Tuple[int, ...]:
        return tuple(index for index, _ in self.frames)

    @property
    def shape(self) -> Tuple[int, int, int]:
        return self.frames[0][1].values.shape

    def image(self, index: int) -> np.ndarray:
        for frame_index, image in self.frames:
            if frame_index == index:
                return image.values
        raise KeyError(f"No key frame at index {index}")

    def as_dict(self) -> Dict[int, np.ndarray]:
        return {index: image.values for index, image in self.frames}

    def with_periodic_closure(self, K: int) -> "KeyFrameSet":
        """Impose the frame at index 0 also at index K."""
        if self.indices[0] != 0:
            raise GridError("Periodic boundary conditions need a key frame at 0")
        if self.indices[-1] == K:
            if not np.array_equal(self.image(K), self.image(0)):
                raise GridError(f"Periodic key frame at {K} differs from the frame at 0")
            return self
        return KeyFrameSet(self.frames + ((K, self.frames[0][1]),))


# ADC-IMPLEMENTS: <metaspline-energy-datamodel-03>
@dataclass(frozen=True)
class EnergyBreakdown:
    """Per-k energy terms; ``None`` marks terms inactive for that k or mode."""

    elastic_reg: Tuple[Optional[float], ...]
    accel_reg: Tuple[Optional[float], ...]
    slack_transport: Tuple[Optional[float], ...]
    slack_norm: Tuple[Optional[float], ...]
    intensity_misfit: Tuple[Optional[float], ...]

    @property
    def K(self) -> int:
        return len(self.elastic_reg)

    def term(self, name: str) -> Tuple[Optional[float], ...]:
        return getattr(self, name)

    def term_sum(self, name: str) -> float:
        return float(sum(value for value in self.term(name) if value is not None))

    def term_sums(self) -> Dict[str, float]:
        return {name: self.term_sum(name) for name in TERM_NAMES}

    @property
    def total(self) -> float:
        # Fixed summation order: term by term, k ascending
        return float(sum(self.term_sum(name) for name in TERM_NAMES))

    def row(self, k: int) -> Dict[str, Optional[float]]:
        """Terms at 1-based index k."""
        return {name: self.term(name)[k - 1] for name in TERM_NAMES}


# ADC-IMPLEMENTS: <metaspline-energy-algorithm-02>
def successor(k: int, K: int, periodic: bool) -> int:
    """Index following k; K + 1 wraps to 1 under periodic boundary conditions."""
    if k < K:
        return k + 1
    if periodic:
        return 1
    raise IndexError(f"Index {k} has no successor for K={K}")


def predecessor(k: int, K: int, periodic: bool) -> Optional[int]:
    """The s with successor(s) == k inside the spline index set, if any."""
    if k > 1:
        return k - 1
    return K if periodic else None


def spline_indices(cfg: SolverConfig, K: Optional[int] = None) -> Tuple[int, ...]:
    """Indices k carrying acceleration and slack-transport terms."""
    K = cfg.time_steps if K is None else K
    if cfg.geodesic:
        return ()
    if cfg.boundary == "periodic":
        return tuple(range(1, K + 1))
    return tuple(range(1, K))


def discrete_velocity(phi: GridLike, K: int) -> np.ndarray:
    """K (phi - identity) in normalized coordinates."""
    phi = as_array(phi)
    return K * (phi - identity_map(*phi.shape[:2]))


def discrete_acceleration(phi_k: GridLike, phi_next: GridLike, K: int) -> np.ndarray:
    """K^2 (T[phi_{k+1} - 1, phi_k] - (phi_k - 1))."""
    phi_k, phi_next = as_array(phi_k), as_array(phi_next)
    require_same_shape(phi_k, phi_next)
    identity = identity_map(*phi_k.shape[:2])
    return K * K * (warp(phi_next - identity, phi_k) - (phi_k - identity))


def material_derivative(
    u_prev: GridLike, u_k: GridLike, phi_k: GridLike, K: int
) -> np.ndarray:
    u_prev, u_k = as_array(u_prev), as_array(u_k)
    require_same_shape(u_prev, u_k)
    return K * (warp(u_k, phi_k) - u_prev)


def second_material_derivative(
    u_prev: GridLike,
    u_k: GridLike,
    u_next: GridLike,
    phi_k: GridLike,
    phi_next: GridLike,
    K: int,
) -> np.ndarray:
    """K^2 (u_{k+1} o phi_{k+1} o phi_k - 2 u_k o phi_k + u_{k-1}) with compositions by T."""
    u_prev, u_k, u_next = as_array(u_prev), as_array(u_k), as_array(u_next)
    require_same_shape(u_prev, u_k, u_next)
    transported = warp(warp(u_next, phi_next), phi_k)
    return K * K * (transported - 2.0 * warp(u_k, phi_k) + u_prev)


def symmetric_part(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A + np.swapaxes(A, -1, -2))


def elastic_density(A: np.ndarray) -> np.ndarray:
    """W_D(A) = |A^sym - I|^2 over the trailing 2x2 axes."""
    strain = symmetric_part(np.asarray(A, dtype=np.float64)) - np.eye(2)
    return np.sum(strain * strain, axis=(-2, -1))


def accel_density(A: np.ndarray) -> np.ndarray:
    """W_A(A) = |A^sym|^2 over the trailing 2x2 axes."""
    sym = symmetric_part(np.asarray(A, dtype=np.float64))
    return np.sum(sym * sym, axis=(-2, -1))


def _grid_mean(values: np.ndarray) -> float:
    height, width = values.shape[:2]
    return float(values.sum() / (height * width))


def elastic_norm(phi: GridLike) -> float:
    """||W_D(grad phi)||_{L^1_MN}."""
    return _grid_mean(elastic_density(deformation_jacobian(phi)))


def accel_norm(a: GridLike) -> float:
    """||W_A(grad a)||_{L^1_MN}."""
    return _grid_mean(accel_density(jacobian(a)))


def slack_transport_mismatch(z_k: GridLike, z_next: GridLike, phi_k: GridLike) -> float:
    """(1/2c) sum_j ||T[z_{k+1}^j, phi_k] - z_k^j||^2 in L^2_MN."""
    z_k, z_next = as_array(z_k), as_array(z_next)
    require_same_shape(z_k, z_next)
    residual = warp(z_next, phi_k) - z_k
    return squared_l2(residual) / (2.0 * z_k.shape[2])


def intensity_mismatch(
    u_prev: GridLike, u_k: GridLike, z_k: GridLike, phi_k: GridLike, K: int
) -> float:
    """(1/2c) sum_j ||K (T[u_k^j, phi_k] - u_{k-1}^j) - z_k^j||^2 in L^2_MN."""
    z_k = as_array(z_k)
    residual = material_derivative(u_prev, u_k, phi_k, K) - z_k
    require_same_shape(residual, z_k)
    return squared_l2(residual) / (2.0 * z_k.shape[2])


def _require_consistent(state: SplineState, cfg: SolverConfig) -> None:
    if state.K != cfg.time_steps:
        raise GridError(f"State has K={state.K}, configuration has K={cfg.time_steps}")
    state.validate()


# ADC-IMPLEMENTS: <metaspline-energy-algorithm-01>
def total_energy(state: SplineState, cfg: SolverConfig) -> EnergyBreakdown:
    """Evaluate every term of the fully discrete regularized spline energy."""
    _require_consistent(state, cfg)
    K = state.K
    periodic = cfg.boundary == "periodic"
    spline_set = set(spline_indices(cfg, K))

    elastic, accel, transport, norm, misfit = [], [], [], [], []
    for k in range(1, K + 1):
        phi_k = state.deformation(k)
        z_k = state.slack(k)
        elastic.append(cfg.sigma * K * elastic_norm(phi_k))
        norm.append(cfg.sigma / (cfg.delta * K) * squared_l2(z_k))
        misfit.append(
            intensity_mismatch(state.image(k - 1), state.image(k), z_k, phi_k, K)
            / (cfg.theta * K)
        )
        if k in spline_set:
            s = successor(k, K, periodic)
            a_k = discrete_acceleration(phi_k, state.deformation(s), K)
            accel.append(accel_norm(a_k) / K)
            transport.append(
                K / cfg.delta * slack_transport_mismatch(z_k, state.slack(s), phi_k)
            )
        else:
            accel.append(None)
            transport.append(None)

    return EnergyBreakdown(
        elastic_reg=tuple(elastic),
        accel_reg=tuple(accel),
        slack_transport=tuple(transport),
        slack_norm=tuple(norm),
        intensity_misfit=tuple(misfit),
    )


# ADC-IMPLEMENTS: <metaspline-energy-datamodel-04>
@dataclass(frozen=True)
class FrameMetrics:
    """Per-frame smoothness diagnostics for k = 1 .. K-1."""

    indices: Tuple[int, ...] = ()
    second_material_norm: Tuple[float, ...] = ()
    accel_density_norm: Tuple[float, ...] = ()
    velocity_norm: Tuple[float, ...] = field(default=())

    def as_rows(self) -> List[Dict[str, float]]:
        return [
            {
                "k": k,
                "wdot_l2": w,
                "accel_l1": a,
                "velocity_l2": v,
            }
            for k, w, a, v in zip(
                self.indices,
                self.second_material_norm,
                self.accel_density_norm,
                self.velocity_norm,
            )
        ]


def frame_metrics(state: SplineState) -> FrameMetrics:
    """||w_k||_{L^2_MN}, ||W_A(grad a_k)||_{L^1_MN} and ||v_k||_{L^2_MN} at interior k."""
    K = state.K
    indices, second, accel, velocity = [], [], [], []
    for k in range(1, K):
        phi_k, phi_next = state.deformation(k), state.deformation(k + 1)
        w_k = second_material_derivative(
            state.image(k - 1), state.image(k), state.image(k + 1), phi_k, phi_next, K
        )
        indices.append(k)
        second.append(lp_norm(w_k, 2))
        accel.append(accel_norm(discrete_acceleration(phi_k, phi_next, K)))
        velocity.append(lp_norm(discrete_velocity(phi_k, K), 2))
    return FrameMetrics(
        indices=tuple(indices),
        second_material_norm=tuple(second),
        accel_density_norm=tuple(accel),
        velocity_norm=tuple(velocity),
    )
