# ADC-IMPLEMENTS: <metaspline-optimize-algorithm-01>
"""
iPALM solver for the fully discrete spline energy.

Each outer iteration sweeps k = 1..K and updates phi_k, z_k and u_k in
that order at their inertially extrapolated points. Deformations take a
gradient step on their smooth part (elastic and acceleration terms) and a
proximal step on the linearized data terms; slacks and images take plain
gradient steps. Step sizes come from backtracking.
"""

from contextlib import contextmanager
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Dict, FrozenSet, List, Optional, Tuple

import numpy as np

from ..config import SolverConfig
from ..image_core import boundary_mask, identity_map, reset_boundary, squared_l2
from ..logging_config import logger
from .diffops import (
    deformation_jacobian,
    jacobian,
    jacobian_adjoint,
    monitored_min_det,
    sobel_gradient,
)
from .energy import (
    SplineState,
    accel_norm,
    discrete_acceleration,
    elastic_norm,
    intensity_mismatch,
    material_derivative,
    predecessor,
    slack_transport_mismatch,
    spline_indices,
    successor,
    symmetric_part,
    total_energy,
)
from .warp import warp, warp_adjoint, warp_point_derivative

MAX_DOUBLINGS = 64


class SolverDivergenceError(RuntimeError):
    """Raised when the energy stops being finite; keeps the offending state."""

    def __init__(self, message: str, state: Optional[SplineState] = None, iteration: int = 0):
        super().__init__(message)
        self.state = state
        self.iteration = iteration


# ADC-IMPLEMENTS: <metaspline-optimize-datamodel-01>
@dataclass(frozen=True)
class LinearizationPoint:
    """Residuals and Lambda fields of the data terms of phi_k at a reference deformation."""

    k: int
    reference: np.ndarray
    residual_g: np.ndarray
    lambda_g: np.ndarray
    residual_s: Optional[np.ndarray] = None
    lambda_s: Optional[np.ndarray] = None

    @classmethod
    def at(
        cls,
        k: int,
        state: SplineState,
        cfg: SolverConfig,
        reference: Optional[np.ndarray] = None,
    ) -> "LinearizationPoint":
        K = state.K
        reference = state.deformation(k) if reference is None else reference
        u_prev, u_k, z_k = state.image(k - 1), state.image(k), state.slack(k)

        residual_g = K * warp(u_k, reference) - K * u_prev - z_k
        lambda_g = lambda_field(K * u_prev + z_k, K * u_k, reference)
        if k not in spline_indices(cfg, K):
            return cls(k=k, reference=reference, residual_g=residual_g, lambda_g=lambda_g)

        z_next = state.slack(successor(k, K, cfg.boundary == "periodic"))
        return cls(
            k=k,
            reference=reference,
            residual_g=residual_g,
            lambda_g=lambda_g,
            residual_s=warp(z_next, reference) - z_k,
            lambda_s=lambda_field(z_k, z_next, reference),
        )


# ADC-IMPLEMENTS: <metaspline-optimize-datamodel-02>
@dataclass
class StepState:
    """Previous iterate and carried Lipschitz estimate of one variable block."""

    previous: np.ndarray
    lipschitz: float

    def extrapolated(self, current: np.ndarray, beta: float) -> np.ndarray:
        return current + beta * (current - self.previous)


@dataclass
class SmoothBlock:
    """A smooth function of one variable block, anchored at ``point``."""

    value: Callable[[np.ndarray], float]
    gradient_at: Callable[[np.ndarray], np.ndarray]
    point: np.ndarray

    @cached_property
    def energy(self) -> float:
        return self.value(self.point)

    @cached_property
    def gradient(self) -> np.ndarray:
        return self.gradient_at(self.point)


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    level: int
    total: float
    terms: Dict[str, float]
    min_det: float
    lipschitz_deformation: float
    lipschitz_slack: float
    lipschitz_image: float


# ADC-IMPLEMENTS: <metaspline-optimize-algorithm-02>
def lambda_field(u: np.ndarray, u_tilde: np.ndarray, phi_ref: np.ndarray) -> np.ndarray:
    """Per channel 0.5 (Sobel(T[u_tilde, phi_ref]) + Sobel(u)), shape (N, M, c, 2)."""
    return 0.5 * (sobel_gradient(warp(u_tilde, phi_ref)) + sobel_gradient(u))


# ADC-IMPLEMENTS: <metaspline-optimize-algorithm-03>
def prox_deformation(
    phi_trial: np.ndarray,
    tau: float,
    point: LinearizationPoint,
    cfg: SolverConfig,
) -> np.ndarray:
    """Per-pixel minimizer of the linearized data terms plus tau/2 |phi - phi_trial|^2."""
    if not tau > 0:
        raise ValueError(f"prox_deformation needs tau > 0, got {tau}")
    K = cfg.time_steps
    channels = point.residual_g.shape[2]
    reference = point.reference

    system = np.zeros(phi_trial.shape[:2] + (2, 2))
    system[..., 0, 0] = system[..., 1, 1] = tau
    rhs = tau * phi_trial

    blocks = [(1.0 / (channels * cfg.theta * K), point.residual_g, point.lambda_g)]
    if point.lambda_s is not None:
        blocks.append((K / (channels * cfg.delta), point.residual_s, point.lambda_s))

    for weight, residual, lam in blocks:
        system += weight * np.einsum("nmci,nmcj->nmij", lam, lam)
        offset = residual - np.einsum("nmci,nmi->nmc", lam, reference)
        rhs -= weight * np.einsum("nmci,nmc->nmi", lam, offset)

    det = system[..., 0, 0] * system[..., 1, 1] - system[..., 0, 1] * system[..., 1, 0]
    if not (np.all(det > 0) and np.all(system[..., 0, 0] > 0)):
        raise RuntimeError("Proximal system is not positive definite")

    solved = np.linalg.solve(system, rhs[..., None])[..., 0]
    return reset_boundary(solved)


def _zero_boundary(g: np.ndarray) -> np.ndarray:
    g = np.array(g)
    g[boundary_mask(*g.shape[:2])] = 0.0
    return g


def _check_index(k: int, K: int, low: int = 1) -> None:
    if not low <= k <= K:
        raise IndexError(f"Index {k} outside {low}..{K}")


def _accel_gradient(a: np.ndarray, K: int) -> np.ndarray:
    """Gradient of (1/K) ||W_A(grad a)||_{L^1_MN} with respect to a."""
    height, width = a.shape[:2]
    return jacobian_adjoint(symmetric_part(jacobian(a)) * (2.0 / (K * height * width)))


def deformation_smooth_energy(k: int, state: SplineState, cfg: SolverConfig) -> float:
    """sigma K ||W_D(grad phi_k)|| plus the acceleration terms that involve phi_k."""
    K = state.K
    periodic = cfg.boundary == "periodic"
    spline_set = spline_indices(cfg, K)
    value = cfg.sigma * K * elastic_norm(state.deformation(k))
    if k in spline_set:
        s = successor(k, K, periodic)
        a_k = discrete_acceleration(state.deformation(k), state.deformation(s), K)
        value += accel_norm(a_k) / K
    p = predecessor(k, K, periodic)
    if p is not None and p in spline_set:
        a_prev = discrete_acceleration(state.deformation(p), state.deformation(k), K)
        value += accel_norm(a_prev) / K
    return value


# ADC-IMPLEMENTS: <metaspline-optimize-algorithm-04>
def grad_deformation_smooth(k: int, state: SplineState, cfg: SolverConfig) -> np.ndarray:
    """Exact gradient of ``deformation_smooth_energy`` with respect to phi_k."""
    K = state.K
    _check_index(k, K)
    periodic = cfg.boundary == "periodic"
    spline_set = spline_indices(cfg, K)
    phi = state.deformation(k)
    height, width = phi.shape[:2]
    identity = identity_map(height, width)

    strain = symmetric_part(deformation_jacobian(phi)) - np.eye(2)
    gradient = jacobian_adjoint(strain * (2.0 * cfg.sigma * K / (height * width)))

    if k in spline_set:
        phi_next = state.deformation(successor(k, K, periodic))
        g_a = _accel_gradient(discrete_acceleration(phi, phi_next, K), K)
        slope = warp_point_derivative(phi_next - identity, phi)
        gradient += K * K * (np.einsum("nmcd,nmc->nmd", slope, g_a) - g_a)

    p = predecessor(k, K, periodic)
    if p is not None and p in spline_set:
        phi_prev = state.deformation(p)
        g_a = _accel_gradient(discrete_acceleration(phi_prev, phi, K), K)
        gradient += K * K * warp_adjoint(g_a, phi_prev)

    return _zero_boundary(gradient)


def grad_deformation_data(k: int, state: SplineState, cfg: SolverConfig) -> np.ndarray:
    """Exact gradient of the transport and misfit terms of index k with respect to phi_k."""
    K = state.K
    _check_index(k, K)
    phi = state.deformation(k)
    height, width, channels = state.images[0].shape
    scale = 1.0 / (channels * height * width)
    u_k, z_k = state.image(k), state.slack(k)

    residual_g = material_derivative(state.image(k - 1), u_k, phi, K) - z_k
    slope = warp_point_derivative(u_k, phi)
    gradient = (scale / cfg.theta) * np.einsum("nmcd,nmc->nmd", slope, residual_g)

    if k in spline_indices(cfg, K):
        z_next = state.slack(successor(k, K, cfg.boundary == "periodic"))
        residual_s = warp(z_next, phi) - z_k
        slope = warp_point_derivative(z_next, phi)
        gradient += (K * scale / cfg.delta) * np.einsum("nmcd,nmc->nmd", slope, residual_s)
    return _zero_boundary(gradient)


def grad_deformation(k: int, state: SplineState, cfg: SolverConfig) -> np.ndarray:
    """Full gradient of total_energy with respect to the interior nodes of phi_k."""
    return grad_deformation_smooth(k, state, cfg) + grad_deformation_data(k, state, cfg)


def slack_block_energy(k: int, state: SplineState, cfg: SolverConfig) -> float:
    """All terms of total_energy that depend on z_k."""
    K = state.K
    periodic = cfg.boundary == "periodic"
    spline_set = spline_indices(cfg, K)
    z_k, phi = state.slack(k), state.deformation(k)
    value = cfg.sigma / (cfg.delta * K) * squared_l2(z_k)
    value += intensity_mismatch(state.image(k - 1), state.image(k), z_k, phi, K) / (cfg.theta * K)
    if k in spline_set:
        z_next = state.slack(successor(k, K, periodic))
        value += K / cfg.delta * slack_transport_mismatch(z_k, z_next, phi)
    p = predecessor(k, K, periodic)
    if p is not None and p in spline_set:
        value += K / cfg.delta * slack_transport_mismatch(state.slack(p), z_k, state.deformation(p))
    return value


# ADC-IMPLEMENTS: <metaspline-optimize-algorithm-05>
def grad_slack(k: int, state: SplineState, cfg: SolverConfig) -> np.ndarray:
    """Exact gradient of total_energy with respect to z_k."""
    K = state.K
    _check_index(k, K)
    periodic = cfg.boundary == "periodic"
    spline_set = spline_indices(cfg, K)
    height, width, channels = state.images[0].shape
    scale = 1.0 / (channels * height * width)
    z_k, phi = state.slack(k), state.deformation(k)

    gradient = (2.0 * cfg.sigma / (cfg.delta * K * height * width)) * z_k
    residual_g = material_derivative(state.image(k - 1), state.image(k), phi, K) - z_k
    gradient -= (scale / (cfg.theta * K)) * residual_g

    if k in spline_set:
        z_next = state.slack(successor(k, K, periodic))
        gradient -= (K * scale / cfg.delta) * (warp(z_next, phi) - z_k)
    p = predecessor(k, K, periodic)
    if p is not None and p in spline_set:
        phi_prev = state.deformation(p)
        residual_s = warp(z_k, phi_prev) - state.slack(p)
        gradient += (K * scale / cfg.delta) * warp_adjoint(residual_s, phi_prev)
    return gradient


def image_block_energy(k: int, state: SplineState, cfg: SolverConfig) -> float:
    """The intensity misfit terms that depend on u_k."""
    K = state.K
    value = 0.0
    if k >= 1:
        value += intensity_mismatch(
            state.image(k - 1), state.image(k), state.slack(k), state.deformation(k), K
        )
    if k + 1 <= K:
        value += intensity_mismatch(
            state.image(k), state.image(k + 1), state.slack(k + 1), state.deformation(k + 1), K
        )
    return value / (cfg.theta * K)


# ADC-IMPLEMENTS: <metaspline-optimize-algorithm-06>
def grad_image(k: int, state: SplineState, cfg: SolverConfig) -> np.ndarray:
    """Exact gradient of total_energy with respect to a free image u_k."""
    K = state.K
    _check_index(k, K, low=0)
    if k in cfg.fixed_indices:
        raise ValueError(f"Image {k} is a key frame and has no gradient step")
    height, width, channels = state.images[0].shape
    scale = 1.0 / (cfg.theta * channels * height * width)

    gradient = np.zeros_like(state.image(k))
    if k >= 1:
        phi = state.deformation(k)
        residual = material_derivative(state.image(k - 1), state.image(k), phi, K) - state.slack(k)
        gradient += scale * warp_adjoint(residual, phi)
    if k + 1 <= K:
        residual = (
            material_derivative(state.image(k), state.image(k + 1), state.deformation(k + 1), K)
            - state.slack(k + 1)
        )
        gradient -= scale * residual
    return gradient


# ADC-IMPLEMENTS: <metaspline-optimize-algorithm-07>
def backtracking_lipschitz(block: SmoothBlock, candidate: float) -> float:
    """Smallest candidate * 2^m satisfying the sufficient-descent condition at block.point."""
    if not candidate > 0:
        raise ValueError(f"Lipschitz candidate must be positive, got {candidate}")
    energy = block.energy
    if not np.isfinite(energy):
        raise SolverDivergenceError(f"Non-finite block energy {energy}")
    gradient = block.gradient
    gradient_sq = float(np.sum(gradient * gradient))
    tolerance = 1e-12 * max(1.0, abs(energy))

    lipschitz = float(candidate)
    for _ in range(MAX_DOUBLINGS):
        trial = block.value(block.point - gradient / lipschitz)
        if not np.isfinite(trial):
            raise SolverDivergenceError(f"Non-finite trial energy {trial}")
        if trial <= energy - gradient_sq / (2.0 * lipschitz) + tolerance:
            return lipschitz
        lipschitz *= 2.0
    raise SolverDivergenceError(
        f"Backtracking failed to find a descent step below L={lipschitz:g}"
    )


@contextmanager
def _substituted(blocks: List[np.ndarray], index: int, value: np.ndarray):
    """Temporarily place ``value`` at ``blocks[index]``."""
    original = blocks[index]
    blocks[index] = value
    try:
        yield
    finally:
        blocks[index] = original


def _block_of(
    state: SplineState,
    blocks: List[np.ndarray],
    index: int,
    point: np.ndarray,
    energy_fn: Callable[[], float],
    gradient_fn: Callable[[], np.ndarray],
) -> SmoothBlock:
    def value(x):
        with _substituted(blocks, index, x):
            return energy_fn()

    def gradient_at(x):
        with _substituted(blocks, index, x):
            return gradient_fn()

    return SmoothBlock(value=value, gradient_at=gradient_at, point=point)


def default_frozen_blocks(cfg: SolverConfig) -> FrozenSet[Tuple[str, int]]:
    """Blocks prescribed by Hermite boundary conditions."""
    if cfg.boundary != "hermite":
        return frozenset()
    K = cfg.time_steps
    return frozenset({("deformation", 1), ("deformation", K), ("slack", 1), ("slack", K)})


# ADC-IMPLEMENTS: <metaspline-optimize-algorithm-01>
@dataclass
class _Sweep:
    """Mutable bookkeeping of one ipalm_solve call."""

    state: SplineState
    cfg: SolverConfig
    frozen: FrozenSet[Tuple[str, int]]
    steps: Dict[Tuple[str, int], StepState] = field(default_factory=dict)

    def step_state(self, kind: str, k: int, current: np.ndarray) -> StepState:
        key = (kind, k)
        if key not in self.steps:
            self.steps[key] = StepState(previous=current.copy(), lipschitz=self.cfg.initial_lipschitz)
        return self.steps[key]

    def _advance(self, step: StepState, current: np.ndarray, lipschitz: float) -> None:
        step.previous = current.copy()
        # Carried estimate is halved once so L can also decrease
        step.lipschitz = lipschitz / 2.0

    def update_deformation(self, k: int, beta: float) -> float:
        state, cfg = self.state, self.cfg
        current = state.deformation(k)
        step = self.step_state("deformation", k, current)
        point = step.extrapolated(current, beta)

        block = _block_of(
            state,
            state.deformations,
            k - 1,
            point,
            lambda: deformation_smooth_energy(k, state, cfg),
            lambda: grad_deformation_smooth(k, state, cfg),
        )
        lipschitz = backtracking_lipschitz(block, step.lipschitz)
        with _substituted(state.deformations, k - 1, point):
            linearization = LinearizationPoint.at(k, state, cfg, reference=point)
        height, width = current.shape[:2]
        proposal = prox_deformation(
            point - block.gradient / lipschitz, lipschitz * height * width, linearization, cfg
        )
        state.deformations[k - 1] = self._guard_determinant(k, current, proposal)
        self._advance(step, current, lipschitz)
        return lipschitz

    def _guard_determinant(self, k: int, current: np.ndarray, proposal: np.ndarray) -> np.ndarray:
        update = proposal - current
        candidate = proposal
        for halving in range(self.cfg.max_det_halvings + 1):
            candidate = current + update
            if monitored_min_det(candidate) > self.cfg.det_floor:
                if halving:
                    logger.debug(f"det guard damped phi_{k} update by 2^-{halving}")
                return candidate
            update = update / 2.0
        logger.warning(
            f"det guard exhausted {self.cfg.max_det_halvings} halvings on phi_{k}; "
            f"min det {monitored_min_det(candidate):.3e}"
        )
        return candidate

    def update_slack(self, k: int, beta: float) -> float:
        state, cfg = self.state, self.cfg
        current = state.slack(k)
        step = self.step_state("slack", k, current)
        point = step.extrapolated(current, beta)
        block = _block_of(
            state,
            state.slacks,
            k - 1,
            point,
            lambda: slack_block_energy(k, state, cfg),
            lambda: grad_slack(k, state, cfg),
        )
        lipschitz = backtracking_lipschitz(block, step.lipschitz)
        state.slacks[k - 1] = point - block.gradient / lipschitz
        self._advance(step, current, lipschitz)
        return lipschitz

    def update_image(self, k: int, beta: float) -> float:
        state, cfg = self.state, self.cfg
        current = state.image(k)
        step = self.step_state("image", k, current)
        point = step.extrapolated(current, beta)
        block = _block_of(
            state,
            state.images,
            k,
            point,
            lambda: image_block_energy(k, state, cfg),
            lambda: grad_image(k, state, cfg),
        )
        lipschitz = backtracking_lipschitz(block, step.lipschitz)
        state.images[k] = point - block.gradient / lipschitz
        self._advance(step, current, lipschitz)
        return lipschitz


def _min_det(state: SplineState) -> float:
    return min(monitored_min_det(phi) for phi in state.deformations)


# ADC-IMPLEMENTS: <metaspline-optimize-algorithm-01>
def ipalm_solve(
    state: SplineState,
    cfg: SolverConfig,
    level: int = 0,
    frozen: Optional[FrozenSet[Tuple[str, int]]] = None,
    iteration_log: Optional[List[IterationRecord]] = None,
) -> SplineState:
    """Run cfg.iterations iPALM sweeps and return the lowest-energy iterate.

    The input state is not modified. Key-frame images, boundary nodes and
    frozen blocks keep their input values bit for bit. When the energy
    increases, the next iteration runs without extrapolation.
    """
    cfg.validate()
    frozen = default_frozen_blocks(cfg) if frozen is None else frozenset(frozen)
    fixed = set(cfg.fixed_indices)
    K = state.K
    sweep = _Sweep(state=state.copy(), cfg=cfg, frozen=frozen)

    energy = total_energy(sweep.state, cfg).total
    if not np.isfinite(energy):
        raise SolverDivergenceError("Initial energy is not finite", sweep.state, 0)
    best_energy, best_state = energy, sweep.state.copy()
    logger.debug(f"level {level}: initial energy {energy:.6e}")

    restart = False
    for iteration in range(1, cfg.iterations + 1):
        beta = 0.0 if restart else cfg.beta
        lipschitz = {"deformation": 0.0, "slack": 0.0, "image": 0.0}

        try:
            for k in range(1, K + 1):
                if ("deformation", k) not in frozen:
                    lipschitz["deformation"] = max(
                        lipschitz["deformation"], sweep.update_deformation(k, beta)
                    )
                if ("slack", k) not in frozen:
                    lipschitz["slack"] = max(lipschitz["slack"], sweep.update_slack(k, beta))
                if k not in fixed:
                    lipschitz["image"] = max(lipschitz["image"], sweep.update_image(k, beta))
            if 0 not in fixed:
                lipschitz["image"] = max(lipschitz["image"], sweep.update_image(0, beta))
        except SolverDivergenceError as e:
            if e.state is not None:
                raise
            raise SolverDivergenceError(str(e), sweep.state, iteration) from e

        breakdown = total_energy(sweep.state, cfg)
        new_energy = breakdown.total
        if not np.isfinite(new_energy):
            logger.error(f"level {level}: energy diverged at iteration {iteration}")
            raise SolverDivergenceError(
                f"Non-finite energy at iteration {iteration}", sweep.state, iteration
            )
        restart = new_energy > energy
        energy = new_energy
        if energy < best_energy:
            best_energy, best_state = energy, sweep.state.copy()

        min_det = _min_det(sweep.state)
        logger.debug(
            f"level {level} iter {iteration}: energy {energy:.6e}, min det {min_det:.3e}, "
            f"L(phi) {lipschitz['deformation']:.3e}, L(z) {lipschitz['slack']:.3e}, "
            f"L(u) {lipschitz['image']:.3e}"
        )
        if iteration_log is not None:
            iteration_log.append(
                IterationRecord(
                    iteration=iteration,
                    level=level,
                    total=energy,
                    terms=breakdown.term_sums(),
                    min_det=min_det,
                    lipschitz_deformation=lipschitz["deformation"],
                    lipschitz_slack=lipschitz["slack"],
                    lipschitz_image=lipschitz["image"],
                )
            )

    return best_state


__all__ = [
    "IterationRecord",
    "LinearizationPoint",
    "SmoothBlock",
    "SolverDivergenceError",
    "StepState",
    "backtracking_lipschitz",
    "default_frozen_blocks",
    "deformation_smooth_energy",
    "grad_deformation",
    "grad_deformation_data",
    "grad_deformation_smooth",
    "grad_image",
    "grad_slack",
    "image_block_energy",
    "ipalm_solve",
    "lambda_field",
    "prox_deformation",
    "slack_block_energy",
]
