# ADC-IMPLEMENTS: <metaspline-oracle-validation-01>
"""
Slow, independent reference implementations for the test suite.

Everything here is written with explicit loops and dense matrices and
shares no code with ``metaspline.algorithms``; states are read through
their ``images``/``slacks``/``deformations`` lists only.
"""

import math
from typing import Callable, List, Sequence, Tuple

import numpy as np
from scipy import optimize

from ..config import SolverConfig


def _bspline(t: float) -> float:
    a = abs(t)
    if a <= 1.0:
        return 2.0 / 3.0 - a * a + 0.5 * a ** 3
    if a <= 2.0:
        return (2.0 - a) ** 3 / 6.0
    return 0.0


def _reflect(m: int, n: int) -> int:
    period = 2 * (n - 1)
    m = m % period
    return m if m <= n - 1 else period - m


def _sampling_row(position: float, n: int) -> np.ndarray:
    """Weights of the n coefficients for evaluating the mirrored spline at ``position``."""
    position = min(max(position, 0.0), n - 1.0)
    row = np.zeros(n)
    for m in range(int(math.floor(position)) - 2, int(math.floor(position)) + 3):
        row[_reflect(m, n)] += _bspline(position - m)
    return row


def _sampling_matrix(n: int) -> np.ndarray:
    return np.array([_sampling_row(float(i), n) for i in range(n)])


def naive_warp(u: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Dense cubic B-spline pullback, one pixel at a time."""
    height, width, channels = u.shape
    inv_y = np.linalg.inv(_sampling_matrix(height))
    inv_x = np.linalg.inv(_sampling_matrix(width))
    result = np.zeros_like(u, dtype=np.float64)
    for c in range(channels):
        coefficients = inv_y @ u[:, :, c] @ inv_x.T
        for j in range(height):
            for i in range(width):
                wy = _sampling_row(phi[j, i, 1] * (height - 1), height)
                wx = _sampling_row(phi[j, i, 0] * (width - 1), width)
                result[j, i, c] = wy @ coefficients @ wx
    return result


def _identity(height: int, width: int) -> np.ndarray:
    grid = np.zeros((height, width, 2))
    for j in range(height):
        for i in range(width):
            grid[j, i, 0] = i / (width - 1)
            grid[j, i, 1] = j / (height - 1)
    return grid


def _forward_jacobian(f: np.ndarray, j: int, i: int) -> np.ndarray:
    """2x2 matrix [component, direction] of forward differences at node (j, i)."""
    height, width = f.shape[:2]
    jac = np.zeros((2, 2))
    for comp in range(2):
        if i < width - 1:
            jac[comp, 0] = (f[j, i + 1, comp] - f[j, i, comp]) * (width - 1)
        if j < height - 1:
            jac[comp, 1] = (f[j + 1, i, comp] - f[j, i, comp]) * (height - 1)
    return jac


def _mean_density(f: np.ndarray, density: Callable[[np.ndarray], float]) -> float:
    height, width = f.shape[:2]
    total = 0.0
    for j in range(height):
        for i in range(width):
            total += density(_forward_jacobian(f, j, i))
    return total / (height * width)


def _sym_squared(jac: np.ndarray) -> float:
    strain = 0.5 * (jac + jac.T)
    return float(np.sum(strain * strain))


def _squared_mean(r: np.ndarray) -> float:
    height, width = r.shape[:2]
    return float(np.sum(r * r)) / (height * width)


# ADC-IMPLEMENTS: <metaspline-oracle-validation-01>
def naive_total_energy(state, cfg: SolverConfig) -> float:
    """Term-by-term re-evaluation of the fully discrete regularized spline energy."""
    images, slacks, phis = state.images, state.slacks, state.deformations
    K = len(phis)
    if K != cfg.time_steps or len(images) != K + 1 or len(slacks) != K:
        raise ValueError("State does not match the configuration")
    height, width, channels = images[0].shape
    identity = _identity(height, width)
    displacements = [phi - identity for phi in phis]

    def elastic(d):
        # W_D(I + D) = |sym D|^2 for the displacement Jacobian D
        return _mean_density(d, _sym_squared)

    total = 0.0
    for k in range(1, K + 1):
        phi, z = phis[k - 1], slacks[k - 1]
        total += cfg.sigma * K * elastic(displacements[k - 1])
        total += cfg.sigma / (cfg.delta * K) * _squared_mean(z)
        misfit = K * (naive_warp(images[k], phi) - images[k - 1]) - z
        total += _squared_mean(misfit) / (2.0 * channels) / (cfg.theta * K)

    if cfg.mode == "geodesic":
        return total
    last = K if cfg.boundary == "periodic" else K - 1
    for k in range(1, last + 1):
        s = k + 1 if k < K else 1
        phi = phis[k - 1]
        accel = K * K * (naive_warp(displacements[s - 1], phi) - displacements[k - 1])
        total += _mean_density(accel, _sym_squared) / K
        transport = naive_warp(slacks[s - 1], phi) - slacks[k - 1]
        total += K / cfg.delta * _squared_mean(transport) / (2.0 * channels)
    return total


def fd_gradient(f: Callable[[np.ndarray], float], x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central differences (f(x + h e_i) - f(x - h e_i)) / 2h for every entry of x."""
    if h <= 0:
        raise ValueError(f"Step must be positive, got {h}")
    x = np.array(x, dtype=np.float64)
    gradient = np.zeros_like(x)
    flat_x, flat_g = x.reshape(-1), gradient.reshape(-1)
    for index in range(flat_x.size):
        original = flat_x[index]
        flat_x[index] = original + h
        forward = f(x)
        flat_x[index] = original - h
        backward = f(x)
        flat_x[index] = original
        if not (np.isfinite(forward) and np.isfinite(backward)):
            raise FloatingPointError(f"Non-finite function value at entry {index}")
        flat_g[index] = (forward - backward) / (2.0 * h)
    return gradient


def adjoint_check(
    operator: Callable[[np.ndarray], np.ndarray],
    adjoint: Callable[[np.ndarray], np.ndarray],
    input_shape: Tuple[int, ...],
    output_shape: Tuple[int, ...],
    trials: int = 10,
    seed: int = 0,
) -> float:
    """max |<Au, v> - <u, A*v>| / (|Au||v| + |u||A*v|) over random u, v."""
    if trials < 1:
        raise ValueError("adjoint_check needs at least one trial")
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        u = rng.standard_normal(input_shape)
        v = rng.standard_normal(output_shape)
        Au, Av = operator(u), adjoint(v)
        scale = np.linalg.norm(Au) * np.linalg.norm(v) + np.linalg.norm(u) * np.linalg.norm(Av)
        if scale == 0:
            continue
        worst = max(worst, abs(float(np.vdot(Au, v)) - float(np.vdot(u, Av))) / scale)
    return worst


def brute_force_prox_pixel(
    tau: float,
    phi_trial: Sequence[float],
    phi_ref: Sequence[float],
    terms: Sequence[Tuple[float, np.ndarray, np.ndarray]],
) -> np.ndarray:
    """Minimize tau/2 |p - trial|^2 + sum_w w/2 sum_j (r_j + L_j . (p - ref))^2 over p in R^2.

    ``terms`` holds (weight, residuals of shape (c,), Lambda of shape (c, 2)).
    Zooming grid search followed by Nelder-Mead refinement.
    """
    phi_trial = np.asarray(phi_trial, dtype=np.float64)
    phi_ref = np.asarray(phi_ref, dtype=np.float64)

    def objective(p):
        value = 0.5 * tau * float(np.sum((p - phi_trial) ** 2))
        for weight, residual, lam in terms:
            linear = residual + lam @ (p - phi_ref)
            value += 0.5 * weight * float(np.sum(linear * linear))
        return value

    center, radius = phi_trial.copy(), 4.0
    offsets = np.linspace(-1.0, 1.0, 41)
    for _ in range(12):
        best, best_value = center, objective(center)
        for dx in offsets:
            for dy in offsets:
                candidate = center + radius * np.array([dx, dy])
                value = objective(candidate)
                if value < best_value:
                    best, best_value = candidate, value
        center, radius = best, radius / 8.0

    result = optimize.minimize(
        objective,
        center,
        method="Nelder-Mead",
        options={"xatol": 1e-13, "fatol": 1e-18, "maxiter": 20000},
    )
    return np.asarray(result.x)


def dense_natural_spline(
    times: Sequence[float], values: Sequence[float], eval_times: Sequence[float]
) -> np.ndarray:
    """Natural cubic spline from one dense linear system over all piece coefficients."""
    t = np.asarray(times, dtype=np.float64)
    y = np.asarray(values, dtype=np.float64)
    pieces = len(t) - 1
    size = 4 * pieces
    system = np.zeros((size, size))
    rhs = np.zeros(size)
    row = 0

    def basis(s, derivative=0):
        powers: List[float] = []
        for p in range(4):
            if p < derivative:
                powers.append(0.0)
            else:
                powers.append(math.factorial(p) / math.factorial(p - derivative) * s ** (p - derivative))
        return powers

    # piece i: a + b s + c s^2 + d s^3 with s = t - t_i
    for i in range(pieces):
        width = t[i + 1] - t[i]
        system[row, 4 * i:4 * i + 4] = basis(0.0)
        rhs[row] = y[i]
        row += 1
        system[row, 4 * i:4 * i + 4] = basis(width)
        rhs[row] = y[i + 1]
        row += 1
    for i in range(pieces - 1):
        width = t[i + 1] - t[i]
        for derivative in (1, 2):
            system[row, 4 * i:4 * i + 4] = basis(width, derivative)
            system[row, 4 * (i + 1):4 * (i + 1) + 4] = [-v for v in basis(0.0, derivative)]
            row += 1
    system[row, 0:4] = basis(0.0, 2)
    row += 1
    system[row, 4 * (pieces - 1):] = basis(t[-1] - t[-2], 2)

    coefficients = np.linalg.solve(system, rhs)
    result = []
    for time in np.asarray(eval_times, dtype=np.float64):
        i = min(max(int(np.searchsorted(t, time, side="right")) - 1, 0), pieces - 1)
        result.append(float(np.dot(coefficients[4 * i:4 * i + 4], basis(time - t[i]))))
    return np.array(result)
