# ADC-IMPLEMENTS: <metaspline-warp-algorithm-01>
"""
Cubic B-spline warping operator T.

``warp(u, phi)`` evaluates the interpolating cubic spline of ``u`` at the
points ``phi(x, y)``; it is the pullback ``u o phi`` used for images,
slack derivatives and for composing deformations. Kernel arguments are in
grid-index units, deformations in normalized coordinates. Both the
prefilter and the evaluation use mirror (whole-sample symmetric) extension.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from ..image_core import (
    GridError,
    GridLike,
    as_array,
    identity_map,
    require_same_shape,
)

_TAP_OFFSETS = np.arange(-1, 3)


# ADC-IMPLEMENTS: <metaspline-warp-algorithm-01>
def cubic_kernel(t) -> np.ndarray:
    """Cubic B-spline s(t) with support [-2, 2]."""
    a = np.abs(np.asarray(t, dtype=np.float64))
    inner = 2.0 / 3.0 - a * a + 0.5 * a ** 3
    outer = (2.0 - a) ** 3 / 6.0
    return np.where(a <= 1.0, inner, np.where(a <= 2.0, outer, 0.0))


def cubic_kernel_derivative(t) -> np.ndarray:
    t = np.asarray(t, dtype=np.float64)
    a = np.abs(t)
    inner = -2.0 * t + 1.5 * t * a
    outer = -0.5 * np.sign(t) * (2.0 - a) ** 2
    return np.where(a <= 1.0, inner, np.where(a <= 2.0, outer, 0.0))


def _mirror(index: np.ndarray, n: int) -> np.ndarray:
    index = np.where(index < 0, -index, index)
    return np.where(index > n - 1, 2 * (n - 1) - index, index)


def _interpolation_bands(n: int, transpose: bool = False) -> np.ndarray:
    """Banded form of the node-sampling matrix of the mirrored cubic spline."""
    bands = np.empty((3, n))
    bands[1, :] = 2.0 / 3.0
    upper = np.full(n, 1.0 / 6.0)
    lower = np.full(n, 1.0 / 6.0)
    # Mirroring folds the outside tap onto the second node
    upper[1] = 1.0 / 3.0
    lower[n - 2] = 1.0 / 3.0
    if transpose:
        upper, lower = np.roll(lower, 1), np.roll(upper, -1)
    bands[0, :] = upper
    bands[2, :] = lower
    bands[0, 0] = 0.0
    bands[2, n - 1] = 0.0
    return bands


def _solve_along(values: np.ndarray, axis: int, transpose: bool) -> np.ndarray:
    moved = np.moveaxis(values, axis, 0)
    n = moved.shape[0]
    solved = solve_banded(
        (1, 1), _interpolation_bands(n, transpose), moved.reshape(n, -1)
    )
    return np.moveaxis(solved.reshape(moved.shape), 0, axis)


# ADC-IMPLEMENTS: <metaspline-datamodel-03>
@dataclass(frozen=True)
class SplineCoefficients:
    """Per-channel prefiltered B-spline coefficients of a grid image."""

    coefficients: np.ndarray

    def reconstruct(self) -> np.ndarray:
        """Evaluate the spline at the grid nodes."""
        height, width = self.coefficients.shape[:2]
        return WarpPlan.from_deformation(identity_map(height, width)).evaluate(
            self.coefficients
        )


def prefilter(u: GridLike) -> SplineCoefficients:
    """Coefficients whose spline interpolates ``u`` at every node."""
    values = as_array(u)
    if values.shape[0] < 3 or values.shape[1] < 3:
        raise GridError("prefilter needs at least a 3x3 grid")
    coefficients = _solve_along(_solve_along(values, 0, False), 1, False)
    return SplineCoefficients(coefficients)


def prefilter_adjoint(g: np.ndarray) -> np.ndarray:
    return _solve_along(_solve_along(g, 1, True), 0, True)


def _axis_taps(position: np.ndarray, n: int):
    """Tap indices, weights and index-space weight derivatives along one axis."""
    clamped = np.clip(position, 0.0, n - 1.0)
    base = np.minimum(np.floor(clamped).astype(np.int64), n - 2)
    distance = (clamped - base)[..., None] - _TAP_OFFSETS
    index = _mirror(base[..., None] + _TAP_OFFSETS, n)
    weights = cubic_kernel(distance)
    slopes = cubic_kernel_derivative(distance)
    # Clamped points do not move with phi
    outside = (position < 0.0) | (position > n - 1.0)
    slopes = np.where(outside[..., None], 0.0, slopes)
    return index, weights, slopes


# ADC-IMPLEMENTS: <metaspline-warp-algorithm-01>
@dataclass(frozen=True)
class WarpPlan:
    """Kernel taps of one deformation, reusable across fields and channels."""

    index_x: np.ndarray
    index_y: np.ndarray
    weight_x: np.ndarray
    weight_y: np.ndarray
    slope_x: np.ndarray
    slope_y: np.ndarray

    @classmethod
    def from_deformation(cls, phi: np.ndarray) -> "WarpPlan":
        phi = as_array(phi)
        if phi.shape[2] != 2:
            raise GridError(f"A deformation needs 2 channels, got {phi.shape[2]}")
        height, width = phi.shape[:2]
        index_x, weight_x, slope_x = _axis_taps(phi[..., 0] * (width - 1), width)
        index_y, weight_y, slope_y = _axis_taps(phi[..., 1] * (height - 1), height)
        return cls(
            index_x=index_x,
            index_y=index_y,
            weight_x=weight_x,
            weight_y=weight_y,
            slope_x=slope_x * (width - 1),
            slope_y=slope_y * (height - 1),
        )

    @property
    def shape(self) -> tuple:
        return self.index_x.shape[:2]

    def _gather(self, coefficients: np.ndarray) -> np.ndarray:
        if coefficients.shape[:2] != self.shape:
            raise GridError(
                f"Field grid {coefficients.shape[:2]} does not match deformation grid {self.shape}"
            )
        return coefficients[self.index_y[..., :, None], self.index_x[..., None, :]]

    def evaluate(self, coefficients: np.ndarray) -> np.ndarray:
        gathered = self._gather(coefficients)
        return np.einsum("nma,nmb,nmabc->nmc", self.weight_y, self.weight_x, gathered)

    def evaluate_gradient(self, coefficients: np.ndarray) -> np.ndarray:
        """Derivatives w.r.t. the evaluation point, shape (N, M, c, 2)."""
        gathered = self._gather(coefficients)
        d_x = np.einsum("nma,nmb,nmabc->nmc", self.weight_y, self.slope_x, gathered)
        d_y = np.einsum("nma,nmb,nmabc->nmc", self.slope_y, self.weight_x, gathered)
        return np.stack([d_x, d_y], axis=-1)

    def splat(self, residual: np.ndarray) -> np.ndarray:
        """Adjoint of ``evaluate``: scatter residuals into coefficient space."""
        height, width = self.shape
        weights = self.weight_y[..., :, None] * self.weight_x[..., None, :]
        flat = (self.index_y[..., :, None] * width + self.index_x[..., None, :]).ravel()
        channels = residual.shape[2]
        result = np.empty((height, width, channels))
        for channel in range(channels):
            contributions = weights * residual[:, :, channel, None, None]
            result[:, :, channel] = np.bincount(
                flat, weights=contributions.ravel(), minlength=height * width
            ).reshape(height, width)
        return result

    def warp(self, u: np.ndarray) -> np.ndarray:
        return self.evaluate(prefilter(u).coefficients)

    def warp_adjoint(self, r: np.ndarray) -> np.ndarray:
        return prefilter_adjoint(self.splat(r))

    def point_derivative(self, u: np.ndarray) -> np.ndarray:
        return self.evaluate_gradient(prefilter(u).coefficients)


def _plan_for(u: np.ndarray, phi: GridLike) -> WarpPlan:
    phi = as_array(phi)
    require_same_shape(u, phi, channels=False)
    return WarpPlan.from_deformation(phi)


# ADC-IMPLEMENTS: <metaspline-warp-algorithm-01>
def warp(u: GridLike, phi: GridLike) -> np.ndarray:
    """T[u, phi]: pullback of every channel of ``u`` by ``phi``."""
    u = as_array(u)
    return _plan_for(u, phi).warp(u)


def warp_adjoint(r: GridLike, phi: GridLike) -> np.ndarray:
    """Adjoint of ``u -> warp(u, phi)`` for the unweighted grid inner product."""
    r = as_array(r)
    return _plan_for(r, phi).warp_adjoint(r)


def warp_point_derivative(u: GridLike, phi: GridLike) -> np.ndarray:
    """d T[u, phi] / d phi per channel, shape (N, M, c, 2), normalized units."""
    u = as_array(u)
    return _plan_for(u, phi).point_derivative(u)
