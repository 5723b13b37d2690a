# ADC-IMPLEMENTS: <metaspline-diffops-algorithm-01>
"""
Discrete spatial differential operators on the normalized grid.

Jacobian fields have shape (N, M, c, 2): entry ``[..., comp, 0]`` is the
x-derivative (along columns) and ``[..., comp, 1]`` the y-derivative
(along rows) of component ``comp``.
"""

import numpy as np
from scipy import ndimage

from ..image_core import GridError, GridLike, as_array, grid_spacing, identity_map


# ADC-IMPLEMENTS: <metaspline-diffops-algorithm-01>
def jacobian(f: GridLike) -> np.ndarray:
    """Forward differences divided by the spacing; the last difference is 0."""
    f = as_array(f)
    if f.shape[0] < 2 or f.shape[1] < 2:
        raise GridError("jacobian needs at least a 2x2 grid")
    h_x, h_y = grid_spacing(f)
    result = np.zeros(f.shape + (2,))
    result[:, :-1, :, 0] = (f[:, 1:] - f[:, :-1]) / h_x
    result[:-1, :, :, 1] = (f[1:] - f[:-1]) / h_y
    return result


def jacobian_adjoint(g: np.ndarray) -> np.ndarray:
    """Exact adjoint of ``jacobian`` (a backward-difference negative divergence)."""
    g = np.asarray(g, dtype=np.float64)
    if g.ndim != 4 or g.shape[3] != 2:
        raise GridError(f"Expected a Jacobian field of shape (N, M, c, 2), got {g.shape}")
    h_x, h_y = grid_spacing(g)
    result = np.zeros(g.shape[:3])

    # Entries on the Neumann column/row never enter the forward operator
    g_x = g[:, :-1, :, 0] / h_x
    result[:, :-1] -= g_x
    result[:, 1:] += g_x

    g_y = g[:-1, :, :, 1] / h_y
    result[:-1] -= g_y
    result[1:] += g_y
    return result


def deformation_jacobian(phi: GridLike) -> np.ndarray:
    """Jacobian of phi as I + jacobian(phi - identity).

    On the last row/column the displacement difference is zero, so the
    identity map has Jacobian I at every node.
    """
    phi = as_array(phi)
    displacement = phi - identity_map(*phi.shape[:2])
    return jacobian(displacement) + np.eye(2)


# ADC-IMPLEMENTS: <metaspline-diffops-algorithm-02>
def sobel_gradient(u: GridLike) -> np.ndarray:
    """Sobel derivatives normalized by 1/(8h), mirror boundary; shape (N, M, c, 2)."""
    u = as_array(u)
    if u.shape[0] < 3 or u.shape[1] < 3:
        raise GridError("sobel_gradient needs at least a 3x3 grid")
    h_x, h_y = grid_spacing(u)
    result = np.empty(u.shape + (2,))
    # Per channel: ndimage.sobel would otherwise smooth across channels too
    for j in range(u.shape[2]):
        result[:, :, j, 0] = ndimage.sobel(u[..., j], axis=1, mode="mirror") / (8.0 * h_x)
        result[:, :, j, 1] = ndimage.sobel(u[..., j], axis=0, mode="mirror") / (8.0 * h_y)
    return result


def det_jacobian(phi: GridLike) -> np.ndarray:
    """Pointwise determinant of jacobian(phi), shape (N, M, 1)."""
    jac = jacobian(phi)
    det = jac[..., 0, 0] * jac[..., 1, 1] - jac[..., 0, 1] * jac[..., 1, 0]
    return det[..., None]


def monitored_min_det(phi: GridLike) -> float:
    """Smallest det(jacobian(phi)) over nodes with both forward differences."""
    return float(det_jacobian(phi)[:-1, :-1].min())
