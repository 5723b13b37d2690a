# ADC-IMPLEMENTS: <metaspline-datamodel-01>
"""
Grid containers, discrete norms, image file I/O and diagnostic rendering.

Arrays follow the image convention ``values[row, column, channel]`` with
shape ``(N, M, c)``: ``M`` columns sample ``x_i = i / (M - 1)`` and ``N``
rows sample ``y_j = j / (N - 1)``. Deformations are stored with ``c = 2``
as ``(phi^1, phi^2)`` in the same normalized coordinates.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np
from matplotlib.colors import hsv_to_rgb
from PIL import Image

from .logging_config import logger


class GridError(ValueError):
    """Raised for invalid grid sizes or corrupted (non-finite) grid data."""


class DimensionMismatchError(GridError):
    """Raised when grids that must share (N, M[, c]) do not."""


class ImageFormatError(ValueError):
    """Raised for image files with an unsupported bit depth or channel count."""


MIN_GRID_SIZE = 3


# ADC-IMPLEMENTS: <metaspline-datamodel-01>
@dataclass(frozen=True)
class ImageGrid:
    """Multi-channel field sampled on an M x N grid over [0, 1]^2."""

    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim == 2:
            values = values[:, :, None]
        if values.ndim != 3 or values.shape[2] < 1:
            raise GridError(f"Expected an (N, M, c) array, got shape {values.shape}")
        if values.shape[0] < MIN_GRID_SIZE or values.shape[1] < MIN_GRID_SIZE:
            raise GridError(
                f"Grid must be at least {MIN_GRID_SIZE}x{MIN_GRID_SIZE}, got "
                f"{values.shape[1]}x{values.shape[0]}"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def channels(self) -> int:
        return self.values.shape[2]

    @property
    def spacing(self) -> tuple:
        """Grid spacing (h_x, h_y) in normalized coordinates."""
        return grid_spacing(self.values)


# ADC-IMPLEMENTS: <metaspline-datamodel-02>
@dataclass(frozen=True)
class DeformationField(ImageGrid):
    """Grid-sampled map into [0, 1]^2, identity on the grid boundary."""

    def __post_init__(self):
        super().__post_init__()
        if self.channels != 2:
            raise GridError(f"A deformation needs 2 channels, got {self.channels}")

    @classmethod
    def identity(cls, height: int, width: int) -> "DeformationField":
        return cls(identity_map(height, width))

    def displacement(self) -> np.ndarray:
        return self.values - identity_map(self.height, self.width)

    def is_boundary_identity(self, atol: float = 0.0) -> bool:
        return bool(np.all(np.abs(boundary_values(self.displacement())) <= atol))


GridLike = Union[ImageGrid, np.ndarray]


def as_array(u: GridLike) -> np.ndarray:
    """Return the (N, M, c) float array behind ``u``."""
    if isinstance(u, ImageGrid):
        return u.values
    array = np.asarray(u, dtype=np.float64)
    if array.ndim == 2:
        array = array[:, :, None]
    return array


def grid_spacing(u: np.ndarray) -> tuple:
    height, width = u.shape[:2]
    return 1.0 / (width - 1), 1.0 / (height - 1)


def identity_map(height: int, width: int) -> np.ndarray:
    """Identity deformation of shape (height, width, 2)."""
    ys, xs = np.meshgrid(
        np.linspace(0.0, 1.0, height), np.linspace(0.0, 1.0, width), indexing="ij"
    )
    return np.stack([xs, ys], axis=-1)


def boundary_mask(height: int, width: int) -> np.ndarray:
    mask = np.zeros((height, width), dtype=bool)
    mask[0, :] = mask[-1, :] = True
    mask[:, 0] = mask[:, -1] = True
    return mask


def boundary_values(u: np.ndarray) -> np.ndarray:
    return u[boundary_mask(*u.shape[:2])]


def reset_boundary(phi: np.ndarray) -> np.ndarray:
    """Copy of ``phi`` with the boundary nodes set back to the identity."""
    result = np.array(phi, dtype=np.float64)
    mask = boundary_mask(*phi.shape[:2])
    result[mask] = identity_map(*phi.shape[:2])[mask]
    return result


def require_same_shape(*arrays: np.ndarray, channels: bool = True) -> None:
    """Raise DimensionMismatchError unless all arrays share (N, M) (and c)."""
    depth = 3 if channels else 2
    reference = arrays[0].shape[:depth]
    for array in arrays[1:]:
        if array.shape[:depth] != reference:
            raise DimensionMismatchError(
                f"Grid shapes differ: {reference} vs {array.shape[:depth]}"
            )


def require_finite(u: np.ndarray, what: str = "grid") -> None:
    if not np.all(np.isfinite(u)):
        raise GridError(f"Non-finite values in {what}")


# ADC-IMPLEMENTS: <metaspline-feature-01>
def lp_norm(u: GridLike, p: float) -> float:
    """Averaged discrete L^p norm ((1/MN) sum_nodes ||u(x, y)||_p^p)^(1/p)."""
    if p < 1:
        raise ValueError(f"lp_norm needs p >= 1, got {p}")
    values = as_array(u)
    require_finite(values)
    height, width = values.shape[:2]
    pointwise = np.sum(np.abs(values) ** p, axis=-1)
    return float((pointwise.sum() / (height * width)) ** (1.0 / p))


def squared_l2(u: np.ndarray) -> float:
    """||u||^2 in L^2_MN (channels summed)."""
    height, width = u.shape[:2]
    return float(np.sum(u * u) / (height * width))


# ADC-IMPLEMENTS: <metaspline-feature-02>
def load_image(path: Union[str, Path]) -> ImageGrid:
    """Load an 8/16-bit grayscale or RGB PNG, or a PGM, into [0, 1]."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Image file not found: {path}")

    with Image.open(path) as image:
        mode = image.mode
        if mode in ("L", "RGB"):
            values = np.asarray(image, dtype=np.float64) / 255.0
        elif mode in ("I;16", "I;16B", "I;16L", "I"):
            raw = np.asarray(image, dtype=np.float64)
            if raw.min() < 0 or raw.max() > 65535:
                raise ImageFormatError(f"Unsupported integer range in {path}")
            values = raw / 65535.0
        elif mode in ("RGBA", "LA", "P", "PA", "CMYK"):
            raise ImageFormatError(
                f"Unsupported channel layout '{mode}' in {path}; use grayscale or RGB"
            )
        else:
            raise ImageFormatError(f"Unsupported bit depth '{mode}' in {path}")

    logger.debug(f"Loaded {path} ({mode}, {values.shape[1]}x{values.shape[0]})")
    return ImageGrid(values)


def save_image(u: GridLike, path: Union[str, Path]) -> None:
    """Clamp to [0, 1] and write as 8-bit PNG (or PGM by file suffix)."""
    values = as_array(u)
    if values.shape[2] not in (1, 3):
        raise ImageFormatError(f"Cannot save {values.shape[2]} channels; need 1 or 3")
    quantized = np.rint(np.clip(values, 0.0, 1.0) * 255.0).astype(np.uint8)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if quantized.shape[2] == 1:
        Image.fromarray(quantized[:, :, 0]).save(path)
    else:
        Image.fromarray(quantized).save(path)


# ADC-IMPLEMENTS: <metaspline-feature-03>
def render_flow(field: GridLike, scale: float) -> ImageGrid:
    """Color-code a vector field: hue is direction, value is |v| / scale."""
    if scale <= 0:
        raise ValueError(f"render_flow needs scale > 0, got {scale}")
    vectors = as_array(field)
    if vectors.shape[2] != 2:
        raise GridError(f"render_flow needs 2 channels, got {vectors.shape[2]}")

    magnitude = np.hypot(vectors[..., 0], vectors[..., 1])
    hue = np.mod(np.arctan2(vectors[..., 1], vectors[..., 0]) / (2.0 * np.pi), 1.0)
    hsv = np.stack(
        [hue, np.ones_like(hue), np.minimum(magnitude / scale, 1.0)], axis=-1
    )
    return ImageGrid(hsv_to_rgb(hsv))


def render_scalar(field: GridLike) -> ImageGrid:
    """Affinely rescale [min, max] to [0, 1]; a constant field maps to 0."""
    values = as_array(field)
    if values.shape[2] != 1:
        raise GridError(f"render_scalar needs 1 channel, got {values.shape[2]}")
    low, high = float(values.min()), float(values.max())
    if high <= low:
        return ImageGrid(np.zeros_like(values))
    return ImageGrid((values - low) / (high - low))


def render_difference(u: GridLike, v: GridLike, limit: float = 0.35) -> ImageGrid:
    """Map the signed difference u - v from [-limit, limit] to [0, 1]."""
    difference = as_array(u) - as_array(v)
    return ImageGrid(np.clip(0.5 + difference / (2.0 * limit), 0.0, 1.0))


def channel_magnitude(u: GridLike) -> np.ndarray:
    """Pointwise Euclidean norm over channels, shape (N, M, 1)."""
    values = as_array(u)
    return np.sqrt(np.sum(values * values, axis=-1, keepdims=True))
