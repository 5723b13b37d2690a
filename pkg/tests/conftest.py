"""Shared fixtures for the metaspline test suite."""

import numpy as np
import pytest

from metaspline.algorithms.energy import SplineState
from metaspline.config import SolverConfig
from metaspline.image_core import boundary_mask, identity_map, reset_boundary


def make_random_state(rng, height=6, width=6, K=3, channels=1, amplitude=0.02):
    """Random images and slacks, deformations near the identity."""
    identity = identity_map(height, width)
    return SplineState(
        images=[rng.random((height, width, channels)) for _ in range(K + 1)],
        slacks=[0.5 * rng.standard_normal((height, width, channels)) for _ in range(K)],
        deformations=[
            reset_boundary(identity + amplitude * rng.standard_normal((height, width, 2)))
            for _ in range(K)
        ],
    )


def relative_error(actual, expected):
    return float(np.linalg.norm(actual - expected) / np.linalg.norm(expected))


def interior(array):
    """Entries at the interior grid nodes."""
    return array[~boundary_mask(*array.shape[:2])]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def random_state(rng):
    def factory(**kwargs):
        return make_random_state(rng, **kwargs)

    return factory


@pytest.fixture
def gradient_config():
    """Unit-scale weights used by the gradient consistency checks."""
    return SolverConfig(delta=0.1, sigma=0.1, theta=0.1, time_steps=3, fixed_indices=(0, 3))
