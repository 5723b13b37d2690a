"""Tests for the reference implementations in metaspline.validation."""

import numpy as np
import pytest
from scipy.interpolate import CubicSpline

from metaspline.algorithms.energy import SplineState
from metaspline.config import SolverConfig
from metaspline.validation import (
    adjoint_check,
    brute_force_prox_pixel,
    dense_natural_spline,
    fd_gradient,
    naive_total_energy,
)


# ADC-IMPLEMENTS: <metaspline-oracle-validation-01>
class TestFdGradient:
    """Tests for central differences."""

    def test_quadratic(self, rng):
        """The gradient of 0.5 |x|^2 is x."""
        x = rng.standard_normal((3, 4))
        assert np.allclose(fd_gradient(lambda v: 0.5 * float(np.sum(v * v)), x), x, atol=1e-8)

    def test_input_untouched(self):
        """The evaluation point is restored."""
        x = np.array([1.0, 2.0])
        fd_gradient(lambda v: float(np.sum(v)), x)
        assert x.tolist() == [1.0, 2.0]

    def test_invalid_step(self):
        """h must be positive."""
        with pytest.raises(ValueError):
            fd_gradient(lambda v: 0.0, np.zeros(2), h=0.0)

    def test_non_finite(self):
        """Non-finite values are reported."""
        with pytest.raises(FloatingPointError):
            fd_gradient(lambda v: float("nan"), np.zeros(2))


class TestAdjointCheck:
    """Tests for the adjoint identity check."""

    def test_matrix_transpose(self, rng):
        """A matrix and its transpose pass."""
        A = rng.standard_normal((5, 3))
        assert adjoint_check(lambda u: A @ u, lambda v: A.T @ v, (3,), (5,)) <= 1e-14

    def test_wrong_adjoint(self, rng):
        """A non-adjoint pair fails clearly."""
        A = rng.standard_normal((4, 4))
        assert adjoint_check(lambda u: A @ u, lambda v: A @ v, (4,), (4,)) > 1e-3


class TestBruteForceProx:
    """Tests for the per-pixel brute-force minimizer."""

    def test_no_terms(self):
        """Without data terms the trial point is the minimizer."""
        result = brute_force_prox_pixel(1.0, [0.3, 0.7], [0.5, 0.5], [])
        assert np.allclose(result, [0.3, 0.7], atol=1e-9)

    def test_closed_form(self):
        """One term with Lambda = I gives (tau trial + w (ref - r)) / (tau + w)."""
        terms = [(1.0, np.array([0.2, -0.4]), np.eye(2))]
        result = brute_force_prox_pixel(3.0, [0.1, 0.2], [0.5, 0.5], terms)
        expected = (3.0 * np.array([0.1, 0.2]) + (np.array([0.5, 0.5]) - [0.2, -0.4])) / 4.0
        assert np.allclose(result, expected, atol=1e-8)


class TestDenseNaturalSpline:
    """Tests for the dense natural spline."""

    def test_matches_scipy(self):
        """Agreement with scipy's natural CubicSpline on uneven knots."""
        times = [0.0, 1.0, 2.5, 4.0]
        values = [0.0, 1.0, -0.5, 2.0]
        eval_times = np.linspace(0.0, 4.0, 21)
        expected = CubicSpline(times, values, bc_type="natural")(eval_times)
        assert np.allclose(dense_natural_spline(times, values, eval_times), expected, atol=1e-12)


class TestNaiveTotalEnergy:
    """Tests for the term-by-term energy."""

    def test_constant_path(self):
        """A constant image path with identity deformations has zero energy."""
        state = SplineState.identity([np.full((4, 4, 1), 0.5)] * 3)
        cfg = SolverConfig(time_steps=2)
        assert naive_total_energy(state, cfg) == pytest.approx(0.0, abs=1e-20)

    def test_slack_norm_only(self):
        """With a consistent path only sigma/(delta K) ||z||^2 remains."""
        cfg = SolverConfig(delta=0.5, sigma=2.0, theta=0.1, time_steps=2, mode="geodesic")
        state = SplineState.identity([np.zeros((4, 4, 1)), np.full((4, 4, 1), 0.5), np.ones((4, 4, 1))])
        state.slacks = [np.ones((4, 4, 1)), np.ones((4, 4, 1))]
        assert naive_total_energy(state, cfg) == pytest.approx(2 * 2.0 / (0.5 * 2), rel=1e-10)

    def test_mismatched_K(self):
        """The state must match the configured K."""
        state = SplineState.identity([np.zeros((4, 4, 1))] * 3)
        with pytest.raises(ValueError):
            naive_total_energy(state, SolverConfig(time_steps=3))
