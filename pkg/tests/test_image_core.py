"""Tests for metaspline.image_core."""

import numpy as np
import pytest
from PIL import Image

from metaspline.image_core import (
    DeformationField,
    DimensionMismatchError,
    GridError,
    ImageFormatError,
    ImageGrid,
    channel_magnitude,
    identity_map,
    load_image,
    lp_norm,
    render_difference,
    render_flow,
    render_scalar,
    require_same_shape,
    reset_boundary,
    save_image,
    squared_l2,
)


# ADC-IMPLEMENTS: <metaspline-datamodel-01>
class TestImageGrid:
    """Tests for the grid containers."""

    def test_two_dimensional_input_gets_a_channel_axis(self):
        """A plain (N, M) array becomes a single-channel grid."""
        grid = ImageGrid(np.zeros((4, 5)))
        assert grid.values.shape == (4, 5, 1)
        assert (grid.width, grid.height, grid.channels) == (5, 4, 1)

    def test_spacing_is_normalized(self):
        """Spacing is 1/(M-1) along x and 1/(N-1) along y."""
        grid = ImageGrid(np.zeros((5, 9)))
        assert grid.spacing == pytest.approx((1.0 / 8.0, 1.0 / 4.0))

    def test_too_small_grid_rejected(self):
        """Grids below 3x3 are rejected."""
        with pytest.raises(GridError):
            ImageGrid(np.zeros((2, 5)))

    def test_values_are_read_only(self):
        """Stored values cannot be modified in place."""
        grid = ImageGrid(np.zeros((3, 3)))
        with pytest.raises(ValueError):
            grid.values[0, 0, 0] = 1.0

    def test_deformation_needs_two_channels(self):
        """A deformation field has exactly two components."""
        with pytest.raises(GridError):
            DeformationField(np.zeros((4, 4, 3)))

    def test_identity_deformation(self):
        """The identity maps every node onto its own normalized coordinates."""
        phi = DeformationField.identity(3, 5)
        assert phi.values[0, 4].tolist() == [1.0, 0.0]
        assert phi.values[2, 0].tolist() == [0.0, 1.0]
        assert phi.values[1, 2].tolist() == [0.5, 0.5]
        assert phi.is_boundary_identity()
        assert np.all(phi.displacement() == 0.0)

    def test_reset_boundary(self, rng):
        """Boundary nodes return to the identity, interior nodes are kept."""
        identity = identity_map(5, 6)
        phi = identity + 0.1 * rng.standard_normal((5, 6, 2))
        reset = reset_boundary(phi)
        assert DeformationField(reset).is_boundary_identity()
        assert np.array_equal(reset[1:-1, 1:-1], phi[1:-1, 1:-1])

    def test_require_same_shape(self):
        """Mismatched grids raise DimensionMismatchError."""
        with pytest.raises(DimensionMismatchError):
            require_same_shape(np.zeros((4, 4, 1)), np.zeros((4, 5, 1)))
        require_same_shape(np.zeros((4, 4, 1)), np.zeros((4, 4, 2)), channels=False)


# ADC-IMPLEMENTS: <metaspline-feature-01>
class TestNorms:
    """Tests for the averaged discrete norms."""

    def test_constant_image(self):
        """A constant 1 image has norm 1 for every p."""
        ones = np.ones((4, 4, 1))
        for p in (1, 2, 3.5):
            assert lp_norm(ones, p) == pytest.approx(1.0)

    def test_zero_image(self):
        """The zero image has norm 0."""
        assert lp_norm(np.zeros((3, 3)), 2) == 0.0

    def test_single_pixel(self):
        """One pixel equal to 3 on a 3x3 grid gives (9/9)^(1/2) = 1."""
        u = np.zeros((3, 3))
        u[1, 1] = 3.0
        assert lp_norm(u, 2) == pytest.approx(1.0)

    def test_channels_enter_the_pointwise_norm(self):
        """Two channels (3, 4) have pointwise 2-norm 5."""
        u = np.zeros((3, 3, 2))
        u[..., 0], u[..., 1] = 3.0, 4.0
        assert lp_norm(u, 2) == pytest.approx(5.0)
        assert lp_norm(u, 1) == pytest.approx(7.0)

    def test_homogeneity_and_triangle_inequality(self, rng):
        """Norms scale with |alpha| and satisfy the triangle inequality."""
        for _ in range(10):
            u = rng.standard_normal((5, 4, 2))
            v = rng.standard_normal((5, 4, 2))
            alpha = rng.standard_normal()
            for p in (1, 2, 3):
                assert lp_norm(alpha * u, p) == pytest.approx(abs(alpha) * lp_norm(u, p))
                assert lp_norm(u + v, p) <= lp_norm(u, p) + lp_norm(v, p) + 1e-12

    def test_invalid_p(self):
        """p below 1 is rejected."""
        with pytest.raises(ValueError):
            lp_norm(np.ones((3, 3)), 0.5)

    def test_non_finite_values(self):
        """NaN values signal corrupted data."""
        u = np.ones((3, 3))
        u[0, 0] = np.nan
        with pytest.raises(GridError):
            lp_norm(u, 2)

    def test_squared_l2_matches_lp_norm(self, rng):
        """squared_l2 is the square of the L^2 norm."""
        u = rng.standard_normal((4, 6, 3))
        assert squared_l2(u) == pytest.approx(lp_norm(u, 2) ** 2)


# ADC-IMPLEMENTS: <metaspline-feature-02>
class TestImageFiles:
    """Tests for load_image and save_image."""

    def test_eight_bit_round_trip(self, tmp_path, rng):
        """Saved then loaded values agree within 1/255."""
        u = rng.random((6, 7, 1))
        path = tmp_path / "u.png"
        save_image(u, path)
        loaded = load_image(path)
        assert loaded.values.shape == (6, 7, 1)
        assert np.max(np.abs(loaded.values - u)) <= 0.5 / 255.0 + 1e-12

    def test_quantized_round_trip_is_idempotent(self, tmp_path, rng):
        """A second save/load cycle changes nothing."""
        path = tmp_path / "u.png"
        save_image(rng.random((5, 5, 3)), path)
        first = load_image(path)
        save_image(first, path)
        assert np.array_equal(load_image(path).values, first.values)

    def test_rgb_image(self, tmp_path, rng):
        """RGB files load with three channels."""
        path = tmp_path / "rgb.png"
        save_image(rng.random((4, 4, 3)), path)
        assert load_image(path).channels == 3

    def test_values_are_clamped(self, tmp_path):
        """Values above 1 are stored as 1."""
        path = tmp_path / "bright.png"
        save_image(np.full((3, 3), 1.3), path)
        assert np.all(load_image(path).values == 1.0)

    def test_sixteen_bit_png(self, tmp_path):
        """16-bit samples map linearly onto [0, 1]."""
        raw = np.array([[0, 65535, 0], [32768, 0, 65535], [0, 0, 0]], dtype=np.uint16)
        path = tmp_path / "deep.png"
        Image.fromarray(raw).save(path)
        loaded = load_image(path)
        assert loaded.values[0, 1, 0] == 1.0
        assert loaded.values[1, 0, 0] == pytest.approx(32768 / 65535)

    def test_pgm(self, tmp_path):
        """Grayscale PGM files are supported for reading and writing."""
        path = tmp_path / "gray.pgm"
        u = np.linspace(0.0, 1.0, 16).reshape(4, 4)
        save_image(u, path)
        assert np.max(np.abs(load_image(path).values[..., 0] - u)) <= 0.5 / 255.0 + 1e-12

    def test_alpha_channel_rejected(self, tmp_path):
        """Files with an alpha channel are an explicit format error."""
        path = tmp_path / "rgba.png"
        Image.new("RGBA", (4, 4)).save(path)
        with pytest.raises(ImageFormatError):
            load_image(path)

    def test_missing_file(self, tmp_path):
        """A missing file names its path."""
        with pytest.raises(FileNotFoundError, match="nope.png"):
            load_image(tmp_path / "nope.png")

    def test_saving_two_channels_rejected(self, tmp_path):
        """Only 1- and 3-channel images can be written."""
        with pytest.raises(ImageFormatError):
            save_image(np.zeros((3, 3, 2)), tmp_path / "x.png")


# ADC-IMPLEMENTS: <metaspline-feature-03>
class TestRendering:
    """Tests for the diagnostic renderings."""

    def test_zero_flow_is_black(self):
        """Zero vectors have zero intensity."""
        rendered = render_flow(np.zeros((4, 4, 2)), 1.0)
        assert rendered.channels == 3
        assert np.all(rendered.values == 0.0)

    def test_uniform_flow(self):
        """A uniform (+scale, 0) field is a single saturated hue at full intensity."""
        rendered = render_flow(np.stack([np.full((3, 3), 2.0), np.zeros((3, 3))], axis=-1), 2.0)
        assert np.allclose(rendered.values, [1.0, 0.0, 0.0])

    def test_half_magnitude_gives_half_value(self):
        """|v| = scale/2 maps to value 0.5."""
        field = np.zeros((3, 3, 2))
        field[1, 1, 1] = 0.5
        rendered = render_flow(field, 1.0)
        assert np.max(rendered.values[1, 1]) == pytest.approx(0.5)

    def test_hue_invariant_under_positive_scaling(self, rng):
        """Scaling the field keeps the color direction."""
        field = rng.standard_normal((4, 4, 2))
        scale = 2.0 * float(np.max(channel_magnitude(field)))
        first = render_flow(field, scale).values
        second = render_flow(0.5 * field, scale).values
        assert np.allclose(2.0 * second, first)

    def test_invalid_scale(self):
        """scale must be positive."""
        with pytest.raises(ValueError):
            render_flow(np.zeros((3, 3, 2)), 0.0)

    def test_render_scalar(self):
        """[min, max] maps affinely onto [0, 1]; constants map to 0."""
        field = np.array([[-1.0, 0.0, 1.0]] * 3)
        assert render_scalar(field).values[0, :, 0].tolist() == [0.0, 0.5, 1.0]
        two_valued = np.array([[0.0, 2.0, 0.0]] * 3)
        assert sorted(set(render_scalar(two_valued).values.ravel())) == [0.0, 1.0]
        assert np.all(render_scalar(np.full((3, 3), 7.0)).values == 0.0)

    def test_render_difference(self):
        """Equal images map to mid gray, a difference of +limit to white."""
        u = np.zeros((3, 3))
        assert np.all(render_difference(u, u).values == 0.5)
        assert np.all(render_difference(u + 0.35, u).values == 1.0)

    def test_channel_magnitude(self):
        """Pointwise Euclidean norm over channels."""
        u = np.zeros((3, 3, 2))
        u[..., 0], u[..., 1] = 3.0, 4.0
        assert np.all(channel_magnitude(u) == 5.0)
