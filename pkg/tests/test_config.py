"""Tests for metaspline.config module."""

import json
import tempfile
from pathlib import Path
from unittest.mock import mock_open, patch

import pytest

from metaspline.config import (
    EXPERIMENT_PRESETS,
    ConfigError,
    KeyFrameEntry,
    RunConfig,
    SolverConfig,
)


# ADC-IMPLEMENTS: <metaspline-datamodel-04>
class TestSolverConfig:
    """Tests for the SolverConfig class."""

    def test_defaults(self):
        """Test the published default weights and schedule."""
        config = SolverConfig.with_defaults()
        assert config.time_steps == 8
        assert config.levels == 5
        assert config.iterations == 250
        assert config.beta == pytest.approx(2 ** -0.5)
        assert config.mode == "spline"
        assert config.boundary == "natural"

    def test_aliases(self):
        """Test that K, L and I map onto their fields."""
        config = SolverConfig().with_updates(K=4, L=2, I=10)
        assert (config.time_steps, config.levels, config.iterations) == (4, 2, 10)

    def test_unknown_key_is_ignored(self, caplog):
        """Test that unknown keys are logged and skipped."""
        config = SolverConfig().with_updates(gamma=3.0)
        assert config == SolverConfig()
        assert "Unknown configuration key: gamma" in caplog.text

    def test_with_updates_is_functional(self):
        """Test with_updates leaves the original untouched."""
        config = SolverConfig()
        updated = config.with_updates(delta=0.1)
        assert config.delta == 5e-3
        assert updated.delta == 0.1

    def test_fixed_indices_become_ints(self):
        """Test fixed_indices are normalized to an int tuple."""
        assert SolverConfig().with_updates(fixed_indices=[0, "4"]).fixed_indices == (0, 4)

    @pytest.mark.parametrize("name", sorted(EXPERIMENT_PRESETS))
    def test_presets(self, name):
        """Test every preset carries its own weights."""
        preset = EXPERIMENT_PRESETS[name]
        config = SolverConfig.from_preset(name)
        assert config.time_steps == preset["K"]
        assert (config.delta, config.sigma, config.theta) == (
            preset["delta"],
            preset["sigma"],
            preset["theta"],
        )

    def test_unknown_preset(self):
        """Test an unknown preset name is a ConfigError."""
        with pytest.raises(ConfigError, match="Unknown preset"):
            SolverConfig.from_preset("sunsets")

    def test_validate_accepts_consistent_config(self):
        """Test validate returns the config itself."""
        config = SolverConfig(time_steps=4, fixed_indices=(0, 2, 4))
        assert config.validate() is config

    @pytest.mark.parametrize(
        "updates",
        [
            {"delta": 0.0},
            {"theta": -1.0},
            {"time_steps": 1, "fixed_indices": (0, 1)},
            {"iterations": 0},
            {"beta": 1.0},
            {"mode": "linear"},
            {"boundary": "clamped"},
            {"fixed_indices": (0,)},
            {"fixed_indices": (4, 0)},
            {"fixed_indices": (0, 9)},
            {"boundary": "hermite", "fixed_indices": (0, 4)},
            {"boundary": "periodic", "fixed_indices": (1, 8)},
        ],
    )
    def test_validate_rejects(self, updates):
        """Test every violated invariant raises ConfigError."""
        config = SolverConfig(fixed_indices=(0, 8)).with_updates(**updates)
        with pytest.raises(ConfigError):
            config.validate()

    def test_to_dict(self):
        """Test to_dict uses the file spelling of K."""
        result = SolverConfig(time_steps=6, fixed_indices=(0, 6)).to_dict()
        assert result["K"] == 6
        assert "time_steps" not in result
        assert result["fixed_indices"] == [0, 6]


# ADC-IMPLEMENTS: <metaspline-datamodel-05>
class TestKeyFrameEntry:
    """Tests for the IDX:PATH spelling."""

    def test_parse(self):
        """Test a valid entry; only the first colon separates."""
        entry = KeyFrameEntry.parse("4:frames/c:d.png")
        assert entry == KeyFrameEntry(index=4, path="frames/c:d.png")

    @pytest.mark.parametrize("text", ["frame.png", "3:", "x:frame.png"])
    def test_parse_errors(self, text):
        """Test malformed entries raise ConfigError."""
        with pytest.raises(ConfigError):
            KeyFrameEntry.parse(text)


class TestRunConfig:
    """Tests for the RunConfig class."""

    def test_from_dict_with_preset(self):
        """Test file values are applied over the named preset."""
        run = RunConfig.from_dict({"preset": "faces", "delta": 0.5, "out_dir": "out"})
        assert run.solver.time_steps == 16
        assert run.solver.delta == 0.5
        assert run.out_dir == "out"
        assert run.experiment == "faces"

    def test_from_dict_keyframes(self):
        """Test key frames are read as index/path records."""
        run = RunConfig.from_dict({"keyframes": [{"index": 0, "path": "a.png"}, {"index": 8, "path": "b.png"}]})
        assert run.keyframes == (KeyFrameEntry(0, "a.png"), KeyFrameEntry(8, "b.png"))

    def test_from_file_json(self):
        """Test reading a JSON run file."""
        with tempfile.TemporaryDirectory() as tmpdir:
            path = Path(tmpdir) / "run.json"
            path.write_text(json.dumps({"K": 4, "mode": "geodesic"}), encoding="utf-8")
            run = RunConfig.from_file(path)
        assert run.solver.time_steps == 4
        assert run.solver.mode == "geodesic"

    def test_from_file_yaml(self, tmp_path):
        """Test reading a YAML run file."""
        path = tmp_path / "run.yaml"
        path.write_text("K: 3\nlevels: 2\nboundary: periodic\n", encoding="utf-8")
        run = RunConfig.from_file(path)
        assert (run.solver.time_steps, run.solver.levels) == (3, 2)
        assert run.solver.boundary == "periodic"

    def test_from_file_preset_is_base(self, tmp_path):
        """Test a preset argument sits below the file values."""
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"theta": 0.25}), encoding="utf-8")
        run = RunConfig.from_file(path, preset="cells")
        assert run.solver.theta == 0.25
        assert run.solver.sigma == EXPERIMENT_PRESETS["cells"]["sigma"]

    def test_from_file_own_preset_wins(self, tmp_path):
        """Test a preset named in the file takes precedence."""
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"preset": "letters"}), encoding="utf-8")
        run = RunConfig.from_file(path, preset="cells")
        assert run.solver.delta == EXPERIMENT_PRESETS["letters"]["delta"]

    def test_from_file_missing(self, tmp_path):
        """Test a missing file is a ConfigError naming the path."""
        with pytest.raises(ConfigError, match="missing.json"):
            RunConfig.from_file(tmp_path / "missing.json")

    def test_from_file_not_a_mapping(self, tmp_path):
        """Test a YAML list is rejected."""
        path = tmp_path / "run.yml"
        path.write_text("- 1\n- 2\n", encoding="utf-8")
        with pytest.raises(ConfigError, match="mapping"):
            RunConfig.from_file(path)

    def test_with_updates_routes_fields(self):
        """Test run fields and solver fields are updated separately."""
        run = RunConfig().with_updates(out_dir="results", K=5, dump_levels=True)
        assert run.out_dir == "results"
        assert run.dump_levels is True
        assert run.solver.time_steps == 5

    def test_save_and_reload(self, tmp_path):
        """Test a saved run file reproduces the configuration."""
        run = RunConfig(
            solver=SolverConfig(time_steps=4, delta=0.2),
            keyframes=(KeyFrameEntry(0, "a.png"), KeyFrameEntry(4, "b.png")),
            out_dir="out",
            experiment="gaussians",
        )
        path = tmp_path / "run.json"
        assert run.save_to_file(path) is True
        assert RunConfig.from_file(path) == run

    def test_save_to_file_uses_json(self):
        """Test save_to_file writes indented JSON."""
        run = RunConfig()
        custom_path = Path("/custom/path/run.json")

        with patch("builtins.open", mock_open()) as mock_file:
            with patch("json.dump") as mock_dump:
                assert run.save_to_file(custom_path) is True

                mock_file.assert_called_once_with(custom_path, "w", encoding="utf-8")
                mock_dump.assert_called_once_with(
                    run.to_dict(), mock_file().__enter__(), indent=2
                )

    def test_save_to_file_error_handling(self):
        """Test save_to_file reports write errors instead of raising."""
        with patch("builtins.open", side_effect=IOError("Write error")):
            assert RunConfig().save_to_file(Path("run.json")) is False
