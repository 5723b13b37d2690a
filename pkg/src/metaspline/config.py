import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, Tuple

import yaml

from .logging_config import logger

MODES = ("spline", "geodesic")
BOUNDARY_CONDITIONS = ("natural", "periodic", "hermite")


class ConfigError(ValueError):
    """Raised for solver or run configurations that violate their invariants."""


# Parameter sets of the published examples; data for faces/letters/cells is user-supplied
EXPERIMENT_PRESETS: Dict[str, Dict[str, Any]] = {
    "gaussians": {"size": 64, "K": 8, "delta": 5e-3, "sigma": 1.0, "theta": 5e-5},
    "circle_square": {"size": 64, "K": 8, "delta": 5e-3, "sigma": 1.0, "theta": 5e-4},
    "faces": {"size": 128, "K": 16, "delta": 2e-2, "sigma": 2.0, "theta": 8e-4},
    "letters": {"size": 128, "K": 16, "delta": 1e-3, "sigma": 2.0, "theta": 2e-5},
    "color_letters": {"size": 128, "K": 16, "delta": 8e-3, "sigma": 2.5, "theta": 2e-4},
    "cells": {"size": 128, "K": 8, "delta": 4e-2, "sigma": 2.5, "theta": 1.6e-4},
}

# File/CLI spelling -> dataclass field
_ALIASES = {"K": "time_steps", "L": "levels", "I": "iterations"}


# ADC-IMPLEMENTS: <metaspline-datamodel-04>
@dataclass(frozen=True)
class SolverConfig:
    """Model weights and iPALM schedule; complete with defaults, no Optional fields."""

    delta: float = 5e-3
    sigma: float = 1.0
    theta: float = 5e-5
    time_steps: int = 8
    levels: int = 5
    iterations: int = 250
    beta: float = 1.0 / math.sqrt(2.0)
    mode: str = "spline"
    boundary: str = "natural"
    det_floor: float = 1e-6
    fixed_indices: Tuple[int, ...] = ()
    initial_lipschitz: float = 1.0
    max_det_halvings: int = 20

    @property
    def geodesic(self) -> bool:
        return self.mode == "geodesic"

    @classmethod
    def with_defaults(cls) -> "SolverConfig":
        """Factory method to create config with the published defaults."""
        return cls()

    @classmethod
    def from_preset(cls, name: str) -> "SolverConfig":
        if name not in EXPERIMENT_PRESETS:
            raise ConfigError(
                f"Unknown preset '{name}'; choose from {', '.join(EXPERIMENT_PRESETS)}"
            )
        preset = {k: v for k, v in EXPERIMENT_PRESETS[name].items() if k != "size"}
        return cls().with_updates(**preset)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SolverConfig":
        return cls().with_updates(**data)

    def with_updates(self, **updates) -> "SolverConfig":
        """Functional update - returns new config with updates applied."""
        known = {f.name for f in fields(self)}
        changes = {}
        for key, value in updates.items():
            name = _ALIASES.get(key, key)
            if name not in known:
                logger.warning(f"Unknown configuration key: {key}")
                continue
            if name == "fixed_indices":
                value = tuple(int(i) for i in value)
            changes[name] = value
        return replace(self, **changes)

    def validate(self) -> "SolverConfig":
        """Raise ConfigError for violated invariants; returns self for chaining."""
        for name in ("delta", "sigma", "theta", "det_floor", "initial_lipschitz"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.time_steps < 2:
            raise ConfigError(f"K must be at least 2, got {self.time_steps}")
        if self.levels < 1 or self.iterations < 1:
            raise ConfigError("levels and iterations must be at least 1")
        if not 0.0 <= self.beta < 1.0:
            raise ConfigError(f"beta must lie in [0, 1), got {self.beta}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got '{self.mode}'")
        if self.boundary not in BOUNDARY_CONDITIONS:
            raise ConfigError(
                f"boundary must be one of {BOUNDARY_CONDITIONS}, got '{self.boundary}'"
            )

        indices = self.fixed_indices
        if len(indices) < 2:
            raise ConfigError("At least two key frames are required")
        if list(indices) != sorted(set(indices)):
            raise ConfigError(f"Key-frame indices must be strictly increasing: {indices}")
        if indices[0] < 0 or indices[-1] > self.time_steps:
            raise ConfigError(f"Key-frame indices must lie in 0..{self.time_steps}")
        if self.boundary == "hermite" and (indices[0] != 0 or indices[-1] != self.time_steps):
            raise ConfigError("Hermite boundary conditions need key frames at 0 and K")
        if self.boundary == "periodic" and indices[0] != 0:
            raise ConfigError("Periodic boundary conditions need a key frame at 0")
        return self

    def to_dict(self) -> Dict[str, Any]:
        """Convert configuration to dictionary (file spelling of K)."""
        data = asdict(self)
        data["K"] = data.pop("time_steps")
        data["fixed_indices"] = list(self.fixed_indices)
        return data


# ADC-IMPLEMENTS: <metaspline-datamodel-05>
@dataclass(frozen=True)
class KeyFrameEntry:
    index: int
    path: str

    @classmethod
    def parse(cls, text: str) -> "KeyFrameEntry":
        """Parse the ``IDX:PATH`` command-line spelling."""
        index, sep, path = text.partition(":")
        if not sep or not path:
            raise ConfigError(f"Key frame must be given as IDX:PATH, got '{text}'")
        try:
            return cls(index=int(index), path=path)
        except ValueError:
            raise ConfigError(f"Key-frame index is not an integer: '{index}'") from None


# ADC-IMPLEMENTS: <metaspline-datamodel-05>
@dataclass(frozen=True)
class RunConfig:
    """Everything one CLI run needs: solver settings, inputs and output options."""

    solver: SolverConfig = field(default_factory=SolverConfig)
    keyframes: Tuple[KeyFrameEntry, ...] = ()
    out_dir: str = "metaspline_out"
    dump_levels: bool = False
    hermite_path: str = ""
    experiment: str = ""

    @classmethod
    def from_file(cls, config_path: Path, preset: str = "") -> "RunConfig":
        """Read a flat JSON or YAML run file; solver keys live at the top level.

        ``preset`` is the base the file values are applied over, unless the
        file names its own preset.
        """
        config_path = Path(config_path)
        if not config_path.exists():
            raise ConfigError(f"Configuration file not found: {config_path}")

        with open(config_path, "r", encoding="utf-8") as f:
            if config_path.suffix.lower() in (".yaml", ".yml"):
                data = yaml.safe_load(f) or {}
            else:
                data = json.load(f)
        if not isinstance(data, dict):
            raise ConfigError(f"Configuration in {config_path} must be a mapping")
        if preset:
            data.setdefault("preset", preset)
        logger.info(f"Loaded run configuration from {config_path}")
        return cls.from_dict(data)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunConfig":
        data = dict(data)
        preset = data.pop("preset", "")
        experiment = data.pop("experiment", preset)
        keyframes = tuple(
            KeyFrameEntry(index=int(entry["index"]), path=str(entry["path"]))
            for entry in data.pop("keyframes", [])
        )
        run_keys = {
            key: data.pop(key)
            for key in ("out_dir", "dump_levels", "hermite_path")
            if key in data
        }
        solver = SolverConfig.from_preset(preset) if preset else SolverConfig()
        return cls(
            solver=solver.with_updates(**data),
            keyframes=keyframes,
            experiment=experiment,
            **run_keys,
        )

    def with_updates(self, **updates) -> "RunConfig":
        """Apply CLI overrides; solver keys are routed to the SolverConfig."""
        run_fields = {"keyframes", "out_dir", "dump_levels", "hermite_path", "experiment"}
        run_changes = {k: v for k, v in updates.items() if k in run_fields}
        solver_changes = {k: v for k, v in updates.items() if k not in run_fields}
        return replace(
            self, solver=self.solver.with_updates(**solver_changes), **run_changes
        )

    def to_dict(self) -> Dict[str, Any]:
        data = self.solver.to_dict()
        data["keyframes"] = [
            {"index": entry.index, "path": entry.path} for entry in self.keyframes
        ]
        data["out_dir"] = self.out_dir
        data["dump_levels"] = self.dump_levels
        data["hermite_path"] = self.hermite_path
        data["experiment"] = self.experiment
        return data

    def save_to_file(self, config_path: Path) -> bool:
        """Save configuration to file."""
        try:
            with open(config_path, "w", encoding="utf-8") as f:
                json.dump(self.to_dict(), f, indent=2)
            logger.info(f"Configuration saved to {config_path}")
            return True
        except OSError as e:
            logger.error(f"Error saving config to {config_path}: {str(e)}")
            return False
