"""Run configuration: loading, flattening to dotted keys, validation and overrides."""

import math
from collections.abc import Iterable
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

import yaml

from .continuation import StepConfig


class ConfigValidationError(Exception):
    """Raised when a run configuration has invalid values."""

    def __init__(self, errors: list[str]):
        self.errors = errors
        message = "Invalid configuration:\n" + "\n".join(f"  - {e}" for e in errors)
        super().__init__(message)


# Schema definition for validation, keyed by section.key
CONFIG_SCHEMA: dict[str, dict[str, Any]] = {
    "system.name": {"type": str, "choices": ["sh23", "linear-test", "nf-zero"]},
    "system.b": {"type": float},
    "system.mu": {"type": float},
    "system.mu_window": {"type": list, "item_type": float, "length": 2},
    "continuation.newton_tol": {"type": float, "min": 0.0, "exclusive_min": True},
    "continuation.max_halvings": {"type": int, "min": 0, "max": 30},
    "continuation.max_iterations": {"type": int, "min": 1, "max": 100},
    "continuation.mesh_intervals": {"type": int, "min": 4, "max": 4096},
    "continuation.degree": {"type": int, "min": 1, "max": 7},
    "continuation.step": {"type": float, "min": 0.0, "exclusive_min": True},
    "continuation.min_step": {"type": float, "min": 0.0, "exclusive_min": True},
    "continuation.max_step": {"type": float, "min": 0.0, "exclusive_min": True},
    "continuation.grow": {"type": float, "min": 1.0},
    "continuation.max_points": {"type": int, "min": 2, "max": 100000},
    "continuation.closure_tol": {"type": float, "min": 0.0, "exclusive_min": True},
    "wavetrain.varpi": {"type": float, "min": 0.0, "exclusive_min": True},
    "wavetrain.pin_index": {"type": int, "min": 0, "max": 3},
    "wavetrain.alpha_min": {"type": float, "min": 0.0, "exclusive_min": True},
    "wavetrain.cluster_tol": {"type": float, "min": 0.0, "exclusive_min": True},
    "wavetrain.monodromy_tol": {"type": float, "min": 0.0, "exclusive_min": True},
    "wavetrain.min_amplitude": {"type": float, "min": 0.0},
    "wavetrain.kappa_range": {
        "type": list,
        "item_type": float,
        "length": 2,
        "nullable": True,
    },
    "front.periods": {"type": float, "min": 1.0},
    "front.delta": {"type": float, "min": 0.0, "exclusive_min": True},
    "front.sigma_threshold": {"type": float, "min": 0.0},
    "front.phase_gap": {"type": float, "min": 0.0, "max": math.pi, "exclusive_min": True},
    "front.intervals": {"type": int, "min": 8, "max": 8192},
    "front.psi_guess": {"type": float},
    "topology.ell_star": {"type": int, "min": 0},
    "topology.n_min": {"type": int, "min": 0},
    "topology.n_max": {"type": int, "min": 0},
    "topology.s_min": {"type": float, "min": 0.0},
    "topology.s_max": {"type": float, "min": 0.0},
    "topology.samples_per_turn": {"type": int, "min": 4, "nullable": True},
    "localized.epsilon_fraction": {
        "type": float,
        "min": 0.0,
        "max": 1.0,
        "exclusive_min": True,
    },
    "localized.tail_periods": {"type": float, "min": 1.0},
    "localized.phi0": {"type": str, "choices": ["0", "pi", "both"]},
    "localized.L_budget": {"type": float, "min": 0.0, "nullable": True},
    "normal_form.model": {"type": str, "choices": ["zero", "kappa-drift", "wiggle"]},
    "normal_form.data": {"type": str, "choices": ["constant", "winding", "isola-loop", "fold"]},
    "normal_form.phi0": {"type": float},
    "normal_form.kappa0": {"type": float},
    "normal_form.mu": {"type": float},
    "normal_form.s": {"type": float, "min": 0.0},
    "normal_form.n": {"type": int, "min": 0},
    "normal_form.samples": {"type": int, "min": 4, "max": 4096},
    "normal_form.rtol": {"type": float, "min": 0.0, "exclusive_min": True},
    "output.directory": {"type": str},
    "output.seed": {"type": int, "min": 0},
    "output.verbose": {"type": bool},
}


def _type_name(expected: type) -> str:
    return "number" if expected is float else expected.__name__


def _matches(value: Any, expected: type) -> bool:
    if isinstance(value, bool):
        return expected is bool
    if expected is float:
        return isinstance(value, (int, float))
    return isinstance(value, expected)


def _coerce(key: str, value: Any) -> Any:
    """Turn numeric strings (and "pi") into floats where a number is expected.

    PyYAML reads exponent literals without a dot (``1e-3``) as strings.
    """
    schema = CONFIG_SCHEMA.get(key)
    if schema is None:
        return value
    if schema["type"] is float:
        return _coerce_number(value)
    if schema["type"] is str and isinstance(value, int) and not isinstance(value, bool):
        return str(value)
    if schema["type"] is list and schema.get("item_type") is float and isinstance(value, list):
        return [_coerce_number(v) for v in value]
    return value


def _coerce_number(value: Any) -> Any:
    if isinstance(value, str):
        if value.strip().lower() == "pi":
            return math.pi
        try:
            return float(value)
        except ValueError:
            return value
    return value


def flatten_config(data: dict[str, Any]) -> tuple[dict[str, Any], list[str]]:
    """Flatten ``{section: {key: value}}`` and ``{"section.key": value}`` forms.

    Returns the flat mapping and structural error messages.
    """
    flat: dict[str, Any] = {}
    errors: list[str] = []
    for key, value in data.items():
        key = str(key)
        if "." in key:
            flat[key] = value
        elif isinstance(value, dict):
            for inner, inner_value in value.items():
                flat[f"{key}.{inner}"] = inner_value
        else:
            errors.append(f"Config key '{key}' must be a section or a dotted section.key")
    return flat, errors


def validate_config_data(data: dict[str, Any]) -> list[str]:
    """Validate flat config data against the schema.

    Returns a list of error messages (empty if valid).
    """
    errors: list[str] = []

    # Check for unknown keys
    for key in data:
        if key not in CONFIG_SCHEMA:
            errors.append(f"Unknown config key: '{key}'")

    for key, schema in CONFIG_SCHEMA.items():
        if key not in data:
            continue

        value = data[key]

        # Handle nullable fields
        if value is None:
            if schema.get("nullable"):
                continue
            errors.append(f"'{key}' cannot be null")
            continue

        expected_type = schema["type"]
        if not _matches(value, expected_type):
            errors.append(
                f"'{key}' must be {_type_name(expected_type)}, got {type(value).__name__}"
            )
            continue

        if expected_type is list:
            if "length" in schema and len(value) != schema["length"]:
                errors.append(f"'{key}' must have {schema['length']} items, got {len(value)}")
            item_type = schema.get("item_type")
            for i, item in enumerate(value):
                if item_type is not None and not _matches(item, item_type):
                    errors.append(
                        f"'{key}[{i}]' must be {_type_name(item_type)}, got {type(item).__name__}"
                    )

        if "choices" in schema and value not in schema["choices"]:
            choices = ", ".join(str(c) for c in schema["choices"])
            errors.append(f"'{key}' must be one of {choices}, got '{value}'")

        # Range checks for numbers
        if expected_type in (int, float):
            if "min" in schema:
                exclusive = schema.get("exclusive_min", False)
                if value < schema["min"] or (exclusive and value == schema["min"]):
                    relation = ">" if exclusive else ">="
                    errors.append(f"'{key}' must be {relation} {schema['min']}, got {value}")
            if "max" in schema and value > schema["max"]:
                errors.append(f"'{key}' must be <= {schema['max']}, got {value}")

    return errors


def parse_override(text: str) -> tuple[str, Any]:
    """Split ``section.key=value``; the value is read as YAML."""
    key, sep, raw = text.partition("=")
    key = key.strip()
    if not sep or "." not in key:
        raise ConfigValidationError([f"Override '{text}' must look like section.key=value"])
    return key, yaml.safe_load(raw) if raw.strip() else None


def _yaml_scalar(value: Any) -> str:
    text = yaml.safe_dump(value, default_flow_style=True).strip()
    return text.removesuffix("...").strip()


@dataclass
class SystemConfig:
    name: str = "sh23"
    b: float = 1.8
    mu: float = 0.36
    mu_window: list[float] = field(default_factory=lambda: [0.2, 0.5])


@dataclass
class ContinuationConfig:
    newton_tol: float = 1e-10
    max_halvings: int = 8
    max_iterations: int = 10
    mesh_intervals: int = 64
    degree: int = 4
    step: float = 0.02
    min_step: float = 1e-8
    max_step: float = 0.2
    grow: float = 1.3
    max_points: int = 400
    closure_tol: float = 1e-6


@dataclass
class WavetrainConfig:
    varpi: float = 1.0
    pin_index: int = 0
    alpha_min: float = 1e-4
    cluster_tol: float = 1e-6
    monodromy_tol: float = 1e-12
    min_amplitude: float = 1e-3
    kappa_range: list[float] | None = None


@dataclass
class FrontConfig:
    periods: float = 6.0
    delta: float = 1e-3
    sigma_threshold: float = 1e-8
    phase_gap: float = math.pi / 2
    intervals: int = 128
    psi_guess: float = 0.0


@dataclass
class TopologyConfig:
    ell_star: int = 3
    n_min: int = 3
    n_max: int = 5
    s_min: float = 3.0
    s_max: float = 6.0
    samples_per_turn: int | None = None


@dataclass
class LocalizedConfig:
    epsilon_fraction: float = 0.1
    tail_periods: float = 6.0
    phi0: str = "both"
    L_budget: float | None = None


@dataclass
class NormalFormConfig:
    model: str = "wiggle"
    data: str = "winding"
    phi0: float = 0.0
    kappa0: float = 0.0
    mu: float = 0.0
    s: float = 0.25
    n: int = 3
    samples: int = 33
    rtol: float = 1e-12


@dataclass
class OutputConfig:
    directory: str = "results"
    seed: int = 0
    verbose: bool = False


SECTIONS = {
    "system": SystemConfig,
    "continuation": ContinuationConfig,
    "wavetrain": WavetrainConfig,
    "front": FrontConfig,
    "topology": TopologyConfig,
    "localized": LocalizedConfig,
    "normal_form": NormalFormConfig,
    "output": OutputConfig,
}


@dataclass
class RunConfig:
    """snakeloop run configuration."""

    system: SystemConfig = field(default_factory=SystemConfig)
    continuation: ContinuationConfig = field(default_factory=ContinuationConfig)
    wavetrain: WavetrainConfig = field(default_factory=WavetrainConfig)
    front: FrontConfig = field(default_factory=FrontConfig)
    topology: TopologyConfig = field(default_factory=TopologyConfig)
    localized: LocalizedConfig = field(default_factory=LocalizedConfig)
    normal_form: NormalFormConfig = field(default_factory=NormalFormConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    @classmethod
    def load(cls, path: Path | None = None, overrides: Iterable[str] = ()) -> "RunConfig":
        """Load a YAML config (defaults when ``path`` is None) and apply overrides.

        Raises:
            ConfigValidationError: If the config has unknown keys or invalid values
            yaml.YAMLError: If the YAML is malformed
        """
        data: dict[str, Any] = {}
        errors: list[str] = []
        if path is not None:
            with open(path, encoding="utf-8") as f:
                raw = yaml.safe_load(f) or {}
            if not isinstance(raw, dict):
                raise ConfigValidationError([f"{path} must contain a mapping"])
            data, errors = flatten_config(raw)
        for text in overrides:
            key, value = parse_override(text)
            data[key] = value
        return cls.from_flat(data, errors)

    @classmethod
    def from_flat(cls, data: dict[str, Any], errors: list[str] | None = None) -> "RunConfig":
        data = {key: _coerce(key, value) for key, value in data.items()}
        errors = list(errors or []) + validate_config_data(data)
        if errors:
            raise ConfigValidationError(errors)
        config = cls()
        for key, value in data.items():
            section, name = key.split(".", 1)
            if isinstance(value, int) and not isinstance(value, bool):
                if CONFIG_SCHEMA[key]["type"] is float:
                    value = float(value)
            setattr(getattr(config, section), name, value)
        cross = config.check()
        if cross:
            raise ConfigValidationError(cross)
        return config

    def check(self) -> list[str]:
        """Cross-field checks."""
        errors: list[str] = []
        c = self.continuation
        if not c.min_step <= c.step <= c.max_step:
            errors.append(
                "need continuation.min_step <= continuation.step <= continuation.max_step"
            )
        t = self.topology
        if t.n_min < t.ell_star:
            errors.append(f"topology.n_min ({t.n_min}) must be >= topology.ell_star ({t.ell_star})")
        if t.n_max < t.n_min:
            errors.append(f"topology.n_max ({t.n_max}) must be >= topology.n_min ({t.n_min})")
        if t.s_min < t.ell_star:
            errors.append(f"topology.s_min ({t.s_min}) must be >= topology.ell_star ({t.ell_star})")
        if t.s_max <= t.s_min:
            errors.append(f"topology.s_max ({t.s_max}) must be > topology.s_min ({t.s_min})")
        lo, hi = self.system.mu_window
        if hi <= lo:
            errors.append(f"system.mu_window must be increasing, got [{lo}, {hi}]")
        return errors

    def flat(self) -> dict[str, Any]:
        return {
            f"{section}.{f.name}": getattr(getattr(self, section), f.name)
            for section, kind in SECTIONS.items()
            for f in fields(kind)
        }

    def step_config(self, **changes: Any) -> StepConfig:
        c = self.continuation
        values: dict[str, Any] = {
            "step": c.step,
            "min_step": c.min_step,
            "max_step": c.max_step,
            "grow": c.grow,
            "max_points": c.max_points,
            "newton_tol": c.newton_tol,
            "max_iterations": c.max_iterations,
            "closure_tol": c.closure_tol,
            "verbose": self.output.verbose,
        }
        values.update(changes)
        return StepConfig(**values)

    @property
    def phi0_values(self) -> list[float]:
        return {"0": [0.0], "pi": [math.pi], "both": [0.0, math.pi]}[self.localized.phi0]

    @classmethod
    def generate_template(cls) -> str:
        """A commented YAML file listing every key at its default."""
        lines = [
            "# snakeloop run configuration",
            "# Every key may also be set with --set section.key=value",
            "",
        ]
        defaults = cls()
        for section, kind in SECTIONS.items():
            lines.append(f"{section}:")
            for f in fields(kind):
                value = getattr(getattr(defaults, section), f.name)
                lines.append(f"  {f.name}: {_yaml_scalar(value)}")
            lines.append("")
        return "\n".join(lines)
