"""Shared pytest fixtures for snakeloop tests."""

from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from snakeloop.artifacts import write_csv, write_json
from snakeloop.systems import ReversibleSystem, builtin_system
from snakeloop.wavetrain import PeriodicOrbit, find_wave_train


class CircleProfile:
    """Half profile (r cos θ, −r sin θ, 0, 0) of the linear-test wave train."""

    def __init__(self, radius: float = 1.0):
        self.radius = radius

    @property
    def interval(self) -> tuple[float, float]:
        return (0.0, np.pi)

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float)
        zero = np.zeros_like(theta)
        return np.array(
            [self.radius * np.cos(theta), -self.radius * np.sin(theta), zero, zero]
        )


@pytest.fixture
def sh23() -> ReversibleSystem:
    return builtin_system("sh23", b=1.8)


@pytest.fixture
def linear_system() -> ReversibleSystem:
    return builtin_system("linear-test")


@pytest.fixture
def circle_orbit():
    """Factory for closed-form linear-test wave trains (no Floquet data)."""

    def make(radius: float = 1.0, gamma: float = 1.0, mu: float = 0.0) -> PeriodicOrbit:
        return PeriodicOrbit(
            system=builtin_system("linear-test", gamma=gamma),
            mu=mu,
            varpi=1.0,
            half=CircleProfile(radius),
            kappa=radius,
        )

    return make


@pytest.fixture
def linear_wave_train(linear_system: ReversibleSystem) -> PeriodicOrbit:
    """Linear-test wave train at μ = 0 solved by collocation from a detuned guess."""
    return find_wave_train(linear_system, 0.0, CircleProfile(1.0), varpi=1.05, intervals=32)


@pytest.fixture
def winding_loop_frame() -> pd.DataFrame:
    """A closed front loop whose phase winds once: ψ = 2πs."""
    s = np.linspace(0.0, 1.0, 33)
    return pd.DataFrame(
        {
            "s": s,
            "mu": 0.3 + 0.05 * np.sin(2 * np.pi * s),
            "varpi": np.ones_like(s),
            "psi": np.mod(2 * np.pi * s, 2 * np.pi),
            "sigma_min": np.full_like(s, 1e-2),
            "tail_amplitude": np.full_like(s, 1e-9),
            "X": np.full_like(s, 30.0),
        }
    )


@pytest.fixture
def stored_loop(tmp_path: Path, winding_loop_frame: pd.DataFrame) -> Path:
    """Output directory holding a front_loop.csv and a minimal profile archive.

    Returns:
        Path to the output directory
    """
    out = tmp_path / "results"
    write_csv(winding_loop_frame, out / "front_loop.csv", "front-loop")
    samples = [{"exit_offset": 0.0} for _ in range(len(winding_loop_frame))]
    write_json(
        {"closed": True, "truncated": False, "reason": "closed", "samples": samples},
        out / "front_profiles.json",
        "front-loop",
    )
    return out
