"""Tests for SVG diagrams."""

from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from snakeloop.plotting import bifurcation_diagram, phase_loop_diagram


@pytest.fixture
def branch_frames() -> tuple[pd.DataFrame, list[pd.DataFrame]]:
    L = np.linspace(10.0, 40.0, 61)
    computed = pd.DataFrame({"L": L, "mu": 0.3 + 0.05 * np.sin(L) + 0.01 * np.exp(-0.5 * L)})
    predicted = pd.DataFrame({"L": L, "mu": 0.3 + 0.05 * np.sin(L)})
    return computed, [predicted]


class TestBifurcationDiagram:
    """Tests for bifurcation_diagram()."""

    def test_writes_svg(self, tmp_path: Path, branch_frames):
        computed, predictions = branch_frames

        path = bifurcation_diagram(computed, predictions, tmp_path / "plots" / "b.svg", "sh23")

        text = path.read_text()
        assert text.startswith("<?xml")
        assert "<svg" in text

    def test_output_is_deterministic(self, tmp_path: Path, branch_frames):
        computed, predictions = branch_frames

        first = bifurcation_diagram(computed, predictions, tmp_path / "first.svg")
        second = bifurcation_diagram(computed, predictions, tmp_path / "second.svg")

        assert first.read_bytes() == second.read_bytes()

    def test_predictions_only(self, tmp_path: Path, branch_frames):
        _, predictions = branch_frames

        assert bifurcation_diagram(None, predictions, tmp_path / "p.svg").exists()

    def test_nothing_to_plot(self, tmp_path: Path):
        with pytest.raises(ValueError, match="nothing to plot"):
            bifurcation_diagram(None, [], tmp_path / "empty.svg")


class TestPhaseLoopDiagram:
    """Tests for phase_loop_diagram()."""

    def test_writes_svg(self, tmp_path: Path, winding_loop_frame: pd.DataFrame):
        path = phase_loop_diagram(winding_loop_frame, tmp_path / "loop.svg", "front loop")

        assert path.exists()
        assert "<svg" in path.read_text()
