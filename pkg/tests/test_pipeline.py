"""Tests for Session wiring of config values into the solvers."""

from pathlib import Path
from unittest import mock

import pytest

from snakeloop.artifacts import read_csv, write_csv
from snakeloop.pipeline import Session

COLLOCATION = ("continuation.degree=3", "continuation.max_halvings=2")


class StopSolve(Exception):
    pass


class TestSessionFromArgs:
    """Tests for Session.from_args() and the collocation settings it carries."""

    def test_out_wins_over_config(self, tmp_path: Path):
        session = Session.from_args(overrides=("output.directory=elsewhere",), out=tmp_path)

        assert session.out_dir == tmp_path
        assert session.system.name == "sh23"

    def test_wave_train_uses_collocation_settings(self, tmp_path: Path):
        session = Session.from_args(
            overrides=("system.name=linear-test", "system.mu=0.0", *COLLOCATION), out=tmp_path
        )

        orbit = session.wave_train()

        assert orbit.solution.problem.degree == 3
        assert orbit.varpi == pytest.approx(1.0, abs=1e-8)

    def test_wave_train_passes_max_halvings(self, tmp_path: Path):
        session = Session.from_args(overrides=COLLOCATION, out=tmp_path)

        with mock.patch("snakeloop.pipeline.find_wave_train") as find:
            session.wave_train()

        assert find.call_args.kwargs["degree"] == 3
        assert find.call_args.kwargs["max_halvings"] == 2

    def test_front_solve_uses_collocation_settings(self, tmp_path: Path):
        session = Session.from_args(overrides=COLLOCATION, out=tmp_path)

        with (
            mock.patch("snakeloop.pipeline.find_wave_train"),
            mock.patch("snakeloop.pipeline.solve_front", side_effect=StopSolve) as solve,
            pytest.raises(StopSolve),
        ):
            session.front_loop()

        assert solve.call_args.kwargs["degree"] == 3
        assert solve.call_args.kwargs["max_halvings"] == 2


class TestStoredLoop:
    """Tests for reading the stored front loop back."""

    def test_recorded_closure_is_used(self, stored_loop: Path):
        frame = read_csv(stored_loop / "front_loop.csv", "front-loop")
        frame.loc[frame.index[-1], "psi"] += 3e-6
        write_csv(frame, stored_loop / "front_loop.csv", "front-loop")
        session = Session.from_args(out=stored_loop)

        loop = session.phase_loop()

        assert loop.closed
        assert session.classify()["winding"] == 1
