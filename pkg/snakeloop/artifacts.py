"""CSV/JSON artifacts with a metadata header, and archives of front profiles."""

import json
import math
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from .collocation import SampledProfile, sample_profile
from .constants import SCHEMA_VERSION
from .fronts import FrontLoop, PatternedFront
from .systems import ReversibleSystem
from .topology import PhaseLoop, circle_distance
from .wavetrain import PeriodicOrbit

UTC = timezone.utc


class ArtifactError(RuntimeError):
    """Raised when an upstream artifact is missing or unreadable."""

    def __init__(self, path: Path, producer: str, detail: str = ""):
        self.path = path
        self.producer = producer
        message = f"Missing artifact {path}; run `snakeloop {producer}` first"
        if detail:
            message = f"Unreadable artifact {path} ({detail}); re-run `snakeloop {producer}`"
        super().__init__(message)


def _created() -> str:
    return datetime.now(UTC).isoformat(timespec="seconds")


def metadata_line(producer: str) -> str:
    return f"# schema_version = {SCHEMA_VERSION}; producer = {producer}; created = {_created()}"


def write_csv(frame: pd.DataFrame, path: Path, producer: str) -> Path:
    """Metadata comment line, then the column header and rows with 17 significant digits."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(metadata_line(producer) + "\n")
        frame.to_csv(f, index=False, float_format="%.17g", lineterminator="\n")
    return path


def read_csv(path: Path, producer: str) -> pd.DataFrame:
    if not path.exists():
        raise ArtifactError(path, producer)
    with open(path, encoding="utf-8") as f:
        header = f.readline()
    if f"schema_version = {SCHEMA_VERSION}" not in header:
        raise ArtifactError(path, producer, "no schema_version header")
    return pd.read_csv(path, comment="#")


def _plain(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_plain(v) for v in value]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return None if math.isnan(value) else value
    return value


def write_json(data: dict[str, Any], path: Path, producer: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = _plain(data) | {
        "schema_version": SCHEMA_VERSION,
        "producer": producer,
        "created": _created(),
    }
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def read_json(path: Path, producer: str) -> dict[str, Any]:
    if not path.exists():
        raise ArtifactError(path, producer)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ArtifactError(path, producer, str(exc)) from exc
    if data.get("schema_version") != SCHEMA_VERSION:
        raise ArtifactError(path, producer, "schema_version mismatch")
    return data


def phase_loop_from_frame(
    frame: pd.DataFrame,
    exit_offset: np.ndarray | None = None,
    closure_tol: float = 1e-6,
    closed: bool | None = None,
) -> PhaseLoop:
    """Phase loop from a front_loop.csv table.

    ``closed`` is the flag recorded with the loop; without it the loop is
    closed when its ends coincide within ``closure_tol``.
    """
    psi = frame["psi"].to_numpy()
    mu = frame["mu"].to_numpy()
    if closed is None:
        closed = bool(
            circle_distance(psi[0], psi[-1]) <= closure_tol
            and abs(mu[0] - mu[-1]) <= closure_tol
        )
    return PhaseLoop(
        s=frame["s"].to_numpy(),
        psi=psi,
        mu=mu,
        closed=closed,
        varpi=frame["varpi"].to_numpy(),
        exit_offset=exit_offset,
    )


def _orbit_record(orbit: PeriodicOrbit, samples: int) -> dict[str, Any]:
    grid = np.linspace(0.0, np.pi, samples)
    return {
        "mu": orbit.mu,
        "varpi": orbit.varpi,
        "kappa": orbit.kappa,
        "pin_index": orbit.pin_index,
        "alpha": orbit.alpha,
        "grid": grid,
        "values": np.asarray(orbit.half(grid)),
    }


def front_archive(loop: FrontLoop, samples: int = 401, orbit_samples: int = 257) -> dict:
    records = []
    for s, front in loop.samples:
        profile = sample_profile(front.profile, samples)
        records.append(
            front.to_dict()
            | {
                "s": s,
                "sign": front.sign,
                "grid": profile.grid,
                "values": profile.values,
                "orbit": _orbit_record(front.orbit, orbit_samples),
            }
        )
    return {
        "closed": loop.closed,
        "truncated": loop.truncated,
        "reason": loop.reason,
        "samples": records,
    }


def save_front_archive(loop: FrontLoop, path: Path, producer: str = "front-loop") -> Path:
    return write_json(front_archive(loop), path, producer)


def load_front_archive(
    path: Path, system: ReversibleSystem, producer: str = "front-loop"
) -> list[PatternedFront]:
    """Fronts with spline-interpolated profiles and wave trains (no Floquet data)."""
    data = read_json(path, producer)
    fronts = []
    for record in data["samples"]:
        o = record["orbit"]
        orbit = PeriodicOrbit(
            system=system,
            mu=o["mu"],
            varpi=o["varpi"],
            half=SampledProfile(np.asarray(o["grid"]), np.asarray(o["values"])),
            kappa=o["kappa"],
            pin_index=o["pin_index"],
        )
        fronts.append(
            PatternedFront(
                mu=record["mu"],
                orbit=orbit,
                profile=SampledProfile(np.asarray(record["grid"]), np.asarray(record["values"])),
                X=record["X"],
                psi=record["psi"],
                exit_phase=record["exit_phase"],
                delta=record["delta"],
                tail_amplitude=record["tail_amplitude"],
                sigma_min=record["sigma_min"],
                bc_residual=record["bc_residual"],
                exit_offset=record["exit_offset"],
                epsilon=record["epsilon"],
                sign=record["sign"],
            )
        )
    return fronts
