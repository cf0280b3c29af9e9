"""Circle-valued phase paths: lifting, winding number, isolas/snaking and branch predictions."""

from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .constants import TWO_PI

ISOLAS = "isolas"
SNAKING = "snaking"


class LiftingError(ValueError):
    """Raised when consecutive phase samples are too far apart to lift."""

    def __init__(self, index: int, gap: float):
        self.index = index
        self.gap = gap
        super().__init__(
            f"sampling too coarse for lifting: circle gap {gap:.6f} >= pi between "
            f"samples {index - 1} and {index}"
        )


def wrap(angle: float | np.ndarray) -> float | np.ndarray:
    """Reduce to [0, 2π)."""
    return np.mod(angle, TWO_PI)


def circle_distance(a: float | np.ndarray, b: float | np.ndarray) -> float | np.ndarray:
    d = np.abs(wrap(np.asarray(a) - np.asarray(b)))
    return np.minimum(d, TWO_PI - d)


def check_phi0(phi0: float) -> float:
    if phi0 not in (0.0, np.pi):
        raise ValueError(f"phi0 must be 0 or pi, got {phi0}")
    return float(phi0)


@dataclass
class PhaseLoop:
    """Phase, parameter and unit-conversion samples along a loop of fronts, s in [0, 1]."""

    s: np.ndarray
    psi: np.ndarray
    mu: np.ndarray
    closed: bool = True
    varpi: np.ndarray | None = None
    exit_offset: np.ndarray | None = None

    def __post_init__(self):
        self.s = np.asarray(self.s, dtype=float)
        self.psi = wrap(np.asarray(self.psi, dtype=float))
        self.mu = np.asarray(self.mu, dtype=float)
        if self.varpi is None:
            self.varpi = np.ones_like(self.s)
        if self.exit_offset is None:
            self.exit_offset = np.zeros_like(self.s)
        self.varpi = np.asarray(self.varpi, dtype=float)
        self.exit_offset = np.asarray(self.exit_offset, dtype=float)
        arrays = (self.s, self.psi, self.mu, self.varpi, self.exit_offset)
        if len({len(a) for a in arrays}) != 1:
            raise ValueError("phase loop arrays must have equal length")
        if len(self.s) < 2 or np.any(np.diff(self.s) <= 0):
            raise ValueError("phase loop needs at least two samples with increasing s")

    def reversed(self) -> "PhaseLoop":
        """Same loop traversed as s ↦ 1 − s."""
        return PhaseLoop(
            s=self.s[-1] + self.s[0] - self.s[::-1],
            psi=self.psi[::-1],
            mu=self.mu[::-1],
            closed=self.closed,
            varpi=self.varpi[::-1],
            exit_offset=self.exit_offset[::-1],
        )


@dataclass
class LiftedPhasePath:
    s: np.ndarray
    psi: np.ndarray
    lifted: np.ndarray
    sheets: np.ndarray
    closed: bool
    winding: int | None = None


def lift_path(
    psi: Sequence[float] | np.ndarray,
    closed: bool,
    s: Sequence[float] | np.ndarray | None = None,
    closure_tol: float = 1e-6,
) -> LiftedPhasePath:
    """Lift circle samples to ℝ by picking the representative nearest the previous one.

    The lift is ψ̃_j = ψ_j + 2π k_j with integer sheets k_j, so reducing ψ̃_j
    mod 2π returns ψ_j. A gap of π or more is ambiguous and raises
    ``LiftingError``.
    """
    psi = wrap(np.asarray(psi, dtype=float))
    if len(psi) == 0:
        raise ValueError("cannot lift an empty path")
    s = np.linspace(0.0, 1.0, len(psi)) if s is None else np.asarray(s, dtype=float)

    sheets = np.zeros(len(psi), dtype=int)
    lifted = psi.copy()
    for j in range(1, len(psi)):
        sheets[j] = int(np.round((lifted[j - 1] - psi[j]) / TWO_PI))
        lifted[j] = psi[j] + TWO_PI * sheets[j]
        gap = abs(lifted[j] - lifted[j - 1])
        if gap >= np.pi:
            raise LiftingError(j, gap)

    winding = None
    if closed:
        turns = (lifted[-1] - lifted[0]) / TWO_PI
        winding = int(np.round(turns))
        if abs(turns - winding) > closure_tol:
            raise ValueError(
                f"closed path does not return to its start: "
                f"endpoint gap {turns - winding:.3e} turns"
            )
    return LiftedPhasePath(
        s=s, psi=psi, lifted=lifted, sheets=sheets, closed=closed, winding=winding
    )


def refine_midpoints(psi: np.ndarray) -> np.ndarray:
    """Insert the short-arc midpoint between consecutive circle samples."""
    psi = wrap(np.asarray(psi, dtype=float))
    step = np.mod(np.diff(psi) + np.pi, TWO_PI) - np.pi
    out = np.empty(2 * len(psi) - 1)
    out[0::2] = psi
    out[1::2] = wrap(psi[:-1] + step / 2.0)
    return out


@dataclass
class ExtendedPhase:
    """ψ̄(s) = ψ̃(s − ⌊s⌋) + 2πw⌊s⌋ on s ≥ 0, oriented so that ψ̄ → ∞."""

    s: np.ndarray
    lifted: np.ndarray
    winding: int
    reversed: bool = False

    def __call__(self, s: float | np.ndarray) -> float | np.ndarray:
        s = np.asarray(s, dtype=float)
        if np.any(s < 0):
            raise ValueError("extended phase is defined for s >= 0")
        turns = np.floor(s)
        frac = s - turns
        return np.interp(frac, self.s, self.lifted) + TWO_PI * self.winding * turns

    def base_parameter(self, s: float | np.ndarray) -> float | np.ndarray:
        """Loop parameter in the original orientation corresponding to extended s."""
        frac = np.asarray(s, dtype=float) - np.floor(s)
        return 1.0 - frac if self.reversed else frac


def extend_lifting(path: LiftedPhasePath) -> ExtendedPhase:
    if not path.closed or path.winding is None:
        raise ValueError("extension requires a closed lifted path")
    if path.winding == 0:
        raise ValueError("path is null-homotopic; extension undefined")
    s = (path.s - path.s[0]) / (path.s[-1] - path.s[0])
    if path.winding > 0:
        return ExtendedPhase(s, path.lifted.copy(), path.winding)
    lifted = path.lifted[::-1]
    return ExtendedPhase(1.0 - s[::-1], lifted, -path.winding, reversed=True)


@dataclass
class Classification:
    mode: str
    winding: int
    path: LiftedPhasePath

    def __str__(self) -> str:
        return f"{self.mode.upper()} w={self.winding}"


def classify(loop: PhaseLoop) -> Classification:
    """Isolas when the phase loop is null-homotopic (w = 0), snaking otherwise."""
    if not loop.closed:
        raise ValueError("classification requires a closed loop of fronts")
    path = lift_path(loop.psi, closed=True, s=loop.s)
    mode = ISOLAS if path.winding == 0 else SNAKING
    return Classification(mode=mode, winding=int(path.winding), path=path)


@dataclass
class BranchPrediction:
    """Predicted (L, μ) branch in phase units; ``measured_length`` converts to x units."""

    mode: str
    phi0: float
    n: int | None
    s: np.ndarray
    L: np.ndarray
    mu: np.ndarray
    varpi: np.ndarray
    exit_offset: np.ndarray
    winding: int = 0
    source: str = ""
    notes: list[str] = field(default_factory=list)

    @property
    def closed(self) -> bool:
        return self.mode == ISOLAS

    def measured_length(self) -> np.ndarray:
        return self.L / self.varpi + self.exit_offset

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "mode": self.mode,
                "phi0": self.phi0,
                "n": -1 if self.n is None else self.n,
                "s": self.s,
                "L": self.L,
                "mu": self.mu,
            }
        )


def predict_branches(
    loop: PhaseLoop,
    phi0: float,
    n_range: tuple[int, int] | None = None,
    s_range: tuple[float, float] | None = None,
    ell_star: float = 3,
    samples_per_turn: int | None = None,
) -> list[BranchPrediction]:
    """Leading-order branches of φ₀-symmetric localized states.

    Isolas: one closed loop (ψ̃(s) + 2πn − φ₀, μ(s)) per n in ``n_range``.
    Snaking: one branch (ψ̄(s) − φ₀, μ(s)) for s in ``s_range``.
    """
    phi0 = check_phi0(phi0)
    classification = classify(loop)
    path = classification.path

    if classification.mode == ISOLAS:
        if n_range is None or s_range is not None:
            raise ValueError("isolas need an index range n_min..n_max and no s range")
        n_min, n_max = n_range
        if n_min < ell_star or n_max < n_min:
            raise ValueError(f"need {ell_star} <= n_min <= n_max, got {n_min}..{n_max}")
        return [
            BranchPrediction(
                mode=ISOLAS,
                phi0=phi0,
                n=n,
                s=loop.s.copy(),
                L=path.lifted + TWO_PI * n - phi0,
                mu=loop.mu.copy(),
                varpi=loop.varpi.copy(),
                exit_offset=loop.exit_offset.copy(),
                winding=0,
            )
            for n in range(n_min, n_max + 1)
        ]

    if s_range is None or n_range is not None:
        raise ValueError("snaking needs an s range and no index range")
    s_min, s_max = s_range
    if s_min < ell_star or s_max <= s_min:
        raise ValueError(f"need {ell_star} <= s_min < s_max, got {s_min}..{s_max}")

    extended = extend_lifting(path)
    base = extended.s
    if samples_per_turn is not None:
        base = np.linspace(0.0, 1.0, samples_per_turn + 1)
    grid = np.unique(
        np.concatenate(
            [turn + base[:-1] for turn in range(int(np.floor(s_min)), int(np.ceil(s_max)) + 1)]
            + [np.array([s_min, s_max])]
        )
    )
    grid = grid[(grid >= s_min) & (grid <= s_max)]
    loop_s = (loop.s - loop.s[0]) / (loop.s[-1] - loop.s[0])
    original = extended.base_parameter(grid)
    return [
        BranchPrediction(
            mode=SNAKING,
            phi0=phi0,
            n=None,
            s=grid,
            L=extended(grid) - phi0,
            mu=np.interp(original, loop_s, loop.mu),
            varpi=np.interp(original, loop_s, loop.varpi),
            exit_offset=np.interp(original, loop_s, loop.exit_offset),
            winding=classification.winding,
        )
    ]
