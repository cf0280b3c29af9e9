"""Reduced normal-form model near the heteroclinic cycle.

Coordinates v = (v^c, v^κ, v^s, v^u): v^c is the wave-train phase, v^κ the
internal family parameter and v^s, v^u the strong stable/unstable fibre
amplitudes. The reverser acts as (v^c, v^κ, v^s, v^u) ↦ (−v^c, v^κ, v^u, v^s).
A reversible passage starts on Fix R at (φ₀, v^κ₀, b, b) and leaves through
the exit section {v^u = δ} after time L.
"""

from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.integrate import solve_ivp
from scipy.optimize import root

from .console import warn
from .constants import TWO_PI
from .models import Diagnostic, TopologyMismatchError
from .systems import Reverser, ReversibleSystem
from .topology import ISOLAS, SNAKING, BranchPrediction, check_phi0, lift_path, wrap

NORMAL_FORM_REVERSER = np.array(
    [
        [-1.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
        [0.0, 0.0, 1.0, 0.0],
    ]
)

Coefficient = Callable[[np.ndarray, float], float]


class PassageError(RuntimeError):
    """Raised when a passage never reaches the exit section."""

    def __init__(self, time_budget: float, b: float):
        self.time_budget = time_budget
        self.b = b
        super().__init__(f"no crossing of v^u = delta within x <= {time_budget:.4g} (b={b:.3e})")


class MatchingError(RuntimeError):
    """Raised when the matching system has no solution near its seed."""

    def __init__(self, message: str, seed: np.ndarray, residual: float):
        self.seed = seed
        self.residual = residual
        super().__init__(
            f"{message} (seed ln b={seed[0]:.6g}, kappa0={seed[1]:.3g}; residual {residual:.3e})"
        )


def _zero(*_) -> float:
    return 0.0


@dataclass
class NormalFormModel:
    """Coefficient functions h and rate α(μ) of the reduced vector field."""

    name: str
    alpha: Callable[[float], float]
    delta: float = 0.1
    h_tilde_kappa: Callable[[float, float], float] = _zero
    h_c: Coefficient = _zero
    h_kappa: Coefficient = _zero
    h_s1: Coefficient = _zero
    h_s2: Coefficient = _zero
    h_u1: Coefficient = _zero
    h_u2: Coefficient = _zero

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ValueError(f"section distance delta must lie in (0, 1), got {self.delta}")

    def __call__(self, v: np.ndarray, mu: float) -> np.ndarray:
        kappa, s, u = v[1], v[2], v[3]
        alpha = self.alpha(mu)
        return np.array(
            [
                1.0 + self.h_tilde_kappa(kappa, mu) * kappa + self.h_c(v, mu) * s * u,
                self.h_kappa(v, mu) * s * u,
                -(alpha + self.h_s1(v, mu) * s + self.h_s2(v, mu) * u) * s,
                (alpha + self.h_u1(v, mu) * s + self.h_u2(v, mu) * u) * u,
            ]
        )

    def as_system(self) -> ReversibleSystem:
        return ReversibleSystem(
            name=f"nf-{self.name}",
            rhs=lambda v, mu: self(v, mu),
            reverser=Reverser(NORMAL_FORM_REVERSER.copy()),
            params={"delta": self.delta},
        )

    def check_alpha(self, mu_range: tuple[float, float], samples: int = 21) -> None:
        for mu in np.linspace(*mu_range, samples):
            if self.alpha(mu) <= 0:
                raise ValueError(f"alpha(mu) must be positive, got {self.alpha(mu)} at mu={mu}")


def model_preset(name: str) -> NormalFormModel:
    """Named coefficient presets: ``zero``, ``kappa-drift`` and ``wiggle``."""
    delta = 0.1
    if name == "zero":
        return NormalFormModel("zero", alpha=lambda mu: 1.0, delta=delta)
    if name == "kappa-drift":
        return NormalFormModel(
            "kappa-drift",
            alpha=lambda mu: 1.0,
            delta=delta,
            h_kappa=lambda v, mu: 0.05 * (v[3] - v[2]) / delta,
        )
    if name == "wiggle":
        return NormalFormModel(
            "wiggle",
            alpha=lambda mu: 0.1 + 0.05 * mu,
            delta=delta,
            h_tilde_kappa=lambda kappa, mu: 0.1 * np.cos(kappa),
            h_c=lambda v, mu: 0.1 * np.cos(v[0]),
            h_kappa=lambda v, mu: 0.05 * (v[3] - v[2]) / delta,
            h_s1=lambda v, mu: 0.1 * np.cos(v[0]),
            h_s2=lambda v, mu: 0.05,
            h_u1=lambda v, mu: 0.05,
            h_u2=lambda v, mu: 0.1 * np.cos(v[0]),
        )
    raise ValueError(f"Unknown normal-form model '{name}'. Available: zero, kappa-drift, wiggle")


def _constant(value: float) -> Callable[[float], float]:
    return lambda s: value


@dataclass
class SectionTraceData:
    """Trace of the stable manifold of 0 on the exit section along a loop s ∈ [0, 1].

    Points are (ψ(s) + d₁ν + d₂a, k₁ν + k₂a, c₁ν + c₂a + q(ν, a)) where
    ν = μ − μ(s). ``lift`` is the continuous lift of ψ on [0, 1].
    """

    name: str
    lift: Callable[[float], float]
    mu_of_s: Callable[[float], float]
    c1: Callable[[float], float] = _constant(1.0)
    c2: Callable[[float], float] = _constant(0.0)
    d1: Callable[[float], float] = _constant(0.0)
    d2: Callable[[float], float] = _constant(0.0)
    k1: Callable[[float], float] = _constant(0.0)
    k2: Callable[[float], float] = _constant(0.0)
    remainder: Callable[[float, float], float] = _zero

    def __post_init__(self):
        for s in np.linspace(0.0, 1.0, 101):
            if self.c1(s) ** 2 + self.c2(s) ** 2 <= 0:
                raise ValueError(f"c1(s)^2 + c2(s)^2 must be positive; fails at s={s:.3f}")

    @property
    def winding(self) -> int:
        return int(np.round((self.lift(1.0) - self.lift(0.0)) / TWO_PI))

    def psi(self, s: float) -> float:
        return float(wrap(self.lift(s)))

    def base_parameter(self, s: float) -> float:
        """Loop parameter in [0, 1] for extended s, reversing orientation when w < 0."""
        frac = s - np.floor(s)
        return 1.0 - frac if self.winding < 0 else frac

    def extended_phase(self, s: float) -> float:
        """ψ̄(s) on s ≥ 0, increasing in s for w ≠ 0."""
        if s < 0:
            raise ValueError("extended phase is defined for s >= 0")
        return float(self.lift(self.base_parameter(s)) + TWO_PI * abs(self.winding) * np.floor(s))


def data_preset(name: str, mu0: float = 0.0) -> SectionTraceData:
    """Named section-trace presets: ``constant``, ``winding``, ``isola-loop`` and ``fold``."""
    if name == "constant":
        return SectionTraceData("constant", _constant(np.pi / 2), _constant(mu0))
    if name == "winding":
        return SectionTraceData(
            "winding",
            lift=lambda s: TWO_PI * s,
            mu_of_s=lambda s: mu0 + 0.1 * np.sin(TWO_PI * s),
        )
    if name == "isola-loop":
        return SectionTraceData(
            "isola-loop",
            lift=lambda s: np.pi / 2 + 0.5 * np.sin(TWO_PI * s),
            mu_of_s=lambda s: mu0 + 0.1 * np.sin(TWO_PI * s),
            d1=_constant(0.5),
            k1=_constant(0.5),
        )
    if name == "fold":
        return SectionTraceData(
            "fold",
            lift=lambda s: np.pi / 2 + 0.5 * np.sin(TWO_PI * s),
            mu_of_s=lambda s: mu0 + 0.1 * np.cos(TWO_PI * s),
            c1=lambda s: np.cos(TWO_PI * s),
            c2=_constant(1.0),
        )
    raise ValueError(
        f"Unknown section-trace data '{name}'. Available: constant, winding, isola-loop, fold"
    )


@dataclass
class PassageResult:
    L: float
    exit: np.ndarray
    kappa0: float
    phi0: float
    b: float
    mu: float

    @property
    def residual(self) -> np.ndarray:
        """Deviation of the exit point from (φ₀ + L, v^κ₀, 0)."""
        return np.array(
            [self.exit[0] - self.phi0 - self.L, self.exit[1] - self.kappa0, self.exit[2]]
        )


def nf_reversible_shot(
    model: NormalFormModel,
    phi0: float,
    kappa0: float,
    b: float,
    mu: float,
    rtol: float = 1e-12,
    time_budget: float | None = None,
) -> PassageResult:
    """Integrate from (φ₀, v^κ₀, b, b) until v^u = δ; the full passage takes time 2L."""
    phi0 = check_phi0(phi0)
    if not 0 < b < model.delta:
        raise ValueError(f"b must lie in (0, delta={model.delta}), got {b}")
    alpha = model.alpha(mu)
    if time_budget is None:
        time_budget = max(50.0, 20.0 * np.log(model.delta / b) / max(alpha, 1e-3))

    def exit_section(_, v):
        return v[3] - model.delta

    exit_section.terminal = True
    exit_section.direction = 1

    result = solve_ivp(
        lambda _, v: model(v, mu),
        (0.0, time_budget),
        np.array([phi0, kappa0, b, b]),
        method="DOP853",
        rtol=rtol,
        atol=rtol * 1e-12,
        events=exit_section,
    )
    if result.status != 1 or len(result.t_events[0]) == 0:
        raise PassageError(time_budget, b)
    exit_state = result.y_events[0][0].copy()
    exit_state[3] = model.delta
    return PassageResult(
        L=float(result.t_events[0][0]), exit=exit_state, kappa0=kappa0, phi0=phi0, b=b, mu=mu
    )


def passage_symmetry_residual(
    model: NormalFormModel, passage: PassageResult, rtol: float = 1e-12
) -> float:
    """Max deviation between v(−L) from backward integration and R v(L)."""
    start = np.array([passage.phi0, passage.kappa0, passage.b, passage.b])
    result = solve_ivp(
        lambda _, v: model(v, passage.mu),
        (0.0, -passage.L),
        start,
        method="DOP853",
        rtol=rtol,
        atol=rtol * 1e-12,
    )
    backward = result.y[:, -1]
    mirrored = NORMAL_FORM_REVERSER @ passage.exit
    mirrored[0] += 2.0 * passage.phi0  # v^c is reflected about φ₀
    return float(np.max(np.abs(backward - mirrored)))


@dataclass
class ExpansionTable:
    frame: pd.DataFrame
    beta_hat: float
    fit_residual: float
    beta_components: dict[str, float]
    linear_coefficient: float
    beta_hat_refined: float | None = None
    diagnostics: list[Diagnostic] = field(default_factory=list)

    @property
    def stable(self) -> bool:
        if self.beta_hat_refined is None:
            return True
        return abs(self.beta_hat_refined - self.beta_hat) <= 0.1 * abs(self.beta_hat)

    @property
    def passed(self) -> bool:
        return self.beta_hat > 0 and self.fit_residual < 0.1 and self.stable

    def report(self) -> dict[str, object]:
        return {
            "beta_hat": self.beta_hat,
            "beta_hat_refined": self.beta_hat_refined,
            "fit_residual": self.fit_residual,
            "linear_coefficient": self.linear_coefficient,
            "passed": self.passed,
            **{f"beta_{key}": value for key, value in self.beta_components.items()},
        }


def _expansion_rows(model, phi0, kappa0, mu, b_grid, rtol) -> tuple[pd.DataFrame, float]:
    passages = [nf_reversible_shot(model, phi0, kappa0, b, mu, rtol) for b in b_grid]
    L = np.array([p.L for p in passages])
    advance = np.array([p.exit[0] - phi0 for p in passages])
    coefficient = float(advance @ L / (L @ L))
    frame = pd.DataFrame(
        {
            "L": L,
            "b": np.asarray(b_grid),
            "r_c": np.abs(advance - coefficient * L),
            "r_kappa": np.array([abs(p.exit[1] - kappa0) for p in passages]),
            "r_s": np.array([abs(p.exit[2]) for p in passages]),
        }
    )
    frame["r_max"] = frame[["r_c", "r_kappa", "r_s"]].max(axis=1)
    return frame, coefficient


def _fit(frame: pd.DataFrame, column: str, floor: np.ndarray) -> tuple[float, float]:
    from .localized import fit_decay_rate

    mask = frame[column].to_numpy() > floor
    if mask.sum() < 3:
        return float("nan"), float("nan")
    return fit_decay_rate(frame["L"].to_numpy()[mask], frame[column].to_numpy()[mask])


def verify_expansion(
    model: NormalFormModel,
    phi0: float,
    kappa0: float,
    mu: float,
    L_grid: np.ndarray | None = None,
    rtol: float = 1e-12,
    check_tolerance: bool = True,
) -> ExpansionTable:
    """Measure how fast the exit point approaches (φ₀ + cL, v^κ₀, 0) as b → 0.

    The grid is b = δ·e^{−ℓ} for ℓ in ``L_grid`` (default 3..15). Residuals
    below the integration noise floor are excluded from the log-linear fits.
    """
    phi0 = check_phi0(phi0)
    L_grid = np.linspace(3.0, 15.0, 13) if L_grid is None else np.asarray(L_grid, dtype=float)
    b_grid = model.delta * np.exp(-L_grid)
    if np.log10(b_grid.max() / b_grid.min()) < 3:
        raise ValueError("b grid must span at least three decades")

    frame, coefficient = _expansion_rows(model, phi0, kappa0, mu, b_grid, rtol)
    floor = 100.0 * rtol * np.maximum(1.0, frame["L"].to_numpy())
    beta_hat, fit_residual = _fit(frame, "r_max", floor)
    components = {name: _fit(frame, f"r_{name}", floor)[0] for name in ("c", "kappa", "s")}

    table = ExpansionTable(frame, beta_hat, fit_residual, components, coefficient)
    if check_tolerance:
        refined, _ = _expansion_rows(model, phi0, kappa0, mu, b_grid, rtol / 2.0)
        table.beta_hat_refined = _fit(refined, "r_max", floor / 2.0)[0]
    if not table.passed:
        message = (
            f"expansion fit failed: beta_hat={beta_hat:.4g}, fit residual={fit_residual:.3g}"
        )
        warn(message)
        table.diagnostics.append(Diagnostic(message))
    return table


@dataclass
class MatchingSolution:
    s: float
    n: int | None
    phi0: float
    L: float
    kappa0: float
    nu: float
    a: float
    mu: float
    b: float
    unknown: str
    residual: np.ndarray

    def to_dict(self) -> dict[str, object]:
        return {
            "s": self.s,
            "n": self.n,
            "phi0": self.phi0,
            "L": self.L,
            "kappa0": self.kappa0,
            "nu": self.nu,
            "a": self.a,
            "mu": self.mu,
            "b": self.b,
            "unknown": self.unknown,
            "residual_c": float(self.residual[0]),
            "residual_kappa": float(self.residual[1]),
            "residual_s": float(self.residual[2]),
        }


def nf_matching_solve(
    model: NormalFormModel,
    data: SectionTraceData,
    phi0: float,
    s: float,
    n: int | None = None,
    regime: str = ISOLAS,
    tol: float = 1e-10,
    c1_threshold: float = 1e-3,
    rtol: float = 1e-12,
    start: MatchingSolution | None = None,
) -> MatchingSolution:
    """Solve the matching of the passage exit with the stable-manifold trace.

    Unknowns are (ln b, v^κ₀, ν) with a = 0, or (ln b, v^κ₀, a) with ν = 0 where
    |c₁(s)| < ``c1_threshold``. The third unknown and third equation are scaled
    by the leading-order size δe^{−2αL} of v^s at the exit.

    Newton starts from the leading-order passage unless ``start`` (a solution
    at a nearby s) is given.
    """
    phi0 = check_phi0(phi0)
    if regime == ISOLAS:
        if n is None or not 0 <= s <= 1:
            raise ValueError("isolas matching needs an index n and s in [0, 1]")
        base = s
        target = data.lift(s) + TWO_PI * n
    elif regime == SNAKING:
        if n is not None or s < 0:
            raise ValueError("snaking matching needs s >= 0 and no index n")
        base = data.base_parameter(s)
        target = data.extended_phase(s)
    else:
        raise ValueError(f"regime must be '{ISOLAS}' or '{SNAKING}', got '{regime}'")

    c1, c2 = data.c1(base), data.c2(base)
    if c1 == 0 and c2 == 0:
        raise ValueError(f"c1(s) = c2(s) = 0 at s={s}")
    use_a = abs(c1) < c1_threshold
    mu_s = data.mu_of_s(base)
    L_seed = target - phi0
    if L_seed <= 0:
        raise ValueError(f"leading-order passage time must be positive, got {L_seed}")
    scale = model.delta * np.exp(-2.0 * model.alpha(mu_s) * L_seed)

    def split(x: np.ndarray) -> tuple[float, float, float, float]:
        b = float(np.exp(x[0]))
        extra = float(x[2]) * scale
        nu, a = (0.0, extra) if use_a else (extra, 0.0)
        return b, float(x[1]), nu, a

    def equations(x: np.ndarray) -> np.ndarray:
        b, kappa0, nu, a = split(x)
        if not 0 < b < model.delta:
            return np.full(3, 1e3)
        passage = nf_reversible_shot(model, phi0, kappa0, b, mu_s + nu, rtol)
        v = passage.exit
        return np.array(
            [
                v[0] - (target + data.d1(base) * nu + data.d2(base) * a),
                v[1] - (data.k1(base) * nu + data.k2(base) * a),
                (v[2] - (c1 * nu + c2 * a + data.remainder(nu, a))) / scale,
            ]
        )

    if start is None:
        seed = np.array([np.log(model.delta) - model.alpha(mu_s) * L_seed, 0.0, 0.0])
    else:
        extra = 0.0
        if start.unknown == ("a" if use_a else "nu"):
            extra = (start.a if use_a else start.nu) / scale
        seed = np.array([np.log(start.b), start.kappa0, extra])
    result = root(equations, seed, method="hybr", options={"xtol": 1e-14})
    residual = equations(result.x)
    norm = float(np.max(np.abs(residual)))
    if norm >= tol:
        raise MatchingError(f"matching Newton failed at s={s}: {result.message}", seed, norm)

    b, kappa0, nu, a = split(result.x)
    passage = nf_reversible_shot(model, phi0, kappa0, b, mu_s + nu, rtol)
    return MatchingSolution(
        s=s,
        n=n,
        phi0=phi0,
        L=passage.L,
        kappa0=kappa0,
        nu=nu,
        a=a,
        mu=mu_s + nu,
        b=b,
        unknown="a" if use_a else "nu",
        residual=residual,
    )


@dataclass
class SweepResult:
    branches: list[BranchPrediction]
    solutions: list[MatchingSolution]
    winding: int
    regime: str

    def to_frame(self) -> pd.DataFrame:
        return pd.concat([branch.to_frame() for branch in self.branches], ignore_index=True)


def nf_branch_sweep(
    model: NormalFormModel,
    data: SectionTraceData,
    phi0: float,
    regime: str,
    n_range: tuple[int, int] | None = None,
    s_range: tuple[float, float] | None = None,
    samples: int = 33,
    closure_tol: float = 1e-6,
    tol: float = 1e-10,
) -> SweepResult:
    """Exact reduced-model branches of localized states over a range of s (and n).

    Each solve starts from the previous one, so an isola is followed around
    the loop; it closes when the state reached at s = 1 matches the state
    solved at s = 0.
    """
    phi0 = check_phi0(phi0)
    grid = np.linspace(0.0, 1.0, samples)
    path = lift_path([data.psi(s) for s in grid], closed=True, s=grid)
    expected = ISOLAS if path.winding == 0 else SNAKING
    if regime != expected:
        raise TopologyMismatchError(
            expected=expected, found=regime, detail=f"data '{data.name}' has w={path.winding}"
        )

    def follow(s_values: np.ndarray, n: int | None) -> list[MatchingSolution]:
        points: list[MatchingSolution] = []
        for s in s_values:
            previous = points[-1] if points else None
            points.append(
                nf_matching_solve(model, data, phi0, s, n, regime, tol, start=previous)
            )
        return points

    solutions: list[MatchingSolution] = []
    branches: list[BranchPrediction] = []
    if regime == ISOLAS:
        if n_range is None:
            raise ValueError("isolas sweep needs an index range")
        for n in range(n_range[0], n_range[1] + 1):
            points = follow(grid, n)
            solutions.extend(points)
            first, last = points[0], points[-1]
            gap = max(
                abs(last.L - first.L),
                abs(last.mu - first.mu),
                abs(last.kappa0 - first.kappa0),
                abs(np.log(last.b / first.b)),
            )
            if gap > closure_tol:
                raise TopologyMismatchError(
                    expected="closed loop",
                    found="open branch",
                    detail=f"isola n={n} does not close (gap {gap:.3e})",
                )
            L = np.array([p.L for p in points])
            mu = np.array([p.mu for p in points])
            branches.append(_prediction(ISOLAS, phi0, n, grid, L, mu, 0, data.name))
    else:
        if s_range is None:
            raise ValueError("snaking sweep needs an s range")
        s_values = np.linspace(s_range[0], s_range[1], samples)
        points = follow(s_values, None)
        solutions.extend(points)
        L = np.array([p.L for p in points])
        mu = np.array([p.mu for p in points])
        if L[-1] - L[0] < TWO_PI:
            raise TopologyMismatchError(
                expected="unbounded branch",
                found="bounded branch",
                detail=f"L spans only {L[-1] - L[0]:.4g}",
            )
        branches.append(_prediction(SNAKING, phi0, None, s_values, L, mu, path.winding, data.name))
    return SweepResult(branches, solutions, int(path.winding), regime)


def _prediction(mode, phi0, n, s, L, mu, winding, source) -> BranchPrediction:
    return BranchPrediction(
        mode=mode,
        phi0=phi0,
        n=n,
        s=np.asarray(s),
        L=L,
        mu=mu,
        varpi=np.ones_like(L),
        exit_offset=np.zeros_like(L),
        winding=winding,
        source=source,
    )
