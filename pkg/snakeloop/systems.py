"""Reversible four-dimensional ODE systems and equilibrium spectra."""

from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .constants import EQUILIBRIUM_TOL, HYPERBOLICITY_TOL, INVOLUTION_TOL, REVERSIBILITY_TOL
from .models import Diagnostic

DIMENSION = 4

VectorField = Callable[[np.ndarray, float], np.ndarray]
Jacobian = Callable[[np.ndarray, float], np.ndarray]


class UnknownSystemError(ValueError):
    """Raised when a built-in system name is not recognized."""

    def __init__(self, name: str, available: list[str]):
        self.name = name
        self.available = available
        super().__init__(f"Unknown system '{name}'. Available systems: {', '.join(available)}")


class EquilibriumError(RuntimeError):
    """Raised when u = 0 is not an equilibrium at the requested μ."""

    def __init__(self, residual: float, mu: float):
        self.residual = residual
        self.mu = mu
        super().__init__(f"u = 0 is not an equilibrium at mu={mu:g}: |f(0, mu)| = {residual:.3e}")


@dataclass(frozen=True, eq=False)
class Reverser:
    """Linear involution R with dim Fix R = 2."""

    matrix: np.ndarray

    @classmethod
    def diagonal(cls, *entries: float) -> "Reverser":
        return cls(np.diag(np.asarray(entries, dtype=float)))

    @property
    def involution_residual(self) -> float:
        """Max entry of |R·R − I|."""
        return float(np.max(np.abs(self.matrix @ self.matrix - np.eye(len(self.matrix)))))

    @property
    def fix_dimension(self) -> int:
        return int(self.fix_basis().shape[1])

    def fix_basis(self) -> np.ndarray:
        """Orthonormal basis of Fix R as columns."""
        return linalg.null_space(self.matrix - np.eye(len(self.matrix)), rcond=1e-10)

    def anti_basis(self) -> np.ndarray:
        """Orthonormal basis of Fix(−R) as columns."""
        return linalg.null_space(self.matrix + np.eye(len(self.matrix)), rcond=1e-10)

    def fix_constraints(self) -> np.ndarray:
        """Rows B with B u = 0 exactly when u ∈ Fix R."""
        return linalg.orth((self.matrix - np.eye(len(self.matrix))).T).T

    def validate(self) -> list[str]:
        """Return messages for violated reverser invariants (empty if valid)."""
        errors: list[str] = []
        if self.involution_residual > INVOLUTION_TOL:
            errors.append(f"R·R differs from I by {self.involution_residual:.3e}")
        if self.fix_dimension != 2:
            errors.append(f"dim Fix R = {self.fix_dimension}, expected 2")
        return errors


def _finite_difference_jacobian(f: VectorField, u: np.ndarray, mu: float) -> np.ndarray:
    jac = np.empty((len(u), len(u)))
    for k in range(len(u)):
        h = 1e-7 * max(1.0, abs(u[k]))
        up = u.copy()
        um = u.copy()
        up[k] += h
        um[k] -= h
        jac[:, k] = (f(up, mu) - f(um, mu)) / (2.0 * h)
    return jac


@dataclass(frozen=True, eq=False)
class ReversibleSystem:
    """A vector field u' = f(u, μ) on ℝ⁴ together with its reverser."""

    name: str
    rhs: VectorField
    reverser: Reverser
    jacobian_fn: Jacobian | None = None
    params: dict[str, float] = field(default_factory=dict)

    def __call__(self, u: np.ndarray, mu: float) -> np.ndarray:
        return np.asarray(self.rhs(np.asarray(u, dtype=float), mu), dtype=float)

    def jacobian(self, u: np.ndarray, mu: float) -> np.ndarray:
        """f_u(u, μ); analytic when supplied, central differences otherwise."""
        u = np.asarray(u, dtype=float)
        if self.jacobian_fn is not None:
            return np.asarray(self.jacobian_fn(u, mu), dtype=float)
        return _finite_difference_jacobian(self.rhs, u, mu)

    def mu_derivative(self, u: np.ndarray, mu: float) -> np.ndarray:
        h = 1e-7 * max(1.0, abs(mu))
        return (self(u, mu + h) - self(u, mu - h)) / (2.0 * h)

    def spectral_projector(self, mu: float, side: str = "unstable") -> np.ndarray:
        """Real spectral projector of f_u(0, μ) onto its unstable (or stable) eigenspace."""
        values, vectors = linalg.eig(self.jacobian(np.zeros(DIMENSION), mu))
        mask = values.real > 0 if side == "unstable" else values.real < 0
        inverse = linalg.inv(vectors)
        return np.real(vectors[:, mask] @ inverse[mask, :])

    def unstable_rows(self, mu: float, basis: np.ndarray | None = None) -> np.ndarray:
        """Rows whose vanishing means u lies in the stable eigenspace of 0.

        With a fixed ``basis`` (columns spanning the left unstable subspace at a
        reference μ) the rows depend smoothly on μ, which keeps finite-difference
        derivatives of boundary conditions meaningful.
        """
        projector = self.spectral_projector(mu, "unstable")
        if basis is None:
            basis = linalg.orth(projector.T)
        return basis.T @ projector


@dataclass
class ReversibilityReport:
    """Outcome of the reversibility sample check."""

    involution_residual: float
    anti_equivariance_residual: float
    fix_dimension: int
    equilibrium_residual: float
    samples: int
    seed: int
    diagnostics: list[Diagnostic] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not any(d.fatal for d in self.diagnostics)


@dataclass
class SpectrumReport:
    """Eigenvalues of f_u(0, μ) sorted by real part."""

    mu: float
    eigenvalues: np.ndarray
    stable_count: int
    unstable_count: int
    hyperbolic: bool

    def to_dict(self) -> dict[str, object]:
        return {
            "mu": self.mu,
            "eigenvalues_real": [float(v) for v in self.eigenvalues.real],
            "eigenvalues_imag": [float(v) for v in self.eigenvalues.imag],
            "stable_count": self.stable_count,
            "unstable_count": self.unstable_count,
            "hyperbolic": self.hyperbolic,
        }


def check_reversibility(
    system: ReversibleSystem,
    samples: int = 100,
    seed: int = 0,
    mu_range: tuple[float, float] = (-1.0, 1.0),
) -> ReversibilityReport:
    """Check R² = I, dim Fix R = 2 and f(Ru, μ) = −R f(u, μ) on seeded random samples.

    Failures are reported as fatal diagnostics; the check never raises on them.
    """
    if samples < 1:
        raise ValueError(f"sample count must be >= 1, got {samples}")

    rng = np.random.default_rng(seed)
    R = system.reverser.matrix
    anti = 0.0
    equilibrium = 0.0
    for _ in range(samples):
        u = rng.uniform(-1.0, 1.0, DIMENSION)
        mu = float(rng.uniform(*mu_range))
        anti = max(anti, float(np.max(np.abs(system(R @ u, mu) + R @ system(u, mu)))))
        equilibrium = max(equilibrium, float(np.max(np.abs(system(np.zeros(DIMENSION), mu)))))

    report = ReversibilityReport(
        involution_residual=system.reverser.involution_residual,
        anti_equivariance_residual=anti,
        fix_dimension=system.reverser.fix_dimension,
        equilibrium_residual=equilibrium,
        samples=samples,
        seed=seed,
    )
    for message in system.reverser.validate():
        report.diagnostics.append(Diagnostic(message, fatal=True))
    if anti > REVERSIBILITY_TOL:
        report.diagnostics.append(Diagnostic(f"f(Ru) + R f(u) reaches {anti:.3e}", fatal=True))
    if equilibrium > EQUILIBRIUM_TOL:
        report.diagnostics.append(
            Diagnostic(f"u = 0 is not an equilibrium (|f(0)| = {equilibrium:.3e})", fatal=False)
        )
    return report


def equilibrium_spectrum(
    system: ReversibleSystem, mu: float, hyperbolicity_tol: float = HYPERBOLICITY_TOL
) -> SpectrumReport:
    """Eigenvalues of f_u(0, μ) with stable/unstable counts."""
    zero = np.zeros(DIMENSION)
    residual = float(np.linalg.norm(system(zero, mu)))
    if residual > EQUILIBRIUM_TOL:
        raise EquilibriumError(residual, mu)

    values = linalg.eigvals(system.jacobian(zero, mu))
    values = values[np.lexsort((values.imag, values.real))]
    stable = int(np.sum(values.real <= -hyperbolicity_tol))
    unstable = int(np.sum(values.real >= hyperbolicity_tol))
    return SpectrumReport(
        mu=mu,
        eigenvalues=values,
        stable_count=stable,
        unstable_count=unstable,
        hyperbolic=bool(np.all(np.abs(values.real) >= hyperbolicity_tol)),
    )


def _sh23(b: float) -> ReversibleSystem:
    def f(u: np.ndarray, mu: float) -> np.ndarray:
        return np.array(
            [u[1], u[2], u[3], -2.0 * u[2] - (1.0 + mu) * u[0] + b * u[0] ** 2 - u[0] ** 3]
        )

    def jac(u: np.ndarray, mu: float) -> np.ndarray:
        return np.array(
            [
                [0.0, 1.0, 0.0, 0.0],
                [0.0, 0.0, 1.0, 0.0],
                [0.0, 0.0, 0.0, 1.0],
                [-(1.0 + mu) + 2.0 * b * u[0] - 3.0 * u[0] ** 2, 0.0, -2.0, 0.0],
            ]
        )

    return ReversibleSystem("sh23", f, Reverser.diagonal(1, -1, 1, -1), jac, {"b": b})


def linear_test_matrix(mu: float, gamma: float = 1.0) -> np.ndarray:
    """Rotation block on (u₁, u₂) and saddle block with rate γ(1 + μ) on (u₃, u₄)."""
    rate = gamma * (1.0 + mu)
    return np.array(
        [
            [0.0, 1.0, 0.0, 0.0],
            [-1.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, rate],
            [0.0, 0.0, rate, 0.0],
        ]
    )


def _linear_test(gamma: float) -> ReversibleSystem:
    def f(u: np.ndarray, mu: float) -> np.ndarray:
        return linear_test_matrix(mu, gamma) @ u

    def jac(u: np.ndarray, mu: float) -> np.ndarray:
        return linear_test_matrix(mu, gamma)

    return ReversibleSystem(
        "linear-test", f, Reverser.diagonal(1, -1, 1, -1), jac, {"gamma": gamma}
    )


def _nf_zero() -> ReversibleSystem:
    from .normal_form import model_preset

    return model_preset("zero").as_system()


BUILTIN_SYSTEMS: dict[str, Callable[..., ReversibleSystem]] = {
    "sh23": lambda b=1.8, **_: _sh23(float(b)),
    "nf-zero": lambda **_: _nf_zero(),
    "linear-test": lambda gamma=1.0, **_: _linear_test(float(gamma)),
}


def builtin_system(name: str, **params: float) -> ReversibleSystem:
    """Look up a built-in system.

    ``sh23`` is the quadratic-cubic Swift–Hohenberg steady state
    u'''' = −2u'' − (1+μ)u + b u² − u³ with R = diag(1, −1, 1, −1);
    ``linear-test`` has closed-form periodic orbits (r cos x, −r sin x, 0, 0)
    with Floquet exponent γ(1+μ); ``nf-zero`` is the h ≡ 0 normal form.
    """
    try:
        factory = BUILTIN_SYSTEMS[name]
    except KeyError:
        raise UnknownSystemError(name, sorted(BUILTIN_SYSTEMS)) from None
    return factory(**params)
