"""Time integration with dense output and the variational flow."""

from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import OdeSolution, solve_ivp

Field = Callable[[np.ndarray, float], np.ndarray]


class IntegrationError(RuntimeError):
    """Raised when the integrator stops before reaching the final time."""

    def __init__(self, time_reached: float, message: str):
        self.time_reached = time_reached
        super().__init__(f"Integration failed at x={time_reached:.6g}: {message}")


@dataclass
class Trajectory:
    """Solution of u' = f(u, μ) on [t[0], t[-1]] with dense output."""

    t: np.ndarray
    states: np.ndarray
    mu: float
    dense: OdeSolution | None = None
    event_times: list[np.ndarray] = field(default_factory=list)
    event_states: list[np.ndarray] = field(default_factory=list)

    def __call__(self, x: float | np.ndarray) -> np.ndarray:
        """Evaluate the dense output; columns for array input."""
        if self.dense is None:
            raise ValueError("trajectory has no dense output")
        return self.dense(x)

    @property
    def end(self) -> np.ndarray:
        return self.states[:, -1]

    @property
    def span(self) -> float:
        return float(self.t[-1] - self.t[0])


def integrate(
    system: Field,
    mu: float,
    u0: Sequence[float] | np.ndarray,
    T: float,
    tol: float = 1e-10,
    events: Sequence[Callable] | Callable | None = None,
    max_step: float = np.inf,
) -> Trajectory:
    """Integrate ``system`` from u0 over [0, T] with DOP853 (T < 0 runs backward).

    ``tol`` is used as both relative and absolute tolerance. Terminal events
    follow the ``solve_ivp`` conventions.
    """
    if T == 0:
        raise ValueError("integration time T must be nonzero")
    if tol <= 0:
        raise ValueError(f"tolerance must be positive, got {tol}")

    result = solve_ivp(
        lambda _, y: system(y, mu),
        (0.0, T),
        np.asarray(u0, dtype=float),
        method="DOP853",
        rtol=max(tol, 2.3e-14),
        atol=tol,
        dense_output=True,
        events=events,
        max_step=max_step,
    )
    if result.status == -1:
        reached = float(result.t[-1]) if len(result.t) else 0.0
        raise IntegrationError(reached, result.message)

    return Trajectory(
        t=result.t,
        states=result.y,
        mu=mu,
        dense=result.sol,
        event_times=list(result.t_events or []),
        event_states=list(result.y_events or []),
    )


def variational_flow(
    system,
    mu: float,
    u0: Sequence[float] | np.ndarray,
    T: float,
    tol: float = 1e-10,
) -> tuple[np.ndarray, np.ndarray]:
    """End state Φ_T(u0) and fundamental matrix DΦ_T(u0).

    ``system`` must provide ``__call__(u, mu)`` and ``jacobian(u, mu)``.
    """
    u0 = np.asarray(u0, dtype=float)
    n = len(u0)
    if T == 0:
        return u0.copy(), np.eye(n)

    def augmented(y: np.ndarray, mu: float) -> np.ndarray:
        u = y[:n]
        Y = y[n:].reshape(n, n)
        return np.concatenate([system(u, mu), (system.jacobian(u, mu) @ Y).ravel()])

    trajectory = integrate(augmented, mu, np.concatenate([u0, np.eye(n).ravel()]), T, tol)
    end = trajectory.end
    return end[:n], end[n:].reshape(n, n)


def transport_left(
    system, mu: float, u0: np.ndarray, T: float, vectors: np.ndarray, tol: float = 1e-10
) -> np.ndarray:
    """Carry left (adjoint) vectors at u0 to Φ_T(u0) via DΦ_T^{-T}."""
    _, Y = variational_flow(system, mu, u0, T, tol)
    return np.linalg.solve(Y.T, vectors)
