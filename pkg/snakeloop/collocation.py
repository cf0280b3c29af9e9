"""Gauss–Legendre collocation for two-point boundary value problems.

The discretization is the implicit Runge–Kutta form of collocation: on every
mesh interval [x_i, x_i + h_i] the unknowns are the node value u_i and the
stage derivatives K_ij, j = 1..m, tied together by

    K_ij = F(x_ij, u_i + h_i Σ_k a_jk K_ik, p)      (collocation)
    u_{i+1} = u_i + h_i Σ_j b_j K_ij                (continuity)

plus the boundary and integral conditions. Free parameters are appended to
the unknown vector. Jacobians are assembled sparse and factored with SuperLU.
"""

from collections.abc import Callable
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import sparse
from scipy.interpolate import CubicSpline
from scipy.sparse.linalg import splu, svds

from .constants import SINGULAR_RATIO

Rhs = Callable[[float, np.ndarray, np.ndarray], np.ndarray]
BoundaryConditions = Callable[[np.ndarray, np.ndarray, np.ndarray, np.ndarray], np.ndarray]

DENSE_SVD_LIMIT = 400


class NewtonError(RuntimeError):
    """Raised when the damped Newton iteration fails to converge."""

    def __init__(self, history: list[float], message: str):
        self.history = history
        trail = ", ".join(f"{r:.2e}" for r in history[-6:])
        super().__init__(f"Newton failed: {message} (residuals: {trail})")


class SingularJacobianError(RuntimeError):
    """Raised when the discretized Jacobian is numerically singular."""

    def __init__(self, sigma_min: float, sigma_max: float):
        self.sigma_min = sigma_min
        self.sigma_max = sigma_max
        super().__init__(
            f"Singular Jacobian: sigma_min={sigma_min:.3e}, sigma_max={sigma_max:.3e}"
        )


@dataclass(frozen=True)
class Tableau:
    """Gauss–Legendre Runge–Kutta tableau on [0, 1]."""

    c: np.ndarray
    b: np.ndarray
    A: np.ndarray
    lagrange: np.ndarray  # lagrange[q, k]: coefficient of t^q in the k-th Lagrange polynomial

    @classmethod
    def gauss_legendre(cls, m: int) -> "Tableau":
        if m < 1:
            raise ValueError(f"collocation degree must be >= 1, got {m}")
        roots, weights = np.polynomial.legendre.leggauss(m)
        c = (roots + 1.0) / 2.0
        b = weights / 2.0
        lagrange = np.linalg.inv(np.vander(c, m, increasing=True))
        powers = np.arange(1, m + 1)
        A = (c[:, None] ** powers / powers) @ lagrange
        return cls(c=c, b=b, A=A, lagrange=lagrange)

    def integrated_basis(self, tau: np.ndarray) -> np.ndarray:
        """∫₀^τ ℓ_k(t) dt for every τ (rows) and k (columns)."""
        powers = np.arange(1, len(self.c) + 1)
        return (np.asarray(tau)[:, None] ** powers / powers) @ self.lagrange

    def basis(self, tau: np.ndarray) -> np.ndarray:
        powers = np.arange(len(self.c))
        return (np.asarray(tau)[:, None] ** powers) @ self.lagrange


def _evaluate(evaluator, x: float | np.ndarray) -> np.ndarray:
    scalar = np.ndim(x) == 0
    values = evaluator(np.atleast_1d(np.asarray(x, dtype=float)))
    return values[:, 0] if scalar else values


@dataclass(frozen=True, eq=False)
class CollocationProfile:
    """Piecewise polynomial profile; calling it returns (n,) or (n, M) arrays."""

    mesh: np.ndarray
    nodes: np.ndarray
    stages: np.ndarray
    tableau: Tableau

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]

    @property
    def interval(self) -> tuple[float, float]:
        return float(self.mesh[0]), float(self.mesh[-1])

    def _locate(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        idx = np.clip(np.searchsorted(self.mesh, x, side="right") - 1, 0, len(self.mesh) - 2)
        h = np.diff(self.mesh)[idx]
        return idx, h, (x - self.mesh[idx]) / h

    def __call__(self, x: float | np.ndarray) -> np.ndarray:
        def values(xs: np.ndarray) -> np.ndarray:
            idx, h, tau = self._locate(xs)
            weights = self.tableau.integrated_basis(tau)
            increments = np.einsum("pk,pkn->pn", weights, self.stages[idx])
            return (self.nodes[idx] + h[:, None] * increments).T

        return _evaluate(values, x)

    def derivative(self, x: float | np.ndarray) -> np.ndarray:
        def values(xs: np.ndarray) -> np.ndarray:
            idx, _, tau = self._locate(xs)
            return np.einsum("pk,pkn->pn", self.tableau.basis(tau), self.stages[idx]).T

        return _evaluate(values, x)


@dataclass(frozen=True, eq=False)
class SampledProfile:
    """Profile given by samples on a grid, interpolated with cubic splines."""

    grid: np.ndarray
    values: np.ndarray  # shape (n, M)

    @cached_property
    def _spline(self) -> CubicSpline:
        return CubicSpline(self.grid, self.values, axis=1)

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    @property
    def interval(self) -> tuple[float, float]:
        return float(self.grid[0]), float(self.grid[-1])

    def __call__(self, x: float | np.ndarray) -> np.ndarray:
        return self._spline(x)

    def derivative(self, x: float | np.ndarray) -> np.ndarray:
        return self._spline(x, 1)


def sample_profile(profile, samples: int = 401) -> SampledProfile:
    """Resample any profile on a uniform grid of its interval."""
    a, b = profile.interval
    grid = np.linspace(a, b, samples)
    return SampledProfile(grid, np.asarray(profile(grid)))


@dataclass(eq=False)
class CollocationProblem:
    """u' = rhs(x, u, p) on [a, b] with ``n_conditions`` boundary/integral conditions.

    ``bc(ua, ub, p, q)`` returns the condition vector, where q holds the
    integrals ∫ integrand(x, u, p) dx (empty when no integrand is given).
    The parameters listed in ``free`` are unknowns; the rest stay at ``p``.
    """

    rhs: Rhs
    bc: BoundaryConditions
    dim: int
    n_conditions: int
    p: np.ndarray
    free: tuple[int, ...] = ()
    interval: tuple[float, float] = (0.0, 1.0)
    intervals: int = 64
    degree: int = 4
    rhs_jacobian: Callable[[float, np.ndarray, np.ndarray], np.ndarray] | None = None
    integrand: Callable[[float, np.ndarray, np.ndarray], np.ndarray] | None = None
    mesh: np.ndarray | None = None
    name: str = "bvp"
    tableau: Tableau = field(init=False, repr=False)

    def __post_init__(self):
        self.p = np.atleast_1d(np.asarray(self.p, dtype=float)).copy()
        self.free = tuple(int(i) for i in self.free)
        if self.n_conditions != self.dim + len(self.free):
            raise ValueError(
                f"inconsistent condition count: {self.n_conditions} conditions for dimension "
                f"{self.dim} with {len(self.free)} free parameters "
                f"(need {self.dim + len(self.free)})"
            )
        if any(i < 0 or i >= len(self.p) for i in self.free):
            raise ValueError(f"free parameter index out of range: {self.free}")
        if self.mesh is None:
            self.mesh = np.linspace(self.interval[0], self.interval[1], self.intervals + 1)
        else:
            self.mesh = np.asarray(self.mesh, dtype=float)
            self.intervals = len(self.mesh) - 1
            self.interval = (float(self.mesh[0]), float(self.mesh[-1]))
        if np.any(np.diff(self.mesh) <= 0):
            raise ValueError("mesh must be strictly increasing")
        self.tableau = Tableau.gauss_legendre(self.degree)

    # -- layout -------------------------------------------------------------

    @property
    def steps(self) -> np.ndarray:
        return np.diff(self.mesh)

    @property
    def stage_points(self) -> np.ndarray:
        return self.mesh[:-1, None] + self.steps[:, None] * self.tableau.c[None, :]

    @property
    def n_node_unknowns(self) -> int:
        return (self.intervals + 1) * self.dim

    @property
    def n_stage_unknowns(self) -> int:
        return self.intervals * self.degree * self.dim

    def size(self, free: tuple[int, ...] | None = None) -> int:
        free = self.free if free is None else free
        return self.n_node_unknowns + self.n_stage_unknowns + len(free)

    def unpack(
        self, z: np.ndarray, free: tuple[int, ...] | None = None
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Split z into nodes (N+1, n), stages (N, m, n) and the full parameter vector."""
        free = self.free if free is None else free
        a, b = self.n_node_unknowns, self.n_node_unknowns + self.n_stage_unknowns
        nodes = z[:a].reshape(self.intervals + 1, self.dim)
        stages = z[a:b].reshape(self.intervals, self.degree, self.dim)
        p = self.p.copy()
        if free:
            p[list(free)] = z[b:]
        return nodes, stages, p

    def pack(self, nodes: np.ndarray, stages: np.ndarray, p: np.ndarray) -> np.ndarray:
        return np.concatenate([nodes.ravel(), stages.ravel(), np.asarray(p)[list(self.free)]])

    def initial_vector(self, guess, p: np.ndarray | None = None) -> np.ndarray:
        """Unknown vector from a profile-like guess (callable on arrays of x)."""
        p = self.p if p is None else np.asarray(p, dtype=float)
        if (
            isinstance(guess, BvpSolution)
            and guess.problem.dim == self.dim
            and guess.problem.degree == self.degree
            and len(guess.problem.mesh) == len(self.mesh)
            and np.allclose(guess.problem.mesh, self.mesh)
        ):
            nodes, stages, _ = guess.problem.unpack(guess.z)
            return self.pack(nodes, stages, p)
        nodes = np.asarray(guess(self.mesh)).T.copy()
        points = self.stage_points
        states = np.asarray(guess(points.ravel())).T.reshape(self.intervals, self.degree, self.dim)
        stages = np.array(
            [
                [self.rhs(points[i, j], states[i, j], p) for j in range(self.degree)]
                for i in range(self.intervals)
            ]
        )
        return self.pack(nodes, stages, p)

    def profile(self, z: np.ndarray, free: tuple[int, ...] | None = None) -> CollocationProfile:
        nodes, stages, _ = self.unpack(z, free)
        return CollocationProfile(self.mesh, nodes.copy(), stages.copy(), self.tableau)

    def with_changes(self, **changes) -> "CollocationProblem":
        """Copy with some fields replaced (mesh is rebuilt unless given)."""
        values = {
            "rhs": self.rhs,
            "bc": self.bc,
            "dim": self.dim,
            "n_conditions": self.n_conditions,
            "p": self.p,
            "free": self.free,
            "interval": self.interval,
            "intervals": self.intervals,
            "degree": self.degree,
            "rhs_jacobian": self.rhs_jacobian,
            "integrand": self.integrand,
            "mesh": self.mesh,
            "name": self.name,
        }
        if "interval" in changes or "intervals" in changes:
            values["mesh"] = None
        values.update(changes)
        return CollocationProblem(**values)

    # -- residual and Jacobian -----------------------------------------------

    def _stage_states(self, nodes: np.ndarray, stages: np.ndarray) -> np.ndarray:
        return nodes[:-1, None, :] + self.steps[:, None, None] * np.einsum(
            "jk,ikn->ijn", self.tableau.A, stages
        )

    def _stage_rhs(self, states: np.ndarray, p: np.ndarray) -> np.ndarray:
        points = self.stage_points
        return np.array(
            [
                [self.rhs(points[i, j], states[i, j], p) for j in range(self.degree)]
                for i in range(self.intervals)
            ]
        )

    def _integrals(self, states: np.ndarray, p: np.ndarray) -> np.ndarray:
        if self.integrand is None:
            return np.zeros(0)
        points = self.stage_points
        total = 0.0
        for i in range(self.intervals):
            for j in range(self.degree):
                weight = self.steps[i] * self.tableau.b[j]
                value = np.atleast_1d(self.integrand(points[i, j], states[i, j], p))
                total = total + weight * value
        return np.asarray(total, dtype=float)

    def conditions(self, z: np.ndarray, free: tuple[int, ...] | None = None) -> np.ndarray:
        nodes, stages, p = self.unpack(z, free)
        q = self._integrals(self._stage_states(nodes, stages), p)
        return np.atleast_1d(np.asarray(self.bc(nodes[0], nodes[-1], p, q), dtype=float))

    def residual(self, z: np.ndarray, free: tuple[int, ...] | None = None) -> np.ndarray:
        nodes, stages, p = self.unpack(z, free)
        states = self._stage_states(nodes, stages)
        collocation = stages - self._stage_rhs(states, p)
        continuity = nodes[1:] - nodes[:-1] - self.steps[:, None] * np.einsum(
            "j,ijn->in", self.tableau.b, stages
        )
        q = self._integrals(states, p)
        bc = np.atleast_1d(np.asarray(self.bc(nodes[0], nodes[-1], p, q), dtype=float))
        return np.concatenate([collocation.ravel(), continuity.ravel(), bc])

    def _rhs_jacobian(self, x: float, u: np.ndarray, p: np.ndarray) -> np.ndarray:
        if self.rhs_jacobian is not None:
            return np.asarray(self.rhs_jacobian(x, u, p), dtype=float)
        jac = np.empty((self.dim, self.dim))
        for k in range(self.dim):
            h = 1e-7 * max(1.0, abs(u[k]))
            up, um = u.copy(), u.copy()
            up[k] += h
            um[k] -= h
            jac[:, k] = (self.rhs(x, up, p) - self.rhs(x, um, p)) / (2.0 * h)
        return jac

    def jacobian(self, z: np.ndarray, free: tuple[int, ...] | None = None) -> sparse.csc_matrix:
        free = self.free if free is None else free
        nodes, stages, p = self.unpack(z, free)
        n, m, N = self.dim, self.degree, self.intervals
        A, b, steps, points = self.tableau.A, self.tableau.b, self.steps, self.stage_points
        states = self._stage_states(nodes, stages)
        node_col = 0
        stage_col = self.n_node_unknowns
        param_col = self.n_node_unknowns + self.n_stage_unknowns
        continuity_row = N * m * n
        bc_row = continuity_row + N * n
        eye = np.eye(n)

        rows: list[np.ndarray] = []
        cols: list[np.ndarray] = []
        vals: list[np.ndarray] = []

        def add(r0: int, c0: int, block: np.ndarray):
            block = np.atleast_2d(block)
            r, c = np.nonzero(block)
            rows.append(r + r0)
            cols.append(c + c0)
            vals.append(block[r, c])

        for i in range(N):
            for j in range(m):
                row = (i * m + j) * n
                Jf = self._rhs_jacobian(points[i, j], states[i, j], p)
                add(row, node_col + i * n, -Jf)
                for k in range(m):
                    block = -steps[i] * A[j, k] * Jf
                    if k == j:
                        block = block + eye
                    add(row, stage_col + (i * m + k) * n, block)
            add(continuity_row + i * n, node_col + (i + 1) * n, eye)
            add(continuity_row + i * n, node_col + i * n, -eye)
            for j in range(m):
                add(continuity_row + i * n, stage_col + (i * m + j) * n, -steps[i] * b[j] * eye)

        for col, index in enumerate(free):
            h = 1e-7 * max(1.0, abs(p[index]))
            pp, pm = p.copy(), p.copy()
            pp[index] += h
            pm[index] -= h
            derivative = (self._stage_rhs(states, pp) - self._stage_rhs(states, pm)) / (2.0 * h)
            add(0, param_col + col, -derivative.reshape(-1, 1))

        bc_block = self._bc_jacobian(nodes, stages, states, p, free)
        add(bc_row, 0, bc_block)

        size = self.size(free)
        shape = (bc_row + self.n_conditions, size)
        return sparse.csc_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=shape
        )

    def norm_weights(
        self, free: tuple[int, ...] | None = None
    ) -> tuple[np.ndarray, np.ndarray]:
        """Row and column weights that turn Euclidean norms into L² and H¹ norms.

        Collocation defects carry the quadrature weight h·b_j, continuity
        defects are read as derivative defects (weight 1/h), conditions and
        parameters weigh 1. Nodes use trapezoid weights, stages (≈ u') h·b_j.
        """
        free = self.free if free is None else free
        n, steps = self.dim, self.steps
        stage = np.repeat((steps[:, None] * self.tableau.b[None, :]).ravel(), n)
        rows = np.concatenate([stage, np.repeat(1.0 / steps, n), np.ones(self.n_conditions)])
        node = np.zeros(self.intervals + 1)
        node[:-1] += steps / 2.0
        node[1:] += steps / 2.0
        cols = np.concatenate([np.repeat(node, n), stage, np.ones(len(free))])
        return rows, cols

    def scaled_jacobian(
        self, z: np.ndarray, free: tuple[int, ...] | None = None
    ) -> sparse.csc_matrix:
        """Jacobian in the weighted norms of ``norm_weights``; σ_min is mesh independent."""
        rows, cols = self.norm_weights(free)
        J = self.jacobian(z, free)
        return (sparse.diags(np.sqrt(rows)) @ J @ sparse.diags(1.0 / np.sqrt(cols))).tocsc()

    def _bc_jacobian(
        self,
        nodes: np.ndarray,
        stages: np.ndarray,
        states: np.ndarray,
        p: np.ndarray,
        free: tuple[int, ...],
    ) -> np.ndarray:
        """Dense rows of the boundary/integral conditions by central differences."""
        n, m, N = self.dim, self.degree, self.intervals
        ua, ub = nodes[0], nodes[-1]
        q = self._integrals(states, p)
        k = len(q)
        block = np.zeros((self.n_conditions, self.size(free)))

        def bc(ua, ub, p, q):
            return np.atleast_1d(np.asarray(self.bc(ua, ub, p, q), dtype=float))

        def central(fn, x: np.ndarray) -> np.ndarray:
            out = np.empty((self.n_conditions, len(x)))
            for c in range(len(x)):
                h = 1e-7 * max(1.0, abs(x[c]))
                xp, xm = x.copy(), x.copy()
                xp[c] += h
                xm[c] -= h
                out[:, c] = (fn(xp) - fn(xm)) / (2.0 * h)
            return out

        block[:, :n] += central(lambda v: bc(v, ub, p, q), ua.copy())
        block[:, N * n : (N + 1) * n] += central(lambda v: bc(ua, v, p, q), ub.copy())

        param_col = self.n_node_unknowns + self.n_stage_unknowns
        for col, index in enumerate(free):

            def with_param(v, index=index):
                pv = p.copy()
                pv[index] = v[0]
                return bc(ua, ub, pv, self._integrals(states, pv))

            block[:, param_col + col] = central(with_param, np.array([p[index]]))[:, 0]

        if k:
            dq = central(lambda v: bc(ua, ub, p, v), q.copy())
            points = self.stage_points
            steps, A, b = self.steps, self.tableau.A, self.tableau.b
            for i in range(N):
                for j in range(m):
                    G = self._integrand_jacobian(points[i, j], states[i, j], p, k)
                    weighted = dq @ (steps[i] * b[j] * G)
                    block[:, i * n : (i + 1) * n] += weighted
                    for kk in range(m):
                        c0 = self.n_node_unknowns + (i * m + kk) * n
                        block[:, c0 : c0 + n] += steps[i] * A[j, kk] * weighted
        return block

    def _integrand_jacobian(self, x: float, u: np.ndarray, p: np.ndarray, k: int) -> np.ndarray:
        jac = np.empty((k, self.dim))
        for c in range(self.dim):
            h = 1e-7 * max(1.0, abs(u[c]))
            up, um = u.copy(), u.copy()
            up[c] += h
            um[c] -= h
            jac[:, c] = (
                np.atleast_1d(self.integrand(x, up, p)) - np.atleast_1d(self.integrand(x, um, p))
            ) / (2.0 * h)
        return jac


@dataclass(eq=False)
class BvpSolution:
    """Converged collocation solution."""

    problem: CollocationProblem
    z: np.ndarray
    p: np.ndarray
    residual_norm: float
    sigma_min: float  # weighted, see CollocationProblem.norm_weights
    iterations: int = 0
    history: list[float] = field(default_factory=list)

    @cached_property
    def profile(self) -> CollocationProfile:
        return self.problem.profile(self.z)

    def __call__(self, x: float | np.ndarray) -> np.ndarray:
        return self.profile(x)

    @property
    def left(self) -> np.ndarray:
        return self.profile.nodes[0]

    @property
    def right(self) -> np.ndarray:
        return self.profile.nodes[-1]


def _factor(J: sparse.spmatrix):
    try:
        return splu(sparse.csc_matrix(J))
    except RuntimeError:
        raise SingularJacobianError(0.0, float("nan")) from None


def _max_norm(r: np.ndarray) -> float:
    return float(np.max(np.abs(r))) if len(r) else 0.0


def newton(
    residual: Callable[[np.ndarray], np.ndarray],
    jacobian: Callable[[np.ndarray], sparse.spmatrix],
    z: np.ndarray,
    tol: float,
    max_iterations: int = 30,
    max_halvings: int = 8,
) -> tuple[np.ndarray, float, int, list[float]]:
    """Damped Newton on the max-norm residual; halves the step until it decreases."""
    r = residual(z)
    norm = _max_norm(r)
    history = [norm]
    for iteration in range(max_iterations):
        if norm < tol:
            return z, norm, iteration, history
        dz = _factor(jacobian(z)).solve(-r)
        damping = 1.0
        for _ in range(max_halvings + 1):
            trial = z + damping * dz
            r_trial = residual(trial)
            norm_trial = _max_norm(r_trial)
            if np.isfinite(norm_trial) and norm_trial < norm:
                break
            damping /= 2.0
        else:
            raise NewtonError(history, "no residual decrease across damping sweep")
        z, r, norm = trial, r_trial, norm_trial
        history.append(norm)
    if norm < tol:
        return z, norm, max_iterations, history
    raise NewtonError(history, f"no convergence after {max_iterations} iterations")


def smallest_singular_value(J: sparse.spmatrix | np.ndarray, iterations: int = 60) -> float:
    """σ_min by inverse iteration on JᵀJ (dense SVD for small systems).

    A wide J (more columns than rows) is measured through J·Jᵀ, so the
    result is the smallest of its row-rank singular values.
    """
    if J.shape[0] <= DENSE_SVD_LIMIT:
        dense = J.toarray() if sparse.issparse(J) else np.asarray(J)
        return float(np.linalg.svd(dense, compute_uv=False)[min(dense.shape) - 1])
    if J.shape[0] < J.shape[1]:
        J = sparse.csc_matrix(J)
        return float(np.sqrt(smallest_singular_value((J @ J.T).tocsc(), iterations)))
    try:
        lu = splu(sparse.csc_matrix(J))
    except RuntimeError:
        return 0.0
    x = np.random.default_rng(0).standard_normal(J.shape[1])
    x /= np.linalg.norm(x)
    estimate = 0.0
    for _ in range(iterations):
        y = lu.solve(lu.solve(x, trans="T"))
        growth = float(np.linalg.norm(y))
        if not np.isfinite(growth) or growth == 0.0:
            return 0.0
        x = y / growth
        if estimate and abs(growth - estimate) <= 1e-10 * growth:
            estimate = growth
            break
        estimate = growth
    return float(1.0 / np.sqrt(estimate))


def largest_singular_value(J: sparse.spmatrix | np.ndarray) -> float:
    if J.shape[0] <= DENSE_SVD_LIMIT:
        dense = J.toarray() if sparse.issparse(J) else np.asarray(J)
        return float(np.linalg.svd(dense, compute_uv=False)[0])
    v0 = np.ones(min(J.shape)) / np.sqrt(min(J.shape))
    return float(svds(sparse.csc_matrix(J), k=1, v0=v0, return_singular_vectors=False)[0])


def check_regular(J: sparse.spmatrix | np.ndarray) -> float:
    """Return σ_min, raising SingularJacobianError below SINGULAR_RATIO·σ_max."""
    sigma_min = smallest_singular_value(J)
    sigma_max = largest_singular_value(J)
    if sigma_min < SINGULAR_RATIO * sigma_max:
        raise SingularJacobianError(sigma_min, sigma_max)
    return sigma_min


def solve_bvp(
    problem: CollocationProblem,
    guess,
    tol: float = 1e-10,
    p: np.ndarray | None = None,
    max_iterations: int = 30,
    max_halvings: int = 8,
) -> BvpSolution:
    """Solve ``problem`` by damped Newton from a profile guess.

    ``guess`` is any callable mapping an array of x to an (n, M) array, or a
    previous BvpSolution on the same mesh.
    """
    if tol <= 0:
        raise ValueError(f"tolerance must be positive, got {tol}")
    if p is not None:
        problem = problem.with_changes(p=np.asarray(p, dtype=float))
    z0 = problem.initial_vector(guess)
    z, norm, iterations, history = newton(
        problem.residual, problem.jacobian, z0, tol, max_iterations, max_halvings
    )
    check_regular(problem.jacobian(z))
    sigma_min = smallest_singular_value(problem.scaled_jacobian(z))
    _, _, p_final = problem.unpack(z)
    return BvpSolution(problem, z, p_final, norm, sigma_min, iterations, history)


def jacobian_regularity(solution: BvpSolution, extra: tuple[int, ...] = ()) -> float:
    """σ_min of the discretized linearization including parameter columns.

    Measured in the weighted norms of ``CollocationProblem.norm_weights``.
    ``extra`` appends columns for parameters that were fixed during the solve.
    """
    problem = solution.problem
    z = np.concatenate([solution.z, solution.p[list(extra)]])
    return smallest_singular_value(problem.scaled_jacobian(z, (*problem.free, *extra)))
