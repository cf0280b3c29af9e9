"""Session state and the command implementations behind the CLI."""

from dataclasses import dataclass, field
from pathlib import Path

import click
import numpy as np
import pandas as pd
from rich.table import Table

from .artifacts import (
    ArtifactError,
    load_front_archive,
    phase_loop_from_frame,
    read_csv,
    read_json,
    save_front_archive,
    write_csv,
    write_json,
)
from .config import RunConfig
from .console import console, note, warn
from .constants import ARTIFACTS, phi0_tag
from .fronts import FrontLoop, continue_front_loop, solve_front
from .localized import (
    ComparisonReport,
    LocalizedBranch,
    compare_to_prediction,
    continue_localized_branch,
    solve_localized,
)
from .models import VerificationError
from .normal_form import (
    data_preset,
    model_preset,
    nf_branch_sweep,
    nf_matching_solve,
    verify_expansion,
)
from .plotting import bifurcation_diagram, phase_loop_diagram
from .systems import (
    EquilibriumError,
    ReversibleSystem,
    builtin_system,
    check_reversibility,
    equilibrium_spectrum,
)
from .topology import (
    ISOLAS,
    SNAKING,
    BranchPrediction,
    PhaseLoop,
    classify,
    extend_lifting,
    predict_branches,
)
from .wavetrain import (
    PeriodicOrbit,
    continue_family,
    cosine_guess,
    elementary_check,
    find_wave_train,
    galerkin_ansatz,
)

# Commands in pipeline order; the per-φ₀ legs follow `classify`
COMMANDS = (
    "spectrum",
    "wavetrain",
    "front-loop",
    "classify",
    "predict",
    "localized",
    "compare",
    "nf-verify",
    "nf-match",
    "nf-sweep",
    "plot",
    "pipeline",
)


def _messages(diagnostics) -> list[str]:
    return [d.message for d in diagnostics]


@dataclass
class Session:
    """One snakeloop run: configuration, output directory and the system under study."""

    config: RunConfig
    out_dir: Path
    system: ReversibleSystem
    legs: bool = False

    # Internal state
    _orbit: PeriodicOrbit | None = field(default=None, repr=False)

    @classmethod
    def from_args(
        cls,
        config_path: Path | None = None,
        overrides: tuple[str, ...] = (),
        out: Path | None = None,
        seed: int | None = None,
        verbose: bool = False,
    ) -> "Session":
        """Create a Session from CLI arguments.

        ``--out``, ``--seed`` and ``--verbose`` win over the config file and
        ``--set`` overrides.

        Raises:
            ConfigValidationError: If the config has unknown keys or invalid values
            UnknownSystemError: If ``system.name`` is not a built-in system
        """
        config = RunConfig.load(config_path, overrides)
        if out is not None:
            config.output.directory = str(out)
        if seed is not None:
            config.output.seed = seed
        config.output.verbose = config.output.verbose or verbose
        system = builtin_system(config.system.name, b=config.system.b)
        return cls(config=config, out_dir=Path(config.output.directory), system=system)

    @property
    def verbose(self) -> bool:
        return self.config.output.verbose

    def print_info(self) -> None:
        """Print a summary of the run settings."""
        c = self.config
        table = Table(show_header=False, box=None, padding=(0, 1))
        table.add_column(style="bold")
        table.add_column(style="cyan")
        table.add_row("System", f"{c.system.name} (b={c.system.b:g})")
        lo, hi = c.system.mu_window
        table.add_row("μ", f"{c.system.mu:g} in [{lo:g}, {hi:g}]")
        table.add_row("φ₀", c.localized.phi0)
        table.add_row("Output", str(self.out_dir))
        table.add_row("Seed", str(c.output.seed))
        console.print(table)

    # Paths

    def path(self, key: str, phi0: float | None = None) -> Path:
        """Artifact path; per-φ₀ artifacts go into ``phi0_<tag>/`` during a pipeline run."""
        name = ARTIFACTS[key]
        if phi0 is None:
            return self.out_dir / name
        tag = phi0_tag(phi0)
        base = self.out_dir / f"phi0_{tag}" if self.legs else self.out_dir
        return base / name.format(tag=tag)

    def _phi0s(self, phi0: float | None) -> list[float]:
        return self.config.phi0_values if phi0 is None else [phi0]

    # Full-system commands

    def spectrum(self) -> dict:
        """Reversibility sample check and the spectrum of f_u(0, μ)."""
        c = self.config
        report = check_reversibility(
            self.system, seed=c.output.seed, mu_range=tuple(c.system.mu_window)
        )
        data: dict = {
            "system": self.system.name,
            "involution_residual": report.involution_residual,
            "anti_equivariance_residual": report.anti_equivariance_residual,
            "fix_dimension": report.fix_dimension,
            "equilibrium_residual": report.equilibrium_residual,
            "samples": report.samples,
            "seed": report.seed,
            "passed": report.passed,
            "diagnostics": _messages(report.diagnostics),
        }
        try:
            data |= equilibrium_spectrum(self.system, c.system.mu).to_dict()
        except EquilibriumError as e:
            warn(str(e))
            data["diagnostics"].append(str(e))
        write_json(data, self.path("spectrum"), "spectrum")
        if not report.passed:
            raise RuntimeError(
                f"{self.system.name} fails the reversibility check: "
                + "; ".join(d.message for d in report.diagnostics if d.fatal)
            )
        console.print(
            f"[green]Reversible[/] {self.system.name}: anti-equivariance residual "
            f"{report.anti_equivariance_residual:.2e}"
        )
        return data

    def _wave_train_guess(self):
        c = self.config
        if self.system.name == "sh23":
            c0, A = galerkin_ansatz(c.system.mu, c.system.b, c.wavetrain.varpi)
            return cosine_guess(c0, A, c.wavetrain.varpi)
        if self.system.name == "linear-test":
            varpi = c.wavetrain.varpi

            def circle(theta: np.ndarray) -> np.ndarray:
                theta = np.asarray(theta, dtype=float)
                zero = np.zeros_like(theta)
                return np.array([np.cos(theta), -varpi * np.sin(theta), zero, zero])

            return circle
        raise ValueError(f"no wave-train initial guess for system '{self.system.name}'")

    def wave_train(self) -> PeriodicOrbit:
        """The wave train at ``system.mu`` (computed once per session)."""
        if self._orbit is None:
            c = self.config
            w = c.wavetrain
            self._orbit = find_wave_train(
                self.system,
                c.system.mu,
                self._wave_train_guess(),
                w.varpi,
                kappa=None,
                pin_index=w.pin_index,
                tol=c.continuation.newton_tol,
                intervals=c.continuation.mesh_intervals,
                degree=c.continuation.degree,
                max_halvings=c.continuation.max_halvings,
                min_amplitude=w.min_amplitude,
                alpha_min=w.alpha_min,
                cluster_tol=w.cluster_tol,
                monodromy_tol=w.monodromy_tol,
            )
        return self._orbit

    def wavetrain(self) -> dict:
        """Wave train, Floquet data, elementary-orbit measure and its family."""
        c = self.config
        orbit = self.wave_train()
        measure = elementary_check(self.system, orbit)
        if c.wavetrain.kappa_range is not None:
            direction, window = "kappa", tuple(c.wavetrain.kappa_range)
        else:
            direction, window = "mu", tuple(c.system.mu_window)
        family = continue_family(self.system, orbit, direction, window, c.step_config())
        write_csv(family.to_frame(), self.path("family"), "wavetrain")
        data = orbit.to_dict() | {
            "elementary_measure": measure,
            "family_direction": direction,
            "family_tangent_norm": family.tangent_norm,
            "family_truncated": family.truncated,
            "diagnostics": _messages(orbit.diagnostics) + _messages(family.diagnostics),
        }
        write_json(data, self.path("wavetrain"), "wavetrain")
        console.print(
            f"[green]Wave train[/] mu={orbit.mu:g}, varpi={orbit.varpi:g}, "
            f"alpha={orbit.alpha:.6g}, elementary measure {measure:.3e}"
        )
        return data

    def front_loop(self) -> FrontLoop:
        """Solve the first front and continue it around its loop."""
        c = self.config
        f = c.front
        orbit = self.wave_train()
        front = solve_front(
            self.system,
            orbit,
            periods=f.periods,
            delta=f.delta,
            psi_guess=f.psi_guess,
            intervals=f.intervals,
            tol=c.continuation.newton_tol,
            degree=c.continuation.degree,
            max_halvings=c.continuation.max_halvings,
            epsilon_fraction=c.localized.epsilon_fraction,
        )
        if self.verbose:
            note(f"front at mu={front.mu:g}: psi={front.psi:.6f}, sigma_min={front.sigma_min:.3e}")
        loop = continue_front_loop(
            self.system,
            front,
            c.step_config(),
            phase_gap=f.phase_gap,
            sigma_threshold=f.sigma_threshold,
            epsilon_fraction=c.localized.epsilon_fraction,
        )
        write_csv(loop.to_frame(), self.path("front-loop"), "front-loop")
        save_front_archive(loop, self.path("front-profiles"))
        if loop.closed:
            console.print(
                f"[green]Front loop closed[/] with {len(loop.fronts)} samples, "
                f"min sigma {loop.sigma_min.min():.3e}"
            )
        else:
            warn(f"front loop did not close: {loop.reason}")
        return loop

    def phase_loop(self) -> PhaseLoop:
        """The stored front loop with its plateau-exit offsets."""
        frame = read_csv(self.path("front-loop"), "front-loop")
        archive = read_json(self.path("front-profiles"), "front-loop")
        offsets = np.array([record["exit_offset"] for record in archive["samples"]])
        if len(offsets) != len(frame):
            raise ArtifactError(
                self.path("front-profiles"), "front-loop", "sample count differs from the loop CSV"
            )
        return phase_loop_from_frame(
            frame, offsets, self.config.continuation.closure_tol, closed=archive.get("closed")
        )

    def classify(self) -> dict:
        loop = self.phase_loop()
        result = classify(loop)
        data = {
            "mode": result.mode,
            "winding": result.winding,
            "samples": len(loop.s),
            "lifted_start": float(result.path.lifted[0]),
            "lifted_end": float(result.path.lifted[-1]),
        }
        write_json(data, self.path("classify"), "classify")
        click.echo(str(result))
        return data

    def predictions(self, phi0: float) -> list[BranchPrediction]:
        """Leading-order branches for ``phi0`` from the stored front loop."""
        t = self.config.topology
        loop = self.phase_loop()
        if classify(loop).mode == ISOLAS:
            return predict_branches(loop, phi0, n_range=(t.n_min, t.n_max), ell_star=t.ell_star)
        return predict_branches(
            loop,
            phi0,
            s_range=(t.s_min, t.s_max),
            ell_star=t.ell_star,
            samples_per_turn=t.samples_per_turn,
        )

    def predict(self, phi0: float | None = None) -> list[Path]:
        paths = []
        for value in self._phi0s(phi0):
            branches = self.predictions(value)
            frame = pd.concat([b.to_frame() for b in branches], ignore_index=True)
            paths.append(write_csv(frame, self.path("prediction", value), "predict"))
            console.print(
                f"[green]Predicted[/] {len(branches)} {branches[0].mode} branch(es) "
                f"for phi0={phi0_tag(value)}"
            )
        return paths

    def _start_index(self, loop: PhaseLoop, prediction: BranchPrediction) -> int:
        """Index of the loop sample the prediction's first point comes from."""
        if prediction.mode == ISOLAS:
            return 0
        extended = extend_lifting(classify(loop).path)
        original = float(extended.base_parameter(prediction.s[0]))
        loop_s = (loop.s - loop.s[0]) / (loop.s[-1] - loop.s[0])
        return int(np.argmin(np.abs(loop_s - original)))

    def localized(self, phi0: float | None = None) -> list[LocalizedBranch]:
        """Solve and continue localized states from each predicted starting point."""
        c = self.config
        fronts = load_front_archive(self.path("front-profiles"), self.system)
        loop = self.phase_loop()
        computed = []
        for value in self._phi0s(phi0):
            branches = []
            for prediction in self.predictions(value):
                index = self._start_index(loop, prediction)
                L_target = float(prediction.measured_length()[0])
                if self.verbose:
                    note(f"phi0={phi0_tag(value)}: start at L={L_target:.4f} from sample {index}")
                state = solve_localized(
                    self.system,
                    fronts[index],
                    value,
                    L_target,
                    epsilon_fraction=c.localized.epsilon_fraction,
                    tail_periods=c.localized.tail_periods,
                    tol=c.continuation.newton_tol,
                    degree=c.continuation.degree,
                    max_halvings=c.continuation.max_halvings,
                )
                branches.append(
                    continue_localized_branch(
                        self.system,
                        state,
                        mode=prediction.mode,
                        config=c.step_config(),
                        L_budget=c.localized.L_budget,
                        epsilon_fraction=c.localized.epsilon_fraction,
                    )
                )
            frame = pd.concat([b.to_frame() for b in branches], ignore_index=True)
            write_csv(frame, self.path("localized", value), "localized")
            summary = {
                "phi0": value,
                "mode": branches[0].mode,
                "branches": [
                    {
                        "closed": b.closed,
                        "truncated": b.truncated,
                        "reason": b.reason,
                        "points": len(b),
                        "diagnostics": _messages(b.diagnostics),
                    }
                    for b in branches
                ],
            }
            write_json(summary, self.path("localized-summary", value), "localized")
            console.print(
                f"[green]Localized[/] phi0={phi0_tag(value)}: {len(branches)} branch(es), "
                f"{sum(len(b) for b in branches)} points"
            )
            computed.extend(branches)
        return computed

    def stored_branches(self, phi0: float) -> list[LocalizedBranch]:
        """Branches from the localized CSV; a new branch starts wherever ``index`` is 0."""
        frame = read_csv(self.path("localized", phi0), "localized")
        summary = read_json(self.path("localized-summary", phi0), "localized")
        starts = np.flatnonzero(frame["index"].to_numpy() == 0).tolist() + [len(frame)]
        records = summary["branches"]
        if len(records) != len(starts) - 1:
            raise ArtifactError(
                self.path("localized-summary", phi0), "localized", "branch count mismatch"
            )
        branches = []
        for record, lo, hi in zip(records, starts[:-1], starts[1:], strict=True):
            part = frame.iloc[lo:hi]
            branches.append(
                LocalizedBranch(
                    phi0=phi0,
                    mu=part["mu"].to_numpy(),
                    L=part["L"].to_numpy(),
                    arclength=part["s_or_arclength"].to_numpy(),
                    residual=part["residual"].to_numpy(),
                    sigma_min=part["sigma_min"].to_numpy(),
                    mode=summary["mode"],
                    closed=record["closed"],
                    truncated=record["truncated"],
                    reason=record["reason"],
                )
            )
        return branches

    def compare(self, phi0: float | None = None, fail: bool = True) -> list[ComparisonReport]:
        """Compare stored branches with their predictions.

        Raises:
            VerificationError: If ``fail`` and some β̂ is not positive
            TopologyMismatchError: If a closed branch meets a snake or vice versa
        """
        reports = []
        for value in self._phi0s(phi0):
            report = compare_to_prediction(self.stored_branches(value), self.predictions(value))
            data = report.to_dict() | {"diagnostics": _messages(report.diagnostics)}
            write_json(data, self.path("compare", value), "compare")
            colour = "green" if report.passed else "red"
            console.print(
                f"[{colour}]Compare[/] phi0={phi0_tag(value)}: {report.mode} w={report.winding}, "
                f"beta_hat={report.beta_hat:.4g}, fit residual {report.fit_residual:.3g}"
            )
            reports.append(report)
        failed = [r for r in reports if not r.passed]
        if fail and failed:
            raise VerificationError(
                "decay rate not positive for phi0="
                + ", ".join(phi0_tag(r.phi0) for r in failed)
            )
        return reports

    def plot(self, phi0: float | None = None) -> list[Path]:
        """Bifurcation diagrams of computed branches over predictions, and the phase loop."""
        frame = read_csv(self.path("front-loop"), "front-loop")
        paths = [
            phase_loop_diagram(frame, self.path("phase-plot"), f"{self.system.name} front loop")
        ]
        for value in self._phi0s(phi0):
            predictions = [
                pd.DataFrame({"L": p.measured_length(), "mu": p.mu})
                for p in self.predictions(value)
            ]
            try:
                computed = read_csv(self.path("localized", value), "localized")
            except ArtifactError as e:
                warn(f"{e}; plotting predictions only")
                computed = None
            title = f"{self.system.name}, phi0={phi0_tag(value)}"
            paths.append(
                bifurcation_diagram(computed, predictions, self.path("plot", value), title)
            )
        console.print(f"[green]Plotted[/] {len(paths)} file(s)")
        return paths

    def pipeline(self) -> list[ComparisonReport]:
        """spectrum → wavetrain → front-loop → classify, then one leg per φ₀."""
        self.spectrum()
        self.wavetrain()
        self.front_loop()
        self.classify()
        self.legs = True
        reports = []
        for value in self.config.phi0_values:
            console.print(f"\n[bold]Leg phi0={phi0_tag(value)}[/]")
            self.predict(value)
            self.localized(value)
            reports.extend(self.compare(value, fail=False))
            self.plot(value)
        failed = [r for r in reports if not r.passed]
        if failed:
            raise VerificationError(
                "decay rate not positive for phi0="
                + ", ".join(phi0_tag(r.phi0) for r in failed)
            )
        return reports

    # Normal-form lab

    def _regime(self, data) -> str:
        return ISOLAS if data.winding == 0 else SNAKING

    def nf_verify(self) -> dict:
        nf = self.config.normal_form
        model = model_preset(nf.model)
        table = verify_expansion(model, nf.phi0, nf.kappa0, nf.mu, rtol=nf.rtol)
        write_csv(table.frame, self.path("nf-verify"), "nf-verify")
        report = table.report() | {
            "model": model.name,
            "diagnostics": _messages(table.diagnostics),
        }
        write_json(report, self.path("nf-verify-report"), "nf-verify")
        if np.isnan(table.beta_hat):
            console.print(
                f"[green]Expansion exact[/] for '{model.name}': max residual "
                f"{table.frame['r_max'].max():.2e}"
            )
        elif table.beta_hat <= 0:
            raise VerificationError(
                f"expansion residuals do not decay (beta_hat={table.beta_hat:.4g})"
            )
        else:
            console.print(
                f"[green]Expansion[/] '{model.name}': beta_hat={table.beta_hat:.4g}, "
                f"fit residual {table.fit_residual:.3g}"
            )
        return report

    def nf_match(self) -> dict:
        nf = self.config.normal_form
        data = data_preset(nf.data, nf.mu)
        regime = self._regime(data)
        solution = nf_matching_solve(
            model_preset(nf.model),
            data,
            nf.phi0,
            nf.s,
            nf.n if regime == ISOLAS else None,
            regime,
            tol=self.config.continuation.newton_tol,
            rtol=nf.rtol,
        )
        result = solution.to_dict() | {"regime": regime, "data": data.name}
        write_json(result, self.path("nf-match"), "nf-match")
        console.print(
            f"[green]Matched[/] L={solution.L:.10g}, mu={solution.mu:.10g}, b={solution.b:.3e}"
        )
        return result

    def nf_sweep(self) -> pd.DataFrame:
        nf = self.config.normal_form
        t = self.config.topology
        data = data_preset(nf.data, nf.mu)
        regime = self._regime(data)
        result = nf_branch_sweep(
            model_preset(nf.model),
            data,
            nf.phi0,
            regime,
            n_range=(t.n_min, t.n_max) if regime == ISOLAS else None,
            s_range=(t.s_min, t.s_max) if regime == SNAKING else None,
            samples=nf.samples,
            closure_tol=self.config.continuation.closure_tol,
            tol=self.config.continuation.newton_tol,
        )
        frame = result.to_frame()
        write_csv(frame, self.path("nf-sweep"), "nf-sweep")
        console.print(
            f"[green]Swept[/] {len(result.branches)} {regime} branch(es), w={result.winding}"
        )
        return frame
