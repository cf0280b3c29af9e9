"""snakeloop CLI - verify isolas and snaking of localized patterns from front loops."""

import math
import sys
from collections.abc import Callable
from pathlib import Path

import click
import yaml
from rich.panel import Panel

from .config import ConfigValidationError, RunConfig
from .console import console
from .models import VerificationError
from .pipeline import Session

PHI0_CHOICES = {"0": 0.0, "pi": math.pi}


def _run(ctx: click.Context, action: Callable[[Session], object]) -> None:
    """Build the session, run one command and map failures to exit codes."""
    options = ctx.obj
    console.quiet = options["quiet"]
    console.print(Panel.fit("[bold]snakeloop[/] - Isolas and Snaking Check", style="blue"))

    try:
        session = Session.from_args(
            config_path=options["config_path"],
            overrides=options["overrides"],
            out=options["out"],
            seed=options["seed"],
            verbose=options["verbose"],
        )
    except (ConfigValidationError, yaml.YAMLError, ValueError, OSError) as e:
        console.print(f"[red]Error: {e}[/]")
        sys.exit(1)

    if session.verbose:
        session.print_info()

    try:
        action(session)
    except VerificationError as e:
        console.print(f"[red]Verification failed: {e}[/]")
        sys.exit(2)
    except (RuntimeError, ValueError) as e:
        console.print(f"[red]Error: {e}[/]")
        sys.exit(1)


def _phi0(value: str | None) -> float | None:
    return None if value is None else PHI0_CHOICES[value]


phi0_option = click.option(
    "--phi0",
    type=click.Choice(sorted(PHI0_CHOICES)),
    default=None,
    help="Symmetry phase (default: localized.phi0 from the config)",
)


@click.group()
@click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    default=None,
    help="YAML run configuration",
)
@click.option(
    "--set",
    "overrides",
    multiple=True,
    metavar="SECTION.KEY=VALUE",
    help="Override one config key (repeatable)",
)
@click.option(
    "--out",
    type=click.Path(file_okay=False, path_type=Path),
    default=None,
    help="Output directory (default: output.directory)",
)
@click.option("--seed", type=click.IntRange(min=0), default=None, help="Sampling seed")
@click.option("--quiet", is_flag=True, help="Suppress console output")
@click.option("--verbose", "-v", is_flag=True, help="Show per-step progress")
@click.pass_context
def main(
    ctx: click.Context,
    config_path: Path | None,
    overrides: tuple[str, ...],
    out: Path | None,
    seed: int | None,
    quiet: bool,
    verbose: bool,
) -> None:
    """Compute front loops, classify isolas vs snaking, and check localized branches.

    Every command writes its artifacts to the output directory; later
    commands read what earlier ones wrote.
    """
    ctx.obj = {
        "config_path": config_path,
        "overrides": overrides,
        "out": out,
        "seed": seed,
        "quiet": quiet,
        "verbose": verbose,
    }


@main.command()
@click.pass_context
def spectrum(ctx: click.Context) -> None:
    """Check reversibility and print the spectrum at the equilibrium."""
    _run(ctx, lambda s: s.spectrum())


@main.command()
@click.pass_context
def wavetrain(ctx: click.Context) -> None:
    """Compute the wave train, its Floquet data and its family."""
    _run(ctx, lambda s: s.wavetrain())


@main.command("front-loop")
@click.pass_context
def front_loop(ctx: click.Context) -> None:
    """Solve a patterned front and continue it around its loop."""
    _run(ctx, lambda s: s.front_loop())


@main.command("classify")
@click.pass_context
def classify_command(ctx: click.Context) -> None:
    """Classify the stored front loop as isolas or snaking."""
    _run(ctx, lambda s: s.classify())


@main.command()
@phi0_option
@click.pass_context
def predict(ctx: click.Context, phi0: str | None) -> None:
    """Write the predicted (L, μ) branches."""
    _run(ctx, lambda s: s.predict(_phi0(phi0)))


@main.command()
@phi0_option
@click.pass_context
def localized(ctx: click.Context, phi0: str | None) -> None:
    """Solve and continue localized states."""
    _run(ctx, lambda s: s.localized(_phi0(phi0)))


@main.command()
@phi0_option
@click.pass_context
def compare(ctx: click.Context, phi0: str | None) -> None:
    """Compare computed branches with the predictions and fit the decay rate."""
    _run(ctx, lambda s: s.compare(_phi0(phi0)))


@main.command("nf-verify")
@click.pass_context
def nf_verify(ctx: click.Context) -> None:
    """Measure the passage expansion residuals of a normal-form preset."""
    _run(ctx, lambda s: s.nf_verify())


@main.command("nf-match")
@click.pass_context
def nf_match(ctx: click.Context) -> None:
    """Solve the reduced matching system at one (s, n)."""
    _run(ctx, lambda s: s.nf_match())


@main.command("nf-sweep")
@click.pass_context
def nf_sweep(ctx: click.Context) -> None:
    """Sweep the reduced matching system into branches."""
    _run(ctx, lambda s: s.nf_sweep())


@main.command()
@phi0_option
@click.pass_context
def plot(ctx: click.Context, phi0: str | None) -> None:
    """Render bifurcation diagrams as SVG."""
    _run(ctx, lambda s: s.plot(_phi0(phi0)))


@main.command()
@click.pass_context
def pipeline(ctx: click.Context) -> None:
    """Run every full-system step, with one leg per φ₀."""
    _run(ctx, lambda s: s.pipeline())


@main.command("config")
def config_template() -> None:
    """Print a commented configuration template with every default."""
    click.echo(RunConfig.generate_template())


if __name__ == "__main__":
    main()
