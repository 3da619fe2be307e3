"""Command-line front end: check, compile, svg, diff, sync and fmt over choreography scripts."""

import os
import sys
import functools

import click

from app_version import __version__

from logger.logger import app_logger

from choreo.errors import ChoreoError
from choreo.script import parse_file, print_script
from choreo.gesture import Tolerance
from choreo.elaborate import Elaboration, elaborate
from choreo.emit import emit_svg, emit_timeline
from choreo.validation import (
    EXIT_INPUT,
    ValidationResult,
    read_onsets,
    validate_sync_flags,
    validate_tolerances,
    validate_compile_flags,
)
from choreo.category import Status
from choreo.choreography import (
    NO_PULSE_ALIGNMENT,
    diff_choreographies,
    trajectory_distance,
    check_ensemble_sync,
    center_of_attention,
)

# ---- Config / constants ----
EPS_REL = float(os.getenv("CHOREO_EPS_REL", "1e-6"))
ETA_REL = float(os.getenv("CHOREO_ETA_REL", "0.05"))
N_CMP = int(os.getenv("CHOREO_N_CMP", "64"))
RATE = float(os.getenv("CHOREO_RATE", "8"))
KAPPA = float(os.getenv("CHOREO_KAPPA", "0.5"))
WORKERS = int(os.getenv("CHOREO_WORKERS", "0")) or None
PARALLEL = os.getenv("CHOREO_PARALLEL", "1").strip().lower() in {"1", "true", "yes", "y", "on"}
SYNC_WINDOW = 0.1  # beats
SYNC_ETA = 0.1  # beats

EXIT_VIOLATIONS = 1
EXIT_STRUCTURAL = 2


# ---- Errors ----
def handle_errors(fn):
    """Maps every failure of a command to an exit code and a one-line message on stderr."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (click.exceptions.Exit, click.ClickException, click.Abort):
            raise
        except ChoreoError as exc:
            app_logger.warning("%s failed: %s", fn.__name__, exc)
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_STRUCTURAL)
        except OSError as exc:
            app_logger.warning("%s failed: %s", fn.__name__, exc)
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_INPUT)
        except Exception as exc:
            app_logger.exception("Unhandled exception", exc_info=exc)
            click.echo(f"error: internal error: {exc}", err=True)
            sys.exit(EXIT_STRUCTURAL)

    return wrapper


def _require(result: ValidationResult):
    if result.error is not None:
        click.echo(f"error: {result.error}", err=True)
        sys.exit(result.exit_code or EXIT_INPUT)
    return result.value


def _load(path: str, eps: float | None = None, eta: float | None = None) -> Elaboration:
    flags = _require(validate_tolerances(eps, eta, N_CMP))
    tolerance = Tolerance(eps_rel=EPS_REL, eta_rel=ETA_REL, n_cmp=flags["n_cmp"], eps=flags["eps"], eta=flags["eta"])
    script = parse_file(path)
    return elaborate(script, tolerance, PARALLEL, WORKERS, source=path)


def _finish(elab: Elaboration, strict: bool) -> None:
    if strict and elab.report.violations:
        sys.exit(EXIT_VIOLATIONS)


eps_option = click.option("--eps", type=float, default=None, help="Absolute exactness tolerance (configuration units).")
eta_option = click.option("--eta", type=float, default=None, help="Absolute 2-cell budget (configuration units).")
strict_option = click.option("--strict", is_flag=True, help="Exit with status 1 when any law is violated.")


# ---- Commands ----
@click.group()
@click.version_option(__version__, prog_name="choreo")
def cli():
    """Choreography compiler: parse, elaborate and check scripts, emit timelines and keyframes."""


@cli.command()
@click.argument("file", type=click.Path(dir_okay=False))
@strict_option
@eps_option
@eta_option
@handle_errors
def check(file, strict, eps, eta):
    """Run the law suite over FILE and print every finding."""
    elab = _load(file, eps, eta)
    for finding in elab.report.findings:
        prefix = "warning" if finding.is_violation else "note"
        click.echo(f"{prefix}: {finding.render()}")
    summary = elab.report.summary()
    click.echo(f"{file}: {summary['violations']} violations, {summary['notes']} notes")
    _finish(elab, strict)


@cli.command(name="compile")
@click.argument("file", type=click.Path(dir_okay=False))
@click.option("--out", "out", required=True, type=click.Path(dir_okay=False), help="Timeline file ('-' for stdout).")
@click.option("--rate", type=float, default=RATE, show_default=True, help="Samples per beat.")
@click.option("--kappa", type=float, default=KAPPA, show_default=True, help="Speed weight of the center of attention.")
@strict_option
@eps_option
@eta_option
@handle_errors
def compile_(file, out, rate, kappa, strict, eps, eta):
    """Sample FILE into a JSON timeline."""
    flags = _require(validate_compile_flags(rate, kappa))
    elab = _load(file, eps, eta)
    text = emit_timeline(elab.functor, flags["rate"], flags["kappa"], elab.report, elab.track)
    if out == "-":
        click.echo(text, nl=False)
    else:
        with open(out, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        click.echo(f"{out}: written")
    _finish(elab, strict)


@cli.command()
@click.argument("file", type=click.Path(dir_okay=False))
@click.option("--out-dir", required=True, type=click.Path(file_okay=False), help="Directory for frame_NNN.svg files.")
@click.option("--every-beats", type=float, default=None, help="Frame spacing in beats (default: one frame per mark).")
@click.option("--kappa", type=float, default=KAPPA, show_default=True)
@handle_errors
def svg(file, out_dir, every_beats, kappa):
    """Draw stick-figure keyframes of FILE."""
    _require(validate_compile_flags(RATE, kappa))
    elab = _load(file)
    frames = emit_svg(elab.functor, every_beats, kappa, RATE)
    os.makedirs(out_dir, exist_ok=True)
    for name, text in frames:
        with open(os.path.join(out_dir, name), "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
    click.echo(f"{out_dir}: {len(frames)} frames")


@cli.command()
@click.argument("file_a", type=click.Path(dir_okay=False))
@click.argument("file_b", type=click.Path(dir_okay=False))
@strict_option
@eps_option
@eta_option
@handle_errors
def diff(file_a, file_b, strict, eps, eta):
    """Compare two choreographies over the same marks, square by square."""
    a = _load(file_a, eps, eta)
    b = _load(file_b, eps, eta)
    nat = diff_choreographies(a.functor, b.functor, eps=min(a.eps, b.eps), eta=min(a.eta, b.eta), n_cmp=N_CMP)
    for sq in nat.squares:
        click.echo(f"{sq.interval}: {sq.status.value} ({sq.discrepancy:.6g}, dancer {sq.dancer})")
    coa_a = center_of_attention(a.functor, KAPPA, RATE)
    coa_b = center_of_attention(b.functor, KAPPA, RATE)
    click.echo(f"center of attention: {trajectory_distance(coa_a, coa_b):.6g}")
    if strict and any(sq.status is Status.FAILS for sq in nat.squares):
        sys.exit(EXIT_VIOLATIONS)


@cli.command()
@click.argument("file", type=click.Path(dir_okay=False))
@click.option("--musician", required=True, type=click.Path(dir_okay=False), help="Musician onsets, one per line.")
@click.option("--dancer", required=True, type=click.Path(dir_okay=False), help="Dancer onsets, one per line.")
@click.option("--window", type=float, default=SYNC_WINDOW, show_default=True, help="Quantization window in beats.")
@strict_option
@click.option(
    "--eta",
    type=float,
    default=SYNC_ETA,
    show_default=True,
    help="Sync budget in beats: a dancer further than this from the beat fails the triangle.",
)
@handle_errors
def sync(file, musician, dancer, window, strict, eta):
    """Check the conductor -> musician -> dancer triangle against FILE's pulse."""
    flags = _require(validate_sync_flags(window, eta))
    music = _require(read_onsets(musician))
    steps = _require(read_onsets(dancer))
    elab = _load(file)
    result = check_ensemble_sync(elab.track, music, steps, flags["window"], flags["eta"])
    click.echo(f"[D6] {result.status.value} ({result.discrepancy:.6g})")
    if result.witness is not None:
        click.echo(f"worst: {result.witness[0]} vs {result.witness[1]}")
    for failure in result.failures:
        click.echo(f"  {failure}")
    if NO_PULSE_ALIGNMENT in result.failures:
        app_logger.info("sync: %s in %s", NO_PULSE_ALIGNMENT, dancer)
    if strict and result.status is Status.FAILS:
        sys.exit(EXIT_VIOLATIONS)


@cli.command()
@click.argument("file", type=click.Path(dir_okay=False))
@handle_errors
def fmt(file):
    """Print FILE in canonical form."""
    click.echo(print_script(parse_file(file)), nl=False)


def main():
    cli(prog_name="choreo")  # pylint: disable=no-value-for-parameter


if __name__ == "__main__":
    main()
