"""Command-line interface for relaygap."""

from __future__ import annotations

import dataclasses
import math
import sys
from collections.abc import Iterator
from contextlib import contextmanager
from pathlib import Path

import click
from ulid import ULID

from .codes import PRESET_NAMES, build_preset
from .config import load_relay_config
from .f2core import bits_to_str, bitvec
from .harness import (
    SAMPLING_STREAM,
    STATISTICS,
    DecodeAuditError,
    ExperimentConfig,
    run_experiment,
    sample_shot,
    summarize,
    sweep_thresholds,
)
from .oracle import class_distribution, exact_gap_via_forced
from .plotting import write_curve_svg
from .problem import DecodingProblem, load_dem, serialize_dem, with_uniform_priors
from .records import read_shot_records, write_curve_csv, write_curve_json, write_shot_records
from .relaybp import MEMORY_PRESETS, RelayConfig, derive_seed, make_rng

REDUCTION_TOLERANCE = 1e-9

# Markdown report of the current command, if --report was given
_report_file = None


class DataError(click.ClickException):
    """Invalid input data or a failed run; exits with status 2."""

    exit_code = 2

    def show(self, file=None) -> None:
        click.echo(click.style(f"Error: {self.format_message()}", fg="red"), err=True)


class RelayGapGroup(click.Group):
    """Group that exits 1 on usage errors and 2 on data errors."""

    def main(self, args=None, prog_name=None, complete_var=None, standalone_mode=True, **extra):
        try:
            rv = super().main(args, prog_name, complete_var, standalone_mode=False, **extra)
        except click.UsageError as e:
            e.show()
            sys.exit(1)
        except click.ClickException as e:
            e.show()
            sys.exit(e.exit_code)
        except click.Abort:
            click.echo(click.style("Aborted!", fg="red"), err=True)
            sys.exit(1)
        if standalone_mode:
            sys.exit(rv if isinstance(rv, int) else 0)
        return rv


class ThresholdList(click.ParamType):
    """Comma-separated non-negative thresholds; ``inf`` is allowed."""

    name = "thresholds"

    def convert(self, value, param, ctx):
        if isinstance(value, list):
            return value
        thresholds = []
        for token in str(value).split(","):
            token = token.strip()
            try:
                t = float(token)
            except ValueError:
                self.fail(f"{token!r} is not a number", param, ctx)
            if math.isnan(t) or t < 0:
                self.fail(f"threshold {token!r} must be >= 0", param, ctx)
            thresholds.append(t)
        return sorted(thresholds)


def print_output(message: str = ""):
    """Print to console and append to the run report, if one is open.

    Args:
        message: The message to print (plain text or markdown)
    """
    click.echo(message)
    if _report_file and not _report_file.closed:
        _report_file.write(message + "\n")
        _report_file.flush()


@contextmanager
def run_report(path: Path | None, title: str) -> Iterator[None]:
    """Mirror :func:`print_output` into a Markdown report headed by a job id."""
    global _report_file
    if path is None:
        yield
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    job_id = str(ULID())[4:14]
    _report_file = open(path, "w", encoding="utf-8")
    try:
        _report_file.write(f"# {title}\n\n**Job ID:** {job_id}\n\n---\n\n")
        yield
    finally:
        _report_file.close()
        _report_file = None


def _load_problem(
    preset: str | None, dem: Path | None, p: float | None, side: str
) -> DecodingProblem:
    if (preset is None) == (dem is None):
        raise click.UsageError("Give exactly one of a preset name or --dem PATH")
    if preset is not None:
        if p is None:
            raise click.UsageError(f"Preset {preset!r} needs --p")
        return build_preset(preset, p, side)
    prob = load_dem(dem)
    return prob if p is None else with_uniform_priors(prob, p)


@contextmanager
def data_errors() -> Iterator[None]:
    """Turn library errors into exit status 2."""
    try:
        yield
    except (ValueError, FileNotFoundError, DecodeAuditError) as e:
        raise DataError(str(e)) from e


preset_option = click.option(
    "--preset",
    type=click.Choice(PRESET_NAMES),
    help="Built-in code instead of a DEM file.",
)
dem_option = click.option(
    "--dem",
    type=click.Path(dir_okay=False, path_type=Path),
    help="Detector error model file.",
)
p_option = click.option(
    "--p",
    "p",
    type=float,
    help="Uniform fault prior (required for presets, overrides DEM priors).",
)
side_option = click.option(
    "--side",
    type=click.Choice(["X", "Z"]),
    default="Z",
    show_default=True,
    help="Check side of CSS presets.",
)
seed_option = click.option(
    "--seed",
    type=click.IntRange(min=0),
    envvar="FG_SEED",
    default=0,
    show_default=True,
    help="Master seed (defaults to $FG_SEED).",
)
report_option = click.option(
    "--report",
    type=click.Path(dir_okay=False, path_type=Path),
    help="Also write the console output to this Markdown report.",
)


@click.group(cls=RelayGapGroup)
@click.version_option(package_name="relaygap")
def cli():
    """relaygap - Forced-gap post-selection for quantum LDPC codes."""


@cli.command()
@click.argument("preset", required=False, type=click.Choice(PRESET_NAMES))
@dem_option
@p_option
@side_option
@click.option(
    "--out",
    type=click.Path(dir_okay=False, path_type=Path),
    help="Output DEM file (printed to stdout when omitted).",
)
def build(preset: str | None, dem: Path | None, p: float | None, side: str, out: Path | None):
    """Write a decoding problem as DEM text.

    Either a preset (rep3, rep5, bb72, bb144) with --p, or an existing DEM
    whose priors are optionally replaced with --p.
    """
    with data_errors():
        prob = _load_problem(preset, dem, p, side)
        text = serialize_dem(prob)
    if out is None:
        click.echo(text, nl=False)
        return
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text, encoding="utf-8")
    click.echo(
        f"✓ Wrote {out} (N={prob.num_faults}, M={prob.num_detectors}, K={prob.num_observables})"
    )


def _relay_configs(
    baseline_config: Path | None,
    forced_config: Path | None,
    memory_preset: str | None,
    gamma_min: float | None,
    gamma_max: float | None,
    stop_nconv: int | None,
    baseline_sets: int | None,
    forced_sets: int | None,
) -> tuple[RelayConfig, RelayConfig]:
    """Defaults, then memory preset, then config files, then flags."""
    baseline = RelayConfig()
    if memory_preset:
        baseline = baseline.with_memory_preset(memory_preset)
    forced = baseline.for_forced_runs()
    if baseline_config:
        baseline = load_relay_config(baseline_config, baseline)
    if forced_config:
        forced = load_relay_config(forced_config, forced)

    shared = {
        key: value
        for key, value in (
            ("gamma_min", gamma_min),
            ("gamma_max", gamma_max),
            ("stop_nconv", stop_nconv),
        )
        if value is not None
    }
    baseline = dataclasses.replace(baseline, **shared)
    forced = dataclasses.replace(forced, **shared)
    if baseline_sets is not None:
        baseline = dataclasses.replace(baseline, num_sets=baseline_sets)
    if forced_sets is not None:
        forced = dataclasses.replace(forced, num_sets=forced_sets)
    return baseline, forced


@cli.command()
@preset_option
@dem_option
@p_option
@side_option
@click.option("--shots", type=click.IntRange(min=1), default=1000, show_default=True)
@seed_option
@click.option("--rounds", type=click.IntRange(min=1), default=1, show_default=True)
@click.option(
    "--baseline-config",
    type=click.Path(dir_okay=False, path_type=Path),
    help="key=value decoder parameters of baseline runs.",
)
@click.option(
    "--forced-config",
    type=click.Path(dir_okay=False, path_type=Path),
    help="key=value decoder parameters of forced runs.",
)
@click.option("--workers", type=click.IntRange(min=1), default=1, show_default=True)
@click.option(
    "--out",
    type=click.Path(dir_okay=False, path_type=Path),
    required=True,
    help="Shot records CSV.",
)
@click.option(
    "--statistic",
    type=click.Choice(STATISTICS),
    default="forced",
    show_default=True,
    help="'exact' uses the exhaustive oracle (small problems only).",
)
@click.option("--memory-preset", type=click.Choice(sorted(MEMORY_PRESETS)))
@click.option("--gamma-min", type=float)
@click.option("--gamma-max", type=float)
@click.option("--stop-nconv", type=click.IntRange(min=1))
@click.option("--baseline-sets", type=click.IntRange(min=1))
@click.option("--forced-sets", type=click.IntRange(min=1))
@report_option
def run(
    preset: str | None,
    dem: Path | None,
    p: float | None,
    side: str,
    shots: int,
    seed: int,
    rounds: int,
    baseline_config: Path | None,
    forced_config: Path | None,
    workers: int,
    out: Path,
    statistic: str,
    memory_preset: str | None,
    gamma_min: float | None,
    gamma_max: float | None,
    stop_nconv: int | None,
    baseline_sets: int | None,
    forced_sets: int | None,
    report: Path | None,
):
    """Sample shots, decode them with the forced gap and write shot records.

    Records depend only on the inputs and --seed, not on --workers.
    """
    if dem is None and preset is None:
        raise click.UsageError("Missing option '--dem' (or '--preset')")
    with data_errors():
        prob = _load_problem(preset, dem, p, side)
        baseline, forced = _relay_configs(
            baseline_config,
            forced_config,
            memory_preset,
            gamma_min,
            gamma_max,
            stop_nconv,
            baseline_sets,
            forced_sets,
        )
        cfg = ExperimentConfig(
            source=prob,
            baseline=baseline,
            forced=forced,
            n_shots=shots,
            rounds=rounds,
            master_seed=seed,
            worker_count=workers,
            statistic=statistic,
        )
        with run_report(report, "Forced-gap Run Report"):
            print_output(f"Problem: {preset or dem}")
            print_output(f"Shots: {shots}, seed: {seed}, rounds: {rounds}")
            print_output(f"Baseline decoder: {baseline}")
            print_output(f"Forced decoder: {forced}\n")
            records = run_experiment(cfg, echo=print_output)
            write_shot_records(records, out)
            summary = summarize(records)
            print_output("\n## Summary\n")
            for key, value in summary.items():
                formatted = f"{value:.4g}" if isinstance(value, float) else str(value)
                print_output(f"  {key.replace('_', ' ').title()}: {formatted}")
            print_output(f"\n✓ Records written to: {out}")


@cli.command()
@click.option(
    "--records",
    type=click.Path(dir_okay=False, path_type=Path),
    required=True,
    help="Shot records CSV written by 'run'.",
)
@click.option(
    "--thresholds",
    type=ThresholdList(),
    default="0,0.5,1,2,4,8,inf",
    show_default=True,
    help="Comma-separated gap thresholds; 'inf' keeps only infinite gaps.",
)
@click.option("--rounds", type=click.IntRange(min=1), default=1, show_default=True)
@click.option(
    "--out",
    type=click.Path(dir_okay=False, path_type=Path),
    required=True,
    help="Curve CSV.",
)
@click.option("--svg", type=click.Path(dir_okay=False, path_type=Path), help="Curve plot.")
@click.option("--json", "json_path", type=click.Path(dir_okay=False, path_type=Path))
def sweep(
    records: Path,
    thresholds: list[float],
    rounds: int,
    out: Path,
    svg: Path | None,
    json_path: Path | None,
):
    """Compute the post-selection curve of a records file."""
    with data_errors():
        shot_records = read_shot_records(records)
        if not shot_records:
            raise DataError(f"No shot records in {records}")
        points = sweep_thresholds(shot_records, thresholds, rounds=rounds)
        write_curve_csv(points, out)
        if json_path:
            write_curve_json(
                points,
                json_path,
                metadata={"records": str(records), "shots": len(shot_records), "rounds": rounds},
            )
        if svg:
            write_curve_svg(points, svg, rounds=rounds)

    click.echo(f"{'T':>8} {'ps_rate':>10} {'ler/round':>12} {'accepted':>9}")
    for point in points:
        click.echo(
            f"{point.threshold:>8g} {point.ps_rate:>10.4g} "
            f"{point.ler_per_round:>12.4g} {point.n_accepted:>9d}"
        )
    click.echo(f"\n✓ Curve written to: {out}")


def _report_syndrome(prob: DecodingProblem, sigma, check_reduction: bool) -> float:
    """Print the class distribution of one syndrome; return the reduction difference."""
    ranked = class_distribution(prob, sigma).ranked()
    if not ranked:
        raise DataError(f"Syndrome {bits_to_str(sigma)} is infeasible for this problem")
    print_output(f"Syndrome: {bits_to_str(sigma)}")
    for cls, log_mass in ranked:
        print_output(f"  class {cls}: P = {math.exp(log_mass):.6g} (log {log_mass:.6f})")
    print_output(f"λ*: {ranked[0][0]}")
    if len(ranked) < 2:
        print_output("Exact gap: inf")
        return 0.0
    gap = ranked[0][1] - ranked[1][1]
    print_output(f"Exact gap: {gap:.6f}")
    if not check_reduction:
        return 0.0
    via_forced = exact_gap_via_forced(prob, sigma)
    difference = abs(via_forced - gap)
    print_output(f"Forced-reduction gap: {via_forced:.6f} (difference {difference:.3g})")
    return difference


@cli.command()
@preset_option
@dem_option
@p_option
@side_option
@click.option("--syndrome", help="Syndrome bit string, detector 0 first.")
@click.option("--exhaustive-shots", type=click.IntRange(min=1), help="Sample this many shots.")
@seed_option
@click.option(
    "--check-reduction",
    is_flag=True,
    help="Also compute the gap through the forced reduction and compare.",
)
@report_option
def oracle(
    preset: str | None,
    dem: Path | None,
    p: float | None,
    side: str,
    syndrome: str | None,
    exhaustive_shots: int | None,
    seed: int,
    check_reduction: bool,
    report: Path | None,
):
    """Exact class distribution and Exact Gap by coset enumeration."""
    if (syndrome is None) == (exhaustive_shots is None):
        raise click.UsageError("Give exactly one of --syndrome or --exhaustive-shots")
    with data_errors():
        prob = _load_problem(preset, dem, p, side)
        with run_report(report, "Oracle Report"):
            if syndrome is not None:
                sigma = bitvec(syndrome.strip())
                if sigma.size != prob.num_detectors:
                    raise DataError(
                        f"Syndrome has {sigma.size} bits, problem has {prob.num_detectors} detectors"
                    )
                differences = [_report_syndrome(prob, sigma, check_reduction)]
            else:
                differences = []
                for i in range(exhaustive_shots):
                    shot_seed = derive_seed(seed, i)
                    _, sigma, true_class = sample_shot(
                        prob, make_rng(derive_seed(shot_seed, SAMPLING_STREAM))
                    )
                    print_output(f"\n## Shot {i} (true class {true_class})\n")
                    differences.append(_report_syndrome(prob, sigma, check_reduction))

            if check_reduction:
                worst = max(differences)
                print_output(f"\nMaximum reduction difference: {worst:.3g}")
                if worst > REDUCTION_TOLERANCE:
                    raise DataError(
                        f"Forced reduction differs from the exact gap by {worst:.3g}"
                    )


def main():
    """Console script entry point."""
    cli()


if __name__ == "__main__":
    main()
