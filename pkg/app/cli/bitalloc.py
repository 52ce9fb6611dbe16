from __future__ import annotations

from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, List, Optional, Sequence

import typer
from rich.console import Console
from rich.markup import escape
from rich.panel import Panel
from rich.table import Table

from app.adapters.fixtures import DEMO_FIXTURES
from app.domain.errors import ConfigError, ToolkitError
from app.domain.schemas import ConditionReport, CoverageReport, ScalarizationResult, WeightVector
from app.domain.taxonomy import OutputFormat
from app.infra import get_logger, get_settings, setup_logging
from app.pipelines.experiment import ExperimentPipeline
from app.services.pareto import ParetoFront, incomparable_pairs
from app.services.report_generator import ReportGenerator
from app.services.scalarize import S0Set
from app.services.storage import ArtifactStore

app = typer.Typer(
    add_completion=False,
    no_args_is_help=True,
    help="Multi-objective bit allocation for scalable coding: fronts, sweeps and checks.",
)

console = Console()
err_console = Console(stderr=True)

EXIT_INPUT = 1
EXIT_CHECK = 2
EXIT_CONFIG = 3

ConfigArgument = typer.Argument(None, help="Experiment config (JSON)")
FixtureOption = typer.Option(None, "--fixture", "-x", help="Use a shipped fixture instead")
OutputDirOption = typer.Option(None, "--output-dir", "-o", help="Directory for result files")
FormatOption = typer.Option(
    None, "--format", "-f", help="Output format (csv, json, plotdata); repeatable"
)
PsnrOption = typer.Option(False, "--psnr", help="Add 10*log10(peak^2/d) columns to exports")
PeakOption = typer.Option(255.0, "--peak", help="Peak value for --psnr")
SeedOption = typer.Option(None, "--seed", help="Reserved; defaults are deterministic")
LogLevelOption = typer.Option(None, "--log-level", help="Overrides BITALLOC_LOG_LEVEL")


class CheckFailed(Exception):
    def __init__(self, failed: Sequence[str]) -> None:
        super().__init__(f"failed checks: {', '.join(failed)}")
        self.failed = list(failed)


@contextmanager
def _exit_codes() -> Iterator[None]:
    """Map toolkit errors to stderr prefixes and exit codes."""
    try:
        yield
    except ConfigError as exc:
        err_console.print(f"error[config]: {exc}", markup=False, highlight=False)
        raise typer.Exit(EXIT_CONFIG) from exc
    except ToolkitError as exc:
        err_console.print(f"error[input]: {exc}", markup=False, highlight=False)
        raise typer.Exit(EXIT_INPUT) from exc
    except ValueError as exc:
        err_console.print(f"error[input]: {exc}", markup=False, highlight=False)
        raise typer.Exit(EXIT_INPUT) from exc
    except CheckFailed as exc:
        err_console.print(f"error[check]: {exc}", markup=False, highlight=False)
        raise typer.Exit(EXIT_CHECK) from exc


def _setup(log_level: Optional[str]) -> None:
    settings = get_settings()
    setup_logging(log_level or settings.log_level)


def _pipeline(config: Optional[Path], fixture: Optional[str]) -> ExperimentPipeline:
    if config is not None and fixture is not None:
        raise ValueError("pass either a config path or --fixture, not both")
    if fixture is not None:
        return ExperimentPipeline.from_fixture(fixture)
    if config is None:
        raise ValueError("a config path or --fixture is required")
    return ExperimentPipeline.from_path(config)


def _reporter(
    pipeline: ExperimentPipeline,
    output_dir: Optional[Path],
    formats: Optional[List[OutputFormat]],
    psnr: bool,
    peak: float,
) -> ReportGenerator:
    outputs = pipeline.config.outputs
    if output_dir is None:
        if outputs.directory is not None:
            output_dir = Path(outputs.directory)
        else:
            output_dir = Path(get_settings().output_directory) / pipeline.config.name
    if psnr and peak <= 0:
        raise ValueError(f"--peak must be > 0, got {peak}")
    return ReportGenerator(
        ArtifactStore(output_dir),
        formats=formats or outputs.formats,
        peak=peak if psnr else None,
        metadata=pipeline.summary(),
    )


def _parse_weights(raw: str) -> WeightVector:
    try:
        values = [float(part) for part in raw.split(",") if part.strip()]
    except ValueError as exc:
        raise ValueError(f"--weights must be comma-separated numbers, got {raw!r}") from exc
    return WeightVector.normalized(values)


def _fmt(values: Sequence[float]) -> str:
    return "(" + ", ".join(f"{v:.6g}" for v in values) + ")"


def _print_written(reporter: ReportGenerator) -> None:
    for path in reporter.paths:
        console.print(f"[dim]  wrote {escape(str(path))}[/dim]")


def _print_dag(pipeline: ExperimentPipeline) -> None:
    dag = pipeline.dag
    table = Table(title=f"{pipeline.config.name}: {dag.node_count} nodes, {len(dag.arcs)} arcs")
    table.add_column("Resolution", style="cyan", justify="right")
    table.add_column("Subgraph members", style="white")
    table.add_column("Parents", style="magenta")
    for sub in dag.subgraphs:
        table.add_row(
            str(sub.resolution),
            ", ".join(str(m) for m in sub.members),
            ", ".join(str(p) for p in sorted(sub.parent_set)) or "-",
        )
    console.print(table)


def _print_front(front: ParetoFront) -> None:
    counts = front.counts()
    console.print(
        Panel(
            f"grid points: {len(front)}\n"
            f"pareto: {counts['pareto']}  weak_only: {counts['weak_only']}  "
            f"dominated: {counts['dominated']}",
            title="Labeled front",
            border_style="cyan",
        )
    )


def _print_result(result: ScalarizationResult) -> None:
    table = Table(title=f"Weighted sum at w = {_fmt(result.weight.weights)}")
    table.add_column("Allocation", style="cyan")
    table.add_column("Distortion", style="white")
    for minimizer in result.minimizers:
        table.add_row(_fmt(minimizer.alloc.bits), _fmt(minimizer.distortion.values))
    console.print(table)
    line = f"objective: {result.objective:.9g}"
    if result.residual is not None:
        line += f"  residual: {result.residual:.3g}  iterations: {result.iterations}"
    console.print(line)


def _print_sweep(s0: S0Set) -> None:
    console.print(
        f"[green]✓ {len(s0)} weights (M={s0.resolution}), "
        f"{len(s0.distinct_distortions)} distinct minimizer distortions[/green]"
    )


def _print_checks(reports: Sequence[ConditionReport]) -> None:
    table = Table(title="Condition checks")
    table.add_column("Check", style="cyan")
    table.add_column("Result")
    table.add_column("Witnesses", justify="right")
    table.add_column("Notes", style="dim")
    for report in reports:
        verdict = "[green]pass[/green]" if report.passed else "[red]fail[/red]"
        table.add_row(
            report.check_name.value, verdict, str(len(report.witnesses)), escape(report.notes or "")
        )
    console.print(table)
    for report in reports:
        for witness in report.witnesses[:5]:
            name = report.check_name.value
            console.print(f"  [red]{name}[/red] witness: {escape(str(witness))}")


def _print_coverage(report: CoverageReport) -> None:
    style = "green" if report.full else "yellow"
    body = (
        f"covered {report.covered_count}/{report.weak_pareto_count} weakly Pareto points "
        f"(match tolerance {report.match_tolerance:g})"
    )
    if report.missed:
        body += "\nmissed: " + ", ".join(_fmt(point) for point in report.missed[:10])
    console.print(Panel(body, title="S0 coverage", border_style=style))


def _raise_on_failures(reports: Sequence[ConditionReport]) -> None:
    failed = [report.check_name.value for report in reports if not report.passed]
    if failed:
        raise CheckFailed(failed)


@app.command()
def validate(
    config: Optional[Path] = ConfigArgument,
    fixture: Optional[str] = FixtureOption,
    output_dir: Optional[Path] = OutputDirOption,
    formats: Optional[List[OutputFormat]] = FormatOption,
    log_level: Optional[str] = LogLevelOption,
) -> None:
    """Validate a config and list every resolution's subgraph."""
    _setup(log_level)
    with _exit_codes():
        pipeline = _pipeline(config, fixture)
        _print_dag(pipeline)
        reporter = _reporter(pipeline, output_dir, formats, False, 255.0)
        reporter.dag_report(pipeline.dag)
        _print_written(reporter)
        console.print("[green]✓ config is valid[/green]")


@app.command("enumerate")
def enumerate_grid(
    config: Optional[Path] = ConfigArgument,
    fixture: Optional[str] = FixtureOption,
    output_dir: Optional[Path] = OutputDirOption,
    formats: Optional[List[OutputFormat]] = FormatOption,
    psnr: bool = PsnrOption,
    peak: float = PeakOption,
    seed: Optional[int] = SeedOption,
    log_level: Optional[str] = LogLevelOption,
) -> None:
    """Enumerate the feasible allocation grid and its distortion cloud."""
    _setup(log_level)
    with _exit_codes():
        pipeline = _pipeline(config, fixture)
        cloud = pipeline.cloud()
        reporter = _reporter(pipeline, output_dir, formats, psnr, peak)
        reporter.cloud(cloud)
        console.print(
            f"[green]✓ {len(cloud)} grid points "
            f"(budget {cloud.budget:g}, step {cloud.step:g})[/green]"
        )
        _print_written(reporter)


@app.command()
def front(
    config: Optional[Path] = ConfigArgument,
    fixture: Optional[str] = FixtureOption,
    output_dir: Optional[Path] = OutputDirOption,
    formats: Optional[List[OutputFormat]] = FormatOption,
    psnr: bool = PsnrOption,
    peak: float = PeakOption,
    seed: Optional[int] = SeedOption,
    log_level: Optional[str] = LogLevelOption,
) -> None:
    """Label every grid point pareto, weak_only or dominated."""
    _setup(log_level)
    with _exit_codes():
        pipeline = _pipeline(config, fixture)
        labeled = pipeline.front()
        reporter = _reporter(pipeline, output_dir, formats, psnr, peak)
        reporter.cloud(labeled.cloud)
        reporter.front(labeled)
        _print_front(labeled)
        _print_written(reporter)


@app.command()
def scalarize(
    config: Optional[Path] = ConfigArgument,
    weights: str = typer.Option(..., "--weights", "-w", help="Comma-separated w0,..,wN-1"),
    continuous: bool = typer.Option(
        False, "--continuous", help="Solve over the continuous budget set"
    ),
    fixture: Optional[str] = FixtureOption,
    output_dir: Optional[Path] = OutputDirOption,
    formats: Optional[List[OutputFormat]] = FormatOption,
    psnr: bool = PsnrOption,
    peak: float = PeakOption,
    seed: Optional[int] = SeedOption,
    log_level: Optional[str] = LogLevelOption,
) -> None:
    """Minimize one weighted sum of distortions."""
    _setup(log_level)
    with _exit_codes():
        pipeline = _pipeline(config, fixture)
        weight = _parse_weights(weights)
        result = pipeline.scalarize(weight, continuous=continuous)
        reporter = _reporter(pipeline, output_dir, formats, psnr, peak)
        reporter.scalarization(result)
        _print_result(result)
        _print_written(reporter)


@app.command()
def sweep(
    config: Optional[Path] = ConfigArgument,
    resolution: Optional[int] = typer.Option(
        None, "--resolution", "-m", min=1, help="Weight lattice resolution M"
    ),
    continuous: bool = typer.Option(
        False, "--continuous", help="Solve over the continuous budget set"
    ),
    fixture: Optional[str] = FixtureOption,
    output_dir: Optional[Path] = OutputDirOption,
    formats: Optional[List[OutputFormat]] = FormatOption,
    psnr: bool = PsnrOption,
    peak: float = PeakOption,
    seed: Optional[int] = SeedOption,
    log_level: Optional[str] = LogLevelOption,
) -> None:
    """Sweep the weight lattice and collect the minimizer set S0."""
    _setup(log_level)
    with _exit_codes():
        pipeline = _pipeline(config, fixture)
        if continuous:
            s0 = pipeline.continuous_sweep(resolution)
        else:
            s0 = pipeline.sweep(resolution)
        reporter = _reporter(pipeline, output_dir, formats, psnr, peak)
        reporter.sweep(s0)
        _print_sweep(s0)
        _print_written(reporter)


@app.command()
def check(
    config: Optional[Path] = ConfigArgument,
    fixture: Optional[str] = FixtureOption,
    output_dir: Optional[Path] = OutputDirOption,
    formats: Optional[List[OutputFormat]] = FormatOption,
    seed: Optional[int] = SeedOption,
    log_level: Optional[str] = LogLevelOption,
) -> None:
    """Run every condition check; exits 2 when one fails."""
    _setup(log_level)
    with _exit_codes():
        pipeline = _pipeline(config, fixture)
        reports = pipeline.checks()
        reporter = _reporter(pipeline, output_dir, formats, False, 255.0)
        reporter.checks(reports)
        _print_checks(reports)
        _print_written(reporter)
        _raise_on_failures(reports)


@app.command()
def compare(
    config: Optional[Path] = ConfigArgument,
    resolution: Optional[int] = typer.Option(
        None, "--resolution", "-m", min=1, help="Weight lattice resolution M"
    ),
    fixture: Optional[str] = FixtureOption,
    output_dir: Optional[Path] = OutputDirOption,
    formats: Optional[List[OutputFormat]] = FormatOption,
    seed: Optional[int] = SeedOption,
    log_level: Optional[str] = LogLevelOption,
) -> None:
    """Report how much of the weakly Pareto front the sweep recovers."""
    _setup(log_level)
    with _exit_codes():
        pipeline = _pipeline(config, fixture)
        report = pipeline.coverage(resolution)
        reporter = _reporter(pipeline, output_dir, formats, False, 255.0)
        reporter.coverage(report)
        _print_coverage(report)
        _print_written(reporter)


@app.command()
def demo(
    fixture: str = typer.Option(
        ..., "--fixture", "-x", help=f"One of: {', '.join(DEMO_FIXTURES)}"
    ),
    output_dir: Optional[Path] = OutputDirOption,
    formats: Optional[List[OutputFormat]] = FormatOption,
    psnr: bool = PsnrOption,
    peak: float = PeakOption,
    seed: Optional[int] = SeedOption,
    log_level: Optional[str] = LogLevelOption,
) -> None:
    """Run validate, front, sweep, check and compare on a shipped fixture."""
    _setup(log_level)
    logger = get_logger(__name__)
    with _exit_codes():
        pipeline = ExperimentPipeline.from_fixture(fixture)
        config = pipeline.config
        console.print(
            Panel(
                config.description or config.name,
                title=f"Demo: {config.name}",
                border_style="cyan",
            )
        )
        reporter = _reporter(pipeline, output_dir, formats, psnr, peak)

        _print_dag(pipeline)
        reporter.dag_report(pipeline.dag)

        labeled = pipeline.front()
        pairs = incomparable_pairs(labeled, limit=20)
        extras = {
            "incomparable_pairs": [
                [list(a.distortion.values), list(b.distortion.values)] for a, b in pairs
            ]
        }
        reporter.cloud(labeled.cloud)
        reporter.front(labeled, extras=extras)
        _print_front(labeled)
        if pairs:
            a, b = pairs[0]
            console.print(
                f"incomparable Pareto pair: {_fmt(a.distortion.values)} "
                f"vs {_fmt(b.distortion.values)} ({len(pairs)} listed)"
            )

        s0 = pipeline.sweep()
        reporter.sweep(s0)
        _print_sweep(s0)

        reports = pipeline.checks()
        reporter.checks(reports)
        _print_checks(reports)

        coverage = pipeline.coverage()
        reporter.coverage(coverage)
        _print_coverage(coverage)

        _print_written(reporter)
        logger.info("Demo %s wrote %d files", fixture, len(reporter.paths))
        _raise_on_failures(reports)


if __name__ == "__main__":
    app()
