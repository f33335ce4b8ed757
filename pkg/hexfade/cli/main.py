from collections.abc import Iterator, Sequence
from contextlib import contextmanager
from enum import Enum
from importlib.metadata import version
from pathlib import Path
from typing import Annotated

import numpy as np
import typer
from rich import box
from rich.console import Console
from rich.table import Table

from hexfade.channel import ChannelModel, breakpoints_db, mean_pl_pdf
from hexfade.exceptions import HexfadeError, PresetNotFoundError
from hexfade.geometry import NetworkGeometry, marginal_pdf_x, radial_pdf
from hexfade.lsf import LsfDensity, support_bounds
from hexfade.montecarlo import ValidationReport, sweep_cell_radius, validate
from hexfade.sampling import (
    MAX_SEED,
    RngStream,
    SamplingStrategy,
    acceptance_rate_cartesian,
    acceptance_rate_radial,
    ar_estimator_stats,
    ar_variance_derivative,
    crossover_rcr,
    optimal_rcr,
    sample_hexagon_points,
    sample_points,
    sample_radius,
    sample_x,
)
from hexfade.utils import (
    dumps_json,
    format_float,
    load_presets,
    read_run_config,
    split_csv_floats,
    write_csv,
    write_run_config,
)

app = typer.Typer(no_args_is_help=True)

EXIT_INVALID = 2
EXIT_VALIDATION_FAILED = 3

# Geometry used for the acceptance-rate curves: r0 = 1 m so L equals the RCR.
_AR_CURVE_CLOSE_IN_M = 1.0


class DeployShape(str, Enum):
    SECTOR = "sector"
    HEXAGON = "hexagon"


def _layer_defaults(ctx: typer.Context, all_presets: dict) -> None:
    """Rebuild ``ctx.default_map`` as ``[common]`` < preset < ``--from`` file.

    ``--preset`` and ``--from`` are both eager, so Click runs their callbacks in command-line
    order; each one records its value and rebuilds the whole stack. Explicit flags still win.
    """
    state = ctx.ensure_object(dict)
    file_args: dict = state.get("from_args", {})
    # --preset on the command line replaces the preset recorded in the file
    preset_name = state.get("preset") or file_args.get("preset")

    defaults: dict = {}
    if "common" in all_presets:
        defaults.update(all_presets["common"].options())
    if preset_name in all_presets:
        defaults.update(all_presets[preset_name].options())
    defaults.update({key: val for key, val in file_args.items() if key != "preset" and val != "" and val is not None})
    ctx.default_map = defaults


def preset_callback(ctx: typer.Context, param: typer.CallbackParam, value: str | None):
    all_presets = load_presets()

    if value:
        if value not in all_presets:
            raise PresetNotFoundError(value)
        description = all_presets[value].description
        if description:
            typer.secho(f"Applying preset '{value}': {description}", fg=typer.colors.GREEN, err=True)
        ctx.ensure_object(dict)["preset"] = value

    _layer_defaults(ctx, all_presets)
    return value or None


def from_config_callback(ctx: typer.Context, param: typer.CallbackParam, value: str | None):
    if not value:
        return None

    path = Path(value).expanduser().resolve()
    try:
        args, _meta = read_run_config(path)
    except FileNotFoundError:
        typer.secho(f"error: config file not found at {path}", fg=typer.colors.RED, err=True)
        raise typer.Exit(1) from None

    ctx.ensure_object(dict)["from_args"] = args
    _layer_defaults(ctx, load_presets())
    return value


def seed_callback(ctx: typer.Context, param: typer.CallbackParam, value: int) -> int:
    """Keep a replayed seed when the only other source is ``HEXFADE_SEED``.

    Click ranks an environment variable above ``default_map``, which would let the
    variable silently change a ``--from`` replay.
    """
    stored = ctx.ensure_object(dict).get("from_args", {}).get("seed")
    source = ctx.get_parameter_source(param.name)
    if stored is not None and source == typer._click.core.ParameterSource.ENVIRONMENT:  # type: ignore[attr-defined]
        return int(stored)
    return value


def version_callback(value: bool):
    if value:
        typer.echo(f"hexfade {version('hexfade')}")
        raise typer.Exit()


@app.callback()
def main_callback(
    version: Annotated[
        bool,
        typer.Option(
            "--version",
            "-V",
            callback=version_callback,
            is_eager=True,
            help="Display the hexfade version.",
        ),
    ] = False,
):
    """Hexagonal-cell geometry, node sampling and large-scale fading densities."""


PresetOption = Annotated[
    str | None,
    typer.Option(
        "--preset",
        callback=preset_callback,
        is_eager=True,
        help="Use a preset of parameters. Preset values can be overriden by other options.",
    ),
]
FromConfigOption = Annotated[
    str | None,
    typer.Option(
        "--from",
        callback=from_config_callback,
        is_eager=True,
        help="Replay the parameters stored in a run-config TOML file. Explicit flags still win.",
    ),
]
SaveConfigOption = Annotated[
    Path | None,
    typer.Option("--save-config", help="Write the resolved parameters to a run-config TOML file."),
]
CellRadiusOption = Annotated[float | None, typer.Option("--cell-radius", help="Cell radius L in meters.")]
CloseInOption = Annotated[float | None, typer.Option("--close-in", help="Close-in distance r0 in meters.")]
AlphaOption = Annotated[float | None, typer.Option("--alpha", help="Path-loss intercept alpha in dB.")]
BetaOption = Annotated[float | None, typer.Option("--beta", help="Path-loss slope beta in dB per decade.")]
SigmaOption = Annotated[float | None, typer.Option("--sigma", help="Shadowing standard deviation in dB.")]
SamplesOption = Annotated[int, typer.Option("--n-samples", "-n", min=1, help="Accepted samples to draw.")]
BinsOption = Annotated[int, typer.Option("--bins", min=1, help="Histogram bins.")]
SeedOption = Annotated[
    int,
    typer.Option(
        "--seed",
        envvar="HEXFADE_SEED",
        min=0,
        max=MAX_SEED,
        callback=seed_callback,
        help="Seed of the random stream. A --from replay keeps its stored seed over HEXFADE_SEED.",
    ),
]
GridOption = Annotated[int, typer.Option("--grid-points", min=2, help="Points of the density grid.")]
OutputOption = Annotated[
    Path | None,
    typer.Option("--output", "-o", help="Output file. Defaults to stdout."),
]
WorkersOption = Annotated[int, typer.Option("--workers", min=1, help="Sampling threads, one substream each.")]
VerboseOption = Annotated[bool, typer.Option(help="Display more details to user")]


@contextmanager
def _reporting_errors() -> Iterator[None]:
    try:
        yield
    except HexfadeError as exc:
        typer.secho(f"error: {exc}", fg=typer.colors.RED, err=True)
        raise typer.Exit(EXIT_INVALID) from None


def _require(**flags: float | None) -> None:
    missing = [f"--{name.replace('_', '-')}" for name, value in flags.items() if value is None]
    if missing:
        raise typer.BadParameter(f"missing {', '.join(missing)}; pass them explicitly or choose a --preset.")


def _build_geometry(cell_radius_m: float | None, close_in_m: float | None) -> NetworkGeometry:
    _require(cell_radius=cell_radius_m, close_in=close_in_m)
    return NetworkGeometry(cell_radius_m, close_in_m)


def _build_model(
    cell_radius_m: float | None,
    close_in_m: float | None,
    alpha_db: float | None,
    beta_db: float | None,
    sigma_psi_db: float | None,
) -> ChannelModel:
    _require(cell_radius=cell_radius_m, close_in=close_in_m, alpha=alpha_db, beta=beta_db, sigma=sigma_psi_db)
    return ChannelModel.from_values(
        cell_radius_m=cell_radius_m,
        close_in_m=close_in_m,
        alpha_db=alpha_db,
        beta_db=beta_db,
        sigma_psi_db=sigma_psi_db,
    )


def _save_config(ctx: typer.Context, path: Path | None) -> None:
    if path is None:
        return
    written = write_run_config(path, ctx.params, ctx.info_name or "", tool_version=version("hexfade"))
    typer.secho(f"Saved run config to {written}", fg=typer.colors.GREEN, err=True)


def _emit_csv(output: Path | None, header: Sequence[str], columns: Sequence[np.ndarray]) -> None:
    write_csv(output, header, columns)
    if output is not None:
        typer.secho(f"Wrote {len(columns[0])} rows to {output}", fg=typer.colors.GREEN, err=True)


@app.command()
def deploy(
    ctx: typer.Context,
    preset: PresetOption = None,
    from_config: FromConfigOption = None,
    save_config: SaveConfigOption = None,
    cell_radius_m: CellRadiusOption = None,
    close_in_m: CloseInOption = None,
    n_samples: SamplesOption = 10000,
    seed: SeedOption = 0,
    output: OutputOption = None,
    shape: Annotated[DeployShape, typer.Option(help="Deploy over one sector or the whole hexagon.")] = (
        DeployShape.SECTOR
    ),
    strategy: Annotated[
        SamplingStrategy | None,
        typer.Option(help="Sampler for the sector points. Defaults to the faster one for the RCR."),
    ] = None,
):
    """Emit uniformly deployed node positions as ``x_m,y_m`` rows."""
    with _reporting_errors():
        geom = _build_geometry(cell_radius_m, close_in_m)
        _save_config(ctx, save_config)
        rng = RngStream(seed)
        if shape is DeployShape.HEXAGON:
            batch = sample_hexagon_points(geom, rng, n_samples, strategy)
        else:
            batch = sample_points(geom, rng, n_samples, strategy)
    _emit_csv(output, ("x_m", "y_m"), (batch.values[:, 0], batch.values[:, 1]))


@app.command("pdf-x")
def pdf_x(
    ctx: typer.Context,
    preset: PresetOption = None,
    from_config: FromConfigOption = None,
    save_config: SaveConfigOption = None,
    cell_radius_m: CellRadiusOption = None,
    close_in_m: CloseInOption = None,
    grid_points: GridOption = 500,
    output: OutputOption = None,
):
    """Marginal density of the node x coordinate over ``[r0/2, L]``."""
    with _reporting_errors():
        geom = _build_geometry(cell_radius_m, close_in_m)
        _save_config(ctx, save_config)
        grid = np.linspace(geom.close_in_m / 2, geom.cell_radius_m, grid_points)
        density = marginal_pdf_x(geom, grid)
    _emit_csv(output, ("abscissa", "density"), (grid, density))


@app.command("pdf-r")
def pdf_r(
    ctx: typer.Context,
    preset: PresetOption = None,
    from_config: FromConfigOption = None,
    save_config: SaveConfigOption = None,
    cell_radius_m: CellRadiusOption = None,
    close_in_m: CloseInOption = None,
    grid_points: GridOption = 500,
    output: OutputOption = None,
):
    """Density of the base-station-to-node distance over ``[r0, L]``."""
    with _reporting_errors():
        geom = _build_geometry(cell_radius_m, close_in_m)
        _save_config(ctx, save_config)
        grid = np.linspace(geom.close_in_m, geom.cell_radius_m, grid_points)
        density = radial_pdf(geom, grid)
    _emit_csv(output, ("abscissa", "density"), (grid, density))


@app.command("pdf-meanpl")
def pdf_meanpl(
    ctx: typer.Context,
    preset: PresetOption = None,
    from_config: FromConfigOption = None,
    save_config: SaveConfigOption = None,
    cell_radius_m: CellRadiusOption = None,
    close_in_m: CloseInOption = None,
    alpha_db: AlphaOption = None,
    beta_db: BetaOption = None,
    sigma_psi_db: SigmaOption = None,
    grid_points: GridOption = 500,
    output: OutputOption = None,
):
    """Density of the mean path loss over ``[w(r0), w(L)]``."""
    with _reporting_errors():
        model = _build_model(cell_radius_m, close_in_m, alpha_db, beta_db, sigma_psi_db)
        _save_config(ctx, save_config)
        w0, _, w_cell = breakpoints_db(model)
        grid = np.linspace(w0, w_cell, grid_points)
        density = mean_pl_pdf(model, grid)
    _emit_csv(output, ("abscissa", "density"), (grid, density))


@app.command("pdf-lsf")
def pdf_lsf(
    ctx: typer.Context,
    preset: PresetOption = None,
    from_config: FromConfigOption = None,
    save_config: SaveConfigOption = None,
    cell_radius_m: CellRadiusOption = None,
    close_in_m: CloseInOption = None,
    alpha_db: AlphaOption = None,
    beta_db: BetaOption = None,
    sigma_psi_db: SigmaOption = None,
    grid_points: GridOption = 500,
    output: OutputOption = None,
):
    """Closed-form large-scale fading density over ``[w(r0) - 3 sigma, w(L) + 3 sigma]``."""
    with _reporting_errors():
        model = _build_model(cell_radius_m, close_in_m, alpha_db, beta_db, sigma_psi_db)
        _save_config(ctx, save_config)
        low, high = support_bounds(model)
        grid = np.linspace(low, high, grid_points)
        density = LsfDensity(model).pdf_many(grid)
    _emit_csv(output, ("abscissa", "density"), (grid, density))


@app.command("ar-curve")
def ar_curve(
    ctx: typer.Context,
    preset: PresetOption = None,
    from_config: FromConfigOption = None,
    save_config: SaveConfigOption = None,
    n_samples: SamplesOption = 10000,
    seed: SeedOption = 0,
    output: OutputOption = None,
    mu_min: Annotated[float, typer.Option("--mu-min", help="First RCR of the grid (must exceed 2).")] = 2.5,
    mu_max: Annotated[float, typer.Option("--mu-max", help="Last RCR of the grid.")] = 20.0,
    mu_step: Annotated[float, typer.Option("--mu-step", help="RCR grid spacing.")] = 0.5,
    n_total: Annotated[
        int,
        typer.Option("--n-total", min=1, help="Candidates n_T behind the acceptance-rate estimator variance."),
    ] = 10000,
):
    """Acceptance rates of both samplers and the Cartesian estimator variance over an RCR grid."""
    if mu_min <= 2:
        raise typer.BadParameter("the RCR grid must lie in (2, inf)", param_hint="--mu-min")
    if mu_step <= 0 or mu_max < mu_min:
        raise typer.BadParameter("need a positive step and mu-max >= mu-min", param_hint="--mu-step")
    _save_config(ctx, save_config)

    mus = np.arange(mu_min, mu_max + mu_step / 2, mu_step)
    rng = RngStream(seed)
    empirical_cartesian, empirical_radial = [], []
    with _reporting_errors():
        for mu in mus:
            geom = NetworkGeometry(mu * _AR_CURVE_CLOSE_IN_M, _AR_CURVE_CLOSE_IN_M)
            empirical_cartesian.append(sample_x(geom, rng, n_samples).acceptance_rate)
            empirical_radial.append(sample_radius(geom, rng, n_samples).acceptance_rate)
    _emit_csv(
        output,
        (
            "mu",
            "ar_cartesian",
            "ar_radial",
            "ar_empirical_cartesian",
            "ar_empirical_radial",
            "ar_variance",
            "ar_variance_slope",
        ),
        (
            mus,
            np.array([acceptance_rate_cartesian(mu) for mu in mus]),
            np.array([acceptance_rate_radial(mu) for mu in mus]),
            np.array(empirical_cartesian),
            np.array(empirical_radial),
            np.array([ar_estimator_stats(mu, n_total)[1] for mu in mus]),
            np.array([ar_variance_derivative(mu, n_total) for mu in mus]),
        ),
    )


def _summary_table(reports: Sequence[ValidationReport]) -> Table:
    table = Table(box=box.ROUNDED, show_header=True, header_style="bold cyan")
    table.add_column("L (m)", justify="right", style="bold")
    table.add_column("Sampler")
    table.add_column("AR (n_S/n_T)", justify="right")
    table.add_column("KS distance", justify="right")
    table.add_column("1% critical", justify="right")
    table.add_column("3σ coverage", justify="right")
    table.add_column("Result", justify="center")
    for report in reports:
        coverage = "n/a" if report.ci_coverage is None else f"{report.ci_coverage:.4f}"
        table.add_row(
            f"{report.model['cell_radius_m']:g}",
            report.strategy.value,
            f"{report.n_accepted / report.n_total:.4f}",
            f"{report.ks_distance:.5f}",
            f"{report.ks_critical_1pct:.5f}",
            coverage,
            "[green]pass[/green]" if report.passed else "[red]fail[/red]",
        )
    return table


def _suffixed(path: Path, cell_radius_m: float) -> Path:
    return path.with_name(f"{path.stem}_L{cell_radius_m:g}{path.suffix}")


@app.command("validate")
def validate_cmd(
    ctx: typer.Context,
    preset: PresetOption = None,
    from_config: FromConfigOption = None,
    save_config: SaveConfigOption = None,
    cell_radius_m: CellRadiusOption = None,
    close_in_m: CloseInOption = None,
    alpha_db: AlphaOption = None,
    beta_db: BetaOption = None,
    sigma_psi_db: SigmaOption = None,
    n_samples: SamplesOption = 10000,
    n_bins: BinsOption = 100,
    seed: SeedOption = 0,
    output: OutputOption = None,
    workers: WorkersOption = 1,
    verbose: VerboseOption = False,
    scatter: Annotated[
        Path | None,
        typer.Option("--scatter", help="Also write the (r_m, lsf_db) sample scatter as CSV."),
    ] = None,
    with_scatter: Annotated[
        bool,
        typer.Option("--with-scatter", help="Embed the sample scatter in the JSON report."),
    ] = False,
    sweep_l: Annotated[
        str | None,
        typer.Option("--sweep-L", help="Comma-separated cell radii; one report per value."),
    ] = None,
    strict: Annotated[
        bool,
        typer.Option("--strict", help="Exit with code 3 when a KS distance exceeds the 1% critical value."),
    ] = False,
):
    """Monte-Carlo check of the closed-form fading density; writes a JSON report."""
    try:
        radii = split_csv_floats(sweep_l) if sweep_l else []
    except ValueError:
        raise typer.BadParameter(f"not a list of numbers: {sweep_l!r}", param_hint="--sweep-L") from None

    with _reporting_errors():
        model = _build_model(cell_radius_m, close_in_m, alpha_db, beta_db, sigma_psi_db)
        # reject a bad radius before any sampling starts
        for radius in radii:
            model.with_cell_radius(radius)
        _save_config(ctx, save_config)
        if radii:
            reports = sweep_cell_radius(model, seed, n_samples, n_bins, radii, workers=workers, verbose=verbose)
        else:
            reports = [validate(model, RngStream(seed), n_samples, n_bins, workers=workers, verbose=verbose)]

    if output is None:
        documents = [report.to_dict(include_scatter=with_scatter) for report in reports]
        typer.echo(dumps_json(documents if radii else documents[0]))
    else:
        for report in reports:
            path = _suffixed(output, report.model["cell_radius_m"]) if radii else output
            report.write_json(path, include_scatter=with_scatter)
            typer.secho(f"Wrote report to {path}", fg=typer.colors.GREEN, err=True)

    if scatter is not None:
        for report in reports:
            path = _suffixed(scatter, report.model["cell_radius_m"]) if radii else scatter
            r_hat, l_hat = report.scatter
            _emit_csv(path, ("r_m", "lsf_db"), (r_hat, l_hat))

    Console(stderr=True).print(_summary_table(reports))

    if strict and not all(report.passed for report in reports):
        typer.secho("error: KS distance above the 1% critical value", fg=typer.colors.RED, err=True)
        raise typer.Exit(EXIT_VALIDATION_FAILED)


@app.command()
def constants(
    preset: PresetOption = None,
    from_config: FromConfigOption = None,
    cell_radius_m: CellRadiusOption = None,
    close_in_m: CloseInOption = None,
    alpha_db: AlphaOption = None,
    beta_db: BetaOption = None,
    sigma_psi_db: SigmaOption = None,
):
    """Print the sampler constants and, when a model is given, its breakpoints and support."""
    mu_opt = optimal_rcr()
    table = Table(box=box.ROUNDED, show_header=True, header_style="bold cyan")
    table.add_column("Quantity", style="bold")
    table.add_column("Value", justify="right")
    table.add_row("optimal RCR", format_float(mu_opt))
    table.add_row("Cartesian AR at optimal RCR", format_float(acceptance_rate_cartesian(mu_opt)))
    table.add_row("crossover RCR", format_float(crossover_rcr()), end_section=True)

    model_values = (cell_radius_m, close_in_m, alpha_db, beta_db, sigma_psi_db)
    if all(value is not None for value in model_values):
        with _reporting_errors():
            model = _build_model(*model_values)
            w0, w_inner, w_cell = breakpoints_db(model)
            low, high = support_bounds(model)
        table.add_row("RCR", format_float(model.rcr))
        table.add_row("w(r0) dB", format_float(w0))
        table.add_row("w(apothem) dB", format_float(w_inner))
        table.add_row("w(L) dB", format_float(w_cell))
        table.add_row("support low dB", format_float(low))
        table.add_row("support high dB", format_float(high))
    Console().print(table)
