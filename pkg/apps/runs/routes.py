import functools
from pathlib import Path

import click

from apps.protocols.models import ProtocolTrace
from apps.protocols.schemas import Scheme
from apps.protocols.services import (
    AdiabaticService,
    SchemeIIService,
    SchemeIService,
    polarization_fraction,
    run_full,
)
from apps.runs.repos import StateDumpRepository, SweepRepository
from apps.runs.schemas import RunConfig
from apps.runs.services import (
    PLOT_COLUMNS,
    adiabatic_config,
    build_context,
    ground_state_report,
    load_config,
    parse_seed_range,
    plot_trace_svg,
    polarization_config,
    sweep_polarization,
    write_trace,
)
from apps.spectrum.services import ground_state
from apps.state.models import RngStream
from apps.state.services import magnetization_z, random_infinite_temperature_state
from core.exceptions import ConfigurationError
from core.middlewares import ExitStatus, handle_errors

SCHEME_OPTION = click.option(
    "--scheme",
    type=click.IntRange(1, 2),
    default=1,
    show_default=True,
    help="1: measure a random spin each period; 2: measure one probe spin.",
)


def run_options(command):
    """--config, --seed and --out, resolved into a RunConfig passed as ``cfg``; errors become exit statuses."""

    @click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None, help="key=value run file.")
    @click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=None, help="Overrides the config seed.")
    @click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None, help="Output file.")
    @handle_errors
    @functools.wraps(command)
    def wrapper(config_path, seed, out_path, **kwargs):
        cfg = load_config(config_path).with_overrides(seed=seed, out_path=out_path)
        return command(cfg=cfg, **kwargs)

    return wrapper


def _echo_fields(values: dict):
    for key, value in values.items():
        if isinstance(value, float):
            value = f"{value:.4g}"
        elif hasattr(value, "value"):
            value = value.value
        click.echo(f"{key}: {value}")


def _state_path(cfg: RunConfig) -> Path:
    return Path(cfg.out_path).with_suffix(".state")


def _write_outputs(cfg: RunConfig, trace: ProtocolTrace, state) -> None:
    write_trace(trace, cfg.out_path)
    StateDumpRepository(_state_path(cfg)).save(state)
    click.echo(f"trace: {cfg.out_path}")
    click.echo(f"state: {_state_path(cfg)}")


@click.command("ground-state")
@run_options
def ground_state_command(cfg: RunConfig):
    """Ground energy and gap of H0; writes the ground state as a state dump."""
    report, result = ground_state_report(cfg)
    _echo_fields(report.model_dump(exclude={"n_spins"}))
    StateDumpRepository(_state_path(cfg)).save(result.state)
    click.echo(f"state: {_state_path(cfg)}")


@click.command("polarize")
@SCHEME_OPTION
@run_options
def polarize_command(cfg: RunConfig, scheme: int):
    """Polarise a random infinite-temperature state by measurement feedback."""
    scheme = Scheme(scheme)
    model = build_context(cfg, scheme)
    reference = ground_state(model.bare, tol=cfg.tol, rng=RngStream(cfg.seed)).state
    rng = RngStream(cfg.seed)
    psi0 = random_infinite_temperature_state(cfg.n_spins, rng)
    service_class = SchemeIService if scheme is Scheme.RANDOM_SPIN else SchemeIIService
    service = service_class(
        model, polarization_config(cfg, scheme), reference=reference, sample_every=cfg.sample_every
    )
    result = service.run(psi0, 0.0, rng)
    _write_outputs(cfg, result.trace, result.state)
    _echo_fields(
        {
            "measurements": result.measurements,
            "rf_rounds": result.rf_rounds,
            "final_mz": magnetization_z(result.state),
            "polarization": polarization_fraction(result.state),
            "downfall_time": result.downfall_time,
            "completed": result.completed,
        }
    )
    if not result.completed:
        return ExitStatus.INCOMPLETE_POLARIZATION


@click.command("adiabatic")
@click.option("--in", "in_path", type=click.Path(dir_okay=False), required=True, help="State dump to ramp from.")
@SCHEME_OPTION
@run_options
def adiabatic_command(cfg: RunConfig, in_path: str, scheme: int):
    """Ramp the field down from a stored state; --scheme picks the default T0."""
    psi0 = StateDumpRepository(in_path).load()
    if psi0.n_spins != cfg.n_spins:
        raise ConfigurationError(f"config has {cfg.n_spins} spins, {in_path} holds {psi0.n_spins}", key="n_spins")
    scheme = Scheme(scheme)
    model = build_context(cfg, scheme)
    reference = ground_state(model.bare, tol=cfg.tol, rng=RngStream(cfg.seed)).state
    service = AdiabaticService(model, adiabatic_config(cfg, scheme), reference=reference, sample_every=cfg.sample_every)
    result = service.run(psi0, reference, 0.0)
    _write_outputs(cfg, result.trace, result.state)
    last = result.trace.last
    _echo_fields({"final_energy": last.energy, "final_fidelity": last.fidelity, "final_mz": last.mz, "t_end": result.t_end})


@click.command("full")
@SCHEME_OPTION
@run_options
def full_command(cfg: RunConfig, scheme: int):
    """Random state, measurement-feedback polarisation, then the adiabatic ramp."""
    scheme = Scheme(scheme)
    state, trace, summary = run_full(
        build_context(cfg, scheme),
        scheme,
        polarization_config(cfg, scheme),
        adiabatic_config(cfg, scheme),
        seed=cfg.seed,
        tol=cfg.tol,
        sample_every=cfg.sample_every,
    )
    _write_outputs(cfg, trace, state)
    _echo_fields(summary.model_dump())
    if not summary.polarization_completed:
        return ExitStatus.INCOMPLETE_POLARIZATION


@click.command("plot")
@click.option("--in", "in_path", type=click.Path(dir_okay=False), required=True, help="Trace CSV.")
@click.option("--col", "column", type=click.Choice(PLOT_COLUMNS), default="mz", show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None, help="SVG file; <in>.svg by default.")
@handle_errors
def plot_command(in_path: str, column: str, out_path: str):
    """Plot one trace column against time as an SVG line chart."""
    path = plot_trace_svg(in_path, column, out_path or Path(in_path).with_suffix(".svg"))
    click.echo(f"plot: {path}")


@click.command("sweep")
@click.option("--scheme", type=click.Choice(["1"]), default="1", show_default=True, help="Only random-spin feedback.")
@click.option("--seeds", "seed_range", required=True, help="Inclusive seed range a..b.")
@run_options
def sweep_command(cfg: RunConfig, scheme: str, seed_range: str):
    """Polarisation statistics over many seeds, one CSV row per seed."""
    rows = sweep_polarization(cfg, parse_seed_range(seed_range))
    SweepRepository(cfg.out_path).save(rows)
    completed = sum(row.completed for row in rows)
    click.echo(f"seeds: {len(rows)}")
    click.echo(f"completed: {completed}")
    click.echo(f"sweep: {cfg.out_path}")
