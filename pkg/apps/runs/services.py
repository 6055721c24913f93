"""
Run plumbing: config text <-> RunConfig, operator and protocol builders, the
ground-state report, trace plots and multi-seed sweeps.
"""
import re
from multiprocessing import Pool
from pathlib import Path
from typing import Iterable, Optional

import matplotlib
from matplotlib.figure import Figure
from pydantic import ValidationError

from apps.evolution.models import EvolutionContext
from apps.hamiltonian.models import DriveSchedule, OperatorTermList
from apps.hamiltonian.services import (
    build_long_range_chain,
    build_rf,
    build_short_range_chain,
    build_zeeman,
)
from apps.protocols.models import ProtocolTrace
from apps.protocols.schemas import AdiabaticConfig, Scheme, SchemeIConfig, SchemeIIConfig
from apps.protocols.services import SchemeIService, default_ramp_constant
from apps.runs.repos import PlotRepository, TraceRepository
from apps.runs.schemas import GroundStateReport, ModelKind, RunConfig, SweepRow, configuration_error
from apps.spectrum.models import EigenResult
from apps.spectrum.services import ground_state
from apps.state.models import Direction, RngStream
from apps.state.services import (
    expectation,
    fidelity,
    magnetization_z,
    polarized_state,
    random_infinite_temperature_state,
)
from core.exceptions import ConfigurationError
from core.logger import logger

KEY_PATTERN = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
PLOT_COLUMNS = ("mz", "e0", "fidelity", "b", "rf")
SVG_SALT = "spincool"


def _split_lines(text: str) -> tuple[dict[str, str], dict[str, int]]:
    values: dict[str, str] = {}
    lines: dict[str, int] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not KEY_PATTERN.match(key):
            raise ConfigurationError("expected key=value", key=key or "?", line=number)
        if key in values:
            raise ConfigurationError(f"duplicate key, first set on line {lines[key]}", key=key, line=number)
        if not value:
            raise ConfigurationError("missing value", key=key, line=number)
        values[key] = value
        lines[key] = number
    return values, lines


def parse_config(text: str) -> RunConfig:
    """
    Parse ``key=value`` lines ('#' starts a comment) into a resolved RunConfig.

    Raises:
        ConfigurationError: naming the key and line of the first problem.
    """
    values, lines = _split_lines(text)
    try:
        return RunConfig.model_validate(values)
    except ValidationError as exc:
        raise configuration_error(exc, lines) from None


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if hasattr(value, "value"):
        return str(value.value)
    return str(value)


def serialize_config(cfg: RunConfig) -> str:
    """Inverse of parse_config; unset optional keys are omitted."""
    lines = [
        f"{key}={_format_value(value)}"
        for key, value in cfg.model_dump().items()
        if value is not None
    ]
    return "\n".join(lines) + "\n"


def load_config(path: Optional[str | Path]) -> RunConfig:
    if path is None:
        return RunConfig()
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read {path}: {exc.strerror or exc}", key="config") from exc
    return parse_config(text)


def write_trace(trace: ProtocolTrace, path: str | Path) -> Path:
    """Write the trace as CSV; I/O failures raise StorageError naming the path."""
    return TraceRepository(path).save(trace)


def read_trace(path: str | Path) -> ProtocolTrace:
    return TraceRepository(path).load()


def build_bare(cfg: RunConfig) -> OperatorTermList:
    if cfg.model is ModelKind.LONG_RANGE:
        return build_long_range_chain(cfg.n_spins, cfg.jx, cfg.jy, cfg.jz, cfg.hy, cfg.distance_rule)
    return build_short_range_chain(cfg.n_spins, cfg.jx, cfg.jy, cfg.jz, cfg.hy, cfg.periodic)


def build_context(cfg: RunConfig, scheme: Optional[Scheme] = None) -> EvolutionContext:
    schedule = DriveSchedule(
        b0=cfg.b0,
        t0=adiabatic_config(cfg, scheme).T0,
        h0=cfg.h0,
        omega=cfg.omega,
    )
    return EvolutionContext(
        bare=build_bare(cfg),
        zeeman=build_zeeman(cfg.n_spins),
        rf=build_rf(cfg.n_spins),
        schedule=schedule,
        dt=cfg.dt,
    )


def scheme1_config(cfg: RunConfig) -> SchemeIConfig:
    return SchemeIConfig(T=cfg.T, k_term=cfg.k_term, max_rounds=cfg.max_rounds, seed=cfg.seed)


def scheme2_config(cfg: RunConfig) -> SchemeIIConfig:
    return SchemeIIConfig(
        probe=cfg.probe,
        T_meas=cfg.T,
        target_rounds=cfg.target_rounds,
        min_polarization=cfg.min_polarization,
        seed=cfg.seed,
    )


def polarization_config(cfg: RunConfig, scheme: Scheme) -> SchemeIConfig | SchemeIIConfig:
    return scheme1_config(cfg) if Scheme(scheme) is Scheme.RANDOM_SPIN else scheme2_config(cfg)


def adiabatic_config(cfg: RunConfig, scheme: Optional[Scheme] = None) -> AdiabaticConfig:
    """T0 falls back to the scheme's ramp constant (Scheme I when no scheme applies)."""
    t0 = cfg.T0 if cfg.T0 is not None else default_ramp_constant(scheme or Scheme.RANDOM_SPIN)
    return AdiabaticConfig(T0=t0, b_stop=cfg.b_stop, ramp_start=cfg.ramp_start)


def ground_state_report(cfg: RunConfig) -> tuple[GroundStateReport, EigenResult]:
    """Ground state of H0 plus the ground and polarised energies of H0 + b0 Hz."""
    bare = build_bare(cfg)
    result = ground_state(bare, tol=cfg.tol, rng=RngStream(cfg.seed))
    full = bare + build_zeeman(cfg.n_spins).scaled(cfg.b0)
    field_result = ground_state(full, tol=cfg.tol, rng=RngStream(cfg.seed))
    polarized = polarized_state(cfg.n_spins, Direction.DOWN)
    report = GroundStateReport(
        n_spins=cfg.n_spins,
        energy=result.energy,
        gap=result.gap,
        residual=result.residual,
        iterations=result.iterations,
        field_energy=field_result.energy,
        polarized_energy=expectation(polarized, full),
        polarized_overlap=fidelity(field_result.state, polarized),
    )
    return report, result


def plot_trace_svg(trace_path: str | Path, column: str, out_path: str | Path) -> Path:
    """Line chart of one trace column against time as a standalone SVG."""
    if column not in PLOT_COLUMNS:
        raise ConfigurationError(f"unknown column, expected one of {', '.join(PLOT_COLUMNS)}", key="col")
    times, values = TraceRepository(trace_path).column(column)
    with matplotlib.rc_context({"svg.hashsalt": SVG_SALT, "svg.fonttype": "none"}):
        figure = Figure(figsize=(6.4, 4.0))
        axes = figure.subplots()
        axes.plot(times, values, color="tab:blue", linewidth=1.0, gid="trace")
        axes.set_xlabel("t (s)")
        axes.set_ylabel(column)
        axes.set_title(f"{column} vs t")
        figure.tight_layout()
        return PlotRepository(out_path).save(figure)


def _sweep_one(args: tuple[RunConfig, int]) -> SweepRow:
    cfg, seed = args
    cfg = cfg.with_overrides(seed=seed)
    model = build_context(cfg, Scheme.RANDOM_SPIN)
    rng = RngStream(seed)
    psi0 = random_infinite_temperature_state(cfg.n_spins, rng)
    service = SchemeIService(model, scheme1_config(cfg), sample_every=cfg.sample_every)
    result = service.run(psi0, 0.0, rng)
    return SweepRow(
        seed=seed,
        measurements=result.measurements,
        rf_rounds=result.rf_rounds,
        downfall_time=result.downfall_time,
        final_mz=magnetization_z(result.state),
        completed=result.completed,
    )


def sweep_polarization(cfg: RunConfig, seeds: Iterable[int]) -> list[SweepRow]:
    """
    Scheme I polarisation for many seeds; rows come back in seed order
    whatever the number of worker processes.
    """
    jobs = [(cfg, seed) for seed in seeds]
    if not jobs:
        raise ConfigurationError("empty seed range", key="seeds")
    logger.info("sweep started", seeds=len(jobs), workers=cfg.workers, n_spins=cfg.n_spins)
    if cfg.workers == 1:
        return [_sweep_one(job) for job in jobs]
    with Pool(processes=min(cfg.workers, len(jobs))) as pool:
        return pool.map(_sweep_one, jobs)


def parse_seed_range(text: str) -> range:
    """``a..b`` (inclusive) or a single seed."""
    start, sep, stop = text.partition("..")
    try:
        first = int(start)
        last = int(stop) if sep else first
    except ValueError:
        raise ConfigurationError(f"expected a..b, got {text!r}", key="seeds") from None
    if first < 0 or last < first:
        raise ConfigurationError(f"expected 0 <= a <= b, got {text!r}", key="seeds")
    return range(first, last + 1)
