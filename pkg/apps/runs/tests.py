import math
import xml.etree.ElementTree as ElementTree

import numpy as np
import pytest

from apps.evolution.models import EvolutionContext
from apps.hamiltonian.models import DriveSchedule
from apps.hamiltonian.services import build_rf, build_short_range_chain, build_zeeman
from apps.protocols.models import EventTag, ProtocolTrace, TraceSample
from apps.protocols.schemas import Scheme, SchemeIIConfig
from apps.protocols.services import SchemeIIService
from apps.runs.repos import TRACE_HEADER, StateDumpRepository, SweepRepository, TraceRepository
from apps.runs.schemas import ModelKind, RunConfig
from apps.runs.services import (
    adiabatic_config,
    build_bare,
    build_context,
    parse_config,
    parse_seed_range,
    plot_trace_svg,
    read_trace,
    scheme1_config,
    scheme2_config,
    serialize_config,
    sweep_polarization,
    write_trace,
)
from apps.state.models import RngStream
from apps.state.services import polarized_state, random_infinite_temperature_state
from cli import cli_dispatch
from core.exceptions import ConfigurationError, ContractViolation, StorageError
from core.middlewares import ExitStatus

SMALL_RUN = "n_spins=3\ndt=0.01\nT0=2\nk_term=30\nmax_rounds=60\nsample_every=20\n"


def make_trace(n=5) -> ProtocolTrace:
    trace = ProtocolTrace()
    for k in range(n):
        trace.record(
            TraceSample(
                t=0.1 * k,
                mz=-1.5 + 1 / 3 * k,
                energy=-1.0 / 7,
                fidelity=math.nan if k == 0 else 0.5,
                b=10.0,
                rf=k % 2 == 1,
                event=EventTag.RF_ON if k == 3 else None,
            )
        )
    return trace


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "small.cfg"
    path.write_text(SMALL_RUN)
    return path


# configuration

def test_parse_config_fills_defaults():
    cfg = parse_config("n_spins=14\nb0=10\nseed=1")
    assert cfg.dt == 0.001
    assert cfg.omega == 5.0
    assert cfg.h0 == 1.0
    assert cfg.T == pytest.approx(math.pi / 5)
    assert cfg.k_term == 140
    assert cfg.b_stop == pytest.approx(0.01)
    assert cfg.T0 is None
    assert cfg.model is ModelKind.SHORT_RANGE


def test_parse_config_ignores_comments_and_blank_lines():
    cfg = parse_config("# chain\n\nn_spins = 6   # six spins\nperiodic=false\nmodel=long_range\n")
    assert cfg.n_spins == 6
    assert cfg.periodic is False
    assert cfg.model is ModelKind.LONG_RANGE


@pytest.mark.parametrize(
    "text, key, line",
    [
        ("n_spins=0", "n_spins", 1),
        ("bogus=1", "bogus", 1),
        ("n_spins=4\ndt=abc", "dt", 2),
        ("dt=nan", "dt", 1),
        ("n_spins=14\nk_term=5", "k_term", 2),
        ("n_spins=4\nprobe=4", "probe", 2),
        ("b0=1\nb_stop=2", "b_stop", 2),
        ("seed=1\nseed=2", "seed", 2),
        ("just words", "just words", 1),
        ("N_spins=4", "N_spins", 1),
    ],
)
def test_parse_config_errors_name_key_and_line(text, key, line):
    with pytest.raises(ConfigurationError) as exc_info:
        parse_config(text)
    assert exc_info.value.key == key
    assert exc_info.value.line == line
    assert str(exc_info.value).startswith(f"line {line}: {key}: ")


def test_config_round_trip():
    cfg = parse_config("n_spins=5\njz=-0.25\nT0=123.5\nramp_start=7\nmodel=long_range\ndistance_rule=linear\nseed=99")
    again = parse_config(serialize_config(cfg))
    assert again.model_dump() == cfg.model_dump()


def test_overrides_are_revalidated():
    cfg = RunConfig(n_spins=4)
    assert cfg.with_overrides(seed=5, out_path=None).seed == 5
    assert cfg.with_overrides(seed=5).out_path == "trace.csv"
    with pytest.raises(ConfigurationError):
        parse_config(serialize_config(cfg.with_overrides(seed=3)) + "bogus=1\n")
    with pytest.raises(ConfigurationError) as exc_info:
        cfg.with_overrides(out_path="")
    assert exc_info.value.key == "out_path"


def test_protocol_configs_follow_run_config():
    cfg = parse_config("n_spins=4\nT=0.5\nprobe=2\ntarget_rounds=9")
    assert scheme1_config(cfg).k_term == 40
    assert scheme1_config(cfg).T == 0.5
    assert scheme2_config(cfg).probe == 2
    assert scheme2_config(cfg).target_rounds == 9
    assert adiabatic_config(cfg, Scheme.RANDOM_SPIN).T0 == 1e4
    assert adiabatic_config(cfg, Scheme.SINGLE_PROBE).T0 == 8e3
    assert adiabatic_config(parse_config("T0=50"), Scheme.SINGLE_PROBE).T0 == 50


def test_build_context_uses_chosen_model():
    cfg = parse_config("n_spins=4\nmodel=long_range")
    assert len(build_bare(cfg).terms) == 6 * 3 + 4
    ctx = build_context(cfg, Scheme.SINGLE_PROBE)
    assert ctx.schedule.t0 == 8e3
    assert ctx.n_spins == 4


def test_seed_range():
    assert list(parse_seed_range("3..5")) == [3, 4, 5]
    assert list(parse_seed_range("7")) == [7]
    with pytest.raises(ConfigurationError):
        parse_seed_range("5..3")


# trace files

def test_single_sample_trace_file(tmp_path):
    trace = ProtocolTrace([TraceSample(t=0.0, mz=-0.5, energy=-1.0 / 3, fidelity=1.0, b=10.0, rf=True, event=EventTag.RF_ON)])
    path = write_trace(trace, tmp_path / "one.csv")
    assert path.read_text(encoding="utf-8") == "t,mz,e0,fidelity,b,rf,event\n0,-0.5,-0.333333333333,1,10,1,rf-on\n"


GOLDEN_TRACE = (
    "t,mz,e0,fidelity,b,rf,event\n"
    "0,-1,0.25,nan,10,0,\n"
    "0.5,-1,0.25,nan,10,0,\n"
    "0.63,-1,0.25,nan,10,0,measure-down\n"
    "1,-1,0.25,nan,10,0,\n"
    "1.26,-1,0.25,nan,10,0,measure-down\n"
    "1.5,-1,0.25,nan,10,0,\n"
    "1.89,-1,0.25,nan,10,0,measure-down\n"
)


def test_trace_file_matches_golden_bytes(tmp_path):
    # jx == jy and hy == 0 keep all-down an exact eigenstate of the two-spin ring
    model = EvolutionContext(
        bare=build_short_range_chain(2, jx=1.0, jy=1.0, jz=0.5, hy=0.0),
        zeeman=build_zeeman(2),
        rf=build_rf(2),
        schedule=DriveSchedule(b0=10.0),
        dt=0.01,
    )
    service = SchemeIIService(model, SchemeIIConfig(target_rounds=3), sample_every=50)
    result = service.run(polarized_state(2), 0.0, RngStream(5))
    path = write_trace(result.trace, tmp_path / "golden.csv")
    assert path.read_bytes() == GOLDEN_TRACE.encode("utf-8")


def test_trace_file_round_trip(tmp_path):
    trace = make_trace()
    repo = TraceRepository(tmp_path / "trace.csv")
    repo.save(trace)
    lines = repo.path.read_text(encoding="utf-8").splitlines()
    assert tuple(lines[0].split(",")) == TRACE_HEADER
    assert len(lines) == len(trace) + 1
    assert lines[1].endswith(",0,")
    loaded = repo.load()
    for original, read in zip(trace, loaded):
        assert read.t == pytest.approx(original.t, rel=1e-11)
        assert read.mz == pytest.approx(original.mz, rel=1e-11)
        assert read.energy == pytest.approx(original.energy, rel=1e-11)
        assert read.rf is original.rf
        assert read.event is original.event
    assert math.isnan(loaded[0].fidelity)


def test_empty_trace_is_not_written(tmp_path):
    with pytest.raises(ContractViolation):
        TraceRepository(tmp_path / "empty.csv").save(ProtocolTrace())


def test_unwritable_trace_path_names_the_path(tmp_path):
    blocker = tmp_path / "file.txt"
    blocker.write_text("")
    with pytest.raises(StorageError) as exc_info:
        TraceRepository(blocker / "trace.csv").save(make_trace())
    assert "trace.csv" in str(exc_info.value)


def test_foreign_csv_is_rejected(tmp_path):
    path = tmp_path / "other.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(StorageError):
        TraceRepository(path).load()


def test_state_dump_layout_and_round_trip(tmp_path):
    psi = random_infinite_temperature_state(3, RngStream(1))
    repo = StateDumpRepository(tmp_path / "psi.state")
    repo.save(psi)
    raw = repo.path.read_bytes()
    assert len(raw) == 8 + 8 * 16
    assert int.from_bytes(raw[:8], "little") == 8
    assert np.frombuffer(raw[8:16], dtype="<f8")[0] == psi.amplitudes[0].real
    loaded = repo.load()
    assert loaded.n_spins == 3
    np.testing.assert_array_equal(loaded.amplitudes, psi.amplitudes)


def test_truncated_state_dump_is_rejected(tmp_path):
    path = tmp_path / "bad.state"
    path.write_bytes((16).to_bytes(8, "little") + b"\x00" * 32)
    with pytest.raises(StorageError):
        StateDumpRepository(path).load()


# plots and sweeps

def test_plot_is_a_standalone_svg_with_one_line(tmp_path):
    TraceRepository(tmp_path / "trace.csv").save(make_trace())
    path = plot_trace_svg(tmp_path / "trace.csv", "mz", tmp_path / "mz.svg")
    root = ElementTree.parse(path).getroot()
    assert root.tag.endswith("svg")
    assert len([el for el in root.iter() if el.get("id") == "trace"]) == 1
    again = plot_trace_svg(tmp_path / "trace.csv", "mz", tmp_path / "mz2.svg")
    assert again.read_bytes() == path.read_bytes()


def test_plot_rejects_unknown_column(tmp_path):
    with pytest.raises(ConfigurationError):
        plot_trace_svg(tmp_path / "trace.csv", "t", tmp_path / "t.svg")


def test_sweep_rows_do_not_depend_on_worker_count(tmp_path):
    cfg = parse_config(SMALL_RUN)
    serial = sweep_polarization(cfg, range(3))
    parallel = sweep_polarization(cfg.with_overrides(workers=2), range(3))
    assert [row.seed for row in serial] == [0, 1, 2]
    assert serial == parallel
    repo = SweepRepository(tmp_path / "sweep.csv")
    repo.save(serial)
    loaded = repo.load()
    assert [(row.seed, row.measurements, row.completed) for row in loaded] == [
        (row.seed, row.measurements, row.completed) for row in serial
    ]
    assert loaded[0].final_mz == pytest.approx(serial[0].final_mz, rel=1e-11)


# command line

def test_ground_state_command_prints_energy(tmp_path, capsys):
    config = tmp_path / "chain14.cfg"
    config.write_text("n_spins=14\nb0=10\n")
    status = cli_dispatch(["ground-state", "--config", str(config), "--out", str(tmp_path / "gs.csv")])
    out = capsys.readouterr().out
    assert status == ExitStatus.OK
    assert "energy: -4.189" in out
    assert "polarized_energy: -68.25" in out
    assert StateDumpRepository(tmp_path / "gs.state").load().n_spins == 14


def test_full_run_is_byte_reproducible(tmp_path, small_config):
    outputs = []
    for name in ("a.csv", "b.csv"):
        out = tmp_path / name
        status = cli_dispatch(["full", "--scheme", "1", "--config", str(small_config), "--seed", "7", "--out", str(out)])
        assert status in (ExitStatus.OK, ExitStatus.INCOMPLETE_POLARIZATION)
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1]
    assert outputs[0].startswith(b"t,mz,e0,fidelity,b,rf,event\n")
    assert outputs[0].rstrip().endswith(b",done")


def test_polarize_then_adiabatic_chain_through_state_dump(tmp_path, small_config):
    polarized = tmp_path / "pol.csv"
    cli_dispatch(["polarize", "--scheme", "1", "--config", str(small_config), "--out", str(polarized)])
    ramp = tmp_path / "ramp.csv"
    status = cli_dispatch(
        ["adiabatic", "--in", str(polarized.with_suffix(".state")), "--config", str(small_config), "--out", str(ramp)]
    )
    assert status == ExitStatus.OK
    trace = read_trace(ramp)
    assert trace[0].event is EventTag.RAMP_START
    assert trace.last.event is EventTag.DONE


def test_plot_command_writes_svg(tmp_path, small_config):
    out = tmp_path / "run.csv"
    cli_dispatch(["polarize", "--config", str(small_config), "--out", str(out)])
    assert cli_dispatch(["plot", "--in", str(out), "--col", "mz"]) == ExitStatus.OK
    assert out.with_suffix(".svg").read_text(encoding="utf-8").lstrip().startswith("<?xml")


def test_incomplete_polarization_exits_with_three(tmp_path):
    config = tmp_path / "strict.cfg"
    config.write_text("n_spins=3\ndt=0.01\ntarget_rounds=2\nmin_polarization=1\n")
    status = cli_dispatch(["polarize", "--scheme", "2", "--config", str(config), "--out", str(tmp_path / "p.csv")])
    assert status == ExitStatus.INCOMPLETE_POLARIZATION


def test_config_error_exits_with_one(tmp_path, capsys):
    config = tmp_path / "bad.cfg"
    config.write_text("n_spins=4\nbogus=1\n")
    assert cli_dispatch(["ground-state", "--config", str(config)]) == ExitStatus.CONFIG_ERROR
    assert "line 2: bogus" in capsys.readouterr().err


def test_missing_config_exits_with_one(tmp_path):
    assert cli_dispatch(["ground-state", "--config", str(tmp_path / "absent.cfg")]) == ExitStatus.CONFIG_ERROR


def test_invalid_override_exits_with_one(capsys):
    assert cli_dispatch(["ground-state", "--out", ""]) == ExitStatus.CONFIG_ERROR
    assert "out_path" in capsys.readouterr().err


def test_usage_error_exits_with_one():
    assert cli_dispatch(["full", "--scheme", "3"]) == ExitStatus.CONFIG_ERROR
    assert cli_dispatch(["no-such-command"]) == ExitStatus.CONFIG_ERROR


def test_runtime_error_exits_with_two(tmp_path, small_config, capsys):
    broken = tmp_path / "broken.state"
    broken.write_bytes(b"\x01\x02")
    status = cli_dispatch(["adiabatic", "--in", str(broken), "--config", str(small_config), "--out", str(tmp_path / "r.csv")])
    assert status == ExitStatus.RUNTIME_ERROR
    assert "broken.state" in capsys.readouterr().err


def test_sweep_command_writes_one_row_per_seed(tmp_path, small_config):
    out = tmp_path / "sweep.csv"
    status = cli_dispatch(["sweep", "--seeds", "0..1", "--config", str(small_config), "--out", str(out)])
    assert status == ExitStatus.OK
    assert [row.seed for row in SweepRepository(out).load()] == [0, 1]
