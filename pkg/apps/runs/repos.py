import csv
import math
import struct
from typing import Iterable

import numpy as np

from apps.protocols.models import EventTag, ProtocolTrace, TraceSample
from apps.runs.schemas import SweepRow
from apps.state.models import StateVector
from bases.base_repository import BaseRepository
from core.exceptions import ContractViolation, StorageError

TRACE_HEADER = ("t", "mz", "e0", "fidelity", "b", "rf", "event")
SWEEP_HEADER = ("seed", "measurements", "rf_rounds", "downfall_time", "final_mz", "completed")
LENGTH_PREFIX = struct.Struct("<Q")
AMPLITUDE_DTYPE = np.dtype("<c16")


def format_number(value: float) -> str:
    return f"{value:.12g}"


def _number(text: str) -> float:
    return float(text) if text else math.nan


class TraceRepository(BaseRepository[ProtocolTrace]):
    """CSV trace: ``t,mz,e0,fidelity,b,rf,event``, one row per sample, 12 significant digits."""

    def _dump(self, handle, record: ProtocolTrace):
        if not len(record):
            raise ContractViolation("refusing to write an empty trace")
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(TRACE_HEADER)
        for sample in record:
            writer.writerow(
                (
                    format_number(sample.t),
                    format_number(sample.mz),
                    format_number(sample.energy),
                    format_number(sample.fidelity),
                    format_number(sample.b),
                    int(sample.rf),
                    sample.event.value if sample.event is not None else "",
                )
            )

    def _load(self, handle) -> ProtocolTrace:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or tuple(header) != TRACE_HEADER:
            raise StorageError(f"not a trace file, header {header!r}", self.path)
        trace = ProtocolTrace()
        for line, row in enumerate(reader, start=2):
            try:
                t, mz, e0, fid, b, rf, event = row
                trace.record(
                    TraceSample(
                        t=float(t),
                        mz=float(mz),
                        energy=float(e0),
                        fidelity=_number(fid),
                        b=float(b),
                        rf=bool(int(rf)),
                        event=EventTag(event) if event else None,
                    )
                )
            except (ValueError, ContractViolation) as exc:
                raise StorageError(f"line {line}: {exc}", self.path) from exc
        return trace

    def column(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        """Times and one numeric column of a stored trace."""
        attribute = {"e0": "energy"}.get(name, name)
        samples = self.load().samples
        times = np.array([sample.t for sample in samples], dtype=float)
        values = np.array([float(getattr(sample, attribute)) for sample in samples], dtype=float)
        return times, values


class StateDumpRepository(BaseRepository[StateVector]):
    """Raw state: little-endian u64 amplitude count, then interleaved (re, im) float64 pairs."""

    binary = True

    def _dump(self, handle, record: StateVector):
        handle.write(LENGTH_PREFIX.pack(record.dimension))
        handle.write(record.amplitudes.astype(AMPLITUDE_DTYPE).tobytes())

    def _load(self, handle) -> StateVector:
        prefix = handle.read(LENGTH_PREFIX.size)
        if len(prefix) != LENGTH_PREFIX.size:
            raise StorageError("truncated length prefix", self.path)
        (dimension,) = LENGTH_PREFIX.unpack(prefix)
        n_spins = dimension.bit_length() - 1
        if dimension < 2 or 1 << n_spins != dimension:
            raise StorageError(f"amplitude count {dimension} is not a power of two", self.path)
        payload = handle.read()
        if len(payload) != dimension * AMPLITUDE_DTYPE.itemsize:
            raise StorageError(f"expected {dimension} amplitudes, found {len(payload) // AMPLITUDE_DTYPE.itemsize}", self.path)
        amplitudes = np.frombuffer(payload, dtype=AMPLITUDE_DTYPE).astype(np.complex128)
        return StateVector(n_spins, amplitudes)


class SweepRepository(BaseRepository[list[SweepRow]]):
    def _dump(self, handle, record: Iterable[SweepRow]):
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(SWEEP_HEADER)
        for row in record:
            writer.writerow(
                (
                    row.seed,
                    row.measurements,
                    row.rf_rounds,
                    "" if row.downfall_time is None else format_number(row.downfall_time),
                    format_number(row.final_mz),
                    int(row.completed),
                )
            )

    def _load(self, handle) -> list[SweepRow]:
        reader = csv.DictReader(handle)
        if tuple(reader.fieldnames or ()) != SWEEP_HEADER:
            raise StorageError(f"not a sweep file, header {reader.fieldnames!r}", self.path)
        return [
            SweepRow(
                seed=int(row["seed"]),
                measurements=int(row["measurements"]),
                rf_rounds=int(row["rf_rounds"]),
                downfall_time=float(row["downfall_time"]) if row["downfall_time"] else None,
                final_mz=float(row["final_mz"]),
                completed=bool(int(row["completed"])),
            )
            for row in reader
        ]


class PlotRepository(BaseRepository):
    """Standalone SVG document written from a matplotlib figure."""

    def _dump(self, handle, record):
        record.savefig(handle, format="svg", metadata={"Date": None})
