"""Measurement tables: per-(backend, device, bin) max batch size and measured
full-batch energy, as produced by an external GPU harness.

Tables are immutable after load. Rows store the energy of ONE FULL BATCH at
max_batch; per-request energy is always derived, never stored. Lookup is
strict by default; log-log bilinear interpolation is opt-in and every
synthesized record is flagged, so estimates never silently mix provenance.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .core import (
    Bin,
    BinGrid,
    Energy,
    HardwareSpec,
    J_PER_KWH,
    J_PER_WH,
    ModelConfig,
    ValidationError,
)
from .flops import joules_per_flop, request_flops

TABLE_COLUMNS = (
    "backend", "device", "input_cap", "output_cap", "max_batch", "batch_energy",
    "energy_unit", "prefill_energy", "decode_energy", "samples_measured", "warmup_batches",
)
ENERGY_UNIT_FACTORS = {"J": 1.0, "Wh": J_PER_WH, "kWh": J_PER_KWH}

# Measurement protocol defaults: 1024-sample runs, metrics for batches over
# 256 taken over 4096 samples and normalized back, warmup on up to 20 batches.
PROTOCOL_SAMPLES = 1024
PROTOCOL_SAMPLES_LARGE_BATCH = 4096
LARGE_BATCH_THRESHOLD = 256
PROTOCOL_WARMUP_BATCHES = 20
NORMALIZATION_NOTE = (
    f"batches over {LARGE_BATCH_THRESHOLD} measured over "
    f"{PROTOCOL_SAMPLES_LARGE_BATCH} samples and normalized to {PROTOCOL_SAMPLES}"
)

MEASURED = "measured"
INTERPOLATED = "interpolated"


@dataclass(frozen=True)
class MeasurementRecord:
    """One measured cell: energy for a full batch of max_batch requests."""

    backend: str
    device: str
    input_cap: int
    output_cap: int
    max_batch: int
    batch_energy: Energy
    prefill_energy: Optional[Energy] = None
    decode_energy: Optional[Energy] = None
    samples_measured: int = PROTOCOL_SAMPLES
    warmup_batches: int = PROTOCOL_WARMUP_BATCHES
    provenance: str = MEASURED  # measured | interpolated; never serialized

    def __post_init__(self) -> None:
        if self.max_batch < 1:
            raise ValidationError(f"max_batch must be >= 1, got {self.max_batch}")
        if self.batch_energy.joules <= 0:
            raise ValidationError(f"batch_energy must be positive, got {self.batch_energy.joules} J")
        if self.samples_measured < 1:
            raise ValidationError(f"samples_measured must be >= 1, got {self.samples_measured}")
        if self.warmup_batches < 0:
            raise ValidationError(f"warmup_batches must be >= 0, got {self.warmup_batches}")
        if (self.prefill_energy is None) != (self.decode_energy is None):
            raise ValidationError("prefill_energy and decode_energy must be given together")
        if self.prefill_energy is not None:
            split = self.prefill_energy.joules + self.decode_energy.joules
            if abs(split - self.batch_energy.joules) > 0.005 * self.batch_energy.joules:
                raise ValidationError(
                    f"prefill+decode ({split} J) differs from batch_energy "
                    f"({self.batch_energy.joules} J) by more than 0.5%"
                )

    @property
    def bin(self) -> Bin:
        return Bin(self.input_cap, self.output_cap)

    @property
    def per_request_joules(self) -> float:
        return self.batch_energy.joules / self.max_batch


@dataclass(frozen=True)
class TableMetadata:
    """Measurement-protocol context carried with a table, not enforced by it."""

    grid: BinGrid
    protocol_samples: int = PROTOCOL_SAMPLES
    normalization_note: str = NORMALIZATION_NOTE
    padding_policy: str = "unspecified"


@dataclass(frozen=True)
class MeasurementTable:
    records: tuple[MeasurementRecord, ...]
    metadata: TableMetadata
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        index: dict[tuple[str, str, int, int], MeasurementRecord] = {}
        for rec in self.records:
            if not self.metadata.grid.contains(rec.bin):
                raise ValidationError(
                    f"bin ({rec.input_cap}, {rec.output_cap}) is not on the table grid"
                )
            key = (rec.backend, rec.device, rec.input_cap, rec.output_cap)
            if key in index:
                raise ValidationError(
                    f"duplicate record for backend={rec.backend!r} device={rec.device!r} "
                    f"bin=({rec.input_cap}, {rec.output_cap})"
                )
            index[key] = rec
        object.__setattr__(self, "_index", index)

    def configurations(self) -> list[tuple[str, str]]:
        """Sorted distinct (backend, device) pairs."""
        return sorted({(r.backend, r.device) for r in self.records})

    def bins_for(self, backend: str, device: str) -> list[Bin]:
        return sorted(r.bin for r in self.records
                      if r.backend == backend and r.device == device)

    def get(self, backend: str, device: str, b: Bin) -> Optional[MeasurementRecord]:
        return self._index.get((backend, device, b.input_cap, b.output_cap))


def lookup(
    table: MeasurementTable,
    backend: str,
    device: str,
    b: Bin,
    interpolate: bool = False,
) -> MeasurementRecord:
    """Record for a bin; exact match, or a flagged interpolated record.

    Interpolation works in log-log space on per-request energy (and max
    batch) over the bracketing measured caps, degenerating to 1-D on a
    measured row or column. Bins outside the measured bounding box, or with
    a missing bracket corner, are errors.
    """
    rec = table.get(backend, device, b)
    if rec is not None:
        return rec
    if not interpolate:
        raise ValidationError(
            f"no record for backend={backend!r} device={device!r} "
            f"bin=({b.input_cap}, {b.output_cap}) (interpolation disabled)"
        )
    return _interpolate(table, backend, device, b)


def _bracket(caps: list[int], value: int, dim: str, b: Bin) -> tuple[int, int]:
    if value in caps:
        return value, value
    below = [c for c in caps if c < value]
    above = [c for c in caps if c > value]
    if not below or not above:
        raise ValidationError(
            f"bin ({b.input_cap}, {b.output_cap}) is outside the hull of measured "
            f"{dim} caps {caps}"
        )
    return max(below), min(above)


def _interpolate(table: MeasurementTable, backend: str, device: str, b: Bin) -> MeasurementRecord:
    measured = [r for r in table.records if r.backend == backend and r.device == device]
    if not measured:
        raise ValidationError(f"no records for backend={backend!r} device={device!r}")
    icaps = sorted({r.input_cap for r in measured})
    ocaps = sorted({r.output_cap for r in measured})
    i_lo, i_hi = _bracket(icaps, b.input_cap, "input", b)
    o_lo, o_hi = _bracket(ocaps, b.output_cap, "output", b)

    corners = {}
    for ic in {i_lo, i_hi}:
        for oc in {o_lo, o_hi}:
            rec = table.get(backend, device, Bin(ic, oc))
            if rec is None:
                raise ValidationError(
                    f"cannot interpolate bin ({b.input_cap}, {b.output_cap}): "
                    f"missing measured neighbor ({ic}, {oc}) for backend={backend!r} "
                    f"device={device!r}"
                )
            corners[(ic, oc)] = rec

    ti = 0.0 if i_lo == i_hi else (
        (math.log(b.input_cap) - math.log(i_lo)) / (math.log(i_hi) - math.log(i_lo))
    )
    to = 0.0 if o_lo == o_hi else (
        (math.log(b.output_cap) - math.log(o_lo)) / (math.log(o_hi) - math.log(o_lo))
    )

    def blend(value_of) -> float:
        v00 = math.log(value_of(corners[(i_lo, o_lo)]))
        v01 = math.log(value_of(corners[(i_lo, o_hi)]))
        v10 = math.log(value_of(corners[(i_hi, o_lo)]))
        v11 = math.log(value_of(corners[(i_hi, o_hi)]))
        return math.exp(
            (1 - ti) * (1 - to) * v00 + (1 - ti) * to * v01
            + ti * (1 - to) * v10 + ti * to * v11
        )

    per_request = blend(lambda r: r.per_request_joules)
    max_batch = max(1, round(blend(lambda r: float(r.max_batch))))
    anchor = corners[(i_lo, o_lo)]
    return MeasurementRecord(
        backend=backend,
        device=device,
        input_cap=b.input_cap,
        output_cap=b.output_cap,
        max_batch=max_batch,
        batch_energy=Energy(per_request * max_batch),
        samples_measured=anchor.samples_measured,
        warmup_batches=anchor.warmup_batches,
        provenance=INTERPOLATED,
    )


def default_kv_bytes_per_token(model: ModelConfig, bytes_per_value: int = 2) -> int:
    """K and V cache bytes per token for one sequence (16-bit values)."""
    return 2 * model.n_layers * model.n_kv_heads * model.head_dim * bytes_per_value


def synthesize_table(
    grid: BinGrid,
    model: ModelConfig,
    hw: HardwareSpec,
    efficiency: float,
    decode_penalty: float,
    backend: str = "synthetic",
    device: Optional[str] = None,
    memory_bytes: float = 40e9,
    kv_bytes_per_token: Optional[int] = None,
    padding_policy: str = "padded-to-cap (synthetic)",
) -> MeasurementTable:
    """Full-grid synthetic table shaped like real measurements.

    Batch energy is the analytic FLOPs cost at nameplate J/FLOP, divided by
    `efficiency` (fraction of peak actually achieved) with decode FLOPs
    weighted by `decode_penalty` (decoding is memory-bound and costs more
    per FLOP). Max batch comes from a KV-cache memory heuristic. Since
    efficiency <= 1 and penalty >= 1, every row dominates its idealized cost.
    """
    if not 0 < efficiency <= 1:
        raise ValidationError(f"efficiency must be in (0, 1], got {efficiency}")
    if decode_penalty < 1:
        raise ValidationError(f"decode_penalty must be >= 1, got {decode_penalty}")
    if memory_bytes <= 0:
        raise ValidationError(f"memory_bytes must be positive, got {memory_bytes}")
    device = device if device is not None else hw.name
    kv_bytes = kv_bytes_per_token if kv_bytes_per_token is not None \
        else default_kv_bytes_per_token(model)
    if kv_bytes <= 0:
        raise ValidationError(f"kv_bytes_per_token must be positive, got {kv_bytes}")
    jpf = joules_per_flop(hw)

    records = []
    for b in grid.bins():
        max_batch = max(1, int(memory_bytes // ((b.input_cap + b.output_cap) * kv_bytes)))
        fb = request_flops(model, b.input_cap, b.output_cap)
        prefill_j = max_batch * fb.prefill_flops * jpf / efficiency
        decode_j = max_batch * fb.decode_flops * decode_penalty * jpf / efficiency
        records.append(MeasurementRecord(
            backend=backend,
            device=device,
            input_cap=b.input_cap,
            output_cap=b.output_cap,
            max_batch=max_batch,
            batch_energy=Energy(prefill_j + decode_j),
            prefill_energy=Energy(prefill_j),
            decode_energy=Energy(decode_j),
            samples_measured=PROTOCOL_SAMPLES_LARGE_BATCH
            if max_batch > LARGE_BATCH_THRESHOLD else PROTOCOL_SAMPLES,
            warmup_batches=PROTOCOL_WARMUP_BATCHES,
        ))
    metadata = TableMetadata(grid=grid, padding_policy=padding_policy)
    return MeasurementTable(records=tuple(records), metadata=metadata)


def write_table(table: MeasurementTable, path_or_buf) -> None:
    """Serialize to the table csv schema, energies in joules, metadata as
    leading comment lines."""
    buf = io.StringIO()
    md = table.metadata
    buf.write("# input_bins = " + ",".join(str(x) for x in md.grid.input_bins) + "\n")
    buf.write("# output_bins = " + ",".join(str(x) for x in md.grid.output_bins) + "\n")
    buf.write(f"# protocol_samples = {md.protocol_samples}\n")
    buf.write(f"# normalization_note = {md.normalization_note}\n")
    buf.write(f"# padding_policy = {md.padding_policy}\n")
    buf.write(",".join(TABLE_COLUMNS) + "\n")
    for rec in sorted(table.records,
                      key=lambda r: (r.backend, r.device, r.input_cap, r.output_cap)):
        prefill = "" if rec.prefill_energy is None else repr(rec.prefill_energy.joules)
        decode = "" if rec.decode_energy is None else repr(rec.decode_energy.joules)
        buf.write(
            f"{rec.backend},{rec.device},{rec.input_cap},{rec.output_cap},"
            f"{rec.max_batch},{rec.batch_energy.joules!r},J,{prefill},{decode},"
            f"{rec.samples_measured},{rec.warmup_batches}\n"
        )
    text = buf.getvalue()
    if hasattr(path_or_buf, "write"):
        path_or_buf.write(text)
    else:
        Path(path_or_buf).write_text(text, encoding="utf-8")


def load_table(path_or_buf, grid: Optional[BinGrid] = None) -> MeasurementTable:
    """Parse and validate a measurement-table csv.

    The grid comes from `# input_bins / # output_bins` comments when present,
    then the `grid` argument, then the default grid. Energy columns are
    converted to joules using the row's energy_unit.
    """
    if hasattr(path_or_buf, "read"):
        text = path_or_buf.read()
        origin = "<stream>"
    else:
        p = Path(path_or_buf)
        if not p.exists():
            raise ValidationError(f"measurement table not found: {p}")
        text = p.read_text(encoding="utf-8")
        origin = str(p)

    meta: dict[str, str] = {}
    header: Optional[list[str]] = None
    records: list[MeasurementRecord] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                k, v = body.split("=", 1)
                meta[k.strip()] = v.strip()
            continue
        if header is None:
            header = [h.strip() for h in line.split(",")]
            if tuple(header) != TABLE_COLUMNS:
                raise ValidationError(
                    f"{origin}:{lineno}: bad header; expected "
                    f"{','.join(TABLE_COLUMNS)!r}"
                )
            continue
        parts = [x.strip() for x in line.split(",")]
        if len(parts) != len(TABLE_COLUMNS):
            raise ValidationError(
                f"{origin}:{lineno}: expected {len(TABLE_COLUMNS)} fields, got {len(parts)}"
            )
        records.append(_parse_record(dict(zip(TABLE_COLUMNS, parts)), origin, lineno))
    if header is None:
        raise ValidationError(f"{origin}: missing header row")

    if "input_bins" in meta and "output_bins" in meta:
        grid = BinGrid(
            input_bins=tuple(int(x) for x in meta["input_bins"].split(",")),
            output_bins=tuple(int(x) for x in meta["output_bins"].split(",")),
        )
    elif grid is None:
        grid = BinGrid()
    metadata = TableMetadata(
        grid=grid,
        protocol_samples=int(meta.get("protocol_samples", str(PROTOCOL_SAMPLES))),
        normalization_note=meta.get("normalization_note", NORMALIZATION_NOTE),
        padding_policy=meta.get("padding_policy", "unspecified"),
    )
    return MeasurementTable(records=tuple(records), metadata=metadata)


def _parse_record(row: dict[str, str], origin: str, lineno: int) -> MeasurementRecord:
    unit = row["energy_unit"]
    if unit not in ENERGY_UNIT_FACTORS:
        raise ValidationError(
            f"{origin}:{lineno}: energy_unit must be one of "
            f"{sorted(ENERGY_UNIT_FACTORS)}, got {unit!r}"
        )
    factor = ENERGY_UNIT_FACTORS[unit]

    def energy(col: str) -> Optional[Energy]:
        raw = row[col]
        if raw == "":
            return None
        try:
            value = float(raw)
        except ValueError:
            raise ValidationError(f"{origin}:{lineno}: {col} is not a number: {raw!r}") from None
        if value <= 0:
            raise ValidationError(f"{origin}:{lineno}: {col} must be positive, got {value}")
        return Energy(value * factor)

    def integer(col: str) -> int:
        try:
            return int(row[col])
        except ValueError:
            raise ValidationError(
                f"{origin}:{lineno}: {col} is not an integer: {row[col]!r}"
            ) from None

    batch_energy = energy("batch_energy")
    if batch_energy is None:
        raise ValidationError(f"{origin}:{lineno}: batch_energy is required")
    try:
        return MeasurementRecord(
            backend=row["backend"],
            device=row["device"],
            input_cap=integer("input_cap"),
            output_cap=integer("output_cap"),
            max_batch=integer("max_batch"),
            batch_energy=batch_energy,
            prefill_energy=energy("prefill_energy"),
            decode_energy=energy("decode_energy"),
            samples_measured=integer("samples_measured"),
            warmup_batches=integer("warmup_batches"),
        )
    except ValidationError as exc:
        raise ValidationError(f"{origin}:{lineno}: {exc}") from None
