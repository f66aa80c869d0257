"""Trace file parsing and token-length statistics.

Traces arrive as csv or jsonl with per-request input/output token counts
already computed (no tokenization here). Parsing is streaming and
single-pass; malformed rows abort the run unless permissive mode is on, in
which case they are skipped and reported.
"""

from __future__ import annotations

import csv
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import Request, ValidationError

TRACE_FORMATS = ("generic-csv", "jsonl")


@dataclass(frozen=True)
class TraceSource:
    """Where a trace lives and how its columns map to token fields."""

    path: str
    format: str  # one of TRACE_FORMATS
    column_map: dict[str, str] = field(
        default_factory=lambda: {"input_tokens": "input_tokens", "output_tokens": "output_tokens"}
    )

    def __post_init__(self) -> None:
        if self.format not in TRACE_FORMATS:
            raise ValidationError(
                f"unknown trace format {self.format!r}; expected one of {TRACE_FORMATS}"
            )
        missing = {"input_tokens", "output_tokens"} - self.column_map.keys()
        if missing:
            raise ValidationError(f"column_map missing fields: {', '.join(sorted(missing))}")


@dataclass(frozen=True)
class RowError:
    line: int
    message: str


@dataclass(frozen=True)
class TraceLoad:
    """Result of parsing a trace: requests in file order plus skipped rows."""

    requests: list[Request]
    malformed: list[RowError]

    @property
    def malformed_count(self) -> int:
        return len(self.malformed)


@dataclass(frozen=True)
class TraceStats:
    """Distribution summary of one token-length column."""

    count: int
    mean: float
    std: float
    median: float
    p99: float
    max: int


def load_trace(source: TraceSource, permissive: bool = False) -> TraceLoad:
    """Parse a trace file into Requests.

    Raises on any malformed row unless `permissive`, in which case bad rows
    are skipped and returned in .malformed. Row order is preserved.
    """
    if source.path == "-":
        lines = sys.stdin
    else:
        p = Path(source.path)
        if not p.exists():
            raise ValidationError(f"trace file not found: {p}")
        lines = p.open("r", encoding="utf-8", newline="")
    try:
        if source.format == "generic-csv":
            requests, malformed = _parse_csv(lines, source)
        else:
            requests, malformed = _parse_jsonl(lines, source)
    finally:
        if lines is not sys.stdin:
            lines.close()
    if malformed and not permissive:
        first = malformed[0]
        raise ValidationError(
            f"{source.path}: {len(malformed)} malformed row(s); first at line "
            f"{first.line}: {first.message} (use permissive mode to skip)"
        )
    return TraceLoad(requests=requests, malformed=malformed)


def _token_value(raw, column: str) -> int:
    if isinstance(raw, bool) or not isinstance(raw, (int, str)):
        raise ValidationError(f"column {column!r} is not an integer: {raw!r}")
    if isinstance(raw, str):
        try:
            raw = int(raw.strip())
        except ValueError:
            raise ValidationError(f"column {column!r} is not an integer: {raw!r}") from None
    if raw < 0:
        raise ValidationError(f"column {column!r} is negative: {raw}")
    return raw


def _parse_csv(lines, source: TraceSource):
    reader = csv.DictReader(lines)
    if reader.fieldnames is None:
        raise ValidationError(f"{source.path}: empty file, expected a header row")
    in_col = source.column_map["input_tokens"]
    out_col = source.column_map["output_tokens"]
    for col in (in_col, out_col):
        if col not in reader.fieldnames:
            raise ValidationError(
                f"{source.path}: missing column {col!r}; header has {reader.fieldnames}"
            )
    requests: list[Request] = []
    malformed: list[RowError] = []
    for row in reader:
        line = reader.line_num
        try:
            requests.append(Request(
                input_tokens=_token_value(row.get(in_col), in_col),
                output_tokens=_token_value(row.get(out_col), out_col),
            ))
        except ValidationError as exc:
            malformed.append(RowError(line=line, message=str(exc)))
    return requests, malformed


def _parse_jsonl(lines, source: TraceSource):
    in_col = source.column_map["input_tokens"]
    out_col = source.column_map["output_tokens"]
    requests: list[Request] = []
    malformed: list[RowError] = []
    for line_num, raw in enumerate(lines, start=1):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
            if not isinstance(obj, dict):
                raise ValidationError(f"expected a json object, got {type(obj).__name__}")
            for col in (in_col, out_col):
                if col not in obj:
                    raise ValidationError(f"missing member {col!r}")
            requests.append(Request(
                input_tokens=_token_value(obj[in_col], in_col),
                output_tokens=_token_value(obj[out_col], out_col),
            ))
        except (json.JSONDecodeError, ValidationError) as exc:
            malformed.append(RowError(line=line_num, message=str(exc)))
    return requests, malformed


def compute_stats(values: Iterable[int]) -> TraceStats:
    """Summarize a nonnegative integer sequence.

    Median uses the lower middle element for even counts and p99 is the
    nearest-rank (no interpolation) percentile, so both stay integers for
    integer input. Std is the population (divide-by-n) form.
    """
    arr = np.asarray(values if isinstance(values, (np.ndarray, list, tuple)) else list(values))
    if arr.size == 0:
        raise ValidationError("cannot compute statistics of an empty sequence")
    if arr.min() < 0:
        raise ValidationError("token counts must be nonnegative")
    arr = np.sort(arr.astype(np.int64))
    n = int(arr.size)
    p99_rank = -((-99 * n) // 100)  # ceil(0.99 * n) in exact integer arithmetic
    return TraceStats(
        count=n,
        mean=float(arr.mean()),
        std=float(arr.std()),
        median=float(arr[(n - 1) // 2]),
        p99=float(arr[p99_rank - 1]),
        max=int(arr[-1]),
    )


def summarize_trace(requests: Sequence[Request]) -> tuple[TraceStats, TraceStats]:
    """Independent input-column and output-column statistics for a trace."""
    if not requests:
        raise ValidationError("cannot summarize an empty trace")
    inputs = np.fromiter((r.input_tokens for r in requests), dtype=np.int64, count=len(requests))
    outputs = np.fromiter((r.output_tokens for r in requests), dtype=np.int64, count=len(requests))
    return compute_stats(inputs), compute_stats(outputs)
