"""Hot inner loop for binning request traces.

Real traces run to millions of rows, so the histogram pass is JIT-compiled
with numba. Set TOKENWATT_DISABLE_NUMBA=1 to force the pure-numpy path
(also taken automatically if numba is unavailable). Both paths produce
identical results; benchmarks/bench_binning.py compares their throughput.
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False

_ENV_FLAG = "TOKENWATT_DISABLE_NUMBA"


def numba_enabled() -> bool:
    """True when the JIT path will be used for kernel dispatch."""
    if not _HAVE_NUMBA:
        return False
    return os.environ.get(_ENV_FLAG, "").strip().lower() not in ("1", "true", "yes")


def active_backend() -> str:
    return "numba" if numba_enabled() else "numpy"


def bin_counts_numpy(
    inputs: np.ndarray,
    outputs: np.ndarray,
    input_bins: np.ndarray,
    output_bins: np.ndarray,
) -> tuple[np.ndarray, int, int]:
    """Vectorized ceiling-bin histogram.

    Returns (counts[ni, no], excluded_input, excluded_output). A request over
    both limits is tallied once, under excluded_input.
    """
    over_in = inputs > input_bins[-1]
    over_out = ~over_in & (outputs > output_bins[-1])
    ok = ~(over_in | over_out)
    ii = np.searchsorted(input_bins, inputs[ok], side="left")
    oi = np.searchsorted(output_bins, outputs[ok], side="left")
    flat = ii * output_bins.shape[0] + oi
    counts = np.bincount(flat, minlength=input_bins.shape[0] * output_bins.shape[0])
    counts = counts.reshape(input_bins.shape[0], output_bins.shape[0]).astype(np.int64)
    return counts, int(over_in.sum()), int(over_out.sum())


def _bin_counts_loop(inputs, outputs, input_bins, output_bins):
    ni = input_bins.shape[0]
    no = output_bins.shape[0]
    counts = np.zeros((ni, no), dtype=np.int64)
    excluded_input = 0
    excluded_output = 0
    max_in = input_bins[ni - 1]
    max_out = output_bins[no - 1]
    for k in range(inputs.shape[0]):
        i = inputs[k]
        o = outputs[k]
        if i > max_in:
            excluded_input += 1
            continue
        if o > max_out:
            excluded_output += 1
            continue
        lo = 0
        hi = ni - 1
        while lo < hi:  # smallest index with input_bins[idx] >= i
            mid = (lo + hi) // 2
            if input_bins[mid] >= i:
                hi = mid
            else:
                lo = mid + 1
        ii = lo
        lo = 0
        hi = no - 1
        while lo < hi:
            mid = (lo + hi) // 2
            if output_bins[mid] >= o:
                hi = mid
            else:
                lo = mid + 1
        counts[ii, lo] += 1
    return counts, excluded_input, excluded_output


if _HAVE_NUMBA:
    bin_counts_numba = njit(cache=True)(_bin_counts_loop)
else:  # pragma: no cover
    bin_counts_numba = None


def bin_counts(
    inputs: np.ndarray,
    outputs: np.ndarray,
    input_bins: np.ndarray,
    output_bins: np.ndarray,
) -> tuple[np.ndarray, int, int]:
    """Dispatch to the JIT kernel or the numpy fallback (env-selected)."""
    inputs = np.ascontiguousarray(inputs, dtype=np.int64)
    outputs = np.ascontiguousarray(outputs, dtype=np.int64)
    input_bins = np.ascontiguousarray(input_bins, dtype=np.int64)
    output_bins = np.ascontiguousarray(output_bins, dtype=np.int64)
    if inputs.shape != outputs.shape:
        raise ValueError("inputs and outputs must have equal length")
    if numba_enabled():
        counts, ei, eo = bin_counts_numba(inputs, outputs, input_bins, output_bins)
        return counts, int(ei), int(eo)
    return bin_counts_numpy(inputs, outputs, input_bins, output_bins)
