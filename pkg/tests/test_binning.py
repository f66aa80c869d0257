import io

import numpy as np
import pytest

from tokenwatt import (
    Bin,
    BinGrid,
    BinnedWorkload,
    DEFAULT_GRID,
    Overflow,
    Request,
    ValidationError,
    bin_arrays,
    bin_workload,
    map_to_bin,
    read_binned_csv,
    write_binned_csv,
)


def test_map_to_bin_rounds_up():
    assert map_to_bin(Request(215, 7), DEFAULT_GRID) == Bin(256, 8)
    assert map_to_bin(Request(929, 41), DEFAULT_GRID) == Bin(1024, 64)
    assert map_to_bin(Request(33, 9), DEFAULT_GRID) == Bin(128, 16)


def test_map_to_bin_exact_caps_stay_in_bin():
    assert map_to_bin(Request(32, 8), DEFAULT_GRID) == Bin(32, 8)
    assert map_to_bin(Request(8192, 512), DEFAULT_GRID) == Bin(8192, 512)


def test_map_to_bin_zero_maps_to_smallest():
    assert map_to_bin(Request(0, 0), DEFAULT_GRID) == Bin(32, 8)


def test_map_to_bin_overflow():
    assert map_to_bin(Request(8193, 8), DEFAULT_GRID) is Overflow.INPUT
    assert map_to_bin(Request(100, 513), DEFAULT_GRID) is Overflow.OUTPUT
    # input overflow wins when both dimensions are over
    assert map_to_bin(Request(9000, 600), DEFAULT_GRID) is Overflow.INPUT


def test_default_input_bins_skip_64():
    assert map_to_bin(Request(33, 8), DEFAULT_GRID) == Bin(128, 8)
    assert map_to_bin(Request(64, 8), DEFAULT_GRID) == Bin(128, 8)


def test_bin_arrays_matches_scalar_path(rng):
    inputs = rng.integers(0, 10000, size=5000)
    outputs = rng.integers(0, 700, size=5000)
    workload = bin_arrays(inputs, outputs, DEFAULT_GRID)

    expected: dict[Bin, int] = {}
    excl_in = excl_out = 0
    for i, o in zip(inputs.tolist(), outputs.tolist()):
        target = map_to_bin(Request(i, o), DEFAULT_GRID)
        if target is Overflow.INPUT:
            excl_in += 1
        elif target is Overflow.OUTPUT:
            excl_out += 1
        else:
            expected[target] = expected.get(target, 0) + 1
    assert workload.counts == expected
    assert workload.excluded_input == excl_in
    assert workload.excluded_output == excl_out
    assert workload.total_requests == 5000


def test_bin_arrays_rejects_negative():
    with pytest.raises(ValidationError):
        bin_arrays(np.array([-1]), np.array([2]), DEFAULT_GRID)


def test_bin_workload_from_requests(small_grid):
    reqs = [Request(10, 3), Request(200, 64), Request(2000, 3), Request(100, 100)]
    w = bin_workload(reqs, small_grid)
    assert w.counts == {Bin(32, 8): 1, Bin(256, 64): 1}
    assert w.excluded_input == 1
    assert w.excluded_output == 1


def test_bin_workload_default_grid():
    w = bin_workload([Request(215, 7)])
    assert w.grid == DEFAULT_GRID
    assert w.counts == {Bin(256, 8): 1}


def test_workload_validation(small_grid):
    with pytest.raises(ValidationError):
        BinnedWorkload(grid=small_grid, counts={Bin(999, 8): 1})
    with pytest.raises(ValidationError):
        BinnedWorkload(grid=small_grid, counts={Bin(32, 8): -1})
    with pytest.raises(ValidationError):
        BinnedWorkload(grid=small_grid, excluded_input=-1)


def test_workload_add(small_grid):
    a = BinnedWorkload(grid=small_grid, counts={Bin(32, 8): 2}, excluded_input=1)
    b = BinnedWorkload(grid=small_grid, counts={Bin(32, 8): 3, Bin(256, 64): 1},
                       excluded_output=2)
    merged = a + b
    assert merged.counts == {Bin(32, 8): 5, Bin(256, 64): 1}
    assert merged.excluded_input == 1
    assert merged.excluded_output == 2
    with pytest.raises(ValidationError):
        a + BinnedWorkload(grid=DEFAULT_GRID)


def test_sorted_counts_drops_zero_bins(small_grid):
    w = BinnedWorkload(grid=small_grid, counts={Bin(256, 64): 1, Bin(32, 8): 0})
    assert w.sorted_counts() == [(Bin(256, 64), 1)]
    assert w.total_binned == 1


def test_binned_csv_roundtrip(small_grid):
    w = BinnedWorkload(grid=small_grid,
                       counts={Bin(32, 8): 5, Bin(1024, 64): 2},
                       excluded_input=3, excluded_output=1)
    buf = io.StringIO()
    write_binned_csv(w, buf)
    back = read_binned_csv(io.StringIO(buf.getvalue()))
    assert back == w


def test_binned_csv_file_roundtrip(tmp_path, small_grid):
    w = BinnedWorkload(grid=small_grid, counts={Bin(128, 8): 4})
    path = tmp_path / "binned.csv"
    write_binned_csv(w, path)
    assert read_binned_csv(path) == w


def test_binned_csv_requires_grid_comments():
    with pytest.raises(ValidationError, match="input_bins"):
        read_binned_csv(io.StringIO("input_cap,output_cap,count\n32,8,1\n"))


def test_binned_csv_rejects_duplicates():
    text = (
        "# input_bins = 32,128\n# output_bins = 8\n"
        "input_cap,output_cap,count\n32,8,1\n32,8,2\n"
    )
    with pytest.raises(ValidationError, match="duplicate"):
        read_binned_csv(io.StringIO(text))
