import io
import math

import pytest

from tokenwatt import (
    Bin,
    BinGrid,
    Energy,
    MeasurementRecord,
    MeasurementTable,
    TableMetadata,
    ValidationError,
    default_kv_bytes_per_token,
    joules_per_flop,
    load_table,
    lookup,
    request_flops,
    synthesize_table,
    write_table,
)

HEADER = (
    "backend,device,input_cap,output_cap,max_batch,batch_energy,energy_unit,"
    "prefill_energy,decode_energy,samples_measured,warmup_batches"
)


def _record(input_cap, output_cap, max_batch=1, joules=1.0, **kwargs):
    return MeasurementRecord(
        backend="vllm", device="A100", input_cap=input_cap, output_cap=output_cap,
        max_batch=max_batch, batch_energy=Energy(joules), **kwargs,
    )


def _table(records, grid=None):
    grid = grid or BinGrid(input_bins=(32, 256, 512), output_bins=(8, 16, 32, 64))
    return MeasurementTable(records=tuple(records), metadata=TableMetadata(grid=grid))


def test_record_validation():
    with pytest.raises(ValidationError):
        _record(256, 8, max_batch=0)
    with pytest.raises(ValidationError):
        _record(256, 8, joules=0.0)
    with pytest.raises(ValidationError):
        _record(256, 8, samples_measured=0)
    with pytest.raises(ValidationError):
        _record(256, 8, warmup_batches=-1)


def test_record_split_consistency():
    ok = _record(256, 8, joules=10.0, prefill_energy=Energy(6.0), decode_energy=Energy(4.01))
    assert ok.prefill_energy.joules == 6.0
    with pytest.raises(ValidationError, match="0.5%"):
        _record(256, 8, joules=10.0, prefill_energy=Energy(6.0), decode_energy=Energy(4.2))
    with pytest.raises(ValidationError, match="together"):
        _record(256, 8, joules=10.0, prefill_energy=Energy(6.0))


def test_per_request_energy():
    assert _record(256, 8, max_batch=4, joules=2.0).per_request_joules == 0.5


def test_table_rejects_duplicates_and_off_grid():
    with pytest.raises(ValidationError, match="duplicate"):
        _table([_record(256, 8), _record(256, 8)])
    with pytest.raises(ValidationError, match="not on the table grid"):
        _table([_record(999, 8)])


def test_table_queries():
    t = _table([_record(256, 8), _record(256, 16), _record(512, 8)])
    assert t.configurations() == [("vllm", "A100")]
    assert t.bins_for("vllm", "A100") == [Bin(256, 8), Bin(256, 16), Bin(512, 8)]
    assert t.get("vllm", "A100", Bin(256, 16)).input_cap == 256
    assert t.get("vllm", "A100", Bin(512, 64)) is None


def test_lookup_exact_and_strict_miss():
    t = _table([_record(256, 8)])
    assert lookup(t, "vllm", "A100", Bin(256, 8)).provenance == "measured"
    with pytest.raises(ValidationError, match=r"\(256, 16\)"):
        lookup(t, "vllm", "A100", Bin(256, 16))
    with pytest.raises(ValidationError, match="tgi"):
        lookup(t, "tgi", "A100", Bin(256, 8))


def test_interpolation_geometric_mean_on_one_axis():
    # per-request 1.0 J at output 16 and 4.0 J at output 64; output 32 sits at
    # the log midpoint, so interpolation returns the geometric mean, 2.0 J
    t = _table([_record(256, 16, joules=1.0), _record(256, 64, joules=4.0)])
    rec = lookup(t, "vllm", "A100", Bin(256, 32), interpolate=True)
    assert rec.provenance == "interpolated"
    assert rec.max_batch == 1
    assert rec.batch_energy.joules == pytest.approx(2.0, rel=1e-12)


def test_interpolation_bilinear_in_both_axes():
    t = _table([
        _record(32, 16, joules=1.0), _record(32, 64, joules=2.0),
        _record(512, 16, joules=4.0), _record(512, 64, joules=8.0),
    ])
    rec = lookup(t, "vllm", "A100", Bin(256, 32), interpolate=True)
    ti = (math.log(256) - math.log(32)) / (math.log(512) - math.log(32))
    expected = math.exp(
        (1 - ti) * 0.5 * math.log(1.0) + (1 - ti) * 0.5 * math.log(2.0)
        + ti * 0.5 * math.log(4.0) + ti * 0.5 * math.log(8.0)
    )
    assert rec.batch_energy.joules == pytest.approx(expected, rel=1e-12)


def test_interpolation_interpolates_max_batch():
    t = _table([
        _record(256, 16, max_batch=4, joules=4.0),
        _record(256, 64, max_batch=16, joules=16.0),
    ])
    rec = lookup(t, "vllm", "A100", Bin(256, 32), interpolate=True)
    assert rec.max_batch == 8  # geometric mean of 4 and 16
    assert rec.batch_energy.joules == pytest.approx(8.0, rel=1e-12)


def test_interpolation_outside_hull_errors():
    t = _table([_record(256, 16), _record(256, 64)])
    with pytest.raises(ValidationError, match="hull"):
        lookup(t, "vllm", "A100", Bin(256, 8), interpolate=True)
    with pytest.raises(ValidationError, match="hull"):
        lookup(t, "vllm", "A100", Bin(32, 16), interpolate=True)


def test_interpolation_missing_corner_errors():
    t = _table([
        _record(32, 16), _record(32, 64), _record(512, 16),
    ])
    with pytest.raises(ValidationError, match="missing measured neighbor"):
        lookup(t, "vllm", "A100", Bin(256, 32), interpolate=True)


def test_write_load_roundtrip(tmp_path):
    t = _table([
        _record(256, 8, max_batch=4, joules=2.0),
        _record(256, 16, joules=3.5, prefill_energy=Energy(2.0), decode_energy=Energy(1.5)),
    ])
    path = tmp_path / "table.csv"
    write_table(t, path)
    back = load_table(path)
    assert back.metadata.grid == t.metadata.grid
    assert sorted(back.records, key=lambda r: r.bin) == sorted(t.records, key=lambda r: r.bin)


def test_load_converts_units():
    text = (
        f"# input_bins = 256\n# output_bins = 8\n{HEADER}\n"
        "vllm,A100,256,8,1,2.0,Wh,,,1024,20\n"
        "tgi,A100,256,8,1,0.001,kWh,,,1024,20\n"
    )
    t = load_table(io.StringIO(text))
    assert t.get("vllm", "A100", Bin(256, 8)).batch_energy.joules == 7200.0
    assert t.get("tgi", "A100", Bin(256, 8)).batch_energy.joules == 3600.0


def test_load_rejects_bad_unit_and_header():
    text = f"# input_bins = 256\n# output_bins = 8\n{HEADER}\nvllm,A100,256,8,1,2.0,BTU,,,1024,20\n"
    with pytest.raises(ValidationError, match="energy_unit"):
        load_table(io.StringIO(text))
    with pytest.raises(ValidationError, match="header"):
        load_table(io.StringIO("a,b,c\n1,2,3\n"))


def test_load_rejects_wrong_field_count():
    text = f"# input_bins = 256\n# output_bins = 8\n{HEADER}\nvllm,A100,256,8\n"
    with pytest.raises(ValidationError, match="fields"):
        load_table(io.StringIO(text))


def test_load_missing_file():
    with pytest.raises(ValidationError, match="not found"):
        load_table("/nonexistent/table.csv")


def test_synthesize_covers_grid(toy_model, a100):
    grid = BinGrid(input_bins=(32, 256), output_bins=(8, 64))
    t = synthesize_table(grid, toy_model, a100, efficiency=0.5, decode_penalty=2.0)
    assert len(t.records) == 4
    assert t.configurations() == [("synthetic", "A100-PCIe")]
    for b in grid.bins():
        assert t.get("synthetic", "A100-PCIe", b) is not None


def test_synthesize_energy_formula(toy_model, a100):
    grid = BinGrid(input_bins=(256,), output_bins=(8,))
    kv = default_kv_bytes_per_token(toy_model)
    memory = 1000.0 * (256 + 8) * kv  # forces max_batch = 1000
    t = synthesize_table(grid, toy_model, a100, efficiency=0.5, decode_penalty=2.0,
                         memory_bytes=memory)
    rec = t.get("synthetic", "A100-PCIe", Bin(256, 8))
    assert rec.max_batch == 1000
    fb = request_flops(toy_model, 256, 8)
    jpf = joules_per_flop(a100)
    assert rec.prefill_energy.joules == pytest.approx(
        1000 * fb.prefill_flops * jpf / 0.5, rel=1e-12)
    assert rec.decode_energy.joules == pytest.approx(
        1000 * fb.decode_flops * 2.0 * jpf / 0.5, rel=1e-12)
    assert rec.batch_energy.joules == pytest.approx(
        rec.prefill_energy.joules + rec.decode_energy.joules, rel=1e-12)


def test_synthesize_max_batch_floor_is_one(toy_model, a100):
    grid = BinGrid(input_bins=(8192,), output_bins=(512,))
    t = synthesize_table(grid, toy_model, a100, efficiency=1.0, decode_penalty=1.0,
                         memory_bytes=1.0)
    assert t.get("synthetic", "A100-PCIe", Bin(8192, 512)).max_batch == 1


def test_synthesize_protocol_fields(toy_model, a100):
    grid = BinGrid(input_bins=(32, 8192), output_bins=(8,))
    kv = default_kv_bytes_per_token(toy_model)
    memory = 300.0 * (32 + 8) * kv  # batch 300 at (32, 8), tiny at (8192, 8)
    t = synthesize_table(grid, toy_model, a100, efficiency=1.0, decode_penalty=1.0,
                         memory_bytes=memory)
    small = t.get("synthetic", "A100-PCIe", Bin(32, 8))
    large_seq = t.get("synthetic", "A100-PCIe", Bin(8192, 8))
    assert small.max_batch == 300
    assert small.samples_measured == 4096
    assert large_seq.max_batch <= 256
    assert large_seq.samples_measured == 1024
    assert small.warmup_batches == 20


def test_synthesize_validates_arguments(toy_model, a100):
    grid = BinGrid(input_bins=(32,), output_bins=(8,))
    with pytest.raises(ValidationError):
        synthesize_table(grid, toy_model, a100, efficiency=0.0, decode_penalty=1.0)
    with pytest.raises(ValidationError):
        synthesize_table(grid, toy_model, a100, efficiency=1.5, decode_penalty=1.0)
    with pytest.raises(ValidationError):
        synthesize_table(grid, toy_model, a100, efficiency=1.0, decode_penalty=0.5)
    with pytest.raises(ValidationError):
        synthesize_table(grid, toy_model, a100, efficiency=1.0, decode_penalty=1.0,
                         memory_bytes=0.0)


def test_default_kv_bytes(toy_model):
    # 2 tensors * 1 layer * 1 kv head * head_dim 4 * 2 bytes
    assert default_kv_bytes_per_token(toy_model) == 16
