import io
import json
import sys

import pytest

import tokenwatt.cli as cli
from tokenwatt import load_table
from conftest import FIXTURE_TRACE


def run(*argv):
    try:
        return cli.main(list(argv))
    except SystemExit as exc:
        return exc.code


def test_version(capsys):
    assert run("--version") == 0
    out = capsys.readouterr().out
    assert "tokenwatt 0.1.0" in out
    assert "report schema 1" in out


def test_usage_errors_exit_1(capsys):
    assert run("no-such-command") == 1
    assert run("estimate") == 1  # missing required flags
    assert run() == 1
    err = capsys.readouterr().err
    assert "error:" in err


def test_data_errors_exit_2(capsys):
    assert run("stats", "--trace", "/nonexistent.csv") == 2
    err = capsys.readouterr().err
    assert err.startswith("error:")
    assert "not found" in err


def test_stats_json(fixture_paths, capsys):
    assert run("stats", "--trace", str(fixture_paths["trace"])) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["kind"] == "stats"
    assert payload["dataset"] == "trace"
    assert payload["count"] == 3
    assert payload["input"]["median"] == 215.0
    assert payload["output"]["max"] == 41


def test_stats_markdown_and_dataset_flag(fixture_paths, capsys):
    assert run("stats", "--trace", str(fixture_paths["trace"]),
               "--dataset", "demo", "--format", "markdown-table") == 0
    out = capsys.readouterr().out
    assert out.startswith("# Trace statistics: demo")


def test_stats_deterministic(fixture_paths, capsys):
    run("stats", "--trace", str(fixture_paths["trace"]))
    first = capsys.readouterr().out
    run("stats", "--trace", str(fixture_paths["trace"]))
    assert capsys.readouterr().out == first


def test_stats_from_stdin(monkeypatch, capsys):
    monkeypatch.setattr(sys, "stdin", io.StringIO(FIXTURE_TRACE))
    assert run("stats", "--trace", "-") == 0
    assert json.loads(capsys.readouterr().out)["dataset"] == "stdin"


def test_bin_output(fixture_paths, capsys):
    assert run("bin", "--trace", str(fixture_paths["trace"])) == 0
    out = capsys.readouterr().out
    assert "256,8,2" in out
    assert "1024,64,1" in out
    assert "# excluded_input = 0" in out


def test_bin_custom_grid(fixture_paths, capsys):
    assert run("bin", "--trace", str(fixture_paths["trace"]),
               "--grid", "1024:64") == 0
    out = capsys.readouterr().out
    assert "1024,64,3" in out


def test_bad_grid_spec(fixture_paths, capsys):
    assert run("bin", "--trace", str(fixture_paths["trace"]), "--grid", "32,64") == 2
    assert run("bin", "--trace", str(fixture_paths["trace"]), "--grid", "a,b:8") == 2


def test_estimate_from_trace(fixture_paths, capsys):
    assert run("estimate", "--trace", str(fixture_paths["trace"]),
               "--table", str(fixture_paths["table"]),
               "--backend", "vllm", "--device", "A100") == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["total_j"] == 6.0
    assert payload["mode"] == "fractional"
    assert payload["label"] == "vllm"


def test_estimate_ceiling_mode(fixture_paths, capsys):
    assert run("estimate", "--trace", str(fixture_paths["trace"]),
               "--table", str(fixture_paths["table"]),
               "--backend", "vllm", "--device", "A100", "--mode", "ceiling") == 0
    assert json.loads(capsys.readouterr().out)["total_j"] == 12.0


def test_binned_pipeline_equals_trace_pipeline(fixture_paths, capsys):
    binned_path = fixture_paths["dir"] / "binned.csv"
    assert run("bin", "--trace", str(fixture_paths["trace"]),
               "--out", str(binned_path)) == 0
    capsys.readouterr()
    assert run("estimate", "--trace", str(fixture_paths["trace"]),
               "--table", str(fixture_paths["table"]),
               "--backend", "vllm", "--device", "A100") == 0
    via_trace = capsys.readouterr().out
    assert run("estimate", "--binned", str(binned_path),
               "--table", str(fixture_paths["table"]),
               "--backend", "vllm", "--device", "A100") == 0
    via_binned = capsys.readouterr().out
    assert via_binned == via_trace


def test_estimate_missing_bin_names_it(fixture_paths, capsys):
    bad_trace = fixture_paths["dir"] / "bad.csv"
    bad_trace.write_text("input_tokens,output_tokens\n5000,100\n", encoding="utf-8")
    assert run("estimate", "--trace", str(bad_trace),
               "--table", str(fixture_paths["table"]),
               "--backend", "vllm", "--device", "A100") == 2
    err = capsys.readouterr().err
    assert err.startswith("error:")
    assert "(8192, 128)" in err


def test_estimate_rejects_grid_with_binned(fixture_paths, capsys):
    binned_path = fixture_paths["dir"] / "binned.csv"
    run("bin", "--trace", str(fixture_paths["trace"]), "--out", str(binned_path))
    capsys.readouterr()
    assert run("estimate", "--binned", str(binned_path), "--grid", "32:8",
               "--table", str(fixture_paths["table"]),
               "--backend", "vllm", "--device", "A100") == 2


def test_out_redirects_and_stdout_stays_clean(fixture_paths, capsys):
    out_path = fixture_paths["dir"] / "report.json"
    assert run("estimate", "--trace", str(fixture_paths["trace"]),
               "--table", str(fixture_paths["table"]),
               "--backend", "vllm", "--device", "A100",
               "--out", str(out_path)) == 0
    assert capsys.readouterr().out == ""
    assert json.loads(out_path.read_text(encoding="utf-8"))["total_j"] == 6.0


def test_baseline(fixture_paths, capsys):
    assert run("baseline", "--trace", str(fixture_paths["trace"]),
               "--model", str(fixture_paths["model"]),
               "--hw", str(fixture_paths["hw"])) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["kind"] == "baseline"
    # toy-model FLOPs at bin caps: 2x(256,8) + 1x(1024,64)
    assert payload["total_flops"] == 11373696
    assert payload["optimal_j"] == pytest.approx(11373696 * 300.0 / 309.7e12, rel=1e-12)
    assert payload["model"] == "toy_model"


def test_compare_cli(fixture_paths, capsys):
    d = fixture_paths["dir"]
    for backend, label in (("vllm", "vllm"), ("naive", "naive")):
        assert run("estimate", "--trace", str(fixture_paths["trace"]),
                   "--table", str(fixture_paths["table"]),
                   "--backend", backend, "--device", "A100",
                   "--out", str(d / f"{label}.json")) == 0
    capsys.readouterr()
    assert run("compare", "--estimates", f"{d}/vllm.json,{d}/naive.json",
               "--baseline-j", "4.0", "--reference", "naive",
               "--dataset", "fixture") == 0
    payload = json.loads(capsys.readouterr().out)
    assert [e["label"] for e in payload["entries"]] == ["vllm", "naive"]
    assert payload["entries"][0]["savings_vs_reference"] == pytest.approx(70.0)
    assert payload["entries"][0]["pct_delta_vs_optimal"] == pytest.approx(50.0)
    assert payload["baseline_j"] == 4.0
    assert payload["mode"] == "fractional"


def test_compare_rejects_non_estimate_json(fixture_paths, capsys):
    d = fixture_paths["dir"]
    (d / "junk.json").write_text('{"kind": "other"}', encoding="utf-8")
    assert run("compare", "--estimates", str(d / "junk.json"),
               "--baseline-j", "1.0", "--reference", "x") == 2


def test_plan_sweep_writes_files(tmp_path, capsys):
    out_dir = tmp_path / "plans"
    assert run("plan-sweep", "--out", str(out_dir)) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 5
    names = sorted(p.name for p in out_dir.iterdir())
    assert names == [
        "sweep_batch_size_in512_out64.cfg",
        "sweep_input_length_out64_batch1.cfg",
        "sweep_input_length_out8_batch1.cfg",
        "sweep_output_length_in512_batch1.cfg",
        "sweep_output_length_in64_batch1.cfg",
    ]


def test_plan_sweep_stdout_deterministic(capsys):
    run("plan-sweep")
    first = capsys.readouterr().out
    run("plan-sweep")
    assert capsys.readouterr().out == first
    assert "axis = batch_size" in first


def test_synth_table_then_validate(fixture_paths, capsys):
    d = fixture_paths["dir"]
    table_path = d / "synth.csv"
    assert run("synth-table", "--model", str(fixture_paths["model"]),
               "--hw", str(fixture_paths["hw"]),
               "--efficiency", "0.5", "--decode-penalty", "2.0",
               "--out", str(table_path)) == 0
    table = load_table(table_path)
    assert len(table.records) == 56
    capsys.readouterr()
    assert run("validate-table", "--table", str(table_path)) == 0
    assert "full coverage" in capsys.readouterr().out


def test_validate_table_partial_coverage_exits_2(fixture_paths, capsys):
    assert run("validate-table", "--table", str(fixture_paths["table"])) == 2
    captured = capsys.readouterr()
    assert "missing" in captured.out
    assert captured.err.startswith("error:")


def test_synth_table_bad_efficiency(fixture_paths, capsys):
    assert run("synth-table", "--model", str(fixture_paths["model"]),
               "--hw", str(fixture_paths["hw"]),
               "--efficiency", "0", "--decode-penalty", "1.0") == 2


def test_permissive_note_on_stderr(fixture_paths, capsys):
    messy = fixture_paths["dir"] / "messy.csv"
    messy.write_text("input_tokens,output_tokens\n10,2\nbad,3\n", encoding="utf-8")
    assert run("stats", "--trace", str(messy), "--permissive") == 0
    captured = capsys.readouterr()
    assert "skipped 1 malformed" in captured.err
    assert json.loads(captured.out)["count"] == 1
