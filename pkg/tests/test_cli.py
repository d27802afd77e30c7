import csv
import io
import json

import pytest

from srpfmc.cli import BASE_FIELDS, main


def run(args, env=None):
    out, err = io.StringIO(), io.StringIO()
    code = main(args, env=env or {}, stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def records(text):
    return [json.loads(line) for line in text.splitlines()]


def test_sample_subordinator_records():
    code, out, _ = run(["sample-subordinator", "--seed", "4", "--set", "sampling.n_samples=4000"])
    assert code == 0
    (rec,) = records(out)
    assert list(rec)[:len(BASE_FIELDS)] == list(BASE_FIELDS)
    assert rec["op"] == "sample-subordinator" and rec["seed"] == 4 and rec["runtime_ms"] is None
    assert abs(rec["estimate"] - rec["target"]) < 4 * rec["stderr"]


def test_output_independent_of_workers():
    args = ["verify-laplace", "--seed", "9", "--set", "sampling.n_samples=3000"]
    a = run(args + ["--workers", "1"])[1]
    b = run(args + ["--workers", "3"])[1]
    assert a == b


def test_seed_from_environment():
    _, out, _ = run(["sample-subordinator", "--set", "sampling.n_samples=100"], env={"SRPFMC_SEED": "31"})
    assert records(out)[0]["seed"] == 31


def test_csv_identity_header():
    code, out, _ = run(["kernel", "--format", "csv", "--set", "model.d=1", "--set", "run.x_grid=[0, 1]"])
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith("# identity: ")
    rows = list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))
    assert len(rows) == 2 and rows[0]["op"] == "kernel"
    assert rows[0]["runtime_ms"] == ""


def test_timing_fills_runtime():
    _, out, _ = run(["kernel", "--timing", "--set", "run.x_grid=[0]"])
    assert records(out)[0]["runtime_ms"] >= 0


def test_config_file_and_overrides(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("model.d = 1\nrun.tau = 0.5\nrun.r = [0, 1]\n")
    code, out, _ = run(["pair-potential", "--config", str(cfg), "--set", "run.tau=0.25"])
    recs = records(out)
    assert code == 0 and [r["tau"] for r in recs] == [0.25, 0.25]


def test_schema_error_exit_code():
    code, out, err = run(["kernel", "--set", "modle.mass=2"])
    assert code == 1 and out == ""
    msg = json.loads(err)
    assert msg["error"] == "schema_violation"
    assert msg["violations"][0]["key"] == "modle.mass"


def test_moment_request_rejected_for_massless():
    code, _, err = run(["ito-battery", "--set", "model.m=0", "--set", "paths.brownian_time_cap=1e9",
                        "--set", "run.moments=True"])
    assert code == 1 and json.loads(err)["error"] == "rejected_m_zero"


def test_non_dyadic_split_exit_code():
    code, _, err = run(["additivity-battery", "--set", "run.split=[0.3, 0.5]", "--set", "sampling.n_samples=10"])
    assert code == 1 and json.loads(err)["error"] == "non_dyadic_split"


def test_beta_out_of_range_exit_code():
    code, _, err = run(["gaussian-domination", "--set", "run.beta=50.0", "--set", "sampling.n_samples=100"])
    assert code == 1 and json.loads(err)["error"] == "beta_out_of_range"


def test_plot_dir_writes_figure(tmp_path):
    code, out, _ = run(["kernel", "--set", "model.d=1", "--plot-dir", str(tmp_path)])
    assert code == 0 and (tmp_path / "kernel.png").stat().st_size > 0


def test_out_file(tmp_path):
    path = tmp_path / "o.jsonl"
    code, out, _ = run(["kernel", "--set", "run.x_grid=[0]", "--out", str(path)])
    assert code == 0 and out == ""
    assert records(path.read_text())[0]["op"] == "kernel"


def test_build_table_then_reuse(tmp_path):
    path = str(tmp_path / "w.bin")
    code, out, _ = run(["build-table", "--set", f"run.table_path='{path}'", "--set", "run.tau_max=2.0",
                        "--set", "run.r_max=8.0"])
    assert code == 0 and records(out)[0]["estimate"] < 1e-5
    code, out, _ = run(["moment-battery", "--set", f"run.table_path='{path}'", "--set", "sampling.n_samples=200",
                        "--set", "paths.n_slabs=4", "--set", "paths.n_substeps=2", "--set", "run.t_grid=[1, 2]"])
    assert code in (0, 2) and len(records(out)) == 2


def test_print_defaults():
    code, out, _ = run(["--print-defaults"])
    assert code == 0 and "model.m = 1.0" in out


@pytest.mark.parametrize("cmd", ["sample-subordinator", "verify-laplace", "kernel", "pair-potential", "fk-element",
                                 "fiber", "green-function", "field-char", "additivity-battery"])
def test_records_are_schema_stable(cmd):
    code, out, _ = run([cmd, "--set", "sampling.n_samples=3000", "--seed", "2"])
    recs = records(out)
    assert code == 0 and recs
    for r in recs:
        assert tuple(r)[:len(BASE_FIELDS)] == BASE_FIELDS
        assert r["op"] == cmd and isinstance(r["params_digest"], str)
