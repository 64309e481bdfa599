import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from kronsep import read_maps
from kronsep.bench import CSV_HEADER, PROFILE_FIELDS
from kronsep.cli import main
from kronsep.report import JSON_FIELDS


def run(*args):
    return main([str(a) for a in args])


def test_simulate_writes_deterministic_files(tmp_path):
    assert run("simulate", "--level", 3, "--seed", 42, "--out", tmp_path / "a") == 0
    assert run("simulate", "--level", 3, "--seed", 42, "--out", tmp_path / "b") == 0
    for name in ("S_true.ksm", "Y.ksm"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert sorted(p.name for p in (tmp_path / "a").iterdir()) == ["S_true.ksm", "Y.ksm"]


def test_simulate_sizes_grow_fourfold(tmp_path):
    sizes = []
    for level in range(1, 7):
        run("simulate", "--level", level, "--out", tmp_path / str(level))
        sizes.append((tmp_path / str(level) / "Y.ksm").stat().st_size - 32)
    assert all(b == 4 * a for a, b in zip(sizes, sizes[1:]))


@pytest.mark.parametrize("args", [["simulate", "--level", "-1"], ["simulate", "--level", "x"],
                                  ["solve", "--level", "2", "--method", "foo"], ["bogus"],
                                  ["compare"], ["solve", "--level", "2", "--tol", "-1"]])
def test_usage_errors_exit_2(args, capsys):
    with pytest.raises(SystemExit) as info:
        run(*args)
    assert info.value.code == 2
    assert "usage" in capsys.readouterr().err


def test_missing_level_exit_2(capsys):
    assert run("solve") == 2
    assert run("simulate") == 2


def test_dense_and_cg_agree(tmp_path):
    run("simulate", "--level", 2, "--seed", 5, "--out", tmp_path / "d")
    y = tmp_path / "d" / "Y.ksm"
    assert run("solve", "--input", y, "--method", "dense", "--out", tmp_path / "dense") == 0
    assert run("solve", "--input", y, "--method", "cg", "--tol", "1e-14", "--out", tmp_path / "cg") == 0
    a, b = read_maps(tmp_path / "dense" / "mu.ksm"), read_maps(tmp_path / "cg" / "mu.ksm")
    assert np.linalg.norm(a - b) <= 1e-8 * np.linalg.norm(a)


def test_solve_report_schema(tmp_path):
    assert run("solve", "--level", 4, "--method", "lanczos-sylvester", "--out", tmp_path) == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert tuple(rep) == JSON_FIELDS
    assert rep["rel_residual"] <= 1e-6
    assert read_maps(tmp_path / "mu.ksm").shape == (256, 4)


def test_solve_is_deterministic(tmp_path):
    for d in ("a", "b"):
        run("solve", "--level", 3, "--seed", 9, "--method", "cg", "--out", tmp_path / d)
    assert (tmp_path / "a" / "mu.ksm").read_bytes() == (tmp_path / "b" / "mu.ksm").read_bytes()


def test_non_convergence_exit_3(tmp_path):
    assert run("solve", "--level", 4, "--method", "cg", "--max-iter", 2, "--out", tmp_path) == 3
    assert json.loads((tmp_path / "report.json").read_text())["converged"] is False


def test_dense_refused_exit_4(tmp_path):
    assert run("solve", "--level", 7, "--method", "dense", "--out", tmp_path) == 4


def test_out_of_memory_exit_5(tmp_path):
    assert run("solve", "--level", 5, "--method", "sparse-dense", "--mem-budget", "1MB", "--out", tmp_path) == 5
    assert run("solve", "--level", 4, "--method", "sparse-dense", "--mem-budget", "1MB", "--out", tmp_path) == 0


def test_io_error_exit_1(tmp_path):
    (tmp_path / "bad.ksm").write_bytes(b"nope")
    assert run("solve", "--input", tmp_path / "bad.ksm", "--out", tmp_path) == 1
    assert run("solve", "--input", tmp_path / "missing.ksm", "--out", tmp_path) == 1


def test_compare_empty_range_header_only(tmp_path):
    out = tmp_path / "t.csv"
    assert run("compare", "--levels", "5-4", "--out", out) == 0
    assert out.read_text() == ",".join(CSV_HEADER) + "\n"


def test_compare_records_failures_in_rows(tmp_path):
    out = tmp_path / "t.csv"
    assert run("compare", "--levels", "4,6", "--methods", "lanczos-sylvester,sparse-dense,dense",
               "--mem-budget", "1MB", "--out", out) == 0
    rows = list(csv.DictReader(out.open()))
    assert [r["method"] for r in rows] == ["lanczos-sylvester", "sparse-dense", "dense"] * 2
    status = {(int(r["level"]), r["method"]): r["status"] for r in rows}
    assert status[(6, "sparse-dense")] == "out-of-memory"
    assert status[(6, "dense")] == "refused"
    assert status[(4, "sparse-dense")] == status[(6, "lanczos-sylvester")] == status[(4, "dense")] == "ok"
    failed = [r for r in rows if r["status"] != "ok"]
    assert all(r["rel_residual"] == "" for r in failed)


def test_compare_unknown_method(tmp_path):
    assert run("compare", "--levels", "1-2", "--methods", "cg,nope") == 2


def test_profile_json(tmp_path):
    assert run("profile", "--level", 5, "--method", "lanczos-sylvester", "--out", tmp_path) == 0
    prof = json.loads((tmp_path / "profile.json").read_text())
    assert tuple(prof) == PROFILE_FIELDS
    assert sum(prof["phases"].values()) >= 0.9 * prof["wall_time_s"]
    assert {"apply_D", "orthogonalization", "small_dense", "io"} <= set(prof["phases"])
    assert (tmp_path / "mu.ksm").exists()


def test_profile_D_dominates_at_large_level(tmp_path):
    run("profile", "--level", 9, "--method", "lanczos-sylvester", "--out", tmp_path)
    phases = json.loads((tmp_path / "profile.json").read_text())["phases"]
    assert max(phases, key=phases.get) == "apply_D"


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text('[run]\nlevel = 2\nseed = 3\n[solver]\nmethod = "cg"\ntol = 1e-12\n'
                   '[model]\nkappa_s = -3.0\nnhits = 2.0\n')
    assert run("solve", "--config", cfg, "--out", tmp_path / "a") == 0
    assert json.loads((tmp_path / "a" / "report.json").read_text())["method"] == "cg"
    assert run("solve", "--config", cfg, "--method", "lanczos-sylvester", "--out", tmp_path / "b") == 0
    assert json.loads((tmp_path / "b" / "report.json").read_text())["method"] == "lanczos-sylvester"
    a, b = read_maps(tmp_path / "a" / "mu.ksm"), read_maps(tmp_path / "b" / "mu.ksm")
    assert np.linalg.norm(a - b) <= 1e-6 * np.linalg.norm(a)


@pytest.mark.parametrize("text", ['[run]\nlevel = 99\n', '[nope]\nx = 1\n', '[solver]\nmethod = "x"\n',
                                  '[run\n'])
def test_bad_config_exit_2(tmp_path, text):
    cfg = tmp_path / "bad.toml"
    cfg.write_text(text)
    assert run("solve", "--config", cfg, "--out", tmp_path) == 2


def test_threads_flag(tmp_path):
    assert run("solve", "--level", 3, "--threads", 1, "--out", tmp_path) == 0


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "kronsep", "simulate", "--level", "-1"],
                          capture_output=True, text=True)
    assert proc.returncode == 2
    proc = subprocess.run([sys.executable, "-m", "kronsep", "compare", "--levels", "1-2"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith(",".join(CSV_HEADER))
