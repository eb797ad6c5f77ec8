import subprocess
import sys

import pytest

from rwrobust import dataio

CLI = [sys.executable, "-m", "rwrobust"]


def run(args, **kwargs):
    return subprocess.run(CLI + args, capture_output=True, text=True, **kwargs)


@pytest.fixture()
def workdir(tmp_path):
    (tmp_path / "pts.csv").write_text(
        "x1,x2,y\n0.0,1.5,1\n2.0,3.0,1\n-1.0,0.2,0\n0.5,0.5,0\n"
    )
    (tmp_path / "s.json").write_text('{"label": "y"}')
    (tmp_path / "iso1.json").write_text(
        '{"continuous": {"covariance": [[1.0, 0.0], [0.0, 1.0]], "scale": 1.0}}'
    )
    return tmp_path


def estimate_args(workdir, out, extra=()):
    return [
        "estimate",
        "--model", "builtin:linear:w=0,1:b=0",
        "--data", str(workdir / "pts.csv"),
        "--schema", str(workdir / "s.json"),
        "--perturb", str(workdir / "iso1.json"),
        "--samples", "2000",
        "--seed", "42",
        "--out", str(workdir / out),
        *extra,
    ]


def test_estimate_report_contract(workdir):
    result = run(estimate_args(workdir, "r.csv"))
    assert result.returncode == 0, result.stderr
    lines = (workdir / "r.csv").read_text().splitlines()
    assert lines[0] == "point_index,base_label,p_r,p_flip,stderr,n_samples,seed"
    assert len(lines) == 5
    rows = dataio.read_report(workdir / "r.csv")
    assert [r["point_index"] for r in rows] == [0, 1, 2, 3]
    assert all(r["seed"] == 42 and r["n_samples"] == 2000 for r in rows)
    assert all(0.0 <= r["p_r"] <= 1.0 for r in rows)


def test_estimate_byte_identical_across_runs_and_workers(workdir):
    assert run(estimate_args(workdir, "r1.csv")).returncode == 0
    assert run(estimate_args(workdir, "r2.csv")).returncode == 0
    assert run(estimate_args(workdir, "r8.csv", ["--workers", "8"])).returncode == 0
    b1 = (workdir / "r1.csv").read_bytes()
    assert b1 == (workdir / "r2.csv").read_bytes()
    assert b1 == (workdir / "r8.csv").read_bytes()


def test_compare_appends_columns_and_prints_summary(workdir):
    args = estimate_args(workdir, "c.csv")
    args[0] = "compare"
    args += ["--search-dirs", "64"]
    result = run(args)
    assert result.returncode == 0, result.stderr
    lines = (workdir / "c.csv").read_text().splitlines()
    assert lines[0] == (
        "point_index,base_label,p_r,p_flip,stderr,n_samples,seed,d_cf,r_adv,cf_converged"
    )
    assert result.stdout.startswith("pearson=")
    assert ",spearman=" in result.stdout


def test_sweep_csv(workdir):
    args = estimate_args(workdir, "sw.csv")
    args[0] = "sweep"
    args += ["--scales", "0.5,1,2", "--search-dirs", "64"]
    result = run(args)
    assert result.returncode == 0, result.stderr
    lines = (workdir / "sw.csv").read_text().splitlines()
    assert lines[0] == "scale,pearson,spearman,n_defined"
    assert len(lines) == 4


def test_check_convergence(workdir):
    args = estimate_args(workdir, "cv.csv")
    args[0] = "check-convergence"
    args += ["--repeats", "3"]
    result = run(args)
    assert result.returncode == 0, result.stderr
    assert result.stdout.startswith("min_correlation=")
    lines = (workdir / "cv.csv").read_text().splitlines()
    assert lines[0] == "run_i,run_j,pearson"
    assert len(lines) == 4  # 3 choose 2 pairs


def test_analytic_grid(workdir):
    result = run(
        [
            "analytic",
            "--case", "corner:a=1,2",
            "--sigma", "1,1",
            "--grid", "-3:3:50",
            "--out", str(workdir / "g.csv"),
        ]
    )
    assert result.returncode == 0, result.stderr
    lines = (workdir / "g.csv").read_text().splitlines()
    assert lines[0] == "x1,x2,p_r,d_cf"
    assert len(lines) == 2501


def test_usage_errors_exit_1(workdir):
    missing_out_dir = run(
        estimate_args(workdir, "x.csv")[:-1] + [str(workdir / "no" / "x.csv")]
    )
    assert missing_out_dir.returncode == 2  # runtime failure, after validation
    args = estimate_args(workdir, "x.csv")
    args[2] = "builtin:unknown:a=1"
    assert run(args).returncode == 1
    bad_flag = run(estimate_args(workdir, "x.csv") + ["--bogus"])
    assert bad_flag.returncode == 1
    missing_file = run(
        [
            "estimate",
            "--model", "builtin:linear:w=0,1",
            "--data", str(workdir / "absent.csv"),
            "--schema", str(workdir / "s.json"),
            "--perturb", str(workdir / "iso1.json"),
            "--out", str(workdir / "x.csv"),
        ]
    )
    assert missing_file.returncode == 1
    assert "file not found" in missing_file.stderr


def test_runtime_error_exit_2_no_partial_report(workdir, child):
    crash = f"external:{sys.executable} {child('crash_after_5')}"
    args = estimate_args(workdir, "never.csv")
    args[2] = crash
    result = run(args)
    assert result.returncode == 2
    assert "point" in result.stderr
    assert not (workdir / "never.csv").exists()


def test_external_model_matches_builtin_bytes(workdir, child):
    assert run(estimate_args(workdir, "rb.csv")).returncode == 0
    args = estimate_args(workdir, "re.csv")
    args[2] = f"external:{sys.executable} {child('threshold')}"
    result = run(args)
    assert result.returncode == 0, result.stderr
    assert (workdir / "re.csv").read_bytes() == (workdir / "rb.csv").read_bytes()


def test_env_seed_fallback(workdir):
    import os

    args = estimate_args(workdir, "renv.csv")
    seed_at = args.index("--seed")
    del args[seed_at : seed_at + 2]
    env = dict(os.environ, RWROBUST_SEED="42")
    result = subprocess.run(CLI + args, capture_output=True, text=True, env=env)
    assert result.returncode == 0, result.stderr
    assert run(estimate_args(workdir, "r42.csv")).returncode == 0
    assert (workdir / "renv.csv").read_bytes() == (workdir / "r42.csv").read_bytes()


def test_help_for_every_subcommand():
    for sub in ("estimate", "compare", "sweep", "analytic", "check-convergence"):
        result = run([sub, "--help"])
        assert result.returncode == 0
        assert "--out" in result.stdout
    top = run(["--help"])
    assert top.returncode == 0


def test_per_point_covariances(workdir):
    # row 3 gets a zero covariance: its prediction must be fully robust
    (workdir / "pp.csv").write_text(
        "1.0,0.0,0.0,1.0\n1.0,0.0,0.0,1.0\n1.0,0.0,0.0,1.0\n0.0,0.0,0.0,0.0\n"
    )
    (workdir / "perpoint.json").write_text(
        '{"continuous": {"scale": 1.0}, "per_point_covariances": "pp.csv"}'
    )
    args = estimate_args(workdir, "rpp.csv")
    args[args.index("--perturb") + 1] = str(workdir / "perpoint.json")
    result = run(args)
    assert result.returncode == 0, result.stderr
    rows = dataio.read_report(workdir / "rpp.csv")
    assert rows[3]["p_r"] == 1.0
    assert rows[0]["p_r"] < 1.0


def test_regression_mode(workdir, child):
    args = estimate_args(workdir, "rg.csv")
    args[2] = f"external:{sys.executable} {child('identity_regression')}"
    args += ["--regression-gamma", "0.5"]
    result = run(args)
    assert result.returncode == 0, result.stderr
    rows = dataio.read_report(workdir / "rg.csv")
    # identity regressor with gamma 0.5 under unit noise flips when
    # |delta x1| > 0.5, i.e. keeps with probability ~0.38
    assert all(0.3 < r["p_r"] < 0.5 for r in rows)
