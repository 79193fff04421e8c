import math
import os

import numpy as np
import pytest

from vpl import io
from vpl.cli import (
    EXIT_CHECK_FAILED,
    EXIT_DOMAIN,
    EXIT_IO,
    EXIT_NO_CONVERGENCE,
    EXIT_OK,
    EXIT_USAGE,
    greens_residuals,
    main,
    parse_config,
)
from vpl.grid import load_field

SMALL = ["--grid", "32x64", "--lambda", "30"]


def _read(path):
    with open(path, "rb") as fh:
        return fh.read()


def test_defaults():
    cfg = parse_config(["solve"])
    assert cfg.omega == 1 / math.pi and cfg.lam == 1e3 and cfg.grid == (256, 512)
    assert cfg.tol == 1e-10 and not cfg.emit_svg
    assert parse_config(["sweep"]).grid is None
    assert parse_config(["stability"]).n_periods == 3.0
    assert parse_config(["evolve"]).n_periods == 1.0


def test_flag_parsing():
    cfg = parse_config(["solve", "--omega", "0.2", "--lambda", "50", "--grid", "64x128", "--max-iter", "7", "--svg"])
    assert (cfg.omega, cfg.lam, cfg.grid, cfg.max_iter, cfg.emit_svg) == (0.2, 50.0, (64, 128), 7, True)


def test_empty_class_rejected(capsys):
    assert main(["solve", "--lambda", "0.1"]) == EXIT_USAGE
    err = capsys.readouterr().err
    assert "class K_λ(D) empty" in err and "lambda" in err


@pytest.mark.parametrize(
    "argv, key",
    [
        (["solve", "--grid", "64by128"], "grid"),
        (["solve", "--grid", "64x127"], "grid"),
        (["solve", "--tol", "fast"], "tol"),
        (["solve", "--omega", "-1"], "omega"),
        (["stability", "--kind", "spin"], "kind"),
        (["evolve", "--cfl", "0.9"], "cfl"),
    ],
)
def test_malformed_value_names_key(capsys, argv, key):
    assert main(argv) == EXIT_USAGE
    assert f"{key}:" in capsys.readouterr().err


def test_unknown_flag_and_key(tmp_path, capsys):
    assert main(["solve", "--bogus", "1"]) == EXIT_USAGE
    cfg = tmp_path / "run.cfg"
    cfg.write_text("omega = 0.3\nwobble = 2\n")
    assert main(["solve", "--config", str(cfg)]) == EXIT_USAGE
    assert "wobble" in capsys.readouterr().err
    cfg.write_text("omega 0.3\n")
    assert main(["solve", "--config", str(cfg)]) == EXIT_USAGE
    assert main(["solve", "--config", str(tmp_path / "missing.cfg")]) == EXIT_IO


def test_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nomega = 0.3   # inline\nlambda = 200\nmax_iter = 9\n")
    c = parse_config(["solve", "--config", str(cfg), "--lambda", "400"])
    assert (c.omega, c.lam, c.max_iter) == (0.3, 400.0, 9)
    assert c.tol == 1e-10


def test_config_file_value_error_names_key(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("seed = one\n")
    assert main(["solve", "--config", str(cfg)]) == EXIT_USAGE
    assert "seed:" in capsys.readouterr().err


def test_greens_check(tmp_path, capsys):
    assert main(["greens-check", "--out", str(tmp_path)]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.count("PASS") == 4
    assert all(res < 1e-10 for _, _, res in greens_residuals())
    lines = (tmp_path / "greens_check.csv").read_text().splitlines()
    assert lines[0].startswith("# config: command=greens-check")
    assert lines[1] == "identity,samples,max_residual,tolerance,passed"


def test_solve_outputs_and_rerun_identical(tmp_path):
    a = tmp_path / "run"
    assert main(["solve", *SMALL, "--out", str(a), "--svg"]) == EXIT_OK
    names = sorted(os.listdir(a))
    first = {n: _read(a / n) for n in names}
    assert main(["solve", *SMALL, "--out", str(a), "--svg"]) == EXIT_OK
    assert names == [
        "solve_boundary.svg",
        "solve_convergence.csv",
        "solve_field.txt",
        "solve_profile.svg",
        "solve_summary.csv",
    ]
    for n in names:
        assert _read(a / n) == first[n], n
    conv = (a / "solve_convergence.csv").read_text().splitlines()
    assert conv[0].startswith("# config: ")
    assert conv[1] == "iteration,energy,mu,patch_mass,symmetric_difference"
    assert 0.0 < float(conv[-1].split(",")[3]) <= 1.0 + 1e-12
    summary = (a / "solve_summary.csv").read_text().splitlines()
    assert summary[1].startswith("lambda,epsilon,energy,mu,core_energy,center_radius")
    field = load_field(a / "solve_field.txt")
    assert field.grid.shape == (32, 64)
    assert (a / "solve_field.txt").read_text().startswith("polar-field v1 32 64")
    svg = (a / "solve_boundary.svg").read_text()
    assert svg.startswith("<!-- config: command=solve") and "\n<svg" in svg and 'd="M' in svg


def test_numbers_round_trip(tmp_path):
    assert main(["solve", *SMALL, "--out", str(tmp_path)]) == EXIT_OK
    for line in (tmp_path / "solve_convergence.csv").read_text().splitlines()[2:]:
        for tok in line.split(","):
            assert repr(float(tok)) == tok or str(int(tok)) == tok


def test_sweep_rerun_identical(tmp_path):
    argv = ["sweep", "--sweep-lambdas", "100,200,300", "--grid", "48x96"]
    assert main([*argv, "--out", str(tmp_path)]) == EXIT_OK
    a = _read(tmp_path / "sweep.csv")
    assert main([*argv, "--out", str(tmp_path)]) == EXIT_OK
    assert a == _read(tmp_path / "sweep.csv")
    lines = a.decode().splitlines()
    assert lines[1] == "lambda,epsilon,energy,mu,core_energy,center_radius,diameter,diam_over_eps,v_sup_error,zeta_error"
    assert len(lines) == 5


def test_evolve_and_stability(tmp_path):
    common = [*SMALL, "--periods", "0.05", "--out", str(tmp_path)]
    assert main(["evolve", *common, "--snapshot-every", "1"]) == EXIT_OK
    assert main(["stability", *common, "--seed", "2", "--p", "1.5"]) == EXIT_OK
    for name in ("evolve_ledger.csv", "stability_ledger.csv"):
        lines = (tmp_path / name).read_text().splitlines()
        assert lines[1] == "time,mass,J,E,lp15,lp2,lp4,dist_p"
        assert len(lines) == 2 + 2
    assert (tmp_path / "evolve_final.txt").exists()
    assert (tmp_path / "evolve_snapshot_00000.txt").exists()
    first = (tmp_path / "evolve_ledger.csv").read_text().splitlines()[2].split(",")
    assert float(first[-1]) == 0.0


def test_no_convergence_exit(tmp_path):
    assert main(["solve", "--grid", "64x128", "--lambda", "10", "--max-iter", "1", "--out", str(tmp_path)]) == EXIT_NO_CONVERGENCE


def test_domain_exit(tmp_path):
    # omega = 0 has no rotation period
    assert main(["evolve", *SMALL, "--omega", "0", "--out", str(tmp_path)]) == EXIT_DOMAIN


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["greens-check", "--out", str(blocker / "sub")]) == EXIT_IO


def test_bad_thread_count(tmp_path, monkeypatch):
    monkeypatch.setenv("VPL_THREADS", "-2")
    assert main(["greens-check", "--out", str(tmp_path)]) == EXIT_USAGE


def test_exit_codes_distinct():
    codes = [EXIT_OK, EXIT_USAGE, EXIT_DOMAIN, EXIT_NO_CONVERGENCE, EXIT_IO, 6, EXIT_CHECK_FAILED]
    assert len(set(codes)) == len(codes)


def test_format_number():
    assert io.format_number(0.1) == "0.1"
    assert io.format_number(np.float64(1 / 3)) == repr(1 / 3)
    assert io.format_number(7) == "7"
    assert io.format_number(True) == "1"
    assert io.format_number("robin") == "robin"


def test_describe_round_trips_grid():
    assert "grid=auto" in io.build_config("sweep").describe()
    assert "grid=256x512" in io.build_config("solve").describe()
