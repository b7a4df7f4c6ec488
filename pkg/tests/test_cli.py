import numpy as np

import losswalk.cli as cli
from losswalk.cli import main
from losswalk.exceptions import AllWalksFailedError


def run_xor(tmp_path, capsys, extra=()):
    out = tmp_path / "run"
    code = main([
        "run", "--problem", "xor", "--loss", "sse", "--granularity", "macro",
        "--init-range", "1", "--walks", "4", "--seed", "2", "--hessian", "off",
        "--out", str(out), *extra,
    ])
    captured = capsys.readouterr()
    return code, out, captured.out


def test_run_summarise_plot_basins_end_to_end(tmp_path, capsys):
    code, run_dir, stdout = run_xor(tmp_path, capsys)
    assert code == 0
    assert "n_stag" in stdout and "run directory" in stdout
    assert (run_dir / "lg_cloud.csv").exists()

    assert main(["summarise", str(run_dir)]) == 0
    summary = capsys.readouterr().out
    assert summary == (run_dir / "summary.txt").read_text()

    assert main(["plot", str(run_dir)]) == 0
    assert (run_dir / "lg_cloud.svg").exists()
    capsys.readouterr()

    series_file = tmp_path / "series.txt"
    series_file.write_text("\n".join(str(v) for v in np.linspace(1, 0, 100)))
    assert main(["basins", str(series_file)]) == 0
    out = capsys.readouterr().out
    assert out.startswith("n_stag=") and "l_stag=" in out


def test_plot_flags(tmp_path, capsys, iris_csv):
    out = tmp_path / "iris"
    code = main([
        "run", "--problem", "iris", "--granularity", "macro", "--walks", "2",
        "--hessian", "off", "--data", str(iris_csv), "--out", str(out),
    ])
    assert code == 0
    capsys.readouterr()
    target = tmp_path / "cloud.svg"
    code = main([
        "plot", str(out), "--colour-by", "e_g", "--log-colour",
        "--max-loss", "10", "--out", str(target),
    ])
    assert code == 0
    assert target.exists()


def test_config_file_with_flag_override(tmp_path, capsys):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text(
        "problem=xor\nloss=ce\ngranularity=macro\nwalks=2\nseed=5\nhessian=off\n"
        f"out={tmp_path / 'from_file'}\n"
    )
    code = main(["run", "--config", str(cfg), "--out", str(tmp_path / "override")])
    assert code == 0
    assert (tmp_path / "override" / "config.txt").exists()
    assert not (tmp_path / "from_file").exists()
    assert "loss=ce" in (tmp_path / "override" / "config.txt").read_text()
    capsys.readouterr()


def test_usage_errors_exit_1(tmp_path, capsys):
    assert main(["run", "--problem", "nonexistent", "--out", str(tmp_path / "x")]) == 1
    assert "unknown problem" in capsys.readouterr().err
    assert main(["run", "--problem", "xor"]) == 1  # no --out
    capsys.readouterr()
    assert main(["frobnicate"]) == 1  # unknown subcommand via argparse
    capsys.readouterr()
    assert main(["run", "--problem", "xor", "--init-range", "3",
                 "--out", str(tmp_path / "y")]) == 1
    capsys.readouterr()


def test_data_errors_exit_2(tmp_path, capsys):
    assert main(["summarise", str(tmp_path / "missing")]) == 2
    capsys.readouterr()
    assert main([
        "run", "--problem", "iris", "--data", str(tmp_path / "absent.csv"),
        "--out", str(tmp_path / "x"),
    ]) == 2
    capsys.readouterr()
    bad_series = tmp_path / "bad.txt"
    bad_series.write_text("1.0\nbogus\n")
    assert main(["basins", str(bad_series)]) == 2
    capsys.readouterr()


def test_all_walks_failed_exits_3(tmp_path, capsys, monkeypatch):
    def explode(config):
        raise AllWalksFailedError("all 4 walks failed numerically")

    monkeypatch.setattr(cli, "run_experiment", explode)
    code = main(["run", "--problem", "xor", "--out", str(tmp_path / "x")])
    assert code == 3
    assert "numeric failure" in capsys.readouterr().err


def test_determinism_across_processes(tmp_path):
    # identical runs from separate interpreter processes match byte for byte
    import subprocess
    import sys

    def run(out):
        args = [
            sys.executable, "-m", "losswalk.cli", "run", "--problem", "xor",
            "--granularity", "macro", "--walks", "3", "--seed", "21",
            "--hessian", "off", "--out", str(out),
        ]
        subprocess.run(args, check=True, capture_output=True)

    run(tmp_path / "a")
    run(tmp_path / "b")
    for name in ("lg_cloud.csv", "summary.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_basins_custom_windows(tmp_path, capsys):
    series_file = tmp_path / "series.txt"
    series_file.write_text("\n".join(str(v) for v in np.linspace(1, 0, 50)))
    assert main(["basins", str(series_file), "--windows", "6,8"]) == 0
    capsys.readouterr()
    assert main(["basins", str(series_file), "--windows", "six"]) == 1
    capsys.readouterr()
