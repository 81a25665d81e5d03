import json
import subprocess
import sys

import pytest

from robustirs.cli import build_parser, main


def write(tmp_path, obj, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return str(path)


def test_subcommands_accept_common_flags():
    parser = build_parser()
    for cmd in ("train", "sweep", "benchmark", "verify"):
        args = parser.parse_args([cmd, "--config", "c.json", "--out", "o", "--seed-offset", "3"])
        assert (args.command, args.config, args.out, args.seed_offset) == (cmd, "c.json", "o", 3)


def test_missing_subcommand_exits():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])


def test_train_command(tmp_path, capsys):
    cfg = write(tmp_path, {
        "agent": {"hidden": [8, 8], "batch_size": 4, "buffer_capacity": 50},
        "episode": {"T": 2},
        "training": {"steps": 6, "modes": ["model-free"]},
        "seeds": [0],
    })
    assert main(["train", "--config", cfg, "--out", str(tmp_path / "o"), "--seed-offset", "2"]) == 0
    assert (tmp_path / "o" / "train" / "run_model-free_seed2.csv").exists()
    assert "wrote" in capsys.readouterr().out


def test_sweep_command(tmp_path, capsys):
    cfg = write(tmp_path, {"sweep": {"parameter": "N", "values": [4, 8], "draws": 2}})
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "N=4.0" in out and "N=8.0" in out


def test_benchmark_command(tmp_path):
    cfg = write(tmp_path, {"benchmark": {"sizes": [8, 12], "trials": 1, "warmup": 0}})
    assert main(["benchmark", "--config", cfg, "--out", str(tmp_path)]) == 0
    assert (tmp_path / "benchmark" / "benchmark.csv").exists()


def test_config_error_exit_status(tmp_path, capsys):
    cfg = write(tmp_path, {"sweep": {"parameter": "M"}})
    assert main(["sweep", "--config", cfg]) == 2
    assert "config error" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert main(["sweep", "--config", str(tmp_path / "absent.json")]) == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "robustirs.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "benchmark" in proc.stdout
