import re

import numpy as np
import pytest

from bridgespan.cli import main
from bridgespan.config import ConfigError, parse_config
from bridgespan.environment import GREEN, read_ppm
from bridgespan.neural import NetworkSpec, init_network, save_checkpoint

TINY = """
# a few short episodes
max_steps = 30
episodes = 3
warmup = 32
epsilon_decay_steps = 60
target_sync_interval = 10
seed = 4
"""


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_parse_config_values():
    config = parse_config(
        """
        materials = steel, concrete   # reordered
        steel.b = 150
        gamma = 0.9
        cell_pixels = 16
        episodes = 12
        name = run1
        """
    )
    assert [p.name for p in config.env.materials] == ["steel", "concrete"]
    assert config.env.materials[0].b == 150.0
    assert config.train.gamma == 0.9
    assert config.train.episodes == 12
    assert config.env.cell_pixels == 16
    assert config.name == "run1"


def test_parse_config_defaults():
    config = parse_config("")
    assert config.env.cell_pixels == 6
    assert len(config.env.materials) == 3
    assert config.train.seed == 0


@pytest.mark.parametrize(
    "text",
    [
        "bogus = 1",
        "steel.z = 1",
        "granite.a = 1",
        "episodes = 1.5",
        "gamma = high",
        "gamma = 2",
        "materials = wood",
        "materials = steel, steel",
        "steel.m = 0.5",
        "max_span = 805",
        "seed = 1\nseed = 2",
        "just words",
        "oracle_tol = 0",
    ],
)
def test_parse_config_rejects(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_analyze_defaults(capsys, tmp_path):
    assert main(["analyze", "--out", str(tmp_path / "an")]) == 0
    out = capsys.readouterr().out
    assert "winner: concrete, 39.6 m, 11501 yuan/m2" in out
    assert "grid winner: concrete, 40 m, state 3" in out
    spans = {m: (float(a), float(b)) for m, a, b in re.findall(r"^(\w+)\s+([\d.]+)\s+([\d.]+)", out, re.M)}
    for closed, numeric in spans.values():
        assert abs(closed - numeric) < 1e-3
    csv_lines = (tmp_path / "an" / "analysis.csv").read_text().splitlines()
    assert csv_lines[0] == "material,span_closed_form,span_numeric,unit_cost,balance_ratio"
    assert len(csv_lines) == 4
    assert (tmp_path / "an" / "cost_curves.png").read_bytes()[:4] == b"\x89PNG"


def test_analyze_steel_only(capsys, tmp_path):
    cfg = write(tmp_path, "steel.cfg", "materials = steel\n")
    assert main(["analyze", "--config", str(cfg)]) == 0
    out = capsys.readouterr().out
    assert "winner: steel, 27.3 m, 13478 yuan/m2" in out
    assert "grid winner: steel, 30 m, state 2" in out


def _printed_value(out):
    return float(re.search(r"V\(3\) = (-?[\d.]+)", out).group(1))


def test_oracle_command(capsys, tmp_path):
    cfg = write(tmp_path, "scale.cfg", "gamma = 0.95\nreward_scale = 1e-4\n")
    assert main(["oracle", "--config", str(cfg)]) == 0
    out = capsys.readouterr().out
    assert "optimal state: 3" in out
    assert abs(_printed_value(out) - -23.0035) < 1e-3
    assert "coverage: 240/240" in out
    # training defaults: gamma 0.8, reward scale 1e-3
    assert main(["oracle"]) == 0
    out = capsys.readouterr().out
    assert abs(_printed_value(out) - -57.5087) < 1e-3
    assert "coverage: 240/240" in out


def test_oracle_myopic_reports_without_asserting(capsys, tmp_path):
    cfg = write(tmp_path, "g0.cfg", "gamma = 0\n")
    assert main(["oracle", "--config", str(cfg)]) == 0
    assert "coverage:" in capsys.readouterr().out


def test_usage_and_config_errors(capsys, tmp_path):
    assert main(["frobnicate"]) == 1
    assert main(["analyze", "--config", str(tmp_path / "missing.cfg")]) == 1
    bad = write(tmp_path, "bad.cfg", "unknown_key = 3\n")
    out_dir = tmp_path / "never"
    assert main(["train", "--config", str(bad), "--name", "x"]) == 1
    small = write(tmp_path, "small.cfg", f"cell_pixels = 4\noutput_dir = {out_dir}\n")
    assert main(["train", "--config", str(small), "--name", "x"]) == 1
    assert not out_dir.exists()
    assert main(["eval", "--checkpoint", str(tmp_path / "c"), "--start", "240"]) == 1
    capsys.readouterr()


def test_eval_rejects_corrupt_checkpoint(tmp_path, capsys):
    bad = tmp_path / "bad.bsqn"
    bad.write_bytes(b"BSQN\x01\x00")
    assert main(["eval", "--checkpoint", str(bad), "--out", str(tmp_path / "e")]) == 2
    spec16 = NetworkSpec.q_network(cell_pixels=16)
    other = tmp_path / "other.bsqn"
    save_checkpoint(init_network(spec16, seed=0), other)
    assert main(["eval", "--checkpoint", str(other), "--out", str(tmp_path / "e")]) == 2
    assert "error" in capsys.readouterr().err


def test_train_then_eval(tmp_path, capsys):
    cfg = write(tmp_path, "tiny.cfg", TINY + f"output_dir = {tmp_path / 'runs'}\n")
    assert main(["train", "--config", str(cfg), "--name", "a"]) == 0
    assert main(["train", "--config", str(cfg), "--name", "b"]) == 0
    run_a, run_b = tmp_path / "runs" / "a", tmp_path / "runs" / "b"
    for name in ("checkpoint.bsqn", "metrics.csv", "loss_curve.png"):
        assert (run_a / name).is_file()
    assert (run_a / "metrics.csv").read_bytes() == (run_b / "metrics.csv").read_bytes()
    assert (run_a / "checkpoint.bsqn").read_bytes() == (run_b / "checkpoint.bsqn").read_bytes()
    assert "greedy endpoint = optimal state 3 from" in capsys.readouterr().out

    ckpt = str(run_a / "checkpoint.bsqn")
    assert main(["eval", "--config", str(cfg), "--checkpoint", ckpt, "--start", "3", "--out", str(tmp_path / "e3")]) == 0
    image = read_ppm(tmp_path / "e3" / "trajectories" / "start_003.ppm")
    assert image.shape == (18, 480, 3)

    assert main(["eval", "--config", str(cfg), "--checkpoint", ckpt, "--out", str(tmp_path / "all")]) == 0
    out = capsys.readouterr().out
    assert re.search(r"endpoint = optimal state 3 from \d+/240 starts", out)
    assert len(list((tmp_path / "all" / "trajectories").glob("start_*.ppm"))) == 240
    rows = (tmp_path / "all" / "endpoints.csv").read_text().splitlines()
    assert rows[0] == "start,endpoint,moves,reached_optimum" and len(rows) == 241
    assert (tmp_path / "all" / "policy_test.png").is_file()


def test_eval_single_cell_trace_at_optimum(tmp_path, capsys):
    # a network whose head always prefers NOOP holds every start in place
    spec = NetworkSpec.q_network(cell_pixels=6)
    params = init_network(spec, seed=0).zeros_like()
    params.biases[-1][...] = np.array([1.0, 0, 0, 0, 0], dtype=np.float32)
    ckpt = tmp_path / "noop.bsqn"
    save_checkpoint(params, ckpt)
    assert main(["eval", "--checkpoint", str(ckpt), "--start", "3", "--out", str(tmp_path / "e")]) == 0
    image = read_ppm(tmp_path / "e" / "trajectories" / "start_003.ppm")
    background = np.all(image == 0, axis=-1) | np.all(image == 128, axis=-1)
    coloured = ~background
    rows, cols = np.nonzero(coloured)
    assert (rows.min(), rows.max(), cols.min(), cols.max()) == (0, 5, 18, 23)
    assert tuple(image[0, 18]) == GREEN
    assert "endpoint = optimal state 3 from 1/1 starts" in capsys.readouterr().out
