import csv
import json

import numpy as np
import pytest

from symgait.cli import inspect_table, main
from symgait.config import RunConfig
from symgait.gait import named_gait, stride_period
from symgait.plots import read_trace

TINY = """
[run]
seed = 1
n_envs = 8
total_steps = 1024

[ppo]
batch_size = 512
minibatch_size = 256
epochs = 1

[network]
encoder_hidden = 16, 16
value_hidden = 16
"""


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    root = tmp_path_factory.mktemp("run")
    cfg = root / "tiny.ini"
    cfg.write_text(TINY)
    out = root / "out"
    assert main(["train", "--config", str(cfg), "--output", str(out), "--gait", "trot", "--quiet"]) == 0
    return cfg, out


def test_train_outputs(trained):
    cfg, out = trained
    assert (out / "checkpoint_final.bin").exists()
    rows = list(csv.DictReader(open(out / "metrics.csv")))
    assert len(rows) == 2 and "mean_reward" in rows[0] and "tracking_error" in rows[0]
    echo = RunConfig.load(out / "config.ini")
    assert echo == RunConfig.load(out / "config.ini")
    assert RunConfig.from_text(echo.to_text()) == echo
    assert echo.run.output_dir == str(out)


def test_train_rejects_unknown_key(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[run]\nseed = 1\nwidget = 3\n")
    assert main(["train", "--config", str(bad)]) == 1
    err = capsys.readouterr().err
    assert "widget" in err and "line 3" in err


def test_eval_constant_three_periods(trained, tmp_path):
    cfg, out = trained
    trace = tmp_path / "trace.csv"
    code = main(["eval", "--checkpoint", str(out / "checkpoint_final.bin"), "--config", str(cfg),
                 "--schedule", "0.3", "--periods", "3", "--output", str(trace)])
    data = read_trace(trace)
    if code == 0:
        assert len(data["time"]) == round(3 * stride_period(0.3) / 0.01)
    else:
        assert code == 2 and data["fault"][-1] == 1
    summary = json.loads(trace.with_suffix(".summary.json").read_text())
    assert {"tracking_error", "contact_agreement", "mean_r_tem"} <= set(summary)
    contact = np.stack([data[f"contact_{leg}"] for leg in ("LH", "LF", "RF", "RH")], -1) > 0
    grf = np.stack([data[f"grf_{leg}"] for leg in ("LH", "LF", "RF", "RH")], -1)
    assert np.all(grf[contact] > 0)


def test_eval_ramp_and_backward(trained, tmp_path):
    cfg, out = trained
    ckpt = str(out / "checkpoint_final.bin")
    ramp = tmp_path / "ramp.csv"
    main(["eval", "--checkpoint", ckpt, "--schedule", "ramp:0.2:0.45", "--duration", "1", "--output", str(ramp)])
    v = read_trace(ramp)["v_cmd"]
    assert np.all(np.diff(v) >= 0) and v[0] >= 0.2 and v[-1] <= 0.45
    back = tmp_path / "back.csv"
    main(["eval", "--checkpoint", ckpt, "--schedule", "-0.3", "--duration", "0.5", "--output", str(back)])
    assert np.all(read_trace(back)["direction"] == -1)


def test_eval_is_deterministic(trained, tmp_path):
    cfg, out = trained
    ckpt = str(out / "checkpoint_final.bin")
    for name in ("a.csv", "b.csv"):
        main(["eval", "--checkpoint", ckpt, "--duration", "0.3", "--output", str(tmp_path / name)])
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_eval_topology_mismatch(trained, tmp_path, capsys):
    _, out = trained
    other = tmp_path / "other.ini"
    other.write_text("[network]\nencoder_hidden = 8\n")
    assert main(["eval", "--checkpoint", str(out / "checkpoint_final.bin"), "--config", str(other),
                 "--output", str(tmp_path / "t.csv")]) == 2
    assert "topology" in capsys.readouterr().err


def test_plot_from_trace(trained, tmp_path):
    _, out = trained
    trace = tmp_path / "t.csv"
    main(["eval", "--checkpoint", str(out / "checkpoint_final.bin"), "--duration", "0.5", "--output", str(trace)])
    svg = tmp_path / "f.svg"
    assert main(["plot-gait", "--trace", str(trace), "--output", str(svg)]) == 0
    assert svg.read_text().startswith("<svg") and (tmp_path / "f_overlay.svg").exists()


def test_plot_malformed_trace(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n")
    assert main(["plot-gait", "--trace", str(bad), "--output", str(tmp_path / "x.svg")]) == 2


def test_plot_from_spec(tmp_path, capsys):
    svg = tmp_path / "trot.svg"
    assert main(["plot-gait", "--gait", "trot", "--output", str(svg), "--coefficients"]) == 0
    assert "<rect" in svg.read_text()
    assert (tmp_path / "trot_coefficients.svg").exists()
    assert "LH=0.560" in capsys.readouterr().out


def test_inspect_examples(capsys):
    assert main(["inspect", "--gait", "trot", "--v-cmd", "0"]) == 0
    out = capsys.readouterr().out
    assert "period T: 0.26 s" in out and "duty beta: 0.56" in out and "family: Trot" in out
    assert "(LH,RF)" in out and "(LF,RH)" in out
    table = inspect_table(named_gait("gallop"), 0.3, 32.0)
    assert "active pairs: none" in table
    rows = [line.split()[1:] for line in table.splitlines()[8:]]
    for row in rows:
        vals = np.array(row, dtype=float).reshape(4, 2)
        assert np.allclose(vals.sum(axis=1), 1.0, atol=2e-6)


def test_usage_errors(capsys):
    assert main([]) == 1
    assert main(["inspect"]) == 1
    assert main(["inspect", "--gait", "canter"]) == 1
    assert main(["eval"]) == 1
    assert main(["plot-gait", "--offsets", "0.1,0.2"]) == 1
