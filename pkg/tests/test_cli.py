import json
import os

import numpy as np
import pytest

from t2stc.cli import EXIT_CONFIG, EXIT_DIVERGED, EXIT_IO, EXIT_OK, main
from t2stc.controller import NoControl
from t2stc.export import CSV_COLUMNS, read_csv, write_csv
from t2stc.plant import NoiseSpec, duffing_preset, reference_preset
from t2stc.sim import SimConfig, Trajectory, run_closed_loop

GOLDEN = os.path.join(os.path.dirname(__file__), "data", "header.csv")


def _short_traj(n_steps=25, noise=NoiseSpec(20.0, 1)):
    cfg = SimConfig(t_end=n_steps * 1e-3, noise=noise, controller_kind="none")
    traj, _ = run_closed_loop(cfg, duffing_preset(), NoControl(), reference_preset(),
                              metrics_window=None)
    return traj


def test_header_matches_golden_file(tmp_path):
    path = tmp_path / "t.csv"
    write_csv(_short_traj(), path)
    with open(GOLDEN) as fh:
        golden = fh.read()
    assert path.read_text().splitlines()[0] + "\n" == golden
    assert ",".join(CSV_COLUMNS) + "\n" == golden


def test_empty_trajectory_is_header_only(tmp_path):
    path = tmp_path / "e.csv"
    write_csv(Trajectory.empty(), path)
    with open(GOLDEN) as fh:
        assert path.read_text() == fh.read()


def test_line_count_and_final_newline(tmp_path):
    traj = _short_traj(40)
    path = tmp_path / "n.csv"
    write_csv(traj, path)
    text = path.read_text()
    assert text.endswith("\n")
    assert len(text.splitlines()) == len(traj) + 1


def test_round_trip_is_exact(tmp_path):
    traj = _short_traj(40)
    path = tmp_path / "r.csv"
    write_csv(traj, path)
    cols = read_csv(path)
    np.testing.assert_array_equal(cols["t"], traj.t)
    np.testing.assert_array_equal(cols["x1_meas"], traj.x_meas[:, 0])
    np.testing.assert_array_equal(cols["e2"], traj.e[:, 1])
    np.testing.assert_array_equal(cols["s"], traj.s)
    np.testing.assert_array_equal(cols["norm_th2"], traj.theta_norms[:, 2])


def test_values_use_seventeen_significant_digits(tmp_path):
    path = tmp_path / "d.csv"
    write_csv(_short_traj(5), path)
    for line in path.read_text().splitlines()[1:]:
        for v in line.split(","):
            assert v == "%.17g" % float(v)


def test_long_format(tmp_path):
    traj = _short_traj(3)
    path = tmp_path / "l.csv"
    write_csv(traj, path, long_format=True)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,column,value"
    assert len(lines) == 1 + len(traj) * (len(CSV_COLUMNS) - 1)


def test_write_to_unwritable_path_raises(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError):
        write_csv(_short_traj(2), blocker / "sub" / "a.csv")


# command line

def _run(args, tmp_path):
    return main(list(args) + ["--out", str(tmp_path)])


def test_track_twice_is_byte_identical(tmp_path):
    args = ["track", "--preset", "duffing-track", "--seed", "7", "--t-end", "2"]
    assert _run(args, tmp_path / "a") == EXIT_OK
    assert _run(args, tmp_path / "b") == EXIT_OK
    a = (tmp_path / "a" / "track.csv").read_bytes()
    b = (tmp_path / "b" / "track.csv").read_bytes()
    assert a == b and len(a) > 1000


def test_seed_changes_noise(tmp_path):
    _run(["track", "--seed", "1", "--t-end", "0.5"], tmp_path / "a")
    _run(["track", "--seed", "2", "--t-end", "0.5"], tmp_path / "b")
    assert (tmp_path / "a" / "track.csv").read_bytes() != (tmp_path / "b" / "track.csv").read_bytes()


def test_free_run_is_bounded(tmp_path):
    assert _run(["free-run", "--decimate", "10"], tmp_path) == EXIT_OK
    cols = read_csv(tmp_path / "free_run.csv")
    assert cols["t"][-1] == pytest.approx(100.0)
    assert max(np.abs(cols["x1"]).max(), np.abs(cols["x2"]).max()) < 5
    rec = json.loads((tmp_path / "free_run_metrics.json").read_text())
    assert rec["kind"] == "none"


def test_config_file_and_flags(tmp_path):
    conf = tmp_path / "run.conf"
    conf.write_text("preset = duffing-track\ncontroller.kind = ideal_stc\nnoise.snr_db = null\n")
    assert main(["track", "--config", str(conf), "--t-end", "3", "--step", "0.002",
                 "--decimate", "5", "--out", str(tmp_path / "o")]) == EXIT_OK
    cols = read_csv(tmp_path / "o" / "track.csv")
    assert len(cols["t"]) == 1500 // 5 + 1
    np.testing.assert_array_equal(cols["x1"], cols["x1_meas"])
    assert "controller.kind = \"ideal_stc\"" in (tmp_path / "o" / "config.txt").read_text()


def test_snr_none_flag(tmp_path):
    assert _run(["track", "--t-end", "0.2", "--snr-db", "none"], tmp_path) == EXIT_OK
    cols = read_csv(tmp_path / "track.csv")
    np.testing.assert_array_equal(cols["x2"], cols["x2_meas"])


def test_long_format_flag(tmp_path):
    assert _run(["track", "--t-end", "0.01", "--long-format"], tmp_path) == EXIT_OK
    assert (tmp_path / "track.csv").read_text().startswith("t,column,value\n")


def test_config_error_exit_code(tmp_path, capsys):
    conf = tmp_path / "bad.conf"
    conf.write_text("preset = duffing-track\nmf.x.sigma = [0.5, 0.5, 0.5, -1, 0.5, 0.5, 0.5]\n")
    assert main(["track", "--config", str(conf), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert "mf.x" in capsys.readouterr().err
    assert _run(["track", "--snr-db", "loud"], tmp_path) == EXIT_CONFIG
    assert _run(["track", "--step", "1.0"], tmp_path) == EXIT_CONFIG


def test_missing_config_file_is_io_error(tmp_path):
    assert main(["track", "--config", str(tmp_path / "nope.conf")]) == EXIT_IO


def test_unwritable_output_is_io_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["track", "--t-end", "0.01", "--out", str(blocker / "sub")]) == EXIT_IO


def test_divergence_exit_code(tmp_path):
    conf = tmp_path / "wild.conf"
    conf.write_text("preset = duffing-free\nplant.preset = custom\n"
                    "plant.f = x2^3\nsim.x0 = [0, 5]\n")
    assert main(["free-run", "--config", str(conf), "--t-end", "5",
                 "--out", str(tmp_path / "o")]) == EXIT_DIVERGED


def test_show_config_round_trips(capsys):
    from t2stc.config import PRESETS, parse_config
    assert main(["show-config", "--preset", "duffing-track"]) == EXIT_OK
    assert parse_config(capsys.readouterr().out) == PRESETS["duffing-track"]


def test_compare_orders_chattering(tmp_path):
    assert _run(["compare", "--snr-db", "none"], tmp_path) == EXIT_OK
    rows = {r["kind"]: r for r in json.loads((tmp_path / "compare.json").read_text())}
    assert set(rows) == {"adaptive_t2_stc", "ideal_stc", "first_order_smc"}
    assert rows["first_order_smc"]["tv_u"] > rows["adaptive_t2_stc"]["tv_u"]
    assert "RMSE-matched" in rows["first_order_smc"]["note"]
    for kind in rows:
        assert (tmp_path / f"compare_{kind}.csv").exists()
