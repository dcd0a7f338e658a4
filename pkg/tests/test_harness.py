import csv
import io
import math

import pytest

from vanetsim.config import ConfigError, ScenarioConfig, dump_config, load_config, parse_config, save_config
from vanetsim.harness import (
    ROW_COLUMNS, SWEEP_COLUMNS, emit_csv, emit_summary, point_config, run_cell, summary_path, sweep,
)
from vanetsim.metrics import ConsistencyError, RunMetrics, compute_pdr

SMALL = load_config(None, duration=15.0, warmup=2.0, loss_p=0.05)


def test_compute_pdr():
    assert compute_pdr(0, 100) == 0.0
    assert compute_pdr(100, 100) == 100.0
    assert compute_pdr(473, 800) == 100 * 473 / 800 == 59.125
    assert math.isnan(compute_pdr(0, 0))
    with pytest.raises(ConsistencyError):
        compute_pdr(5, 4)
    m = RunMetrics(sent=3, delivered=1)
    with pytest.raises(ConsistencyError):
        m.check_conservation()


def test_empty_config_is_defaults(tmp_path):
    empty = tmp_path / "empty.ini"
    empty.write_text("")
    cfg = load_config(empty)
    assert cfg == ScenarioConfig()
    assert (cfg.area_width, cfg.area_height, cfg.tx_range, cfg.beacon_interval) == (1000, 1000, 250, 0.5)
    assert (cfg.cbr_rate, cfg.packet_size, cfg.n_senders, cfg.v_min, cfg.v_max) == (2, 512, 40, 0, 25)


def test_config_round_trip(tmp_path):
    cfg = load_config(None, n_vehicles=37, loss_p=0.05, protocol="gpsr", rdgr_progress_filter=False, horizon=0.25)
    path = tmp_path / "c.ini"
    save_config(cfg, path)
    assert load_config(path) == cfg
    assert parse_config(dump_config(cfg)) == cfg


@pytest.mark.parametrize("text, field", [
    ("rho = 0.3\nomega = 0.7", "rho"),
    ("rho = 0.5\nomega = 0.3", "rho"),
    ("lam = -1", "lam"),
    ("bogus = 1", "bogus"),
    ("n_vehicles = many", "n_vehicles"),
    ("loss_p = 1.0", "loss_p"),
    ("protocol = aodv", "protocol"),
    ("v_min = 30", "v_min"),
    ("[other]\nx = 1", "other"),
])
def test_config_rejections_name_the_field(text, field):
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert exc.value.field == field and str(exc.value).startswith(field)


def test_config_accepts_header_and_comments():
    cfg = parse_config("[scenario]\nn_vehicles = 60  # density\nrdgr_progress_filter = off\n")
    assert cfg.n_vehicles == 60 and cfg.rdgr_progress_filter is False


def test_point_config_propagation():
    cfg = point_config(SMALL, "speed", 15.0, "dgrp", 4)
    assert (cfg.n_vehicles, cfg.v_min, cfg.v_max, cfg.protocol, cfg.seed) == (60, 15.0, 15.0, "dgrp", 4)
    cfg = point_config(SMALL, "density", 40, "gpsr", 2)
    assert cfg.n_vehicles == 40 and cfg.v_max == SMALL.v_max
    with pytest.raises(ConfigError):
        point_config(SMALL, "density", 40.5, "gpsr", 2)
    with pytest.raises(ConfigError):
        point_config(SMALL, "altitude", 1, "gpsr", 2)


def test_sweep_rows_summary_and_order():
    result = sweep(SMALL, "speed", [5.0, 20.0], ["gpsr", "rdgr"], [1, 2], workers=1, speed_vehicles=20)
    assert len(result.rows) == 2 * 2 * 2 and result.failures == 0
    keys = [(r["point"], r["protocol"], r["seed"]) for r in result.rows]
    assert keys == [(p, pr, s) for p in (5.0, 20.0) for pr in ("gpsr", "rdgr") for s in (1, 2)]
    assert all(r["v_max"] == r["point"] for r in result.rows)
    for s in result.summary:
        cell = result.cell(s["point"], s["protocol"])
        assert abs(s["pdr_mean"] - sum(r["pdr"] for r in cell) / len(cell)) <= 1e-12
        assert s["runs"] == 2 and s["failed"] == 0
    assert result.mean_pdr(5.0, "rdgr") == result.summary[1]["pdr_mean"]


def test_csv_is_byte_identical_on_rerun(tmp_path):
    out = []
    for i in range(2):
        result = sweep(SMALL, "density", [20], ["dgrp"], [3], workers=1)
        path = tmp_path / f"s{i}.csv"
        emit_csv(result.rows, path)
        emit_summary(result, summary_path(path))
        out.append((path.read_bytes(), summary_path(path).read_bytes()))
    assert out[0] == out[1]
    header = out[0][0].decode().splitlines()[0]
    assert header.split(",") == SWEEP_COLUMNS
    assert summary_path("x/sweep.csv").name == "sweep.summary.csv"


def test_single_run_row_columns():
    buf = io.StringIO()
    rows = run_cell(SMALL, "density", 20, ["rdgr"], 1)
    emit_csv([{k: v for k, v in rows[0].items() if k != "error"}], buf)
    parsed = list(csv.DictReader(io.StringIO(buf.getvalue())))
    assert list(parsed[0]) == ROW_COLUMNS


def test_failed_run_is_recorded_not_raised():
    # four 1000 m lanes hold at most 400 vehicles at 10 m spacing: placement fails for every protocol
    base = SMALL.replace(horizontal_roads=1, vertical_roads=1, lanes_per_direction=1)
    result = sweep(base, "density", [500, 20], ["gpsr"], [1], workers=1)
    bad, good = result.rows
    assert bad["error"] and "capacity" in bad["error"] and bad["pdr"] == ""
    assert good["error"] == "" and result.failures == 1
    assert result.summary[0]["failed"] == 1 and math.isnan(result.summary[0]["pdr_mean"])


def test_sweep_rejects_bad_input():
    with pytest.raises(ConfigError):
        sweep(SMALL, "density", [], ["gpsr"], [1])
    with pytest.raises(ConfigError):
        sweep(SMALL, "density", [20], ["olsr"], [1])
    with pytest.raises(ConfigError):
        sweep(SMALL, "density", [20], ["gpsr"], [1], workers=0)


def test_workers_env(monkeypatch):
    from vanetsim.harness import default_workers
    monkeypatch.setenv("VANETSIM_WORKERS", "3")
    assert default_workers() == 3
    monkeypatch.setenv("VANETSIM_WORKERS", "zero")
    with pytest.raises(ConfigError):
        default_workers()
    monkeypatch.delenv("VANETSIM_WORKERS")
    assert default_workers() == 1
