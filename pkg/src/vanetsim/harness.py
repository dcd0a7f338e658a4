"""Density and speed sweeps: the run cross product, per-cell summaries and CSV output.

Rows are keyed by (axis point, protocol, seed) and always emitted in that
order, whatever order parallel workers finish in.  All protocols for one
(point, seed) run in the same task so they share one mobility trace.
"""
from __future__ import annotations

import csv
import math
import os
import statistics
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .config import ConfigError, ScenarioConfig
from .engine import build_trace, run

AXES = ("density", "speed")
PROTOCOLS = ("gpsr", "dgrp", "rdgr")
SPEED_AXIS_VEHICLES = 60
WORKERS_ENV = "VANETSIM_WORKERS"

ROW_COLUMNS = ["protocol", "n_vehicles", "v_max", "seed", "sent", "delivered", "pdr", "drops_ttl",
               "drops_deadline", "drops_loop", "carry_events", "forward_failures", "mean_hops",
               "mean_delay_s"]
# failed runs keep their key columns, blank counters and the message here
SWEEP_COLUMNS = ["axis", "point"] + ROW_COLUMNS + ["error"]
SUMMARY_FIELDS = ["pdr", "sent", "delivered", "drops_ttl", "drops_deadline", "drops_loop",
                  "carry_events", "forward_failures", "mean_hops", "mean_delay_s"]
SUMMARY_COLUMNS = (["axis", "point", "protocol", "runs", "failed"]
                   + [f"{f}_{stat}" for f in SUMMARY_FIELDS for stat in ("mean", "std")])


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "").strip()
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(WORKERS_ENV, f"must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(WORKERS_ENV, f"must be a positive integer, got {n}")
    return n


def point_config(base: ScenarioConfig, axis: str, point, protocol: str, seed: int,
                 speed_vehicles: int = SPEED_AXIS_VEHICLES) -> ScenarioConfig:
    """The run configuration for one cell of the cross product."""
    if axis == "density":
        if float(point) != int(point):
            raise ConfigError("n_vehicles", f"density points must be whole vehicle counts, got {point}")
        cfg = base.replace(n_vehicles=int(point), protocol=protocol, seed=int(seed))
    elif axis == "speed":
        v = float(point)
        cfg = base.replace(n_vehicles=speed_vehicles, v_min=v, v_max=v, protocol=protocol, seed=int(seed))
    else:
        raise ConfigError("axis", f"must be one of {', '.join(AXES)}, got {axis!r}")
    return cfg.validate()


def _failed_row(cfg: ScenarioConfig, message: str) -> dict:
    row = {c: "" for c in ROW_COLUMNS}
    row.update(protocol=cfg.protocol, n_vehicles=cfg.n_vehicles, v_max=cfg.v_max, seed=cfg.seed)
    row["error"] = message
    return row


def _error_message(exc: BaseException) -> str:
    last = traceback.format_exception_only(type(exc), exc)[-1].strip()
    return last.replace("\n", " ")


def run_cell(base: ScenarioConfig, axis: str, point, protocols, seed: int,
             speed_vehicles: int = SPEED_AXIS_VEHICLES) -> list[dict]:
    """Every protocol at one (point, seed); failures become rows with an ``error``."""
    configs = [point_config(base, axis, point, p, seed, speed_vehicles) for p in protocols]
    rows = []
    try:
        trace = build_trace(configs[0])
    except Exception as exc:  # noqa: BLE001 - recorded per row
        return [_failed_row(c, _error_message(exc)) for c in configs]
    for cfg in configs:
        try:
            row = run(cfg, trace=trace).row()
            row["error"] = ""
        except Exception as exc:  # noqa: BLE001
            row = _failed_row(cfg, _error_message(exc))
        rows.append(row)
    return rows


def _cell_task(args):
    return run_cell(*args)


@dataclass
class SweepResult:
    axis: str
    points: list
    protocols: list
    seeds: list
    rows: list[dict] = field(default_factory=list)
    summary: list[dict] = field(default_factory=list)

    @property
    def failures(self) -> int:
        return sum(1 for r in self.rows if r["error"])

    def cell(self, point, protocol) -> list[dict]:
        return [r for r in self.rows if r["point"] == point and r["protocol"] == protocol]

    def mean_pdr(self, point, protocol) -> float:
        for s in self.summary:
            if s["point"] == point and s["protocol"] == protocol:
                return s["pdr_mean"]
        raise KeyError((point, protocol))


def _stats(values: list[float]) -> tuple[float, float]:
    vals = [v for v in values if not math.isnan(v)]
    if not vals:
        return math.nan, math.nan
    mean = math.fsum(vals) / len(vals)
    std = statistics.stdev(vals) if len(vals) > 1 else math.nan
    return mean, std


def summarize(axis: str, points, protocols, rows: list[dict]) -> list[dict]:
    """Mean and sample standard deviation of each metric per (point, protocol)."""
    out = []
    for point in points:
        for proto in protocols:
            cell = [r for r in rows if r["point"] == point and r["protocol"] == proto]
            ok = [r for r in cell if not r["error"]]
            s = {"axis": axis, "point": point, "protocol": proto, "runs": len(ok),
                 "failed": len(cell) - len(ok)}
            for f in SUMMARY_FIELDS:
                s[f"{f}_mean"], s[f"{f}_std"] = _stats([float(r[f]) for r in ok])
            out.append(s)
    return out


def sweep(base: ScenarioConfig, axis: str, points, protocols=PROTOCOLS, seeds=range(1, 11),
          workers: int | None = None, speed_vehicles: int = SPEED_AXIS_VEHICLES) -> SweepResult:
    """Run the full (point x protocol x seed) cross product.

    ``workers`` defaults to the ``VANETSIM_WORKERS`` environment variable
    (1 when unset).  Results do not depend on the worker count.
    """
    if axis not in AXES:
        raise ConfigError("axis", f"must be one of {', '.join(AXES)}, got {axis!r}")
    points, protocols, seeds = list(points), list(protocols), [int(s) for s in seeds]
    if not points or not protocols or not seeds:
        raise ConfigError("sweep", "points, protocols and seeds must all be non-empty")
    for proto in protocols:
        if proto not in PROTOCOLS:
            raise ConfigError("protocol", f"must be one of {', '.join(PROTOCOLS)}, got {proto!r}")
    for point in points:  # fail fast on bad points before any run starts
        point_config(base, axis, point, protocols[0], seeds[0], speed_vehicles)
    workers = default_workers() if workers is None else workers
    if workers < 1:
        raise ConfigError("workers", f"must be >= 1, got {workers}")
    tasks = [(base, axis, p, protocols, s, speed_vehicles) for p in points for s in seeds]
    if workers == 1:
        results = [_cell_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_cell_task, tasks))
    by_key = {}
    for (_, _, point, _, seed, _), cell_rows in zip(tasks, results):
        for row in cell_rows:
            by_key[(point, row["protocol"], seed)] = {"axis": axis, "point": point, **row}
    rows = [by_key[(p, proto, s)] for p in points for proto in protocols for s in seeds]
    return SweepResult(axis, points, protocols, seeds, rows, summarize(axis, points, protocols, rows))


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_csv(rows: list[dict], path, columns=None) -> None:
    """Write ``rows`` to a path or open text file with a fixed header.

    Floats use ``repr`` so reruns are byte-identical.
    """
    columns = columns or (SWEEP_COLUMNS if rows and "axis" in rows[0] else ROW_COLUMNS)
    if hasattr(path, "write"):
        _write_rows(path, rows, columns)
        return
    with Path(path).open("w", newline="") as fh:
        _write_rows(fh, rows, columns)


def _write_rows(fh, rows, columns):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c, "")) for c in columns])


def emit_summary(result: SweepResult, path) -> None:
    emit_csv(result.summary, path, SUMMARY_COLUMNS)


def summary_path(path) -> Path:
    """``sweep.csv`` -> ``sweep.summary.csv``."""
    p = Path(path)
    return p.with_name(p.stem + ".summary" + (p.suffix or ".csv"))
