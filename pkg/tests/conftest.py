import math

import numpy as np
import pytest

from vanetsim.mobility import Trace

ACCEPTANCE_LINES: list[str] = []


def make_trace(xs, ys, duration, dt=0.1, speed=None, heading=None):
    """Trace from per-vehicle position functions of time (or constants)."""
    n_ticks = int(math.ceil((duration + dt) / dt - 1e-9)) + 1
    t = np.arange(n_ticks) * dt
    n = len(xs)

    def column(f):
        return np.full(n_ticks, float(f)) if not callable(f) else np.array([f(tk) for tk in t], float)

    x = np.column_stack([column(f) for f in xs])
    y = np.column_stack([column(f) for f in ys])
    zeros = np.zeros((n_ticks, n))
    sp = zeros.copy() if speed is None else np.tile(np.asarray(speed, float), (n_ticks, 1))
    hd = zeros.copy() if heading is None else np.tile(np.asarray(heading, float), (n_ticks, 1))
    return Trace(dt=dt, x=x, y=y, speed=sp, heading=hd, lane=np.zeros((n_ticks, n), np.int16),
                 s=zeros.copy(), maneuver=np.zeros((n_ticks, n), bool),
                 changing=np.zeros((n_ticks, n), bool))


@pytest.fixture
def static_trace():
    def build(points, duration):
        return make_trace([p[0] for p in points], [p[1] for p in points], duration)
    return build


@pytest.fixture
def report():
    """Record one acceptance line; all lines are repeated in the terminal summary."""
    def emit(criterion: str, ok: bool, detail: str):
        line = f"{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
