"""Unit-disk radio, periodic beacons and per-vehicle neighbour tables.

Neighbour state is held in dense ``(n, n)`` matrices: row ``i`` is the
table of vehicle ``i`` and column ``j`` the last beacon it heard from
``j``.  Beacons are produced in batches (one per mobility tick) but each
delivery carries its own arrival time and only becomes visible once
simulation time reaches it.
"""
from __future__ import annotations

import bisect
import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ._kernels import apply_receptions, view_arrays
from .kinematics import MotionState, advance


@dataclass(frozen=True)
class RadioModel:
    range: float = 250.0
    loss_p: float = 0.0
    per_hop_delay: float = 0.002

    def __post_init__(self):
        if self.range <= 0:
            raise ValueError("radio range must be > 0")
        if not 0.0 <= self.loss_p < 1.0:
            raise ValueError("loss_p must lie in [0, 1)")


@dataclass(frozen=True)
class Beacon:
    sender: int
    motion: MotionState
    timestamp: float


@dataclass(frozen=True)
class NeighborEntry:
    neighbor: int
    predicted: MotionState
    age: float
    beacon: Beacon


class NeighborView(NamedTuple):
    """Array form of a neighbour table at one instant, sorted by id."""

    ids: np.ndarray
    x: np.ndarray  # predicted position
    y: np.ndarray
    vx: np.ndarray
    vy: np.ndarray
    raw_x: np.ndarray  # last beaconed position
    raw_y: np.ndarray
    age: np.ndarray

    @property
    def size(self) -> int:
        # not __len__: that would break the tuple protocol (_make/_replace)
        return len(self.ids)

    @classmethod
    def from_entries(cls, entries) -> "NeighborView":
        """Build a view from ``NeighborEntry`` objects (tests, static scenes)."""
        entries = sorted(entries, key=lambda e: e.neighbor)
        cols = [[] for _ in range(8)]
        for e in entries:
            p, b = e.predicted, e.beacon.motion
            vx, vy = p.velocity
            for col, value in zip(cols, (e.neighbor, p.x, p.y, vx, vy, b.x, b.y, e.age)):
                col.append(value)
        return cls(np.asarray(cols[0], dtype=int), *(np.asarray(c, dtype=float) for c in cols[1:]))

    @classmethod
    def from_states(cls, states: dict[int, MotionState], ages: dict[int, float] | None = None) -> "NeighborView":
        """View whose raw beacon is ``states[i]`` with the given ages (default 0)."""
        ages = ages or {}
        entries = []
        for nid, st in states.items():
            age = ages.get(nid, 0.0)
            entries.append(NeighborEntry(nid, advance(st, age), age, Beacon(nid, st, -age)))
        return cls.from_entries(entries)


class Kinematic(NamedTuple):
    """Cheap position/velocity snapshot accepted wherever a forwarder state is needed."""

    x: float
    y: float
    vx: float
    vy: float

    @property
    def velocity(self) -> tuple[float, float]:
        return (self.vx, self.vy)


class LossReason(enum.Enum):
    OUT_OF_RANGE = "out_of_range"
    RANDOM_LOSS = "random_loss"


class TransmitResult(NamedTuple):
    delivered: bool
    arrival_time: float
    reason: LossReason | None
    distance: float


class BeaconBatch(NamedTuple):
    """Receptions produced by one batch of beacon transmissions."""

    sender: np.ndarray
    receiver: np.ndarray
    sent_at: np.ndarray
    arrival: np.ndarray
    state: np.ndarray  # (k, 4): x, y, speed, heading at send time
    attempted: int  # in-range (sender, receiver) pairs before loss


class NeighborTables:
    def __init__(self, n: int, expiry: float):
        self.n = n
        self.expiry = expiry
        self.heard = np.full((n, n), -np.inf)
        self.state = np.zeros((n, n, 4))
        self._pending: list[list] = []  # [receptions sorted by arrival, arrivals, next index]
        self._next_due = math.inf

    def upsert(self, receivers, beacon: Beacon) -> None:
        m = beacon.motion
        receivers = np.asarray(receivers, dtype=int)
        receivers = receivers[receivers != beacon.sender]
        self.heard[receivers, beacon.sender] = beacon.timestamp
        self.state[receivers, beacon.sender] = (m.x, m.y, m.speed, m.heading)

    def schedule(self, batch: BeaconBatch) -> None:
        if len(batch.receiver):
            order = np.argsort(batch.arrival, kind="stable")
            rec = np.column_stack([batch.receiver[order], batch.sender[order], batch.sent_at[order],
                                   batch.state[order]]).astype(float)
            arrivals = batch.arrival[order].tolist()
            self._pending.append([rec, arrivals, 0])
            self._next_due = min(self._next_due, arrivals[0])

    def deliver_until(self, now: float) -> None:
        """Apply every pending reception whose arrival time is <= ``now``."""
        if now < self._next_due:
            return
        keep = []
        for item in self._pending:
            rec, arrivals, start = item
            stop = bisect.bisect_right(arrivals, now, start)
            if stop > start:
                apply_receptions(self.heard, self.state, rec, start, stop)
                item[2] = stop
            if stop < len(arrivals):
                keep.append(item)
        self._pending = keep
        self._next_due = min((a[k] for _, a, k in keep), default=math.inf)

    def size(self, i: int, now: float) -> int:
        age = now - self.heard[i]
        return int(np.count_nonzero((age >= 0.0) & (age <= self.expiry)))

    def view(self, i: int, now: float) -> NeighborView:
        self.deliver_until(now)
        ids, m = view_arrays(self.heard[i], self.state[i], now, self.expiry)
        return NeighborView(ids, m[0], m[1], m[2], m[3], m[4], m[5], m[6])

    def entries(self, i: int, now: float) -> list[NeighborEntry]:
        """Neighbour view as objects: (id, predicted state, age, raw beacon)."""
        self.deliver_until(now)
        out = []
        age = now - self.heard[i]
        for j in np.flatnonzero((age >= 0.0) & (age <= self.expiry)):
            x, y, v, h = self.state[i, j]
            raw = MotionState(x, y, v, h)
            out.append(NeighborEntry(int(j), advance(raw, float(age[j])), float(age[j]),
                                     Beacon(int(j), raw, float(self.heard[i, j]))))
        return out


class Medium:
    """True vehicle positions (from a recorded trace) plus the radio channel.

    ``beacon_rng`` and ``data_rng`` are separate streams so that the
    routing protocol under test cannot perturb beacon losses.
    """

    def __init__(self, trace, radio: RadioModel, beacon_interval: float, phases: np.ndarray,
                 beacon_rng: np.random.Generator, data_rng: np.random.Generator):
        self.trace = trace
        self.radio = radio
        self.beacon_interval = beacon_interval
        self.phases = np.asarray(phases, dtype=float)
        self.beacon_rng = beacon_rng
        self.data_rng = data_rng
        self._last_tick = trace.n_ticks - 2
        self._rows_k = -1
        self._rows_cache = None
        self._tick_t = math.nan
        self._tick_kf = (0, 0.0)
        self._uniform: list[float] = []

    # --- true positions -------------------------------------------------

    def _tick(self, t: float) -> tuple[int, float]:
        if t != self._tick_t:
            k = min(max(int(math.floor(t / self.trace.dt)), 0), self._last_tick)
            self._tick_t, self._tick_kf = t, (k, t / self.trace.dt - k)
        return self._tick_kf

    def _rows(self, k: int):
        """Trace rows around tick ``k`` as Python lists (scalar numpy indexing is slow)."""
        if k != self._rows_k:
            tr = self.trace
            h = tr.heading[k + 1]
            self._rows_cache = (tr.x[k].tolist(), tr.y[k].tolist(), tr.x[k + 1].tolist(),
                                tr.y[k + 1].tolist(), (tr.speed[k + 1] * np.cos(h)).tolist(),
                                (tr.speed[k + 1] * np.sin(h)).tolist())
            self._rows_k = k
        return self._rows_cache

    def position(self, i: int, t: float) -> tuple[float, float]:
        k, f = self._tick(t)
        x0, y0, x1, y1, _, _ = self._rows(k)
        return (x0[i] + f * (x1[i] - x0[i]), y0[i] + f * (y1[i] - y0[i]))

    def kinematic(self, i: int, t: float) -> Kinematic:
        k, f = self._tick(t)
        x0, y0, x1, y1, vx, vy = self._rows(k)
        return Kinematic(x0[i] + f * (x1[i] - x0[i]), y0[i] + f * (y1[i] - y0[i]), vx[i], vy[i])

    def motion(self, i: int, t: float) -> MotionState:
        k, _ = self._tick(t)
        x, y = self.position(i, t)
        return MotionState(float(x), float(y), float(self.trace.speed[k + 1, i]),
                           float(self.trace.heading[k + 1, i]))

    def positions_at(self, times, ids=None) -> tuple[np.ndarray, np.ndarray]:
        """Positions of vehicles ``ids`` (default all) at per-row ``times``.

        ``times`` broadcasts against ``ids``; pass a column vector to get a
        (len(times), len(ids)) grid.
        """
        tr = self.trace
        times = np.asarray(times, dtype=float)
        cols = np.arange(tr.n_vehicles) if ids is None else np.asarray(ids)
        k = np.clip(np.floor(times / tr.dt).astype(int), 0, self._last_tick)
        f = times / tr.dt - k
        x = tr.x[k, cols] + f * (tr.x[k + 1, cols] - tr.x[k, cols])
        y = tr.y[k, cols] + f * (tr.y[k + 1, cols] - tr.y[k, cols])
        return x, y

    # --- beacons --------------------------------------------------------

    def beacon_times(self, t0: float, t1: float) -> tuple[np.ndarray, np.ndarray]:
        """(senders, send times) of beacons falling in ``[t0, t1)``."""
        T = self.beacon_interval
        k = np.ceil((t0 - self.phases) / T - 1e-12)
        times = self.phases + np.maximum(k, 0.0) * T
        senders = np.flatnonzero((times >= t0) & (times < t1))
        return senders, times[senders]

    def broadcast_beacons(self, senders, times) -> BeaconBatch:
        """Unit-disk delivery of one beacon per sender at its send time."""
        senders = np.asarray(senders, dtype=int)
        times = np.asarray(times, dtype=float)
        if len(senders) == 0:
            empty = np.zeros(0, dtype=int)
            return BeaconBatch(empty, empty, np.zeros(0), np.zeros(0), np.zeros((0, 4)), 0)
        rx, ry = self.positions_at(times[:, None])  # (s, n)
        rows = np.arange(len(senders))
        sx, sy = rx[rows, senders], ry[rows, senders]
        d2 = (rx - sx[:, None]) ** 2 + (ry - sy[:, None]) ** 2
        reach = d2 <= self.radio.range ** 2
        reach[rows, senders] = False
        si, ri = np.nonzero(reach)
        attempted = len(si)
        if self.radio.loss_p > 0.0 and attempted:
            ok = self.beacon_rng.random(attempted) >= self.radio.loss_p
            si, ri = si[ok], ri[ok]
        k = np.clip(np.floor(times / self.trace.dt).astype(int), 0, self._last_tick) + 1
        st = np.column_stack([sx, sy, self.trace.speed[k, senders], self.trace.heading[k, senders]])
        return BeaconBatch(senders[si], ri, times[si], times[si] + self.radio.per_hop_delay,
                           st[si], attempted)

    # --- data ------------------------------------------------------------

    def _draw(self) -> float:
        if not self._uniform:
            self._uniform = self.data_rng.random(4096).tolist()[::-1]
        return self._uniform.pop()

    def transmit(self, sender: int, receiver: int, t: float, sender_pos=None) -> TransmitResult:
        """Unit-disk check at ``t`` on true positions, then the random-loss draw."""
        sx, sy = self.position(sender, t) if sender_pos is None else sender_pos
        rx, ry = self.position(receiver, t)
        d = math.hypot(sx - rx, sy - ry)
        if d > self.radio.range:
            return TransmitResult(False, t, LossReason.OUT_OF_RANGE, d)
        if self.radio.loss_p > 0.0 and self._draw() < self.radio.loss_p:
            return TransmitResult(False, t, LossReason.RANDOM_LOSS, d)
        return TransmitResult(True, t + self.radio.per_hop_delay, None, d)
