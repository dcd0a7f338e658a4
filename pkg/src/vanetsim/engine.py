"""Seeded discrete-event loop: mobility ticks, beacons, CBR traffic, per-hop forwarding.

Mobility is precomputed into a :class:`~vanetsim.mobility.Trace` (it does
not depend on the routing protocol), so the three protocols see identical
vehicle motion and traffic for a given seed.
"""
from __future__ import annotations

import csv
import enum
import heapq
import itertools
import math
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .config import ScenarioConfig
from .metrics import RunMetrics
from .mobility import MobilityParams, Trace, build_network, place_vehicles, record_trace
from .network import LossReason, Medium, NeighborTables, RadioModel
from ._kernels import geographic_hop, rdgr_hop
from .routing import CARRY, Carry, Drop, Forward, dgrp_select, gpsr_select, rdgr_select
from .routing.geographic import flat_state, unpack_choice

SNAPSHOT_INTERVAL = 10.0


class EventKind(enum.IntEnum):
    MOBILITY_TICK = 0
    BEACON_ROUND = 1
    PACKET_GEN = 2
    PACKET_ARRIVAL = 3
    CARRY_RETRY = 4
    METRICS_SNAPSHOT = 5


class Outcome(enum.Enum):
    DELIVERED = "delivered"
    DROPPED_TTL = "dropped_ttl"
    DROPPED_DEADLINE = "dropped_deadline"
    DROPPED_LOOP = "dropped_loop"
    IN_FLIGHT = "in_flight"


@dataclass
class Packet:
    id: int
    source: int
    dest: int
    created_at: float
    ttl_hops: int
    deadline: float  # absolute time
    payload_size: int = 512
    hop_count: int = 0
    trail: list[int] = field(default_factory=list)
    perimeter: object = None
    holder: Optional[int] = None  # None while on the air
    outcome: Optional[Outcome] = None
    drop_detail: str = ""

    def __post_init__(self):
        if not self.trail:
            self.trail = [self.source]
        if self.holder is None:
            self.holder = self.source


@dataclass(frozen=True)
class Flow:
    source: int
    dest: int
    start: float


class Event(NamedTuple):
    """Heap entry; ``seq`` keeps same-time events in insertion order."""

    time: float
    seq: int
    kind: EventKind
    data: object = None


class EventQueue:
    def __init__(self):
        self._heap: list[Event] = []
        self._seq = itertools.count()

    def push(self, time: float, kind: EventKind, data=None) -> Event:
        ev = Event(time, next(self._seq), kind, data)
        heapq.heappush(self._heap, ev)
        return ev

    def pop(self) -> Event:
        return heapq.heappop(self._heap)

    def __len__(self):
        return len(self._heap)

    def peek_time(self) -> float:
        return self._heap[0].time if self._heap else math.inf


def rng_streams(seed: int) -> dict[str, np.random.Generator]:
    names = ("mobility", "traffic", "phases", "beacon_loss", "data_loss")
    children = np.random.SeedSequence(seed).spawn(len(names))
    return {name: np.random.default_rng(child) for name, child in zip(names, children)}


_TRACE_FIELDS = ("area_width", "area_height", "n_vehicles", "v_min", "v_max", "horizontal_roads",
                 "vertical_roads", "lanes_per_direction", "lane_width", "d_sec", "follow_margin",
                 "lane_change_time", "mobility_dt", "duration", "seed")
_trace_cache: "OrderedDict[tuple, Trace]" = OrderedDict()
TRACE_CACHE_SIZE = 4


def build_trace(config: ScenarioConfig, use_cache: bool = True) -> Trace:
    """Mobility trace for ``config``; memoised on the mobility-relevant fields."""
    key = tuple(getattr(config, f) for f in _TRACE_FIELDS)
    if use_cache and key in _trace_cache:
        _trace_cache.move_to_end(key)
        return _trace_cache[key]
    rng = rng_streams(config.seed)["mobility"]
    net = build_network(config)
    vehicles = place_vehicles(net, config.n_vehicles, rng, config.v_min, config.v_max, config.d_sec)
    trace = record_trace(net, vehicles, config.duration + config.mobility_dt, config.mobility_dt, rng,
                         MobilityParams.from_config(config))
    if use_cache:
        _trace_cache[key] = trace
        while len(_trace_cache) > TRACE_CACHE_SIZE:
            _trace_cache.popitem(last=False)
    return trace


def choose_flows(config: ScenarioConfig, n_vehicles: int, rng: np.random.Generator) -> list[Flow]:
    """Disjoint (source, dest) pairs drawn without replacement, with random CBR phases."""
    k = config.effective_senders
    if 2 * k > n_vehicles:
        raise ValueError(f"{k} flows need {2 * k} distinct vehicles, only {n_vehicles} exist")
    picked = rng.choice(n_vehicles, size=2 * k, replace=False)
    phases = rng.uniform(0.0, 1.0 / config.cbr_rate, size=k)
    return [Flow(int(picked[i]), int(picked[k + i]), config.warmup + float(phases[i])) for i in range(k)]


class Simulation:
    def __init__(self, config: ScenarioConfig, trace: Optional[Trace] = None,
                 flows: Optional[list[Flow]] = None, packet_log=None, fused: bool = True):
        self.config = config.validate()
        streams = rng_streams(config.seed)
        self.trace = trace if trace is not None else build_trace(config)
        n = self.trace.n_vehicles
        self.n = n
        radio = RadioModel(config.tx_range, config.loss_p, config.per_hop_delay)
        phases = streams["phases"].uniform(0.0, config.beacon_interval, size=n)
        self.medium = Medium(self.trace, radio, config.beacon_interval, phases,
                             streams["beacon_loss"], streams["data_loss"])
        self.tables = NeighborTables(n, config.neighbor_expiry)
        self.flows = flows if flows is not None else choose_flows(config, n, streams["traffic"])
        self.queue = EventQueue()
        self.metrics = RunMetrics(protocol=config.protocol, n_vehicles=n, v_max=config.v_max,
                                  seed=config.seed)
        self.packets: list[Packet] = []
        self.buffers: dict[int, list[Packet]] = {}
        self._retry_scheduled: set[tuple[int, int]] = set()
        self.fused = fused
        self._weights = config.weights
        self._rdgr_params = (self._weights.rho, self._weights.omega, self._weights.lam, config.horizon,
                             config.tx_range, config.d_floor, config.ls_cap, config.rdgr_progress_filter)
        self._view_cache: dict = {}
        self._cache_time = None
        self.now = 0.0
        self._log = csv.writer(packet_log) if packet_log is not None else None
        if self._log is not None:
            self._log.writerow(["time", "packet", "event", "holder", "peer", "detail"])
        self._policy = {"gpsr": self._gpsr, "dgrp": self._dgrp, "rdgr": self._rdgr}[config.protocol]

    # --- policy adapters -------------------------------------------------
    # The fused paths run the same kernels as the public policy functions
    # directly on the neighbour-table row, skipping view construction.

    def _geographic(self, holder, me, dest, packet, predicted):
        if not self.fused:
            select = dgrp_select if predicted else gpsr_select
            return select(holder, me, self._view(holder), dest, packet.dest, packet.perimeter,
                          self.config.tx_range)
        tb = self.tables
        out = geographic_hop(tb.heard[holder], tb.state[holder], self.now, tb.expiry, holder, me.x, me.y,
                             dest[0], dest[1], packet.dest, self.config.tx_range, predicted,
                             *flat_state(packet.perimeter))
        return unpack_choice(out, None, (me.x, me.y), packet.dest, math.nan)

    def _gpsr(self, holder, me, dest, packet):
        return self._geographic(holder, me, dest, packet, False)

    def _dgrp(self, holder, me, dest, packet):
        return self._geographic(holder, me, dest, packet, True)

    def _rdgr(self, holder, me, dest, packet):
        if self.fused:
            tb = self.tables
            nid = rdgr_hop(tb.heard[holder], tb.state[holder], self.now, tb.expiry, me.x, me.y,
                           me.vx, me.vy, dest[0], dest[1], packet.dest, *self._rdgr_params)
            if nid < 0:
                return CARRY
            return Forward(int(nid), "direct" if nid == packet.dest else "greedy")
        c = self.config
        return rdgr_select(me, self._view(holder), dest, packet.dest, self._weights,
                           c.horizon, c.tx_range, c.d_floor, c.ls_cap, c.rdgr_progress_filter)

    # --- helpers ----------------------------------------------------------

    def _sync(self, t: float):
        """Bring neighbour tables up to ``t``; per-instant caches reset when time moves."""
        if self._cache_time != t:
            self._view_cache.clear()
            self._cache_time = t
            self.tables.deliver_until(t)

    def _view(self, i: int):
        v = self._view_cache.get(i)
        if v is None:
            v = self.tables.view(i, self.now)
            self._view_cache[i] = v
        return v

    def _entry(self, holder: int, nid: int, predicted: bool):
        """Position of ``nid`` as ``holder``'s table shows it now, or None if not listed."""
        tb = self.tables
        age = self.now - float(tb.heard[holder, nid])
        if not 0.0 <= age <= tb.expiry:
            return None
        x, y, v, h = tb.state[holder, nid].tolist()
        if predicted:
            return (x + age * v * math.cos(h), y + age * v * math.sin(h))
        return (x, y)

    def log(self, packet: Packet, event: str, holder="", peer="", detail=""):
        if self._log is not None:
            self._log.writerow([f"{self.now:.6f}", packet.id, event, holder, peer, detail])

    def _finalize(self, packet: Packet, outcome: Outcome, detail: str = ""):
        packet.outcome = outcome
        packet.drop_detail = detail
        self.metrics.record_outcome(packet, outcome, self.now)
        self.log(packet, outcome.value, packet.holder, "", detail)

    def _hold(self, packet: Packet, vehicle: int):
        packet.holder = vehicle
        self.buffers.setdefault(vehicle, []).append(packet)
        k = int(math.floor(self.now / self.config.carry_retry + 1e-9)) + 1
        if (vehicle, k) not in self._retry_scheduled:
            self._retry_scheduled.add((vehicle, k))
            self.queue.push(k * self.config.carry_retry, EventKind.CARRY_RETRY, (vehicle, k))

    # --- event handlers ---------------------------------------------------

    def _on_tick(self, k: int):
        # positions come from the precomputed trace; the tick only keeps the clock
        t1 = (k + 1) * self.trace.dt
        if t1 < self.config.duration:
            self.queue.push(t1, EventKind.MOBILITY_TICK, k + 1)

    def _on_beacons(self, k: int):
        """Every beacon sent in the k-th beacon interval, each with its own send and arrival time."""
        T = self.config.beacon_interval
        t0, t1 = k * T, (k + 1) * T
        if t1 < self.config.duration:
            self.queue.push(t1, EventKind.BEACON_ROUND, k + 1)
        senders, times = self.medium.beacon_times(t0, t1)
        batch = self.medium.broadcast_beacons(senders, times)
        self.metrics.beacons_sent += len(senders)
        self.metrics.beacon_receptions += len(batch.receiver)
        self.metrics.beacon_attempts += batch.attempted
        self.tables.schedule(batch)

    def _on_gen(self, flow_index: int):
        c = self.config
        flow = self.flows[flow_index]
        p = Packet(len(self.packets), flow.source, flow.dest, self.now, c.ttl_hops,
                   self.now + c.deadline, c.packet_size)
        self.packets.append(p)
        self.metrics.sent += 1
        self.log(p, "gen", flow.source, flow.dest)
        nxt = self.now + 1.0 / c.cbr_rate
        if nxt < c.duration:
            self.queue.push(nxt, EventKind.PACKET_GEN, flow_index)
        self.forward_step(p, flow.source)

    def _on_arrival(self, data):
        packet, vehicle = data
        packet.holder = vehicle
        if vehicle == packet.dest:
            self._finalize(packet, Outcome.DELIVERED)
            return
        self.forward_step(packet, vehicle)

    def _on_retry(self, data):
        vehicle, k = data
        self._retry_scheduled.discard(data)
        waiting = self.buffers.pop(vehicle, [])
        for packet in waiting:
            self.forward_step(packet, vehicle)

    def _on_snapshot(self, _):
        m = self.metrics
        m.snapshots.append((self.now, m.sent, m.delivered, m.sent - m.finished))
        nxt = self.now + SNAPSHOT_INTERVAL
        if nxt < self.config.duration:
            self.queue.push(nxt, EventKind.METRICS_SNAPSHOT)

    # --- forwarding -------------------------------------------------------

    def forward_step(self, packet: Packet, vehicle: int):
        """One routing decision for ``packet`` held by ``vehicle`` at the current time."""
        t = self.now
        c = self.config
        packet.holder = vehicle
        if t >= packet.deadline:
            self._finalize(packet, Outcome.DROPPED_DEADLINE)
            return
        self._sync(t)
        me = self.medium.kinematic(vehicle, t)
        dest = self.medium.position(packet.dest, t)
        decision = self._policy(vehicle, me, dest, packet)
        if isinstance(decision, Carry):
            self.metrics.carry_events += 1
            self.log(packet, "carry", vehicle)
            self._hold(packet, vehicle)
            return
        if isinstance(decision, Drop):
            self._finalize(packet, Outcome.DROPPED_LOOP, decision.reason.value)
            return
        nxt = decision.next_hop
        age = t - self.tables.heard[vehicle, nxt]
        if nxt == vehicle or not 0.0 <= age <= self.tables.expiry:
            raise RuntimeError(f"policy chose invalid next hop {nxt} at vehicle {vehicle}")
        if packet.hop_count >= packet.ttl_hops:
            self._finalize(packet, Outcome.DROPPED_TTL)
            return
        self._audit(decision, vehicle, me, dest)
        result = self.medium.transmit(vehicle, nxt, t, (me.x, me.y))
        if not result.delivered:
            self.metrics.forward_failures += 1
            self.metrics.losses[result.reason.value] += 1
            self.log(packet, "fail", vehicle, nxt, result.reason.value)
            self._hold(packet, vehicle)
            return
        if nxt in packet.trail:
            self.metrics.revisits += 1
        packet.hop_count += 1
        packet.trail.append(nxt)
        packet.perimeter = decision.perimeter
        packet.holder = None
        self.metrics.transmissions += 1
        self.log(packet, "forward", vehicle, nxt, decision.mode)
        self.queue.push(result.arrival_time, EventKind.PACKET_ARRIVAL, (packet, nxt))

    def _audit(self, decision: Forward, vehicle: int, me, dest):
        """Independent check that greedy GPSR/DGRP hops make progress."""
        proto = self.config.protocol
        if decision.mode != "greedy" or proto == "rdgr":
            return
        cx, cy = self._entry(vehicle, decision.next_hop, proto == "dgrp")
        self.metrics.greedy_forwards += 1
        if math.hypot(dest[0] - cx, dest[1] - cy) > math.hypot(dest[0] - me.x, dest[1] - me.y):
            self.metrics.greedy_violations += 1

    # --- main loop ----------------------------------------------------------

    def run(self) -> RunMetrics:
        c = self.config
        self.queue.push(0.0, EventKind.MOBILITY_TICK, 0)
        self.queue.push(0.0, EventKind.BEACON_ROUND, 0)
        self.queue.push(0.0, EventKind.METRICS_SNAPSHOT)
        for i, flow in enumerate(self.flows):
            if flow.start < c.duration:
                self.queue.push(flow.start, EventKind.PACKET_GEN, i)
        handlers = {
            EventKind.MOBILITY_TICK: self._on_tick,
            EventKind.BEACON_ROUND: self._on_beacons,
            EventKind.PACKET_GEN: self._on_gen,
            EventKind.PACKET_ARRIVAL: self._on_arrival,
            EventKind.CARRY_RETRY: self._on_retry,
            EventKind.METRICS_SNAPSHOT: self._on_snapshot,
        }
        while self.queue and self.queue.peek_time() < c.duration:
            ev = self.queue.pop()
            self.now = ev.time
            handlers[ev.kind](ev.data)
        self.now = c.duration
        for p in self.packets:
            if p.outcome is None:
                late = p.deadline <= c.duration
                self._finalize(p, Outcome.DROPPED_DEADLINE if late else Outcome.IN_FLIGHT)
        self.metrics.check_conservation()
        return self.metrics


def run(config: ScenarioConfig, trace: Optional[Trace] = None, flows: Optional[list[Flow]] = None,
        packet_log=None, fused: bool = True) -> RunMetrics:
    """Execute one seeded run and return its metrics."""
    return Simulation(config, trace=trace, flows=flows, packet_log=packet_log, fused=fused).run()
