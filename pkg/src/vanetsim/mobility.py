"""Lane-based mobility on a grid of bidirectional multi-lane roads.

Vehicles follow their lane, keep a security distance to the vehicle in
front, overtake through an adjacent same-direction lane, pick turns at
crossings by Manhattan distance to a private waypoint, and U-turn at the
edge of the area so the vehicle count never changes.

Longitudinal position along a lane is the coordinate ``s`` on the road's
axis (x for horizontal roads, y for vertical roads); ``direction`` is +1
when travelling towards increasing ``s``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple, Optional

import numpy as np

from .kinematics import MotionState

HORIZONTAL, VERTICAL = 0, 1


class LaneKey(NamedTuple):
    axis: int  # HORIZONTAL or VERTICAL
    road: int
    direction: int  # +1 or -1
    index: int  # 0 is the lane next to the centreline


@dataclass(frozen=True)
class RoadNetwork:
    width: float
    height: float
    horizontal_axes: tuple[float, ...]  # y of each horizontal road
    vertical_axes: tuple[float, ...]  # x of each vertical road
    lanes_per_direction: int
    lane_width: float

    def __post_init__(self):
        if not self.horizontal_axes or not self.vertical_axes:
            raise ValueError("road network needs at least one horizontal and one vertical road")
        if self.lanes_per_direction < 1:
            raise ValueError("lanes_per_direction must be >= 1")
        for y in self.horizontal_axes:
            if not 0.0 <= y <= self.height:
                raise ValueError(f"horizontal road at y={y} lies outside the area")
        for x in self.vertical_axes:
            if not 0.0 <= x <= self.width:
                raise ValueError(f"vertical road at x={x} lies outside the area")

    @property
    def intersections(self) -> list[tuple[float, float]]:
        return [(x, y) for y in self.horizontal_axes for x in self.vertical_axes]

    @cached_property
    def lanes(self) -> list[LaneKey]:
        keys = []
        for axis, axes in ((HORIZONTAL, self.horizontal_axes), (VERTICAL, self.vertical_axes)):
            for road in range(len(axes)):
                for direction in (1, -1):
                    for index in range(self.lanes_per_direction):
                        keys.append(LaneKey(axis, road, direction, index))
        return keys

    def lane_length(self, lane: LaneKey) -> float:
        return self.width if lane.axis == HORIZONTAL else self.height

    @property
    def total_lane_length(self) -> float:
        return sum(self.lane_length(k) for k in self.lanes)

    def axis_coordinate(self, axis: int, road: int) -> float:
        return self.horizontal_axes[road] if axis == HORIZONTAL else self.vertical_axes[road]

    def crossings(self, axis: int) -> tuple[float, ...]:
        """Coordinates along a road of ``axis`` at which other roads cross it."""
        return self.vertical_axes if axis == HORIZONTAL else self.horizontal_axes

    def lane_point(self, lane: LaneKey, s: float, lateral: Optional[float] = None) -> tuple[float, float]:
        """World position at ``s`` on ``lane``; ``lateral`` overrides the lane index."""
        offset = ((lane.index if lateral is None else lateral) + 0.5) * self.lane_width
        c = self.axis_coordinate(lane.axis, lane.road)
        if lane.axis == HORIZONTAL:
            # right-hand traffic: eastbound lanes lie south of the centreline
            return s, c - lane.direction * offset
        return c + lane.direction * offset, s

    def lane_heading(self, lane: LaneKey) -> float:
        if lane.axis == HORIZONTAL:
            return 0.0 if lane.direction > 0 else math.pi
        return 0.5 * math.pi if lane.direction > 0 else 1.5 * math.pi


def build_network(config) -> RoadNetwork:
    """Evenly spaced roads covering the area; deterministic in ``config``."""
    if config.horizontal_roads < 1 or config.vertical_roads < 1:
        raise ValueError("need at least one horizontal and one vertical road")
    if config.lanes_per_direction < 1:
        raise ValueError("need at least one lane per direction")

    def axes(n, extent):
        return tuple((k + 0.5) * extent / n for k in range(n))

    return RoadNetwork(
        width=config.area_width,
        height=config.area_height,
        horizontal_axes=axes(config.horizontal_roads, config.area_height),
        vertical_axes=axes(config.vertical_roads, config.area_width),
        lanes_per_direction=config.lanes_per_direction,
        lane_width=config.lane_width,
    )


@dataclass
class Overtake:
    phase: str  # "change", "pass" or "return"
    from_index: int
    to_index: int
    passed: int  # id of the vehicle being overtaken
    elapsed: float = 0.0


@dataclass
class Vehicle:
    id: int
    lane: LaneKey
    s: float
    speed: float
    desired_speed: float
    waypoint: int  # index into RoadNetwork.intersections
    overtaking: Optional[Overtake] = None

    def lateral(self, params: "MobilityParams") -> float:
        """Effective (fractional) lane index, interpolated while changing lanes."""
        ot = self.overtaking
        if ot is None or ot.phase == "pass":
            return float(self.lane.index)
        frac = min(1.0, ot.elapsed / params.lane_change_time)
        if ot.phase == "change":
            return ot.from_index + frac * (ot.to_index - ot.from_index)
        return ot.to_index + frac * (ot.from_index - ot.to_index)

    @property
    def changing_lanes(self) -> bool:
        return self.overtaking is not None and self.overtaking.phase != "pass"

    def motion(self, net: RoadNetwork, params: "MobilityParams") -> MotionState:
        x, y = net.lane_point(self.lane, self.s, self.lateral(params))
        return MotionState(x, y, self.speed, net.lane_heading(self.lane))


@dataclass(frozen=True)
class MobilityParams:
    v_max: float = 25.0
    d_sec: float = 10.0
    follow_margin: float = 5.0
    lane_change_time: float = 2.0
    max_pass_time: float = 30.0

    @classmethod
    def from_config(cls, config) -> "MobilityParams":
        return cls(
            v_max=config.v_max,
            d_sec=config.d_sec,
            follow_margin=config.follow_margin,
            lane_change_time=config.lane_change_time,
        )


def place_vehicles(net: RoadNetwork, n: int, rng_seed, v_min: float = 0.0, v_max: float = 25.0,
                   d_sec: float = 10.0) -> list[Vehicle]:
    """Place ``n`` vehicles uniformly over the total lane length.

    Positions come from uniform spacings on the concatenated lanes with
    ``d_sec`` added between consecutive vehicles, so every lane starts out
    respecting the security distance.  ``rng_seed`` may be an int or a
    ``numpy.random.Generator``.
    """
    if n < 1:
        raise ValueError("need at least one vehicle")
    lanes = net.lanes
    total = net.total_lane_length
    capacity = int(math.floor(total / d_sec))
    if n > capacity:
        raise ValueError(f"{n} vehicles exceed lane capacity {capacity} at d_sec={d_sec} m")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    slack = total - n * d_sec
    offsets = np.sort(rng.uniform(0.0, slack, size=n)) + d_sec * np.arange(n) + 0.5 * d_sec
    desired = rng.uniform(v_min, v_max, size=n)
    n_nodes = len(net.horizontal_axes) * len(net.vertical_axes)
    waypoints = rng.integers(0, n_nodes, size=n)

    starts = np.cumsum([0.0] + [net.lane_length(k) for k in lanes])
    vehicles = []
    for i, pos in enumerate(offsets):
        li = min(int(np.searchsorted(starts, pos, side="right")) - 1, len(lanes) - 1)
        lane = lanes[li]
        along = min(pos - starts[li], net.lane_length(lane))
        s = along if lane.direction > 0 else net.lane_length(lane) - along
        vehicles.append(Vehicle(
            id=i, lane=lane, s=float(s), speed=float(desired[i]),
            desired_speed=float(desired[i]), waypoint=int(waypoints[i]),
        ))
    return vehicles


def _gap(ahead: Vehicle, behind_s: float, direction: int) -> float:
    return (ahead.s - behind_s) * direction


def _leader(v: Vehicle, members: list[Vehicle]) -> tuple[Optional[Vehicle], float]:
    best, best_gap = None, math.inf
    d = v.lane.direction
    for o in members:
        if o is v:
            continue
        g = (o.s - v.s) * d
        if 0.0 <= g < best_gap and (g > 0.0 or o.id < v.id):
            best, best_gap = o, g
    return best, best_gap


def _slot_free(members: list[Vehicle], s: float, direction: int, behind: float, ahead: float,
               ignore: Optional[Vehicle] = None) -> bool:
    for o in members:
        if o is ignore:
            continue
        g = (o.s - s) * direction
        if -behind < g < ahead:
            return False
    return True


class _Stepper:
    """One tick of the model; lane membership is rebuilt per call."""

    def __init__(self, net: RoadNetwork, vehicles: list[Vehicle], params: MobilityParams, rng):
        self.net = net
        self.vehicles = vehicles
        self.params = params
        self.rng = rng
        self.nodes = net.intersections
        self.lanes: dict[LaneKey, list[Vehicle]] = {k: [] for k in net.lanes}
        for v in vehicles:
            self.lanes[v.lane].append(v)

    def _move_lane(self, v: Vehicle, lane: LaneKey) -> None:
        self.lanes[v.lane].remove(v)
        v.lane = lane
        self.lanes[lane].append(v)

    def run(self, dt: float) -> None:
        moved = set()
        for key in self.net.lanes:
            d = key.direction
            for v in sorted(self.lanes[key], key=lambda o: (-o.s * d, o.id)):
                if v.id in moved:
                    continue
                self._advance(v, dt)
                moved.add(v.id)

    def _update_maneuver(self, v: Vehicle, dt: float) -> None:
        ot = v.overtaking
        p = self.params
        ot.elapsed += dt
        if ot.phase == "change" and ot.elapsed >= p.lane_change_time:
            ot.phase, ot.elapsed = "pass", 0.0
        elif ot.phase == "return" and ot.elapsed >= p.lane_change_time:
            v.overtaking = None
        elif ot.phase == "pass":
            origin = v.lane._replace(index=ot.from_index)
            passed = next((o for o in self.lanes[origin] if o.id == ot.passed), None)
            if passed is None or ot.elapsed > p.max_pass_time:
                v.overtaking = None
                return
            ahead_of_passed = _gap(passed, v.s, v.lane.direction) <= -p.d_sec
            if ahead_of_passed and _slot_free(self.lanes[origin], v.s, v.lane.direction,
                                              p.d_sec, p.d_sec + p.follow_margin):
                self._move_lane(v, origin)
                ot.phase, ot.elapsed = "return", 0.0

    def _try_overtake(self, v: Vehicle, leader: Vehicle) -> bool:
        p = self.params
        for index in (v.lane.index + 1, v.lane.index - 1):
            if not 0 <= index < self.net.lanes_per_direction:
                continue
            target = v.lane._replace(index=index)
            if _slot_free(self.lanes[target], v.s, v.lane.direction, p.d_sec, p.d_sec + p.follow_margin):
                v.overtaking = Overtake("change", v.lane.index, index, leader.id)
                self._move_lane(v, target)
                return True
        return False

    def _advance(self, v: Vehicle, dt: float) -> None:
        p = self.params
        if v.overtaking is not None:
            self._update_maneuver(v, dt)
        target = v.desired_speed
        leader, gap = _leader(v, self.lanes[v.lane])
        if leader is not None and gap <= p.d_sec + p.follow_margin:
            if (v.overtaking is None and leader.speed < v.desired_speed - 0.1
                    and self._try_overtake(v, leader)):
                leader, gap = _leader(v, self.lanes[v.lane])
            if leader is not None and gap <= p.d_sec + p.follow_margin:
                target = min(target, leader.speed)
        if leader is not None:
            target = min(target, max(0.0, (gap - p.d_sec) / dt))
        v.speed = min(max(target, 0.0), p.v_max)
        self._travel(v, v.speed * dt, dt)

    def _travel(self, v: Vehicle, ds: float, dt: float) -> None:
        lane = v.lane
        d = lane.direction
        length = self.net.lane_length(lane)
        new_s = v.s + d * ds
        for c in self.net.crossings(lane.axis):
            if (d > 0 and v.s < c <= new_s) or (d < 0 and new_s <= c < v.s):
                if self._cross(v, c, ds - abs(c - v.s)):
                    return
                break
        if new_s > length or new_s < 0.0:
            edge = length if d > 0 else 0.0
            self._uturn(v, edge, ds - abs(edge - v.s), dt)
            return
        v.s = new_s

    def _node_index(self, axis: int, road: int, crossing: int) -> int:
        n_vertical = len(self.net.vertical_axes)
        if axis == HORIZONTAL:
            return road * n_vertical + crossing
        return crossing * n_vertical + road

    def _next_point(self, axis: int, road: int, direction: int, s: float) -> tuple[float, float]:
        """Next crossing (or the area edge) strictly beyond ``s`` on a road."""
        ahead = [c for c in self.net.crossings(axis) if (c - s) * direction > 0]
        if ahead:
            nxt = min(ahead) if direction > 0 else max(ahead)
        else:
            nxt = self.net.width if axis == HORIZONTAL else self.net.height
            nxt = nxt if direction > 0 else 0.0
        c = self.net.axis_coordinate(axis, road)
        return (nxt, c) if axis == HORIZONTAL else (c, nxt)

    def _cross(self, v: Vehicle, c: float, remaining: float) -> bool:
        """Handle reaching the crossing at ``c``.  Returns True if the vehicle turned."""
        net = self.net
        lane = v.lane
        crossing = net.crossings(lane.axis).index(c)
        node = self._node_index(lane.axis, lane.road, crossing)
        if node == v.waypoint:
            v.waypoint = int(self.rng.integers(0, len(self.nodes)))
        if v.changing_lanes:
            return False
        wx, wy = self.nodes[v.waypoint]

        def cost(axis, road, direction, s):
            px, py = self._next_point(axis, road, direction, s)
            return abs(px - wx) + abs(py - wy)

        here = net.axis_coordinate(lane.axis, lane.road)
        other = 1 - lane.axis
        best = (cost(lane.axis, lane.road, lane.direction, c), 0, None)
        for rank, direction in enumerate((1, -1), start=1):
            option = (cost(other, crossing, direction, here), rank, direction)
            if option < best:
                best = option
        if best[2] is None:
            return False
        target = LaneKey(other, crossing, best[2], min(lane.index, net.lanes_per_direction - 1))
        new_s = here + best[2] * remaining
        p = self.params
        if not _slot_free(self.lanes[target], new_s, best[2], p.d_sec, p.d_sec):
            return False
        v.overtaking = None
        self._move_lane(v, target)
        v.s = new_s
        return True

    def _uturn(self, v: Vehicle, edge: float, remaining: float, dt: float) -> None:
        p = self.params
        lane = v.lane
        back = -lane.direction
        new_s = edge + back * max(remaining, 0.0)
        options = [lane.index] + [j for j in range(self.net.lanes_per_direction) if j != lane.index]
        for index in options:
            target = LaneKey(lane.axis, lane.road, back, index)
            if _slot_free(self.lanes[target], new_s, back, p.d_sec, p.d_sec):
                v.overtaking = None
                self._move_lane(v, target)
                v.s = new_s
                return
        # opposite lanes are blocked at the edge: wait there
        v.speed = abs(edge - v.s) / dt
        v.s = edge


def step(net: RoadNetwork, vehicles: list[Vehicle], dt: float, rng,
         params: MobilityParams = MobilityParams()) -> list[Vehicle]:
    """Advance all vehicles by ``dt`` seconds in place and return them."""
    if not 0.0 < dt <= 1.0:
        raise ValueError(f"dt must lie in (0, 1], got {dt}")
    _Stepper(net, vehicles, params, rng).run(dt)
    return vehicles


@dataclass
class Trace:
    """Recorded trajectories, one row per tick (``times[k] = k * dt``)."""

    dt: float
    x: np.ndarray  # (ticks, n)
    y: np.ndarray
    speed: np.ndarray
    heading: np.ndarray
    lane: np.ndarray  # lane index into RoadNetwork.lanes
    s: np.ndarray
    maneuver: np.ndarray  # True while overtaking (any phase)
    changing: np.ndarray  # True during lateral lane-change phases

    @property
    def n_ticks(self) -> int:
        return self.x.shape[0]

    @property
    def n_vehicles(self) -> int:
        return self.x.shape[1]

    @property
    def vx(self) -> np.ndarray:
        return self.speed * np.cos(self.heading)

    @property
    def vy(self) -> np.ndarray:
        return self.speed * np.sin(self.heading)

    def write_csv(self, path, every: int = 1) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time", "vehicle", "x", "y", "speed", "heading"])
            for k in range(0, self.n_ticks, every):
                t = round(k * self.dt, 9)
                for i in range(self.n_vehicles):
                    w.writerow([t, i, f"{self.x[k, i]:.3f}", f"{self.y[k, i]:.3f}",
                                f"{self.speed[k, i]:.3f}", f"{self.heading[k, i]:.6f}"])


def record_trace(net: RoadNetwork, vehicles: list[Vehicle], duration: float, dt: float, rng,
                 params: MobilityParams = MobilityParams()) -> Trace:
    """Run the model for ``duration`` seconds and record every tick.

    Row ``k`` holds positions at time ``k * dt``; the speed and heading in
    row ``k`` are those used over the interval that ends at row ``k``
    (row 0 repeats the initial state).
    """
    n_ticks = int(math.ceil(duration / dt - 1e-9)) + 1
    n = len(vehicles)
    lane_ids = {k: i for i, k in enumerate(net.lanes)}
    headings = {k: net.lane_heading(k) for k in net.lanes}
    arrays = {name: np.empty((n_ticks, n)) for name in ("x", "y", "speed", "heading", "s")}
    lane = np.empty((n_ticks, n), dtype=np.int16)
    maneuver = np.zeros((n_ticks, n), dtype=bool)
    changing = np.zeros((n_ticks, n), dtype=bool)
    order = sorted(vehicles, key=lambda v: v.id)

    def record(k):
        states = []
        for v in order:
            px, py = net.lane_point(v.lane, v.s, v.lateral(params))
            states.append((px, py, v.speed, headings[v.lane], v.s, lane_ids[v.lane],
                           v.overtaking is not None, v.changing_lanes))
        cols = list(zip(*states))
        for name, col in zip(("x", "y", "speed", "heading", "s"), cols):
            arrays[name][k] = col
        lane[k], maneuver[k], changing[k] = cols[5], cols[6], cols[7]

    record(0)
    for k in range(1, n_ticks):
        step(net, vehicles, dt, rng, params)
        record(k)
    return Trace(dt=dt, lane=lane, maneuver=maneuver, changing=changing, **arrays)
