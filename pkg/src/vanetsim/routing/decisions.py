from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Union

import numpy as np

ZERO_VECTOR = 1e-9


class DropReason(enum.Enum):
    PERIMETER_LOOP = "perimeter_loop"
    VOID = "void"  # no neighbour at all to hand the packet to


@dataclass(frozen=True)
class PerimeterState:
    """Per-packet perimeter-mode bookkeeping carried between hops."""

    entry: tuple[float, float]  # where greedy failed (Lp)
    face_entry: tuple[float, float]  # where the packet entered the current face (Lf)
    first_edge: tuple[int, int]  # first edge traversed on the current face (e0)
    prev_position: tuple[float, float]  # position of the node that sent the packet


class Forward(NamedTuple):
    next_hop: int
    mode: str = "greedy"  # "greedy", "perimeter" or "direct"
    perimeter: Optional[PerimeterState] = None
    # audit fields: distance to destination of the chosen candidate (as the
    # policy saw it) and of the forwarder
    candidate_distance: float = math.nan
    own_distance: float = math.nan


@dataclass(frozen=True)
class Carry:
    pass


@dataclass(frozen=True)
class Drop:
    reason: DropReason


CARRY = Carry()

RoutingDecision = Union[Forward, Carry, Drop]


def cos_direction(v, to_dest) -> float:
    """Cosine of the angle between two 2-vectors; 0 if either is ~zero."""
    vx, vy = v
    dx, dy = to_dest
    nv = math.hypot(vx, vy)
    nd = math.hypot(dx, dy)
    if nv < ZERO_VECTOR or nd < ZERO_VECTOR:
        return 0.0
    return max(-1.0, min(1.0, (vx * dx + vy * dy) / (nv * nd)))


def cos_direction_xy(vx, vy, dx, dy):
    """Vectorised :func:`cos_direction`."""
    nv = np.hypot(vx, vy)
    nd = np.hypot(dx, dy)
    ok = (nv >= ZERO_VECTOR) & (nd >= ZERO_VECTOR)
    denom = np.where(ok, nv * nd, 1.0)
    return np.where(ok, np.clip((vx * dx + vy * dy) / denom, -1.0, 1.0), 0.0)
