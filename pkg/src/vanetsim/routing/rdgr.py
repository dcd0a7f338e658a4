"""Potential-score forwarding with link stability and carry fallback.

Each in-range neighbour ``i`` is scored

    rho * (1 - D_i / D_c) + omega * cos(v_i, dest - p_i) + lam * LS(c, i)

where ``D_i``/``D_c`` are the neighbour's and forwarder's distances to the
destination and ``LS`` is range over predicted distance ``horizon``
seconds ahead.  The forwarder keeps the packet unless some neighbour beats
its own score ``omega * cos(v_c, dest - p_c)``.
"""
from __future__ import annotations

import math

from .._kernels import rdgr_choice
from ..config import RdgrWeights
from ..kinematics import D_FLOOR, LS_CAP, MotionState, distance_at, stability_from_distance
from .decisions import CARRY, Forward, RoutingDecision, cos_direction


def potential_score(candidate: MotionState, forwarder: MotionState, dest, weights: RdgrWeights,
                    horizon: float, R: float, d_floor: float = D_FLOOR, ls_cap: float = LS_CAP) -> float:
    dx, dy = dest
    d_c = math.hypot(dx - forwarder.x, dy - forwarder.y)
    if d_c <= d_floor:
        raise ValueError("forwarder is at the destination; deliver locally")
    d_i = math.hypot(dx - candidate.x, dy - candidate.y)
    closeness = 1.0 - d_i / d_c
    direction = cos_direction(candidate.velocity, (dx - candidate.x, dy - candidate.y))
    ls = float(stability_from_distance(distance_at(forwarder, candidate, horizon), R, d_floor, ls_cap))
    return weights.rho * closeness + weights.omega * direction + weights.lam * ls


def self_score(forwarder: MotionState, dest, weights: RdgrWeights) -> float:
    """Carry threshold: the forwarder's direction term alone."""
    return weights.omega * cos_direction(forwarder.velocity, (dest[0] - forwarder.x, dest[1] - forwarder.y))


def rdgr_select(forwarder: MotionState, view, dest, dest_id: int, weights: RdgrWeights,
                horizon: float, R: float, d_floor: float = D_FLOOR, ls_cap: float = LS_CAP,
                require_progress: bool = False) -> RoutingDecision:
    """Next hop by greatest potential score; ``Carry`` when no neighbour beats the forwarder.

    ``view`` is a :class:`~vanetsim.network.NeighborView` (predicted
    positions are used).  With ``require_progress`` only neighbours closer
    to the destination than the forwarder are eligible.
    """
    dx, dy = dest
    own = math.hypot(dx - forwarder.x, dy - forwarder.y)
    fvx, fvy = forwarder.velocity
    j = rdgr_choice(forwarder.x, forwarder.y, fvx, fvy, view.ids, view.x, view.y, view.vx, view.vy,
                    dx, dy, dest_id, weights.rho, weights.omega, weights.lam, horizon, R, d_floor,
                    ls_cap, require_progress)
    if j < 0:
        return CARRY
    nid = int(view.ids[j])
    if nid == dest_id:
        return Forward(nid, "direct", candidate_distance=0.0, own_distance=own)
    d_j = math.hypot(dx - view.x[j], dy - view.y[j])
    return Forward(nid, "greedy", candidate_distance=d_j, own_distance=own)
