"""Greedy geographic forwarding with perimeter (face) recovery.

GPSR works on the positions carried in the last beacon; DGRP runs the
same machinery on beacon-age-extrapolated positions and breaks distance
ties toward the neighbour heading more directly at the destination.
Perimeter mode planarises the local neighbour set with the Gabriel rule
and walks faces with the right-hand rule, changing face where an edge
crosses the segment from the perimeter entry point to the destination.
"""
from __future__ import annotations

import math

import numpy as np

from .._kernels import GREEDY, LOOP, VOID_DROP, geographic_choice
from .decisions import Drop, DropReason, Forward, PerimeterState, RoutingDecision


__all__ = ["gabriel_mask", "gpsr_select", "dgrp_select", "geographic_select", "flat_state", "unpack_choice"]


def gabriel_mask(cx: float, cy: float, px: np.ndarray, py: np.ndarray) -> np.ndarray:
    """Which edges (c, k) survive Gabriel planarisation among the given neighbours.

    An edge is removed when another neighbour lies strictly inside the
    circle whose diameter is the edge.
    """
    k = len(px)
    if k <= 1:
        return np.ones(k, dtype=bool)
    mx = 0.5 * (cx + px)
    my = 0.5 * (cy + py)
    r2 = 0.25 * ((px - cx) ** 2 + (py - cy) ** 2)
    d2 = (px[None, :] - mx[:, None]) ** 2 + (py[None, :] - my[:, None]) ** 2
    np.fill_diagonal(d2, np.inf)
    return ~(d2 < r2[:, None]).any(axis=1)


def unpack_choice(out, ids, here, dest_id: int, own: float, cand_distance=None) -> RoutingDecision:
    """Turn a kernel result ``(code, index_or_id, ex, ey, fx, fy, fa, fb)`` into a decision.

    ``ids`` maps the second field to a vehicle id (None when it already is one).
    """
    code, j, ex, ey, fx, fy, fa, fb = out
    if code == VOID_DROP:
        return Drop(DropReason.VOID)
    if code == LOOP:
        return Drop(DropReason.PERIMETER_LOOP)
    nid = int(ids[j]) if ids is not None else int(j)
    if nid == dest_id:
        return Forward(nid, "direct", candidate_distance=0.0, own_distance=own)
    d = math.nan if cand_distance is None else cand_distance
    if code == GREEDY:
        return Forward(nid, "greedy", candidate_distance=d, own_distance=own)
    state = PerimeterState((float(ex), float(ey)), (float(fx), float(fy)), (int(fa), int(fb)), here)
    return Forward(nid, "perimeter", state, candidate_distance=d, own_distance=own)


def flat_state(state):
    """PerimeterState as the flat kernel arguments."""
    if state is None:
        return (False, 0.0, 0.0, 0.0, 0.0, -1, -1, 0.0, 0.0)
    return (True, *state.entry, *state.face_entry, *state.first_edge, *state.prev_position)


def geographic_select(own_id: int, forwarder, view, dest, dest_id: int, state, R: float,
                      predicted: bool) -> RoutingDecision:
    """Shared GPSR/DGRP logic.  ``state`` is the packet's PerimeterState or None."""
    cx, cy = forwarder.x, forwarder.y
    if predicted:
        px, py = view.x, view.y
    else:
        px, py = view.raw_x, view.raw_y
    dx, dy = dest
    out = geographic_choice(own_id, cx, cy, view.ids, px, py, view.vx, view.vy, dx, dy, dest_id, R,
                            predicted, *flat_state(state))
    j = out[1]
    cand = math.hypot(dx - px[j], dy - py[j]) if j >= 0 else None
    return unpack_choice(out, view.ids, (cx, cy), dest_id, math.hypot(dx - cx, dy - cy), cand)


def gpsr_select(own_id: int, forwarder, view, dest, dest_id: int, state, R: float) -> RoutingDecision:
    """GPSR on raw beaconed positions."""
    return geographic_select(own_id, forwarder, view, dest, dest_id, state, R, predicted=False)


def dgrp_select(own_id: int, forwarder, view, dest, dest_id: int, state, R: float) -> RoutingDecision:
    """DGRP: GPSR over beacon-age-predicted positions."""
    return geographic_select(own_id, forwarder, view, dest, dest_id, state, R, predicted=True)
