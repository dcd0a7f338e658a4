"""Hop-by-hop routing over a frozen node layout (no mobility, no loss)."""
from __future__ import annotations

from dataclasses import dataclass, field
from collections import deque

import numpy as np

from ..kinematics import MotionState
from ..network import NeighborView
from .decisions import Carry, Drop, Forward
from .geographic import gabriel_mask, gpsr_select, dgrp_select


@dataclass
class StaticRoute:
    delivered: bool
    path: list[int] = field(default_factory=list)
    reason: str = ""


def unit_disk_views(xy: np.ndarray, R: float) -> list[NeighborView]:
    """Fresh (age 0) neighbour views of stationary nodes at ``xy``."""
    xy = np.asarray(xy, dtype=float)
    d = np.hypot(xy[:, 0, None] - xy[None, :, 0], xy[:, 1, None] - xy[None, :, 1])
    views = []
    for i in range(len(xy)):
        ids = np.flatnonzero((d[i] <= R) & (np.arange(len(xy)) != i))
        zeros = np.zeros(len(ids))
        views.append(NeighborView(ids, xy[ids, 0], xy[ids, 1], zeros, zeros,
                                  xy[ids, 0], xy[ids, 1], zeros))
    return views


def gabriel_graph(xy: np.ndarray, R: float) -> list[set[int]]:
    """Adjacency of the unit-disk graph after local Gabriel planarisation."""
    views = unit_disk_views(xy, R)
    adj = [set() for _ in range(len(xy))]
    for i, v in enumerate(views):
        keep = gabriel_mask(xy[i, 0], xy[i, 1], v.x, v.y)
        adj[i].update(int(j) for j in v.ids[keep])
    return adj


def reachable(adj, src: int, dst: int) -> bool:
    seen = {src}
    queue = deque([src])
    while queue:
        u = queue.popleft()
        if u == dst:
            return True
        for w in adj[u]:
            if w not in seen:
                seen.add(w)
                queue.append(w)
    return False


def route_static(xy, src: int, dst: int, R: float, protocol: str = "gpsr",
                 max_hops: int = 10_000, select=None) -> StaticRoute:
    """Follow a geographic policy from ``src`` until delivery or a drop.

    ``select(own_id, forwarder, view, dest, dest_id, state)`` may replace
    the built-in GPSR/DGRP policy.
    """
    xy = np.asarray(xy, dtype=float)
    views = unit_disk_views(xy, R)
    if select is None:
        policy = gpsr_select if protocol == "gpsr" else dgrp_select

        def select(own, fwd, view, dest, dest_id, state):
            return policy(own, fwd, view, dest, dest_id, state, R)

    dest = (float(xy[dst, 0]), float(xy[dst, 1]))
    node, state, path = src, None, [src]
    while node != dst:
        if len(path) > max_hops:
            return StaticRoute(False, path, "hop_limit")
        me = MotionState(float(xy[node, 0]), float(xy[node, 1]))
        decision = select(node, me, views[node], dest, dst, state)
        if isinstance(decision, Drop):
            return StaticRoute(False, path, decision.reason.value)
        if isinstance(decision, Carry):
            return StaticRoute(False, path, "carry")
        assert isinstance(decision, Forward)
        node, state = decision.next_hop, decision.perimeter
        path.append(node)
    return StaticRoute(True, path)
