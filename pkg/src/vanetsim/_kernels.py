"""Inner loops of the per-hop decision, compiled with numba when available.

Each kernel is plain Python over flat float arrays so it also runs
(slowly) without numba.
"""
from __future__ import annotations

import math

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - exercised only without numba
    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]):
            return args[0]
        return lambda f: f

ZERO_VECTOR = 1e-9
TIE_EPS = 1e-9


@njit(cache=True)
def cos_between(vx, vy, dx, dy):
    nv = math.hypot(vx, vy)
    nd = math.hypot(dx, dy)
    if nv < ZERO_VECTOR or nd < ZERO_VECTOR:
        return 0.0
    c = (vx * dx + vy * dy) / (nv * nd)
    return min(1.0, max(-1.0, c))


@njit(cache=True)
def view_arrays(heard, state, now, expiry):
    """Entries of one neighbour-table row with age in [0, expiry].

    Returns ``(ids, m)`` where the rows of ``m`` are predicted x, y,
    velocity x, y, beaconed x, y and age.  One matrix instead of seven
    arrays keeps the boxing cost down.
    """
    n = heard.shape[0]
    count = 0
    for j in range(n):
        age = now - heard[j]
        if age >= 0.0 and age <= expiry:
            count += 1
    ids = np.empty(count, np.int64)
    m = np.empty((7, count))
    k = 0
    for j in range(n):
        age = now - heard[j]
        if age >= 0.0 and age <= expiry:
            sp = state[j, 2]
            h = state[j, 3]
            ux = sp * math.cos(h)
            uy = sp * math.sin(h)
            ids[k] = j
            m[0, k] = state[j, 0] + age * ux
            m[1, k] = state[j, 1] + age * uy
            m[2, k] = ux
            m[3, k] = uy
            m[4, k] = state[j, 0]
            m[5, k] = state[j, 1]
            m[6, k] = age
            k += 1
    return ids, m


@njit(cache=True)
def rdgr_pick(fx, fy, fvx, fvy, dx, dy, x, y, vx, vy, rho, omega, lam, horizon, R,
              d_floor, ls_cap, require_progress, threshold):
    """Index of the highest score strictly above ``threshold`` (first on ties), or -1."""
    d_c = math.hypot(dx - fx, dy - fy)
    best = threshold
    pick = -1
    for j in range(x.shape[0]):
        d_ci = math.hypot(x[j] - fx, y[j] - fy)
        if not d_ci < R:
            continue
        d_i = math.hypot(dx - x[j], dy - y[j])
        if require_progress and not d_i < d_c:
            continue
        future = math.hypot((fx - x[j]) + horizon * (fvx - vx[j]), (fy - y[j]) + horizon * (fvy - vy[j]))
        ls = R / max(future, d_floor)
        if ls > ls_cap:
            ls = ls_cap
        score = (rho * (1.0 - d_i / d_c) + omega * cos_between(vx[j], vy[j], dx - x[j], dy - y[j])
                 + lam * ls)
        if score > best:
            best = score
            pick = j
    return pick


@njit(cache=True)
def greedy_pick(fx, fy, dx, dy, px, py, vx, vy, R, cos_tiebreak):
    """Greedy next hop among neighbours within ``R`` that are closer to the destination.

    Returns ``(index or -1, number of in-range neighbours)``.  Distances
    within ``TIE_EPS`` of the best count as ties, resolved by the larger
    direction cosine when ``cos_tiebreak`` and otherwise by lowest index.
    """
    own = math.hypot(dx - fx, dy - fy)
    best_d = math.inf
    in_range = 0
    for j in range(px.shape[0]):
        if math.hypot(px[j] - fx, py[j] - fy) <= R:
            in_range += 1
            d = math.hypot(dx - px[j], dy - py[j])
            if d < own and d < best_d:
                best_d = d
    if best_d == math.inf:
        return -1, in_range
    pick = -1
    best_c = -math.inf
    for j in range(px.shape[0]):
        if math.hypot(px[j] - fx, py[j] - fy) > R:
            continue
        d = math.hypot(dx - px[j], dy - py[j])
        if d < own and d <= best_d + TIE_EPS:
            if not cos_tiebreak:
                return j, in_range
            c = cos_between(vx[j], vy[j], dx - px[j], dy - py[j])
            if c > best_c:
                best_c = c
                pick = j
    return pick, in_range


@njit(cache=True)
def rdgr_choice(fx, fy, fvx, fvy, ids, x, y, vx, vy, dx, dy, dest_id, rho, omega, lam, horizon, R,
                d_floor, ls_cap, require_progress):
    """View index of the RDGR next hop, or -1 to carry.

    The destination itself is taken whenever it is in the view and in range.
    """
    for j in range(ids.shape[0]):
        if ids[j] == dest_id:
            if math.hypot(x[j] - fx, y[j] - fy) < R:
                return j
            break
    if math.hypot(dx - fx, dy - fy) <= d_floor:
        return -1
    threshold = omega * cos_between(fvx, fvy, dx - fx, dy - fy)
    return rdgr_pick(fx, fy, fvx, fvy, dx, dy, x, y, vx, vy, rho, omega, lam, horizon, R,
                     d_floor, ls_cap, require_progress, threshold)


VOID = -2
NO_PROGRESS = -1


@njit(cache=True)
def greedy_choice(fx, fy, dx, dy, ids, px, py, vx, vy, dest_id, R, cos_tiebreak):
    """View index of the greedy next hop, ``NO_PROGRESS`` or ``VOID`` (nobody in range)."""
    for j in range(ids.shape[0]):
        if ids[j] == dest_id:
            if math.hypot(px[j] - fx, py[j] - fy) <= R:
                return j
            break
    j, n_in = greedy_pick(fx, fy, dx, dy, px, py, vx, vy, R, cos_tiebreak)
    if n_in == 0:
        return VOID
    return j


@njit(cache=True)
def rdgr_hop(heard, state, now, expiry, fx, fy, fvx, fvy, dx, dy, dest_id, rho, omega, lam,
             horizon, R, d_floor, ls_cap, require_progress):
    """:func:`rdgr_choice` straight from a neighbour-table row; returns a vehicle id or -1."""
    ids, m = view_arrays(heard, state, now, expiry)
    j = rdgr_choice(fx, fy, fvx, fvy, ids, m[0], m[1], m[2], m[3], dx, dy, dest_id, rho, omega, lam,
                    horizon, R, d_floor, ls_cap, require_progress)
    return ids[j] if j >= 0 else -1


@njit(cache=True)
def apply_receptions(heard, state, rec, start, stop):
    """Write receptions ``start:stop`` into the tables, keeping the newer beacon on conflict.

    ``rec`` rows are (receiver, sender, sent_at, x, y, speed, heading).
    """
    for k in range(start, stop):
        r = int(rec[k, 0])
        s = int(rec[k, 1])
        if rec[k, 2] >= heard[r, s]:
            heard[r, s] = rec[k, 2]
            for c in range(4):
                state[r, s, c] = rec[k, 3 + c]


# outcome codes of geographic_choice
GREEDY = 0
PERIMETER = 1
LOOP = 2
VOID_DROP = 3
TWO_PI = 2.0 * math.pi


@njit(cache=True)
def right_hand(cx, cy, refx, refy, px, py, members):
    """First of ``members`` counter-clockwise from the ray c -> ref (the ref node itself last)."""
    base = math.atan2(refy - cy, refx - cx)
    best = math.inf
    pick = -1
    for j in members:
        b = (math.atan2(py[j] - cy, px[j] - cx) - base) % TWO_PI
        if b < 1e-12:
            b = TWO_PI
        if b < best:
            best = b
            pick = j
    return pick


@njit(cache=True)
def segment_cross(ax, ay, bx, by, qx, qy, rx, ry):
    """Intersection of segments ab and qr as (hit, x, y)."""
    ux, uy = bx - ax, by - ay
    sx, sy = rx - qx, ry - qy
    denom = ux * sy - uy * sx
    if abs(denom) < 1e-12:
        return False, 0.0, 0.0
    wx, wy = qx - ax, qy - ay
    t = (wx * sy - wy * sx) / denom
    u = (wx * uy - wy * ux) / denom
    if -1e-12 <= t <= 1 + 1e-12 and -1e-12 <= u <= 1 + 1e-12:
        return True, ax + t * ux, ay + t * uy
    return False, 0.0, 0.0


@njit(cache=True)
def gabriel_members(cx, cy, px, py, cand):
    """Subset of ``cand`` whose edge from c has no other candidate strictly inside its diameter circle."""
    keep = np.empty(cand.shape[0], np.int64)
    n = 0
    for a in range(cand.shape[0]):
        k = cand[a]
        mx = 0.5 * (cx + px[k])
        my = 0.5 * (cy + py[k])
        r2 = 0.25 * ((px[k] - cx) ** 2 + (py[k] - cy) ** 2)
        ok = True
        for b in range(cand.shape[0]):
            if b != a:
                m = cand[b]
                if (px[m] - mx) ** 2 + (py[m] - my) ** 2 < r2:
                    ok = False
                    break
        if ok:
            keep[n] = k
            n += 1
    return keep[:n]


@njit(cache=True)
def geographic_choice(own_id, cx, cy, ids, px, py, vx, vy, dx, dy, dest_id, R, tiebreak,
                      has_state, ex, ey, fx, fy, fa, fb, qx, qy):
    """Greedy forwarding with perimeter recovery over one view.

    The perimeter state is passed flat: entry point ``(ex, ey)`` where
    greedy failed, face entry ``(fx, fy)``, first face edge ``(fa, fb)``
    and the previous hop's position ``(qx, qy)``.  Returns
    ``(code, index, ex, ey, fx, fy, fa, fb)`` with the updated state.
    """
    if has_state and math.hypot(dx - cx, dy - cy) < math.hypot(dx - ex, dy - ey):
        has_state = False
    if not has_state:
        j = greedy_choice(cx, cy, dx, dy, ids, px, py, vx, vy, dest_id, R, tiebreak)
        if j == VOID:
            return VOID_DROP, -1, ex, ey, fx, fy, fa, fb
        if j >= 0:
            return GREEDY, j, ex, ey, fx, fy, fa, fb
    n_in = 0
    cand = np.empty(ids.shape[0], np.int64)
    for j in range(ids.shape[0]):
        if math.hypot(px[j] - cx, py[j] - cy) <= R:
            if ids[j] == dest_id:
                return GREEDY, j, ex, ey, fx, fy, fa, fb
            cand[n_in] = j
            n_in += 1
    if n_in == 0:
        return VOID_DROP, -1, ex, ey, fx, fy, fa, fb
    members = gabriel_members(cx, cy, px, py, cand[:n_in])
    if not has_state:
        ex, ey, fx, fy = cx, cy, cx, cy
        j = right_hand(cx, cy, dx, dy, px, py, members)
        fa, fb = own_id, ids[j]
        fresh = True
    else:
        j = right_hand(cx, cy, qx, qy, px, py, members)
        fresh = False
    face_d = math.hypot(fx - dx, fy - dy)
    for _ in range(members.shape[0]):
        hit, hx, hy = segment_cross(cx, cy, px[j], py[j], ex, ey, dx, dy)
        if not hit or math.hypot(hx - dx, hy - dy) >= face_d - 1e-9:
            break
        fx, fy = hx, hy
        face_d = math.hypot(hx - dx, hy - dy)
        j = right_hand(cx, cy, px[j], py[j], px, py, members)
        fa, fb = own_id, ids[j]
        fresh = True
    if not fresh and fa == own_id and fb == ids[j]:
        return LOOP, j, ex, ey, fx, fy, fa, fb
    return PERIMETER, j, ex, ey, fx, fy, fa, fb


@njit(cache=True)
def geographic_hop(heard, state, now, expiry, own_id, cx, cy, dx, dy, dest_id, R, predicted,
                   has_state, ex, ey, fx, fy, fa, fb, qx, qy):
    """:func:`geographic_choice` straight from a table row; the index is replaced by a vehicle id."""
    ids, m = view_arrays(heard, state, now, expiry)
    if predicted:
        out = geographic_choice(own_id, cx, cy, ids, m[0], m[1], m[2], m[3], dx, dy, dest_id, R, True,
                                has_state, ex, ey, fx, fy, fa, fb, qx, qy)
    else:
        out = geographic_choice(own_id, cx, cy, ids, m[4], m[5], m[2], m[3], dx, dy, dest_id, R, False,
                                has_state, ex, ey, fx, fy, fa, fb, qx, qy)
    code, j, ex, ey, fx, fy, fa, fb = out
    nid = ids[j] if j >= 0 else -1
    return code, nid, ex, ey, fx, fy, fa, fb
