"""Constant-velocity kinematics between pairs of vehicles.

Everything here is a pure function of immutable values.  The scalar
functions take :class:`MotionState`; the ``*_xy`` helpers accept numpy
arrays and are what the routing hot paths use.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi

#: Floor applied to predicted distances before dividing (metres).
D_FLOOR = 1.0
#: Upper clamp on link stability.
LS_CAP = 10.0


def normalize_heading(theta: float) -> float:
    theta = math.fmod(theta, TWO_PI)
    if theta < 0.0:
        theta += TWO_PI
    # fmod of a tiny negative number can round up to exactly 2*pi
    if theta >= TWO_PI:
        theta = 0.0
    return theta


@dataclass(frozen=True)
class MotionState:
    """Position (m), speed (m/s) and heading (rad) of one vehicle."""

    x: float
    y: float
    speed: float = 0.0
    heading: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite position ({self.x}, {self.y})")
        if not math.isfinite(self.speed) or self.speed < 0.0:
            raise ValueError(f"speed must be finite and >= 0, got {self.speed}")
        if not math.isfinite(self.heading):
            raise ValueError(f"non-finite heading {self.heading}")
        object.__setattr__(self, "heading", normalize_heading(self.heading))

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)

    @property
    def velocity(self) -> tuple[float, float]:
        return (self.speed * math.cos(self.heading), self.speed * math.sin(self.heading))


def advance(state: MotionState, t: float) -> MotionState:
    """Extrapolate ``state`` along a straight line for ``t`` seconds."""
    if t < 0.0:
        raise ValueError(f"horizon must be >= 0, got {t}")
    return MotionState(
        state.x + t * state.speed * math.cos(state.heading),
        state.y + t * state.speed * math.sin(state.heading),
        state.speed,
        state.heading,
    )


def distance_at(a: MotionState, b: MotionState, t: float) -> float:
    """Distance between ``a`` and ``b`` after both travel ``t`` seconds.

    Closed form: sqrt((dx + t*dvx)**2 + (dy + t*dvy)**2).
    """
    dx = a.x - b.x
    dy = a.y - b.y
    dvx = a.speed * math.cos(a.heading) - b.speed * math.cos(b.heading)
    dvy = a.speed * math.sin(a.heading) - b.speed * math.sin(b.heading)
    return math.hypot(dx + t * dvx, dy + t * dvy)


def stability_from_distance(d, R: float, d_floor: float = D_FLOOR, ls_cap: float = LS_CAP):
    """R / max(d, d_floor), clamped to [0, ls_cap].  Works on scalars and arrays."""
    return np.clip(R / np.maximum(d, d_floor), 0.0, ls_cap)


def link_stability(
    a: MotionState,
    b: MotionState,
    horizon: float,
    R: float,
    d_floor: float = D_FLOOR,
    ls_cap: float = LS_CAP,
) -> float:
    """Link stability R / D between two nodes at ``horizon`` seconds ahead."""
    if R <= 0.0:
        raise ValueError(f"range must be > 0, got {R}")
    return float(stability_from_distance(distance_at(a, b, horizon), R, d_floor, ls_cap))


def link_expiration_time(a: MotionState, b: MotionState, R: float) -> float:
    """Time until two connected nodes drift to distance ``R``; ``inf`` if never.

    Solves |dp + t*dv|**2 = R**2 and returns the larger root.  Raises
    ``ValueError`` when the nodes are not connected to begin with.
    """
    if R <= 0.0:
        raise ValueError(f"range must be > 0, got {R}")
    dx = a.x - b.x
    dy = a.y - b.y
    if math.hypot(dx, dy) > R:
        raise ValueError("nodes are not within range R of each other")
    avx, avy = a.velocity
    bvx, bvy = b.velocity
    dvx = avx - bvx
    dvy = avy - bvy
    qa = dvx * dvx + dvy * dvy
    if qa == 0.0:
        return math.inf
    qb = 2.0 * (dx * dvx + dy * dvy)
    qc = dx * dx + dy * dy - R * R
    disc = qb * qb - 4.0 * qa * qc
    if disc < 0.0:
        return math.inf
    sq = math.sqrt(disc)
    # stable form of the larger root (-b + sq) / 2a
    if qb <= 0.0:
        root = (-qb + sq) / (2.0 * qa)
    else:
        root = (2.0 * -qc) / (qb + sq) if (qb + sq) != 0.0 else 0.0
    if root < 0.0:
        return math.inf
    return root


# --- vectorised helpers -------------------------------------------------


def advance_xy(x, y, speed, heading, t):
    """Array version of :func:`advance`; returns ``(x, y)``."""
    return x + t * speed * np.cos(heading), y + t * speed * np.sin(heading)


def distance_at_xy(ax, ay, avx, avy, bx, by, bvx, bvy, t):
    """Array version of :func:`distance_at` taking velocity components."""
    return np.hypot((ax - bx) + t * (avx - bvx), (ay - by) + t * (avy - bvy))
