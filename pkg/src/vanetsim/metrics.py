"""Per-run counters and the packet delivery ratio."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field


class ConsistencyError(RuntimeError):
    """Counters that cannot all be true at once (e.g. delivered > sent)."""


def compute_pdr(delivered: int, sent: int) -> float:
    """Delivered over sent, in percent; ``nan`` marks a run with no traffic."""
    if sent < 0 or delivered < 0:
        raise ConsistencyError(f"negative packet counts: delivered={delivered}, sent={sent}")
    if delivered > sent:
        raise ConsistencyError(f"delivered ({delivered}) exceeds sent ({sent})")
    if sent == 0:
        return math.nan
    return 100.0 * delivered / sent


@dataclass
class RunMetrics:
    protocol: str = ""
    n_vehicles: int = 0
    v_max: float = 0.0
    seed: int = 0
    sent: int = 0
    delivered: int = 0
    drops: Counter = field(default_factory=Counter)  # outcome value -> count
    drop_details: Counter = field(default_factory=Counter)
    in_flight: int = 0
    hop_histogram: Counter = field(default_factory=Counter)
    delays: list = field(default_factory=list)
    carry_events: int = 0
    forward_failures: int = 0
    losses: Counter = field(default_factory=Counter)
    transmissions: int = 0
    revisits: int = 0
    greedy_forwards: int = 0
    greedy_violations: int = 0
    beacons_sent: int = 0
    beacon_attempts: int = 0
    beacon_receptions: int = 0
    snapshots: list = field(default_factory=list)

    @property
    def finished(self) -> int:
        return self.delivered + sum(self.drops.values()) + self.in_flight

    @property
    def pdr(self) -> float:
        return compute_pdr(self.delivered, self.sent)

    @property
    def mean_hops(self) -> float:
        n = sum(self.hop_histogram.values())
        if not n:
            return math.nan
        return sum(h * c for h, c in self.hop_histogram.items()) / n

    @property
    def mean_delay(self) -> float:
        return sum(self.delays) / len(self.delays) if self.delays else math.nan

    def record_outcome(self, packet, outcome, now: float) -> None:
        value = outcome.value
        if value == "delivered":
            self.delivered += 1
            self.hop_histogram[packet.hop_count] += 1
            self.delays.append(now - packet.created_at)
        elif value == "in_flight":
            self.in_flight += 1
        else:
            self.drops[value] += 1
            if packet.drop_detail:
                self.drop_details[packet.drop_detail] += 1

    def check_conservation(self) -> None:
        if self.sent != self.finished:
            raise ConsistencyError(
                f"packet conservation broken: sent={self.sent}, accounted={self.finished}")
        compute_pdr(self.delivered, self.sent)

    def row(self) -> dict:
        """The fixed CSV columns for this run."""
        return {
            "protocol": self.protocol,
            "n_vehicles": self.n_vehicles,
            "v_max": self.v_max,
            "seed": self.seed,
            "sent": self.sent,
            "delivered": self.delivered,
            "pdr": self.pdr,
            "drops_ttl": self.drops["dropped_ttl"],
            "drops_deadline": self.drops["dropped_deadline"],
            "drops_loop": self.drops["dropped_loop"],
            "carry_events": self.carry_events,
            "forward_failures": self.forward_failures,
            "mean_hops": self.mean_hops,
            "mean_delay_s": self.mean_delay,
        }
