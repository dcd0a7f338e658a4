"""Next-hop policies: GPSR, DGRP and RDGR behind one decision type."""
from .decisions import (
    CARRY, Carry, Drop, DropReason, Forward, PerimeterState, RoutingDecision, cos_direction,
)
from .geographic import dgrp_select, gabriel_mask, gpsr_select
from .rdgr import potential_score, rdgr_select, self_score

__all__ = [
    "CARRY", "Carry", "Drop", "DropReason", "Forward", "PerimeterState", "RoutingDecision",
    "cos_direction", "dgrp_select", "gabriel_mask", "gpsr_select", "potential_score",
    "rdgr_select", "self_score",
]
