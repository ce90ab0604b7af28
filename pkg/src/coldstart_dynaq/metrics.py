"""Per-run/per-episode performance records."""

from dataclasses import dataclass, field


@dataclass
class RunMetrics:
    """One episode or evaluation run of the inventory environment.

    shortage_fraction is the fraction of days with unmet demand;
    avg_holding is the mean pre-sale total stock per day. wall_seconds is
    hardware-dependent and is kept out of reproducible record files.
    """

    total_cost: float
    daily_costs: list = field(default_factory=list)
    shortage_fraction: float = 0.0
    avg_holding: float = 0.0
    wall_seconds: float = 0.0
