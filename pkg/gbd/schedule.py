"""
Virtual-time communication model for asynchronous subproblem updates
"""
import heapq
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from errors import ConfigError

# subproblem latency ratios in system order (AC grid, RES #1, RES #2) and n_min
SITUATIONS: Dict[int, Tuple[Tuple[float, ...], int]] = {
    1: ((1.0, 1.0, 1.0), 3),
    2: ((1.0, 1.0, 2.0), 2),
    3: ((1.0, 2.0, 4.0), 2),
}

DEFAULT_STALENESS = 3


@dataclass
class DelayModel:
    latencies: Dict[str, float]
    n_min: int
    staleness: int = DEFAULT_STALENESS
    jitter: float = 0.0
    seed: Optional[int] = None
    _rng: Optional[np.random.Generator] = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if not self.latencies:
            raise ConfigError("delay model needs at least one subproblem latency")
        if any(v <= 0 for v in self.latencies.values()):
            raise ConfigError("subproblem latencies must be positive")
        if not 1 <= self.n_min <= len(self.latencies):
            raise ConfigError(f"n_min must lie in [1, {len(self.latencies)}], got {self.n_min}")
        if self.staleness < 1:
            raise ConfigError("staleness bound must be at least 1")
        if self.jitter < 0:
            raise ConfigError("latency jitter must be non-negative")
        self._rng = np.random.default_rng(self.seed)

    @property
    def synchronous(self) -> bool:
        return self.n_min == len(self.latencies)

    def duration(self, sp_id: str) -> float:
        base = self.latencies[sp_id]
        if self.jitter == 0:
            return base
        return base * (1.0 + self.jitter * float(self._rng.uniform(-1.0, 1.0)))

    @classmethod
    def sync(cls, sp_ids: Sequence[str]) -> "DelayModel":
        return cls({sp: 1.0 for sp in sp_ids}, len(sp_ids))

    @classmethod
    def situation(cls, number: int, sp_ids: Sequence[str], staleness: int = DEFAULT_STALENESS,
                  jitter: float = 0.0, seed: Optional[int] = None) -> "DelayModel":
        try:
            ratios, n_min = SITUATIONS[number]
        except KeyError:
            raise ConfigError(f"unknown delay situation {number}; expected one of {sorted(SITUATIONS)}") from None
        if len(sp_ids) != len(ratios):
            raise ConfigError(f"situation {number} is defined for {len(ratios)} subproblems, case has {len(sp_ids)}")
        return cls(dict(zip(sp_ids, ratios)), n_min, staleness, jitter, seed)

    @classmethod
    def from_ratios(cls, ratios: Sequence[float], sp_ids: Sequence[str], n_min: int,
                    staleness: int = DEFAULT_STALENESS, jitter: float = 0.0,
                    seed: Optional[int] = None) -> "DelayModel":
        if len(ratios) != len(sp_ids):
            raise ConfigError(f"{len(ratios)} latency ratios given for {len(sp_ids)} subproblems")
        return cls(dict(zip(sp_ids, map(float, ratios))), n_min, staleness, jitter, seed)


@dataclass(order=True)
class Arrival:
    finish: float
    order: int
    sp_id: str = field(compare=False)
    iteration: int = field(compare=False)
    payload: object = field(compare=False, default=None)


class EventQueue:
    """Arrivals ordered by (virtual finish time, subproblem order)"""

    def __init__(self):
        self._heap: List[Arrival] = []

    def push(self, arrival: Arrival) -> None:
        heapq.heappush(self._heap, arrival)

    def pop(self) -> Arrival:
        return heapq.heappop(self._heap)

    def peek(self) -> Arrival:
        return self._heap[0]

    def pending(self) -> List[str]:
        return sorted(a.sp_id for a in self._heap)

    def __len__(self) -> int:
        return len(self._heap)


def ready(arrived: Sequence[str], last_update: Dict[str, int], iteration: int, model: DelayModel) -> bool:
    """Master may run: enough arrivals and no subproblem stale by the bound"""
    if len(arrived) < model.n_min:
        return False
    return all(iteration - last_update[sp] < model.staleness for sp in last_update if sp not in arrived)
