"""
RES uncertainty boxes: extreme scenarios and sampled interior scenarios
"""
import itertools
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np
from loguru import logger

from errors import ConfigError
from grid.models import NetworkCase, res_system

Box = Tuple[float, float]


@dataclass(frozen=True)
class Scenario:
    """Available RES power per unit for one realization"""
    name: str
    available: Tuple[Tuple[int, float], ...]

    @classmethod
    def of(cls, name: str, values: Mapping[int, float]) -> "Scenario":
        return cls(name, tuple(sorted((int(k), float(v)) for k, v in values.items())))

    def value(self, res_id: int) -> float:
        for key, v in self.available:
            if key == res_id:
                return v
        raise KeyError(f"scenario {self.name} has no value for RES {res_id}")

    def as_dict(self) -> Dict[int, float]:
        return dict(self.available)

    def values(self) -> Tuple[float, ...]:
        return tuple(v for _, v in self.available)


@dataclass
class ScenarioSet:
    boxes: Dict[int, Box]
    extremes: List[Scenario] = field(default_factory=list)
    local: Dict[str, List[Scenario]] = field(default_factory=dict)
    samples: List[Scenario] = field(default_factory=list)
    seed: Optional[int] = None

    @property
    def nominal(self) -> Scenario:
        """Deterministic forecast: every box at its upper end"""
        return Scenario.of("nominal", {k: hi for k, (_, hi) in self.boxes.items()})


def _endpoints(box: Box) -> List[float]:
    low, high = box
    if low > high:
        raise ConfigError(f"uncertainty box lower end {low} exceeds upper end {high}")
    return [high] if low == high else [high, low]


def enumerate_extremes(boxes: Mapping[int, Box]) -> Tuple[List[Scenario], Dict[str, List[Scenario]]]:
    """All box vertices (deduplicated) plus per-RES local endpoint sets"""
    ids = sorted(boxes)
    seen = set()
    extremes = []
    for combo in itertools.product(*(_endpoints(boxes[k]) for k in ids)):
        if combo in seen:
            continue
        seen.add(combo)
        extremes.append(Scenario.of(f"e{len(extremes)}", dict(zip(ids, combo))))
    local = {
        res_system(k): [Scenario.of(f"{res_system(k)}:e{n}", {k: v}) for n, v in enumerate(_endpoints(boxes[k]))]
        for k in ids
    }
    return extremes, local


def sample_scenarios(boxes: Mapping[int, Box], count: int, seed: int) -> List[Scenario]:
    """Uniform i.i.d. draws inside each box, reproducible by seed"""
    if count < 1:
        raise ConfigError("scenario count must be at least 1")
    ids = sorted(boxes)
    rng = np.random.default_rng(seed)
    lows = np.array([boxes[k][0] for k in ids], dtype=float)
    highs = np.array([boxes[k][1] for k in ids], dtype=float)
    draws = rng.uniform(lows, highs, size=(count, len(ids)))
    return [Scenario.of(f"s{n}", dict(zip(ids, row))) for n, row in enumerate(draws)]


def build_scenario_set(case: NetworkCase, count: int = 0, seed: Optional[int] = None) -> ScenarioSet:
    boxes = case.uncertainty_boxes
    extremes, local = enumerate_extremes(boxes)
    samples = sample_scenarios(boxes, count, seed) if count else []
    logger.debug(f"Scenario set: {len(extremes)} extreme scenarios, {len(samples)} samples")
    return ScenarioSet(boxes=dict(boxes), extremes=extremes, local=local, samples=samples, seed=seed)
