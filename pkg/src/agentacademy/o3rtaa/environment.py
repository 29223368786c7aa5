"""Synthetic sensor network standing in for the monitoring stations.

Each station carries a latent regime per variable (low / normal / high)
that follows a seeded Markov chain. Readings are drawn uniformly from the
regime's configured range, so with no faults the discretized reading
equals the regime.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from ..mining import CATEGORIES
from .config import ScenarioConfig

__all__ = ["SensorReading", "EnvironmentModel", "Station"]


@dataclass(frozen=True)
class Station:
    station_id: str
    location: str


@dataclass(frozen=True)
class SensorReading:
    tick: int
    station: str
    location: str
    variable: str
    value: float
    faulty: bool = False


class EnvironmentModel:
    def __init__(self, config: ScenarioConfig):
        self.config = config
        self.seed = config.seed
        self.variables = tuple(sorted(config.variables))
        width = len(str(config.stations))
        self.stations = tuple(
            Station(f"s{i + 1:0{width}d}", config.locations[i % len(config.locations)])
            for i in range(config.stations)
        )
        init = random.Random(self._seed_for(-1, 0))
        self._regimes: list[dict[tuple[str, str], str]] = [{
            (s.station_id, v): init.choice(CATEGORIES) for s in self.stations for v in self.variables
        }]

    def _seed_for(self, tick: int, stream: int) -> int:
        return (self.seed * 1_000_003 + (tick + 1)) * 4 + stream

    def regimes_at(self, tick: int) -> dict[tuple[str, str], str]:
        """Latent regimes at ``tick``; computed forward once and memoized."""
        if tick < 0:
            raise ValueError("tick must be >= 0")
        stay = self.config.regime_stay
        while len(self._regimes) <= tick:
            t = len(self._regimes)
            rng = random.Random(self._seed_for(t, 1))
            prev = self._regimes[-1]
            nxt = {}
            for key, regime in prev.items():
                if rng.random() < stay:
                    nxt[key] = regime
                else:
                    nxt[key] = rng.choice([c for c in CATEGORIES if c != regime])
            self._regimes.append(nxt)
        return self._regimes[tick]

    def band(self, variable: str, regime: str) -> tuple[float, float]:
        return self.config.variables[variable].ranges[regime]

    def generate_tick(self, tick: int) -> list[SensorReading]:
        """One reading per (station, variable); deterministic in (seed, tick)."""
        regimes = self.regimes_at(tick)
        rng = random.Random(self._seed_for(tick, 2))
        fault_prob = self.config.fault_prob
        out = []
        for s in self.stations:
            for v in self.variables:
                a, b = self.band(v, regimes[(s.station_id, v)])
                value = round(rng.uniform(a, b), 2)
                faulty = rng.random() < fault_prob
                if faulty:
                    lo, hi = self.config.variables[v].bounds
                    span = hi - lo
                    value = round(hi + span * rng.uniform(1.0, 3.0) if rng.random() < 0.5
                                  else lo - span * rng.uniform(1.0, 3.0), 2)
                out.append(SensorReading(tick, s.station_id, s.location, v, value, faulty))
        return out
