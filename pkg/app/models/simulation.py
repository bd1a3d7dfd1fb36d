"""
Simulation settings: the observation-gap distribution and the fine Euler grid.
"""

from typing import Dict, List

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from config.config import Config


class SamplingSchedule(BaseModel):
    """Observation gaps drawn i.i.d. from a finite distribution"""
    gaps: List[float] = Field(default_factory=lambda: [0.1, 0.3, 0.5])
    probs: List[float] = Field(default_factory=lambda: [0.7, 0.2, 0.1])
    n_obs: int = 1000

    @model_validator(mode="after")
    def _check(self):
        if len(self.gaps) != len(self.probs) or not self.gaps:
            raise ValueError("gaps and probs must be non-empty and of equal length")
        if any(g <= 0 for g in self.gaps):
            raise ValueError("gaps must be positive")
        if any(p < 0 for p in self.probs):
            raise ValueError("probs must be non-negative")
        if abs(sum(self.probs) - 1.0) > 1e-12:
            raise ValueError(f"probs must sum to 1, got {sum(self.probs)!r}")
        if self.n_obs < 2:
            raise ValueError("n_obs must be at least 2")
        return self

    def with_n_obs(self, n_obs: int) -> "SamplingSchedule":
        return SamplingSchedule(gaps=self.gaps, probs=self.probs, n_obs=n_obs)

    def to_dict(self) -> Dict:
        return {"gaps": self.gaps, "probs": self.probs, "n_obs": self.n_obs}


class SimConfig(BaseModel):
    """Fine Euler step, initial state and random stream of one simulated path"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    x0: np.ndarray
    fine_dt: float = Field(default_factory=lambda: Config.FINE_DT)
    seed: int = Field(default_factory=lambda: Config.DEFAULT_SEED)
    stream_id: int = 0

    @field_validator("x0", mode="before")
    @classmethod
    def _x0(cls, v):
        arr = np.array(v, dtype=float)
        if arr.ndim != 1 or not np.all(np.isfinite(arr)):
            raise ValueError("x0 must be a finite vector")
        if np.any(arr <= 0):
            raise ValueError("x0 must be strictly positive")
        return arr

    @model_validator(mode="after")
    def _check(self):
        if self.fine_dt <= 0:
            raise ValueError("fine_dt must be positive")
        return self

    def steps_for(self, duration: float) -> int:
        """Number of fine steps covering ``duration``; it must be a whole multiple."""
        steps = round(duration / self.fine_dt)
        if abs(steps * self.fine_dt - duration) > 1e-9:
            raise ValueError(
                f"duration {duration!r} is not a multiple of fine_dt {self.fine_dt!r}"
            )
        return int(steps)

    def to_dict(self) -> Dict:
        return {
            "x0": self.x0.tolist(),
            "fine_dt": self.fine_dt,
            "seed": self.seed,
            "stream_id": self.stream_id,
        }


class FineTrajectory(BaseModel):
    """Log-abundance path on the fine Euler grid"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    times: np.ndarray
    log_values: np.ndarray

    @property
    def values(self) -> np.ndarray:
        return np.exp(self.log_values)
