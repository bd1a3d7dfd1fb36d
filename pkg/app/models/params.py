"""
Model parameters and observed time series.
"""

from typing import Dict, List, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from app.core.exceptions import ConfigurationError, DimensionError, IngestError


def _float_array(value, ndim: int, name: str) -> np.ndarray:
    arr = np.array(value, dtype=float)
    if arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


class ModelParams(BaseModel):
    """
    Parameters of the stochastic GLV model.

    dx_k = x_k (r_k + sum_l a_kl x_l) dt + sigma_k x_k dB_k
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    r: np.ndarray
    a: np.ndarray
    sigma: np.ndarray

    @field_validator("r", "sigma", mode="before")
    @classmethod
    def _vector(cls, v, info):
        return _float_array(v, 1, info.field_name)

    @field_validator("a", mode="before")
    @classmethod
    def _matrix(cls, v):
        return _float_array(v, 2, "a")

    @model_validator(mode="after")
    def _check_dimensions(self):
        n = self.r.shape[0]
        if n == 0:
            raise ValueError("at least one species is required")
        if self.a.shape != (n, n):
            raise ValueError(f"a must be {n}x{n}, got {self.a.shape}")
        if self.sigma.shape != (n,):
            raise ValueError(f"sigma must have length {n}, got {self.sigma.shape[0]}")
        if np.any(self.sigma < 0):
            raise ValueError("sigma entries must be non-negative")
        return self

    @property
    def n_species(self) -> int:
        return int(self.r.shape[0])

    @property
    def sigma2(self) -> np.ndarray:
        return self.sigma ** 2

    @property
    def big_r(self) -> np.ndarray:
        """Noise-corrected growth rates R_k = r_k - sigma_k^2 / 2"""
        return self.r - self.sigma2 / 2

    def with_sigma(self, sigma) -> "ModelParams":
        return ModelParams(r=self.r, a=self.a, sigma=sigma)

    def to_dict(self) -> Dict:
        return {
            "r": self.r.tolist(),
            "A": self.a.tolist(),
            "sigma": self.sigma.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "ModelParams":
        try:
            return cls(r=data["r"], a=data["A"], sigma=data["sigma"])
        except KeyError as e:
            raise ConfigurationError(f"parameter document is missing key {e}") from e
        except ValueError as e:
            raise ConfigurationError(f"invalid parameter document: {e}") from e


class ObservationSeries(BaseModel):
    """Positive abundances observed at strictly increasing, possibly irregular, times"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    times: np.ndarray
    values: np.ndarray
    species: Optional[List[str]] = None

    @field_validator("times", mode="before")
    @classmethod
    def _times(cls, v):
        return _float_array(v, 1, "times")

    @field_validator("values", mode="before")
    @classmethod
    def _values(cls, v):
        arr = np.array(v, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        return _float_array(arr, 2, "values")

    @model_validator(mode="after")
    def _check_series(self):
        if self.values.shape[0] != self.times.shape[0]:
            raise ValueError(
                f"{self.times.shape[0]} times but {self.values.shape[0]} rows of values"
            )
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        if np.any(self.values <= 0):
            raise ValueError("values must be strictly positive")
        if self.species is not None and len(self.species) != self.values.shape[1]:
            raise ValueError("species labels do not match the number of columns")
        return self

    @property
    def n_obs(self) -> int:
        return int(self.times.shape[0])

    @property
    def n_species(self) -> int:
        return int(self.values.shape[1])

    @property
    def log_values(self) -> np.ndarray:
        return np.log(self.values)

    @property
    def gaps(self) -> np.ndarray:
        return np.diff(self.times)

    @property
    def total_time(self) -> float:
        return float(self.times[-1] - self.times[0])

    @property
    def labels(self) -> List[str]:
        return self.species or [f"x_{k + 1}" for k in range(self.n_species)]

    def check_species(self, n_species: int) -> None:
        if self.n_species != n_species:
            raise DimensionError(
                f"series has {self.n_species} species, model has {n_species}"
            )

    def to_dataframe(self) -> pd.DataFrame:
        df = pd.DataFrame(self.values, columns=self.labels)
        df.insert(0, "time", self.times)
        return df

    def save_csv(self, file_path: str) -> None:
        """Write ``time,x_1,...,x_N`` with 17 significant digits."""
        self.to_dataframe().to_csv(file_path, index=False, float_format="%.17g")

    @classmethod
    def load_csv(cls, file_path: str) -> "ObservationSeries":
        df = pd.read_csv(file_path, float_precision="round_trip")
        if df.columns[0] != "time":
            raise IngestError(f"{file_path}: first column must be 'time'", line=1)
        numeric = df.apply(pd.to_numeric, errors="coerce")
        bad = numeric.isna().any(axis=1)
        if bad.any():
            raise IngestError(f"{file_path}: non-numeric entry", line=int(bad.idxmax()) + 2)
        try:
            return cls(times=numeric["time"].to_numpy(),
                       values=numeric.iloc[:, 1:].to_numpy(),
                       species=[str(c) for c in df.columns[1:]])
        except ValueError as e:
            raise IngestError(f"{file_path}: {e}") from e
