"""
Fitted model objects and confidence intervals.
"""

from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict

from app.models.params import ModelParams


def _nan_to_none(arr: np.ndarray) -> List:
    return [[None if np.isnan(v) else float(v) for v in row] for row in arr]


def _species_rows(names: List[str], a: np.ndarray, r: np.ndarray,
                  sigma2: Optional[np.ndarray] = None) -> List[Dict]:
    rows = []
    for k, name in enumerate(names):
        row = {"species": name, "a": a[k].tolist()}
        row["r"] = float(r[k])
        if sigma2 is not None:
            row["sigma2"] = float(sigma2[k])
        rows.append(row)
    return rows


class SglvFit(BaseModel):
    """Approximate maximum likelihood fit of the stochastic GLV model"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    r_hat: np.ndarray
    a_hat: np.ndarray
    sigma2_hat: np.ndarray
    R_hat: np.ndarray
    loglik: Optional[float] = None  # undefined when some sigma2_hat is 0
    fisher: np.ndarray  # (N, N+1, N+1)
    n_obs: int
    total_time: float
    species: Optional[List[str]] = None

    @property
    def n_species(self) -> int:
        return int(self.r_hat.shape[0])

    @property
    def labels(self) -> List[str]:
        return self.species or [f"x_{k + 1}" for k in range(self.n_species)]

    @property
    def drift_growth(self) -> np.ndarray:
        """Growth term of the log-space drift"""
        return self.R_hat

    def to_params(self) -> ModelParams:
        return ModelParams(r=self.r_hat, a=self.a_hat, sigma=np.sqrt(self.sigma2_hat))

    def to_dict(self) -> Dict:
        return {
            "model": "sglv",
            "species": self.labels,
            "rows": _species_rows(self.labels, self.a_hat, self.r_hat, self.sigma2_hat),
            "r_hat": self.r_hat.tolist(),
            "A_hat": self.a_hat.tolist(),
            "sigma2_hat": self.sigma2_hat.tolist(),
            "R_hat": self.R_hat.tolist(),
            "loglik": self.loglik,
            "fisher": self.fisher.tolist(),
            "n_obs": self.n_obs,
            "total_time": self.total_time,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "SglvFit":
        return cls(
            r_hat=np.asarray(data["r_hat"], dtype=float),
            a_hat=np.asarray(data["A_hat"], dtype=float),
            sigma2_hat=np.asarray(data["sigma2_hat"], dtype=float),
            R_hat=np.asarray(data["R_hat"], dtype=float),
            loglik=data.get("loglik"),
            fisher=np.asarray(data["fisher"], dtype=float),
            n_obs=data["n_obs"],
            total_time=data["total_time"],
            species=data.get("species"),
        )


class GlvFit(BaseModel):
    """Least-squares gradient-matching fit of the deterministic GLV model"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    r_hat: np.ndarray
    a_hat: np.ndarray
    residual_ss: float
    species: Optional[List[str]] = None

    @property
    def n_species(self) -> int:
        return int(self.r_hat.shape[0])

    @property
    def labels(self) -> List[str]:
        return self.species or [f"x_{k + 1}" for k in range(self.n_species)]

    @property
    def drift_growth(self) -> np.ndarray:
        return self.r_hat

    def to_dict(self) -> Dict:
        return {
            "model": "glv",
            "species": self.labels,
            "rows": _species_rows(self.labels, self.a_hat, self.r_hat),
            "r_hat": self.r_hat.tolist(),
            "A_hat": self.a_hat.tolist(),
            "residual_ss": self.residual_ss,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "GlvFit":
        return cls(
            r_hat=np.asarray(data["r_hat"], dtype=float),
            a_hat=np.asarray(data["A_hat"], dtype=float),
            residual_ss=data["residual_ss"],
            species=data.get("species"),
        )


class ConfidenceIntervals(BaseModel):
    """
    Per-species intervals for (r_k, a_k1, ..., a_kN).

    Column 0 is the growth rate, column l is a_kl.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    level: float
    method: str
    estimate: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    status: List[str]  # "ok" or "information_singular" per species
    species: Optional[List[str]] = None
    dropped: int = 0
    replicates: Optional[int] = None

    @property
    def significant(self) -> np.ndarray:
        ok = np.array([s == "ok" for s in self.status])[:, None]
        return ok & ((self.lower > 0) | (self.upper < 0))

    @property
    def half_width(self) -> np.ndarray:
        return (self.upper - self.lower) / 2

    @property
    def labels(self) -> List[str]:
        n = self.estimate.shape[0]
        return self.species or [f"x_{k + 1}" for k in range(n)]

    def network(self, growth: Optional[np.ndarray] = None) -> Dict:
        """
        Significant off-diagonal interactions as an adjacency list.

        Edge ``from -> to`` carries a_{to,from}: the effect of ``from`` on the
        growth of ``to``.
        """
        names = self.labels
        sig = self.significant
        edges = []
        for k, target in enumerate(names):
            for l, source in enumerate(names):
                if k == l or not sig[k, l + 1]:
                    continue
                weight = float(self.estimate[k, l + 1])
                edges.append({
                    "from": source,
                    "to": target,
                    "weight": weight,
                    "sign": "positive" if weight > 0 else "negative",
                })
        nodes = [{"id": name} for name in names]
        if growth is not None:
            for node, g in zip(nodes, growth):
                node["growth_rate"] = float(g)
        return {"level": self.level, "nodes": nodes, "edges": edges}

    def to_dict(self) -> Dict:
        return {
            "level": self.level,
            "method": self.method,
            "species": self.labels,
            "columns": ["r"] + [f"a_{name}" for name in self.labels],
            "estimate": self.estimate.tolist(),
            "lower": _nan_to_none(self.lower),
            "upper": _nan_to_none(self.upper),
            "significant": self.significant.tolist(),
            "status": self.status,
            "dropped": self.dropped,
            "replicates": self.replicates,
        }
