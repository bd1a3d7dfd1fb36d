"""
Configuration and results of the Monte Carlo and cross-validation studies.
"""

from typing import Dict, List, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.models.params import ModelParams
from app.models.simulation import SamplingSchedule
from config.config import Config

CASE1_R = [1.0, 1.5, 2.0, 1.5, 2.0]
CASE1_A = [
    [-2.0, -2.5, -2.0, 1.0, 1.0],
    [1.0, -6.0, -2.0, 3.0, -1.0],
    [-1.0, -2.0, -5.0, 1.0, -1.0],
    [-1.0, 0.5, 0.1, -10.0, 1.0],
    [-1.5, -2.0, -2.0, 2.0, -9.0],
]
CASE1_X0 = [0.5, 0.15, 0.13, 0.05, 0.04]


def case1_params() -> ModelParams:
    return ModelParams(r=CASE1_R, a=CASE1_A, sigma=[0.1] * 5)


def case2_params() -> ModelParams:
    """Case 1 with unit diffusion"""
    return ModelParams(r=CASE1_R, a=CASE1_A, sigma=[1.0] * 5)


class McConfig(BaseModel):
    """Monte Carlo study over one parameter setting and several sample sizes"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    case_name: str = "case1"
    params: ModelParams = Field(default_factory=case1_params)
    schedule: SamplingSchedule = Field(default_factory=SamplingSchedule)
    x0: List[float] = Field(default_factory=lambda: list(CASE1_X0))
    n_obs: List[int] = Field(default_factory=lambda: [300, 500, 1000])
    replicates: int = Field(default_factory=lambda: Config.MC_REPLICATES)
    seed: int = Field(default_factory=lambda: Config.DEFAULT_SEED)
    fine_dt: float = Field(default_factory=lambda: Config.FINE_DT)

    @model_validator(mode="after")
    def _check(self):
        if self.replicates < 1:
            raise ValueError("replicates must be at least 1")
        if len(self.x0) != self.params.n_species:
            raise ValueError("x0 length does not match the number of species")
        if not self.n_obs or min(self.n_obs) < 2:
            raise ValueError("n_obs values must be at least 2")
        return self

    @classmethod
    def case(cls, name: str, **overrides) -> "McConfig":
        presets = {"case1": case1_params, "case2": case2_params}
        if name not in presets:
            raise ValueError(f"unknown case {name!r}; expected one of {sorted(presets)}")
        return cls(case_name=name, params=presets[name](), **overrides)

    def to_dict(self) -> Dict:
        return {
            "case_name": self.case_name,
            "params": self.params.to_dict(),
            "schedule": self.schedule.to_dict(),
            "x0": self.x0,
            "n_obs": self.n_obs,
            "replicates": self.replicates,
            "seed": self.seed,
            "fine_dt": self.fine_dt,
        }


class EstimatorErrors(BaseModel):
    """Mean squared errors and their standard errors for one estimator"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    a_mse: np.ndarray
    a_se: np.ndarray
    r_mse: np.ndarray
    r_se: np.ndarray
    sigma2_mse: Optional[np.ndarray] = None
    sigma2_se: Optional[np.ndarray] = None

    @classmethod
    def from_squared_errors(cls, a_sq: np.ndarray, r_sq: np.ndarray,
                            sigma2_sq: Optional[np.ndarray] = None) -> "EstimatorErrors":
        """Aggregate stacked per-replicate squared errors (replicates on axis 0)."""
        def mse_se(sq):
            count = sq.shape[0]
            sd = sq.std(axis=0, ddof=1) if count > 1 else np.zeros(sq.shape[1:])
            return sq.mean(axis=0), sd / np.sqrt(count)

        a_mse, a_se = mse_se(a_sq)
        r_mse, r_se = mse_se(r_sq)
        s_mse = s_se = None
        if sigma2_sq is not None:
            s_mse, s_se = mse_se(sigma2_sq)
        return cls(a_mse=a_mse, a_se=a_se, r_mse=r_mse, r_se=r_se,
                   sigma2_mse=s_mse, sigma2_se=s_se)


class McBlock(BaseModel):
    """Results for one (case, n) pair"""
    case_name: str
    n_obs: int
    replicates: int
    used: int
    failures: Dict[str, int] = Field(default_factory=dict)
    sglv: Optional[EstimatorErrors] = None
    glv: Optional[EstimatorErrors] = None

    @property
    def failed(self) -> int:
        return sum(self.failures.values())

    def drift_wins(self) -> int:
        """Number of interaction entries where SGLV has MSE no larger than GLV."""
        return int(np.sum(self.sglv.a_mse <= self.glv.a_mse))

    def growth_wins(self) -> int:
        return int(np.sum(self.sglv.r_mse <= self.glv.r_mse))

    def rows(self) -> List[Dict]:
        if self.sglv is None:
            return []
        n = self.sglv.r_mse.shape[0]
        rows = []

        def add(name, sglv_mse, sglv_se, glv_mse=None, glv_se=None):
            rows.append({
                "case": self.case_name, "n_obs": self.n_obs, "parameter": name,
                "sglv_mse": sglv_mse, "sglv_se": sglv_se,
                "glv_mse": glv_mse, "glv_se": glv_se,
                "replicates_used": self.used,
            })

        for k in range(n):
            for l in range(n):
                add(f"a_{k + 1}{l + 1}", self.sglv.a_mse[k, l], self.sglv.a_se[k, l],
                    self.glv.a_mse[k, l], self.glv.a_se[k, l])
        for k in range(n):
            add(f"r_{k + 1}", self.sglv.r_mse[k], self.sglv.r_se[k],
                self.glv.r_mse[k], self.glv.r_se[k])
        for k in range(n):
            add(f"sigma2_{k + 1}", self.sglv.sigma2_mse[k], self.sglv.sigma2_se[k])
        return rows

    def render(self) -> str:
        """Console table: per species, a_k1..a_kN, r_k and sigma2_k as MSE(se)."""
        if self.sglv is None:
            return f"{self.case_name}, n={self.n_obs}: no successful replicates"
        n = self.sglv.r_mse.shape[0]
        lines = [f"{self.case_name}, n={self.n_obs}, {self.used} replicates "
                 f"({self.failed} failed)"]
        for k in range(n):
            header = [f"a_{k + 1}{l + 1}" for l in range(n)] + [f"r_{k + 1}", f"sigma2_{k + 1}"]
            lines.append("        " + " ".join(f"{h:>16}" for h in header))
            for label, err in (("GLV", self.glv), ("SGLV", self.sglv)):
                cells = [f"{err.a_mse[k, l]:.3f}({err.a_se[k, l]:.3f})" for l in range(n)]
                cells.append(f"{err.r_mse[k]:.3f}({err.r_se[k]:.3f})")
                if err.sigma2_mse is not None:
                    cells.append(f"{err.sigma2_mse[k]:.3g}({err.sigma2_se[k]:.3g})")
                else:
                    cells.append("-")
                lines.append(f"{label:>6}  " + " ".join(f"{c:>16}" for c in cells))
        return "\n".join(lines)


class McResult(BaseModel):
    """Monte Carlo MSE tables, one block per sample size"""
    config: McConfig
    blocks: List[McBlock] = Field(default_factory=list)

    def block(self, n_obs: int) -> McBlock:
        for b in self.blocks:
            if b.n_obs == n_obs:
                return b
        raise KeyError(n_obs)

    def to_dataframe(self) -> pd.DataFrame:
        return pd.DataFrame([row for b in self.blocks for row in b.rows()])

    def to_dict(self) -> Dict:
        return {
            "config": self.config.to_dict(),
            "blocks": [
                {
                    "case": b.case_name,
                    "n_obs": b.n_obs,
                    "replicates": b.replicates,
                    "used": b.used,
                    "failures": b.failures,
                    "rows": b.rows(),
                }
                for b in self.blocks
            ],
        }

    def render(self) -> str:
        return "\n\n".join(b.render() for b in self.blocks)


class MspeRow(BaseModel):
    k: int
    n_splits: int
    splits_used: int
    splits_dropped: int
    sglv_mean: float
    sglv_se: float
    glv_mean: float
    glv_se: float


class MspeResult(BaseModel):
    """Cross-validated one-step mean squared prediction errors per k"""
    rows: List[MspeRow] = Field(default_factory=list)

    @property
    def k_values(self) -> List[int]:
        return [row.k for row in self.rows]

    def row(self, k: int) -> MspeRow:
        for r in self.rows:
            if r.k == k:
                return r
        raise KeyError(k)

    def to_dataframe(self) -> pd.DataFrame:
        return pd.DataFrame([r.model_dump() for r in self.rows])

    def to_dict(self) -> Dict:
        return {"rows": [r.model_dump() for r in self.rows]}
