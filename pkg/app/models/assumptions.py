"""
Reports produced by the four stability-assumption checks.
"""

import json
from typing import Dict, List, Optional

from pydantic import BaseModel, Field


class PhiInterval(BaseModel):
    """Feasible set of phi, a sub-interval of [4, inf)"""
    lower: float
    upper: Optional[float] = None  # None means unbounded above
    lower_closed: bool = True

    def contains(self, phi: float) -> bool:
        above = phi >= self.lower if self.lower_closed else phi > self.lower
        below = self.upper is None or phi < self.upper
        return above and below

    def to_dict(self) -> Dict:
        return {
            "lower": self.lower,
            "upper": self.upper,  # null: unbounded
            "lower_closed": self.lower_closed,
            "upper_closed": False,
        }


class A1Report(BaseModel):
    passed: bool
    sym_max_eig: float
    x0_positive: bool
    sigma_positive: bool
    growth_positive: bool
    tolerance: float


class A2Report(BaseModel):
    passed: bool
    phi_interval: Optional[PhiInterval] = None


class A3Report(BaseModel):
    passed: bool
    status: str = "evaluated"  # or "equilibrium_undefined"
    x_tilde: Optional[List[float]] = None


class A4Report(BaseModel):
    passed: bool
    status: str = "evaluated"  # "not_evaluated", "solver_failure"
    c_witness: Optional[List[float]] = None
    margin: Optional[float] = None


class AssumptionReport(BaseModel):
    """Pass/fail for Assumptions 1-4 with their numeric witnesses"""
    a1: A1Report
    a2: A2Report
    a3: A3Report
    a4: A4Report
    notes: List[str] = Field(default_factory=list)

    @property
    def a1_pass(self) -> bool:
        return self.a1.passed

    @property
    def a2_pass(self) -> bool:
        return self.a2.passed

    @property
    def a3_pass(self) -> bool:
        return self.a3.passed

    @property
    def a4_pass(self) -> bool:
        return self.a4.passed

    @property
    def all_pass(self) -> bool:
        return self.a1_pass and self.a2_pass and self.a3_pass and self.a4_pass

    def to_dict(self) -> Dict:
        return {
            "a1_pass": self.a1.passed,
            "a2_pass": self.a2.passed,
            "a3_pass": self.a3.passed,
            "a4_pass": self.a4.passed,
            "sym_max_eig": self.a1.sym_max_eig,
            "psd_tolerance": self.a1.tolerance,
            "phi_interval": self.a2.phi_interval.to_dict() if self.a2.phi_interval else None,
            "a3_status": self.a3.status,
            "x_tilde": self.a3.x_tilde,
            "a4_status": self.a4.status,
            "c_witness": self.a4.c_witness,
            "a4_margin": self.a4.margin,
            "notes": self.notes,
        }

    def save_to_file(self, file_path: str) -> None:
        with open(file_path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)
