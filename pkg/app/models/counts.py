"""
Raw taxon count tables.
"""

from typing import Dict, List, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

RANKS = ["kingdom", "phylum", "class", "order", "family", "genus"]


class CountTable(BaseModel):
    """
    Read counts per sample (rows) and taxon (columns).

    ``taxonomy`` maps each taxon id to its lineage kingdom..genus, with empty
    strings for unspecified ranks. ``community_totals`` and ``community_size`` keep
    the per-sample total and the number of taxa of the community as loaded, so
    proportions can be taken relative to the whole community after selection.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    sample_times: np.ndarray
    taxa_ids: List[str]
    counts: np.ndarray
    taxonomy: Dict[str, List[str]]
    community_totals: Optional[np.ndarray] = None
    community_size: Optional[int] = None

    @field_validator("sample_times", mode="before")
    @classmethod
    def _times(cls, v):
        return np.array(v, dtype=float)

    @field_validator("counts", mode="before")
    @classmethod
    def _counts(cls, v):
        arr = np.array(v)
        if arr.ndim != 2:
            raise ValueError("counts must be a matrix")
        if not np.array_equal(arr, np.round(arr)):
            raise ValueError("counts must be integers")
        return arr.astype(np.int64)

    @model_validator(mode="after")
    def _check(self):
        n_samples, n_taxa = self.counts.shape
        if self.sample_times.shape != (n_samples,):
            raise ValueError(f"{self.sample_times.shape[0]} times for {n_samples} samples")
        if len(self.taxa_ids) != n_taxa:
            raise ValueError(f"{len(self.taxa_ids)} taxon ids for {n_taxa} columns")
        if len(set(self.taxa_ids)) != n_taxa:
            raise ValueError("taxon ids must be unique")
        if np.any(self.counts < 0):
            raise ValueError("counts must be non-negative")
        if np.any(np.diff(self.sample_times) <= 0):
            raise ValueError("sample times must be strictly increasing")
        missing = [t for t in self.taxa_ids if t not in self.taxonomy]
        if missing:
            raise ValueError(f"taxonomy does not cover {missing}")
        if self.community_totals is None:
            self.community_totals = self.counts.sum(axis=1)
        if self.community_size is None:
            self.community_size = n_taxa
        return self

    @property
    def shape(self):
        return self.counts.shape

    @property
    def totals(self) -> np.ndarray:
        """Total count of each taxon over all samples"""
        return self.counts.sum(axis=0)

    def lineage(self, taxon_id: str) -> List[str]:
        return self.taxonomy[taxon_id]

    def to_dataframe(self) -> pd.DataFrame:
        df = pd.DataFrame(self.counts, columns=self.taxa_ids)
        df.insert(0, "time", self.sample_times)
        return df

    def derive(self, **changes) -> "CountTable":
        """Copy with some fields replaced, keeping the community totals."""
        fields = {
            "sample_times": self.sample_times,
            "taxa_ids": self.taxa_ids,
            "counts": self.counts,
            "taxonomy": self.taxonomy,
            "community_totals": self.community_totals,
            "community_size": self.community_size,
        }
        fields.update(changes)
        return CountTable(**fields)
