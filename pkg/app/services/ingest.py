"""
Count-table pipeline: load, aggregate by rank, keep the most abundant taxa and
turn counts into the positive proportion series the estimators consume.
"""

import logging
import re
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from app.core.exceptions import IngestError
from app.models.counts import RANKS, CountTable
from app.models.params import ObservationSeries
from config.config import Config

logger = logging.getLogger(__name__)

UNSPECIFIED_SUFFIX = " (unsp.)"
UNASSIGNED = "Unassigned"


def _read_csv(path: str, **kwargs) -> pd.DataFrame:
    try:
        return pd.read_csv(path, dtype=str, keep_default_na=False, **kwargs)
    except pd.errors.ParserError as e:
        match = re.search(r"line (\d+)", str(e))
        raise IngestError(f"{path}: malformed row",
                          line=int(match.group(1)) if match else None) from e
    except pd.errors.EmptyDataError as e:
        raise IngestError(f"{path}: file is empty", line=1) from e


def _load_taxonomy(path: str) -> Dict[str, List[str]]:
    df = _read_csv(path)
    expected = ["taxon_id"] + RANKS
    if list(df.columns) != expected:
        raise IngestError(f"{path}: header must be {','.join(expected)}", line=1)
    taxonomy = {}
    for row, record in enumerate(df.itertuples(index=False), start=2):
        taxon_id = record[0].strip()
        if not taxon_id:
            raise IngestError(f"{path}: empty taxon_id", line=row)
        if taxon_id in taxonomy:
            raise IngestError(f"{path}: duplicate taxon_id {taxon_id!r}", line=row)
        taxonomy[taxon_id] = [str(v).strip() for v in record[1:]]
    return taxonomy


def load_counts_csv(counts_path: str, taxonomy_path: Optional[str] = None) -> CountTable:
    """
    Parse ``time,<taxon_1>,...`` counts and a ``taxon_id,kingdom,...,genus`` taxonomy.

    Rows are sorted by time. Without a taxonomy file every rank is unspecified.

    Raises:
        IngestError: on a malformed row, a non-integer or negative count, a duplicate
            sample time or a taxon missing from the taxonomy; line numbers are 1-based
            and count the header
    """
    df = _read_csv(counts_path)
    if len(df.columns) < 2 or df.columns[0] != "time":
        raise IngestError(f"{counts_path}: header must be time,<taxon_id>,...", line=1)
    if df.empty:
        raise IngestError(f"{counts_path}: no samples", line=2)

    taxa_ids = [str(c).strip() for c in df.columns[1:]]
    numeric = df.apply(pd.to_numeric, errors="coerce")
    for row in range(len(df)):
        line = row + 2
        values = numeric.iloc[row]
        if values.isna().any():
            column = values.index[values.isna().to_numpy()][0]
            raise IngestError(f"{counts_path}: non-numeric value in column {column!r}",
                              line=line)
        counts = values.iloc[1:].to_numpy(dtype=float)
        if np.any(counts < 0):
            raise IngestError(f"{counts_path}: negative count", line=line)
        if not np.array_equal(counts, np.round(counts)):
            raise IngestError(f"{counts_path}: counts must be integers", line=line)

    duplicated = numeric["time"].duplicated()
    if duplicated.any():
        line = int(np.flatnonzero(duplicated.to_numpy())[0]) + 2
        raise IngestError(f"{counts_path}: duplicate sample time", line=line)

    numeric = numeric.sort_values("time", kind="mergesort")
    if taxonomy_path is None:
        taxonomy = {t: [""] * len(RANKS) for t in taxa_ids}
    else:
        taxonomy = _load_taxonomy(taxonomy_path)
        missing = [t for t in taxa_ids if t not in taxonomy]
        if missing:
            raise IngestError(f"{taxonomy_path}: no lineage for taxa {missing}")
        taxonomy = {t: taxonomy[t] for t in taxa_ids}

    table = CountTable(sample_times=numeric["time"].to_numpy(),
                       taxa_ids=taxa_ids,
                       counts=numeric.iloc[:, 1:].to_numpy(dtype=float),
                       taxonomy=taxonomy)
    logger.info("loaded %d samples of %d taxa from %s", *table.shape, counts_path)
    return table


def group_name(lineage: List[str], level: str) -> str:
    """
    Label of the group a lineage falls into at ``level``.

    A missing rank is named after the deepest specified ancestor, e.g.
    ``Bacteroidales (unsp.)`` for a family-less member of that order.
    """
    depth = RANKS.index(level)
    if lineage[depth]:
        return lineage[depth]
    for name in reversed(lineage[:depth]):
        if name:
            return name + UNSPECIFIED_SUFFIX
    return UNASSIGNED


def aggregate_taxa(table: CountTable, level: str) -> CountTable:
    """Sum the counts of taxa that share a group at ``level``."""
    if level not in RANKS:
        raise ValueError(f"unknown rank {level!r}; expected one of {RANKS}")
    depth = RANKS.index(level)
    groups = [group_name(table.lineage(t), level) for t in table.taxa_ids]

    df = pd.DataFrame(table.counts, columns=table.taxa_ids)
    collapsed = df.T.groupby(groups, sort=True).sum().T

    taxonomy = {}
    for taxon, group in zip(table.taxa_ids, groups):
        if group not in taxonomy:
            lineage = list(table.lineage(taxon)[:depth]) + [group]
            taxonomy[group] = lineage + [""] * (len(RANKS) - len(lineage))
    names = [str(c) for c in collapsed.columns]
    logger.debug("aggregated %d taxa into %d %s groups", len(groups), len(names), level)
    return table.derive(taxa_ids=names,
                        counts=collapsed.to_numpy(dtype=np.int64),
                        taxonomy={n: taxonomy[n] for n in names})


def select_top_k(table: CountTable, k: int) -> CountTable:
    """
    Keep the ``k`` taxa with the largest total counts, ties broken by name.

    The kept taxa stay in their original column order; the rest are dropped.
    """
    n_taxa = table.shape[1]
    if not 1 <= k <= n_taxa:
        raise ValueError(f"k must lie in [1, {n_taxa}], got {k}")
    totals = table.totals
    ranked = sorted(range(n_taxa), key=lambda j: (-int(totals[j]), table.taxa_ids[j]))
    keep = sorted(ranked[:k])
    names = [table.taxa_ids[j] for j in keep]
    return table.derive(taxa_ids=names,
                        counts=table.counts[:, keep],
                        taxonomy={n: table.taxonomy[n] for n in names})


def filter_time_range(table: CountTable, t_min: Optional[float] = None,
                      t_max: Optional[float] = None) -> CountTable:
    """Samples with ``t_min <= time <= t_max``; either bound may be omitted."""
    mask = np.ones(table.shape[0], dtype=bool)
    if t_min is not None:
        mask &= table.sample_times >= t_min
    if t_max is not None:
        mask &= table.sample_times <= t_max
    if not mask.any():
        raise IngestError(f"no samples in the time range [{t_min}, {t_max}]")
    return table.derive(sample_times=table.sample_times[mask],
                        counts=table.counts[mask],
                        community_totals=table.community_totals[mask])


def to_proportions(table: CountTable, pseudocount: Optional[float] = None,
                   renormalize: str = "top") -> ObservationSeries:
    """
    Proportions (count + pseudocount) / total per sample.

    ``renormalize="top"`` divides by the total over the retained taxa so each row
    sums to 1; ``"full"`` divides by the community total as loaded, with the
    pseudocount added for every taxon of the community.

    Raises:
        IngestError: if a proportion would be zero
    """
    pseudocount = Config.DEFAULT_PSEUDOCOUNT if pseudocount is None else pseudocount
    if pseudocount < 0:
        raise ValueError("pseudocount must be non-negative")
    shifted = table.counts.astype(float) + pseudocount
    if renormalize == "top":
        denominator = shifted.sum(axis=1)
    elif renormalize == "full":
        denominator = table.community_totals + pseudocount * table.community_size
    else:
        raise ValueError(f"renormalize must be 'top' or 'full', got {renormalize!r}")

    empty = np.flatnonzero(denominator <= 0)
    if empty.size:
        raise IngestError(f"sample at time {table.sample_times[empty[0]]:g} has zero total; "
                          "use a positive pseudocount")
    values = shifted / denominator[:, None]
    zero = np.argwhere(values <= 0)
    if zero.size:
        i, j = zero[0]
        raise IngestError(f"taxon {table.taxa_ids[j]!r} has zero count at time "
                          f"{table.sample_times[i]:g}; use a positive pseudocount")
    return ObservationSeries(times=table.sample_times, values=values, species=table.taxa_ids)
