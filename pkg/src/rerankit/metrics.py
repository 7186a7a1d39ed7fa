"""Retrieval evaluation: per-query ranking, junk filtering, CMC and mAP.

Follows the standard cross-camera protocol: for each query, gallery
samples sharing both its identity and its camera are removed before
scoring, and queries left with no positives are excluded (and counted).
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SampleLabels:
    """Identity and camera ids for a set of samples, in sample order."""

    pids: np.ndarray
    camids: np.ndarray

    def __post_init__(self):
        pids = np.asarray(self.pids, dtype=np.int64)
        camids = np.asarray(self.camids, dtype=np.int64)
        if pids.ndim != 1 or camids.ndim != 1 or pids.shape != camids.shape:
            raise ValueError("pids and camids must be 1-D arrays of equal length")
        if pids.size and (pids.min() < 0 or camids.min() < 0):
            raise ValueError("pids and camids must be non-negative")
        object.__setattr__(self, "pids", pids)
        object.__setattr__(self, "camids", camids)

    def __len__(self) -> int:
        return int(self.pids.shape[0])


@dataclass(frozen=True)
class EvalReport:
    """CMC curve (ranks 1..R), mAP, and the number of scored queries."""

    cmc: np.ndarray
    mean_ap: float
    num_valid_queries: int

    def __post_init__(self):
        cmc = np.asarray(self.cmc, dtype=np.float64)
        if np.any(np.diff(cmc) < 0):
            raise ValueError("CMC curve must be non-decreasing")
        if not 0.0 <= self.mean_ap <= 1.0:
            raise ValueError(f"mAP must lie in [0, 1], got {self.mean_ap}")
        object.__setattr__(self, "cmc", cmc)

    @property
    def rank1(self) -> float:
        return float(self.cmc[0]) if self.cmc.size else 0.0

    def to_json_dict(self, config: dict | None = None) -> dict:
        return {
            "cmc": [float(v) for v in self.cmc],
            "mAP": float(self.mean_ap),
            "valid_queries": int(self.num_valid_queries),
            "config": dict(config or {}),
        }


def rank_gallery(distance_row) -> np.ndarray:
    """Gallery indices sorted by ascending distance, ties by ascending index."""
    row = np.asarray(distance_row, dtype=np.float64)
    if row.ndim != 1:
        raise ValueError(f"expected a 1-D distance row, got ndim={row.ndim}")
    if np.isnan(row).any():
        raise ValueError("distance row contains NaN")
    return np.argsort(row, kind="stable")


def average_precision(ranked_matches) -> float:
    """AP of a ranked binary match vector: mean of precision at each hit.

    Raises:
        ValueError: if the vector contains no positive entry; such
            queries must be excluded by the caller, not scored as zero.
    """
    matches = np.asarray(ranked_matches, dtype=bool)
    positions = np.flatnonzero(matches)
    if positions.size == 0:
        raise ValueError("no positive match in ranking; query must be excluded")
    hits = np.arange(1, positions.size + 1, dtype=np.float64)
    return float(np.mean(hits / (positions + 1.0)))


def evaluate(
    distances,
    query_labels: SampleLabels,
    gallery_labels: SampleLabels,
    max_rank: int = 50,
) -> EvalReport:
    """Score a query-gallery distance matrix with CMC and mAP.

    For each query row, the gallery is ranked ascending (ties by index),
    same-pid/same-camid entries are dropped, and the query contributes to
    CMC/mAP if at least one positive remains.

    Args:
        distances: (Nq, Ng) finite matrix; only ordering matters.
        query_labels / gallery_labels: per-sample pid and camid.
        max_rank: CMC curve length (clamped to the gallery size).

    Returns:
        EvalReport.

    Raises:
        ValueError: shape/label mismatch, NaN distances, or no valid query.
    """
    dist = np.asarray(distances, dtype=np.float64)
    if dist.ndim != 2:
        raise ValueError(f"distance matrix must be 2-D, got ndim={dist.ndim}")
    num_q, num_g = dist.shape
    if len(query_labels) != num_q:
        raise ValueError(
            f"query label count {len(query_labels)} != distance rows {num_q}"
        )
    if len(gallery_labels) != num_g:
        raise ValueError(
            f"gallery label count {len(gallery_labels)} != distance cols {num_g}"
        )
    if max_rank < 1:
        raise ValueError(f"max_rank must be >= 1, got {max_rank}")
    if np.isnan(dist).any():
        raise ValueError("distance matrix contains NaN")
    num_ranks = min(max_rank, num_g)

    order = np.argsort(dist, axis=1, kind="stable")
    g_pids = gallery_labels.pids
    g_camids = gallery_labels.camids

    first_hit_counts = np.zeros(num_ranks, dtype=np.int64)
    ap_values = []
    for qi in range(num_q):
        ranked = order[qi]
        same_pid = g_pids[ranked] == query_labels.pids[qi]
        junk = same_pid & (g_camids[ranked] == query_labels.camids[qi])
        matches = same_pid[~junk]
        positions = np.flatnonzero(matches)
        if positions.size == 0:
            continue  # no cross-camera positive: excluded from both metrics
        if positions[0] < num_ranks:
            first_hit_counts[positions[0]] += 1
        hits = np.arange(1, positions.size + 1, dtype=np.float64)
        ap_values.append(np.mean(hits / (positions + 1.0)))

    num_valid = len(ap_values)
    if num_valid == 0:
        raise ValueError("no valid query: every query lacks a cross-camera positive")
    cmc = np.cumsum(first_hit_counts) / num_valid
    return EvalReport(
        cmc=cmc, mean_ap=float(np.mean(ap_values)), num_valid_queries=num_valid
    )
