"""Distances between bucket histograms and bootstrap variance bands.

Two complementary metrics: position-weighted Kendall's tau compares the
count-descending bucket rankings (rank sensitive, weight 1/i at reference
position i), and Hellinger distance compares the normalized distributions
(rank insensitive, in [0, 1]).  A bootstrap band resamples the original
histogram and reports the 2.5th percentile, mean, and 97.5th percentile of
the resample distances, the natural-variation yardstick against which a
repair or release is judged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from .errors import ConfigError, DataError, EmptyInputError
from .histogram import Histogram, check_same_schema, support_union
from .rng import substream

METRIC_IDS = ("pwkt", "hellinger")
WEIGHTINGS = ("harmonic", "exponential")


@dataclass(frozen=True)
class Band:
    p2_5: float
    mean: float
    p97_5: float

    def to_json_obj(self) -> dict:
        return {"p2_5": self.p2_5, "mean": self.mean, "p97_5": self.p97_5}


@dataclass(frozen=True)
class DistanceReport:
    """Metric values for a pair of histograms plus band and baseline context."""

    pwkt: float
    hellinger: float
    band: dict[str, Band]
    baseline: dict[str, float] | None
    replicates: int
    seed: int

    def to_json_obj(self) -> dict:
        return {
            "pwkt": self.pwkt,
            "hellinger": self.hellinger,
            "band": {name: b.to_json_obj() for name, b in self.band.items()},
            "baseline": dict(self.baseline) if self.baseline is not None else None,
            "replicates": self.replicates,
            "seed": self.seed,
        }


def percentile(values, pct: float) -> float:
    """Percentile with linear interpolation at rank 1 + pct/100 * (m - 1)."""
    return float(np.percentile(np.asarray(values, dtype=float), pct))


def _position_weights(m: int, weighting: str) -> np.ndarray:
    if weighting == "harmonic":
        return 1.0 / np.arange(1, m + 1)
    if weighting == "exponential":
        return np.power(0.5, np.arange(m))
    raise ConfigError(f"unknown weighting {weighting!r}; expected one of {WEIGHTINGS}")


def _inversion_participation(sigma) -> list[int]:
    """How many inversions each position takes part in.

    sigma must be a permutation of 1..m.  Two Fenwick passes over sigma
    values count, for every position, the earlier elements that are larger
    and the later elements that are smaller; each position pays O(log m).
    """
    m = len(sigma)
    counts = [0] * m
    tree = [0] * (m + 1)
    inserted = 0
    for j in range(m):
        s = int(sigma[j])
        i = s
        n_le = 0
        while i > 0:
            n_le += tree[i]
            i -= i & (-i)
        counts[j] += inserted - n_le
        i = s
        while i <= m:
            tree[i] += 1
            i += i & (-i)
        inserted += 1
    tree = [0] * (m + 1)
    for j in range(m - 1, -1, -1):
        s = int(sigma[j])
        i = s - 1
        n_lt = 0
        while i > 0:
            n_lt += tree[i]
            i -= i & (-i)
        counts[j] += n_lt
        i = s
        while i <= m:
            tree[i] += 1
            i += i & (-i)
    return counts


def _weighted_inversions(sigma, weights) -> float:
    """Sum of (w_i + w_j)/2 over pairs i < j with sigma[i] > sigma[j].

    Each pair's cost splits as half its two position weights, so the total
    is half the exactly-rounded sum of weight * inversion-participation per
    position: the counts are exact integers and every term is rounded once.
    """
    counts = _inversion_participation(sigma)
    return 0.5 * math.fsum(float(weights[k]) * counts[k] for k in range(len(counts)) if counts[k])


def _ranking_sigma(ref_counts: np.ndarray, other_counts: np.ndarray, key_rank: np.ndarray) -> np.ndarray:
    """Positions in the `other` ranking of the items in reference order.

    Both rankings sort by (count descending, key ascending); the arrays are
    assumed to be aligned to the reference ranking already, with key_rank
    giving each item's lexicographic rank among the union keys.
    """
    m = len(ref_counts)
    order_ref = np.lexsort((key_rank, -ref_counts))
    order_other = np.lexsort((key_rank, -other_counts))
    rank_other = np.empty(m, dtype=np.int64)
    rank_other[order_other] = np.arange(1, m + 1)
    return rank_other[order_ref]


def _pwkt_from_vectors(
    ref_counts: np.ndarray,
    other_counts: np.ndarray,
    key_rank: np.ndarray,
    weighting: str = "harmonic",
) -> float:
    m = len(ref_counts)
    if m <= 1:
        return 0.0
    sigma = _ranking_sigma(ref_counts, other_counts, key_rank)
    return _weighted_inversions(sigma, _position_weights(m, weighting))


def _union_vectors(h1: Histogram, h2: Histogram):
    keys = support_union(h1, h2)
    c1 = np.array([h1.get(k, 0) for k in keys], dtype=float)
    c2 = np.array([h2.get(k, 0) for k in keys], dtype=float)
    order = sorted(range(len(keys)), key=lambda i: keys[i])
    key_rank = np.empty(len(keys), dtype=np.int64)
    for rank, i in enumerate(order):
        key_rank[i] = rank
    return keys, c1, c2, key_rank


def pwkt(reference: Histogram, other: Histogram, weighting: str = "harmonic") -> float:
    """Position-weighted Kendall's tau between the two bucket rankings.

    Rankings run over the union of both supports, absent buckets counting as
    zero, ties broken lexicographically by key.  Each discordant pair costs
    the average of the harmonic weights of its two reference positions, so
    disagreement near the top of the reference ranking dominates.
    """
    check_same_schema(reference, other)
    _, c1, c2, key_rank = _union_vectors(reference, other)
    return _pwkt_from_vectors(c1, c2, key_rank, weighting)


def _hellinger_from_vectors(p: np.ndarray, q: np.ndarray) -> float:
    bc = float(np.sum(np.sqrt(p * q)))
    return math.sqrt(min(max(1.0 - bc, 0.0), 1.0))


def hellinger(h1: Histogram, h2: Histogram) -> float:
    """sqrt(1 - Bhattacharyya coefficient) of the normalized histograms."""
    check_same_schema(h1, h2)
    if h1.total <= 0 or h2.total <= 0:
        raise EmptyInputError("Hellinger distance of an empty histogram")
    _, c1, c2, _ = _union_vectors(h1, h2)
    return _hellinger_from_vectors(c1 / h1.total, c2 / h2.total)


MetricFn = Callable[[Histogram, Histogram], float]


def _resolve_metric(metric) -> str | MetricFn:
    if callable(metric):
        return metric
    if metric in METRIC_IDS:
        return metric
    raise ConfigError(f"unknown metric {metric!r}; expected one of {METRIC_IDS}")


def bootstrap_distances(
    h: Histogram,
    metrics: Mapping[str, object],
    replicates: int = 200,
    seed: int = 0,
) -> dict[str, np.ndarray]:
    """Distances between h and `replicates` with-replacement resamples of it.

    Resampling total(h) trips with replacement from the trip-level expansion
    of a histogram is distributionally identical to a single multinomial draw
    over its buckets, which is how replicates are drawn here.  Each replicate
    owns an independent substream of (seed, replicate index), so replicates
    are order independent and results for a given seed do not depend on
    which metrics are requested.
    """
    if not h.integral:
        raise DataError("bootstrap resampling requires an integer-mode histogram")
    if h.total <= 0:
        raise EmptyInputError("cannot bootstrap an empty histogram")
    if replicates < 2:
        raise ConfigError(f"need at least 2 replicates, got {replicates!r}")
    resolved = {name: _resolve_metric(metric) for name, metric in metrics.items()}

    keys = h.canonical_order()
    counts = np.array([h.get(k) for k in keys], dtype=float)
    total = int(h.total)
    probs = counts / counts.sum()
    # canonical order is (count desc, key asc): the reference ranking itself
    order = sorted(range(len(keys)), key=lambda i: keys[i])
    key_rank = np.empty(len(keys), dtype=np.int64)
    for rank, i in enumerate(order):
        key_rank[i] = rank

    out = {name: np.empty(replicates) for name in resolved}
    for r in range(replicates):
        sample = substream(seed, "bootstrap", r).multinomial(total, probs).astype(float)
        replicate_hist = None
        for name, metric in resolved.items():
            if metric == "pwkt":
                out[name][r] = _pwkt_from_vectors(counts, sample, key_rank)
            elif metric == "hellinger":
                out[name][r] = _hellinger_from_vectors(probs, sample / total)
            else:
                if replicate_hist is None:
                    nonzero = {keys[i]: int(sample[i]) for i in np.flatnonzero(sample)}
                    replicate_hist = Histogram(h.schema, nonzero, integral=True)
                out[name][r] = metric(h, replicate_hist)
    return out


def _band(distances: np.ndarray) -> Band:
    return Band(
        p2_5=percentile(distances, 2.5),
        mean=float(np.mean(distances)),
        p97_5=percentile(distances, 97.5),
    )


def bootstrap_band(h: Histogram, metric, replicates: int = 200, seed: int = 0) -> Band:
    """2.5th percentile, mean, 97.5th percentile of the resample distances."""
    distances = bootstrap_distances(h, {"metric": metric}, replicates, seed)["metric"]
    return _band(distances)


def build_distance_report(
    reference: Histogram,
    other: Histogram,
    replicates: int = 200,
    seed: int = 0,
    baseline: Histogram | None = None,
) -> DistanceReport:
    """Assemble both metrics, their bootstrap bands, and optional baseline.

    `baseline` is typically the random-X rebuild of the reference; its
    distances to the reference are reported per metric when supplied.
    """
    distances = bootstrap_distances(
        reference, {"pwkt": "pwkt", "hellinger": "hellinger"}, replicates, seed
    )
    baseline_values = None
    if baseline is not None:
        baseline_values = {
            "pwkt": pwkt(reference, baseline),
            "hellinger": hellinger(reference, baseline),
        }
    return DistanceReport(
        pwkt=pwkt(reference, other),
        hellinger=hellinger(reference, other),
        band={name: _band(d) for name, d in distances.items()},
        baseline=baseline_values,
        replicates=replicates,
        seed=seed,
    )
