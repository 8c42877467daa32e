"""Dataset-level statistics: network sizes, circle tables, negativities, ranges.

All aggregations are order-independent: per-ego values are keyed by ego id,
reduced in sorted-key order, and summed with :func:`math.fsum` (exactly
rounded), so sharded or shuffled inputs produce bit-identical statistics.

Conventions:

- dataset negativity is the unweighted mean over egos of their per-ego
  negativity percentage (not pooled over relationships);
- per-circle negativity percentages are ratios of sums by default
  (total negatives in circle k over total alters in circle k across egos);
  ``pct_mode="mean_of_ratios"`` averages per-ego percentages instead;
- 95% confidence intervals use the normal approximation
  ``mean +/- 1.96 * stdev / sqrt(n)`` with the sample standard deviation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from senm.records import DataError, EgoNetwork, SignedEgoNetwork

Z_95 = 1.96

RATIO_OF_SUMS = "ratio_of_sums"
MEAN_OF_RATIOS = "mean_of_ratios"


class EmptyResultError(DataError):
    """No qualifying egos for the requested statistic."""


@dataclass(frozen=True)
class MeanCI:
    """A mean with its symmetric 95% confidence interval."""

    mean: float
    lo: float
    hi: float

    def as_list(self) -> list[float]:
        return [self.mean, self.lo, self.hi]


def mean_ci(values: Sequence[float]) -> MeanCI:
    n = len(values)
    if n == 0:
        raise EmptyResultError("cannot average an empty sequence")
    mean = math.fsum(values) / n
    if n == 1:
        return MeanCI(mean, mean, mean)
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    half = Z_95 * math.sqrt(var) / math.sqrt(n)
    return MeanCI(mean, mean - half, mean + half)


@dataclass
class EgoSummary:
    """Per-ego scalars from which every dataset statistic derives.

    ``circle_sizes`` / ``circle_neg_counts`` / ``circle_signed_sizes`` are the
    cumulative per-circle values; ``n_interactions`` counts interactions on
    surviving relationships.
    """

    ego_id: str
    n_circles: int
    active_network_size: int
    circle_sizes: tuple[int, ...]
    negativity_pct: float
    circle_neg_counts: tuple[int, ...]
    circle_signed_sizes: tuple[int, ...]
    n_relationships: int
    n_interactions: int


def summarize_ego(signed: SignedEgoNetwork, n_interactions: int = 0) -> EgoSummary:
    net = signed.network
    return EgoSummary(
        ego_id=net.ego_id,
        n_circles=net.n_circles,
        active_network_size=net.active_network_size,
        circle_sizes=tuple(net.circle_sizes),
        negativity_pct=signed.negativity_pct,
        circle_neg_counts=tuple(signed.circle_negative_counts()),
        circle_signed_sizes=tuple(signed.circle_signed_sizes()),
        n_relationships=net.active_network_size,
        n_interactions=n_interactions,
    )


@dataclass
class DatasetStats:
    """The dataset-level roll-up mirroring the published table rows."""

    dataset_id: str
    n_egos: int
    n_relationships: int
    n_interactions: int
    mean_network_size: MeanCI
    mean_n_circles: MeanCI
    n_five_circle_egos: int
    circle_sizes_5: Optional[tuple[float, ...]]
    mean_user_negativity_pct: float
    circle_negativity_5: Optional[tuple[tuple[float, float], ...]]  # (mean_count, pct)
    range_c1_c4: Optional[float]
    pct_mode: str = RATIO_OF_SUMS

    def as_dict(self) -> dict:
        return {
            "dataset_id": self.dataset_id,
            "n_egos": self.n_egos,
            "n_relationships": self.n_relationships,
            "n_interactions": self.n_interactions,
            "mean_network_size": self.mean_network_size.as_list(),
            "mean_n_circles": self.mean_n_circles.as_list(),
            "n_five_circle_egos": self.n_five_circle_egos,
            "circle_sizes_5": list(self.circle_sizes_5) if self.circle_sizes_5 else None,
            "mean_user_negativity_pct": self.mean_user_negativity_pct,
            "circle_negativity_5": [list(pair) for pair in self.circle_negativity_5]
            if self.circle_negativity_5
            else None,
            "range_c1_c4": self.range_c1_c4,
            "pct_mode": self.pct_mode,
        }


def _sorted_summaries(summaries: Iterable[EgoSummary]) -> list[EgoSummary]:
    ordered = sorted(summaries, key=lambda s: s.ego_id)
    for a, b in zip(ordered, ordered[1:]):
        if a.ego_id == b.ego_id:
            raise DataError(f"duplicate ego summary for {a.ego_id!r}")
    return ordered


def compute_dataset_stats(
    summaries: Iterable[EgoSummary],
    dataset_id: str = "dataset",
    pct_mode: str = RATIO_OF_SUMS,
) -> DatasetStats:
    """Reduce per-ego summaries into one :class:`DatasetStats` row."""
    ordered = _sorted_summaries(summaries)
    if not ordered:
        raise EmptyResultError("no egos to aggregate")
    sizes = [float(s.active_network_size) for s in ordered]
    n_circles = [float(s.n_circles) for s in ordered]
    negativity = [s.negativity_pct for s in ordered]
    five = [s for s in ordered if s.n_circles == 5]

    circle_sizes_5 = None
    circle_negativity_5 = None
    range_c1_c4 = None
    if five:
        circle_sizes_5 = tuple(
            math.fsum(s.circle_sizes[k] for s in five) / len(five) for k in range(5)
        )
        for a, b in zip(circle_sizes_5, circle_sizes_5[1:]):
            if not a < b:
                raise AssertionError("mean cumulative circle sizes must increase")
        pairs = []
        pcts = []
        for k in range(5):
            counts = [s.circle_neg_counts[k] for s in five]
            mean_count = math.fsum(map(float, counts)) / len(five)
            if pct_mode == RATIO_OF_SUMS:
                total_signed = sum(s.circle_signed_sizes[k] for s in five)
                pct = 100.0 * sum(counts) / total_signed if total_signed else 0.0
            elif pct_mode == MEAN_OF_RATIOS:
                ratios = [
                    100.0 * s.circle_neg_counts[k] / s.circle_signed_sizes[k]
                    for s in five
                    if s.circle_signed_sizes[k]
                ]
                pct = math.fsum(ratios) / len(ratios) if ratios else 0.0
            else:
                raise ValueError(f"unknown pct_mode {pct_mode!r}")
            pairs.append((mean_count, pct))
            pcts.append(pct)
        circle_negativity_5 = tuple(pairs)
        range_c1_c4 = max(pcts[:4]) - min(pcts[:4])

    return DatasetStats(
        dataset_id=dataset_id,
        n_egos=len(ordered),
        n_relationships=sum(s.n_relationships for s in ordered),
        n_interactions=sum(s.n_interactions for s in ordered),
        mean_network_size=mean_ci(sizes),
        mean_n_circles=mean_ci(n_circles),
        n_five_circle_egos=len(five),
        circle_sizes_5=circle_sizes_5,
        mean_user_negativity_pct=math.fsum(negativity) / len(negativity),
        circle_negativity_5=circle_negativity_5,
        range_c1_c4=range_c1_c4,
        pct_mode=pct_mode,
    )


# ---------------------------------------------------------------------------
# spec-level operations over network objects
# ---------------------------------------------------------------------------


def structural_stats(networks: Iterable[EgoNetwork]) -> dict:
    """Means and CIs of active network size and circle count, plus the
    five-circle ego count."""
    nets = sorted(networks, key=lambda n: n.ego_id)
    if not nets:
        raise EmptyResultError("no networks")
    sizes = [float(n.active_network_size) for n in nets]
    circles = [float(n.n_circles) for n in nets]
    return {
        "n_egos": len(nets),
        "mean_network_size": mean_ci(sizes),
        "mean_n_circles": mean_ci(circles),
        "n_five_circle_egos": sum(1 for n in nets if n.n_circles == 5),
    }


def circle_size_table(
    networks: Iterable[EgoNetwork], only_n_circles: int = 5
) -> tuple[float, ...]:
    """Mean cumulative circle sizes over egos with exactly ``only_n_circles``."""
    rows = [
        tuple(n.circle_sizes)
        for n in sorted(networks, key=lambda n: n.ego_id)
        if n.n_circles == only_n_circles
    ]
    if not rows:
        raise EmptyResultError(f"no egos with exactly {only_n_circles} circles")
    return tuple(
        math.fsum(float(r[k]) for r in rows) / len(rows) for k in range(only_n_circles)
    )


def user_negativity(signed: Iterable[SignedEgoNetwork]) -> float:
    """Unweighted mean over egos of per-ego negativity percentage."""
    nets = sorted(signed, key=lambda s: s.network.ego_id)
    if not nets:
        raise EmptyResultError("no signed networks")
    return math.fsum(s.negativity_pct for s in nets) / len(nets)


def circle_negativity_table(
    signed: Iterable[SignedEgoNetwork],
    only_n_circles: int = 5,
    pct_mode: str = RATIO_OF_SUMS,
) -> tuple[tuple[tuple[float, float], ...], float]:
    """Per-circle (mean negative count, negativity pct) plus the range of the
    percentages over circles 1..4 (the outermost circle is excluded from the
    range: its relationships average too few interactions to sign reliably).
    """
    summaries = [
        summarize_ego(s)
        for s in signed
        if s.network.n_circles == only_n_circles
    ]
    if not summaries:
        raise EmptyResultError(f"no egos with exactly {only_n_circles} circles")
    stats = compute_dataset_stats(summaries, pct_mode=pct_mode)
    assert stats.circle_negativity_5 is not None and stats.range_c1_c4 is not None
    return stats.circle_negativity_5, stats.range_c1_c4


def negativity_range(
    values: Sequence[tuple[str, Optional[float]]],
    subset: Optional[Iterable[str]] = None,
) -> float:
    """max - min over labelled percentages, optionally restricted to a subset.

    Missing values (None) are ignored; fewer than two surviving values is an
    error.
    """
    allowed = set(subset) if subset is not None else None
    kept = [
        pct
        for label, pct in values
        if pct is not None and (allowed is None or label in allowed)
    ]
    if len(kept) < 2:
        raise EmptyResultError("negativity_range needs at least two values")
    return max(kept) - min(kept)
