"""Relationship signing by the ratio of negative interactions.

A relationship is positive when its fraction of negative interactions is
below or equal to the threshold (default 0.17, boundary inclusive), negative
otherwise.  Neutral interactions count toward the denominator by default;
``neutral_handling="exclude"`` restricts the denominator to positive+negative
and leaves all-neutral relationships unsigned (an error surfaced to the
caller).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from senm.records import DataError, EgoNetwork, Relationship, SignedEgoNetwork

POSITIVE_SIGN = "+"
NEGATIVE_SIGN = "-"

NEUTRAL_IN_DENOMINATOR = "denominator"
NEUTRAL_EXCLUDED = "exclude"


class UnsignedRelationshipError(DataError):
    """The relationship has no usable interactions under the chosen policy."""


class MissingSentimentError(DataError):
    """Alters whose relationships lack joined sentiment labels."""

    def __init__(self, ego_id: str, alter_ids: list[str]):
        self.ego_id = ego_id
        self.alter_ids = alter_ids
        preview = ", ".join(alter_ids[:10])
        more = "" if len(alter_ids) <= 10 else f" (+{len(alter_ids) - 10} more)"
        super().__init__(
            f"ego {ego_id}: missing or incomplete sentiment labels for "
            f"alters {preview}{more}"
        )


@dataclass(frozen=True)
class GoldenRatioPolicy:
    """Signing policy: threshold in (0,1) plus neutral handling."""

    threshold: float = 0.17
    neutral_handling: str = NEUTRAL_IN_DENOMINATOR

    def __post_init__(self) -> None:
        if not 0.0 < self.threshold < 1.0:
            raise ValueError(f"threshold must be in (0, 1), got {self.threshold}")
        if self.neutral_handling not in (NEUTRAL_IN_DENOMINATOR, NEUTRAL_EXCLUDED):
            raise ValueError(f"unknown neutral_handling {self.neutral_handling!r}")


DEFAULT_POLICY = GoldenRatioPolicy()


def sign_counts(
    positive: int, neutral: int, negative: int, policy: GoldenRatioPolicy = DEFAULT_POLICY
) -> str:
    """Sign a sentiment triple; raises :class:`UnsignedRelationshipError` when
    the denominator is empty under the policy."""
    if policy.neutral_handling == NEUTRAL_IN_DENOMINATOR:
        denominator = positive + neutral + negative
    else:
        denominator = positive + negative
    if denominator <= 0:
        raise UnsignedRelationshipError(
            "no interactions in denominator "
            f"(pos={positive}, neu={neutral}, neg={negative}, "
            f"neutral_handling={policy.neutral_handling})"
        )
    return POSITIVE_SIGN if negative / denominator <= policy.threshold else NEGATIVE_SIGN


def sign_relationship(rel: Relationship, policy: GoldenRatioPolicy = DEFAULT_POLICY) -> str:
    """Sign one relationship from its joined sentiment counts."""
    pos, neu, neg = rel.sentiment_counts
    if pos + neu + neg != rel.interaction_count:
        raise MissingSentimentError(rel.ego_id, [rel.alter_id])
    return sign_counts(pos, neu, neg, policy)


def sign_network(
    network: EgoNetwork,
    rels: Mapping[str, Relationship],
    policy: GoldenRatioPolicy = DEFAULT_POLICY,
) -> SignedEgoNetwork:
    """Attach a sign to every alter of an ego network.

    ``rels`` maps alter_id to the ego's relationship with that alter.  Alters
    missing from the map, or whose sentiments were never joined, abort with
    the full offender list.
    """
    signs: dict[str, str] = {}
    unsigned: list[str] = []
    missing: list[str] = []
    for cluster in network.clusters:
        for alter_id in cluster.alter_ids:
            rel = rels.get(alter_id)
            if rel is None or rel.unlabeled > 0:
                missing.append(alter_id)
                continue
            pos, neu, neg = rel.sentiment_counts
            try:
                signs[alter_id] = sign_counts(pos, neu, neg, policy)
            except UnsignedRelationshipError:
                # all-neutral under the exclude policy: reported, kept out of
                # the negativity statistics
                unsigned.append(alter_id)
    if missing:
        raise MissingSentimentError(network.ego_id, sorted(missing))
    return SignedEgoNetwork(network=network, signs=signs, unsigned=sorted(unsigned))
