"""Core domain types shared across the pipeline stages.

Record-level types (:class:`RawRecord`, :class:`Interaction`) are NamedTuples:
they are created millions of times per run and tuples keep that cheap.
Aggregate types are dataclasses.

Sentiment labels travel as small ints (:data:`POSITIVE`, :data:`NEUTRAL`,
:data:`NEGATIVE`) internally; the string forms appear only at file boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import msgspec

# record kinds
ORIGINAL = "original"
REPLY = "reply"
MENTION_ONLY = "mention_only"
RETWEET = "retweet"
QUOTE_RETWEET = "quote_retweet"
KINDS = frozenset({ORIGINAL, REPLY, MENTION_ONLY, RETWEET, QUOTE_RETWEET})

# kinds that count as a communication from the author to the targeted accounts
COMMUNICATION_KINDS = frozenset({REPLY, MENTION_ONLY, QUOTE_RETWEET})

# sentiment labels (int-coded; NO_SENTIMENT marks records the label join missed)
NO_SENTIMENT = 0
POSITIVE = 1
NEUTRAL = 2
NEGATIVE = 3

SENTIMENT_NAMES = {POSITIVE: "positive", NEUTRAL: "neutral", NEGATIVE: "negative"}
SENTIMENT_CODES = {v: k for k, v in SENTIMENT_NAMES.items()}

DAYS_PER_YEAR = 365.25
SECONDS_PER_DAY = 86_400


class DataError(Exception):
    """A data-level problem that should abort the owning pipeline stage."""


class CorruptInputError(DataError):
    """Raised when an input file exceeds the tolerated malformed-line budget."""


class RawRecord(msgspec.Struct, gc=False):
    """One timeline entry as parsed from ``timelines.jsonl``.

    ``timestamp`` is epoch seconds (UTC), ``month_key`` the ``YYYY-MM`` prefix
    of the original RFC 3339 string (used by the activity-rate filter), and
    ``sentiment`` / ``topic_id`` are filled by the side-table joins
    (``NO_SENTIMENT`` / ``None`` until then).  A msgspec Struct: these are
    created once per input line and Struct instantiation is the cheapest
    available.
    """

    record_id: str
    author_id: str
    timestamp: int
    month_key: str
    text: str
    kind: str
    target_ids: tuple[str, ...]
    sentiment: int = NO_SENTIMENT
    topic_id: Optional[int] = None

    def replace(self, **changes) -> "RawRecord":
        return msgspec.structs.replace(self, **changes)


class Interaction(msgspec.Struct, gc=False):
    """One directed ego-to-alter communication event."""

    ego_id: str
    alter_id: str
    timestamp: int
    sentiment: int
    source_record: str


@dataclass
class Timeline:
    """A user's full posting history, records sorted by (timestamp, record_id)."""

    ego_id: str
    records: list[RawRecord]
    _ts_cache: Optional["object"] = field(default=None, repr=False, compare=False)

    def timestamps(self):
        """Record timestamps as an int64 numpy array (cached)."""
        if self._ts_cache is None:
            import numpy as np

            self._ts_cache = np.fromiter(
                (r.timestamp for r in self.records), dtype=np.int64, count=len(self.records)
            )
        return self._ts_cache

    @property
    def span_start(self) -> int:
        return self.records[0].timestamp if self.records else 0

    @property
    def span_end(self) -> int:
        return self.records[-1].timestamp if self.records else 0

    @property
    def span_days(self) -> float:
        return (self.span_end - self.span_start) / SECONDS_PER_DAY

    @property
    def span_years(self) -> float:
        return self.span_days / DAYS_PER_YEAR

    def __len__(self) -> int:
        return len(self.records)


@dataclass
class Relationship:
    """The ego->alter interaction multiset with derived frequency and sign.

    ``sentiment_counts`` is (positive, neutral, negative); the three sum to
    ``interaction_count`` only once every interaction has a joined label.
    """

    ego_id: str
    alter_id: str
    interaction_count: int = 0
    sentiment_counts: tuple[int, int, int] = (0, 0, 0)
    contact_frequency: float = 0.0
    sign: Optional[str] = None

    @property
    def unlabeled(self) -> int:
        return self.interaction_count - sum(self.sentiment_counts)


@dataclass
class Cluster:
    """One mean-shift cluster of alters: density mode plus member alter ids."""

    mode: float
    alter_ids: list[str]


@dataclass
class EgoNetwork:
    """An ego's alters partitioned into clusters and cumulative circles.

    ``clusters`` is ordered by descending mean contact frequency; circle ``k``
    is the union of the first ``k`` clusters, so circles are strictly nested
    and the outermost circle is the active network.
    """

    ego_id: str
    clusters: list[Cluster]

    @property
    def n_circles(self) -> int:
        return len(self.clusters)

    @property
    def circle_sizes(self) -> list[int]:
        sizes, total = [], 0
        for cluster in self.clusters:
            total += len(cluster.alter_ids)
            sizes.append(total)
        return sizes

    @property
    def circles(self) -> list[list[str]]:
        out, acc = [], []
        for cluster in self.clusters:
            acc = acc + cluster.alter_ids
            out.append(list(acc))
        return out

    @property
    def active_network_size(self) -> int:
        return sum(len(c.alter_ids) for c in self.clusters)


@dataclass
class SignedEgoNetwork:
    """An ego network plus a positive/negative sign for every alter.

    ``unsigned`` lists alters whose relationship had no usable interactions
    under the signing policy (possible only with neutral handling "exclude");
    they are excluded from negativity statistics.
    """

    network: EgoNetwork
    signs: dict[str, str]  # alter_id -> "+" | "-"
    unsigned: list[str] = field(default_factory=list)

    @property
    def negativity_pct(self) -> float:
        total = len(self.signs)
        if total == 0:
            return 0.0
        negative = sum(1 for s in self.signs.values() if s == "-")
        return 100.0 * negative / total

    def circle_negative_counts(self) -> list[int]:
        """Cumulative count of negative alters per circle."""
        counts, acc = [], 0
        for cluster in self.network.clusters:
            acc += sum(1 for a in cluster.alter_ids if self.signs.get(a) == "-")
            counts.append(acc)
        return counts

    def circle_signed_sizes(self) -> list[int]:
        """Cumulative count of signed alters per circle (excludes unsigned)."""
        sizes, acc = [], 0
        for cluster in self.network.clusters:
            acc += sum(1 for a in cluster.alter_ids if a in self.signs)
            sizes.append(acc)
        return sizes


@dataclass
class AccountLabel:
    account_id: str
    label: str  # "people" | "other"
    source: str  # "classifier" | "heuristic" | "manual"


@dataclass
class FilterReport:
    """Bookkeeping for the three preprocessing filters.

    Invariant: ``egos_out == egos_in - removed_nonhuman - removed_irregular``
    and ``relationships_out == relationships_in - removed_inactive``.
    """

    egos_in: int = 0
    egos_out: int = 0
    removed_nonhuman: int = 0
    removed_irregular: int = 0
    irregular_reasons: dict[str, int] = field(default_factory=dict)
    relationships_in: int = 0
    relationships_out: int = 0
    removed_inactive: int = 0
    egos_empty_after_inactive: int = 0

    def merge(self, other: "FilterReport") -> "FilterReport":
        reasons = dict(self.irregular_reasons)
        for key, value in other.irregular_reasons.items():
            reasons[key] = reasons.get(key, 0) + value
        return FilterReport(
            egos_in=self.egos_in + other.egos_in,
            egos_out=self.egos_out + other.egos_out,
            removed_nonhuman=self.removed_nonhuman + other.removed_nonhuman,
            removed_irregular=self.removed_irregular + other.removed_irregular,
            irregular_reasons=reasons,
            relationships_in=self.relationships_in + other.relationships_in,
            relationships_out=self.relationships_out + other.relationships_out,
            removed_inactive=self.removed_inactive + other.removed_inactive,
            egos_empty_after_inactive=self.egos_empty_after_inactive
            + other.egos_empty_after_inactive,
        )

    def check_balance(self) -> None:
        if self.egos_out != self.egos_in - self.removed_nonhuman - self.removed_irregular:
            raise DataError("filter report ego arithmetic does not balance")
        if self.relationships_out != self.relationships_in - self.removed_inactive:
            raise DataError("filter report relationship arithmetic does not balance")

    def as_dict(self) -> dict:
        return {
            "egos_in": self.egos_in,
            "egos_out": self.egos_out,
            "removed_nonhuman": self.removed_nonhuman,
            "removed_irregular": self.removed_irregular,
            "irregular_reasons": dict(sorted(self.irregular_reasons.items())),
            "relationships_in": self.relationships_in,
            "relationships_out": self.relationships_out,
            "removed_inactive": self.removed_inactive,
            "egos_empty_after_inactive": self.egos_empty_after_inactive,
        }


def sentiment_triple(records: Sequence[int]) -> tuple[int, int, int]:
    """Count (positive, neutral, negative) over int-coded labels."""
    pos = neu = neg = 0
    for s in records:
        if s == POSITIVE:
            pos += 1
        elif s == NEUTRAL:
            neu += 1
        elif s == NEGATIVE:
            neg += 1
    return pos, neu, neg
