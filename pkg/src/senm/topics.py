"""Topic-level engagement and negativity aggregation.

Topic modelling itself is input: ``topic_assignments.jsonl`` carries one
``{topic_id, keyword, record_ids[]}`` object per line.  Engaged users are the
authors of a topic's records (each user counted once per topic no matter how
often they tweeted it), which is what the top-topic selection ranks by.

Two negativity metrics per topic:

- user negativity: unweighted mean over engaged users of the negativity of
  their signed ego network;
- tweet negativity: share of the topic's records labelled negative.

Topics roll up into categories (politics, covid, religion, football, generic)
through an editable keyword map; the packaged default seeds the published
colour-coding of the top-20 tables.
"""

from __future__ import annotations

import json
import logging

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from dataclasses import dataclass
from importlib import resources
from typing import Callable, Iterable, Mapping, Optional

from senm.metrics import EmptyResultError
from senm.records import DataError, NEGATIVE, SignedEgoNetwork

log = logging.getLogger(__name__)

CATEGORIES = ("politics", "covid", "religion", "football", "generic")
DEFAULT_POOL = 200
DEFAULT_KEEP = 20


@dataclass
class TopicAssignment:
    """One topic with its records and the distinct users who authored them."""

    topic_id: int
    keyword: str
    record_ids: frozenset[str]
    user_ids: frozenset[str]


@dataclass
class TopicNegativity:
    topic_id: int
    keyword: str
    category: str
    n_users: int
    user_negativity_pct: Optional[float]
    tweet_negativity_pct: float


def load_topic_assignments(
    path,
    record_author: Callable[[str], Optional[str]],
) -> list[TopicAssignment]:
    """Read ``topic_assignments.jsonl`` and derive each topic's user set.

    ``record_author`` resolves a record id to its author (None when unknown);
    records with unknown authors keep the topic's tweet metrics but cannot
    contribute engaged users.
    """
    out: list[TopicAssignment] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            record_ids = frozenset(obj["record_ids"])
            users = frozenset(
                a for a in (record_author(r) for r in record_ids) if a is not None
            )
            out.append(
                TopicAssignment(
                    topic_id=int(obj["topic_id"]),
                    keyword=str(obj["keyword"]),
                    record_ids=record_ids,
                    user_ids=users,
                )
            )
    return out


def select_top_topics(
    assignments: list[TopicAssignment],
    pool: int = DEFAULT_POOL,
    keep: int = DEFAULT_KEEP,
) -> list[TopicAssignment]:
    """Keep the topics engaging the most distinct users.

    The input is the ranked topic pool (at most ``pool`` topics; extras are
    cut in input order).  Counting distinct users rather than records keeps a
    topic spam-tweeted by one account from outranking one genuinely touched
    by many.  Ties break toward the lower topic id.
    """
    if len(assignments) > pool:
        log.warning("topic pool has %d topics; truncating to %d", len(assignments), pool)
        assignments = assignments[:pool]
    ranked = sorted(assignments, key=lambda t: (-len(t.user_ids), t.topic_id))
    if len(ranked) < keep:
        log.warning("only %d topics available for keep=%d", len(ranked), keep)
        return ranked
    return ranked[:keep]


def topic_user_negativity(
    topic: TopicAssignment,
    signed: Mapping[str, SignedEgoNetwork],
    counters: Optional[dict] = None,
) -> float:
    """Mean negativity of the signed networks of the topic's engaged users.

    Users without a signed network (filtered out upstream) are skipped; the
    skip count lands in ``counters["missing_users"]`` when provided.  No
    resolvable user at all is an error.
    """
    values = []
    missing = 0
    for user in sorted(topic.user_ids):
        network = signed.get(user)
        if network is None:
            missing += 1
        else:
            values.append(network.negativity_pct)
    if counters is not None:
        counters["missing_users"] = counters.get("missing_users", 0) + missing
    if not values:
        raise EmptyResultError(
            f"topic {topic.topic_id} ({topic.keyword}): no engaged user has a "
            "signed network"
        )
    return sum(values) / len(values)


def topic_tweet_negativity(
    topic: TopicAssignment,
    sentiments,  # Mapping[str, int] or ingest.KeyedLabelStore
) -> float:
    """Percentage of the topic's records labelled negative."""
    if not topic.record_ids:
        raise EmptyResultError(f"topic {topic.topic_id} has no records")
    getter = sentiments.get
    negative = 0
    missing: list[str] = []
    for record_id in topic.record_ids:
        label = getter(record_id, 0)
        if not label:
            missing.append(record_id)
        elif label == NEGATIVE:
            negative += 1
    if missing:
        preview = ", ".join(sorted(missing)[:10])
        more = "" if len(missing) <= 10 else f" (+{len(missing) - 10} more)"
        raise DataError(
            f"topic {topic.topic_id} ({topic.keyword}): records without "
            f"sentiment labels: {preview}{more}"
        )
    return 100.0 * negative / len(topic.record_ids)


def load_topic_categories(path=None) -> dict[str, str]:
    """keyword -> category map; the packaged default seeds the published one."""
    if path is None:
        with resources.files("senm.data").joinpath("topic_categories.toml").open("rb") as fh:
            data = tomllib.load(fh)
    else:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    mapping = data.get("categories", {})
    out = {}
    for keyword, category in mapping.items():
        if category not in CATEGORIES:
            raise DataError(f"unknown topic category {category!r} for {keyword!r}")
        out[str(keyword)] = str(category)
    return out


def analyze_topics(
    assignments: list[TopicAssignment],
    signed: Mapping[str, SignedEgoNetwork],
    sentiments,
    categories: Optional[Mapping[str, str]] = None,
    pool: int = DEFAULT_POOL,
    keep: int = DEFAULT_KEEP,
    counters: Optional[dict] = None,
) -> list[TopicNegativity]:
    """Select the top topics and compute both negativity metrics for each.

    Topics whose engaged users all lack signed networks get a None user
    negativity (reported, not fatal).  Keywords missing from the category map
    default to "generic".
    """
    if categories is None:
        categories = load_topic_categories()
    selected = select_top_topics(assignments, pool=pool, keep=keep)
    out: list[TopicNegativity] = []
    for topic in selected:
        try:
            user_pct: Optional[float] = topic_user_negativity(topic, signed, counters)
        except EmptyResultError:
            user_pct = None
        out.append(
            TopicNegativity(
                topic_id=topic.topic_id,
                keyword=topic.keyword,
                category=categories.get(topic.keyword, "generic"),
                n_users=len(topic.user_ids),
                user_negativity_pct=user_pct,
                tweet_negativity_pct=topic_tweet_negativity(topic, sentiments),
            )
        )
    return out


def category_means(
    topics: Iterable[TopicNegativity],
) -> dict[str, tuple[Optional[float], float]]:
    """Unweighted per-category means of (user, tweet) negativity.

    Categories with no topics are omitted; user means skip topics whose user
    negativity is undefined.
    """
    user_values: dict[str, list[float]] = {}
    tweet_values: dict[str, list[float]] = {}
    for t in topics:
        tweet_values.setdefault(t.category, []).append(t.tweet_negativity_pct)
        if t.user_negativity_pct is not None:
            user_values.setdefault(t.category, []).append(t.user_negativity_pct)
    out: dict[str, tuple[Optional[float], float]] = {}
    for category in sorted(tweet_values):
        tweets = tweet_values[category]
        users = user_values.get(category)
        user_mean = sum(users) / len(users) if users else None
        out[category] = (user_mean, sum(tweets) / len(tweets))
    return out
