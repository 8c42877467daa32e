"""The three preprocessing filters: non-human accounts, irregular egos,
inactive relationships.

Filter order is fixed (non-human -> irregular -> inactive relationships) and
each filter is a pure keep/drop decision; surviving objects are never mutated.

The non-human step ships a transparent threshold heuristic behind a pluggable
classifier interface; an ``account_labels.csv`` override file wins over both.
"""

from __future__ import annotations

import calendar
import logging
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Optional

import numpy as np

from senm.records import AccountLabel, Relationship, Timeline

log = logging.getLogger(__name__)

# irregular-ego thresholds
MIN_TWEETS = 2000
MIN_SPAN_DAYS = 183.0
RATE_RECORDS_PER_DAYS = 3.0  # at least one record per this many days

# inactive-relationship threshold: drop below one interaction per year
MIN_ANNUAL_CONTACT = 1.0

REASON_MIN_TWEETS = "min_tweets"
REASON_SPAN = "span"
REASON_RATE = "rate"

_DAYS_IN_MONTH: dict[str, int] = {}


def _days_in_month(month_key: str) -> int:
    days = _DAYS_IN_MONTH.get(month_key)
    if days is None:
        year, month = int(month_key[:4]), int(month_key[5:7])
        days = calendar.monthrange(year, month)[1]
        _DAYS_IN_MONTH[month_key] = days
    return days


@dataclass(frozen=True)
class AccountFeatures:
    """Inputs to the people/other decision, derived from one timeline."""

    n_records: int
    cadence_cv: float  # coefficient of variation of inter-post gaps
    url_fraction: float
    duplicate_fraction: float


def account_features(timeline: Timeline) -> AccountFeatures:
    records = timeline.records
    n = len(records)
    if n == 0:
        return AccountFeatures(0, float("inf"), 0.0, 0.0)
    urls = 0
    texts: set[str] = set()
    for rec in records:
        if "http://" in rec.text or "https://" in rec.text:
            urls += 1
        texts.add(rec.text)
    if n >= 3:
        gaps = np.diff(timeline.timestamps()).astype(np.float64)
        mean_gap = float(gaps.mean())
        cadence_cv = float(gaps.std() / mean_gap) if mean_gap > 0 else 0.0
    else:
        cadence_cv = float("inf")
    return AccountFeatures(
        n_records=n,
        cadence_cv=cadence_cv,
        url_fraction=urls / n,
        duplicate_fraction=1.0 - len(texts) / n,
    )


@dataclass(frozen=True)
class HeuristicClassifier:
    """Threshold baseline for the people/other decision.

    An account is "other" when its texts are mostly repeats, nearly every post
    carries a link, or it posts on a near-perfectly regular clock with enough
    volume for that to be meaningful.
    """

    max_duplicate_fraction: float = 0.5
    max_url_fraction: float = 0.8
    min_cadence_cv: float = 0.15
    cadence_min_records: int = 100

    def __call__(self, features: AccountFeatures) -> str:
        if features.n_records == 0:
            return "people"
        if features.duplicate_fraction >= self.max_duplicate_fraction:
            return "other"
        if features.url_fraction >= self.max_url_fraction:
            return "other"
        if (
            features.n_records >= self.cadence_min_records
            and features.cadence_cv < self.min_cadence_cv
        ):
            return "other"
        return "people"


def classify_account(
    timeline: Timeline,
    classifier: Optional[Callable[[AccountFeatures], str]] = None,
    overrides: Optional[Mapping[str, str]] = None,
    skip_nonhuman_filter: bool = False,
    features: Optional[AccountFeatures] = None,
) -> AccountLabel:
    """Label one ego as people/other.

    Precedence: skip flag (all people) > override file > classifier.  A
    classifier failure defaults to people with a logged warning.  Callers that
    already computed :func:`account_features` can pass them in.
    """
    ego = timeline.ego_id
    if skip_nonhuman_filter:
        return AccountLabel(ego, "people", "manual")
    if overrides and ego in overrides:
        return AccountLabel(ego, overrides[ego], "manual")
    clf = classifier if classifier is not None else HeuristicClassifier()
    try:
        label = clf(features if features is not None else account_features(timeline))
    except Exception:
        log.warning("classifier failed for account %s; defaulting to people", ego)
        return AccountLabel(ego, "people", "heuristic")
    if label not in ("people", "other"):
        log.warning("classifier returned %r for %s; defaulting to people", label, ego)
        label = "people"
    source = "heuristic" if isinstance(clf, HeuristicClassifier) else "classifier"
    return AccountLabel(ego, label, source)


def classify_accounts(
    timelines: Iterable[Timeline],
    classifier: Optional[Callable[[AccountFeatures], str]] = None,
    overrides: Optional[Mapping[str, str]] = None,
    skip_nonhuman_filter: bool = False,
) -> dict[str, AccountLabel]:
    return {
        t.ego_id: classify_account(t, classifier, overrides, skip_nonhuman_filter)
        for t in timelines
    }


def filter_irregular_egos(
    timeline: Timeline,
    min_tweets: int = MIN_TWEETS,
    min_span_days: float = MIN_SPAN_DAYS,
    rate_days: float = RATE_RECORDS_PER_DAYS,
) -> tuple[bool, Optional[str]]:
    """Keep/drop an ego by posting volume, span, and activity rate.

    Drop when the timeline has fewer than ``min_tweets`` records, spans less
    than ``min_span_days``, or posts slower than one record per ``rate_days``
    days in more than half of its active calendar months (each month judged
    by its actual day count).  The reason names the first rule that fired.
    """
    n = len(timeline.records)
    if n < min_tweets:
        return False, REASON_MIN_TWEETS
    if timeline.span_days < min_span_days:
        return False, REASON_SPAN
    month_counts: dict[str, int] = {}
    for rec in timeline.records:
        month_counts[rec.month_key] = month_counts.get(rec.month_key, 0) + 1
    below = sum(
        1
        for month, count in month_counts.items()
        if count < _days_in_month(month) / rate_days
    )
    if below * 2 > len(month_counts):
        return False, REASON_RATE
    return True, None


def filter_inactive_relationships(
    rel: Relationship,
    ego_span_years: float,
    min_annual_contact: float = MIN_ANNUAL_CONTACT,
) -> bool:
    """Keep a relationship iff it averages at least ``min_annual_contact``
    interactions per year (the boundary itself is kept)."""
    if ego_span_years <= 0:
        raise ValueError(f"ego_span_years must be positive, got {ego_span_years}")
    return rel.interaction_count / ego_span_years >= min_annual_contact
