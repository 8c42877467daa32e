"""Timeline parsing, interaction extraction, and side-table joins.

Input formats (one directory per dataset):

- ``timelines.jsonl``: one record per line with fields exactly
  ``id, author_id, created_at (RFC 3339), text, kind, target_ids[]``
- ``sentiments.csv``: ``record_id,label`` with label in {positive, neutral, negative}
- ``topics.csv``: ``record_id,topic_id`` (absent rows mean no topic)
- ``account_labels.csv``: ``account_id,label`` (optional override for the
  non-human filter)

Parsing is tolerant of malformed lines up to a 10% budget (counted and
reported); beyond that the file is considered corrupt.  Timelines are grouped
by ``author_id``: files already grouped into contiguous author runs stream in
O(one timeline) memory, anything else is grouped in memory.
"""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Callable, Iterable, Iterator, Optional

import numpy as np

import msgspec


class _WireRecord(msgspec.Struct, gc=False):
    id: str
    author_id: str
    created_at: str
    text: str
    kind: str
    target_ids: tuple[str, ...]


_decode_line = msgspec.json.Decoder(_WireRecord).decode
_DecodeError = (msgspec.DecodeError, msgspec.ValidationError)

from senm.records import (
    COMMUNICATION_KINDS,
    CorruptInputError,
    DataError,
    Interaction,
    KINDS,
    NEGATIVE,
    NEUTRAL,
    NO_SENTIMENT,
    POSITIVE,
    QUOTE_RETWEET,
    RawRecord,
    Relationship,
    RETWEET,
    SENTIMENT_CODES,
    Timeline,
)

MALFORMED_BUDGET = 0.10

# caches for the fixed-width RFC 3339 fast path: day prefix -> (midnight
# epoch, shared month string) and "HH:MM:SS" -> second of day
_DAY_EPOCH: dict[str, tuple[int, str]] = {}
_TIME_OF_DAY: dict[str, int] = {}


def parse_rfc3339_utc(value: str) -> tuple[int, str]:
    """Parse an RFC 3339 timestamp to (epoch seconds, "YYYY-MM" month key).

    Fast path covers the second-precision UTC form ``YYYY-MM-DDTHH:MM:SSZ``;
    anything else (offsets, fractional seconds) falls back to ``datetime``.
    """
    if len(value) == 20 and value[19] == "Z" and value[10] == "T":
        day = value[:10]
        entry = _DAY_EPOCH.get(day)
        if entry is None:
            dt = datetime(int(day[:4]), int(day[5:7]), int(day[8:10]), tzinfo=timezone.utc)
            entry = (int(dt.timestamp()), day[:7])
            _DAY_EPOCH[day] = entry
        tod = value[11:19]
        secs = _TIME_OF_DAY.get(tod)
        if secs is None:
            secs = int(tod[0:2]) * 3600 + int(tod[3:5]) * 60 + int(tod[6:8])
            _TIME_OF_DAY[tod] = secs
        return entry[0] + secs, entry[1]
    dt = datetime.fromisoformat(value.replace("Z", "+00:00"))
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    dt = dt.astimezone(timezone.utc)
    return int(dt.timestamp()), f"{dt.year:04d}-{dt.month:02d}"


@dataclass
class ParseStats:
    total_lines: int = 0
    parsed_records: int = 0
    malformed_count: int = 0
    duplicate_record_ids: int = 0
    timelines: int = 0

    def merge(self, other: "ParseStats") -> "ParseStats":
        return ParseStats(
            self.total_lines + other.total_lines,
            self.parsed_records + other.parsed_records,
            self.malformed_count + other.malformed_count,
            self.duplicate_record_ids + other.duplicate_record_ids,
            self.timelines + other.timelines,
        )


def _record_from_wire(wire: "_WireRecord") -> RawRecord:
    kind = wire.kind
    if kind not in KINDS:
        raise ValueError(f"unknown kind {kind!r}")
    targets = wire.target_ids
    if kind in ("reply", "quote_retweet") and not targets:
        raise ValueError(f"{kind} record without targets")
    # timestamp fast path inlined: this runs once per input line
    value = wire.created_at
    if len(value) == 20 and value[19] == "Z" and value[10] == "T":
        entry = _DAY_EPOCH.get(value[:10])
        secs = _TIME_OF_DAY.get(value[11:19])
        if entry is None or secs is None:
            timestamp, month_key = parse_rfc3339_utc(value)
        else:
            timestamp, month_key = entry[0] + secs, entry[1]
    else:
        timestamp, month_key = parse_rfc3339_utc(value)
    return RawRecord(
        wire.id, wire.author_id, timestamp, month_key, wire.text, kind, targets
    )


def parse_record_line(line: bytes) -> RawRecord:
    """Parse one ``timelines.jsonl`` line; raises on any malformation."""
    return _record_from_wire(_decode_line(line))


def _finalize_timeline(ego_id: str, records: list[RawRecord], stats: ParseStats) -> Timeline:
    n = len(records)
    ts = np.fromiter((r.timestamp for r in records), dtype=np.int64, count=n)
    if n > 1:
        gaps = np.diff(ts)
        if np.all(gaps > 0):
            sorted_already = True
        elif np.all(gaps >= 0):
            ties = np.nonzero(gaps == 0)[0]
            sorted_already = all(
                records[i].record_id <= records[i + 1].record_id for i in ties
            )
        else:
            sorted_already = False
        if not sorted_already:
            records.sort(key=lambda r: (r.timestamp, r.record_id))
            ts = np.fromiter((r.timestamp for r in records), dtype=np.int64, count=n)
    unique: list[RawRecord] = records
    if len({r.record_id for r in records}) != n:
        seen: set[str] = set()
        unique = []
        for rec in records:
            if rec.record_id in seen:
                stats.duplicate_record_ids += 1
                continue
            seen.add(rec.record_id)
            unique.append(rec)
        ts = None
    stats.timelines += 1
    timeline = Timeline(ego_id=ego_id, records=unique)
    if ts is not None:
        timeline._ts_cache = ts
    return timeline


def iter_record_lines(path: str | os.PathLike) -> Iterator[bytes]:
    with open(path, "rb") as fh:
        for line in fh:
            yield line


def parse_timelines(
    path: str | os.PathLike,
    format: str = "jsonl",
    grouped: bool = False,
    stats: Optional[ParseStats] = None,
) -> Iterator[Timeline]:
    """Yield one :class:`Timeline` per distinct ``author_id``.

    ``grouped=True`` promises the file holds contiguous author runs and
    streams them (an author reappearing later raises); ``grouped=False``
    buffers the whole file and groups in memory, correct for any line order.
    Malformed lines are counted, not fatal, unless they exceed 10% of the
    non-empty lines (then :class:`CorruptInputError`).
    """
    if format != "jsonl":
        raise ValueError(f"unsupported timeline format {format!r}")
    stats = stats if stats is not None else ParseStats()

    if grouped:
        yield from _parse_grouped(path, stats)
    else:
        yield from _parse_buffered(path, stats)

    if stats.total_lines and stats.malformed_count > MALFORMED_BUDGET * stats.total_lines:
        raise CorruptInputError(
            f"{stats.malformed_count} of {stats.total_lines} lines malformed "
            f"in {path} (budget {MALFORMED_BUDGET:.0%})"
        )


_PARSE_ERRORS = (*_DecodeError, ValueError, OverflowError)


def _parse_buffered(path, stats: ParseStats) -> Iterator[Timeline]:
    by_author: dict[str, list[RawRecord]] = {}
    total = malformed = parsed = 0
    decode = _decode_line
    build = _record_from_wire
    with open(path, "rb") as fh:
        for line in fh:
            if len(line) <= 1 and not line.strip():
                continue
            total += 1
            try:
                rec = build(decode(line))
            except _PARSE_ERRORS:
                malformed += 1
                continue
            parsed += 1
            bucket = by_author.get(rec.author_id)
            if bucket is None:
                by_author[rec.author_id] = [rec]
            else:
                bucket.append(rec)
    stats.total_lines += total
    stats.malformed_count += malformed
    stats.parsed_records += parsed
    for ego_id, records in by_author.items():
        yield _finalize_timeline(ego_id, records, stats)


def _parse_grouped(path, stats: ParseStats) -> Iterator[Timeline]:
    seen: set[str] = set()
    current: Optional[str] = None
    bucket: list[RawRecord] = []
    total = malformed = parsed = 0
    decode = _decode_line
    build = _record_from_wire
    append = bucket.append
    with open(path, "rb") as fh:
        for line in fh:
            if len(line) <= 1 and not line.strip():
                continue
            total += 1
            try:
                rec = build(decode(line))
            except _PARSE_ERRORS:
                malformed += 1
                continue
            parsed += 1
            if rec.author_id != current:
                if current is not None:
                    stats.total_lines += total
                    stats.malformed_count += malformed
                    stats.parsed_records += parsed
                    total = malformed = parsed = 0
                    yield _finalize_timeline(current, bucket, stats)
                    seen.add(current)
                if rec.author_id in seen:
                    raise DataError(
                        f"author {rec.author_id!r} reappears in {path}; "
                        "file is not grouped by author_id"
                    )
                current = rec.author_id
                bucket = []
                append = bucket.append
            append(rec)
    stats.total_lines += total
    stats.malformed_count += malformed
    stats.parsed_records += parsed
    if current is not None:
        yield _finalize_timeline(current, bucket, stats)


def scan_author_blocks(path: str | os.PathLike) -> list[tuple[str, int, int]]:
    """Index contiguous (author_id, start_offset, end_offset) runs of a JSONL file.

    Used to shard a grouped file across workers.  Authors are located with a
    raw substring probe (no full JSON decode); lines where the probe misses are
    attributed to the current run and re-judged during the real parse.  Raises
    if an author's lines are not contiguous.
    """
    needle = b'"author_id"'
    blocks: list[tuple[str, int, int]] = []
    seen: set[str] = set()
    current: Optional[str] = None
    start = 0
    offset = 0
    with open(path, "rb") as fh:
        for line in fh:
            pos = line.find(needle)
            author = None
            if pos >= 0:
                a = line.find(b'"', pos + len(needle) + 1)  # skip ':' and spaces
                if a >= 0:
                    b = line.find(b'"', a + 1)
                    if b > a + 1 and b"\\" not in line[a + 1 : b]:
                        author = line[a + 1 : b].decode("utf-8", "replace")
            if author is not None and author != current:
                if current is not None:
                    blocks.append((current, start, offset))
                    seen.add(current)
                if author in seen:
                    raise DataError(f"author {author!r} reappears; file not grouped")
                current = author
                start = offset
            offset += len(line)
        if current is not None:
            blocks.append((current, start, offset))
    return blocks


# ---------------------------------------------------------------------------
# interaction extraction
# ---------------------------------------------------------------------------


@dataclass
class ExtractStats:
    interactions: int = 0
    downgraded_quotes: int = 0
    self_targets_dropped: int = 0

    def merge(self, other: "ExtractStats") -> "ExtractStats":
        return ExtractStats(
            self.interactions + other.interactions,
            self.downgraded_quotes + other.downgraded_quotes,
            self.self_targets_dropped + other.self_targets_dropped,
        )


def extract_interactions(
    timeline: Timeline, stats: Optional[ExtractStats] = None
) -> list[Interaction]:
    """One :class:`Interaction` per (record, target) pair of communication kinds.

    Plain retweets carry no authored text and are excluded; a quote retweet
    whose text is empty is downgraded to a plain retweet.  Self-targets never
    produce interactions.  A record tagging k distinct accounts fans out to k
    interactions.
    """
    ego = timeline.ego_id
    out: list[Interaction] = []
    downgraded = dropped_self = 0
    for rec in timeline.records:
        kind = rec.kind
        if kind not in COMMUNICATION_KINDS:
            continue
        if kind == QUOTE_RETWEET and not rec.text.strip():
            downgraded += 1
            continue
        for target in rec.target_ids:
            if target == ego:
                dropped_self += 1
                continue
            out.append(Interaction(ego, target, rec.timestamp, rec.sentiment, rec.record_id))
    if stats is not None:
        stats.interactions += len(out)
        stats.downgraded_quotes += downgraded
        stats.self_targets_dropped += dropped_self
    return out


def relationships_for_timeline(
    timeline: Timeline,
    store: Optional["KeyedLabelStore"],
    stats: Optional[ExtractStats] = None,
) -> list[Relationship]:
    """Fused extract + sentiment join + relationship index for one ego.

    Produces exactly the relationships of
    ``build_relationship_index(extract_interactions(join_sentiments(t)))``
    without materializing interactions (this is the pipeline hot path; the
    equivalence is pinned by tests).
    """
    ego = timeline.ego_id
    comm_records: list[RawRecord] = []
    downgraded = 0
    for rec in timeline.records:
        kind = rec.kind
        if kind not in COMMUNICATION_KINDS:
            continue
        if kind == QUOTE_RETWEET and not rec.text.strip():
            downgraded += 1
            continue
        comm_records.append(rec)
    if store is not None and comm_records:
        labels = store.get_batch([r.record_id for r in comm_records], default=NO_SENTIMENT)
    else:
        labels = None
    acc: dict[str, list[int]] = {}
    n_interactions = 0
    dropped_self = 0
    for i, rec in enumerate(comm_records):
        if labels is not None:
            sentiment = int(labels[i]) or rec.sentiment
        else:
            sentiment = rec.sentiment
        for target in rec.target_ids:
            if target == ego:
                dropped_self += 1
                continue
            n_interactions += 1
            counters = acc.get(target)
            if counters is None:
                counters = [0, 0, 0, 0]
                acc[target] = counters
            counters[0] += 1
            if sentiment:
                counters[sentiment] += 1
    if stats is not None:
        stats.interactions += n_interactions
        stats.downgraded_quotes += downgraded
        stats.self_targets_dropped += dropped_self
    return [
        Relationship(
            ego_id=ego,
            alter_id=alter,
            interaction_count=c[0],
            sentiment_counts=(c[POSITIVE], c[NEUTRAL], c[NEGATIVE]),
        )
        for alter, c in acc.items()
    ]


def build_relationship_index(
    interactions: Iterable[Interaction],
) -> dict[tuple[str, str], Relationship]:
    """Group interactions into directed (ego_id, alter_id) relationships."""
    acc: dict[tuple[str, str], list[int]] = {}
    for it in interactions:
        key = (it.ego_id, it.alter_id)
        counters = acc.get(key)
        if counters is None:
            counters = [0, 0, 0, 0]  # total, pos, neu, neg
            acc[key] = counters
        counters[0] += 1
        s = it.sentiment
        if s == POSITIVE:
            counters[1] += 1
        elif s == NEUTRAL:
            counters[2] += 1
        elif s == NEGATIVE:
            counters[3] += 1
    return {
        key: Relationship(
            ego_id=key[0],
            alter_id=key[1],
            interaction_count=c[0],
            sentiment_counts=(c[1], c[2], c[3]),
        )
        for key, c in acc.items()
    }


# ---------------------------------------------------------------------------
# side tables: sentiments, topics, account labels
# ---------------------------------------------------------------------------

_HASH_THRESHOLD = 2_000_000


class KeyedLabelStore:
    """record_id -> small-int value map, compact above ``_HASH_THRESHOLD`` rows.

    The compact form keeps only 64-bit string hashes (sorted, sign-flipped to
    unsigned so the top 16 bits bucket the space) plus a value array, cutting
    memory ~20x versus a str dict at the 8-9M row scale.  Lookups binary-search
    inside one radix bucket (a few hundred entries), which stays cache-resident
    unlike a full-array bisection.  The builtin string hash is process-stable
    (and inherited by forked workers); colliding hashes are detected at build
    time and force the exact dict form.  A false-positive lookup would need an
    unseen key colliding with a stored one (~1e-12 at this scale): accepted.
    """

    _BUCKET_BITS = 16

    def __init__(self) -> None:
        self._dict: Optional[dict[str, int]] = None
        self._hashes: Optional[np.ndarray] = None  # uint64, sorted
        self._values: Optional[np.ndarray] = None
        self._offsets: Optional[np.ndarray] = None  # bucket -> slice start
        self.rows = 0
        self.duplicate_keys = 0

    @classmethod
    def build(
        cls,
        make_pairs: Callable[[], Iterable[tuple[str, int]]],
        compact_hint: int = 0,
    ) -> "KeyedLabelStore":
        """Build from a replayable pair factory (called once, twice on fallback)."""
        if compact_hint and compact_hint > _HASH_THRESHOLD:
            hashes: list[int] = []
            values: list[int] = []
            for key, value in make_pairs():
                hashes.append(hash(key))
                values.append(value)
            store = cls.from_hash_lists(hashes, values)
            if store is not None:
                return store
            # true duplicate keys or hash collisions; fall back to exact form
        mapping: dict[str, int] = {}
        dups = 0
        for key, value in make_pairs():
            if key in mapping:
                dups += 1
            mapping[key] = value
        store = cls()
        store._dict = mapping
        store.rows = len(mapping)
        store.duplicate_keys = dups
        return store

    @classmethod
    def from_hash_lists(
        cls, hashes: list[int], values: list[int]
    ) -> Optional["KeyedLabelStore"]:
        return cls.from_hash_arrays(
            np.fromiter(hashes, dtype=np.int64, count=len(hashes)),
            np.fromiter(values, dtype=np.uint8, count=len(values)),
        )

    @classmethod
    def from_hash_arrays(
        cls, hashes: np.ndarray, values: np.ndarray
    ) -> Optional["KeyedLabelStore"]:
        """Compact store from pre-hashed keys; None when hashes are not unique."""
        store = cls()
        # order-preserving signed -> unsigned flip
        arr = hashes.view(np.uint64) ^ np.uint64(1 << 63)
        vals = values
        order = np.argsort(arr, kind="stable")
        arr = arr[order]
        vals = vals[order]
        if len(arr) and bool((arr[1:] == arr[:-1]).any()):
            return None
        store._hashes = arr
        store._values = vals
        store.rows = len(arr)
        shift = 64 - cls._BUCKET_BITS
        boundaries = (
            np.arange(1, (1 << cls._BUCKET_BITS) + 1, dtype=np.uint64) << np.uint64(shift)
        )
        # boundaries saturate at 2**64-1 for the last bucket; close it manually
        offsets = np.empty((1 << cls._BUCKET_BITS) + 1, dtype=np.int64)
        offsets[0] = 0
        offsets[1:-1] = np.searchsorted(arr, boundaries[:-1])
        offsets[-1] = len(arr)
        store._offsets = offsets
        return store

    def _lookup_hashes(self, qh: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized per-bucket binary search; returns (index, found mask)."""
        shift = np.uint64(64 - self._BUCKET_BITS)
        bucket = (qh >> shift).astype(np.int64)
        lo = self._offsets[bucket]
        hi = self._offsets[bucket + 1]
        arr = self._hashes
        top = max(self.rows - 1, 0)
        while True:
            active = lo < hi
            if not active.any():
                break
            mid = (lo + hi) >> 1
            below = active & (arr[np.minimum(mid, top)] < qh)
            lo = np.where(below, mid + 1, lo)
            hi = np.where(active & ~below, mid, hi)
        idx = np.minimum(lo, top)
        found = (lo < self.rows) & (arr[idx] == qh)
        return idx, found

    @staticmethod
    def _flip(hashes: np.ndarray) -> np.ndarray:
        return hashes.view(np.uint64) ^ np.uint64(1 << 63)

    def get(self, key: str, default: int = 0) -> int:
        if self._dict is not None:
            return self._dict.get(key, default)
        if not self.rows:
            return default
        qh = self._flip(np.asarray([hash(key)], dtype=np.int64))
        idx, found = self._lookup_hashes(qh)
        return int(self._values[idx[0]]) if found[0] else default

    def get_batch(self, keys: list[str], default: int = 0) -> np.ndarray:
        if self._dict is not None:
            d = self._dict
            return np.fromiter(
                (d.get(k, default) for k in keys), dtype=np.uint8, count=len(keys)
            )
        out = np.full(len(keys), default, dtype=np.uint8)
        if not len(keys) or not self.rows:
            return out
        qh = self._flip(
            np.fromiter((hash(k) for k in keys), dtype=np.int64, count=len(keys))
        )
        idx, found = self._lookup_hashes(qh)
        out[found] = self._values[idx[found]]
        return out

    def __len__(self) -> int:
        return self.rows if self._dict is None else len(self._dict)


def _iter_csv_rows(path, expected_header: tuple[str, ...]) -> Iterator[list[str]]:
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        first = next(reader, None)
        if first is None:
            return
        if [c.strip().lower() for c in first] != list(expected_header):
            yield first
        for row in reader:
            if row:
                yield row


def _count_lines(path) -> int:
    count = 0
    with open(path, "rb") as fh:
        for _ in fh:
            count += 1
    return count


def read_sentiments(path: str | os.PathLike) -> KeyedLabelStore:
    """Load ``sentiments.csv`` (record_id,label) into a label store.

    The fast path assumes plain two-column rows (no quoting); any line that
    does not match falls back to a full csv-module parse of the file.
    """
    def csv_pairs() -> Iterator[tuple[str, int]]:
        for row in _iter_csv_rows(path, ("record_id", "label")):
            if len(row) != 2:
                raise DataError(f"sentiments row must be record_id,label: {row!r}")
            label = SENTIMENT_CODES.get(row[1].strip())
            if label is None:
                raise DataError(f"unknown sentiment label {row[1]!r}")
            yield row[0], label

    # ~24 bytes per row; only roughly right, and only used to pick the layout
    if os.path.getsize(path) > 24 * _HASH_THRESHOLD:
        # chunked binary scan hashing keys as they stream by (never retains
        # the key strings; ASCII bytes hash identically to the str form).
        # Any line the plain two-column suffix match cannot judge falls back
        # to the csv module.
        import array

        suffixes = [
            (b",positive", 9, POSITIVE),
            (b",neutral", 8, NEUTRAL),
            (b",negative", 9, NEGATIVE),
        ]
        hashes = array.array("q")
        values = array.array("B")
        happend = hashes.append
        vappend = values.append

        def handle(line: bytes) -> None:
            if line.endswith(b"\r"):
                line = line[:-1]
            if not line:
                return
            for suffix, cut, label in suffixes:
                if line.endswith(suffix):
                    record_id = line[:-cut]
                    break
            else:
                if line == b"record_id,label":
                    return  # header
                raise _FastPathMiss(line)
            if b'"' in record_id or b"," in record_id or not record_id.isascii():
                raise _FastPathMiss(line)
            happend(hash(record_id))
            vappend(label)

        try:
            with open(path, "rb") as fh:
                tail = b""
                while True:
                    chunk = fh.read(1 << 22)
                    if not chunk:
                        break
                    chunk = tail + chunk
                    lines = chunk.split(b"\n")
                    tail = lines.pop()
                    for line in lines:
                        handle(line)
                if tail:
                    handle(tail)
            store = KeyedLabelStore.from_hash_arrays(
                np.frombuffer(hashes, dtype=np.int64),
                np.frombuffer(values, dtype=np.uint8),
            )
            if store is not None:
                return store
        except _FastPathMiss:
            pass
        del hashes, values
    return KeyedLabelStore.build(csv_pairs, compact_hint=_count_lines(path))


class _FastPathMiss(Exception):
    """A sentiments line needs the full csv parser."""


def read_topic_table(path: str | os.PathLike) -> dict[str, int]:
    """Load ``topics.csv`` (record_id,topic_id); absent rows mean no topic."""
    out: dict[str, int] = {}
    for row in _iter_csv_rows(path, ("record_id", "topic_id")):
        if len(row) != 2:
            raise DataError(f"topics row must be record_id,topic_id: {row!r}")
        out[row[0]] = int(row[1])
    return out


def read_account_labels(path: str | os.PathLike) -> dict[str, str]:
    """Load ``account_labels.csv`` (account_id,label in {people, other})."""
    out: dict[str, str] = {}
    for row in _iter_csv_rows(path, ("account_id", "label")):
        if len(row) != 2:
            raise DataError(f"account label row must be account_id,label: {row!r}")
        label = row[1].strip()
        if label not in ("people", "other"):
            raise DataError(f"unknown account label {label!r}")
        out[row[0]] = label
    return out


def join_sentiments(timeline: Timeline, store: KeyedLabelStore) -> Timeline:
    """Fill record sentiments from the store (in place) and return the timeline."""
    records = timeline.records
    ids = [r.record_id for r in records]
    labels = store.get_batch(ids, default=NO_SENTIMENT)
    for rec, label in zip(records, labels):
        if label:
            rec.sentiment = int(label)
    return timeline
