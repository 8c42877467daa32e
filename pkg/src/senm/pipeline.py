"""End-to-end pipeline: ingest -> filters -> circles -> sign -> stats [-> topics].

Every run snapshots its configuration, input digests, and per-stage counters
into ``manifest.json``.  The manifest id (sha256 over the config snapshot and
input digests) stamps every output line/file, so artifacts name the manifest
that produced them.  All data artifacts are byte-deterministic for a given
manifest id: per-ego work is order-free and results are merged in ascending
``ego_id`` order regardless of worker count or scheduling (wall-clock timings
live only in the manifest, which is excluded from determinism comparisons).

Egos are processed independently: one worker task handles a contiguous block
of a grouped ``timelines.jsonl``.  The sentiment store is built once in the
parent and shared with forked workers copy-on-write.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import multiprocessing
import os
from collections import Counter

import msgspec
import resource
import time

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Iterator, Optional

from senm import __version__
from senm.circles import EmptyNetworkError, build_ego_network
from senm.filters import (
    account_features,
    classify_account,
    filter_inactive_relationships,
)
from senm.ingest import (
    ExtractStats,
    KeyedLabelStore,
    ParseStats,
    iter_record_lines,
    parse_record_line,
    parse_timelines,
    read_account_labels,
    read_sentiments,
    relationships_for_timeline,
    scan_author_blocks,
    _DecodeError,
    _decode_line,
    _finalize_timeline,
    _record_from_wire,
)
from senm.metrics import (
    DatasetStats,
    EgoSummary,
    RATIO_OF_SUMS,
    compute_dataset_stats,
    summarize_ego,
)
from senm.records import (
    CorruptInputError,
    DataError,
    FilterReport,
    Relationship,
    Timeline,
)
from senm.signs import GoldenRatioPolicy, sign_network

log = logging.getLogger(__name__)

LARGE_FILE_BYTES = 256 * 1024 * 1024
MANIFEST_STAMP_LEN = 12


@dataclass(frozen=True)
class PipelineConfig:
    """Every knob of the pipeline with the published defaults."""

    timelines: str = ""
    sentiments: str = ""
    account_labels: str = ""
    topic_assignments: str = ""
    topic_categories: str = ""
    dataset_id: str = "dataset"
    out_dir: str = "senm_out"

    # filters
    min_tweets: int = 2000
    min_span_days: float = 183.0
    min_rate_per_3_days: float = 1.0
    skip_nonhuman_filter: bool = False
    min_annual_contact: float = 1.0

    # circles
    bandwidth: str | float = "auto"
    bandwidth_quantile: float = 0.3
    log_frequency: bool = True

    # signs
    threshold: float = 0.17
    neutral_handling: str = "denominator"

    # metrics
    pct_mode: str = RATIO_OF_SUMS

    # execution
    jobs: int = 1

    @property
    def rate_days(self) -> float:
        """'below min_rate records per 3 days' as a one-record-per-N-days window."""
        return 3.0 / self.min_rate_per_3_days

    @property
    def bandwidth_value(self) -> Optional[float]:
        if self.bandwidth == "auto":
            return None
        return float(self.bandwidth)

    def policy(self) -> GoldenRatioPolicy:
        return GoldenRatioPolicy(self.threshold, self.neutral_handling)

    def snapshot(self) -> dict:
        """Ordered, JSON-ready snapshot of every setting (manifest core)."""
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_toml(cls, path: str | os.PathLike) -> "PipelineConfig":
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
        flat: dict = {}
        for section in data.values():
            if isinstance(section, dict):
                flat.update(section)
            else:
                continue
        known = {f.name for f in fields(cls)}
        unknown = set(flat) - known
        if unknown:
            raise DataError(f"unknown config keys: {sorted(unknown)}")
        return cls(**flat)

    def with_overrides(self, **overrides) -> "PipelineConfig":
        clean = {k: v for k, v in overrides.items() if v is not None}
        return replace(self, **clean)


def digest_file(path: str | os.PathLike) -> str:
    """blake2b-256 content digest (cheaper than sha256 at the GB scale)."""
    digest = hashlib.blake2b(digest_size=32)
    with open(path, "rb") as fh:
        while True:
            chunk = fh.read(1 << 22)
            if not chunk:
                break
            digest.update(chunk)
    return "blake2b:" + digest.hexdigest()


# settings that cannot change output bytes: execution knobs and path strings
# (input content is identified by digest)
_NON_IDENTITY_KEYS = frozenset(
    {
        "jobs",
        "out_dir",
        "timelines",
        "sentiments",
        "account_labels",
        "topic_assignments",
        "topic_categories",
    }
)


def compute_manifest_id(config: PipelineConfig, input_digests: dict[str, str]) -> str:
    snapshot = {
        k: v for k, v in config.snapshot().items() if k not in _NON_IDENTITY_KEYS
    }
    core = {"config": snapshot, "inputs": input_digests}
    blob = json.dumps(core, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


# ---------------------------------------------------------------------------
# per-ego processing (runs identically inline or in a worker)
# ---------------------------------------------------------------------------


@dataclass
class EgoOutcome:
    ego_id: str
    status: str  # ok | nonhuman | irregular | empty
    reason: Optional[str]
    relationships_in: int
    relationships_removed: int
    features_line: str
    relationships_line: str
    filtered_line: Optional[str] = None
    network_line: Optional[str] = None
    signed_line: Optional[str] = None
    summary: Optional[EgoSummary] = None
    parse: Optional[ParseStats] = None
    extract: Optional[ExtractStats] = None


_ENCODER = msgspec.json.Encoder()


def _dumps(obj: dict) -> str:
    return _ENCODER.encode(obj).decode("utf-8")


def _relationships_payload(
    ego_id: str, span_years: float, n_records: int, rels: list[Relationship], stamp: str
) -> str:
    alters = [
        [r.alter_id, r.interaction_count, *r.sentiment_counts]
        for r in sorted(rels, key=lambda r: r.alter_id)
    ]
    return _dumps(
        {
            "ego_id": ego_id,
            "span_years": span_years,
            "n_records": n_records,
            "alters": alters,
            "manifest": stamp,
        }
    )


def process_timeline(
    timeline: Timeline,
    sentiment_store: Optional[KeyedLabelStore],
    config: PipelineConfig,
    account_overrides: Optional[dict[str, str]],
    stamp: str,
    extract_stats: Optional[ExtractStats] = None,
) -> EgoOutcome:
    """Run one ego through classification, filters, circles, and signing."""
    ego_id = timeline.ego_id
    feats = account_features(timeline)
    label = classify_account(
        timeline,
        classifier=None,
        overrides=account_overrides,
        skip_nonhuman_filter=config.skip_nonhuman_filter,
        features=feats,
    )
    month_counts = dict(Counter(rec.month_key for rec in timeline.records))
    features_line = _dumps(
        {
            "ego_id": ego_id,
            "n_records": len(timeline.records),
            "span_days": timeline.span_days,
            "span_years": timeline.span_years,
            "cadence_cv": round(feats.cadence_cv, 6) if math.isfinite(feats.cadence_cv) else None,
            "url_fraction": round(feats.url_fraction, 6),
            "duplicate_fraction": round(feats.duplicate_fraction, 6),
            "label": label.label,
            "label_source": label.source,
            "months": dict(sorted(month_counts.items())),
            "manifest": stamp,
        }
    )

    rels = relationships_for_timeline(timeline, sentiment_store, stats=extract_stats)
    span_years = timeline.span_years
    relationships_line = _relationships_payload(
        ego_id, span_years, len(timeline.records), rels, stamp
    )

    if label.label == "other":
        return EgoOutcome(
            ego_id, "nonhuman", "nonhuman", len(rels), 0, features_line, relationships_line
        )
    keep, reason = _irregular_from_features(
        {
            "n_records": len(timeline.records),
            "span_days": timeline.span_days,
            "months": month_counts,
        },
        config,
    )
    if not keep:
        return EgoOutcome(
            ego_id, "irregular", reason, len(rels), 0, features_line, relationships_line
        )

    kept = [
        r
        for r in rels
        if filter_inactive_relationships(r, span_years, config.min_annual_contact)
    ]
    removed = len(rels) - len(kept)
    filtered_line = _relationships_payload(
        ego_id, span_years, len(timeline.records), kept, stamp
    )
    if not kept:
        return EgoOutcome(
            ego_id,
            "empty",
            "no_active_relationships",
            len(rels),
            removed,
            features_line,
            relationships_line,
            filtered_line=filtered_line,
        )

    for r in kept:
        r.contact_frequency = r.interaction_count / span_years
    network = build_ego_network(
        kept,
        log_frequency=config.log_frequency,
        bandwidth=config.bandwidth_value,
        quantile=config.bandwidth_quantile,
    )
    network_line = _dumps(
        {
            "ego_id": ego_id,
            "n_circles": network.n_circles,
            "circle_sizes": network.circle_sizes,
            "clusters": [
                {"mode": c.mode, "alter_ids": c.alter_ids} for c in network.clusters
            ],
            "manifest": stamp,
        }
    )
    signed = sign_network(network, {r.alter_id: r for r in kept}, config.policy())
    signed_line = _dumps(
        {
            "ego_id": ego_id,
            "negativity_pct": signed.negativity_pct,
            "signs": dict(sorted(signed.signs.items())),
            "unsigned": signed.unsigned,
            "manifest": stamp,
        }
    )
    summary = summarize_ego(signed, n_interactions=sum(r.interaction_count for r in kept))
    return EgoOutcome(
        ego_id,
        "ok",
        None,
        len(rels),
        removed,
        features_line,
        relationships_line,
        filtered_line=filtered_line,
        network_line=network_line,
        signed_line=signed_line,
        summary=summary,
    )


# ---------------------------------------------------------------------------
# parallel execution over a grouped timelines file
# ---------------------------------------------------------------------------

_WORKER_STATE: dict = {}


def _init_worker_state(
    timelines_path: str,
    sentiment_store: Optional[KeyedLabelStore],
    config: PipelineConfig,
    account_overrides: Optional[dict[str, str]],
    stamp: str,
) -> None:
    _WORKER_STATE["path"] = timelines_path
    _WORKER_STATE["store"] = sentiment_store
    _WORKER_STATE["config"] = config
    _WORKER_STATE["overrides"] = account_overrides
    _WORKER_STATE["stamp"] = stamp


def _iter_timelines_in_range(
    path: str, start: int, end: int, stats: ParseStats
) -> Iterator[Timeline]:
    current: Optional[str] = None
    bucket = []
    total = malformed = parsed = 0
    decode = _decode_line
    build = _record_from_wire
    with open(path, "rb") as fh:
        fh.seek(start)
        remaining = end - start
        readline = fh.readline
        while remaining > 0:
            line = readline()
            if not line:
                break
            remaining -= len(line)
            if len(line) <= 1 and not line.strip():
                continue
            total += 1
            try:
                rec = build(decode(line))
            except (*_DecodeError, ValueError, OverflowError):
                malformed += 1
                continue
            parsed += 1
            if rec.author_id != current:
                if current is not None:
                    yield _finalize_timeline(current, bucket, stats)
                current = rec.author_id
                bucket = []
            bucket.append(rec)
    stats.total_lines += total
    stats.malformed_count += malformed
    stats.parsed_records += parsed
    if current is not None:
        yield _finalize_timeline(current, bucket, stats)


def _process_range(task: tuple[int, int]) -> tuple[list[EgoOutcome], ParseStats, ExtractStats]:
    start, end = task
    parse_stats = ParseStats()
    extract_stats = ExtractStats()
    outcomes = []
    for timeline in _iter_timelines_in_range(_WORKER_STATE["path"], start, end, parse_stats):
        outcomes.append(
            process_timeline(
                timeline,
                _WORKER_STATE["store"],
                _WORKER_STATE["config"],
                _WORKER_STATE["overrides"],
                _WORKER_STATE["stamp"],
                extract_stats=extract_stats,
            )
        )
    return outcomes, parse_stats, extract_stats


def _iter_all_timelines(path: str, stats: ParseStats) -> Iterator[Timeline]:
    grouped = os.path.getsize(path) > LARGE_FILE_BYTES
    yield from parse_timelines(path, grouped=grouped, stats=stats)


@dataclass
class RunResult:
    out_dir: Path
    manifest: dict
    stats: Optional[DatasetStats]
    report: FilterReport
    summaries: list[EgoSummary] = field(default_factory=list)


def run_pipeline(config: PipelineConfig) -> RunResult:
    """Execute the full pipeline and write every artifact plus the manifest."""
    from senm import report as report_mod

    t_start = time.perf_counter()
    timings: dict[str, float] = {}
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    inputs = {"timelines": config.timelines, "sentiments": config.sentiments}
    if config.account_labels:
        inputs["account_labels"] = config.account_labels
    if config.topic_assignments:
        inputs["topic_assignments"] = config.topic_assignments
    for name, path in inputs.items():
        if not path or not os.path.exists(path):
            raise DataError(f"input {name!r} missing: {path!r}")
    digests = {name: digest_file(path) for name, path in sorted(inputs.items())}
    timings["digest"] = time.perf_counter() - t_start

    manifest_id = compute_manifest_id(config, digests)
    stamp = manifest_id[:MANIFEST_STAMP_LEN]

    t0 = time.perf_counter()
    sentiment_store = read_sentiments(config.sentiments)
    timings["sentiment_store"] = time.perf_counter() - t0
    overrides = (
        read_account_labels(config.account_labels) if config.account_labels else None
    )

    t0 = time.perf_counter()
    parse_stats = ParseStats()
    extract_stats = ExtractStats()
    outcomes: list[EgoOutcome] = []

    jobs = max(1, config.jobs)
    blocks: Optional[list[tuple[str, int, int]]] = None
    if jobs > 1:
        try:
            blocks = scan_author_blocks(config.timelines)
        except DataError:
            log.warning("timelines not grouped by author; falling back to jobs=1")
            jobs = 1

    if jobs > 1 and blocks:
        tasks: list[tuple[int, int]] = []
        per_task = max(1, math.ceil(len(blocks) / (jobs * 8)))
        for i in range(0, len(blocks), per_task):
            chunk = blocks[i : i + per_task]
            tasks.append((chunk[0][1], chunk[-1][2]))
        ctx = multiprocessing.get_context("fork")
        _init_worker_state(
            config.timelines, sentiment_store, config, overrides, stamp
        )
        with ctx.Pool(processes=jobs) as pool:
            for chunk_outcomes, pstats, estats in pool.imap_unordered(
                _process_range, tasks
            ):
                outcomes.extend(chunk_outcomes)
                parse_stats = parse_stats.merge(pstats)
                extract_stats = extract_stats.merge(estats)
        if parse_stats.total_lines and parse_stats.malformed_count > 0.10 * parse_stats.total_lines:
            raise CorruptInputError(
                f"{parse_stats.malformed_count} of {parse_stats.total_lines} lines malformed"
            )
    else:
        for timeline in _iter_all_timelines(config.timelines, parse_stats):
            outcomes.append(
                process_timeline(
                    timeline,
                    sentiment_store,
                    config,
                    overrides,
                    stamp,
                    extract_stats=extract_stats,
                )
            )
    outcomes.sort(key=lambda o: o.ego_id)
    timings["process"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    report = FilterReport()
    report.egos_in = len(outcomes)
    summaries: list[EgoSummary] = []
    reasons: dict[str, int] = {}
    for o in outcomes:
        report.relationships_in += o.relationships_in
        if o.status == "nonhuman":
            report.removed_nonhuman += 1
            report.relationships_out += o.relationships_in
            continue
        if o.status == "irregular":
            report.removed_irregular += 1
            reasons[o.reason or "?"] = reasons.get(o.reason or "?", 0) + 1
            report.relationships_out += o.relationships_in
            continue
        report.removed_inactive += o.relationships_removed
        report.relationships_out += o.relationships_in - o.relationships_removed
        if o.status == "empty":
            report.egos_empty_after_inactive += 1
        elif o.summary is not None:
            summaries.append(o.summary)
    report.irregular_reasons = reasons
    report.egos_out = report.egos_in - report.removed_nonhuman - report.removed_irregular
    report.check_balance()

    stats: Optional[DatasetStats] = None
    if summaries:
        stats = compute_dataset_stats(
            summaries, dataset_id=config.dataset_id, pct_mode=config.pct_mode
        )
    timings["aggregate"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    _write_lines(out_dir / "ego_features.jsonl", (o.features_line for o in outcomes))
    _write_lines(out_dir / "relationships.jsonl", (o.relationships_line for o in outcomes))
    _write_lines(
        out_dir / "filtered_relationships.jsonl",
        (o.filtered_line for o in outcomes if o.filtered_line is not None),
    )
    _write_lines(
        out_dir / "ego_networks.jsonl",
        (o.network_line for o in outcomes if o.network_line is not None),
    )
    _write_lines(
        out_dir / "signed_networks.jsonl",
        (o.signed_line for o in outcomes if o.signed_line is not None),
    )
    (out_dir / "filter_report.json").write_text(
        _dumps({**report.as_dict(), "manifest": stamp}) + "\n", encoding="utf-8"
    )
    if stats is not None:
        report_mod.write_stats_outputs(out_dir, [stats], stamp)
    timings["write"] = time.perf_counter() - t0

    topics_counters: dict = {}
    if config.topic_assignments:
        t0 = time.perf_counter()
        topics_counters = _run_topics_stage(
            config, out_dir, sentiment_store, outcomes, stamp
        )
        timings["topics"] = time.perf_counter() - t0

    timings["total"] = time.perf_counter() - t_start
    rss_self = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss
    rss_children = resource.getrusage(resource.RUSAGE_CHILDREN).ru_maxrss
    manifest = {
        "manifest_id": manifest_id,
        "stamp": stamp,
        "config": config.snapshot(),
        "inputs": digests,
        "versions": {"senm": __version__},
        "counters": {
            "parse": vars(parse_stats),
            "extract": vars(extract_stats),
            "filters": report.as_dict(),
            "egos_with_networks": len(summaries),
            "five_circle_egos": stats.n_five_circle_egos if stats else 0,
            **({"topics": topics_counters} if topics_counters else {}),
        },
        "timings_seconds": {k: round(v, 3) for k, v in timings.items()},
        "peak_rss_mb": round(max(rss_self, rss_children) / 1024.0, 1),
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=False) + "\n", encoding="utf-8"
    )
    return RunResult(out_dir, manifest, stats, report, summaries)


def _write_lines(path: Path, lines) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in lines:
            fh.write(line)
            fh.write("\n")


def _run_topics_stage(
    config: PipelineConfig,
    out_dir: Path,
    sentiment_store: KeyedLabelStore,
    outcomes: list[EgoOutcome],
    stamp: str,
) -> dict:
    """Topic aggregation against the just-computed signed networks."""
    from senm import report as report_mod
    from senm.topics import analyze_topics, category_means, load_topic_assignments, load_topic_categories

    signed = _signed_networks_from_outcomes(outcomes)
    author_of = _record_author_lookup(config.timelines)
    assignments = load_topic_assignments(config.topic_assignments, author_of)
    categories = load_topic_categories(config.topic_categories or None)
    counters: dict = {}
    negativities = analyze_topics(
        assignments, signed, sentiment_store, categories, counters=counters
    )
    means = category_means(negativities)
    report_mod.write_topic_outputs(out_dir, negativities, means, stamp)
    counters["topics_analyzed"] = len(negativities)
    return counters


def _signed_networks_from_outcomes(outcomes: list[EgoOutcome]) -> dict:
    """Lightweight negativity views keyed by ego for the topics join."""

    class _NegativityOnly:
        __slots__ = ("negativity_pct",)

        def __init__(self, pct: float):
            self.negativity_pct = pct

    out = {}
    for o in outcomes:
        if o.summary is not None:
            out[o.ego_id] = _NegativityOnly(o.summary.negativity_pct)
    return out


def _record_author_lookup(timelines_path: str):
    """record_id -> author_id resolver backed by a single timeline scan."""
    mapping: dict[str, str] = {}
    stats = ParseStats()
    for line in iter_record_lines(timelines_path):
        if not line.strip():
            continue
        try:
            rec = parse_record_line(line)
        except (*_DecodeError, ValueError, OverflowError):
            stats.malformed_count += 1
            continue
        mapping[rec.record_id] = rec.author_id
    return mapping.get


# ---------------------------------------------------------------------------
# standalone stage commands
#
# Each stage reads the previous stage's artifacts and re-emits exactly the
# lines the full run would have written, so staged and single-shot runs agree
# byte for byte on shared outputs.
# ---------------------------------------------------------------------------


def _read_jsonl(path: Path) -> Iterator[dict]:
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                yield json.loads(line)


def _stage_manifest(out_dir: Path, stage: str, config: PipelineConfig, inputs: dict) -> str:
    digests = {name: digest_file(p) for name, p in sorted(inputs.items()) if p}
    manifest_id = compute_manifest_id(config, digests)
    stamp = manifest_id[:MANIFEST_STAMP_LEN]
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / f"manifest.{stage}.json").write_text(
        json.dumps(
            {
                "manifest_id": manifest_id,
                "stamp": stamp,
                "stage": stage,
                "config": config.snapshot(),
                "inputs": digests,
                "versions": {"senm": __version__},
            },
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )
    return stamp


def stage_ingest(config: PipelineConfig, out_dir: Path) -> None:
    """timelines + sentiments -> ego_features.jsonl + relationships.jsonl."""
    stamp = _stage_manifest(
        out_dir,
        "ingest",
        config,
        {"timelines": config.timelines, "sentiments": config.sentiments},
    )
    store = read_sentiments(config.sentiments) if config.sentiments else None
    overrides = (
        read_account_labels(config.account_labels) if config.account_labels else None
    )
    stats = ParseStats()
    features: list[tuple[str, str]] = []
    rels: list[tuple[str, str]] = []
    for timeline in _iter_all_timelines(config.timelines, stats):
        outcome = process_timeline(timeline, store, config, overrides, stamp)
        features.append((outcome.ego_id, outcome.features_line))
        rels.append((outcome.ego_id, outcome.relationships_line))
    features.sort()
    rels.sort()
    _write_lines(out_dir / "ego_features.jsonl", (line for _, line in features))
    _write_lines(out_dir / "relationships.jsonl", (line for _, line in rels))


def stage_filter(config: PipelineConfig, in_dir: Path, out_dir: Path) -> FilterReport:
    """ego_features + relationships -> filtered_relationships + filter_report."""
    stamp = _stage_manifest(
        out_dir,
        "filter",
        config,
        {
            "ego_features": str(in_dir / "ego_features.jsonl"),
            "relationships": str(in_dir / "relationships.jsonl"),
        },
    )
    features = {obj["ego_id"]: obj for obj in _read_jsonl(in_dir / "ego_features.jsonl")}
    report = FilterReport()
    reasons: dict[str, int] = {}
    kept_lines: list[tuple[str, str]] = []
    for obj in _read_jsonl(in_dir / "relationships.jsonl"):
        ego_id = obj["ego_id"]
        feat = features.get(ego_id)
        if feat is None:
            raise DataError(f"ego {ego_id} missing from ego_features.jsonl")
        report.egos_in += 1
        report.relationships_in += len(obj["alters"])
        if not config.skip_nonhuman_filter and feat["label"] == "other":
            report.removed_nonhuman += 1
            report.relationships_out += len(obj["alters"])
            continue
        keep, reason = _irregular_from_features(feat, config)
        if not keep:
            report.removed_irregular += 1
            reasons[reason or "?"] = reasons.get(reason or "?", 0) + 1
            report.relationships_out += len(obj["alters"])
            continue
        span_years = obj["span_years"]
        kept = [
            a
            for a in obj["alters"]
            if a[1] / span_years >= config.min_annual_contact
        ]
        report.removed_inactive += len(obj["alters"]) - len(kept)
        report.relationships_out += len(kept)
        if not kept:
            report.egos_empty_after_inactive += 1
        line = _dumps(
            {
                "ego_id": ego_id,
                "span_years": span_years,
                "n_records": obj["n_records"],
                "alters": kept,
                "manifest": stamp,
            }
        )
        kept_lines.append((ego_id, line))
    report.irregular_reasons = reasons
    report.egos_out = report.egos_in - report.removed_nonhuman - report.removed_irregular
    report.check_balance()
    kept_lines.sort()
    _write_lines(out_dir / "filtered_relationships.jsonl", (l for _, l in kept_lines))
    (out_dir / "filter_report.json").write_text(
        _dumps({**report.as_dict(), "manifest": stamp}) + "\n", encoding="utf-8"
    )
    return report


def _irregular_from_features(feat: dict, config: PipelineConfig) -> tuple[bool, Optional[str]]:
    from senm.filters import REASON_MIN_TWEETS, REASON_RATE, REASON_SPAN, _days_in_month

    if feat["n_records"] < config.min_tweets:
        return False, REASON_MIN_TWEETS
    if feat["span_days"] < config.min_span_days:
        return False, REASON_SPAN
    months = feat["months"]
    below = sum(
        1
        for month, count in months.items()
        if count < _days_in_month(month) / config.rate_days
    )
    if below * 2 > len(months):
        return False, REASON_RATE
    return True, None


def _relationships_from_line(obj: dict) -> list[Relationship]:
    span_years = obj["span_years"]
    out = []
    for alter_id, count, pos, neu, neg in obj["alters"]:
        out.append(
            Relationship(
                ego_id=obj["ego_id"],
                alter_id=alter_id,
                interaction_count=count,
                sentiment_counts=(pos, neu, neg),
                contact_frequency=count / span_years,
            )
        )
    return out


def stage_circles(config: PipelineConfig, in_dir: Path, out_dir: Path) -> int:
    """filtered_relationships -> ego_networks.jsonl; returns networks written."""
    stamp = _stage_manifest(
        out_dir,
        "circles",
        config,
        {"filtered_relationships": str(in_dir / "filtered_relationships.jsonl")},
    )
    lines: list[tuple[str, str]] = []
    for obj in _read_jsonl(in_dir / "filtered_relationships.jsonl"):
        rels = _relationships_from_line(obj)
        if not rels:
            continue
        network = build_ego_network(
            rels,
            log_frequency=config.log_frequency,
            bandwidth=config.bandwidth_value,
            quantile=config.bandwidth_quantile,
        )
        lines.append(
            (
                obj["ego_id"],
                _dumps(
                    {
                        "ego_id": network.ego_id,
                        "n_circles": network.n_circles,
                        "circle_sizes": network.circle_sizes,
                        "clusters": [
                            {"mode": c.mode, "alter_ids": c.alter_ids}
                            for c in network.clusters
                        ],
                        "manifest": stamp,
                    }
                ),
            )
        )
    lines.sort()
    _write_lines(out_dir / "ego_networks.jsonl", (l for _, l in lines))
    return len(lines)


def stage_sign(config: PipelineConfig, in_dir: Path, out_dir: Path) -> int:
    """filtered_relationships + ego_networks -> signed_networks.jsonl."""
    from senm.records import Cluster, EgoNetwork

    stamp = _stage_manifest(
        out_dir,
        "sign",
        config,
        {
            "filtered_relationships": str(in_dir / "filtered_relationships.jsonl"),
            "ego_networks": str(in_dir / "ego_networks.jsonl"),
        },
    )
    rels_by_ego: dict[str, dict[str, Relationship]] = {}
    for obj in _read_jsonl(in_dir / "filtered_relationships.jsonl"):
        rels_by_ego[obj["ego_id"]] = {
            r.alter_id: r for r in _relationships_from_line(obj)
        }
    lines: list[tuple[str, str]] = []
    for obj in _read_jsonl(in_dir / "ego_networks.jsonl"):
        ego_id = obj["ego_id"]
        network = EgoNetwork(
            ego_id=ego_id,
            clusters=[
                Cluster(mode=c["mode"], alter_ids=list(c["alter_ids"]))
                for c in obj["clusters"]
            ],
        )
        signed = sign_network(network, rels_by_ego.get(ego_id, {}), config.policy())
        lines.append(
            (
                ego_id,
                _dumps(
                    {
                        "ego_id": ego_id,
                        "negativity_pct": signed.negativity_pct,
                        "signs": dict(sorted(signed.signs.items())),
                        "unsigned": signed.unsigned,
                        "manifest": stamp,
                    }
                ),
            )
        )
    lines.sort()
    _write_lines(out_dir / "signed_networks.jsonl", (l for _, l in lines))
    return len(lines)


def load_run_summaries(run_dir: Path) -> list[EgoSummary]:
    """Rebuild per-ego summaries from a run directory's artifacts."""
    from senm.records import Cluster, EgoNetwork, SignedEgoNetwork

    interactions: dict[str, int] = {}
    for obj in _read_jsonl(run_dir / "filtered_relationships.jsonl"):
        interactions[obj["ego_id"]] = sum(a[1] for a in obj["alters"])
    signed_lines = {
        obj["ego_id"]: obj for obj in _read_jsonl(run_dir / "signed_networks.jsonl")
    }
    summaries = []
    for obj in _read_jsonl(run_dir / "ego_networks.jsonl"):
        ego_id = obj["ego_id"]
        signed_obj = signed_lines.get(ego_id)
        if signed_obj is None:
            raise DataError(f"ego {ego_id} has a network but no signed network")
        network = EgoNetwork(
            ego_id=ego_id,
            clusters=[
                Cluster(mode=c["mode"], alter_ids=list(c["alter_ids"]))
                for c in obj["clusters"]
            ],
        )
        signed = SignedEgoNetwork(
            network=network,
            signs=dict(signed_obj["signs"]),
            unsigned=list(signed_obj.get("unsigned", [])),
        )
        summaries.append(summarize_ego(signed, interactions.get(ego_id, 0)))
    return summaries


def stage_stats(config: PipelineConfig, run_dirs: list[Path], out_dir: Path) -> list[DatasetStats]:
    """Aggregate one stats row per run directory and write the report files."""
    from senm import report as report_mod

    stamp = _stage_manifest(
        out_dir,
        "stats",
        config,
        {
            f"run{i}": str(d / "signed_networks.jsonl")
            for i, d in enumerate(run_dirs)
        },
    )
    rows = []
    for run_dir in run_dirs:
        dataset_id = config.dataset_id if len(run_dirs) == 1 else run_dir.name
        summaries = load_run_summaries(run_dir)
        rows.append(
            compute_dataset_stats(summaries, dataset_id=dataset_id, pct_mode=config.pct_mode)
        )
    report_mod.write_stats_outputs(out_dir, rows, stamp)
    return rows


def stage_topics(config: PipelineConfig, run_dir: Path, out_dir: Path) -> int:
    """signed networks + topic assignments + sentiments -> topic tables."""
    from senm import report as report_mod
    from senm.topics import (
        analyze_topics,
        category_means,
        load_topic_assignments,
        load_topic_categories,
    )

    stamp = _stage_manifest(
        out_dir,
        "topics",
        config,
        {
            "signed_networks": str(run_dir / "signed_networks.jsonl"),
            "topic_assignments": config.topic_assignments,
            "sentiments": config.sentiments,
            "timelines": config.timelines,
        },
    )

    class _NegativityOnly:
        __slots__ = ("negativity_pct",)

        def __init__(self, pct: float):
            self.negativity_pct = pct

    signed = {
        obj["ego_id"]: _NegativityOnly(obj["negativity_pct"])
        for obj in _read_jsonl(run_dir / "signed_networks.jsonl")
    }
    store = read_sentiments(config.sentiments)
    author_of = _record_author_lookup(config.timelines)
    assignments = load_topic_assignments(config.topic_assignments, author_of)
    categories = load_topic_categories(config.topic_categories or None)
    negativities = analyze_topics(assignments, signed, store, categories)
    means = category_means(negativities)
    report_mod.write_topic_outputs(out_dir, negativities, means, stamp)
    return len(negativities)
