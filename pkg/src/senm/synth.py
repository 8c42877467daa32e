"""Synthetic datasets with planted ground truth.

The generator emits the exact ``timelines.jsonl`` / ``sentiments.csv`` input
formats plus ``ground_truth.jsonl``, planting:

- a banded contact-frequency structure (band means with geometric spacing,
  lognormal within-band jitter, per-alter interaction counts rounded from
  frequency x span) whose bands the clustering stage should recover;
- a per-relationship negative-interaction probability whose induced share of
  negative relationships :func:`analytic_negativity` computes in closed form
  (lognormal count mass against exact binomial tails).

Planted relationships are conditioned to stay above the one-interaction-per-
year activity floor (counts below it are redrawn), so the inactive filter
passes everything through and planted circle sizes survive to the output.
Fractional band-size targets (the 1.5-alter innermost circle) are realized by
deterministic alternation across egos, so dataset means hit the targets
exactly.

Generation is deterministic: per-ego substreams are seeded from
``(seed, ego_index)``, so any ego can be regenerated independently.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.stats import binom, lognorm

from senm.records import DAYS_PER_YEAR, SECONDS_PER_DAY

BASE_EPOCH = int(datetime(2020, 1, 1, tzinfo=timezone.utc).timestamp())
_COMM_KINDS = ("reply", "mention_only", "quote_retweet")
_MAX_REDRAWS = 100_000


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of a planted dataset.

    ``band_means`` are contact-frequency band centers (per year), innermost
    first (highest mean); ``band_increments`` are expected per-band alter
    counts, so cumulative targets are their partial sums.  ``neg_prob`` is a
    scalar or per-band negative-interaction probability.
    """

    n_egos: int = 200
    band_means: tuple[float, ...] = (81.0, 27.0, 9.0, 3.0, 1.0)
    band_increments: tuple[float, ...] = (1.5, 3.5, 10.0, 35.0, 100.0)
    noise_cv: float = 0.1
    neg_prob: float | tuple[float, ...] = 0.25
    span_years: float = 4.2
    seed: int = 20240901
    min_records: int = 2010
    n_plain_retweets: int = 5
    positive_share: float = 0.75  # of non-negative interactions

    def __post_init__(self) -> None:
        if self.n_egos < 1:
            raise ValueError("n_egos must be positive")
        if len(self.band_means) != len(self.band_increments):
            raise ValueError("band_means and band_increments must align")
        if any(m <= 0 for m in self.band_means):
            raise ValueError("band means must be positive")
        if any(s <= 0 for s in self.band_increments):
            raise ValueError("band increments must be positive")
        if self.span_years <= 0:
            raise ValueError("span_years must be positive")
        if not 0.0 <= self.noise_cv < 1.0:
            raise ValueError("noise_cv must be in [0, 1)")
        for hi, lo in zip(self.band_means, self.band_means[1:]):
            if hi <= lo:
                raise ValueError("band means must be strictly decreasing")
            if hi - lo <= 2.0 * self.noise_cv * (hi + lo):
                raise ValueError(
                    f"bands {hi} and {lo} are not separable at noise_cv="
                    f"{self.noise_cv} (gap must exceed twice the combined "
                    "noise scale)"
                )
        for p in self.band_neg_probs():
            if not 0.0 <= p <= 1.0:
                raise ValueError("neg_prob values must be in [0, 1]")

    def band_neg_probs(self) -> tuple[float, ...]:
        if isinstance(self.neg_prob, tuple):
            if len(self.neg_prob) != len(self.band_means):
                raise ValueError("per-band neg_prob must align with band_means")
            return self.neg_prob
        return tuple([float(self.neg_prob)] * len(self.band_means))

    def cumulative_targets(self) -> tuple[float, ...]:
        acc, out = 0.0, []
        for inc in self.band_increments:
            acc += inc
            out.append(acc)
        return tuple(out)

    @property
    def sigma(self) -> float:
        return math.sqrt(math.log(1.0 + self.noise_cv**2))

    @property
    def span_seconds(self) -> int:
        return round(self.span_years * DAYS_PER_YEAR * SECONDS_PER_DAY)

    @property
    def min_count(self) -> int:
        """Smallest interaction count clearing the once-per-year floor."""
        return math.ceil(self.span_years - 1e-9)

    def realized_cumulative_sizes(self, ego_index: int) -> list[int]:
        """Integer cumulative band sizes for one ego.

        Fractional targets alternate between floor and ceil (Bresenham over
        the ego index), so the across-ego mean equals the target exactly.
        """
        out = []
        for target in self.cumulative_targets():
            base = math.floor(target + 1e-9)
            frac = target - base
            extra = math.floor((ego_index + 1) * frac + 1e-9) - math.floor(
                ego_index * frac + 1e-9
            )
            out.append(base + extra)
        for prev, cur in zip(out, out[1:]):
            if cur <= prev:
                raise ValueError("cumulative band targets must leave room for every band")
        if out[0] < 1:
            raise ValueError("innermost band must hold at least one alter")
        return out


@dataclass
class GroundTruthAlter:
    alter_id: str
    band: int
    freq_mean: float
    neg_prob: float
    count: int


@dataclass
class GenerationResult:
    timelines_path: Path
    sentiments_path: Path
    ground_truth_path: Path
    n_egos: int
    n_records: int
    n_interactions: int
    n_relationships: int


_DAY_STR: dict[int, str] = {}


def _format_ts(epoch: int) -> str:
    day, rest = divmod(epoch, SECONDS_PER_DAY)
    prefix = _DAY_STR.get(day)
    if prefix is None:
        dt = datetime.fromtimestamp(day * SECONDS_PER_DAY, tz=timezone.utc)
        prefix = f"{dt.year:04d}-{dt.month:02d}-{dt.day:02d}"
        _DAY_STR[day] = prefix
    h, rest = divmod(rest, 3600)
    m, s = divmod(rest, 60)
    return f"{prefix}T{h:02d}:{m:02d}:{s:02d}Z"


def _draw_count(rng: np.random.Generator, mean: float, spec: SynthSpec) -> int:
    """Count = round(jittered frequency x span), redrawn to clear the floor."""
    span = spec.span_years
    sigma = spec.sigma
    if sigma == 0.0:
        count = round(mean * span)
        if count < spec.min_count:
            raise ValueError(
                f"band mean {mean}/yr cannot clear the activity floor with "
                f"noise_cv=0 over {span} years"
            )
        return count
    for _ in range(_MAX_REDRAWS):
        freq = mean * math.exp(sigma * rng.standard_normal() - 0.5 * sigma * sigma)
        count = round(freq * span)
        if count >= spec.min_count:
            return count
    raise ValueError(f"band mean {mean}/yr almost never clears the activity floor")


def generate(spec: SynthSpec, out_dir: str | os.PathLike) -> GenerationResult:
    """Write timelines.jsonl, sentiments.csv, and ground_truth.jsonl."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    timelines_path = out / "timelines.jsonl"
    sentiments_path = out / "sentiments.csv"
    ground_truth_path = out / "ground_truth.jsonl"

    probs = spec.band_neg_probs()
    t0 = BASE_EPOCH
    t1 = BASE_EPOCH + spec.span_seconds
    total_records = total_interactions = total_rels = 0

    with (
        open(timelines_path, "w", encoding="utf-8") as tl,
        open(sentiments_path, "w", encoding="utf-8") as sents,
        open(ground_truth_path, "w", encoding="utf-8") as gt,
    ):
        sents.write("record_id,label\n")
        for ego_index in range(spec.n_egos):
            rng = np.random.default_rng(np.random.SeedSequence((spec.seed, ego_index)))
            ego_id = f"e{ego_index:05d}"
            cumulative = spec.realized_cumulative_sizes(ego_index)

            alters: list[GroundTruthAlter] = []
            prev = 0
            for band, cum in enumerate(cumulative):
                for j in range(cum - prev):
                    alter_id = f"a{ego_index:05d}-{band}-{j:03d}"
                    count = _draw_count(rng, spec.band_means[band], spec)
                    alters.append(
                        GroundTruthAlter(alter_id, band, spec.band_means[band], probs[band], count)
                    )
                prev = cum

            # events as (timestamp, kind, text, target, sentiment); sentiment
            # "" marks records that carry no sentiment row
            events: list[tuple[int, str, str, str, str]] = []
            seq = 0
            for alter in alters:
                ts = rng.integers(t0 + 1, t1, size=alter.count)
                u = rng.random(alter.count)
                for k in range(alter.count):
                    if u[k] < alter.neg_prob:
                        label = "negative"
                    elif u[k] < alter.neg_prob + spec.positive_share * (1.0 - alter.neg_prob):
                        label = "positive"
                    else:
                        label = "neutral"
                    kind = _COMM_KINDS[seq % 3]
                    events.append((int(ts[k]), kind, f"t{seq}", alter.alter_id, label))
                    seq += 1
            n_comm = seq

            for k in range(spec.n_plain_retweets):
                target = alters[int(rng.integers(0, len(alters)))].alter_id
                events.append((int(rng.integers(t0 + 1, t1)), "retweet", "", target, ""))
            events.append((t0, "original", f"x{ego_index}-start", "", ""))
            events.append((t1, "original", f"x{ego_index}-end", "", ""))
            n_pad = spec.min_records - len(events)
            if n_pad > 0:
                pad_ts = rng.integers(t0 + 1, t1, size=n_pad)
                for k in range(n_pad):
                    events.append((int(pad_ts[k]), "original", f"p{k}", "", ""))

            events.sort(key=lambda e: e[0])
            lines: list[str] = []
            sent_rows: list[str] = []
            for seq, (ts, kind, text, target, label) in enumerate(events):
                record_id = f"t{ego_index:05d}-{seq:06d}"
                targets = f'["{target}"]' if target else "[]"
                lines.append(
                    f'{{"id":"{record_id}","author_id":"{ego_id}",'
                    f'"created_at":"{_format_ts(ts)}","text":"{text}",'
                    f'"kind":"{kind}","target_ids":{targets}}}\n'
                )
                if label:
                    sent_rows.append(f"{record_id},{label}\n")
            tl.write("".join(lines))
            sents.write("".join(sent_rows))

            gt_alters = ",".join(
                f'{{"alter_id":"{a.alter_id}","band":{a.band},'
                f'"freq_mean":{a.freq_mean},"neg_prob":{a.neg_prob},'
                f'"count":{a.count}}}'
                for a in alters
            )
            gt.write(
                f'{{"ego_id":"{ego_id}","span_years":{spec.span_years},'
                f'"alters":[{gt_alters}]}}\n'
            )

            total_records += len(events)
            total_interactions += n_comm
            total_rels += len(alters)

    return GenerationResult(
        timelines_path=timelines_path,
        sentiments_path=sentiments_path,
        ground_truth_path=ground_truth_path,
        n_egos=spec.n_egos,
        n_records=total_records,
        n_interactions=total_interactions,
        n_relationships=total_rels,
    )


# ---------------------------------------------------------------------------
# closed-form expectation of the dataset negativity
# ---------------------------------------------------------------------------


def count_pmf(spec: SynthSpec, band: int, tail: float = 1e-13) -> dict[int, float]:
    """Exact pmf of a band's kept interaction count.

    Counts are ``round(freq * span)`` with lognormal ``freq``, conditioned on
    clearing the activity floor (the generator redraws below it).
    """
    mean = spec.band_means[band]
    span = spec.span_years
    sigma = spec.sigma
    if sigma == 0.0:
        return {round(mean * span): 1.0}
    mu = math.log(mean) - 0.5 * sigma * sigma
    dist = lognorm(s=sigma, scale=math.exp(mu))
    k_max = max(spec.min_count, math.ceil(dist.ppf(1.0 - tail) * span) + 1)
    pmf: dict[int, float] = {}
    for k in range(spec.min_count, k_max + 1):
        lo = (k - 0.5) / span
        hi = (k + 0.5) / span
        mass = float(dist.cdf(hi) - dist.cdf(max(lo, 0.0)))
        if mass > 0.0:
            pmf[k] = mass
    total = sum(pmf.values())
    if total <= 0.0:
        raise ValueError(f"band {band} has no count mass above the activity floor")
    return {k: v / total for k, v in pmf.items()}


def min_negatives_to_flip(total: int, threshold: float = 0.17) -> int:
    """Smallest negative count that signs a relationship negative.

    Mirrors the float comparison used when signing (fraction strictly above
    the threshold flips the sign).
    """
    for j in range(total + 1):
        if j / total > threshold:
            return j
    return total + 1


def negative_sign_probability(count: int, p: float, threshold: float = 0.17) -> float:
    """P(a relationship with ``count`` interactions is signed negative)."""
    j = min_negatives_to_flip(count, threshold)
    if j > count:
        return 0.0
    return float(binom.sf(j - 1, count, p))


def analytic_negativity(spec: SynthSpec, threshold: float = 0.17) -> float:
    """Expected dataset negativity (percent) under the planted model.

    Every ego's relationship count is the same fixed total, so the dataset
    mean of per-ego negativity percentages equals the band-size-weighted mean
    of per-band negative-sign probabilities.
    """
    weights = spec.band_increments
    total_weight = sum(weights)
    acc = 0.0
    for band, weight in enumerate(weights):
        p = spec.band_neg_probs()[band]
        band_prob = sum(
            mass * negative_sign_probability(count, p, threshold)
            for count, mass in count_pmf(spec, band).items()
        )
        acc += weight * band_prob
    return 100.0 * acc / total_weight


def load_ground_truth(path: str | os.PathLike) -> dict[str, dict]:
    """ego_id -> {alter_id -> band} plus per-ego metadata."""
    import json

    out: dict[str, dict] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            out[obj["ego_id"]] = {
                "span_years": obj["span_years"],
                "bands": {a["alter_id"]: a["band"] for a in obj["alters"]},
                "neg_probs": {a["alter_id"]: a["neg_prob"] for a in obj["alters"]},
                "counts": {a["alter_id"]: a["count"] for a in obj["alters"]},
            }
    return out
