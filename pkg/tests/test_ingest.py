import json
import random
from datetime import datetime, timezone

import pytest

from conftest import BASE, DAY, epoch, make_record, make_timeline
from senm.ingest import (
    ExtractStats,
    KeyedLabelStore,
    ParseStats,
    build_relationship_index,
    extract_interactions,
    join_sentiments,
    parse_rfc3339_utc,
    parse_timelines,
    read_account_labels,
    read_sentiments,
    read_topic_table,
    relationships_for_timeline,
    scan_author_blocks,
)
from senm.records import CorruptInputError, DataError, NEGATIVE, NEUTRAL, POSITIVE


def wire_line(record_id, author, created_at, text="hi", kind="original", targets=()):
    return json.dumps(
        {
            "id": record_id,
            "author_id": author,
            "created_at": created_at,
            "text": text,
            "kind": kind,
            "target_ids": list(targets),
        }
    )


def write_timelines(path, lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


class TestParseRfc3339:
    def test_utc_z_form(self):
        ts, month = parse_rfc3339_utc("2021-06-05T10:20:30Z")
        expected = int(datetime(2021, 6, 5, 10, 20, 30, tzinfo=timezone.utc).timestamp())
        assert ts == expected
        assert month == "2021-06"

    def test_offset_form_normalizes_to_utc(self):
        ts, month = parse_rfc3339_utc("2021-01-01T01:30:00+02:00")
        expected = int(datetime(2020, 12, 31, 23, 30, tzinfo=timezone.utc).timestamp())
        assert ts == expected
        assert month == "2020-12"


class TestParseTimelines:
    def test_empty_file(self, tmp_path):
        path = tmp_path / "timelines.jsonl"
        path.write_text("")
        stats = ParseStats()
        timelines = list(parse_timelines(path, stats=stats))
        assert timelines == []
        assert stats.malformed_count == 0

    def test_out_of_order_records_resorted(self, tmp_path, rfc):
        lines = [
            wire_line("r3", "a", rfc(epoch(2))),
            wire_line("r1", "a", rfc(epoch(0))),
            wire_line("r2", "a", rfc(epoch(1))),
        ]
        path = write_timelines(tmp_path / "t.jsonl", lines)
        (timeline,) = parse_timelines(path)
        assert [r.record_id for r in timeline.records] == ["r1", "r2", "r3"]
        assert timeline.span_days == pytest.approx(2.0)

    def test_single_malformed_line_counted(self, tmp_path, rfc):
        lines = [wire_line(f"r{i}", "a", rfc(epoch(i))) for i in range(99)]
        lines.insert(40, '{"id": "broken", not json')
        path = write_timelines(tmp_path / "t.jsonl", lines)
        stats = ParseStats()
        (timeline,) = parse_timelines(path, stats=stats)
        assert len(timeline.records) == 99
        assert stats.malformed_count == 1
        assert stats.total_lines == 100

    def test_malformed_budget_exceeded_is_fatal(self, tmp_path, rfc):
        lines = [wire_line(f"r{i}", "a", rfc(epoch(i))) for i in range(8)]
        lines += ["junk"] * 2  # 2 of 10 lines > 10%
        path = write_timelines(tmp_path / "t.jsonl", lines)
        with pytest.raises(CorruptInputError):
            list(parse_timelines(path))

    def test_unreadable_file_raises(self, tmp_path):
        with pytest.raises(OSError):
            list(parse_timelines(tmp_path / "missing.jsonl"))

    def test_reply_without_targets_is_malformed(self, tmp_path, rfc):
        lines = [wire_line(f"r{i}", "a", rfc(epoch(i))) for i in range(12)]
        lines.append(wire_line("bad", "a", rfc(epoch(12)), kind="reply", targets=()))
        path = write_timelines(tmp_path / "t.jsonl", lines)
        stats = ParseStats()
        (timeline,) = parse_timelines(path, stats=stats)
        assert stats.malformed_count == 1
        assert len(timeline.records) == 12

    def test_interleaved_authors_grouped_in_memory(self, tmp_path, rfc):
        lines = [
            wire_line("r1", "a", rfc(epoch(0))),
            wire_line("r2", "b", rfc(epoch(0))),
            wire_line("r3", "a", rfc(epoch(1))),
        ]
        path = write_timelines(tmp_path / "t.jsonl", lines)
        timelines = {t.ego_id: t for t in parse_timelines(path)}
        assert set(timelines) == {"a", "b"}
        assert len(timelines["a"].records) == 2

    def test_grouped_mode_rejects_reappearing_author(self, tmp_path, rfc):
        lines = [
            wire_line("r1", "a", rfc(epoch(0))),
            wire_line("r2", "b", rfc(epoch(0))),
            wire_line("r3", "a", rfc(epoch(1))),
        ]
        path = write_timelines(tmp_path / "t.jsonl", lines)
        with pytest.raises(DataError):
            list(parse_timelines(path, grouped=True))

    def test_duplicate_record_ids_dropped(self, tmp_path, rfc):
        lines = [
            wire_line("r1", "a", rfc(epoch(0))),
            wire_line("r1", "a", rfc(epoch(1))),
        ]
        path = write_timelines(tmp_path / "t.jsonl", lines)
        stats = ParseStats()
        (timeline,) = parse_timelines(path, stats=stats)
        assert len(timeline.records) == 1
        assert stats.duplicate_record_ids == 1

    def test_unknown_format_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            list(parse_timelines(tmp_path / "x.csv", format="csv"))


class TestScanAuthorBlocks:
    def test_blocks_cover_file(self, tmp_path, rfc):
        lines = [wire_line(f"r{i}", f"u{i // 3}", rfc(epoch(i))) for i in range(9)]
        path = write_timelines(tmp_path / "t.jsonl", lines)
        blocks = scan_author_blocks(path)
        assert [b[0] for b in blocks] == ["u0", "u1", "u2"]
        assert blocks[0][1] == 0
        assert blocks[-1][2] == path.stat().st_size
        for (_, _, end), (_, start, _) in zip(blocks, blocks[1:]):
            assert end == start


class TestExtractInteractions:
    def test_plain_retweets_yield_nothing(self):
        timeline = make_timeline(
            [
                make_record("r1", kind="retweet", targets=("b",), text=""),
                make_record("r2", kind="retweet", targets=("c",), text="even with text"),
            ]
        )
        assert extract_interactions(timeline) == []

    def test_reply_fans_out_per_target(self):
        timeline = make_timeline(
            [make_record("r1", kind="reply", targets=("b", "c"), sentiment=POSITIVE)]
        )
        interactions = extract_interactions(timeline)
        assert len(interactions) == 2
        assert {i.alter_id for i in interactions} == {"b", "c"}
        assert all(i.source_record == "r1" for i in interactions)

    def test_self_targets_dropped(self):
        timeline = make_timeline([make_record("r1", kind="reply", targets=("ego",))])
        stats = ExtractStats()
        assert extract_interactions(timeline, stats=stats) == []
        assert stats.self_targets_dropped == 1

    def test_empty_quote_retweet_downgraded(self):
        timeline = make_timeline(
            [
                make_record("r1", kind="quote_retweet", targets=("b",), text="  "),
                make_record("r2", kind="quote_retweet", targets=("b",), text="real"),
            ]
        )
        stats = ExtractStats()
        interactions = extract_interactions(timeline, stats=stats)
        assert [i.source_record for i in interactions] == ["r2"]
        assert stats.downgraded_quotes == 1

    def test_originals_and_mentions(self):
        timeline = make_timeline(
            [
                make_record("r1", kind="original"),
                make_record("r2", kind="mention_only", targets=("b",)),
            ]
        )
        interactions = extract_interactions(timeline)
        assert [(i.alter_id, i.source_record) for i in interactions] == [("b", "r2")]


class TestRelationshipIndex:
    def test_empty(self):
        assert build_relationship_index([]) == {}

    def test_counts_per_pair(self):
        timeline = make_timeline(
            [
                make_record(f"r{i}", kind="reply", targets=("b",), sentiment=POSITIVE)
                for i in range(5)
            ]
            + [
                make_record(f"s{i}", kind="reply", targets=("c",), sentiment=NEGATIVE)
                for i in range(2)
            ]
        )
        index = build_relationship_index(extract_interactions(timeline))
        assert set(index) == {("ego", "b"), ("ego", "c")}
        assert index[("ego", "b")].interaction_count == 5
        assert index[("ego", "b")].sentiment_counts == (5, 0, 0)
        assert index[("ego", "c")].sentiment_counts == (0, 0, 2)

    def test_conservation_and_permutation_invariance(self):
        rng = random.Random(7)
        records = [
            make_record(
                f"r{i}",
                kind="reply",
                targets=(f"alter{rng.randrange(6)}",),
                ts=epoch(rng.randrange(300)),
                sentiment=rng.choice([POSITIVE, NEUTRAL, NEGATIVE]),
            )
            for i in range(120)
        ]
        interactions = extract_interactions(make_timeline(records))
        index = build_relationship_index(interactions)
        assert sum(r.interaction_count for r in index.values()) == len(interactions)

        shuffled = interactions[:]
        rng.shuffle(shuffled)
        index2 = build_relationship_index(shuffled)
        assert {k: (v.interaction_count, v.sentiment_counts) for k, v in index.items()} == {
            k: (v.interaction_count, v.sentiment_counts) for k, v in index2.items()
        }

    def test_directedness(self):
        a_to_b = make_timeline([make_record("r1", author="a", kind="reply", targets=("b",))], ego="a")
        b_to_a = make_timeline([make_record("r2", author="b", kind="reply", targets=("a",))], ego="b")
        index = build_relationship_index(
            extract_interactions(a_to_b) + extract_interactions(b_to_a)
        )
        assert set(index) == {("a", "b"), ("b", "a")}


class TestFusedRelationships:
    def test_matches_public_composition(self, tmp_path):
        rng = random.Random(11)
        kinds = ["original", "reply", "mention_only", "retweet", "quote_retweet"]
        records = []
        store_rows = {}
        for i in range(400):
            kind = rng.choice(kinds)
            targets = tuple(
                f"alter{rng.randrange(8)}" for _ in range(rng.randrange(1, 3))
            ) if kind != "original" else ()
            if kind in ("reply", "quote_retweet") and not targets:
                targets = ("alter0",)
            text = rng.choice(["", "some text", "x"])
            rid = f"r{i}"
            records.append(
                make_record(rid, kind=kind, targets=targets, ts=epoch(rng.randrange(400)), text=text)
            )
            if rng.random() < 0.9:
                store_rows[rid] = rng.choice(["positive", "neutral", "negative"])
        csv_path = tmp_path / "sentiments.csv"
        csv_path.write_text(
            "record_id,label\n"
            + "".join(f"{k},{v}\n" for k, v in store_rows.items()),
            encoding="utf-8",
        )
        store = read_sentiments(csv_path)

        timeline_a = make_timeline(records)
        timeline_b = make_timeline(records)

        fused = relationships_for_timeline(timeline_a, store)
        join_sentiments(timeline_b, store)
        index = build_relationship_index(extract_interactions(timeline_b))

        fused_map = {r.alter_id: r for r in fused}
        assert set(fused_map) == {alter for (_, alter) in index}
        for (ego, alter), rel in index.items():
            assert fused_map[alter].interaction_count == rel.interaction_count
            assert fused_map[alter].sentiment_counts == rel.sentiment_counts


class TestSideTables:
    def test_sentiments_roundtrip(self, tmp_path):
        path = tmp_path / "sentiments.csv"
        path.write_text("record_id,label\nr1,positive\nr2,negative\nr3,neutral\n")
        store = read_sentiments(path)
        assert store.get("r1") == POSITIVE
        assert store.get("r2") == NEGATIVE
        assert store.get("r3") == NEUTRAL
        assert store.get("missing") == 0
        assert list(store.get_batch(["r2", "missing", "r1"])) == [NEGATIVE, 0, POSITIVE]

    def test_sentiments_unknown_label(self, tmp_path):
        path = tmp_path / "sentiments.csv"
        path.write_text("r1,meh\n")
        with pytest.raises(DataError):
            read_sentiments(path)

    def test_topic_table(self, tmp_path):
        path = tmp_path / "topics.csv"
        path.write_text("record_id,topic_id\nr1,5\nr2,7\n")
        assert read_topic_table(path) == {"r1": 5, "r2": 7}

    def test_account_labels(self, tmp_path):
        path = tmp_path / "account_labels.csv"
        path.write_text("account_id,label\nu1,people\nu2,other\n")
        assert read_account_labels(path) == {"u1": "people", "u2": "other"}

    def test_account_labels_bad_value(self, tmp_path):
        path = tmp_path / "account_labels.csv"
        path.write_text("u1,bot\n")
        with pytest.raises(DataError):
            read_account_labels(path)


class TestKeyedLabelStoreCompact:
    def test_compact_form_matches_dict_form(self):
        rng = random.Random(3)
        pairs = [(f"key-{i}-{rng.randrange(10**9)}", rng.randrange(1, 4)) for i in range(5000)]
        compact = KeyedLabelStore.from_hash_lists(
            [hash(k) for k, _ in pairs], [v for _, v in pairs]
        )
        exact = KeyedLabelStore.build(lambda: iter(pairs))
        assert compact is not None
        keys = [k for k, _ in pairs] + ["nope", "missing-key"]
        assert list(compact.get_batch(keys)) == list(exact.get_batch(keys))
        for k, v in pairs[:50]:
            assert compact.get(k) == v

    def test_duplicate_hashes_force_exact_fallback(self):
        pairs = [("same", 1), ("same", 2)]
        assert KeyedLabelStore.from_hash_lists([hash("same")] * 2, [1, 2]) is None
        store = KeyedLabelStore.build(lambda: iter(pairs))
        assert store.get("same") == 2
        assert store.duplicate_keys == 1
