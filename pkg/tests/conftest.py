import sys
from datetime import datetime, timezone
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from senm.records import RawRecord, Timeline

BASE = int(datetime(2021, 1, 1, tzinfo=timezone.utc).timestamp())
DAY = 86_400


def epoch(day: float = 0.0, seconds: int = 0) -> int:
    return BASE + int(day * DAY) + seconds


def month_key_of(ts: int) -> str:
    dt = datetime.fromtimestamp(ts, tz=timezone.utc)
    return f"{dt.year:04d}-{dt.month:02d}"


def make_record(
    record_id: str,
    author: str = "ego",
    ts: int = BASE,
    text: str = "hello",
    kind: str = "original",
    targets: tuple = (),
    sentiment: int = 0,
) -> RawRecord:
    return RawRecord(
        record_id=record_id,
        author_id=author,
        timestamp=ts,
        month_key=month_key_of(ts),
        text=text,
        kind=kind,
        target_ids=tuple(targets),
        sentiment=sentiment,
    )


def make_timeline(records, ego: str = "ego") -> Timeline:
    return Timeline(ego_id=ego, records=sorted(records, key=lambda r: (r.timestamp, r.record_id)))


@pytest.fixture
def rfc(request):
    """Format an epoch as the RFC 3339 string the wire format uses."""

    def fmt(ts: int) -> str:
        return (
            datetime.fromtimestamp(ts, tz=timezone.utc)
            .strftime("%Y-%m-%dT%H:%M:%SZ")
        )

    return fmt
