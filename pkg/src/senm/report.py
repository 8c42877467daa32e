"""Rendering of statistics tables (CSV/Markdown), topic tables, and SVG plots.

All emitted files are byte-deterministic: fixed column orders, fixed float
formatting, no timestamps.  Every file names the manifest that produced it
(leading ``#`` comment for CSV, footer for Markdown, ``<desc>`` for SVG).

``--table N`` selectors reproduce the published table layouts: 1 corpus
sizes, 2 network sizes and circle counts, 3 circle sizes of five-circle egos,
4/5 user negativities with a range column, 6 per-circle negativities.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Optional, Sequence

from senm.metrics import DatasetStats, EmptyResultError, negativity_range
from senm.topics import TopicNegativity


def _fmt(value: Optional[float], digits: int = 2) -> str:
    return "" if value is None else f"{value:.{digits}f}"


def stats_csv_rows(stats: Sequence[DatasetStats]) -> list[list[str]]:
    header = [
        "dataset_id", "n_egos", "n_relationships", "n_interactions",
        "mean_network_size", "size_ci_lo", "size_ci_hi",
        "mean_n_circles", "circles_ci_lo", "circles_ci_hi",
        "n_five_circle_egos",
        "size_c1", "size_c2", "size_c3", "size_c4", "size_c5",
        "mean_user_negativity_pct",
        "neg_count_c1", "neg_count_c2", "neg_count_c3", "neg_count_c4", "neg_count_c5",
        "neg_pct_c1", "neg_pct_c2", "neg_pct_c3", "neg_pct_c4", "neg_pct_c5",
        "range_c1_c4", "pct_mode",
    ]
    rows = [header]
    for s in stats:
        sizes = s.circle_sizes_5 or (None,) * 5
        pairs = s.circle_negativity_5 or ((None, None),) * 5
        rows.append(
            [
                s.dataset_id,
                str(s.n_egos), str(s.n_relationships), str(s.n_interactions),
                repr(s.mean_network_size.mean),
                repr(s.mean_network_size.lo), repr(s.mean_network_size.hi),
                repr(s.mean_n_circles.mean),
                repr(s.mean_n_circles.lo), repr(s.mean_n_circles.hi),
                str(s.n_five_circle_egos),
                *[("" if v is None else repr(v)) for v in sizes],
                repr(s.mean_user_negativity_pct),
                *[("" if c is None else repr(c)) for c, _ in pairs],
                *[("" if p is None else repr(p)) for _, p in pairs],
                "" if s.range_c1_c4 is None else repr(s.range_c1_c4),
                s.pct_mode,
            ]
        )
    return rows


def _md_table(header: list[str], rows: list[list[str]]) -> str:
    out = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    for row in rows:
        out.append("| " + " | ".join(row) + " |")
    return "\n".join(out)


def render_table(stats: Sequence[DatasetStats], table: int) -> str:
    """One published-layout table over the given dataset rows, as Markdown."""
    if table == 1:
        return _md_table(
            ["Dataset", "Egos", "Relationships", "Interactions"],
            [
                [s.dataset_id, str(s.n_egos), str(s.n_relationships), str(s.n_interactions)]
                for s in stats
            ],
        )
    if table == 2:
        return _md_table(
            ["Dataset", "Mean Network Size", "Mean # Circles", "# 5-Circle Egos"],
            [
                [
                    s.dataset_id,
                    f"{_fmt(s.mean_network_size.mean)} "
                    f"[{_fmt(s.mean_network_size.lo)}, {_fmt(s.mean_network_size.hi)}]",
                    f"{_fmt(s.mean_n_circles.mean)} "
                    f"[{_fmt(s.mean_n_circles.lo)}, {_fmt(s.mean_n_circles.hi)}]",
                    str(s.n_five_circle_egos),
                ]
                for s in stats
            ],
        )
    if table == 3:
        return _md_table(
            ["Dataset", "C1", "C2", "C3", "C4", "C5"],
            [
                [s.dataset_id, *[_fmt(v) for v in (s.circle_sizes_5 or (None,) * 5)]]
                for s in stats
            ],
        )
    if table in (4, 5):
        rows = [[s.dataset_id, _fmt(s.mean_user_negativity_pct)] for s in stats]
        try:
            rng = negativity_range(
                [(s.dataset_id, s.mean_user_negativity_pct) for s in stats]
            )
            rows.append(["Range", _fmt(rng)])
        except EmptyResultError:
            pass
        return _md_table(["Dataset", "User Negativity %"], rows)
    if table == 6:
        rows = []
        for s in stats:
            pairs = s.circle_negativity_5 or ((None, None),) * 5
            rows.append(
                [
                    s.dataset_id,
                    *[
                        f"{_fmt(c)} ({_fmt(p)}%)" if c is not None else ""
                        for c, p in pairs
                    ],
                    _fmt(s.range_c1_c4),
                ]
            )
        return _md_table(["Dataset", "C1", "C2", "C3", "C4", "C5", "Range C1-C4"], rows)
    raise ValueError(f"unknown table {table}; choose 1-6")


def circle_negativity_svg(stats: DatasetStats, stamp: str) -> str:
    """Static bar chart of per-circle negativity percentages."""
    pairs = stats.circle_negativity_5 or ()
    width, height = 420, 260
    margin, base = 40, 220
    bar_w = 48
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f"<desc>circle negativity for {stats.dataset_id}; manifest: {stamp}</desc>",
        f'<text x="{width // 2}" y="20" text-anchor="middle" font-size="13" '
        f'font-family="sans-serif">{stats.dataset_id}: negative relationships per circle</text>',
        f'<line x1="{margin}" y1="{base}" x2="{width - 10}" y2="{base}" stroke="#333"/>',
    ]
    for k, (count, pct) in enumerate(pairs):
        x = margin + 12 + k * (bar_w + 22)
        bar_h = round((pct or 0.0) * 1.6, 2)
        y = round(base - bar_h, 2)
        parts.append(
            f'<rect x="{x}" y="{y}" width="{bar_w}" height="{bar_h}" fill="#b2464b"/>'
        )
        parts.append(
            f'<text x="{x + bar_w / 2:.1f}" y="{y - 6:.1f}" text-anchor="middle" '
            f'font-size="11" font-family="sans-serif">{_fmt(pct, 1)}%</text>'
        )
        parts.append(
            f'<text x="{x + bar_w / 2:.1f}" y="{base + 16}" text-anchor="middle" '
            f'font-size="11" font-family="sans-serif">C{k + 1}</text>'
        )
        parts.append(
            f'<text x="{x + bar_w / 2:.1f}" y="{base + 32}" text-anchor="middle" '
            f'font-size="10" fill="#555" font-family="sans-serif">n={_fmt(count)}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_stats_outputs(out_dir: Path, stats: list[DatasetStats], stamp: str) -> None:
    """stats.json, stats.csv, stats.md, and one SVG per dataset."""
    payload = {"manifest": stamp, "datasets": [s.as_dict() for s in stats]}
    (out_dir / "stats.json").write_text(
        json.dumps(payload, indent=2) + "\n", encoding="utf-8"
    )
    rows = stats_csv_rows(stats)
    csv_lines = [f"# manifest: {stamp}"] + [",".join(row) for row in rows]
    (out_dir / "stats.csv").write_text("\n".join(csv_lines) + "\n", encoding="utf-8")

    sections = []
    titles = {
        1: "Dataset sizes",
        2: "Active network sizes and circle counts",
        3: "Mean circle sizes (egos with exactly 5 circles)",
        4: "Mean user negativities",
        6: "Circle negativities (egos with exactly 5 circles)",
    }
    for table in (1, 2, 3, 4, 6):
        sections.append(f"## Table {table}: {titles[table]}\n\n" + render_table(stats, table))
    sections.append(f"_manifest: {stamp}_")
    (out_dir / "stats.md").write_text("\n\n".join(sections) + "\n", encoding="utf-8")

    plots = out_dir / "plots"
    plots.mkdir(exist_ok=True)
    for s in stats:
        if s.circle_negativity_5 is None:
            continue
        name = s.dataset_id.replace("/", "_").replace(" ", "_")
        (plots / f"circle_negativity_{name}.svg").write_text(
            circle_negativity_svg(s, stamp), encoding="utf-8"
        )


def write_topic_outputs(
    out_dir: Path,
    topics: list[TopicNegativity],
    means: dict[str, tuple[Optional[float], float]],
    stamp: str,
) -> None:
    """topics_user.csv / topics_tweet.csv / categories.csv (table layouts)."""
    by_user = sorted(
        topics,
        key=lambda t: (-(t.user_negativity_pct if t.user_negativity_pct is not None else -1.0), t.topic_id),
    )
    lines = [f"# manifest: {stamp}", "rank,topic_id,keyword,category,n_users,user_negativity_pct"]
    for rank, t in enumerate(by_user, start=1):
        lines.append(
            f"{rank},{t.topic_id},{t.keyword},{t.category},{t.n_users},"
            f"{_fmt(t.user_negativity_pct)}"
        )
    (out_dir / "topics_user.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    by_tweet = sorted(topics, key=lambda t: (-t.tweet_negativity_pct, t.topic_id))
    lines = [f"# manifest: {stamp}", "rank,topic_id,keyword,category,n_users,tweet_negativity_pct"]
    for rank, t in enumerate(by_tweet, start=1):
        lines.append(
            f"{rank},{t.topic_id},{t.keyword},{t.category},{t.n_users},"
            f"{_fmt(t.tweet_negativity_pct)}"
        )
    (out_dir / "topics_tweet.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    lines = [f"# manifest: {stamp}", "category,user_negativity_pct,tweet_negativity_pct"]
    ordered = sorted(
        means.items(),
        key=lambda kv: -(kv[1][0] if kv[1][0] is not None else -1.0),
    )
    for category, (user_mean, tweet_mean) in ordered:
        lines.append(f"{category},{_fmt(user_mean)},{_fmt(tweet_mean)}")
    (out_dir / "categories.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# published-table consistency report
# ---------------------------------------------------------------------------


def render_paper_report() -> str:
    """Markdown report of the shipped published-table consistency checks."""
    from senm.paper_tables import consistency_report

    rep = consistency_report()
    lines = ["# Published-table consistency report", ""]

    lines.append("## Negativity range recomputation (pre-existing datasets)")
    lines.append("")
    rows = [
        [kind, e["column"], _fmt(e["computed"]), _fmt(e["printed"]), "yes" if e["ok"] else "NO"]
        for kind in ("bin", "all")
        for e in rep["pre_existing_column_ranges"][kind]
    ]
    lines.append(_md_table(["Subset", "Column", "Computed", "Printed", "Match"], rows))
    lines.append("")
    lines.append(
        "Row ranges: the printed Brazil and Italy values are transposed relative "
        "to recomputation from their rows; Netherlands matches."
    )
    rows = [
        [e["region"], _fmt(e["computed"]), _fmt(e["printed"]), "yes" if e["ok"] else "NO"]
        for e in rep["pre_existing_row_ranges"]
    ]
    lines.append("")
    lines.append(_md_table(["Region", "Computed", "Printed", "Match"], rows))

    lines.append("")
    lines.append("## Negativity range recomputation (novel datasets)")
    lines.append("")
    lines.append(
        "Row ranges recompute only under the exclude-Generic subset, which is "
        "therefore the convention used here."
    )
    rows = [
        [e["region"], _fmt(e["computed"]), _fmt(e["printed"]), "yes" if e["ok"] else "NO"]
        for e in rep["novel_ranges"]["rows"]
    ]
    lines.append("")
    lines.append(_md_table(["Region", "Computed (excl. generic)", "Printed", "Match"], rows))

    lines.append("")
    lines.append("## Per-circle negativity ranges (circles 1-4)")
    bad = [e for e in rep["circle_negativity_ranges"] if not e["ok"]]
    lines.append("")
    lines.append(
        f"All {len(rep['circle_negativity_ranges'])} dataset rows recompute within "
        f"0.01 ({len(bad)} failures)."
    )

    lines.append("")
    lines.append("## Circle percentages vs mean-count / mean-size")
    worst = max(rep["circle_pct_vs_counts"], key=lambda e: abs(e["delta"]))
    lines.append("")
    lines.append(
        f"All {len(rep['circle_pct_vs_counts'])} circle cells agree within 0.5pp "
        f"(worst |delta| = {abs(worst['delta']):.3f}pp, {worst['dataset']} "
        f"C{worst['circle']}), supporting the ratio-of-sums reading."
    )

    lines.append("")
    lines.append("## Topic category means")
    lines.append("")
    rows = []
    for e in rep["category_means"]:
        status = "yes" if e["ok"] else ("known discrepancy" if e["known_discrepancy"] else "NO")
        rows.append(
            [
                e["dataset"], e["metric"], e["category"], str(e["n_topics"]),
                _fmt(e["computed"]), _fmt(e["printed"]), status,
            ]
        )
    lines.append(
        _md_table(
            ["Dataset", "Metric", "Category", "Topics", "Computed", "Printed", "Match"], rows
        )
    )
    lines.append("")
    lines.append(
        "The three Generic tweet cells do not recompute from the per-topic tweet "
        "values; every user-side and non-Generic cell does."
    )
    return "\n".join(lines) + "\n"
