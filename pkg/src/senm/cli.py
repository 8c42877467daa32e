"""The ``senm`` command line: composable pipeline stages plus synthesis.

Exit codes: 0 success, 1 data error (stage name on stderr), 2 usage error.

Configuration precedence: built-in defaults < ``--config`` TOML < flags.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from senm.pipeline import (
    PipelineConfig,
    run_pipeline,
    stage_circles,
    stage_filter,
    stage_ingest,
    stage_sign,
    stage_stats,
    stage_topics,
)
from senm.records import DataError


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML config file; flags override it")
    p.add_argument("--dataset-id", dest="dataset_id")
    p.add_argument("--min-tweets", type=int, dest="min_tweets")
    p.add_argument("--min-span-days", type=float, dest="min_span_days")
    p.add_argument("--min-rate-per-3-days", type=float, dest="min_rate_per_3_days")
    p.add_argument(
        "--skip-nonhuman-filter",
        action=argparse.BooleanOptionalAction,
        default=None,
        dest="skip_nonhuman_filter",
    )
    p.add_argument("--min-annual-contact", type=float, dest="min_annual_contact")
    p.add_argument(
        "--bandwidth",
        dest="bandwidth",
        help='"auto" or a float in the clustering space',
    )
    p.add_argument("--bandwidth-quantile", type=float, dest="bandwidth_quantile")
    p.add_argument(
        "--log-frequency",
        action=argparse.BooleanOptionalAction,
        default=None,
        dest="log_frequency",
        help="cluster log contact frequencies (default) or raw ones",
    )
    p.add_argument("--threshold", type=float, dest="threshold")
    p.add_argument(
        "--neutral-handling",
        choices=["denominator", "exclude"],
        dest="neutral_handling",
    )
    p.add_argument(
        "--pct-mode", choices=["ratio_of_sums", "mean_of_ratios"], dest="pct_mode"
    )


def _config_from_args(args: argparse.Namespace, **extra) -> PipelineConfig:
    config = (
        PipelineConfig.from_toml(args.config)
        if getattr(args, "config", None)
        else PipelineConfig()
    )
    keys = (
        "dataset_id",
        "min_tweets",
        "min_span_days",
        "min_rate_per_3_days",
        "skip_nonhuman_filter",
        "min_annual_contact",
        "bandwidth",
        "bandwidth_quantile",
        "log_frequency",
        "threshold",
        "neutral_handling",
        "pct_mode",
    )
    overrides = {k: getattr(args, k, None) for k in keys}
    overrides.update(extra)
    if overrides.get("bandwidth") not in (None, "auto"):
        overrides["bandwidth"] = float(overrides["bandwidth"])
    return config.with_overrides(**overrides)


def _input_paths(in_dir: str) -> dict:
    base = Path(in_dir)
    out = {
        "timelines": str(base / "timelines.jsonl"),
        "sentiments": str(base / "sentiments.csv"),
    }
    labels = base / "account_labels.csv"
    if labels.exists():
        out["account_labels"] = str(labels)
    assignments = base / "topic_assignments.jsonl"
    if assignments.exists():
        out["topic_assignments"] = str(assignments)
    return out


def _parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(","))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="senm",
        description="Signed Ego Network Models from interaction timelines",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset with ground truth")
    p.add_argument("--out", required=True)
    p.add_argument("--spec", default="default", choices=["default"], help="named base spec")
    p.add_argument("--egos", type=int)
    p.add_argument("--span-years", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--noise-cv", type=float)
    p.add_argument("--neg-prob", type=float)
    p.add_argument("--bands", help="comma-separated band means, innermost first")
    p.add_argument("--band-sizes", help="comma-separated expected alters per band")

    p = sub.add_parser("run", help="full pipeline: ingest -> filters -> circles -> sign -> stats")
    p.add_argument("--in", dest="in_dir", help="directory with timelines.jsonl + sentiments.csv")
    p.add_argument("--timelines")
    p.add_argument("--sentiments")
    p.add_argument("--account-labels", dest="account_labels")
    p.add_argument("--topics", dest="topic_assignments")
    p.add_argument("--topic-categories", dest="topic_categories")
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    _add_config_flags(p)

    p = sub.add_parser("ingest", help="parse timelines and build the relationship index")
    p.add_argument("--timelines", required=True)
    p.add_argument("--sentiments", required=True)
    p.add_argument("--account-labels", dest="account_labels")
    p.add_argument("--out", required=True)
    _add_config_flags(p)

    p = sub.add_parser("filter", help="apply the three preprocessing filters")
    p.add_argument("--in", dest="in_dir", required=True, help="ingest output directory")
    p.add_argument("--out", required=True)
    _add_config_flags(p)

    p = sub.add_parser("circles", help="cluster alters into concentric circles")
    p.add_argument("--in", dest="in_dir", required=True, help="filter output directory")
    p.add_argument("--out", required=True)
    _add_config_flags(p)

    p = sub.add_parser("sign", help="sign relationships and assemble signed networks")
    p.add_argument("--in", dest="in_dir", required=True, help="circles output directory")
    p.add_argument("--out", required=True)
    _add_config_flags(p)

    p = sub.add_parser("stats", help="dataset statistics tables from run outputs")
    p.add_argument("--in", dest="in_dirs", nargs="+", required=True)
    p.add_argument("--out")
    p.add_argument("--table", type=int, choices=range(1, 7))
    _add_config_flags(p)

    p = sub.add_parser("topics", help="per-topic negativity tables")
    p.add_argument("--in", dest="in_dir", required=True, help="run directory with signed networks")
    p.add_argument("--timelines", required=True)
    p.add_argument("--sentiments", required=True)
    p.add_argument("--assignments", required=True)
    p.add_argument("--topic-categories", dest="topic_categories")
    p.add_argument("--out", required=True)
    _add_config_flags(p)

    p = sub.add_parser("report", help="published-table consistency report")
    p.add_argument("--out", help="write Markdown here instead of stdout")

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    stage = args.command
    try:
        return _dispatch(args)
    except DataError as exc:
        print(f"stage {stage} failed: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"stage {stage} failed: {exc}", file=sys.stderr)
        return 1


def _dispatch(args: argparse.Namespace) -> int:
    from senm import report as report_mod

    if args.command == "synth":
        from senm.synth import SynthSpec, generate

        kwargs = {}
        if args.egos is not None:
            kwargs["n_egos"] = args.egos
        if args.span_years is not None:
            kwargs["span_years"] = args.span_years
        if args.seed is not None:
            kwargs["seed"] = args.seed
        if args.noise_cv is not None:
            kwargs["noise_cv"] = args.noise_cv
        if args.neg_prob is not None:
            kwargs["neg_prob"] = args.neg_prob
        if args.bands:
            kwargs["band_means"] = _parse_floats(args.bands)
        if args.band_sizes:
            kwargs["band_increments"] = _parse_floats(args.band_sizes)
        try:
            spec = SynthSpec(**kwargs)
        except ValueError as exc:
            raise DataError(str(exc)) from exc
        result = generate(spec, args.out)
        print(
            f"wrote {result.n_egos} egos, {result.n_records} records, "
            f"{result.n_interactions} interactions to {args.out}"
        )
        return 0

    if args.command == "run":
        extra = {}
        if args.in_dir:
            extra.update(_input_paths(args.in_dir))
        for key in ("timelines", "sentiments", "account_labels", "topic_assignments", "topic_categories"):
            value = getattr(args, key, None)
            if value:
                extra[key] = value
        config = _config_from_args(args, out_dir=args.out, jobs=args.jobs, **extra)
        result = run_pipeline(config)
        stats = result.stats
        print(f"run complete: {result.out_dir / 'manifest.json'}")
        if stats:
            print(
                f"egos={stats.n_egos} mean_size={stats.mean_network_size.mean:.2f} "
                f"mean_circles={stats.mean_n_circles.mean:.2f} "
                f"negativity={stats.mean_user_negativity_pct:.2f}%"
            )
        return 0

    if args.command == "ingest":
        extra = {"timelines": args.timelines, "sentiments": args.sentiments}
        if args.account_labels:
            extra["account_labels"] = args.account_labels
        config = _config_from_args(args, **extra)
        stage_ingest(config, Path(args.out))
        print(f"ingest complete: {args.out}")
        return 0

    if args.command == "filter":
        config = _config_from_args(args)
        report = stage_filter(config, Path(args.in_dir), Path(args.out))
        print(
            f"filter complete: egos {report.egos_in} -> {report.egos_out}, "
            f"relationships {report.relationships_in} -> {report.relationships_out}"
        )
        return 0

    if args.command == "circles":
        config = _config_from_args(args)
        n = stage_circles(config, Path(args.in_dir), Path(args.out))
        print(f"circles complete: {n} ego networks")
        return 0

    if args.command == "sign":
        config = _config_from_args(args)
        n = stage_sign(config, Path(args.in_dir), Path(args.out))
        print(f"sign complete: {n} signed networks")
        return 0

    if args.command == "stats":
        config = _config_from_args(args)
        run_dirs = [Path(d) for d in args.in_dirs]
        out_dir = Path(args.out) if args.out else run_dirs[0]
        rows = stage_stats(config, run_dirs, out_dir)
        if args.table:
            print(report_mod.render_table(rows, args.table))
        else:
            print(f"stats complete: {out_dir / 'stats.csv'}")
        return 0

    if args.command == "topics":
        config = _config_from_args(
            args,
            timelines=args.timelines,
            sentiments=args.sentiments,
            topic_assignments=args.assignments,
            topic_categories=args.topic_categories,
        )
        n = stage_topics(config, Path(args.in_dir), Path(args.out))
        print(f"topics complete: {n} topics analyzed")
        return 0

    if args.command == "report":
        text = report_mod.render_paper_report()
        if args.out:
            Path(args.out).write_text(text, encoding="utf-8")
            print(f"report written: {args.out}")
        else:
            print(text)
        return 0

    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
