"""``spata`` command line: analyze, project, stats, plot and split.

Exit codes: 0 success, 1 data or runtime error, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from .binning import BinSpec
from .cards import (
    SchemaError,
    export_card_json,
    export_projected_csv,
    import_card_json,
    render_markdown_card,
)
from .ingest import (
    ColumnKind,
    DataError,
    encode_categoricals,
    encode_like,
    load_csv,
    stratified_indices,
)
from .pattern import CardError, build_pattern_card
from .projection import DEFAULT_LEVELS, format_code, project_dataset, project_with_model
from .viz import PlotOptions, render_pattern_svg

THREADS_ENV = "SPATA_THREADS"


class ConfigError(ValueError):
    pass


def _default_threads() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def _overrides(args) -> dict[str, ColumnKind]:
    kinds = {c: ColumnKind.CATEGORICAL for c in args.categorical or []}
    for c in args.numeric or []:
        if c in kinds:
            raise ConfigError(f"column {c!r} given as both numeric and categorical")
        kinds[c] = ColumnKind.NUMERIC
    return kinds


def _check_model_config(args) -> BinSpec:
    if args.bins < 3 or args.bins % 2 == 0:
        raise ConfigError("bins must be odd and ≥ 3")
    if args.levels < 1:
        raise ConfigError("levels must be ≥ 1")
    if args.threads < 1:
        raise ConfigError("threads must be ≥ 1")
    if (args.bins + 2) ** args.levels >= 2**63:
        raise ConfigError(f"bins={args.bins} with levels={args.levels} exceeds the 64-bit code space")
    return BinSpec(args.bins)


def cmd_analyze(args) -> int:
    spec = _check_model_config(args)
    if not 0 <= args.min_frequency < 1:
        raise ConfigError("min-frequency must be in [0, 1)")
    overrides = _overrides(args)

    start = time.perf_counter()
    table = load_csv(args.input, args.label, overrides, args.missing_as_out_of_domain)
    if table.labels is None:
        raise ConfigError("analyze requires --label (pattern cards are per class)")
    dataset = encode_categoricals(table, args.min_frequency)
    if dataset.n_features == 0:
        raise DataError("no feature columns to analyze")
    if dataset.n_rows == 0:
        raise DataError("input has no data rows")
    loaded = time.perf_counter()
    model, projected = project_dataset(dataset, spec, args.levels, threads=args.threads)
    projected_at = time.perf_counter()
    card = build_pattern_card(projected, model, args.min_frequency)
    built = time.perf_counter()

    export_card_json(card, args.out)
    if args.projected:
        export_projected_csv(projected, args.projected)
    if args.markdown:
        Path(args.markdown).write_text(render_markdown_card(card), encoding="utf-8")
    if args.svg:
        render_pattern_svg(card, PlotOptions(width=args.width, height=args.height), args.svg)
    done = time.perf_counter()

    n_unique = sum(c.n_unique for c in card.classes)
    print(
        f"analyzed {dataset.n_rows} rows x {dataset.n_features} features "
        f"({card.n_classes} classes) with bins={spec.b}, levels={args.levels}"
    )
    print(f"unique combinations: {n_unique}")
    print(
        f"time: load {loaded - start:.2f}s, project {projected_at - loaded:.2f}s, "
        f"patterns {built - projected_at:.2f}s, export {done - built:.2f}s, "
        f"analysis {built - start:.2f}s, total {done - start:.2f}s"
    )
    print(f"card written to {args.out}")
    return 0


def _read_header(path) -> list[str]:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"input file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        header = next(csv.reader(fh), None)
    if header is None:
        raise DataError(f"empty file: {path}")
    return header


def cmd_project(args) -> int:
    if args.threads < 1:
        raise ConfigError("threads must be ≥ 1")
    card = import_card_json(args.card)
    model = card.model
    names = set(model.feature_names)
    header = _read_header(args.input)
    overrides = {}
    for col in header:
        if col == args.label:
            continue
        if col in names:
            overrides[col] = ColumnKind.NUMERIC
        elif any(f.startswith(f"{col}=") for f in names):
            overrides[col] = ColumnKind.CATEGORICAL
    table = load_csv(args.input, args.label, overrides, args.missing_as_out_of_domain)
    dataset, missing, unexpected = encode_like(table, model.feature_names)
    if missing or unexpected:
        print("feature mismatch between card and input:", file=sys.stderr)
        for f in missing:
            print(f"  missing:    {f}", file=sys.stderr)
        for f in unexpected:
            print(f"  unexpected: {f}", file=sys.stderr)
        return 1
    projected = project_with_model(model, dataset, threads=args.threads)
    export_projected_csv(projected, args.out)

    base = model.spec.b + 2
    digit_cols = projected.codes
    out_of_domain = 0
    for i in range(model.depth_limit):
        digits = (digit_cols // base ** (model.depth_limit - 1 - i)) % base
        out_of_domain += int(np.count_nonzero(digits == 1))
    print(f"projected {dataset.n_rows} rows x {dataset.n_features} features to {args.out}")
    if out_of_domain:
        print(f"warning: {out_of_domain} cell(s) outside the stored domain (code ending in 0)")
    return 0


def _print_table(header: list[str], rows) -> None:
    writer = csv.writer(sys.stdout, delimiter="\t", lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)


def cmd_stats(args) -> int:
    card = import_card_json(args.card)
    b = card.bins
    fmt = lambda p: format_code(card.unpack(p), b)  # noqa: E731
    try:
        classes = [card.class_pattern(args.class_)] if args.class_ is not None else list(card.classes)
        feature = card.feature_index(args.feature) if args.feature is not None else None
    except KeyError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return 1

    if feature is None and args.class_ is None:
        total_unique = sum(c.n_unique for c in card.classes)
        total_overlap = sum(int(np.count_nonzero(c.combo_overlaps > 1)) for c in card.classes)
        print(f"rows={card.n_rows} features={card.n_features} classes={card.n_classes} bins={b} levels={card.levels}")
        _print_table(
            ["class", "instances", "unique_combinations", "overlapping_combinations"],
            [
                (c.label, c.n_instances, c.n_unique, int(np.count_nonzero(c.combo_overlaps > 1)))
                for c in card.classes
            ],
        )
        fraction = total_overlap / total_unique if total_unique else 0.0
        print(f"overlapping combinations: {total_overlap}/{total_unique} ({fraction:.4f})")
        return 0

    if feature is None:
        cp = classes[0]
        order = np.lexsort((np.arange(cp.n_unique), -cp.combo_counts))
        _print_table(
            ["combination", "count", "overlap_classes"],
            [
                (" ".join(fmt(p) for p in cp.combinations[r].tolist()), int(cp.combo_counts[r]), int(cp.combo_overlaps[r]))
                for r in order.tolist()
            ],
        )
        return 0

    header = ["code"] + [c.label for c in classes] + ["overlap_classes"]
    table: dict[int, list] = {}
    for k, cp in enumerate(classes):
        st = cp.code_stats[feature]
        for p, n, ov in zip(st.codes.tolist(), st.counts.tolist(), st.overlaps.tolist()):
            row = table.setdefault(p, [0] * len(classes) + [ov])
            row[k] = n
    _print_table(header, [[fmt(p)] + table[p] for p in sorted(table)])
    return 0


def cmd_plot(args) -> int:
    try:
        options = PlotOptions(
            width=args.width,
            height=args.height,
            opacity_floor=args.opacity_floor,
            max_combinations=args.max_combinations,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    card = import_card_json(args.card)
    render_pattern_svg(card, options, args.out)
    print(f"plot written to {args.out}")
    return 0


def cmd_split(args) -> int:
    if not 0 < args.test_fraction < 1:
        raise ConfigError("test-fraction must be in (0, 1)")
    path = Path(args.input)
    if not path.is_file():
        raise DataError(f"input file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"empty file: {path}")
        rows = [r for r in reader if r]
    if args.label not in header:
        raise DataError(f"label column {args.label!r} not in header")
    col = header.index(args.label)
    train, test = stratified_indices([r[col] for r in rows], args.test_fraction, args.seed)
    for out, idx in ((args.train_out, train), (args.test_out, test)):
        with open(out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows[i] for i in idx.tolist())
    print(f"train: {train.size} rows -> {args.train_out}")
    print(f"test: {test.size} rows -> {args.test_out}")
    return 0


def _positive_int(text: str) -> int:
    value = int(text)
    if value <= 0:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spata", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log diagnostics to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_columns(p):
        p.add_argument("--categorical", action="append", metavar="COL", help="force a column categorical")
        p.add_argument("--numeric", action="append", metavar="COL", help="force a column numeric")
        p.add_argument(
            "--missing-as-out-of-domain",
            action="store_true",
            help="project empty numeric cells to code 0 instead of failing",
        )

    def add_threads(p):
        p.add_argument("--threads", type=int, default=_default_threads(),
                       help=f"worker threads (default: ${THREADS_ENV} or CPU count)")

    p = sub.add_parser("analyze", help="project a labelled CSV and write its pattern card")
    p.add_argument("--input", required=True)
    p.add_argument("--label", required=True, help="class label column")
    p.add_argument("--out", required=True, help="card JSON path")
    p.add_argument("--bins", type=int, default=9)
    p.add_argument("--levels", type=int, default=DEFAULT_LEVELS)
    p.add_argument("--min-frequency", type=float, default=0.01)
    p.add_argument("--projected", metavar="CSV", help="also write the projected dataset")
    p.add_argument("--markdown", metavar="MD", help="also write a markdown data card")
    p.add_argument("--svg", metavar="SVG", help="also write the pattern overview")
    p.add_argument("--width", type=_positive_int, default=1200)
    p.add_argument("--height", type=_positive_int, default=600)
    add_columns(p)
    add_threads(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("project", help="project a CSV through an existing card")
    p.add_argument("--card", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--label", help="label column to carry through")
    p.add_argument(
        "--missing-as-out-of-domain",
        action="store_true",
        help="project empty numeric cells to code 0 instead of failing",
    )
    add_threads(p)
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("stats", help="print code and combination statistics of a card")
    p.add_argument("--card", required=True)
    p.add_argument("--feature")
    p.add_argument("--class", dest="class_")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("plot", help="render a card as SVG")
    p.add_argument("--card", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--width", type=_positive_int, default=1200)
    p.add_argument("--height", type=_positive_int, default=600)
    p.add_argument("--opacity-floor", type=float, default=0.05)
    p.add_argument("--max-combinations", type=_positive_int, default=5000)
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("split", help="stratified train/test split of a labelled CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--label", required=True)
    p.add_argument("--test-fraction", type=float, default=0.3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train-out", default="train.csv")
    p.add_argument("--test-out", default="test.csv")
    p.set_defaults(func=cmd_split)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"spata {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (DataError, SchemaError, CardError, ValueError, OSError) as exc:
        print(f"spata {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
