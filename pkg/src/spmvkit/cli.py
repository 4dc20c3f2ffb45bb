"""Command-line front end for corpus workflows.

Subcommands: convert, spmv, bench, features, train, cv, predict, report.
Every run first prints an effective-config line from which it can be
reproduced. Exit codes: 0 success, 1 input parse failure, 2 conversion
failure, 3 model I/O failure, 4 empty result set.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import logging
import sys
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from . import report as report_mod
from .coo import MatrixMarketError, coo_equal, dense_spmv_oracle, read_matrix_market
from .features import extract_features, read_features, write_features
from .formats import (
    ConversionError,
    Csr5Matrix,
    EllMatrix,
    FormatTag,
    HybMatrix,
    SellMatrix,
    convert,
    to_coo,
)
from .kernels import spmv
from .model import (
    ModelIOError,
    assemble_training_set,
    cross_validate,
    load_model,
    predict,
    save_model,
    train_tree,
)

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_PARSE = 1
EXIT_CONVERSION = 2
EXIT_MODEL_IO = 3
EXIT_EMPTY = 4


def _print_config(subcommand: str, args: argparse.Namespace, names: list[str]) -> None:
    tokens = [f"subcommand:{subcommand}"]
    for name in names:
        value = getattr(args, name)
        if isinstance(value, FormatTag):
            value = value.value
        elif isinstance(value, list):
            value = ",".join(v.value if isinstance(v, FormatTag) else str(v) for v in value)
        tokens.append(f"{name.replace('_', '-')}:{value}")
    print("config " + " ".join(tokens))


def _parse_formats(text: str) -> list[FormatTag]:
    try:
        return [FormatTag(tok.strip()) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _add_shape_params(p: argparse.ArgumentParser) -> None:
    p.add_argument("--omega", type=int, default=4, help="CSR5 tile width")
    p.add_argument("--sigma", type=int, default=16, help="CSR5 tile height")
    p.add_argument("--sell-c", type=int, default=4, help="SELL slice height")
    p.add_argument(
        "--sell-sigma",
        type=int,
        default=0,
        help="SELL sorting window (0 = unsorted; otherwise a multiple of the slice height)",
    )


def _add_bench_params(p: argparse.ArgumentParser) -> None:
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--min-reps", type=int, default=5)
    p.add_argument("--max-reps", type=int, default=1000)
    p.add_argument("--warmup-reps", type=int, default=2)
    p.add_argument("--ci-gap", type=float, default=0.05)
    p.add_argument("--ci-level", type=float, default=0.95)
    p.add_argument(
        "--fixed-reps",
        type=int,
        default=None,
        help="time exactly this many repetitions instead of using the stopping rule",
    )


def _bench_config(args: argparse.Namespace) -> bench_mod.BenchConfig:
    return bench_mod.BenchConfig(
        min_reps=args.min_reps,
        max_reps=args.max_reps,
        ci_level=args.ci_level,
        ci_gap=args.ci_gap,
        workers=args.workers,
        warmup_reps=args.warmup_reps,
        csr5_omega=args.omega,
        csr5_sigma=args.sigma,
        sell_c=args.sell_c,
        sell_sigma=args.sell_sigma,
        fixed_reps=args.fixed_reps,
    )


def _format_stats(tag: FormatTag, m) -> str:
    if isinstance(m, Csr5Matrix):
        return f"csr5 tiles:{m.num_tiles} omega:{m.omega} sigma:{m.sigma}"
    if isinstance(m, HybMatrix):
        return f"hyb k:{m.k} tail_nnz:{m.coo_tail.nnz}"
    if isinstance(m, EllMatrix):
        return f"ell k:{m.k} cells:{m.n_rows * m.k}"
    if isinstance(m, SellMatrix):
        return f"sell slices:{m.n_slices} c:{m.c} sigma:{m.sigma}"
    return f"csr ptr_len:{m.n_rows + 1}"


def cmd_convert(args: argparse.Namespace) -> int:
    _print_config(
        "convert", args, ["input", "format", "omega", "sigma", "sell_c", "sell_sigma"]
    )
    a = read_matrix_market(args.input)
    m = convert(
        args.format,
        a,
        omega=args.omega,
        sigma=args.sigma,
        sell_c=args.sell_c,
        sell_sigma=args.sell_sigma,
    )
    print(f"matrix rows:{a.n_rows} cols:{a.n_cols} nnz:{a.nnz}")
    print(_format_stats(args.format, m))
    if not coo_equal(to_coo(m), a):
        raise ConversionError(f"round trip through {args.format.value} altered the matrix")
    print("round_trip:ok")
    return EXIT_OK


def cmd_spmv(args: argparse.Namespace) -> int:
    _print_config(
        "spmv",
        args,
        ["input", "format", "omega", "sigma", "sell_c", "sell_sigma", "workers"],
    )
    a = read_matrix_market(args.input)
    m = convert(
        args.format,
        a,
        omega=args.omega,
        sigma=args.sigma,
        sell_c=args.sell_c,
        sell_sigma=args.sell_sigma,
    )
    x = np.ones(a.n_cols)
    y = spmv(args.format, m, x, args.workers)
    reference = dense_spmv_oracle(a, x)
    err = float(np.max(np.abs(y - reference) / (1.0 + np.abs(reference)))) if a.n_rows else 0.0
    print(
        f"spmv rows:{a.n_rows} nnz:{a.nnz} y_sum:{y.sum()!r} "
        f"y_norm:{float(np.linalg.norm(y))!r} max_rel_err:{err!r}"
    )
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    _print_config(
        "bench",
        args,
        [
            "corpus",
            "formats",
            "out",
            "labels_out",
            "omega",
            "sigma",
            "sell_c",
            "sell_sigma",
            "workers",
            "min_reps",
            "max_reps",
            "warmup_reps",
            "ci_gap",
            "ci_level",
            "fixed_reps",
        ],
    )
    cfg = _bench_config(args)
    records, labels, skipped = bench_mod.bench_corpus(args.corpus, cfg, args.formats)
    for message in skipped:
        print(f"warning: {message}", file=sys.stderr)
    if args.out:
        bench_mod.write_records(records, args.out)
        print(f"records written:{args.out} count:{len(records)}")
    else:
        for rec in records:
            print(bench_mod.record_to_line(rec))
    times = bench_mod.times_by_matrix(records)
    label_lines = [
        f"label matrix_id:{mid} best:{tag.value} best_time_s:{times[mid][tag]!r}"
        for mid, tag in labels.items()
    ]
    for line in label_lines:
        print(line)
    if args.labels_out:
        Path(args.labels_out).write_text("".join(line + "\n" for line in label_lines))
    if not labels:
        print("error: no matrix was benchmarked successfully", file=sys.stderr)
        return EXIT_EMPTY
    return EXIT_OK


def cmd_features(args: argparse.Namespace) -> int:
    _print_config("features", args, ["corpus", "out", "jobs"])
    found = bench_mod.discover_corpus(args.corpus)

    def one(item):
        matrix_id, path = item
        try:
            return matrix_id, extract_features(read_matrix_market(path))
        except (OSError, ValueError) as exc:
            print(f"warning: skipping {path}: {exc}", file=sys.stderr)
            return None

    if args.jobs > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(one, found))
    else:
        results = [one(item) for item in found]
    entries = [r for r in results if r is not None]
    if args.out:
        write_features(entries, args.out)
        print(f"features written:{args.out} count:{len(entries)}")
    else:
        from .features import features_to_line

        for matrix_id, fv in entries:
            print(features_to_line(matrix_id, fv))
    if not entries:
        print("error: no features extracted", file=sys.stderr)
        return EXIT_EMPTY
    return EXIT_OK


def _load_training_inputs(args: argparse.Namespace):
    try:
        feature_entries = read_features(args.features)
        records = bench_mod.read_records(args.records)
    except ValueError as exc:
        raise MatrixMarketError(str(exc)) from None  # input-parse exit code
    labels = bench_mod.best_labels(records)
    samples, _, problems = assemble_training_set(labels, feature_entries)
    for message in problems:
        print(f"warning: {message}", file=sys.stderr)
    return samples, bench_mod.times_by_matrix(records)


def cmd_train(args: argparse.Namespace) -> int:
    _print_config(
        "train",
        args,
        ["features", "records", "out", "depth", "min_leaf", "folds", "seed"],
    )
    samples, times = _load_training_inputs(args)
    if not samples:
        print("error: joining features and labels produced zero samples", file=sys.stderr)
        return EXIT_EMPTY
    if len(samples) >= args.folds:
        cv = cross_validate(
            samples,
            k=args.folds,
            seed=args.seed,
            times=times,
            max_depth=args.depth,
            min_samples_leaf=args.min_leaf,
        )
        ratio = cv.mean_perf_ratio
        print(
            f"cv folds:{args.folds} accuracy:{cv.accuracy:.4f} "
            f"perf_ratio:{ratio if ratio is None else format(ratio, '.4f')}"
        )
    else:
        print(f"cv skipped: only {len(samples)} samples", file=sys.stderr)
    model = train_tree(samples, max_depth=args.depth, min_samples_leaf=args.min_leaf)
    labels_seen = {s.label for s in samples}
    if len(labels_seen) == 1:
        print(
            f"warning: every sample is labeled {labels_seen.pop().value}; "
            "the tree is a single leaf",
            file=sys.stderr,
        )
    save_model(model, args.out)
    print(f"model written:{args.out} nodes:{len(model.nodes)}")
    return EXIT_OK


def cmd_cv(args: argparse.Namespace) -> int:
    _print_config(
        "cv",
        args,
        ["features", "records", "folds", "seed", "repeats", "depth", "min_leaf"],
    )
    samples, times = _load_training_inputs(args)
    if not samples:
        print("error: joining features and labels produced zero samples", file=sys.stderr)
        return EXIT_EMPTY
    cv = cross_validate(
        samples,
        k=args.folds,
        seed=args.seed,
        repeats=args.repeats,
        times=times,
        max_depth=args.depth,
        min_samples_leaf=args.min_leaf,
    )
    for i, acc in enumerate(cv.fold_accuracies):
        ratio = cv.fold_perf_ratios[i] if cv.fold_perf_ratios else float("nan")
        print(f"fold {i} accuracy:{acc:.4f} perf_ratio:{ratio:.4f}")
    print(f"overall accuracy:{cv.accuracy:.4f} perf_ratio:{cv.mean_perf_ratio:.4f}")
    names = [tag.value for tag in FormatTag]
    print("confusion rows=true cols=predicted: " + ",".join(names))
    for i, name in enumerate(names):
        print(f"confusion {name}: " + " ".join(str(c) for c in cv.confusion[i]))
    return EXIT_OK


def cmd_predict(args: argparse.Namespace) -> int:
    _print_config(
        "predict",
        args,
        ["input", "model", "run", "workers", "omega", "sigma", "sell_c", "sell_sigma"],
    )
    model = load_model(args.model)
    a = read_matrix_market(args.input)
    tag = predict(model, extract_features(a))
    print(f"predicted format:{tag.value}")
    if args.run:
        cfg = _bench_config(args)
        rec = bench_mod.run_bench(a, tag, cfg, matrix_id=Path(args.input).stem)
        print(bench_mod.record_to_line(rec))
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    _print_config("report", args, ["records", "out", "fig_dir", "no_figs"])
    try:
        records = bench_mod.read_records(args.records)
    except ValueError as exc:
        raise MatrixMarketError(str(exc)) from None
    if not records:
        print("error: record file is empty", file=sys.stderr)
        return EXIT_EMPTY
    lines, table = report_mod.format_report(records)
    print(table)
    if args.out:
        Path(args.out).write_text(lines)
        print(f"report written:{args.out}")
    fig_dir = args.fig_dir
    if fig_dir is None and args.out:
        fig_dir = Path(args.out).parent
    if fig_dir is not None and not args.no_figs:
        from .plots import render_report_figures

        stem = Path(args.out).stem if args.out else "report"
        for path in render_report_figures(
            report_mod.wins(records), report_mod.slowdowns(records), fig_dir, stem
        ):
            print(f"figure written:{path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spmvkit",
        description="Sparse storage formats, SpMV benchmarking, and learned format selection.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("convert", help="convert a Matrix Market file and verify the round trip")
    p.add_argument("input")
    p.add_argument("--format", type=FormatTag, required=True)
    _add_shape_params(p)
    p.set_defaults(handler=cmd_convert)

    p = sub.add_parser("spmv", help="run one SpMV and compare against the dense reference")
    p.add_argument("input")
    p.add_argument("--format", type=FormatTag, required=True)
    _add_shape_params(p)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(handler=cmd_spmv)

    p = sub.add_parser("bench", help="benchmark every matrix in a corpus directory")
    p.add_argument("corpus")
    p.add_argument("--formats", type=_parse_formats, default=list(FormatTag))
    p.add_argument("--out", default=None, help="record file path")
    p.add_argument("--labels-out", default=None, help="best-format summary path")
    _add_shape_params(p)
    _add_bench_params(p)
    p.set_defaults(handler=cmd_bench)

    p = sub.add_parser("features", help="extract static features for a corpus")
    p.add_argument("corpus")
    p.add_argument("--out", default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(handler=cmd_features)

    p = sub.add_parser("train", help="train a format selector from features and records")
    p.add_argument("--features", required=True)
    p.add_argument("--records", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--depth", type=int, default=8)
    p.add_argument("--min-leaf", type=int, default=3)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("cv", help="cross-validate a selector without saving it")
    p.add_argument("--features", required=True)
    p.add_argument("--records", required=True)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--depth", type=int, default=8)
    p.add_argument("--min-leaf", type=int, default=3)
    p.set_defaults(handler=cmd_cv)

    p = sub.add_parser("predict", help="predict the best format for one matrix")
    p.add_argument("input")
    p.add_argument("--model", required=True)
    p.add_argument("--run", action="store_true", help="also benchmark the predicted format")
    _add_shape_params(p)
    _add_bench_params(p)
    p.set_defaults(handler=cmd_predict)

    p = sub.add_parser("report", help="aggregate a record file into tables and figures")
    p.add_argument("--records", required=True)
    p.add_argument("--out", default=None, help="write machine-readable report lines here")
    p.add_argument("--fig-dir", default=None, help="directory for rendered figures")
    p.add_argument("--no-figs", action="store_true", help="skip figure rendering")
    p.set_defaults(handler=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, stream=sys.stderr, format="%(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except MatrixMarketError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ConversionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONVERSION
    except ModelIOError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MODEL_IO
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
