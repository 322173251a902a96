"""Command-line interface.

Subcommands: score one (source, summary) pair, evaluate a dataset against
human judgements, sweep the answerability threshold, trace score
convergence over the question count, and dump the Bernoulli distance
curves. Exit codes: 0 success, 1 usage, 2 backend failure, 3 data error.
Output files are written atomically: on failure only a ``.partial`` file
is left behind.
"""

from __future__ import annotations

import argparse
import contextlib
import dataclasses
import json
import os
import sys
from pathlib import Path
from typing import Sequence

from .backend import BackendDescriptor, BackendError, BackendKind, make_backend
from .distributions import (
    DistanceKind,
    OptionDistribution,
    hellinger,
    kl_divergence,
    one_best,
    total_variation,
)
from .harness import (
    DatasetError,
    EvalDataset,
    Level,
    abstractiveness_split,
    answerability_sweep,
    convergence_curve,
    dataset_correlation,
    evaluate_dataset,
    filter_systems,
    flat_correlation,
    load_dataset,
)
from .scoring import ScoreConfig, ScoreReport, Variant, score_pair

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_BACKEND = 2
EXIT_DATA = 3

DEFAULT_SWEEP_THRESHOLDS = [4.0, 3.5, 3.0, 2.5, 2.0, 1.5, 1.0]
DEFAULT_N_GRID = [1, 2, 5, 10, 20, 50]
BERNOULLI_P1_VALUES = (0.0, 0.25, 0.5, 0.75)


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that exits with code 1 on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@contextlib.contextmanager
def atomic_output(path: Path):
    """Write to <path>.partial and rename on success only."""
    path.parent.mkdir(parents=True, exist_ok=True)
    partial = path.with_name(path.name + ".partial")
    with open(partial, "w", encoding="utf-8", newline="") as fh:
        yield fh
    partial.replace(path)


def _add_score_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--variant", default="sum", choices=["sum", "src", "f1"])
    parser.add_argument(
        "--distance", default="tv", choices=["kl", "ob", "tv", "hl"], help="statistical distance"
    )
    parser.add_argument("--n", "--num-questions", dest="num_questions", type=int, default=50)
    parser.add_argument("--k", "--num-options", dest="num_options", type=int, default=4)
    parser.add_argument(
        "--threshold",
        default="2.0",
        help="answerability threshold in [1, K], or 'off' to keep all questions",
    )
    parser.add_argument("--seed", type=int, default=None)


def _add_backend_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--backend", default="mock", choices=["mock", "remote"])
    parser.add_argument(
        "--endpoint",
        default=os.environ.get("MQAG_BACKEND_URL"),
        help="remote endpoint URL (default: $MQAG_BACKEND_URL)",
    )
    parser.add_argument(
        "--token",
        default=os.environ.get("MQAG_BACKEND_TOKEN"),
        help="bearer token for the remote backend (default: $MQAG_BACKEND_TOKEN)",
    )
    parser.add_argument("--timeout", type=float, default=120.0)
    parser.add_argument("--retries", type=int, default=2)
    parser.add_argument("--jobs", type=int, default=4, help="worker cap for parallel stages")


def _parse_threshold(raw: str, parser: argparse.ArgumentParser) -> float | None:
    if raw.strip().lower() == "off":
        return None
    try:
        return float(raw)
    except ValueError:
        parser.error(f"--threshold must be a number or 'off', got {raw!r}")
        raise AssertionError("unreachable")


def _config_from(args, parser: argparse.ArgumentParser) -> ScoreConfig:
    try:
        return ScoreConfig(
            variant=Variant.parse(args.variant),
            distance=DistanceKind.parse(args.distance),
            num_questions=args.num_questions,
            num_options=args.num_options,
            answerability_threshold=_parse_threshold(args.threshold, parser),
            seed=args.seed,
        )
    except ValueError as exc:
        parser.error(str(exc))
        raise AssertionError("unreachable")


def _backend_from(args, parser: argparse.ArgumentParser):
    kind = BackendKind(args.backend)
    if kind is BackendKind.REMOTE and not args.endpoint:
        parser.error("--endpoint (or MQAG_BACKEND_URL) is required with --backend remote")
    try:
        descriptor = BackendDescriptor(
            kind=kind,
            endpoint=args.endpoint if kind is BackendKind.REMOTE else None,
            timeout=args.timeout,
            max_retries=args.retries,
        )
    except ValueError as exc:
        parser.error(str(exc))
        raise AssertionError("unreachable")
    return make_backend(descriptor, token=args.token)


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DatasetError(f"cannot read {path}: {exc}") from exc


def _json_dump(obj, fh) -> None:
    json.dump(obj, fh, indent=2, sort_keys=True)
    fh.write("\n")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _cmd_score(args, parser) -> int:
    config = _config_from(args, parser)
    backend = _backend_from(args, parser)
    source = _read_text(args.source_file)
    summary = _read_text(args.summary_file)
    report = score_pair(source, summary, config, backend)
    if args.output:
        with atomic_output(Path(args.output)) as fh:
            _json_dump(report.to_dict(), fh)
    else:
        _json_dump(report.to_dict(), sys.stdout)
    return EXIT_OK


def _load_dataset_args(args) -> EvalDataset:
    level = Level.parse(args.level) if args.level else None
    dataset = load_dataset(args.dataset, level=level)
    if args.systems:
        dataset = filter_systems(dataset, [s.strip() for s in args.systems.split(",")])
    return dataset


def _records_csv_rows(dataset: EvalDataset, reports: Sequence[ScoreReport]) -> list[str]:
    rows = ["system_id,doc_id,score,human_score,n_kept"]
    for record, report in zip(dataset.records, reports):
        rows.append(
            f"{record.system_id},{record.doc_id},{report.score!r},"
            f"{record.human_score!r},{report.n_kept}"
        )
    return rows


def _write_results(
    out_dir: Path,
    dataset: EvalDataset,
    config: ScoreConfig,
    reports: Sequence[ScoreReport],
    correlations: dict | None,
    curves: dict,
) -> None:
    results = {
        "dataset": dataset.name,
        "level": dataset.level.value,
        "config": config.to_dict(),
        "per_record": [
            {"system_id": r.system_id, "doc_id": r.doc_id, "human_score": r.human_score}
            | report.to_dict()
            for r, report in zip(dataset.records, reports)
        ],
        "correlations": correlations,
        "curves": curves,
    }
    with atomic_output(out_dir / "results.json") as fh:
        _json_dump(results, fh)
    with atomic_output(out_dir / "records.csv") as fh:
        fh.write("\n".join(_records_csv_rows(dataset, reports)) + "\n")


def _print_correlation(label: str, corr) -> None:
    print(
        f"{label}: pearson={corr.pearson:.6f} spearman={corr.spearman:.6f} "
        f"n_used={corr.n_used} n_skipped={corr.n_skipped}"
    )


def _cmd_evaluate(args, parser) -> int:
    config = _config_from(args, parser)
    backend = _backend_from(args, parser)
    dataset = _load_dataset_args(args)
    out_dir = Path(args.output_dir)

    reports = evaluate_dataset(dataset, config, backend, jobs=args.jobs)
    scores = [r.score for r in reports]
    overall = dataset_correlation(dataset, scores)
    correlations: dict = {"overall": overall.to_dict()}
    _print_correlation(f"{dataset.name} ({dataset.level.value})", overall)

    if args.split == "abstractiveness":
        # halves rarely keep the full (system, doc) grid; correlate them
        # per-record as in the original splitting procedure
        by_key = {r.key: report for r, report in zip(dataset.records, reports)}
        for label, half in zip(("low", "high"), abstractiveness_split(dataset)):
            half_scores = [by_key[r.key].score for r in half.records]
            corr = flat_correlation(half_scores, [r.human_score for r in half.records])
            correlations[label] = corr.to_dict()
            _print_correlation(f"{half.name} ({len(half.records)} records)", corr)

    _write_results(out_dir, dataset, config, reports, correlations, curves={})
    return EXIT_OK


def _cmd_sweep(args, parser) -> int:
    config = _config_from(args, parser)
    if config.variant is Variant.F1:
        parser.error("--variant f1 is not supported by sweep; use sum or src")
    backend = _backend_from(args, parser)
    dataset = _load_dataset_args(args)
    thresholds = (
        [float(t) for t in args.thresholds.split(",")]
        if args.thresholds
        else DEFAULT_SWEEP_THRESHOLDS
    )
    out_dir = Path(args.output_dir)

    # answerability is recorded per question, so score once with the filter off
    unfiltered = dataclasses.replace(config, answerability_threshold=None)
    reports = evaluate_dataset(dataset, unfiltered, backend, jobs=args.jobs)
    human = [r.human_score for r in dataset.records]
    points = answerability_sweep(reports, human, thresholds)

    with atomic_output(out_dir / "sweep.csv") as fh:
        fh.write("threshold,pearson,spearman,mean_n_kept\n")
        for pt in points:
            fh.write(f"{pt.threshold!r},{pt.pearson!r},{pt.spearman!r},{pt.mean_n_kept!r}\n")
    curves = {"answerability_sweep": [pt.to_dict() for pt in points]}
    _write_results(out_dir, dataset, unfiltered, reports, correlations=None, curves=curves)
    for pt in points:
        print(
            f"threshold={pt.threshold:g}: pearson={pt.pearson:.6f} "
            f"mean_n_kept={pt.mean_n_kept:.2f}"
        )
    return EXIT_OK


def _cmd_convergence(args, parser) -> int:
    config = _config_from(args, parser)
    if config.variant is Variant.F1:
        parser.error("--variant f1 is not supported by convergence; use sum or src")
    backend = _backend_from(args, parser)
    dataset = _load_dataset_args(args)
    n_grid = (
        [int(n) for n in args.n_grid.split(",")] if args.n_grid else list(DEFAULT_N_GRID)
    )
    out_dir = Path(args.output_dir)

    unfiltered = dataclasses.replace(config, answerability_threshold=None)
    reports = evaluate_dataset(dataset, unfiltered, backend, jobs=args.jobs)
    per_question = [[pq.distance for pq in report.per_question] for report in reports]
    human = [r.human_score for r in dataset.records]
    curve = convergence_curve(
        per_question, human, n_grid, n_bootstrap=args.bootstrap, seed=config.seed
    )

    with atomic_output(out_dir / "convergence.csv") as fh:
        fh.write("n,mean_corr,std_corr\n")
        for pt in curve:
            fh.write(f"{pt.n},{pt.mean_corr!r},{pt.std_corr!r}\n")
    curves = {"convergence": [pt.to_dict() for pt in curve]}
    _write_results(out_dir, dataset, unfiltered, reports, correlations=None, curves=curves)
    for pt in curve:
        print(f"n={pt.n}: mean_corr={pt.mean_corr:.6f} std_corr={pt.std_corr:.6f}")
    return EXIT_OK


def _cmd_distances(args, parser) -> int:
    if args.resolution < 2:
        parser.error("--resolution must be >= 2")
    rows = ["p1,p2,kl,one_best,total_variation,hellinger"]
    for p1 in BERNOULLI_P1_VALUES:
        p = OptionDistribution([p1, 1.0 - p1])
        for i in range(args.resolution):
            p2 = i / (args.resolution - 1)
            q = OptionDistribution([p2, 1.0 - p2])
            rows.append(
                f"{p1!r},{p2!r},{kl_divergence(p, q)!r},{one_best(p, q)},"
                f"{total_variation(p, q)!r},{hellinger(p, q)!r}"
            )
    text = "\n".join(rows) + "\n"
    if args.output:
        with atomic_output(Path(args.output)) as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="mqag", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_score = sub.add_parser("score", help="score one (source, summary) pair")
    p_score.add_argument("source_file")
    p_score.add_argument("summary_file")
    p_score.add_argument("--output", default=None, help="write the report here instead of stdout")
    _add_score_flags(p_score)
    _add_backend_flags(p_score)
    p_score.set_defaults(func=_cmd_score)

    p_eval = sub.add_parser("evaluate", help="score a dataset and correlate with human judgements")
    p_eval.add_argument("dataset")
    p_eval.add_argument("--level", default=None, choices=["summary", "system"])
    p_eval.add_argument("--systems", default=None, help="comma-separated system-id allowlist")
    p_eval.add_argument("--split", default=None, choices=["abstractiveness"])
    p_eval.add_argument("--output-dir", default=".")
    _add_score_flags(p_eval)
    _add_backend_flags(p_eval)
    p_eval.set_defaults(func=_cmd_evaluate)

    p_sweep = sub.add_parser("sweep", help="correlation vs answerability threshold")
    p_sweep.add_argument("dataset")
    p_sweep.add_argument("--level", default=None, choices=["summary", "system"])
    p_sweep.add_argument("--systems", default=None)
    p_sweep.add_argument("--thresholds", default=None, help="comma-separated thresholds")
    p_sweep.add_argument("--output-dir", default=".")
    _add_score_flags(p_sweep)
    _add_backend_flags(p_sweep)
    p_sweep.set_defaults(func=_cmd_sweep)

    p_conv = sub.add_parser("convergence", help="bootstrap correlation vs question count")
    p_conv.add_argument("dataset")
    p_conv.add_argument("--level", default=None, choices=["summary", "system"])
    p_conv.add_argument("--systems", default=None)
    p_conv.add_argument("--n-grid", default=None, help="comma-separated question counts")
    p_conv.add_argument("--bootstrap", type=int, default=1000)
    p_conv.add_argument("--output-dir", default=".")
    _add_score_flags(p_conv)
    _add_backend_flags(p_conv)
    p_conv.set_defaults(func=_cmd_convergence)

    p_dist = sub.add_parser("distances", help="Bernoulli distance curves as CSV")
    p_dist.add_argument("--resolution", type=int, default=101)
    p_dist.add_argument("--output", default=None)
    p_dist.set_defaults(func=_cmd_distances)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args, parser)
    except SystemExit as exc:  # argparse usage errors and --help
        code = exc.code
        return code if isinstance(code, int) else EXIT_USAGE
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except DatasetError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
