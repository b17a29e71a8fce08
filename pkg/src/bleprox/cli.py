"""Command-line front end.

Subcommands: gen, train-angle, train-dist, train, predict, score, ablate,
report. Every stochastic stage derives its seed from the single master seed,
so a fixed config reproduces every output byte for byte.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 training
divergence.
"""

from __future__ import annotations

import argparse
import os
import sys

from .config import ConfigError, RunConfig, load_config
from .core import ProtocolError
from .distance_model import TrainingDivergence
from .ingest import MASKABLE, EmptyEventError, ParseError, write_system_output
from .pipeline import (
    DataError,
    gen_splits,
    predict_corpus,
    split_dir,
    train_angle_stage,
    train_artifacts,
    train_distance_stage,
)
from .scorer import (
    ScoreReport,
    ScoringError,
    read_report_csv,
    render_csv,
    render_text,
    score_run,
)
from .sidecar import write_text_atomic


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit code 1 instead of argparse's 2
        raise UsageError(message)


def _common_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--config", metavar="PATH", help="run config file")
    parser.add_argument("--set", action="append", default=[], metavar="K=V",
                        help="override one config key (repeatable)")
    parser.add_argument("--seed", type=int, help="override the master seed")
    parser.add_argument("--jobs", type=int, default=1, help="worker processes for per-event work")
    parser.add_argument("--look", choices=("first", "last", "full"),
                        help="rows used per event at prediction time")
    parser.add_argument("--mask", action="append", choices=sorted(MASKABLE),
                        help="feature to withhold (repeatable)")


def _build_parser() -> _Parser:
    parser = _Parser(prog="bleprox", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        _common_flags(p)
        p.set_defaults(func=func)
        return p

    add("gen", cmd_gen, "generate train/dev/test corpora")
    add("train-angle", cmd_train_angle, "train stage 1 (angle model) only")
    add("train-dist", cmd_train_dist, "fit the schema and train stage 2 only")
    add("train", cmd_train, "train both stages and persist all artifacts")

    p = add("predict", cmd_predict, "predict distances for one split")
    p.add_argument("split", choices=("train", "dev", "test"))

    p = add("score", cmd_score, "score a system output file against a key file")
    p.add_argument("--key", required=True, metavar="PATH")
    p.add_argument("--output", required=True, metavar="PATH")

    add("ablate", cmd_ablate, "run the feature-mask and look-mode ablation suite")

    p = add("report", cmd_report, "re-render stored machine-readable reports")
    p.add_argument("csv", nargs="+", metavar="REPORT_CSV")
    return parser


def _ensure_dirs(cfg: RunConfig):
    for path in (cfg.corpus_dir, cfg.model_dir, cfg.report_dir):
        os.makedirs(path, exist_ok=True)


# ---------------------------------------------------------------------------
# Commands

def cmd_gen(args, cfg: RunConfig) -> int:
    _ensure_dirs(cfg)
    gen_splits(cfg, jobs=args.jobs)
    for split in ("train", "dev", "test"):
        print(f"wrote {split_dir(cfg, split)}")
    return 0


def cmd_train_angle(args, cfg: RunConfig) -> int:
    _ensure_dirs(cfg)
    model = train_angle_stage(cfg)
    print(f"angle model: {len(model.rounds)} rounds, final train loss {model.train_losses[-1]:.6f}")
    return 0


def cmd_train_dist(args, cfg: RunConfig) -> int:
    _ensure_dirs(cfg)
    artifacts = train_distance_stage(cfg)
    print(f"distance model: input dim {artifacts.distance.input_dim}, "
          f"final train loss {artifacts.distance.train_losses[-1]:.6f}")
    return 0


def cmd_train(args, cfg: RunConfig) -> int:
    _ensure_dirs(cfg)
    artifacts = train_artifacts(cfg)
    if artifacts.angle is not None:
        print(f"angle model: final train loss {artifacts.angle.train_losses[-1]:.6f}")
    print(f"distance model: input dim {artifacts.distance.input_dim}, "
          f"final train loss {artifacts.distance.train_losses[-1]:.6f}")
    return 0


def _predictions_path(cfg: RunConfig, split: str) -> str:
    return os.path.join(cfg.report_dir, f"predictions-{split}.tsv")


def cmd_predict(args, cfg: RunConfig) -> int:
    _ensure_dirs(cfg)
    predictions, failures = predict_corpus(cfg, args.split, jobs=args.jobs)
    out_path = _predictions_path(cfg, args.split)
    write_text_atomic(out_path, write_system_output(predictions))
    print(f"wrote {out_path} ({len(predictions)} events)")
    for event_id, message in failures:
        print(f"failed: {event_id}: {message}", file=sys.stderr)
    return 2 if failures else 0


def _write_report(cfg: RunConfig, name: str, report: ScoreReport, title: str) -> str:
    text = render_text(report, title)
    write_text_atomic(os.path.join(cfg.report_dir, f"{name}.txt"), text)
    write_text_atomic(os.path.join(cfg.report_dir, f"{name}.csv"), render_csv(report))
    return text


def cmd_score(args, cfg: RunConfig) -> int:
    _ensure_dirs(cfg)
    report = score_run(args.key, args.output, cfg.scoring_config())
    stem = os.path.splitext(os.path.basename(args.output))[0]
    print(_write_report(cfg, f"score-{stem}", report, title=f"scores for {args.output}"), end="")
    return 0


def cmd_ablate(args, cfg: RunConfig) -> int:
    """Train/predict/score cycles for each feature mask, plus look-mode
    variants re-using the unmasked artifacts. Emits one report block each and
    a side-by-side average-nDCF summary."""
    _ensure_dirs(cfg)
    dev_key = os.path.join(split_dir(cfg, "dev"), "key.tsv")
    scoring = cfg.scoring_config()

    mask_variants = [
        ("mask-none", ()),
        ("mask-coarse_grain", ("coarse_grain",)),
        ("mask-expected_distance", ("expected_distance",)),
        ("mask-angle", ("angle",)),
    ]
    summary: list[tuple[str, ScoreReport]] = []

    def run_variant(name: str, variant_cfg: RunConfig, look_mode: str | None, retrain: bool):
        if retrain:
            train_artifacts(variant_cfg)
        predictions, failures = predict_corpus(variant_cfg, "dev", look_mode, jobs=args.jobs)
        if failures:
            raise DataError(f"{name}: {len(failures)} events failed to predict")
        out_path = os.path.join(cfg.report_dir, f"ablate-{name}.tsv")
        write_text_atomic(out_path, write_system_output(predictions))
        report = score_run(dev_key, out_path, scoring)
        print(_write_report(cfg, f"ablate-{name}", report, title=f"[{name}]"))
        summary.append((name, report))

    for name, mask in mask_variants:
        variant = RunConfig(dict(cfg.values))
        variant.values["run.feature_mask"] = mask
        variant.values["paths.model_dir"] = os.path.join(cfg.model_dir, "ablate", name)
        os.makedirs(variant.model_dir, exist_ok=True)
        run_variant(name, variant, None, retrain=True)

    base = RunConfig(dict(cfg.values))
    base.values["run.feature_mask"] = ()
    base.values["paths.model_dir"] = os.path.join(cfg.model_dir, "ablate", "mask-none")
    for mode in ("first", "last", "full"):
        run_variant(f"look-{mode}", base, mode, retrain=False)

    width = max(len(name) for name, _ in summary)
    lines = [f"{'variant':<{width}}  {'avg_P_miss':>10}{'avg_P_fa':>10}{'avg_nDCF':>10}"]
    csv_lines = ["variant,avg_p_miss,avg_p_fa,avg_ndcf"]
    for name, report in summary:
        lines.append(
            f"{name:<{width}}  {report.avg_p_miss:>10.2f}{report.avg_p_fa:>10.2f}{report.avg_ndcf:>10.2f}"
        )
        csv_lines.append(f"{name},{report.avg_p_miss!r},{report.avg_p_fa!r},{report.avg_ndcf!r}")
    text = "\n".join(lines) + "\n"
    write_text_atomic(os.path.join(cfg.report_dir, "ablate-summary.txt"), text)
    write_text_atomic(os.path.join(cfg.report_dir, "ablate-summary.csv"), "\n".join(csv_lines) + "\n")
    print(text, end="")
    return 0


def cmd_report(args, cfg: RunConfig) -> int:
    reports = [(path, read_report_csv(path)) for path in args.csv]
    for path, report in reports:
        print(render_text(report, title=path))
    if len(reports) > 1:
        width = max(len(p) for p, _ in reports)
        print(f"{'report':<{width}}  {'avg_nDCF':>9}")
        for path, report in reports:
            print(f"{path:<{width}}  {report.avg_ndcf:>9.2f}")
    return 0


# ---------------------------------------------------------------------------

def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1

    try:
        cfg = load_config(args.config, args.set, args.seed, args.look, args.mask)
        return args.func(args, cfg)
    except (ConfigError, UsageError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (ParseError, DataError, ScoringError, EmptyEventError, ProtocolError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except TrainingDivergence as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
