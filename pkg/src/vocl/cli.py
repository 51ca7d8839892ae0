"""Command-line surface: difficulty scoring, training, evaluation, plots.

Every command is a thin wrapper over library calls, so CLI results never
diverge from direct use of the package.  All outputs (CSV, SVG, YAML,
JSON) are deterministic for fixed seeds and inputs.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .config import config_from_mapping, dump_resolved_config, load_run_config
from .ddpg import load_agent_params
from .difficulty import (
    DatasetStats,
    DifficultyScore,
    difficulty_score,
    motion_profile,
    partition_levels,
    score_histogram,
)
from .errors import (
    AngleNearPi,
    BadQuaternion,
    ConfigError,
    DegenerateGeometry,
    EmptyInput,
    MalformedLine,
    NegativeLoss,
    NonFiniteGradient,
    NonFiniteLoss,
    NonMonotonicTimestamps,
    TooFewSequences,
    VoclError,
)
from .metrics import ate
from .plots import PLOT_KINDS, read_csv_rows, render_plot, require_columns
from .surrogate import run_training
from .trajio import FORMATS, parse_trajectory_file

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

NUMERIC_ERRORS = (
    NonFiniteLoss,
    NonFiniteGradient,
    AngleNearPi,
    DegenerateGeometry,
    NegativeLoss,
    FloatingPointError,
)

MANIFEST_COLUMNS = (
    "sequence_id",
    "max_tx",
    "max_ty",
    "max_tz",
    "max_rx",
    "max_ry",
    "max_rz",
    "score",
    "level",
)
HISTOGRAM_COLUMNS = ("bin_lo", "bin_hi", "count")
ERRORS_COLUMNS = ("sequence_id", "ate", "ate_unaligned")
TRACE_COLUMNS = ("step", "w_f", "w_p", "w_r")


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on bad usage; the contract says 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def _parse_floats(text, n, what):
    try:
        values = [float(token) for token in text.split(",")]
    except ValueError:
        raise ValueError(f"{what} must be comma-separated numbers, got {text!r}") from None
    if len(values) != n:
        raise ValueError(f"{what} needs {n} comma-separated numbers, got {len(values)}")
    return values


def _write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(str(cell) for cell in row) + "\n")
    return path


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_difficulty(args):
    input_dir = Path(args.input_dir)
    files = sorted(p for p in input_dir.iterdir() if p.is_file())
    trajectories, failures = [], []
    for path in files:
        try:
            trajectories.append(parse_trajectory_file(path, fmt=args.format))
        except (MalformedLine, BadQuaternion, NonMonotonicTimestamps, EmptyInput) as err:
            failures.append((path, err))
    for path, err in failures:
        print(f"error: {path.name}: {err}", file=sys.stderr)
    if failures:
        print(
            f"error: {len(failures)} of {len(files)} files failed to parse",
            file=sys.stderr,
        )
        return EXIT_DATA
    if len(trajectories) < 3:
        raise TooFewSequences(f"need >= 3 trajectory files, got {len(trajectories)}")

    profiles = [motion_profile(t) for t in trajectories]
    weights = None
    if args.weights:
        raw = np.asarray(_parse_floats(args.weights, 6, "--weights"))
        if raw.sum() <= 0:
            raise ValueError("--weights must have a positive sum")
        weights = raw / raw.sum()
    stats = DatasetStats.from_profiles(profiles, weights=weights)
    scored = [
        DifficultyScore(t.sequence_id, prof, difficulty_score(prof, stats))
        for t, prof in zip(trajectories, profiles)
    ]
    thresholds = None
    if args.thresholds:
        thresholds = _parse_floats(args.thresholds, args.levels - 1, "--thresholds")
    cuts, assigned = partition_levels(scored, n_levels=args.levels, thresholds=thresholds)

    out = _out_dir(args)
    manifest_rows = [
        (s.sequence_id, *[repr(c) for c in s.raw.components()], repr(s.normalized), s.level)
        for s in assigned
    ]
    manifest_path = _write_csv(out / "manifest.csv", MANIFEST_COLUMNS, manifest_rows)
    edges, counts = score_histogram(assigned, n_bins=args.bins)
    hist_rows = [
        (repr(float(lo)), repr(float(hi)), int(c))
        for lo, hi, c in zip(edges[:-1], edges[1:], counts)
    ]
    hist_path = _write_csv(out / "histogram.csv", HISTOGRAM_COLUMNS, hist_rows)

    print(f"scored {len(assigned)} sequences into {args.levels} levels")
    print("thresholds: " + ", ".join(f"{c:.6g}" for c in cuts))
    for level in range(1, args.levels + 1):
        count = sum(1 for s in assigned if s.level == level)
        print(f"level {level}: {count} sequences")
    print(f"wrote {manifest_path} and {hist_path}")
    return EXIT_OK


def cmd_train(args):
    cfg = load_run_config(args.config) if args.config else config_from_mapping({})
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
        problems = cfg.validate()
        if problems:
            raise ConfigError(problems)
    run_dir = Path(args.out) / cfg.run_dir_name()
    run_dir.mkdir(parents=True, exist_ok=True)
    dump_resolved_config(cfg, run_dir / "config.yaml")
    result = run_training(cfg, out_dir=run_dir)
    stopped = " (stopped early)" if result.stopped_early else ""
    print(f"run directory: {run_dir}")
    print(f"mode: {cfg.mode}  seed: {cfg.seed}  steps: {len(result.records)}{stopped}")
    print(f"final validation ATE: {result.final_val_ate!r} m")
    print(f"final validation AUC: {result.final_val_auc!r}")
    return EXIT_OK


def cmd_evaluate(args):
    if len(args.estimate) > 1 and not args.runs:
        raise ValueError("several estimate files need --runs to aggregate them")
    gt = parse_trajectory_file(args.gt, fmt=args.format)
    aligned, unaligned = [], []
    for path in args.estimate:
        est = parse_trajectory_file(path, fmt=args.format)
        aligned.append(ate(est, gt, align=True))
        unaligned.append(ate(est, gt, align=False))
    ate_aligned = float(np.median(aligned))
    ate_unaligned = float(np.median(unaligned))

    out = _out_dir(args)
    errors_path = out / "errors.csv"
    is_new = not errors_path.exists()
    with open(errors_path, "a") as fh:
        if is_new:
            fh.write(",".join(ERRORS_COLUMNS) + "\n")
        fh.write(f"{gt.sequence_id},{ate_aligned!r},{ate_unaligned!r}\n")

    print(f"sequence: {gt.sequence_id}")
    print(f"runs: {len(args.estimate)}")
    print(f"ATE aligned: {ate_aligned!r} m")
    print(f"ATE unaligned: {ate_unaligned!r} m")
    print(f"appended to {errors_path}")
    return EXIT_OK


def cmd_plot(args):
    out = _out_dir(args)
    out_path = render_plot(args.csv, args.kind, out / f"{args.kind}.svg")
    print(f"wrote {out_path}")
    return EXIT_OK


def cmd_agent_inspect(args):
    run_dir = Path(args.run_dir)
    doc = load_agent_params(run_dir / "agents.json")
    for name in sorted(doc["agents"]):
        info = doc["agents"][name]
        actor = info["nets"]["actor"]
        critic = info["nets"]["critic"]
        n_actor = sum(np.size(w) for w in actor["weights"] + actor["biases"])
        n_critic = sum(np.size(w) for w in critic["weights"] + critic["biases"])
        print(
            f"agent {name}: transitions={info['transitions_seen']} "
            f"updates={info['update_iterations']} skipped={info['skipped_updates']}"
        )
        print(f"  parameters: actor={n_actor} critic={n_critic} (targets mirror)")

    header, rows = read_csv_rows(run_dir / "metrics.csv")
    require_columns(header, TRACE_COLUMNS)
    out = Path(args.out) if args.out else run_dir
    out.mkdir(parents=True, exist_ok=True)
    trace_rows = [tuple(row[c] for c in TRACE_COLUMNS) for row in rows]
    trace_path = _write_csv(out / "weight_trace.csv", TRACE_COLUMNS, trace_rows)
    print(f"wrote {trace_path} ({len(trace_rows)} steps)")
    return EXIT_OK


def build_parser():
    parser = _Parser(prog="vocl", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="command",
                                parser_class=_Parser)

    p = sub.add_parser("difficulty", help="score trajectory files and assign levels")
    p.add_argument("input_dir", help="directory of trajectory files")
    p.add_argument("--format", choices=FORMATS, default="tum")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--weights", help="six comma-separated combination weights")
    p.add_argument("--thresholds",
                   help="fixed score cut points (levels-1 numbers) instead of "
                        "the equal-count split")
    p.add_argument("--levels", type=int, default=3)
    p.add_argument("--bins", type=int, default=20)
    p.set_defaults(func=cmd_difficulty)

    p = sub.add_parser("train", help="run surrogate training under a config")
    p.add_argument("--config", help="YAML run configuration file")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--out", default="runs", help="base directory for run outputs")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="compare estimated against ground-truth poses")
    p.add_argument("estimate", nargs="+", help="estimated trajectory file(s)")
    p.add_argument("gt", help="ground-truth trajectory file")
    p.add_argument("--format", choices=FORMATS, default="tum")
    p.add_argument("--out", default=".", help="directory for the error list")
    p.add_argument("--runs", action="store_true",
                   help="aggregate several estimate files by their median")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("plot", help="render an SVG chart from a run CSV")
    p.add_argument("csv", help="metrics CSV, difficulty manifest, or error list")
    p.add_argument("--kind", choices=PLOT_KINDS, required=True)
    p.add_argument("--out", default=".", help="output directory")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("agent-inspect", help="summarize agents and dump weight traces")
    p.add_argument("run_dir", help="training run directory")
    p.add_argument("--out", default=None,
                   help="directory for the weight trace (default: run_dir)")
    p.set_defaults(func=cmd_agent_inspect)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        for problem in err.problems:
            print(f"error: {problem}", file=sys.stderr)
        return EXIT_USAGE
    except NUMERIC_ERRORS as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    except VoclError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_DATA
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
