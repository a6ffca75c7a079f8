"""Command-line interface for fewshot-ot."""

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Callable, List, Optional, Sequence

import yaml

from fewshot_ot.bms.solver import BmsConfig
from fewshot_ot.classify.evaluation import TSV_COLUMNS, EvalReport, Method, evaluate
from fewshot_ot.features.episodes import EpisodeSpec
from fewshot_ot.features.store import (
    FeatureFormatError,
    FeatureStore,
    concat_stores,
    load_feature_store,
    write_feature_store,
)
from fewshot_ot.features.synthetic import SkewMode, generate_synthetic_store
from fewshot_ot.preprocess.transforms import CenterMode, PreprocessConfig
from fewshot_ot.reporting.statistics import (
    DEFAULT_ALPHA,
    GAUSSIANITY_COLUMNS,
    Transform,
    export_gaussianity_table,
    export_histograms,
    export_projection,
    feature_histogram,
    format_gaussianity_rows,
    gaussianity_table,
    principal_projection,
)
from fewshot_ot.utils.config import get_config, write_example
from fewshot_ot.utils.formatting import TextFormatter
from fewshot_ot.utils.logging import RUN_LOG_COLUMNS, RunLogger
from fewshot_ot.utils.progress import get_progress_callback

THREADS_ENV_VAR = "FEWSHOT_OT_THREADS"

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


class UsageError(Exception):
    """Invalid flag values or combinations; reported with exit code 2."""


def _int_list(value: str) -> List[int]:
    try:
        return [int(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {value!r}")


def _float_list(value: str) -> List[float]:
    try:
        return [float(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {value!r}")


def _add_episode_arguments(parser: argparse.ArgumentParser) -> None:
    """Flags shared by run and sweep."""
    parser.add_argument("--features", action="append", required=True, metavar="PATH",
                        help="Novel-class feature file (repeat to concatenate backbones)")
    parser.add_argument("--base", action="append", metavar="PATH",
                        help="Base-class feature file (repeat to concatenate backbones)")
    parser.add_argument("--format", choices=["binary", "csv"], help="Feature file format (default: from extension)")
    parser.add_argument("--method", default="bms", help="ncm, bms, bms_star or kmeans")
    parser.add_argument("--n", type=int, help="Classes per episode")
    parser.add_argument("--s", type=int, help="Support samples per class")
    parser.add_argument("--q", type=int, help="Query samples per class")
    parser.add_argument("--query-counts", type=_int_list, help="Per-class query counts, e.g. 10,15,20,15,15")
    parser.add_argument("--targets", type=_int_list, help="Exact per-class sizes for bms_star")
    parser.add_argument("--episodes", type=int, help="Number of episodes")
    parser.add_argument("--seed", type=int, help="Master seed")
    parser.add_argument("--lambda", dest="lam", type=float, help="Sinkhorn regularization strength")
    parser.add_argument("--outer-iters", type=int, help="EM iterations")
    parser.add_argument("--sinkhorn-iters", type=int, help="Sinkhorn scaling rounds")
    parser.add_argument("--epochs", type=int, help="Refinement epochs (default: from shots and method)")
    parser.add_argument("--lr", type=float, help="Refinement learning rate")
    parser.add_argument("--momentum", type=float, help="Refinement momentum")
    parser.add_argument("--kappa", type=float, help="Initial logit temperature")
    parser.add_argument("--preprocess", help="Normalization chain: peme, l2n, cl2n or bn")
    parser.add_argument("--beta", type=float, help="Power transform exponent")
    parser.add_argument("--center", choices=["base", "novel", "none"],
                        help="Projection center (default: base for ncm, novel otherwise)")
    parser.add_argument("--no-qr", action="store_true", help="Skip the QR reduction")
    parser.add_argument("--no-power", action="store_true", help="Skip the power transform")
    parser.add_argument("--clamp-support", action="store_true", help="Pin support rows to their class")
    parser.add_argument("--reset-kappa", action="store_true", help="Reset kappa at every EM iteration")
    parser.add_argument("--threads", type=int, help=f"Worker threads (fallback: ${THREADS_ENV_VAR})")
    parser.add_argument("--no-progress", action="store_true", help="Do not draw a progress bar")


def create_parser() -> argparse.ArgumentParser:
    """
    Create the command-line argument parser.

    Returns:
        Configured argument parser
    """
    parser = argparse.ArgumentParser(
        prog="fewshot-ot",
        description="Few-shot classification with PEME preprocessing and min-size Sinkhorn EM",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Generate a synthetic store
  fewshot-ot synth --classes 20 --dim 64 --per-class 600 --separation 4 --out novel.fvs

  # Inductive baseline
  fewshot-ot run --features novel.fvs --base base.fvs --method ncm --n 5 --s 1 --q 15 --episodes 1000 --seed 7

  # Transductive BMS with exact class sizes
  fewshot-ot run --features novel.fvs --method bms_star --out report.json

  # Gaussianity diagnostics after the power transform
  fewshot-ot stats --features novel.fvs --transform pe --out pass.tsv

  # Accuracy versus lambda
  fewshot-ot sweep --features novel.fvs --lambdas 2,5,8.5,12 --episodes 500

  # Store a default, then list logged runs
  fewshot-ot config --set logging.run_log=runs.csv
  fewshot-ot runs --limit 5
""",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="Log to stderr")
    parser.add_argument("--config", type=Path, help="Configuration file")

    subparsers = parser.add_subparsers(dest="command", help="Command to execute")

    # Run command
    run_parser = subparsers.add_parser("run", help="Evaluate a method over random episodes")
    _add_episode_arguments(run_parser)
    run_parser.add_argument("--out", type=Path, help="Write the JSON report to this file")
    run_parser.add_argument("--with-timing", action="store_true", help="Include timing in the JSON report")
    run_parser.add_argument("--run-log", type=Path, help="Append the result to this CSV run log")
    run_parser.set_defaults(func=cmd_run)

    # Sweep command
    sweep_parser = subparsers.add_parser("sweep", help="Evaluate over a list of lambda or epoch values")
    _add_episode_arguments(sweep_parser)
    values = sweep_parser.add_mutually_exclusive_group(required=True)
    values.add_argument("--lambdas", type=_float_list, help="Comma-separated lambda values")
    values.add_argument("--epochs-list", type=_int_list, help="Comma-separated epoch counts")
    sweep_parser.set_defaults(func=cmd_sweep)

    # Synth command
    synth_parser = subparsers.add_parser("synth", help="Generate a synthetic feature store")
    synth_parser.add_argument("--classes", type=int, default=20, help="Number of classes")
    synth_parser.add_argument("--dim", type=int, default=64, help="Feature dimension")
    synth_parser.add_argument("--per-class", type=int, default=600, help="Vectors per class")
    synth_parser.add_argument("--separation", type=float, default=4.0, help="Distance between class centers")
    synth_parser.add_argument("--skew", default="relu_skewed", help="gaussian or relu_skewed")
    synth_parser.add_argument("--offset-low", type=float, default=0.0, help="Lower per-dimension offset (relu_skewed)")
    synth_parser.add_argument("--offset-high", type=float, default=0.0, help="Upper per-dimension offset (relu_skewed)")
    synth_parser.add_argument("--seed", type=int, default=0, help="Generator seed")
    synth_parser.add_argument("--format", choices=["binary", "csv"], help="Output format (default: from extension)")
    synth_parser.add_argument("--out", type=Path, required=True, help="Output file")
    synth_parser.set_defaults(func=cmd_synth)

    # Stats command
    stats_parser = subparsers.add_parser("stats", help="Gaussianity diagnostics")
    stats_parser.add_argument("--features", action="append", required=True, metavar="PATH", help="Feature file")
    stats_parser.add_argument("--format", choices=["binary", "csv"], help="Feature file format")
    stats_parser.add_argument("--transform", choices=["none", "p", "pe"], default="none",
                              help="Transform applied before testing")
    stats_parser.add_argument("--alpha", type=float, default=DEFAULT_ALPHA, help="Significance level")
    stats_parser.add_argument("--beta", type=float, help="Power transform exponent")
    stats_parser.add_argument("--out", type=Path, help="Write the per-test TSV here (default: stdout)")
    stats_parser.add_argument("--histogram-out", type=Path, help="Write per-feature histograms here")
    stats_parser.add_argument("--hist-dim", type=int, default=0, help="Dimension to histogram")
    stats_parser.add_argument("--hist-classes", type=_int_list, help="Classes to histogram (default: first 3)")
    stats_parser.add_argument("--bins", type=int, default=30, help="Histogram bins")
    stats_parser.add_argument("--projection-out", type=Path, help="Write principal coordinates here")
    stats_parser.add_argument("--components", type=int, default=3, help="Principal directions")
    stats_parser.set_defaults(func=cmd_stats)

    # Inspect command
    inspect_parser = subparsers.add_parser("inspect", help="Show a feature file header")
    inspect_parser.add_argument("path", type=Path, help="Feature file")
    inspect_parser.add_argument("--format", choices=["binary", "csv"], help="Feature file format")
    inspect_parser.set_defaults(func=cmd_inspect)

    # Config command
    config_parser = subparsers.add_parser("config", help="Show or create the configuration")
    config_parser.add_argument("--init", type=Path, metavar="PATH", help="Write an example configuration file")
    config_parser.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE", dest="assignments",
                               help="Store a setting in the active configuration file (repeatable)")
    config_parser.set_defaults(func=cmd_config)

    # Runs command
    runs_parser = subparsers.add_parser("runs", help="Show recent entries of the run log")
    runs_parser.add_argument("--run-log", type=Path, help="CSV run log (default: logging.run_log)")
    runs_parser.add_argument("--limit", type=int, default=20, help="Maximum number of runs")
    runs_parser.set_defaults(func=cmd_runs)

    return parser


def process_command(args: argparse.Namespace) -> int:
    """
    Process the parsed command-line arguments.

    Args:
        args: Parsed command-line arguments

    Returns:
        Exit code (0 success, 1 runtime failure, 2 usage error)
    """
    if not hasattr(args, "func"):
        return EXIT_OK
    try:
        return args.func(args)
    except UsageError as e:
        print(TextFormatter.format_error(str(e)), file=sys.stderr)
        return EXIT_USAGE
    except Exception as e:
        print(TextFormatter.format_error(str(e)), file=sys.stderr)
        return EXIT_FAILURE


def _pick(*values: Any) -> Any:
    """First value that is not None."""
    for value in values:
        if value is not None:
            return value
    return None


def _load_stores(paths: Optional[Sequence[str]], fmt: Optional[str]) -> Optional[FeatureStore]:
    """Load and concatenate feature files; missing files are usage errors."""
    if not paths:
        return None
    missing = [p for p in paths if not Path(p).exists()]
    if missing:
        raise UsageError(f"Feature file not found: {missing[0]}")
    return concat_stores([load_feature_store(p, fmt) for p in paths])


def _resolve_threads(args: argparse.Namespace, config) -> int:
    threads = args.threads
    if threads is None and os.environ.get(THREADS_ENV_VAR):
        value = os.environ[THREADS_ENV_VAR]
        try:
            threads = int(value)
        except ValueError:
            raise UsageError(f"{THREADS_ENV_VAR} must be an integer, got {value!r}")
    if threads is None:
        threads = config.get("runtime", "threads", 1)
    if threads < 1:
        raise UsageError(f"threads must be at least 1, got {threads}")
    return threads


class RunSettings:
    """Fully resolved settings of an evaluation command.

    Attributes:
        method: Classification method
        spec: Episode shape
        prep: Preprocessing settings
        bms: EM / K-Means settings
        episodes: Number of episodes
        seed: Master seed
        threads: Worker threads
        show_progress: Draw a progress bar on stderr
    """

    def __init__(self, args: argparse.Namespace) -> None:
        config = get_config()
        episode_cfg = config.get_episode_config()
        prep_cfg = config.get_preprocess_config()
        bms_cfg = config.get_bms_config()

        try:
            self.method = Method.from_string(args.method)
            center = CenterMode.from_string(args.center) if args.center else self.method.default_center
            self.spec = EpisodeSpec(
                n_way=_pick(args.n, episode_cfg.get("n_way")),
                shots=_pick(args.s, episode_cfg.get("shots")),
                queries_per_class=_pick(args.q, episode_cfg.get("queries")),
                query_counts=tuple(args.query_counts) if args.query_counts else None,
            )
            self.prep = PreprocessConfig(
                method=_pick(args.preprocess, prep_cfg.get("method", "peme")),
                beta=_pick(args.beta, prep_cfg.get("beta")),
                epsilon=prep_cfg.get("epsilon", 1e-6),
                center_mode=center,
                apply_qr=not args.no_qr and prep_cfg.get("apply_qr", True),
                power=not args.no_power and prep_cfg.get("power", True),
                base_center_space=prep_cfg.get("base_center_space", "pe"),
            )
            self.bms = BmsConfig(
                lam=_pick(args.lam, bms_cfg.get("lambda")),
                outer_iters=_pick(args.outer_iters, bms_cfg.get("outer_iters")),
                epochs=args.epochs,
                lr=_pick(args.lr, bms_cfg.get("lr")),
                momentum=_pick(args.momentum, bms_cfg.get("momentum")),
                kappa_init=_pick(args.kappa, bms_cfg.get("kappa")),
                sinkhorn_iters=_pick(args.sinkhorn_iters, bms_cfg.get("sinkhorn_iters")),
                clamp_support=args.clamp_support or bms_cfg.get("clamp_support", False),
                persist_kappa=not args.reset_kappa and bms_cfg.get("persist_kappa", True),
                exact_targets=tuple(args.targets) if args.targets else None,
            )
        except ValueError as e:
            raise UsageError(str(e))

        if args.targets:
            if self.method is not Method.BMS_STAR:
                raise UsageError("--targets only applies to --method bms_star")
            if len(args.targets) != self.spec.n_way or sum(args.targets) != sum(self.spec.class_totals):
                raise UsageError(
                    f"--targets must list {self.spec.n_way} class sizes summing to "
                    f"{sum(self.spec.class_totals)} (support plus query), got {args.targets}"
                )

        self.episodes = _pick(args.episodes, episode_cfg.get("episodes"))
        self.seed = _pick(args.seed, episode_cfg.get("seed"))
        if self.episodes < 1:
            raise UsageError(f"--episodes must be at least 1, got {self.episodes}")
        if not 0 <= self.seed < 2 ** 64:
            raise UsageError(f"--seed must be an unsigned 64-bit integer, got {self.seed}")
        self.threads = _resolve_threads(args, config)
        self.show_progress = (
            not args.no_progress
            and config.get("runtime", "show_progress", True)
            and sys.stderr.isatty()
        )

    def evaluate(self, store: FeatureStore, base_store: Optional[FeatureStore],
                 bms: Optional[BmsConfig] = None, description: str = "Episodes") -> EvalReport:
        """Run the evaluation with an optional progress bar."""
        callback: Optional[Callable] = None
        if self.show_progress:
            callback = get_progress_callback(description, self.episodes)
        try:
            return evaluate(
                store, base_store, self.spec, self.prep, self.method, bms or self.bms,
                episodes=self.episodes, seed=self.seed, threads=self.threads,
                progress_callback=callback,
            )
        finally:
            if callback is not None:
                callback.finish()


def _load_run_inputs(args: argparse.Namespace, settings: RunSettings):
    store = _load_stores(args.features, args.format)
    base_store = _load_stores(args.base, args.format)
    if settings.prep.needs_base_store and base_store is None:
        raise UsageError("base-mean centering needs --base (or pass --center novel/none)")
    try:
        settings.spec.check_feasible(store)
    except ValueError as e:
        raise UsageError(str(e))
    return store, base_store


def cmd_run(args: argparse.Namespace) -> int:
    """
    Evaluate a method over random episodes.

    Prints the TSV report line to stdout, a human summary to stderr and
    writes the JSON report when --out is given.

    Args:
        args: Command arguments

    Returns:
        Exit code
    """
    settings = RunSettings(args)
    store, base_store = _load_run_inputs(args, settings)

    report = settings.evaluate(store, base_store, description=f"{settings.method.value}")

    print(report.tsv_row())
    print(TextFormatter.format_report(report), file=sys.stderr)

    if args.out:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(report.to_json(include_timing=args.with_timing))

    run_log = _pick(args.run_log, get_config().get("logging", "run_log"))
    RunLogger(run_log).log_run(report)
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    """
    Evaluate once per lambda or epoch value.

    Prints a TSV header and one row per value, prefixed by the swept
    parameter and its value.

    Args:
        args: Command arguments

    Returns:
        Exit code
    """
    settings = RunSettings(args)
    if settings.method not in (Method.BMS, Method.BMS_STAR):
        raise UsageError("sweep needs --method bms or bms_star")
    store, base_store = _load_run_inputs(args, settings)

    if args.lambdas:
        param, values = "lambda", args.lambdas
    else:
        param, values = "epochs", args.epochs_list

    print("\t".join(["param", "value"] + TSV_COLUMNS))
    for value in values:
        try:
            if param == "lambda":
                bms = replace(settings.bms, lam=value)
            else:
                bms = replace(settings.bms, epochs=value)
        except ValueError as e:
            raise UsageError(str(e))
        report = settings.evaluate(store, base_store, bms, description=f"{param}={value}")
        print(f"{param}\t{value}\t{report.tsv_row()}", flush=True)
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    """
    Generate a synthetic store and write it.

    Args:
        args: Command arguments

    Returns:
        Exit code
    """
    try:
        store = generate_synthetic_store(
            num_classes=args.classes,
            dim=args.dim,
            per_class=args.per_class,
            separation=args.separation,
            skew_mode=SkewMode.from_string(args.skew),
            seed=args.seed,
            offset_range=(args.offset_low, args.offset_high),
        )
    except ValueError as e:
        raise UsageError(str(e))

    path = write_feature_store(store, args.out, args.format)
    print(TextFormatter.format_success(
        f"Wrote {store.num_classes} classes x {args.per_class} vectors (dim {store.dim}) to {path}"
    ), file=sys.stderr)
    return EXIT_OK


def cmd_stats(args: argparse.Namespace) -> int:
    """
    Run the omnibus normality test per class and dimension.

    Args:
        args: Command arguments

    Returns:
        Exit code
    """
    store = _load_stores(args.features, args.format)
    beta = _pick(args.beta, get_config().get("preprocess", "beta", 0.5))
    transform = Transform.from_string(args.transform)

    rows = gaussianity_table(store, transform, args.alpha, beta)
    rate = sum(row.passed for row in rows) / len(rows)

    if args.out:
        if not export_gaussianity_table(rows, args.out):
            return EXIT_FAILURE
    else:
        print("\t".join(GAUSSIANITY_COLUMNS))
        for line in format_gaussianity_rows(rows):
            print("\t".join(line))
    print(f"pass rate ({transform.value}, alpha={args.alpha}): {rate:.4f} over {len(rows)} tests",
          file=sys.stderr)

    if args.histogram_out:
        class_ids = args.hist_classes or sorted(store.class_ids)[:3]
        try:
            histograms = [
                (cid, args.hist_dim, *feature_histogram(store, cid, args.hist_dim, args.bins, transform, beta))
                for cid in class_ids
            ]
        except (KeyError, ValueError) as e:
            raise UsageError(str(e))
        if not export_histograms(histograms, args.histogram_out):
            return EXIT_FAILURE

    if args.projection_out:
        try:
            coords, labels = principal_projection(store, args.hist_classes, args.components, transform, beta)
        except (KeyError, ValueError) as e:
            raise UsageError(str(e))
        if not export_projection(coords, labels, args.projection_out):
            return EXIT_FAILURE

    return EXIT_OK


def cmd_inspect(args: argparse.Namespace) -> int:
    """
    Print the header of a feature file.

    Args:
        args: Command arguments

    Returns:
        Exit code
    """
    if not args.path.exists():
        raise UsageError(f"Feature file not found: {args.path}")
    try:
        store = load_feature_store(args.path, args.format)
    except FeatureFormatError as e:
        print(TextFormatter.format_error(f"{args.path}: {e}"), file=sys.stderr)
        return EXIT_FAILURE
    print(TextFormatter.format_store_summary(store))
    return EXIT_OK


def cmd_config(args: argparse.Namespace) -> int:
    """
    Write an example configuration, store settings, or show the active ones.

    Args:
        args: Command arguments

    Returns:
        Exit code
    """
    if args.init:
        try:
            write_example(args.init)
        except FileExistsError as e:
            raise UsageError(str(e))
        print(TextFormatter.format_success(f"Wrote example configuration to {args.init}"))
        return EXIT_OK

    config = get_config()
    if args.assignments:
        for assignment in args.assignments:
            section, key, value = _parse_assignment(assignment)
            try:
                config.set(section, key, value)
            except KeyError as e:
                raise UsageError(e.args[0])
        if not config.save():
            raise RuntimeError(f"could not write {config.config_path}")
        print(TextFormatter.format_success(f"Updated {config.config_path}"))
        return EXIT_OK

    print(f"Configuration file: {config.config_path}"
          f"{'' if config.config_path.exists() else ' (not found, using defaults)'}")
    for section in ("episode", "preprocess", "bms", "runtime", "logging"):
        print(f"\n[{section}]")
        for key, value in config.config.get(section, {}).items():
            print(f"  {key}: {value}")
    return EXIT_OK


def _parse_assignment(text: str):
    """Split 'section.key=value'; the value is read as YAML."""
    name, sep, raw = text.partition("=")
    section, dot, key = name.strip().partition(".")
    if not sep or not dot or not section or not key:
        raise UsageError(f"expected SECTION.KEY=VALUE, got {text!r}")
    try:
        value = yaml.safe_load(raw) if raw.strip() else None
    except yaml.YAMLError as e:
        raise UsageError(f"cannot parse value of {name}: {e}")
    return section, key, value


def cmd_runs(args: argparse.Namespace) -> int:
    """
    Print the most recent run-log rows as TSV, newest first.

    Args:
        args: Command arguments

    Returns:
        Exit code
    """
    if args.limit < 1:
        raise UsageError(f"--limit must be at least 1, got {args.limit}")
    path = _pick(args.run_log, get_config().get("logging", "run_log"))
    if path is None:
        raise UsageError("no run log configured; pass --run-log or set logging.run_log")

    runs = RunLogger(path).get_recent_runs(args.limit)
    print("\t".join(RUN_LOG_COLUMNS))
    for run in runs:
        print("\t".join(run.get(column, "") for column in RUN_LOG_COLUMNS))
    if not runs:
        print(f"No runs recorded in {path}", file=sys.stderr)
    return EXIT_OK
