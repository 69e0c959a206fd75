"""Command-line entry point: ``barn <subcommand> ...``.

Exit codes: 0 success, 1 usage or input error, 2 generation exhausted,
3 no path, 4 training diverged.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path as FsPath

from .cspace import DEFAULT_RESOLUTION, JACKAL, RobotFootprint, inflate
from .dataset import (
    DEFAULT_MAX_ATTEMPTS,
    EXPORT_FORMATS,
    DatasetManifest,
    EnvironmentBundle,
    GenerationSettings,
    build_environment,
    derive_seed,
    export_env,
    load_env,
    predict_env,
    rank_dataset,
    run_pipeline,
    train_from_manifest,
)
from .envgen import AutomatonParams
from .errors import BarnError, NoPath
from .grid import OccupancyGrid
from .metrics import DEFAULT_MAX_RANGE, REFERENCE_STATS, MetricStats, compute_all, normalize
from .model import MlpModel, TrainConfig
from .nav_sim import (
    DEFAULT_TIMEOUT_S,
    TRIAL_CSV_FIELDS,
    PlannerConfig,
    benchmark_env,
    trial_rows,
    write_trial_csv,
)
from .planner import astar, select_endpoints


class UsageError(BarnError):
    exit_code = 1


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _print_json(data) -> None:
    print(json.dumps(data, indent=2, sort_keys=True))


def _load_env(path: str, seed: int = 0, max_range: int = DEFAULT_MAX_RANGE) -> EnvironmentBundle:
    """An exported ``env.json`` (or its directory), or a bare BARN1 grid planned on the spot."""
    p = FsPath(path)
    if not p.exists():
        raise UsageError(f"{path}: no such file or directory")
    if p.is_dir() or p.suffix == ".json":
        return load_env(p)
    grid = OccupancyGrid.load(p)
    cspace = inflate(grid, RobotFootprint.for_resolution(JACKAL.length_m, JACKAL.width_m, grid.resolution))
    start, goal = select_endpoints(cspace, derive_seed(seed, 1))
    path_ = astar(cspace, start, goal)
    return EnvironmentBundle(
        env_id=0, params=AutomatonParams(0.0, 0), grid=grid, cspace=cspace, path=path_,
        metrics=compute_all(cspace, path_, max_range), max_range=max_range,
    )


def cmd_generate(args) -> int:
    params = AutomatonParams(args.fill, args.iters, args.fill_threshold, args.clear_threshold, args.seed)
    footprint = RobotFootprint.for_resolution(JACKAL.length_m, JACKAL.width_m, args.resolution)
    bundle = build_environment(
        params, derive_seed(args.seed, 1), args.width, args.height, args.resolution, footprint, args.max_range,
    )
    if bundle is None:
        raise NoPath(f"seed {args.seed}: no connected start/goal pair in this world")
    for fmt in EXPORT_FORMATS:
        export_env(bundle, fmt, args.out)
    _print_json({"out": str(args.out), "start": list(bundle.start), "goal": list(bundle.goal),
                 "metrics": bundle.metrics.to_dict()})
    return 0


def cmd_dataset(args) -> int:
    settings = GenerationSettings(max_range=args.max_range, max_attempts=args.max_attempts)
    dataset, manifest = run_pipeline(
        args.seed, args.out, jobs=args.jobs, n_trials=args.trials, settings=settings, timeout_s=args.timeout,
    )
    print(f"wrote {len(dataset)} environments and {manifest.path}")
    return 0


def cmd_metrics(args) -> int:
    bundle = _load_env(args.env, max_range=args.max_range)
    raw = compute_all(bundle.cspace, bundle.path, args.max_range)
    if args.stats == "table2":
        stats = REFERENCE_STATS
    else:
        manifest_path = args.manifest or _find_manifest(FsPath(args.env))
        if manifest_path is None:
            raise UsageError("--stats dataset needs a manifest (pass --manifest)")
        stats = DatasetManifest.load(manifest_path).stats
    _print_json({
        "raw": raw.to_dict(),
        "normalized": [float(z) for z in normalize(raw, stats)],
        "stats": stats.name,
        "max_range": args.max_range,
    })
    return 0


def _find_manifest(env_path: FsPath) -> FsPath | None:
    start = env_path if env_path.is_dir() else env_path.parent
    for d in [start, *start.parents][:4]:
        if (d / "manifest.json").exists():
            return d / "manifest.json"
    return None


def cmd_simulate(args) -> int:
    bundle = _load_env(args.env, seed=args.seed)
    result = benchmark_env(bundle.grid, bundle.cspace, bundle.path, args.trials,
                           PlannerConfig(seed=args.seed), args.timeout)
    rows = trial_rows(bundle.name, result.trials)
    if args.csv:
        write_trial_csv(args.csv, rows)
    else:
        writer = csv.DictWriter(sys.stdout, fieldnames=TRIAL_CSV_FIELDS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    print(f"# mean {result.mean:.6f} s/m, variance {result.variance:.6f}", file=sys.stderr)
    return 0


def cmd_train(args) -> int:
    manifest = DatasetManifest.load(args.manifest)
    config = TrainConfig(args.epochs, args.lr, args.batch_size)
    model, report = train_from_manifest(manifest, config, args.seed, args.n_train)
    model.save(args.out)
    manifest.save()
    _print_json({
        "model": str(args.out),
        "train": len(report.train_ids),
        "test": len(report.test_ids),
        "test_mae": report.test_mae,
        "test_spearman": report.test_spearman,
        "final_loss": model.meta["final_loss"],
    })
    return 0


def cmd_predict(args) -> int:
    model = MlpModel.load(args.model)
    bundle = _load_env(args.env)
    stats = MetricStats.from_dict(model.meta["stats"]) if "stats" in model.meta else REFERENCE_STATS
    print(f"{predict_env(model, bundle, stats):.6f}")
    return 0


def cmd_rank(args) -> int:
    manifest = DatasetManifest.load(args.manifest)
    values = manifest.key_values(args.key)
    for env_id in rank_dataset(manifest, args.key):
        print(f"{env_id}\t{values[env_id]:.6f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="barn", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="one world, its C-space, path and metrics")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--width", type=int, default=30)
    g.add_argument("--height", type=int, default=30)
    g.add_argument("--fill", type=float, required=True)
    g.add_argument("--iters", type=int, required=True)
    g.add_argument("--fill-threshold", type=int, default=5)
    g.add_argument("--clear-threshold", type=int, default=1)
    g.add_argument("--resolution", type=float, default=DEFAULT_RESOLUTION)
    g.add_argument("--max-range", type=int, default=DEFAULT_MAX_RANGE)
    g.add_argument("--out", type=FsPath, required=True)
    g.set_defaults(func=cmd_generate)

    d = sub.add_parser("dataset", help="full parameter sweep with metrics and benchmark trials")
    d.add_argument("--seed", type=int, required=True)
    d.add_argument("--out", type=FsPath, required=True)
    d.add_argument("--jobs", type=int, default=1)
    d.add_argument("--trials", type=int, default=5, help="trials per environment; 0 skips benchmarking")
    d.add_argument("--timeout", type=float, default=DEFAULT_TIMEOUT_S)
    d.add_argument("--max-range", type=int, default=DEFAULT_MAX_RANGE)
    d.add_argument("--max-attempts", type=int, default=DEFAULT_MAX_ATTEMPTS)
    d.set_defaults(func=cmd_dataset)

    m = sub.add_parser("metrics", help="difficulty metrics of one environment as JSON")
    m.add_argument("--env", required=True)
    m.add_argument("--max-range", type=int, default=DEFAULT_MAX_RANGE)
    m.add_argument("--stats", choices=("table2", "dataset"), default="table2")
    m.add_argument("--manifest", type=FsPath)
    m.set_defaults(func=cmd_metrics)

    s = sub.add_parser("simulate", help="navigation trials on one environment, as trial CSV")
    s.add_argument("--env", required=True)
    s.add_argument("--trials", type=int, default=5)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--timeout", type=float, default=DEFAULT_TIMEOUT_S)
    s.add_argument("--csv", type=FsPath)
    s.set_defaults(func=cmd_simulate)

    t = sub.add_parser("train", help="fit the difficulty regressor on a benchmarked manifest")
    t.add_argument("--manifest", type=FsPath, required=True)
    t.add_argument("--epochs", type=int, default=TrainConfig.epochs)
    t.add_argument("--lr", type=float, default=TrainConfig.learning_rate)
    t.add_argument("--batch-size", type=int, default=TrainConfig.batch_size)
    t.add_argument("--n-train", type=int)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", type=FsPath, required=True)
    t.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="predicted seconds per meter for one environment")
    p.add_argument("--model", type=FsPath, required=True)
    p.add_argument("--env", required=True)
    p.set_defaults(func=cmd_predict)

    r = sub.add_parser("rank", help="environment ids ordered easy to hard")
    r.add_argument("--manifest", type=FsPath, required=True)
    r.add_argument("--key", choices=("benchmarked", "predicted"), required=True)
    r.set_defaults(func=cmd_rank)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except BarnError as exc:
        print(f"barn: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, ValueError) as exc:
        print(f"barn: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
