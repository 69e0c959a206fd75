"""Regenerate the full benchmark: parameter sweep, metrics, trials, ranking and export.

Every random stream is derived from the master seed and a position index
(parameter set, attempt, environment id), never from worker scheduling, so
any number of worker processes produces the same bytes.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path as FsPath
from typing import Sequence

import numpy as np
from scipy.stats import spearmanr

from .cspace import DEFAULT_RESOLUTION, JACKAL, RobotFootprint, inflate
from .envgen import AutomatonParams, generate
from .errors import ConfigurationError, GenerationExhausted, NoEndpoint, NoObstacle
from .grid import Cell, OccupancyGrid
from .metrics import DEFAULT_MAX_RANGE, REFERENCE_STATS, MetricStats, MetricVector, compute_all, normalize
from .model import LabeledExample, MlpModel, TrainConfig, forward, train
from .nav_sim import DEFAULT_TIMEOUT_S, PlannerConfig, benchmark_env, trial_rows, write_trial_csv
from .planner import Path, astar, is_connected, path_length_m, select_endpoints

FILLS = (0.15, 0.20, 0.25, 0.30)
ITERATIONS = (2, 3, 4)
REPETITIONS = 25
DEFAULT_MAX_ATTEMPTS = 20_000
MANIFEST_FORMAT = "barn-manifest-1"
EXPORT_FORMATS = ("text", "json", "pgm")
RANK_KEYS = ("benchmarked", "predicted")

# stream tags mixed into the seed derivation so the streams never collide
_GRID, _ENDPOINTS, _TRIALS, _SPLIT = 0, 1, 2, 3


def derive_seed(*keys: int) -> int:
    """Deterministic 63-bit seed from a tuple of non-negative integers."""
    state = np.random.SeedSequence([int(k) for k in keys]).generate_state(1, np.uint64)[0]
    return int(state) >> 1


@dataclass(frozen=True)
class ParameterSet:
    index: int
    initial_fill_percentage: float
    smoothing_iterations: int
    fill_threshold: int = 5
    clear_threshold: int = 1

    def automaton(self, seed: int) -> AutomatonParams:
        return AutomatonParams(
            self.initial_fill_percentage, self.smoothing_iterations,
            self.fill_threshold, self.clear_threshold, seed,
        )

    @property
    def label(self) -> str:
        return f"set {self.index} (fill {self.initial_fill_percentage}, {self.smoothing_iterations} iterations)"

    def to_dict(self) -> dict:
        return asdict(self)


def parameter_table(
    fills: Sequence[float] = FILLS,
    iterations: Sequence[int] = ITERATIONS,
    fill_threshold: int = 5,
    clear_threshold: int = 1,
) -> list[ParameterSet]:
    """Fill-major sweep: sets 0-2 share the lowest fill, and so on."""
    return [
        ParameterSet(i * len(iterations) + j, float(p), int(k), fill_threshold, clear_threshold)
        for i, p in enumerate(fills)
        for j, k in enumerate(iterations)
    ]


@dataclass
class EnvironmentBundle:
    env_id: int
    params: AutomatonParams
    grid: OccupancyGrid
    cspace: OccupancyGrid
    path: Path
    metrics: MetricVector
    set_index: int = 0
    attempt: int = 0
    footprint_cells: int = JACKAL.cells
    max_range: int = DEFAULT_MAX_RANGE
    normalized: tuple[float, ...] | None = None
    stats_name: str | None = None
    benchmark_mean: float | None = None
    benchmark_variance: float | None = None
    predicted: float | None = None

    @property
    def name(self) -> str:
        return f"env_{self.env_id:03d}"

    @property
    def start(self) -> Cell:
        return self.path.start

    @property
    def goal(self) -> Cell:
        return self.path.goal

    def metrics_dict(self) -> dict:
        return {
            "raw": self.metrics.to_dict(),
            "normalized": list(self.normalized) if self.normalized is not None else None,
            "stats": self.stats_name,
            "max_range": self.max_range,
        }

    def to_dict(self) -> dict:
        return {
            "env_id": self.env_id,
            "set_index": self.set_index,
            "attempt": self.attempt,
            "params": self.params.to_dict(),
            "width": self.grid.width,
            "height": self.grid.height,
            "resolution": self.grid.resolution,
            "footprint_cells": self.footprint_cells,
            "start": list(self.start),
            "goal": list(self.goal),
            "path": [[c.x, c.y] for c in self.path.cells],
            "path_m": path_length_m(self.path),
            "metrics": self.metrics_dict(),
            "benchmark": (
                None if self.benchmark_mean is None
                else {"mean": self.benchmark_mean, "variance": self.benchmark_variance}
            ),
            "predicted": self.predicted,
            "files": {"grid": "grid.txt", "cspace": "cspace.txt"},
        }


def build_environment(
    params: AutomatonParams,
    endpoint_seed: int,
    width: int = 30,
    height: int = 30,
    resolution: float = DEFAULT_RESOLUTION,
    footprint: RobotFootprint = JACKAL,
    max_range: int = DEFAULT_MAX_RANGE,
) -> EnvironmentBundle | None:
    """One generation attempt; ``None`` when the world must be discarded."""
    grid = generate(width, height, params, resolution)
    cspace = inflate(grid, footprint)
    try:
        start, goal = select_endpoints(cspace, endpoint_seed)
    except NoEndpoint:
        return None
    if not is_connected(cspace, start, goal):
        return None
    path = astar(cspace, start, goal)
    try:
        metrics = compute_all(cspace, path, max_range)
    except NoObstacle:
        return None
    return EnvironmentBundle(
        env_id=0, params=params, grid=grid, cspace=cspace, path=path, metrics=metrics,
        footprint_cells=footprint.cells, max_range=max_range,
    )


@dataclass(frozen=True)
class GenerationSettings:
    width: int = 30
    height: int = 30
    resolution: float = DEFAULT_RESOLUTION
    footprint_cells: int = JACKAL.cells
    max_range: int = DEFAULT_MAX_RANGE
    repetitions: int = REPETITIONS
    max_attempts: int = DEFAULT_MAX_ATTEMPTS

    def footprint(self) -> RobotFootprint:
        return RobotFootprint(JACKAL.length_m, JACKAL.width_m, self.footprint_cells)


def generate_set(pset: ParameterSet, master_seed: int, settings: GenerationSettings) -> list[EnvironmentBundle]:
    """Keep drawing attempts until ``repetitions`` connected worlds exist."""
    found: list[EnvironmentBundle] = []
    footprint = settings.footprint()
    for attempt in range(settings.max_attempts):
        params = pset.automaton(derive_seed(master_seed, pset.index, attempt, _GRID))
        bundle = build_environment(
            params, derive_seed(master_seed, pset.index, attempt, _ENDPOINTS),
            settings.width, settings.height, settings.resolution, footprint, settings.max_range,
        )
        if bundle is None:
            continue
        bundle.env_id = pset.index * settings.repetitions + len(found)
        bundle.set_index = pset.index
        bundle.attempt = attempt
        found.append(bundle)
        if len(found) == settings.repetitions:
            return found
    raise GenerationExhausted(
        f"{pset.label}: only {len(found)} of {settings.repetitions} connected worlds "
        f"after {settings.max_attempts} attempts"
    )


def _generate_set_job(args):
    return generate_set(*args)


@dataclass
class Dataset:
    master_seed: int
    table: list[ParameterSet]
    settings: GenerationSettings
    bundles: list[EnvironmentBundle]
    stats: MetricStats
    planner: PlannerConfig | None = None
    n_trials: int = 0
    timeout_s: float = DEFAULT_TIMEOUT_S
    trials: list[dict] = field(default_factory=list)

    def __len__(self):
        return len(self.bundles)


def _map(fn, items, jobs: int):
    if jobs <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def generate_dataset(
    master_seed: int,
    jobs: int = 1,
    settings: GenerationSettings = GenerationSettings(),
    table: Sequence[ParameterSet] | None = None,
    stats: MetricStats | None = None,
) -> Dataset:
    """All parameter sets, their worlds, paths and metrics.

    Metrics are normalized with ``stats``, or with statistics recomputed
    over the generated population when ``stats`` is None.
    """
    table = list(table) if table is not None else parameter_table()
    per_set = _map(_generate_set_job, [(p, master_seed, settings) for p in table], jobs)
    bundles = [b for group in per_set for b in group]
    stats = stats or MetricStats.from_vectors([b.metrics for b in bundles], name="dataset")
    for b in bundles:
        b.normalized = tuple(float(z) for z in normalize(b.metrics, stats))
        b.stats_name = stats.name
    return Dataset(master_seed, table, settings, bundles, stats)


def _benchmark_job(args):
    bundle, config, n_trials, timeout_s = args
    result = benchmark_env(bundle.grid, bundle.cspace, bundle.path, n_trials, config, timeout_s)
    return result.mean, result.variance, trial_rows(bundle.name, result.trials)


def benchmark_dataset(
    dataset: Dataset,
    n_trials: int = 5,
    config: PlannerConfig = PlannerConfig(),
    timeout_s: float = DEFAULT_TIMEOUT_S,
    jobs: int = 1,
    env_ids: Sequence[int] | None = None,
) -> list[dict]:
    """Simulate every (or every listed) environment; fills benchmark fields and returns trial rows.

    Environment ``i`` uses trial seeds ``s, s+1, ...`` with ``s`` derived from
    the master seed and ``i``.
    """
    chosen = [b for b in dataset.bundles if env_ids is None or b.env_id in set(env_ids)]
    jobs_args = [
        (b, config.with_seed(derive_seed(dataset.master_seed, b.env_id, _TRIALS)), n_trials, timeout_s)
        for b in chosen
    ]
    rows: list[dict] = []
    for b, (mean, var, env_rows) in zip(chosen, _map(_benchmark_job, jobs_args, jobs)):
        b.benchmark_mean, b.benchmark_variance = mean, var
        rows.extend(env_rows)
    dataset.planner, dataset.n_trials, dataset.timeout_s = config, n_trials, timeout_s
    dataset.trials = rows
    return rows


# -- ranking ----------------------------------------------------------------


def rank_dataset(manifest: "DatasetManifest", key: str) -> list[int]:
    """Env ids sorted easy to hard by ``key``; ties keep env_id order."""
    values = manifest.key_values(key)
    return sorted(values, key=lambda env_id: (values[env_id], env_id))


# -- export -------------------------------------------------------------------

PGM_FREE, PGM_OCCUPIED = 255, 0


def pgm_bytes(grid: OccupancyGrid) -> bytes:
    header = f"P5\n{grid.width} {grid.height}\n255\n".encode("ascii")
    body = np.where(grid.cells, PGM_OCCUPIED, PGM_FREE).astype(np.uint8)
    return header + body.tobytes()


def read_pgm(data: bytes) -> OccupancyGrid:
    """Inverse of :func:`pgm_bytes` (resolution is not stored in PGM)."""
    parts = data.split(b"\n", 3)
    if len(parts) != 4 or parts[0] != b"P5" or parts[2] != b"255":
        raise ConfigurationError("not a binary 8-bit PGM written by this package")
    w, h = (int(v) for v in parts[1].split())
    body = np.frombuffer(parts[3], dtype=np.uint8)
    if body.size != w * h:
        raise ConfigurationError(f"PGM body holds {body.size} bytes, expected {w * h}")
    return OccupancyGrid(body.reshape(h, w) == PGM_OCCUPIED, DEFAULT_RESOLUTION)


def environment_schema() -> dict:
    text = resources.files("barn").joinpath("schemas/environment.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def _dump_json(data) -> str:
    return json.dumps(data, indent=2, sort_keys=True, allow_nan=False) + "\n"


def export_env(bundle: EnvironmentBundle, fmt: str, dest) -> list[FsPath]:
    """Write one environment in ``fmt`` (text, json or pgm) into directory ``dest``."""
    if fmt not in EXPORT_FORMATS:
        raise ConfigurationError(f"unknown export format {fmt!r}; choose from {', '.join(EXPORT_FORMATS)}")
    dest = FsPath(dest)
    try:
        dest.mkdir(parents=True, exist_ok=True)
        written = []
        if fmt == "text":
            written += [dest / "grid.txt", dest / "cspace.txt"]
            bundle.grid.save(written[0])
            bundle.cspace.save(written[1], comments=[f"cspace footprint {bundle.footprint_cells}"])
        elif fmt == "json":
            written += [dest / "env.json", dest / "metrics.json"]
            written[0].write_text(_dump_json(bundle.to_dict()), encoding="utf-8")
            written[1].write_text(_dump_json(bundle.metrics_dict()), encoding="utf-8")
        else:
            written += [dest / "grid.pgm", dest / "cspace.pgm"]
            written[0].write_bytes(pgm_bytes(bundle.grid))
            written[1].write_bytes(pgm_bytes(bundle.cspace))
    except OSError as exc:
        raise ConfigurationError(f"cannot write to {dest}: {exc}") from exc
    return written


def load_env(path) -> EnvironmentBundle:
    """Read an exported environment from its ``env.json`` (or the directory holding it)."""
    path = FsPath(path)
    if path.is_dir():
        path = path / "env.json"
    data = json.loads(path.read_text(encoding="utf-8"))
    root = path.parent
    grid = OccupancyGrid.load(root / data["files"]["grid"])
    cspace = OccupancyGrid.load(root / data["files"]["cspace"])
    metrics = data["metrics"]
    bench = data.get("benchmark")
    return EnvironmentBundle(
        env_id=data["env_id"],
        params=AutomatonParams(**data["params"]),
        grid=grid,
        cspace=cspace,
        path=Path(tuple(Cell(*c) for c in data["path"]), grid.resolution),
        metrics=MetricVector(**metrics["raw"]),
        set_index=data["set_index"],
        attempt=data["attempt"],
        footprint_cells=data["footprint_cells"],
        max_range=metrics["max_range"],
        normalized=tuple(metrics["normalized"]) if metrics["normalized"] is not None else None,
        stats_name=metrics["stats"],
        benchmark_mean=bench["mean"] if bench else None,
        benchmark_variance=bench["variance"] if bench else None,
        predicted=data.get("predicted"),
    )


# -- manifest -------------------------------------------------------------------


@dataclass
class DatasetManifest:
    data: dict
    path: FsPath | None = None

    @property
    def master_seed(self) -> int:
        return self.data["master_seed"]

    @property
    def rows(self) -> list[dict]:
        return self.data["environments"]

    @property
    def stats(self) -> MetricStats:
        return MetricStats.from_dict(self.data["stats"])

    def env_dir(self, env_id: int) -> FsPath:
        row = next(r for r in self.rows if r["env_id"] == env_id)
        base = self.path.parent if self.path is not None else FsPath(".")
        return base / row["dir"]

    def key_values(self, key: str) -> dict[int, float]:
        if key not in RANK_KEYS:
            raise ConfigurationError(f"unknown ranking key {key!r}; choose from {', '.join(RANK_KEYS)}")
        field_name = "benchmark_mean" if key == "benchmarked" else "predicted"
        missing = [r["env_id"] for r in self.rows if r.get(field_name) is None]
        if missing:
            raise ConfigurationError(f"{len(missing)} environments have no {key} value (first: {missing[0]})")
        return {r["env_id"]: float(r[field_name]) for r in self.rows}

    def refresh_orderings(self) -> None:
        orderings = {}
        for key in RANK_KEYS:
            try:
                orderings[key] = rank_dataset(self, key)
            except ConfigurationError:
                orderings[key] = None
        self.data["ordering"] = orderings

    def save(self, path=None) -> FsPath:
        path = FsPath(path or self.path)
        path.write_text(_dump_json(self.data), encoding="utf-8")
        self.path = path
        return path

    @classmethod
    def load(cls, path) -> "DatasetManifest":
        path = FsPath(path)
        if path.is_dir():
            path = path / "manifest.json"
        data = json.loads(path.read_text(encoding="utf-8"))
        if data.get("format") != MANIFEST_FORMAT:
            raise ConfigurationError(f"{path} is not a {MANIFEST_FORMAT} file")
        return cls(data, path)


def _manifest_row(bundle: EnvironmentBundle) -> dict:
    return {
        "env_id": bundle.env_id,
        "name": bundle.name,
        "dir": f"envs/{bundle.name}",
        "set_index": bundle.set_index,
        "attempt": bundle.attempt,
        "seed": bundle.params.seed,
        "initial_fill_percentage": bundle.params.initial_fill_percentage,
        "smoothing_iterations": bundle.params.smoothing_iterations,
        "start": list(bundle.start),
        "goal": list(bundle.goal),
        "path_m": path_length_m(bundle.path),
        "metrics": bundle.metrics.to_dict(),
        "normalized": list(bundle.normalized) if bundle.normalized is not None else None,
        "benchmark_mean": bundle.benchmark_mean,
        "benchmark_variance": bundle.benchmark_variance,
        "predicted": bundle.predicted,
    }


def build_manifest(dataset: Dataset) -> DatasetManifest:
    data = {
        "format": MANIFEST_FORMAT,
        "master_seed": dataset.master_seed,
        "settings": asdict(dataset.settings),
        "parameter_table": [p.to_dict() for p in dataset.table],
        "stats": dataset.stats.to_dict(),
        "benchmark": {
            "n_trials": dataset.n_trials,
            "timeout_s": dataset.timeout_s,
            "planner": asdict(dataset.planner) if dataset.planner is not None else None,
            "trials_csv": "trials.csv" if dataset.trials else None,
        },
        "environments": [_manifest_row(b) for b in dataset.bundles],
    }
    manifest = DatasetManifest(data)
    manifest.refresh_orderings()
    return manifest


def write_dataset(dataset: Dataset, out_dir, formats: Sequence[str] = EXPORT_FORMATS) -> DatasetManifest:
    """Write every environment, the trial CSV and ``manifest.json`` under ``out_dir``."""
    out = FsPath(out_dir)
    for b in dataset.bundles:
        for fmt in formats:
            export_env(b, fmt, out / "envs" / b.name)
    if dataset.trials:
        write_trial_csv(out / "trials.csv", dataset.trials)
    manifest = build_manifest(dataset)
    manifest.save(out / "manifest.json")
    return manifest


def run_pipeline(
    master_seed: int,
    out_dir,
    jobs: int = 1,
    n_trials: int = 5,
    settings: GenerationSettings = GenerationSettings(),
    config: PlannerConfig = PlannerConfig(),
    timeout_s: float = DEFAULT_TIMEOUT_S,
) -> tuple[Dataset, DatasetManifest]:
    dataset = generate_dataset(master_seed, jobs, settings)
    if n_trials > 0:
        benchmark_dataset(dataset, n_trials, config, timeout_s, jobs)
    return dataset, write_dataset(dataset, out_dir)


# -- learning from a manifest ------------------------------------------------------


@dataclass(frozen=True)
class TrainingReport:
    train_ids: tuple[int, ...]
    test_ids: tuple[int, ...]
    test_mae: float
    test_spearman: float
    ordering_spearman: float


def split_ids(env_ids: Sequence[int], n_train: int, seed: int) -> tuple[list[int], list[int]]:
    """Seeded shuffle of ``env_ids``; the first ``n_train`` train, the rest test."""
    ids = sorted(env_ids)
    if not 0 < n_train <= len(ids):
        raise ConfigurationError(f"cannot take {n_train} training environments out of {len(ids)}")
    rng = np.random.Generator(np.random.PCG64(derive_seed(seed, _SPLIT)))
    order = [ids[i] for i in rng.permutation(len(ids))]
    return sorted(order[:n_train]), sorted(order[n_train:])


def train_from_manifest(
    manifest: DatasetManifest,
    config: TrainConfig = TrainConfig(),
    seed: int = 0,
    n_train: int | None = None,
) -> tuple[MlpModel, TrainingReport]:
    """Fit on a seeded 80% split of benchmarked environments and store predictions for all of them."""
    labels = manifest.key_values("benchmarked")
    rows = {r["env_id"]: r for r in manifest.rows}
    if any(rows[i]["normalized"] is None for i in rows):
        raise ConfigurationError("manifest rows lack normalized metrics")
    n_train = n_train if n_train is not None else int(round(0.8 * len(rows)))
    train_ids, test_ids = split_ids(list(rows), n_train, seed)
    examples = [LabeledExample(tuple(rows[i]["normalized"]), labels[i]) for i in train_ids]
    model = train(examples, config, seed)

    X = np.array([rows[i]["normalized"] for i in sorted(rows)])
    preds = dict(zip(sorted(rows), (float(p) for p in forward(model, X))))
    for env_id, row in rows.items():
        row["predicted"] = preds[env_id]
    manifest.refresh_orderings()

    if test_ids:
        t_pred = np.array([preds[i] for i in test_ids])
        t_true = np.array([labels[i] for i in test_ids])
        mae = float(np.mean(np.abs(t_pred - t_true)))
        rho = float(spearmanr(t_pred, t_true)[0]) if len(test_ids) > 1 else math.nan
    else:
        mae, rho = math.nan, math.nan
    all_ids = sorted(rows)
    ordering_rho = float(spearmanr([labels[i] for i in all_ids], [preds[i] for i in all_ids])[0])
    report = TrainingReport(tuple(train_ids), tuple(test_ids), mae, rho, ordering_rho)
    model.meta.update(
        stats=manifest.stats.to_dict(),
        max_range=manifest.data["settings"]["max_range"],
        manifest_seed=manifest.master_seed,
        train_ids=list(train_ids),
        test_ids=list(test_ids),
        test_mae=mae,
        test_spearman=rho,
    )
    return model, report


def predict_env(model: MlpModel, bundle: EnvironmentBundle, stats: MetricStats | None = None) -> float:
    """Predicted s/m for one environment, normalizing with the stats stored alongside the model."""
    if stats is None:
        if "stats" not in model.meta:
            raise ConfigurationError("model carries no normalization stats; pass them explicitly")
        stats = MetricStats.from_dict(model.meta["stats"])
    return forward(model, normalize(bundle.metrics, stats))


def with_reference_stats(dataset: Dataset) -> Dataset:
    """Copy of ``dataset`` normalized with the fixed reference statistics."""
    bundles = [
        replace(b, normalized=tuple(float(z) for z in normalize(b.metrics, REFERENCE_STATS)), stats_name=REFERENCE_STATS.name)
        for b in dataset.bundles
    ]
    return replace(dataset, bundles=bundles, stats=REFERENCE_STATS)
