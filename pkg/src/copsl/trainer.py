"""End-to-end training: sample preferences, forward, scalarize, backpropagate.

One run owns its model, random streams, ideal-point tracker, and optimizer
state, and is strictly sequential, so a (config, seed) pair fully determines
every recorded series. Initialization and preference sampling consume from
separate substreams of the same seed, which keeps preference sequences
identical across architecture variants trained with paired seeds.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigurationError, CopslError, TrainingDivergedError, UnsupportedError
from .ioutil import atomic_write_text
from .metrics import CSV_FLOAT_FORMAT, hv_2d, hv_3d, log_hv_diff, nondominated_filter
from .model import (
    CoPslModel,
    ModelArchitecture,
    backward_all,
    build_model,
    count_flops,
    count_params,
    forward_all,
    parameter_arrays,
    save_checkpoint,
)
from .optim import adam_step, init_adam_state
from .problems import MopDefinition, ProblemSuite, builtin_suite, map_unit_to_box, suite_from_names, true_front_hv
from .sampling import RNG_ALGORITHM, RngStream, sample_preferences, uniform_preference_grid
from .scalarize import IdealPointTracker, LossSpec, batch_loss, chain_to_decision, total_loss

CONFIG_VERSION = 1

IDEAL_UPDATE_MODES = ("before-loss", "after-loss")


@dataclass(frozen=True)
class RunConfig:
    """Everything a training run depends on, serializable as flat JSON.

    ``suite`` is either a built-in suite name or a list of registered problem
    names. ``eval_grid`` of 0 picks the default evaluation grid size (100
    preferences for two objectives, a 105-point lattice for three).
    """

    suite: object = "synthetic-2d"
    loss: str = "tch"
    gamma: float = 100.0
    epsilon: float = 1e-3
    cosmos_sign: int = -1
    iterations: int = 500
    batch_size: int = 15
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    dirichlet_alpha: Optional[tuple[float, ...]] = None
    weights: Optional[tuple[float, ...]] = None
    hidden_sizes: tuple[int, ...] = (256, 256)
    shared_depth: int = 1
    seed: int = 0
    eval_grid: int = 0
    eval_interval: int = 10
    ideal_update: str = "before-loss"
    strict_weight_gating: bool = False
    trace_params: bool = False

    def __post_init__(self):
        if isinstance(self.suite, (list, tuple)):
            object.__setattr__(self, "suite", tuple(str(s) for s in self.suite))
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        if self.dirichlet_alpha is not None:
            object.__setattr__(
                self, "dirichlet_alpha", tuple(float(a) for a in self.dirichlet_alpha)
            )
        if self.weights is not None:
            object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        self.validate()

    def validate(self) -> None:
        if self.iterations < 1:
            raise ConfigurationError(f"iterations must be >= 1, got {self.iterations}")
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.learning_rate > 0.0:
            raise ConfigurationError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.eval_interval < 1:
            raise ConfigurationError(f"eval_interval must be >= 1, got {self.eval_interval}")
        if self.eval_grid < 0:
            raise ConfigurationError(f"eval_grid must be >= 0, got {self.eval_grid}")
        if self.ideal_update not in IDEAL_UPDATE_MODES:
            raise ConfigurationError(
                f"ideal_update must be one of {IDEAL_UPDATE_MODES}, got {self.ideal_update!r}"
            )
        self.loss_spec()  # validates loss kind and hyperparameters

    def loss_spec(self) -> LossSpec:
        return LossSpec(
            kind=self.loss,
            gamma=self.gamma,
            epsilon=self.epsilon,
            cosine_sign=self.cosmos_sign,
        )

    def resolve_suite(self) -> ProblemSuite:
        if isinstance(self.suite, str):
            return builtin_suite(self.suite)
        return suite_from_names(self.suite)

    def to_dict(self) -> dict:
        data = dataclasses.asdict(self)
        for key in ("suite", "hidden_sizes", "dirichlet_alpha", "weights"):
            if isinstance(data[key], tuple):
                data[key] = list(data[key])
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigurationError("config must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigurationError(f"unknown config keys: {unknown}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigurationError(f"malformed config: {exc}") from exc


@dataclass
class RunRecord:
    """Everything measured during one seeded run."""

    config: dict
    rng_algorithm: str
    suite_name: str
    mop_names: list[str]
    total_loss: list[float]
    mop_losses: list[list[float]]
    eval_steps: list[int]
    hv: list[list[float]]
    log_hv_diff: list[list[Optional[float]]]
    wall_seconds: float
    param_count: int
    flops_per_batch: int
    param_trace: Optional[list[str]] = None
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def save_json(self, path: str) -> None:
        atomic_write_text(path, json.dumps(self.to_dict(), sort_keys=True) + "\n")

    @classmethod
    def from_json(cls, path: str) -> "RunRecord":
        with open(path, "r", encoding="utf-8") as handle:
            data = json.load(handle)
        return cls(**data)


@dataclass
class EvalReport:
    fronts: list[np.ndarray]
    hypervolumes: list[float]
    log_diffs: list[Optional[float]]


def _default_grid_size(num_objectives: int) -> int:
    return 100 if num_objectives == 2 else 105


def _eval_steps(iterations: int, interval: int) -> list[int]:
    steps = [0] + list(range(interval, iterations + 1, interval))
    if steps[-1] != iterations:
        steps.append(iterations)
    return steps


def _hypervolume(points: np.ndarray, reference: np.ndarray) -> float:
    if reference.shape[0] == 2:
        return hv_2d(points, reference)
    if reference.shape[0] == 3:
        return hv_3d(points, reference)
    raise UnsupportedError("exact hypervolume is implemented for 2 or 3 objectives")


def evaluate_model(model: CoPslModel, suite: ProblemSuite, grid: np.ndarray) -> EvalReport:
    """Push a deterministic preference grid through the model and score it.

    Returns the nondominated front per problem, its hypervolume against the
    problem's reference point, and the log hypervolume gap to the true front
    where a closed form exists (None otherwise).
    """
    outputs, _ = forward_all(model, grid)
    fronts: list[np.ndarray] = []
    hypervolumes: list[float] = []
    log_diffs: list[Optional[float]] = []
    for i, mop in enumerate(suite.problems):
        if mop.reference_point is None:
            raise ConfigurationError(f"problem '{mop.name}' has no reference point")
        x, _ = map_unit_to_box(outputs[i], mop.bounds)
        objectives = mop.evaluate(x)
        front = nondominated_filter(objectives)
        hv = _hypervolume(front, mop.reference_point)
        fronts.append(front)
        hypervolumes.append(hv)
        if mop.front_hypervolume is not None:
            log_diffs.append(log_hv_diff(true_front_hv(mop, mop.reference_point), hv))
        else:
            log_diffs.append(None)
    return EvalReport(fronts=fronts, hypervolumes=hypervolumes, log_diffs=log_diffs)


def _param_digest(model: CoPslModel) -> str:
    digest = hashlib.sha256()
    for array in parameter_arrays(model):
        digest.update(array.tobytes())
    return digest.hexdigest()


def train_copsl(config: RunConfig, suite: Optional[ProblemSuite] = None) -> tuple[CoPslModel, RunRecord]:
    """Train one model on every problem of the suite simultaneously.

    Each iteration samples one shared batch of preference vectors, feeds it
    to all heads, updates the per-problem ideal points, scalarizes, and
    applies one Adam step to the routed gradients. Metrics are recorded on
    the deterministic preference grid at every evaluation step.
    """
    if suite is None:
        suite = config.resolve_suite()
    m = suite.num_objectives
    k = suite.num_mops

    weights = np.ones(k) if config.weights is None else np.asarray(config.weights, dtype=np.float64)
    if weights.shape != (k,):
        raise ConfigurationError(f"expected {k} MOP weights, got {weights.shape[0]}")
    if (weights < 0.0).any():
        raise ConfigurationError("MOP weights must be nonnegative")
    alpha = np.ones(m) if config.dirichlet_alpha is None else np.asarray(config.dirichlet_alpha, dtype=np.float64)
    if alpha.shape != (m,):
        raise ConfigurationError(f"expected {m} Dirichlet parameters, got {alpha.shape[0]}")

    arch = ModelArchitecture(
        num_objectives=m,
        hidden_sizes=config.hidden_sizes,
        shared_depth=config.shared_depth,
        output_dims=suite.output_dims,
    )
    init_rng = RngStream(config.seed, stream=0)
    pref_rng = RngStream(config.seed, stream=1)
    model = build_model(arch, init_rng)
    adam = init_adam_state(
        model, beta1=config.adam_beta1, beta2=config.adam_beta2, epsilon=config.adam_epsilon
    )
    tracker = IdealPointTracker(k, m, epsilon=config.epsilon)
    spec = config.loss_spec()
    grid_size = config.eval_grid or _default_grid_size(m)
    grid = uniform_preference_grid(m, grid_size)

    zero_weight = [i for i in range(k) if weights[i] == 0.0]
    notes = []
    if spec.kind == "cosmos":
        notes.append(
            f"cosmos cosine term sign={spec.cosine_sign:+d} "
            f"({'subtracted, rewards alignment' if spec.cosine_sign < 0 else 'added'})"
        )
    notes.append(f"ideal point updated {config.ideal_update.replace('-', ' ')} each iteration")

    eval_at = set(_eval_steps(config.iterations, config.eval_interval))
    record = RunRecord(
        config=config.to_dict(),
        rng_algorithm=RNG_ALGORITHM,
        suite_name=suite.name,
        mop_names=[p.name for p in suite.problems],
        total_loss=[],
        mop_losses=[],
        eval_steps=[],
        hv=[],
        log_hv_diff=[],
        wall_seconds=0.0,
        param_count=count_params(model),
        flops_per_batch=count_flops(model, config.batch_size),
        param_trace=[_param_digest(model)] if config.trace_params else None,
        notes=notes,
    )

    def run_eval(step: int, current: CoPslModel) -> None:
        report = evaluate_model(current, suite, grid)
        record.eval_steps.append(step)
        record.hv.append(report.hypervolumes)
        record.log_hv_diff.append(report.log_diffs)

    started = time.perf_counter()
    run_eval(0, model)
    for iteration in range(1, config.iterations + 1):
        prefs = sample_preferences(pref_rng, alpha, config.batch_size)
        outputs, caches = forward_all(model, prefs)

        mop_losses: list[float] = []
        output_grads: list[np.ndarray] = []
        for i, mop in enumerate(suite.problems):
            x, box_derivative = map_unit_to_box(outputs[i], mop.bounds)
            objectives = mop.evaluate(x)
            if not np.isfinite(objectives).all():
                raise TrainingDivergedError(
                    f"non-finite objective values for MOP '{mop.name}' "
                    f"(index {i}) at iteration {iteration}"
                )
            jacobians = mop.jacobian(x)
            if config.ideal_update == "before-loss" or iteration == 1:
                # The first batch always seeds the tracker, otherwise the
                # +inf sentinel would reach the loss.
                tracker.update(i, objectives)
            loss_value, objective_grads = batch_loss(spec, objectives, prefs, tracker.ideal(i))
            if config.ideal_update == "after-loss":
                tracker.update(i, objectives)
            if not np.isfinite(loss_value):
                raise TrainingDivergedError(
                    f"non-finite loss {loss_value} for MOP '{mop.name}' "
                    f"(index {i}) at iteration {iteration}"
                )
            mop_losses.append(loss_value)
            output_grads.append(chain_to_decision(objective_grads, jacobians, box_derivative))

        grads = backward_all(model, caches, output_grads, weights)
        if config.strict_weight_gating and zero_weight:
            for i in zero_weight:
                grads.heads[i] = [
                    (np.zeros_like(dw), np.zeros_like(db)) for dw, db in grads.heads[i]
                ]
        model, adam = adam_step(model, grads, adam, config.learning_rate)

        record.total_loss.append(total_loss(mop_losses, weights))
        record.mop_losses.append(mop_losses)
        if config.trace_params:
            record.param_trace.append(_param_digest(model))
        if iteration in eval_at:
            run_eval(iteration, model)
    record.wall_seconds = time.perf_counter() - started
    return model, record


def train_psl(config: RunConfig, problem: MopDefinition) -> tuple[CoPslModel, RunRecord]:
    """Train the single-problem baseline: the same loop on a singleton suite."""
    suite = ProblemSuite(problem.name, (problem,))
    single = dataclasses.replace(config, weights=(1.0,) if config.weights is None else config.weights)
    return train_copsl(single, suite)


# ---------------------------------------------------------------------------
# Experiment drivers
# ---------------------------------------------------------------------------


def run_ablation(
    config: RunConfig, suite: Optional[ProblemSuite] = None, seeds=(0,)
) -> tuple[list[dict], list[dict]]:
    """Train every shared-depth variant of the configured stack per seed.

    Returns (rows, failures). Each row holds shared_depth, seed, mop, final
    hypervolume, hypervolume delta against the fully separate (shared_depth
    0) variant with the same seed, and the variant's parameter count.
    """
    if suite is None:
        suite = config.resolve_suite()
    depths = list(range(len(config.hidden_sizes) + 1))
    rows: list[dict] = []
    failures: list[dict] = []
    baseline_hv: dict[tuple[int, int], float] = {}
    for depth in depths:
        for seed in seeds:
            variant = dataclasses.replace(config, shared_depth=depth, seed=seed)
            try:
                model, record = train_copsl(variant, suite)
            except CopslError as exc:
                failures.append({"shared_depth": depth, "seed": seed, "error": str(exc)})
                continue
            final_hv = record.hv[-1]
            params = record.param_count
            for i, mop in enumerate(suite.problems):
                if depth == 0:
                    baseline_hv[(seed, i)] = final_hv[i]
                base = baseline_hv.get((seed, i))
                delta = final_hv[i] - base if base is not None else None
                rows.append(
                    {
                        "shared_depth": depth,
                        "seed": seed,
                        "mop": mop.name,
                        "hv": final_hv[i],
                        "delta_hv": delta,
                        "params": params,
                    }
                )
    return rows, failures


def run_batch(configs, seeds, out_dir: Optional[str] = None) -> list[dict]:
    """Run each config across all seeds and aggregate final metrics.

    Failures are recorded per seed and excluded from the statistics; they do
    not abort the batch. With ``out_dir`` set, every run's record, loss and
    evaluation series, and final checkpoint are persisted there.
    """
    import os

    if len(seeds) < 1:
        raise ConfigurationError("need at least one seed")
    summaries: list[dict] = []
    for index, config in enumerate(configs):
        suite = config.resolve_suite()
        records: list[RunRecord] = []
        failures: list[dict] = []
        artifacts: list[str] = []
        for seed in seeds:
            run_config = dataclasses.replace(config, seed=seed)
            try:
                model, record = train_copsl(run_config, suite)
            except CopslError as exc:
                failures.append({"seed": seed, "error": str(exc)})
                continue
            records.append(record)
            if out_dir is not None:
                tag = f"seed{seed}" if len(configs) == 1 else f"config{index}_seed{seed}"
                paths = {
                    "record": os.path.join(out_dir, f"run_{tag}.json"),
                    "losses": os.path.join(out_dir, f"losses_{tag}.csv"),
                    "eval": os.path.join(out_dir, f"eval_{tag}.csv"),
                    "checkpoint": os.path.join(out_dir, f"model_{tag}.ckpt"),
                }
                record.save_json(paths["record"])
                write_loss_csv(record, paths["losses"])
                write_eval_csv(record, paths["eval"])
                suite_spec = config.suite if isinstance(config.suite, str) else list(config.suite)
                save_checkpoint(model, paths["checkpoint"], metadata={"suite": suite_spec, "seed": seed})
                artifacts.extend(paths.values())
        summary: dict = {
            "config_index": index,
            "seeds": list(seeds),
            "records": records,
            "failures": failures,
            "artifacts": artifacts,
        }
        if records:
            final_hv = np.array([r.hv[-1] for r in records])
            walls = np.array([r.wall_seconds for r in records])
            summary["mop_names"] = records[0].mop_names
            summary["mean_final_hv"] = final_hv.mean(axis=0).tolist()
            summary["std_final_hv"] = final_hv.std(axis=0).tolist()
            summary["mean_wall_seconds"] = float(walls.mean())
            summary["std_wall_seconds"] = float(walls.std())
        summaries.append(summary)
    return summaries


# ---------------------------------------------------------------------------
# Series files
# ---------------------------------------------------------------------------


def _fmt(value) -> str:
    if value is None:
        return "nan"
    return format(float(value), CSV_FLOAT_FORMAT)


def write_loss_csv(record: RunRecord, path: str) -> None:
    k = len(record.mop_names)
    header = "iteration,total_loss," + ",".join(f"loss_{i + 1}" for i in range(k))
    lines = [header]
    for t, (total, per_mop) in enumerate(zip(record.total_loss, record.mop_losses), start=1):
        lines.append(f"{t},{_fmt(total)}," + ",".join(_fmt(v) for v in per_mop))
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_eval_csv(record: RunRecord, path: str) -> None:
    k = len(record.mop_names)
    header = (
        "eval_step,"
        + ",".join(f"hv_{i + 1}" for i in range(k))
        + ","
        + ",".join(f"log_hv_diff_{i + 1}" for i in range(k))
    )
    lines = [header]
    for step, hv_row, diff_row in zip(record.eval_steps, record.hv, record.log_hv_diff):
        lines.append(
            f"{step},"
            + ",".join(_fmt(v) for v in hv_row)
            + ","
            + ",".join(_fmt(v) for v in diff_row)
        )
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_ablation_csv(rows, path: str) -> None:
    lines = ["shared_depth,seed,mop,hv,delta_hv,params"]
    for row in rows:
        lines.append(
            f"{row['shared_depth']},{row['seed']},{row['mop']},"
            f"{_fmt(row['hv'])},{_fmt(row['delta_hv'])},{row['params']}"
        )
    atomic_write_text(path, "\n".join(lines) + "\n")
