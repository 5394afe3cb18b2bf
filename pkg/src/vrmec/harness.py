"""Experiment orchestration: build everything from a config, train, log, compare."""

from __future__ import annotations

import csv
import io
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import seeding
from .agents import Controller, make_controller, run_episode
from .config import ConfigError, ExperimentConfig, dump_config, load_config, override
from .env import EPISODE_LOG_COLUMNS, VrEnv
from .latency import Scheme
from .mobility import FovGrid, generate_trace, random_eye_states
from .model import NetworkTopology, build_topology
from .neural import load_checkpoint, save_checkpoint
from .predictor import FovPredictor, LastValuePredictor, PredictorModel, TrainingCurve, \
    train_predictor

METRICS_COLUMNS = ["episode", "total_reward", "avg_qoe_per_user", "avg_interaction_latency",
                   "prediction_accuracy", "wall_time"]
SUMMARY_COLUMNS = ["value", "final_avg_qoe", "final_avg_latency"]
WORKERS_ENV = "VRMEC_WORKERS"


# ------------------------------------------------------------------ builders

def make_grid(cfg: ExperimentConfig) -> FovGrid:
    m = cfg.mobility
    if m.cols and m.rows:
        return FovGrid(m.n_fov, m.cols, m.rows, m.tile_side)
    return FovGrid.for_count(m.n_fov, m.tile_side)


def make_topology(cfg: ExperimentConfig) -> NetworkTopology:
    return build_topology(cfg.topology, seeding.stream(cfg.seed, seeding.TOPOLOGY))


def predictor_traces(cfg: ExperimentConfig) -> np.ndarray:
    grid = make_grid(cfg)
    rng = seeding.stream(cfg.seed, seeding.PREDICTOR_DATA)
    eyes = random_eye_states(cfg.topology.n_users, grid, cfg.mobility.diffusion, rng)
    trace, _ = generate_trace(eyes, grid, cfg.predictor.trace_slots, rng)
    return trace


@dataclass
class PredictorRun:
    predictor: object
    curve: TrainingCurve | None
    accuracy: float | None


def make_predictor(cfg: ExperimentConfig) -> PredictorRun:
    p = cfg.predictor
    n_fov = cfg.mobility.n_fov
    if p.kind == "last-value":
        return PredictorRun(LastValuePredictor(n_fov, p.memory), None, None)
    predictor, curve, acc = train_predictor(
        predictor_traces(cfg), p.epochs, seeding.stream(cfg.seed, seeding.PREDICTOR_DATA, 1),
        n_fov=n_fov, memory=p.memory, hidden=p.hidden, learning_rate=p.learning_rate,
        batch_size=p.batch_size, batches_per_epoch=p.batches_per_epoch, holdout=p.holdout,
        shared=p.shared, init_rng=seeding.stream(cfg.seed, seeding.PREDICTOR_INIT))
    return PredictorRun(predictor, curve, acc)


def save_predictor(predictor, directory: Path) -> None:
    if not isinstance(predictor, FovPredictor):
        return
    for i, model in enumerate(predictor.models):
        name = "predictor.ckpt" if predictor.shared else f"predictor_user{i}.ckpt"
        model.save(directory / name)


def load_predictor(cfg: ExperimentConfig, directory: Path):
    """Rebuild a trained predictor from checkpoints written by :func:`save_predictor`."""
    p = cfg.predictor
    if p.kind == "last-value":
        return LastValuePredictor(cfg.mobility.n_fov, p.memory)
    names = ["predictor.ckpt"] if p.shared else [f"predictor_user{i}.ckpt"
                                                 for i in range(cfg.topology.n_users)]
    models = []
    for name in names:
        model = PredictorModel.create(cfg.mobility.n_fov, np.random.default_rng(0),
                                      memory=p.memory, hidden=p.hidden,
                                      learning_rate=p.learning_rate, batch_size=p.batch_size)
        model.load_params(directory / name)
        models.append(model)
    return FovPredictor(models, p.shared)


def make_env(cfg: ExperimentConfig, topology: NetworkTopology, predictor) -> VrEnv:
    return VrEnv(topology, cfg.phy, cfg.rendering, make_grid(cfg), cfg.mobility.diffusion,
                 scheme=Scheme(cfg.scheme), prediction=cfg.prediction, slots=cfg.agent.slots,
                 seed=cfg.seed, predictor=predictor if cfg.prediction else None,
                 memory=cfg.predictor.memory)


# ------------------------------------------------------------------ output

def _atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _fmt(x) -> str:
    return repr(float(x))


def metrics_row(result, wall_time: float | None) -> list:
    return [result.episode, _fmt(result.total_reward), _fmt(result.avg_qoe_per_user),
            _fmt(result.avg_latency), _fmt(result.accuracy),
            "" if wall_time is None else _fmt(wall_time)]


def read_metrics(path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    if rows and list(rows[0].keys()) != METRICS_COLUMNS:
        raise ValueError(f"{path} is not a metrics file")
    return rows


# ------------------------------------------------------------------ experiments

@dataclass
class ExperimentResult:
    out_dir: Path
    metrics: list[list]
    eval_metrics: list[list]
    predictor_accuracy: float | None
    controller: Controller

    def final_reward(self, window: int) -> float:
        rows = self.metrics[-window:]
        return float(np.mean([float(r[1]) for r in rows]))


def run_experiment(cfg: ExperimentConfig, out_dir, *, predictor=None,
                   controller: Controller | None = None, train: bool = True) -> ExperimentResult:
    """Train (or just run) one controller and write its artifacts to ``out_dir``.

    Files: ``config.yaml`` (resolved), ``metrics.csv``, ``eval_metrics.csv``
    when evaluation episodes are configured, ``episode_log.csv``,
    ``predictor_curve.csv`` when a GRU was trained, and ``checkpoints/``.
    """
    out = Path(out_dir)
    (out / "checkpoints").mkdir(parents=True, exist_ok=True)
    _atomic_write(out / "config.yaml", dump_config(cfg))

    curve = accuracy = None
    if cfg.prediction and predictor is None:
        run = make_predictor(cfg)
        predictor, curve, accuracy = run.predictor, run.curve, run.accuracy
    if curve is not None:
        curve.write_csv(out / "predictor_curve.csv")
    if cfg.prediction:
        save_predictor(predictor, out / "checkpoints")

    topology = make_topology(cfg)
    env = make_env(cfg, topology, predictor)
    a = cfg.agent
    if controller is None:
        controller = make_controller(a.algorithm, env, a.settings(), cfg.seed,
                                     a.episodes * a.slots)
    h = cfg.harness
    metrics, eval_metrics, log_rows = [], [], []
    for ep in range(a.episodes):
        t0 = time.perf_counter()
        want_log = h.episode_log == "all" or (h.episode_log == "last" and ep == a.episodes - 1
                                              and h.eval_episodes == 0)
        res = run_episode(env, controller, ep, train=train and controller.learns, log=want_log)
        wall = time.perf_counter() - t0 if h.record_wall_time and controller.learns else None
        metrics.append(metrics_row(res, wall))
        log_rows.extend([[ep] + r for r in res.log_rows] if h.episode_log == "all"
                        else res.log_rows)
    for j in range(h.eval_episodes):
        ep = a.episodes + j
        want_log = h.episode_log != "none" and j == h.eval_episodes - 1
        res = run_episode(env, controller, ep, train=False, log=want_log)
        eval_metrics.append(metrics_row(res, None))
        if want_log:
            log_rows = res.log_rows if h.episode_log == "last" else \
                log_rows + [[ep] + r for r in res.log_rows]

    _atomic_write(out / "metrics.csv", _csv_text(METRICS_COLUMNS, metrics))
    if eval_metrics:
        _atomic_write(out / "eval_metrics.csv", _csv_text(METRICS_COLUMNS, eval_metrics))
    if h.episode_log != "none":
        header = (["episode"] if h.episode_log == "all" else []) + EPISODE_LOG_COLUMNS
        _atomic_write(out / "episode_log.csv", _csv_text(header, log_rows))
    for name, params in controller.checkpoints().items():
        save_checkpoint(out / "checkpoints" / f"{name}.ckpt", params)
    return ExperimentResult(out, metrics, eval_metrics, accuracy, controller)


def load_controller(cfg: ExperimentConfig, env: VrEnv, checkpoint_dir) -> Controller:
    a = cfg.agent
    controller = make_controller(a.algorithm, env, a.settings(), cfg.seed, a.episodes * a.slots)
    found = {}
    for name in controller.checkpoints():
        path = Path(checkpoint_dir) / f"{name}.ckpt"
        if not path.exists():
            raise FileNotFoundError(path)
        found[name] = load_checkpoint(path)
    controller.load(found)
    return controller


def evaluate(cfg: ExperimentConfig, out_dir, *, checkpoint_dir=None, episodes: int | None = None):
    """Greedy rollouts of a trained (or non-learning) controller, no updates."""
    predictor = None
    if cfg.prediction:
        if checkpoint_dir is not None and cfg.predictor.kind == "gru" and \
                Path(checkpoint_dir, "predictor.ckpt").exists():
            predictor = load_predictor(cfg, Path(checkpoint_dir))
        else:
            predictor = make_predictor(cfg).predictor
    controller = None
    if checkpoint_dir is not None and cfg.agent.algorithm != "nearest":
        env = make_env(cfg, make_topology(cfg), predictor)
        controller = load_controller(cfg, env, checkpoint_dir)
    if episodes is not None:
        cfg = override(cfg, "agent.episodes", episodes)
    return run_experiment(cfg, out_dir, predictor=predictor, controller=controller, train=False)


# ------------------------------------------------------------------ sweeps

def _summary(result: ExperimentResult, window: int) -> tuple[float, float]:
    rows = result.eval_metrics or result.metrics
    rows = rows[-window:]
    return (float(np.mean([float(r[2]) for r in rows])),
            float(np.mean([float(r[3]) for r in rows])))


def _sweep_point(args):
    cfg, out, window = args
    res = run_experiment(cfg, out)
    return _summary(res, window)


def workers_from_env() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    return max(1, n)


def run_sweep(cfg: ExperimentConfig, axis: str, values, out_dir, workers: int | None = None):
    """One experiment per value of the dotted config ``axis``, plus summary.csv."""
    values = list(values)
    if not values:
        raise ConfigError("sweep needs at least one value")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    jobs = []
    for i, v in enumerate(values):
        point = override(cfg, axis, v)
        jobs.append((point, out / f"point{i:03d}_{_slug(v)}", cfg.harness.final_window))
    workers = workers_from_env() if workers is None else workers
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_point, jobs))
    else:
        results = [_sweep_point(j) for j in jobs]
    rows = [[str(v), _fmt(q), _fmt(lat)] for v, (q, lat) in zip(values, results)]
    _atomic_write(out / "summary.csv", _csv_text(SUMMARY_COLUMNS, rows))
    return rows


def _slug(value) -> str:
    text = str(value)
    return "".join(c if c.isalnum() or c in ".-" else "_" for c in text)[:40]


# ------------------------------------------------------------------ report

@dataclass
class ReportRow:
    rank: int
    algorithm: str
    mean_final_reward: float
    per_seed: list[tuple[int, float]]


def _run_identity(metrics_path: Path) -> tuple[str, int]:
    cfg_path = metrics_path.parent / "config.yaml"
    if cfg_path.exists():
        cfg = load_config(cfg_path)
        return cfg.agent.algorithm, cfg.seed
    return metrics_path.parent.name, 0


def compare_report(paths, window: int = 50) -> list[ReportRow]:
    """Rank algorithms by mean final reward over their runs (ties by name)."""
    groups: dict[str, list[tuple[int, float]]] = {}
    for p in paths:
        p = Path(p)
        if p.is_dir():
            p = p / "metrics.csv"
        rows = read_metrics(p)
        if not rows:
            raise ValueError(f"{p} has no rows")
        final = float(np.mean([float(r["total_reward"]) for r in rows[-window:]]))
        name, seed = _run_identity(p)
        groups.setdefault(name, []).append((seed, final))
    ranked = sorted(groups.items(), key=lambda kv: (-float(np.mean([v for _, v in kv[1]])), kv[0]))
    return [ReportRow(i + 1, name, float(np.mean([v for _, v in runs])), sorted(runs))
            for i, (name, runs) in enumerate(ranked)]


def format_report(rows: list[ReportRow]) -> str:
    body = [[r.rank, r.algorithm, _fmt(r.mean_final_reward),
             ";".join(f"{s}:{v!r}" for s, v in r.per_seed)] for r in rows]
    return _csv_text(["rank", "algorithm", "mean_final_reward", "per_seed"], body)
