"""Experiment presets, orchestration and result files."""

from __future__ import annotations

import csv
import enum
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .bounds import BoundInputs, sweep, total_bound
from .data import (
    DomainSet,
    TaskKind,
    conflict_profile,
    mapping_rank,
    read_jsonl,
    regression_grid,
    regression_suite,
    sample_dataset,
    toy_classification_suite,
)
from .metrics import evaluate
from .nnet import Loss, SgdConfig
from .subjective import HypothesisSet
from .training import TrainConfig, TrainingDiverged, fmt, oracle_mtl_train, osl_train, vanilla_train

log = logging.getLogger(__name__)


class Experiment(str, enum.Enum):
    REGRESSION_MAIN = "regression_main"
    REGRESSION_ABLATION = "regression_ablation"
    TOY_CLASSIFICATION = "toy_classification"
    RANK_ANALYSIS = "rank_analysis"
    BOUND_SWEEP = "bound_sweep"


REGRESSION_TRAIN = TrainConfig()
# A lone network trained episode by episode jitters around the mean
# function; fresh episodes and a smaller step let it settle.
VANILLA_TRAIN = replace(
    REGRESSION_TRAIN, K=1, epochs=1200, sgd=SgdConfig(0.0005, 0.9, 1e-4), fresh_episodes=True
)
TOY_TRAIN = TrainConfig(K=2, m=1000, n=2, epochs=50, layers=3, loss=Loss.CROSS_ENTROPY)

DEFAULT_SUITES = {
    Experiment.REGRESSION_MAIN: {"name": "regression"},
    Experiment.REGRESSION_ABLATION: {"name": "regression"},
    Experiment.TOY_CLASSIFICATION: {"name": "toy", "num_shapes": 10, "num_colors": 8, "noise": 0.05},
    Experiment.RANK_ANALYSIS: {"name": "toy", "num_shapes": 10, "num_colors": 8, "noise": 0.0},
    Experiment.BOUND_SWEEP: {"name": "regression"},
}

METRICS_HEADER = ["method", "K", "m", "n", "seed", "domain_id", "sub_err", "mod_err", "global_error"]


def build_suite(spec: Mapping) -> DomainSet:
    spec = dict(spec)
    name = spec.pop("name", "regression")
    if name == "regression":
        return regression_suite(spec.pop("weights", None))
    if name == "toy":
        return toy_classification_suite(**spec)
    raise ValueError(f"unknown suite {name!r} (expected 'regression' or 'toy')")


@dataclass(frozen=True)
class EvalSettings:
    grid_size: int = 200
    n_d: int = 300
    decision_batch_size: int = 2

    def __post_init__(self):
        if min(self.grid_size, self.n_d, self.decision_batch_size) < 1:
            raise ValueError("evaluation sizes must be >= 1")


def eval_rng(seed: int) -> np.random.Generator:
    """Generator used for metric sampling; shared by experiments and the eval command."""
    return np.random.default_rng([seed, 1])


def evaluate_set(H: HypothesisSet, ds: DomainSet, ev: EvalSettings, seed: int):
    return evaluate(H, ds, ev.n_d, ev.decision_batch_size, eval_rng(seed), ev.grid_size)


@dataclass
class ExperimentConfig:
    experiment: Experiment
    output_dir: Path
    seeds: list[int] = field(default_factory=lambda: [0, 1, 2, 3, 4])
    train: TrainConfig | None = None
    eval: EvalSettings = field(default_factory=EvalSettings)
    suite: dict = None
    K_values: list[int] = field(default_factory=lambda: [2, 3, 4])
    ablation: list[dict] = field(default_factory=lambda: [{"m": 250, "n": 2}, {"m": 50, "n": 2}, {"m": 250, "n": 1}])
    baselines: bool = True
    vanilla: TrainConfig | None = None
    dataset: str | None = None
    bound: dict | None = None
    bound_sweeps: dict = field(
        default_factory=lambda: {
            "m": [10, 30, 100, 300, 1000, 3000, 10000, 100000, 1000000],
            "n": [2, 4, 8, 16, 32, 64, 128, 256, 1024],
            "delta": [0.01, 0.05, 0.1, 0.25, 0.5, 0.75, 1.0],
        }
    )
    workers: int = 1

    def __post_init__(self):
        self.experiment = Experiment(self.experiment)
        self.output_dir = Path(self.output_dir)
        if not self.seeds:
            raise ValueError("seeds must be non-empty")
        self.seeds = [int(s) for s in self.seeds]
        if self.suite is None:
            self.suite = dict(DEFAULT_SUITES[self.experiment])
        if self.train is None:
            self.train = TOY_TRAIN if self.experiment is Experiment.TOY_CLASSIFICATION else REGRESSION_TRAIN
        if self.vanilla is None:
            self.vanilla = VANILLA_TRAIN if self.suite.get("name") == "regression" else replace(self.train, K=1)
        if self.bound is None:
            self.bound = {"vc_s": 1.0, "vc_sbar": 1.0, "m": 250, "n": 2, "N": 3, "delta": 0.05, "empirical_error": 0.0}

    @classmethod
    def from_dict(cls, d: Mapping, output_dir=None) -> ExperimentConfig:
        d = dict(d)
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown experiment config keys: {sorted(unknown)}")
        if "experiment" not in d:
            raise ValueError("experiment config needs an 'experiment' field")
        exp = Experiment(d["experiment"])
        base = TOY_TRAIN if exp is Experiment.TOY_CLASSIFICATION else REGRESSION_TRAIN
        if "train" in d:
            d["train"] = _override(base, d["train"])
        if "vanilla" in d:
            d["vanilla"] = _override(VANILLA_TRAIN, d["vanilla"])
        if "eval" in d:
            d["eval"] = EvalSettings(**d["eval"])
        if output_dir is not None:
            d["output_dir"] = output_dir
        if "output_dir" not in d:
            raise ValueError("experiment config needs an 'output_dir' (or pass --out)")
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["experiment"] = self.experiment.value
        d["output_dir"] = str(self.output_dir)
        d["train"] = self.train.to_dict()
        d["vanilla"] = self.vanilla.to_dict()
        return d


def _override(base: TrainConfig, overrides: Mapping) -> TrainConfig:
    merged = base.to_dict()
    for k, v in overrides.items():
        if k == "sgd":
            merged["sgd"] = {**merged["sgd"], **v}
        else:
            merged[k] = v
    return TrainConfig.from_dict(merged)


def load_config(path, output_dir=None) -> ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    return ExperimentConfig.from_dict(raw, output_dir)


# -- single training runs --------------------------------------------------

def run_tag(method: str, cfg: TrainConfig) -> str:
    return f"{method}_K{cfg.K}_m{cfg.m}_n{cfg.n}_seed{cfg.seed}"


def train_method(method: str, ds: DomainSet, cfg: TrainConfig, dataset=None):
    if method == "osl":
        return osl_train(ds, cfg, dataset)
    if method == "vanilla":
        h, report = vanilla_train(ds, cfg, dataset)
        return HypothesisSet([h], Loss.CROSS_ENTROPY if ds.kind is TaskKind.CLASSIFICATION else cfg.loss), report
    if method == "oracle":
        return oracle_mtl_train(ds, replace(cfg, K=max(cfg.K, len(ds))), None, dataset)
    raise ValueError(f"unknown method {method!r}")


def curve_rows(H: HypothesisSet, ds: DomainSet, grid_size: int) -> tuple[list[str], list[list[str]]]:
    X = regression_grid(grid_size)
    preds = [out[:, 0] for out in H.outputs(X)]
    targets = [d.label(X)[:, 0] for d in ds.domains]
    header = ["x"] + [f"pred_{k}" for k in range(H.K)] + [f"target_{d.id}" for d in ds.domains]
    rows = [
        [fmt(X[i, 0])] + [fmt(p[i]) for p in preds] + [fmt(t[i]) for t in targets]
        for i in range(len(X))
    ]
    return header, rows


def run_job(job: dict) -> dict:
    """Train and evaluate one (method, config, seed); never raises on divergence."""
    ds = build_suite(job["suite"])
    cfg: TrainConfig = job["train"]
    ev: EvalSettings = job["eval"]
    method = job["method"]
    tag = run_tag(method, cfg)
    try:
        H, report = train_method(method, ds, cfg)
    except TrainingDiverged as exc:
        log.warning("%s diverged: %s", tag, exc)
        return {"tag": tag, "method": method, "seed": cfg.seed, "error": str(exc)}
    evals = evaluate_set(H, ds, ev, cfg.seed)
    rows = [
        [method, H.K, cfg.m, cfg.n, cfg.seed, e.domain_id, fmt(e.sub_err), fmt(e.mod_err), fmt(report.final_global_error)]
        for e in evals
    ]
    out = {
        "tag": tag,
        "method": method,
        "seed": cfg.seed,
        "metrics": rows,
        "report_header": report.csv_header(),
        "report_rows": report.csv_rows(),
        "summary": {**report.summary(), "method": method, "m": cfg.m, "n": cfg.n, "seed": cfg.seed,
                    "seconds": report.seconds},
    }
    if ds.kind is TaskKind.REGRESSION:
        out["curve_header"], out["curve_rows"] = curve_rows(H, ds, ev.grid_size)
    return out


def plan_jobs(cfg: ExperimentConfig) -> list[dict]:
    jobs = []

    def add(method, train):
        jobs.append({"method": method, "train": train, "eval": cfg.eval, "suite": cfg.suite})

    for seed in cfg.seeds:
        if cfg.experiment is Experiment.REGRESSION_MAIN:
            for K in cfg.K_values:
                add("osl", replace(cfg.train, K=K, seed=seed))
            if cfg.baselines:
                add("vanilla", replace(cfg.vanilla, seed=seed))
                add("oracle", replace(cfg.train, K=3, seed=seed))
        elif cfg.experiment is Experiment.REGRESSION_ABLATION:
            for setting in cfg.ablation:
                add("osl", replace(cfg.train, seed=seed, **setting))
        elif cfg.experiment is Experiment.TOY_CLASSIFICATION:
            add("osl", replace(cfg.train, seed=seed))
            if cfg.baselines:
                add("oracle", replace(cfg.train, seed=seed))
                add("vanilla", replace(cfg.vanilla, seed=seed))
    return jobs


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _run_training_experiment(cfg: ExperimentConfig) -> dict:
    jobs = plan_jobs(cfg)
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            results = list(pool.map(run_job, jobs))
    else:
        results = [run_job(j) for j in jobs]

    out = cfg.output_dir
    (out / "reports").mkdir(parents=True, exist_ok=True)
    (out / "curves").mkdir(exist_ok=True)
    metrics, runs, failures = [], [], []
    for r in results:
        if "error" in r:
            failures.append({"tag": r["tag"], "method": r["method"], "seed": r["seed"], "error": r["error"]})
            continue
        _write_csv(out / "reports" / f"{r['tag']}.csv", r["report_header"], r["report_rows"])
        if "curve_rows" in r:
            _write_csv(out / "curves" / f"{r['tag']}.csv", r["curve_header"], r["curve_rows"])
        metrics.extend(r["metrics"])
        runs.append({"tag": r["tag"], **r["summary"]})
    _write_csv(out / "metrics.csv", METRICS_HEADER, metrics)
    return {"runs": runs, "failures": failures}


def _run_rank_analysis(cfg: ExperimentConfig) -> dict:
    if cfg.dataset:
        dataset = read_jsonl(cfg.dataset)
        source = cfg.dataset
    else:
        ds = build_suite(cfg.suite)
        dataset = sample_dataset(ds, cfg.train.m, cfg.train.n, np.random.default_rng(cfg.seeds[0]))
        source = f"sampled {cfg.suite} m={cfg.train.m} n={cfg.train.n} seed={cfg.seeds[0]}"
    pairs = dataset.pairs()
    profile = conflict_profile(pairs)
    rank = mapping_rank(pairs)
    hist: dict[int, int] = {}
    for c in profile.values():
        hist[c] = hist.get(c, 0) + 1
    result = {
        "source": source,
        "samples": len(pairs),
        "distinct_inputs": len(profile),
        "mapping_rank": rank,
        "profile_histogram": {str(k): v for k, v in sorted(hist.items())},
    }
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    _write_csv(
        cfg.output_dir / "conflict_profile.csv",
        ["input", "distinct_outputs"],
        [[json.dumps(list(k) if isinstance(k, tuple) else k), v] for k, v in profile.items()],
    )
    (cfg.output_dir / "rank.json").write_text(json.dumps(result, indent=2))
    return result


def _run_bound_sweep(cfg: ExperimentConfig) -> dict:
    spec = dict(cfg.bound)
    emp = float(spec.pop("empirical_error", 0.0))
    base = BoundInputs.from_dict(spec)
    rows = []
    for name, values in cfg.bound_sweeps.items():
        for r in sweep(base, name, values, emp):
            rows.append([name, r[name], *(fmt(r[k]) for k in
                         ("empirical_error", "domain_term", "instance_term", "subjective_term", "total"))])
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    _write_csv(
        cfg.output_dir / "bound_sweep.csv",
        ["field", "value", "empirical_error", "domain_term", "instance_term", "subjective_term", "total"],
        rows,
    )
    return {"base": total_bound(emp, base).to_dict()}


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Run one configured experiment and write its files under ``cfg.output_dir``."""
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    if cfg.experiment is Experiment.RANK_ANALYSIS:
        result = _run_rank_analysis(cfg)
    elif cfg.experiment is Experiment.BOUND_SWEEP:
        result = _run_bound_sweep(cfg)
    else:
        result = _run_training_experiment(cfg)
    summary = {"config": cfg.to_dict(), **result}
    (cfg.output_dir / "summary.json").write_text(json.dumps(summary, indent=2, default=_json_default))
    return summary


def _json_default(o: Any):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, Path):
        return str(o)
    if isinstance(o, enum.Enum):
        return o.value
    raise TypeError(f"not JSON serializable: {type(o).__name__}")
